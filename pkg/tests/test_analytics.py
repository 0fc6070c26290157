import functools
import itertools
import math

import numpy as np
import pytest

from mmcoal import analytics as A
from mmcoal import demography as D
from mmcoal.genealogy import simulate, simulate_time_changed
from mmcoal.measures import Beta, BolthausenSznitman, Dirac, EldonWakeley, Kingman, merger_rate
from mmcoal.mutstats import drop_mutations, observable_clade_vector

from .conftest import mc_close


def _enumerated_pnm(measure, n, m):
    """Root sharing by exhaustive enumeration of the partition-valued chain."""

    @functools.lru_cache(maxsize=None)
    def walk(blocks):
        b = len(blocks)
        rates = {k: merger_rate(measure, b, k) for k in range(2, b + 1)}
        total = sum(math.comb(b, k) * r for k, r in rates.items())
        out = 0.0
        for k in range(2, b + 1):
            for chosen in itertools.combinations(range(b), k):
                prob = rates[k] / total
                if k == b:
                    tagged = sum(1 for i in chosen if min(blocks[i]) < m)
                    out += prob * (tagged >= 2)
                    continue
                merged = frozenset().union(*(blocks[i] for i in chosen))
                rest = [blocks[i] for i in range(b) if i not in chosen]
                state = tuple(sorted(rest + [merged], key=min))
                out += prob * walk(state)
        return out

    return walk(tuple(frozenset([i]) for i in range(n)))


# --------------------------------------------------------------------------
# Root sharing


def test_pnm_kingman_examples():
    assert A.p_nm(Kingman(), 3, 2) == pytest.approx(2 / 3, abs=1e-15)
    assert A.p_nm(Kingman(), 4, 2) == pytest.approx(5 / 9, abs=1e-15)
    assert A.p_nm_kingman_closed(4, 2) == pytest.approx(5 / 9, abs=1e-15)
    assert A.p_nm_kingman_closed(7, 7) == 1.0
    assert A.p_nm_kingman_limit(10) == pytest.approx(9 / 11)


@pytest.mark.parametrize("measure", [Kingman(), BolthausenSznitman(), Beta(0.5, 1.5), Dirac(0.3), EldonWakeley(0.4)])
def test_pnm_boundaries(measure):
    assert A.p_nm(measure, 12, 12) == pytest.approx(1.0, abs=1e-14)
    assert A.p_nm(measure, 12, 1) == 0.0


def test_pnm_bsz_three_two():
    assert A.p_nm(BolthausenSznitman(), 3, 2) == pytest.approx(0.75, abs=1e-15)
    assert A.p_nm_bsz(3, 2) == 0.75


@pytest.mark.parametrize("measure", [Kingman(), BolthausenSznitman(), Beta(1.5, 0.5), Dirac(0.3), Dirac(0.8), EldonWakeley(0.5)])
@pytest.mark.parametrize("n,m", [(4, 2), (5, 2), (5, 3), (6, 4)])
def test_pnm_matches_enumeration(measure, n, m):
    assert A.p_nm(measure, n, m) == pytest.approx(_enumerated_pnm(measure, n, m), abs=1e-12)


def test_pnm_preconditions():
    with pytest.raises(ValueError, match="N_MAX"):
        A.p_nm(Kingman(), A.N_MAX + 1, 2)
    with pytest.raises(ValueError):
        A.p_nm(Kingman(), 5, 6)
    with pytest.raises(ValueError):
        A.p_nm_bsz(2, 2)
    with pytest.raises(MemoryError):
        A.p_nm_bsz(A.BSZ_N_MAX + 1, 2)


def test_bsz_dropped_mass_negligible():
    det = A.p_nm_bsz_detailed(A.BSZ_N_MAX, 3)
    assert det.dropped_mass < 1e-12


def test_last_merger_mc():
    est = A.p_nm_last_merger_mc(Kingman(), 4, 2, 200_000, 1)
    assert est.within(5 / 9)
    assert A.p_nm_last_merger_mc(Dirac(0.5), 6, 6, 100, 2).mean == 1.0
    est = A.p_nm_last_merger_mc(Dirac(0.5), 10, 5, 20_000, 3)
    assert est.within(A.p_nm(Dirac(0.5), 10, 5))
    with pytest.raises(ValueError):
        A.p_nm_last_merger_mc(Kingman(), 5, 2, 10)


def test_last_merger_sharing_formula():
    # blocks of sizes 3 and 1 among n = 4; m = 2 labels share a block
    # with probability (3*2 + 0)/(4*3) = 1/2
    assert A.last_merger_sharing(np.array([3, 1]), 4, 2) == pytest.approx(0.5)


def test_pnm_table_grows():
    t = A.pnm_table(Beta(0.5, 1.5), 3)
    before = t(20, 3)
    assert A.p_nm(Beta(0.5, 1.5), 20, 7) > 0
    assert t(20, 3) == before


# --------------------------------------------------------------------------
# Total length


def test_expected_length_examples():
    assert A.expected_total_length(Kingman(), 2) == pytest.approx(2.0)
    h9 = sum(1 / i for i in range(1, 10))
    assert A.expected_total_length(Kingman(), 10) == pytest.approx(2 * h9, rel=1e-14)
    assert A.expected_total_length(Dirac(0.5), 3) == pytest.approx(3.0, rel=1e-14)


@pytest.mark.parametrize("measure", [BolthausenSznitman(), Beta(1.5, 0.5), Dirac(0.5)])
def test_expected_length_mc(measure):
    rng = np.random.default_rng(4)
    ls = [simulate(measure, 8, rng).branch_lengths.sum() for _ in range(40_000)]
    assert mc_close(ls, A.expected_total_length(measure, 8))


@pytest.mark.parametrize(
    "profile,exponent",
    [
        (D.ExponentialGrowth(2.0), D.TimeScaleExponent.wright_fisher()),
        (D.ExponentialGrowth(0.7), D.TimeScaleExponent.dirac_modified_moran(1.5)),
        (D.PiecewiseConstant((0.3, 1.0), (1.0, 0.2, 2.0)), D.TimeScaleExponent.wright_fisher()),
    ],
)
@pytest.mark.parametrize("measure", [Kingman(), Dirac(0.4)])
def test_expected_length_time_changed_mc(measure, profile, exponent):
    rng = np.random.default_rng(8)
    ls = [simulate_time_changed(measure, 6, profile, exponent, rng).branch_lengths.sum() for _ in range(30_000)]
    assert mc_close(ls, A.expected_total_length(measure, 6, profile, exponent))


def test_expected_length_growth_limits():
    base = A.expected_total_length(Beta(0.5, 1.5), 12)
    tiny = A.expected_total_length(Beta(0.5, 1.5), 12, D.ExponentialGrowth(1e-9), D.TimeScaleExponent.wright_fisher())
    assert tiny == pytest.approx(base, rel=1e-7)
    fast = A.expected_total_length(Kingman(), 12, D.ExponentialGrowth(50.0), D.TimeScaleExponent.wright_fisher())
    assert fast < base


# --------------------------------------------------------------------------
# Observable clades and dust


def test_bsz_beta_params():
    assert A.bsz_f1T_beta_params(2.0) == (0.5, 0.5)
    a, b = A.bsz_f1T_beta_params(1e-9)
    assert a == pytest.approx(1.0) and b == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ValueError):
        A.bsz_f1T_beta_params(0.0)


def test_exact_scaled_clade_small_cases():
    # n = 2: the first merger joins everything, so O = 2
    assert A.expected_scaled_observable_clade(Kingman(), 2, 3.0) == pytest.approx(1.0)
    # theta -> infinity stops right after the first merger of 1. For n = 3
    # under Kingman, 1 is in the first merger with probability 2/3 (O = 2)
    # and otherwise joins the merged pair (O = 3).
    assert A.expected_scaled_observable_clade(Kingman(), 3, 1e12) == pytest.approx(7 / 9, rel=1e-9)


@pytest.mark.parametrize("measure,n", [(BolthausenSznitman(), 30), (Dirac(0.5), 20), (Kingman(), 15)])
def test_exact_scaled_clade_mc(measure, n):
    rng = np.random.default_rng(12)
    o = [observable_clade_vector(drop_mutations(simulate(measure, n, rng), 2.0, rng))[0] / n
         for _ in range(30_000)]
    assert mc_close(o, A.expected_scaled_observable_clade(measure, n, 2.0))


def test_dust_chain_dirac_means():
    est = A.dust_jump_chain_mc(Dirac(0.5), 3, 20_000, 5)
    for k, e in enumerate(est, start=1):
        assert e.within(1 - 0.5**k), (k, e)
    assert A.dust_expected_f1(Dirac(0.5), 2) == 0.75


def test_dust_chain_beta_means():
    measure = Beta(2.5, 1.0)
    est = A.dust_jump_chain_mc(measure, 2, 20_000, 6)
    for k, e in enumerate(est, start=1):
        assert e.within(A.dust_expected_f1(measure, k)), (k, e)


def test_dust_chain_paths_increase():
    chain = A.DustJumpChain.for_measure(Dirac(0.3))
    rng = np.random.default_rng(0)
    for _ in range(500):
        f = chain.frequencies(rng, 6)
        assert np.all(np.diff(f) > 0) and f[-1] < 1


def test_dust_chain_unsupported():
    with pytest.raises(ValueError):
        A.DustJumpChain.for_measure(Kingman())
    with pytest.raises(NotImplementedError):
        A.DustJumpChain.for_measure(Beta(1.5, 1.0))


def test_dirac_pmf_first_atom():
    pmf = A.dirac_f1_first_jump_pmf(0.6, 25)
    assert pmf.atoms[frozenset([1])] == pytest.approx(0.6, abs=1e-15)
    assert pmf.total_mass >= 0.999
    assert sum(pmf.by_value().values()) == pytest.approx(pmf.total_mass)
    with pytest.raises(ValueError):
        A.dirac_f1_first_jump_pmf(0.4, 10)


def test_dirac_pmf_first_atom_mc():
    samples = A.dust_f1_first_jump_samples(0.6, 20_000, 3)
    assert mc_close([s == frozenset([1]) for s in samples], 0.6)


def test_onK_candidates():
    c = A.dust_onK_mean(Dirac(0.5), 2.0)
    assert c.printed == pytest.approx(0.9)
    assert c.naive == pytest.approx(0.6)
    assert c.conventions[("rate_ratio", 0)] == pytest.approx(0.2)
    assert c.conventions[("complement", 0)] == pytest.approx(0.5)
    assert c.exchangeable == pytest.approx(0.75)


def test_arbitrate():
    est = A.McEstimate(0.74, 0.01, 100)
    key, dist = A.arbitrate(est, {"a": 0.9, "b": 0.75})
    assert key == "b" and dist == pytest.approx(1.0)
