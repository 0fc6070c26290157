"""
Command-line front end.

Every command writes CSV with a header row and a ``<file>.meta.json``
sidecar recording the configuration, seed, package version and kernel
backend. Options may also come from a JSON file given with ``--config``
whose keys mirror the long flags (``s_target`` for ``--s-target``);
flags given on the command line take precedence.

Exit codes: 0 on success, 2 for invalid usage or configuration, 1 for
failures while running.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import csv
import json
import math
import pathlib
import sys
from typing import Any, Sequence

import numpy as np

from . import __version__, analytics, cannings, demography, rfabc
from ._backend import BACKEND
from ._rng import task_generator
from .genealogy import functionals, simulate_time_changed
from .measures import BolthausenSznitman, Kingman, measure_from_dict
from .mutstats import FEATURE_GROUPS, FEATURE_NAMES, drop_mutations, summary_statistics, watterson_theta


class UsageError(Exception):
    """Invalid command line or configuration."""


# --------------------------------------------------------------------------
# Parsing helpers


def _parse_mapping(text: str | dict | None) -> dict[str, Any]:
    # Accepts a JSON object or "key=value,key=value".
    if text is None or text == "":
        return {}
    if isinstance(text, dict):
        return dict(text)
    text = text.strip()
    if text.startswith("{"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise UsageError(f"invalid JSON {text!r}: {exc}") from None
    out = {}
    for item in text.split(","):
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"expected key=value, got {item!r}")
        out[key.strip()] = float(value)
    return out


def _parse_ints(spec: str | Sequence[int] | int) -> list[int]:
    # "10,20,50" or an inclusive range "2:50" (optionally "2:50:4").
    if isinstance(spec, int):
        return [spec]
    if not isinstance(spec, str):
        return [int(v) for v in spec]
    out = []
    for part in spec.split(","):
        if ":" in part:
            bits = [int(b) for b in part.split(":")]
            if len(bits) not in (2, 3):
                raise UsageError(f"bad range {part!r}")
            step = bits[2] if len(bits) == 3 else 1
            out.extend(range(bits[0], bits[1] + 1, step))
        else:
            out.append(int(part))
    return out


def _measure(cfg: dict):
    if cfg.get("measure") is None:
        raise UsageError("--measure is required")
    try:
        return measure_from_dict({"family": cfg["measure"], "params": _parse_mapping(cfg.get("params"))})
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid measure: {exc}") from None


def _profile(cfg: dict) -> demography.DemographyProfile:
    spec = cfg.get("demography")
    if spec is None:
        return demography.Constant()
    try:
        if isinstance(spec, dict):
            return demography.profile_from_dict(spec)
        spec = spec.strip()
        if spec.startswith("{"):
            return demography.profile_from_dict(json.loads(spec))
        kind, _, rest = spec.partition(":")
        return demography.profile_from_dict({"kind": kind, **_parse_mapping(rest)})
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid demography {spec!r}: {exc}") from None


def _exponent(cfg: dict) -> demography.TimeScaleExponent:
    spec = cfg.get("beta_provenance") or "wright_fisher"
    try:
        if isinstance(spec, dict):
            return demography.exponent_from_dict(spec)
        name, _, value = spec.partition(":")
        d: dict[str, Any] = {"provenance": name}
        if value:
            d["parameter"] = d["value"] = float(value)
        return demography.exponent_from_dict(d)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid exponent {spec!r}: {exc}") from None


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg.get(k) is None]
    if missing:
        raise UsageError("missing required option(s): " + ", ".join("--" + k.replace("_", "-") for k in missing))


def _write_csv(path: pathlib.Path, header: Sequence[str], rows, meta: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    _write_meta(path, meta)


def _write_meta(path: pathlib.Path, meta: dict) -> None:
    side = path.with_name(path.name + ".meta.json")
    side.write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")


def _metadata(command: str, cfg: dict, **extra) -> dict:
    clean = {k: v for k, v in cfg.items() if k not in ("func", "config")}
    return {"command": command, "config": clean, "seed": int(cfg.get("seed") or 0),
            "version": __version__, "backend": BACKEND, **extra}


def _fmt(x) -> str:
    return repr(float(x))


def _pool_map(fn, tasks, threads: int):
    if threads <= 1:
        return [fn(t) for t in tasks]
    with concurrent.futures.ProcessPoolExecutor(threads) as pool:
        return list(pool.map(fn, tasks))


# --------------------------------------------------------------------------
# Commands


def _simulate_rep(args):
    measure, n, profile, exponent, theta, seed, rep = args
    rng = task_generator(seed, rep)
    tree = simulate_time_changed(measure, n, profile, exponent, rng)
    f = functionals(tree)
    row = [rep, _fmt(f["height"]), _fmt(f["total_length"]), _fmt(f["internal_length"])]
    if theta is not None:
        row.extend(_fmt(v) for v in summary_statistics(drop_mutations(tree, theta, rng)).values)
    return row, tree.to_newick()


def cmd_simulate(cfg: dict) -> int:
    _require(cfg, "n", "out")
    measure = _measure(cfg)
    profile, exponent = _profile(cfg), _exponent(cfg)
    n, reps, seed = int(cfg["n"]), int(cfg.get("reps") or 0), int(cfg.get("seed") or 0)
    if n < 2:
        raise UsageError("--n must be at least 2")
    if reps < 0:
        raise UsageError("--reps must be non-negative")
    theta = cfg.get("theta")
    if theta is None and cfg.get("s_target") is not None:
        theta = watterson_theta(measure, n, float(cfg["s_target"]), profile, exponent)
    theta = None if theta is None else float(theta)
    header = ["rep", "height", "total_length", "internal_length"]
    if theta is not None:
        header += FEATURE_NAMES
    tasks = [(measure, n, profile, exponent, theta, seed, r) for r in range(reps)]
    results = _pool_map(_simulate_rep, tasks, int(cfg.get("threads") or 1))
    out = pathlib.Path(cfg["out"])
    _write_csv(out, header, [r for r, _ in results],
               _metadata("simulate", cfg, theta=theta, measure=measure.to_dict()))
    if cfg.get("newick"):
        pathlib.Path(cfg["newick"]).write_text("".join(t + "\n" for _, t in results))
    return 0


def cmd_pshare(cfg: dict) -> int:
    _require(cfg, "n", "m", "out")
    measure = _measure(cfg)
    ns, ms = _parse_ints(cfg["n"]), _parse_ints(cfg["m"])
    if min(ms) < 1:
        raise UsageError("--m values must be positive")
    rows = []
    for m in ms:
        for n in ns:
            if m > n:
                continue
            if isinstance(measure, BolthausenSznitman) and n > analytics.N_MAX:
                p = analytics.p_nm_bsz(n, m)
            else:
                p = analytics.p_nm(measure, n, m)
            closed = analytics.p_nm_kingman_closed(n, m) if m >= 2 else 0.0
            limit = analytics.p_nm_kingman_limit(m) if m >= 2 else 0.0
            rows.append([n, m, _fmt(p), _fmt(closed), _fmt(limit)])
    _write_csv(pathlib.Path(cfg["out"]), ["n", "m", "p_nm", "kingman_closed", "kingman_limit"],
               rows, _metadata("pshare", cfg, measure=measure.to_dict(), n_max=analytics.N_MAX))
    return 0


def _classes(cfg: dict) -> list[rfabc.ModelClass]:
    spec = cfg.get("classes")
    if not spec:
        raise UsageError("--classes is required (e.g. Beta,Growth)")
    if isinstance(spec, str):
        spec = [s.strip() for s in spec.split(",") if s.strip()]
    out = []
    for item in spec:
        try:
            if isinstance(item, dict):
                out.append(rfabc.model_class_from_dict(item))
            elif item.lower() == "beta":
                out.append(rfabc.BetaClass())
            elif item.lower() == "growth":
                aw = cfg.get("atom_weight")
                out.append(rfabc.GrowthClass(atom_weight=0.1 if aw is None else float(aw)))
            else:
                raise ValueError(f"unknown class {item!r}; use Beta, Growth or a JSON object")
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid model class: {exc}") from None
    if len(out) < 2:
        raise UsageError("need at least two model classes")
    return out


def cmd_abc(cfg: dict) -> int:
    _require(cfg, "out")
    classes = _classes(cfg)
    n = int(cfg.get("n") or 100)
    rows = int(cfg.get("rows_per_class") or 200)
    n_trees = int(cfg.get("n_trees") or 50)
    seed = int(cfg.get("seed") or 0)
    if cfg.get("independent_seed"):
        seed = int(np.random.SeedSequence([seed, 1]).generate_state(1)[0])
    threads = int(cfg.get("threads") or 1)
    groups = cfg.get("groups")
    if isinstance(groups, str):
        groups = [g.strip() for g in groups.split(",")]
    if groups is not None and any(g not in FEATURE_GROUPS for g in groups):
        raise UsageError(f"unknown statistic group in {groups}; expected {list(FEATURE_GROUPS)}")
    criterion = cfg.get("criterion") or "gini"
    if criterion not in rfabc.CRITERIA:
        raise UsageError(f"--criterion must be one of {sorted(rfabc.CRITERIA)}")
    out = pathlib.Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    meta = _metadata("abc", cfg, effective_seed=seed, classes=[c.to_dict() for c in classes])

    table = rfabc.simulate_reference_table(classes, rows, n, seed, threads)
    (out / "reference_table.csv").write_text(table.to_csv())
    _write_meta(out / "reference_table.csv", meta)
    forest = rfabc.train_forest(table, n_trees, cfg.get("mtry"), seed, groups,
                                workers=threads, criterion=criterion)
    (out / "forest.json").write_text(forest.to_json())
    oob = rfabc.oob_error(forest, table)
    _write_csv(out / "oob.csv", ["class", "oob_error"],
               [[c, _fmt(e)] for c, e in oob.per_class.items()] + [["overall", _fmt(oob.overall)]],
               {**meta, "n_skipped": oob.n_skipped, "forest": forest.config})
    imp = rfabc.variable_importance(forest)
    ranked = sorted(imp.items(), key=lambda kv: -kv[1])
    _write_csv(out / "importance.csv", ["statistic", "importance"],
               [[k, _fmt(v)] for k, v in ranked], meta)
    (out / "report.json").write_text(json.dumps(
        {"oob": oob.to_dict(), "importances": imp, "metadata": meta}, indent=2, default=str) + "\n")
    return 0


def cmd_cannings_validate(cfg: dict) -> int:
    _require(cfg, "out")
    measure = _measure(cfg)
    variant = (cfg.get("variant") or "A").upper()
    grid = _parse_ints(cfg.get("N_grid") or "100,400,1600")
    n = int(cfg.get("n") or 5)
    reps = int(cfg.get("reps") or 1000)
    seed = int(cfg.get("seed") or 0)
    if not grid or min(grid) < n:
        raise UsageError("every population size must be at least the sample size")
    try:
        # every grid size must pass validation, not just the first
        models = [
            cannings.ModifiedMoranModel(
                measure, N, variant,
                None if cfg.get("gamma_b") is None else float(cfg["gamma_b"]),
                float(cfg.get("rho") or 0.0),
            )
            for N in grid
        ]
        models[0].exponent()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    model = models[0]
    report = cannings.convergence_check(model, n, grid, reps, seed)
    out = pathlib.Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_csv())
    _write_meta(out, _metadata("cannings-validate", cfg, decreasing=report.decreasing))
    return 0


# --------------------------------------------------------------------------
# Entry point


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with options; flags override it")
    p.add_argument("--seed", type=int, help="master seed (default 0)")
    p.add_argument("--threads", type=int, help="worker processes (default 1)")
    p.add_argument("--out", help="output file (directory for abc)")


def _measure_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--measure", help="kingman, beta, bsz, dirac or eldon_wakeley")
    p.add_argument("--params", help='measure parameters, "a=0.5,b=1.5" or JSON; beta accepts alpha=...')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmcoal", description="Multiple-merger coalescent toolkit.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate genealogies and summary statistics")
    _common(p)
    _measure_flags(p)
    p.add_argument("--n", type=int, help="sample size")
    p.add_argument("--theta", type=float, help="mutation rate; adds statistic columns")
    p.add_argument("--s-target", dest="s_target", type=float,
                   help="set theta so that E(S) equals this value")
    p.add_argument("--demography", help='"constant", "exponential:rho=2", "piecewise" JSON ...')
    p.add_argument("--beta-provenance", dest="beta_provenance",
                   help='time-scale exponent, e.g. "wright_fisher" or "dirac_modified_moran:1.5"')
    p.add_argument("--reps", type=int, help="number of genealogies (default 0)")
    p.add_argument("--newick", help="also write one Newick tree per line to this file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pshare", help="grid of root-sharing probabilities")
    _common(p)
    _measure_flags(p)
    p.add_argument("--n", help='sample sizes, "10,20,50" or "2:50"')
    p.add_argument("--m", help="subsample sizes, same syntax")
    p.set_defaults(func=cmd_pshare)

    p = sub.add_parser("abc", help="random-forest model selection pipeline")
    _common(p)
    p.add_argument("--classes", help="comma-separated model classes (Beta, Growth)")
    p.add_argument("--n", type=int, help="sample size (default 100)")
    p.add_argument("--rows-per-class", dest="rows_per_class", type=int, help="default 200")
    p.add_argument("--n-trees", dest="n_trees", type=int, help="default 50")
    p.add_argument("--mtry", type=int, help="features per split (default ceil(sqrt(F)))")
    p.add_argument("--criterion", choices=sorted(rfabc.CRITERIA), help="split criterion (default gini)")
    p.add_argument("--groups", help="statistic groups, e.g. AF,S,pi,O (default all)")
    p.add_argument("--atom-weight", dest="atom_weight", type=float,
                   help="prior probability of no growth in the Growth class (default 0.1)")
    p.add_argument("--independent-seed", dest="independent_seed", action="store_const", const=True,
                   help="rerun with a seed stream independent of --seed")
    p.set_defaults(func=cmd_abc)

    p = sub.add_parser("cannings-validate", help="convergence of modified Moran genealogies")
    _common(p)
    _measure_flags(p)
    p.add_argument("--variant", choices=["A", "B", "a", "b"], help="default A")
    p.add_argument("--gamma-b", dest="gamma_b", type=float, help="variant B exponent in (1, 2)")
    p.add_argument("--rho", type=float, help="growth rate (default 0)")
    p.add_argument("--n", type=int, help="sample size (default 5)")
    p.add_argument("--N-grid", dest="N_grid", help='population sizes (default "100,400,1600")')
    p.add_argument("--reps", type=int, help="replicates per size (default 1000)")
    p.set_defaults(func=cmd_cannings_validate)
    return parser


def _merge_config(args: argparse.Namespace) -> dict:
    cfg = {k: v for k, v in vars(args).items() if v is not None}
    if args.config:
        try:
            loaded = json.loads(pathlib.Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"invalid JSON in {args.config}: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError(f"config {args.config} must hold a JSON object")
        for k, v in loaded.items():
            cfg.setdefault(k.replace("-", "_"), v)
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _merge_config(args)
        return args.func(cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"mmcoal: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"mmcoal: error: {exc.filename or ''}: {exc.strerror or exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - reported as a runtime failure
        print(f"mmcoal: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
