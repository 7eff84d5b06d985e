"""Command-line front end: point evaluations, sweeps, bounds, validation.

CSV rows follow a fixed schema and are byte-identical across repeated runs
with the same flags and master seed, independent of the worker count.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import bounds as bounds_mod
from . import mc_oracle
from .channel import PowerConfig, SeedSpec, db_to_linear, default_seed
from .numerics import NoSignChangeError, NonFiniteIntegrandError
from .plotting import SERIES_ORDER, render_sweep
from .schemes import (
    BoundaryNotFoundError,
    CfParams,
    af_expected_rate,
    af_throughput,
    cf_decode_probability,
    cf_decode_probability_quadrature,
    cf_expected_rate,
    cf_throughput,
    daf_finite_expected_rate,
    daf_throughput,
    df_finite_expected_rate,
    df_threshold_cap,
    df_throughput,
)
from .schemes.daf import daf_proposition_objective

CSV_HEADER = "ps_db,pr_db,scheme,metric,layers,value_nats,params,n_mc,seed"

EXIT_FLAGS = 2
EXIT_NUMERIC = 3
EXIT_PARTIAL = 4
EXIT_VALIDATION = 5

_NUMERIC_ERRORS = (
    BoundaryNotFoundError,
    NoSignChangeError,
    NonFiniteIntegrandError,
    ArithmeticError,
    ValueError,
)

SCHEMES = ("df", "af", "daf", "cf")
BOUNDS = ("cutset", "rc", "dfub")


@dataclass
class SweepSpec:
    """Validated sweep request: power grids, series selection, outputs."""

    ps_db: list[float]
    pr_db: list[float]
    schemes: list[str] = field(default_factory=list)
    bounds: list[str] = field(default_factory=list)
    metric: str = "throughput"
    layers: str = "1"
    out_path: Path = Path("sweep.csv")
    plot_path: Optional[Path] = None

    def __post_init__(self) -> None:
        for tag in self.schemes:
            if tag not in SCHEMES:
                raise ValueError(f"unknown scheme {tag!r}")
        for tag in self.bounds:
            if tag not in BOUNDS:
                raise ValueError(f"unknown bound {tag!r}")
        if self.metric not in ("throughput", "expected"):
            raise ValueError(f"unknown metric {self.metric!r}")
        problem = _check_layers(self.schemes, self.bounds, self.metric, self.layers)
        if problem:
            raise ValueError(problem)


def _fmt(v: float) -> str:
    if isinstance(v, float) and math.isnan(v):
        return "nan"
    return f"{v:.10g}"


def _params_str(params: dict) -> str:
    parts = []
    for key, val in params.items():
        if isinstance(val, bool):
            parts.append(f"{key}={int(val)}")
        elif isinstance(val, (int, float, np.floating)):
            parts.append(f"{key}={float(val):.6g}")
        elif isinstance(val, (list, tuple)):
            parts.append(
                f"{key}=" + "|".join(f"{float(q):.6g}" for q in val)
            )
    return ";".join(parts)


def _compact_params(res) -> dict:
    keep = {}
    for key in ("s", "s0", "s1", "distortion", "relay_rate", "p_c", "a_th",
                "xi", "gate", "power", "r1", "r2", "s2", "s_cap"):
        if key in res.params:
            keep[key] = res.params[key]
    for key in ("s", "gamma2"):
        if key in res.params and isinstance(res.params[key], list):
            keep[key] = res.params[key]
    return keep


def evaluate_series(
    series: str,
    metric: str,
    layers: str,
    ps_db: float,
    pr_db: float,
    seed: SeedSpec,
    samples: int,
    table_method: str,
    cache_dir: Optional[str],
) -> dict:
    """One CSV row worth of data for a scheme or bound at a power point."""
    p = PowerConfig.from_db(ps_db, pr_db)
    n_mc = 0
    if series in SCHEMES:
        if metric == "throughput":
            if series == "df":
                res = df_throughput(p)
            elif series == "af":
                res = af_throughput(p, method=table_method, n=samples, seed=seed,
                                    cache_dir=cache_dir)
                n_mc = samples if table_method == "monte-carlo" else 0
            elif series == "daf":
                res = daf_throughput(p)
            else:
                res = cf_throughput(p, method=table_method, n=samples,
                                    seed=seed, cache_dir=cache_dir)
                n_mc = res.diagnostics.get("n_mc", 0)
        else:
            if series in ("df", "daf"):
                k = int(layers)
                res = (df_finite_expected_rate if series == "df" else daf_finite_expected_rate)(
                    k, p, seed=seed
                )
                n_mc = 0 if series == "df" else 50_000
            elif series == "af":
                res = af_expected_rate(p, method=table_method, n=samples, seed=seed,
                                       cache_dir=cache_dir)
                n_mc = res.diagnostics.get("n_mc", 0)
            else:
                res = cf_expected_rate(p, method=table_method, n=samples, seed=seed,
                                       cache_dir=cache_dir)
                n_mc = res.diagnostics.get("n_mc", 0)
    elif series in BOUNDS:
        if series == "cutset":
            res = bounds_mod.cutset_throughput(p) if metric == "throughput" \
                else bounds_mod.cutset_expected_rate(p)
        elif series == "rc":
            res = bounds_mod.rc_throughput(p)
        else:
            res = bounds_mod.dfub_cutset(p)
    else:
        raise ValueError(f"unknown series {series!r}")

    row_layers = layers
    if series in BOUNDS:
        row_layers = "1" if metric == "throughput" else "inf"
    return {
        "ps_db": ps_db,
        "pr_db": pr_db,
        "scheme": series,
        "metric": metric,
        "layers": row_layers,
        "value_nats": res.value_nats,
        "params": _params_str(_compact_params(res)),
        "n_mc": n_mc,
        "seed": seed.master_seed,
    }


def _row_to_csv(row: dict) -> str:
    return ",".join(
        [
            _fmt(row["ps_db"]),
            _fmt(row["pr_db"]),
            row["scheme"],
            row["metric"],
            str(row["layers"]),
            _fmt(row["value_nats"]),
            row["params"],
            str(row["n_mc"]),
            str(row["seed"]),
        ]
    )


def _parse_grid(text: str) -> list[float]:
    if ":" in text:
        pieces = text.split(":")
        if len(pieces) != 3:
            raise argparse.ArgumentTypeError(f"grid must be start:stop:step, got {text!r}")
        start, stop, step = (float(q) for q in pieces)
        if step <= 0 or stop < start:
            raise argparse.ArgumentTypeError("grid requires step > 0 and stop >= start")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return [start + i * step for i in range(count)]
    return [float(text)]


def _series_sort_key(tag: str) -> int:
    return SERIES_ORDER.index(tag) if tag in SERIES_ORDER else len(SERIES_ORDER)


def _check_layers(schemes: list[str], bound_tags: list[str], metric: str, layers: str) -> Optional[str]:
    if metric == "throughput":
        if layers != "1":
            return "throughput rows are single-layer; use --layers 1"
        if "dfub" in bound_tags:
            return "dfub bounds expected-rate only"
    else:
        finite = [s for s in schemes if s in ("df", "daf")]
        continuous = [s for s in schemes if s in ("af", "cf")]
        if layers == "inf" and finite:
            return "df/daf expected-rate needs --layers 1|2|3"
        if layers != "inf" and continuous:
            return "af/cf expected-rate is continuous; use --layers inf"
        if "rc" in bound_tags:
            return "rc bounds throughput only"
    return None


def _seed_from_args(args) -> SeedSpec:
    if args.seed is not None:
        return SeedSpec(args.seed)
    return default_seed()


def _eval_task(task):
    series, metric, layers, ps_db, pr_db, seed_master, samples, table_method, cache_dir = task
    seed = SeedSpec(seed_master)
    try:
        return evaluate_series(series, metric, layers, ps_db, pr_db, seed,
                               samples, table_method, cache_dir)
    except Exception as exc:  # partial failure becomes a NaN sentinel row
        return {
            "ps_db": ps_db, "pr_db": pr_db, "scheme": series, "metric": metric,
            "layers": layers, "value_nats": float("nan"),
            "params": f"error={type(exc).__name__}", "n_mc": 0, "seed": seed_master,
        }


def cmd_point(args) -> int:
    seed = _seed_from_args(args)
    problem = _check_layers([args.scheme], [], args.metric, args.layers)
    if problem:
        print(f"error: {problem}", file=sys.stderr)
        return EXIT_FLAGS
    try:
        row = evaluate_series(
            args.scheme, args.metric, args.layers, args.ps_db, args.pr_db,
            seed, args.samples, args.table_method, args.cache_dir,
        )
    except _NUMERIC_ERRORS as exc:
        print(f"numeric failure in {args.scheme}/{args.metric}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(CSV_HEADER)
    print(_row_to_csv(row))
    return 0


def cmd_bounds(args) -> int:
    seed = _seed_from_args(args)
    print(CSV_HEADER)
    tasks = [
        ("cutset", "throughput", "1"),
        ("rc", "throughput", "1"),
        ("cutset", "expected", "inf"),
        ("dfub", "expected", "inf"),
    ]
    for series, metric, layers in tasks:
        row = evaluate_series(series, metric, layers, args.ps_db, args.pr_db,
                              seed, args.samples, args.table_method, args.cache_dir)
        print(_row_to_csv(row))
    return 0


def cmd_sweep(args) -> int:
    seed = _seed_from_args(args)
    try:
        spec = SweepSpec(
            ps_db=_parse_grid(args.ps_db),
            pr_db=_parse_grid(args.pr_db),
            schemes=[s for s in args.schemes.split(",") if s] if args.schemes else [],
            bounds=[b for b in args.bounds.split(",") if b] if args.bounds else [],
            metric=args.metric,
            layers=args.layers,
            out_path=Path(args.out),
            plot_path=Path(args.plot) if args.plot else None,
        )
    except (ValueError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FLAGS

    tasks = [
        (series, spec.metric, spec.layers, ps_db, pr_db, seed.master_seed,
         args.samples, args.table_method, args.cache_dir)
        for ps_db in spec.ps_db
        for pr_db in spec.pr_db
        for series in spec.schemes + spec.bounds
    ]
    if args.jobs > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.jobs) as pool:
            rows = list(pool.map(_eval_task, tasks))
    else:
        rows = [_eval_task(t) for t in tasks]

    rows.sort(key=lambda r: (r["ps_db"], r["pr_db"], _series_sort_key(r["scheme"])))
    spec.out_path.parent.mkdir(parents=True, exist_ok=True)
    lines = [CSV_HEADER] + [_row_to_csv(r) for r in rows]
    spec.out_path.write_text("\n".join(lines) + "\n")

    if spec.plot_path is not None:
        render_sweep(rows, spec.plot_path, spec.metric)

    bad = sum(1 for r in rows if math.isnan(r["value_nats"]))
    if bad:
        print(f"{bad} row(s) failed; marked nan", file=sys.stderr)
        return EXIT_PARTIAL
    return 0


# ---------------------------------------------------------------------------
# validation suites


class _Check:
    def __init__(self) -> None:
        self.failures: list[str] = []

    def run(self, name: str, metric: float, tol: float, kind: str = "residual") -> None:
        ok = metric <= tol
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {name}: {kind}={metric:.3e} tol={tol:.3e}")
        if not ok:
            self.failures.append(name)

    def flag(self, name: str, message: str) -> None:
        print(f"[FLAG] {name}: {message}")


def _suite_alamouti(check: _Check, samples: int, seed: SeedSpec) -> None:
    from .channel import sample_fading
    from .gains import gain_af1, gain_af2

    p = PowerConfig(1.0, 10.0)
    fad = sample_fading(seed.substream(1), samples)
    mi = mc_oracle.alamouti_af_mutual_info(fad, p)
    ref = np.log1p(p.ps * gain_af2(fad, p))
    rel = np.max(np.abs(mi - ref) / np.maximum(np.abs(ref), 1e-300))
    check.run("alamouti-equivalence", float(rel), 1e-9, "max-rel")

    single = sample_fading(seed.substream(2), samples)
    fad1 = type(single)(h1=single.h1, h2=np.zeros_like(single.h2),
                        hr1=single.hr1, hr2=np.zeros_like(single.hr2))
    mi1 = mc_oracle.alamouti_af_mutual_info(fad1, p)
    ref1 = np.log1p(p.ps * gain_af1(fad1.ar1, fad1.a1, p))
    rel1 = np.max(np.abs(mi1 - ref1) / np.maximum(np.abs(ref1), 1e-300))
    check.run("alamouti-single-relay-degeneracy", float(rel1), 1e-9, "max-rel")


def _df_grid() -> list[tuple[float, float, float]]:
    triples = []
    for ps in (0.5, 1.0, 4.0):
        for pr in (0.5, 2.0, 10.0):
            for s in (0.4, 0.9):
                triples.append((ps, pr, s))
    return triples[:20] + [(1.0, 5.0, 1.1), (4.0, 10.0, 0.25)][: max(0, 20 - len(triples))]


def _suite_df(check: _Check, samples: int, seed: SeedSpec) -> None:
    from .schemes.df import df_throughput_objective

    worst = 0.0
    for i, (ps, pr, s) in enumerate(_df_grid()):
        p = PowerConfig(ps, pr)
        rep = mc_oracle.simulate_df_single(p, s, samples, seed.substream(100 + i))
        closed = float(df_throughput_objective(s, p))
        z = abs(rep.estimate - closed) / max(rep.std_error, 1e-300)
        worst = max(worst, z)
    check.run("df-closed-form-vs-oracle(20pts)", worst, 3.0, "max-|z|")

    inside = True
    for i, ratio_db in enumerate(np.linspace(-10, 30, 10)):
        p = PowerConfig(1.0, db_to_linear(float(ratio_db)))
        res = df_throughput(p)
        cap = df_threshold_cap(p)
        inside &= 0.0 < res.params["s"] < cap * (1.0 - 1e-9)
    check.run("df-argmax-inside-bracket(10pts)", 0.0 if inside else 1.0, 0.5, "violations")


def _suite_daf(check: _Check, samples: int, seed: SeedSpec) -> None:
    worst = 0.0
    for i, (ps, pr) in enumerate([(1.0, 10.0), (1.0, 1.0), (4.0, 1.0)]):
        p = PowerConfig(ps, pr)
        res = daf_throughput(p)
        rep = mc_oracle.simulate_daf_single(p, res.params["s"], samples, seed.substream(200 + i))
        worst = max(worst, abs(rep.estimate - res.value_nats) / rep.std_error)
    check.run("daf-protocol-exact-vs-oracle(3pts)", worst, 3.0, "max-|z|")

    p = PowerConfig(1.0, 10.0)
    fin = daf_finite_expected_rate(2, p, seed=seed)
    rep = mc_oracle.simulate_layered_daf(
        p, fin.params["plan"], fin.params["alloc_rows"], fin.params["xi"],
        fin.params["zeta"], samples, seed.substream(210),
    )
    z = abs(rep.estimate - fin.value_nats) / rep.std_error
    check.run("daf-layered-k2-engine-vs-oracle", z, 3.0, "|z|")

    # literature closed form embeds gate-independence approximations; report
    # its systematic deviation instead of asserting agreement
    s_star = daf_throughput(p).params["s"]
    prop = float(daf_proposition_objective(s_star, p, seed=seed))
    rep = mc_oracle.simulate_daf_single(p, s_star, samples, seed.substream(220))
    check.flag(
        "daf-proposition-closed-form",
        f"value {prop:.6f} vs protocol oracle {rep.estimate:.6f} "
        f"({(prop - rep.estimate) / rep.std_error:+.1f} sigma); known approximation, "
        "protocol-exact value is reported by daf_throughput",
    )


def _suite_cf(check: _Check, samples: int, seed: SeedSpec) -> None:
    points = [
        (1.0, 10.0, 0.5, 1.0), (1.0, 10.0, 0.2, 1.5), (1.0, 100.0, 0.3, 2.0),
        (1.0, 1.0, 0.7, 0.4), (4.0, 10.0, 1.0, 1.2), (1.0, 1000.0, 0.05, 4.0),
    ]
    worst = 0.0
    for i, (ps, pr, d, rr) in enumerate(points):
        p = PowerConfig(ps, pr)
        c = CfParams(d, rr)
        mc = cf_decode_probability(p, c, samples, seed.substream(300 + i))
        quad = cf_decode_probability_quadrature(p, c)
        worst = max(worst, abs(mc - quad))
    check.run("cf-decode-prob-mc-vs-quadrature(6pts)", worst, 5e-3, "max-abs")

    p = PowerConfig(1.0, 1000.0)
    res = cf_throughput(p, seed=seed)
    c = CfParams(res.params["distortion"], res.params["relay_rate"])
    rep = mc_oracle.simulate_cf(p, c, res.params["s"], samples, seed.substream(310))
    joint = rep.estimate / math.log1p(p.ps * res.params["s"])
    marg_region = cf_decode_probability(p, c, samples, seed.substream(311))
    marg_layer = rep.counters["source_ok"] / rep.n
    check.run("cf-factorization-high-ratio", abs(joint - marg_region * marg_layer), 1e-2, "abs")
    check.flag(
        "cf-product-form",
        f"theorem value {res.value_nats:.6f} vs joint oracle {rep.estimate:.6f}; the product "
        "form treats the compression region and the layer event as independent",
    )


def _suite_bounds(check: _Check, samples: int, seed: SeedSpec) -> None:
    worst = 0.0
    for power in (0.1, 1.0, 10.0, 100.0):
        p = PowerConfig(power, power)
        closed = bounds_mod.cutset_expected_rate(p).value_nats
        quad = bounds_mod.cutset_expected_rate_quadrature(p)
        worst = max(worst, abs(closed - quad))
    check.run("cutset-expected-closed-vs-quadrature", worst, 1e-6, "max-abs")

    worst = 0.0
    for ps in (1.0, 10.0):
        for pr in (1.0, 10.0):
            diag = bounds_mod.dfub_cutset(PowerConfig(ps, pr)).diagnostics
            worst = max(worst, abs(diag["r1_residual"]), abs(diag["r2_residual"]))
    check.run("dfub-paper-constants-vs-quadrature", worst, 2e-3, "max-abs")

    # dominance: every scheme below every applicable bound
    worst_gap = 0.0
    for pr_db in (0.0, 10.0, 20.0, 40.0, 60.0):
        p = PowerConfig.from_db(0.0, pr_db)
        cut = bounds_mod.cutset_throughput(p).value_nats
        rc = bounds_mod.rc_throughput(p).value_nats
        values = {
            "df": df_throughput(p).value_nats,
            "daf": daf_throughput(p).value_nats,
            "af": af_throughput(p, seed=seed).value_nats,
            "cf": cf_throughput(p, seed=seed).value_nats,
        }
        slack = {"df": 1e-9, "daf": 1e-9, "af": 1e-6, "cf": 2e-3}
        for tag, v in values.items():
            worst_gap = max(worst_gap, v - min(cut, rc) - slack[tag])
    check.run("dominance-throughput<=bounds", worst_gap, 0.0, "max-excess")

    worst_gap = 0.0
    for pr_db in (0.0, 20.0, 40.0):
        p = PowerConfig.from_db(0.0, pr_db)
        cut_e = bounds_mod.cutset_expected_rate(p).value_nats
        dfub = bounds_mod.dfub_cutset(p).value_nats
        df2 = df_finite_expected_rate(2, p, seed=seed).value_nats
        worst_gap = max(worst_gap, df2 - cut_e, df2 - dfub)
        worst_gap = max(worst_gap, af_expected_rate(p, seed=seed).value_nats - cut_e)
        worst_gap = max(worst_gap, cf_expected_rate(p, seed=seed).value_nats - cut_e - 2e-3)
    check.run("dominance-expected<=bounds", worst_gap, 1e-9, "max-excess")


def cmd_validate(args) -> int:
    seed = _seed_from_args(args)
    check = _Check()
    suites = {
        "alamouti": _suite_alamouti,
        "df": _suite_df,
        "daf": _suite_daf,
        "cf": _suite_cf,
        "bounds": _suite_bounds,
    }
    selected = list(suites) if args.suite == "all" else [args.suite]
    for name in selected:
        print(f"== suite {name} ==")
        suites[name](check, args.samples, seed)
    if check.failures:
        print("failing checks: " + ", ".join(check.failures), file=sys.stderr)
        return EXIT_VALIDATION
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="diamondbc",
        description="Achievable rates and upper bounds for the two-relay diamond channel",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp, with_point=True):
        sp.add_argument("--seed", type=lambda t: int(t, 0), default=None,
                        help="master seed (decimal or 0x-hex); DIAMONDBC_SEED overrides default")
        sp.add_argument("--samples", type=int, default=1_000_000)
        sp.add_argument("--table-method", choices=("quadrature", "monte-carlo"),
                        default="quadrature")
        sp.add_argument("--cache-dir", default=None, help="gain-table cache directory")
        if with_point:
            sp.add_argument("--ps-db", type=float, required=True)
            sp.add_argument("--pr-db", type=float, required=True)

    sp = sub.add_parser("point", help="evaluate one scheme at one power point")
    sp.add_argument("--scheme", choices=SCHEMES, required=True)
    sp.add_argument("--metric", choices=("throughput", "expected"), default="throughput")
    sp.add_argument("--layers", choices=("1", "2", "3", "inf"), default="1")
    add_common(sp)
    sp.set_defaults(func=cmd_point)

    sp = sub.add_parser("bounds", help="evaluate all closed-form bounds at one point")
    add_common(sp)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("sweep", help="parameter sweep to CSV (optionally SVG)")
    sp.add_argument("--ps-db", required=True, help="value or start:stop:step")
    sp.add_argument("--pr-db", required=True, help="value or start:stop:step")
    sp.add_argument("--schemes", default="", help="comma list from df,af,daf,cf")
    sp.add_argument("--bounds", default="", help="comma list from cutset,rc,dfub")
    sp.add_argument("--metric", choices=("throughput", "expected"), default="throughput")
    sp.add_argument("--layers", choices=("1", "2", "3", "inf"), default="1")
    sp.add_argument("--out", required=True, help="output CSV path")
    sp.add_argument("--plot", default=None, help="optional output SVG path")
    sp.add_argument("--jobs", type=int, default=1)
    add_common(sp, with_point=False)
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("validate", help="oracle-vs-analytic validation suites")
    sp.add_argument("--suite", choices=("alamouti", "df", "daf", "cf", "bounds", "all"),
                    default="all")
    add_common(sp, with_point=False)
    sp.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
