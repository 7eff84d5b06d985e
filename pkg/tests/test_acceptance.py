"""Acceptance gate: one test per criterion, tolerances pinned, PASS/FAIL lines.

The figure-reproduction sweep runs on the coarse 0:60:6 dB grid by default;
set DIAMONDBC_ACCEPT_FULL=1 for the full 0:60:2 dB grid (same checks, the
stated half-hour budget instead of three minutes).
"""

import math
import os
import time

import numpy as np
import pytest

from diamondbc import bounds, mc_oracle
from diamondbc.channel import PowerConfig, SeedSpec, db_to_linear, sample_fading
from diamondbc.cli import main as cli_main
from diamondbc.gains import gain_af2
from diamondbc.schemes import (
    CfParams,
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
from diamondbc.schemes.df import df_throughput_objective

SEED = SeedSpec(0x5EED)


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"\n{name} {'PASS' if ok else 'FAIL'}: {detail}")
    assert ok, f"{name}: {detail}"


def test_ac1_alamouti_equivalence():
    start = time.time()
    p = PowerConfig(1.0, 10.0)
    fad = sample_fading(SEED.substream(1), 100_000)
    mi = mc_oracle.alamouti_af_mutual_info(fad, p)
    ref = np.log1p(p.ps * gain_af2(fad, p))
    rel = np.abs(mi - ref) / np.maximum(np.abs(ref), 1e-300)
    elapsed = time.time() - start
    ok = bool(np.max(rel) <= 1e-9) and elapsed < 5.0
    _report("AC1", ok, f"max relative residual {np.max(rel):.2e} over 1e5 samples, {elapsed:.1f}s")


def test_ac2_df_closed_form_vs_oracle():
    start = time.time()
    grid = [
        (ps, pr, s)
        for ps in (0.5, 1.0, 4.0)
        for pr in (0.5, 2.0, 10.0)
        for s in (0.4, 0.9)
    ] + [(1.0, 5.0, 1.1), (4.0, 10.0, 0.25)]
    assert len(grid) == 20
    worst = 0.0
    for i, (ps, pr, s) in enumerate(grid):
        p = PowerConfig(ps, pr)
        rep = mc_oracle.simulate_df_single(p, s, 1_000_000, SEED.substream(1020 + i))
        closed = float(df_throughput_objective(s, p))
        worst = max(worst, abs(rep.estimate - closed) / rep.std_error)
    elapsed = time.time() - start
    ok = worst <= 3.0 and elapsed < 60.0
    _report("AC2", ok, f"max |z| {worst:.2f} on 20-point grid at n=1e6, {elapsed:.1f}s")


def test_ac3_df_argmax_location():
    start = time.time()
    ok = True
    for ratio_db in np.linspace(-10.0, 30.0, 10):
        p = PowerConfig(1.0, db_to_linear(float(ratio_db)))
        res = df_throughput(p)
        cap = df_threshold_cap(p)
        ok &= 0.0 < res.params["s"] < cap
    elapsed = time.time() - start
    ok = ok and elapsed < 10.0
    _report("AC3", bool(ok), f"argmax strictly inside (0, min(2Pr/Ps, 1.212)) at 10 ratios, {elapsed:.1f}s")


def test_ac4_cutset_expected_closed_vs_quadrature():
    start = time.time()
    worst = 0.0
    for power in (0.1, 1.0, 10.0, 100.0):
        p = PowerConfig(power, power)
        closed = bounds.cutset_expected_rate(p).value_nats
        quad = bounds.cutset_expected_rate_quadrature(p)
        worst = max(worst, abs(closed - quad))
    elapsed = time.time() - start
    ok = worst <= 1e-6 and elapsed < 1.0
    _report("AC4", ok, f"max |closed - quadrature| {worst:.2e} over P in {{0.1,1,10,100}}, {elapsed:.2f}s")


def test_ac5_dfub_constants():
    start = time.time()
    worst = 0.0
    lines = []
    for ps in (1.0, 10.0):
        for pr in (1.0, 10.0):
            diag = bounds.dfub_cutset(PowerConfig(ps, pr)).diagnostics
            lines.append(
                f"(Ps={ps},Pr={pr}) r1 residual {diag['r1_residual']:+.2e},"
                f" r2 residual {diag['r2_residual']:+.2e}"
            )
            worst = max(worst, abs(diag["r1_residual"]), abs(diag["r2_residual"]))
    elapsed = time.time() - start
    print("\n".join(lines))
    ok = worst <= 2e-3 and elapsed < 2.0
    _report("AC5", ok, f"published constants reproduced to {worst:.2e}, {elapsed:.2f}s")


@pytest.fixture(scope="module")
def figure_curves():
    start = time.time()
    full = os.environ.get("DIAMONDBC_ACCEPT_FULL") == "1"
    step = 2.0 if full else 6.0
    budget = 1800.0 if full else 180.0
    pr_grid = np.arange(0.0, 60.0 + 1e-9, step)
    curves = {tag: [] for tag in ("df", "af", "daf", "cf")}
    for pr_db in pr_grid:
        p = PowerConfig.from_db(0.0, float(pr_db))
        curves["df"].append(df_throughput(p).value_nats)
        curves["af"].append(af_throughput(p, seed=SEED).value_nats)
        curves["daf"].append(daf_throughput(p).value_nats)
        curves["cf"].append(cf_throughput(p, seed=SEED).value_nats)
    elapsed = time.time() - start
    assert elapsed < budget, f"sweep took {elapsed:.0f}s, budget {budget:.0f}s"
    return pr_grid, {t: np.array(v) for t, v in curves.items()}, step, elapsed


def test_ac6a_daf_dominates_components(figure_curves):
    pr_grid, c, step, elapsed = figure_curves
    gap = float(np.min(c["daf"] - np.maximum(c["df"], c["af"])))
    ok = gap >= -0.02
    _report("AC6a", ok, f"min(DAF - max(DF, AF)) = {gap:+.4f} nats on the {step} dB grid ({elapsed:.0f}s sweep)")


def test_ac6b_cf_crossover_window(figure_curves):
    pr_grid, c, step, _ = figure_curves
    window = (pr_grid >= 20.0) & (pr_grid <= 30.0)
    above = c["cf"] > c["daf"]
    ok = bool(np.any(above & window))
    crossed = np.nonzero(above)[0]
    if crossed.size:
        ok = ok and bool(np.all(c["cf"][crossed[0]:] >= c["daf"][crossed[0]:]))
    first = pr_grid[crossed[0]] if crossed.size else None
    _report("AC6b", ok, f"CF exceeds DAF from {first} dB onward (window [20, 30] required)")


def test_ac6c_af_minimum_beyond_10db(figure_curves):
    # Stated criterion: AF is the minimum among schemes for pr_db > 10.
    # The faithfully computed compress-forward curve is MAC-limited at mid
    # ratios and sits below AF until roughly 28 dB, so this published
    # ordering is not reproducible; see the decisions ledger.
    pr_grid, c, step, _ = figure_curves
    beyond = pr_grid > 10.0
    others = np.minimum(np.minimum(c["df"], c["daf"]), c["cf"])
    excess = c["af"][beyond] - others[beyond] - 1e-9
    bad = pr_grid[beyond][excess > 0]
    ok = bad.size == 0
    _report(
        "AC6c",
        ok,
        f"AF above another scheme at pr_db={bad.tolist()} (CF is lower there); "
        "AF <= min(DF, DAF) holds everywhere beyond 10 dB: "
        f"{bool(np.all(c['af'][beyond] <= np.minimum(c['df'], c['daf'])[beyond] + 1e-9))}",
    )


def test_ac6d_cf_expected_meets_cutset(figure_curves):
    p60 = PowerConfig.from_db(0.0, 60.0)
    cf_exp = cf_expected_rate(p60, seed=SEED).value_nats
    cut_exp = bounds.cutset_expected_rate(p60).value_nats
    ok = abs(cf_exp - cut_exp) <= 0.05 * cut_exp
    _report("AC6d", ok, f"CF expected {cf_exp:.4f} vs cutset expected {cut_exp:.4f} at 60 dB "
                        f"({100 * abs(cf_exp - cut_exp) / cut_exp:.2f}%)")


def test_ac7_layer_nesting():
    start = time.time()
    points = [(1.0, 1.0), (1.0, 2.0), (1.0, 4.0), (1.0, 10.0), (4.0, 4.0)]
    ok = True
    lines = []
    for ps, pr in points:
        p = PowerConfig(ps, pr)
        for tag, throughput, finite in (
            ("df", df_throughput, df_finite_expected_rate),
            ("daf", daf_throughput, daf_finite_expected_rate),
        ):
            t = throughput(p).value_nats
            v2 = finite(2, p, seed=SEED).value_nats
            v3 = finite(3, p, seed=SEED).value_nats
            good = (v2 >= t - 1e-4) and (v3 >= v2 - 1e-4)
            ok &= good
            lines.append(f"{tag}({ps},{pr}): T={t:.6f} k2={v2:.6f} k3={v3:.6f} ok={good}")
    elapsed = time.time() - start
    print("\n".join(lines))
    ok = ok and elapsed < 600.0
    _report("AC7", bool(ok), f"nesting holds at 5 power points for DF and DAF, {elapsed:.0f}s")


def test_ac8_cf_decode_probability_cross_validation():
    start = time.time()
    points = [
        (1.0, 10.0, 0.5, 1.0), (1.0, 10.0, 0.2, 1.5), (1.0, 100.0, 0.3, 2.0),
        (1.0, 1.0, 0.7, 0.4), (4.0, 10.0, 1.0, 1.2), (1.0, 1000.0, 0.05, 4.0),
    ]
    worst = 0.0
    for i, (ps, pr, d, rr) in enumerate(points):
        p = PowerConfig(ps, pr)
        c = CfParams(d, rr)
        mc = cf_decode_probability(p, c, 1_000_000, SEED.substream(700 + i))
        quad = cf_decode_probability_quadrature(p, c)
        worst = max(worst, abs(mc - quad))
    elapsed = time.time() - start
    ok = worst <= 5e-3 and elapsed < 120.0
    _report("AC8", ok, f"max |MC - quadrature| {worst:.2e} at 6 parameter points, {elapsed:.0f}s")


def test_ac9_dominance_via_validate_bounds():
    start = time.time()
    code = cli_main(["validate", "--suite", "bounds", "--samples", "400000",
                     "--seed", str(SEED.master_seed)])
    elapsed = time.time() - start
    _report("AC9", code == 0, f"cmd_validate bounds exit code {code}, {elapsed:.0f}s")


def test_ac10_sweep_determinism(tmp_path):
    start = time.time()
    base = [
        "sweep", "--metric", "throughput", "--ps-db", "0", "--pr-db", "0:24:12",
        "--schemes", "df,af,cf", "--bounds", "cutset",
    ]
    payloads = []
    for name, jobs in (("r1.csv", 1), ("r2.csv", 1), ("r3.csv", 2), ("r4.csv", 3)):
        out = tmp_path / name
        code = cli_main(base + ["--out", str(out), "--jobs", str(jobs),
                                "--seed", str(SEED.master_seed)])
        assert code == 0
        payloads.append(out.read_bytes())
    elapsed = time.time() - start
    ok = all(pay == payloads[0] for pay in payloads)
    _report("AC10", ok, f"byte-identical CSV across reruns and jobs in {{1,2,3}}, {elapsed:.0f}s")
