import math

import numpy as np
import pytest

from diamondbc import bounds
from diamondbc.channel import PowerConfig, db_to_linear
from diamondbc.numerics import integrate
from diamondbc.schemes import af_throughput, cf_throughput, daf_throughput, df_throughput


class TestCutset:
    def test_throughput_zero_power_limit(self):
        assert bounds.cutset_throughput(PowerConfig(1e-9, 1e-9)).value_nats < 1e-7

    def test_throughput_reference_point(self):
        # dense-grid oracle over s in (0, 10]
        grid = np.linspace(1e-6, 10.0, 2_000_001)
        vals = np.exp(-grid) * (1.0 + grid) * np.log1p(grid)
        k = int(np.argmax(vals))
        res = bounds.cutset_throughput(PowerConfig(1.0, 1.0))
        assert res.params["s"] == pytest.approx(grid[k], abs=1e-5)
        assert res.value_nats == pytest.approx(vals[k], abs=1e-9)

    def test_throughput_uses_min_power(self):
        a = bounds.cutset_throughput(PowerConfig(1.0, 50.0)).value_nats
        b = bounds.cutset_throughput(PowerConfig(1.0, 1.0)).value_nats
        assert a == pytest.approx(b, abs=1e-12)

    def test_expected_rate_golden_boundary(self):
        res = bounds.cutset_expected_rate(PowerConfig(1.0, 1.0))
        assert res.params["s1"] == pytest.approx(1.6180340, abs=1e-7)
        assert res.params["s0"] == pytest.approx(1.0, abs=1e-12)

    def test_expected_rate_closed_form_vs_quadrature(self):
        for power in (0.1, 1.0, 10.0, 100.0):
            p = PowerConfig(power, power)
            closed = bounds.cutset_expected_rate(p).value_nats
            quad = bounds.cutset_expected_rate_quadrature(p)
            assert abs(closed - quad) <= 1e-6

    def test_expected_rate_grows_with_power(self):
        v3 = bounds.cutset_expected_rate(PowerConfig(1e3, 1e3)).value_nats
        v6 = bounds.cutset_expected_rate(PowerConfig(1e6, 1e6)).value_nats
        assert v6 > v3

    def test_expected_dominates_throughput(self):
        for power in (0.2, 1.0, 7.0, 300.0):
            p = PowerConfig(power, power)
            assert bounds.cutset_expected_rate(p).value_nats >= (
                bounds.cutset_throughput(p).value_nats - 1e-9
            )

    def test_cubic_root_residuals(self):
        for power in np.geomspace(1e-3, 1e6, 40):
            s0 = bounds.cutset_cubic_root(float(power))
            assert s0 > 0
            assert abs(power * s0**3 + s0**2 - s0 - 1.0) < 1e-8 * max(1.0, power)


class TestRcBound:
    def test_threshold_cap_hand_value(self):
        assert bounds.rc_threshold_cap(PowerConfig(1.0, 1.0)) == pytest.approx(1.0, abs=1e-12)

    def test_equal_power_objective(self):
        p = PowerConfig(1.0, 1.0)
        res = bounds.rc_throughput(p)
        grid = np.linspace(1e-6, 1.0, 1_000_001)
        vals = (1.0 + grid) ** 2 * np.exp(-2.0 * grid) * np.log1p(grid)
        assert res.value_nats == pytest.approx(float(vals.max()), abs=1e-8)
        assert 0.0 < res.params["s"] < 1.0

    def test_dominates_df(self):
        for pr_db in (0.0, 10.0, 25.0, 50.0):
            p = PowerConfig.from_db(0.0, pr_db)
            assert bounds.rc_throughput(p).value_nats >= df_throughput(p).value_nats - 1e-9


class TestDfubBound:
    def test_paper_constants_residuals(self):
        for ps in (1.0, 10.0):
            for pr in (1.0, 10.0):
                diag = bounds.dfub_cutset(PowerConfig(ps, pr)).diagnostics
                assert abs(diag["r1_residual"]) <= 2e-3
                assert abs(diag["r2_residual"]) <= 2e-3

    def test_first_hop_quadrature_form(self):
        p = PowerConfig(1.0, 1.0)
        res = bounds.dfub_cutset(p)
        s_lo = res.params["s1"]
        direct = integrate(
            lambda s: math.exp(-s) * (2.0 - math.exp(-s))
            * (2.0 / s + (2.0 * math.exp(-s) - 1.0) / (1.0 - math.exp(-s))),
            s_lo,
            1.2125,
            tol=1e-8,
        )
        assert res.diagnostics["r1_quadrature"] == pytest.approx(direct, abs=1e-3)

    def test_monotone_in_powers(self):
        vals_pr = [bounds.dfub_cutset(PowerConfig(1.0, pr)).value_nats for pr in (0.5, 1, 4, 20)]
        assert all(b >= a - 1e-6 for a, b in zip(vals_pr, vals_pr[1:]))
        vals_ps = [bounds.dfub_cutset(PowerConfig(ps, 1.0)).value_nats for ps in (0.5, 1, 4, 20)]
        assert all(b >= a - 1e-6 for a, b in zip(vals_ps, vals_ps[1:]))


class TestDominance:
    def test_throughput_schemes_below_bounds(self):
        for pr_db in (0.0, 12.0, 30.0, 50.0):
            p = PowerConfig.from_db(0.0, pr_db)
            cut = bounds.cutset_throughput(p).value_nats
            rc = bounds.rc_throughput(p).value_nats
            assert df_throughput(p).value_nats <= min(cut, rc) + 1e-9
            assert daf_throughput(p).value_nats <= min(cut, rc) + 1e-9
            assert af_throughput(p).value_nats <= min(cut, rc) + 1e-6
            assert cf_throughput(p).value_nats <= min(cut, rc) + 2e-3

    def test_bounds_monotone_in_each_power(self):
        for maker in (bounds.cutset_throughput, bounds.cutset_expected_rate, bounds.rc_throughput):
            vals = [maker(PowerConfig(1.0, pr)).value_nats for pr in (0.25, 1.0, 4.0, 16.0)]
            assert all(b >= a - 1e-6 for a, b in zip(vals, vals[1:]))
            vals = [maker(PowerConfig(ps, 1.0)).value_nats for ps in (0.25, 1.0, 4.0, 16.0)]
            assert all(b >= a - 1e-6 for a, b in zip(vals, vals[1:]))
