import math

import numpy as np
import pytest

from diamondbc.channel import PowerConfig, SeedSpec, sample_fading
from diamondbc.schemes import (
    LayerPlan,
    daf_finite_expected_rate,
    daf_throughput,
    df_finite_expected_rate,
    df_throughput,
)
from diamondbc.schemes.layered import (
    _LayeredSpec,
    daf_layered_value,
    daf_layered_value_table,
    df_layered_value,
    joint_layers_prob,
    prefix_probabilities,
)
from diamondbc import mc_oracle


class TestJointLayersProb:
    def test_single_constraint_is_halfplane(self):
        from diamondbc.gains import halfplane_tail_prob

        for pc, qc, t in [(2.0, 1.0, 1.5), (1.0, -0.5, 0.8), (0.5, 0.0, 0.3)]:
            assert joint_layers_prob([pc], [qc], [t]) == pytest.approx(
                float(halfplane_tail_prob(pc, qc, t)), abs=1e-10
            )

    def test_against_monte_carlo(self):
        rng = np.random.default_rng(77)
        a1 = rng.exponential(size=1_000_000)
        a2 = rng.exponential(size=1_000_000)
        rng2 = np.random.default_rng(78)
        for _ in range(30):
            k = rng2.integers(1, 4)
            pc = rng2.uniform(-1.0, 2.0, size=k)
            qc = rng2.uniform(-1.0, 2.0, size=k)
            t = rng2.uniform(0.0, 1.5, size=k)
            mask = np.ones(a1.size, dtype=bool)
            for j in range(k):
                mask &= pc[j] * a1 + qc[j] * a2 >= t[j]
            mc = float(mask.mean())
            val = joint_layers_prob(pc, qc, t)
            se = math.sqrt(max(mc * (1.0 - mc), 1e-12) / a1.size)
            assert abs(val - mc) <= 5.0 * se + 2e-6

    def test_empty_and_infeasible(self):
        assert joint_layers_prob([1.0], [1.0], [0.0]) == 1.0
        assert joint_layers_prob([-1.0], [-1.0], [0.5]) == 0.0


def test_prefix_probabilities_sum_to_one():
    s = np.array([0.4, 0.9, 2.0])
    w = prefix_probabilities(s)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    assert w[3] == pytest.approx(math.exp(-2.0))
    assert w[0] == pytest.approx(1.0 - math.exp(-0.4))


class TestDfLayeredValue:
    def test_single_layer_equals_closed_form(self):
        from diamondbc.schemes.df import df_throughput_objective

        p = PowerConfig(1.0, 2.0)
        for s in (0.3, 0.8, 1.1):
            spec = _LayeredSpec(
                plan=LayerPlan(s=np.array([s]), gamma2=np.array([p.ps])),
                alloc_rows=np.array([[0.0], [p.pr]]),
            )
            assert df_layered_value(p, spec) == pytest.approx(
                float(df_throughput_objective(s, p)), abs=1e-9
            )

    def test_two_layer_matches_oracle(self):
        p = PowerConfig(1.0, 2.0)
        spec = _LayeredSpec(
            plan=LayerPlan(s=np.array([0.5, 1.2]), gamma2=np.array([0.65, 0.35])),
            alloc_rows=np.array([[0.0, 0.0], [p.pr, 0.0], [1.3, 0.7]]),
        )
        value = df_layered_value(p, spec)
        rep = mc_oracle.simulate_layered_df(p, spec.plan, spec.alloc_rows, 1_000_000, SeedSpec(80))
        assert abs(value - rep.estimate) < 3.0 * rep.std_error


class TestDafLayeredValue:
    def _spec(self, p):
        return _LayeredSpec(
            plan=LayerPlan(s=np.array([0.6, 1.3]), gamma2=np.array([0.7, 0.3])),
            alloc_rows=np.array([[0.0, 0.0], [0.8 * p.pr, 0.0], [0.5 * p.pr, 0.3 * p.pr]]),
            xi=0.8,
        )

    def test_quadrature_matches_oracle(self):
        p = PowerConfig(1.0, 4.0)
        spec = self._spec(p)
        value = daf_layered_value(p, spec)
        rep = mc_oracle.simulate_layered_daf(
            p, spec.plan, spec.alloc_rows, spec.xi, spec.xi, 1_000_000, SeedSpec(81)
        )
        assert abs(value - rep.estimate) < 3.0 * rep.std_error

    def test_quadrature_matches_table(self):
        p = PowerConfig(1.0, 4.0)
        spec = self._spec(p)
        fad = sample_fading(SeedSpec(82), 2_000_000)
        table_val = daf_layered_value_table(p, spec, (fad.a1, fad.a2, fad.ar1, fad.ar2))
        assert daf_layered_value(p, spec) == pytest.approx(table_val, abs=2e-3)

    def test_full_xi_equals_df_value(self):
        p = PowerConfig(1.0, 4.0)
        spec = self._spec(p)
        spec_df = _LayeredSpec(plan=spec.plan, alloc_rows=spec.alloc_rows, xi=1.0)
        # with nothing amplified, the cell quadrature must collapse to the
        # exact DF enumeration
        assert daf_layered_value(p, spec_df) == pytest.approx(
            df_layered_value(p, spec_df), abs=1e-7
        )


class TestEngines:
    def test_df_k1_equals_throughput(self):
        for ps, pr in [(1.0, 1.0), (1.0, 10.0)]:
            p = PowerConfig(ps, pr)
            assert df_finite_expected_rate(1, p).value_nats == pytest.approx(
                df_throughput(p).value_nats, abs=1e-4
            )

    def test_df_layer_nesting(self):
        p = PowerConfig(1.0, 10.0)
        v1 = df_finite_expected_rate(1, p).value_nats
        v2 = df_finite_expected_rate(2, p).value_nats
        v3 = df_finite_expected_rate(3, p).value_nats
        assert v2 >= v1 - 1e-4
        assert v3 >= v2 - 1e-4

    def test_df_k2_beats_throughput(self):
        for ps, pr in [(1.0, 1.0), (1.0, 10.0)]:
            p = PowerConfig(ps, pr)
            assert df_finite_expected_rate(2, p).value_nats >= (
                df_throughput(p).value_nats - 1e-4
            )

    def test_daf_k1_vs_throughput(self):
        p = PowerConfig(1.0, 10.0)
        assert daf_finite_expected_rate(1, p).value_nats >= (
            daf_throughput(p).value_nats - 1e-3
        )

    def test_daf_forced_xi_reduces_to_df(self):
        # the xi = 1 slice of the DAF engine is the DF engine's family
        p = PowerConfig(1.0, 10.0)
        daf = daf_finite_expected_rate(2, p)
        df = df_finite_expected_rate(2, p)
        assert daf.value_nats >= df.value_nats - 1e-4

    def test_unsupported_k(self):
        with pytest.raises(ValueError):
            df_finite_expected_rate(4, PowerConfig(1.0, 1.0))
        with pytest.raises(ValueError):
            daf_finite_expected_rate(0, PowerConfig(1.0, 1.0))

    def test_engine_vs_oracle_df_k2(self):
        p = PowerConfig(1.0, 10.0)
        res = df_finite_expected_rate(2, p)
        rep = mc_oracle.simulate_layered_df(
            p, res.params["plan"], res.params["alloc_rows"], 1_000_000, SeedSpec(83)
        )
        assert abs(res.value_nats - rep.estimate) < 3.0 * rep.std_error

    def test_engine_vs_oracle_daf_k2(self):
        p = PowerConfig(1.0, 10.0)
        res = daf_finite_expected_rate(2, p)
        rep = mc_oracle.simulate_layered_daf(
            p, res.params["plan"], res.params["alloc_rows"],
            res.params["xi"], res.params["zeta"], 1_000_000, SeedSpec(84),
        )
        assert abs(res.value_nats - rep.estimate) < 3.0 * rep.std_error
