import dataclasses
import warnings

import numpy as np
import pytest

import oracles
from designspace import chromapcc
from designspace.chromapcc import (
    ColumnParams,
    ColumnState,
    CycleSchedule,
    adsorption_rhs,
    bulk_rhs,
    column_holdup,
    default_params,
    film_coefficient,
    fractional_coverage,
    interstitial_velocity,
    isotherm_equilibrium,
    lumped_ktot,
    particle_rhs,
    simulate,
)
from designspace.errors import ExtrapolationWarning


@pytest.fixture(scope="module")
def params():
    return default_params(n_nodes=30)


def random_state(params, rng, c_scale=1.0):
    n = params.n_nodes
    q1 = rng.uniform(0, 0.8 * params.q_max, n)
    return ColumnState(
        c=rng.uniform(0, c_scale, n),
        cp=rng.uniform(0, c_scale, n),
        q1=q1,
        q2=q1 * rng.uniform(0, 1, n),
    )


class TestBulkRhs:
    def test_uniform_state_zero_velocity(self, params):
        n = params.n_nodes
        state = ColumnState(c=np.full(n, 0.4), cp=np.full(n, 0.4),
                            q1=np.zeros(n), q2=np.zeros(n))
        k_tot = lumped_ktot(state.q1, params, 0.4, u=0.0)
        dc = bulk_rhs(state, params, c_in=0.4, u=0.0, k_tot=k_tot)
        assert np.allclose(dc, 0.0)

    def test_pure_advection_on_linear_profile(self, params):
        # D_ax = 0 and k_tot = 0 leave only -u * slope at interior nodes
        p = dataclasses.replace(params, d_ax=1e-300)
        n = p.n_nodes
        x = np.arange(n) * p.dx
        slope = 0.05
        state = ColumnState(c=1.0 + slope * x, cp=np.zeros(n),
                            q1=np.zeros(n), q2=np.zeros(n))
        u = 2.0
        dc = bulk_rhs(state, p, c_in=1.0, u=u, k_tot=np.zeros(n))
        assert np.allclose(dc[1:-1], -u * slope, rtol=1e-9)

    def test_matches_reference_stencil(self, params, rng):
        state = random_state(params, rng)
        u = interstitial_velocity(0.8, params)
        k_tot = lumped_ktot(state.q1, params, 0.5, u)
        mine = bulk_rhs(state, params, c_in=0.37, u=u, k_tot=k_tot)
        ref = oracles.bulk_stencil_reference(
            state.c, state.cp, k_tot, 0.37, u, params.d_ax_min, params.dx,
            params.r_p, params.eps_b)
        assert np.allclose(mine, ref, rtol=1e-12)


class TestParticleRhs:
    def test_equilibrium_is_stationary(self, params):
        n = params.n_nodes
        c = np.full(n, 0.4)
        q1, q2 = isotherm_equilibrium(c, params)
        state = ColumnState(c=c, cp=c.copy(), q1=q1, q2=q2)
        k_tot = lumped_ktot(q1, params, 0.4, u=1.0)
        assert np.allclose(particle_rhs(state, params, k_tot), 0.0, atol=1e-12)

    def test_transfer_sign(self, params):
        n = params.n_nodes
        state = ColumnState(c=np.full(n, 0.5), cp=np.full(n, 0.2),
                            q1=np.zeros(n), q2=np.zeros(n))
        # frozen adsorption isolates the film-transfer term
        frozen = dataclasses.replace(params, k_a1=1e-300, k_a2=1e-300)
        k_tot = np.full(n, 0.01)
        dcp = particle_rhs(state, frozen, k_tot)
        expected = (3.0 / params.r_p) / params.eps_p * k_tot * 0.3
        assert np.allclose(dcp, expected, rtol=1e-9)

    def test_matches_direct_formula(self, params, rng):
        state = random_state(params, rng)
        k_tot = lumped_ktot(state.q1, params, 0.6, u=0.5)
        dq1, dq2 = adsorption_rhs(state.cp, state.q1, state.q2, params)
        expected = ((3.0 / params.r_p) / params.eps_p * k_tot * (state.c - state.cp)
                    - (dq1 + dq2) * (1.0 - params.eps_p) / params.eps_p)
        assert np.allclose(particle_rhs(state, params, k_tot), expected, rtol=1e-12)


class TestLumpedKtot:
    def test_zero_coverage_gives_film_limit(self, params):
        u = interstitial_velocity(0.8, params)
        k_tot = lumped_ktot(np.zeros(3), params, 0.4, u)
        assert np.allclose(k_tot, film_coefficient(u, params), rtol=1e-9)

    def test_saturation_limit_is_zero(self, params):
        u = interstitial_velocity(0.8, params)
        q_sat = params.q_max * 1.0  # alpha >= 1 at feed equilibrium
        k_tot = lumped_ktot(np.array([q_sat]), params, 0.4, u)
        # the pore term collapses to the clamp floor, orders below the film limit
        assert k_tot[0] < 1e-5 * film_coefficient(u, params)

    def test_half_coverage_harmonic_combination(self, params):
        u = interstitial_velocity(1.0, params)
        c_feed = 0.4
        # pick q1 so that alpha = 0.5 exactly
        q1 = 0.5 * params.q_max * c_feed / (1.0 / params.k_eq + c_feed)
        alpha = fractional_coverage(q1, params, c_feed)
        assert alpha == pytest.approx(0.5, rel=1e-12)
        beta = (1.0 - 0.5) ** (1.0 / 3.0)
        k_f = film_coefficient(u, params)
        k_s = params.eps_p * params.d_p_min / params.r_p * beta / (1.0 - beta)
        expected = 1.0 / (1.0 / k_f + 1.0 / k_s)
        assert lumped_ktot(np.array([q1]), params, c_feed, u)[0] == pytest.approx(expected, rel=1e-12)

    def test_monotone_nonincreasing_in_coverage(self, params):
        u = interstitial_velocity(0.8, params)
        c_feed = 0.4
        alphas = np.linspace(0.0, 0.999, 200)
        q1 = alphas * params.q_max * c_feed / (1.0 / params.k_eq + c_feed)
        k = lumped_ktot(q1, params, c_feed, u)
        assert np.all(np.diff(k) <= 1e-15)


class TestAdsorption:
    def test_langmuir_equilibrium_stationary(self, params):
        cp = np.linspace(0.01, 1.0, 20)
        q1 = params.q_max * params.k_eq * cp / (1.0 + params.k_eq * cp)
        dq1, _ = adsorption_rhs(cp, q1, np.zeros_like(cp), params)
        assert np.allclose(dq1, 0.0, atol=1e-10)

    def test_site2_gated_by_site1(self, params):
        dq1, dq2 = adsorption_rhs(np.array([0.5]), np.array([0.0]), np.array([0.0]), params)
        assert dq1[0] > 0.0
        assert dq2[0] == pytest.approx(0.0)

    def test_isotherm_matches_analytic_steady_state(self, params):
        cp = np.linspace(1e-4, 2.0, 50)
        q1, q2 = isotherm_equilibrium(cp, params)
        dq1, dq2 = adsorption_rhs(cp, q1, q2, params)
        # rates vanish at the analytic isotherm
        scale = params.k_a1 * params.q_max
        assert np.all(np.abs(dq1) / scale < 1e-6)
        assert np.all(np.abs(dq2) / scale < 1e-6)
        # hierarchy: site 2 never exceeds site 1
        assert np.all(q2 <= q1)


class TestSimulate:
    def test_zero_feed_convention(self, params):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ExtrapolationWarning)
            res = simulate((0.0, 0.8, 60.0), params)
        assert res.yield_pct == 100.0
        assert res.productivity == 0.0
        assert res.converged

    def test_css_mass_balance(self, params):
        res = simulate((0.4, 0.8, 60.0), params, css_tol=1e-4)
        assert res.converged
        assert res.mass_balance_error < 0.01

    def test_yield_decreases_when_overloading(self, params):
        base = simulate((0.6, 1.0, 60.0), params)
        overloaded = simulate((0.6, 1.0, 120.0), params)
        assert overloaded.yield_pct < base.yield_pct

    def test_extrapolation_warning(self, params):
        with pytest.warns(ExtrapolationWarning):
            simulate((0.05, 0.8, 50.0), params, max_cycles=2, css_tol=1.0)

    def test_holdup_positive_after_loading(self, params):
        res = simulate((0.4, 0.8, 50.0), params, max_cycles=3, css_tol=1e-12)
        assert res.cycle_product_mass > 0.0

    def test_trace_export(self, params, tmp_path):
        path = tmp_path / "trace.csv"
        simulate((0.4, 0.8, 50.0), params, max_cycles=2, css_tol=1.0, trace_path=path)
        header, *rows = path.read_text().strip().splitlines()
        assert header.startswith("time_min,")
        assert len(rows) > 50


class TestScheduleAndParams:
    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ValueError):
            CycleSchedule(c_feed=0.4, q_feed=0.8, t_switch=60.0,
                          frac_a=0.5, frac_b=0.5, frac_c=0.5)

    def test_bad_porosity_rejected(self, params):
        with pytest.raises(ValueError):
            dataclasses.replace(params, eps_b=1.2)

    def test_params_json_round_trip(self, tmp_path, params):
        import json

        path = tmp_path / "params.json"
        path.write_text(json.dumps(params.to_dict()))
        assert ColumnParams.from_json(path) == params

    def test_holdup_trapezoid(self, params):
        n = params.n_nodes
        state = ColumnState(c=np.ones(n), cp=np.zeros(n), q1=np.zeros(n), q2=np.zeros(n))
        expected = params.eps_b * params.area * params.dx * (n - 1)
        assert column_holdup(state, params) == pytest.approx(expected)


@pytest.mark.slow
class TestGridConvergence:
    def test_yield_stable_under_refinement(self):
        res_50 = simulate((0.4, 0.8, 60.0), default_params(n_nodes=50))
        res_100 = simulate((0.4, 0.8, 60.0), default_params(n_nodes=100))
        assert abs(res_50.yield_pct - res_100.yield_pct) < 0.2


class TestCliIntegration:
    def test_parallel_run_over_workers(self, tmp_path):
        # exercises job pickling through the process pool
        import json

        from designspace import cli

        problem = {
            "decisions": [{"name": "c_feed", "unit": "mg/ml"},
                          {"name": "Q_feed", "unit": "ml/min"},
                          {"name": "T_switch", "unit": "min"}],
            "bounds": {"lower": [0.3, 0.6, 45.0], "upper": [0.5, 1.0, 60.0]},
            "kpis": [{"name": "yield", "unit": "%"},
                     {"name": "productivity", "unit": "mg/ml/h"}],
            "constraints": [{"kpi": "yield", "op": ">=", "value": 99.0}],
            "model": {"kind": "chromapcc", "css_tol": 1.0, "max_cycles": 2},
            "sampling": {"sp": 2, "skip": 0},
        }
        path = tmp_path / "chroma.json"
        path.write_text(json.dumps(problem))
        out = tmp_path / "out"
        assert cli.main(["run", "--problem", str(path), "--out", str(out),
                         "--workers", "2"]) == 0
        rows = (out / "cloud.csv").read_text().strip().splitlines()
        assert len(rows) == 5
        assert not (out / "failures.csv").exists()
