import os

import numpy as np
import pytest

from glflow import potential as pot
from glflow.errors import GlflowError

SE_FLOOR = 1e-12   # absolute floor under the 3-standard-error tolerances


def tol3(se):
    return 3.0 * np.asarray(se) + SE_FLOOR


class TestPotentials:
    @pytest.mark.parametrize("make", [pot.quadratic_potential,
                                      pot.anharmonic_potential])
    def test_assumptions_hold(self, make):
        assert make().check_assumptions()

    def test_anharmonic_derivative_consistency(self, anh_pot):
        # the closed forms for V' and V'' must match finite differences
        r = np.linspace(-6.0, 6.0, 241)
        h = 1e-6
        fd1 = (anh_pot.v(r + h) - anh_pot.v(r - h)) / (2 * h)
        fd2 = (anh_pot.dv(r + h) - anh_pot.dv(r - h)) / (2 * h)
        assert np.abs(fd1 - anh_pot.dv(r)).max() < 1e-7
        assert np.abs(fd2 - anh_pot.d2v(r)).max() < 1e-7

    def test_curvature_bracket_tight(self, anh_pot):
        r = np.linspace(-50.0, 50.0, 2001)
        c = anh_pot.d2v(r)
        assert c.min() >= anh_pot.c_minus
        assert c.max() <= anh_pot.c_plus


class TestExactQuadratic:
    def test_gradient_values(self):
        m = pot.exact_quadratic_model(1.0, dim=1)
        assert np.allclose(pot.grad_sigma_exact_quadratic(m, [[0.0]]), 0.0)
        assert np.allclose(pot.grad_sigma_exact_quadratic(m, [[0.7]]), 0.7)
        m2 = pot.exact_quadratic_model(2.0, dim=2)
        got = pot.grad_sigma_exact_quadratic(m2, [[0.3, -0.4]])
        assert np.allclose(got, [[0.6, -0.8]])

    def test_wrong_backend_rejected(self, anharmonic_table_model):
        with pytest.raises(GlflowError):
            pot.grad_sigma_exact_quadratic(anharmonic_table_model, [[0.1]])

    def test_convexity_bracket_exact(self):
        m = pot.exact_quadratic_model(1.5, dim=2)
        rng = np.random.default_rng(0)
        for _ in range(100):
            u, v = rng.standard_normal((2, 2))
            inner = float((m.grad_sigma(u) - m.grad_sigma(v)) @ (u - v))
            gap = float((u - v) @ (u - v))
            assert m.c_minus * gap - 1e-12 <= inner <= m.c_plus * gap + 1e-12


def _sampler(tilt, potential_obj, seed, **kw):
    base = dict(torus_side=16, step_size=1e-3, burn_in=3000,
                n_samples=3000, stride=4, seed=seed)
    base.update(kw)
    return pot.TiltedGibbsSampler(tilt=tilt, potential=potential_obj, **base)


class TestMcmcEstimates:
    def test_quadratic_matches_gaussian_mean(self, quad_pot):
        g, se = pot.estimate_grad_sigma_mcmc(_sampler([0.7], quad_pot, 1))
        assert np.all(np.abs(g - 0.7) <= tol3(se))

    def test_symmetric_potential_vanishes_at_zero_tilt(self, anh_pot):
        g, se = pot.estimate_grad_sigma_mcmc(_sampler([0.0], anh_pot, 2))
        assert np.all(np.abs(g) <= tol3(se))

    def test_antisymmetry_in_the_tilt(self, anh_pot):
        gp, sp = pot.estimate_grad_sigma_mcmc(_sampler([0.6], anh_pot, 3))
        gm, sm = pot.estimate_grad_sigma_mcmc(_sampler([-0.6], anh_pot, 4))
        assert np.all(np.abs(gp + gm) <= tol3(np.hypot(sp, sm)))

    def test_two_dimensional_tilt(self, quad_pot):
        g, se = pot.estimate_grad_sigma_mcmc(
            _sampler([0.4, -0.3], quad_pot, 5, torus_side=8))
        assert np.all(np.abs(g - [0.4, -0.3]) <= tol3(se))

    def test_divergence_detector(self, quad_pot):
        bad = _sampler([0.0], quad_pot, 6, step_size=3.0, burn_in=1000,
                       n_samples=10, stride=1)
        with pytest.raises(GlflowError):
            pot.draw_gradient_samples(bad)

    def test_deterministic_given_seed(self, anh_pot):
        a, _ = pot.estimate_grad_sigma_mcmc(_sampler([0.3], anh_pot, 7))
        b, _ = pot.estimate_grad_sigma_mcmc(_sampler([0.3], anh_pot, 7))
        assert np.array_equal(a, b)


class TestDecomposition:
    def test_quadratic_secant_pieces(self, quad_pot):
        (a_diag, a_se), (rem, rem_se) = pot.estimate_A_a(
            _sampler([0.5], quad_pot, 8))
        assert np.all(np.abs(a_diag - 1.0) <= tol3(a_se))
        assert np.all(np.abs(rem) <= tol3(rem_se))

    def test_closure_identity_same_chain(self, anh_pot):
        # estimated from one chain, the identity A(u) u + a(u) = grad sigma(u)
        # holds pointwise up to the inner quadrature error
        s = _sampler([0.5], anh_pot, 9)
        est = pot.estimate_all(s)
        closure = est["stiffness"] * 0.5 + est["remainder"] - est["grad_sigma"]
        assert np.abs(closure).max() <= 1e-10
        combined = np.sqrt(est["stiffness_se"] ** 2 * 0.25
                           + est["remainder_se"] ** 2 + est["grad_sigma_se"] ** 2)
        assert np.all(np.abs(closure) <= tol3(combined))

    def test_remainder_vanishes_at_zero_tilt(self, anh_pot):
        (_, _), (rem, rem_se) = pot.estimate_A_a(_sampler([0.0], anh_pot, 10))
        assert np.all(np.abs(rem) <= tol3(rem_se))

    def test_stiffness_within_bracket(self, anh_pot):
        # the averaged curvature inherits the pointwise bracket exactly
        for seed, tilt in enumerate(([0.0], [0.8], [-1.5])):
            (a_diag, _), _ = pot.estimate_A_a(_sampler(tilt, anh_pot, 20 + seed))
            assert np.all(a_diag >= anh_pot.c_minus - 1e-9)
            assert np.all(a_diag <= anh_pot.c_plus + 1e-9)


class TestMollification:
    def test_width_validation(self, quad_model):
        for bad in (0.0, -0.1, 1.5):
            with pytest.raises(GlflowError):
                pot.mollify(quad_model, bad)

    def test_exact_on_linear_gradient(self):
        m = pot.exact_quadratic_model(1.0, dim=2)
        md = pot.mollify(m, 0.3)
        rng = np.random.default_rng(1)
        u = rng.standard_normal((20, 2))
        assert np.abs(md.grad_sigma(u) - m.grad_sigma(u)).max() <= 1e-6

    def test_gradient_shift_bounded(self, anh_pot):
        # mollified versus unmollified gradient on a 20-tilt grid
        base_model = _rebuild_base(anh_pot)
        u = np.linspace(-1.9, 1.9, 20)[:, None]
        delta = 0.25
        md = pot.mollify(base_model, delta)
        shift = np.abs(md.grad_sigma(u) - base_model.grad_sigma(u)).max()
        assert shift <= anh_pot.c_plus * delta

    def test_error_shrinks_with_width(self, anh_pot):
        base_model = _rebuild_base(anh_pot)
        u = np.linspace(-1.5, 1.5, 20)[:, None]
        errs = []
        for delta in (0.2, 0.05):
            md = pot.mollify(base_model, delta)
            errs.append(np.abs(md.grad_sigma(u)
                               - base_model.grad_sigma(u)).max())
        assert errs[1] <= errs[0]

    def test_difference_hessian_finite_and_symmetric(self):
        m = pot.mollify(pot.exact_quadratic_model(1.0, dim=2), 0.2)
        h = 1e-4
        u0 = np.array([0.3, -0.1])
        hess = np.empty((2, 2))
        for i in range(2):
            for j in range(2):
                ei = np.eye(2)[i] * h
                ej = np.eye(2)[j] * h
                hess[i, j] = (m.sigma((u0 + ei + ej)[None])
                              - m.sigma((u0 + ei - ej)[None])
                              - m.sigma((u0 - ei + ej)[None])
                              + m.sigma((u0 - ei - ej)[None]))[0] / (4 * h * h)
        assert np.all(np.isfinite(hess))
        assert abs(hess[0, 1] - hess[1, 0]) <= 1e-6

    def test_decomposition_convolves_consistently(self, anh_pot):
        base_model = _rebuild_base(anh_pot)
        md = pot.mollify(base_model, 0.15)
        u = np.linspace(-1.0, 1.0, 11)[:, None]
        lhs = md.stiffness(u) * u + md.remainder(u)
        assert np.abs(lhs - md.grad_sigma(u)).max() <= 1e-10


_BASE_CACHE = {}


def _rebuild_base(anh_pot):
    """Small anharmonic table reused by the mollification tests."""
    if "model" not in _BASE_CACHE:
        table = pot.tabulate_grad_sigma(
            [np.linspace(-3.0, 3.0, 13)], anh_pot,
            dict(torus_side=16, burn_in=2000, n_samples=2000, stride=3),
            seed=40)
        _BASE_CACHE["model"] = pot.model_from_table(
            table, anh_pot.c_minus, anh_pot.c_plus)
    return _BASE_CACHE["model"]


class TestTables:
    def test_interpolation_matches_exact_offgrid(self, quad_pot):
        table = pot.tabulate_grad_sigma(
            [np.linspace(-1.0, 1.0, 9)], quad_pot,
            dict(torus_side=16, burn_in=2000, n_samples=2000, stride=3),
            seed=41)
        m = pot.model_from_table(table, 1.0, 1.0)
        u = np.array([[0.33], [-0.71], [0.05]])
        se = table.grad_se.max()
        assert np.abs(m.grad_sigma(u) - u).max() <= 3 * se + 1e-10

    def test_round_trip_bitwise(self, tmp_path, quad_pot):
        table = pot.tabulate_grad_sigma(
            [np.linspace(-0.5, 0.5, 5)], quad_pot,
            dict(torus_side=8, burn_in=1500, n_samples=1500, stride=2),
            seed=42)
        path = os.path.join(tmp_path, "table.json")
        table.save(path)
        loaded = pot.GradSigmaTable.load(path)
        m1 = pot.model_from_table(table, 1.0, 1.0)
        m2 = pot.model_from_table(loaded, 1.0, 1.0)
        u = np.array([[0.21], [-0.47]])
        assert np.array_equal(m1.grad_sigma(u), m2.grad_sigma(u))
        assert np.array_equal(m1.sigma(u), m2.sigma(u))
        table.export_csv(os.path.join(tmp_path, "table.csv"))
        header = open(os.path.join(tmp_path, "table.csv")).readline()
        assert header.startswith("u_1,grad_sigma_1")

    def test_ray_monotonicity(self, anh_pot):
        m = _rebuild_base(anh_pot)
        u = np.linspace(-2.0, 2.0, 41)[:, None]
        g = m.grad_sigma(u)
        for k in range(len(u) - 1):
            du = float(u[k + 1, 0] - u[k, 0])
            inner = float((g[k + 1, 0] - g[k, 0]) * du)
            assert inner >= anh_pot.c_minus * du * du / 2.0

    def test_sigma_antiderivative_consistency(self, anh_pot):
        m = _rebuild_base(anh_pot)
        h = 1e-6
        for x in (-1.2, 0.1, 0.9):
            fd = (m.sigma(np.array([[x + h]]))
                  - m.sigma(np.array([[x - h]]))) / (2 * h)
            assert abs(fd[0] - m.grad_sigma(np.array([[x]]))[0, 0]) <= 1e-6

    def test_convexity_bracket_with_noise_cushion(self, anh_pot):
        m = _rebuild_base(anh_pot)
        se = m.meta["node_se_max"]
        rng = np.random.default_rng(43)
        for _ in range(100):
            u, v = rng.uniform(-2.0, 2.0, size=(2, 1))
            du = float(np.abs(u - v).max())
            inner = float(((m.grad_sigma(u[None]) - m.grad_sigma(v[None]))
                           @ (u - v)).item())
            gap = float(((u - v) @ (u - v)).item())
            cushion = 6.0 * se * du + 1e-12
            assert inner >= anh_pot.c_minus * gap - cushion
            assert inner <= anh_pot.c_plus * gap + cushion
