"""Cross-cutting diagnostics and desk-scale limit experiments.

Contents: the discrete total surface tension, the time-integrated
oscillation sum of neighboring gradients, multilinear interpolation of step
profiles, the constrained minimizer of total surface tension at fixed
volume (the long-time limit of the conserved flow), and the ensemble
convergence study comparing the stochastic dynamics against a fine-mesh
deterministic reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import GlflowError, SolverError
from .fields import HeightField, shift
from .ops import grad_all, h_minus_one_norm
from .pde import (PdeConfig, PdeState, chemical_potential_values,
                  project_initial, total_energy_values)
from .pde import run as pde_run
from .sde import SdeConfig
from .sde import run as sde_run

# ---------------------------------------------------------------------------
# energy and oscillation diagnostics
# ---------------------------------------------------------------------------


def total_energy(h: HeightField, model) -> float:
    """Discrete total surface tension N^-d sum over the closure of
    sigma(grad h).  Includes the additive offset |closure| sigma(0) N^-d."""
    return total_energy_values(h.values, h.domain, model)


def energy_offset(domain, model) -> float:
    """Energy of the zero profile (the additive constant of the functional)."""
    zero = np.zeros((1, domain.dim))
    return float(model.sigma(zero)[0]) * int(domain.closure.sum()) \
        * domain.N ** (-domain.dim)


def oscillation_increment(h_values, domain, direction) -> float:
    """Sum over the closure of |grad h(x + e) - grad h(x)|^2, times N^-d."""
    e = np.asarray(direction, dtype=int)
    g = grad_all(h_values, domain)
    shifted = g
    for ax in range(domain.dim):
        if e[ax]:
            shifted = np.stack([shift(shifted[i], ax, int(e[ax]), domain.dim)
                                for i in range(domain.dim)])
    diff = shifted - g
    return float((diff[:, domain.closure] ** 2).sum()) \
        * domain.N ** (-domain.dim)


def oscillation_sum(trajectory, direction=None) -> float:
    """Time integral of the oscillation increment along one trajectory.

    Uses the per-record integrands stored by the deterministic run and a
    trapezoidal rule in time.  ``direction`` picks the axis (default: the
    first); the recorded snapshots are used when a non-axis direction is
    requested.
    """
    times = trajectory.times
    if direction is None:
        axis = 0
    elif np.isscalar(direction):
        axis = int(direction)
    else:
        nz = np.flatnonzero(np.asarray(direction))
        if len(nz) != 1:
            raise GlflowError("direction must be a lattice unit vector")
        axis = int(nz[0])
    col = trajectory.scalars.get(f"osc_e{axis+1}")
    if col is None:
        raise GlflowError("per-record oscillation column missing from trajectory")
    return float(np.trapezoid(col, times))


# ---------------------------------------------------------------------------
# multilinear interpolation of step profiles
# ---------------------------------------------------------------------------


def polilinear_interpolate(h: HeightField):
    """Continuous interpolant blending the 2^d nodes around each point.

    Node x carries the cell value at x/N; at a point theta the weights are
    products of the fractional parts of N theta, so node values are
    reproduced and each value stays between the surrounding node extremes.
    Outside the covered region the zero extension takes over continuously.
    """
    domain = h.domain
    values = h.values
    d = domain.dim
    N = domain.N
    shape = np.asarray(domain.box_shape)

    def evaluate(points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        scaled = N * pts
        base = np.floor(scaled).astype(int)
        frac = scaled - base
        out = np.zeros(len(pts))
        for corner in np.ndindex(*([2] * d)):
            corner_arr = np.asarray(corner)
            w = np.ones(len(pts))
            for ax in range(d):
                w *= frac[:, ax] if corner[ax] else (1.0 - frac[:, ax])
            idx = base + corner_arr - domain.origin
            ok = np.all((idx >= 0) & (idx < shape), axis=1)
            vals = np.zeros(len(pts))
            vals[ok] = values[tuple(idx[ok].T)]
            out += w * vals
        return out

    return evaluate


# ---------------------------------------------------------------------------
# constrained minimization of the total surface tension
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WulffProblem:
    """Minimize the total surface tension over bulk profiles of volume v.

    The feasible set is the affine slice N^-d sum h = volume of fields that
    vanish outside the bulk set; the projection subtracts the site mean and
    restores the target volume exactly.
    """

    domain: object
    model: object
    volume: float
    grad_tol: float = 1e-9
    max_iterations: int = 500_000
    armijo: float = 1e-4
    shrink: float = 0.5
    step0: float = 1.0


@dataclass
class WulffResult:
    minimizer: HeightField
    objective: float
    iterations: int
    grad_norm: float


def solve_wulff(problem: WulffProblem) -> WulffResult:
    """Projected gradient descent with a backtracking line search.

    The search halves the step from ``step0`` until the Armijo condition
    holds, but never below the guaranteed-descent step 0.9 / L, where
    L = c_plus 4d N^2 N^-d bounds the gradient's Lipschitz constant; at
    that floor the step is accepted unconditionally (the descent lemma
    certifies non-increase there, which matters once energy differences
    fall below floating resolution).  The iteration stops when the
    projected gradient norm falls below ``grad_tol``.
    """
    domain = problem.domain
    model = problem.model
    nd = domain.N ** (-domain.dim)
    n = domain.n_dn
    target_sum = problem.volume / nd
    lipschitz = model.c_plus * 4.0 * domain.dim * domain.N ** 2 * nd
    s_floor = 0.9 / lipschitz

    mask = domain.dn
    scratch = np.zeros(domain.box_shape)

    def project(v):
        return v + (target_sum - v.sum()) / n

    def objective(v):
        scratch[:] = 0.0
        scratch[mask] = v
        return total_energy_values(scratch, domain, model)

    def gradient(v):
        scratch[:] = 0.0
        scratch[mask] = v
        k = chemical_potential_values(scratch, domain, model)
        return -nd * k[mask]

    h = project(np.zeros(n))
    e = objective(h)
    step_size = problem.step0
    for it in range(problem.max_iterations):
        g = gradient(h)
        g -= g.mean()
        gnorm = float(np.linalg.norm(g))
        if gnorm < problem.grad_tol:
            return WulffResult(HeightField.from_site_values(domain, "dn", h),
                               e, it, gnorm)
        gsq = gnorm**2
        s = max(step_size, s_floor)
        while True:
            trial = project(h - s * g)
            e_trial = objective(trial)
            if e_trial <= e - problem.armijo * s * gsq or s <= s_floor:
                break
            s = max(s * problem.shrink, s_floor)
        if e_trial > e + 1e-12 * abs(e):
            raise SolverError(
                f"objective increased at iteration {it}; the smoothness "
                f"bound backing the floor step must be wrong")
        h, e = trial, e_trial
        # allow the step to grow back so the search adapts both ways
        step_size = min(problem.step0, s / problem.shrink)
    raise SolverError(
        f"projected gradient did not reach tolerance {problem.grad_tol} in "
        f"{problem.max_iterations} iterations (last gradient norm {gnorm:.3e})")


def wulff_relaxation_check(final: PdeState, wulff: WulffResult, model,
                           norm_threshold=1e-4, energy_threshold=1e-6,
                           mass_tol=1e-8):
    """Compare a relaxed profile against the direct constrained minimizer.

    Raises on a volume mismatch; otherwise reports the scaled dual norm of
    the difference, the energy gap, and the pass verdict against the
    configured thresholds.
    """
    domain = final.h.domain
    nd = domain.N ** (-domain.dim)
    v_run = final.h.sum() * nd
    v_min = wulff.minimizer.sum() * nd
    if abs(v_run - v_min) > mass_tol * max(1.0, abs(v_min)):
        raise GlflowError(
            f"volume mismatch: relaxed profile has {v_run}, minimizer {v_min}")
    diff = HeightField(domain, "dn",
                       domain.N * (final.h.values - wulff.minimizer.values))
    gap_norm = h_minus_one_norm(diff)
    e_run = total_energy_values(final.h.values, domain, model)
    gap_energy = e_run - wulff.objective
    return {
        "norm_gap": gap_norm,
        "energy_gap": gap_energy,
        "volume": v_run,
        "passed": bool(gap_norm <= norm_threshold
                       and abs(gap_energy) <= energy_threshold),
    }


def quadratic_wulff_profile(domain, volume):
    """Continuum minimizer for the quadratic model on the bulk interval.

    In one dimension the optimality system (constant chemical potential,
    zero boundary values, prescribed volume) gives a parabola; this returns
    it for the interval actually spanned by the discretized bulk set, i.e.
    vanishing at the first exterior sites.  Feed it the lattice positions
    x/N to predict the discrete minimizer.
    """
    if domain.dim != 1:
        raise GlflowError("the closed-form profile is one dimensional")
    sites = domain.sites("dn").ravel()
    a = (sites.min() - 1) / domain.N
    b = (sites.max() + 1) / domain.N

    def profile(theta):
        theta = np.asarray(theta, dtype=float)
        out = 6.0 * volume * (theta - a) * (b - theta) / (b - a) ** 3
        return np.where((theta >= a) & (theta <= b), out, 0.0)

    return profile


# ---------------------------------------------------------------------------
# ensemble convergence study
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConvergenceStudy:
    """Stochastic-versus-deterministic comparison across resolutions.

    For each resolution the same initial profile is projected, an ensemble
    of the conserved dynamics is run to the evaluation time, and the mean
    squared scaled dual norm of the difference against a fine-mesh
    deterministic reference (restricted by exact cell averaging) is
    tabulated with its standard error.
    """

    macro: object
    n_values: tuple
    h0: callable
    potential: object
    model: object
    t_eval: float
    n_replicas: int = 100
    amplitude: float = math.sqrt(2.0)
    seed: int = 0
    dtau: float | None = None
    ref_factor: int = 2
    dt_ref: float | None = None


@dataclass
class StudyResult:
    rows: list                     # dicts: N, t, error_mean, error_se
    meta: dict = field(default_factory=dict)

    def errors(self):
        return np.array([r["error_mean"] for r in self.rows])

    def standard_errors(self):
        return np.array([r["error_se"] for r in self.rows])

    def decreasing_within(self, se_multiple=2.0):
        """True when each error drops below its predecessor within the
        combined standard-error allowance."""
        e = self.errors()
        s = self.standard_errors()
        for k in range(len(e) - 1):
            allowance = se_multiple * math.hypot(s[k], s[k + 1])
            if not (e[k + 1] < e[k] + allowance):
                return False
        return True

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write("N,t,error_mean,error_se\n")
            for r in self.rows:
                fh.write(f"{r['N']},{r['t']:.17g},{r['error_mean']:.17g},"
                         f"{r['error_se']:.17g}\n")


def _axis_overlap_matrix(dom_coarse, dom_ref, axis):
    """Overlap lengths (in macroscopic units) between coarse and reference
    cells along one axis, as a dense (n_coarse, n_ref) matrix."""
    nc = dom_coarse.N
    nr = dom_ref.N
    co = dom_coarse.origin[axis]
    ro = dom_ref.origin[axis]
    ncells = dom_coarse.box_shape[axis]
    rcells = dom_ref.box_shape[axis]
    out = np.zeros((ncells, rcells))
    for i in range(ncells):
        a = (co + i - 0.5) / nc
        b = (co + i + 0.5) / nc
        j0 = max(0, int(math.floor(a * nr)) - ro - 1)
        j1 = min(rcells - 1, int(math.ceil(b * nr)) - ro + 1)
        for j in range(j0, j1 + 1):
            ra = (ro + j - 0.5) / nr
            rb = (ro + j + 0.5) / nr
            ov = min(b, rb) - max(a, ra)
            if ov > 0:
                out[i, j] = ov
    return out


def restrict_cell_average(h_ref: HeightField, dom_coarse) -> HeightField:
    """Exact cell averaging of a fine step profile onto a coarser lattice.

    Each coarse cell receives the integral of the fine step function over
    it divided by the cell volume; overlaps are computed exactly, so the
    restriction is deterministic and mass-aware.
    """
    dom_ref = h_ref.domain
    values = h_ref.values
    for ax in range(dom_coarse.dim):
        w = _axis_overlap_matrix(dom_coarse, dom_ref, ax)
        values = np.tensordot(w, np.moveaxis(values, ax, 0), axes=(1, 0))
        values = np.moveaxis(values, 0, ax)
    values = values * dom_coarse.N ** dom_coarse.dim
    return HeightField(dom_coarse, "dn", values)


def convergence_reference(study: ConvergenceStudy) -> HeightField:
    """Deterministic fine-mesh reference profile at the evaluation time.

    One solve at ``ref_factor`` times the finest requested resolution, with
    the semi-implicit integrator and a step fine enough that its bias is
    shared by every row of the study.
    """
    from .domain import build_lattice_domain

    n_ref = study.ref_factor * max(study.n_values)
    dom_ref = build_lattice_domain(study.macro, n_ref)
    dt_ref = study.dt_ref if study.dt_ref is not None else \
        max(study.t_eval / 2e4, 1e-12)
    cfg_ref = PdeConfig(domain=dom_ref, model=study.model,
                        t_final=study.t_eval, dt=dt_ref,
                        integrator="semi-implicit", store_snapshots=False,
                        record_interval=max(study.t_eval, dt_ref))
    state_ref = project_initial(study.h0, dom_ref)
    _, ref_final = pde_run(cfg_ref, state_ref)
    return ref_final.h


def convergence_cell(study: ConvergenceStudy, n, ref_field: HeightField):
    """One (resolution, seed) cell of the study: ensemble error row.

    Cells are independent given the reference; their seeds derive from
    (study seed, N), so any execution order or process layout produces the
    same numbers.
    """
    from .domain import build_lattice_domain

    dom = build_lattice_domain(study.macro, int(n))
    h0n = project_initial(study.h0, dom).h
    phi0 = HeightField(dom, "dn", dom.N * h0n.values)
    cfg = SdeConfig(domain=dom, potential=study.potential,
                    t_final=study.t_eval, dtau=study.dtau,
                    amplitude=study.amplitude,
                    n_replicas=study.n_replicas,
                    seed=int(np.random.SeedSequence(
                        (study.seed, int(n))).generate_state(1)[0]),
                    record_interval=max(study.t_eval, 1e-12))
    _, phi = sde_run(cfg, phi0)
    ref_on_n = restrict_cell_average(ref_field, dom)
    target = dom.N * ref_on_n.values
    errs = np.empty(cfg.n_replicas)
    for r in range(cfg.n_replicas):
        diff = HeightField(dom, "dn", phi[r] - target)
        errs[r] = h_minus_one_norm(diff) ** 2
    return {
        "N": int(n), "t": study.t_eval,
        "error_mean": float(errs.mean()),
        "error_se": float(errs.std(ddof=1) / math.sqrt(len(errs)))
        if len(errs) > 1 else 0.0,
    }


def hydrodynamic_convergence(study: ConvergenceStudy, ref_field=None):
    """Run the full stochastic-versus-reference comparison."""
    if ref_field is None:
        ref_field = convergence_reference(study)
    rows = [convergence_cell(study, n, ref_field) for n in study.n_values]
    return StudyResult(rows=rows, meta={
        "n_ref": study.ref_factor * max(study.n_values),
        "amplitude": study.amplitude,
        "n_replicas": study.n_replicas, "seed": study.seed,
    })
