"""Microscopic potentials and surface-tension models.

The microscopic bond potential V is symmetric with second derivative pinned
between two positive constants.  The macroscopic surface tension sigma(u)
of a tilted interface has gradient equal to the mean of V' over one bond
under the tilted gradient Gibbs measure; that mean splits exactly as

    grad_sigma(u) = A(u) u + a(u),

with A(u) the diagonal matrix of averaged second derivatives (an exact
secant stiffness, pinned in [c_minus, c_plus]) and a(u) the mean of the
tilt-shifted first derivative.  Three interchangeable backends evaluate
these quantities: a closed form for quadratic V, a Monte Carlo table with
multilinear interpolation, and a mollified wrapper that convolves any
backend with a smooth compactly supported bump of width delta.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DivergenceError, GlflowError

# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Potential:
    """Symmetric bond potential with two-sided curvature bounds."""

    name: str
    v: callable
    dv: callable
    d2v: callable
    c_minus: float
    c_plus: float
    params: dict = field(default_factory=dict)

    def check_assumptions(self, grid=None, tol=1e-12):
        """Verify symmetry and the curvature bracket on a sample grid."""
        if grid is None:
            grid = np.linspace(-10.0, 10.0, 401)
        sym = np.max(np.abs(self.v(grid) - self.v(-grid)))
        curv = self.d2v(grid)
        ok = (sym <= tol * max(1.0, np.max(np.abs(self.v(grid))))
              and np.all(curv >= self.c_minus - tol)
              and np.all(curv <= self.c_plus + tol))
        return bool(ok)


def quadratic_potential(kappa=1.0):
    """V(r) = kappa r^2 / 2; the exactly solvable Gaussian case."""
    kappa = float(kappa)
    return Potential(
        name="quadratic",
        v=lambda r: 0.5 * kappa * np.asarray(r) ** 2,
        dv=lambda r: kappa * np.asarray(r),
        d2v=lambda r: kappa * np.ones_like(np.asarray(r, dtype=float)),
        c_minus=kappa, c_plus=kappa,
        params={"kappa": kappa},
    )


def anharmonic_potential():
    """Symmetric non-quadratic potential with bounded curvature.

    V''(r) = 1 + r^2 / (2 (1 + r^2)), so c_minus = 1 and c_plus = 1.5.
    First derivative and value follow in closed form:

        V'(r) = 1.5 r - 0.5 atan(r),
        V(r)  = 0.75 r^2 - 0.5 r atan(r) + 0.25 log(1 + r^2).
    """

    def v(r):
        r = np.asarray(r, dtype=float)
        return 0.75 * r**2 - 0.5 * r * np.arctan(r) + 0.25 * np.log1p(r**2)

    def dv(r):
        r = np.asarray(r, dtype=float)
        return 1.5 * r - 0.5 * np.arctan(r)

    def d2v(r):
        r = np.asarray(r, dtype=float)
        return 1.0 + 0.5 * r**2 / (1.0 + r**2)

    return Potential(name="anharmonic", v=v, dv=dv, d2v=d2v,
                     c_minus=1.0, c_plus=1.5)


POTENTIALS = {"quadratic": quadratic_potential, "anharmonic": anharmonic_potential}


# ---------------------------------------------------------------------------
# surface tension models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SurfaceTensionModel:
    """Evaluators for sigma, its gradient, and the secant decomposition.

    All callables accept arrays of tilts with shape (..., d) and return
    shape (...) for ``sigma`` and (..., d) otherwise.  ``stiffness`` holds
    the diagonal of A(u); ``remainder`` holds a(u).  ``delta`` is the
    mollification width (0 for an unmollified backend).
    """

    backend: str
    dim: int
    c_minus: float
    c_plus: float
    sigma: callable
    grad_sigma: callable
    stiffness: callable
    remainder: callable
    delta: float = 0.0
    meta: dict = field(default_factory=dict)

    def grad_sigma_flat(self, comps):
        """Gradient applied to stacked per-axis components (d, ...)."""
        u = np.moveaxis(np.asarray(comps), 0, -1)
        return np.moveaxis(self.grad_sigma(u), -1, 0)

    def sigma_flat(self, comps):
        u = np.moveaxis(np.asarray(comps), 0, -1)
        return self.sigma(u)

    def stiffness_flat(self, comps):
        u = np.moveaxis(np.asarray(comps), 0, -1)
        return np.moveaxis(self.stiffness(u), -1, 0)

    def remainder_flat(self, comps):
        u = np.moveaxis(np.asarray(comps), 0, -1)
        return np.moveaxis(self.remainder(u), -1, 0)


def exact_quadratic_model(kappa=1.0, dim=1):
    """Closed-form model for quadratic V: sigma(u) = kappa |u|^2 / 2."""
    kappa = float(kappa)

    def sigma(u):
        u = np.asarray(u, dtype=float)
        return 0.5 * kappa * np.sum(u * u, axis=-1)

    def grad_sigma(u):
        return kappa * np.asarray(u, dtype=float)

    def stiffness(u):
        return kappa * np.ones_like(np.asarray(u, dtype=float))

    def remainder(u):
        return np.zeros_like(np.asarray(u, dtype=float))

    return SurfaceTensionModel(
        backend="exact-quadratic", dim=dim, c_minus=kappa, c_plus=kappa,
        sigma=sigma, grad_sigma=grad_sigma, stiffness=stiffness,
        remainder=remainder, meta={"kappa": kappa},
    )


def grad_sigma_exact_quadratic(model, u):
    """Gradient of the quadratic-backend surface tension: kappa * u."""
    if model.backend != "exact-quadratic":
        raise GlflowError(
            f"grad_sigma_exact_quadratic needs the exact-quadratic backend, "
            f"got {model.backend!r}")
    return model.grad_sigma(np.asarray(u, dtype=float))


# ---------------------------------------------------------------------------
# tilted Gibbs sampler
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TiltedGibbsSampler:
    """Unadjusted Langevin sampler for the tilted periodic gradient field.

    Heights live on the d-dimensional torus of side ``torus_side``; the
    gradient field along axis i is the periodic forward difference plus the
    tilt component u_i, so its ensemble mean is exactly u_i.  Estimates are
    deterministic given the seed.
    """

    tilt: np.ndarray
    potential: Potential
    torus_side: int = 16
    step_size: float = 1e-3
    burn_in: int = 10_000
    n_samples: int = 10_000
    stride: int = 10
    seed: int = 0
    n_batches: int = 20

    def __post_init__(self):
        object.__setattr__(self, "tilt",
                           np.atleast_1d(np.asarray(self.tilt, dtype=float)))
        if self.torus_side < 8:
            raise GlflowError("torus side must be at least 8")
        if self.burn_in < 1000:
            raise GlflowError("burn-in must be at least 1000 sweeps")

    @property
    def dim(self):
        return len(self.tilt)


def _periodic_diff(phi, axis):
    return np.roll(phi, -1, axis=axis) - phi


def draw_gradient_samples(sampler):
    """Run the chain and return gradient-field samples.

    Output shape is (n_samples, d, torus_side, ..., torus_side); entry
    (t, i, x) is the tilted forward difference along axis i at site x.
    """
    s = sampler
    d = s.dim
    shape = (s.torus_side,) * d
    rng = np.random.default_rng(np.random.SeedSequence((int(s.seed),)))
    phi = np.zeros(shape)
    h = s.step_size
    noise_scale = np.sqrt(2.0 * h)
    u = s.tilt

    def drift(phi):
        out = np.zeros_like(phi)
        for ax in range(d):
            dv = s.potential.dv(_periodic_diff(phi, ax) + u[ax])
            out += dv - np.roll(dv, 1, axis=ax)
        return out

    def step(phi):
        return phi + h * drift(phi) + noise_scale * rng.standard_normal(shape)

    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(s.burn_in):
            phi = step(phi)
            if k % 200 == 0 and not np.all(np.abs(phi) < 1e8):
                raise DivergenceError(
                    f"field norm exploded during burn-in at sweep {k}")
        if not np.all(np.abs(phi) < 1e8):
            raise DivergenceError("field norm exploded during burn-in")

        samples = np.empty((s.n_samples, d) + shape)
        for t in range(s.n_samples):
            for _ in range(s.stride):
                phi = step(phi)
            if not np.all(np.abs(phi) < 1e8):
                raise DivergenceError(f"field norm exploded at sample {t}")
            for ax in range(d):
                samples[t, ax] = _periodic_diff(phi, ax) + u[ax]
    return samples


def _batch_se(series, n_batches):
    """Standard error of the mean of a correlated series by batch means."""
    n = len(series)
    m = n // n_batches
    trimmed = series[: m * n_batches].reshape(n_batches, m)
    batch_means = trimmed.mean(axis=1)
    return float(batch_means.std(ddof=1) / np.sqrt(n_batches))


_GL16_NODES, _GL16_WEIGHTS = np.polynomial.legendre.leggauss(16)
_LAMBDA_NODES = 0.5 * (_GL16_NODES + 1.0)
_LAMBDA_WEIGHTS = 0.5 * _GL16_WEIGHTS


def estimate_all(sampler, samples=None):
    """Estimate grad_sigma, the stiffness A and the remainder a at one tilt.

    All three observables are averaged over the same chain, so the exact
    pointwise identity V'(eta) = [int_0^1 V''(eta - s u) ds] u + V'(eta - u)
    transfers to the estimates up to the quadrature error of the inner
    integral.  Standard errors come from 20 batch means.
    """
    s = sampler
    if samples is None:
        samples = draw_gradient_samples(s)
    d = s.dim
    u = s.tilt

    grad = np.empty(d)
    grad_se = np.empty(d)
    stiff = np.empty(d)
    stiff_se = np.empty(d)
    rem = np.empty(d)
    rem_se = np.empty(d)
    for ax in range(d):
        eta = samples[:, ax]
        series = s.potential.dv(eta).mean(axis=tuple(range(1, eta.ndim)))
        grad[ax] = series.mean()
        grad_se[ax] = _batch_se(series, s.n_batches)

        acc = np.zeros_like(eta)
        for lam, w in zip(_LAMBDA_NODES, _LAMBDA_WEIGHTS):
            acc += w * s.potential.d2v(eta - lam * u[ax])
        series = acc.mean(axis=tuple(range(1, eta.ndim)))
        stiff[ax] = series.mean()
        stiff_se[ax] = _batch_se(series, s.n_batches)

        series = s.potential.dv(eta - u[ax]).mean(axis=tuple(range(1, eta.ndim)))
        rem[ax] = series.mean()
        rem_se[ax] = _batch_se(series, s.n_batches)

    return {
        "grad_sigma": grad, "grad_sigma_se": grad_se,
        "stiffness": stiff, "stiffness_se": stiff_se,
        "remainder": rem, "remainder_se": rem_se,
    }


def estimate_grad_sigma_mcmc(sampler):
    """Monte Carlo estimate of grad_sigma(u) with per-component errors."""
    est = estimate_all(sampler)
    return est["grad_sigma"], est["grad_sigma_se"]


def estimate_A_a(sampler):
    """Monte Carlo estimate of the decomposition pieces (A diag, a)."""
    est = estimate_all(sampler)
    return ((est["stiffness"], est["stiffness_se"]),
            (est["remainder"], est["remainder_se"]))


# ---------------------------------------------------------------------------
# Monte Carlo tables with multilinear interpolation
# ---------------------------------------------------------------------------

TABLE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class GradSigmaTable:
    """Tabulated surface-tension data on a rectangular tilt grid."""

    axes: tuple                 # per-axis strictly increasing node arrays
    grad: np.ndarray            # (*grid_shape, d)
    grad_se: np.ndarray
    stiffness: np.ndarray       # (*grid_shape, d)
    stiffness_se: np.ndarray
    remainder: np.ndarray       # (*grid_shape, d)
    remainder_se: np.ndarray
    potential_name: str
    sampler_config: dict
    seed: int

    @property
    def dim(self):
        return len(self.axes)

    def save(self, path):
        payload = {
            "format": "glflow-grad-sigma-table",
            "version": TABLE_FORMAT_VERSION,
            "dim": self.dim,
            "axes": [a.tolist() for a in self.axes],
            "potential": self.potential_name,
            "sampler": self.sampler_config,
            "seed": self.seed,
            "grad": self.grad.tolist(),
            "grad_se": self.grad_se.tolist(),
            "stiffness": self.stiffness.tolist(),
            "stiffness_se": self.stiffness_se.tolist(),
            "remainder": self.remainder.tolist(),
            "remainder_se": self.remainder_se.tolist(),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("format") != "glflow-grad-sigma-table":
            raise GlflowError(f"{path} is not a surface-tension table")
        if payload.get("version") != TABLE_FORMAT_VERSION:
            raise GlflowError(f"unsupported table version {payload.get('version')}")
        return cls(
            axes=tuple(np.asarray(a, dtype=float) for a in payload["axes"]),
            grad=np.asarray(payload["grad"], dtype=float),
            grad_se=np.asarray(payload["grad_se"], dtype=float),
            stiffness=np.asarray(payload["stiffness"], dtype=float),
            stiffness_se=np.asarray(payload["stiffness_se"], dtype=float),
            remainder=np.asarray(payload["remainder"], dtype=float),
            remainder_se=np.asarray(payload["remainder_se"], dtype=float),
            potential_name=payload["potential"],
            sampler_config=payload["sampler"],
            seed=payload["seed"],
        )

    def export_csv(self, path):
        """Nodes and values as CSV: u_1..u_d, grad_1.., se_1.., A_1.., a_1.."""
        grid_shape = tuple(len(a) for a in self.axes)
        d = self.dim
        header = ([f"u_{i+1}" for i in range(d)]
                  + [f"grad_sigma_{i+1}" for i in range(d)]
                  + [f"grad_sigma_se_{i+1}" for i in range(d)]
                  + [f"stiffness_{i+1}" for i in range(d)]
                  + [f"remainder_{i+1}" for i in range(d)])
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for idx in np.ndindex(*grid_shape):
                node = [self.axes[i][idx[i]] for i in range(d)]
                row = (node + list(self.grad[idx]) + list(self.grad_se[idx])
                       + list(self.stiffness[idx]) + list(self.remainder[idx]))
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _multilinear(axes, table, query):
    """Multilinear interpolation of ``table`` (*grid, m) at ``query`` (..., d).

    Queries are clamped to the grid hull componentwise.
    """
    q = np.asarray(query, dtype=float)
    batch = q.shape[:-1]
    d = len(axes)
    qf = q.reshape(-1, d)
    idx = []
    frac = []
    for ax, nodes in enumerate(axes):
        x = np.clip(qf[:, ax], nodes[0], nodes[-1])
        i = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0,
                    len(nodes) - 2)
        idx.append(i)
        frac.append((x - nodes[i]) / (nodes[i + 1] - nodes[i]))
    m = table.shape[-1]
    out = np.zeros((len(qf), m))
    for corner in np.ndindex(*([2] * d)):
        w = np.ones(len(qf))
        loc = []
        for ax, c in enumerate(corner):
            w *= frac[ax] if c else (1.0 - frac[ax])
            loc.append(idx[ax] + c)
        out += w[:, None] * table[tuple(loc)]
    return out.reshape(batch + (m,))


def _sigma_from_grad_1d(nodes, grad_nodes):
    """Exact antiderivative of the piecewise-linear gradient interpolant.

    Returns a callable sigma with sigma(0) = 0 whose derivative matches the
    multilinear gradient evaluator everywhere, including the linear
    extension outside the grid hull where the gradient is clamped.
    """
    nodes = np.asarray(nodes)
    g = np.asarray(grad_nodes).ravel()
    widths = np.diff(nodes)
    seg = 0.5 * (g[:-1] + g[1:]) * widths
    cum = np.concatenate([[0.0], np.cumsum(seg)])

    def raw(x):
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, nodes[0], nodes[-1])
        i = np.clip(np.searchsorted(nodes, xc, side="right") - 1, 0,
                    len(nodes) - 2)
        t = xc - nodes[i]
        slope = (g[i + 1] - g[i]) / widths[i]
        inside = cum[i] + g[i] * t + 0.5 * slope * t**2
        # clamped gradient outside the hull, so sigma continues linearly
        inside = inside + np.where(x > nodes[-1], (x - nodes[-1]) * g[-1], 0.0)
        inside = inside + np.where(x < nodes[0], (x - nodes[0]) * g[0], 0.0)
        return inside

    offset = raw(0.0)

    def sigma(u):
        u = np.asarray(u, dtype=float)
        return raw(u[..., 0]) - offset

    return sigma


def _sigma_by_ray_quadrature(grad_sigma, n_points=64):
    """sigma(u) = int_0^1 grad_sigma(s u) . u ds by Gauss-Legendre.

    Used for tables in dimension two and higher, where the interpolated
    gradient field has no exact potential; the returned sigma is then only
    approximately consistent with the gradient evaluator.
    """
    nodes, weights = np.polynomial.legendre.leggauss(n_points)
    s = 0.5 * (nodes + 1.0)
    w = 0.5 * weights

    def sigma(u):
        u = np.asarray(u, dtype=float)
        total = np.zeros(u.shape[:-1])
        for sj, wj in zip(s, w):
            total = total + wj * np.sum(grad_sigma(sj * u) * u, axis=-1)
        return total

    return sigma


def model_from_table(table, c_minus, c_plus):
    """Surface-tension model backed by an interpolated Monte Carlo table.

    The evaluators interpolate the gradient and the stiffness multilinearly;
    the remainder is derived as grad_sigma(u) - stiffness(u) * u so that the
    secant closure holds pointwise off-grid too (interpolating all three
    independently would break it by the interpolation error, and with it the
    exact recombination of the elliptic splitting).  At the nodes the
    derived remainder agrees with the raw estimates stored in the table.
    """
    axes = table.axes

    def grad_sigma(u):
        return _multilinear(axes, table.grad, u)

    def stiffness(u):
        return _multilinear(axes, table.stiffness, u)

    def remainder(u):
        u = np.asarray(u, dtype=float)
        return grad_sigma(u) - stiffness(u) * u

    if table.dim == 1:
        sigma = _sigma_from_grad_1d(axes[0], table.grad)
    else:
        sigma = _sigma_by_ray_quadrature(grad_sigma)

    return SurfaceTensionModel(
        backend="mcmc-table", dim=table.dim, c_minus=c_minus, c_plus=c_plus,
        sigma=sigma, grad_sigma=grad_sigma, stiffness=stiffness,
        remainder=remainder,
        meta={"potential": table.potential_name,
              "node_se_max": float(np.max(table.grad_se)),
              "hull": [(float(a[0]), float(a[-1])) for a in axes]},
    )


def tabulate_grad_sigma(axes, potential, sampler_config=None, seed=0):
    """Run one sampler per grid node and assemble a table backend.

    Node seeds derive from (seed, flat node index), so distinct nodes use
    independent streams and may run in any order.
    """
    axes = tuple(np.asarray(a, dtype=float) for a in axes)
    d = len(axes)
    cfg = dict(sampler_config or {})
    grid_shape = tuple(len(a) for a in axes)
    grad = np.empty(grid_shape + (d,))
    grad_se = np.empty_like(grad)
    stiff = np.empty_like(grad)
    stiff_se = np.empty_like(grad)
    rem = np.empty_like(grad)
    rem_se = np.empty_like(grad)
    for flat, idx in enumerate(np.ndindex(*grid_shape)):
        u = np.array([axes[i][idx[i]] for i in range(d)])
        node_seed = int(np.random.SeedSequence((int(seed), flat))
                        .generate_state(1)[0])
        sampler = TiltedGibbsSampler(tilt=u, potential=potential,
                                     seed=node_seed, **cfg)
        est = estimate_all(sampler)
        grad[idx] = est["grad_sigma"]
        grad_se[idx] = est["grad_sigma_se"]
        stiff[idx] = est["stiffness"]
        stiff_se[idx] = est["stiffness_se"]
        rem[idx] = est["remainder"]
        rem_se[idx] = est["remainder_se"]
    cfg_echo = dict(cfg)
    cfg_echo.setdefault("torus_side", TiltedGibbsSampler.torus_side)
    return GradSigmaTable(
        axes=axes, grad=grad, grad_se=grad_se,
        stiffness=stiff, stiffness_se=stiff_se,
        remainder=rem, remainder_se=rem_se,
        potential_name=potential.name, sampler_config=cfg_echo, seed=int(seed),
    )


# ---------------------------------------------------------------------------
# mollification
# ---------------------------------------------------------------------------


def _bump(t):
    """Unnormalized smooth bump supported in |t| < 1."""
    t = np.asarray(t, dtype=float)
    out = np.zeros_like(t)
    inside = np.abs(t) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - t[inside] ** 2))
    return out


def mollification_rule(dim, delta, points_per_axis=9):
    """Quadrature nodes and normalized weights for bump convolution.

    Tensor Gauss-Legendre nodes on [-delta, delta]^d weighted by the radial
    bump of width delta; weights are normalized to sum to one, making every
    mollified quantity an exact convex combination of base evaluations at
    shifted tilts.
    """
    nodes, weights = np.polynomial.legendre.leggauss(points_per_axis)
    axes = [delta * nodes] * dim
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    w = delta * weights
    for _ in range(dim - 1):
        w = np.multiply.outer(w, delta * weights)
    w = np.asarray(w).ravel()
    radii = np.linalg.norm(pts, axis=1) / delta
    w = w * _bump(radii)
    return pts, w / w.sum()


def mollify(model, delta, points_per_axis=9):
    """Convolve a surface-tension model with a smooth bump of width delta.

    The mollified gradient keeps the convexity bracket of the base model and
    deviates from it by at most c_plus * delta.  The decomposition pieces
    convolve consistently, so A_delta(u) u + a_delta(u) equals the mollified
    gradient exactly.
    """
    if not (0.0 < delta <= 1.0):
        raise GlflowError(f"mollification width must lie in (0, 1], got {delta}")
    pts, w = mollification_rule(model.dim, delta, points_per_axis)

    def smear_vec(fn):
        def out(u):
            u = np.asarray(u, dtype=float)
            total = np.zeros(u.shape)
            for v, wq in zip(pts, w):
                total = total + wq * fn(u - v)
            return total
        return out

    def sigma(u):
        u = np.asarray(u, dtype=float)
        total = np.zeros(u.shape[:-1])
        for v, wq in zip(pts, w):
            total = total + wq * model.sigma(u - v)
        return total

    grad_sigma = smear_vec(model.grad_sigma)
    stiffness = smear_vec(model.stiffness)

    def remainder(u):
        u = np.asarray(u, dtype=float)
        total = np.zeros(u.shape)
        for v, wq in zip(pts, w):
            total = total + wq * (model.remainder(u - v)
                                  - model.stiffness(u - v) * v)
        return total

    return SurfaceTensionModel(
        backend="mollified", dim=model.dim,
        c_minus=model.c_minus, c_plus=model.c_plus,
        sigma=sigma, grad_sigma=grad_sigma, stiffness=stiffness,
        remainder=remainder, delta=float(delta),
        meta={"base_backend": model.backend, **model.meta},
    )
