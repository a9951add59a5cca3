"""Discrete differential operators, Poisson solves, and lattice norms.

Conventions (mesh size 1/N, zero extension everywhere):

* forward difference     grad_i f(x) = N (f(x + e_i) - f(x)),
* divergence             div g(x)   = sum_i N (g_i(x) - g_i(x - e_i)),
* bulk graph Laplacian   lap f(x)   = sum over bulk neighbors y of x of
                                      (f(y) - f(x)),   x in the bulk set,

so the summation-by-parts identity

    sum_{x in dn} alpha(x) div(beta)(x)
        = - sum_{x in closure} grad(alpha)(x) . beta(x)

holds exactly for alpha vanishing outside the bulk set.  The cell-region
Laplacian used by the macroscopic solver equals the bulk graph Laplacian
scaled by N^2; both entry points are kept because they carry different
scaling conventions.

All reductions run in C order over the site masks, so results are bitwise
reproducible.
"""

from __future__ import annotations

import numpy as np

from .errors import SolverError
from .fields import BondField, HeightField, shift

# ---------------------------------------------------------------------------
# raw kernels (batch friendly: lattice axes are the trailing ones)
# ---------------------------------------------------------------------------


def grad_component(values, domain, axis):
    """Forward difference N (f(x + e_i) - f(x)) on the whole box."""
    return domain.N * (shift(values, axis, 1, domain.dim) - values)


def grad_all(values, domain):
    """All forward differences, stacked into shape (d, ...)."""
    return np.stack([grad_component(values, domain, ax)
                     for ax in range(domain.dim)])


def div_all(comps, domain):
    """Divergence of per-axis bond values: sum_i N (g_i(x) - g_i(x-e_i))."""
    out = np.zeros_like(comps[0])
    for ax in range(domain.dim):
        out += domain.N * (comps[ax] - shift(comps[ax], ax, -1, domain.dim))
    return out


def bulk_laplacian(values, domain):
    """Graph Laplacian of the bulk site set (neighbors restricted to it).

    Computed in divergence form over the bulk bonds, so the site sum of the
    result vanishes up to rounding.  Constants are in the kernel.  Output is
    supported on the bulk set.
    """
    out = np.zeros_like(values)
    for ax in range(domain.dim):
        flux = (shift(values, ax, 1, domain.dim) - values) * domain.bond_dn[ax]
        out += flux - shift(flux, ax, -1, domain.dim)
    return out


def cell_laplacian(values, domain):
    """Zero-flux Laplacian of the cell region (N^2 times the bulk one).

    This is the mesh-scaled operator acting on step functions of mesh 1/N;
    fluxes across the boundary of the cell region vanish, so the sum over
    the region is conserved exactly.
    """
    return (domain.N ** 2) * bulk_laplacian(values, domain)


# ---------------------------------------------------------------------------
# public field-level operators
# ---------------------------------------------------------------------------


def grad_forward(f: HeightField, axis: int) -> HeightField:
    """Forward difference along one axis, as a free (unmasked) field."""
    return HeightField(f.domain, "box", grad_component(f.values, f.domain, axis))


def grad(f: HeightField) -> BondField:
    """All forward differences of a height field."""
    return BondField(f.domain, grad_all(f.values, f.domain))


def div_n(g: BondField) -> HeightField:
    """Divergence, adjoint-consistent with :func:`grad_forward`."""
    return HeightField(g.domain, "box", div_all(g.comps, g.domain))


def laplacian_dirichlet(f: HeightField) -> HeightField:
    """Bulk graph Laplacian (unscaled); output supported on the bulk set."""
    return HeightField(f.domain, "dn", bulk_laplacian(f.values, f.domain))


def laplacian_neumann(f: HeightField) -> HeightField:
    """Cell-region Laplacian (N^2-scaled); output supported on the bulk set."""
    return HeightField(f.domain, "dn", cell_laplacian(f.values, f.domain))


# ---------------------------------------------------------------------------
# conjugate gradients
# ---------------------------------------------------------------------------


def conjugate_gradient(apply_op, b, tol, maxiter, project=None):
    """Plain CG for a symmetric positive (semi)definite operator.

    ``apply_op`` maps flat vectors to flat vectors.  ``project``, when
    given, is applied to the iterate, the residual, and every operator
    output; it is used to pin the iteration to an invariant subspace.
    Raises :class:`SolverError` on non-convergence, reporting the residual.
    """
    if project is not None:
        b = project(b)
    x = np.zeros_like(b)
    r = b.copy()
    threshold = tol * max(1.0, float(np.linalg.norm(b)))
    if np.linalg.norm(r) <= threshold:
        return x
    p = r.copy()
    rs = float(r @ r)
    for _ in range(maxiter):
        ap = apply_op(p)
        if project is not None:
            ap = project(ap)
        alpha = rs / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        if project is not None:
            x = project(x)
            r = project(r)
        rs_new = float(r @ r)
        if np.sqrt(rs_new) <= threshold:
            return x
        p = r + (rs_new / rs) * p
        rs = rs_new
    raise SolverError(
        f"conjugate gradient did not converge in {maxiter} iterations; "
        f"residual {np.sqrt(rs):.3e}, target {threshold:.3e}")


def poisson_solve(rhs: HeightField, tol=1e-10, maxiter=None) -> HeightField:
    """Solve (-lap) u = rhs on the mean-zero subspace of the bulk set.

    ``rhs`` must be mean zero (relative tolerance 1e-10); the solution is
    mean zero as well, enforced by re-projection at every iteration.  The
    bulk graph Laplacian is symmetric positive definite there as long as
    the bulk set is connected.
    """
    domain = rhs.domain
    if not domain.dn_connected:
        raise SolverError("bulk site set is disconnected; the Poisson "
                          "problem on the mean-zero subspace is singular")
    b = rhs.site_values("dn")
    if abs(b.sum()) > 1e-10 * max(1.0, np.abs(b).sum()):
        raise ValueError("poisson_solve requires a mean-zero right hand side")
    if maxiter is None:
        maxiter = 10 * domain.n_dn
    mask = domain.dn
    scratch = np.zeros(domain.box_shape)

    def apply_neg_lap(v):
        scratch[mask] = v
        out = -bulk_laplacian(scratch, domain)
        return out[mask]

    def project(v):
        return v - v.mean()

    x = conjugate_gradient(apply_neg_lap, b, tol, maxiter, project=project)
    return HeightField.from_site_values(domain, "dn", x)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def h_minus_one_norm(f: HeightField, tol=1e-10) -> float:
    """Scaled lattice dual norm of a bulk field psi.

    Writing m for the per-site mean and S for the plain site sum,

        norm^2 = N^(-d-4) sum (psi - m) (-lap)^(-1) (psi - m)
               + N^(-2d-2) S^2.

    The first term inverts the bulk graph Laplacian on the mean-zero
    subspace; the second penalizes the conserved total.  For the step
    function with cell values h, pass psi = N * h.
    """
    domain = f.domain
    N, d = domain.N, domain.dim
    psi = f.site_values("dn")
    total = float(psi.sum())
    centered = psi - psi.mean()
    rhs = HeightField.from_site_values(domain, "dn", centered)
    w = poisson_solve(rhs, tol=tol).site_values("dn")
    quad = float(centered @ w)
    sq = N ** (-d - 4) * quad + N ** (-2 * d - 2) * total**2
    return float(np.sqrt(max(sq, 0.0)))


def _legendre_basis(domain, max_degree=3):
    """Tensor Legendre polynomials up to ``max_degree`` per axis, mapped to
    the bounding box of the macroscopic domain, with their gradients."""
    from numpy.polynomial import legendre as L

    bb = domain.macro.bounding_box()
    d = domain.dim

    def mapped(k, axis):
        lo, hi = bb[axis]
        coeffs = np.zeros(k + 1)
        coeffs[k] = 1.0
        scale = 2.0 / (hi - lo)

        def val(t):
            return L.legval(scale * (t - lo) - 1.0, coeffs)

        def der(t):
            return L.legval(scale * (t - lo) - 1.0, L.legder(coeffs)) * scale

        return val, der

    basis = []
    for degrees in np.ndindex(*([max_degree + 1] * d)):
        comps = [mapped(k, ax) for ax, k in enumerate(degrees)]

        def make(comps):
            def value(pts):
                out = np.ones(len(pts))
                for ax, (val, _) in enumerate(comps):
                    out *= val(pts[:, ax])
                return out

            def gradient(pts):
                out = np.ones((len(pts), d))
                for ax in range(d):
                    for bx, (val, der) in enumerate(comps):
                        out[:, ax] *= der(pts[:, bx]) if ax == bx else val(pts[:, bx])
                return out

            return value, gradient

        basis.append(make(comps))
    return basis


def _macro_quadrature(domain, points_per_axis=24):
    """Gauss-Legendre rule over the bounding box, masked by the domain."""
    bb = domain.macro.bounding_box()
    nodes_1d, weights_1d = np.polynomial.legendre.leggauss(points_per_axis)
    axes, weights = [], []
    for lo, hi in bb:
        axes.append(0.5 * (hi - lo) * nodes_1d + 0.5 * (hi + lo))
        weights.append(0.5 * (hi - lo) * weights_1d)
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    w = weights[0]
    for wa in weights[1:]:
        w = np.multiply.outer(w, wa)
    w = np.asarray(w).ravel()
    inside = domain.macro.contains_points(pts)
    return pts[inside], w[inside]


def _cell_quadrature_offsets(domain, points_per_axis=4):
    """Tensor Gauss-Legendre offsets and weights for one cell of side 1/N.

    Weights are normalized to average (they sum to one), so applying them
    to samples of a function yields its cell mean.
    """
    nodes, weights = np.polynomial.legendre.leggauss(points_per_axis)
    h = 1.0 / domain.N
    grids = np.meshgrid(*[0.5 * h * nodes] * domain.dim, indexing="ij")
    offs = np.stack([g.ravel() for g in grids], axis=1)
    w = 0.5 * weights
    for _ in range(domain.dim - 1):
        w = np.multiply.outer(w, 0.5 * weights)
    return offs, np.asarray(w).ravel()


def h1star_norm_estimate(f: HeightField, max_degree=3) -> float:
    """Duality estimate of the continuum dual Sobolev norm of a step field.

    The step function (cell values N^-1 psi) is paired against the span of
    tensor Legendre polynomials up to degree 3 restricted to the domain;
    the estimate is the dual norm over that fixed finite-dimensional test
    space, computed through its Gram matrix.  It underestimates the true
    norm, which is the useful side for comparison against the lattice dual
    norm.
    """
    domain = f.domain
    N, d = domain.N, domain.dim
    basis = _legendre_basis(domain, max_degree)
    qpts, qw = _macro_quadrature(domain)

    vals = np.stack([value(qpts) for value, _ in basis])
    grads = np.stack([gradient(qpts) for _, gradient in basis])
    gram = np.einsum("iq,jq,q->ij", vals, vals, qw)
    gram += np.einsum("iqa,jqa,q->ij", grads, grads, qw)

    cell_offs, cell_w = _cell_quadrature_offsets(domain)
    sites = domain.sites("dn")
    psi = f.site_values("dn")
    centers = sites / N
    pairings = np.empty(len(basis))
    cellvol = N ** (-d)
    for k, (value, _) in enumerate(basis):
        samples = value((centers[:, None, :] + cell_offs[None, :, :])
                        .reshape(-1, d)).reshape(len(sites), -1)
        cell_means = samples @ cell_w
        pairings[k] = cellvol * float((psi / N) @ cell_means)

    coef = np.linalg.lstsq(gram, pairings, rcond=None)[0]
    sq = float(pairings @ coef)
    return float(np.sqrt(max(sq, 0.0)))
