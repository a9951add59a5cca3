"""Lattice geometry derived from a macroscopic domain.

A bounded, connected domain D in R^d is discretized at resolution N into
nested site sets:

* ``tilde``: the raw intersection of the dilated domain N*D with Z^d,
* ``dn``: the bulk sites, i.e. those x in ``tilde`` whose half-open cube of
  side 5/N centered at x/N fits inside D,
* ``closure`` / ``double_closure``: ``dn`` together with the sites at graph
  distance one (resp. two) from it,
* ``layer1`` / ``layer2``: the corresponding boundary shells,
* per-axis bond masks for nearest-neighbor bonds inside or touching ``dn``.

All sets are stored as boolean masks over a common padded bounding box so
that finite difference stencils reduce to array shifts.  Cubes here always
mean the half-open box ``prod_i [c_i - l/2, c_i + l/2)``.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

# Side length, in units of 1/N, of the cube that must fit inside D for a
# site to belong to the bulk set.
MARGIN_CELLS = 5.0

# Padding (in sites) of the bounding box beyond every stored mask, so that
# stencil shifts up to distance two never touch the box edge.
_BOX_PAD = 3


class MacroDomain:
    """Bounded connected macroscopic domain containing the origin.

    Three shapes are supported: an open axis-aligned box, an open Euclidean
    ball, and an explicit indicator grid (a union of equal cells of a
    regular grid over a bounding box).  Construct instances through
    :func:`box`, :func:`ball` or :func:`indicator_grid`.
    """

    def __init__(self, dim, kind, *, bounds=None, center=None, radius=None,
                 indicator=None):
        if dim < 1:
            raise DomainError(f"dimension must be positive, got {dim}")
        self.dim = int(dim)
        self.kind = kind
        self.bounds = None if bounds is None else np.asarray(bounds, dtype=float)
        self.center = None if center is None else np.asarray(center, dtype=float)
        self.radius = None if radius is None else float(radius)
        self.indicator = None if indicator is None else np.asarray(indicator, dtype=bool)
        self._validate()

    # -- construction checks ------------------------------------------------

    def _validate(self):
        if self.kind == "box":
            if self.bounds.shape != (self.dim, 2):
                raise DomainError("box bounds must have shape (d, 2)")
            if not np.all(self.bounds[:, 0] < self.bounds[:, 1]):
                raise DomainError("box bounds must satisfy lo < hi per axis")
        elif self.kind == "ball":
            if self.center.shape != (self.dim,):
                raise DomainError("ball center must have shape (d,)")
            if not self.radius > 0:
                raise DomainError("ball radius must be positive")
        elif self.kind == "grid":
            if self.bounds.shape != (self.dim, 2):
                raise DomainError("grid bounds must have shape (d, 2)")
            if self.indicator.ndim != self.dim:
                raise DomainError("indicator array rank must equal the dimension")
            if not self.indicator.any():
                raise DomainError("indicator grid is empty")
            if not _grid_connected(self.indicator):
                raise DomainError("indicator grid is not connected")
        else:
            raise DomainError(f"unknown shape kind {self.kind!r}")
        if not self.contains_origin():
            raise DomainError("domain must contain the origin of R^d")

    def contains_origin(self):
        """True if the closure of D contains the origin.

        Domains are open sets; the origin is allowed to sit on the boundary
        (e.g. the open unit interval (0, 1) qualifies).
        """
        z = np.zeros(self.dim)
        if self.kind == "box":
            return bool(np.all(self.bounds[:, 0] <= 0.0)
                        and np.all(0.0 <= self.bounds[:, 1]))
        if self.kind == "ball":
            return bool(np.linalg.norm(z - self.center) <= self.radius)
        # grid: accept if the origin lies in the closure of some active cell
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        if np.any(0.0 < lo) or np.any(0.0 > hi):
            return False
        h = (hi - lo) / np.asarray(self.indicator.shape)
        base = np.floor((z - lo) / h).astype(int)
        shape = np.asarray(self.indicator.shape)
        for off in np.ndindex(*([2] * self.dim)):
            idx = base - np.asarray(off)
            if np.any(idx < 0) or np.any(idx >= shape):
                continue
            if not self.indicator[tuple(idx)]:
                continue
            cell_lo = lo + idx * h
            cell_hi = cell_lo + h
            if np.all(cell_lo - 1e-12 <= z) and np.all(z <= cell_hi + 1e-12):
                return True
        return False

    # -- geometric queries --------------------------------------------------

    def contains_points(self, pts):
        """Membership of points in the open domain; ``pts`` has shape (n, d)."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.kind == "box":
            lo, hi = self.bounds[:, 0], self.bounds[:, 1]
            return np.all(pts > lo, axis=1) & np.all(pts < hi, axis=1)
        if self.kind == "ball":
            return np.linalg.norm(pts - self.center, axis=1) < self.radius
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        h = (hi - lo) / np.asarray(self.indicator.shape)
        out = np.zeros(len(pts), dtype=bool)
        inside = np.all(pts > lo, axis=1) & np.all(pts < hi, axis=1)
        idx = np.floor((pts[inside] - lo) / h).astype(int)
        idx = np.minimum(idx, np.asarray(self.indicator.shape) - 1)
        out[inside] = self.indicator[tuple(idx.T)]
        return out

    def contains_cubes(self, centers, side):
        """True where the half-open cube of given side at each center fits in D."""
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        half = side / 2.0
        if self.kind == "box":
            lo, hi = self.bounds[:, 0], self.bounds[:, 1]
            return (np.all(centers - half > lo, axis=1)
                    & np.all(centers + half <= hi, axis=1))
        if self.kind == "ball":
            ok = np.ones(len(centers), dtype=bool)
            for signs in np.ndindex(*([2] * self.dim)):
                corner = centers + half * (2 * np.asarray(signs) - 1)
                ok &= np.linalg.norm(corner - self.center, axis=1) < self.radius
            return ok
        return np.array([self._grid_contains_cube(c, half) for c in centers])

    def _grid_contains_cube(self, center, half):
        # exact containment test against the union of active grid cells
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        shape = np.asarray(self.indicator.shape)
        h = (hi - lo) / shape
        a = center - half
        b = center + half
        first = np.floor((a - lo) / h + 1e-12).astype(int)
        last = np.ceil((b - lo) / h - 1e-12).astype(int) - 1
        if np.any(first < 0) or np.any(last >= shape):
            return False
        sl = tuple(slice(f, l + 1) for f, l in zip(first, last))
        return bool(self.indicator[sl].all())

    def volume(self):
        if self.kind == "box":
            return float(np.prod(self.bounds[:, 1] - self.bounds[:, 0]))
        if self.kind == "ball":
            if self.dim == 1:
                return 2.0 * self.radius
            if self.dim == 2:
                return math.pi * self.radius**2
            # unit-ball volume recursion
            v = math.pi ** (self.dim / 2) / math.gamma(self.dim / 2 + 1)
            return v * self.radius**self.dim
        lo, hi = self.bounds[:, 0], self.bounds[:, 1]
        cell = np.prod((hi - lo) / np.asarray(self.indicator.shape))
        return float(self.indicator.sum() * cell)

    def bounding_box(self):
        """Array of shape (d, 2) enclosing the domain."""
        if self.kind == "ball":
            return np.stack([self.center - self.radius,
                             self.center + self.radius], axis=1)
        return self.bounds.copy()


def box(bounds):
    """Open axis-aligned box; ``bounds`` is a (d, 2) array of (lo, hi)."""
    bounds = np.atleast_2d(np.asarray(bounds, dtype=float))
    return MacroDomain(bounds.shape[0], "box", bounds=bounds)


def ball(center, radius):
    """Open Euclidean ball."""
    center = np.atleast_1d(np.asarray(center, dtype=float))
    return MacroDomain(center.shape[0], "ball", center=center, radius=radius)


def indicator_grid(bounds, indicator):
    """Union of active cells of a regular grid over ``bounds``."""
    bounds = np.atleast_2d(np.asarray(bounds, dtype=float))
    indicator = np.asarray(indicator, dtype=bool)
    return MacroDomain(bounds.shape[0], "grid", bounds=bounds, indicator=indicator)


def _grid_connected(indicator):
    cells = np.argwhere(indicator)
    if len(cells) == 0:
        return False
    seen = np.zeros(indicator.shape, dtype=bool)
    start = tuple(cells[0])
    seen[start] = True
    queue = deque([start])
    d = indicator.ndim
    shape = indicator.shape
    while queue:
        cur = queue.popleft()
        for ax in range(d):
            for step in (-1, 1):
                nxt = list(cur)
                nxt[ax] += step
                if 0 <= nxt[ax] < shape[ax]:
                    nxt = tuple(nxt)
                    if indicator[nxt] and not seen[nxt]:
                        seen[nxt] = True
                        queue.append(nxt)
    return bool(seen.sum() == len(cells))


# ---------------------------------------------------------------------------
# lattice domain
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LatticeDomain:
    """All lattice sets derived from one macroscopic domain at resolution N.

    Immutable after construction; safe to share across threads.  Boolean
    masks are indexed by box coordinates ``j = x - origin`` where ``x`` is a
    site of Z^d.
    """

    macro: MacroDomain
    N: int
    origin: np.ndarray                  # (d,) site coordinate of box index 0
    tilde: np.ndarray                   # N*D intersected with Z^d
    dn: np.ndarray                      # bulk sites
    layer1: np.ndarray                  # graph distance exactly 1 from dn
    layer2: np.ndarray                  # graph distance exactly 2 from dn
    closure: np.ndarray                 # dn | layer1
    double_closure: np.ndarray          # closure | layer2
    bond_dn: tuple                      # per-axis: True at x iff x, x+e_i in dn
    bond_closure: tuple                 # per-axis: True at x iff x or x+e_i in dn
    dn_connected: bool = field(default=True)

    @property
    def dim(self):
        return self.macro.dim

    @property
    def box_shape(self):
        return self.dn.shape

    @property
    def n_dn(self):
        return int(self.dn.sum())

    def sites(self, mask_name="dn"):
        """Sites of a named set as an (n, d) integer array, in C order."""
        mask = getattr(self, mask_name)
        return np.argwhere(mask) + self.origin

    def mask_of(self, name):
        return getattr(self, name)

    def site_index(self, x):
        """Box index tuple of site x (no range check)."""
        x = np.asarray(x, dtype=int)
        return tuple(x - self.origin)

    def contains_site(self, x, mask_name="dn"):
        idx = np.asarray(x, dtype=int) - self.origin
        if np.any(idx < 0) or np.any(idx >= np.asarray(self.box_shape)):
            return False
        return bool(getattr(self, mask_name)[tuple(idx)])

    def cell_of_point(self, theta):
        """Site x with theta in the half-open cube of side 1/N centered at x/N."""
        theta = np.asarray(theta, dtype=float)
        return np.floor(self.N * theta + 0.5).astype(int)

    @property
    def cell_volume(self):
        return self.N ** (-self.dim)

    def n_bonds(self, which="bond_dn", directed=True):
        masks = getattr(self, which)
        n = int(sum(m.sum() for m in masks))
        return 2 * n if directed else n

    def directed_bonds(self, which="bond_dn"):
        """Directed bonds (x, y), |x-y| = 1, as an (n, 2, d) integer array."""
        masks = getattr(self, which)
        out = []
        for ax, m in enumerate(masks):
            tails = np.argwhere(m) + self.origin
            heads = tails.copy()
            heads[:, ax] += 1
            out.append(np.stack([tails, heads], axis=1))
            out.append(np.stack([heads, tails], axis=1))
        return np.concatenate(out, axis=0)


def _shift_bool(mask, axis, step):
    out = np.zeros_like(mask)
    src = [slice(None)] * mask.ndim
    dst = [slice(None)] * mask.ndim
    if step > 0:
        src[axis] = slice(step, None)
        dst[axis] = slice(None, -step)
    else:
        src[axis] = slice(None, step)
        dst[axis] = slice(-step, None)
    out[tuple(dst)] = mask[tuple(src)]
    return out


def _dilate(mask):
    out = mask.copy()
    for ax in range(mask.ndim):
        out |= _shift_bool(mask, ax, 1)
        out |= _shift_bool(mask, ax, -1)
    return out


def _mask_connected(mask):
    sites = np.argwhere(mask)
    if len(sites) == 0:
        return False
    seen = np.zeros(mask.shape, dtype=bool)
    start = tuple(sites[0])
    seen[start] = True
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for ax in range(mask.ndim):
            for step in (-1, 1):
                nxt = list(cur)
                nxt[ax] += step
                if 0 <= nxt[ax] < mask.shape[ax]:
                    nxt = tuple(nxt)
                    if mask[nxt] and not seen[nxt]:
                        seen[nxt] = True
                        queue.append(nxt)
    return bool(seen.sum() == len(sites))


def build_lattice_domain(macro, N):
    """Construct the lattice domain for ``macro`` at resolution ``N``.

    Raises :class:`DomainError` when the bulk set comes out empty (N too
    small for the given shape).
    """
    N = int(N)
    if N < 1:
        raise DomainError(f"resolution must be positive, got {N}")
    d = macro.dim
    bb = macro.bounding_box()
    lo = np.floor(N * bb[:, 0]).astype(int) - 1
    hi = np.ceil(N * bb[:, 1]).astype(int) + 1

    grids = np.meshgrid(*[np.arange(l, h + 1) for l, h in zip(lo, hi)],
                        indexing="ij")
    cand = np.stack([g.ravel() for g in grids], axis=1)
    in_tilde = macro.contains_points(cand / N)
    tilde_sites = cand[in_tilde]
    if len(tilde_sites) == 0:
        raise DomainError(f"N*D contains no lattice sites at N={N}")
    in_dn = macro.contains_cubes(tilde_sites / N, MARGIN_CELLS / N)
    dn_sites = tilde_sites[in_dn]
    if len(dn_sites) == 0:
        raise DomainError(
            f"bulk site set is empty at N={N}; increase the resolution "
            f"(every bulk site needs a cube of side {MARGIN_CELLS}/N inside D)")

    mins = np.minimum(tilde_sites.min(axis=0), dn_sites.min(axis=0)) - _BOX_PAD
    maxs = np.maximum(tilde_sites.max(axis=0), dn_sites.max(axis=0)) + _BOX_PAD
    origin = mins
    shape = tuple((maxs - mins + 1).tolist())

    tilde = np.zeros(shape, dtype=bool)
    tilde[tuple((tilde_sites - origin).T)] = True
    dn = np.zeros(shape, dtype=bool)
    dn[tuple((dn_sites - origin).T)] = True

    closure = _dilate(dn)
    layer1 = closure & ~dn
    double_closure = _dilate(closure)
    layer2 = double_closure & ~closure

    bond_dn = tuple(dn & _shift_bool(dn, ax, 1) for ax in range(d))
    bond_closure = tuple(dn | _shift_bool(dn, ax, 1) for ax in range(d))

    return LatticeDomain(
        macro=macro, N=N, origin=origin,
        tilde=tilde, dn=dn, layer1=layer1, layer2=layer2,
        closure=closure, double_closure=double_closure,
        bond_dn=bond_dn, bond_closure=bond_closure,
        dn_connected=_mask_connected(dn),
    )


# ---------------------------------------------------------------------------
# graph distance and the domain regularity check
# ---------------------------------------------------------------------------

INFINITE_DISTANCE = math.inf


def graph_distance(ld, x, y, cap=None):
    """Breadth-first-search distance between sites of ``tilde``.

    Returns ``math.inf`` for unreachable pairs.  ``cap`` optionally stops
    the search once the distance would exceed it (returning ``inf``).
    """
    x = np.asarray(x, dtype=int)
    y = np.asarray(y, dtype=int)
    if not ld.contains_site(x, "tilde") or not ld.contains_site(y, "tilde"):
        raise DomainError("graph_distance endpoints must lie in the tilde set")
    start = ld.site_index(x)
    goal = ld.site_index(y)
    if start == goal:
        return 0
    mask = ld.tilde
    dist = {start: 0}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        dcur = dist[cur]
        if cap is not None and dcur >= cap:
            continue
        for ax in range(mask.ndim):
            for step in (-1, 1):
                nxt = list(cur)
                nxt[ax] += step
                if 0 <= nxt[ax] < mask.shape[ax]:
                    nxt = tuple(nxt)
                    if mask[nxt] and nxt not in dist:
                        dist[nxt] = dcur + 1
                        if nxt == goal:
                            return dcur + 1
                        queue.append(nxt)
    return INFINITE_DISTANCE


@dataclass(frozen=True)
class AssumptionCheck:
    """Result of the domain regularity check."""
    ok: bool
    max_distance: float
    witness: tuple | None  # (x, y, z) on failure


def check_assumption_domain(ld, c=8):
    """Check the boundary regularity condition of the lattice domain.

    For every exterior site z (not in ``tilde``), any two tilde sites x, y
    with Euclidean distance at most 2 from z must satisfy
    ``graph_distance(x, y) <= c`` within ``tilde``.  Returns the verdict,
    the maximal observed distance, and a witness triple on failure.
    Convex domains satisfy the condition for any reasonable ``c``.
    """
    d = ld.dim
    offsets = [np.asarray(o) - 2 for o in np.ndindex(*([5] * d))]
    offsets = [o for o in offsets if np.linalg.norm(o) <= 2.0]

    # candidate exterior sites: within the 2-dilation of tilde but outside it
    near = ld.tilde.copy()
    for _ in range(2):
        near = _dilate(near)
    exterior = np.argwhere(near & ~ld.tilde) + ld.origin

    max_seen = 0.0
    for z in exterior:
        patch = []
        for off in offsets:
            s = z + off
            if ld.contains_site(s, "tilde"):
                patch.append(s)
        for i in range(len(patch)):
            for j in range(i + 1, len(patch)):
                dist = graph_distance(ld, patch[i], patch[j], cap=c + 1)
                if dist > max_seen:
                    max_seen = dist
                if dist > c:
                    return AssumptionCheck(False, dist,
                                           (tuple(patch[i]), tuple(patch[j]),
                                            tuple(z)))
    return AssumptionCheck(True, max_seen, None)
