"""Field containers over a lattice domain.

Values live on the domain's padded bounding box, with an implicit zero
extension outside the declared support set (the Dirichlet convention).
Leading batch axes are allowed on the raw arrays used internally by the
time steppers; the containers here hold a single field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SUPPORTS = ("dn", "closure", "double_closure", "tilde", "box")


def shift(a, lattice_axis, step, dim):
    """Array whose entry at x equals ``a`` at x + step*e_i, zero filled.

    The lattice axes are the trailing ``dim`` axes of ``a``; leading axes
    are broadcast batch dimensions.
    """
    axis = a.ndim - dim + lattice_axis
    out = np.zeros_like(a)
    src = [slice(None)] * a.ndim
    dst = [slice(None)] * a.ndim
    if step == 0:
        return a.copy()
    if step > 0:
        src[axis] = slice(step, None)
        dst[axis] = slice(None, -step)
    else:
        src[axis] = slice(None, step)
        dst[axis] = slice(-step, None)
    out[tuple(dst)] = a[tuple(src)]
    return out


def _mask_for(domain, support):
    if support == "box":
        return None
    return domain.mask_of(support)


@dataclass
class HeightField:
    """Real values per lattice site of a declared support set.

    ``values`` is a box-shaped float array; entries outside the support are
    zero.  ``support='box'`` means no masking (free field).
    """

    domain: object
    support: str
    values: np.ndarray

    def __post_init__(self):
        if self.support not in SUPPORTS:
            raise ValueError(f"unknown support {self.support!r}")
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.domain.box_shape:
            raise ValueError("field shape does not match the domain box")
        mask = _mask_for(self.domain, self.support)
        if mask is not None:
            self.values = np.where(mask, self.values, 0.0)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @classmethod
    def zeros(cls, domain, support="dn"):
        return cls(domain, support, np.zeros(domain.box_shape))

    @classmethod
    def from_site_values(cls, domain, support, flat_values):
        """Build from a flat vector aligned with ``domain.sites(support)``."""
        mask = domain.mask_of(support)
        arr = np.zeros(domain.box_shape)
        arr[mask] = np.asarray(flat_values, dtype=float)
        return cls(domain, support, arr)

    @classmethod
    def from_function(cls, domain, support, fn):
        """Sample ``fn`` at the site positions x/N of the support set."""
        mask = domain.mask_of(support)
        sites = np.argwhere(mask) + domain.origin
        arr = np.zeros(domain.box_shape)
        arr[mask] = np.asarray(fn(sites / domain.N), dtype=float)
        return cls(domain, support, arr)

    def site_values(self, support=None):
        """Flat vector over the (own or given) support set, in C order."""
        mask = self.domain.mask_of(support or self.support)
        return self.values[mask]

    def sum(self, support=None):
        return float(self.site_values(support).sum())

    def copy(self):
        return HeightField(self.domain, self.support, self.values.copy())

    def scaled(self, c):
        return HeightField(self.domain, self.support, c * self.values)


@dataclass
class BondField:
    """One real value per axis per site: component i at x lives on the bond
    (x, x + e_i).  ``comps`` has shape (d, *box)."""

    domain: object
    comps: np.ndarray

    def __post_init__(self):
        self.comps = np.asarray(self.comps, dtype=float)
        expected = (self.domain.dim,) + self.domain.box_shape
        if self.comps.shape != expected:
            raise ValueError(f"bond components must have shape {expected}")
        if not np.all(np.isfinite(self.comps)):
            raise ValueError("bond values must be finite")

    @classmethod
    def zeros(cls, domain):
        return cls(domain, np.zeros((domain.dim,) + domain.box_shape))


def mean_zero_field(domain, values, tol=1e-10):
    """Validate and wrap a bulk field whose site sum vanishes.

    The tolerance is relative: |sum| <= tol * max(1, sum|values|).
    """
    f = HeightField(domain, "dn", values)
    v = f.site_values()
    if abs(v.sum()) > tol * max(1.0, np.abs(v).sum()):
        raise ValueError("field is not mean zero on the bulk set")
    return f
