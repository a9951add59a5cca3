"""Conserved Langevin dynamics of the lattice interface.

The height field on the bulk set evolves by

    d phi_t(x) = lap U(phi_t)(x) dt + sqrt(2) d w_tilde(x),

where U(phi)(x) = sum over the 2d lattice neighbors y of V'(phi(x) - phi(y))
(zero extension outside the bulk set supplies the Dirichlet boundary data),
``lap`` is the bulk graph Laplacian, and the site noise w_tilde is realized
as the divergence of independent Brownian increments on the bulk bonds.
That realization has covariance exactly (-lap)(x, y) * t and conserves the
total height bond by bond, so no operator square root is ever formed.

The macroscopic height variable rescales space by N and time by N^4: the
profile at macroscopic time t is N^-1 phi at microscopic time N^4 t,
attached to cells of side 1/N.

Replicas are advanced together (vectorized over a leading axis); each
replica consumes its own counter-seeded stream, drawn in blocks, so results
are bitwise reproducible for a given config and independent of block size
chosen as a function of the config only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GlflowError, InstabilityError
from .fields import HeightField, shift
from .ops import bulk_laplacian, h_minus_one_norm
from .trajectory import TrajectoryRecord

SQRT2 = math.sqrt(2.0)


def stability_limit(potential, dim):
    """Largest admissible microscopic Euler step.

    The drift Jacobian is bounded by c_plus * (4d)^2 in spectral radius
    (each graph Laplacian factor contributes at most 4d), and explicit
    Euler tolerates steps up to 2 over that; a 0.9 safety factor gives
    dtau <= 1.8 / (c_plus * (4d)^2).
    """
    return 1.8 / (potential.c_plus * (4.0 * dim) ** 2)


def default_dtau(potential, dim):
    return 0.05 / (potential.c_plus * (4.0 * dim) ** 2)


@dataclass(frozen=True)
class SdeConfig:
    """Configuration of one conserved-dynamics ensemble run.

    ``t_final`` and ``record_interval`` are macroscopic times; ``dtau`` is
    the microscopic Euler step.  ``amplitude`` scales the noise (sqrt(2) in
    the dynamics above; zero gives the deterministic flow).
    """

    domain: object
    potential: object
    t_final: float
    dtau: float | None = None
    amplitude: float = SQRT2
    n_replicas: int = 1
    seed: int = 0
    record_interval: float | None = None
    store_snapshots: bool = False
    track_gradient_integral: bool = False

    def __post_init__(self):
        if self.dtau is None:
            object.__setattr__(self, "dtau",
                               default_dtau(self.potential, self.domain.dim))
        limit = stability_limit(self.potential, self.domain.dim)
        if not (0.0 < self.dtau <= limit):
            raise GlflowError(
                f"dtau={self.dtau} violates the stability bound "
                f"dtau <= 1.8 / (c_plus (4d)^2) = {limit:.6g}")
        if self.t_final < 0.0:
            raise GlflowError("t_final must be nonnegative")
        if self.n_replicas < 1:
            raise GlflowError("n_replicas must be at least 1")
        if self.amplitude < 0.0:
            raise GlflowError("amplitude must be nonnegative")

    @property
    def micro_horizon(self):
        return self.t_final * self.domain.N ** 4


def _pinned_potential_force(phi, domain, potential):
    """U(phi) on the bulk set: sum over lattice neighbors of V'(phi_x - phi_y).

    Uses oddness of V' (V symmetric) to reuse the forward differences; the
    zero extension of phi supplies the boundary heights.  Values outside the
    bulk set are irrelevant downstream and left as computed.
    """
    d = domain.dim
    out = np.zeros_like(phi)
    for ax in range(d):
        dv_fwd = potential.dv(phi - shift(phi, ax, 1, d))
        out += dv_fwd - shift(dv_fwd, ax, -1, d)
    return out


def drift_values(phi, domain, potential):
    """Drift lap U(phi) on box arrays (batch axes allowed)."""
    return bulk_laplacian(_pinned_potential_force(phi, domain, potential),
                          domain)


def drift(f: HeightField, potential) -> HeightField:
    """Drift of the conserved dynamics; sums to zero over the bulk set."""
    return HeightField(f.domain, "dn",
                       drift_values(f.values, f.domain, potential))


def bond_noise_divergence(increments, domain):
    """Site increments from per-bond increments (axis-stacked, bulk bonds).

    ``increments[i]`` holds the increment of the bond (x, x + e_i) at
    position x; entries off the bulk-bond mask are ignored.  The returned
    site field sums to zero by construction.
    """
    d = domain.dim
    out = None
    for ax in range(d):
        g = increments[ax] * domain.bond_dn[ax]
        term = g - shift(g, ax, -1, d)
        out = term if out is None else out + term
    return out


def gradient_energy(phi, domain):
    """Sum of squared height differences over directed bonds touching dn."""
    d = domain.dim
    total = 0.0
    for ax in range(d):
        diff = (shift(phi, ax, 1, d) - phi) ** 2
        total = total + 2.0 * diff[..., domain.bond_closure[ax]].sum(axis=-1)
    return total


def macroscopic_height(phi, domain) -> HeightField:
    """Macroscopic profile: cell values N^-1 phi on the bulk cells."""
    values = phi.values if isinstance(phi, HeightField) else phi
    return HeightField(domain, "dn", values / domain.N)


def step_euler_maruyama(state_values, cfg, rng=None, noise=None):
    """One explicit Euler-Maruyama step on box arrays.

    Either a generator (per-bond increments are drawn internally) or a
    precomputed block of increments of shape (d, *box) may be supplied.
    Raises :class:`InstabilityError` on non-finite values.
    """
    domain = cfg.domain
    d = domain.dim
    if noise is None:
        sd = math.sqrt(cfg.dtau)
        noise = sd * rng.standard_normal((d,) + state_values.shape)
    drift_v = drift_values(state_values, domain, cfg.potential)
    out = (state_values + cfg.dtau * drift_v
           + cfg.amplitude * bond_noise_divergence(noise, domain))
    if not np.all(np.isfinite(out)):
        raise InstabilityError("non-finite height values after an Euler step")
    return out


def _record_plan(cfg):
    n4 = cfg.domain.N ** 4
    n_steps = int(round(cfg.micro_horizon / cfg.dtau))
    if cfg.t_final > 0 and n_steps == 0:
        n_steps = 1
    if cfg.record_interval is None:
        every = max(1, n_steps // 20) if n_steps else 1
    else:
        every = max(1, int(round(cfg.record_interval * n4 / cfg.dtau)))
    return n_steps, every


class _ReplicaStreams:
    """Per-replica noise streams drawn in blocks.

    Replica r uses the stream seeded by (seed, r); increments are consumed
    in step order, one (d, *box) draw per step.
    """

    def __init__(self, cfg):
        domain = cfg.domain
        self.shape = (domain.dim,) + domain.box_shape
        self.m = cfg.n_replicas
        self.sd = math.sqrt(cfg.dtau)
        self.rngs = [np.random.default_rng(np.random.SeedSequence(
            (int(cfg.seed), r))) for r in range(self.m)]
        cells = int(np.prod(self.shape))
        self.block = max(1, min(256, (1 << 25) // max(1, self.m * cells)))
        self._buf = None
        self._pos = 0

    def next(self):
        if self._buf is None or self._pos == self.block:
            draws = [rng.standard_normal((self.block,) + self.shape)
                     for rng in self.rngs]
            self._buf = np.stack(draws, axis=1)  # (block, m, d, *box)
            self._pos = 0
        out = self._buf[self._pos]
        self._pos += 1
        return self.sd * np.moveaxis(out, 0, 1)  # (d, m, *box)


def _diagnostics(phi, cfg, record, k, grad_integral):
    domain = cfg.domain
    mass = phi[:, domain.dn].sum(axis=1)
    ge = gradient_energy(phi, domain)
    record["mass"][k] = mass
    record["gradient_energy"][k] = ge
    for r in range(cfg.n_replicas):
        record["hminus"][k, r] = h_minus_one_norm(
            HeightField(domain, "dn", phi[r]))
    if grad_integral is not None:
        record["gradient_energy_integral"][k] = grad_integral


def run(cfg: SdeConfig, phi0: HeightField):
    """Integrate an ensemble of replicas and collect diagnostics.

    Returns a :class:`TrajectoryRecord` (per-replica mass, gradient energy,
    scaled dual norm of the macroscopic profile, and optionally the running
    time integral of the gradient energy in macroscopic time) together with
    the final height values of shape (n_replicas, *box).
    """
    domain = cfg.domain
    if phi0.domain is not domain:
        raise GlflowError("initial field must live on the configured domain")
    n_steps, every = _record_plan(cfg)
    phi = np.broadcast_to(phi0.values,
                          (cfg.n_replicas,) + domain.box_shape).copy()
    streams = _ReplicaStreams(cfg)

    record_steps = list(range(0, n_steps + 1, every))
    if record_steps[-1] != n_steps:
        record_steps.append(n_steps)
    n_rec = len(record_steps)
    record = {
        "mass": np.empty((n_rec, cfg.n_replicas)),
        "gradient_energy": np.empty((n_rec, cfg.n_replicas)),
        "hminus": np.empty((n_rec, cfg.n_replicas)),
    }
    if cfg.track_gradient_integral:
        record["gradient_energy_integral"] = np.empty((n_rec, cfg.n_replicas))
        grad_integral = np.zeros(cfg.n_replicas)
    else:
        grad_integral = None
    snaps = (np.empty((n_rec,) + domain.box_shape)
             if cfg.store_snapshots else None)

    dt_macro = cfg.dtau / domain.N ** 4
    k_rec = 0
    next_record = record_steps[0]
    for step_idx in range(n_steps + 1):
        if step_idx == next_record:
            _diagnostics(phi, cfg, record, k_rec,
                         grad_integral if grad_integral is not None else None)
            if snaps is not None:
                snaps[k_rec] = phi.mean(axis=0)
            k_rec += 1
            next_record = (record_steps[k_rec]
                           if k_rec < len(record_steps) else -1)
        if step_idx == n_steps:
            break
        if grad_integral is not None:
            grad_integral += gradient_energy(phi, domain) * dt_macro
        if cfg.amplitude == 0.0:
            noise = np.zeros((domain.dim,) + phi.shape)
        else:
            noise = streams.next()
        try:
            phi = step_euler_maruyama(phi, cfg, noise=noise)
        except InstabilityError as exc:
            raise InstabilityError(f"{exc} (step {step_idx + 1})") from None

    times = np.array(record_steps) * dt_macro
    traj = TrajectoryRecord(
        times=times, per_replica=record, snapshots=snaps,
        meta={"N": domain.N, "dim": domain.dim, "dtau": cfg.dtau,
              "amplitude": cfg.amplitude, "seed": cfg.seed,
              "n_replicas": cfg.n_replicas, "kind": "sde"},
    )
    return traj, phi


def coupled_pair_run(cfg: SdeConfig, phi0: HeightField, phi0_other: HeightField):
    """Advance two initial conditions under one common noise stream.

    Records the mean squared scaled dual norm of the difference profile at
    the usual cadence; the drift is dissipative for the difference, so the
    distance is non-increasing in expectation (and pathwise for the
    deterministic flow).  Returns (trajectory, final_a, final_b).
    """
    domain = cfg.domain
    if phi0.domain is not domain or phi0_other.domain is not domain:
        raise GlflowError("coupled runs need both fields on the configured domain")
    n_steps, every = _record_plan(cfg)
    shape = (cfg.n_replicas,) + domain.box_shape
    a = np.broadcast_to(phi0.values, shape).copy()
    b = np.broadcast_to(phi0_other.values, shape).copy()
    streams = _ReplicaStreams(cfg)

    record_steps = list(range(0, n_steps + 1, every))
    if record_steps[-1] != n_steps:
        record_steps.append(n_steps)
    dist_sq = np.empty((len(record_steps), cfg.n_replicas))

    k_rec = 0
    next_record = record_steps[0]
    for step_idx in range(n_steps + 1):
        if step_idx == next_record:
            for r in range(cfg.n_replicas):
                dist_sq[k_rec, r] = h_minus_one_norm(
                    HeightField(domain, "dn", a[r] - b[r])) ** 2
            k_rec += 1
            next_record = (record_steps[k_rec]
                           if k_rec < len(record_steps) else -1)
        if step_idx == n_steps:
            break
        noise = streams.next()
        a = step_euler_maruyama(a, cfg, noise=noise)
        b = step_euler_maruyama(b, cfg, noise=noise)

    times = np.array(record_steps) * cfg.dtau / domain.N ** 4
    traj = TrajectoryRecord(
        times=times, per_replica={"distance_sq": dist_sq},
        meta={"N": domain.N, "kind": "sde-coupled", "seed": cfg.seed},
    )
    return traj, a, b
