"""Wulff shape: constrained minimization and long-time relaxation.

Minimizes the total surface tension at fixed volume with the projected
gradient method, compares the result to the closed-form parabola on the
effective interval, and confirms that the conserved flow relaxes to the
same profile.
"""

import pathlib

import numpy as np

import glflow as gl
from glflow import analysis, ops, pde
from glflow.fields import HeightField
from glflow.potential import exact_quadratic_model

out = pathlib.Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

dom = gl.build_lattice_domain(gl.box([(0.0, 1.0)]), 32)
model = exact_quadratic_model(1.0, dim=1)

res = analysis.solve_wulff(analysis.WulffProblem(
    domain=dom, model=model, volume=1.0))
print(f"minimizer: {res.iterations} iterations, "
      f"gradient norm {res.grad_norm:.2e}, objective {res.objective:.6f}")
print(f"volume: {res.minimizer.sum() * dom.cell_volume:.12f}")

profile = analysis.quadratic_wulff_profile(dom, 1.0)
theta = dom.sites("dn").ravel() / dom.N
gap = np.abs(res.minimizer.site_values() - profile(theta)).max()
print(f"gap to the effective-interval parabola: {gap:.4f}")
# note: the bulk margin (5/N per side) shrinks the support, so the peak sits
# at 1.5 / (1 - 4/N) rather than the full-interval value 1.5
print(f"peak height: {res.minimizer.site_values().max():.4f} "
      f"(full-interval parabola would give 1.5)")

# relax the flow from a generic start with the same volume
h0 = lambda p: 2.0 * np.sin(np.pi * p[:, 0]) ** 2
state0 = pde.project_initial(h0, dom)
v = state0.h.sum() * dom.cell_volume
cfg = pde.PdeConfig(domain=dom, model=model, t_final=20.0, dt=2e-4,
                    integrator="semi-implicit", record_interval=2e-3,
                    steady_tol=1e-9, store_snapshots=False)
traj, final = pde.run(cfg, state0)
res_v = analysis.solve_wulff(analysis.WulffProblem(
    domain=dom, model=model, volume=v))
report = analysis.wulff_relaxation_check(final, res_v, model)
print(f"relaxation: steady at t={final.t:.4f}, "
      f"dual-norm gap {report['norm_gap']:.2e}, "
      f"energy gap {report['energy_gap']:.2e}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(theta, res_v.minimizer.site_values(), "o-", ms=3,
            label="constrained minimizer")
    ax.plot(theta, final.h.site_values(), "x", ms=4,
            label="relaxed flow")
    tt = np.linspace(0, 1, 200)
    ax.plot(tt, v * 6 * tt * (1 - tt), "--", lw=1,
            label="full-interval parabola")
    ax.legend()
    ax.set_xlabel("position")
    ax.set_ylabel("height")
    fig.tight_layout()
    fig.savefig(out / "wulff.png", dpi=120)
    print(f"wrote {out / 'wulff.png'}")
except ImportError:
    pass
