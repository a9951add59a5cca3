"""Lattice geometry: from a macroscopic domain to nested site sets.

Builds the lattice trace of a unit square at a few resolutions, prints the
derived set sizes, runs the boundary regularity check, and shows how a
non-convex slit violates it.  Writes a small scatter plot to ``out/``.
"""

import pathlib

import numpy as np

import glflow as gl

out = pathlib.Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

# A macroscopic domain is an open box, ball, or indicator grid.  The lattice
# domain at resolution N collects the sites of N*D and the bulk subset whose
# 5/N-cube fits inside D, plus closures, boundary shells, and bond masks.
square = gl.box([(0.0, 1.0), (0.0, 1.0)])
for n in (8, 16, 32):
    ld = gl.build_lattice_domain(square, n)
    print(f"N={n:3d}: |tilde|={int(ld.tilde.sum()):5d}  |bulk|={ld.n_dn:5d}  "
          f"|closure|={int(ld.closure.sum()):5d}  "
          f"directed bulk bonds={ld.n_bonds('bond_dn')}")

# The regularity check asks that exterior sites never separate nearby bulk
# sites by a long detour; convex domains pass easily.
ld = gl.build_lattice_domain(square, 16)
chk = gl.check_assumption_domain(ld)
print(f"convex square: regularity ok={chk.ok}, "
      f"max boundary distance={chk.max_distance}")

# A deep one-cell-wide slit forces a long detour around its tip.
ind = np.ones((16, 16), dtype=bool)
ind[8, 4:] = False
slit = gl.indicator_grid([(0.0, 1.0), (0.0, 1.0)], ind)
ld_slit = gl.build_lattice_domain(slit, 16)
chk = gl.check_assumption_domain(ld_slit, c=8)
print(f"slit square:   regularity ok={chk.ok}, witness={chk.witness}")

try:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, 2, figsize=(9, 4.2))
    for ax, (name, dom) in zip(axes, [("square", ld), ("slit", ld_slit)]):
        for mask, color, label in ((dom.tilde & ~dom.closure, "0.8", "tilde"),
                                   (dom.layer1 | dom.layer2, "tab:orange",
                                    "shells"),
                                   (dom.dn, "tab:blue", "bulk")):
            pts = np.argwhere(mask) + dom.origin
            if len(pts):
                ax.scatter(pts[:, 0] / dom.N, pts[:, 1] / dom.N, s=14,
                           c=color, label=label)
        ax.set_title(name)
        ax.set_aspect("equal")
    axes[0].legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(out / "domains.png", dpi=120)
    print(f"wrote {out / 'domains.png'}")
except ImportError:
    pass
