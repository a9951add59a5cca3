"""Time series of diagnostics emitted by the stochastic and deterministic runs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TrajectoryRecord:
    """Diagnostics sampled at a fixed cadence along one run.

    ``scalars`` maps column names to arrays aligned with ``times``;
    ``per_replica`` maps names to arrays of shape (n_records, n_replicas);
    ``snapshots`` optionally holds field snapshots (n_records, *box).
    """

    times: np.ndarray
    scalars: dict = field(default_factory=dict)
    per_replica: dict = field(default_factory=dict)
    snapshots: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    @property
    def n_records(self):
        return len(self.times)

    def column(self, name):
        if name in self.scalars:
            return self.scalars[name]
        return self.per_replica[name]

    def write_csv(self, path):
        """One row per (time, replica) plus a 'mean' row when replicas exist.

        Floats are printed with 17 significant digits, '.' decimal, comma
        separator, so identical runs produce identical bytes.
        """
        scalar_names = sorted(self.scalars)
        replica_names = sorted(self.per_replica)
        with open(path, "w") as fh:
            if replica_names:
                fh.write(",".join(["time", "replica"] + replica_names
                                  + scalar_names) + "\n")
                n_rep = self.per_replica[replica_names[0]].shape[1]
                for k, t in enumerate(self.times):
                    for r in range(n_rep):
                        row = [f"{t:.17g}", str(r)]
                        row += [f"{self.per_replica[c][k, r]:.17g}"
                                for c in replica_names]
                        row += [""] * len(scalar_names)
                        fh.write(",".join(row) + "\n")
                    row = [f"{t:.17g}", "mean"]
                    row += [f"{self.per_replica[c][k].mean():.17g}"
                            for c in replica_names]
                    row += [f"{self.scalars[c][k]:.17g}" for c in scalar_names]
                    fh.write(",".join(row) + "\n")
            else:
                fh.write(",".join(["time"] + scalar_names) + "\n")
                for k, t in enumerate(self.times):
                    row = [f"{t:.17g}"]
                    row += [f"{self.scalars[c][k]:.17g}" for c in scalar_names]
                    fh.write(",".join(row) + "\n")


def write_field_csv(path, domain, values, mask_name="dn", extra=None):
    """Site coordinates plus field value(s) as CSV.

    ``values`` is a box array or a dict of named box arrays; ``extra``
    optionally adds more named columns.
    """
    if not isinstance(values, dict):
        values = {"value": values}
    if extra:
        values = {**values, **extra}
    mask = (mask_name if isinstance(mask_name, np.ndarray)
            else domain.mask_of(mask_name))
    sites = np.argwhere(mask) + domain.origin
    names = sorted(values)
    with open(path, "w") as fh:
        coords = [f"x{i+1}" for i in range(domain.dim)]
        fh.write(",".join(coords + names) + "\n")
        cols = [values[n][mask] for n in names]
        for i, s in enumerate(sites):
            row = [str(int(c)) for c in s] + [f"{col[i]:.17g}" for col in cols]
            fh.write(",".join(row) + "\n")
