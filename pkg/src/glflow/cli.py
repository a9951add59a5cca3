"""JSON-configured command line front end.

Subcommands: ``simulate-sde``, ``solve-pde``, ``estimate-sigma``, ``wulff``,
``convergence-study``, ``oscillation``, ``dump-domain``.  Every run reads a
JSON config (documented below), writes CSV artifacts plus a manifest with
per-criterion verdicts and SHA-256 checksums of every artifact, and exits
with status zero exactly when all asserted criteria pass.  Identical
(config, seed) pairs reproduce identical artifact bytes.

Config skeleton (unknown keys are rejected)::

    {
      "experiment": "simulate-sde",
      "seed": 7,
      "out": "runs/example",
      "domain": {"kind": "box", "bounds": [[-2.0, 2.0]]},
      "N": 16,
      "potential": {"kind": "quadratic", "kappa": 1.0},
      "sigma": {"backend": "exact-quadratic", "delta": 0.0},
      "initial": {"kind": "gaussian", "amplitude": 1.0, "width": 0.5},
      "sde": {"t_final": 0.01, "dtau": 0.05, "amplitude": 1.4142135623730951,
              "replicas": 10, "record_interval": 0.001},
      "pde": {"t_final": 0.01, "dt": null, "integrator": "explicit"},
      "wulff": {"volume": 1.0},
      "study": {"n_values": [8, 16], "t_eval": 0.02, "replicas": 20},
      "oscillation": {"n_values": [8, 16], "t_final": 0.02, "direction": 1}
    }

Only the sections used by the chosen experiment are required.  The worker
count for study cells comes from the ``GLFLOW_WORKERS`` environment
variable (default 1, all cells in process).
"""

from __future__ import annotations

import argparse
import concurrent.futures
import datetime
import hashlib
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__, analysis, pde, potential, sde
from .domain import ball, box, build_lattice_domain, check_assumption_domain, indicator_grid
from .errors import ConfigError, GlflowError
from .fields import HeightField
from .trajectory import write_field_csv

EXPERIMENTS = ("simulate-sde", "solve-pde", "estimate-sigma", "wulff",
               "convergence-study", "oscillation", "dump-domain")

_TOP_KEYS = {"experiment", "seed", "out", "domain", "N", "potential", "sigma",
             "initial", "sde", "pde", "wulff", "study", "oscillation"}
_SECTION_KEYS = {
    "domain": {"kind", "bounds", "center", "radius", "indicator"},
    "potential": {"kind", "kappa"},
    "sigma": {"backend", "delta", "table", "tilt_grid", "sampler"},
    "sampler": {"torus_side", "step_size", "burn_in", "n_samples", "stride"},
    "tilt_grid": {"min", "max", "points"},
    "initial": {"kind", "amplitude", "width", "center", "frequency", "value"},
    "sde": {"t_final", "dtau", "amplitude", "replicas", "record_interval",
            "store_snapshots", "track_gradient_integral"},
    "pde": {"t_final", "dt", "integrator", "record_interval", "steady_tol",
            "store_snapshots"},
    "wulff": {"volume", "grad_tol", "max_iterations"},
    "study": {"n_values", "t_eval", "replicas", "amplitude", "dtau",
              "ref_factor", "dt_ref"},
    "oscillation": {"n_values", "t_final", "dt", "integrator", "direction",
                    "record_interval"},
}


# ---------------------------------------------------------------------------
# config parsing and validation
# ---------------------------------------------------------------------------


def parse_config(text):
    """Parse and validate a JSON config; return the validated dict.

    All validation problems are collected and raised together as a
    :class:`ConfigError`; syntax errors report their position.
    """
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"config is not valid JSON: {exc.msg} at line {exc.lineno}, "
            f"column {exc.colno}") from None
    errors = []
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")

    unknown = set(cfg) - _TOP_KEYS
    for key in sorted(unknown):
        errors.append(f"unknown key '{key}'")
    for section, allowed in _SECTION_KEYS.items():
        holder = cfg
        if section in ("sampler", "tilt_grid"):
            holder = cfg.get("sigma", {})
        block = holder.get(section) if isinstance(holder, dict) else None
        if isinstance(block, dict):
            for key in sorted(set(block) - allowed):
                errors.append(f"unknown key '{section}.{key}'")

    exp = cfg.get("experiment")
    if exp not in EXPERIMENTS:
        errors.append(f"experiment must be one of {', '.join(EXPERIMENTS)}; "
                      f"got {exp!r}")
        raise ConfigError(errors)

    if "domain" not in cfg:
        errors.append("missing 'domain' section")
    if exp not in ("convergence-study", "oscillation") and "N" not in cfg:
        errors.append("missing 'N'")

    n = cfg.get("N")
    if n is not None and (not isinstance(n, int) or n < 8):
        errors.append("'N' must be an integer >= 8 so the bulk set is nonempty")

    # build what we can to run the semantic checks
    macro = None
    if "domain" in cfg and isinstance(cfg["domain"], dict):
        try:
            macro = _build_macro(cfg["domain"])
        except (GlflowError, KeyError, TypeError, ValueError) as exc:
            errors.append(f"domain: {exc}")

    pot = None
    if exp in ("simulate-sde", "estimate-sigma", "convergence-study"):
        if "potential" not in cfg:
            errors.append(f"'{exp}' needs a 'potential' section")
        else:
            try:
                pot = _build_potential(cfg["potential"])
            except (GlflowError, KeyError, TypeError, ValueError) as exc:
                errors.append(f"potential: {exc}")

    if exp in ("solve-pde", "wulff", "convergence-study", "oscillation"):
        if "sigma" not in cfg:
            errors.append(f"'{exp}' needs a 'sigma' section")

    sigma_cfg = cfg.get("sigma", {})
    delta = sigma_cfg.get("delta", 0.0) if isinstance(sigma_cfg, dict) else 0.0
    if not (isinstance(delta, (int, float)) and 0.0 <= delta <= 1.0):
        errors.append("sigma.delta must lie in [0, 1] (0 disables mollification)")

    if exp == "simulate-sde":
        block = cfg.get("sde")
        if not isinstance(block, dict) or "t_final" not in block:
            errors.append("'simulate-sde' needs sde.t_final")
        elif pot is not None and macro is not None:
            dtau = block.get("dtau")
            if dtau is not None:
                limit = sde.stability_limit(pot, macro.dim)
                if dtau > limit:
                    errors.append(
                        f"sde.dtau={dtau} violates the stability bound "
                        f"dtau <= 1.8/(c_plus (4d)^2) = {limit:.6g}")
        if isinstance(block, dict) and block.get("replicas", 1) < 1:
            errors.append("sde.replicas must be at least 1")

    if exp == "solve-pde":
        block = cfg.get("pde")
        if not isinstance(block, dict) or "t_final" not in block:
            errors.append("'solve-pde' needs pde.t_final")
        elif (macro is not None and isinstance(n, int) and n >= 8
              and isinstance(sigma_cfg, dict)):
            dt = block.get("dt")
            if dt is not None and block.get("integrator", "explicit") == "explicit":
                c_plus = _sigma_c_plus(cfg)
                if c_plus is not None:
                    limit = 1.8 / (c_plus * (4.0 * macro.dim) ** 2 * n**4)
                    if dt > limit:
                        errors.append(
                            f"pde.dt={dt} violates the fourth-order step "
                            f"bound dt <= 1.8/(c_plus (4d)^2 N^4) = {limit:.6g}")

    if exp == "wulff" and not isinstance(cfg.get("wulff"), dict):
        errors.append("'wulff' needs a 'wulff' section with the volume")
    if exp == "convergence-study" and not isinstance(cfg.get("study"), dict):
        errors.append("'convergence-study' needs a 'study' section")
    if exp == "oscillation" and not isinstance(cfg.get("oscillation"), dict):
        errors.append("'oscillation' needs an 'oscillation' section")

    if errors:
        raise ConfigError(errors)
    return cfg


def _build_macro(spec):
    kind = spec.get("kind")
    if kind == "box":
        return box(spec["bounds"])
    if kind == "ball":
        return ball(spec["center"], spec["radius"])
    if kind == "grid":
        return indicator_grid(spec["bounds"], spec["indicator"])
    raise GlflowError(f"unknown domain kind {kind!r}")


def _build_potential(spec):
    kind = spec.get("kind")
    if kind == "quadratic":
        return potential.quadratic_potential(spec.get("kappa", 1.0))
    if kind == "anharmonic":
        return potential.anharmonic_potential()
    raise GlflowError(f"unknown potential kind {kind!r}")


def _sigma_c_plus(cfg):
    spec = cfg.get("sigma", {})
    backend = spec.get("backend", "exact-quadratic")
    if backend == "exact-quadratic":
        return cfg.get("potential", {}).get("kappa", 1.0)
    kind = cfg.get("potential", {}).get("kind", "anharmonic")
    return _build_potential({"kind": kind}).c_plus if kind else None


def _build_sigma_model(cfg, dim, rundir=None, artifacts=None):
    spec = cfg.get("sigma", {"backend": "exact-quadratic"})
    backend = spec.get("backend", "exact-quadratic")
    if backend == "exact-quadratic":
        kappa = cfg.get("potential", {}).get("kappa", 1.0)
        model = potential.exact_quadratic_model(kappa, dim=dim)
    elif backend == "mcmc-table":
        pot = _build_potential(cfg.get("potential", {"kind": "anharmonic"}))
        if "table" in spec:
            table = potential.GradSigmaTable.load(spec["table"])
        else:
            grid = spec.get("tilt_grid", {"min": -2.0, "max": 2.0, "points": 9})
            axes = [np.linspace(grid["min"], grid["max"], grid["points"])
                    for _ in range(dim)]
            table = potential.tabulate_grad_sigma(
                axes, pot, spec.get("sampler"), seed=cfg.get("seed", 0))
            if rundir is not None:
                path = os.path.join(rundir, "sigma_table.json")
                table.save(path)
                artifacts.append("sigma_table.json")
        model = potential.model_from_table(table, pot.c_minus, pot.c_plus)
    else:
        raise ConfigError(f"unknown sigma backend {backend!r}")
    delta = spec.get("delta", 0.0)
    if delta:
        model = potential.mollify(model, delta)
    return model


def initial_profile(spec, macro):
    """Named initial profiles usable from JSON configs."""
    kind = spec.get("kind", "zero")
    bb = macro.bounding_box()
    center = np.asarray(spec.get("center", bb.mean(axis=1)), dtype=float)
    amp = float(spec.get("amplitude", 1.0))
    if kind == "zero":
        return lambda p: np.zeros(len(p))
    if kind == "constant":
        value = float(spec.get("value", amp))
        return lambda p: np.full(len(p), value)
    if kind == "gaussian":
        width = float(spec.get("width", 0.25 * float(np.min(bb[:, 1] - bb[:, 0]))))
        return lambda p: amp * np.exp(
            -np.sum((p - center) ** 2, axis=1) / (2.0 * width**2))
    if kind == "sine":
        freq = int(spec.get("frequency", 1))

        def fn(p):
            out = np.full(len(p), amp)
            for ax in range(macro.dim):
                lo, hi = bb[ax]
                out = out * np.sin(math.pi * freq * (p[:, ax] - lo) / (hi - lo))
            return out

        return fn
    raise ConfigError(f"unknown initial profile kind {kind!r}")


# ---------------------------------------------------------------------------
# artifact helpers
# ---------------------------------------------------------------------------


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic_json(path, payload):
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# experiment implementations
# ---------------------------------------------------------------------------


def _run_simulate_sde(cfg, rundir, artifacts, criteria):
    macro = _build_macro(cfg["domain"])
    dom = build_lattice_domain(macro, cfg["N"])
    pot = _build_potential(cfg["potential"])
    block = cfg["sde"]
    h0 = initial_profile(cfg.get("initial", {"kind": "zero"}), macro)
    state0 = pde.project_initial(h0, dom)
    phi0 = HeightField(dom, "dn", dom.N * state0.h.values)
    run_cfg = sde.SdeConfig(
        domain=dom, potential=pot, t_final=block["t_final"],
        dtau=block.get("dtau"), amplitude=block.get("amplitude", sde.SQRT2),
        n_replicas=block.get("replicas", 1), seed=cfg.get("seed", 0),
        record_interval=block.get("record_interval"),
        store_snapshots=block.get("store_snapshots", False),
        track_gradient_integral=block.get("track_gradient_integral", False))
    traj, phi = sde.run(run_cfg, phi0)
    traj.write_csv(os.path.join(rundir, "trajectory.csv"))
    artifacts.append("trajectory.csv")
    write_field_csv(os.path.join(rundir, "final_mean_field.csv"), dom,
                    phi.mean(axis=0))
    artifacts.append("final_mean_field.csv")
    mass = traj.per_replica["mass"]
    drift = np.abs(mass - mass[0]).max()
    criteria["mass_conserved"] = bool(
        drift <= 1e-10 * max(1.0, np.abs(mass[0]).max()))
    criteria["finite_fields"] = bool(np.all(np.isfinite(phi)))
    return {"n_steps": int(round(run_cfg.micro_horizon / run_cfg.dtau)),
            "records": traj.n_records}


def _run_solve_pde(cfg, rundir, artifacts, criteria):
    macro = _build_macro(cfg["domain"])
    dom = build_lattice_domain(macro, cfg["N"])
    model = _build_sigma_model(cfg, dom.dim, rundir, artifacts)
    block = cfg["pde"]
    h0 = initial_profile(cfg.get("initial", {"kind": "zero"}), macro)
    state0 = pde.project_initial(h0, dom)
    run_cfg = pde.PdeConfig(
        domain=dom, model=model, t_final=block["t_final"],
        dt=block.get("dt"), integrator=block.get("integrator", "explicit"),
        record_interval=block.get("record_interval"),
        steady_tol=block.get("steady_tol"),
        store_snapshots=block.get("store_snapshots", False))
    traj, final = pde.run(run_cfg, state0)
    traj.write_csv(os.path.join(rundir, "trajectory.csv"))
    artifacts.append("trajectory.csv")
    k = pde.chemical_potential(final.h, model)
    write_field_csv(os.path.join(rundir, "final_profile.csv"), dom,
                    {"h": final.h.values, "k": k.values})
    artifacts.append("final_profile.csv")
    mass = traj.scalars["mass_sum"]
    criteria["mass_conserved"] = bool(
        np.abs(mass - mass[0]).max() <= 1e-10 * max(1.0, abs(mass[0])))
    energy = traj.scalars["energy"]
    criteria["energy_nonincreasing"] = bool(np.all(
        np.diff(energy) <= 1e-12 * np.abs(energy[:-1]) + 1e-300))
    return {"t_final": final.t, "records": traj.n_records,
            "steady": traj.meta.get("steady", False)}


def _run_estimate_sigma(cfg, rundir, artifacts, criteria):
    macro = _build_macro(cfg["domain"])
    pot = _build_potential(cfg["potential"])
    spec = cfg.get("sigma", {})
    grid = spec.get("tilt_grid", {"min": -1.0, "max": 1.0, "points": 9})
    axes = [np.linspace(grid["min"], grid["max"], grid["points"])
            for _ in range(macro.dim)]
    table = potential.tabulate_grad_sigma(axes, pot, spec.get("sampler"),
                                          seed=cfg.get("seed", 0))
    table.save(os.path.join(rundir, "sigma_table.json"))
    artifacts.append("sigma_table.json")
    table.export_csv(os.path.join(rundir, "sigma_table.csv"))
    artifacts.append("sigma_table.csv")
    criteria["finite_estimates"] = bool(
        np.all(np.isfinite(table.grad)) and np.all(np.isfinite(table.grad_se)))
    criteria["stiffness_in_bracket"] = bool(
        np.all(table.stiffness >= pot.c_minus - 1e-9)
        and np.all(table.stiffness <= pot.c_plus + 1e-9))
    return {"nodes": int(np.prod([len(a) for a in axes])),
            "max_se": float(table.grad_se.max())}


def _run_wulff(cfg, rundir, artifacts, criteria):
    macro = _build_macro(cfg["domain"])
    dom = build_lattice_domain(macro, cfg["N"])
    model = _build_sigma_model(cfg, dom.dim, rundir, artifacts)
    block = cfg["wulff"]
    problem = analysis.WulffProblem(
        domain=dom, model=model, volume=block["volume"],
        grad_tol=block.get("grad_tol", 1e-9),
        max_iterations=block.get("max_iterations", 500_000))
    result = analysis.solve_wulff(problem)
    write_field_csv(os.path.join(rundir, "minimizer.csv"), dom,
                    result.minimizer.values)
    artifacts.append("minimizer.csv")
    vol = result.minimizer.sum() * dom.cell_volume
    criteria["converged"] = bool(result.grad_norm <= problem.grad_tol)
    criteria["volume_exact"] = bool(
        abs(vol - block["volume"]) <= 1e-12 * max(1.0, abs(block["volume"])))
    return {"objective": result.objective, "iterations": result.iterations,
            "volume": vol}


def _study_from_config(cfg):
    macro = _build_macro(cfg["domain"])
    block = cfg["study"]
    pot = _build_potential(cfg.get("potential", {"kind": "quadratic"}))
    model = _build_sigma_model(cfg, macro.dim)
    h0 = initial_profile(cfg.get("initial", {"kind": "gaussian"}), macro)
    return analysis.ConvergenceStudy(
        macro=macro, n_values=tuple(block["n_values"]), h0=h0,
        potential=pot, model=model, t_eval=block["t_eval"],
        n_replicas=block.get("replicas", 100),
        amplitude=block.get("amplitude", sde.SQRT2),
        seed=cfg.get("seed", 0), dtau=block.get("dtau"),
        ref_factor=block.get("ref_factor", 2),
        dt_ref=block.get("dt_ref"))


def _study_cell_worker(config_text, n):
    cfg = parse_config(config_text)
    study = _study_from_config(cfg)
    ref = analysis.convergence_reference(study)
    return analysis.convergence_cell(study, n, ref)


def _run_convergence_study(cfg, rundir, artifacts, criteria, config_text):
    study = _study_from_config(cfg)
    workers = int(os.environ.get("GLFLOW_WORKERS", "1"))
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {n: pool.submit(_study_cell_worker, config_text, n)
                       for n in study.n_values}
            rows = [futures[n].result() for n in study.n_values]
        result = analysis.StudyResult(rows=rows, meta={"workers": workers})
    else:
        result = analysis.hydrodynamic_convergence(study)
    result.write_csv(os.path.join(rundir, "study.csv"))
    artifacts.append("study.csv")
    criteria["error_decreasing_2se"] = bool(result.decreasing_within(2.0))
    criteria["errors_finite"] = bool(np.all(np.isfinite(result.errors())))
    return {"rows": result.rows}


def _run_oscillation(cfg, rundir, artifacts, criteria):
    macro = _build_macro(cfg["domain"])
    model = _build_sigma_model(cfg, macro.dim)
    block = cfg["oscillation"]
    h0 = initial_profile(cfg.get("initial", {"kind": "gaussian"}), macro)
    axis = int(block.get("direction", 1)) - 1
    values = []
    for n in block["n_values"]:
        dom = build_lattice_domain(macro, n)
        run_cfg = pde.PdeConfig(
            domain=dom, model=model, t_final=block["t_final"],
            dt=block.get("dt"),
            integrator=block.get("integrator", "semi-implicit"),
            record_interval=block.get("record_interval",
                                      block["t_final"] / 100.0),
            store_snapshots=False)
        traj, _ = pde.run(run_cfg, pde.project_initial(h0, dom))
        values.append(analysis.oscillation_sum(traj, axis))
    path = os.path.join(rundir, "oscillation.csv")
    with open(path, "w") as fh:
        fh.write("N,oscillation_sum\n")
        for n, v in zip(block["n_values"], values):
            fh.write(f"{n},{v:.17g}\n")
    artifacts.append("oscillation.csv")
    criteria["decreasing_in_N"] = bool(
        all(values[i + 1] < values[i] for i in range(len(values) - 1)))
    return {"values": dict(zip(map(str, block["n_values"]), values))}


def _run_dump_domain(cfg, rundir, artifacts, criteria):
    macro = _build_macro(cfg["domain"])
    dom = build_lattice_domain(macro, cfg["N"])
    flags = {
        "in_tilde": dom.tilde.astype(float),
        "in_dn": dom.dn.astype(float),
        "in_closure": dom.closure.astype(float),
        "layer": (dom.layer1.astype(float) + 2.0 * dom.layer2.astype(float)),
    }
    write_field_csv(os.path.join(rundir, "sites.csv"), dom, flags,
                    mask_name=(dom.tilde | dom.double_closure))
    artifacts.append("sites.csv")
    bonds = dom.directed_bonds("bond_closure")
    both = dom.directed_bonds("bond_dn")
    both_set = {tuple(b.ravel()) for b in both}
    with open(os.path.join(rundir, "bonds.csv"), "w") as fh:
        coords = [f"{end}{i+1}" for end in ("x", "y")
                  for i in range(dom.dim)]
        fh.write(",".join(coords + ["both_ends_in_dn"]) + "\n")
        for b in bonds:
            row = [str(int(c)) for c in b.ravel()]
            row.append("1" if tuple(b.ravel()) in both_set else "0")
            fh.write(",".join(row) + "\n")
    artifacts.append("bonds.csv")
    chk = check_assumption_domain(dom)
    criteria["assumption_check"] = bool(chk.ok)
    criteria["bulk_nonempty"] = dom.n_dn > 0
    return {"n_tilde": int(dom.tilde.sum()), "n_dn": dom.n_dn,
            "max_boundary_distance": chk.max_distance}


_RUNNERS = {
    "simulate-sde": _run_simulate_sde,
    "solve-pde": _run_solve_pde,
    "estimate-sigma": _run_estimate_sigma,
    "wulff": _run_wulff,
    "oscillation": _run_oscillation,
    "dump-domain": _run_dump_domain,
}


def dispatch(cfg, out_dir, config_text=None):
    """Run the configured experiment; write artifacts and the manifest.

    Returns the manifest dict.  The manifest lists every artifact with its
    SHA-256 checksum and the per-criterion verdicts; it is written
    atomically as ``manifest.json`` in the output directory.
    """
    os.makedirs(out_dir, exist_ok=True)
    started = datetime.datetime.now(datetime.timezone.utc).isoformat()
    artifacts = []
    criteria = {}
    exp = cfg["experiment"]
    if exp == "convergence-study":
        text = config_text if config_text is not None else json.dumps(cfg)
        summary = _run_convergence_study(cfg, out_dir, artifacts, criteria, text)
    else:
        summary = _RUNNERS[exp](cfg, out_dir, artifacts, criteria)
    finished = datetime.datetime.now(datetime.timezone.utc).isoformat()
    manifest = {
        "config": cfg,
        "version": __version__,
        "seed": cfg.get("seed", 0),
        "started": started,
        "finished": finished,
        "criteria": criteria,
        "summary": summary,
        "artifacts": {name: _sha256(os.path.join(out_dir, name))
                      for name in sorted(artifacts)},
    }
    _atomic_json(os.path.join(out_dir, "manifest.json"), manifest)
    return manifest


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="glflow",
        description="Conserved lattice interface dynamics laboratory")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True,
                       help="path to the JSON run configuration")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--out", default=None,
                       help="output directory (default: config 'out' or '.')")
    args = parser.parse_args(argv)

    with open(args.config) as fh:
        text = fh.read()
    try:
        cfg = parse_config(text)
    except ConfigError as exc:
        for msg in exc.errors:
            print(f"config error: {msg}", file=sys.stderr)
        return 2
    if cfg["experiment"] != args.command:
        print(f"config error: config is for '{cfg['experiment']}', "
              f"invoked as '{args.command}'", file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg["seed"] = args.seed
        text = json.dumps(cfg)
    out_dir = args.out or cfg.get("out") or "."
    try:
        manifest = dispatch(cfg, out_dir, config_text=text)
    except GlflowError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return 1
    ok = all(manifest["criteria"].values())
    for name, verdict in sorted(manifest["criteria"].items()):
        print(f"{'PASS' if verdict else 'FAIL'}  {name}")
    print(f"manifest: {os.path.join(out_dir, 'manifest.json')}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
