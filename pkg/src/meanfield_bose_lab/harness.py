"""Experiment orchestration: dispatch, artifacts, manifests, sweeps.

Every experiment writes CSV curves and JSON summaries under an output
directory and returns a RunManifest with per-assertion outcomes.  Outputs
are deterministic for a fixed config and seed: floats are serialized with
round-trip repr and no timestamps enter the artifact files.
"""

from __future__ import annotations

import copy
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import CSV_HEADER, __version__
from . import acceptance as _acc
from . import bogoliubov as B
from . import definetti as D
from . import dynamics as DY
from . import fock as F
from . import gp as G
from . import model as M
from .config import (ConfigError, build_gp_problem, build_interaction,
                     build_potential, build_space, config_hash, load_config,
                     validate)

OUT_ROOT_ENV = "MFBL_OUT_ROOT"

DECLARED_CHECKS = {
    "gp-solve": ["converged"],
    "fig3": ["converged", "symmetry_broken", "peaks", "contrast",
             "restart_stability"],
    "bdg-spectrum": ["hessian_positive", "closed_form_match"],
    "ed-spectrum": ["bounds_hold", "gap_decreasing", "deltas_decreasing",
                    "overlap_increasing"],
    "definetti-check": ["mass_normalized", "within_bound",
                        "resolution_within_band"],
    "dynamics": ["norm_drift", "energy_drift", "orthogonality",
                 "distance_decreasing"],
    "acceptance": [fn.__name__.replace("criterion_", "")
                   for fn in _acc.CRITERIA],
}


@dataclass(eq=False)
class RunManifest:
    kind: str
    config_hash: str
    version: str
    seed: int
    passed: bool
    assertions: list
    outputs: list
    timings: dict
    error: str = ""

    def to_dict(self) -> dict:
        return {"kind": self.kind, "config_hash": self.config_hash,
                "version": self.version, "seed": self.seed,
                "passed": self.passed, "assertions": self.assertions,
                "outputs": self.outputs, "timings": self.timings,
                "error": self.error}


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_csv(path: Path, columns, rows):
    lines = [CSV_HEADER, ",".join(columns)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


class _JsonEncoder(json.JSONEncoder):
    def default(self, obj):
        if isinstance(obj, (np.floating, np.integer)):
            return obj.item()
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        if isinstance(obj, (np.bool_,)):
            return bool(obj)
        return super().default(obj)


def write_json(path: Path, payload: dict):
    body = dict(payload)
    body["format"] = CSV_HEADER.lstrip("# ")
    Path(path).write_text(
        json.dumps(body, cls=_JsonEncoder, sort_keys=True, indent=1) + "\n")


def _assertion(name, passed, **details):
    return {"name": name, "passed": bool(passed), "details": details}


# ---------------------------------------------------------------------------
# experiment implementations
# ---------------------------------------------------------------------------

def _solution_rows(space, u_vals):
    rho = np.abs(u_vals) ** 2
    grids = [g.ravel() for g in space.grids()]
    rows = []
    for i in range(space.size):
        coords = [g[i] for g in grids]
        rows.append(coords + [u_vals.ravel()[i].real, u_vals.ravel()[i].imag,
                              rho.ravel()[i]])
    cols = ["x", "y"][: space.dim] + ["re_u", "im_u", "density"]
    return cols, rows


def _run_gp_solve(config, outdir):
    p = build_gp_problem(config)
    sec = config["gp"]
    sol = G.solve_gp(p, restarts=sec["restarts"], tol_resid=sec["tol_resid"],
                     max_iter=sec["max_iter"], seed=config["seed"])
    cols, rows = _solution_rows(p.space, sol.u0.values)
    write_csv(outdir / "solution.csv", cols, rows)
    if p.space.dim == 1:
        disp = np.fft.fftfreq(p.w.grid_n, d=1.0 / p.w.grid_n) * p.space.step
        idx = np.argsort(disp)
        write_csv(outdir / "interaction.csv", ["x", "w"],
                  [[disp[i], p.w.diff_values.ravel()[i]] for i in idx])
    write_json(outdir / "summary.json", {
        "energy": sol.energy, "chemical_potential": sol.chemical_potential,
        "residual": sol.residual, "restarts": sol.restarts_used,
        "degenerate_flag": sol.degenerate_flag, "seed": config["seed"],
        "restart_energies": sol.restart_energies})
    checks = [_assertion("converged", sol.residual <= sec["tol_resid"],
                         residual=sol.residual)]
    outputs = ["solution.csv", "summary.json"]
    if p.space.dim == 1:
        outputs.append("interaction.csv")
    return checks, outputs


def _run_fig3(config, outdir):
    sec = config["fig3"]
    n_particles = sec["n_particles"]
    extent = n_particles / float(sec["density"])
    sp = M.build_model(M.ModelConfig(dim=1, extent=extent, modes=sec["modes"],
                                     bc=M.DIRICHLET))
    h = M.make_one_body(sp)
    w = M.make_interaction(sp, func=M.truncated_lennard_jones(float(sec["cap"])))
    p = G.GPProblem(sp, h, w, float(n_particles - 1))
    sol = G.solve_gp(p, restarts=sec["restarts"], seed=config["seed"],
                     max_iter=sec["max_iter"])
    repeat = G.solve_gp(p, restarts=sec["restarts"], seed=config["seed"] + 1,
                        max_iter=sec["max_iter"])
    rho = sol.u0.density()
    peaks = _acc.density_peaks(rho)
    contrast = float((rho.max() - rho.min()) / rho.max())
    stability = abs(sol.energy - repeat.energy)
    symmetry_broken = contrast >= 0.5 and peaks >= 2
    cols, rows = _solution_rows(sp, sol.u0.values)
    write_csv(outdir / "solution.csv", cols, rows)
    write_json(outdir / "summary.json", {
        "energy": sol.energy, "peaks": peaks, "contrast": contrast,
        "symmetry_broken": symmetry_broken, "residual": sol.residual,
        "restart_stability": stability, "seed": config["seed"]})
    checks = [
        _assertion("converged", sol.residual <= 1e-9, residual=sol.residual),
        _assertion("symmetry_broken", symmetry_broken),
        _assertion("peaks", peaks >= 2, peaks=peaks),
        _assertion("contrast", contrast >= 0.5, contrast=contrast),
        _assertion("restart_stability", stability <= 1e-6,
                   difference=stability),
    ]
    return checks, ["solution.csv", "summary.json"]


def _run_bdg_spectrum(config, outdir):
    p = build_gp_problem(config)
    sec = config["bdg"]
    sol = G.solve_gp(p, restarts=config["gp"]["restarts"], seed=config["seed"])
    quad = B.build_hessian(sol.u0, p, sol.chemical_potential)
    eta = B.check_nondegeneracy(quad)
    checks = [_assertion("hessian_positive", eta > 0, eta_min=eta)]
    spec = B.diagonalize(quad, ladder=sec["ladder_count"])
    homogeneous = p.space.bc == M.PERIODIC and not np.any(p.h.potential) \
        and not sol.degenerate_flag \
        and float(np.max(np.abs(sol.u0.density() * p.space.volume - 1.0))) < 1e-6
    rows, match_err = [], None
    if homogeneous:
        kvals = p.space.momenta()[0]
        mask = np.abs(kvals) > 1e-12
        kmag = np.abs(kvals[mask])
        what_eff = p.w.fourier[mask] / p.space.volume
        eform = B.homogeneous_dispersion(kmag, what_eff, p.g + 1.0, dim=1)
        match_err = float(np.max(np.abs(np.sort(spec.energies) - np.sort(eform))))
        order = np.argsort(kmag)
        khalf, ehalf = [], []
        for i in order:
            if kmag[i] not in khalf:
                khalf.append(kmag[i])
                ehalf.append(eform[i])
        label = B.classify_dispersion(np.array(khalf), np.array(ehalf))
        for k_, e_ in zip(khalf, ehalf):
            rows.append([k_, e_, label])
        write_csv(outdir / "dispersion.csv", ["k", "energy", "classification"],
                  rows)
    checks.append(_assertion(
        "closed_form_match",
        (match_err is None) or (match_err <= 1e-10),
        max_error=match_err, homogeneous=homogeneous))
    write_json(outdir / "spectrum.json", {
        "energies": spec.energies, "ground_energy": spec.ground_energy,
        "eta_min": spec.eta_min, "ladder": spec.ladder,
        "hs_norm_sq": quad.hs_norm_sq, "gp_energy": sol.energy,
        "chemical_potential": sol.chemical_potential})
    outputs = ["spectrum.json"] + (["dispersion.csv"] if homogeneous else [])
    return checks, outputs


def _run_ed_spectrum(config, outdir):
    space = build_space(config["space"])
    h = build_potential(config["potential"], space)
    w = build_interaction(config["interaction"], space)
    sec = config["ed"]
    modes = F.plane_wave_modes(space, h, w, sec["modes"])
    ladder = [int(n) for n in sec["n_values"]]
    rep = F.excitation_spectrum_convergence(modes, ladder,
                                            j_count=sec["j_count"],
                                            n_max_quad=sec["n_max_quad"],
                                            seed=config["seed"])
    e_gp = rep["e_gp_discrete"]
    rows, epp = [], {}
    decomposition_rows = []
    condensate = {}
    for n in ladder:
        op = F.build_hamiltonian(modes, n)
        vals, vecs = F.lowest_eigenpairs(op, sec["j_count"])
        epp[n] = float(vals[0]) / n
        for j in range(sec["j_count"]):
            rows.append([n, j + 1, float(vals[j]), float(vals[j] - n * e_gp),
                         float(rep["quad_ladder"][j])])
        g1 = F.reduced_density_matrix(vecs[:, 0], op.basis, 1)
        condensate[str(n)] = g1.eigenvalues().tolist()
        phis = F.excitation_decompose(vecs[:, 0], op.basis, mode0=0)
        for nexc, comp in enumerate(phis):
            decomposition_rows.append([n, nexc, float(np.vdot(comp, comp).real)])
    write_csv(outdir / "eigs.csv",
              ["n_particles", "j", "lambda", "lambda_minus_n_egp",
               "quad_lambda"], rows)
    write_csv(outdir / "decomposition.csv",
              ["n_particles", "sector", "weight"], decomposition_rows)
    write_json(outdir / "rdm.json", {
        "condensate_spectra": condensate,
        "condensate_fraction": {k: v[0] for k, v in condensate.items()}})
    try:
        bounds = F.energy_bounds_check(epp, e_gp, w)
        bounds_hold, gap_dec = True, bounds["gap_decreasing"]
    except F.BoundViolation:
        bounds_hold, gap_dec = False, False
    deltas_dec = all(np.all(rep["deltas"][a] > rep["deltas"][b])
                     for a, b in zip(ladder, ladder[1:]))
    overlaps = [rep["overlaps"][n] for n in ladder]
    overlap_inc = all(b > a for a, b in zip(overlaps, overlaps[1:]))
    checks = [
        _assertion("bounds_hold", bounds_hold),
        _assertion("gap_decreasing", gap_dec),
        _assertion("deltas_decreasing", deltas_dec,
                   deltas={str(n): rep["deltas"][n].tolist() for n in ladder}),
        _assertion("overlap_increasing", overlap_inc, overlaps=overlaps),
    ]
    return checks, ["eigs.csv", "decomposition.csv", "rdm.json"]


def _run_definetti(config, outdir):
    sec = config["definetti"]
    rng = np.random.default_rng(config["seed"])
    dim, n = sec["dim"], sec["n_particles"]
    if sec["state"] == "product":
        u0 = np.zeros(dim, dtype=complex)
        u0[0] = 1.0
        state = D.SymmetricState.product(u0, n)
    elif sec["state"] == "mixed":
        state = D.SymmetricState.maximally_mixed(dim, n)
    elif sec["state"] == "random":
        state = D.SymmetricState.random(dim, n, rng)
    else:
        raise ConfigError(f"unknown state preset {sec['state']!r}")
    measure = D.husimi_measure(state, samples=sec["samples"],
                               seed=config["seed"] + 1)
    rep = D.definetti_error(state, sec["k"], measure=measure, enforce=False)
    res = D.coherent_resolution_check(dim, n, samples=min(sec["samples"], 200_000),
                                      seed=config["seed"] + 2)
    write_json(outdir / "report.json", {
        "error": rep["error"], "bound": rep["bound"], "sigma": rep["sigma"],
        "applicable": rep["applicable"], "within_bound": rep["within_bound"],
        "total_mass": measure.total_mass, "mass_sigma": measure.mass_sigma,
        "c_n": res["c_n"], "resolution_error": res["frobenius_error"],
        "resolution_sigma": res["sigma"], "seed": config["seed"],
        "state": sec["state"], "k": sec["k"], "dim": dim, "n_particles": n})
    mass_ok = abs(measure.total_mass - 1.0) <= 3.0 * max(measure.mass_sigma, 1e-12)
    checks = [
        _assertion("mass_normalized", mass_ok, mass=measure.total_mass,
                   sigma=measure.mass_sigma),
        _assertion("within_bound",
                   rep["within_bound"] if rep["applicable"] else True,
                   error=rep["error"], bound=rep["bound"]),
        _assertion("resolution_within_band", res["within_band"],
                   error=res["frobenius_error"], sigma=res["sigma"]),
    ]
    return checks, ["report.json"]


def _run_dynamics(config, outdir):
    space = build_space(config["space"])
    h = build_potential(config["potential"], space)
    w = build_interaction(config["interaction"], space)
    p = G.GPProblem(space, h, w, 1.0)
    sec = config["dynamics"]
    u0 = np.ones(space.shape, dtype=complex)
    u0 = u0 / space.norm(u0)
    amp = float(sec["amplitude"])
    if sec["initial"] == "vacuum":
        phis0 = [np.array([1.0 + 0.0j])]
    elif sec["initial"] == "one-particle":
        one = np.zeros(space.size, dtype=complex)
        one[min(1, space.size - 1)] = amp
        phis0 = [np.array([np.sqrt(1.0 - amp ** 2)], dtype=complex), one]
    else:
        raise ConfigError(f"unknown initial preset {sec['initial']!r}")
    n_values = [int(n) for n in sec["n_values"]]
    rep = DY.compare_exact(p, n_values, u0, phis0,
                           t_final=float(sec["t_final"]), dt=float(sec["dt"]),
                           n_max=sec["n_max"])
    n_sectors = rep["sector_norms"].shape[1]
    rows = []
    for i, t in enumerate(rep["times"]):
        rows.append([float(t),
                     abs(rep["phi_norms"][i] - 1.0),
                     rep["gp_energy_drift"],
                     rep["occupancy"][i], rep["leakage"][i]]
                    + rep["sector_norms"][i].tolist())
    write_csv(outdir / "traj.csv",
              ["t", "phi_norm_drift", "gp_energy_drift", "orthogonality",
               "leakage"] + [f"sector_{n}" for n in range(n_sectors)], rows)
    rows = []
    for n in n_values:
        for t, d in zip(rep["times"], rep["distance"][n]):
            rows.append([n, float(t), float(d)])
    write_csv(outdir / "compare.csv", ["n_particles", "t", "distance"], rows)
    finals = [rep["distance"][n][-1] for n in n_values]
    checks = [
        _assertion("norm_drift", rep["gp_norm_drift"] <= 1e-8,
                   drift=rep["gp_norm_drift"]),
        _assertion("energy_drift", rep["gp_energy_drift"] <= 1e-6,
                   drift=rep["gp_energy_drift"]),
        _assertion("orthogonality", rep["orthogonality"] <= 1e-6,
                   occupancy=rep["orthogonality"], leakage=rep["leakage_max"]),
        _assertion("distance_decreasing",
                   all(a > b for a, b in zip(finals, finals[1:])),
                   finals=finals),
    ]
    return checks, ["traj.csv", "compare.csv"]


def _run_acceptance(config, outdir):
    wanted = config["acceptance"]["criteria"] or None
    reports = _acc.run_acceptance(seed=config["seed"], criteria=wanted)
    write_json(outdir / "acceptance.json", {"criteria": reports})
    checks = [_assertion(rep["name"], rep["passed"], **rep["details"])
              for rep in reports]
    return checks, ["acceptance.json"]


_RUNNERS = {
    "gp-solve": _run_gp_solve,
    "fig3": _run_fig3,
    "bdg-spectrum": _run_bdg_spectrum,
    "ed-spectrum": _run_ed_spectrum,
    "definetti-check": _run_definetti,
    "dynamics": _run_dynamics,
    "acceptance": _run_acceptance,
}


# ---------------------------------------------------------------------------
# run and sweep
# ---------------------------------------------------------------------------

def _resolve_outdir(config, out_dir):
    if out_dir:
        path = Path(out_dir)
    elif config.get("output", {}).get("dir"):
        path = Path(config["output"]["dir"])
    else:
        root = Path(os.environ.get(OUT_ROOT_ENV, "runs"))
        path = root / f"{config['kind']}-{config_hash(config)[:12]}"
    path.mkdir(parents=True, exist_ok=True)
    return path


def run(config, out_dir=None, seed=None) -> RunManifest:
    """Execute one experiment; config is a path or a validated dict."""
    if isinstance(config, (str, Path)):
        config = load_config(config)
    else:
        config = validate(config)
    config = copy.deepcopy(config)
    if seed is not None:
        config["seed"] = int(seed)
    outdir = _resolve_outdir(config, out_dir)
    kind = config["kind"]
    t0 = time.perf_counter()
    try:
        checks, outputs = _RUNNERS[kind](config, outdir)
        error = ""
    except (ConfigError,) as exc:
        raise
    except Exception as exc:  # runtime failure inside the experiment
        checks, outputs = [], []
        error = f"{type(exc).__name__}: {exc}"
    timings = {"total_seconds": round(time.perf_counter() - t0, 3)}
    declared = DECLARED_CHECKS[kind]
    if not error and kind != "acceptance" and \
            [c["name"] for c in checks] != declared:
        error = (f"assertion list {[c['name'] for c in checks]} does not "
                 f"match declared checks {declared}")
    passed = (not error) and all(c["passed"] for c in checks) and bool(checks)
    manifest = RunManifest(kind=kind, config_hash=config_hash(config),
                           version=__version__, seed=config["seed"],
                           passed=passed, assertions=checks,
                           outputs=sorted(outputs), timings=timings,
                           error=error)
    write_json(outdir / "manifest.json", manifest.to_dict())
    return manifest


def _set_path(config, dotted, value):
    keys = dotted.split(".")
    node = config
    for key in keys[:-1]:
        if key not in node or not isinstance(node[key], dict):
            raise ConfigError(f"sweep axis {dotted!r} not found")
        node = node[key]
    if keys[-1] not in node:
        raise ConfigError(f"sweep axis {dotted!r} not found")
    node[keys[-1]] = value


def sweep(config, axis: str, values, out_root=None, threads: int = 1) -> list:
    """Independent runs along one config axis; failures stay isolated."""
    if isinstance(config, (str, Path)):
        config = load_config(config)
    else:
        config = validate(config)
    values = list(values)
    if not values:
        return []
    root = Path(out_root) if out_root else \
        Path(os.environ.get(OUT_ROOT_ENV, "runs")) / "sweep"
    jobs = []
    for v in values:
        cfg = copy.deepcopy(config)
        _set_path(cfg, axis, v)
        cfg = validate(cfg)
        jobs.append((cfg, root / f"{axis.replace('.', '-')}-{v}"))

    def _one(job):
        cfg, outdir = job
        try:
            return run(cfg, out_dir=outdir)
        except Exception as exc:
            return RunManifest(kind=cfg["kind"], config_hash=config_hash(cfg),
                               version=__version__, seed=cfg["seed"],
                               passed=False, assertions=[], outputs=[],
                               timings={}, error=f"{type(exc).__name__}: {exc}")

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            manifests = list(pool.map(_one, jobs))
    else:
        manifests = [_one(j) for j in jobs]
    return manifests
