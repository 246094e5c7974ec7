"""Experiment orchestration: config ingestion, scenario runners, persistence.

Usage:  ekp <scenario> --config <path> [--out <dir>] [--seed <u64>]
        ekp sweep --manifest <path> [--out <dir>]

Scenarios: simulate, madelung-check, extend, subsolution-check, whitney,
weak-strong.  Exit codes: 0 success, 2 validation failure, 3 numerical abort
(instability or vacuum), with the abort reason recorded in report.json.

Output contract: a diagnostics CSV whose first line is a timestamped comment
(the only line exempt from reproducibility comparisons), JSON reports with
deterministic key order, and the field-series container of `seriesio`.
EKP_THREADS caps the process fan-out of `sweep`.
"""

import argparse
import datetime
import json
import os
import subprocess
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import convexint, dynamics, extension, madelung, recipes, relent, seriesio, whitney
from .config import Config, ConfigError
from .fields import Grid
from .laws import CapillarityLaw, PressureLaw

SCENARIOS = ("simulate", "madelung-check", "extend", "subsolution-check", "whitney", "weak-strong")


# ------------------------------------------------------------------
# output helpers
# ------------------------------------------------------------------

def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, scenario, columns, rows):
    stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(f"# ekp {scenario} {stamp}\n")
        f.write(",".join(columns) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def write_report(path, report):
    def default(o):
        if isinstance(o, (np.integer,)):
            return int(o)
        if isinstance(o, (np.floating,)):
            return float(o)
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.bool_,)):
            return bool(o)
        raise TypeError(f"not JSON-serializable: {type(o)}")

    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(report, f, indent=2, sort_keys=True, default=default)
        f.write("\n")


# ------------------------------------------------------------------
# config fragments
# ------------------------------------------------------------------

def build_grid(cfg, prefix="grid"):
    dim = cfg.get_int(f"{prefix}.dim")
    n = cfg.get_int(f"{prefix}.n")
    period = cfg.get_float(f"{prefix}.period", 1.0)
    try:
        return Grid(dim, n, period)
    except ValueError as exc:
        raise ConfigError(f"field {prefix}.*: {exc}") from exc


def build_pressure(cfg):
    kind = cfg.get_str("laws.pressure.kind", "zero")
    if kind == "power":
        return PressureLaw.power(
            cfg.get_float("laws.pressure.gamma", 2.0), cfg.get_float("laws.pressure.coeff", 1.0)
        )
    if kind == "zero":
        return PressureLaw.zero()
    if kind == "polynomial":
        coeffs = {}
        for suffix, value in cfg.params_with_prefix("laws.pressure.c").items():
            coeffs[int(suffix)] = float(value)
        if not coeffs:
            raise ConfigError("polynomial pressure needs laws.pressure.c.<m> entries")
        return PressureLaw.polynomial(coeffs)
    raise ConfigError(f"field laws.pressure.kind: unknown kind {kind!r}")


def build_capillarity(cfg):
    kind = cfg.get_str("laws.capillarity.kind", "constant-K")
    if kind == "constant-K":
        return CapillarityLaw.constant_K(cfg.get_float("laws.capillarity.kbar", 1.0))
    if kind == "quantum":
        return CapillarityLaw.quantum(
            cfg.get_float("laws.capillarity.hbar", 1.0),
            cfg.get_float("laws.capillarity.hbar_power", 2.0),
        )
    if kind == "constant-chi":
        return CapillarityLaw.constant_chi(cfg.get_float("laws.capillarity.chi", 0.25))
    if kind == "zero":
        return CapillarityLaw.zero()
    raise ConfigError(f"field laws.capillarity.kind: unknown kind {kind!r}")


# ------------------------------------------------------------------
# scenario runners
# ------------------------------------------------------------------

def run_simulate(cfg, out_dir, rng):
    grid = build_grid(cfg)
    pressure = build_pressure(cfg)
    capillarity = build_capillarity(cfg)
    alpha = cfg.get_float("alpha", 1.0)
    T = cfg.get_float("time.t")
    dt_raw = cfg.get_str("time.dt", "auto")
    state = recipes.fluid_profile(
        grid, cfg.get_str("initial.recipe", "cosine"), cfg.params_with_prefix("initial"), rng
    )
    dt = None if dt_raw == "auto" else float(dt_raw)
    traj = dynamics.simulate(state, T, pressure, capillarity, alpha=alpha, dt=dt,
                             store_every=max(1, cfg.get_int("store_every", 10**9)))
    times = np.asarray(traj.times)
    kin = traj.alpha * np.asarray(traj.kinetic_rates)
    dissip = np.concatenate([[0.0], np.cumsum(0.5 * (kin[1:] + kin[:-1]) * np.diff(times))])
    e0 = traj.energies[0]
    every = max(1, (len(times) - 1) // cfg.get_int("csv_rows", 200))
    rows = []
    for i in range(0, len(times), every):
        rows.append(
            (times[i], traj.energies[i], traj.masses[i], traj.kinetic_rates[i], dissip[i],
             abs(traj.energies[i] + dissip[i] - e0) / (abs(e0) + 1e-30))
        )
    write_csv(
        os.path.join(out_dir, "diagnostics.csv"), "simulate",
        ("t", "energy", "mass", "kinetic_rate", "dissipation", "balance_residual"), rows,
    )
    report = {
        "scenario": "simulate",
        "exit": "ok",
        "steps": len(times) - 1,
        "dt": traj.dt,
        "final_energy": traj.energies[-1],
        "balance_residual": dynamics.energy_balance_residual(traj),
        "mass_drift": float(max(abs(m - traj.masses[0]) for m in traj.masses))
        / (abs(traj.masses[0]) + 1e-30),
    }
    write_report(os.path.join(out_dir, "report.json"), report)
    return 0


def run_madelung_check(cfg, out_dir, rng):
    grid = build_grid(cfg)
    pressure = build_pressure(cfg)
    hbar = cfg.get_float("hbar", 1.0)
    T = cfg.get_float("time.t")
    psi0 = recipes.wave_profile(
        grid, cfg.get_str("initial.recipe", "modulated"), cfg.params_with_prefix("initial"),
        rng, hbar=hbar,
    )
    report = madelung.crosscheck_qhd(psi0, pressure, T, n_report=cfg.get_int("rows", 8))
    rows = list(zip(report["t"], report["L2_rho_gap"], report["L2_J_gap"], report["energy_gap"]))
    write_csv(
        os.path.join(out_dir, "diagnostics.csv"), "madelung-check",
        ("t", "L2_rho_gap", "L2_J_gap", "energy_gap"), rows,
    )
    out = {
        "scenario": "madelung-check",
        "exit": "ok" if report["breach_t"] is None else "vacuum-breach",
        "max_L2_rho_gap": max(report["L2_rho_gap"], default=None),
        "max_L2_J_gap": max(report["L2_J_gap"], default=None),
        "breach_t": report["breach_t"],
    }
    write_report(os.path.join(out_dir, "report.json"), out)
    return 0 if report["breach_t"] is None else 3


def _extension_initial_data(cfg, grid, rng):
    recipe = cfg.get_str("initial.recipe", "smooth")
    params = cfg.params_with_prefix("initial")
    x = grid.meshgrid()
    two_pi = 2.0 * np.pi / grid.period
    if recipe == "smooth":
        base = params.get("rho_base", 1.0)
        amp = params.get("rho_amplitude", 0.1)
        prof = np.ones(grid.shape)
        for a in range(min(grid.dim, 2)):
            prof = prof * np.cos(two_pi * x[a])
        rho0 = base + amp * prof
        u_mean = params.get("u_mean", 0.1)
        u_amp = params.get("u_amplitude", 0.1)
        U0 = np.zeros((grid.dim,) + grid.shape)
        for a in range(grid.dim):
            U0[a] = (u_mean if a == 0 else 0.0) + u_amp * np.sin(two_pi * x[(a + 1) % grid.dim])
    elif recipe == "random":
        rho0 = recipes.random_density(
            grid, rng, base=params.get("rho_base", 1.0),
            amplitude=params.get("rho_amplitude", 0.25),
        )
        u_amp = params.get("u_amplitude", 0.2)
        U0 = np.stack(
            [params.get("u_mean", 0.1) * (a == 0) + u_amp * recipes.random_band_limited(grid, rng)
             for a in range(grid.dim)]
        )
    else:
        raise ConfigError(f"field initial.recipe: unknown extension recipe {recipe!r}")
    return extension.InitialData(grid, rho0=rho0, U0=U0)


def run_extend(cfg, out_dir, rng):
    grid = build_grid(cfg)
    pressure = build_pressure(cfg)
    capillarity = build_capillarity(cfg)
    T = cfg.get_float("time.t")
    dt = cfg.get_float("time.dt")
    data = _extension_initial_data(cfg, grid, rng)
    result = extension.solve_mean_drift(data, T, dt)
    verify = extension.verify_extension(data, result, pressure, capillarity)
    sub = extension.reformulate(data, result, pressure, capillarity)
    jt = extension.momentum_series(data, result)

    fields = {"scaled_density": sub.scaled_density, "effective_pressure": sub.effective_pressure,
              "energy": sub.energy}
    for a in range(grid.dim):
        fields[f"gradient_flux.{a}"] = sub.gradient_flux[:, a]
        fields[f"jtilde.{a}"] = jt[:, a]
    for c in range(sub.stress.shape[1]):
        fields[f"stress.{c}"] = sub.stress[:, c]
    series_path = os.path.join(out_dir, "series.ekpf")
    seriesio.write_field_series(series_path, grid, sub.times, fields)

    report = {
        "scenario": "extend",
        "exit": "ok" if result.converged else "fixed-point-not-converged",
        "picard_iterations": len(result.residual_history),
        "picard_residual": result.residual,
        "picard_converged": result.converged,
        "residual_history": result.residual_history,
        "verify": verify,
        "series": os.path.basename(series_path),
        "energy_offset_scale": float(sub.energy_offset[0]),
    }
    write_report(os.path.join(out_dir, "report.json"), report)
    return 0 if result.converged else 3


def _subsolution_from_series(grid, times, fields):
    nt = len(times)
    dim = grid.dim
    ncomp = dim * (dim + 1) // 2
    gradient_flux = np.stack([fields[f"gradient_flux.{a}"] for a in range(dim)], axis=1)
    stress = np.stack([fields[f"stress.{c}"] for c in range(ncomp)], axis=1)
    eff = fields["effective_pressure"]
    energy = fields["energy"]
    offset_field = energy + 1.5 * eff
    offset = offset_field.reshape(nt, -1).mean(axis=1)
    return extension.SubsolutionData(
        grid, times, fields["scaled_density"], gradient_flux, eff, stress, offset, energy
    )


def run_subsolution_check(cfg, out_dir, rng):
    series_path = cfg.get_str("input.series")
    if not os.path.exists(series_path):
        raise ConfigError(f"field input.series: no such file {series_path}")
    grid, times, fields = seriesio.read_field_series(series_path)
    sub = _subsolution_from_series(grid, times, fields)
    jt = np.stack([fields[f"jtilde.{a}"] for a in range(grid.dim)], axis=1)

    candidate, cand_report = convexint.initial_subsolution(sub, jt)
    residuals = convexint.constraint_residuals(
        grid, candidate.times, candidate.velocity, candidate.relaxed_stress
    )
    margin = convexint.subsolution_margin(candidate, sub)
    finite = margin[~np.isnan(margin)]
    hist, edges = np.histogram(finite, bins=cfg.get_int("margin_bins", 24))
    defect = convexint.kinetic_defect(candidate, sub)

    block_entries = []
    all_pass = True
    n_blocks = cfg.get_int("blocks.count", 0)
    if n_blocks > 0:
        T = float(times[-1])
        pad = cfg.get_float("blocks.time_pad", 0.1) * T
        box = ((pad, 0.0, 0.0, 0.0), (T - pad, grid.period, grid.period, grid.period))
        amp0 = cfg.get_float("blocks.amplitude", 0.05)
        blocks = []
        for i in range(n_blocks):
            mode = (1 + i, max(1, i), 0)
            blocks.append(
                convexint.make_test_block(grid, times, box, mode, amp0 / (1 + i))
            )
        open_set = whitney.BoxSet(
            4, [((0.0, -0.01, -0.01, -0.01),
                 (float(times[-1]) + 0.01, grid.period + 0.01, grid.period + 0.01, grid.period + 0.01))]
        )
        verdict = convexint.verify_oscillatory_sequence(blocks, candidate, sub, open_set)
        block_entries = verdict["blocks"]
        all_pass = verdict["all_pass"]

    report = {
        "scenario": "subsolution-check",
        "exit": "ok",
        "candidate": cand_report,
        "constraint_residuals": residuals,
        "min_margin": float(np.min(finite)),
        "max_margin": float(np.max(finite)),
        "margin_admissible": bool(np.min(finite) > 0),
        "margin_histogram": {"counts": hist.tolist(), "edges": edges.tolist()},
        "kinetic_defect": defect,
        "defect_nonpositive": bool(defect <= 0),
        "blocks": block_entries,
        "blocks_all_pass": all_pass,
    }
    write_report(os.path.join(out_dir, "report.json"), report)
    return 0


def _parse_boxes(text, dim):
    boxes = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        corners = part.split(":")
        if len(corners) != 2:
            raise ConfigError(f"field whitney.boxes: box {part!r} needs lower:upper")
        lo = tuple(float(v) for v in corners[0].split(","))
        hi = tuple(float(v) for v in corners[1].split(","))
        if len(lo) != dim or len(hi) != dim:
            raise ConfigError(f"field whitney.boxes: box {part!r} needs {dim} coordinates")
        boxes.append((lo, hi))
    if not boxes:
        raise ConfigError("field whitney.boxes: no boxes given")
    return boxes


def run_whitney(cfg, out_dir, rng):
    dim = cfg.get_int("whitney.dim", 2)
    boxes = _parse_boxes(cfg.get_str("whitney.boxes"), dim)
    max_gen = cfg.get_int("whitney.max_generation", 10)
    samples = cfg.get_int("whitney.samples", 100000)
    boxset = whitney.BoxSet(dim, boxes)
    dec = whitney.whitney_decompose(boxset, max_gen)
    cubes = []
    all_ok = True
    for cube in dec.cubes:
        ok = whitney.verify_cube_predicate(boxset, cube)
        all_ok = all_ok and ok
        cubes.append(
            {
                "generation": cube.generation,
                "index": list(cube.index),
                "lower": cube.lower.tolist(),
                "upper": cube.upper.tolist(),
                "side": cube.side,
                "diameter": cube.diameter(),
                "predicate_ok": bool(ok),
            }
        )
    measure = boxset.measure()
    uncovered = whitney.coverage_fraction_uncovered(boxset, dec, samples, rng)
    bound_fraction = dec.residual_bound / measure
    mc_slack = 4.0 * np.sqrt(max(bound_fraction, 1e-12) / samples)
    report = {
        "scenario": "whitney",
        "exit": "ok",
        "dim": dim,
        "max_generation": max_gen,
        "cube_count": len(cubes),
        "all_predicates_ok": bool(all_ok),
        "measure": measure,
        "residual_bound": dec.residual_bound,
        "residual_bound_fraction": bound_fraction,
        "uncovered_fraction": uncovered,
        "coverage_ok": bool(uncovered <= bound_fraction + mc_slack),
        "cubes": cubes,
    }
    write_report(os.path.join(out_dir, "report.json"), report)
    return 0


def run_weak_strong(cfg, out_dir, rng):
    pressure = build_pressure(cfg)
    if not pressure.monotone():
        raise ConfigError("field laws.pressure.*: weak-strong monitoring needs a monotone pressure")
    capillarity = build_capillarity(cfg)
    if capillarity.kind != "constant-K":
        raise ConfigError("field laws.capillarity.kind: weak-strong needs constant-K")
    alpha = cfg.get_float("alpha", 1.0)
    T = cfg.get_float("time.t")
    coarse_grid = build_grid(cfg)
    fine_grid = Grid(coarse_grid.dim, cfg.get_int("fine.n"), coarse_grid.period)

    fine_state = recipes.fluid_profile(
        fine_grid, cfg.get_str("initial.recipe", "cosine"), cfg.params_with_prefix("initial"), rng
    )
    rho_c = relent.restrict_to_grid(fine_grid, coarse_grid, fine_state.rho.values)
    j_c = np.stack(
        [relent.restrict_to_grid(fine_grid, coarse_grid, fine_state.momentum.components[a])
         for a in range(fine_grid.dim)]
    )
    delta = cfg.get_float("perturb.amplitude", 0.0)
    if delta:
        mode = cfg.get_int("perturb.mode", 2)
        x = coarse_grid.meshgrid()
        rho_c = rho_c + delta * np.cos(2.0 * np.pi * mode * x[0] / coarse_grid.period)
    from .fields import ScalarField, VectorField

    coarse_state = dynamics.FluidState(0.0, ScalarField(coarse_grid, rho_c),
                                       VectorField(coarse_grid, j_c))
    dt_f = dynamics.stable_dt(fine_state, capillarity)
    dt_c = dynamics.stable_dt(coarse_state, capillarity)
    sub = max(1, int(np.ceil(dt_c / dt_f)))
    rows_wanted = cfg.get_int("rows", 10)
    n_coarse = max(rows_wanted, int(np.ceil(T / dt_c)))
    n_coarse = int(np.ceil(n_coarse / rows_wanted)) * rows_wanted
    dt_c = T / n_coarse
    dt_f = dt_c / sub
    coarse = dynamics.simulate(coarse_state, T, pressure, capillarity, alpha=alpha,
                               dt=dt_c, store_every=n_coarse // rows_wanted)
    fine = dynamics.simulate(fine_state, T, pressure, capillarity, alpha=alpha,
                             dt=dt_f, store_every=sub * (n_coarse // rows_wanted))
    mon = relent.weak_strong_monitor(coarse, fine, pressure)
    rows = list(zip(mon["t"], mon["E_rel"], mon["envelope"], mon["contained"]))
    write_csv(os.path.join(out_dir, "diagnostics.csv"), "weak-strong",
              ("t", "E_rel", "envelope", "contained"), rows)
    report = {
        "scenario": "weak-strong",
        "exit": "ok",
        "rate": mon["rate"],
        "all_contained": mon["all_contained"],
        "E_rel_initial": mon["E_rel"][0],
        "E_rel_final": mon["E_rel"][-1],
    }
    write_report(os.path.join(out_dir, "report.json"), report)
    return 0


RUNNERS = {
    "simulate": run_simulate,
    "madelung-check": run_madelung_check,
    "extend": run_extend,
    "subsolution-check": run_subsolution_check,
    "whitney": run_whitney,
    "weak-strong": run_weak_strong,
}


def run(scenario, config_path, out_dir, seed=None):
    """Run one scenario; deterministic given (config, seed)."""
    os.makedirs(out_dir, exist_ok=True)
    try:
        cfg = Config.from_file(config_path)
        cfg_scenario = cfg.get_str("scenario", scenario)
        if scenario not in RUNNERS:
            raise ConfigError(f"field scenario: unknown scenario {scenario!r}")
        if cfg_scenario != scenario:
            raise ConfigError(
                f"field scenario: config says {cfg_scenario!r} but the command says {scenario!r}"
            )
        if seed is None:
            seed = cfg.get_int("seed", 0)
        rng = np.random.default_rng(seed)
        return RUNNERS[scenario](cfg, out_dir, rng)
    except ConfigError as exc:
        write_report(os.path.join(out_dir, "report.json"),
                     {"scenario": scenario, "exit": "validation-error", "reason": str(exc)})
        print(f"ekp: {exc}", file=sys.stderr)
        return 2
    except (dynamics.VacuumBreach, dynamics.InstabilityAbort) as exc:
        write_report(os.path.join(out_dir, "report.json"),
                     {"scenario": scenario, "exit": "numerical-abort", "reason": str(exc)})
        print(f"ekp: numerical abort: {exc}", file=sys.stderr)
        return 3


def run_sweep(manifest_path, out_root):
    """Fan a manifest of config paths out to worker processes."""
    with open(manifest_path, "r", encoding="utf-8") as f:
        entries = [line.strip() for line in f if line.strip() and not line.startswith("#")]
    workers = int(os.environ.get("EKP_THREADS", os.cpu_count() or 1))
    os.makedirs(out_root, exist_ok=True)

    def one(idx_path):
        idx, path = idx_path
        cfg = Config.from_file(path)
        scenario = cfg.get_str("scenario")
        out_dir = os.path.join(out_root, f"run{idx:03d}")
        proc = subprocess.run(
            [sys.executable, "-m", "ekp.cli", scenario, "--config", path, "--out", out_dir],
            capture_output=True, text=True,
        )
        return idx, proc.returncode

    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        results = list(pool.map(one, enumerate(entries)))
    bad = [idx for idx, code in results if code != 0]
    if bad:
        print(f"ekp sweep: runs {bad} failed", file=sys.stderr)
        return 1
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="ekp", description=__doc__)
    parser.add_argument("scenario", help="one of %s or 'sweep'" % ", ".join(SCENARIOS))
    parser.add_argument("--config", help="experiment config file")
    parser.add_argument("--manifest", help="sweep manifest (one config path per line)")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    args = parser.parse_args(argv)

    if args.scenario == "sweep":
        if not args.manifest:
            parser.error("sweep needs --manifest")
        return run_sweep(args.manifest, args.out)
    if args.scenario not in SCENARIOS:
        print(f"ekp: field scenario: unknown scenario {args.scenario!r}", file=sys.stderr)
        return 2
    if not args.config:
        parser.error(f"{args.scenario} needs --config")
    return run(args.scenario, args.config, args.out, seed=args.seed)


if __name__ == "__main__":
    sys.exit(main())
