"""Acceptance suite: one test per shippable criterion, each printing a
PASS/FAIL line with the measured figure (run with -s to see them inline).
"""

import time

import numpy as np
import pytest

from ekp import cli, convexint as C, dynamics as D, extension as E, fields as F
from ekp import korteweg as K, madelung as M, relent as R, whitney as W
from ekp.laws import CapillarityLaw, PressureLaw
from ekp.recipes import random_band_limited, random_density


def _report(name, ok, detail):
    print(f"\nACCEPT {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"{name}: {detail}"


# ------------------------------------------------------------------
def test_korteweg_identity():
    t0 = time.time()
    worst = 0.0
    rng = np.random.default_rng(1)
    for dim in (1, 2):
        grid = F.Grid(dim, 64)
        for _ in range(50):
            rho = F.ScalarField(
                grid, random_density(grid, rng, amplitude=rng.uniform(0.15, 0.35))
            )
            for law in (CapillarityLaw.constant_K(1.0), CapillarityLaw.quantum(1.0)):
                worst = max(worst, K.korteweg_identity_residual(rho, law))
    elapsed = time.time() - t0
    _report(
        "korteweg-identity",
        worst < 1e-8 and elapsed < 30.0,
        f"worst residual {worst:.2e} over 200 evaluations, {elapsed:.1f}s",
    )


# ------------------------------------------------------------------
def test_energy_balance():
    t0 = time.time()
    p, cap = PressureLaw.power(2.0), CapillarityLaw.constant_K(1.0)

    g1 = F.Grid(1, 128)
    (x,) = g1.meshgrid()
    st1 = D.FluidState(
        0.0,
        F.ScalarField(g1, 1 + 0.1 * np.cos(2 * np.pi * x)),
        F.VectorField(g1, (0.05 * np.sin(2 * np.pi * x))[None]),
    )
    res1 = D.energy_balance_residual(D.simulate(st1, 0.1, p, cap, alpha=1.0, store_every=10**9))

    g2 = F.Grid(2, 64)
    x2, y2 = g2.meshgrid()
    st2 = D.FluidState(
        0.0,
        F.ScalarField(g2, 1 + 0.08 * np.cos(2 * np.pi * x2) * np.cos(2 * np.pi * y2)),
        F.VectorField(g2, np.stack([0.04 * np.sin(2 * np.pi * x2), 0.03 * np.sin(2 * np.pi * y2)])),
    )
    res2 = D.energy_balance_residual(D.simulate(st2, 0.1, p, cap, alpha=1.0, store_every=10**9))

    g0 = F.Grid(1, 64)
    (x0,) = g0.meshgrid()
    st0 = D.FluidState(
        0.0,
        F.ScalarField(g0, 1 + 0.1 * np.cos(2 * np.pi * x0)),
        F.VectorField(g0, (0.05 * np.sin(2 * np.pi * x0))[None]),
    )
    traj0 = D.simulate(st0, 0.1, p, cap, alpha=0.0, store_every=10**9)
    res0 = max(abs(e - traj0.energies[0]) for e in traj0.energies) / abs(traj0.energies[0])

    elapsed = time.time() - t0
    _report(
        "energy-balance",
        res1 < 1e-4 and res2 < 1e-4 and res0 < 1e-6 and elapsed < 120.0,
        f"1-D {res1:.2e}, 2-D {res2:.2e}, conservative {res0:.2e}, {elapsed:.0f}s",
    )


# ------------------------------------------------------------------
def test_madelung_crosscheck():
    t0 = time.time()
    results = {}
    for n in (64, 128):
        grid = F.Grid(1, n)
        (x,) = grid.meshgrid()
        psi = (1 + 0.1 * np.cos(2 * np.pi * x)) * np.exp(1j * 0.1 * np.sin(2 * np.pi * x))
        w = M.WaveState(0.0, grid, psi, hbar=1.0)
        for label, p in (("zero", PressureLaw.zero()), ("quadratic", PressureLaw.power(2.0))):
            rep = M.crosscheck_qhd(w, p, T=0.05, n_report=4)
            results[(n, label)] = (max(rep["L2_rho_gap"]), max(rep["L2_J_gap"]))
    gaps_ok = all(
        rho_gap < 1e-3 and j_gap < 1e-3 for (n, _), (rho_gap, j_gap) in results.items() if n == 128
    )
    halves = (
        results[(128, "quadratic")][0] <= results[(64, "quadratic")][0] / 2
        and results[(128, "quadratic")][1] <= results[(64, "quadratic")][1] / 2
    )
    elapsed = time.time() - t0
    _report(
        "madelung-crosscheck",
        gaps_ok and halves and elapsed < 60.0,
        f"N=128 gaps rho {results[(128,'zero')][0]:.1e}/{results[(128,'quadratic')][0]:.1e}, "
        f"refinement ratio {results[(64,'quadratic')][0]/results[(128,'quadratic')][0]:.1f}x, "
        f"{elapsed:.0f}s",
    )


# ------------------------------------------------------------------
def test_fixed_point():
    grid = F.Grid(1, 32)
    data_c = E.InitialData(grid, rho0=np.full(grid.shape, 1.5),
                           U0=np.full((1,) + grid.shape, 0.8))
    res_c = E.solve_mean_drift(data_c, T=0.5, dt=0.01)
    closed_form_err = float(
        np.max(np.abs(res_c.drift[:, 0] - 0.8 * (1 - np.exp(-res_c.times))))
    )

    rng = np.random.default_rng(2)
    rho0 = random_density(grid, rng, amplitude=0.3)
    U0 = (0.2 + 0.3 * random_band_limited(grid, rng))[None]
    data_r = E.InitialData(grid, rho0=rho0, U0=U0)
    res_r = E.solve_mean_drift(data_r, T=0.5, dt=0.005)
    rep = E.verify_extension(data_r, res_r, PressureLaw.power(2.0), CapillarityLaw.constant_K(1.0))

    ok = (
        closed_form_err < 1e-8
        and res_r.converged
        and res_r.residual < 1e-8
        and len(res_r.residual_history) <= 200
        and rep["solenoidal_decay_residual"] < 1e-6
    )
    _report(
        "fixed-point",
        ok,
        f"closed form {closed_form_err:.1e}, random residual {res_r.residual:.1e} "
        f"in {len(res_r.residual_history)} iterations, decay {rep['solenoidal_decay_residual']:.1e}",
    )


# ------------------------------------------------------------------
def matrix_power_lambda_max(A):
    """Repeated-squaring power iteration: exact top eigenvalue via the
    spectral projector, independent of the closed form."""
    n = A.shape[-1]
    shift = np.linalg.norm(A, axis=(-2, -1)) + 1.0
    B = A + shift[..., None, None] * np.eye(n)
    P = B / np.linalg.norm(B, axis=(-2, -1))[..., None, None]
    for _ in range(60):
        P = P @ P
        P = P / np.linalg.norm(P, axis=(-2, -1))[..., None, None]
    num = np.einsum("...ij,...ji->...", B, P)
    den = np.trace(P, axis1=-2, axis2=-1)
    return num / den - shift


def test_subsolution_geometry():
    rng = np.random.default_rng(3)
    A = rng.normal(size=(1000, 3, 3))
    A = (A + A.transpose(0, 2, 1)) / 2
    lam = C.lambda_max(A)
    ref = matrix_power_lambda_max(A)
    scale = np.linalg.norm(A, axis=(1, 2))
    eig_err = float(np.max(np.abs(lam - ref) / scale))

    n = 100000
    g = rng.normal(size=(n, 3))
    r = rng.uniform(0.05, 5.0, n)
    Wm = rng.normal(size=(n, 3, 3))
    Wm = (Wm + Wm.transpose(0, 2, 1)) / 2
    Wm -= (np.trace(Wm, axis1=1, axis2=2) / 3)[:, None, None] * np.eye(3)
    lamW = C.lambda_max(g[:, :, None] * g[:, None, :] / r[:, None, None] - Wm)
    kin = 0.5 * np.sum(g**2, axis=1) / r
    bound_ok = bool(np.all(1.5 * lamW >= kin - 1e-10 * (np.abs(kin) + 1)))

    grid = F.Grid(3, 16)
    x, y, z = grid.meshgrid()
    rho0 = 1 + 0.1 * np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y)
    U0 = np.stack([0.12 + 0.1 * np.sin(2 * np.pi * y), 0.1 * np.sin(2 * np.pi * z),
                   0.05 * np.cos(2 * np.pi * x)])
    data = E.InitialData(grid, rho0=rho0, U0=U0)
    res = E.solve_mean_drift(data, T=0.25, dt=0.005)
    sub = E.reformulate(data, res, PressureLaw.power(2.0, 0.5), CapillarityLaw.constant_K(1.0))
    cand, _ = C.initial_subsolution(sub, E.momentum_series(data, res))
    margin = C.min_margin(cand, sub)
    defect = C.kinetic_defect(cand, sub)

    ok = eig_err < 1e-12 and bound_ok and margin > 0 and defect <= 0
    _report(
        "subsolution-geometry",
        ok,
        f"eig err {eig_err:.1e}, kinetic bound ok={bound_ok}, "
        f"margin {margin:.3f} > 0, defect {defect:.3f} <= 0",
    )


# ------------------------------------------------------------------
def test_whitney_decomposition():
    t0 = time.time()
    rng = np.random.default_rng(4)
    ok = True
    details = []
    for label, boxes in (
        ("unit-square", [((0.0, 0.0), (1.0, 1.0))]),
        ("L-shape", [((0.0, 0.0), (1.0, 0.5)), ((0.0, 0.0), (0.5, 1.0))]),
    ):
        U = W.BoxSet(2, boxes)
        dec = W.whitney_decompose(U, 10)
        predicates = all(W.verify_cube_predicate(U, c) for c in dec.cubes)
        frac = W.coverage_fraction_uncovered(U, dec, 100000, rng)
        bound = dec.residual_bound / U.measure()
        mc_slack = 4.0 * np.sqrt(max(bound, 1e-12) / 100000)
        cover = frac <= bound + mc_slack
        ok = ok and predicates and cover
        details.append(f"{label}: {len(dec.cubes)} cubes, uncovered {frac:.1e} <= {bound:.1e}")
    elapsed = time.time() - t0
    _report("whitney", ok and elapsed < 10.0, "; ".join(details) + f", {elapsed:.1f}s")


# ------------------------------------------------------------------
def test_relative_energy_and_weak_strong():
    t0 = time.time()
    grid = F.Grid(1, 64)
    (x,) = grid.meshgrid()
    rho = 1 + 0.2 * np.cos(2 * np.pi * x)
    L = (0.1 * np.sin(2 * np.pi * x))[None]
    p = PressureLaw.power(2.0)
    coincidence = abs(R.relative_energy(grid, rho, L, rho, L, p))

    da = 0.1 * np.cos(4 * np.pi * x)
    db = (0.1 * np.sin(4 * np.pi * x))[None]
    e1 = R.relative_energy(grid, rho + 1e-3 * da, L + 1e-3 * db, rho, L, p)
    e2 = R.relative_energy(grid, rho + 5e-4 * da, L + 5e-4 * db, rho, L, p)
    ratio = e1 / e2

    cap = CapillarityLaw.constant_K(1.0)
    gf = F.Grid(1, 128)
    (xf,) = gf.meshgrid()
    fine0 = D.FluidState(
        0.0,
        F.ScalarField(gf, 1 + 0.1 * np.cos(2 * np.pi * xf)),
        F.VectorField(gf, (0.05 * np.sin(2 * np.pi * xf))[None]),
    )
    gc = F.Grid(1, 32)
    (xc,) = gc.meshgrid()
    rho_c = R.restrict_to_grid(gf, gc, fine0.rho.values) + 1e-3 * np.cos(4 * np.pi * xc)
    j_c = R.restrict_to_grid(gf, gc, fine0.momentum.components[0])[None]
    coarse0 = D.FluidState(0.0, F.ScalarField(gc, rho_c), F.VectorField(gc, j_c))
    T, rows = 0.05, 10
    dt_c = D.stable_dt(coarse0, cap)
    sub = max(1, int(np.ceil(dt_c / D.stable_dt(fine0, cap))))
    n_steps = int(np.ceil(T / dt_c / rows)) * rows
    dt_c = T / n_steps
    coarse = D.simulate(coarse0, T, p, cap, alpha=1.0, dt=dt_c, store_every=n_steps // rows)
    fine = D.simulate(fine0, T, p, cap, alpha=1.0, dt=dt_c / sub,
                      store_every=sub * (n_steps // rows))
    mon = R.weak_strong_monitor(coarse, fine, p)

    elapsed = time.time() - t0
    ok = (
        coincidence < 1e-14
        and 3.8 < ratio < 4.2
        and mon["all_contained"]
        and elapsed < 180.0
    )
    _report(
        "relative-energy",
        ok,
        f"coincidence {coincidence:.1e}, quadratic ratio {ratio:.2f}, "
        f"containment {mon['all_contained']} over {len(mon['t'])} times, {elapsed:.0f}s",
    )


# ------------------------------------------------------------------
def test_integrator_orders():
    g = F.Grid(2, 16)
    x, _ = g.meshgrid()
    J = np.zeros((2,) + g.shape)
    J[0] = 0.5
    J[1] = 0.25 * np.sin(2 * np.pi * x)
    st = D.FluidState(0.0, F.ScalarField(g, np.ones(g.shape)), F.VectorField(g, J))
    p0, c0 = PressureLaw.zero(), CapillarityLaw.zero()
    T, dt0 = 0.1, 0.01

    def rk4_end(dt):
        return D.simulate(st, T, p0, c0, alpha=0.0, dt=dt, store_every=10**9).states[-1]

    ref = rk4_end(dt0 / 8)
    e1 = np.max(np.abs(rk4_end(dt0).momentum.components - ref.momentum.components))
    e2 = np.max(np.abs(rk4_end(dt0 / 2).momentum.components - ref.momentum.components))
    rk4_ratio = e1 / e2

    g1 = F.Grid(1, 64)
    (x1,) = g1.meshgrid()
    psi = (1 + 0.2 * np.cos(2 * np.pi * x1)) * np.exp(1j * 0.2 * np.sin(2 * np.pi * x1))
    w = M.WaveState(0.0, g1, psi, hbar=1.0)
    p = PressureLaw.power(2.0)
    Tw, dtw = 0.02, 0.001

    def strang_end(dt):
        return M.evolve(w, Tw, p, dt=dt).psi

    refw = strang_end(dtw / 8)
    s1 = np.max(np.abs(strang_end(dtw) - refw))
    s2 = np.max(np.abs(strang_end(dtw / 2) - refw))
    strang_ratio = s1 / s2

    ok = 16 * 0.8 < rk4_ratio < 16 * 1.2 and 4 * 0.8 < strang_ratio < 4 * 1.2
    _report(
        "integrator-orders",
        ok,
        f"RK4 ratio {rk4_ratio:.2f} (target 16 +- 20%), "
        f"Strang ratio {strang_ratio:.2f} (target 4 +- 20%)",
    )


# ------------------------------------------------------------------
def test_reproducibility(tmp_path):
    cfg = tmp_path / "sim.cfg"
    cfg.write_text(
        """
scenario = simulate
grid.dim = 1
grid.n = 32
time.t = 0.005
laws.pressure.kind = power
laws.pressure.gamma = 2.0
laws.capillarity.kind = constant-K
alpha = 1.0
initial.recipe = random
initial.rho_amplitude = 0.2
initial.j_amplitude = 0.1
seed = 42
""",
        encoding="utf-8",
    )
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    code1 = cli.run("simulate", str(cfg), str(out1))
    code2 = cli.run("simulate", str(cfg), str(out2))
    b1 = (out1 / "diagnostics.csv").read_bytes().split(b"\n", 1)[1]
    b2 = (out2 / "diagnostics.csv").read_bytes().split(b"\n", 1)[1]
    ok = code1 == 0 and code2 == 0 and b1 == b2
    _report("reproducibility", ok, f"identical bodies of {len(b1)} bytes")
