"""Relative energy distance to a smooth test pair and the weak-strong
uniqueness monitor, for constant capillarity coefficient.

The relative energy between a finite-energy state (rho, J) and a smooth
positive pair (r, L) is

    integral[ 1/2 rho |J/rho - L/r|^2
              + P(rho) - P'(r)(rho - r) - P(r)
              + (kbar/2) |grad rho - grad r|^2 ],

with the kinetic block expanded as 1/2|J|^2/rho - J.L/r + 1/2 rho |L|^2/r^2
so vacuum points of rho (where J must vanish) contribute only the last part.

The right-hand side of the relative energy inequality is exposed term by
term so the inequality can be audited.  Note: one published form of the
inequality carries a 1/4 on the grad rho . grad(rho div(L/r)) term; the
step-by-step assembly gives coefficient 1, which is what this module
implements; the 1/4 variant is treated as an inconsistency, not followed.
"""

import numpy as np

from .fields import (
    Grid,
    ScalarField,
    VectorField,
    gradient,
    integrate,
    laplacian,
    solve_poisson,
)

DENSITY_FLOOR = 1e-8


def _as_values(obj):
    if isinstance(obj, ScalarField):
        return obj.values
    if isinstance(obj, VectorField):
        return obj.components
    return np.asarray(obj, dtype=float)


def relative_energy(grid, rho, momentum, rho_ref, momentum_ref, pressure, kbar=1.0):
    """Relative energy of (rho, momentum) against the smooth pair (rho_ref,
    momentum_ref); zero exactly at coincidence, quadratic nearby."""
    rho = _as_values(rho)
    J = _as_values(momentum)
    r = _as_values(rho_ref)
    L = _as_values(momentum_ref)
    if np.any(r <= DENSITY_FLOOR):
        raise ValueError("test-pair density must be strictly positive")
    vac = rho <= DENSITY_FLOOR
    if np.any(vac):
        jmag = np.sqrt(np.sum(J**2, axis=0))
        if np.max(jmag[vac]) > 0:
            raise ValueError("momentum must vanish on the vacuum set of rho")

    live = ~vac
    kinetic = np.zeros(grid.shape)
    inv_rho = np.zeros(grid.shape)
    inv_rho[live] = 1.0 / rho[live]
    kinetic += 0.5 * np.sum(J**2, axis=0) * inv_rho
    kinetic -= np.sum(J * L, axis=0) / r
    kinetic += 0.5 * rho * np.sum(L**2, axis=0) / r**2

    press = (
        pressure.internal_energy(rho)
        - pressure.internal_energy_prime(r) * (rho - r)
        - pressure.internal_energy(r)
    )

    grad_gap = gradient(ScalarField(grid, rho, check=False)).components - gradient(
        ScalarField(grid, r, check=False)
    ).components
    grad_term = 0.5 * kbar * np.sum(grad_gap**2, axis=0)

    return integrate(grid, kinetic + press + grad_term)


def poisson_correction(grid, rho, rho_ref):
    """1/2 integral (rho_ref - rho) * invlap(rho_ref - rho); non-positive.

    The two densities must carry the same total mass so the difference has
    zero mean and the inverse Laplacian is defined.
    """
    diff = _as_values(rho_ref) - _as_values(rho)
    mean = float(np.mean(diff))
    scale = float(np.max(np.abs(diff))) + 1.0
    if abs(mean) > 1e-10 * scale:
        raise ValueError("densities must share total mass for the Poisson correction")
    sol = solve_poisson(ScalarField(grid, diff - mean, check=False))
    return 0.5 * integrate(grid, diff * sol.values)


def relative_energy_rhs_terms(
    grid, rho, momentum, rho_ref, momentum_ref, pressure,
    d_rho_ref_dt, d_momentum_ref_dt, rho_bar=None,
):
    """Named integrals of the relative energy inequality at one time instant.

    Labels:
      damping_cross        (J - rho L/r) . (J/rho - L/r)   [kept on the left]
      damping_rhs          -rho (L/r) . (J/rho - L/r)
      delta_r_coupling     rho d/dt(lap r) + J . grad(lap r) - (d r/dt) lap r
      poisson_term         -rho grad V . (L/r)
      transport_remainder  [d/dt(L/r) + (J/rho) . grad(L/r)] . (rho L/r - J)
      korteweg_remainder   -[grad rho . grad(rho div(L/r)) - 1/2 |grad rho|^2 div(L/r)
                              + grad rho (x) grad rho : grad(L/r)]
      pressure_remainder   (r - rho) d/dt P'(r) + (L - J) . grad P'(r)
                              + (p(r) - p(rho)) div(L/r)
      convective_quadratic rho (J/rho - L/r) . grad(L/r) . (L/r - J/rho)
    """
    rho = _as_values(rho)
    J = _as_values(momentum)
    r = _as_values(rho_ref)
    L = _as_values(momentum_ref)
    drdt = _as_values(d_rho_ref_dt)
    dldt = _as_values(d_momentum_ref_dt)
    if np.any(r <= DENSITY_FLOOR):
        raise ValueError("test-pair density must be strictly positive")
    if np.any(rho <= DENSITY_FLOOR):
        raise ValueError("term audit needs a positive weak-side density")
    if rho_bar is None:
        rho_bar = float(np.mean(rho))

    u = J / rho[None]
    w = L / r[None]  # test velocity
    dwdt = dldt / r[None] - L * drdt[None] / (r**2)[None]

    grad_w = np.stack([gradient(ScalarField(grid, w[i], check=False)).components for i in range(grid.dim)])
    div_w = np.trace(grad_w, axis1=0, axis2=1)

    gap = u - w
    out = {}
    out["damping_cross"] = integrate(grid, np.sum((J - rho[None] * w) * gap, axis=0))
    out["damping_rhs"] = -integrate(grid, rho * np.sum(w * gap, axis=0))

    lap_r = laplacian(ScalarField(grid, r, check=False)).values
    grad_lap_r = gradient(ScalarField(grid, lap_r, check=False)).components
    lap_drdt = laplacian(ScalarField(grid, drdt, check=False)).values
    out["delta_r_coupling"] = integrate(
        grid, rho * lap_drdt + np.sum(J * grad_lap_r, axis=0) - drdt * lap_r
    )

    V = solve_poisson(ScalarField(grid, rho - rho_bar, check=False))
    grad_v = gradient(V).components
    out["poisson_term"] = -integrate(grid, rho * np.sum(grad_v * w, axis=0))

    conv = dwdt + np.einsum("i...,ij...->j...", u, grad_w)
    out["transport_remainder"] = integrate(grid, np.sum(conv * (rho[None] * w - J), axis=0))

    grad_rho = gradient(ScalarField(grid, rho, check=False)).components
    inner = gradient(ScalarField(grid, rho * div_w, check=False)).components
    dyad = np.einsum("i...,j...,ij...->...", grad_rho, grad_rho, grad_w)
    out["korteweg_remainder"] = -integrate(
        grid,
        np.sum(grad_rho * inner, axis=0)
        - 0.5 * np.sum(grad_rho**2, axis=0) * div_w
        + dyad,
    )

    dpdt = pressure.p_prime(r) / r * drdt  # d/dt P'(r) = P''(r) dr/dt
    grad_pprime = gradient(ScalarField(grid, pressure.internal_energy_prime(r), check=False)).components
    out["pressure_remainder"] = integrate(
        grid,
        (r - rho) * dpdt
        + np.sum((L - J) * grad_pprime, axis=0)
        + (pressure.p(r) - pressure.p(rho)) * div_w,
    )

    quad = np.einsum("i...,ij...,j...->...", gap, grad_w, -gap)
    out["convective_quadratic"] = integrate(grid, rho * quad)
    return out


def restrict_to_grid(fine_grid, coarse_grid, values):
    """Spectral truncation of a fine-grid field onto a coarser grid.

    Keeps the modes below the coarse Nyquist frequency and drops the rest
    (including the coarse Nyquist slot itself), so the result is real and the
    restriction is idempotent.
    """
    if fine_grid.dim != coarse_grid.dim or fine_grid.period != coarse_grid.period:
        raise ValueError("grids must share dimension and period")
    nf, nc = fine_grid.n, coarse_grid.n
    if nc > nf:
        raise ValueError("restriction goes fine -> coarse")
    if nc == nf:
        return np.asarray(values, dtype=float).copy()
    vh = np.fft.fftn(values)
    idx_c = np.fft.fftfreq(nc, 1.0 / nc).astype(int)
    src_map = idx_c % nf
    keep = np.abs(idx_c) < nc // 2
    grids = np.meshgrid(*([src_map] * coarse_grid.dim), indexing="ij")
    masks = np.meshgrid(*([keep] * coarse_grid.dim), indexing="ij")
    out = vh[tuple(grids)]
    total_keep = masks[0]
    for m in masks[1:]:
        total_keep = total_keep & m
    out[~total_keep] = 0.0
    return np.real(np.fft.ifftn(out)) * (nc**coarse_grid.dim / nf**fine_grid.dim)


def gronwall_rate(traj):
    """Computable over-bound for the growth rate from the smooth trajectory."""
    sup_grad = 0.0
    sup_div = 0.0
    sup_grad_div = 0.0
    rho_min, rho_max = np.inf, -np.inf
    for state in traj.states:
        g = state.grid
        rho = state.rho.values
        rho_min = min(rho_min, float(np.min(rho)))
        rho_max = max(rho_max, float(np.max(rho)))
        u = state.momentum.components / rho[None]
        grad_u = np.stack(
            [gradient(ScalarField(g, u[i], check=False)).components for i in range(g.dim)]
        )
        div_u = np.trace(grad_u, axis1=0, axis2=1)
        grad_div = gradient(ScalarField(g, div_u, check=False)).components
        sup_grad = max(sup_grad, float(np.max(np.abs(grad_u))))
        sup_div = max(sup_div, float(np.max(np.abs(div_u))))
        sup_grad_div = max(sup_grad_div, float(np.max(np.abs(grad_div))))
    p = traj.pressure
    sup_psecond = max(
        float(np.max(np.abs(p.p_second(np.array([max(rho_min, 1e-8)]))))),
        float(np.max(np.abs(p.p_second(np.array([rho_max]))))),
    )
    return 2.0 * (1.0 + sup_grad + 1.5 * sup_div + sup_grad_div + sup_psecond * sup_div)


def weak_strong_monitor(coarse_traj, fine_traj, pressure, time_tol=1e-9):
    """Relative energy of the coarse run against the fine run, with envelope.

    The fine trajectory plays the smooth test pair: its states are restricted
    to the coarse grid spectrally and the relative energy is evaluated at
    every matched stored time.  The envelope is E_rel(t0) exp(rate (t - t0))
    with the rate extracted from the fine solution.  Requires constant
    capillarity on both runs and a strictly positive fine density.
    """
    for traj in (coarse_traj, fine_traj):
        if traj.capillarity.kind != "constant-K":
            raise ValueError("weak-strong theory needs a constant capillarity coefficient")
    if coarse_traj.capillarity.kbar != fine_traj.capillarity.kbar:
        raise ValueError("the two runs use different capillarity constants")
    kbar = fine_traj.capillarity.kbar
    for state in fine_traj.states:
        if float(np.min(state.rho.values)) <= DENSITY_FLOOR:
            raise ValueError("fine trajectory touches vacuum; hypothesis violated")

    cg = coarse_traj.states[0].grid
    fg = fine_traj.states[0].grid
    fine_by_time = {round(s.t / time_tol): s for s in fine_traj.states}

    rows = {"t": [], "E_rel": [], "envelope": [], "contained": []}
    rate = gronwall_rate(fine_traj)
    e0 = None
    scale = abs(fine_traj.energies[0]) + 1e-30
    for s in coarse_traj.states:
        key = round(s.t / time_tol)
        ref = fine_by_time.get(key)
        if ref is None:
            continue
        r = restrict_to_grid(fg, cg, ref.rho.values)
        L = np.stack(
            [restrict_to_grid(fg, cg, ref.momentum.components[i]) for i in range(fg.dim)]
        )
        e_rel = relative_energy(cg, s.rho.values, s.momentum.components, r, L, pressure, kbar=kbar)
        if e0 is None:
            e0 = e_rel
            t0 = s.t
        env = e0 * float(np.exp(rate * (s.t - t0)))
        rows["t"].append(s.t)
        rows["E_rel"].append(e_rel)
        rows["envelope"].append(env)
        rows["contained"].append(int(e_rel <= env + 1e-12 * scale))
    if not rows["t"]:
        raise ValueError("no matched stored times between the two trajectories")
    rows["rate"] = rate
    rows["all_contained"] = bool(all(rows["contained"]))
    return rows
