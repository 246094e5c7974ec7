"""Wave-equation oracle: split-step Schrodinger-Poisson evolution and the
Madelung map to hydrodynamic variables.

The wave function evolves under

    i hbar dpsi/dt = -(hbar^2/2) lap psi - V psi + f(|psi|^2) psi,
    lap V = |psi|^2 - rho_bar,

with f derived from the pressure law through f'(rho) = p'(rho)/rho, f(1) = 0.
Strang splitting: half potential phase, full spectral kinetic step, half
potential phase.  Every substep is unitary, so the mass integral of |psi|^2
is conserved exactly.  The hydrodynamic pair is rho = |psi|^2,
J = hbar Im(conj(psi) grad psi); for matching quantum capillarity
(chi = hbar^2/4) the two descriptions evolve together, which is this
module's cross-check.
"""

import numpy as np

from . import dynamics
from .fields import Grid, ScalarField, VectorField, gradient_values, integrate, l2_norm, solve_poisson
from .laws import CapillarityLaw


class WaveState:
    def __init__(self, t, grid, psi, hbar=1.0):
        psi = np.asarray(psi, dtype=complex)
        if psi.shape != grid.shape:
            raise ValueError(f"psi shape {psi.shape} != grid shape {grid.shape}")
        if not np.all(np.isfinite(psi.real)) or not np.all(np.isfinite(psi.imag)):
            raise ValueError("psi has non-finite values")
        if hbar <= 0:
            raise ValueError("hbar must be positive")
        self.t = float(t)
        self.grid = grid
        self.psi = psi
        self.hbar = float(hbar)

    def mass(self):
        return integrate(self.grid, np.abs(self.psi) ** 2)

    def copy(self):
        return WaveState(self.t, self.grid, self.psi.copy(), self.hbar)


def madelung_transform(w):
    """(rho, J) = (|psi|^2, hbar Im(conj(psi) grad psi)); J vanishes with rho."""
    g = w.grid
    rho = np.abs(w.psi) ** 2
    grads = gradient_values(g, w.psi)
    comps = np.empty((g.dim,) + g.shape)
    for axis in range(g.dim):
        comps[axis] = w.hbar * np.imag(np.conj(w.psi) * grads[axis])
    return ScalarField(g, rho, check=False), VectorField(g, comps, check=False)


def split_step(w, dt, pressure, rho_bar=None):
    """One Strang step; exactly mass-conserving by unitarity of each substep."""
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    g = w.grid
    if rho_bar is None:
        rho_bar = integrate(g, np.abs(w.psi) ** 2) / g.period**g.dim

    def phase(psi, half_dt):
        rho = np.abs(psi) ** 2
        V = solve_poisson(ScalarField(g, rho - rho_bar, check=False)).values
        # i hbar dpsi/dt = (-V + f) psi  =>  psi *= exp(i (V - f) dt / hbar)
        return psi * np.exp(1j * (V - pressure.enthalpy(rho)) * half_dt / w.hbar)

    psi = phase(w.psi, dt / 2)
    psi_hat = np.fft.fftn(psi)
    psi_hat *= np.exp(-1j * (w.hbar / 2.0) * g.k2 * dt)
    psi = np.fft.ifftn(psi_hat)
    psi = phase(psi, dt / 2)
    return WaveState(w.t + dt, g, psi, w.hbar)


def evolve(w, T, pressure, dt=None, rho_bar=None):
    """Advance to time T with uniform steps."""
    if dt is None:
        dt = wave_stable_dt(w)
    n_steps = max(1, int(np.ceil(T / dt - 1e-12)))
    dt = T / n_steps
    state = w.copy()
    if rho_bar is None:
        rho_bar = integrate(w.grid, np.abs(w.psi) ** 2) / w.grid.period**w.grid.dim
    for _ in range(n_steps):
        state = split_step(state, dt, pressure, rho_bar=rho_bar)
    return state


def wave_stable_dt(w):
    """Accuracy-motivated step: resolve the fastest retained phase rotation."""
    g = w.grid
    kmax2 = float(np.max(g.k2))
    return 0.5 / (w.hbar / 2.0 * kmax2 + 1.0)


def crosscheck_qhd(psi0, pressure, T, dt_wave=None, dt_hydro=None, n_report=8):
    """Evolve the same data with both descriptions and report the gaps.

    The hydrodynamic side runs undamped with the matching quantum capillarity
    law; the wave side runs the split-step scheme.  Needs non-vacuum data so
    the strong-form solver is valid.  Returns a dict with the L2 gaps in rho
    and J and the energy gap at sampled times; on a vacuum breach the report
    is partial and carries the breach time.
    """
    g = psi0.grid
    rho0, j0 = madelung_transform(psi0)
    if float(np.min(rho0.values)) < 0.1:
        raise ValueError("cross-check needs |psi0|^2 bounded below by 0.1")
    cap = CapillarityLaw.quantum(psi0.hbar)

    hydro0 = dynamics.FluidState(0.0, rho0, j0)
    if dt_hydro is None:
        dt_hydro = dynamics.stable_dt(hydro0, cap)
    n_steps = max(n_report, int(np.ceil(T / dt_hydro - 1e-12)))
    n_steps = int(np.ceil(n_steps / n_report)) * n_report
    dt_hydro = T / n_steps
    if dt_wave is None:
        dt_wave = dt_hydro
    sub = max(1, int(np.ceil(dt_hydro / dt_wave - 1e-12)))
    dt_wave = dt_hydro / sub

    rho_bar = rho0.mean()
    report = {"t": [], "L2_rho_gap": [], "L2_J_gap": [], "energy_gap": [], "breach_t": None}
    wave = psi0.copy()
    hydro = hydro0.copy()
    stride = n_steps // n_report
    try:
        for k in range(n_steps):
            hydro = dynamics.step(hydro, dt_hydro, pressure, cap, alpha=0.0, rho_bar=rho_bar)
            for _ in range(sub):
                wave = split_step(wave, dt_wave, pressure, rho_bar=rho_bar)
            if (k + 1) % stride == 0:
                rho_w, j_w = madelung_transform(wave)
                report["t"].append(hydro.t)
                report["L2_rho_gap"].append(l2_norm(g, hydro.rho.values - rho_w.values))
                report["L2_J_gap"].append(
                    l2_norm(g, hydro.momentum.components - j_w.components)
                )
                e_h = dynamics.energy(hydro, pressure, cap, rho_bar=rho_bar)
                e_w = dynamics.energy(
                    dynamics.FluidState(wave.t, rho_w, j_w), pressure, cap, rho_bar=rho_bar
                )
                report["energy_gap"].append(abs(e_h - e_w))
    except dynamics.VacuumBreach as breach:
        report["breach_t"] = breach.state.t
    return report
