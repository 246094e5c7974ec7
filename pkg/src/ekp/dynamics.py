"""Damped compressible flow with capillary stress and self-consistent potential.

State is the pair (rho, J): density and momentum.  The momentum balance is

    dJ/dt + div(J (x) J / rho) + grad p(rho) = -alpha J + capillary force + rho grad V,
    lap V = rho - rho_bar,

advanced by classical four-stage Runge-Kutta with the potential re-solved at
every stage.  Mass is conserved to round-off because the continuity update is
a spectral divergence.  Integration aborts (never clips) when the density
reaches the vacuum floor, and a growth detector aborts on instability.
"""

import numpy as np

from . import korteweg
from .fields import (
    ScalarField,
    VectorField,
    dealias,
    gradient,
    integrate,
    solve_poisson,
    sym_index_pairs,
    SymTensorField,
    tensor_divergence,
)

VACUUM_FLOOR = 1e-8
GROWTH_ABORT_FACTOR = 10.0
CFL_SAFETY = 0.25


class VacuumBreach(RuntimeError):
    """Density reached the vacuum floor; carries the offending state."""

    def __init__(self, state, message):
        super().__init__(message)
        self.state = state


class InstabilityAbort(RuntimeError):
    """A field norm grew by more than the abort factor in one step."""

    def __init__(self, state, message):
        super().__init__(message)
        self.state = state


class FluidState:
    def __init__(self, t, rho, momentum):
        if rho.grid != momentum.grid:
            raise ValueError("rho and momentum live on different grids")
        self.t = float(t)
        self.rho = rho
        self.momentum = momentum

    @property
    def grid(self):
        return self.rho.grid

    def mass(self):
        return self.rho.integral()

    def copy(self):
        return FluidState(self.t, self.rho.copy(), self.momentum.copy())


class Trajectory:
    """Time-ordered states plus per-step scalar diagnostics."""

    def __init__(self, dt, pressure, capillarity, alpha):
        self.dt = float(dt)
        self.pressure = pressure
        self.capillarity = capillarity
        self.alpha = float(alpha)
        self.states = []
        self.times = []
        self.energies = []
        self.kinetic_rates = []  # integral |J|^2 / rho at each recorded time
        self.masses = []

        self.stored_indices = []

    def record(self, state, keep_state=True):
        if keep_state:
            self.stored_indices.append(len(self.times))
            self.states.append(state)
        self.times.append(state.t)
        self.energies.append(energy(state, self.pressure, self.capillarity))
        g = state.grid
        with np.errstate(divide="ignore", invalid="ignore"):
            kin = np.where(
                state.rho.values > 0,
                state.momentum.norm_squared() / np.where(state.rho.values > 0, state.rho.values, 1.0),
                0.0,
            )
        self.kinetic_rates.append(integrate(g, kin))
        self.masses.append(state.mass())

    def dissipation_integral(self, upto=None):
        """Trapezoidal integral of alpha * |J|^2/rho over recorded times."""
        n = len(self.times) if upto is None else upto + 1
        if n < 2:
            return 0.0
        t = np.asarray(self.times[:n])
        k = self.alpha * np.asarray(self.kinetic_rates[:n])
        return float(np.trapezoid(k, t))


def _check_positive(state):
    m = float(np.min(state.rho.values))
    if m <= VACUUM_FLOOR:
        loc = np.unravel_index(int(np.argmin(state.rho.values)), state.rho.values.shape)
        raise VacuumBreach(
            state,
            f"vacuum breach at t={state.t:.6g}: min rho {m:.3e} at {tuple(int(i) for i in loc)}",
        )


def momentum_rhs(state, pressure, capillarity, alpha, rho_bar=None):
    """Right-hand side of the momentum balance at the given state."""
    _check_positive(state)
    g = state.grid
    rho = state.rho
    J = state.momentum
    if rho_bar is None:
        rho_bar = rho.mean()

    # convective tensor J (x) J / rho, dealiased componentwise
    pairs = sym_index_pairs(g.dim)
    comps = np.empty((len(pairs),) + g.shape)
    inv_rho = 1.0 / rho.values
    for idx, (i, j) in enumerate(pairs):
        comps[idx] = dealias(g, J.components[i] * J.components[j] * inv_rho)
    convective = tensor_divergence(SymTensorField(g, comps, check=False))

    grad_p = gradient(ScalarField(g, pressure.p(rho.values), check=False))

    if capillarity.kind == "zero":
        cap = np.zeros((g.dim,) + g.shape)
    else:
        cap = korteweg.korteweg_force(rho, capillarity).components

    potential = solve_poisson(ScalarField(g, rho.values - rho_bar, check=False))
    grad_v = gradient(potential)
    field_force = np.stack([dealias(g, rho.values * c) for c in grad_v.components])

    rhs = -convective.components - grad_p.components - alpha * J.components + cap + field_force
    return VectorField(g, rhs, check=False)


def continuity_rhs(state):
    g = state.grid
    out = np.zeros(g.shape, dtype=complex)
    for axis in range(g.dim):
        out += g.ik[axis] * np.fft.fftn(state.momentum.components[axis])
    return -np.real(np.fft.ifftn(out))


def stable_dt(state, capillarity):
    """Dispersive step bound: dt = c * dx^2 / (max chi / min rho + |J/rho| dx + 1)."""
    g = state.grid
    dx = g.spacing
    min_rho = float(np.min(state.rho.values))
    if capillarity.kind == "zero":
        chi_max = 0.0
    else:
        chi_max = float(np.max(capillarity.chi(state.rho.values)))
    with np.errstate(divide="ignore"):
        vel = float(np.max(np.sqrt(state.momentum.norm_squared()) / state.rho.values))
    return CFL_SAFETY * dx**2 / (chi_max / max(min_rho, 1e-12) + vel * dx + 1.0)


def step(state, dt, pressure, capillarity, alpha, rho_bar=None):
    """One classical RK4 step of the coupled density/momentum system."""
    if rho_bar is None:
        rho_bar = state.rho.mean()
    g = state.grid

    def rhs(t, rho_vals, j_vals):
        s = FluidState(
            t,
            ScalarField(g, rho_vals, check=False),
            VectorField(g, j_vals, check=False),
        )
        drho = continuity_rhs(s)
        dj = momentum_rhs(s, pressure, capillarity, alpha, rho_bar=rho_bar).components
        return drho, dj

    r0, j0 = state.rho.values, state.momentum.components
    k1r, k1j = rhs(state.t, r0, j0)
    k2r, k2j = rhs(state.t + dt / 2, r0 + dt / 2 * k1r, j0 + dt / 2 * k1j)
    k3r, k3j = rhs(state.t + dt / 2, r0 + dt / 2 * k2r, j0 + dt / 2 * k2j)
    k4r, k4j = rhs(state.t + dt, r0 + dt * k3r, j0 + dt * k3j)

    new_rho = r0 + dt / 6 * (k1r + 2 * k2r + 2 * k3r + k4r)
    new_j = j0 + dt / 6 * (k1j + 2 * k2j + 2 * k3j + k4j)
    out = FluidState(
        state.t + dt,
        ScalarField(g, new_rho, check=False),
        VectorField(g, new_j, check=False),
    )

    old_norm = float(np.max(np.abs(j0))) + float(np.max(np.abs(r0)))
    new_norm = float(np.max(np.abs(new_j))) + float(np.max(np.abs(new_rho)))
    if not np.isfinite(new_norm) or new_norm > GROWTH_ABORT_FACTOR * (old_norm + 1.0):
        raise InstabilityAbort(
            out, f"norm grew {old_norm:.3e} -> {new_norm:.3e} in one step at t={out.t:.6g}"
        )
    _check_positive(out)
    return out


def energy(state, pressure, capillarity, rho_bar=None):
    """Total energy: kinetic + internal + capillary + electrostatic."""
    _check_positive(state)
    g = state.grid
    rho = state.rho.values
    kinetic = 0.5 * state.momentum.norm_squared() / rho
    internal = pressure.internal_energy(rho)
    if capillarity.kind == "zero":
        capillary = 0.0
    else:
        gs = gradient(ScalarField(g, np.sqrt(rho), check=False))
        capillary = 2.0 * capillarity.chi(rho) * gs.norm_squared()
    if rho_bar is None:
        rho_bar = state.rho.mean()
    potential = solve_poisson(ScalarField(g, rho - rho_bar, check=False))
    electro = 0.5 * gradient(potential).norm_squared()
    return integrate(g, kinetic + internal + capillary + electro)


def simulate(initial, T, pressure, capillarity, alpha=1.0, dt=None, store_every=1):
    """Advance the state to time T, recording diagnostics every step.

    States are kept every `store_every` steps (diagnostics always per step);
    the final state is always recorded.
    """
    if dt is None:
        dt = stable_dt(initial, capillarity)
    n_steps = max(1, int(np.ceil(T / dt - 1e-12)))
    dt = T / n_steps
    traj = Trajectory(dt, pressure, capillarity, alpha)
    rho_bar = initial.rho.mean()
    state = initial.copy()
    traj.record(state)
    for k in range(n_steps):
        state = step(state, dt, pressure, capillarity, alpha, rho_bar=rho_bar)
        keep = (k + 1) % store_every == 0 or k == n_steps - 1
        traj.record(state, keep_state=keep)
    return traj


def energy_balance_residual(traj):
    """Max over recorded times of |E(t) + dissipation(0..t) - E(0)| / E(0)."""
    e0 = traj.energies[0]
    scale = abs(e0) + 1e-30
    times = np.asarray(traj.times)
    kin = traj.alpha * np.asarray(traj.kinetic_rates)
    increments = 0.5 * (kin[1:] + kin[:-1]) * np.diff(times)
    dissip = np.concatenate([[0.0], np.cumsum(increments)])
    return float(np.max(np.abs(np.asarray(traj.energies) + dissip - e0))) / scale
