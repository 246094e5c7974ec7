"""Density extension by transport, the mean-drift fixed point, and the
reformulation into concise-form subsolution data.

Given initial data rho0 = r0^2, U0 the construction

  1. extends rho0 over [0, T] by conservative transport with velocity
     U0 - Z(t), Z spatially uniform,
  2. picks Z by damped Picard iteration so that the damped momentum mean
     exp(t) * integral(rho (U0 - Z)) stays equal to integral(rho0 U0),
  3. rewrites the momentum balance in concise divergence form, producing the
     time series (scaled_density, gradient_flux, effective_pressure, stress,
     energy) against which subsolution candidates are measured.

The elliptic/eigenvalue machinery consuming this data is 3-D; the transport
and fixed-point parts work in any dimension.
"""

import numpy as np

from . import dynamics
from .fields import (
    ScalarField,
    VectorField,
    dealias,
    gradient,
    helmholtz_project,
    integrate,
    laplacian,
    solve_poisson,
    sym_index_pairs,
)

PICARD_THETA = 0.5
PICARD_MAX_ITER = 200
PICARD_ITERATE_TOL = 1e-10
RESIDUAL_TOL = 1e-8
VACUUM_FRACTION_LIMIT = 1e-3


class InitialData:
    """rho0 = sqrt_rho0^2 and the initial velocity U0 (J0 = rho0 U0)."""

    def __init__(self, grid, sqrt_rho0=None, rho0=None, U0=None):
        self.grid = grid
        if sqrt_rho0 is not None:
            sqrt_rho0 = np.asarray(sqrt_rho0, dtype=float)
            self.rho0 = ScalarField(grid, sqrt_rho0**2)
        elif rho0 is not None:
            rho0 = np.asarray(rho0, dtype=float)
            if np.any(rho0 < 0):
                raise ValueError("rho0 must be non-negative")
            self.rho0 = ScalarField(grid, rho0)
        else:
            raise ValueError("need sqrt_rho0 or rho0")
        if U0 is None:
            U0 = np.zeros((grid.dim,) + grid.shape)
        self.U0 = VectorField(grid, np.asarray(U0, dtype=float))

    def momentum0(self):
        comps = self.rho0.values[None, :] * self.U0.components
        return VectorField(self.grid, comps, check=False)


def _transport_rhs(grid, rho_vals, u0_comps, z_vec):
    """-div(rho (U0 - Z)) in conservative spectral form."""
    out = np.zeros(grid.shape, dtype=complex)
    for axis in range(grid.dim):
        flux = dealias(grid, rho_vals * u0_comps[axis]) - z_vec[axis] * rho_vals
        out += grid.ik[axis] * np.fft.fftn(flux)
    return -np.real(np.fft.ifftn(out))


def transport_density(data, mean_drift, T, dt):
    """Solve d rho/dt + div(rho (U0 - Z)) = 0 with RK4; returns (times, rho series).

    mean_drift: array (n_steps+1, dim) sampled on the uniform step lattice,
    or None for Z = 0.  Z is interpolated at half steps by averaging, which
    keeps the scheme fourth order for smooth Z.
    """
    g = data.grid
    n_steps = max(1, int(round(T / dt)))
    dt = T / n_steps
    times = np.linspace(0.0, T, n_steps + 1)
    if mean_drift is None:
        mean_drift = np.zeros((n_steps + 1, g.dim))
    z = np.asarray(mean_drift, dtype=float)
    if z.shape != (n_steps + 1, g.dim):
        raise ValueError(f"mean drift shape {z.shape} != {(n_steps + 1, g.dim)}")

    series = np.empty((n_steps + 1,) + g.shape)
    series[0] = data.rho0.values
    u0 = data.U0.components
    rho = series[0].copy()
    ref_norm = float(np.max(np.abs(rho))) + 1.0
    for k in range(n_steps):
        z0 = z[k]
        z1 = 0.5 * (z[k] + z[k + 1])
        z2 = z[k + 1]
        k1 = _transport_rhs(g, rho, u0, z0)
        k2 = _transport_rhs(g, rho + dt / 2 * k1, u0, z1)
        k3 = _transport_rhs(g, rho + dt / 2 * k2, u0, z1)
        k4 = _transport_rhs(g, rho + dt * k3, u0, z2)
        rho = rho + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(rho)) or np.max(np.abs(rho)) > dynamics.GROWTH_ABORT_FACTOR * ref_norm:
            raise dynamics.InstabilityAbort(None, f"transport unstable at step {k + 1}")
        series[k + 1] = rho
    return times, series


def _moment_series(grid, rho_series, u0_comps):
    """integral(rho U0) at each stored time; shape (nt, dim)."""
    nt = rho_series.shape[0]
    out = np.empty((nt, grid.dim))
    for axis in range(grid.dim):
        out[:, axis] = np.sum(rho_series * u0_comps[axis][None], axis=tuple(range(1, grid.dim + 1)))
    return out * grid.cell_volume


class MeanDriftResult:
    def __init__(self, times, drift, residual, residual_history, converged, rho_series):
        self.times = times
        self.drift = drift
        self.residual = residual
        self.residual_history = residual_history
        self.converged = converged
        self.rho_series = rho_series


def solve_mean_drift(data, T, dt):
    """Damped Picard iteration for the uniform drift Z(t).

    Fixed point of  Z -> (integral rho0)^(-1) (integral(rho U0) - e^(-t) integral(rho0 U0))
    where rho solves the transport equation driven by the current Z.  The
    residual certificate is sup_t |e^t integral(rho (U0 - Z)) - integral(J0)|
    normalized by |integral J0| + 1.  Non-convergence is reported, not raised:
    existence is guaranteed, contraction is not.
    """
    g = data.grid
    mass0 = data.rho0.integral()
    if not mass0 > 0:
        raise ValueError("total initial mass must be positive")
    j0_mean = data.momentum0().integral()
    n_steps = max(1, int(round(T / dt)))
    dt = T / n_steps
    times = np.linspace(0.0, T, n_steps + 1)

    z = np.zeros((n_steps + 1, g.dim))
    history = []
    converged = False
    rho_series = None
    for _ in range(PICARD_MAX_ITER):
        _, rho_series = transport_density(data, z, T, dt)
        moment = _moment_series(g, rho_series, data.U0.components)
        t_map = (moment - np.exp(-times)[:, None] * j0_mean[None, :]) / mass0
        z_next = (1.0 - PICARD_THETA) * z + PICARD_THETA * t_map
        # residual of the defining identity under the *current* rho/z pair
        mass_t = np.sum(rho_series, axis=tuple(range(1, g.dim + 1))) * g.cell_volume
        flux_mean = moment - z * mass_t[:, None]
        residual = float(
            np.max(np.abs(np.exp(times)[:, None] * flux_mean - j0_mean[None, :]))
        ) / (float(np.max(np.abs(j0_mean))) + 1.0)
        history.append(residual)
        step_size = float(np.max(np.abs(z_next - z)))
        z = z_next
        if residual < RESIDUAL_TOL and step_size < PICARD_ITERATE_TOL:
            converged = True
            break
    return MeanDriftResult(times, z, history[-1], history, converged, rho_series)


def momentum_series(data, result):
    """Extended momentum rho (U0 - Z) on the stored lattice; shape (nt, dim, ...)."""
    g = data.grid
    nt = len(result.times)
    out = np.empty((nt, g.dim) + g.shape)
    for k in range(nt):
        for axis in range(g.dim):
            out[k, axis] = dealias(
                g, result.rho_series[k] * data.U0.components[axis]
            ) - result.drift[k, axis] * result.rho_series[k]
    return out


def time_derivative(series, dt):
    """Fourth-order differencing along axis 0 (one-sided at the ends)."""
    series = np.asarray(series)
    nt = series.shape[0]
    if nt < 5:
        raise ValueError("need at least 5 samples for fourth-order differencing")
    out = np.empty_like(series)
    out[2:-2] = (series[:-4] - 8 * series[1:-3] + 8 * series[3:-1] - series[4:]) / (12 * dt)
    # one-sided fourth-order stencils at the four boundary samples
    c0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / (12 * dt)
    c1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / (12 * dt)
    out[0] = np.tensordot(c0, series[:5], axes=(0, 0))
    out[1] = np.tensordot(c1, series[:5], axes=(0, 0))
    out[-1] = -np.tensordot(c0, series[-5:][::-1], axes=(0, 0))
    out[-2] = -np.tensordot(c1, series[-5:][::-1], axes=(0, 0))
    return out


def verify_extension(data, result, pressure, capillarity):
    """Report the conservation facts the construction relies on.

    (a) damped momentum-mean identity residual (same as the Picard certificate),
    (b) decay of the solenoidal momentum mean: d/dt m + m = 0,
    (c) sup over stored times of the pointwise energy density (finite-energy check).
    """
    g = data.grid
    times = result.times
    dt = times[1] - times[0]
    jt = momentum_series(data, result)
    j0_mean = data.momentum0().integral()

    mean_j = np.sum(jt, axis=tuple(range(2, g.dim + 2))) * g.cell_volume  # (nt, dim)
    res_a = float(np.max(np.abs(np.exp(times)[:, None] * mean_j - j0_mean[None, :]))) / (
        float(np.max(np.abs(j0_mean))) + 1.0
    )

    # the projection preserves means, so the solenoidal mean is mean_j itself;
    # check the decay ODE by differencing
    dmean = time_derivative(mean_j, dt)
    res_b = float(np.max(np.abs(dmean + mean_j))) / (float(np.max(np.abs(mean_j))) + 1.0)

    sup_energy = 0.0
    rho_bar = data.rho0.mean()
    for k in range(len(times)):
        rho = result.rho_series[k]
        pos = rho > 0
        kinetic = np.zeros(g.shape)
        kinetic[pos] = 0.5 * np.sum(jt[k] ** 2, axis=0)[pos] / rho[pos]
        internal = pressure.internal_energy(np.maximum(rho, 0.0))
        if capillarity.kind == "zero":
            capillary = 0.0
        else:
            gs = gradient(ScalarField(g, np.sqrt(np.maximum(rho, 0.0)), check=False))
            capillary = 2.0 * capillarity.chi(np.maximum(rho, 1e-300)) * gs.norm_squared()
        V = solve_poisson(ScalarField(g, rho - np.mean(rho), check=False))
        electro = 0.5 * gradient(V).norm_squared()
        sup_energy = max(sup_energy, float(np.max(kinetic + internal + capillary + electro)))
    return {
        "momentum_mean_residual": res_a,
        "solenoidal_decay_residual": res_b,
        "sup_energy_density": sup_energy,
        "rho_bar": rho_bar,
    }


class SubsolutionData:
    """Concise-form coefficients on a uniform time lattice.

    scaled_density r = e^t rho, gradient_flux h = e^t grad M (M the Helmholtz
    potential of the extended momentum), effective_pressure and the traceless
    stress tensor from the reformulation, and energy = offset(t) - 1.5 *
    effective_pressure.
    """

    def __init__(self, grid, times, scaled_density, gradient_flux, effective_pressure,
                 stress, energy_offset, energy):
        self.grid = grid
        self.times = times
        self.scaled_density = scaled_density          # (nt, *shape)
        self.gradient_flux = gradient_flux            # (nt, dim, *shape)
        self.effective_pressure = effective_pressure  # (nt, *shape)
        self.stress = stress                          # (nt, ncomp, *shape)
        self.energy_offset = energy_offset            # (nt,)
        self.energy = energy                          # (nt, *shape)

    @property
    def dt(self):
        return self.times[1] - self.times[0]


def default_energy_offset(times, effective_pressure, kinetic_density):
    """offset(t) = e^{-2t} * M with M = max(3 sup|Pi| + sup kinetic, 1)."""
    m = max(
        2.0 * 1.5 * float(np.max(np.abs(effective_pressure)))
        + float(np.max(kinetic_density)),
        1.0,
    )
    return np.exp(-2.0 * times) * m, m


def reformulate(data, result, pressure, capillarity, energy_offset=None):
    """Build the concise-form time series from the extended density/momentum.

    energy_offset: optional callable t -> offset; default is the decaying
    exponential sized from sup|effective_pressure| and the kinetic density so
    the initial candidate enters with a positive margin.
    """
    g = data.grid
    times = result.times
    nt = len(times)
    dt = times[1] - times[0]
    rho_series = result.rho_series

    vac_fraction = float(np.mean(rho_series <= dynamics.VACUUM_FLOOR))
    if vac_fraction > VACUUM_FRACTION_LIMIT:
        raise ValueError(
            f"vacuum on {vac_fraction:.2%} of grid points exceeds the {VACUUM_FRACTION_LIMIT:.1%} limit"
        )

    jt = momentum_series(data, result)
    rho_bar = data.rho0.mean()

    flux_potential = np.empty((nt,) + g.shape)
    for k in range(nt):
        _, pot = helmholtz_project(VectorField(g, jt[k], check=False))
        flux_potential[k] = pot.values
    dt_potential = time_derivative(flux_potential, dt)

    et = np.exp(times)
    scaled_density = et.reshape((-1,) + (1,) * g.dim) * rho_series

    gradient_flux = np.empty((nt, g.dim) + g.shape)
    eff_pressure = np.empty((nt,) + g.shape)
    pairs = sym_index_pairs(g.dim)
    stress = np.empty((nt, len(pairs)) + g.shape)
    kinetic_density = np.empty((nt,) + g.shape)

    for k in range(nt):
        rho = rho_series[k]
        rho_pos = np.maximum(rho, 1e-300)
        grad_m = gradient(ScalarField(g, flux_potential[k], check=False)).components
        gradient_flux[k] = et[k] * grad_m

        chi = capillarity.chi(rho_pos)
        chi_p = capillarity.chi_prime(rho_pos)
        rho_f = ScalarField(g, rho, check=False)
        grad_rho = gradient(rho_f)
        lap_rho = laplacian(rho_f)
        gs = gradient(ScalarField(g, np.sqrt(np.maximum(rho, 0.0)), check=False))
        gs_sq = dealias(g, gs.norm_squared())
        V = solve_poisson(ScalarField(g, rho - np.mean(rho), check=False))
        grad_v = gradient(V)
        gv_sq = dealias(g, grad_v.norm_squared())

        eff_pressure[k] = et[k] * (
            pressure.p(rho_pos)
            + dt_potential[k]
            + flux_potential[k]
            - dealias(g, chi * lap_rho.values)
            - 0.5 * dealias(g, chi_p * grad_rho.norm_squared())
            + (4.0 / 3.0) * dealias(g, chi * gs_sq)
            - rho_bar * V.values
            + gv_sq / 6.0
        )

        # capillary and electrostatic dyads, filtered once so the isotropic
        # parts cancel the diagonal exactly and the trace vanishes to rounding
        cap_dyad = {}
        field_dyad = {}
        for (i, j) in pairs:
            cap_dyad[(i, j)] = dealias(g, chi * gs.components[i] * gs.components[j])
            field_dyad[(i, j)] = dealias(g, grad_v.components[i] * grad_v.components[j])
        cap_trace = sum(cap_dyad[(i, i)] for i in range(g.dim))
        field_trace = sum(field_dyad[(i, i)] for i in range(g.dim))
        for idx, (i, j) in enumerate(pairs):
            comp = cap_dyad[(i, j)] - 0.25 * field_dyad[(i, j)]
            if i == j:
                comp = comp - cap_trace / 3.0 + field_trace / 12.0
            stress[k, idx] = 4.0 * et[k] * comp

        pos = rho > dynamics.VACUUM_FLOOR
        kin = np.zeros(g.shape)
        kin[pos] = 0.5 * et[k] * np.sum(jt[k] ** 2, axis=0)[pos] / rho[pos]
        kinetic_density[k] = kin

    if energy_offset is None:
        offset, _ = default_energy_offset(times, eff_pressure, kinetic_density)
    else:
        offset = np.array([energy_offset(t) for t in times])
    energy = offset.reshape((-1,) + (1,) * g.dim) - 1.5 * eff_pressure

    return SubsolutionData(
        g, times, scaled_density, gradient_flux, eff_pressure, stress, offset, energy
    )
