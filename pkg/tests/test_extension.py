import numpy as np
import pytest

from ekp import extension as E
from ekp import fields as F
from ekp.laws import CapillarityLaw, PressureLaw
from ekp.recipes import random_band_limited, random_density


def test_zero_velocity_keeps_density(grid1d):
    (x,) = grid1d.meshgrid()
    data = E.InitialData(grid1d, rho0=1 + 0.3 * np.cos(2 * np.pi * x))
    times, series = E.transport_density(data, None, T=0.5, dt=0.01)
    assert np.max(np.abs(series - series[0][None])) < 1e-12


def test_constant_advection_shift_oracle(grid1d):
    (x,) = grid1d.meshgrid()
    rho0 = 1 + 0.3 * np.cos(2 * np.pi * x)
    u = 0.7
    data = E.InitialData(grid1d, rho0=rho0, U0=np.full((1,) + grid1d.shape, u))
    T = 0.5
    times, series = E.transport_density(data, None, T=T, dt=0.002)
    k = 2 * np.pi * np.fft.fftfreq(grid1d.n, d=grid1d.spacing)
    exact = np.real(np.fft.ifft(np.fft.fft(rho0) * np.exp(-1j * k * u * T)))
    assert np.max(np.abs(series[-1] - exact)) < 1e-9


def test_max_density_invariant_under_uniform_drift(grid1d):
    # constant U0: the modulus spectrum is drift-invariant, so undoing the
    # accumulated phase shift must recover the initial profile in max norm
    (x,) = grid1d.meshgrid()
    rho0 = 1 + 0.25 * np.cos(2 * np.pi * x) + 0.1 * np.sin(4 * np.pi * x)
    u = 0.4
    data = E.InitialData(grid1d, rho0=rho0, U0=np.full((1,) + grid1d.shape, u))
    T, dt = 0.5, 0.002
    n_steps = int(round(T / dt))
    times = np.linspace(0, T, n_steps + 1)
    drift = np.stack([0.3 * (1 - np.exp(-times))], axis=1)  # some smooth Z(t)
    _, series = E.transport_density(data, drift, T=T, dt=dt)
    displacement = u * T - np.trapezoid(drift[:, 0], times)
    k = 2 * np.pi * np.fft.fftfreq(grid1d.n, d=grid1d.spacing)
    unshifted = np.real(np.fft.ifft(np.fft.fft(series[-1]) * np.exp(1j * k * displacement)))
    assert np.max(np.abs(unshifted - rho0)) < 1e-8
    assert abs(np.max(unshifted) - np.max(rho0)) < 1e-8


def test_mass_conservation(grid2d, rng):
    rho0 = random_density(grid2d, rng, amplitude=0.3)
    U0 = np.stack([0.2 * random_band_limited(grid2d, rng) for _ in range(2)])
    data = E.InitialData(grid2d, rho0=rho0, U0=U0)
    times, series = E.transport_density(data, None, T=1.0, dt=0.005)
    masses = series.sum(axis=(1, 2)) * grid2d.cell_volume
    assert np.max(np.abs(masses - masses[0])) < 1e-10 * abs(masses[0])


def test_constant_data_closed_form(grid1d):
    data = E.InitialData(grid1d, rho0=np.full(grid1d.shape, 1.5),
                         U0=np.full((1,) + grid1d.shape, 0.8))
    res = E.solve_mean_drift(data, T=0.5, dt=0.01)
    assert res.converged
    exact = 0.8 * (1 - np.exp(-res.times))
    assert np.max(np.abs(res.drift[:, 0] - exact)) < 1e-8
    assert res.drift[0, 0] == 0.0
    assert res.residual < 1e-8


def test_zero_velocity_gives_zero_drift(grid1d):
    (x,) = grid1d.meshgrid()
    data = E.InitialData(grid1d, rho0=1 + 0.3 * np.cos(2 * np.pi * x))
    res = E.solve_mean_drift(data, T=0.5, dt=0.01)
    assert np.max(np.abs(res.drift)) == 0.0


def test_random_data_fixed_point(grid1d, rng):
    rho0 = random_density(grid1d, rng, amplitude=0.3)
    U0 = (0.2 + 0.3 * random_band_limited(grid1d, rng))[None]
    data = E.InitialData(grid1d, rho0=rho0, U0=U0)
    res = E.solve_mean_drift(data, T=0.5, dt=0.005)
    assert res.converged
    assert res.residual < 1e-8
    assert len(res.residual_history) <= 200


def test_verify_extension_residuals(grid1d, rng):
    rho0 = random_density(grid1d, rng, amplitude=0.25)
    U0 = (0.15 + 0.2 * random_band_limited(grid1d, rng))[None]
    data = E.InitialData(grid1d, rho0=rho0, U0=U0)
    res = E.solve_mean_drift(data, T=0.5, dt=0.005)
    rep = E.verify_extension(data, res, PressureLaw.power(2.0), CapillarityLaw.constant_K(1.0))
    assert rep["momentum_mean_residual"] < 1e-8
    assert rep["solenoidal_decay_residual"] < 1e-6
    assert np.isfinite(rep["sup_energy_density"])


def test_solenoidal_mean_decay_constant_data(grid3d):
    # constant data: the projected momentum mean is the full mean and decays as e^-t
    data = E.InitialData(grid3d, rho0=np.full(grid3d.shape, 1.2),
                         U0=np.stack([np.full(grid3d.shape, 0.5),
                                      np.zeros(grid3d.shape), np.zeros(grid3d.shape)]))
    res = E.solve_mean_drift(data, T=0.3, dt=0.01)
    jt = E.momentum_series(data, res)
    mean_j = jt.sum(axis=(2, 3, 4))[:, 0] * grid3d.cell_volume
    j0 = 1.2 * 0.5
    assert np.max(np.abs(mean_j - j0 * np.exp(-res.times))) < 1e-8


def test_time_derivative_fourth_order():
    def worst(dt, nt):
        t = np.arange(nt) * dt
        series = np.sin(3 * t) + t**2
        exact = 3 * np.cos(3 * t) + 2 * t
        return np.max(np.abs(E.time_derivative(series, dt) - exact))

    e1 = worst(0.01, 41)
    e2 = worst(0.005, 81)
    assert e1 < 1e-6
    assert e1 / e2 > 12  # fourth order incl. the one-sided boundary stencils


def test_reformulate_no_flow(grid3d):
    (x, y, z) = grid3d.meshgrid()
    data = E.InitialData(grid3d, rho0=1 + 0.1 * np.cos(2 * np.pi * x))
    res = E.solve_mean_drift(data, T=0.2, dt=0.01)
    sub = E.reformulate(data, res, PressureLaw.zero(), CapillarityLaw.constant_K(1.0))
    assert np.max(np.abs(sub.gradient_flux)) < 1e-12
    # effective pressure is static up to the e^t factor
    scaled = sub.effective_pressure / np.exp(sub.times).reshape(-1, 1, 1, 1)
    assert np.max(np.abs(scaled - scaled[0][None])) < 1e-9
    trace = sub.stress[:, 0] + sub.stress[:, 3] + sub.stress[:, 5]
    assert np.max(np.abs(trace)) <= 1e-10 * (np.max(np.abs(sub.stress)) + 1)


def test_reformulate_trace_and_energy(grid3d, rng):
    (x, y, z) = grid3d.meshgrid()
    rho0 = 1 + 0.1 * np.cos(2 * np.pi * x) * np.cos(2 * np.pi * y)
    U0 = np.stack([0.1 + 0.1 * np.sin(2 * np.pi * y),
                   0.1 * np.sin(2 * np.pi * z),
                   0.05 * np.cos(2 * np.pi * x)])
    data = E.InitialData(grid3d, rho0=rho0, U0=U0)
    res = E.solve_mean_drift(data, T=0.2, dt=0.01)
    sub = E.reformulate(data, res, PressureLaw.power(2.0, 0.5), CapillarityLaw.constant_K(1.0))
    trace = sub.stress[:, 0] + sub.stress[:, 3] + sub.stress[:, 5]
    assert np.max(np.abs(trace)) <= 1e-10 * (np.max(np.abs(sub.stress)) + 1)
    assert np.all(sub.energy > 0)
    assert np.max(np.abs(sub.energy + 1.5 * sub.effective_pressure
                         - sub.energy_offset.reshape(-1, 1, 1, 1))) < 1e-12


def test_electrostatic_divergence_identity(grid3d, rng):
    # rho grad V = div(gv x gv - |gv|^2/3 I) + grad(rho_bar V - |gv|^2/6)
    rho_vals = random_density(grid3d, rng, amplitude=0.2, kmax=3)
    rho_bar = float(np.mean(rho_vals))
    V = F.solve_poisson(F.ScalarField(grid3d, rho_vals - rho_bar))
    gv = F.gradient(V).components
    lhs = np.stack([F.dealias(grid3d, rho_vals * gv[a]) for a in range(3)])
    pairs = F.sym_index_pairs(3)
    dyad = {p: F.dealias(grid3d, gv[p[0]] * gv[p[1]]) for p in pairs}
    trace = sum(dyad[(i, i)] for i in range(3))
    comps = np.stack([dyad[(i, j)] - (trace / 3.0 if i == j else 0.0) for (i, j) in pairs])
    part1 = F.tensor_divergence(F.SymTensorField(grid3d, comps, check=False)).components
    part2 = F.gradient(F.ScalarField(grid3d, rho_bar * V.values - trace / 6.0, check=False)).components
    assert np.max(np.abs(lhs - part1 - part2)) < 1e-8 * (np.max(np.abs(lhs)) + 1e-30)


def test_reformulate_rejects_widespread_vacuum(grid1d):
    (x,) = grid1d.meshgrid()
    rho0 = np.maximum(np.cos(2 * np.pi * x), 0.0)  # vacuum on half the domain
    data = E.InitialData(grid1d, rho0=rho0)
    res = E.solve_mean_drift(data, T=0.05, dt=0.005)
    with pytest.raises(ValueError, match="vacuum"):
        E.reformulate(data, res, PressureLaw.zero(), CapillarityLaw.constant_chi(0.25))
