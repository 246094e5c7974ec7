import numpy as np
import pytest

from ekp import dynamics as D
from ekp import fields as F
from ekp.laws import CapillarityLaw, PressureLaw


def make_state(grid, rho, J=None):
    if J is None:
        J = np.zeros((grid.dim,) + grid.shape)
    return D.FluidState(0.0, F.ScalarField(grid, rho), F.VectorField(grid, J))


def test_steady_state_rhs_and_step(grid1d):
    st = make_state(grid1d, np.full(grid1d.shape, 1.4))
    p, c = PressureLaw.power(2.0), CapillarityLaw.constant_K(1.0)
    assert np.max(np.abs(D.momentum_rhs(st, p, c, 1.0).components)) == 0.0
    out = D.step(st, 1e-3, p, c, 1.0)
    assert np.max(np.abs(out.rho.values - st.rho.values)) < 1e-14
    assert np.max(np.abs(out.momentum.components)) < 1e-14


def test_pure_damping(grid1d):
    st = make_state(grid1d, np.ones(grid1d.shape), np.full((1,) + grid1d.shape, 0.6))
    rhs = D.momentum_rhs(st, PressureLaw.zero(), CapillarityLaw.constant_K(1.0), 1.0)
    assert np.max(np.abs(rhs.components + 0.6)) < 1e-14


def test_momentum_rhs_assembly_oracle(grid1d, rng):
    from ekp import korteweg
    from ekp.recipes import random_density, random_band_limited

    rho_vals = random_density(grid1d, rng, amplitude=0.2)
    j_vals = 0.1 * random_band_limited(grid1d, rng)[None]
    st = make_state(grid1d, rho_vals, j_vals)
    p, c, alpha = PressureLaw.power(2.0), CapillarityLaw.constant_K(1.0), 0.7
    rhs = D.momentum_rhs(st, p, c, alpha)

    g = grid1d
    conv = F.tensor_divergence(
        F.SymTensorField(g, F.dealias(g, j_vals[0] * j_vals[0] / rho_vals)[None], check=False)
    ).components
    grad_p = F.gradient(F.ScalarField(g, p.p(rho_vals))).components
    cap = korteweg.korteweg_force(F.ScalarField(g, rho_vals), c).components
    V = F.solve_poisson(F.ScalarField(g, rho_vals - rho_vals.mean()))
    field = F.dealias(g, rho_vals * F.gradient(V).components[0])[None]
    expected = -conv - grad_p - alpha * j_vals + cap + field
    assert np.max(np.abs(rhs.components - expected)) < 1e-12 * (np.max(np.abs(expected)) + 1)


def test_exact_shear_transport():
    # constant density, single shear mode: J2(t) = A sin(2 pi (x - U t)) exactly
    g = F.Grid(2, 16)
    x, _ = g.meshgrid()
    U, A = 0.5, 0.25
    J = np.zeros((2,) + g.shape)
    J[0] = U
    J[1] = A * np.sin(2 * np.pi * x)
    st = make_state(g, np.ones(g.shape), J)
    p, c = PressureLaw.zero(), CapillarityLaw.zero()
    T = 0.25
    traj = D.simulate(st, T, p, c, alpha=0.0, dt=T / 200, store_every=10**9)
    end = traj.states[-1]
    exact = A * np.sin(2 * np.pi * (x - U * T))
    assert np.max(np.abs(end.momentum.components[1] - exact)) < 1e-8
    assert np.max(np.abs(end.rho.values - 1.0)) < 1e-12


def test_rk4_self_convergence_order():
    g = F.Grid(2, 16)
    x, _ = g.meshgrid()
    J = np.zeros((2,) + g.shape)
    J[0] = 0.5
    J[1] = 0.25 * np.sin(2 * np.pi * x)
    st = make_state(g, np.ones(g.shape), J)
    p, c = PressureLaw.zero(), CapillarityLaw.zero()
    T = 0.1
    dt0 = T / 10

    def end_state(dt):
        return D.simulate(st, T, p, c, alpha=0.0, dt=dt, store_every=10**9).states[-1]

    ref = end_state(dt0 / 8)
    e1 = np.max(np.abs(end_state(dt0).momentum.components - ref.momentum.components))
    e2 = np.max(np.abs(end_state(dt0 / 2).momentum.components - ref.momentum.components))
    ratio = e1 / e2
    assert 16 * 0.8 < ratio < 16 * 1.2


def test_mass_conservation_per_step(grid1d, rng):
    from ekp.recipes import random_density, random_band_limited

    st = make_state(grid1d, random_density(grid1d, rng, amplitude=0.2),
                    0.1 * random_band_limited(grid1d, rng)[None])
    p, c = PressureLaw.power(2.0), CapillarityLaw.constant_K(1.0)
    traj = D.simulate(st, 0.002, p, c, alpha=1.0, store_every=10**9)
    m0 = traj.masses[0]
    assert max(abs(m - m0) for m in traj.masses) < 1e-12 * abs(m0)


def test_mean_momentum_exponential_decay():
    # rho constant, divergence-free J: mean momentum decays exactly at rate alpha
    g = F.Grid(2, 16)
    x, _ = g.meshgrid()
    J = np.zeros((2,) + g.shape)
    J[0] = 0.4
    J[1] = 0.2 * np.sin(2 * np.pi * x)
    st = make_state(g, np.full(g.shape, 1.1), J)
    alpha = 1.0
    traj = D.simulate(st, 0.5, PressureLaw.zero(), CapillarityLaw.zero(),
                      alpha=alpha, dt=1e-3, store_every=10**9)
    end = traj.states[-1]
    mean0 = st.momentum.mean()
    meanT = end.momentum.mean()
    assert np.max(np.abs(meanT - mean0 * np.exp(-alpha * 0.5))) < 1e-8


def test_energy_trivial_cases(grid1d):
    st = make_state(grid1d, np.ones(grid1d.shape))
    assert D.energy(st, PressureLaw.zero(), CapillarityLaw.constant_K(1.0)) == pytest.approx(0.0, abs=1e-15)
    st2 = make_state(grid1d, np.ones(grid1d.shape), np.ones((1,) + grid1d.shape))
    assert D.energy(st2, PressureLaw.zero(), CapillarityLaw.zero()) == pytest.approx(0.5)


def test_energy_capillary_two_forms(grid1d, rng):
    # K/2 |grad rho|^2 vs 2 chi |grad sqrt rho|^2 on smooth positive density
    from ekp.recipes import random_density

    rho_vals = random_density(grid1d, rng, amplitude=0.3)
    law = CapillarityLaw.constant_K(0.8)
    grad_rho = F.gradient(F.ScalarField(grid1d, rho_vals)).norm_squared()
    gs = F.gradient(F.ScalarField(grid1d, np.sqrt(rho_vals))).norm_squared()
    form1 = F.integrate(grid1d, 0.5 * law.K(rho_vals) * grad_rho)
    form2 = F.integrate(grid1d, 2.0 * law.chi(rho_vals) * gs)
    assert abs(form1 - form2) < 1e-10 * (abs(form1) + 1)


def test_energy_balance_short_run(grid1d):
    (x,) = grid1d.meshgrid()
    st = make_state(grid1d, 1 + 0.1 * np.cos(2 * np.pi * x),
                    (0.05 * np.sin(2 * np.pi * x))[None])
    p, c = PressureLaw.power(2.0), CapillarityLaw.constant_K(1.0)
    traj = D.simulate(st, 0.01, p, c, alpha=1.0, store_every=10**9)
    assert D.energy_balance_residual(traj) < 1e-6
    traj0 = D.simulate(st, 0.01, p, c, alpha=0.0, store_every=10**9)
    e0 = traj0.energies[0]
    assert max(abs(e - e0) for e in traj0.energies) / abs(e0) < 1e-8


def test_vacuum_breach_aborts_with_state(grid1d):
    vals = np.full(grid1d.shape, 1.0)
    vals[7] = 5e-9
    st = make_state(grid1d, vals)
    with pytest.raises(D.VacuumBreach) as info:
        D.momentum_rhs(st, PressureLaw.zero(), CapillarityLaw.constant_K(1.0), 1.0)
    assert info.value.state is st


def test_instability_detector(grid1d):
    (x,) = grid1d.meshgrid()
    st = make_state(grid1d, 1 + 0.5 * np.cos(2 * np.pi * x), (2.0 * np.sin(2 * np.pi * x))[None])
    p, c = PressureLaw.power(2.0), CapillarityLaw.constant_K(1.0)
    # grossly unstable step size
    with pytest.raises((D.InstabilityAbort, D.VacuumBreach)):
        state = st
        for _ in range(50):
            state = D.step(state, 0.05, p, c, 1.0)


def test_stable_dt_formula(grid1d):
    st = make_state(grid1d, np.full(grid1d.shape, 0.5), np.full((1,) + grid1d.shape, 0.25))
    cap = CapillarityLaw.constant_chi(0.3)
    dx = grid1d.spacing
    expected = 0.25 * dx**2 / (0.3 / 0.5 + 0.5 * dx + 1.0)
    assert D.stable_dt(st, cap) == pytest.approx(expected)
