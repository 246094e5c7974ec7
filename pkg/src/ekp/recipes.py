"""Named analytic initial-data profiles and seeded random band-limited fields."""

import numpy as np

from .fields import Grid, ScalarField, VectorField
from .dynamics import FluidState
from .madelung import WaveState


def random_band_limited(grid, rng, kmax=None, decay=2.3):
    """Zero-mean random field, modes up to kmax with an exponential envelope.

    The envelope keeps the spectral tail of composed nonlinearities (1/rho,
    sqrt rho) below the dealiasing cutoff at desk resolutions.
    """
    n = grid.n
    if kmax is None:
        kmax = n // 4
    idx = np.fft.fftfreq(n, 1.0 / n).astype(int)
    grids = np.meshgrid(*([idx] * grid.dim), indexing="ij")
    kk = np.sqrt(sum(gg.astype(float) ** 2 for gg in grids))
    mask = np.ones(grid.shape, dtype=bool)
    for gg in grids:
        mask &= np.abs(gg) <= kmax
    mask[(0,) * grid.dim] = False
    coeffs = (rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape)) * np.exp(-decay * kk)
    v = np.real(np.fft.ifftn(coeffs * mask))
    peak = float(np.max(np.abs(v)))
    return v / peak if peak > 0 else v


def random_density(grid, rng, base=1.0, amplitude=0.3, kmax=None, decay=2.3):
    """Positive random density: base + amplitude * normalized band-limited field."""
    if not 0 <= amplitude < base:
        raise ValueError("amplitude must keep the density positive")
    return base + amplitude * random_band_limited(grid, rng, kmax=kmax, decay=decay)


def fluid_profile(grid, recipe, params, rng):
    """Build a FluidState from a named recipe.

    Recipes: steady, cosine, shear, gaussian-like, random.
    """
    x = grid.meshgrid()
    two_pi = 2.0 * np.pi / grid.period
    if recipe == "steady":
        rho = np.full(grid.shape, params.get("rho_base", 1.0))
        J = np.zeros((grid.dim,) + grid.shape)
    elif recipe == "cosine":
        base = params.get("rho_base", 1.0)
        amp = params.get("rho_amplitude", 0.1)
        mode = int(params.get("mode", 1))
        rho = np.full(grid.shape, base)
        prof = np.ones(grid.shape)
        for a in range(grid.dim):
            prof = prof * np.cos(two_pi * mode * x[a])
        rho = base + amp * prof
        jamp = params.get("j_amplitude", 0.0)
        J = np.zeros((grid.dim,) + grid.shape)
        if jamp:
            J[0] = jamp * np.sin(two_pi * mode * x[0])
    elif recipe == "shear":
        # constant density, divergence-free momentum: mean drift + one shear mode
        rho = np.full(grid.shape, params.get("rho_base", 1.0))
        J = np.zeros((grid.dim,) + grid.shape)
        J[0] += params.get("j_mean", 0.5)
        if grid.dim >= 2:
            J[1] += params.get("j_amplitude", 0.25) * np.sin(
                two_pi * int(params.get("mode", 1)) * x[0]
            )
    elif recipe == "gaussian-like":
        base = params.get("rho_base", 1.0)
        amp = params.get("rho_amplitude", 0.3)
        width = params.get("width", 8.0)
        prof = np.ones(grid.shape)
        for a in range(grid.dim):
            prof = prof * np.exp(width * (np.cos(two_pi * x[a]) - 1.0) / 2.0)
        rho = base + amp * prof
        J = np.zeros((grid.dim,) + grid.shape)
    elif recipe == "random":
        rho = random_density(
            grid,
            rng,
            base=params.get("rho_base", 1.0),
            amplitude=params.get("rho_amplitude", 0.25),
            kmax=int(params["kmax"]) if "kmax" in params else None,
            decay=params.get("decay", 2.3),
        )
        jamp = params.get("j_amplitude", 0.0)
        J = np.zeros((grid.dim,) + grid.shape)
        for a in range(grid.dim):
            if jamp:
                J[a] = jamp * random_band_limited(grid, rng)
    else:
        raise ValueError(f"unknown fluid recipe {recipe!r}")
    return FluidState(0.0, ScalarField(grid, rho), VectorField(grid, J))


def wave_profile(grid, recipe, params, rng, hbar=1.0):
    """Build a WaveState: modulated or random non-vacuum wave functions."""
    x = grid.meshgrid()
    two_pi = 2.0 * np.pi / grid.period
    if recipe == "modulated":
        base = params.get("rho_base", 1.0)
        amp = params.get("rho_amplitude", 0.1)
        phase_amp = params.get("phase_amplitude", 0.1)
        mode = int(params.get("mode", 1))
        mag = base + amp * np.cos(two_pi * mode * x[0])
        phase = phase_amp * np.sin(two_pi * mode * x[0])
        psi = mag * np.exp(1j * phase)
    elif recipe == "random":
        mag = random_density(
            grid, rng, base=params.get("rho_base", 1.0),
            amplitude=params.get("rho_amplitude", 0.2),
        )
        phase = params.get("phase_amplitude", 0.1) * random_band_limited(grid, rng)
        psi = np.sqrt(mag) * np.exp(1j * phase)
    else:
        raise ValueError(f"unknown wave recipe {recipe!r}")
    return WaveState(0.0, grid, psi, hbar=hbar)
