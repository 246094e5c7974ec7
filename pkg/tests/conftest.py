import numpy as np
import pytest

from ekp.fields import Grid


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)


@pytest.fixture
def grid1d():
    return Grid(1, 64)


@pytest.fixture
def grid2d():
    return Grid(2, 64)


@pytest.fixture
def grid3d():
    return Grid(3, 16)


def band_limited(grid, rng, kmax, n_modes=15):
    """Random real field with hard mode cutoff (no envelope); for operator tests."""
    n = grid.n
    idx = np.fft.fftfreq(n, 1.0 / n).astype(int)
    vh = np.zeros(grid.shape, dtype=complex)
    for _ in range(n_modes):
        kv = rng.integers(-kmax, kmax + 1, grid.dim)
        amp = rng.normal() + 1j * rng.normal()
        pos = tuple(int(np.where(idx == kv[d])[0][0]) for d in range(grid.dim))
        neg = tuple(int(np.where(idx == -kv[d])[0][0]) for d in range(grid.dim))
        vh[pos] += amp
        vh[neg] += np.conj(amp)
    return np.real(np.fft.ifftn(vh))
