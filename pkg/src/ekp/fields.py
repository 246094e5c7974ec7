"""Periodic grids, sampled fields, and spectral calculus on the flat torus.

All differential operators are exact Fourier-mode operations.  Odd-order
derivatives (gradient, divergence) zero the Nyquist mode, the standard
convention for real fields; the Laplacian and the Poisson solve use the full
|k|^2 multiplier so they invert each other exactly.  Nonlinear products go
through :func:`dealias` (2/3 rule) before they feed back into derivatives.
"""

import numpy as np


class Grid:
    """Uniform collocation grid on the dim-torus of the given period.

    points_per_axis must be even (real-to-complex transforms and the 2/3
    dealiasing rule both require it).
    """

    def __init__(self, dim, points_per_axis, period=1.0):
        if dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {dim}")
        n = int(points_per_axis)
        if n < 8 or n % 2 != 0:
            raise ValueError(f"points_per_axis must be even and >= 8, got {points_per_axis}")
        if not period > 0:
            raise ValueError(f"period must be positive, got {period}")
        self.dim = dim
        self.n = n
        self.period = float(period)
        self.spacing = self.period / n
        self.shape = (n,) * dim
        self.cell_volume = self.spacing**dim

        # angular wavenumbers, one broadcastable array per axis
        k1 = 2.0 * np.pi * np.fft.fftfreq(n, d=self.spacing)
        self.k = []
        self.ik = []  # derivative multiplier, Nyquist zeroed
        for axis in range(dim):
            shape = [1] * dim
            shape[axis] = n
            ka = k1.reshape(shape)
            self.k.append(ka)
            ik = 1j * ka.copy()
            ik.reshape(-1)[n // 2] = 0.0  # Nyquist
            self.ik.append(ik.reshape(shape))
        self.k2 = sum(ka**2 for ka in self.k)  # full |k|^2, Nyquist kept
        # |k'|^2 built from the Nyquist-zeroed multipliers (Helmholtz/elliptic solves)
        self.k2_prime = sum((ik.imag) ** 2 for ik in self.ik)

        inv = np.zeros_like(self.k2)
        nz = self.k2 > 0
        inv[nz] = 1.0 / self.k2[nz]
        self.inv_k2 = inv

        mask = np.ones(self.shape, dtype=bool)
        cutoff = n // 3
        modes = np.fft.fftfreq(n, d=1.0 / n)  # integer mode numbers
        for axis in range(dim):
            shape = [1] * dim
            shape[axis] = n
            mask &= np.abs(modes.reshape(shape)) <= cutoff
        self.dealias_mask = mask

    def axes(self):
        """Coordinate arrays (one per axis, broadcastable to the grid shape)."""
        x1 = np.arange(self.n) * self.spacing
        out = []
        for axis in range(self.dim):
            shape = [1] * self.dim
            shape[axis] = self.n
            out.append(x1.reshape(shape))
        return out

    def meshgrid(self):
        x1 = np.arange(self.n) * self.spacing
        return np.meshgrid(*([x1] * self.dim), indexing="ij")

    def __eq__(self, other):
        return (
            isinstance(other, Grid)
            and self.dim == other.dim
            and self.n == other.n
            and self.period == other.period
        )

    def __repr__(self):
        return f"Grid(dim={self.dim}, n={self.n}, period={self.period})"


def _check_finite(values, what):
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(np.asarray(values)))[0]
        raise ValueError(f"{what} has non-finite value at index {tuple(int(i) for i in bad)}")


class ScalarField:
    def __init__(self, grid, values, check=True):
        values = np.asarray(values, dtype=float)
        if values.shape != grid.shape:
            raise ValueError(f"scalar values shape {values.shape} != grid shape {grid.shape}")
        if check:
            _check_finite(values, "scalar field")
        self.grid = grid
        self.values = values

    def mean(self):
        return float(np.mean(self.values))

    def integral(self):
        return float(np.sum(self.values) * self.grid.cell_volume)

    def copy(self):
        return ScalarField(self.grid, self.values.copy(), check=False)


class VectorField:
    def __init__(self, grid, components, check=True):
        comps = np.asarray(components, dtype=float)
        if comps.shape != (grid.dim,) + grid.shape:
            raise ValueError(
                f"vector components shape {comps.shape} != {(grid.dim,) + grid.shape}"
            )
        if check:
            _check_finite(comps, "vector field")
        self.grid = grid
        self.components = comps

    def mean(self):
        axes = tuple(range(1, self.grid.dim + 1))
        return np.mean(self.components, axis=axes)

    def integral(self):
        axes = tuple(range(1, self.grid.dim + 1))
        return np.sum(self.components, axis=axes) * self.grid.cell_volume

    def norm_squared(self):
        """Pointwise |v|^2."""
        return np.sum(self.components**2, axis=0)

    def copy(self):
        return VectorField(self.grid, self.components.copy(), check=False)


def sym_index_pairs(dim):
    """Upper-triangle (i, j) pairs in storage order."""
    return [(i, j) for i in range(dim) for j in range(i, dim)]


class SymTensorField:
    """Symmetric tensor with single storage per unordered index pair."""

    def __init__(self, grid, components, traceless=False, check=True):
        comps = np.asarray(components, dtype=float)
        ncomp = grid.dim * (grid.dim + 1) // 2
        if comps.shape != (ncomp,) + grid.shape:
            raise ValueError(f"tensor components shape {comps.shape} != {(ncomp,) + grid.shape}")
        if check:
            _check_finite(comps, "tensor field")
        self.grid = grid
        self.components = comps
        self.traceless = bool(traceless)
        self._pairs = sym_index_pairs(grid.dim)
        self._lookup = {}
        for idx, (i, j) in enumerate(self._pairs):
            self._lookup[(i, j)] = idx
            self._lookup[(j, i)] = idx
        if self.traceless and check:
            tr = self.trace()
            scale = float(np.max(np.abs(comps))) + 1.0
            if float(np.max(np.abs(tr))) > 1e-12 * scale:
                raise ValueError("traceless tensor has nonzero trace")

    def component(self, i, j):
        return self.components[self._lookup[(i, j)]]

    def trace(self):
        return sum(self.component(i, i) for i in range(self.grid.dim))

    def copy(self):
        return SymTensorField(self.grid, self.components.copy(), self.traceless, check=False)


# ------------------------------------------------------------------
# transforms and dealiasing
# ------------------------------------------------------------------

def fftn(values):
    return np.fft.fftn(values)


def ifftn(values_hat):
    return np.real(np.fft.ifftn(values_hat))


def dealias(grid, values):
    """Zero the top third of modes per axis (2/3 rule for quadratic products)."""
    vh = np.fft.fftn(values)
    vh *= grid.dealias_mask
    return np.real(np.fft.ifftn(vh))


def dealiased_product(grid, a, b):
    """Pointwise product with the 2/3-rule filter applied afterwards."""
    return dealias(grid, a * b)


# ------------------------------------------------------------------
# differential operators
# ------------------------------------------------------------------

def gradient(f):
    """Spectral gradient of a scalar field; each component has zero mean."""
    g = f.grid
    fh = np.fft.fftn(f.values)
    comps = np.empty((g.dim,) + g.shape)
    for axis in range(g.dim):
        comps[axis] = np.real(np.fft.ifftn(g.ik[axis] * fh))
    return VectorField(g, comps, check=False)


def gradient_values(grid, values):
    """Gradient of a raw (possibly complex) array; returns an array stack."""
    fh = np.fft.fftn(values)
    out = np.empty((grid.dim,) + grid.shape, dtype=complex)
    for axis in range(grid.dim):
        out[axis] = np.fft.ifftn(grid.ik[axis] * fh)
    if np.isrealobj(values):
        return np.real(out)
    return out


def divergence(v):
    g = v.grid
    out = np.zeros(g.shape, dtype=complex)
    for axis in range(g.dim):
        out += g.ik[axis] * np.fft.fftn(v.components[axis])
    return ScalarField(g, np.real(np.fft.ifftn(out)), check=False)


def laplacian(f):
    g = f.grid
    fh = np.fft.fftn(f.values)
    return ScalarField(g, np.real(np.fft.ifftn(-g.k2 * fh)), check=False)


def tensor_divergence(T):
    """Row-wise divergence (contraction over the second index) of a symmetric tensor."""
    g = T.grid
    comps = np.empty((g.dim,) + g.shape)
    for i in range(g.dim):
        acc = np.zeros(g.shape, dtype=complex)
        for j in range(g.dim):
            acc += g.ik[j] * np.fft.fftn(T.component(i, j))
        comps[i] = np.real(np.fft.ifftn(acc))
    return VectorField(g, comps, check=False)


# ------------------------------------------------------------------
# projections and elliptic solves
# ------------------------------------------------------------------

def helmholtz_project(v):
    """Split v into a divergence-free part and a zero-mean gradient potential.

    The projector is applied mode by mode with the derivative wavenumbers, so
    v == solenoidal + gradient(potential) holds exactly and re-projection is
    the identity.  The zero mode stays in the solenoidal part, so means are
    preserved.
    """
    g = v.grid
    hats = [np.fft.fftn(c) for c in v.components]
    div_hat = np.zeros(g.shape, dtype=complex)
    for axis in range(g.dim):
        div_hat += g.ik[axis] * hats[axis]
    inv = np.zeros(g.shape)
    nz = g.k2_prime > 0
    inv[nz] = 1.0 / g.k2_prime[nz]
    # laplacian(M) = div v  mode by mode:  -|k'|^2 M_hat = div_hat
    m_hat = -div_hat * inv
    sol = np.empty((g.dim,) + g.shape)
    for axis in range(g.dim):
        sol[axis] = np.real(np.fft.ifftn(hats[axis] - g.ik[axis] * m_hat))
    potential = ScalarField(g, np.real(np.fft.ifftn(m_hat)), check=False)
    return VectorField(g, sol, check=False), potential


def solve_poisson(rhs):
    """Zero-mean solution of  laplacian(u) = rhs  on the torus.

    The right-hand side must already have (numerically) zero mean; the caller
    subtracts the reference density.
    """
    g = rhs.grid
    m = rhs.mean()
    scale = float(np.max(np.abs(rhs.values))) + 1.0
    if abs(m) > 1e-12 * scale:
        raise ValueError(f"poisson right-hand side must have zero mean, got mean={m:.3e}")
    fh = np.fft.fftn(rhs.values)
    uh = -fh * g.inv_k2
    uh.reshape(-1)[0] = 0.0
    return ScalarField(g, np.real(np.fft.ifftn(uh)), check=False)


def solve_symmetric_div(f):
    """Traceless symmetric T = grad w + grad^T w - (2/3) div w I with div T = -f.

    Solves the constant-coefficient elliptic system for w mode by mode and
    assembles the deviatoric symmetric gradient.  Only solvable when f has
    zero mean (the zero mode of a divergence vanishes).  The 2/3 deviatoric
    coefficient is three-dimensional; other dims are rejected.
    """
    g = f.grid
    if g.dim != 3:
        raise ValueError("the traceless elliptic system is defined for dim = 3 grids")
    mean = f.mean()
    scale = float(np.max(np.abs(f.components))) + 1.0
    if np.max(np.abs(mean)) > 1e-12 * scale:
        raise ValueError(
            f"elliptic system needs a zero-mean right-hand side, got mean={mean}"
        )
    hats = np.stack([np.fft.fftn(c) for c in f.components])
    kvec = [g.ik[axis].imag for axis in range(g.dim)]  # real k', Nyquist zeroed
    k2 = g.k2_prime
    inv = np.zeros(g.shape)
    nz = k2 > 0
    inv[nz] = 1.0 / k2[nz]
    # (k^2 I + (1/3) k k^T) w_hat = f_hat  =>  w_hat = inv*(f - k (k.f)/(4 k^2))
    kdotf = np.zeros(g.shape, dtype=complex)
    for axis in range(g.dim):
        kdotf += kvec[axis] * hats[axis]
    w_hat = np.empty_like(hats)
    for axis in range(g.dim):
        w_hat[axis] = inv * (hats[axis] - kvec[axis] * kdotf * inv / 4.0)
    # deviatoric symmetric gradient of w, assembled spectrally
    div_w_hat = np.zeros(g.shape, dtype=complex)
    for axis in range(g.dim):
        div_w_hat += 1j * kvec[axis] * w_hat[axis]
    pairs = sym_index_pairs(g.dim)
    comps = np.empty((len(pairs),) + g.shape)
    for idx, (i, j) in enumerate(pairs):
        t_hat = 1j * kvec[j] * w_hat[i] + 1j * kvec[i] * w_hat[j]
        if i == j:
            t_hat = t_hat - (2.0 / 3.0) * div_w_hat
        comps[idx] = np.real(np.fft.ifftn(t_hat))
    return SymTensorField(g, comps, traceless=True, check=False)


# ------------------------------------------------------------------
# quadrature helpers
# ------------------------------------------------------------------

def integrate(grid, values):
    """Grid quadrature (trapezoidal = spectral on the torus)."""
    return float(np.sum(values) * grid.cell_volume)


def l2_norm(grid, values):
    return float(np.sqrt(np.sum(np.asarray(values) ** 2) * grid.cell_volume))


def max_norm(values):
    return float(np.max(np.abs(values)))
