"""Subsolution geometry: maximal-eigenvalue criterion, margin fields, the
kinetic-defect functional, the initial candidate, and verification of
compactly supported oscillatory perturbations.

A candidate is a pair (velocity v, traceless symmetric relaxed_stress U) with
div v = 0 and dv/dt + div U = 0.  Against the reformulated data it must keep

    1.5 * lambda_max[ (v + h)(x)(v + h)/r + H - U ]  <  energy

pointwise on the positivity set of the scaled density r (h = gradient_flux,
H = stress).  Oscillatory blocks are compactly supported pairs satisfying the
same linear constraints; they are verified, never constructed from the
abstract increment lemma, and each block carries its own residual
certificate.  All of the eigenvalue algebra here is three-dimensional.
"""

import numpy as np

from . import extension
from .fields import (
    Grid,
    ScalarField,
    VectorField,
    helmholtz_project,
    integrate,
    solve_symmetric_div,
    sym_index_pairs,
)

DENSITY_FLOOR = 1e-8
_SYM3_PAIRS = sym_index_pairs(3)


# ------------------------------------------------------------------
# maximal eigenvalue, closed form
# ------------------------------------------------------------------

def _lambda_max_sym3(a11, a22, a33, a12, a13, a23):
    """Largest eigenvalue of symmetric 3x3 matrices, vectorized.

    Trigonometric solution of the characteristic cubic on the deviatoric
    part, with a guard for (near-)isotropic matrices.
    """
    q = (a11 + a22 + a33) / 3.0
    b11, b22, b33 = a11 - q, a22 - q, a33 - q
    p2 = b11**2 + b22**2 + b33**2 + 2.0 * (a12**2 + a13**2 + a23**2)
    scale = np.maximum.reduce(
        [np.abs(a11), np.abs(a22), np.abs(a33), np.abs(a12), np.abs(a13), np.abs(a23)]
    )
    p = np.sqrt(p2 / 6.0)
    safe = p > 1e-14 * (scale + 1.0)
    p_safe = np.where(safe, p, 1.0)
    c11, c22, c33 = b11 / p_safe, b22 / p_safe, b33 / p_safe
    c12, c13, c23 = a12 / p_safe, a13 / p_safe, a23 / p_safe
    half_det = 0.5 * (
        c11 * (c22 * c33 - c23**2)
        - c12 * (c12 * c33 - c23 * c13)
        + c13 * (c12 * c23 - c22 * c13)
    )
    phi = np.arccos(np.clip(half_det, -1.0, 1.0)) / 3.0
    lam = q + 2.0 * p * np.cos(phi)
    return np.where(safe, lam, q)


def lambda_max(matrix):
    """Largest eigenvalue of a symmetric matrix (d <= 3), closed form.

    Accepts a single (d, d) matrix or a batch (..., d, d).
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim < 2 or a.shape[-1] != a.shape[-2]:
        raise ValueError(f"need square matrices, got shape {a.shape}")
    d = a.shape[-1]
    if d == 1:
        out = a[..., 0, 0]
    elif d == 2:
        mean = 0.5 * (a[..., 0, 0] + a[..., 1, 1])
        out = mean + np.hypot(0.5 * (a[..., 0, 0] - a[..., 1, 1]), a[..., 0, 1])
    elif d == 3:
        out = _lambda_max_sym3(
            a[..., 0, 0], a[..., 1, 1], a[..., 2, 2], a[..., 0, 1], a[..., 0, 2], a[..., 1, 2]
        )
    else:
        raise ValueError(f"closed-form eigenvalues implemented for d <= 3, got d = {d}")
    if out.ndim == 0:
        return float(out)
    return out


def _lambda_max_packed(comps):
    """lambda_max for packed symmetric components, shape (6, ...), 3-D order."""
    return _lambda_max_sym3(comps[0], comps[3], comps[5], comps[1], comps[2], comps[4])


# ------------------------------------------------------------------
# candidates
# ------------------------------------------------------------------

class CandidateSubsolution:
    """velocity (nt, 3, *shape) with div v = 0, traceless relaxed_stress
    (nt, 6, *shape) with dv/dt + div(relaxed_stress) = 0."""

    def __init__(self, grid, times, velocity, relaxed_stress):
        if grid.dim != 3:
            raise ValueError("subsolution candidates are three-dimensional")
        self.grid = grid
        self.times = np.asarray(times, dtype=float)
        self.velocity = np.asarray(velocity, dtype=float)
        self.relaxed_stress = np.asarray(relaxed_stress, dtype=float)
        nt = len(self.times)
        if self.velocity.shape != (nt, 3) + grid.shape:
            raise ValueError(f"velocity shape {self.velocity.shape} is wrong")
        if self.relaxed_stress.shape != (nt, 6) + grid.shape:
            raise ValueError(f"relaxed stress shape {self.relaxed_stress.shape} is wrong")

    @property
    def dt(self):
        return self.times[1] - self.times[0]


def constraint_residuals(grid, times, velocity, stress_series):
    """Max-norm residuals of div v = 0 and dv/dt + div T = 0, scale-normalized."""
    nt = len(times)
    div_inf = 0.0
    vel_scale = float(np.max(np.abs(velocity))) + 1e-30
    for k in range(nt):
        div = np.zeros(grid.shape, dtype=complex)
        for axis in range(3):
            div += grid.ik[axis] * np.fft.fftn(velocity[k, axis])
        div_inf = max(div_inf, float(np.max(np.abs(np.real(np.fft.ifftn(div))))))
    dt = times[1] - times[0]
    dv = extension.time_derivative(velocity, dt)
    lin_inf = 0.0
    lin_scale = float(np.max(np.abs(dv))) + 1e-30
    lookup = {}
    for idx, (i, j) in enumerate(_SYM3_PAIRS):
        lookup[(i, j)] = idx
        lookup[(j, i)] = idx
    for k in range(nt):
        for i in range(3):
            acc = np.zeros(grid.shape, dtype=complex)
            for j in range(3):
                acc += grid.ik[j] * np.fft.fftn(stress_series[k, lookup[(i, j)]])
            resid = dv[k, i] + np.real(np.fft.ifftn(acc))
            lin_inf = max(lin_inf, float(np.max(np.abs(resid))))
    return {
        "div_velocity": div_inf / vel_scale,
        "linear_constraint": lin_inf / lin_scale,
    }


# ------------------------------------------------------------------
# margin and defect functional
# ------------------------------------------------------------------

def _margin_matrix_packed(candidate, data, k):
    """Packed components of (v+h)(x)(v+h)/r + H - U at time index k."""
    g = candidate.velocity[k] + data.gradient_flux[k]
    r = data.scaled_density[k]
    pos = r > DENSITY_FLOOR
    inv_r = np.zeros_like(r)
    inv_r[pos] = 1.0 / r[pos]
    comps = np.empty((6,) + candidate.grid.shape)
    for idx, (i, j) in enumerate(_SYM3_PAIRS):
        comps[idx] = g[i] * g[j] * inv_r + data.stress[k, idx] - candidate.relaxed_stress[k, idx]
    return comps, pos


def subsolution_margin(candidate, data):
    """energy - 1.5 lambda_max[...] on the positivity set; NaN off it.

    Returns the (nt, *shape) margin field; the candidate is admissible iff
    the minimum over the positivity set is strictly positive.
    """
    nt = len(candidate.times)
    out = np.full((nt,) + candidate.grid.shape, np.nan)
    for k in range(nt):
        comps, pos = _margin_matrix_packed(candidate, data, k)
        lam = _lambda_max_packed(comps)
        out[k][pos] = data.energy[k][pos] - 1.5 * lam[pos]
    return out


def min_margin(candidate, data):
    m = subsolution_margin(candidate, data)
    return float(np.nanmin(m))


def kinetic_defect(candidate, data):
    """integral over the positivity set of  0.5 |v+h|^2 / r - energy.

    Non-positive for admissible candidates: the maximal eigenvalue of
    g (x) g / r + (traceless) dominates |g|^2/(3r), so 1.5 lambda_max < energy
    forces the integrand below zero pointwise.
    """
    g = candidate.grid
    nt = len(candidate.times)
    slices = np.empty(nt)
    for k in range(nt):
        gk = candidate.velocity[k] + data.gradient_flux[k]
        r = data.scaled_density[k]
        pos = r > DENSITY_FLOOR
        val = np.zeros(g.shape)
        val[pos] = 0.5 * np.sum(gk**2, axis=0)[pos] / r[pos] - data.energy[k][pos]
        slices[k] = integrate(g, val)
    return float(np.trapezoid(slices, candidate.times))


# ------------------------------------------------------------------
# the initial candidate
# ------------------------------------------------------------------

def initial_subsolution(data, momentum_series):
    """Candidate from the extended momentum: v = e^t * (solenoidal part).

    The relaxed stress solves the traceless elliptic system with right-hand
    side -dv/dt, which needs dv/dt to have zero spatial mean; that mean is
    controlled by the decay of the solenoidal momentum mean and is removed
    here after checking it against the decay-relation tolerance.

    Returns (candidate, report) with the pointwise kinetic bound
    sup |v+h|^2 / r recorded in the report.
    """
    g = data.grid
    if g.dim != 3:
        raise ValueError("the initial subsolution construction is three-dimensional")
    times = data.times
    nt = len(times)
    velocity = np.empty((nt, 3) + g.shape)
    for k in range(nt):
        sol, _ = helmholtz_project(VectorField(g, momentum_series[k], check=False))
        velocity[k] = np.exp(times[k]) * sol.components
    dv = extension.time_derivative(velocity, times[1] - times[0])

    scale = float(np.max(np.abs(dv))) + 1.0
    stress = np.empty((nt, 6) + g.shape)
    report = {"max_mean_dv": 0.0}
    for k in range(nt):
        mean = np.mean(dv[k].reshape(3, -1), axis=1)
        worst = float(np.max(np.abs(mean)))
        report["max_mean_dv"] = max(report["max_mean_dv"], worst / scale)
        if worst > 1e-6 * scale:
            raise ValueError(
                "dv/dt mean violates the solenoidal decay relation "
                f"({worst:.3e} vs scale {scale:.3e}); extension is inconsistent"
            )
        # div(stress) = -f for f = dv/dt, so the linear constraint closes
        rhs = VectorField(g, dv[k] - mean.reshape(3, 1, 1, 1), check=False)
        stress[k] = solve_symmetric_div(rhs).components
    candidate = CandidateSubsolution(g, times, velocity, stress)

    kinetic_sup = 0.0
    for k in range(nt):
        gk = velocity[k] + data.gradient_flux[k]
        r = data.scaled_density[k]
        pos = r > DENSITY_FLOOR
        if np.any(pos):
            kinetic_sup = max(
                kinetic_sup, float(np.max(np.sum(gk**2, axis=0)[pos] / r[pos]))
            )
    report["kinetic_sup"] = kinetic_sup
    return candidate, report


# ------------------------------------------------------------------
# oscillatory blocks
# ------------------------------------------------------------------

class OscillatoryBlock:
    """Compactly supported (velocity, traceless stress) pair on its own lattice.

    box: ((t_lo, x_lo...), (t_hi, x_hi...)) in space-time, dim + 1 coordinates.
    certificate: measured residuals {linear_constraint, div_velocity, support}.
    """

    def __init__(self, grid, times, velocity, stress, box, certificate=None):
        self.grid = grid
        self.times = np.asarray(times, dtype=float)
        self.velocity = np.asarray(velocity, dtype=float)
        self.stress = np.asarray(stress, dtype=float)
        lo, hi = box
        self.box = (tuple(float(v) for v in lo), tuple(float(v) for v in hi))
        self.certificate = dict(certificate or {})

    @property
    def dt(self):
        return self.times[1] - self.times[0]

    def support_violation(self):
        """Largest |value| outside the declared box, relative to the inside peak."""
        lo, hi = self.box
        t_in = (self.times >= lo[0]) & (self.times <= hi[0])
        axes = self.grid.axes()
        space_in = np.ones(self.grid.shape, dtype=bool)
        for a in range(self.grid.dim):
            space_in &= (axes[a] >= lo[1 + a]) & (axes[a] <= hi[1 + a])
        mask = t_in.reshape((-1,) + (1,) * self.grid.dim) & space_in[None]
        peak = max(
            float(np.max(np.abs(self.velocity))), float(np.max(np.abs(self.stress))), 1e-300
        )
        out_v = np.abs(self.velocity) * ~mask[:, None]
        out_s = np.abs(self.stress) * ~mask[:, None]
        return max(float(np.max(out_v)), float(np.max(out_s))) / peak


_BUMP_POWER = 8


def _bump(u):
    """Polynomial bump (1 - u^2)^8 on (-1, 1), exactly zero outside.

    C^7 smoothness is enough for the fourth-order time differencing used by
    the verifiers; an infinitely smooth bump would have far larger high
    derivatives and a worse measured certificate at desk-scale sampling.
    """
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    out[inside] = (1.0 - u[inside] ** 2) ** _BUMP_POWER
    return out


def _bump_prime(u):
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = -2.0 * _BUMP_POWER * ui * (1.0 - ui**2) ** (_BUMP_POWER - 1)
    return out


def make_test_block(grid, times, box, mode, amplitude, direction=(0.0, 0.0, 1.0)):
    """Synthetic oscillatory block: velocity = grad(window * sin) x direction.

    The curl form makes the velocity divergence-free and supported in the
    box by construction (all derivatives taken analytically).  The stress
    solves the traceless elliptic system for -dv/dt on the torus and is then
    re-windowed to the box, which breaks the linear constraint by a measured
    amount recorded in the certificate.  If the box spans the whole torus the
    window is identically one and the constraint holds to spectral accuracy.
    """
    if grid.dim != 3:
        raise ValueError("oscillatory blocks are three-dimensional")
    times = np.asarray(times, dtype=float)
    lo, hi = np.asarray(box[0], dtype=float), np.asarray(box[1], dtype=float)
    if len(lo) != 4 or len(hi) != 4:
        raise ValueError("block box needs dim+1 = 4 coordinates (time first)")
    widths = hi[1:] - lo[1:]
    full_axis = widths >= grid.period - 1e-12
    if np.any(~full_axis & (widths < 8 * grid.spacing)):
        raise ValueError("box narrower than 8 grid cells along a windowed axis")

    axes = grid.meshgrid()
    kvec = np.asarray(mode, dtype=float)
    phase = 2.0 * np.pi * sum(kvec[a] * axes[a] for a in range(3)) / grid.period
    s = np.sin(phase)
    ds = [2.0 * np.pi * kvec[a] / grid.period * np.cos(phase) for a in range(3)]

    # spatial window: product of per-axis bumps (1 on full axes)
    bumps = [np.ones(grid.shape) for _ in range(3)]
    bump_primes = [np.zeros(grid.shape) for _ in range(3)]
    for a in range(3):
        if full_axis[a]:
            continue
        mid = 0.5 * (lo[1 + a] + hi[1 + a])
        half = 0.5 * widths[a]
        u = (axes[a] - mid) / half
        bumps[a] = _bump(u)
        bump_primes[a] = _bump_prime(u) / half
    win = bumps[0] * bumps[1] * bumps[2]
    dwin = [
        bump_primes[0] * bumps[1] * bumps[2],
        bumps[0] * bump_primes[1] * bumps[2],
        bumps[0] * bumps[1] * bump_primes[2],
    ]
    # time window
    t_mid = 0.5 * (lo[0] + hi[0])
    t_half = 0.5 * (hi[0] - lo[0])
    if t_half <= 0:
        raise ValueError("box must have positive time extent")
    ut = (times - t_mid) / t_half
    wt = _bump(ut)
    dwt = _bump_prime(ut) / t_half

    a_dir = np.asarray(direction, dtype=float)
    # grad(win * s) spatially, then cross with the direction vector
    grad_ws = np.stack([dwin[a] * s + win * ds[a] for a in range(3)])
    curl = np.stack(
        [
            grad_ws[1] * a_dir[2] - grad_ws[2] * a_dir[1],
            grad_ws[2] * a_dir[0] - grad_ws[0] * a_dir[2],
            grad_ws[0] * a_dir[1] - grad_ws[1] * a_dir[0],
        ]
    )
    nt = len(times)
    velocity = amplitude * wt.reshape((nt, 1) + (1,) * 3) * curl[None]
    dvelocity = amplitude * dwt.reshape((nt, 1) + (1,) * 3) * curl[None]

    stress = np.zeros((nt, 6) + grid.shape)
    if amplitude != 0.0:
        env = win / np.max(win) if np.max(win) > 0 else win
        for k in range(nt):
            if np.max(np.abs(dvelocity[k])) == 0.0:
                continue
            mean = np.mean(dvelocity[k].reshape(3, -1), axis=1)
            rhs = VectorField(grid, dvelocity[k] - mean.reshape(3, 1, 1, 1), check=False)
            t_full = solve_symmetric_div(rhs).components
            stress[k] = t_full * env[None]

    block = OscillatoryBlock(grid, times, velocity, stress, (tuple(lo), tuple(hi)))
    block.certificate = block_certificate(block)
    return block


def block_certificate(block):
    """Measured residuals: linear constraint, velocity divergence, support."""
    res = constraint_residuals(block.grid, block.times, block.velocity, block.stress)
    if float(np.max(np.abs(block.velocity))) == 0.0:
        res = {"div_velocity": 0.0, "linear_constraint": 0.0}
    res["support"] = block.support_violation()
    return res


def scale_block(block, space_time_factor=1.0, density_factor=1.0):
    """Parabolic-type rescalings of a block.

    space_time_factor L: (t, x) -> (t/L, x/L), realized by relabeling the
    lattice (period and times scaled by L, samples unchanged).
    density_factor r: velocity -> sqrt(r) * velocity(t/sqrt(r), x), stress
    unchanged in amplitude, time lattice stretched by sqrt(r); this is the
    combination that preserves the linear constraint, which is re-measured
    after the transform rather than trusted.
    """
    if space_time_factor <= 0 or density_factor <= 0:
        raise ValueError("scaling factors must be positive")
    L = float(space_time_factor)
    sr = float(np.sqrt(density_factor))
    grid = block.grid
    if L != 1.0:
        grid = Grid(grid.dim, grid.n, grid.period * L)
    times = block.times * (L * sr)
    velocity = block.velocity * sr
    stress = block.stress.copy()
    lo, hi = block.box
    lo = (lo[0] * L * sr,) + tuple(v * L for v in lo[1:])
    hi = (hi[0] * L * sr,) + tuple(v * L for v in hi[1:])
    out = OscillatoryBlock(grid, times, velocity, stress, (lo, hi))
    out.certificate = block_certificate(out)
    return out


# ------------------------------------------------------------------
# sequence verification
# ------------------------------------------------------------------

def _boxset_mask(boxset, times, grid):
    """Space-time membership mask of a dim+1 box set on the lattice."""
    axes = grid.axes()
    nt = len(times)
    mask = np.zeros((nt,) + grid.shape, dtype=bool)
    for b in range(len(boxset.lo)):
        lo, hi = boxset.lo[b], boxset.hi[b]
        t_in = (times > lo[0]) & (times < hi[0])
        space = np.ones(grid.shape, dtype=bool)
        for a in range(grid.dim):
            space &= (axes[a] > lo[1 + a]) & (axes[a] < hi[1 + a])
        mask |= t_in.reshape((-1,) + (1,) * grid.dim) & space[None]
    return mask


def verify_oscillatory_sequence(blocks, candidate, data, open_set, cert_slack=2.0):
    """Check a sequence of blocks against the increment-lemma conclusions.

    Per block: (a) support inside the open set, (b) linear constraints within
    the block's own certificate (times cert_slack), (c) the perturbed pair
    keeps a positive margin on the open set, (d) the empirical energy-gain
    ratio  integral |w|^2/r  over  integral (energy - 0.5 |v+h|^2/r)^2,
    reported but never asserted against a specific constant.
    Regions where the energy function is non-positive are counted separately
    as automatic margin failures.
    """
    g = candidate.grid
    times = candidate.times
    mask = _boxset_mask(open_set, times, g)
    report = {"blocks": [], "all_pass": True}

    r = data.scaled_density
    pos = r > DENSITY_FLOOR
    nonpos_energy = float(np.mean((data.energy <= 0) & mask & pos))
    report["nonpositive_energy_fraction"] = nonpos_energy

    # baseline gain denominator on the open set
    gap_sq = np.zeros_like(r)
    sel = mask & pos
    gk = candidate.velocity + data.gradient_flux
    kin = np.zeros_like(r)
    kin[sel] = 0.5 * np.sum(gk**2, axis=1)[sel] / r[sel]
    gap_sq[sel] = (data.energy[sel] - kin[sel]) ** 2
    dt = times[1] - times[0]
    denom = float(np.sum(gap_sq) * g.cell_volume * dt)
    report["gain_denominator"] = denom

    for n, block in enumerate(blocks):
        entry = {"index": n}
        same_lattice = (
            block.grid == g
            and len(block.times) == len(times)
            and np.allclose(block.times, times)
        )
        entry["lattice_compatible"] = same_lattice
        if not same_lattice:
            entry["pass"] = False
            report["blocks"].append(entry)
            report["all_pass"] = False
            continue

        lo, hi = block.box
        axes = g.axes()
        t_in = (times >= lo[0]) & (times <= hi[0])
        space = np.ones(g.shape, dtype=bool)
        for a in range(g.dim):
            space &= (axes[a] >= lo[1 + a]) & (axes[a] <= hi[1 + a])
        inside = t_in.reshape((-1,) + (1,) * g.dim) & space[None]
        support_in_set = bool(np.all(~inside | mask | ~pos))
        entry["support_inside_set"] = support_in_set
        entry["support_residual"] = block.support_violation()

        cert = block.certificate or block_certificate(block)
        fresh = block_certificate(block)
        entry["constraint_certificate"] = cert
        entry["constraint_recheck"] = fresh
        cert_ok = (
            fresh["linear_constraint"] <= cert_slack * max(cert["linear_constraint"], 1e-12)
            and fresh["div_velocity"] <= cert_slack * max(cert["div_velocity"], 1e-12)
        )
        entry["certificate_ok"] = cert_ok

        perturbed = CandidateSubsolution(
            g, times, candidate.velocity + block.velocity,
            candidate.relaxed_stress + block.stress,
        )
        margin = subsolution_margin(perturbed, data)
        sel_margin = margin[mask & pos]
        entry["min_margin_on_set"] = float(np.min(sel_margin)) if sel_margin.size else np.nan
        margin_ok = bool(sel_margin.size == 0 or np.min(sel_margin) > 0)
        entry["margin_positive"] = margin_ok

        wsq = np.zeros_like(r)
        wsq[sel] = np.sum(block.velocity**2, axis=1)[sel] / r[sel]
        gain = float(np.sum(wsq) * g.cell_volume * dt)
        entry["gain_numerator"] = gain
        entry["gain_ratio"] = gain / denom if denom > 0 else np.inf

        entry["pass"] = support_in_set and cert_ok and margin_ok
        report["all_pass"] = report["all_pass"] and entry["pass"]
        report["blocks"].append(entry)
    return report
