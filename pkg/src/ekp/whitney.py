"""Whitney dyadic decomposition of finite unions of open axis-aligned boxes.

The decomposition emits dyadic cubes Q with

    diam(Q) <= dist(Q, complement of U) <= 4 diam(Q),

recursing on children otherwise, capped at a maximum generation with a
certified bound on the uncovered measure.  Distances to the complement are
exact: the boxes induce a rectilinear arrangement whose uncovered cells are
themselves boxes, and point-box / box-box distances are closed form.
"""

import numpy as np

MAX_GENERATION = 24
_MAX_CELLS = 1 << 21


class BoxSet:
    """Open set represented as a finite union of open axis-aligned boxes.

    boxes: sequence of (lower, upper) corner pairs, one coordinate per axis.
    """

    def __init__(self, dim, boxes):
        if not 1 <= dim <= 4:
            raise ValueError(f"dim must be between 1 and 4, got {dim}")
        if not boxes:
            raise ValueError("box set needs at least one box")
        self.dim = dim
        lo = np.array([b[0] for b in boxes], dtype=float)
        hi = np.array([b[1] for b in boxes], dtype=float)
        if lo.shape != (len(boxes), dim) or hi.shape != (len(boxes), dim):
            raise ValueError("each box needs one (lower, upper) pair per axis")
        if not np.all(hi > lo):
            raise ValueError("boxes must have positive extent along every axis")
        self.lo = lo
        self.hi = hi
        self._build_arrangement()

    def _build_arrangement(self):
        """Slab decomposition: per-axis sorted breakpoints with +-inf sentinels;
        every arrangement cell is either fully inside or fully outside U."""
        coords = []
        for axis in range(self.dim):
            c = np.unique(np.concatenate([self.lo[:, axis], self.hi[:, axis]]))
            coords.append(np.concatenate([[-np.inf], c, [np.inf]]))
        n_cells = 1
        for c in coords:
            n_cells *= len(c) - 1
        if n_cells > _MAX_CELLS:
            raise ValueError(
                f"arrangement too large ({n_cells} cells); reduce box count or dimension"
            )
        self.cell_edges = coords
        shape = tuple(len(c) - 1 for c in coords)
        covered = np.zeros(shape, dtype=bool)
        for b in range(len(self.lo)):
            slices = []
            for axis in range(self.dim):
                i0 = int(np.searchsorted(coords[axis], self.lo[b, axis]))
                i1 = int(np.searchsorted(coords[axis], self.hi[b, axis]))
                slices.append(slice(i0, i1))
            covered[tuple(slices)] = True
        self.covered = covered
        # uncovered cells as (cell_lo, cell_hi) arrays for distance queries
        idx = np.argwhere(~covered)
        cell_lo = np.empty((len(idx), self.dim))
        cell_hi = np.empty((len(idx), self.dim))
        for axis in range(self.dim):
            cell_lo[:, axis] = coords[axis][idx[:, axis]]
            cell_hi[:, axis] = coords[axis][idx[:, axis] + 1]
        self.free_lo = cell_lo
        self.free_hi = cell_hi

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return bool(np.any(np.all((x > self.lo) & (x < self.hi), axis=1)))

    def bounding_box(self):
        return self.lo.min(axis=0), self.hi.max(axis=0)

    def measure(self):
        """Exact Lebesgue measure of the union (sum of covered cell volumes)."""
        total = 0.0
        idx = np.argwhere(self.covered)
        for cell in idx:
            vol = 1.0
            for axis in range(self.dim):
                vol *= self.cell_edges[axis][cell[axis] + 1] - self.cell_edges[axis][cell[axis]]
            total += vol
        return total

    def sample(self, n, rng):
        """n uniform points of U (rejection from the bounding box)."""
        lo, hi = self.bounding_box()
        out = np.empty((n, self.dim))
        filled = 0
        while filled < n:
            pts = rng.uniform(lo, hi, size=(2 * (n - filled) + 16, self.dim))
            inside = np.zeros(len(pts), dtype=bool)
            for b in range(len(self.lo)):
                inside |= np.all((pts > self.lo[b]) & (pts < self.hi[b]), axis=1)
            pts = pts[inside]
            take = min(len(pts), n - filled)
            out[filled : filled + take] = pts[:take]
            filled += take
        return out


def distance_to_complement(x, boxset):
    """Exact Euclidean distance from an interior point to the complement of U."""
    x = np.asarray(x, dtype=float)
    if not boxset.contains(x):
        raise ValueError(f"point {x.tolist()} is not in the open set")
    # per-axis gap to each uncovered cell; 0 when the coordinate is inside the slab
    below = boxset.free_lo - x  # positive when the cell is above x
    above = x - boxset.free_hi
    gap = np.maximum(0.0, np.maximum(below, above))
    return float(np.sqrt(np.min(np.sum(gap**2, axis=1))))


def _cube_distance_to_complement(boxset, cube_lo, cube_hi):
    """Min distance between axis-aligned cubes and the uncovered region (vectorized).

    cube_lo/cube_hi: arrays (m, dim).  Returns array (m,) of exact distances.
    """
    # axis gap between [a0,a1] and [b0,b1] is max(0, b0-a1, a0-b1)
    a0 = cube_lo[:, None, :]
    a1 = cube_hi[:, None, :]
    b0 = boxset.free_lo[None, :, :]
    b1 = boxset.free_hi[None, :, :]
    gap = np.maximum(0.0, np.maximum(b0 - a1, a0 - b1))
    return np.sqrt(np.min(np.sum(gap**2, axis=2), axis=1))


class DyadicCube:
    """Cube of side root_side / 2^generation anchored on the dyadic lattice."""

    def __init__(self, generation, index, origin, root_side):
        self.generation = int(generation)
        self.index = tuple(int(i) for i in index)
        self.origin = np.asarray(origin, dtype=float)
        self.root_side = float(root_side)
        self.side = self.root_side / (1 << self.generation)

    @property
    def lower(self):
        return self.origin + np.array(self.index) * self.side

    @property
    def upper(self):
        return self.lower + self.side

    def diameter(self):
        return self.side * np.sqrt(len(self.index))

    def __repr__(self):
        return f"DyadicCube(g={self.generation}, index={self.index}, side={self.side:.6g})"


class WhitneyDecomposition:
    def __init__(self, cubes, origin, root_side, max_generation, residual_bound, uncovered_leaves):
        self.cubes = cubes
        self.origin = origin
        self.root_side = root_side
        self.max_generation = max_generation
        self.residual_bound = residual_bound
        self.uncovered_leaves = uncovered_leaves


def whitney_decompose(boxset, max_generation):
    """Dyadic Whitney cubes of the open set, capped at max_generation.

    Returns the emitted cubes (disjoint interiors, each satisfying the
    distance predicate exactly) plus a certified upper bound on the measure
    of U left uncovered by the cap.
    """
    if max_generation > MAX_GENERATION:
        raise ValueError(f"max_generation > {MAX_GENERATION} would overflow cube indices")
    if max_generation < 0:
        raise ValueError("max_generation must be non-negative")
    lo, hi = boxset.bounding_box()
    root_side = float(np.max(hi - lo))
    origin = lo
    dim = boxset.dim
    sqrt_n = np.sqrt(dim)

    emitted = []
    uncovered = 0
    # breadth-first over generations, all sibling cubes processed as one array
    pending = np.zeros((1, dim), dtype=np.int64)
    for g in range(max_generation + 1):
        if len(pending) == 0:
            break
        side = root_side / (1 << g)
        cube_lo = origin[None, :] + pending * side
        cube_hi = cube_lo + side
        # drop cubes that do not meet U at all (exact test against the boxes)
        meets = np.zeros(len(pending), dtype=bool)
        for b in range(len(boxset.lo)):
            meets |= np.all((cube_hi > boxset.lo[b]) & (cube_lo < boxset.hi[b]), axis=1)
        pending = pending[meets]
        cube_lo, cube_hi = cube_lo[meets], cube_hi[meets]
        if len(pending) == 0:
            break
        diam = side * sqrt_n
        dist = _cube_distance_to_complement(boxset, cube_lo, cube_hi)
        emit = (dist >= diam) & (dist <= 4.0 * diam)
        for idx in pending[emit]:
            emitted.append(DyadicCube(g, idx, origin, root_side))
        rest = pending[~emit]
        if g == max_generation:
            uncovered = len(rest)
            break
        if len(rest) == 0:
            pending = rest
            continue
        # children: each remaining cube splits into 2^dim
        offsets = np.array(
            [[(m >> a) & 1 for a in range(dim)] for m in range(1 << dim)], dtype=np.int64
        )
        pending = (rest[:, None, :] * 2 + offsets[None, :, :]).reshape(-1, dim)

    leaf_side = root_side / (1 << max_generation)
    residual_bound = uncovered * leaf_side**dim
    return WhitneyDecomposition(
        emitted, origin, root_side, max_generation, residual_bound, uncovered
    )


def verify_cube_predicate(boxset, cube):
    """Independent re-test of the distance predicate for one emitted cube."""
    lo = cube.lower[None, :]
    hi = cube.upper[None, :]
    dist = float(_cube_distance_to_complement(boxset, lo, hi)[0])
    diam = cube.diameter()
    return diam <= dist <= 4.0 * diam


def coverage_fraction_uncovered(boxset, decomposition, n_samples, rng):
    """Fraction of uniform samples of U lying in no emitted cube."""
    pts = boxset.sample(n_samples, rng)
    covered = np.zeros(n_samples, dtype=bool)
    # map each point to its would-be index at each cube's generation
    by_generation = {}
    for cube in decomposition.cubes:
        by_generation.setdefault(cube.generation, set()).add(cube.index)
    for g, index_set in by_generation.items():
        side = decomposition.root_side / (1 << g)
        idx = np.floor((pts - decomposition.origin[None, :]) / side).astype(np.int64)
        for i in range(n_samples):
            if not covered[i] and tuple(idx[i]) in index_set:
                covered[i] = True
    return float(np.mean(~covered))
