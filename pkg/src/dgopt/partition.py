"""Index-set geometry: update orderings and block/separator decompositions.

Indices are 0-based pairs ``(i, j)`` on an ``(nx, ny)`` grid; index sets are
stored as sorted arrays of flat C-order indices ``i * ny + j``, so sorting a
set reproduces the column-by-column natural order.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

__all__ = ["dist_ind", "dist_set", "Ordering", "build_ordering",
           "Partition", "build_partition", "validate_partition"]

ORDERINGS = ("natural", "red_black", "random", "block")


def dist_ind(p, q):
    """Chebyshev distance between two index pairs."""
    return max(abs(p[0] - q[0]), abs(p[1] - q[1]))


def _as_pairs(A, shape=None):
    A = np.asarray(A)
    if A.ndim == 1:
        if shape is None:
            raise ValueError("flat indices need a grid shape")
        A = np.stack(np.unravel_index(A, shape), axis=1)
    return A.reshape(-1, 2)


def dist_set(A, B, shape=None):
    """Minimum Chebyshev distance between index sets ``A`` and ``B``.

    Sets are sequences of ``(i, j)`` pairs, or flat indices together with
    ``shape``.
    """
    A = _as_pairs(A, shape)
    B = _as_pairs(B, shape)
    if len(A) == 0 or len(B) == 0:
        raise ValueError("dist_set of an empty set")
    if len(A) > len(B):
        A, B = B, A
    d, _ = cKDTree(B).query(A, k=1, p=np.inf)
    return int(round(d.min()))


@dataclass(frozen=True)
class Ordering:
    kind: str
    shape: tuple
    indices: np.ndarray = field(repr=False)

    def pairs(self):
        return np.stack(np.unravel_index(self.indices, self.shape), axis=1)

    def __len__(self):
        return len(self.indices)


def build_ordering(shape, kind="natural", seed=None, partition=None):
    """Coordinate visiting order for one sweep.

    ``natural`` walks the grid column by column from the corner, ``red_black``
    visits pixels with ``i + j`` even before the odd ones, ``random`` is a
    fixed permutation drawn from ``seed`` and ``block`` follows the separator
    sets and then the blocks of ``partition``.
    """
    nx, ny = shape
    if nx < 1 or ny < 1:
        raise ValueError("grid dimensions must be positive")
    n = nx * ny
    if kind == "natural":
        idx = np.arange(n)
    elif kind == "red_black":
        i, j = np.unravel_index(np.arange(n), shape)
        even = (i + j) % 2 == 0
        idx = np.concatenate([np.flatnonzero(even), np.flatnonzero(~even)])
    elif kind == "random":
        idx = np.random.default_rng(seed).permutation(n)
    elif kind == "block":
        if partition is None:
            raise ValueError("block ordering needs a partition")
        idx = np.concatenate(list(partition.separators) + list(partition.blocks))
    else:
        raise ValueError(f"unknown ordering {kind!r}")
    return Ordering(kind, (nx, ny), np.asarray(idx, dtype=np.int64))


@dataclass(frozen=True)
class Partition:
    """Blocks ``B_m`` and separators ``Gamma_l`` as flat-index arrays."""

    shape: tuple
    radius: int
    blocks: tuple
    separators: tuple

    @property
    def M(self):
        return len(self.blocks)

    @property
    def N(self):
        return len(self.separators)

    def labels(self):
        """Grid of set labels: ``m >= 0`` for blocks, ``-l - 1`` for
        separators."""
        lab = np.full(self.shape[0] * self.shape[1], np.iinfo(np.int64).min)
        for m, b in enumerate(self.blocks):
            lab[b] = m
        for l, s in enumerate(self.separators):
            lab[s] = -l - 1
        return lab.reshape(self.shape)

    def dump(self):
        """One line per set: label followed by its ``i,j`` pairs."""
        lines = []
        for name, sets in (("G", self.separators), ("B", self.blocks)):
            for k, s in enumerate(sets, 1):
                i, j = np.unravel_index(s, self.shape)
                pairs = " ".join(f"{a},{b}" for a, b in zip(i, j))
                lines.append(f"{name}{k} {pairs}")
        return "\n".join(lines) + "\n"


def _split(length, nblocks, band):
    """Start/stop of ``nblocks`` runs separated by bands of width ``band``."""
    avail = length - (nblocks - 1) * band
    sizes = [len(c) for c in np.array_split(np.arange(avail), nblocks)]
    runs, bands, pos = [], [], 0
    for k, s in enumerate(sizes):
        runs.append((pos, pos + s))
        pos += s
        if k < nblocks - 1:
            bands.append((pos, pos + band))
            pos += band
    return sizes, runs, bands


def build_partition(shape, radius, blocks_x, blocks_y=1):
    """Axis-aligned grid of ``blocks_x * blocks_y`` blocks separated by
    bands of width ``radius``.

    With blocks in one direction only the bands are disjoint strips and
    each becomes its own separator set.  When blocks are split in both
    directions the bands cross and form one connected set, so they make up
    a single separator.
    """
    nx, ny = shape
    R = int(radius)
    if blocks_x < 1 or blocks_y < 1:
        raise ValueError("need at least one block in each direction")
    if R < 0:
        raise ValueError("radius must be non-negative")
    sx, runs_x, bands_x = _split(nx, blocks_x, R)
    sy, runs_y, bands_y = _split(ny, blocks_y, R)
    min_width = max(1, R) if R > 0 else 1
    if min(sx) < min_width or min(sy) < min_width:
        raise ValueError(f"grid {shape} too small for {blocks_x}x{blocks_y} "
                         f"blocks with separator width {R}")
    grid = np.arange(nx * ny).reshape(nx, ny)
    blocks = tuple(np.sort(grid[x0:x1, y0:y1].ravel())
                   for x0, x1 in runs_x for y0, y1 in runs_y)
    in_band = np.zeros((nx, ny), dtype=bool)
    for x0, x1 in bands_x:
        in_band[x0:x1, :] = True
    for y0, y1 in bands_y:
        in_band[:, y0:y1] = True
    if R == 0 or not in_band.any():
        separators = ()
    elif blocks_x > 1 and blocks_y > 1:
        separators = (np.flatnonzero(in_band),)
    elif blocks_x > 1:
        separators = tuple(np.sort(grid[x0:x1, :].ravel()) for x0, x1 in bands_x)
    else:
        separators = tuple(np.sort(grid[:, y0:y1].ravel()) for y0, y1 in bands_y)
    return Partition((nx, ny), R, blocks, separators)


def validate_partition(p):
    """List of violated partition constraints; empty means valid."""
    n = p.shape[0] * p.shape[1]
    problems = []
    count = np.zeros(n, dtype=np.int64)
    for s in list(p.blocks) + list(p.separators):
        if len(s) == 0:
            problems.append("empty set")
            continue
        np.add.at(count, np.asarray(s), 1)
    if np.any(count > 1):
        problems.append(f"overlap: {int(np.sum(count > 1))} indices in several sets")
    if np.any(count == 0):
        problems.append(f"coverage: {int(np.sum(count == 0))} indices in no set")
    for family, sets in (("block", p.blocks), ("separator", p.separators)):
        for a in range(len(sets)):
            for b in range(a + 1, len(sets)):
                if len(sets[a]) == 0 or len(sets[b]) == 0:
                    continue
                d = dist_set(sets[a], sets[b], p.shape)
                if d <= p.radius:
                    problems.append(f"distance: {family} {a} and {b} are "
                                    f"{d} apart (need > {p.radius})")
    return problems
