"""Square-lattice geometry with periodic boundaries.

Sites are indexed row-major, ``site = r * cols + c``. Bonds are stored as
unique unordered pairs ``(i, j, multiplicity)`` with ``i < j``; on a torus
dimension of length 2 the wraparound edge coincides with the direct edge and
is folded into a multiplicity of 2.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import combinations

METRICS = ("linear", "manhattan")


@dataclass(frozen=True)
class LatticeSpec:
    rows: int
    cols: int
    bonds: tuple[tuple[int, int, int], ...]

    @property
    def n_sites(self) -> int:
        return self.rows * self.cols

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def coords(self, site: int) -> tuple[int, int]:
        return divmod(site, self.cols)

    def degree(self, site: int) -> int:
        """Number of unique bonds touching ``site`` (multiplicity ignored)."""
        return sum(1 for i, j, _ in self.bonds if site in (i, j))

    def deduplicated(self) -> "LatticeSpec":
        """Copy with every bond multiplicity forced to 1."""
        return replace(self, bonds=tuple((i, j, 1) for i, j, _ in self.bonds))


@dataclass(frozen=True)
class PairDistanceIndex:
    distance: int
    pairs: tuple[tuple[int, int], ...]


def build_lattice(rows: int, cols: int) -> LatticeSpec:
    """Periodic ``rows x cols`` square lattice.

    Each site is joined to its right and down neighbour with wraparound.
    A dimension of length 1 contributes no bonds in that direction.
    """
    if int(rows) != rows or int(cols) != cols or rows < 1 or cols < 1:
        raise ValueError(f"rows and cols must be positive integers, got {rows}x{cols}")
    rows, cols = int(rows), int(cols)
    if rows * cols < 2:
        raise ValueError("lattice needs at least 2 sites to have any bond")

    counts: dict[tuple[int, int], int] = {}
    for r in range(rows):
        for c in range(cols):
            site = r * cols + c
            neighbours = []
            if cols > 1:
                neighbours.append(r * cols + (c + 1) % cols)
            if rows > 1:
                neighbours.append(((r + 1) % rows) * cols + c)
            for other in neighbours:
                key = (min(site, other), max(site, other))
                counts[key] = counts.get(key, 0) + 1
    bonds = tuple((i, j, m) for (i, j), m in sorted(counts.items()))
    return LatticeSpec(rows=rows, cols=cols, bonds=bonds)


def toroidal_distance(lattice: LatticeSpec, i: int, j: int) -> int:
    """Manhattan distance between two sites on the torus."""
    ri, ci = lattice.coords(i)
    rj, cj = lattice.coords(j)
    dr = abs(ri - rj)
    dc = abs(ci - cj)
    return min(dr, lattice.rows - dr) + min(dc, lattice.cols - dc)


def pair_distance(lattice: LatticeSpec, i: int, j: int, metric: str = "linear") -> int:
    if metric == "linear":
        return abs(j - i)
    if metric == "manhattan":
        return toroidal_distance(lattice, i, j)
    raise ValueError(f"unknown distance metric {metric!r}; expected one of {METRICS}")


def distances(lattice: LatticeSpec, metric: str = "linear") -> list[int]:
    """All distances realised by at least one site pair, ascending."""
    if metric == "linear":
        return list(range(1, lattice.n_sites))
    found = {
        pair_distance(lattice, i, j, metric)
        for i, j in combinations(range(lattice.n_sites), 2)
    }
    return sorted(found)


def pairs_at_distance(lattice: LatticeSpec, d: int, metric: str = "linear") -> PairDistanceIndex:
    """Site pairs ``(i, j)``, ``i < j``, separated by ``d``, ordered by ``i`` then ``j``.

    The default ``linear`` metric is the site-index distance ``j - i``;
    ``manhattan`` uses the toroidal lattice distance instead.
    """
    n = lattice.n_sites
    if metric == "linear":
        if not 1 <= d <= n - 1:
            raise ValueError(f"distance {d} outside [1, {n - 1}]")
        return PairDistanceIndex(d, tuple((i, i + d) for i in range(n - d)))
    valid = distances(lattice, metric)
    if d not in valid:
        raise ValueError(f"no site pair at {metric} distance {d}; valid: {valid}")
    pairs = tuple(
        (i, j)
        for i, j in combinations(range(n), 2)
        if pair_distance(lattice, i, j, metric) == d
    )
    return PairDistanceIndex(d, pairs)
