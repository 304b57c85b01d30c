"""Docked-structure description: module poses on the lattice and who docks whom."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .geometry import NeighborRelation


class DockedPair(NamedTuple):
    """Undirected docked pair, normalized so rel is +x or +y (j above/right of i)."""

    i: int
    j: int
    rel: NeighborRelation


@dataclass(frozen=True)
class Structure:
    """Module poses in the structure frame (COM at origin) plus the dock graph."""

    poses: np.ndarray                 # (N, 2) float64
    pairs: tuple[DockedPair, ...]
    layout: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "poses",
                           np.ascontiguousarray(self.poses, dtype=float))

    @property
    def n_modules(self) -> int:
        return self.poses.shape[0]

    def neighbors(self, i: int) -> list[tuple[int, NeighborRelation]]:
        """Occupied neighbor sites of module i with the relation as seen from i."""
        out = []
        for a, b, rel in self.pairs:
            if a == i:
                out.append((b, rel))
            elif b == i:
                neg = (NeighborRelation.MINUS_X if rel is NeighborRelation.PLUS_X
                       else NeighborRelation.MINUS_Y)
                out.append((a, neg))
        return out

    def row_chains(self) -> list[list[int]]:
        """Maximal horizontal chains of consecutively docked modules."""
        return self._chains(NeighborRelation.PLUS_X)

    def col_chains(self) -> list[list[int]]:
        """Maximal vertical chains of consecutively docked modules."""
        return self._chains(NeighborRelation.PLUS_Y)

    def _chains(self, rel: NeighborRelation) -> list[list[int]]:
        nxt = {i: j for i, j, r in self.pairs if r is rel}
        has_prev = set(nxt.values())
        chains = []
        for start in range(self.n_modules):
            if start in has_prev:
                continue
            chain = [start]
            while chain[-1] in nxt:
                chain.append(nxt[chain[-1]])
            chains.append(chain)
        return chains


def structure_from_layout(rows: Sequence[str], pitch: float = 1.0) -> Structure:
    """Build a Structure from an occupancy grid of 'X' (module) and '.' (empty).

    Rows are listed top to bottom; columns grow along +x and the top row has
    the largest y.  The occupied cells must form one connected component.
    """
    rows = [str(r) for r in rows]
    if not rows or not any("X" in r for r in rows):
        raise ValueError("layout has no modules")
    width = max(len(r) for r in rows)
    cells = {}
    for r, row in enumerate(rows):
        for c, ch in enumerate(row):
            if ch == "X":
                cells[(r, c)] = len(cells)
            elif ch not in ". ":
                raise ValueError(f"layout characters must be 'X' or '.', got {ch!r}")

    n_rows = len(rows)
    poses = np.zeros((len(cells), 2))
    for (r, c), idx in cells.items():
        poses[idx] = (c * pitch, (n_rows - 1 - r) * pitch)
    poses -= poses.mean(axis=0)

    pairs = []
    for (r, c), i in sorted(cells.items()):
        if (r, c + 1) in cells:
            pairs.append(DockedPair(i, cells[(r, c + 1)], NeighborRelation.PLUS_X))
        if (r - 1, c) in cells:  # the row above sits at +y
            pairs.append(DockedPair(i, cells[(r - 1, c)], NeighborRelation.PLUS_Y))

    # Connectivity: a docked structure must be one component.
    adj = {i: set() for i in range(len(cells))}
    for i, j, _ in pairs:
        adj[i].add(j)
        adj[j].add(i)
    seen = {0}
    frontier = [0]
    while frontier:
        i = frontier.pop()
        for j in adj[i]:
            if j not in seen:
                seen.add(j)
                frontier.append(j)
    if len(seen) != len(cells):
        raise ValueError("layout is not a connected docked structure")

    return Structure(poses, tuple(pairs), tuple(rows))


def square_structure(side: int, pitch: float = 1.0) -> Structure:
    return structure_from_layout(["X" * side] * side, pitch)
