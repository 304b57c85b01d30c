"""Collision-free constant-speed rotations between consecutive swim cycles.

Every module must rotate from its previous cycle's end pose to its next
cycle's start pose within one shared transition window.  Each module picks a
clockwise or counterclockwise sweep; optionally the whole next cycle runs
with negated amplitudes, which shifts all start poses without changing the
forces.  Candidate sets are pruned by arc consistency on the horizontal and
vertical sub-problems separately, intersected per module, and the cheapest
consistent assignment (minimum total sweep) wins.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

from .doc_metric import doc_wrapped
from .geometry import (CollisionRegion, PhasePoint, PhaseSegment,
                       wrap_angle)
from .structure import Structure

TWO_PI = 2.0 * math.pi

CCW = 1
CW = -1


class NoTransition(RuntimeError):
    """No collision-free assignment exists for either negation option."""


@dataclass(frozen=True)
class TransitionConfig:
    t_trans: float = 0.75
    margin: float = 0.1


@dataclass(frozen=True)
class TransitionPlan:
    """Signed angular displacement per module over one shared window."""

    sweeps: tuple[float, ...]
    t_trans: float
    negate_next: bool

    @property
    def total_sweep(self) -> float:
        return float(sum(abs(s) for s in self.sweeps))


def cycle_endpoints(p, negated: bool = False) -> float:
    """Motor angle at both boundaries of a swim cycle.

    The cosine term is 1 at t = 0 and t = T, so a cycle starts and ends at
    phi0 + A; negating the amplitude moves both boundaries to phi0 - A.
    """
    phi0, amp = p
    return phi0 - amp if negated else phi0 + amp


def sweep(from_angle: float, to_angle: float, direction: int) -> float:
    """Signed rotation reaching ``to_angle`` the given way around.

    CCW is the shortest non-negative path, CW the shortest non-positive one;
    coincident angles need no motion in either direction.
    """
    ccw = (to_angle - from_angle) % TWO_PI
    if ccw == 0.0:
        return 0.0
    return ccw if direction == CCW else ccw - TWO_PI


def transition_segment(from_i: float, to_i: float, dir_i: int,
                       from_j: float, to_j: float, dir_j: int) -> PhaseSegment:
    """Phase-space line of a module pair rotating at constant speeds.

    Both modules take the full window, so unequal sweeps just tilt the line;
    it still runs straight from the start pair to the end pair.
    """
    si = sweep(from_i, to_i, dir_i)
    sj = sweep(from_j, to_j, dir_j)
    return PhaseSegment(PhasePoint(from_i, from_j),
                        PhasePoint(from_i + si, from_j + sj))


def pair_consistent(from_i, to_i, dir_i, from_j, to_j, dir_j,
                    region: CollisionRegion, margin: float) -> bool:
    """True iff this direction pair keeps the transition clear of collision."""
    seg = transition_segment(from_i, to_i, dir_i, from_j, to_j, dir_j)
    return doc_wrapped(seg, region) >= margin


class _PairChecker:
    """Memoized direction-pair feasibility for every docked pair."""

    def __init__(self, structure: Structure, from_angles, to_angles,
                 regions, margin: float):
        self.ok = {}
        for i, j, rel in structure.pairs:
            region = regions[rel]
            fi, ti = from_angles[i], to_angles[i]
            fj, tj = from_angles[j], to_angles[j]
            for di in (CCW, CW):
                for dj in (CCW, CW):
                    self.ok[(i, j, di, dj)] = pair_consistent(
                        fi, ti, di, fj, tj, dj, region, margin)

    def consistent(self, i: int, j: int, di: int, dj: int) -> bool:
        if (i, j, di, dj) in self.ok:
            return self.ok[(i, j, di, dj)]
        return self.ok[(j, i, dj, di)]


def _ac3(chain: Sequence[int], domains: dict, checker: _PairChecker) -> bool:
    """Arc consistency along one chain; False when a domain empties."""
    arcs = deque()
    for a, b in zip(chain, chain[1:]):
        arcs.append((a, b))
        arcs.append((b, a))
    neighbors = {m: [] for m in chain}
    for a, b in zip(chain, chain[1:]):
        neighbors[a].append(b)
        neighbors[b].append(a)
    while arcs:
        x, y = arcs.popleft()
        revised = False
        for vx in list(domains[x]):
            if not any(checker.consistent(x, y, vx, vy) for vy in domains[y]):
                domains[x].remove(vx)
                revised = True
        if revised:
            if not domains[x]:
                return False
            for z in neighbors[x]:
                if z != y:
                    arcs.append((z, x))
    return True


def _candidate_domains(structure: Structure, from_angles, to_angles,
                       checker: _PairChecker) -> dict | None:
    """Row-AC and column-AC domains intersected per module; None if empty."""
    n = structure.n_modules
    row = {i: {CCW, CW} for i in range(n)}
    col = {i: {CCW, CW} for i in range(n)}
    for chain in structure.row_chains():
        if not _ac3(chain, row, checker):
            return None
    for chain in structure.col_chains():
        if not _ac3(chain, col, checker):
            return None
    domains = {}
    for i in range(n):
        d = row[i] & col[i]
        if not d:
            return None
        # Zero-sweep modules have one physical candidate, not two.
        if sweep(from_angles[i], to_angles[i], CCW) == 0.0:
            d = {CCW}
        domains[i] = d
    return domains


def _search_assignment(structure: Structure, domains: dict, from_angles,
                       to_angles, checker: _PairChecker):
    """Branch-and-bound over intersected domains; returns (cost, dirs) or None."""
    n = structure.n_modules
    pairs_by_later = {i: [] for i in range(n)}
    for i, j, _ in structure.pairs:
        a, b = (i, j) if i > j else (j, i)
        pairs_by_later[a].append(b)  # check each pair once both ends are set

    options = []
    for i in range(n):
        opts = sorted(((abs(sweep(from_angles[i], to_angles[i], d)), d)
                       for d in domains[i]))
        options.append(opts)
    min_tail = [0.0] * (n + 1)
    for i in range(n - 1, -1, -1):
        min_tail[i] = min_tail[i + 1] + options[i][0][0]

    best_cost = math.inf
    best_dirs = None
    dirs = [0] * n

    def descend(i: int, cost: float):
        nonlocal best_cost, best_dirs
        if cost + min_tail[i] >= best_cost:
            return
        if i == n:
            best_cost = cost
            best_dirs = dirs.copy()
            return
        for c, d in options[i]:
            ok = all(checker.consistent(i, j, d, dirs[j])
                     for j in pairs_by_later[i])
            if ok:
                dirs[i] = d
                descend(i + 1, cost + c)
        dirs[i] = 0

    descend(0, 0.0)
    if best_dirs is None:
        return None
    return best_cost, best_dirs


def solve_transition_from(structure: Structure, from_angles, next_params,
                          regions, cfg: TransitionConfig) -> TransitionPlan:
    """Cheapest collision-free transition from explicit start angles."""
    from_angles = [float(wrap_angle(a)) for a in from_angles]
    best = None
    for negate in (False, True):
        to_angles = [cycle_endpoints(p, negate) for p in next_params]
        checker = _PairChecker(structure, from_angles, to_angles, regions,
                               cfg.margin)
        domains = _candidate_domains(structure, from_angles, to_angles, checker)
        if domains is None:
            continue
        found = _search_assignment(structure, domains, from_angles, to_angles,
                                   checker)
        if found is None:
            continue
        cost, dirs = found
        if best is None or cost < best[0]:
            sweeps = tuple(sweep(from_angles[i], to_angles[i], dirs[i])
                           for i in range(structure.n_modules))
            best = (cost, sweeps, negate)
    if best is None:
        raise NoTransition("no collision-free transition for either "
                           "amplitude-negation option")
    _, sweeps, negate = best
    return TransitionPlan(sweeps, cfg.t_trans, negate)


def solve_transition(structure: Structure, end_params, next_params,
                     regions, cfg: TransitionConfig) -> TransitionPlan:
    """Transition from the end poses of one cycle to the start of the next."""
    from_angles = [cycle_endpoints(p) for p in end_params]
    return solve_transition_from(structure, from_angles, next_params,
                                 regions, cfg)


def exhaustive_transition(structure: Structure, from_angles, next_params,
                          regions, cfg: TransitionConfig):
    """Reference solver: try every joint assignment (tests and small cases).

    Returns (sweeps, negate_next) of the minimum-total-sweep valid assignment
    or None.  Exponential; only sensible for a handful of modules.
    """
    from_angles = [float(wrap_angle(a)) for a in from_angles]
    n = structure.n_modules
    best = None
    for negate in (False, True):
        to_angles = [cycle_endpoints(p, negate) for p in next_params]
        checker = _PairChecker(structure, from_angles, to_angles, regions,
                               cfg.margin)
        for dirs in itertools.product((CCW, CW), repeat=n):
            if not all(checker.consistent(i, j, dirs[i], dirs[j])
                       for i, j, _ in structure.pairs):
                continue
            sweeps = tuple(sweep(from_angles[i], to_angles[i], dirs[i])
                           for i in range(n))
            cost = sum(abs(s) for s in sweeps)
            if best is None or cost < best[0]:
                best = (cost, sweeps, negate)
    if best is None:
        return None
    return best[1], best[2]
