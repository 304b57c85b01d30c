"""Per-cycle oscillation parameters from a desired structure wrench.

Each module's mean thrust over a swim cycle points opposite its centerline
and scales linearly with |amplitude| inside the calibrated band.  The solver
walks the discretized (phi0, A) space with fixed-size signed steps down a
weighted quadratic force error, gated by a stepped repulsive field built
from the distance-to-collision tables, and returns the best collision-free
candidate seen anywhere along the way.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .doc_metric import DoCTableSet, doc_triple, doc_wrapped_batch
from .geometry import wrap_angle
from .structure import Structure

FORCE_SLOPE = 0.022   # N per unit amplitude
FORCE_OFFSET = 0.019  # N
AMP_BAND_LO = 0.9
AMP_BAND_HI = 2.6
_TOL = 1e-9


class OutOfBand(ValueError):
    """Amplitude magnitude in the dead band (0, 0.9) or beyond 2.6."""


class NoValidSolution(RuntimeError):
    """No collision-free candidate was observed; fall back to zero thrust."""


class WaveformParams(NamedTuple):
    """Centerline and amplitude of one module's cosine waveform (rad)."""

    phi0: float
    amp: float


class ForceVector(NamedTuple):
    fx: float
    fy: float
    tau: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


@dataclass(frozen=True)
class SolverConfig:
    delta_d: float = 0.1
    weights: tuple[float, float, float] = (1.0, 1.0, 10.0)
    n_epochs: int = 5
    n1: int = 20
    n2: int = 40
    n3: int = 60
    margin: float = 0.1
    # (threshold, strength) pairs, thresholds descending: S(d) is the strength
    # of the lowest threshold still above d, zero when d clears them all.
    repulsive_profile: tuple[tuple[float, float], ...] = (
        (0.3, 1.0), (0.0, 2.0), (-0.5, 4.0))

    def __post_init__(self):
        if not self.n1 <= self.n2 <= self.n3:
            raise ValueError("need n1 <= n2 <= n3")
        thresholds = [t for t, _ in self.repulsive_profile]
        strengths = [s for _, s in self.repulsive_profile]
        if sorted(thresholds, reverse=True) != thresholds:
            raise ValueError("repulsive thresholds must be descending")
        if sorted(strengths) != strengths:
            raise ValueError("repulsive strengths must grow with collision depth")


@dataclass(frozen=True)
class CycleSolution:
    params: tuple[WaveformParams, ...]
    achieved: ForceVector
    error: float            # weighted quadratic force error J
    collision_free: bool
    min_doc: float          # exact min pairwise swim-trajectory DoC


def force_from_amplitude(amp: float) -> float:
    """Mean thrust magnitude for one cycle: 0.022*|A| - 0.019, 0 at A = 0."""
    mag = abs(amp)
    if mag <= _TOL:
        return 0.0
    if mag < AMP_BAND_LO - _TOL or mag > AMP_BAND_HI + _TOL:
        raise OutOfBand(f"|amplitude| = {mag} outside {{0}} u [0.9, 2.6]")
    return FORCE_SLOPE * mag - FORCE_OFFSET


def module_force(p: WaveformParams, pose) -> np.ndarray:
    """Structure-frame wrench [Fx, Fy, tau] of one module.

    Thrust points opposite the centerline; the torque is the moment of that
    thrust about the structure COM.
    """
    phi0, amp = p
    f = force_from_amplitude(amp)
    x, y = pose
    c, s = math.cos(phi0), math.sin(phi0)
    return np.array([-f * c, -f * s, -f * s * x + f * c * y])


def force_gradients(p: WaveformParams, pose) -> tuple[np.ndarray, np.ndarray]:
    """Rows d(module wrench)/d(phi0) and d(module wrench)/d(A).

    The amplitude row carries sign(A) because thrust depends on |A|; at
    A = 0 the positive branch is used so a dead module can still be pulled
    into the thrust band.
    """
    phi0, amp = p
    f = force_from_amplitude(amp)
    x, y = pose
    c, s = math.cos(phi0), math.sin(phi0)
    d_phi = np.array([f * s, -f * c, -f * c * x - f * s * y])
    sgn = -1.0 if amp < 0 else 1.0
    d_amp = sgn * FORCE_SLOPE * np.array([-c, -s, -(s * x - c * y)])
    return d_phi, d_amp


def total_force(params: Sequence, poses) -> ForceVector:
    out = np.zeros(3)
    for p, pose in zip(params, poses):
        out += module_force(WaveformParams(*p), pose)
    return ForceVector(*out)


def weighted_error(achieved, f_des, weights) -> float:
    e = np.asarray(f_des, dtype=float) - np.asarray(achieved, dtype=float)
    return float(np.dot(np.asarray(weights, dtype=float), e * e))


def attractive_gradients(params: Sequence, poses, f_des, weights
                         ) -> tuple[np.ndarray, np.ndarray]:
    """Objective gradient d J / d phi0 and d J / d A, one entry per module."""
    w = np.asarray(weights, dtype=float)
    e = np.asarray(f_des, dtype=float) - total_force(params, poses).as_array()
    we = 2.0 * w * e
    n = len(params)
    g_phi = np.zeros(n)
    g_amp = np.zeros(n)
    for i, (p, pose) in enumerate(zip(params, poses)):
        d_phi, d_amp = force_gradients(WaveformParams(*p), pose)
        g_phi[i] = -float(np.dot(we, d_phi))
        g_amp[i] = -float(np.dot(we, d_amp))
    return g_phi, g_amp


def step_amplitude(amp: float, direction: float) -> float:
    """One signed amplitude step constrained to {0} u +-[0.9, 2.6].

    Steps that land in the dead band jump to the nearest valid value in the
    step direction; steps past +-2.6 clamp.
    """
    if direction == 0.0:
        return amp
    cand = amp + direction
    if cand > AMP_BAND_HI:
        return AMP_BAND_HI
    if cand < -AMP_BAND_HI:
        return -AMP_BAND_HI
    mag = abs(cand)
    if mag <= _TOL or mag >= AMP_BAND_LO - _TOL:
        return cand
    if direction > 0:
        return AMP_BAND_LO if cand > 0 else 0.0
    return 0.0 if cand > 0 else -AMP_BAND_LO


def _step_amplitude_vec(amps: np.ndarray, directions: np.ndarray) -> np.ndarray:
    cand = amps + directions
    out = np.clip(cand, -AMP_BAND_HI, AMP_BAND_HI)
    dead = (np.abs(cand) > _TOL) & (np.abs(cand) < AMP_BAND_LO - _TOL)
    up = directions > 0
    out = np.where(dead & up & (cand > 0), AMP_BAND_LO, out)
    out = np.where(dead & up & (cand < 0), 0.0, out)
    out = np.where(dead & ~up & (cand > 0), 0.0, out)
    out = np.where(dead & ~up & (cand < 0), -AMP_BAND_LO, out)
    return np.where(directions == 0.0, amps, out)


_SIGN_DEADZONE = 1e-15


def _step_sign(g) -> np.ndarray:
    # A hard sign() would turn rounding dust (an exactly-aligned module has
    # gradient ~1e-19, not 0.0) into full-size steps.
    g = np.asarray(g, dtype=float)
    return np.where(np.abs(g) <= _SIGN_DEADZONE, 0.0, np.sign(g))


def attractive_step(g_phi: np.ndarray, g_amp: np.ndarray, amps: np.ndarray,
                    delta_d: float) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-size descent steps: +-delta_d per component, signed by gradient.

    Returns effective deltas; the amplitude delta already accounts for the
    dead-band jump and the +-2.6 clamp.
    """
    amps = np.asarray(amps, dtype=float)
    d_phi = -delta_d * _step_sign(g_phi)
    raw = -delta_d * _step_sign(g_amp)
    d_amp = _step_amplitude_vec(amps, raw) - amps
    return d_phi, d_amp


def repulsive_strength(d0, profile) -> np.ndarray:
    """Stepped field strength S(DoC): larger when deeper into collision."""
    d0 = np.asarray(d0, dtype=float)
    out = np.zeros_like(d0)
    for threshold, strength in profile:
        out = np.where(d0 < threshold, strength, out)
    return out


def repulsive_field(i: int, params: Sequence, structure: Structure,
                    tables: DoCTableSet, step_phi: float, step_amp: float,
                    profile) -> tuple[float, float]:
    """Summed neighbor pressure on module i's candidate parameter updates.

    For each occupied neighbor site, the DoC triple says whether stepping
    phi0 or A improves (positive contribution) or worsens (negative) the
    pair's clearance, weighted by how severe the pair already is.
    """
    u_phi = 0.0
    u_amp = 0.0
    p_i = WaveformParams(*params[i])
    for j, rel in structure.neighbors(i):
        view = tables.view(rel)
        t = doc_triple(p_i, WaveformParams(*params[j]), step_phi, step_amp, view)
        s = float(repulsive_strength(t.d0, profile))
        u_phi += math.copysign(1.0, t.d_phi - t.d0) * s if t.d_phi != t.d0 else 0.0
        u_amp += math.copysign(1.0, t.d_a - t.d0) * s if t.d_a != t.d0 else 0.0
    return u_phi, u_amp


class _PairArrays:
    """Precomputed index arrays for vectorized table lookups and DoC batches."""

    def __init__(self, structure: Structure, tables: DoCTableSet, regions):
        # Directed pairs (src's parameters get stepped) grouped by table.
        src, nbr, swap, vals = [], [], [], []
        for i, j, rel in structure.pairs:
            table = tables.tables[rel]
            src.extend((i, j))
            nbr.extend((j, i))
            swap.extend((False, True))
            vals.extend((table.values, table.values))
        self.src = np.array(src, dtype=np.int64)
        self.nbr = np.array(nbr, dtype=np.int64)
        self.swap = np.array(swap, dtype=bool)
        self.values = vals
        self.any_table = next(iter(tables.tables.values()))
        # Undirected pairs grouped by relation for exact DoC batches.
        self.groups = _pair_groups(structure, regions)

    def gather(self, phi_idx, amp_idx, phi_step_idx, amp_step_idx):
        """d0, d_phi, d_a per directed pair via nearest-cell lookups."""
        s, n, sw = self.src, self.nbr, self.swap
        o1 = np.where(sw, n, s)
        o2 = np.where(sw, s, n)
        d0 = np.empty(s.shape[0], dtype=np.float32)
        d_phi = np.empty_like(d0)
        d_a = np.empty_like(d0)
        f1 = np.where(sw, phi_idx[o1], phi_step_idx[o1])
        f2 = np.where(sw, phi_step_idx[o2], phi_idx[o2])
        a1 = np.where(sw, amp_idx[o1], amp_step_idx[o1])
        a2 = np.where(sw, amp_step_idx[o2], amp_idx[o2])
        for k, v in enumerate(self.values):
            d0[k] = v[phi_idx[o1[k]], amp_idx[o1[k]],
                      phi_idx[o2[k]], amp_idx[o2[k]]]
            d_phi[k] = v[f1[k], amp_idx[o1[k]], f2[k], amp_idx[o2[k]]]
            d_a[k] = v[phi_idx[o1[k]], a1[k], phi_idx[o2[k]], a2[k]]
        return d0, d_phi, d_a

    def min_doc(self, phis: np.ndarray, amps: np.ndarray) -> float:
        return _min_doc_grouped(self.groups, phis, amps)


def _pair_groups(structure: Structure, regions):
    groups = []
    for rel, region in regions.items():
        idx = np.array([(i, j) for i, j, r in structure.pairs if r is rel],
                       dtype=np.int64).reshape(-1, 2)
        if idx.shape[0]:
            groups.append((idx, region))
    return groups


def _min_doc_grouped(groups, phis, amps) -> float:
    best = math.inf
    for idx, region in groups:
        i, j = idx[:, 0], idx[:, 1]
        segs = np.stack([phis[i] + amps[i], phis[j] + amps[j],
                         phis[i] - amps[i], phis[j] - amps[j]], axis=1)
        d = doc_wrapped_batch(segs, region)
        best = min(best, float(d.min()))
    return best


def min_pairwise_doc(structure: Structure, phis, amps, regions) -> float:
    """Exact min swim-trajectory DoC over all docked pairs (inf if no pairs)."""
    return _min_doc_grouped(_pair_groups(structure, regions),
                            np.asarray(phis, dtype=float),
                            np.asarray(amps, dtype=float))


def evaluate_candidate(structure: Structure, phis, amps, f_des, weights,
                       pair_arrays: _PairArrays, margin: float
                       ) -> tuple[float, float, bool, ForceVector]:
    params = [WaveformParams(p, a) for p, a in zip(phis, amps)]
    achieved = total_force(params, structure.poses)
    j = weighted_error(achieved.as_array(), f_des, weights)
    min_doc = pair_arrays.min_doc(np.asarray(phis, dtype=float),
                                  np.asarray(amps, dtype=float))
    return j, min_doc, min_doc >= margin, achieved


def _as_solution(phis, amps, j, min_doc, free, achieved) -> CycleSolution:
    params = tuple(WaveformParams(float(wrap_angle(p)), float(a))
                   for p, a in zip(phis, amps))
    return CycleSolution(params, achieved, j, free, min_doc)


def solve_cycle(structure: Structure, f_des, init: Sequence,
                cfg: SolverConfig, tables: DoCTableSet, regions
                ) -> CycleSolution:
    """Three-stage potential-field search for a valid swim cycle.

    Per epoch: iterations up to n1 apply the attractive step everywhere;
    up to n2 apply it per parameter only where the repulsive field favors it;
    up to n3 apply the negated step per parameter only where the repulsive
    field opposes it.  Every iterate (including the start point) is scored
    and the best-by-error collision-free candidate is returned.

    Raises NoValidSolution when nothing collision-free was ever seen; the
    caller is expected to fall back to a zero-thrust hold cycle.
    """
    f_des = np.asarray(f_des, dtype=float)
    w = np.asarray(cfg.weights, dtype=float)
    phis = np.array([p[0] for p in init], dtype=float)
    amps = np.array([p[1] for p in init], dtype=float)
    for a in amps:
        force_from_amplitude(a)  # rejects dead-band initial amplitudes
    poses = structure.poses
    pa = _PairArrays(structure, tables, regions)
    table = pa.any_table
    n = structure.n_modules
    xs, ys = poses[:, 0], poses[:, 1]

    best = None

    def score():
        """Score the current iterate; returns what the gradient also needs."""
        nonlocal best
        f = np.where(np.abs(amps) <= _TOL, 0.0,
                     FORCE_SLOPE * np.abs(amps) - FORCE_OFFSET)
        c, s = np.cos(phis), np.sin(phis)
        achieved = np.array([np.sum(-f * c), np.sum(-f * s),
                             np.sum(-f * s * xs + f * c * ys)])
        e = f_des - achieved
        j = float(np.dot(w, e * e))
        if best is None or j < best[0]:  # only a J-improving iterate can win
            min_doc = pa.min_doc(phis, amps)
            if min_doc >= cfg.margin:
                best = (j, phis.copy(), amps.copy(), min_doc,
                        ForceVector(*achieved))
        return f, c, s, e

    f, c, s, e = score()
    for _ in range(cfg.n_epochs):
        for it in range(1, cfg.n3 + 1):
            e2w = 2.0 * w * e
            g_phi = -(e2w[0] * f * s - e2w[1] * f * c
                      + e2w[2] * (-f * c * xs - f * s * ys))
            sgn = np.where(amps < 0, -1.0, 1.0)
            g_amp = -sgn * FORCE_SLOPE * (-e2w[0] * c - e2w[1] * s
                                          - e2w[2] * (s * xs - c * ys))
            d_phi = -cfg.delta_d * _step_sign(g_phi)
            raw = -cfg.delta_d * _step_sign(g_amp)
            amp_target = _step_amplitude_vec(amps, raw)

            if it <= cfg.n1:
                phis = phis + d_phi
                amps = amp_target
            else:
                phi_idx = table.phi_index(phis)
                amp_idx = table.amp_index(amps)
                phi_step_idx = table.phi_index(phis + d_phi)
                amp_step_idx = table.amp_index(amp_target)
                d0, dp, da = pa.gather(phi_idx, amp_idx,
                                       phi_step_idx, amp_step_idx)
                strength = repulsive_strength(d0, cfg.repulsive_profile)
                u_phi = np.bincount(pa.src, weights=np.sign(dp - d0) * strength,
                                    minlength=n)
                u_amp = np.bincount(pa.src, weights=np.sign(da - d0) * strength,
                                    minlength=n)
                if it <= cfg.n2:
                    phis = np.where(u_phi > 0, phis + d_phi, phis)
                    amps = np.where(u_amp > 0, amp_target, amps)
                else:
                    neg_target = _step_amplitude_vec(amps, -raw)
                    phis = np.where(u_phi < 0, phis - d_phi, phis)
                    amps = np.where(u_amp < 0, neg_target, amps)

            f, c, s, e = score()

    if best is None:
        raise NoValidSolution(
            f"no collision-free candidate for wrench {tuple(f_des)}")
    j, phis, amps, min_doc, achieved = best
    return _as_solution(phis, amps, j, min_doc, True, achieved)


def zero_thrust_solution(structure: Structure, phis, f_des, cfg: SolverConfig,
                         regions) -> CycleSolution:
    """Hold cycle: A = 0 at the given centerlines (the NoValidSolution fallback)."""
    phis = np.asarray(phis, dtype=float)
    amps = np.zeros_like(phis)
    params = [WaveformParams(p, 0.0) for p in phis]
    achieved = total_force(params, structure.poses)
    j = weighted_error(achieved.as_array(), f_des, cfg.weights)
    min_doc = min_pairwise_doc(structure, phis, amps, regions)
    return _as_solution(phis, amps, j, min_doc, min_doc >= cfg.margin, achieved)
