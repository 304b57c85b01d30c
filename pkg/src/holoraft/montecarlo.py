"""Monte-Carlo studies of transition feasibility on square lattices.

Trials draw a random but physically meaningful situation: prior motor poses
that are themselves collision-free (they came from a valid cycle) and a
random next cycle whose swim trajectories are collision-free.  Success means
the transition solver finds a valid plan for at least one amplitude-negation
option.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .doc_metric import doc_wrapped, swim_doc
from .geometry import PhasePoint, PhaseSegment
from .potential_solver import AMP_BAND_HI, AMP_BAND_LO
from .structure import Structure, square_structure
from .transition_solver import (NoTransition, TransitionConfig,
                                solve_transition_from)

_MAX_REPAIRS = 10_000


def _repair(violators, resample) -> None:
    """Locally resample modules until ``violators`` returns an empty list."""
    for _ in range(_MAX_REPAIRS):
        bad = violators()
        if not bad:
            return
        resample(bad[0])
    raise RuntimeError("rejection sampling failed to find a valid configuration")


def sample_valid_poses(structure: Structure, regions, margin: float,
                       rng: np.random.Generator) -> np.ndarray:
    """Random motor angles whose static configuration is collision-free."""
    angles = rng.uniform(-math.pi, math.pi, structure.n_modules)

    def violators():
        bad = []
        for i, j, rel in structure.pairs:
            point = PhaseSegment(PhasePoint(angles[i], angles[j]),
                                 PhasePoint(angles[i], angles[j]))
            if doc_wrapped(point, regions[rel]) < margin:
                bad.append(j)
        return bad

    def resample(i):
        angles[i] = rng.uniform(-math.pi, math.pi)

    _repair(violators, resample)
    return angles


def sample_valid_cycle(structure: Structure, regions, margin: float,
                       rng: np.random.Generator) -> list:
    """Random in-band waveform parameters forming a collision-free cycle."""
    n = structure.n_modules
    phis = rng.uniform(-math.pi, math.pi, n)
    amps = rng.uniform(AMP_BAND_LO, AMP_BAND_HI, n) * rng.choice((-1.0, 1.0), n)

    def violators():
        bad = []
        for i, j, rel in structure.pairs:
            if swim_doc((phis[i], amps[i]), (phis[j], amps[j]),
                        regions[rel]) < margin:
                bad.append(j)
        return bad

    def resample(i):
        phis[i] = rng.uniform(-math.pi, math.pi)
        amps[i] = rng.uniform(AMP_BAND_LO, AMP_BAND_HI) * rng.choice((-1.0, 1.0))

    _repair(violators, resample)
    return [(float(p), float(a)) for p, a in zip(phis, amps)]


@dataclass(frozen=True)
class TransitionStats:
    side: int
    trials: int
    successes: int

    @property
    def rate(self) -> float:
        return self.successes / self.trials if self.trials else float("nan")

    def wilson_interval(self, z: float = 1.959963984540054) -> tuple[float, float]:
        """95% Wilson score interval for the success rate."""
        if not self.trials:
            return (float("nan"), float("nan"))
        n, p = self.trials, self.rate
        denom = 1.0 + z * z / n
        center = (p + z * z / (2 * n)) / denom
        half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
        return (center - half, center + half)


def transition_success_stats(side: int, trials: int, regions, seed: int,
                             condition_margin: float = 0.1,
                             check_margin: float = 0.0,
                             t_trans: float = 0.75) -> TransitionStats:
    """Monte-Carlo transition success rate on a side x side lattice.

    Inputs are conditioned at the cycle solver's safety margin (that is the
    invariant real end poses and next cycles satisfy), while success asks the
    existence question: is there a transition that is collision-free?  An
    operational margin for executing transitions is a separate knob.
    """
    structure = square_structure(side)
    rng = np.random.default_rng(np.random.SeedSequence([seed, side]))
    cfg = TransitionConfig(t_trans=t_trans, margin=check_margin)
    successes = 0
    for _ in range(trials):
        from_angles = sample_valid_poses(structure, regions, condition_margin,
                                         rng)
        next_params = sample_valid_cycle(structure, regions, condition_margin,
                                         rng)
        try:
            solve_transition_from(structure, from_angles, next_params,
                                  regions, cfg)
            successes += 1
        except NoTransition:
            pass
    return TransitionStats(side, trials, successes)
