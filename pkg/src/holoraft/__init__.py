"""Holonomic planar control of lattices of docked single-motor swim modules."""

from .controller import ControlGains, ControlState, PhysicalParams
from .doc_metric import DoCTable, DoCTableSet, DoCTriple
from .geometry import (CollisionPolygon, CollisionRegion, EmptyRegion,
                       ModuleGeometry, NeighborRelation, PhasePoint,
                       PhaseSegment)
from .potential_solver import (CycleSolution, ForceVector, NoValidSolution,
                               OutOfBand, SolverConfig, WaveformParams)
from .simulator import ExperimentSpec, Leg, RigidBodyState, SimConfig
from .structure import DockedPair, Structure, structure_from_layout
from .transition_solver import (NoTransition, TransitionConfig,
                                TransitionPlan)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
