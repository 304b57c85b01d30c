"""Planar rigid-body simulation of the docked structure, closed-loop capable.

Swim cycles apply each solution's mean wrench for one period; transitions
coast with zero thrust while motors sweep to the next start poses.  Motor
angles are tracked analytically for a ground-truth collision audit that is
independent of the DoC-table pipeline.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import dockernel
from .controller import (ControlGains, HolonomicController, PhysicalParams,
                         world_from_body)
from .doc_metric import DoCTableSet
from .geometry import ModuleGeometry, tails_collide, wrap_angle
from .potential_solver import (CycleSolution, NoValidSolution, SolverConfig,
                               WaveformParams, solve_cycle,
                               zero_thrust_solution)
from .structure import Structure
from .transition_solver import (NoTransition, TransitionConfig, TransitionPlan,
                                cycle_endpoints, solve_transition_from)

TWO_PI = 2.0 * math.pi


class NumericalBlowup(RuntimeError):
    """State magnitudes left sanity bounds; the configuration is broken."""


def _finite_or_none(value: float):
    """Strict-JSON stand-in for the no-docked-pairs infinity."""
    return float(value) if math.isfinite(value) else None


@dataclass(frozen=True)
class RigidBodyState:
    position: np.ndarray   # world frame, m
    yaw: float             # rad, unwrapped
    velocity: np.ndarray   # world frame, m/s
    yaw_rate: float        # rad/s
    time: float            # s

    @classmethod
    def at_rest(cls, yaw: float = 0.0) -> "RigidBodyState":
        return cls(np.zeros(2), yaw, np.zeros(2), 0.0, 0.0)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    phys: PhysicalParams = field(default_factory=PhysicalParams)
    t_trans: float = 0.75
    noise: tuple[float, float] | None = None  # (force, torque) amplitudes
    audit_resolution: float = 0.005

    def __post_init__(self):
        if self.dt > self.phys.period / 100.0 + 1e-12:
            raise ValueError("dt must be at most period / 100")
        if self.audit_resolution > self.dt + 1e-12:
            raise ValueError("audit_resolution must not exceed dt")


def step_dynamics(state: RigidBodyState, wrench_body, phys: PhysicalParams,
                  dt: float, noise_force=None) -> RigidBodyState:
    """One semi-implicit Euler step under a constant structure-frame wrench.

    Drag is quadratic and componentwise in the world frame, mirroring the
    feedforward the controller inverts.
    """
    wrench_body = np.asarray(wrench_body, dtype=float)
    f_world = world_from_body(state.yaw) @ wrench_body[:2]
    if noise_force is not None:
        f_world = f_world + noise_force[:2]
    tau = wrench_body[2] + (noise_force[2] if noise_force is not None else 0.0)

    v = state.velocity
    drag = phys.lin_drag * v * np.abs(v)
    v_new = v + dt * (f_world - drag) / phys.mass
    pos_new = state.position + dt * v_new

    omega = state.yaw_rate
    omega_new = omega + dt * (tau - phys.rot_drag * abs(omega) * omega) / phys.inertia
    yaw_new = state.yaw + dt * omega_new

    if (not np.all(np.isfinite(v_new)) or not math.isfinite(omega_new)
            or np.abs(v_new).max() > 1e3 or abs(omega_new) > 1e3):
        raise NumericalBlowup(f"state diverged at t = {state.time + dt:.3f}")
    return RigidBodyState(pos_new, yaw_new, v_new, omega_new, state.time + dt)


@dataclass(frozen=True)
class MotorPhase:
    """Analytic motor-angle track over one cycle or transition."""

    kind: str          # "cycle" or "transition"
    t0: float
    duration: float
    phi0: np.ndarray   # cycle: centerlines; transition: start angles
    coef: np.ndarray   # cycle: amplitudes; transition: sweeps

    def angles_at(self, t) -> np.ndarray:
        """Motor angles at absolute times t, shape (len(t), N)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        rel = (t - self.t0)[:, None]
        if self.kind == "cycle":
            return self.phi0[None, :] + self.coef[None, :] * np.cos(
                TWO_PI * rel / self.duration)
        return self.phi0[None, :] + self.coef[None, :] * rel / self.duration


@dataclass
class TrajectoryLog:
    """Step records, per-cycle solver records, and the motor track."""

    times: list = field(default_factory=list)
    states: list = field(default_factory=list)      # (x, y, yaw, vx, vy, omega)
    commands: list = field(default_factory=list)    # (fx, fy, tau) desired
    min_docs: list = field(default_factory=list)
    events: list = field(default_factory=list)
    cycles: list = field(default_factory=list)      # dict per decision cycle
    phases: list = field(default_factory=list)      # MotorPhase sequence

    def append_step(self, state: RigidBodyState, command, min_doc, event=""):
        self.times.append(state.time)
        self.states.append((float(state.position[0]), float(state.position[1]),
                            float(wrap_angle(state.yaw)),
                            float(state.velocity[0]), float(state.velocity[1]),
                            float(state.yaw_rate)))
        self.commands.append(tuple(float(c) for c in command))
        self.min_docs.append(float(min_doc))
        self.events.append(event)

    def state_array(self) -> np.ndarray:
        return np.asarray(self.states)

    def time_array(self) -> np.ndarray:
        return np.asarray(self.times)

    def export_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = ["t,x,y,theta,vx,vy,omega,fx_cmd,fy_cmd,tau_cmd,min_doc,event"]
        for t, s, c, d, ev in zip(self.times, self.states, self.commands,
                                  self.min_docs, self.events):
            row = [t, *s, *c, d]
            lines.append(",".join(repr(float(v)) for v in row) + "," + ev)
        path.write_text("\n".join(lines) + "\n")

    def export_cycles_jsonl(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as fh:
            for rec in self.cycles:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


@dataclass(frozen=True)
class AuditResult:
    min_doc: float
    violation_time: float | None
    checked_steps: int

    @property
    def clean(self) -> bool:
        return self.violation_time is None


def audit_collisions(phases: Sequence[MotorPhase], geom: ModuleGeometry,
                     structure: Structure, regions,
                     audit_resolution: float) -> AuditResult:
    """Ground-truth tail-collision audit, independent of the DoC tables.

    Walks every phase at the audit resolution and evaluates the exact
    segment-intersection predicate for every docked pair; also reports the
    smallest point DoC seen anywhere (clearance bookkeeping).
    """
    min_doc = math.inf
    violation = None
    checked = 0
    flats = {rel: regions[rel].flat_arrays() for rel in regions}
    for phase in phases:
        n = max(2, int(math.ceil(phase.duration / audit_resolution)) + 1)
        ts = phase.t0 + np.linspace(0.0, phase.duration, n)
        angles = phase.angles_at(ts)
        checked += n
        for i, j, rel in structure.pairs:
            hits = tails_collide(angles[:, i], angles[:, j], rel, geom)
            if np.any(hits):
                t_bad = float(ts[int(np.argmax(hits))])
                if violation is None or t_bad < violation:
                    violation = t_bad
            verts, starts, bboxes = flats[rel]
            pts = np.stack([angles[:, i], angles[:, j],
                            angles[:, i], angles[:, j]], axis=1)
            d = dockernel.doc_region_batch(pts, verts, starts, bboxes)
            min_doc = min(min_doc, float(d.min()))
    return AuditResult(min_doc, violation, checked)


@dataclass(frozen=True)
class Leg:
    v_des: tuple[float, float]
    theta_des: float
    duration: float


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    legs: tuple[Leg, ...]

    @property
    def total_duration(self) -> float:
        return sum(leg.duration for leg in self.legs)

    def leg_at(self, t: float) -> Leg:
        acc = 0.0
        for leg in self.legs:
            acc += leg.duration
            if t < acc - 1e-9:
                return leg
        return self.legs[-1]


def presets() -> dict[str, ExperimentSpec]:
    """The four canned closed-loop evaluations (world-frame setpoints)."""
    half_pi = math.pi / 2
    return {
        "test1": ExperimentSpec("test1", (Leg((0.04, 0.0), half_pi, 90.0),)),
        "test2": ExperimentSpec("test2", (Leg((0.04, 0.0), 0.0, 90.0),)),
        "test3": ExperimentSpec("test3", (Leg((0.03, 0.01), half_pi, 90.0),)),
        "test4": ExperimentSpec("test4", (Leg((0.04, 0.0), half_pi, 60.0),
                                          Leg((0.0, 0.04), half_pi, 60.0))),
    }


def _run_phase(state: RigidBodyState, wrench_body, duration: float,
               cfg: SimConfig, log: TrajectoryLog, min_doc: float,
               event: str, rng) -> RigidBodyState:
    n = int(round(duration / cfg.dt))
    for k in range(n):
        noise = None
        if cfg.noise is not None:
            noise = np.array([
                rng.uniform(-cfg.noise[0], cfg.noise[0]),
                rng.uniform(-cfg.noise[0], cfg.noise[0]),
                rng.uniform(-cfg.noise[1], cfg.noise[1])])
        state = step_dynamics(state, wrench_body, cfg.phys, cfg.dt, noise)
        log.append_step(state, wrench_body, min_doc, event if k == 0 else "")
    return state


def run_cycle(state: RigidBodyState, solution: CycleSolution, cfg: SimConfig,
              log: TrajectoryLog, rng=None, event: str = "") -> RigidBodyState:
    """Apply the solution's mean wrench for one period; track motor angles."""
    phase = MotorPhase("cycle", state.time, cfg.phys.period,
                       np.array([p.phi0 for p in solution.params]),
                       np.array([p.amp for p in solution.params]))
    log.phases.append(phase)
    return _run_phase(state, solution.achieved.as_array(), cfg.phys.period,
                      cfg, log, solution.min_doc, event, rng)


def run_transition(state: RigidBodyState, plan: TransitionPlan,
                   start_angles, min_doc: float, cfg: SimConfig,
                   log: TrajectoryLog, rng=None,
                   event: str = "") -> RigidBodyState:
    """Coast with zero thrust while motors sweep linearly to the next poses."""
    phase = MotorPhase("transition", state.time, plan.t_trans,
                       np.asarray(start_angles, dtype=float),
                       np.asarray(plan.sweeps, dtype=float))
    log.phases.append(phase)
    return _run_phase(state, np.zeros(3), plan.t_trans, cfg, log, min_doc,
                      event, rng)


def transition_min_doc(structure: Structure, start_angles, plan: TransitionPlan,
                       regions) -> float:
    """Exact min pairwise DoC of an executed transition plan."""
    from .doc_metric import doc_wrapped
    from .geometry import PhasePoint, PhaseSegment

    start = np.asarray(start_angles, dtype=float)
    sweeps = np.asarray(plan.sweeps, dtype=float)
    best = math.inf
    for i, j, rel in structure.pairs:
        seg = PhaseSegment(PhasePoint(start[i], start[j]),
                           PhasePoint(start[i] + sweeps[i],
                                      start[j] + sweeps[j]))
        best = min(best, doc_wrapped(seg, regions[rel]))
    return best


def run_experiment(spec: ExperimentSpec, structure: Structure,
                   geom: ModuleGeometry, regions, tables: DoCTableSet,
                   solver_cfg: SolverConfig, trans_cfg: TransitionConfig,
                   gains: ControlGains, cfg: SimConfig, seed: int = 0,
                   initial_yaw: float | None = None,
                   literal_square: bool = False) -> TrajectoryLog:
    """Full closed loop: observe, solve, transition, swim, repeat.

    Solver failures degrade to zero-thrust hold cycles and are recorded as
    events rather than raised.

    The run starts 30 degrees off the first commanded heading unless
    ``initial_yaw`` says otherwise: a perfectly aligned rest start is a
    saddle of the sign-step descent (every gradient component is exactly
    zero), which no physical run ever sits on.
    """
    rng = np.random.default_rng(seed)
    yaw0 = (spec.legs[0].theta_des - math.pi / 6 if initial_yaw is None
            else initial_yaw)
    state = RigidBodyState.at_rest(yaw0)
    controller = HolonomicController(gains, cfg.phys,
                                     literal_square=literal_square)
    motor_angles = np.full(structure.n_modules, -math.pi / 2)
    prev_params = None
    log = TrajectoryLog()
    log.append_step(state, np.zeros(3), math.inf, "start")
    dt_cycle = cfg.phys.period + cfg.t_trans
    n_pairs = len(structure.pairs)

    cycle_index = 0
    while state.time < spec.total_duration - 1e-9:
        leg = spec.leg_at(state.time)
        f_des = controller.desired_wrench(
            (np.asarray(leg.v_des), leg.theta_des), state.yaw, state.yaw_rate,
            state.velocity, dt_cycle)
        event = "ok"
        init = prev_params if prev_params is not None else \
            [WaveformParams(-math.pi / 2, 0.0)] * structure.n_modules
        try:
            sol = solve_cycle(structure, f_des.as_array(), init, solver_cfg,
                              tables, regions)
        except NoValidSolution:
            sol = zero_thrust_solution(structure, motor_angles,
                                       f_des.as_array(), solver_cfg, regions)
            event = "hold"
        try:
            plan = solve_transition_from(structure, motor_angles, sol.params,
                                         regions, trans_cfg)
        except NoTransition:
            sol = zero_thrust_solution(structure, motor_angles,
                                       f_des.as_array(), solver_cfg, regions)
            plan = TransitionPlan((0.0,) * structure.n_modules,
                                  trans_cfg.t_trans, False)
            event = "no_transition"
        if plan.negate_next:
            sol = CycleSolution(
                tuple(WaveformParams(p.phi0, -p.amp) for p in sol.params),
                sol.achieved, sol.error, sol.collision_free, sol.min_doc)

        trans_doc = (transition_min_doc(structure, motor_angles, plan, regions)
                     if n_pairs else math.inf)
        log.cycles.append({
            "cycle": cycle_index, "t0": state.time, "event": event,
            "f_des": [float(v) for v in f_des],
            "achieved": [float(v) for v in sol.achieved],
            "error": sol.error, "min_doc": _finite_or_none(sol.min_doc),
            "collision_free": sol.collision_free,
            "params": [[p.phi0, p.amp] for p in sol.params],
            "sweeps": list(plan.sweeps), "negate_next": plan.negate_next,
            "transition_min_doc": _finite_or_none(trans_doc),
        })
        state = run_transition(state, plan, motor_angles, trans_doc, cfg, log,
                               rng, event)
        motor_angles = motor_angles + np.asarray(plan.sweeps)
        state = run_cycle(state, sol, cfg, log, rng)
        motor_angles = np.array([cycle_endpoints(p) for p in sol.params])
        prev_params = sol.params
        cycle_index += 1

    return log


def summarize(log: TrajectoryLog, spec: ExperimentSpec, structure: Structure,
              geom: ModuleGeometry, regions,
              audit_resolution: float) -> dict:
    """Per-leg tracking metrics plus the ground-truth collision audit."""
    t = log.time_array()
    s = log.state_array()
    out = {"name": spec.name, "legs": [], "hold_cycles": 0,
           "no_transition_cycles": 0}
    for rec in log.cycles:
        if rec["event"] == "hold":
            out["hold_cycles"] += 1
        elif rec["event"] == "no_transition":
            out["no_transition_cycles"] += 1

    t0 = 0.0
    for leg in spec.legs:
        t1 = t0 + leg.duration
        window = (t >= t0 + 2.0 * leg.duration / 3.0) & (t <= t1)
        v = s[window, 3:5]
        mean_speed = float(np.linalg.norm(v, axis=1).mean()) if v.size else 0.0
        mean_v = v.mean(axis=0) if v.size else np.zeros(2)
        v_des = np.asarray(leg.v_des, dtype=float)
        cmd_speed = float(np.linalg.norm(v_des))
        if cmd_speed > 0 and np.linalg.norm(mean_v) > 0:
            cosang = float(np.dot(mean_v, v_des)
                           / (np.linalg.norm(mean_v) * cmd_speed))
            heading_err = math.degrees(math.acos(max(-1.0, min(1.0, cosang))))
        else:
            heading_err = 0.0
        yaw_w = s[window, 2]
        yaw_err = float(np.abs(wrap_angle(yaw_w - leg.theta_des)).mean()) \
            if yaw_w.size else 0.0
        out["legs"].append({
            "v_des": list(leg.v_des), "theta_des": leg.theta_des,
            "duration": leg.duration, "mean_speed": mean_speed,
            "commanded_speed": cmd_speed, "heading_error_deg": heading_err,
            "mean_yaw_error": yaw_err,
        })
        t0 = t1

    audit = audit_collisions(log.phases, geom, structure, regions,
                             audit_resolution)
    out["audit"] = {"min_doc": _finite_or_none(audit.min_doc),
                    "violation_time": audit.violation_time,
                    "checked_steps": audit.checked_steps}
    docs = [r["min_doc"] for r in log.cycles if r["min_doc"] is not None]
    out["min_cycle_doc"] = min(docs) if docs else None
    return out


def structure_length(structure: Structure, geom: ModuleGeometry) -> float:
    """Longest axis extent of the docked structure including hulls."""
    spans = structure.poses.max(axis=0) - structure.poses.min(axis=0)
    return float(spans.max() + 2.0 * geom.hull_radius)
