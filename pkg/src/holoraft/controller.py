"""Cycle-rate PID control producing the desired structure wrench.

Yaw control predicts the heading at the end of the current cycle before
forming the error; velocity control integrates an artificial acceleration
with a geometrically diminishing history so stale corrections decay.  The
commanded world-frame velocity maps to structure-frame forces through the
quadratic drag relationship.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import wrap_angle
from .potential_solver import ForceVector


@dataclass(frozen=True)
class ControlGains:
    kp_yaw: float = 1.0
    kd_yaw: float = 0.1
    kp_vel: float = 1.0
    kd_vel: float = 0.0
    gamma: float = 0.9  # diminishing coefficient on the acceleration history

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must lie in (0, 1)")
        for name in ("kp_yaw", "kd_yaw", "kp_vel", "kd_vel"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")


@dataclass(frozen=True)
class PhysicalParams:
    mass: float = 2.4        # kg
    inertia: float = 0.02    # kg m^2
    lin_drag: float = 5.0    # N s^2 / m^2
    rot_drag: float = 0.05   # N m s^2
    period: float = 1.5      # s, swim-cycle duration

    def __post_init__(self):
        for name in ("mass", "inertia", "lin_drag", "rot_drag", "period"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class ControlState:
    """Mutable controller memory advanced once per decision cycle."""

    acc_sum: np.ndarray = field(default_factory=lambda: np.zeros(2))
    n_cycles: int = 0
    prev_yaw_error: float | None = None
    prev_vel_error: np.ndarray | None = None

    def as_dict(self) -> dict:
        return {"acc_sum": self.acc_sum.tolist(), "n_cycles": self.n_cycles,
                "prev_yaw_error": self.prev_yaw_error,
                "prev_vel_error": None if self.prev_vel_error is None
                else self.prev_vel_error.tolist()}


def yaw_wrench(theta_des: float, theta_obs: float, omega_obs: float,
               gains: ControlGains, phys: PhysicalParams,
               state: ControlState, dt_cycle: float) -> float:
    """Desired torque from the yaw loop.

    The error uses the yaw predicted at the end of the current cycle
    (theta_obs + omega * T) to compensate the delay of discrete control;
    the drag feedforward keeps an on-track turn from being braked.
    """
    e = float(wrap_angle(theta_des - (theta_obs + omega_obs * phys.period)))
    if state.prev_yaw_error is None:
        de = 0.0
    else:
        de = (e - state.prev_yaw_error) / dt_cycle
    state.prev_yaw_error = e
    alpha = gains.kp_yaw * e + gains.kd_yaw * de
    return phys.inertia * alpha + phys.rot_drag * abs(omega_obs) * omega_obs


def velocity_command(v_des, v_obs, gains: ControlGains, state: ControlState,
                     period: float, dt_cycle: float) -> np.ndarray:
    """Commanded world-frame velocity with diminishing acceleration history.

    The accumulated sum of past artificial accelerations is scaled by
    gamma^(n-1) as a whole, so a stale history decays geometrically once the
    error settles.  The state absorbs the new acceleration afterwards.
    """
    v_des = np.asarray(v_des, dtype=float)
    e = v_des - np.asarray(v_obs, dtype=float)
    if state.prev_vel_error is None:
        de = np.zeros(2)
    else:
        de = (e - state.prev_vel_error) / dt_cycle
    state.prev_vel_error = e.copy()
    a = gains.kp_vel * e + gains.kd_vel * de
    n = state.n_cycles + 1  # 1-based index of the cycle being commanded
    v_c = v_des + (gains.gamma ** (n - 1) * state.acc_sum + a) * period
    state.acc_sum = state.acc_sum + a
    state.n_cycles = n
    return v_c


def planar_wrench(v_c, theta_obs: float, lin_drag: float,
                  literal_square: bool = False) -> tuple[float, float]:
    """Structure-frame force that sustains a commanded world velocity.

    Inverts quadratic drag and rotates into the structure frame.  The
    quadratic is sign-preserving (v * |v|) by default so reverse commands
    produce reverse forces; ``literal_square`` switches to the plain
    componentwise square for trace comparison.
    """
    v_c = np.asarray(v_c, dtype=float)
    q = v_c * v_c if literal_square else v_c * np.abs(v_c)
    st, ct = math.sin(theta_obs), math.cos(theta_obs)
    fx = lin_drag * (st * q[0] + ct * q[1])
    fy = lin_drag * (-ct * q[0] + st * q[1])
    return float(fx), float(fy)


def compose_wrench(fx_des: float, fy_des: float, tau_des: float) -> ForceVector:
    return ForceVector(fx_des, fy_des, tau_des)


def world_from_body(theta: float) -> np.ndarray:
    """Rotation taking structure-frame vectors to the world frame.

    Transpose of the matrix in planar_wrench, so a commanded world velocity
    round-trips: body force from planar_wrench maps back onto C_L * v|v|.
    """
    st, ct = math.sin(theta), math.cos(theta)
    return np.array([[st, -ct], [ct, st]])


class HolonomicController:
    """Bundles the three loops and the per-cycle state for the closed loop."""

    def __init__(self, gains: ControlGains, phys: PhysicalParams,
                 literal_square: bool = False):
        self.gains = gains
        self.phys = phys
        self.literal_square = literal_square
        self.state = ControlState()

    def desired_wrench(self, setpoint, theta_obs: float, omega_obs: float,
                       v_obs, dt_cycle: float) -> ForceVector:
        v_des, theta_des = setpoint
        tau = yaw_wrench(theta_des, theta_obs, omega_obs, self.gains,
                         self.phys, self.state, dt_cycle)
        v_c = velocity_command(v_des, v_obs, self.gains, self.state,
                               self.phys.period, dt_cycle)
        fx, fy = planar_wrench(v_c, theta_obs, self.phys.lin_drag,
                               self.literal_square)
        return compose_wrench(fx, fy, tau)
