import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from holoraft import controller as ctl

GAINS = ctl.ControlGains()
PHYS = ctl.PhysicalParams()
DT_CYCLE = PHYS.period + 0.75


class TestYawWrench:
    def test_zero_error_zero_torque(self):
        state = ctl.ControlState()
        tau = ctl.yaw_wrench(0.3, 0.3, 0.0, GAINS, PHYS, state, DT_CYCLE)
        assert tau == 0.0

    def test_on_track_turn_keeps_only_drag_feedforward(self):
        # Heading error vanishes when the predicted yaw lands on target.
        state = ctl.ControlState()
        omega = 0.4
        theta_obs = 1.0
        theta_des = theta_obs + omega * PHYS.period
        tau = ctl.yaw_wrench(theta_des, theta_obs, omega, GAINS, PHYS, state,
                             DT_CYCLE)
        assert tau == pytest.approx(PHYS.rot_drag * omega * omega)

    def test_reference_step_response(self):
        gains = ctl.ControlGains(kp_yaw=1.0, kd_yaw=0.0)
        state = ctl.ControlState()
        tau = ctl.yaw_wrench(math.pi / 2, 0.0, 0.0, gains, PHYS, state,
                             DT_CYCLE)
        assert tau == pytest.approx(0.02 * math.pi / 2)  # 0.0314 N m

    @given(k_des=st.integers(-3, 3), k_obs=st.integers(-3, 3),
           theta_des=st.floats(-3, 3), theta_obs=st.floats(-3, 3))
    def test_wrap_invariance(self, k_des, k_obs, theta_des, theta_obs):
        two_pi = 2 * math.pi
        t1 = ctl.yaw_wrench(theta_des, theta_obs, 0.1, GAINS, PHYS,
                            ctl.ControlState(), DT_CYCLE)
        t2 = ctl.yaw_wrench(theta_des + two_pi * k_des,
                            theta_obs + two_pi * k_obs, 0.1, GAINS, PHYS,
                            ctl.ControlState(), DT_CYCLE)
        assert t2 == pytest.approx(t1, abs=1e-9)

    def test_derivative_uses_backward_difference(self):
        gains = ctl.ControlGains(kp_yaw=0.0, kd_yaw=1.0)
        state = ctl.ControlState()
        ctl.yaw_wrench(0.5, 0.0, 0.0, gains, PHYS, state, DT_CYCLE)
        tau = ctl.yaw_wrench(0.2, 0.0, 0.0, gains, PHYS, state, DT_CYCLE)
        assert tau == pytest.approx(PHYS.inertia * (0.2 - 0.5) / DT_CYCLE)


class TestVelocityCommand:
    def test_first_cycle_no_error_passthrough(self):
        state = ctl.ControlState()
        v_c = ctl.velocity_command((0.04, 0.0), (0.04, 0.0), GAINS, state,
                                   PHYS.period, DT_CYCLE)
        np.testing.assert_allclose(v_c, [0.04, 0.0])
        assert state.n_cycles == 1

    def test_first_cycle_proportional_boost(self):
        state = ctl.ControlState()
        v_c = ctl.velocity_command((0.01, 0.0), (0.0, 0.0),
                                   ctl.ControlGains(kp_vel=1.0, kd_vel=0.0),
                                   state, 1.5, DT_CYCLE)
        np.testing.assert_allclose(v_c, [0.01 + 0.015, 0.0])

    def test_stale_history_decays_geometrically(self):
        state = ctl.ControlState()
        gains = ctl.ControlGains(kp_vel=1.0, kd_vel=0.0, gamma=0.9)
        # One cycle with error, then perfect tracking.
        ctl.velocity_command((0.04, 0.0), (0.0, 0.0), gains, state, 1.5,
                             DT_CYCLE)
        sum_after_first = state.acc_sum.copy()
        offsets = []
        for _ in range(30):
            v_c = ctl.velocity_command((0.04, 0.0), (0.04, 0.0), gains, state,
                                       1.5, DT_CYCLE)
            offsets.append(np.linalg.norm(v_c - np.array([0.04, 0.0])))
        n = state.n_cycles
        bound = gains.gamma ** (n - 1) * np.linalg.norm(sum_after_first) * 1.5
        assert offsets[-1] <= bound + 1e-12
        assert offsets[-1] < offsets[0] * 0.1

    def test_sum_absorbs_each_acceleration(self):
        state = ctl.ControlState()
        gains = ctl.ControlGains(kp_vel=2.0, kd_vel=0.0)
        ctl.velocity_command((0.1, 0.0), (0.0, 0.0), gains, state, 1.5,
                             DT_CYCLE)
        np.testing.assert_allclose(state.acc_sum, [0.2, 0.0])
        ctl.velocity_command((0.1, 0.0), (0.05, 0.0), gains, state, 1.5,
                             DT_CYCLE)
        np.testing.assert_allclose(state.acc_sum, [0.3, 0.0])
        assert state.n_cycles == 2


class TestPlanarWrench:
    def test_identity_orientation(self):
        fx, fy = ctl.planar_wrench((0.04, 0.0), math.pi / 2, 5.0)
        assert (fx, fy) == (pytest.approx(0.008), pytest.approx(0.0))

    def test_zero_command(self):
        assert ctl.planar_wrench((0.0, 0.0), 1.2, 5.0) == (0.0, 0.0)

    @given(vx=st.floats(-0.1, 0.1), vy=st.floats(-0.1, 0.1),
           theta=st.floats(-math.pi, math.pi))
    def test_odd_symmetry(self, vx, vy, theta):
        f = np.array(ctl.planar_wrench((vx, vy), theta, 5.0))
        g = np.array(ctl.planar_wrench((-vx, -vy), theta, 5.0))
        np.testing.assert_allclose(g, -f, atol=1e-15)

    @given(vx=st.floats(-0.1, 0.1), vy=st.floats(-0.1, 0.1),
           theta=st.floats(-10, 10))
    def test_world_roundtrip_matches_quadratic_drag(self, vx, vy, theta):
        v_c = np.array([vx, vy])
        f_body = np.array(ctl.planar_wrench(v_c, theta, 5.0))
        f_world = ctl.world_from_body(theta) @ f_body
        np.testing.assert_allclose(f_world, 5.0 * v_c * np.abs(v_c),
                                   atol=1e-12)

    def test_literal_square_loses_direction(self):
        signed = ctl.planar_wrench((-0.04, 0.0), math.pi / 2, 5.0)
        literal = ctl.planar_wrench((-0.04, 0.0), math.pi / 2, 5.0,
                                    literal_square=True)
        assert signed[0] == pytest.approx(-0.008)
        assert literal[0] == pytest.approx(0.008)


class TestComposeAndGuards:
    def test_compose_packs(self):
        w = ctl.compose_wrench(1.0, 2.0, 3.0)
        assert tuple(w) == (1.0, 2.0, 3.0)

    def test_gamma_bounds_enforced(self):
        with pytest.raises(ValueError):
            ctl.ControlGains(gamma=1.0)
        with pytest.raises(ValueError):
            ctl.ControlGains(kp_yaw=-0.1)

    def test_physical_params_positive(self):
        with pytest.raises(ValueError):
            ctl.PhysicalParams(mass=0.0)

    def test_state_serializable(self):
        state = ctl.ControlState()
        ctl.velocity_command((0.1, 0.0), (0.0, 0.0), GAINS, state, 1.5,
                             DT_CYCLE)
        d = state.as_dict()
        assert d["n_cycles"] == 1
        assert isinstance(d["acc_sum"], list)
