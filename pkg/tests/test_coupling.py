import random

import pytest

from swarmlink.coupling import (
    FINGERS,
    MINIATURE_BODY_TOLERANCE,
    Binding,
    BodySkeleton,
    Coupler,
    CouplingInputs,
    HandPose,
    TouchZone,
    assign_fingers,
    detect_manual_grab,
    resolve_conflicts,
)
from swarmlink.geometry import Pose2D, Transform2D, identity
from swarmlink.robot import DEFAULT_SPEC, RobotState, goto_controller, is_at_goal
from swarmlink.world import RobotObservation


def obs_inputs(now=0.0, **kwargs):
    return CouplingInputs(now=now, **kwargs)


def robot_states(*poses):
    return {
        rid: RobotState(robot_id=rid, pose=pose) for rid, pose in poses
    }


class TestAssignFingers:
    def test_three_fingers_three_robots(self):
        got = assign_fingers({"thumb", "index", "pinky"}, [3, 1, 2])
        assert got == {"index": 1, "thumb": 2, "pinky": 3}

    def test_three_fingers_one_robot_index_wins(self):
        # Priority decision verified against the exhaustive table below.
        assert assign_fingers({"thumb", "index", "pinky"}, [7]) == {"index": 7}

    def test_no_fingers(self):
        assert assign_fingers(set(), [1, 2]) == {}

    def test_exhaustive_table(self):
        # All 8 finger subsets x 0..3 robots: deterministic and total.
        priority = ["index", "thumb", "pinky"]
        for subset_bits in range(8):
            present = {f for i, f in enumerate(FINGERS) if subset_bits & (1 << i)}
            for n_robots in range(4):
                robots = list(range(1, n_robots + 1))
                got = assign_fingers(present, robots)
                expect = {}
                pool = list(robots)
                for f in priority:
                    if f in present and pool:
                        expect[f] = pool.pop(0)
                assert got == expect


class TestComputeGoals:
    def test_mirror_identity_calibration(self):
        b = Binding(binding_id=1, mode="mirror", source_key=101, target_robot_id=1)
        coupler = Coupler([b])
        inputs = obs_inputs(observations={101: (Pose2D(10.0, 10.0, 0.0), 0.0)})
        goals = coupler.active_goals(inputs, robot_states((1, Pose2D(0, 0))))
        assert goals[1].target == (10.0, 10.0)

    def test_mirror_through_calibration(self):
        b = Binding(binding_id=1, mode="mirror", source_key=101, target_robot_id=1)
        coupler = Coupler([b])
        cal = Transform2D(rotation=90.0, dx=5.0, dy=0.0)
        inputs = obs_inputs(
            observations={101: (Pose2D(10.0, 0.0, 0.0), 0.0)}, calibration=cal
        )
        goals = coupler.active_goals(inputs, robot_states((1, Pose2D(0, 0))))
        assert goals[1].target == pytest.approx((5.0, 10.0))

    def test_miniature_body_scaling_and_tolerance(self):
        b = Binding(binding_id=1, mode="miniature_body", source_key="pelvis", target_robot_id=1)
        assert b.tolerance_override == MINIATURE_BODY_TOLERANCE
        coupler = Coupler([b])
        sk = BodySkeleton(timestamp=0.0, joints={"pelvis": (100.0, 50.0)},
                          world_to_miniature_scale=0.1)
        inputs = obs_inputs(skeletons={1: sk})
        goals = coupler.active_goals(inputs, robot_states((1, Pose2D(0, 0))))
        assert goals[1].target == pytest.approx((10.0, 5.0))
        assert goals[1].tolerance == 0.4

    def test_virtual_grasp_uses_object_pose(self):
        b = Binding(binding_id=1, mode="virtual_grasp", source_key=201, target_robot_id=2)
        coupler = Coupler([b])
        inputs = obs_inputs(observations={201: (Pose2D(30.0, 40.0, 0.0), 0.0)})
        goals = coupler.active_goals(inputs, robot_states((2, Pose2D(0, 0))))
        assert goals[2].target == (30.0, 40.0)

    def test_finger_follow_hold_last_on_dropout(self):
        b = Binding(binding_id=1, mode="finger_follow", source_key="index", target_robot_id=1)
        coupler = Coupler([b])
        states = robot_states((1, Pose2D(0, 0)))
        hand = HandPose(timestamp=0.0, fingers={"index": (12.0, 8.0)})
        goals = coupler.active_goals(obs_inputs(now=0.0, hands={1: hand}), states)
        assert goals[1].target == (12.0, 8.0)
        # Finger missing this frame: the previous goal holds.
        goals = coupler.active_goals(obs_inputs(now=0.5, hands={1: HandPose(timestamp=0.5)}), states)
        assert goals[1].target == (12.0, 8.0)
        assert coupler.binding(1).active

    def test_binding_dropped_after_silence(self):
        b = Binding(binding_id=1, mode="finger_follow", source_key="index", target_robot_id=1)
        coupler = Coupler([b])
        states = robot_states((1, Pose2D(0, 0)))
        hand = HandPose(timestamp=0.0, fingers={"index": (12.0, 8.0)})
        coupler.active_goals(obs_inputs(now=0.0, hands={1: hand}), states)
        coupler.active_goals(obs_inputs(now=0.9, hands={1: HandPose(timestamp=0.9)}), states)
        assert coupler.binding(1).active
        goals = coupler.active_goals(obs_inputs(now=1.2, hands={1: HandPose(timestamp=1.2)}), states)
        assert not coupler.binding(1).active
        assert 1 not in goals

    def test_haptic_touch_clamps_to_zone_boundary(self):
        b = Binding(binding_id=1, mode="haptic_touch", source_key=1, target_robot_id=1)
        coupler = Coupler([b])
        zone = TouchZone(zone_id=1, center=(40.0, 30.0), radius=5.0)
        hand = HandPose(timestamp=0.0, fingers={"index": (38.0, 30.0)})
        inputs = obs_inputs(hands={1: hand}, touch_zones=[zone])
        goals = coupler.active_goals(inputs, robot_states((1, Pose2D(0, 0))))
        assert goals[1].target == pytest.approx((35.0, 30.0))

    def test_haptic_touch_outside_zone_follows_hand(self):
        b = Binding(binding_id=1, mode="haptic_touch", source_key=1, target_robot_id=1)
        coupler = Coupler([b])
        zone = TouchZone(zone_id=1, center=(40.0, 30.0), radius=5.0)
        hand = HandPose(timestamp=0.0, fingers={"index": (10.0, 10.0)})
        inputs = obs_inputs(hands={1: hand}, touch_zones=[zone])
        goals = coupler.active_goals(inputs, robot_states((1, Pose2D(0, 0))))
        assert goals[1].target == (10.0, 10.0)


class TestResolveConflicts:
    def test_grabbed_robot_gets_no_goal(self):
        b = Binding(binding_id=1, mode="mirror", source_key=101, target_robot_id=1)
        coupler = Coupler([b])
        states = robot_states((1, Pose2D(0, 0)))
        states[1].grabbed_by_local = True
        inputs = obs_inputs(observations={101: (Pose2D(10, 10, 0), 0.0)})
        assert coupler.active_goals(inputs, states) == {}

    def test_goal_restored_after_release(self):
        b = Binding(binding_id=1, mode="mirror", source_key=101, target_robot_id=1)
        coupler = Coupler([b])
        states = robot_states((1, Pose2D(0, 0)))
        inputs = obs_inputs(observations={101: (Pose2D(10, 10, 0), 0.0)})
        states[1].grabbed_by_local = True
        assert coupler.active_goals(inputs, states) == {}
        states[1].grabbed_by_local = False
        goals = coupler.active_goals(inputs, states)
        assert goals[1].target == (10.0, 10.0)

    def test_priority_wins(self):
        bindings = [
            Binding(binding_id=1, mode="mirror", source_key=101, target_robot_id=1, priority=1),
            Binding(binding_id=2, mode="mirror", source_key=102, target_robot_id=1, priority=2),
        ]
        coupler = Coupler(bindings)
        inputs = obs_inputs(
            observations={101: (Pose2D(1, 1, 0), 0.0), 102: (Pose2D(2, 2, 0), 0.0)}
        )
        goals = coupler.active_goals(inputs, robot_states((1, Pose2D(0, 0))))
        assert goals[1].target == (2.0, 2.0)

    def test_tie_breaks_on_lowest_binding_id(self):
        bindings = [
            Binding(binding_id=4, mode="mirror", source_key=104, target_robot_id=1),
            Binding(binding_id=3, mode="mirror", source_key=103, target_robot_id=1),
        ]
        coupler = Coupler(bindings)
        inputs = obs_inputs(
            observations={103: (Pose2D(3, 3, 0), 0.0), 104: (Pose2D(4, 4, 0), 0.0)}
        )
        goals = coupler.active_goals(inputs, robot_states((1, Pose2D(0, 0))))
        assert goals[1].target == (3.0, 3.0)

    def test_at_most_one_goal_per_robot(self):
        rng = random.Random(0)
        bindings = [
            Binding(binding_id=i, mode="mirror", source_key=100 + i,
                    target_robot_id=rng.randint(1, 3), priority=rng.randint(0, 3))
            for i in range(1, 10)
        ]
        coupler = Coupler(bindings)
        inputs = obs_inputs(
            observations={100 + i: (Pose2D(i, i, 0), 0.0) for i in range(1, 10)}
        )
        goals = coupler.active_goals(
            inputs, robot_states((1, Pose2D(0, 0)), (2, Pose2D(0, 0)), (3, Pose2D(0, 0)))
        )
        assert set(goals) <= {1, 2, 3}


class TestMirrorFixpoint:
    def test_quiescent_at_corresponding_poses(self):
        # Remote and local at calibration-corresponding poses: no commands.
        rng = random.Random(21)
        for _ in range(300):
            cal = Transform2D(
                rotation=rng.choice([0.0, 90.0, 180.0]),
                dx=rng.uniform(-5, 5),
                dy=rng.uniform(-5, 5),
            )
            remote = Pose2D(rng.uniform(5, 50), rng.uniform(5, 50), rng.uniform(0, 360))
            lx, ly = cal.apply(remote.position)
            local = RobotState(robot_id=1, pose=Pose2D(lx, ly, 0.0))
            coupler = Coupler(
                [Binding(binding_id=1, mode="mirror", source_key=9, target_robot_id=1)]
            )
            inputs = obs_inputs(observations={9: (remote, 0.0)}, calibration=cal)
            goals = coupler.active_goals(inputs, {1: local})
            assert is_at_goal(local, goals[1], DEFAULT_SPEC)
            assert goto_controller(local, goals[1], DEFAULT_SPEC).is_stop


class TestDetectManualGrab:
    def obs(self, seq):
        return [
            RobotObservation(robot_id=1, pose=Pose2D(x, y, 0.0), t=t)
            for t, x, y in seq
        ]

    def test_teleport_detected(self):
        history = self.obs([(0.00, 10.0, 10.0), (0.01, 10.0, 10.0), (0.02, 15.0, 10.0)])
        assert detect_manual_grab(history, commanded_speed=0.0)

    def test_commanded_motion_not_flagged(self):
        history = self.obs([(0.00, 10.0, 10.0), (0.01, 10.1, 10.0), (0.02, 10.2, 10.0)])
        assert not detect_manual_grab(history, commanded_speed=10.0)

    def test_boundary_is_strict(self):
        # Displacement exactly at threshold (cmd*dt + 2*tol) must not trigger.
        threshold = 10.0 * 0.01 + 2 * 1.1
        history = self.obs([(0.00, 0.0, 0.0), (0.01, 0.0, 0.0), (0.02, threshold, 0.0)])
        assert not detect_manual_grab(history, commanded_speed=10.0)
        history = self.obs([(0.00, 0.0, 0.0), (0.01, 0.0, 0.0), (0.02, threshold + 0.01, 0.0)])
        assert detect_manual_grab(history, commanded_speed=10.0)

    def test_needs_three_observations(self):
        history = self.obs([(0.00, 0.0, 0.0), (0.01, 50.0, 0.0)])
        assert not detect_manual_grab(history, commanded_speed=0.0)


class TestBindCtl:
    def test_applies_activation_and_tolerance(self):
        from swarmlink.coupling import apply_bind_ctl
        from swarmlink.protocol import BindCtlPayload

        b = Binding(binding_id=4, mode="mirror", source_key=101, target_robot_id=1)
        coupler = Coupler([b])
        ok = apply_bind_ctl(
            coupler,
            BindCtlPayload(binding_id=4, mode="mirror", source_id=101,
                           target_robot_id=1, active=False, tolerance=0.7, priority=2),
        )
        assert ok
        assert not b.active
        assert b.tolerance_override == 0.7
        assert b.priority == 2

    def test_unknown_binding_rejected(self):
        from swarmlink.coupling import apply_bind_ctl
        from swarmlink.protocol import BindCtlPayload

        coupler = Coupler([])
        assert not apply_bind_ctl(
            coupler,
            BindCtlPayload(binding_id=9, mode="mirror", source_id=1,
                           target_robot_id=1, active=True),
        )

    def test_miniature_body_tolerance_is_pinned(self):
        from swarmlink.coupling import apply_bind_ctl
        from swarmlink.protocol import BindCtlPayload

        b = Binding(binding_id=5, mode="miniature_body", source_key="pelvis",
                    target_robot_id=1)
        coupler = Coupler([b])
        apply_bind_ctl(
            coupler,
            BindCtlPayload(binding_id=5, mode="miniature_body", source_id=0,
                           target_robot_id=1, active=True, tolerance=3.0),
        )
        assert b.tolerance_override == MINIATURE_BODY_TOLERANCE


def test_binding_mode_validated():
    with pytest.raises(ValueError):
        Binding(binding_id=1, mode="levitate", source_key=1, target_robot_id=1)


def test_hand_pose_validates_fingers():
    with pytest.raises(ValueError):
        HandPose(timestamp=0.0, fingers={"ring": (0.0, 0.0)})
    with pytest.raises(ValueError):
        HandPose(timestamp=0.0, fingers={"index": (float("nan"), 0.0)})
