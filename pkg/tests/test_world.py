import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swarmlink.errors import UnknownRobot
from swarmlink.geometry import MatFrame, Pose2D
from swarmlink.robot import DEFAULT_SPEC, MotorCommand, RobotState
from swarmlink.world import (
    Attachment,
    Constraint,
    PassiveObject,
    World,
    apply_constraint,
    resolve_push,
    step_world,
)


def make_world(*robots, objects=(), constraints=(), attachments=()):
    w = World(mats=[MatFrame(mat_id=1)])
    for r in robots:
        w.add_robot(r)
    for o in objects:
        w.objects[o.object_id] = o
    w.constraints = list(constraints)
    w.attachments = list(attachments)
    return w


def robot(rid, x, y, theta=0.0):
    return RobotState(robot_id=rid, pose=Pose2D(x, y, theta))


class TestStepWorld:
    def test_empty_commands_only_clock_advances(self):
        w = make_world(robot(1, 10, 10))
        before = w.robots[1].pose
        step_world(w, {}, 0.01)
        assert w.clock == pytest.approx(0.01)
        assert w.robots[1].pose == before

    def test_single_robot_moves(self):
        w = make_world(robot(1, 10, 10, 0))
        step_world(w, {1: MotorCommand(10.0, 0.0)}, 0.01)
        assert w.robots[1].pose.x == pytest.approx(10.1)

    def test_unknown_robot_rejected(self):
        w = make_world(robot(1, 10, 10))
        with pytest.raises(UnknownRobot):
            step_world(w, {2: MotorCommand(1.0, 0.0)}, 0.01)

    def test_dt_bounds(self):
        w = make_world(robot(1, 10, 10))
        with pytest.raises(ValueError):
            step_world(w, {}, 0.05)

    def test_robot_clamped_at_mat_edge(self):
        w = make_world(robot(1, 54.5, 10, 0))
        for _ in range(200):
            step_world(w, {1: MotorCommand(17.5, 0.0)}, 0.01)
        assert w.robots[1].pose.x <= 55.0 + 1e-9

    def test_pose_override_moves_robot(self):
        w = make_world(robot(1, 10, 10))
        step_world(w, {}, 0.01, pose_overrides={1: Pose2D(20, 20, 45)})
        assert w.robots[1].pose == Pose2D(20, 20, 45)

    def test_robot_robot_separation(self):
        w = make_world(robot(1, 10, 10), robot(2, 10.5, 10))
        step_world(w, {}, 0.01)
        d = w.robots[1].pose.distance_to(w.robots[2].pose.position)
        assert d == pytest.approx(2 * DEFAULT_SPEC.contact_radius, abs=1e-9)

    def test_determinism_bit_identical(self):
        def run():
            w = make_world(
                robot(1, 10, 10, 30), robot(2, 30, 30, 200),
                objects=[PassiveObject(object_id=5, x=20, y=12, mass=20, footprint_radius=2)],
            )
            rng = random.Random(99)
            log = []
            for _ in range(400):
                cmds = {
                    1: MotorCommand(rng.uniform(-17.5, 17.5), rng.uniform(-500, 500)),
                    2: MotorCommand(rng.uniform(-17.5, 17.5), rng.uniform(-500, 500)),
                }
                step_world(w, cmds, 0.005)
                log.append(w.snapshot())
            return log

        a, b = run(), run()
        assert a == b  # exact float equality, not approx

    def test_containment_never_violated(self):
        w = make_world(robot(1, 5, 5, 0))
        rng = random.Random(4)
        for _ in range(2000):
            step_world(
                w,
                {1: MotorCommand(rng.uniform(-17.5, 17.5), rng.uniform(-1500, 1500))},
                0.005,
            )
            assert any(m.contains(w.robots[1].pose.position) for m in w.mats)


class TestPush:
    def drive_into(self, mass, seconds=1.2):
        obj = PassiveObject(object_id=9, x=20.0, y=10.0, mass=mass, footprint_radius=1.5)
        w = make_world(robot(1, 10, 10, 0), objects=[obj])
        for _ in range(int(seconds / 0.01)):
            step_world(w, {1: MotorCommand(10.0, 0.0)}, 0.01)
        return w

    def test_pushable_at_capacity(self):
        w = self.drive_into(32.0)
        obj = w.objects[9]
        assert obj.x > 20.0  # displaced
        # contact maintained: gap equals the two footprint radii
        d = w.robots[1].pose.distance_to(obj.position)
        assert d == pytest.approx(DEFAULT_SPEC.contact_radius + 1.5, abs=1e-6)

    def test_heavy_object_stalls_robot(self):
        w = self.drive_into(33.0)
        obj = w.objects[9]
        assert obj.x == 20.0 and obj.y == 10.0
        d = w.robots[1].pose.distance_to(obj.position)
        assert d == pytest.approx(DEFAULT_SPEC.contact_radius + 1.5, abs=1e-6)

    def test_threshold_monotone(self):
        rng = random.Random(8)
        for _ in range(50):
            mass = rng.uniform(1.0, 100.0)
            w = self.drive_into(mass, seconds=1.0)
            moved = w.objects[9].x > 20.0 + 1e-9
            assert moved == (mass <= DEFAULT_SPEC.push_capacity)

    def test_resolve_push_grazing(self):
        obj = PassiveObject(object_id=1, x=10.0, y=11.6 + 1.5, mass=10, footprint_radius=1.5)
        pose = Pose2D(8.0, 10.0, 0.0)
        new_robot, new_obj = resolve_push(pose, DEFAULT_SPEC, obj, (2.0, 0.0))
        # Tangential motion, zero normal overlap: neither is disturbed.
        assert new_obj.position == (obj.x, obj.y)
        assert new_robot.position == (10.0, 10.0)


class TestConstraints:
    def test_line_projection(self):
        c = Constraint(
            constraint_id=1, kind="line_segment", subject_robot_ids=(1,),
            a=(0.0, 0.0), b=(20.0, 0.0),
        )
        p = apply_constraint(Pose2D(10.0, 3.0, 45.0), c)
        assert p.position == pytest.approx((10.0, 0.0))
        assert p.theta == 45.0

    def test_point_on_constraint_unchanged(self):
        c = Constraint(
            constraint_id=1, kind="line_segment", subject_robot_ids=(1,),
            a=(0.0, 0.0), b=(20.0, 0.0),
        )
        p = apply_constraint(Pose2D(5.0, 0.0, 0.0), c)
        assert p.position == (5.0, 0.0)

    def test_ring_region_radial_projection(self):
        # Radial projection oracle: point at distance d > r maps to r * unit.
        c = Constraint(
            constraint_id=1, kind="ring_region", subject_robot_ids=(1,),
            center=(0.0, 0.0), radius=10.0,
        )
        p = apply_constraint(Pose2D(15.0, 0.0, 0.0), c)
        ux, uy = 15.0 / 15.0, 0.0 / 15.0
        assert p.position == pytest.approx((10.0 * ux, 10.0 * uy))
        inside = apply_constraint(Pose2D(3.0, 4.0, 0.0), c)
        assert inside.position == (3.0, 4.0)

    def test_ring_boundary_pulls_inward_and_outward(self):
        c = Constraint(
            constraint_id=1, kind="ring_boundary", subject_robot_ids=(1,),
            center=(10.0, 10.0), radius=5.0,
        )
        out = apply_constraint(Pose2D(10.0, 18.0, 0.0), c)
        assert out.position == pytest.approx((10.0, 15.0))
        inn = apply_constraint(Pose2D(10.0, 11.0, 0.0), c)
        assert inn.position == pytest.approx((10.0, 15.0))

    @settings(max_examples=200)
    @given(st.floats(-30, 80), st.floats(-30, 80))
    def test_idempotent(self, x, y):
        for c in [
            Constraint(constraint_id=1, kind="line_segment", subject_robot_ids=(1,),
                       a=(0.0, 0.0), b=(20.0, 5.0)),
            Constraint(constraint_id=2, kind="ring_region", subject_robot_ids=(1,),
                       center=(10.0, 10.0), radius=8.0),
            Constraint(constraint_id=3, kind="ring_boundary", subject_robot_ids=(1,),
                       center=(10.0, 10.0), radius=8.0),
        ]:
            once = apply_constraint(Pose2D(x, y, 0.0), c)
            twice = apply_constraint(once, c)
            assert math.hypot(twice.x - once.x, twice.y - once.y) < 1e-6

    def test_constrained_robot_stays_on_line(self):
        c = Constraint(
            constraint_id=1, kind="line_segment", subject_robot_ids=(1,),
            a=(5.0, 10.0), b=(45.0, 10.0),
        )
        w = make_world(robot(1, 10, 10, 60), constraints=[c])
        for _ in range(300):
            step_world(w, {1: MotorCommand(17.5, 300.0)}, 0.01)
            s = w.robots[1]
            assert abs(s.pose.y - 10.0) < 1e-6
            assert 5.0 - 1e-6 <= s.pose.x <= 45.0 + 1e-6


class TestSensors:
    def test_quantization(self):
        w = make_world(robot(1, 3.14, 2.0, 0.0))
        obs = w.sample_sensors()
        assert len(obs) == 1
        assert obs[0].pose.x == pytest.approx(3.1)

    def test_zero_quantum_exact(self):
        w = make_world(robot(1, 3.14159, 2.0, 0.0))
        w.sensor_quantum = 0.0
        obs = w.sample_sensors()
        assert obs[0].pose.x == 3.14159

    def test_report_cadence(self):
        w = make_world(robot(1, 10, 10))
        assert w.sample_sensors()  # boundary at t=0
        assert w.sample_sensors() == []  # same period: nothing
        step_world(w, {}, 0.005)
        assert w.sample_sensors() == []  # 5 ms: still inside the period
        step_world(w, {}, 0.005)
        assert w.sample_sensors()  # 10 ms boundary

    def test_pen_trace_length_matches_path(self):
        w = make_world(
            robot(1, 10, 10, 0),
            attachments=[Attachment(robot_id=1, kind="pen", color="red", pen_down=True)],
        )
        w.pen_traces[1] = [w.robots[1].pose.position]
        commanded = 0.0
        for i in range(400):
            cmd = MotorCommand(10.0, 80.0 if i % 3 else -40.0)
            step_world(w, {1: cmd}, 0.01)
            commanded += abs(w.robots[1].v) * 0.01
        trace = w.pen_traces[1]
        length = sum(
            math.hypot(bx - ax, by - ay)
            for (ax, ay), (bx, by) in zip(trace, trace[1:])
        )
        assert length == pytest.approx(commanded, rel=0.01)


class TestVerticalSlip:
    def make_vertical_world(self, slip):
        w = World(mats=[MatFrame(mat_id=1, orientation_mode="vertical")])
        w.add_robot(robot(1, 27.5, 40.0, 0.0))
        w.attachments.append(Attachment(robot_id=1, kind="magnet"))
        w.vertical_slip_cm_s = slip
        w.validate()
        return w

    def test_no_slip_by_default(self):
        w = self.make_vertical_world(0.0)
        for _ in range(100):
            step_world(w, {}, 0.01)
        assert w.robots[1].pose.y == 40.0

    def test_configured_slip_drifts_down(self):
        w = self.make_vertical_world(2.0)
        for _ in range(100):
            step_world(w, {}, 0.01)
        assert w.robots[1].pose.y == pytest.approx(40.0 - 2.0, abs=1e-9)

    def test_horizontal_mats_never_slip(self):
        w = make_world(robot(1, 27.5, 40.0))
        w.vertical_slip_cm_s = 5.0
        for _ in range(100):
            step_world(w, {}, 0.01)
        assert w.robots[1].pose.y == 40.0


class TestValidate:
    def test_vertical_mat_requires_magnet(self):
        w = World(mats=[MatFrame(mat_id=1, orientation_mode="vertical")])
        w.add_robot(robot(1, 10, 10))
        with pytest.raises(ValueError):
            w.validate()
        w.attachments.append(Attachment(robot_id=1, kind="magnet"))
        w.validate()

    def test_object_kind_validated(self):
        with pytest.raises(ValueError):
            PassiveObject(object_id=1, x=0, y=0, mass=5, footprint_radius=1, kind="spaceship")

    def test_positive_mass_required(self):
        with pytest.raises(ValueError):
            PassiveObject(object_id=1, x=0, y=0, mass=0.0, footprint_radius=1)
