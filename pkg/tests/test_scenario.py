import copy
import json
import time

import pytest

from swarmlink.engine import TwoRoomSession, run_scenario
from swarmlink.errors import ConfigError, CorruptLog, MissingEvent
from swarmlink.metrics import (
    compute_metrics,
    dump_records,
    export_metrics,
    measure_start_latency,
    parse_log_bytes,
    parse_metrics_csv,
    read_log,
    replay,
    write_log,
)
from swarmlink.scenario import (
    Waypoints,
    bundled_scenario_names,
    load_scenario,
    load_scenario_dict,
    parse_scenario,
)


def minimal_scenario(**extra):
    cfg = {
        "id": "mini",
        "duration_s": 1.0,
        "seed": 7,
        "rooms": {
            "remote": {"mats": [{"id": 1}], "robots": [{"id": 1, "x": 10, "y": 10}]},
            "local": {"mats": [{"id": 1}], "robots": [{"id": 1, "x": 10, "y": 10}]},
        },
        "bindings": [{"id": 1, "mode": "mirror", "source": 1, "target": 1}],
        "scripts": {},
        "metrics": {},
    }
    cfg.update(extra)
    return cfg


class TestWaypoints:
    def test_clamps_outside_range(self):
        w = Waypoints([[0.0, 1.0, 2.0], [1.0, 3.0, 4.0]])
        assert w.sample(-1.0) == (1.0, 2.0)
        assert w.sample(9.0) == (3.0, 4.0)

    def test_linear_interp(self):
        w = Waypoints([[0.0, 0.0, 0.0], [2.0, 10.0, 20.0]])
        assert w.sample(1.0) == (5.0, 10.0)

    def test_heading_shortest_arc(self):
        w = Waypoints([[0.0, 0.0, 0.0, 350.0], [1.0, 0.0, 0.0, 10.0]])
        x, y, theta = w.sample(0.5)
        assert theta % 360.0 == pytest.approx(0.0, abs=1e-9)

    def test_step_change_at_duplicate_time(self):
        w = Waypoints([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 5.0, 0.0], [2.0, 5.0, 0.0]])
        assert w.sample(0.999) == (0.0, 0.0)
        assert w.sample(1.0) == (5.0, 0.0)

    def test_unsorted_times_rejected(self):
        with pytest.raises(ValueError):
            Waypoints([[1.0, 0.0, 0.0], [0.0, 1.0, 1.0]])


class TestConfigValidation:
    def test_minimal_parses(self):
        spec = parse_scenario(minimal_scenario())
        assert spec.scenario_id == "mini"
        assert spec.dt_s == 0.005

    def test_missing_duration(self):
        cfg = minimal_scenario()
        del cfg["duration_s"]
        with pytest.raises(ConfigError) as exc:
            parse_scenario(cfg)
        assert "duration_s" in exc.value.path

    def test_unresolved_binding_target(self):
        cfg = minimal_scenario()
        cfg["bindings"][0]["target"] = 99
        with pytest.raises(ConfigError) as exc:
            parse_scenario(cfg)
        assert exc.value.path == "$.bindings[0].target"

    def test_unresolved_binding_source(self):
        cfg = minimal_scenario()
        cfg["bindings"][0]["source"] = 99
        with pytest.raises(ConfigError) as exc:
            parse_scenario(cfg)
        assert "source" in exc.value.path

    def test_unknown_widget_in_script(self):
        cfg = minimal_scenario()
        cfg["scripts"] = {"widget_sets": [{"t": 0.1, "widget": 5, "value": 0.5}]}
        with pytest.raises(ConfigError) as exc:
            parse_scenario(cfg)
        assert "widget_sets" in exc.value.path

    def test_bad_loss_rate(self):
        cfg = minimal_scenario(link={"loss": 1.0})
        with pytest.raises(ConfigError):
            parse_scenario(cfg)

    def test_overrides_applied(self):
        spec = parse_scenario(
            minimal_scenario(), {"seed": 99, "latency_ms": 123.0, "duration_s": 2.5}
        )
        assert spec.seed == 99
        assert spec.link.latency_ms == 123.0
        assert spec.duration_s == 2.5
        assert spec.resolved["link"]["latency_ms"] == 123.0

    def test_metric_trigger_must_exist(self):
        cfg = minimal_scenario()
        cfg["metrics"] = {"start_latency": {"trigger": "nope", "robot": 1}}
        with pytest.raises(ConfigError):
            parse_scenario(cfg)

    def test_bundled_names(self):
        names = bundled_scenario_names()
        assert {"d1", "d2", "d3", "d4", "sandbox"} <= set(names)

    def test_unknown_scenario_name(self):
        with pytest.raises(ConfigError):
            load_scenario_dict("zz-missing")


class TestDeterminism:
    @pytest.mark.parametrize("name", ["d1", "d2", "d3", "d4"])
    def test_bundled_runs_byte_identical_and_fast(self, name):
        t0 = time.time()
        records_a, _ = run_scenario(name)
        elapsed = time.time() - t0
        records_b, _ = run_scenario(name)
        assert dump_records(records_a) == dump_records(records_b)
        assert elapsed < 10.0

    def test_different_seed_changes_lossy_log(self):
        cfg = minimal_scenario(link={"latency_ms": 50.0, "loss": 0.4})
        cfg["scripts"] = {
            "remote_robot_paths": [
                {"robot": 1, "waypoints": [[0.0, 10.0, 10.0], [1.0, 40.0, 40.0]]}
            ]
        }
        a, _ = run_scenario(copy.deepcopy(cfg), {"seed": 1})
        b, _ = run_scenario(copy.deepcopy(cfg), {"seed": 2})
        assert dump_records(a) != dump_records(b)


class TestReplay:
    def test_replay_reproduces_metrics_exactly(self, tmp_path):
        records, metrics = run_scenario("d1")
        path = tmp_path / "d1.jsonl"
        write_log(records, path)
        replayed = read_log(path)
        again = compute_metrics(replayed)
        assert again == metrics  # dataclass equality, exact floats

    def test_replay_snapshots_match_run(self, tmp_path):
        records, _ = run_scenario("d2")
        path = tmp_path / "d2.jsonl"
        write_log(records, path)
        snaps = replay(path)
        original = [r for r in records if r["kind"] == "tick"]
        assert snaps == original

    def test_empty_log(self):
        assert parse_log_bytes(b"") == []
        assert replay([]) == []

    def test_truncated_line_reports_number(self, tmp_path):
        records, _ = run_scenario("d2", {"duration_s": 0.2})
        data = dump_records(records)
        broken = data[: len(data) - 5]  # chop the final line mid-JSON
        with pytest.raises(CorruptLog) as exc:
            parse_log_bytes(broken)
        assert exc.value.line_number == len(records)

    def test_headerless_log_rejected(self):
        with pytest.raises(CorruptLog) as exc:
            parse_log_bytes(b'{"kind":"tick","t":0.0}\n')
        assert exc.value.line_number == 1


class TestStartLatency:
    def jump_scenario(self, latency_ms, theta=0.0):
        return {
            "id": "jump",
            "duration_s": 2.0,
            "seed": 5,
            "link": {"latency_ms": latency_ms},
            "rooms": {
                "remote": {"mats": [{"id": 1}]},
                "local": {
                    "mats": [{"id": 1}],
                    "robots": [{"id": 1, "x": 10.0, "y": 27.5, "theta": theta}],
                },
            },
            "bindings": [
                {"id": 1, "mode": "virtual_grasp", "source": 101, "target": 1}
            ],
            "scripts": {
                "virtual_objects": [
                    {
                        "id": 101,
                        "waypoints": [
                            [0.0, 10.0, 27.5],
                            [1.0, 10.0, 27.5],
                            [1.0, 25.0, 27.5],
                            [2.0, 25.0, 27.5],
                        ],
                    }
                ],
                "triggers": [{"t": 1.0, "label": "jump", "robot": 1}],
            },
            "metrics": {"start_latency": {"trigger": "jump", "robot": 1}},
        }

    def test_decomposes_into_link_plus_alignment(self):
        # Known components: 100 ms link, pre-aligned heading, goal jump on a
        # send boundary. Measured latency within one report period of the link.
        records, metrics = run_scenario(self.jump_scenario(100.0))
        assert metrics.start_latency_s == pytest.approx(0.100, abs=0.010)

    def test_measure_requires_trigger(self):
        records, _ = run_scenario(self.jump_scenario(50.0))
        with pytest.raises(MissingEvent):
            measure_start_latency(records, "absent", 1)

    def test_measure_requires_motion(self):
        cfg = self.jump_scenario(50.0)
        # Jump inside the deadband: no motion event at all.
        cfg["scripts"]["virtual_objects"][0]["waypoints"] = [
            [0.0, 10.0, 27.5], [1.0, 10.0, 27.5], [1.0, 10.9, 27.5], [2.0, 10.9, 27.5]
        ]
        records, metrics = run_scenario(cfg)
        with pytest.raises(MissingEvent):
            measure_start_latency(records, "jump", 1)
        assert metrics.start_latency_s is None

    def test_rotation_counts_as_first_motion(self):
        records, metrics = run_scenario(self.jump_scenario(50.0, theta=180.0))
        assert metrics.start_latency_s is not None
        assert metrics.start_latency_s <= 0.050 + 0.010
        # The first commanded motion is a pure rotation.
        t0 = None
        for r in records:
            if r["kind"] == "event" and r.get("name") == "trigger":
                t0 = r["t"]
            if t0 is not None and r["kind"] == "tick":
                cmd = r.get("cmds", {}).get("1")
                if cmd and (cmd[0] != 0.0 or cmd[1] != 0.0):
                    assert cmd[0] == 0.0 and abs(cmd[1]) == 1500.0
                    break


class TestGrabSuspension:
    def test_scripted_grab_suspends_remote_control(self):
        cfg = minimal_scenario(duration_s=3.0)
        cfg["link"] = {"latency_ms": 0.0}
        cfg["scripts"] = {
            "remote_robot_paths": [
                {"robot": 1, "waypoints": [[0.0, 10.0, 10.0], [3.0, 45.0, 10.0]]}
            ],
            "local_grabs": [
                {"robot": 1, "t": 1.0, "duration_s": 0.5, "dx_cm": 0.0, "dy_cm": 15.0}
            ],
        }
        records, _ = run_scenario(cfg)
        grab_events = [
            r for r in records if r["kind"] == "event" and r["name"] == "grab"
        ]
        assert any(g["grabbed"] for g in grab_events)
        # While detected as grabbed, no commands are issued for the robot.
        grabbed_spans = [
            r for r in records if r["kind"] == "tick" and "grabbed" in r
        ]
        assert grabbed_spans
        for r in grabbed_spans:
            assert "1" not in r["cmds"]
        # After release, tracking resumes: commands appear again later.
        release_t = max(g["t"] for g in grab_events)
        resumed = [
            r
            for r in records
            if r["kind"] == "tick" and r["t"] > release_t and r["cmds"].get("1")
        ]
        assert resumed


class TestWidgetScripts:
    def test_widget_set_drives_robot_to_param(self):
        cfg = minimal_scenario(duration_s=3.0)
        cfg["rooms"]["local"]["robots"] = [{"id": 1, "x": 10.0, "y": 5.0}]
        cfg["rooms"]["remote"]["robots"] = []
        cfg["bindings"] = []
        cfg["widgets"] = [
            {"id": 1, "kind": "slider", "robots": [1], "track": [[5.0, 5.0], [45.0, 5.0]]}
        ]
        cfg["scripts"] = {"widget_sets": [{"t": 0.5, "widget": 1, "value": 0.75}]}
        records, metrics = run_scenario(cfg)
        final = [r for r in records if r["kind"] == "tick"][-1]
        x = final["local"]["robots"]["1"][0]
        assert x == pytest.approx(5.0 + 0.75 * 40.0, abs=1.2)
        widgets = [r for r in records if r["kind"] == "widget"]
        assert widgets
        assert widgets[-1]["params"]["value"] == pytest.approx(0.75, abs=0.05)


class TestExport:
    def test_csv_single_row(self):
        _, metrics = run_scenario("d2", {"duration_s": 1.0})
        data = export_metrics(metrics, "csv")
        lines = data.decode().strip().splitlines()
        assert len(lines) == 2
        assert lines[0].startswith("scenario_id,seed,duration_s,start_latency_s")

    def test_float_formatting_rule(self):
        _, metrics = run_scenario("d2", {"duration_s": 1.0})
        metrics.start_latency_s = 0.2
        data = export_metrics(metrics, "csv").decode()
        assert "0.200000" in data

    def test_json_csv_parse_back_agree(self):
        _, metrics = run_scenario("d1", {"duration_s": 2.0})
        json_rows = json.loads(export_metrics(metrics, "json"))
        csv_rows = parse_metrics_csv(export_metrics(metrics, "csv"))
        assert len(json_rows) == len(csv_rows) == 1
        for key, jv in json_rows[0].items():
            cv = csv_rows[0][key]
            if jv is None:
                assert cv is None
            elif isinstance(cv, float):
                assert float(jv) == pytest.approx(cv, rel=1e-5)
            else:
                assert str(jv) == str(cv)

    def test_unknown_format(self):
        _, metrics = run_scenario("d2", {"duration_s": 0.5})
        with pytest.raises(ValueError):
            export_metrics(metrics, "xml")


class TestCalibrationAnnounce:
    def test_calibration_message_sent_once_at_start(self):
        records, _ = run_scenario("d1", {"duration_s": 0.5})
        cal_msgs = [
            r
            for r in records
            if r["kind"] == "msg" and r["type"] == "calibration" and r["event"] == "sent"
        ]
        assert len(cal_msgs) == 1
        assert cal_msgs[0]["dir"] == "lr"
        assert cal_msgs[0]["t"] == 0.0


class TestEmptyScenario:
    def test_empty_world_valid_log(self):
        cfg = {
            "id": "empty",
            "duration_s": 0.5,
            "rooms": {"remote": {"mats": [{"id": 1}]}, "local": {"mats": [{"id": 1}]}},
        }
        records, metrics = run_scenario(cfg)
        assert records[0]["kind"] == "header"
        assert len([r for r in records if r["kind"] == "tick"]) == 100
        assert metrics.per_robot == {}
        assert metrics.flat_row()["path_length_total_cm"] == 0.0


class TestCli:
    def test_run_replay_export_cycle(self, tmp_path, capsys):
        from swarmlink.cli import main

        log = tmp_path / "out.jsonl"
        assert main(["run", "d2", "--duration-s", "1.0", "--out", str(log)]) == 0
        assert log.exists()
        assert main(["replay", str(log)]) == 0
        out = capsys.readouterr().out
        assert '"scenario_id": "d2"' in out
        csv_path = tmp_path / "m.csv"
        assert main(["export", str(log), "--format", "csv", "--out", str(csv_path)]) == 0
        assert csv_path.read_text().startswith("scenario_id,")

    def test_list_scenarios(self, capsys):
        from swarmlink.cli import main

        assert main(["list-scenarios"]) == 0
        out = capsys.readouterr().out
        for name in ("d1", "d2", "d3", "d4"):
            assert name in out

    def test_config_error_exit_code(self, tmp_path):
        from swarmlink.cli import main

        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"id": "x", "duration_s": -1, "rooms": {}}))
        assert main(["run", str(bad)]) == 2
