import json

import pytest

from pubcluster import errors
from pubcluster.domain import NodeClass
from pubcluster.events import Event, EventLogWriter, read_event_log
from pubcluster.replay import replay
from pubcluster.server import ControlPlane
from pubcluster.world import World

from conftest import issue, make_config


def canonical(world):
    return json.dumps(world.canonical_state(), sort_keys=True)


def run_scenario(seed=11):
    """A full lifecycle: request -> plan -> block -> job -> fault -> release."""
    cfg = make_config(levels=(2, 1, 1), tick_seconds=36.0)
    w = World(cfg, seed=seed)
    admin = issue(w, "Admin")
    user = issue(w)
    w.power_command(1, on=True)
    w.advance_tick(3)
    w.submit_request(user, 2, NodeClass(1), 24)
    plan_id, _ = w.run_allocation()
    (block_id,) = w.activate_plan(plan_id)
    w.advance_tick(4)
    w.submit_job(user, block_id, width=1, duration_ticks=3)
    w.advance_tick(2)
    w.inject_fault(3, "FanDegraded", 0.02)
    w.advance_tick(25)
    w.release_block(user, block_id)
    w.advance_tick(2)
    # a rejected request also lands in the log
    with pytest.raises(errors.LimitNodes):
        w.submit_request(user, 4, NodeClass(0), 24)
    w.advance_tick(3)
    return cfg, w


class TestWireFormat:
    def test_field_order_and_sorted_payload(self):
        ev = Event(seq=3, tick=7, kind="PowerChanged", payload={"z": 1, "a": [2, 3]})
        assert ev.to_line() == '{"seq":3,"tick":7,"kind":"PowerChanged","payload":{"a":[2,3],"z":1}}'

    def test_from_line_round_trip(self):
        ev = Event(seq=1, tick=0, kind="TokenIssued", payload={"role": "Anonymous"})
        assert Event.from_line(ev.to_line()) == ev

    def test_malformed_line(self):
        with pytest.raises(errors.CorruptLog):
            Event.from_line("{nope")

    def test_world_event_seqs_are_gapless(self):
        _, w = run_scenario()
        assert [e.seq for e in w.events] == list(range(1, len(w.events) + 1))


class TestReadEventLog:
    def test_round_trip_via_file(self, tmp_path):
        _, w = run_scenario()
        path = str(tmp_path / "events.log")
        writer = EventLogWriter(path)
        writer.append(w.events)
        writer.close()
        assert read_event_log(path) == list(w.events)

    def test_seq_gap_detected(self):
        lines = [
            Event(1, 0, "TokenIssued", {"role": "Admin"}).to_line(),
            Event(3, 0, "TokenIssued", {"role": "Admin"}).to_line(),
        ]
        with pytest.raises(errors.CorruptLog):
            read_event_log(lines)

    def test_unknown_kind_detected(self):
        with pytest.raises(errors.CorruptLog):
            read_event_log([Event(1, 0, "Gremlins", {}).to_line()])


class TestReplay:
    def test_scenario_round_trips(self):
        cfg, w = run_scenario()
        again = replay(cfg, 11, list(w.events), final_tick=w.tick)
        assert canonical(again) == canonical(w)

    def test_replay_from_serialized_lines(self):
        cfg, w = run_scenario()
        lines = [e.to_line() for e in w.events]
        again = replay(cfg, 11, lines, final_tick=w.tick)
        assert canonical(again) == canonical(w)

    def test_tampered_payload_detected(self):
        cfg, w = run_scenario()
        lines = [e.to_line() for e in w.events]
        idx = next(i for i, e in enumerate(w.events) if e.kind == "PowerChanged")
        lines[idx] = lines[idx].replace('"node_id":1', '"node_id":2')
        with pytest.raises(errors.CorruptLog):
            replay(cfg, 11, lines, final_tick=w.tick)

    def test_dropped_event_detected(self):
        cfg, w = run_scenario()
        lines = [e.to_line() for e in w.events]
        del lines[5]
        with pytest.raises(errors.CorruptLog):
            replay(cfg, 11, lines, final_tick=w.tick)

    def test_wrong_seed_detected(self):
        cfg, w = run_scenario()
        with pytest.raises(errors.CorruptLog):
            # token values derive from the seed, so the first TokenIssued differs
            replay(cfg, 12, list(w.events), final_tick=w.tick)

    def test_replay_reproduces_rejections(self):
        cfg, w = run_scenario()
        again = replay(cfg, 11, list(w.events), final_tick=w.tick)
        rejected = [r for r in again.requests.values() if r.status == "Rejected"]
        assert len(rejected) == 1


class TestControlPlanePersistence:
    def make_plane(self, tmp_path):
        cfg = make_config(levels=(1, 1))
        return ControlPlane(cfg, seed=3, data_dir=str(tmp_path)), tmp_path / "events.log"

    def test_log_grows_and_stays_gapless(self, tmp_path):
        cp, log_path = self.make_plane(tmp_path)
        cp.execute(lambda w: w.issue_token("Admin"))
        cp.execute(lambda w: w.power_command(1, on=True))
        cp.tick(2)
        events = read_event_log(str(log_path))
        assert [e.seq for e in events] == list(range(1, len(events) + 1))
        assert events == list(cp.world.events)
        cp.shutdown()

    def test_storage_failure_rolls_back_atomically(self, tmp_path):
        cp, log_path = self.make_plane(tmp_path)
        cp.execute(lambda w: w.issue_token("Admin"))
        before_state = canonical(cp.world)
        before_log = log_path.read_bytes()
        cp.log_writer.fail_next = True
        with pytest.raises(errors.StorageFailure):
            cp.execute(lambda w: w.power_command(1, on=True))
        assert canonical(cp.world) == before_state, "command must not take effect"
        assert log_path.read_bytes() == before_log, "log must not grow"
        # the plane keeps working afterwards and the log stays gapless
        cp.execute(lambda w: w.power_command(1, on=True))
        events = read_event_log(str(log_path))
        assert [e.seq for e in events] == list(range(1, len(events) + 1))
        assert events[-1].kind == "PowerChanged"
        cp.shutdown()

    def test_failed_command_with_failed_flush_reports_storage(self, tmp_path):
        cp, log_path = self.make_plane(tmp_path)
        cp.execute(lambda w: w.issue_token("Admin"))
        before_log = log_path.read_bytes()
        user = cp.execute(lambda w: w.issue_token("Anonymous"))
        before_log = log_path.read_bytes()
        cp.log_writer.fail_next = True
        # submit_request emits RequestRejected then raises; the flush then fails
        with pytest.raises(errors.StorageFailure):
            cp.execute(lambda w: w.submit_request(user.value, 4, NodeClass(0), 1))
        assert log_path.read_bytes() == before_log
        assert not cp.world.requests, "rolled back: the rejection never happened"
        cp.shutdown()

    def test_persisted_log_replays_to_live_state(self, tmp_path):
        cfg = make_config(levels=(2, 1, 1))
        cp = ControlPlane(cfg, seed=21, data_dir=str(tmp_path))
        admin = cp.execute(lambda w: w.issue_token("Admin"))
        user = cp.execute(lambda w: w.issue_token("Anonymous"))
        cp.execute(lambda w: w.submit_request(user.value, 2, NodeClass(1), 24))
        plan_id = cp.execute(lambda w: w.run_allocation())[0]
        cp.execute(lambda w: w.activate_plan(plan_id))
        cp.tick(5)
        again = replay(cfg, 21, str(tmp_path / "events.log"), final_tick=cp.world.tick)
        assert canonical(again) == canonical(cp.world)
        cp.shutdown()
