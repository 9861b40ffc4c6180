import numpy as np
import pytest

from contactctl.compliance import ACTION_SCHEMA
from contactctl.episodes import (Episode, EpisodeError, StreamSpec, export_csv,
                                 load_episode, replay_actions,
                                 validate_episode_dir)


def basic_episode():
    return Episode("ep1", [StreamSpec("pose", 200.0, ("px", "py", "pz"), "pose"),
                           StreamSpec("wrench", 1000.0,
                                      ("fx", "fy", "fz", "tx", "ty", "tz"),
                                      "wrench")],
                   config_hash="abc123")


def action_episode(n_rows, rate=10.0):
    episode = Episode("acts", [StreamSpec("action", rate, ACTION_SCHEMA, "action")])
    rng = np.random.default_rng(0)
    for i in range(n_rows):
        row = np.zeros(13)
        row[0] = 0.01
        row[3:9] = [1, 0, 0, 0, 1, 0]
        row[9:12] = rng.normal(size=3)
        row[12] = 0.05
        episode.record("action", i / rate, row)
    return episode


# ---------------------------------------------------------------------------
# recording

def test_record_appends():
    episode = basic_episode()
    episode.record("pose", 0.001, [1.0, 2.0, 3.0])
    episode.record("pose", 0.002, [4.0, 5.0, 6.0])
    assert len(episode.rows("pose")) == 2


def test_record_rejects_non_monotonic():
    episode = basic_episode()
    episode.record("pose", 0.002, [1.0, 2.0, 3.0])
    with pytest.raises(EpisodeError, match="non-monotonic"):
        episode.record("pose", 0.001, [4.0, 5.0, 6.0])


def test_record_rejects_unknown_stream_and_bad_arity():
    episode = basic_episode()
    with pytest.raises(EpisodeError, match="unknown stream"):
        episode.record("depth", 0.0, [1.0])
    with pytest.raises(EpisodeError, match="expected 3 values"):
        episode.record("pose", 0.0, [1.0, 2.0])


def test_record_rate_counting_oracle():
    rates = {"pose": (200.0, 3, "pose"), "wrench": (1000.0, 6, "wrench"),
             "gripper": (500.0, 2, "gripper"), "tactile": (30.0, 126, "tactile"),
             "action": (10.0, 13, "action"), "frames": (30.0, 1, "image_ref")}
    specs = []
    for name, (rate, width, kind) in rates.items():
        schema = ACTION_SCHEMA if kind == "action" else \
            tuple(f"c{i}" for i in range(width))
        specs.append(StreamSpec(name, rate, schema, kind))
    episode = Episode("rates", specs)
    duration = 10.0
    for name, (rate, width, kind) in rates.items():
        n = int(round(rate * duration))
        for i in range(n):
            values = [f"img_{i}.png"] if kind == "image_ref" else [0.0] * width
            episode.record(name, i / rate, values)
    for name, (rate, _w, _k) in rates.items():
        assert abs(len(episode.rows(name)) - rate * duration) <= 1


# ---------------------------------------------------------------------------
# alignment

def test_align_exact_time_zero_staleness():
    episode = basic_episode()
    episode.record("pose", 0.10, [1.0, 2.0, 3.0])
    episode.record("pose", 0.20, [4.0, 5.0, 6.0])
    frame = episode.align(0.20, ["pose"])
    assert frame.samples["pose"].staleness == 0.0
    assert frame.samples["pose"].values == [4.0, 5.0, 6.0]


def test_align_zero_order_hold_staleness_bound():
    episode = Episode("tac", [StreamSpec("tactile", 30.0, ("v",), "tactile")])
    period = 1.0 / 30.0
    n = 60
    for i in range(n):
        episode.record("tactile", i * period, [float(i)])
    # exhaustive 1 kHz query over the covered span
    for k in range(int((n - 1) * period * 1000)):
        t = k / 1000.0
        sample = episode.align(t, ["tactile"]).samples["tactile"]
        assert 0.0 <= sample.staleness < period
        assert sample.source_t <= t


def test_align_single_stream_trivial():
    episode = Episode("one", [StreamSpec("pose", 10.0, ("x",), "pose")])
    episode.record("pose", 0.5, [7.0])
    frame = episode.align(0.9)
    assert frame.samples["pose"].values == [7.0]


def test_align_before_first_sample_errors():
    episode = basic_episode()
    episode.record("pose", 0.5, [1.0, 2.0, 3.0])
    with pytest.raises(EpisodeError, match="precedes"):
        episode.align(0.1, ["pose"])


def test_align_with_jittered_rates(rng):
    # +-20% timestamp jitter must still align with bounded staleness
    period = 0.01
    episode = Episode("jit", [StreamSpec("s", 100.0, ("v",), "wrench")])
    t = 0.0
    times = []
    for i in range(200):
        episode.record("s", t, [float(i)])
        times.append(t)
        t += period * (1.0 + rng.uniform(-0.2, 0.2))
    for k in range(50, 1900):
        tq = k / 1000.0
        if tq < times[0] or tq > times[-1]:
            continue
        sample = episode.align(tq, ["s"]).samples["s"]
        assert sample.source_t <= tq
        assert sample.staleness < period * 1.2 + 1e-12


# ---------------------------------------------------------------------------
# replay

def test_replay_exact_division():
    chunks = replay_actions(action_episode(32), 16)
    assert len(chunks) == 2
    assert all(len(c) == 16 for c in chunks)
    assert not any(c.padded for c in chunks)


def test_replay_remainder_padded():
    chunks = replay_actions(action_episode(33), 16)
    assert len(chunks) == 3
    assert chunks[-1].padded and not chunks[0].padded
    last = chunks[-1]
    assert np.array_equal(last.steps[0].as_array(), last.steps[-1].as_array())


def test_replay_conservation():
    for rows in (1, 7, 16, 17, 40):
        chunks = replay_actions(action_episode(rows), 16)
        total = sum(len(c) for c in chunks)
        padding = total - rows
        assert 0 <= padding < 16


def test_replay_missing_stream():
    episode = basic_episode()
    with pytest.raises(EpisodeError, match="action"):
        replay_actions(episode, 16)


def test_replay_rejects_wrong_schema():
    episode = Episode("bad", [StreamSpec("action", 10.0, ("a", "b"), "action")])
    episode.record("action", 0.0, [1.0, 2.0])
    with pytest.raises(EpisodeError, match="does not carry actions"):
        replay_actions(episode, 4)


# ---------------------------------------------------------------------------
# persistence

def test_export_load_value_exact(tmp_path, rng):
    episode = basic_episode()
    awkward = [0.1, 1.0 / 3.0, np.pi, 1e-17, -2.5e16, 7.0]
    for i in range(20):
        episode.record("pose", 0.005 * (i + 1), rng.normal(size=3))
        episode.record("wrench", 0.005 * (i + 1) + 0.0001,
                       rng.permutation(awkward))
    export_csv(episode, tmp_path / "ep")
    loaded = load_episode(tmp_path / "ep")
    assert loaded.episode_id == episode.episode_id
    assert loaded.config_hash == "abc123"
    for name in ("pose", "wrench"):
        assert np.array_equal(loaded.times(name), episode.times(name))
        assert np.array_equal(loaded.values(name), episode.values(name))


def test_export_load_image_refs(tmp_path):
    episode = Episode("imgs", [StreamSpec("cam", 30.0, ("path",), "image_ref")])
    episode.record("cam", 0.0, ["frames/000.png"])
    episode.record("cam", 0.04, ["frames/001.png"])
    export_csv(episode, tmp_path / "ep")
    loaded = load_episode(tmp_path / "ep")
    assert loaded.rows("cam") == [["frames/000.png"], ["frames/001.png"]]


def test_load_missing_stream_file_names_stream(tmp_path):
    episode = basic_episode()
    episode.record("pose", 0.0, [1.0, 2.0, 3.0])
    episode.record("wrench", 0.0, [0.0] * 6)
    export_csv(episode, tmp_path / "ep")
    (tmp_path / "ep" / "wrench.csv").unlink()
    with pytest.raises(EpisodeError, match="wrench"):
        load_episode(tmp_path / "ep")


def test_load_corrupt_manifest(tmp_path):
    d = tmp_path / "ep"
    d.mkdir()
    (d / "manifest.json").write_text("{not json")
    with pytest.raises(EpisodeError, match="corrupt manifest"):
        load_episode(d)


def test_load_schema_mismatch(tmp_path):
    episode = basic_episode()
    episode.record("pose", 0.0, [1.0, 2.0, 3.0])
    episode.record("wrench", 0.0, [0.0] * 6)
    export_csv(episode, tmp_path / "ep")
    path = tmp_path / "ep" / "pose.csv"
    content = path.read_text().splitlines()
    content[0] = "t,wrong,schema,here"
    path.write_text("\n".join(content) + "\n")
    with pytest.raises(EpisodeError, match="schema mismatch"):
        load_episode(tmp_path / "ep")


def test_golden_episode_fixture():
    episode = load_episode("tests/data/golden_episode")
    assert episode.episode_id == "golden"
    assert set(episode.streams) == {"pose", "gripper"}
    assert len(episode.rows("pose")) == 3
    frame = episode.align(0.015, ["pose", "gripper"])
    assert frame.samples["pose"].values == [0.41, 0.0, 0.2]
    assert frame.samples["pose"].source_t == 0.01
    assert np.isclose(frame.samples["pose"].staleness, 0.005)
    assert frame.samples["gripper"].values == [0.08]


# ---------------------------------------------------------------------------
# validation

def test_validate_ok(tmp_path):
    episode = basic_episode()
    episode.record("pose", 0.0, [1.0, 2.0, 3.0])
    episode.record("wrench", 0.0, [0.0] * 6)
    export_csv(episode, tmp_path / "ep")
    assert validate_episode_dir(tmp_path / "ep") == []


def test_validate_reports_non_monotonic_row(tmp_path):
    episode = basic_episode()
    for i in range(3):
        episode.record("pose", 0.01 * (i + 1), [1.0, 2.0, 3.0])
        episode.record("wrench", 0.01 * (i + 1), [0.0] * 6)
    export_csv(episode, tmp_path / "ep")
    path = tmp_path / "ep" / "pose.csv"
    lines = path.read_text().splitlines()
    lines[2], lines[3] = lines[3], lines[2]   # swap rows: non-monotonic
    path.write_text("\n".join(lines) + "\n")
    violations = validate_episode_dir(tmp_path / "ep")
    assert any("pose" in v and "non-monotonic" in v for v in violations)


def test_validate_reports_missing_stream(tmp_path):
    episode = basic_episode()
    episode.record("pose", 0.0, [1.0, 2.0, 3.0])
    episode.record("wrench", 0.0, [0.0] * 6)
    export_csv(episode, tmp_path / "ep")
    (tmp_path / "ep" / "wrench.csv").unlink()
    violations = validate_episode_dir(tmp_path / "ep")
    assert any("wrench" in v and "missing" in v for v in violations)


def test_stream_spec_validation():
    with pytest.raises(EpisodeError):
        StreamSpec("x", 0.0, ("a",), "pose")
    with pytest.raises(EpisodeError):
        StreamSpec("x", 10.0, (), "pose")
    with pytest.raises(EpisodeError):
        StreamSpec("x", 10.0, ("a",), "video")
    with pytest.raises(EpisodeError):
        Episode("dup", [StreamSpec("a", 1.0, ("x",), "pose"),
                        StreamSpec("a", 1.0, ("x",), "pose")])
