"""Timestamp-aligned multimodal episode recording, replay, and persistence.

An episode is a manifest (id, stream specs, config hash) plus one
timestamped table per stream. Alignment is zero-order hold: a query returns
each stream's latest sample at or before the query time together with its
staleness, and never looks into the future. Persistence is a JSON manifest
plus one CSV per stream with floats serialized via repr, so the round trip
is value-exact.
"""

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .compliance import ACTION_SCHEMA, ActionChunk, ActionStep

FORMAT_VERSION = "1"

STREAM_KINDS = ("pose", "wrench", "gripper", "tactile", "action", "image_ref")

MANIFEST_NAME = "manifest.json"


class EpisodeError(ValueError):
    pass


@dataclass
class StreamSpec:
    name: str
    rate_hz: float
    schema: tuple
    kind: str

    def __post_init__(self):
        self.schema = tuple(self.schema)
        if self.rate_hz <= 0.0:
            raise EpisodeError(f"stream {self.name!r}: rate must be positive")
        if not self.schema:
            raise EpisodeError(f"stream {self.name!r}: empty schema")
        if self.kind not in STREAM_KINDS:
            raise EpisodeError(f"stream {self.name!r}: unknown kind {self.kind!r}")


@dataclass
class StreamSample:
    values: list
    source_t: float
    staleness: float


@dataclass
class AlignedFrame:
    t: float
    samples: dict   # stream name -> StreamSample


class Episode:
    """Single-writer episode record; readers are safe after recording stops."""

    def __init__(self, episode_id: str, streams: list, start_time: float = 0.0,
                 config_hash: str = ""):
        names = [s.name for s in streams]
        if len(set(names)) != len(names):
            raise EpisodeError("duplicate stream names")
        self.episode_id = episode_id
        self.start_time = start_time
        self.config_hash = config_hash
        self.streams = {s.name: s for s in streams}
        self._times = {s.name: [] for s in streams}
        self._rows = {s.name: [] for s in streams}

    def record(self, stream_name: str, t: float, values) -> None:
        """Append one row; timestamps must be strictly increasing per stream."""
        if stream_name not in self.streams:
            raise EpisodeError(f"unknown stream {stream_name!r}")
        times = self._times[stream_name]
        if times and t <= times[-1]:
            raise EpisodeError(
                f"non-monotonic timestamp on {stream_name!r}: {t} after {times[-1]}")
        spec = self.streams[stream_name]
        values = list(values)
        if len(values) != len(spec.schema):
            raise EpisodeError(
                f"stream {stream_name!r}: expected {len(spec.schema)} values, "
                f"got {len(values)}")
        if spec.kind != "image_ref":
            values = [float(v) for v in values]
        times.append(float(t))
        self._rows[stream_name].append(values)

    def times(self, stream_name: str) -> np.ndarray:
        return np.array(self._times[stream_name])

    def rows(self, stream_name: str) -> list:
        return self._rows[stream_name]

    def values(self, stream_name: str) -> np.ndarray:
        """Numeric streams as a (rows, columns) array."""
        if self.streams[stream_name].kind == "image_ref":
            raise EpisodeError(f"stream {stream_name!r} holds references, not numbers")
        return np.array(self._rows[stream_name], dtype=float)

    def span(self) -> tuple:
        starts = [t[0] for t in self._times.values() if t]
        ends = [t[-1] for t in self._times.values() if t]
        if not starts:
            raise EpisodeError("empty episode")
        return min(starts), max(ends)

    def align(self, t_query: float, stream_names: Optional[list] = None) -> AlignedFrame:
        """Zero-order-hold frame at t_query; staleness = t_query - source time."""
        if stream_names is None:
            stream_names = list(self.streams)
        samples = {}
        for name in stream_names:
            if name not in self.streams:
                raise EpisodeError(f"unknown stream {name!r}")
            times = self._times[name]
            if not times or t_query < times[0]:
                raise EpisodeError(
                    f"t={t_query} precedes first sample of stream {name!r}")
            # rightmost sample with time <= t_query
            idx = int(np.searchsorted(times, t_query, side="right")) - 1
            samples[name] = StreamSample(self._rows[name][idx], times[idx],
                                         t_query - times[idx])
        return AlignedFrame(t_query, samples)


def replay_actions(episode: Episode, chunk_len: int,
                   stream_name: str = "action") -> list:
    """Partition the recorded action stream into fixed-length chunks.

    The final partial chunk is padded by repeating its last step and flagged.
    """
    if chunk_len < 1:
        raise EpisodeError("chunk_len must be >= 1")
    if stream_name not in episode.streams:
        raise EpisodeError(f"episode has no action stream {stream_name!r}")
    spec = episode.streams[stream_name]
    if spec.kind != "action" or spec.schema != ACTION_SCHEMA:
        raise EpisodeError(f"stream {stream_name!r} does not carry actions")
    rows = episode.values(stream_name)
    if rows.size == 0:
        raise EpisodeError("empty action stream")
    chunks = []
    for start in range(0, len(rows), chunk_len):
        block = rows[start:start + chunk_len]
        padded = len(block) < chunk_len
        if padded:
            pad = np.repeat(block[-1:], chunk_len - len(block), axis=0)
            block = np.vstack([block, pad])
        chunks.append(ActionChunk([ActionStep.from_array(r) for r in block], padded))
    return chunks


# ---------------------------------------------------------------------------
# persistence

def _stream_filename(name: str) -> str:
    return f"{name}.csv"


def export_csv(episode: Episode, out_dir) -> list:
    """Write manifest + one CSV per stream; returns the files written."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "episode_id": episode.episode_id,
        "start_time": episode.start_time,
        "config_hash": episode.config_hash,
        "streams": [{"name": s.name, "rate_hz": s.rate_hz, "kind": s.kind,
                     "schema": list(s.schema)} for s in episode.streams.values()],
    }
    files = [out_dir / MANIFEST_NAME]
    with open(files[0], "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    for name, spec in episode.streams.items():
        path = out_dir / _stream_filename(name)
        files.append(path)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("t",) + spec.schema)
            for t, row in zip(episode._times[name], episode._rows[name]):
                if spec.kind == "image_ref":
                    writer.writerow([repr(t)] + [str(v) for v in row])
                else:
                    writer.writerow([repr(t)] + [repr(float(v)) for v in row])
    return files


def load_episode(episode_dir) -> Episode:
    """Load and validate an exported episode directory."""
    episode_dir = Path(episode_dir)
    manifest_path = episode_dir / MANIFEST_NAME
    if not manifest_path.exists():
        raise EpisodeError(f"missing manifest: {manifest_path}")
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        raise EpisodeError(f"corrupt manifest {manifest_path}: {exc}") from exc
    for key in ("format_version", "episode_id", "streams"):
        if key not in manifest:
            raise EpisodeError(f"corrupt manifest: missing {key!r}")
    specs = [StreamSpec(s["name"], s["rate_hz"], tuple(s["schema"]), s["kind"])
             for s in manifest["streams"]]
    episode = Episode(manifest["episode_id"], specs,
                      manifest.get("start_time", 0.0),
                      manifest.get("config_hash", ""))
    for spec in specs:
        path = episode_dir / _stream_filename(spec.name)
        if not path.exists():
            raise EpisodeError(f"stream {spec.name!r}: missing file {path}")
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != ("t",) + spec.schema:
                raise EpisodeError(f"stream {spec.name!r}: schema mismatch in {path}")
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 1 + len(spec.schema):
                    raise EpisodeError(
                        f"stream {spec.name!r}: row {lineno} has {len(row)} fields")
                values = row[1:] if spec.kind == "image_ref" \
                    else [float(v) for v in row[1:]]
                episode.record(spec.name, float(row[0]), values)
    return episode


def validate_episode_dir(episode_dir) -> list:
    """Structural check of an on-disk episode; returns violation strings."""
    episode_dir = Path(episode_dir)
    violations = []
    manifest_path = episode_dir / MANIFEST_NAME
    if not manifest_path.exists():
        return [f"missing manifest: {manifest_path}"]
    try:
        with open(manifest_path) as fh:
            manifest = json.load(fh)
    except json.JSONDecodeError as exc:
        return [f"corrupt manifest: {exc}"]
    for key in ("format_version", "episode_id", "streams"):
        if key not in manifest:
            violations.append(f"manifest missing key {key!r}")
    for entry in manifest.get("streams", []):
        name = entry.get("name", "<unnamed>")
        try:
            spec = StreamSpec(name, entry.get("rate_hz", 0.0),
                              tuple(entry.get("schema", ())), entry.get("kind", ""))
        except EpisodeError as exc:
            violations.append(str(exc))
            continue
        path = episode_dir / _stream_filename(name)
        if not path.exists():
            violations.append(f"stream {name!r}: missing file {path.name}")
            continue
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header is None or tuple(header) != ("t",) + spec.schema:
                violations.append(f"stream {name!r}: header mismatch")
                continue
            last_t = None
            for lineno, row in enumerate(reader, start=2):
                if len(row) != 1 + len(spec.schema):
                    violations.append(
                        f"stream {name!r}: row {lineno}: field count "
                        f"{len(row)} != {1 + len(spec.schema)}")
                    continue
                try:
                    t = float(row[0])
                except ValueError:
                    violations.append(f"stream {name!r}: row {lineno}: bad timestamp")
                    continue
                if last_t is not None and t <= last_t:
                    violations.append(
                        f"stream {name!r}: row {lineno}: non-monotonic timestamp {t}")
                last_t = t
                if spec.kind != "image_ref":
                    try:
                        [float(v) for v in row[1:]]
                    except ValueError:
                        violations.append(
                            f"stream {name!r}: row {lineno}: non-numeric value")
    return violations
