"""Domain data model and the on-disk dataset format.

All sensor data are microvolts.  Datasets live on disk as a `<name>.json`
sidecar plus a `<name>.f32` payload (float32 little-endian, channel-major,
trial-major for epochs).  CSV import: first column time in seconds,
remaining columns µV.
"""

from __future__ import annotations

import csv
import hashlib
import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError

FORMAT_VERSION = 1

CHANNEL_KINDS = ("eeg", "stim-marker")
OPERATOR_KINDS = ("ssp-projector", "sound-correction", "average-reference")


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class ChannelInfo:
    """One electrode: label, unit-sphere position, kind, bad flag."""

    name: str
    position: tuple[float, float, float] | None = None
    kind: str = "eeg"
    bad: bool = False

    def __post_init__(self):
        if self.kind not in CHANNEL_KINDS:
            raise DataError("bad-channel-kind", f"unknown channel kind {self.kind!r}")
        if self.position is not None:
            p = np.asarray(self.position, dtype=float)
            if p.shape != (3,) or not np.all(np.isfinite(p)):
                raise DataError("bad-position", f"channel {self.name}: non-finite position")
            if np.linalg.norm(p) > 1.0 + 1e-6:
                raise DataError("bad-position", f"channel {self.name}: |position| > 1")
            object.__setattr__(self, "position", (float(p[0]), float(p[1]), float(p[2])))


def good_eeg_mask(channels: list[ChannelInfo]) -> np.ndarray:
    return np.array([c.kind == "eeg" and not c.bad for c in channels], dtype=bool)


def _check_unique_names(channels: list[ChannelInfo]):
    names = [c.name for c in channels]
    if len(set(names)) != len(names):
        raise DataError("duplicate-channel", "channel names must be unique")


@dataclass(frozen=True)
class Recording:
    """Continuous multichannel time series (channels x samples, µV)."""

    data: np.ndarray
    fs: float
    channels: list[ChannelInfo]
    events: list[tuple[int, int]] = field(default_factory=list)
    lowpass_hz: float | None = None  # set by filtering, checked by downsample

    def __post_init__(self):
        _check_unique_names(self.channels)
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 2 or d.shape[0] != len(self.channels):
            raise DataError(
                "dimension-mismatch",
                f"data shape {d.shape} does not match {len(self.channels)} channels",
            )
        if not np.all(np.isfinite(d)):
            raise DataError("non-finite-samples", "recording contains non-finite samples")
        if self.fs <= 0:
            raise DataError("bad-fs", "sampling rate must be positive")
        ev = [(int(s), int(c)) for s, c in self.events]
        if any(s < 0 or s >= d.shape[1] for s, _ in ev):
            raise DataError("bad-event", "event sample index outside recording")
        if any(b[0] <= a[0] for a, b in zip(ev, ev[1:])):
            raise DataError("bad-event", "event sample indices must be strictly increasing")
        object.__setattr__(self, "data", _freeze(d))
        object.__setattr__(self, "events", ev)

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    def with_data(self, data: np.ndarray, lowpass_hz: float | None = None) -> "Recording":
        return replace(self, data=data, lowpass_hz=lowpass_hz or self.lowpass_hz)

    def with_channels(self, channels: list[ChannelInfo]) -> "Recording":
        return replace(self, channels=channels)


@dataclass(frozen=True)
class EpochSet:
    """Trials x channels x samples tensor locked to TMS pulses (µV)."""

    data: np.ndarray
    fs: float
    t0: float
    channels: list[ChannelInfo]
    rejected: np.ndarray | None = None
    dropped: int = 0  # trials dropped at recording edges
    rank_deficit: int = 0  # set by SSP; downstream regularization accounts for it

    def __post_init__(self):
        _check_unique_names(self.channels)
        d = np.asarray(self.data, dtype=np.float64)
        if d.ndim != 3 or d.shape[1] != len(self.channels):
            raise DataError("dimension-mismatch", f"epoch tensor shape {d.shape} invalid")
        if not np.all(np.isfinite(d)):
            raise DataError("non-finite-samples", "epochs contain non-finite samples")
        if not (self.t0 <= 0.0 <= self.t0 + d.shape[2] / self.fs):
            raise DataError("bad-window", "epoch window must contain t = 0")
        rej = self.rejected
        if rej is None:
            rej = np.zeros(d.shape[0], dtype=bool)
        rej = np.asarray(rej, dtype=bool)
        if rej.shape != (d.shape[0],):
            raise DataError("dimension-mismatch", "rejected flags must be per-trial")
        object.__setattr__(self, "data", _freeze(d))
        object.__setattr__(self, "rejected", _freeze(rej))

    @property
    def n_trials(self) -> int:
        return self.data.shape[0]

    @property
    def n_channels(self) -> int:
        return self.data.shape[1]

    @property
    def n_samples(self) -> int:
        return self.data.shape[2]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.n_samples) / self.fs

    def with_data(self, data: np.ndarray, **kw) -> "EpochSet":
        return replace(self, data=data, **kw)


@dataclass(frozen=True)
class ChannelOperator:
    """Square channels x channels linear operator applied to sensor data."""

    matrix: np.ndarray
    kind: str

    def __post_init__(self):
        if self.kind not in OPERATOR_KINDS:
            raise DataError("bad-operator-kind", f"unknown operator kind {self.kind!r}")
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DataError("dimension-mismatch", "operator must be square")
        if self.kind == "ssp-projector":
            err = np.linalg.norm(m @ m - m) / max(np.linalg.norm(m), 1e-300)
            if err >= 1e-10:
                raise DataError("not-idempotent", f"ssp projector not idempotent (err {err:.2e})")
        object.__setattr__(self, "matrix", _freeze(m))

    def apply(self, x):
        """Left-multiply a Recording, EpochSet, or bare array."""
        if isinstance(x, Recording):
            return x.with_data(self.matrix @ x.data)
        if isinstance(x, EpochSet):
            return x.with_data(np.einsum("ij,tjs->tis", self.matrix, x.data))
        return self.matrix @ np.asarray(x)


# ---------------------------------------------------------------------------
# on-disk format


def _paths(path) -> tuple[Path, Path]:
    p = Path(path)
    if p.suffix in (".json", ".f32"):
        p = p.with_suffix("")
    # append, never with_suffix: dataset names may contain dots (x.clean)
    return Path(str(p) + ".json"), Path(str(p) + ".f32")


def _channel_to_json(c: ChannelInfo) -> dict:
    return {
        "name": c.name,
        "position": list(c.position) if c.position is not None else None,
        "kind": c.kind,
        "bad": c.bad,
    }


def _channel_from_json(d: dict) -> ChannelInfo:
    try:
        pos = d["position"]
        return ChannelInfo(
            name=d["name"],
            position=tuple(pos) if pos is not None else None,
            kind=d.get("kind", "eeg"),
            bad=bool(d.get("bad", False)),
        )
    except (KeyError, TypeError) as e:
        raise DataError("malformed-sidecar", f"bad channel entry: {e}") from e


def save_dataset(rec: Recording, path) -> None:
    """Write sidecar + float32 payload; load_dataset inverts it bit-exactly."""
    side_p, pay_p = _paths(path)
    sidecar = {
        "format-version": FORMAT_VERSION,
        "type": "recording",
        "fs": rec.fs,
        "channels": [_channel_to_json(c) for c in rec.channels],
        "events": [list(e) for e in rec.events],
        "n-samples": rec.n_samples,
        "lowpass-hz": rec.lowpass_hz,
    }
    try:
        side_p.write_text(json.dumps(sidecar, indent=1))
        rec.data.astype("<f4").tofile(pay_p)
    except OSError as e:
        raise DataError("unwritable-path", str(e)) from e


def save_epochs(ep: EpochSet, path) -> None:
    side_p, pay_p = _paths(path)
    sidecar = {
        "format-version": FORMAT_VERSION,
        "type": "epochs",
        "fs": ep.fs,
        "t0": ep.t0,
        "channels": [_channel_to_json(c) for c in ep.channels],
        "rejected": [bool(r) for r in ep.rejected],
        "n-trials": ep.n_trials,
        "n-samples": ep.n_samples,
        "dropped": ep.dropped,
        "rank-deficit": ep.rank_deficit,
    }
    try:
        side_p.write_text(json.dumps(sidecar, indent=1))
        ep.data.astype("<f4").tofile(pay_p)
    except OSError as e:
        raise DataError("unwritable-path", str(e)) from e


def _read_sidecar(side_p: Path) -> dict:
    if not side_p.exists():
        raise DataError("missing-file", f"no sidecar at {side_p}")
    try:
        sidecar = json.loads(side_p.read_text())
    except json.JSONDecodeError as e:
        raise DataError("malformed-sidecar", f"{side_p}: {e}") from e
    if not isinstance(sidecar, dict) or "format-version" not in sidecar:
        raise DataError("malformed-sidecar", f"{side_p}: missing format-version")
    return sidecar


def _read_payload(pay_p: Path, expected: int) -> np.ndarray:
    if not pay_p.exists():
        raise DataError("missing-file", f"no payload at {pay_p}")
    raw = np.fromfile(pay_p, dtype="<f4")
    if raw.size != expected:
        raise DataError(
            "dimension-mismatch",
            f"payload has {raw.size} samples, sidecar promises {expected}",
        )
    if not np.all(np.isfinite(raw)):
        raise DataError("non-finite-samples", f"{pay_p}: non-finite samples")
    return raw


def load_dataset(path) -> Recording:
    """Load a sidecar+payload dataset or a CSV file as a Recording."""
    p = Path(path)
    if p.suffix == ".csv":
        return _load_csv(p)
    side_p, pay_p = _paths(path)
    sidecar = _read_sidecar(side_p)
    if sidecar.get("type", "recording") != "recording":
        raise DataError("malformed-sidecar", f"{side_p} is not a recording dataset")
    try:
        channels = [_channel_from_json(c) for c in sidecar["channels"]]
        fs = float(sidecar["fs"])
        n_samples = int(sidecar["n-samples"])
        events = [(int(s), int(c)) for s, c in sidecar["events"]]
    except (KeyError, TypeError, ValueError) as e:
        raise DataError("malformed-sidecar", f"{side_p}: {e}") from e
    raw = _read_payload(pay_p, len(channels) * n_samples)
    data = raw.reshape(len(channels), n_samples)
    # a stim-marker channel in the payload becomes events
    marker_idx = [i for i, c in enumerate(channels) if c.kind == "stim-marker"]
    for i in marker_idx:
        for s in np.flatnonzero(data[i] != 0.0):
            events.append((int(s), int(data[i, s])))
    if marker_idx:
        keep = [i for i in range(len(channels)) if i not in marker_idx]
        data = data[keep]
        channels = [channels[i] for i in keep]
        events = sorted(set(events))
    return Recording(
        data=data,
        fs=fs,
        channels=channels,
        events=events,
        lowpass_hz=sidecar.get("lowpass-hz"),
    )


def load_epochs(path) -> EpochSet:
    side_p, pay_p = _paths(path)
    sidecar = _read_sidecar(side_p)
    if sidecar.get("type") != "epochs":
        raise DataError("malformed-sidecar", f"{side_p} is not an epochs dataset")
    try:
        channels = [_channel_from_json(c) for c in sidecar["channels"]]
        fs = float(sidecar["fs"])
        t0 = float(sidecar["t0"])
        n_trials = int(sidecar["n-trials"])
        n_samples = int(sidecar["n-samples"])
        rejected = np.asarray(sidecar["rejected"], dtype=bool)
    except (KeyError, TypeError, ValueError) as e:
        raise DataError("malformed-sidecar", f"{side_p}: {e}") from e
    raw = _read_payload(pay_p, n_trials * len(channels) * n_samples)
    return EpochSet(
        data=raw.reshape(n_trials, len(channels), n_samples),
        fs=fs,
        t0=t0,
        channels=channels,
        rejected=rejected,
        dropped=int(sidecar.get("dropped", 0)),
        rank_deficit=int(sidecar.get("rank-deficit", 0)),
    )


def load_any(path):
    """Load either dataset type based on the sidecar's type field."""
    p = Path(path)
    if p.suffix == ".csv":
        return _load_csv(p)
    side_p, _ = _paths(path)
    sidecar = _read_sidecar(side_p)
    if sidecar.get("type", "recording") == "epochs":
        return load_epochs(path)
    return load_dataset(path)


def _load_csv(p: Path) -> Recording:
    from . import montage as _montage

    try:
        with open(p, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as e:
        raise DataError("missing-file", str(e)) from e
    if len(rows) < 3:
        raise DataError("malformed-sidecar", "CSV needs a header and >= 2 rows")
    header = [h.strip() for h in rows[0]]
    try:
        body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
    except ValueError as e:
        raise DataError("malformed-sidecar", f"non-numeric CSV cell: {e}") from e
    if body.shape[1] != len(header) or body.shape[1] < 2:
        raise DataError("dimension-mismatch", "CSV rows do not match header")
    if not np.all(np.isfinite(body)):
        raise DataError("non-finite-samples", "CSV contains non-finite samples")
    t = body[:, 0]
    dt = np.diff(t)
    if len(dt) == 0 or np.any(dt <= 0):
        raise DataError("bad-fs", "CSV time column must be strictly increasing")
    fs = 1.0 / float(np.median(dt))
    channels = [
        ChannelInfo(name=name, position=_montage.label_position(name), kind="eeg")
        for name in header[1:]
    ]
    return Recording(data=body[:, 1:].T, fs=fs, channels=channels)


def dataset_hash(path) -> str:
    """sha256 over the canonicalized sidecar plus the raw payload bytes."""
    side_p, pay_p = _paths(path)
    sidecar = _read_sidecar(side_p)
    h = hashlib.sha256()
    h.update(json.dumps(sidecar, sort_keys=True, separators=(",", ":")).encode())
    h.update(pay_p.read_bytes())
    return h.hexdigest()


# ---------------------------------------------------------------------------
# epoching


def epoch(rec: Recording, window: tuple[float, float], code: int) -> EpochSet:
    """Cut stimulation-locked epochs around every event of `code`.

    Trials whose window would leave the recording are dropped with a
    warning; the count is carried on the EpochSet.
    """
    t_start, t_end = window
    if not (t_start <= 0.0 <= t_end) or t_end <= t_start:
        raise DataError("bad-window", "epoch window must contain 0")
    pre = int(round(-t_start * rec.fs))
    post = int(round(t_end * rec.fs))
    trials = []
    dropped = 0
    for s, c in rec.events:
        if c != code:
            continue
        if s - pre < 0 or s + post > rec.n_samples:
            dropped += 1
            continue
        trials.append(rec.data[:, s - pre : s + post])
    if dropped:
        warnings.warn(f"epoch: dropped {dropped} trial(s) at recording edges")
    if not trials:
        raise DataError("no-trials", f"no complete epochs for event code {code}")
    return EpochSet(
        data=np.stack(trials),
        fs=rec.fs,
        t0=-pre / rec.fs,
        channels=list(rec.channels),
        dropped=dropped,
    )
