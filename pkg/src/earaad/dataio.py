"""On-disk dataset formats.

A dataset is a directory holding ``manifest.json`` plus raw sample files.
EEG is little-endian float32, time-major (each sample's N channel values
are contiguous), with the shape recorded in the manifest. Envelopes use the
same encoding with one column. Candidates may instead point at 16-bit PCM
mono WAV files, which ``preprocess`` turns into envelopes.
"""

from __future__ import annotations

import csv
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .decoder import DEFAULT_AZIMUTHS, Trial
from .errors import ConfigError, DataError, FormatError, SchemaError
from .signals import MonoSeries, MultiSeries

__all__ = [
    "MANIFEST_VERSION",
    "EegRef",
    "CandidateRef",
    "TrialRecord",
    "Manifest",
    "load_eeg",
    "save_eeg",
    "load_envelope",
    "save_envelope",
    "load_audio_wav",
    "write_wav_pcm16",
    "read_manifest",
    "write_manifest",
    "load_trials",
    "write_dataset",
]

MANIFEST_VERSION = 1
_DTYPES = {"float32": np.dtype("<f4")}


@dataclass(frozen=True)
class EegRef:
    path: str
    shape: tuple[int, int]
    dtype: str = "float32"

    def to_dict(self) -> dict:
        return {"path": self.path, "shape": list(self.shape), "dtype": self.dtype}


@dataclass(frozen=True)
class CandidateRef:
    """One candidate stream: a raw float32 envelope or a WAV file."""

    path: str
    kind: str = "envelope"
    fs: float | None = None
    length: int | None = None
    azimuth_deg: float = 0.0

    def to_dict(self) -> dict:
        d = {"path": self.path, "kind": self.kind, "azimuth_deg": float(self.azimuth_deg)}
        if self.kind == "envelope":
            d["fs"] = float(self.fs)
            d["length"] = int(self.length)
        return d


@dataclass(frozen=True)
class TrialRecord:
    subject: str
    trial: str
    attended_index: int
    eeg: EegRef
    candidates: tuple[CandidateRef, ...]

    def to_dict(self) -> dict:
        return {
            "subject": self.subject,
            "trial": self.trial,
            "attended_index": self.attended_index,
            "eeg": self.eeg.to_dict(),
            "candidates": [c.to_dict() for c in self.candidates],
        }


@dataclass
class Manifest:
    fs_raw: float
    channels: tuple[str, ...]
    trials: list[TrialRecord] = field(default_factory=list)
    version: int = MANIFEST_VERSION
    root: Path = field(default=Path("."), compare=False)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "fs_raw": float(self.fs_raw),
            "channels": list(self.channels),
            "trials": [t.to_dict() for t in self.trials],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def resolve(self, rel: str) -> Path:
        return self.root / rel


# --- raw sample files -------------------------------------------------------

def save_eeg(path, data) -> None:
    data = np.asarray(data)
    if data.ndim != 2:
        raise DataError("EEG must be 2-D (T, N)")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(np.ascontiguousarray(data, dtype="<f4").tobytes())


def _read_raw(path, shape, dtype: str) -> np.ndarray:
    if dtype not in _DTYPES:
        raise FormatError(f"unsupported dtype {dtype!r}")
    dt = _DTYPES[dtype]
    path = Path(path)
    if not path.is_file():
        raise FormatError(f"missing data file: {path}")
    expected = int(np.prod(shape)) * dt.itemsize
    actual = path.stat().st_size
    if actual != expected:
        raise FormatError(f"{path}: expected {expected} bytes for shape {tuple(shape)}, "
                          f"found {actual}")
    return np.frombuffer(path.read_bytes(), dtype=dt).reshape(shape).astype(np.float64)


def _check_finite(arr: np.ndarray, path) -> None:
    bad = np.argwhere(~np.isfinite(arr))
    if bad.size:
        row, col = (int(v) for v in bad[0]) if arr.ndim == 2 else (int(bad[0][0]), 0)
        raise DataError(f"{path}: non-finite value at row {row}, column {col}")


def load_eeg(path, shape: Sequence[int] | None = None, dtype: str = "float32", fs: float = 1.0,
             channels: Sequence[str] | None = None) -> MultiSeries:
    """Read EEG from raw float32 (``shape`` required) or from CSV.

    CSV files carry a header row of channel labels; when ``channels`` is
    given the header must match it exactly.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        if not path.is_file():
            raise FormatError(f"missing data file: {path}")
        with path.open(newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            raise FormatError(f"{path}: empty CSV")
        header = tuple(h.strip() for h in rows[0])
        if channels is not None and header != tuple(channels):
            raise FormatError(f"{path}: header {header} does not match channels")
        try:
            data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=np.float64)
        except ValueError as exc:
            raise FormatError(f"{path}: {exc}") from None
        data = data.reshape(-1, len(header))
        if shape is not None and data.shape != tuple(shape):
            raise FormatError(f"{path}: expected shape {tuple(shape)}, found {data.shape}")
        _check_finite(data, path)
        return MultiSeries(data, fs, header)
    if shape is None or len(shape) != 2:
        raise FormatError("raw EEG needs a (T, N) shape")
    data = _read_raw(path, tuple(int(s) for s in shape), dtype)
    _check_finite(data, path)
    return MultiSeries(data, fs, tuple(channels) if channels else ())


def save_envelope(path, samples) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(np.ascontiguousarray(samples, dtype="<f4").tobytes())


def load_envelope(path, length: int, fs: float) -> MonoSeries:
    data = _read_raw(path, (int(length),), "float32")
    _check_finite(data, path)
    return MonoSeries(data, fs)


# --- WAV --------------------------------------------------------------------

def load_audio_wav(path) -> MonoSeries:
    """Read a 16-bit PCM mono RIFF/WAVE file, scaled to [-1, 1)."""
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != b"RIFF" or raw[8:12] != b"WAVE":
        raise FormatError(f"{path}: not a RIFF/WAVE file")
    pos = 12
    fmt = None
    data = None
    while pos + 8 <= len(raw):
        cid = raw[pos:pos + 4]
        size = struct.unpack("<I", raw[pos + 4:pos + 8])[0]
        body = raw[pos + 8:pos + 8 + size]
        if cid == b"fmt ":
            if len(body) < 16:
                raise FormatError(f"{path}: truncated fmt chunk")
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif cid == b"data":
            data = body
        pos += 8 + size + (size & 1)
    if fmt is None or data is None:
        raise FormatError(f"{path}: missing fmt or data chunk")
    tag, n_channels, fs, _, block_align, bits = fmt
    if tag != 1 or bits != 16:
        raise FormatError(f"{path}: only 16-bit PCM is supported (tag={tag}, bits={bits})")
    if n_channels != 1:
        raise FormatError(f"{path}: only mono audio is supported ({n_channels} channels)")
    n = len(data) // 2
    samples = np.frombuffer(data[:2 * n], dtype="<i2").astype(np.float64) / 32768.0
    return MonoSeries(samples, float(fs))


def write_wav_pcm16(path, samples, fs: int) -> None:
    """Minimal 16-bit PCM mono writer; samples in [-1, 1) are clipped and rounded."""
    pcm = np.clip(np.round(np.asarray(samples) * 32768.0), -32768, 32767).astype("<i2")
    payload = pcm.tobytes()
    header = b"RIFF" + struct.pack("<I", 36 + len(payload)) + b"WAVE"
    header += b"fmt " + struct.pack("<IHHIIHH", 16, 1, 1, int(fs), int(fs) * 2, 2, 16)
    header += b"data" + struct.pack("<I", len(payload))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(header + payload)


# --- manifests ----------------------------------------------------------------

def _parse_manifest(d: dict, root: Path) -> Manifest:
    try:
        version = int(d["version"])
        if version != MANIFEST_VERSION:
            raise FormatError(f"unsupported manifest version {version}")
        channels = tuple(str(c) for c in d["channels"])
        trials = []
        for t in d["trials"]:
            cands = tuple(
                CandidateRef(c["path"], c.get("kind", "envelope"),
                             float(c["fs"]) if "fs" in c else None,
                             int(c["length"]) if "length" in c else None,
                             float(c.get("azimuth_deg", 0.0)))
                for c in t["candidates"])
            if len(cands) != 4:
                raise FormatError(f"trial {t.get('trial')}: expected 4 candidates, "
                                  f"found {len(cands)}")
            for c in cands:
                if c.kind not in ("envelope", "audio"):
                    raise FormatError(f"unknown candidate kind {c.kind!r}")
                if c.kind == "envelope" and (c.fs is None or c.length is None):
                    raise FormatError("envelope candidates need 'fs' and 'length'")
            e = t["eeg"]
            trials.append(TrialRecord(str(t["subject"]), str(t["trial"]),
                                      int(t["attended_index"]),
                                      EegRef(e["path"], tuple(int(v) for v in e["shape"]),
                                             e.get("dtype", "float32")), cands))
        return Manifest(float(d["fs_raw"]), channels, trials, version, root)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed manifest: {exc!r}") from None


def read_manifest(path, check_files: bool = True) -> Manifest:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"manifest not found: {path}")
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON ({exc})") from None
    m = _parse_manifest(d, path.parent)
    if check_files:
        for t in m.trials:
            eeg = m.resolve(t.eeg.path)
            if eeg.suffix.lower() != ".csv":
                expected = t.eeg.shape[0] * t.eeg.shape[1] * _DTYPES[t.eeg.dtype].itemsize
                if not eeg.is_file():
                    raise FormatError(f"missing data file: {eeg}")
                if eeg.stat().st_size != expected:
                    raise FormatError(f"{eeg}: expected {expected} bytes, "
                                      f"found {eeg.stat().st_size}")
            for c in t.candidates:
                if not m.resolve(c.path).is_file():
                    raise FormatError(f"missing data file: {m.resolve(c.path)}")
    return m


def write_manifest(manifest: Manifest, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(manifest.dumps(), encoding="utf-8")


def load_trials(manifest: Manifest) -> list[Trial]:
    """Materialize every trial; candidates must already be envelopes at the EEG rate."""
    out = []
    for t in manifest.trials:
        eeg = load_eeg(manifest.resolve(t.eeg.path), t.eeg.shape, t.eeg.dtype,
                       manifest.fs_raw, manifest.channels)
        cands = []
        for c in t.candidates:
            if c.kind != "envelope":
                raise DataError(f"trial {t.subject}/{t.trial} has audio candidates; "
                                "run 'preprocess' first")
            cands.append(load_envelope(manifest.resolve(c.path), c.length, c.fs))
        try:
            out.append(Trial(eeg, tuple(cands), t.attended_index, t.subject, t.trial,
                             tuple(c.azimuth_deg for c in t.candidates)))
        except SchemaError as exc:
            raise DataError(f"trial {t.subject}/{t.trial}: {exc}; run 'preprocess' first") \
                from None
    return out


def write_dataset(trials: Sequence[Trial], out_dir) -> Manifest:
    """Write trials as raw float32 files plus ``manifest.json`` in ``out_dir``."""
    trials = list(trials)
    if not trials:
        raise DataError("no trials to write")
    out_dir = Path(out_dir)
    fs = trials[0].fs
    channels = trials[0].eeg.channels
    records = []
    for t in trials:
        if t.eeg.channels != channels or t.fs != fs:
            raise SchemaError("all trials must share channels and sampling rate")
        stem = f"{t.subject}_{t.trial_id}"
        eeg_rel = f"eeg/{stem}.f32"
        save_eeg(out_dir / eeg_rel, t.eeg.samples)
        cands = []
        for k, (c, az) in enumerate(zip(t.candidates, t.azimuths)):
            rel = f"envelopes/{stem}_c{k}.f32"
            save_envelope(out_dir / rel, c.samples)
            cands.append(CandidateRef(rel, "envelope", c.fs, len(c), az))
        records.append(TrialRecord(t.subject, t.trial_id, t.attended_index,
                                   EegRef(eeg_rel, (len(t.eeg), t.eeg.n_channels)),
                                   tuple(cands)))
    manifest = Manifest(fs, channels, records, MANIFEST_VERSION, out_dir)
    write_manifest(manifest, out_dir / "manifest.json")
    return manifest
