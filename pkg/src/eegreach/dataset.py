"""Recordings, trials, epoching, channel selection, stratified splitting and the EEGD file format.

EEGD layout (little-endian)::

    "EEGD" | u16 version=1 | f32 fs_hz | u16 n_channels | u32 n_trials
    | u32 samples_per_trial | n_channels x (u8 len, ASCII name)
    | n_trials x (u8 label, samples_per_trial x n_channels f32, channel-major)
    [ continuous files only: u32 n_events | n_events x (u32 onset, u8 class) ]
    | u32 CRC-32 of everything before it

A continuous recording is stored as a single trial whose label byte is
``CONTINUOUS`` (255), followed by its event table.
"""
import csv
import os
import struct
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import seeding
from .errors import FormatError, InputError

CLASS_NAMES = ("Backward", "Up", "Down", "Left", "Right", "Forward")
N_CLASSES = len(CLASS_NAMES)
MAGIC = b"EEGD"
VERSION = 1
CONTINUOUS = 255
TRIAL_SECONDS = 3.0


@dataclass
class Recording:
    """Continuous multi-channel signal with cue events ``(onset_sample, class_id)``."""

    fs_hz: float
    channels: list
    samples: np.ndarray
    events: list = field(default_factory=list)

    def __post_init__(self):
        self.channels = list(self.channels)
        self.samples = np.asarray(self.samples, dtype=np.float64)
        self.events = [(int(o), int(c)) for o, c in self.events]
        if len(set(self.channels)) != len(self.channels):
            raise InputError("channel names must be unique")
        if self.samples.shape[0] != len(self.channels):
            raise InputError(
                f"{len(self.channels)} channel names for {self.samples.shape[0]} rows")
        for onset, cls in self.events:
            if not 0 <= cls < N_CLASSES:
                raise InputError(f"event class {cls} outside 0..{N_CLASSES - 1}")
            if not 0 <= onset < self.samples.shape[1]:
                raise InputError(f"event onset {onset} outside the recording")

    @property
    def n_samples(self):
        return self.samples.shape[1]


@dataclass
class Trial:
    """One labelled, epoched segment (channels x time)."""

    channels: list
    data: np.ndarray
    fs_hz: float
    label: int

    def __post_init__(self):
        self.channels = list(self.channels)
        self.data = np.asarray(self.data, dtype=np.float64)
        self.label = int(self.label)
        if not 0 <= self.label < N_CLASSES:
            raise InputError(f"label {self.label} outside 0..{N_CLASSES - 1}")
        if self.data.shape[0] != len(self.channels):
            raise InputError("trial rows do not match channel names")

    @property
    def class_name(self):
        return CLASS_NAMES[self.label]


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0
    stratified: bool = True


# -- operations ---------------------------------------------------------------

def epoch(recording, window_s=(0.0, TRIAL_SECONDS)):
    """Cut one Trial per event over ``[onset + start*fs, onset + end*fs)``."""
    start, end = window_s
    fs = recording.fs_hz
    a = int(round(start * fs))
    b = int(round(end * fs))
    if b <= a:
        raise InputError(f"empty epoch window {window_s}")
    trials = []
    for k, (onset, cls) in enumerate(recording.events):
        lo, hi = onset + a, onset + b
        if lo < 0 or hi > recording.n_samples:
            raise InputError(
                f"event {k} (onset {onset}, class {cls}) window [{lo}, {hi}) out of bounds")
        trials.append(Trial(recording.channels, recording.samples[:, lo:hi].copy(), fs, cls))
    return trials


def select_channels(obj, names):
    """Keep ``names`` in exactly that order (works on Trial or Recording)."""
    names = list(names)
    index = {n: i for i, n in enumerate(obj.channels)}
    missing = [n for n in names if n not in index]
    if missing:
        raise InputError(f"channel(s) not present: {', '.join(missing)}")
    rows = [index[n] for n in names]
    if isinstance(obj, Recording):
        return replace(obj, channels=names, samples=obj.samples[rows])
    return replace(obj, channels=names, data=obj.data[rows])


def split(trials, spec=SplitSpec()):
    """Seeded stratified partition into ``(train, test)``.

    Per class, ``floor(train_fraction * n_class)`` trials go to training and
    the rest to test; order inside each part follows the input order.
    """
    labels = np.array([t.label for t in trials], dtype=int)
    train_idx, test_idx = split_indices(labels, spec)
    return [trials[i] for i in train_idx], [trials[i] for i in test_idx]


def split_indices(labels, spec=SplitSpec()):
    labels = np.asarray(labels, dtype=int)
    rng = seeding.rng(spec.seed, "split")
    train = []
    for c in range(N_CLASSES):
        idx = np.flatnonzero(labels == c)
        perm = idx[rng.permutation(len(idx))]
        train.extend(perm[:int(np.floor(spec.train_fraction * len(idx) + 1e-9))].tolist())
    train = np.sort(np.array(train, dtype=int))
    test = np.setdiff1d(np.arange(len(labels)), train)
    return train, test


def stack(trials):
    """``(data [n, channels, time], labels [n])`` from a list of Trials."""
    if not trials:
        return np.zeros((0, 0, 0)), np.zeros(0, dtype=int)
    return (np.stack([t.data for t in trials]), np.array([t.label for t in trials], dtype=int))


# -- EEGD format ----------------------------------------------------------------

def _header(fs_hz, channels, n_trials, n_samples):
    out = bytearray(MAGIC)
    out += struct.pack("<HfHII", VERSION, fs_hz, len(channels), n_trials, n_samples)
    for name in channels:
        raw = name.encode("ascii")
        if len(raw) > 255:
            raise InputError(f"channel name too long: {name!r}")
        out += struct.pack("<B", len(raw)) + raw
    return out


def encode(obj):
    """Serialize a Recording or a list of Trials to EEGD bytes."""
    if isinstance(obj, Recording):
        out = _header(obj.fs_hz, obj.channels, 1, obj.n_samples)
        out += struct.pack("<B", CONTINUOUS)
        out += np.ascontiguousarray(obj.samples, dtype="<f4").tobytes()
        out += struct.pack("<I", len(obj.events))
        for onset, cls in obj.events:
            out += struct.pack("<IB", onset, cls)
    else:
        trials = list(obj)
        if not trials:
            raise InputError("cannot write an empty trial list")
        first = trials[0]
        for t in trials:
            if t.channels != first.channels or t.data.shape != first.data.shape \
                    or t.fs_hz != first.fs_hz:
                raise InputError("all trials must share channels, shape and rate")
        out = _header(first.fs_hz, first.channels, len(trials), first.data.shape[1])
        for t in trials:
            out += struct.pack("<B", t.label)
            out += np.ascontiguousarray(t.data, dtype="<f4").tobytes()
    out += struct.pack("<I", zlib.crc32(out) & 0xFFFFFFFF)
    return bytes(out)


class _Reader:
    def __init__(self, buf):
        self.buf = buf
        self.pos = 0

    def take(self, n, what):
        if self.pos + n > len(self.buf):
            raise FormatError(f"truncated file while reading {what}", self.pos)
        chunk = self.buf[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, fmt, what):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what))


def decode(buf):
    """Parse EEGD bytes into a Recording or a list of Trials."""
    buf = bytes(buf)
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise FormatError(f"bad magic {buf[:4]!r}, expected {MAGIC!r}", 0)
    if len(buf) < 8:
        raise FormatError("truncated file while reading header", len(buf))
    stored = struct.unpack("<I", buf[-4:])[0]
    if zlib.crc32(buf[:-4]) & 0xFFFFFFFF != stored:
        raise FormatError("CRC-32 mismatch", len(buf) - 4)
    r = _Reader(buf[:-4])
    r.take(4, "magic")
    version, = r.unpack("<H", "version")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    fs, n_ch, n_trials, n_samples = r.unpack("<fHII", "header")
    channels = []
    for _ in range(n_ch):
        length, = r.unpack("<B", "channel name length")
        channels.append(r.take(length, "channel name").decode("ascii"))
    block = 4 * n_ch * n_samples
    trials = []
    for k in range(n_trials):
        pos = r.pos
        label, = r.unpack("<B", f"label of trial {k}")
        data = np.frombuffer(r.take(block, f"samples of trial {k}"), dtype="<f4")
        data = data.reshape(n_ch, n_samples).astype(np.float64)
        if label == CONTINUOUS:
            if n_trials != 1:
                raise FormatError("continuous block inside a multi-trial file", pos)
            n_events, = r.unpack("<I", "event count")
            events = [r.unpack("<IB", f"event {e}") for e in range(n_events)]
            rec = Recording(float(fs), channels, data, events)
            if r.pos != len(r.buf):
                raise FormatError("trailing bytes after event table", r.pos)
            return rec
        if label >= N_CLASSES:
            raise FormatError(f"label {label} out of range", pos)
        trials.append(Trial(channels, data, float(fs), label))
    if r.pos != len(r.buf):
        raise FormatError("trailing bytes after last trial", r.pos)
    return trials


def write_dataset(obj, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(encode(obj))
    os.replace(tmp, path)


def read_dataset(path):
    return decode(Path(path).read_bytes())


def export_csv(trials, out_dir):
    """One CSV per trial: header row of channel names, one row per sample."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for k, t in enumerate(trials):
        p = out_dir / f"trial_{k:04d}_{t.class_name}.csv"
        with p.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(t.channels)
            for row in t.data.T:
                w.writerow([repr(float(v)) for v in row])
        paths.append(p)
    return paths
