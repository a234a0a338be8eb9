"""Scalp-grid tensorization: (channels x time) trials -> (1 x rows x cols x time) volumes."""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError

MOTOR_CHANNELS = (
    "FC5", "FC3", "FC1", "FC2", "FC4", "FC6",
    "C5", "C3", "C1", "Cz", "C2", "C4", "C6",
    "CP5", "CP3", "CP1", "CPz", "CP2", "CP4", "CP6",
)


@dataclass
class GridLayout:
    rows: int
    cols: int
    placement: dict

    def __post_init__(self):
        cells = list(self.placement.values())
        if len(set(cells)) != len(cells):
            raise InputError("two channels share a grid cell")
        for name, (r, c) in self.placement.items():
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise InputError(f"channel {name} placed outside the {self.rows}x{self.cols} grid")

    @property
    def mask(self):
        m = np.zeros((self.rows, self.cols), dtype=bool)
        for r, c in self.placement.values():
            m[r, c] = True
        return m

    @property
    def channels(self):
        return list(self.placement)

    def to_text(self):
        lines = [f"{name} {r} {c}" for name, (r, c) in self.placement.items()]
        return f"# grid {self.rows} {self.cols}\n" + "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        rows = cols = None
        placement = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 3 and parts[0] == "grid":
                    rows, cols = int(parts[1]), int(parts[2])
                continue
            name, r, c = line.split()
            placement[name] = (int(r), int(c))
        if rows is None:
            rows = max(r for r, _ in placement.values()) + 1
            cols = max(c for _, c in placement.values()) + 1
        return cls(rows, cols, placement)

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path):
        return cls.from_text(Path(path).read_text())


def default_layout():
    """3 x 7 motor-strip grid; FC row has an empty centre cell (FCz is the ground)."""
    fc = ["FC5", "FC3", "FC1", None, "FC2", "FC4", "FC6"]
    c = ["C5", "C3", "C1", "Cz", "C2", "C4", "C6"]
    cp = ["CP5", "CP3", "CP1", "CPz", "CP2", "CP4", "CP6"]
    placement = {}
    for r, row in enumerate((fc, c, cp)):
        for col, name in enumerate(row):
            if name is not None:
                placement[name] = (r, col)
    return GridLayout(3, 7, placement)


@dataclass
class GridTrial:
    data: np.ndarray          # (1, rows, cols, time)
    mask: np.ndarray
    label: int
    fs_hz: float


def to_grid(trial, layout=None):
    """Copy each placed channel's series into its grid cell; empty cells stay 0."""
    layout = layout or default_layout()
    index = {n: i for i, n in enumerate(trial.channels)}
    missing = [n for n in layout.placement if n not in index]
    if missing:
        raise InputError(f"trial lacks placed channel(s): {', '.join(missing)}")
    grid = np.zeros((1, layout.rows, layout.cols, trial.data.shape[1]))
    for name, (r, c) in layout.placement.items():
        grid[0, r, c] = trial.data[index[name]]
    return GridTrial(grid, layout.mask, trial.label, trial.fs_hz)


def from_grid(grid_trial, layout=None):
    """Inverse of :func:`to_grid` on placed cells: ``(channel names, channels x time)``."""
    layout = layout or default_layout()
    names = layout.channels
    data = np.stack([grid_trial.data[0, r, c] for r, c in layout.placement.values()])
    return names, data


def stack_grids(grid_trials):
    x = np.stack([g.data for g in grid_trials]) if grid_trials else np.zeros((0, 1, 0, 0, 0))
    y = np.array([g.label for g in grid_trials], dtype=int)
    return x, y


@dataclass
class NormStats:
    """Per-cell mean and standard deviation over trials and time."""

    mean: np.ndarray
    std: np.ndarray
    mask: np.ndarray = field(repr=False)


def fit_normalizer(grid_trials, floor=1e-8):
    """Per-cell z-score statistics; pass the training partition only."""
    x, _ = stack_grids(grid_trials)
    mask = grid_trials[0].mask
    mean = x.mean(axis=(0, 4))[0]
    std = np.maximum(x.std(axis=(0, 4))[0], floor)
    mean[~mask] = 0.0
    std[~mask] = 1.0
    return NormStats(mean, std, mask)


def normalize(grid_trials, stats):
    """Apply ``(x - mean) / std`` per cell; masked cells are forced to 0."""
    out = []
    for g in grid_trials:
        if g.data.shape[1:3] != stats.mean.shape:
            raise InputError(
                f"grid {g.data.shape[1:3]} does not match statistics {stats.mean.shape}")
        z = (g.data - stats.mean[None, :, :, None]) / stats.std[None, :, :, None]
        z[:, ~stats.mask] = 0.0
        out.append(GridTrial(z, g.mask, g.label, g.fs_hz))
    return out
