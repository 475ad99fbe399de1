"""Per-step episode records and their delimited-text serialization."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dynamics import EPS_N, PERIOD

TRACE_FORMAT_VERSION = 1


class TraceFormatError(ValueError):
    pass


@dataclass
class EpisodeTrace:
    """One rollout. Row ``k`` describes the state after control step ``k``.

    ``controls`` is complex when any slot is a complex coupling; ``actions``
    is ``None`` for open-loop (baseline) runs.
    """

    times: np.ndarray
    controls: np.ndarray
    occupancies: np.ndarray
    rewards: np.ndarray
    mode_labels: tuple[str, ...]
    target_mode: int
    n_thermal: float
    actions: np.ndarray | None = None
    complex_slots: tuple[bool, ...] = field(default=())

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.occupancies = np.asarray(self.occupancies, dtype=float)
        self.rewards = np.asarray(self.rewards, dtype=float)
        self.controls = np.asarray(self.controls)
        if self.controls.ndim == 1:
            self.controls = self.controls[:, None]
        if not self.complex_slots:
            self.complex_slots = tuple(np.iscomplexobj(self.controls) for _ in range(self.controls.shape[1]))
        if self.actions is not None:
            self.actions = np.asarray(self.actions, dtype=float)
        n = len(self.times)
        if not (len(self.occupancies) == len(self.rewards) == len(self.controls) == n):
            raise ValueError("trace columns have inconsistent lengths")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("trace times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def quotients(self) -> np.ndarray:
        """Occupancies divided by the target mode's thermal number."""
        return self.occupancies / self.n_thermal

    @property
    def target_quotient(self) -> np.ndarray:
        return np.maximum(self.occupancies[:, self.target_mode], EPS_N) / self.n_thermal

    @property
    def net_reward(self) -> float:
        return float(self.rewards.sum())

    @property
    def mean_reward(self) -> float:
        return float(self.rewards.mean()) if len(self) else 0.0

    @property
    def min_quotient(self) -> float:
        return float(self.target_quotient.min())

    @property
    def time_of_min(self) -> float:
        return float(self.times[np.argmin(self.target_quotient)])

    def time_to_quotient(self, target: float) -> float | None:
        """First time (in 1/omega_b) the target-mode quotient is <= ``target``."""
        hit = np.flatnonzero(self.target_quotient <= target)
        return float(self.times[hit[0]]) if hit.size else None

    def columns(self) -> dict[str, np.ndarray]:
        cols = {"t_periods": self.times / PERIOD, "t": self.times}
        for j, label in enumerate(self.mode_labels):
            cols[f"n_{label}"] = self.occupancies[:, j]
        for j, label in enumerate(self.mode_labels):
            cols[f"q_{label}"] = self.quotients[:, j]
        for s, is_c in enumerate(self.complex_slots):
            if is_c:
                cols[f"control{s}_re"] = self.controls[:, s].real
                cols[f"control{s}_im"] = self.controls[:, s].imag
            else:
                cols[f"control{s}"] = self.controls[:, s].real
        if self.actions is not None:
            for k in range(self.actions.shape[1]):
                cols[f"action{k}"] = self.actions[:, k]
        cols["reward"] = self.rewards
        return cols


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trace(trace: EpisodeTrace, path: str | Path | None = None) -> str:
    """Serialize to comma-delimited text; returns the text and writes it if ``path`` is given."""
    buf = io.StringIO()
    buf.write(f"# magnocool-trace v{TRACE_FORMAT_VERSION} target={trace.mode_labels[trace.target_mode]} "
              f"n_thermal={_fmt(trace.n_thermal)}\n")
    cols = trace.columns()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols.keys())
    for row in zip(*cols.values()):
        w.writerow([_fmt(v) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def read_trace(source: str | Path) -> EpisodeTrace:
    """Parse text written by :func:`write_trace` (a path or the text itself)."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# magnocool-trace v"):
        raise TraceFormatError("missing magnocool-trace header")
    meta = dict(kv.split("=", 1) for kv in lines[0].split()[3:])
    version = int(lines[0].split()[2][1:])
    if version != TRACE_FORMAT_VERSION:
        raise TraceFormatError(f"trace format v{version}, this reader handles v{TRACE_FORMAT_VERSION}")
    rows = list(csv.reader(lines[1:]))
    header, body = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    col = {h: body[:, i] for i, h in enumerate(header)}
    labels = tuple(h[2:] for h in header if h.startswith("n_"))
    occ = np.stack([col[f"n_{l}"] for l in labels], axis=1)
    slots, complex_slots = [], []
    s = 0
    while True:
        if f"control{s}_re" in col:
            slots.append(col[f"control{s}_re"] + 1j * col[f"control{s}_im"])
            complex_slots.append(True)
        elif f"control{s}" in col:
            slots.append(col[f"control{s}"])
            complex_slots.append(False)
        else:
            break
        s += 1
    controls = np.stack(slots, axis=1) if slots else np.zeros((len(body), 0))
    actions = [col[h] for h in header if h.startswith("action")]
    return EpisodeTrace(
        times=col["t"],
        controls=controls,
        occupancies=occ,
        rewards=col["reward"],
        mode_labels=labels,
        target_mode=labels.index(meta["target"]),
        n_thermal=float(meta["n_thermal"]),
        actions=np.stack(actions, axis=1) if actions else None,
        complex_slots=tuple(complex_slots),
    )
