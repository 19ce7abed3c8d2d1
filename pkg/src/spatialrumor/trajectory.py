"""Count trajectories and event logs shared by both engines."""

from __future__ import annotations

import io
from dataclasses import dataclass
from typing import Iterable

import numpy as np

TRAJECTORY_COLUMNS = ("t", "n_ignorant", "n_spreader", "n_stifler")
EVENT_COLUMNS = ("t", "site", "from", "to")


@dataclass
class EventLog:
    t: np.ndarray
    site: np.ndarray
    frm: np.ndarray
    to: np.ndarray

    def __len__(self):
        return self.t.shape[0]

    def __eq__(self, other):
        if not isinstance(other, EventLog):
            return NotImplemented
        return all(
            np.array_equal(getattr(self, f), getattr(other, f)) for f in ("t", "site", "frm", "to")
        )

    @classmethod
    def empty(cls) -> "EventLog":
        return cls(
            np.zeros(0), np.zeros(0, np.int64), np.zeros(0, np.int8), np.zeros(0, np.int8)
        )

    @classmethod
    def concat(cls, logs: Iterable["EventLog"]) -> "EventLog":
        logs = list(logs)
        if not logs:
            return cls.empty()
        return cls(*(np.concatenate([getattr(lg, f) for lg in logs]) for f in ("t", "site", "frm", "to")))

    def to_csv(self, header: Iterable[str] = ()) -> str:
        buf = io.StringIO()
        for line in header:
            buf.write(f"# {line}\n")
        buf.write(",".join(EVENT_COLUMNS) + "\n")
        for t, x, a, b in zip(self.t.tolist(), self.site.tolist(), self.frm.tolist(), self.to.tolist()):
            buf.write(f"{t!r},{x},{a},{b}\n")
        return buf.getvalue()


@dataclass
class Trajectory:
    """Counts ``(n_ignorant, n_spreader, n_stifler)`` at strictly increasing times."""

    times: np.ndarray
    counts: np.ndarray
    events: EventLog | None = None

    def __len__(self):
        return self.times.shape[0]

    @property
    def final_counts(self) -> tuple[int, int, int]:
        return tuple(int(c) for c in self.counts[-1])

    @classmethod
    def from_events(
        cls,
        t0: float,
        initial_counts,
        log: EventLog,
        sample_dt: float | None = None,
        t_end: float | None = None,
        keep_events: bool = True,
    ) -> "Trajectory":
        """Record the initial state, then one record per event.

        With ``sample_dt`` the counts are instead read off on the grid
        ``t0, t0 + dt, ...`` up to ``t_end``.
        """
        initial = np.asarray(initial_counts, dtype=np.int64)
        delta = np.zeros((len(log), 3), dtype=np.int64)
        rows = np.arange(len(log))
        np.add.at(delta, (rows, log.frm.astype(np.int64)), -1)
        np.add.at(delta, (rows, log.to.astype(np.int64)), 1)
        counts = np.vstack([initial[None, :], initial + np.cumsum(delta, axis=0)])
        times = np.concatenate([[t0], log.t])
        if sample_dt is not None:
            if sample_dt <= 0:
                raise ValueError("sample_dt must be positive")
            end = times[-1] if t_end is None else t_end
            n = int(np.floor((end - t0) / sample_dt + 1e-9)) + 1
            grid = t0 + sample_dt * np.arange(n)
            pick = np.searchsorted(times, grid, side="right") - 1
            times, counts = grid, counts[pick]
        return cls(times, counts, log if keep_events else None)

    def to_csv(self, header: Iterable[str] = ()) -> str:
        buf = io.StringIO()
        for line in header:
            buf.write(f"# {line}\n")
        buf.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for t, (a, b, c) in zip(self.times.tolist(), self.counts.tolist()):
            buf.write(f"{t!r},{a},{b},{c}\n")
        return buf.getvalue()

    def to_records(self) -> list[dict]:
        return [
            {"t": t, "n_ignorant": a, "n_spreader": b, "n_stifler": c}
            for t, (a, b, c) in zip(self.times.tolist(), self.counts.tolist())
        ]
