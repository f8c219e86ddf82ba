"""Missing-response encoding of paired weekly mood scores into signature-ready paths.

Raw data per participant is a weekly stream of paired (ASRM, QIDS) totals
where a skipped week carries the ``MISSING`` sentinel in both coordinates.
Encoding fills each gap with the nearest past valid value, counts misses
cumulatively as a third channel, rescales all three channels to [0, 1] and
accumulates them over time so that feature extraction sees a monotone
3-dimensional path starting at the origin.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import InsufficientDataError
from .sigcore import stream_signature

MISSING = -1
ASRM_MAX = 20
QIDS_MAX = 27


class Group(Enum):
    """Diagnostic group labels; enum order fixes class indices 0, 1, 2."""

    BD = "BD"
    HC = "HC"
    BPD = "BPD"

    @property
    def index(self) -> int:
        return list(Group).index(self)


@dataclass(frozen=True)
class WeeklyObservation:
    """One week of paired totals; both scores are MISSING for a skipped week."""

    week: int
    asrm: int
    qids: int

    @property
    def is_missing(self) -> bool:
        return self.asrm == MISSING or self.qids == MISSING


@dataclass(frozen=True)
class ParticipantRecord:
    id: str
    group: Group
    weeks: tuple[WeeklyObservation, ...]

    @property
    def n_weeks(self) -> int:
        return len(self.weeks)


@dataclass(frozen=True)
class Cohort:
    """Participant records plus the (id, reason) pairs dropped at ingestion."""

    records: tuple[ParticipantRecord, ...]
    exclusions: tuple[tuple[str, str], ...] = ()

    def by_group(self, group: Group) -> tuple[ParticipantRecord, ...]:
        return tuple(r for r in self.records if r.group == group)


def feed_forward_fill(
    window: Sequence[WeeklyObservation],
) -> tuple[np.ndarray, np.ndarray]:
    """Fill missing scores from the nearest past valid value and count misses.

    Returns an (n, 2) float matrix of filled (ASRM, QIDS) scores and an
    (n,) integer vector where entry t is the number of missing weeks among
    weeks 0..t.  Leading missing weeks are back-filled from the first valid
    observation (zero increments, so signature-neutral); an entirely missing
    window is filled with 0.
    """
    n = len(window)
    if n < 1:
        raise InsufficientDataError("window must contain at least one week")
    raw = np.array([[obs.asrm, obs.qids] for obs in window], dtype=float)
    missing_week = np.array([obs.is_missing for obs in window])
    filled = raw.copy()
    for col in range(2):
        last = None
        for t in range(n):
            if filled[t, col] == MISSING:
                if last is not None:
                    filled[t, col] = last
            else:
                last = filled[t, col]
        if last is None:
            filled[:, col] = 0.0
        else:
            # back-fill the leading gap from the first valid value
            first_valid = int(np.argmax(raw[:, col] != MISSING))
            filled[:first_valid, col] = filled[first_valid, col]
    missing_count = np.cumsum(missing_week).astype(int)
    return filled, missing_count


def normalize_and_cumulate(
    filled: np.ndarray, missing_count: np.ndarray, window_length: int
) -> np.ndarray:
    """Scale channels to [0, 1] and accumulate them into an (n+1, 3) path.

    Per-week values are divided by the instrument maxima (ASRM 20, QIDS 27)
    and the cumulative miss count by the window length, then summed over time
    with a zero basepoint row prepended.  Row t is the running sum of scaled
    rows 1..t, so level-1 signature terms equal the total scaled mass.
    """
    filled = np.asarray(filled, dtype=float)
    missing_count = np.asarray(missing_count, dtype=float)
    n = filled.shape[0]
    if n == 0 or window_length < 1:
        raise InsufficientDataError("cannot encode an empty window")
    if filled.shape != (n, 2) or missing_count.shape != (n,):
        raise ValueError("filled must be (n, 2) and missing_count (n,)")
    scaled = np.column_stack(
        [filled[:, 0] / ASRM_MAX, filled[:, 1] / QIDS_MAX, missing_count / window_length]
    )
    path = np.zeros((n + 1, 3))
    path[1:] = np.cumsum(scaled, axis=0)
    return path


def mrsf(window: Sequence[WeeklyObservation], level: int = 2) -> np.ndarray:
    """Missing-response-incorporated signature features of one window.

    The flattened truncated signature of the filled, normalized, cumulated
    3-channel path, with the constant level-0 term dropped; length is
    sum(3**k for k = 1..level), i.e. 12 at level 2.
    """
    if len(window) < 2:
        raise InsufficientDataError("need at least 2 weeks for signature features")
    filled, missing_count = feed_forward_fill(window)
    path = normalize_and_cumulate(filled, missing_count, len(window))
    return stream_signature(path, level).flatten()


def naive_features(window: Sequence[WeeklyObservation]) -> np.ndarray:
    """Per-instrument mean over valid scores only; an all-missing instrument yields 0."""
    if len(window) < 1:
        raise InsufficientDataError("window must contain at least one week")
    out = np.zeros(2)
    for col, values in enumerate(
        (np.array([o.asrm for o in window]), np.array([o.qids for o in window]))
    ):
        valid = values[values != MISSING]
        out[col] = valid.mean() if valid.size else 0.0
    return out


def extract_window(
    record: ParticipantRecord, length: int, rng: np.random.Generator
) -> tuple[WeeklyObservation, ...]:
    """Contiguous block of `length` weeks starting at a uniformly drawn index."""
    if record.n_weeks < length:
        raise InsufficientDataError(
            f"participant {record.id} has {record.n_weeks} weeks, needs {length}"
        )
    start = int(rng.integers(0, record.n_weeks - length + 1))
    return record.weeks[start : start + length]
