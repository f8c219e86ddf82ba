"""The three experiments: diagnostic-group classification, next-week mood
state prediction, and next-week score/severity prediction, each run with
signature features (MRSF) and a mean-score naive baseline under identical
window draws, splits, and seeds, so the feature map is the only variable.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum

import numpy as np

from .encode import (
    ASRM_MAX,
    MISSING,
    QIDS_MAX,
    Group,
    extract_window,
    mrsf,
    naive_features,
)
from .errors import InsufficientDataError
from .forest import CLASSIFY, REGRESS, ForestConfig, fit
from .metrics import EvalReport, evaluate_classification, evaluate_regression, mae

CLASSIFY_TASK = "classify"
STATE_TASK = "state_predict"
SCORE_TASK = "score_predict"


class Instrument(Enum):
    ASRM = "asrm"
    QIDS = "qids"

    @property
    def max_score(self):
        return ASRM_MAX if self is Instrument.ASRM else QIDS_MAX

    @property
    def elevated_threshold(self):
        return 5 if self is Instrument.ASRM else 10

    def score_of(self, observation):
        return observation.asrm if self is Instrument.ASRM else observation.qids


class StateLabel(IntEnum):
    NO_ANSWER = 0
    NORMAL = 1
    ELEVATED = 2


class SeverityBucket(IntEnum):
    NONE0 = 0
    MILD = 1
    MODERATE = 2
    SEVERE = 3
    VERY_SEVERE = 4


_SEVERITY_EDGES = {Instrument.ASRM: (6, 10, 14, 18), Instrument.QIDS: (6, 11, 16, 21)}


def state_label(score, instrument):
    """Next-week state: missing response, normal, or elevated mood."""
    if score == MISSING:
        return StateLabel.NO_ANSWER
    if not 0 <= score <= instrument.max_score:
        raise ValueError(f"score {score} outside {instrument.name} range")
    if score > instrument.elevated_threshold:
        return StateLabel.ELEVATED
    return StateLabel.NORMAL


def severity_bucket(score, instrument):
    """Five-level severity from the instrument's published cut-offs."""
    if not 0 <= score <= instrument.max_score:
        raise ValueError(f"score {score} outside {instrument.name} range")
    edges = _SEVERITY_EDGES[instrument]
    return SeverityBucket(int(np.searchsorted(edges, score, side="right")))


@dataclass(frozen=True)
class TaskConfig:
    """Shared experiment settings; window_length defaults to 20 for
    classification and 10 for the prediction tasks."""

    task: str
    window_length: int | None = None
    signature_level: int = 2
    split_fraction: float = 0.7
    instrument: Instrument | None = None
    groups: tuple[Group, ...] | None = None
    seed: int = 0
    forest: ForestConfig = field(default_factory=ForestConfig)
    bootstrap_samples: int = 1000

    def __post_init__(self):
        if self.task not in (CLASSIFY_TASK, STATE_TASK, SCORE_TASK):
            raise ValueError(f"unknown task {self.task!r}")
        if self.window_length is None:
            default = 20 if self.task == CLASSIFY_TASK else 10
            object.__setattr__(self, "window_length", default)
        if self.window_length < 2:
            raise ValueError("window_length must be >= 2")
        if not 0.0 < self.split_fraction < 1.0:
            raise ValueError("split_fraction must lie in (0,1)")
        if self.signature_level < 1:
            raise ValueError("signature_level must be >= 1")
        if self.bootstrap_samples < 1:
            raise ValueError("bootstrap_samples must be >= 1")

    @property
    def instruments(self):
        return (self.instrument,) if self.instrument else tuple(Instrument)

    @property
    def group_list(self):
        return self.groups if self.groups else tuple(Group)


@dataclass(frozen=True)
class ProbabilityPoint:
    """A participant's 3-vector (probabilities or state proportions)."""

    participant_id: str
    group: Group
    probs: np.ndarray


@dataclass(frozen=True)
class ClassificationResult:
    mrsf_report: EvalReport
    naive_report: EvalReport
    loo_points: tuple[ProbabilityPoint, ...]
    n_train: int
    n_test: int


@dataclass(frozen=True)
class StatePredictionResult:
    group: Group
    instrument: Instrument
    mrsf_report: EvalReport
    naive_report: EvalReport
    n_train: int
    n_test: int


@dataclass(frozen=True)
class ScorePredictionResult:
    group: Group
    instrument: Instrument
    mrsf_report: EvalReport
    naive_report: EvalReport
    severity_report: EvalReport
    n_train: int
    n_test: int


@dataclass(frozen=True)
class RolloutResult:
    instrument: Instrument
    points: tuple[ProbabilityPoint, ...]
    skipped: tuple[tuple[str, str], ...]


def _split_indices(n, fraction, rng):
    # both sides stay nonempty
    order = rng.permutation(n)
    k = min(max(int(round(fraction * n)), 1), n - 1)
    return np.sort(order[:k]), np.sort(order[k:])


def run_classification(cohort, config):
    """One random 20-week window per participant; stratified 70/30 split;
    identical split and forest seed for the MRSF and naive models; plus
    leave-one-out probability vectors from the MRSF model."""
    wl = config.window_length
    records = [r for r in cohort.records if r.n_weeks >= wl]
    for g in Group:
        if sum(r.group is g for r in records) < 2:
            raise InsufficientDataError(f"group {g.name} has < 2 eligible participants")

    window_rng = np.random.default_rng((config.seed, 101))
    windows = [extract_window(r, wl, window_rng) for r in records]
    X_mrsf = np.array([mrsf(w, config.signature_level) for w in windows])
    X_naive = np.array([naive_features(w) for w in windows])
    y = np.array([r.group.index for r in records])

    split_rng = np.random.default_rng((config.seed, 102))
    train_idx, test_idx = [], []
    for g in Group:
        grp = np.nonzero(y == g.index)[0]
        tr, te = _split_indices(len(grp), config.split_fraction, split_rng)
        train_idx.extend(grp[tr])
        test_idx.extend(grp[te])
    train_idx, test_idx = np.sort(train_idx), np.sort(test_idx)

    reports = []
    for X in (X_mrsf, X_naive):
        model = fit(X[train_idx], y[train_idx], CLASSIFY, config.forest,
                    seed=(config.seed, 103), n_classes=3)
        probs = model.predict_proba(X[test_idx])
        reports.append(
            evaluate_classification(
                y[test_idx], probs.argmax(axis=1), probs=probs, n_classes=3,
                n_resamples=config.bootstrap_samples, seed=(config.seed, 104),
            )
        )

    loo_points = []
    for i, rec in enumerate(records):
        keep = np.arange(len(records)) != i
        model = fit(X_mrsf[keep], y[keep], CLASSIFY, config.forest,
                    seed=(config.seed, 106, i), n_classes=3)
        loo_points.append(
            ProbabilityPoint(rec.id, rec.group, model.predict_proba(X_mrsf[i]))
        )

    return ClassificationResult(
        mrsf_report=reports[0],
        naive_report=reports[1],
        loo_points=tuple(loo_points),
        n_train=len(train_idx),
        n_test=len(test_idx),
    )


def _sliding_instances(record, window_length):
    return [
        (record.weeks[s : s + window_length], record.weeks[s + window_length])
        for s in range(record.n_weeks - window_length)
    ]


def _prediction_features(records, config):
    """Per participant: MRSF matrix, naive matrix, and target observations
    for every sliding (window, next week) instance."""
    feats = []
    for rec in records:
        inst = _sliding_instances(rec, config.window_length)
        X_m = np.array([mrsf(w, config.signature_level) for w, _ in inst])
        X_n = np.array([naive_features(w) for w, _ in inst])
        targets = [t for _, t in inst]
        feats.append((X_m, X_n, targets))
    return feats


def _group_records(cohort, config, min_weeks):
    out = {}
    for g in config.group_list:
        recs = [r for r in cohort.by_group(g) if r.n_weeks >= min_weeks]
        if len(recs) < 2:
            raise InsufficientDataError(f"group {g.name} has < 2 eligible participants")
        out[g] = recs
    return out


def run_state_prediction(cohort, config):
    """Per-group 3-class forests predicting the next week's state label from
    each sliding window; participants are split 70/30 so no participant
    contributes instances to both sides."""
    results = []
    by_group = _group_records(cohort, config, config.window_length + 1)
    for g, recs in by_group.items():
        feats = _prediction_features(recs, config)
        split_rng = np.random.default_rng((config.seed, 201, g.index))
        tr, te = _split_indices(len(recs), config.split_fraction, split_rng)
        for instrument in config.instruments:
            labels = [
                np.array([state_label(instrument.score_of(t), instrument) for t in targets])
                for _, _, targets in feats
            ]
            y_train = np.concatenate([labels[i] for i in tr])
            y_test = np.concatenate([labels[i] for i in te])
            reports = []
            for col in (0, 1):
                X_train = np.vstack([feats[i][col] for i in tr])
                X_test = np.vstack([feats[i][col] for i in te])
                model = fit(X_train, y_train, CLASSIFY, config.forest,
                            seed=(config.seed, 202, g.index), n_classes=3)
                probs = model.predict_proba(X_test)
                reports.append(
                    evaluate_classification(
                        y_test, probs.argmax(axis=1), probs=probs, n_classes=3,
                        n_resamples=config.bootstrap_samples,
                        seed=(config.seed, 203, g.index),
                    )
                )
            results.append(
                StatePredictionResult(
                    group=g,
                    instrument=instrument,
                    mrsf_report=reports[0],
                    naive_report=reports[1],
                    n_train=len(y_train),
                    n_test=len(y_test),
                )
            )
    return tuple(results)


def run_score_prediction(cohort, config):
    """Per-group regressors for the next week's raw score, evaluated only
    where that response is present; predictions are clipped to the
    instrument range; the severity report buckets the MRSF predictions."""
    results = []
    by_group = _group_records(cohort, config, config.window_length + 1)
    for g, recs in by_group.items():
        feats = _prediction_features(recs, config)
        split_rng = np.random.default_rng((config.seed, 301, g.index))
        tr, te = _split_indices(len(recs), config.split_fraction, split_rng)
        for instrument in config.instruments:
            masks = [
                np.array([not t.is_missing for t in targets])
                for _, _, targets in feats
            ]
            scores = [
                np.array([instrument.score_of(t) for t in targets], dtype=float)
                for _, _, targets in feats
            ]
            y_train = np.concatenate([scores[i][masks[i]] for i in tr])
            y_test = np.concatenate([scores[i][masks[i]] for i in te])
            if len(y_train) < 2 or len(y_test) < 1:
                raise InsufficientDataError(
                    f"group {g.name} lacks present next-week responses"
                )
            preds = []
            reports = []
            for col in (0, 1):
                X_train = np.vstack([feats[i][col][masks[i]] for i in tr])
                X_test = np.vstack([feats[i][col][masks[i]] for i in te])
                model = fit(X_train, y_train, REGRESS, config.forest,
                            seed=(config.seed, 302, g.index))
                pred = np.clip(model.predict(X_test), 0, instrument.max_score)
                preds.append(pred)
                reports.append(
                    evaluate_regression(
                        y_test, pred, n_resamples=config.bootstrap_samples,
                        seed=(config.seed, 303, g.index),
                    )
                )
            bucket_true = np.array(
                [severity_bucket(int(s), instrument) for s in y_test]
            )
            bucket_pred = np.array(
                [severity_bucket(int(np.rint(p)), instrument) for p in preds[0]]
            )
            severity = evaluate_classification(
                bucket_true, bucket_pred, probs=None, n_classes=5,
                n_resamples=config.bootstrap_samples,
                seed=(config.seed, 304, g.index),
            )
            severity = replace(severity, mae=mae(bucket_true, bucket_pred))
            results.append(
                ScorePredictionResult(
                    group=g,
                    instrument=instrument,
                    mrsf_report=reports[0],
                    naive_report=reports[1],
                    severity_report=severity,
                    n_train=len(y_train),
                    n_test=len(y_test),
                )
            )
    return tuple(results)


def rollout_eligible(record, window_length=10, horizon=5):
    """More than `horizon` sliding windows with a next-week target."""
    return record.n_weeks - window_length > horizon


def rollout_states(record, model, instrument, signature_level=2,
                   window_length=10, horizon=5):
    """Predict the last `horizon` next-week states from their sliding
    windows and return the frequency vector over the three state labels."""
    if not rollout_eligible(record, window_length, horizon):
        raise InsufficientDataError(
            f"participant {record.id} has {record.n_weeks} weeks; "
            f"needs > {horizon} windows of {window_length}"
        )
    feats = []
    for t in range(record.n_weeks - horizon, record.n_weeks):
        window = record.weeks[t - window_length : t]
        feats.append(mrsf(window, signature_level))
    labels = model.predict(np.array(feats))
    counts = np.bincount(labels.astype(int), minlength=3)
    return counts / horizon


def run_state_rollout(cohort, config, horizon=5):
    """For each eligible participant, train a per-participant model on one
    random (window, next week) instance from every other same-group
    participant, then predict the participant's last `horizon` states."""
    wl = config.window_length
    results = []
    for instrument in config.instruments:
        points, skipped = [], []
        for g in config.group_list:
            recs = cohort.by_group(g)
            donors = [r for r in recs if r.n_weeks >= wl + 1]
            for i, rec in enumerate(recs):
                if not rollout_eligible(rec, wl, horizon):
                    skipped.append(
                        (rec.id, f"needs > {horizon} windows of {wl} weeks")
                    )
                    continue
                rest = [r for r in donors if r.id != rec.id]
                if not rest:
                    skipped.append((rec.id, "no other eligible participants in group"))
                    continue
                X, y = [], []
                for j, donor in enumerate(rest):
                    rng = np.random.default_rng((config.seed, 401, g.index, i, j))
                    start = int(rng.integers(0, donor.n_weeks - wl))
                    window = donor.weeks[start : start + wl]
                    target = donor.weeks[start + wl]
                    X.append(mrsf(window, config.signature_level))
                    y.append(state_label(instrument.score_of(target), instrument))
                model = fit(
                    np.array(X), np.array(y, dtype=int), CLASSIFY, config.forest,
                    seed=(config.seed, 402, g.index, i), n_classes=3,
                )
                probs = rollout_states(rec, model, instrument,
                                       config.signature_level, wl, horizon)
                points.append(ProbabilityPoint(rec.id, g, probs))
        results.append(
            RolloutResult(instrument=instrument, points=tuple(points),
                          skipped=tuple(skipped))
        )
    return tuple(results)
