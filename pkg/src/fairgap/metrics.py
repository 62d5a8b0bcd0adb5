"""Group-conditional error statistics and one-dimensional distances."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, ShapeError

DEFAULT_TV_BINS = 50


@dataclass(frozen=True)
class GroupedPredictions:
    pred: np.ndarray
    target: np.ndarray
    group: np.ndarray

    def __post_init__(self):
        pred = np.asarray(self.pred, dtype=np.float64).ravel()
        target = np.asarray(self.target, dtype=np.float64).ravel()
        group = np.asarray(self.group).ravel()
        if not (pred.shape == target.shape == group.shape):
            raise ShapeError("pred, target and group must have equal lengths")
        if not np.isin(group, (0, 1)).all():
            raise DomainError("group labels must be 0 or 1")
        object.__setattr__(self, "pred", pred)
        object.__setattr__(self, "target", target)
        object.__setattr__(self, "group", group.astype(np.int64))

    @property
    def n(self) -> int:
        return self.pred.size

    def select(self, a: int) -> tuple[np.ndarray, np.ndarray]:
        """(pred, target) of group ``a``; raises on an empty group."""
        mask = self.group == a
        if not mask.any():
            raise DomainError(f"group {a} is empty")
        return self.pred[mask], self.target[mask]


@dataclass
class MetricsReport:
    err0: float
    err1: float
    err_gap: float
    r2: float
    w1_labels: float
    w1_preds: float
    tv_labels: float
    accuracy: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)


def group_error(gp: GroupedPredictions, a: int) -> float:
    pred, target = gp.select(a)
    return float(np.mean((pred - target) ** 2))


def error_gap(gp: GroupedPredictions) -> float:
    return abs(group_error(gp, 0) - group_error(gp, 1))


def r2_score(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError("pred and target differ in shape")
    if target.size < 2:
        raise DomainError("r2 needs at least two samples")
    ss_tot = np.sum((target - target.mean()) ** 2)
    if ss_tot == 0:
        raise DomainError("r2 undefined for a constant target")
    return float(1.0 - np.sum((target - pred) ** 2) / ss_tot)


def binary_accuracy(pred, target) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target)
    if pred.size == 0:
        raise DomainError("accuracy of an empty sample")
    return float(np.mean((pred >= 0.5).astype(np.int64) == target))


def _as_samples(s) -> np.ndarray:
    s = np.asarray(s, dtype=np.float64).ravel()
    if s.size == 0:
        raise DomainError("empty sample")
    return s


def wasserstein1d_exact(samples_p, samples_q) -> float:
    """W1 between two empirical measures as the integral of |F_p^-1 - F_q^-1|.

    Both quantile functions are step functions on (0, 1] with jumps at i/n
    and j/m; between consecutive merged breakpoints they are constant, so the
    integral is a finite sum.
    """
    p = np.sort(_as_samples(samples_p))
    q = np.sort(_as_samples(samples_q))
    n, m = p.size, q.size
    cum_p = np.arange(1, n + 1) / n
    cum_q = np.arange(1, m + 1) / m
    # i/n == j/m as rationals gives bit-equal doubles, so unique merges them
    levels = np.unique(np.concatenate(([0.0], cum_p, cum_q)))
    widths = np.diff(levels)
    mids = 0.5 * (levels[:-1] + levels[1:])
    ip = np.minimum(np.searchsorted(cum_p, mids), n - 1)
    iq = np.minimum(np.searchsorted(cum_q, mids), m - 1)
    return float(np.sum(widths * np.abs(p[ip] - q[iq])))


def tv_histogram(samples_p, samples_q, bins: int = DEFAULT_TV_BINS) -> float:
    """Total variation between two samples via a shared histogram.

    Samples with at most ``bins`` distinct pooled values are compared value
    by value (exact); otherwise ``bins`` equal-width bins span the pooled range.
    """
    if bins < 1:
        raise DomainError("bins must be >= 1")
    p = _as_samples(samples_p)
    q = _as_samples(samples_q)
    values = np.unique(np.concatenate((p, q)))
    if values.size <= bins:
        hp = np.searchsorted(values, p)
        hq = np.searchsorted(values, q)
        cp = np.bincount(hp, minlength=values.size) / p.size
        cq = np.bincount(hq, minlength=values.size) / q.size
    else:
        edges = np.linspace(values[0], values[-1], bins + 1)
        cp = np.histogram(p, bins=edges)[0] / p.size
        cq = np.histogram(q, bins=edges)[0] / q.size
    return float(min(1.0, 0.5 * np.abs(cp - cq).sum()))


def build_report(gp: GroupedPredictions, tv_bins: int = DEFAULT_TV_BINS) -> MetricsReport:
    _, y0 = gp.select(0)
    _, y1 = gp.select(1)
    p0, _ = gp.select(0)
    p1, _ = gp.select(1)
    e0, e1 = group_error(gp, 0), group_error(gp, 1)
    binary = np.isin(gp.target, (0.0, 1.0)).all()
    return MetricsReport(
        err0=e0,
        err1=e1,
        err_gap=abs(e0 - e1),
        r2=r2_score(gp.pred, gp.target),
        w1_labels=wasserstein1d_exact(y0, y1),
        w1_preds=wasserstein1d_exact(p0, p1),
        tv_labels=tv_histogram(y0, y1, tv_bins),
        accuracy=binary_accuracy(gp.pred, gp.target) if binary else None,
    )
