"""Accuracy-disparity bounds, discrete information measures and the
(Err0, Err1) feasible region they carve out."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import DomainError
from .metrics import GroupedPredictions

DEFAULT_Y_BINS = 10
PROB_TOL = 1e-12


@dataclass
class BoundContext:
    m_bound: float
    alpha: float
    w1_labels: float
    w1_preds: float
    tv_labels: float
    cond_discrepancy: float

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise DomainError(f"alpha={self.alpha} outside [0, 1]")
        for name in ("m_bound", "w1_labels", "w1_preds", "tv_labels", "cond_discrepancy"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def lower_bound_joint(w1_labels: float, w1_preds: float) -> float:
    """Floor on Err0 + Err1 from the label and prediction W1 distances."""
    gap = max(w1_labels - w1_preds, 0.0)
    return 0.5 * gap * gap


def lower_bound_weighted(alpha: float, w1_labels: float, w1_preds: float) -> float:
    """Floor on the population error when group 0 has mass ``alpha``."""
    if not 0.0 <= alpha <= 1.0:
        raise DomainError(f"alpha={alpha} outside [0, 1]")
    return min(alpha, 1.0 - alpha) * lower_bound_joint(w1_labels, w1_preds)


def upper_bound_gap(ctx: BoundContext) -> float:
    m = ctx.m_bound
    return 8.0 * m * m * ctx.tv_labels + 3.0 * m * ctx.cond_discrepancy


def _label_bins(y: np.ndarray, y_bins: int) -> np.ndarray:
    values = np.unique(y)
    if values.size <= y_bins:
        return np.searchsorted(values, y)
    edges = np.unique(np.quantile(y, np.linspace(0.0, 1.0, y_bins + 1)))
    # interior edges only: digitize then puts the max into the last bin
    return np.digitize(y, edges[1:-1], right=True)


def conditional_discrepancy(gp: GroupedPredictions, y_bins: int = DEFAULT_Y_BINS) -> float:
    """Estimate min_a E_{D_a}[ |E[Yhat | y, A=0] - E[Yhat | y, A=1]| ].

    Labels are grouped per distinct value when there are at most ``y_bins``
    of them, else into pooled quantile bins. Bins missing either group are
    dropped and the remaining group weights renormalised.
    """
    gp.select(0)
    gp.select(1)
    bins = _label_bins(gp.target, y_bins)
    nb = int(bins.max()) + 1
    g1 = gp.group == 1
    cnt = np.stack([np.bincount(bins[~g1], minlength=nb), np.bincount(bins[g1], minlength=nb)])
    tot = np.stack(
        [
            np.bincount(bins[~g1], weights=gp.pred[~g1], minlength=nb),
            np.bincount(bins[g1], weights=gp.pred[g1], minlength=nb),
        ]
    )
    shared = (cnt[0] > 0) & (cnt[1] > 0)
    if not shared.any():
        raise DomainError("no label bin contains both groups")
    means = tot[:, shared] / cnt[:, shared]
    diff = np.abs(means[0] - means[1])
    w = cnt[:, shared] / cnt[:, shared].sum(axis=1, keepdims=True)
    return float(min(w[0] @ diff, w[1] @ diff))


def constant_predictor_check(y, a, tol: float) -> bool:
    """True iff both groups share label mean and second moment within ``tol``."""
    y = np.asarray(y, dtype=np.float64)
    a = np.asarray(a)
    y0, y1 = y[a == 0], y[a == 1]
    if y0.size == 0 or y1.size == 0:
        raise DomainError("both groups must be non-empty")
    return bool(
        abs(y0.mean() - y1.mean()) <= tol and abs(np.mean(y0**2) - np.mean(y1**2)) <= tol
    )


@dataclass
class DiscreteJoint:
    """Probability table ``p[a, z, y]``."""

    table: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.table, dtype=np.float64)
        if t.ndim != 3:
            raise DomainError("joint table must be indexed [a, z, y]")
        if (t < 0).any() or not np.isfinite(t).all():
            raise DomainError("probabilities must be finite and non-negative")
        if abs(t.sum() - 1.0) > PROB_TOL:
            raise DomainError(f"probabilities sum to {t.sum()!r}, not 1")
        self.table = t

    @classmethod
    def from_samples(cls, a, z, y) -> "DiscreteJoint":
        """Empirical table from integer-coded samples."""
        a, z, y = (np.asarray(v, dtype=np.int64) for v in (a, z, y))
        shape = (a.max() + 1, z.max() + 1, y.max() + 1)
        counts = np.zeros(shape)
        np.add.at(counts, (a, z, y), 1.0)
        return cls(counts / counts.sum())


def _cond_entropy(p_joint: np.ndarray, p_cond_on: np.ndarray) -> float:
    # -sum p(a, c) ln p(a | c), skipping cells with zero mass
    mask = p_joint > 0
    ratio = p_joint[mask] / np.broadcast_to(p_cond_on, p_joint.shape)[mask]
    return float(-np.sum(p_joint[mask] * np.log(ratio)))


def conditional_entropy(joint: DiscreteJoint) -> float:
    """H(A | Z, Y) in nats."""
    p = joint.table
    return _cond_entropy(p, p.sum(axis=0, keepdims=True))


def conditional_entropy_given_y(joint: DiscreteJoint) -> float:
    """H(A | Y) in nats."""
    p_ay = joint.table.sum(axis=1)
    return _cond_entropy(p_ay, p_ay.sum(axis=0, keepdims=True))


def conditional_mutual_information(joint: DiscreteJoint) -> float:
    """I(A; Z | Y) = H(A | Y) - H(A | Z, Y), clipped at zero for round-off."""
    return max(conditional_entropy_given_y(joint) - conditional_entropy(joint), 0.0)


@dataclass
class FeasibleRegion:
    a_gap: float
    b_joint: float
    vertices: list

    def bottom_vertices(self) -> list:
        a, b = self.a_gap, self.b_joint
        if a > b:
            return []
        return [((b + a) / 2, (b - a) / 2), ((b - a) / 2, (b + a) / 2)]

    def to_dict(self) -> dict:
        return {
            "a_gap": self.a_gap,
            "b_joint": self.b_joint,
            "vertices": [list(v) for v in self.vertices],
        }


def _clip_polygon(poly: list, nx: float, ny: float, c: float) -> list:
    """Sutherland-Hodgman clip of ``poly`` to the half-plane nx*x + ny*y >= c."""
    out = []
    for i, cur in enumerate(poly):
        prev = poly[i - 1]
        fc = nx * cur[0] + ny * cur[1] - c
        fp = nx * prev[0] + ny * prev[1] - c
        if (fc >= 0) != (fp >= 0):
            t = fp / (fp - fc)
            out.append((prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1])))
        if fc >= 0:
            out.append(cur)
    return out


def feasible_region(a_gap: float, b_joint: float, err_cap: float) -> FeasibleRegion:
    """Counter-clockwise vertices of {|e0 - e1| <= A, e0 + e1 >= B} inside [0, cap]^2."""
    if a_gap < 0 or b_joint < 0:
        raise DomainError("a_gap and b_joint must be non-negative")
    if not err_cap > max(a_gap, b_joint):
        raise DomainError("err_cap must exceed both a_gap and b_joint")
    poly = [(0.0, 0.0), (err_cap, 0.0), (err_cap, err_cap), (0.0, err_cap)]
    for nx, ny, c in ((1.0, 1.0, b_joint), (-1.0, 1.0, -a_gap), (1.0, -1.0, -a_gap)):
        poly = _clip_polygon(poly, nx, ny, c)
    verts = []
    for v in poly:
        v = (float(v[0]), float(v[1]))
        if not verts or max(abs(v[0] - verts[-1][0]), abs(v[1] - verts[-1][1])) > 1e-12:
            verts.append(v)
    while len(verts) > 1 and max(abs(verts[0][0] - verts[-1][0]), abs(verts[0][1] - verts[-1][1])) <= 1e-12:
        verts.pop()
    if not verts:
        raise DomainError("feasible region is empty")
    return FeasibleRegion(a_gap, b_joint, verts)
