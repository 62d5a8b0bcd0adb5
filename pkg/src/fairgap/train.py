"""Plain, CENet and WassersteinNet training loops, evaluation and lambda sweeps.

All three algorithms share one step: the feature map g feeds the regression
head h (MSE) and, for the adversarial variants, the adversary f reading
``[Z, y_scaled]``. The adversary descends its own loss; g receives the head
gradient plus the adversary gradient passed through a gradient reversal
layer with coefficient lambda. Updates are simultaneous.
"""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from . import nn
from .bounds import (
    DEFAULT_Y_BINS,
    BoundContext,
    conditional_discrepancy,
    lower_bound_joint,
    lower_bound_weighted,
    upper_bound_gap,
)
from .data import Dataset
from .errors import ConfigError, DomainError, TrainingDiverged
from .metrics import DEFAULT_TV_BINS, GroupedPredictions, MetricsReport, build_report, group_error
from .nn import Activation, AdversaryKind, OptimizerKind, OptimizerState

log = logging.getLogger(__name__)


class Algorithm(str, Enum):
    PLAIN = "plain"
    CENET = "cenet"
    WASSERSTEIN = "wasserstein"


_ADVERSARY = {
    Algorithm.PLAIN: AdversaryKind.NONE,
    Algorithm.CENET: AdversaryKind.CROSS_ENTROPY,
    Algorithm.WASSERSTEIN: AdversaryKind.WASSERSTEIN_CRITIC,
}


@dataclass
class RunConfig:
    algorithm: Algorithm = Algorithm.PLAIN
    lam: float = 1.0
    epochs: int = 50
    batch_size: int = 512
    optimizer: OptimizerKind = OptimizerKind.ADADELTA
    learning_rate: float = 1.0
    adadelta_rho: float = 0.9
    adadelta_eps: float = 1e-6
    # hidden widths; the last feature width is the representation size
    feature_widths: tuple = (60,)
    head_widths: tuple = ()
    head_activation: Activation = Activation.IDENTITY
    adversary_widths: tuple = (60,)
    clip_c: float = 0.05
    seed: int = 0
    y_bins: int = DEFAULT_Y_BINS

    def __post_init__(self):
        try:
            self.algorithm = Algorithm(self.algorithm)
            self.optimizer = OptimizerKind(self.optimizer)
            self.head_activation = Activation(self.head_activation)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        self.feature_widths = tuple(int(w) for w in self.feature_widths)
        self.head_widths = tuple(int(w) for w in self.head_widths)
        self.adversary_widths = tuple(int(w) for w in self.adversary_widths)
        checks = [
            (math.isfinite(self.lam) and self.lam >= 0, "lam must be finite and >= 0"),
            (self.epochs >= 0, "epochs must be >= 0"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (self.learning_rate > 0, "learning_rate must be positive"),
            (0 < self.adadelta_rho < 1, "adadelta_rho must lie in (0, 1)"),
            (self.adadelta_eps > 0, "adadelta_eps must be positive"),
            (len(self.feature_widths) >= 1, "feature_widths needs at least one layer"),
            (all(w > 0 for w in self.feature_widths + self.head_widths + self.adversary_widths),
             "layer widths must be positive"),
            (self.clip_c > 0, "clip_c must be positive"),
            (self.y_bins >= 1, "y_bins must be >= 1"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown run fields: {unknown}")
        try:
            return cls(**d)
        except TypeError as e:
            raise ConfigError(str(e)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("algorithm", "optimizer", "head_activation"):
            d[k] = d[k].value
        for k in ("feature_widths", "head_widths", "adversary_widths"):
            d[k] = list(d[k])
        return d

    def optimizer_template(self) -> OptimizerState:
        return OptimizerState(self.optimizer, self.learning_rate, self.adadelta_rho, self.adadelta_eps)


@dataclass
class EpochLog:
    epoch: int
    train_mse: float
    test_mse: float
    err_gap: float
    adversary_loss: float


EPOCH_LOG_COLUMNS = ("epoch", "train_mse", "test_mse", "err_gap", "adversary_loss")


def init_model(config: RunConfig, in_dim: int, y_train: np.ndarray) -> nn.MlpModel:
    g_seed, h_seed, f_seed, _ = np.random.SeedSequence(config.seed).spawn(4)
    fw = (in_dim,) + config.feature_widths
    g = nn.build_layers(fw, [Activation.RELU] * (len(fw) - 1), np.random.default_rng(g_seed))
    hw = (fw[-1],) + config.head_widths + (1,)
    h_acts = [Activation.RELU] * (len(hw) - 2) + [config.head_activation]
    h = nn.build_layers(hw, h_acts, np.random.default_rng(h_seed))
    kind = _ADVERSARY[config.algorithm]
    f = []
    if kind is not AdversaryKind.NONE:
        aw = (fw[-1] + 1,) + config.adversary_widths + (1,)
        last = Activation.SIGMOID if kind is AdversaryKind.CROSS_ENTROPY else Activation.IDENTITY
        f = nn.build_layers(aw, [Activation.RELU] * (len(aw) - 2) + [last], np.random.default_rng(f_seed))
        if kind is AdversaryKind.WASSERSTEIN_CRITIC:
            nn.clip_weights(f, config.clip_c)
    y_train = np.asarray(y_train, dtype=np.float64)
    return nn.MlpModel(g, h, f, kind, float(y_train.min()), float(y_train.max()))


def _params(layers) -> list:
    return [arr for layer in layers for arr in (layer.weights, layer.bias)]


def _flat_grads(grads) -> list:
    return [arr for pair in grads for arr in pair]


def adversary_loss(model: nn.MlpModel, x: np.ndarray, y: np.ndarray, a: np.ndarray) -> float:
    """The adversary's objective on a full sample: BCE (nats) or the critic gap."""
    if model.adversary_kind is AdversaryKind.NONE:
        return 0.0
    z, _ = nn.forward(model.feature_map, x)
    out, _ = nn.forward(model.adversary, np.column_stack([z, model.scale_y(y)]))
    if model.adversary_kind is AdversaryKind.CROSS_ENTROPY:
        return nn.bce_loss(out[:, 0], a)[0]
    res = nn.wasserstein_penalty(out[:, 0], a)
    return 0.0 if res is None else res[0]


def train_step(model: nn.MlpModel, config: RunConfig, opt_gh, opt_f, xb, yb, ab) -> None:
    z, cache_g = nn.forward(model.feature_map, xb)
    yhat, cache_h = nn.forward(model.head, z)
    _, dyhat = nn.mse_loss(yhat[:, 0], yb)
    grads_h, dz = nn.backward(model.head, cache_h, dyhat[:, None])

    grads_f = None
    if model.adversary_kind is not AdversaryKind.NONE:
        out, cache_f = nn.forward(model.adversary, np.column_stack([z, model.scale_y(yb)]))
        if model.adversary_kind is AdversaryKind.CROSS_ENTROPY:
            _, dout = nn.bce_loss(out[:, 0], ab)
        else:
            res = nn.wasserstein_penalty(out[:, 0], ab)
            # the critic ascends the gap, i.e. descends its negative
            dout = None if res is None else -res[1]
        if dout is not None:
            grads_f, d_in = nn.backward(model.adversary, cache_f, dout[:, None])
            dz = dz + nn.grl_backward(d_in[:, : model.feature_width], config.lam)

    grads_g, _ = nn.backward(model.feature_map, cache_g, dz)
    nn.optimizer_step(
        opt_gh,
        _params(model.feature_map) + _params(model.head),
        _flat_grads(grads_g) + _flat_grads(grads_h),
    )
    if grads_f is not None:
        nn.optimizer_step(opt_f, _params(model.adversary), _flat_grads(grads_f))
        if model.adversary_kind is AdversaryKind.WASSERSTEIN_CRITIC:
            nn.clip_weights(model.adversary, config.clip_c)


def _epoch_log(model, epoch, train: Dataset, test: Dataset) -> EpochLog:
    pred_tr = model.predict(train.x)
    train_mse = float(np.mean((pred_tr - train.y) ** 2))
    pred_te = model.predict(test.x) if test.n else np.empty(0)
    test_mse = float(np.mean((pred_te - test.y) ** 2)) if test.n else math.nan
    try:
        gp = GroupedPredictions(pred_te, test.y, test.a)
        gap = abs(group_error(gp, 0) - group_error(gp, 1))
    except DomainError:
        gap = math.nan
    row = EpochLog(epoch, train_mse, test_mse, gap, adversary_loss(model, train.x, train.y, train.a))
    if not (math.isfinite(row.train_mse) and math.isfinite(row.adversary_loss)):
        raise TrainingDiverged(f"non-finite loss at epoch {epoch}: {row}")
    return row


def _train(config: RunConfig, train: Dataset, test: Dataset, expected: Algorithm):
    if config.algorithm is not expected:
        raise ConfigError(f"config.algorithm is {config.algorithm.value}, expected {expected.value}")
    if train.n == 0:
        raise DomainError("training set is empty")
    model = init_model(config, train.x.shape[1], train.y)
    batch_rng = np.random.default_rng(np.random.SeedSequence(config.seed).spawn(4)[3])
    opt_gh = config.optimizer_template()
    opt_f = config.optimizer_template()
    logs = []
    for epoch in range(1, config.epochs + 1):
        order = batch_rng.permutation(train.n)
        for start in range(0, train.n, config.batch_size):
            idx = order[start : start + config.batch_size]
            train_step(model, config, opt_gh, opt_f, train.x[idx], train.y[idx], train.a[idx])
        logs.append(_epoch_log(model, epoch, train, test))
    return model, logs


def train_plain(config: RunConfig, train: Dataset, test: Dataset):
    return _train(config, train, test, Algorithm.PLAIN)


def train_cenet(config: RunConfig, train: Dataset, test: Dataset):
    return _train(config, train, test, Algorithm.CENET)


def train_wasserstein(config: RunConfig, train: Dataset, test: Dataset):
    return _train(config, train, test, Algorithm.WASSERSTEIN)


def train_model(config: RunConfig, train: Dataset, test: Dataset):
    return _train(config, train, test, config.algorithm)


@dataclass
class Evaluation:
    report: MetricsReport
    context: BoundContext
    lower_bound: float
    weighted_lower_bound: float
    upper_bound: float

    def to_dict(self) -> dict:
        return {
            "report": self.report.to_dict(),
            "context": self.context.to_dict(),
            "lower_bound": self.lower_bound,
            "weighted_lower_bound": self.weighted_lower_bound,
            "upper_bound": self.upper_bound,
        }


def evaluate_predictions(
    pred, target, group, y_bins: int = DEFAULT_Y_BINS, tv_bins: int = DEFAULT_TV_BINS,
    check: bool = False,
) -> Evaluation:
    gp = GroupedPredictions(pred, target, group)
    report = build_report(gp, tv_bins)
    ctx = BoundContext(
        m_bound=float(max(np.abs(gp.target).max(), np.abs(gp.pred).max())),
        alpha=float(np.mean(gp.group == 0)),
        w1_labels=report.w1_labels,
        w1_preds=report.w1_preds,
        tv_labels=report.tv_labels,
        cond_discrepancy=conditional_discrepancy(gp, y_bins),
    )
    ev = Evaluation(
        report,
        ctx,
        lower_bound_joint(ctx.w1_labels, ctx.w1_preds),
        lower_bound_weighted(ctx.alpha, ctx.w1_labels, ctx.w1_preds),
        upper_bound_gap(ctx),
    )
    if check:
        from .metrics import wasserstein1d_exact

        # explicit raises so the audit survives python -O
        if report.err0 + report.err1 < ev.lower_bound - 1e-9:
            raise AssertionError(f"joint error below its lower bound: {ev}")
        for a, err in ((0, report.err0), (1, report.err1)):
            p, y = gp.select(a)
            if wasserstein1d_exact(y, p) > math.sqrt(err) + 1e-9:
                raise AssertionError(f"group {a}: W1(labels, preds) exceeds sqrt(err): {ev}")
    return ev


def evaluate(model: nn.MlpModel, dataset: Dataset, y_bins: int = DEFAULT_Y_BINS, check: bool = False) -> Evaluation:
    return evaluate_predictions(model.predict(dataset.x), dataset.y, dataset.a, y_bins, check=check)


SWEEP_COLUMNS = (
    "algorithm", "lambda", "seed", "r2", "err0", "err1", "err_gap",
    "w1_labels", "w1_preds", "tv_labels", "lower_bound", "upper_bound", "status",
)
AGG_METRICS = ("r2", "err0", "err1", "err_gap", "lower_bound", "upper_bound")


def _sweep_cell(args):
    config, train, test = args
    row = {"algorithm": config.algorithm.value, "lambda": config.lam, "seed": config.seed}
    try:
        model, _ = train_model(config, train, test)
        ev = evaluate(model, test, config.y_bins)
    except Exception as e:  # a failed cell is reported, the sweep goes on
        log.warning("sweep cell lambda=%s seed=%s failed: %s", config.lam, config.seed, e)
        row.update({k: math.nan for k in SWEEP_COLUMNS[3:-1]})
        row["status"] = f"error: {type(e).__name__}: {e}"
        return row
    r = ev.report
    row.update(
        r2=r.r2, err0=r.err0, err1=r.err1, err_gap=r.err_gap, w1_labels=r.w1_labels,
        w1_preds=r.w1_preds, tv_labels=r.tv_labels, lower_bound=ev.lower_bound,
        upper_bound=ev.upper_bound, status="ok",
    )
    return row


@dataclass
class SweepResult:
    rows: list
    aggregates: list = field(default_factory=list)


def aggregate_rows(rows: Sequence[dict]) -> list:
    """Per-lambda mean and sample std over successful seeds."""
    out = []
    for lam in dict.fromkeys(r["lambda"] for r in rows):
        cells = [r for r in rows if r["lambda"] == lam and r["status"] == "ok"]
        agg = {"algorithm": rows[0]["algorithm"], "lambda": lam, "n_seeds": len(cells)}
        for k in AGG_METRICS:
            vals = np.array([c[k] for c in cells], dtype=np.float64)
            agg[f"{k}_mean"] = float(vals.mean()) if vals.size else math.nan
            agg[f"{k}_std"] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        out.append(agg)
    return out


def lambda_sweep(
    base_config: RunConfig, lambdas: Sequence[float], seeds: Sequence[int],
    train: Dataset, test: Dataset, jobs: int = 1,
) -> SweepResult:
    if not lambdas or not seeds:
        raise ConfigError("lambdas and seeds must be non-empty")
    cells = [(replace(base_config, lam=float(lam), seed=int(s)), train, test) for lam in lambdas for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            rows = list(ex.map(_sweep_cell, cells))
    else:
        rows = [_sweep_cell(c) for c in cells]
    return SweepResult(rows, aggregate_rows(rows))


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows_csv(rows: Sequence[dict], columns: Sequence[str], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def write_epoch_log(logs: Sequence[EpochLog], path) -> None:
    write_rows_csv([asdict(l) for l in logs], EPOCH_LOG_COLUMNS, path)


def write_sweep_csv(result: SweepResult, path, aggregate_path=None) -> None:
    write_rows_csv(result.rows, SWEEP_COLUMNS, path)
    if aggregate_path is not None and result.aggregates:
        write_rows_csv(result.aggregates, list(result.aggregates[0]), aggregate_path)
