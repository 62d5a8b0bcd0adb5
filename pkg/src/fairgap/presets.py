"""Shipped experiment fixtures: the mitigation synthetic, the discrete
equilibrium toy and the Adult label-count table."""
from __future__ import annotations

import numpy as np

from .data import Dataset, SyntheticSpec
from .train import Algorithm, RunConfig

# group x label counts of the Adult income data after preprocessing
ADULT_LABEL_COUNTS = {(0, 0): 20988, (0, 1): 9539, (1, 0): 13026, (1, 1): 1669}

MITIGATION_LAMBDAS = (0.0, 0.1, 1.0, 10.0)
MITIGATION_SEEDS = tuple(range(10))


def mitigation_spec(seed: int = 0) -> SyntheticSpec:
    """Group 1 observes its features through unit-variance noise; group 0 does not.

    The plain regressor fits group 0 far better than group 1, and the gap can
    only shrink by making the representation less group-specific.
    """
    return SyntheticSpec(
        n_per_group=(4000, 4000),
        feature_dim=8,
        label_mean_shift=0.0,
        label_scale=(1.0, 1.0),
        conditional_noise_scale=(0.2, 0.2),
        feature_noise_scale=(0.0, 1.0),
        seed=seed,
    )


def mitigation_config(lam: float = 0.0, seed: int = 0) -> RunConfig:
    return RunConfig(
        algorithm=Algorithm.WASSERSTEIN,
        lam=lam,
        epochs=60,
        batch_size=256,
        optimizer="adadelta",
        learning_rate=0.1,
        feature_widths=(30,),
        adversary_widths=(30,),
        clip_c=0.4,
        seed=seed,
    )


def adult_label_fixture() -> tuple[np.ndarray, np.ndarray]:
    """(y, a) arrays reproducing the Adult group x label counts, sorted by (a, y)."""
    ys, as_ = [], []
    for (a, y), n in sorted(ADULT_LABEL_COUNTS.items()):
        ys.append(np.full(n, float(y)))
        as_.append(np.full(n, a))
    return np.concatenate(ys), np.concatenate(as_)


def equilibrium_toy(n: int = 4000, seed: int = 0, p_a1_given_y=(0.2, 0.7)) -> Dataset:
    """Binary A, Y and a single binary feature X = Y, so any Z = g(X) depends on Y only.

    ``P(A=1 | Y=y) = p_a1_given_y[y]``; Y is a fair coin.
    """
    rng = np.random.default_rng(seed)
    y = rng.integers(0, 2, size=n)
    a = (rng.random(n) < np.asarray(p_a1_given_y)[y]).astype(np.int64)
    return Dataset(y[:, None].astype(np.float64), y.astype(np.float64), a, ["x"])
