"""Train CENet on the binary toy where Z can only carry Y, and compare the
adversary's final cross-entropy with H(A|Y).

    python3 scripts/equilibrium_floor.py [--seed S] [--lam L]
"""
import argparse

import numpy as np

from fairgap import nn
from fairgap.bounds import DiscreteJoint, conditional_entropy, conditional_entropy_given_y
from fairgap.data import split
from fairgap.presets import equilibrium_toy
from fairgap.train import RunConfig, train_cenet


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--epochs", type=int, default=50)
    args = ap.parse_args()

    tr, te = split(equilibrium_toy(4000, seed=args.seed), 0.3, args.seed)
    cfg = RunConfig(
        algorithm="cenet", lam=args.lam, epochs=args.epochs, batch_size=64,
        feature_widths=(8,), adversary_widths=(8,), seed=args.seed,
    )
    model, logs = train_cenet(cfg, tr, te)
    z, _ = nn.forward(model.feature_map, tr.x)
    _, codes = np.unique(z.round(12), axis=0, return_inverse=True)
    joint = DiscreteJoint.from_samples(tr.a, codes.ravel(), tr.y.astype(int))

    for row in logs[:: max(1, len(logs) // 10)]:
        print(f"epoch {row.epoch:>3}  adversary BCE {row.adversary_loss:.5f}  train mse {row.train_mse:.4f}")
    print(f"H(A|Y)   = {conditional_entropy_given_y(joint):.5f} nats")
    print(f"H(A|Z,Y) = {conditional_entropy(joint):.5f} nats")
    print(f"final BCE = {logs[-1].adversary_loss:.5f} nats")


if __name__ == "__main__":
    main()
