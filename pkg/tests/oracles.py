"""Independent reference computations used by the tests.

None of these share code paths with the package implementations they check.
"""
import itertools
import math

import numpy as np
from scipy.optimize import linear_sum_assignment

from fairgap import nn


def random_mlp(rng, max_layers=3, max_units=20):
    n_layers = int(rng.integers(1, max_layers + 1))
    widths = [int(rng.integers(1, max_units + 1)) for _ in range(n_layers + 1)]
    kinds = list(nn.Activation)
    acts = [kinds[int(rng.integers(len(kinds)))] for _ in range(n_layers)]
    layers = nn.build_layers(widths, acts, rng)
    for layer in layers:
        layer.bias[:] = rng.normal(0, 0.5, size=layer.bias.shape)
    return layers


def _away_from_kinks(layers, x, margin=1e-3):
    _, cache = nn.forward(layers, x)
    return all(
        layer.activation is not nn.Activation.RELU or np.abs(pre).min() > margin
        for layer, pre in zip(layers, cache.pre)
    )


def kink_free_batch(layers, rng, batch=4, tries=1000):
    """A random input batch whose ReLU pre-activations all sit at least 1e-3
    from zero; central differences are meaningless across a kink."""
    for _ in range(tries):
        x = rng.normal(size=(batch, layers[0].in_width))
        if _away_from_kinks(layers, x):
            return x
    raise RuntimeError("could not draw a kink-free batch")


def fd_gradient_errors(layers, x, weights, step=1e-5, floor=1e-6):
    """Relative errors of backward() against central differences of
    L = sum(weights * forward(x)) for every weight and bias entry."""

    def loss():
        out, _ = nn.forward(layers, x)
        return float(np.sum(out * weights))

    out, cache = nn.forward(layers, x)
    grads, _ = nn.backward(layers, cache, weights)
    errs = []
    for layer, (dw, db) in zip(layers, grads):
        for param, analytic in ((layer.weights, dw), (layer.bias, db)):
            for idx in np.ndindex(param.shape):
                old = param[idx]
                param[idx] = old + step
                up = loss()
                param[idx] = old - step
                down = loss()
                param[idx] = old
                numeric = (up - down) / (2 * step)
                a = analytic[idx]
                errs.append(abs(a - numeric) / max(abs(a), abs(numeric), floor))
    return np.array(errs)


def w1_assignment(p, q):
    """W1 between uniform empirical measures via an assignment problem.

    Each sample is replicated so both sides have lcm(n, m) atoms of equal
    mass; optimal transport between equal-size uniform measures is attained
    by a permutation (Birkhoff), which linear_sum_assignment finds exactly.
    """
    p, q = np.asarray(p, float), np.asarray(q, float)
    n, m = p.size, q.size
    L = n * m // math.gcd(n, m)
    P = np.repeat(p, L // n)
    Q = np.repeat(q, L // m)
    cost = np.abs(P[:, None] - Q[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].sum() / L)


def w1_permutations(p, q):
    """Equal-size W1 by enumerating every matching."""
    p, q = list(p), list(q)
    assert len(p) == len(q)
    return min(sum(abs(a - b) for a, b in zip(p, perm)) for perm in itertools.permutations(q)) / len(p)


def entropy_by_summation(table):
    """H(A|Y), H(A|Z,Y) of p[a, z, y] with explicit loops."""
    A, Z, Y = table.shape
    h_zy = 0.0
    h_y = 0.0
    for y in range(Y):
        py = table[:, :, y].sum()
        for a in range(A):
            pay = table[a, :, y].sum()
            if pay > 0:
                h_y -= pay * math.log(pay / py)
        for z in range(Z):
            pzy = table[:, z, y].sum()
            for a in range(A):
                if table[a, z, y] > 0:
                    h_zy -= table[a, z, y] * math.log(table[a, z, y] / pzy)
    return h_y, h_zy


def random_grouped_sample(rng, max_n=40):
    """A random MLP applied to a random two-group dataset: (pred, y, a).

    Labels come from a mix of shapes (continuous, shifted, discrete) so both
    bounds see heterogeneous label distributions.
    """
    layers = random_mlp(rng)
    while layers[-1].out_width != 1:
        layers = random_mlp(rng)
    n = int(rng.integers(4, max_n + 1))
    a = rng.integers(0, 2, size=n)
    a[:2] = (0, 1)
    x = rng.normal(size=(n, layers[0].in_width))
    kind = int(rng.integers(3))
    if kind == 0:
        y = rng.normal(size=n)
    elif kind == 1:
        y = rng.normal(size=n) * rng.uniform(0.2, 3) + a * rng.uniform(-3, 3)
    else:
        y = rng.integers(-2, 3, size=n).astype(float)
    y[1] = y[0]  # one label value shared across groups keeps every bound defined
    pred = nn.forward(layers, x)[0][:, 0]
    return pred, y, a


def random_binary_fixture(rng, max_n=40):
    """Binary labels with both label values present in each group, arbitrary predictions."""
    n = int(rng.integers(8, max_n + 1))
    a = np.zeros(n, dtype=np.int64)
    a[n // 2:] = 1
    y = (rng.random(n) < rng.uniform(0.1, 0.9, size=2)[a]).astype(float)
    y[[0, 1, n // 2, n // 2 + 1]] = (0, 1, 0, 1)
    style = int(rng.integers(3))
    if style == 0:
        pred = rng.uniform(0, 1, size=n)
    elif style == 1:
        pred = y + rng.normal(0, 0.3, size=n)
    else:
        pred = rng.normal(0, 2, size=n)
    return pred, y, a
