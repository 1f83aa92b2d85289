"""Central finite-difference check of nn.loss_and_grad."""
import numpy as np

from rayclass.nn import MlpParams, MlpSpec, init_params, loss_and_grad


def random_config(rng):
    depth = int(rng.integers(0, 4))
    spec = MlpSpec(int(rng.integers(1, 9)), tuple(int(h) for h in rng.integers(1, 12, size=depth)),
                   int(rng.integers(2, 7)))
    params = init_params(spec, int(rng.integers(1 << 31)))
    params.flat += rng.normal(scale=0.1, size=params.flat.size)  # non-zero biases too
    B = int(rng.integers(1, 9))
    X = rng.random((B, spec.input_dim))
    y = rng.integers(0, spec.output_dim, size=B)
    return spec, params, X, y


def max_relative_error(params: MlpParams, X, y, h=1e-5, floor=1e-8):
    """max_i |g_i - fd_i| / max(|g_i|, |fd_i|, floor) over every parameter."""
    _, g = loss_and_grad(params, X, y)
    analytic = g.flat.copy()
    p = params.copy()
    fd = np.empty_like(analytic)
    for i in range(p.flat.size):
        old = p.flat[i]
        p.flat[i] = old + h
        lp, _ = loss_and_grad(p, X, y)
        p.flat[i] = old - h
        lm, _ = loss_and_grad(p, X, y)
        p.flat[i] = old
        fd[i] = (lp - lm) / (2 * h)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(fd)), floor)
    return float(np.max(np.abs(analytic - fd) / denom))
