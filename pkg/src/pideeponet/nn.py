"""Multilayer perceptrons with GELU, hand-written reverse mode, Adam and MSE.

Arrays are float64 numpy arrays. Layer ``k`` maps ``x @ W[k] + b[k]`` with
``W[k]`` of shape ``(in, out)``; hidden layers apply GELU, the last layer is
affine only.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import NonFiniteError, ShapeError


def gelu(x):
    """Exact-erf GELU ``x * Phi(x)``; scalar in, scalar out (arrays also accepted)."""
    a, _ = kernels.gelu_forward(np.asarray(x, dtype=np.float64))
    return a if np.ndim(x) else float(a.reshape(()))


def gelu_grad(x):
    _, d = kernels.gelu_forward(np.asarray(x, dtype=np.float64))
    return d if np.ndim(x) else float(d.reshape(()))


@dataclass
class MlpParams:
    weights: list
    biases: list
    hidden_activation: str = "gelu"

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("need one bias vector per weight matrix")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ShapeError(f"layer {k}: weight {w.shape} and bias {b.shape} disagree")
            if k and self.weights[k - 1].shape[1] != w.shape[0]:
                raise ShapeError(
                    f"layer {k}: in-dim {w.shape[0]} does not chain with "
                    f"out-dim {self.weights[k - 1].shape[1]} of layer {k - 1}"
                )

    @property
    def in_dim(self):
        return self.weights[0].shape[0]

    @property
    def out_dim(self):
        return self.weights[-1].shape[1]

    @property
    def dims(self):
        return [self.in_dim] + [w.shape[1] for w in self.weights]

    @property
    def size(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def arrays(self):
        """Parameter arrays in storage order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def flat(self):
        return np.concatenate([a.ravel() for a in self.arrays()])

    def set_flat(self, vec):
        if vec.shape != (self.size,):
            raise ShapeError(f"flat vector has {vec.shape}, expected ({self.size},)")
        pos = 0
        for a in self.arrays():
            a[...] = vec[pos:pos + a.size].reshape(a.shape)
            pos += a.size

    def copy(self):
        return MlpParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.hidden_activation,
        )


INIT_SCHEMES = ("glorot", "fan-in")


def init_mlp(dims, rng, scheme="glorot"):
    """Random parameters for layer widths ``dims``.

    ``glorot``: Glorot-uniform weights, zero biases.
    ``fan-in``: weights and biases uniform in +-1/sqrt(fan_in). Nonzero biases
    spread the first-layer kinks across the input box instead of pinning
    them all to the origin.
    """
    if scheme not in INIT_SCHEMES:
        raise ValueError(f"unknown init scheme {scheme!r}; choose from {INIT_SCHEMES}")
    weights, biases = [], []
    for n_in, n_out in zip(dims[:-1], dims[1:]):
        if scheme == "glorot":
            limit = np.sqrt(6.0 / (n_in + n_out))
            weights.append(rng.uniform(-limit, limit, size=(n_in, n_out)))
            biases.append(np.zeros(n_out))
        else:
            limit = 1.0 / np.sqrt(n_in)
            weights.append(rng.uniform(-limit, limit, size=(n_in, n_out)))
            biases.append(rng.uniform(-limit, limit, size=n_out))
    return MlpParams(weights, biases)


def mlp_dims(in_dim, out_dim, hidden_layers=3, hidden=128):
    return [in_dim] + [hidden] * hidden_layers + [out_dim]


def _as_batch(x, in_dim):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != in_dim:
        raise ShapeError(f"layer 0: input has shape {np.shape(x)}, expected last dim {in_dim}")
    return x, single


def mlp_forward(params, x, return_cache=False):
    """Evaluate the network on a vector or a batch of row vectors."""
    a, single = _as_batch(x, params.in_dim)
    cache = [] if return_cache else None
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        if a.shape[1] != w.shape[0]:
            raise ShapeError(f"layer {k}: got {a.shape[1]} inputs, expects {w.shape[0]}")
        z = a @ w + b
        if k < last and params.hidden_activation == "gelu":
            act, dact = kernels.gelu_forward(z)
        else:
            act, dact = z, None
        if cache is not None:
            cache.append((a, dact))
        a = act
    out = a[0] if single else a
    return (out, cache) if return_cache else out


def mlp_backward_cached(params, cache, cotangent):
    """Reverse pass through a cached forward; returns (param grads, input grad)."""
    delta = np.asarray(cotangent, dtype=np.float64)
    if delta.ndim == 1:
        delta = delta[None, :]
    if delta.shape != (cache[0][0].shape[0], params.out_dim):
        raise ShapeError(
            f"layer {len(params.weights) - 1}: cotangent shape {delta.shape} does not match output"
        )
    grads = [None] * (2 * len(params.weights))
    for k in range(len(params.weights) - 1, -1, -1):
        a_in, _ = cache[k]
        grads[2 * k] = a_in.T @ delta
        grads[2 * k + 1] = delta.sum(axis=0)
        delta = delta @ params.weights[k].T
        if k > 0:
            dact = cache[k - 1][1]
            if dact is not None:
                delta = delta * dact
    return grads, delta


def mlp_backward(params, x, cotangent):
    """Gradients of ``<cotangent, mlp_forward(params, x)>``.

    Returns ``(grads, input_grad)`` where ``grads`` follows ``params.arrays()``
    order and ``input_grad`` has the shape of ``x``.
    """
    x_arr = np.asarray(x, dtype=np.float64)
    _, cache = mlp_forward(params, x_arr, return_cache=True)
    grads, dx = mlp_backward_cached(params, cache, cotangent)
    if x_arr.ndim == 1:
        dx = dx[0]
    return grads, dx


def mse(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"mse: shapes {pred.shape} and {target.shape} differ")
    if pred.size == 0:
        raise ShapeError("mse of empty input")
    d = pred - target
    return float(np.mean(d * d))


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros(cls, n, lr=1e-3, **kw):
        return cls(np.zeros(n), np.zeros(n), 0, lr, **kw)


def adam_step(state, params, grads):
    """One bias-corrected Adam update; returns ``(new_params, state)``.

    ``state`` moments are updated in place and its step counter incremented.
    """
    if params.shape != grads.shape or state.m.shape != params.shape:
        raise ShapeError(
            f"adam: params {params.shape}, grads {grads.shape}, moments {state.m.shape}"
        )
    bad = ~np.isfinite(grads)
    if bad.any():
        idx = int(np.flatnonzero(bad)[0])
        raise NonFiniteError(f"non-finite gradient component at index {idx}: {grads[idx]}")
    state.step += 1
    state.m *= state.beta1
    state.m += (1.0 - state.beta1) * grads
    state.v *= state.beta2
    state.v += (1.0 - state.beta2) * grads * grads
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    return params - state.lr * m_hat / (np.sqrt(v_hat) + state.eps), state
