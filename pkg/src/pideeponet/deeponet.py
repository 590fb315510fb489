"""DeepONet: branch/trunk networks fused by a dot product.

Coordinates fed to the trunk are normalized to ``[0, 1]^2`` over the grid
(cell centre 0 maps to 0, cell M-1 to 1; likewise in time). Network outputs
are standardized speeds; ``speed_mean + speed_std * output`` is in m/s.

Every input function is paired with the same observed labels, so the loss is
an average over the ``N x P_lab`` matrix of predictions.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ShapeError
from .nn import MlpParams, init_mlp, mlp_backward_cached, mlp_dims, mlp_forward
from .rng import substream


@dataclass(frozen=True)
class ConfigurationPoints:
    points: np.ndarray  # (m, 2) normalized (x, t)
    seed: int

    @property
    def m(self):
        return self.points.shape[0]


def sample_configuration_points(m, seed):
    if m < 1:
        raise DomainError("need at least one configuration point")
    pts = substream(seed, "theta").uniform(0.0, 1.0, size=(m, 2))
    pts.setflags(write=False)
    return ConfigurationPoints(pts, seed)


def nearest_cell(points, M, T):
    """Grid indices nearest to normalized points (halves round up)."""
    pts = np.asarray(points, dtype=np.float64)
    i = np.floor(pts[..., 0] * (M - 1) + 0.5).astype(np.intp)
    j = np.floor(pts[..., 1] * (T - 1) + 0.5).astype(np.intp)
    return np.clip(i, 0, M - 1), np.clip(j, 0, T - 1)


def sample_function_at(u, pts):
    """Values of ``u`` at the configuration points, read from the nearest cell."""
    values = u.values if hasattr(u, "values") else np.asarray(u)
    M, T = values.shape
    i, j = nearest_cell(pts.points, M, T)
    return values[i, j].copy()


def grid_coordinates(M, T):
    """Normalized (x, t) of every cell, row-major, shape (M*T, 2)."""
    x = np.linspace(0.0, 1.0, M)
    t = np.linspace(0.0, 1.0, T)
    xx, tt = np.meshgrid(x, t, indexing="ij")
    return np.column_stack([xx.ravel(), tt.ravel()])


@dataclass
class OperatorModel:
    branch: MlpParams
    trunk: MlpParams
    theta: ConfigurationPoints
    speed_mean: float = 0.0
    speed_std: float = 1.0
    length: float = 1.0  # physical extent of normalized x in m
    duration: float = 1.0  # physical extent of normalized t in s

    def __post_init__(self):
        if self.branch.out_dim != self.trunk.out_dim:
            raise ShapeError(
                f"branch out-dim {self.branch.out_dim} != trunk out-dim {self.trunk.out_dim}"
            )
        if self.trunk.in_dim != 2:
            raise ShapeError(f"trunk must take (x, t), got in-dim {self.trunk.in_dim}")
        if self.branch.in_dim != self.theta.m:
            raise ShapeError(
                f"branch in-dim {self.branch.in_dim} != {self.theta.m} configuration points"
            )

    @property
    def p(self):
        return self.branch.out_dim

    @property
    def m(self):
        return self.branch.in_dim

    @property
    def size(self):
        return self.branch.size + self.trunk.size

    def flat(self):
        return np.concatenate([self.branch.flat(), self.trunk.flat()])

    def set_flat(self, vec):
        nb = self.branch.size
        self.branch.set_flat(vec[:nb])
        self.trunk.set_flat(vec[nb:])

    def copy(self):
        return OperatorModel(
            self.branch.copy(), self.trunk.copy(), self.theta,
            self.speed_mean, self.speed_std, self.length, self.duration,
        )

    def to_speed(self, normalized):
        return self.speed_mean + self.speed_std * np.asarray(normalized)


def init_operator_model(theta, p=128, hidden_layers=3, hidden=128, seed=0, speed_mean=0.0,
                        speed_std=1.0, length=1.0, duration=1.0, init="fan-in"):
    branch = init_mlp(mlp_dims(theta.m, p, hidden_layers, hidden),
                      substream(seed, "init-branch"), init)
    trunk = init_mlp(mlp_dims(2, p, hidden_layers, hidden), substream(seed, "init-trunk"), init)
    return OperatorModel(branch, trunk, theta, speed_mean, speed_std, length, duration)


def operator_eval(model, branch_input, query):
    """Normalized prediction ``branch(u) . trunk(x, t)`` at a single query point."""
    b = np.asarray(branch_input, dtype=np.float64)
    if b.shape != (model.m,):
        raise ShapeError(f"branch input has shape {b.shape}, expected ({model.m},)")
    q = np.asarray(query, dtype=np.float64)
    if q.shape != (2,):
        raise ShapeError(f"query must be (x, t), got shape {q.shape}")
    return float(mlp_forward(model.branch, b) @ mlp_forward(model.trunk, q))


def predict_matrix(model, branch_inputs, queries):
    """Normalized predictions, shape (N functions, P queries)."""
    B = mlp_forward(model.branch, np.atleast_2d(branch_inputs))
    Tq = mlp_forward(model.trunk, np.atleast_2d(queries))
    return B @ Tq.T


def predict_field(model, branch_inputs, M, T):
    """Speed in m/s on the full M x T grid, averaged over the given input functions."""
    pred = predict_matrix(model, branch_inputs, grid_coordinates(M, T))
    return model.to_speed(pred.mean(axis=0)).reshape(M, T)


@dataclass
class TrainingSet:
    functions: list
    branch_inputs: np.ndarray  # (N, m)
    labeled_points: np.ndarray  # (P_lab, 2) normalized
    labels: np.ndarray  # (P_lab,) standardized speeds
    speed_mean: float
    speed_std: float
    length: float
    duration: float

    @property
    def N(self):
        return self.branch_inputs.shape[0]

    @property
    def n_labels(self):
        return self.labels.shape[0]


def build_training_set(field, mask, functions, theta):
    """Observed cells become labels; each function is sampled at ``theta``."""
    if mask.shape != field.shape:
        raise ShapeError(f"mask {mask.shape} and field {field.shape} differ")
    if not functions:
        raise DomainError("need at least one input function")
    for u in functions:
        if u.shape != field.shape:
            raise ShapeError(f"input function shape {u.shape} != field shape {field.shape}")
    idx = np.flatnonzero(mask.observed.ravel())
    if idx.size == 0:
        raise DomainError("mask selects no observed cells")
    M, T = field.shape
    pts = np.column_stack([(idx // T) / (M - 1), (idx % T) / (T - 1)])
    raw = field.values.ravel()[idx]
    mean = float(raw.mean())
    std = float(raw.std())
    if not std > 0:
        std = 1.0
    return TrainingSet(
        functions=list(functions),
        branch_inputs=np.stack([sample_function_at(u, theta) for u in functions]),
        labeled_points=pts,
        labels=(raw - mean) / std,
        speed_mean=mean,
        speed_std=std,
        length=field.length,
        duration=field.duration,
    )


def operator_loss(model, ts):
    if ts.n_labels == 0:
        raise DomainError("operator loss needs at least one label")
    pred = predict_matrix(model, ts.branch_inputs, ts.labeled_points)
    d = pred - ts.labels[None, :]
    return float(np.mean(d * d))


def operator_loss_and_grad(model, ts, label_index=None):
    """Operator loss and its gradient w.r.t. ``model.flat()``.

    ``label_index`` restricts the loss to a subset of labels (minibatching).
    """
    pts, labels = ts.labeled_points, ts.labels
    if label_index is not None:
        pts, labels = pts[label_index], labels[label_index]
    if labels.size == 0:
        raise DomainError("operator loss needs at least one label")
    B, cb = mlp_forward(model.branch, ts.branch_inputs, return_cache=True)
    Tq, ct = mlp_forward(model.trunk, pts, return_cache=True)
    d = B @ Tq.T - labels[None, :]
    loss = float(np.mean(d * d))
    G = (2.0 / d.size) * d
    gb, _ = mlp_backward_cached(model.branch, cb, G @ Tq)
    gt, _ = mlp_backward_cached(model.trunk, ct, G.T @ B)
    return loss, _flatten(gb + gt)


def _flatten(arrays):
    return np.concatenate([a.ravel() for a in arrays])
