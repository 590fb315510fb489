"""Greenshields calibration, the LWR speed-form residual, and the training loop.

The residual penalized during training is

    R = dv/dt + (2 v - v_f) dv/dx

in physical units (m/s^2). Derivatives are central differences of the network
with step ``h`` in normalized coordinates, one-sided within ``h`` of the domain
edge, and rescaled by the physical extents of the grid.
"""

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .deeponet import operator_loss_and_grad, _flatten
from .errors import CalibrationError, DomainError, NonFiniteError, ShapeError
from .nn import AdamState, adam_step, mlp_backward_cached, mlp_forward
from .rng import substream

DEFAULT_VF = 19.965
DEEPONET = "deeponet"
PI_DEEPONET = "pi-deeponet"


@dataclass(frozen=True)
class FundamentalDiagram:
    v_f: float
    rho_m: float
    fit_rmse: float = 0.0
    fit_r2: float = 1.0

    def speed(self, rho):
        return self.v_f * (1.0 - np.asarray(rho) / self.rho_m)


def calibrate_greenshields(pairs):
    """Least-squares line ``v = a + b*rho``; returns ``v_f = a``, ``rho_m = -a/b``."""
    pairs = np.asarray(pairs, dtype=np.float64)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise CalibrationError("expected (density, speed) pairs")
    if pairs.shape[0] < 3:
        raise CalibrationError(f"need at least 3 pairs, got {pairs.shape[0]}")
    rho, v = pairs[:, 0], pairs[:, 1]
    rc = rho - rho.mean()
    sxx = float(rc @ rc)
    if not sxx > 1e-300 or np.ptp(rho) <= 1e-12 * max(1.0, float(np.abs(rho).max())):
        raise CalibrationError("density values have no spread")
    b = float(rc @ (v - v.mean())) / sxx
    a = float(v.mean()) - b * float(rho.mean())
    if b >= 0:
        raise CalibrationError(f"speed does not decrease with density (slope {b:.4g})")
    if a <= 0:
        raise CalibrationError(f"fitted free-flow speed {a:.4g} is not positive")
    resid = v - (a + b * rho)
    ss_res = float(resid @ resid)
    vc = v - v.mean()
    ss_tot = float(vc @ vc)
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return FundamentalDiagram(a, -a / b, math.sqrt(ss_res / len(v)), r2)


def pairs_from_grids(speed, density, min_density=0.0):
    """Cell-wise (density, speed) pairs from matching speed and density grids."""
    if speed.shape != density.shape:
        raise ShapeError(f"speed grid {speed.shape} and density grid {density.shape} differ")
    rho = density.values.ravel()
    keep = rho > min_density
    return np.column_stack([rho[keep], speed.values.ravel()[keep]])


@dataclass(frozen=True)
class PhysicsConfig:
    Q: int = 256
    lam_o: float = 1.0
    lam_p: float = 0.1
    h: float = 1e-3
    resample: bool = True

    def __post_init__(self):
        if self.Q < 1:
            raise DomainError("Q must be >= 1")
        if self.lam_o < 0 or self.lam_p < 0:
            raise DomainError("loss weights must be non-negative")
        if not 0 < self.h < 0.1:
            raise DomainError("finite-difference step must lie in (0, 0.1)")


def stencil(points, h):
    """Neighbour coordinates and normalized spacings for each residual point.

    Returns ``(xa, xb, dxn, ta, tb, dtn)``: ``dv/dx ~ (v(xa) - v(xb)) / dxn``
    and likewise in time, central inside the domain, one-sided at the edges.
    """
    pts = np.asarray(points, dtype=np.float64)
    x, t = pts[:, 0], pts[:, 1]
    xa = np.where(x + h <= 1.0, x + h, x)
    xb = np.where(x - h >= 0.0, x - h, x)
    ta = np.where(t + h <= 1.0, t + h, t)
    tb = np.where(t - h >= 0.0, t - h, t)
    return xa, xb, xa - xb, ta, tb, ta - tb


def residual_from_evaluator(speed_fn, points, v_f, h, length=1.0, duration=1.0):
    """LWR residual at normalized ``points`` for any vectorized ``speed_fn(x, t)`` in m/s."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    x, t = pts[:, 0], pts[:, 1]
    xa, xb, dxn, ta, tb, dtn = stencil(pts, h)
    vc = speed_fn(x, t)
    vx = (speed_fn(xa, t) - speed_fn(xb, t)) / (dxn * length)
    vt = (speed_fn(x, ta) - speed_fn(x, tb)) / (dtn * duration)
    r = vt + (2.0 * vc - v_f) * vx
    if not np.all(np.isfinite(r)):
        bad = int(np.flatnonzero(~np.isfinite(r))[0])
        raise NonFiniteError(f"non-finite residual at point {tuple(pts[bad])}")
    return r


def model_speed_fn(model, branch_input):
    """Vectorized ``(x, t) -> m/s`` evaluator for one input function."""
    b = mlp_forward(model.branch, np.asarray(branch_input, dtype=np.float64))

    def fn(x, t):
        q = np.column_stack([np.ravel(x), np.ravel(t)])
        return model.to_speed(mlp_forward(model.trunk, q) @ b).reshape(np.shape(x))

    return fn


def lwr_residual(model, branch_input, point, v_f, h=1e-3):
    """Residual of the network prediction for one function at one point."""
    fn = model_speed_fn(model, branch_input)
    return float(
        residual_from_evaluator(fn, [point], v_f, h, model.length, model.duration)[0]
    )


def sample_physics_points(Q, seed, epoch=0):
    return substream(seed, "physics", epoch).uniform(0.0, 1.0, size=(Q, 2))


def mean_square_residual(R):
    """Physics loss from an (N functions, Q points) residual array."""
    R = np.asarray(R, dtype=np.float64)
    if R.size == 0:
        raise DomainError("no residuals to average")
    return float(np.mean(R * R))


def physics_loss_and_grad(model, branch_inputs, points, v_f, h, want_grad=True):
    """Mean squared residual over all functions x points, and its parameter gradient."""
    pts = np.atleast_2d(points)
    Q = pts.shape[0]
    x, t = pts[:, 0], pts[:, 1]
    xa, xb, dxn, ta, tb, dtn = stencil(pts, h)
    sten = np.concatenate([
        pts,
        np.column_stack([xa, t]),
        np.column_stack([xb, t]),
        np.column_stack([x, ta]),
        np.column_stack([x, tb]),
    ])
    B, cb = mlp_forward(model.branch, np.atleast_2d(branch_inputs), return_cache=True)
    Ts, ct = mlp_forward(model.trunk, sten, return_cache=True)
    V = B @ Ts.T
    sd = model.speed_std
    Vc, Vxa, Vxb, Vta, Vtb = (V[:, k * Q:(k + 1) * Q] for k in range(5))
    cx = sd / (dxn * model.length)
    ct_ = sd / (dtn * model.duration)
    vc = model.speed_mean + sd * Vc
    vx = (Vxa - Vxb) * cx
    vt = (Vta - Vtb) * ct_
    adv = 2.0 * vc - v_f
    R = vt + adv * vx
    if not np.all(np.isfinite(R)):
        i, j = np.argwhere(~np.isfinite(R))[0]
        raise NonFiniteError(f"non-finite residual for function {i} at point {tuple(pts[j])}")
    loss = mean_square_residual(R)
    if not want_grad:
        return loss, None, R
    dR = (2.0 / R.size) * R
    G = np.concatenate([
        dR * (2.0 * sd) * vx,
        dR * adv * cx,
        -dR * adv * cx,
        dR * ct_,
        -dR * ct_,
    ], axis=1)
    gb, _ = mlp_backward_cached(model.branch, cb, G @ Ts)
    gt, _ = mlp_backward_cached(model.trunk, ct, G.T @ B)
    return loss, _flatten(gb + gt), R


def physics_loss(model, branch_inputs, v_f, cfg, seed, epoch=0):
    pts = sample_physics_points(cfg.Q, seed, epoch if cfg.resample else 0)
    return physics_loss_and_grad(model, branch_inputs, pts, v_f, cfg.h, want_grad=False)[0]


def combine_losses(l_operator, l_physics, cfg):
    total = cfg.lam_o * l_operator + cfg.lam_p * l_physics
    return total, {"L_data": l_operator, "L_phys": l_physics, "L_total": total}


def total_loss(model, ts, cfg, v_f, points):
    """Weighted operator + physics loss at fixed residual points, with breakdown."""
    from .deeponet import operator_loss

    lo = operator_loss(model, ts)
    lp = physics_loss_and_grad(model, ts.branch_inputs, points, v_f, cfg.h, want_grad=False)[0]
    return combine_losses(lo, lp, cfg)


def total_loss_and_grad(model, ts, cfg, v_f, points, label_index=None):
    lo, go = operator_loss_and_grad(model, ts, label_index)
    lp, gp, _ = physics_loss_and_grad(model, ts.branch_inputs, points, v_f, cfg.h)
    total, parts = combine_losses(lo, lp, cfg)
    return total, parts, cfg.lam_o * go + cfg.lam_p * gp


@dataclass(frozen=True)
class TrainConfig:
    mode: str = PI_DEEPONET
    epochs: int = 2000
    lr: float = 1e-3
    physics: PhysicsConfig = field(default_factory=PhysicsConfig)
    v_f: float = DEFAULT_VF
    grad_tol: float = 1e-8
    seed: int = 0
    batch_size: int = 0  # 0 = full batch

    def __post_init__(self):
        if self.mode not in (DEEPONET, PI_DEEPONET):
            raise DomainError(f"unknown training mode {self.mode!r}")


@dataclass
class TrainResult:
    model: object
    history: list
    adam: AdamState
    epoch: int
    stop_reason: str


class TrainingAborted(NonFiniteError):
    """Training hit a non-finite value; ``result`` holds the last good state."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


def _label_batch(ts, cfg, epoch):
    if not cfg.batch_size or cfg.batch_size >= ts.n_labels:
        return None
    return np.sort(
        substream(cfg.seed, "batch", epoch).choice(ts.n_labels, cfg.batch_size, replace=False)
    )


def train(model, ts, cfg, epochs=None, start_epoch=0, adam=None, callback=None):
    """Adam on the total loss until the epoch cap or ``|grad| < cfg.grad_tol``.

    ``start_epoch`` and ``adam`` resume an interrupted run; the per-epoch
    physics points and minibatches are keyed by epoch number, so a resumed run
    reproduces the uninterrupted one exactly. The model is updated in place.
    """
    epochs = cfg.epochs if epochs is None else epochs
    if adam is None:
        adam = AdamState.zeros(model.size, lr=cfg.lr)
    history = []
    params = model.flat()
    stop = "epochs"
    epoch = start_epoch
    physics = cfg.mode == PI_DEEPONET
    for epoch in range(start_epoch, start_epoch + epochs):
        idx = _label_batch(ts, cfg, epoch)
        try:
            with np.errstate(invalid="ignore", over="ignore"):
                if physics:
                    pts = sample_physics_points(
                        cfg.physics.Q, cfg.seed, epoch if cfg.physics.resample else 0
                    )
                    total, parts, grad = total_loss_and_grad(
                        model, ts, cfg.physics, cfg.v_f, pts, idx
                    )
                else:
                    lo, go = operator_loss_and_grad(model, ts, idx)
                    total = cfg.physics.lam_o * lo
                    parts = {"L_data": lo, "L_phys": float("nan"), "L_total": total}
                    grad = cfg.physics.lam_o * go
                gnorm = float(np.sqrt(grad @ grad))
            if not (np.isfinite(total) and np.isfinite(gnorm)):
                raise NonFiniteError(f"non-finite loss at epoch {epoch}: {parts}")
        except NonFiniteError as exc:
            # the model still holds the parameters of the last finite epoch
            raise TrainingAborted(
                f"epoch {epoch}: {exc}", TrainResult(model, history, adam, epoch, "aborted")
            ) from None
        row = {"epoch": epoch, **parts, "grad_norm": gnorm}
        history.append(row)
        if callback is not None:
            callback(row)
        if gnorm < cfg.grad_tol:
            stop = "grad_tol"
            break
        params, adam = adam_step(adam, params, grad)
        model.set_flat(params)
    else:
        epoch = start_epoch + epochs
    if stop == "grad_tol":
        epoch += 1
    return TrainResult(model, history, adam, epoch, stop)


HISTORY_COLUMNS = ("epoch", "L_data", "L_phys", "L_total", "grad_norm")


def write_history_csv(history, path, append=False):
    path = Path(path)
    new = not (append and path.exists())
    with path.open("a" if append else "w", newline="") as fh:
        w = csv.writer(fh)
        if new:
            w.writerow(HISTORY_COLUMNS)
        for row in history:
            w.writerow([row["epoch"]] + ["%.17g" % row[k] for k in HISTORY_COLUMNS[1:]])
    return path


def with_physics(cfg, **changes):
    return replace(cfg, physics=replace(cfg.physics, **changes))
