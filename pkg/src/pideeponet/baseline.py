"""Plain coordinate MLP, (x, t) -> speed, fitted to the observed cells only."""

from dataclasses import dataclass

import numpy as np

from .deeponet import grid_coordinates
from .nn import AdamState, adam_step, init_mlp, mlp_backward_cached, mlp_dims, mlp_forward
from .rng import substream


@dataclass
class MlpBaseline:
    params: object
    speed_mean: float
    speed_std: float

    def predict(self, points):
        return self.speed_mean + self.speed_std * mlp_forward(self.params, points)[:, 0]

    def predict_field(self, M, T):
        return self.predict(grid_coordinates(M, T)).reshape(M, T)


def train_mlp_baseline(ts, epochs=2000, lr=1e-3, hidden_layers=3, hidden=128, seed=0):
    """Fit on ``ts.labeled_points``/``ts.labels``; returns the model and loss history."""
    params = init_mlp(mlp_dims(2, 1, hidden_layers, hidden), substream(seed, "init-mlp"))
    adam = AdamState.zeros(params.size, lr=lr)
    flat = params.flat()
    y = ts.labels[:, None]
    history = []
    for epoch in range(epochs):
        out, cache = mlp_forward(params, ts.labeled_points, return_cache=True)
        d = out - y
        loss = float(np.mean(d * d))
        grads, _ = mlp_backward_cached(params, cache, (2.0 / d.size) * d)
        g = np.concatenate([a.ravel() for a in grads])
        history.append({"epoch": epoch, "L_data": loss, "L_phys": float("nan"),
                        "L_total": loss, "grad_norm": float(np.sqrt(g @ g))})
        flat, adam = adam_step(adam, flat, g)
        params.set_flat(flat)
    return MlpBaseline(params, ts.speed_mean, ts.speed_std), history
