"""Self-describing model checkpoints.

Layout::

    PIDEEPONET-CHECKPOINT\\n
    <JSON header, UTF-8, any number of lines>\\n
    END-HEADER\\n
    <payload: little-endian float64 arrays, back to back>

The header's ``arrays`` list gives the name and shape of every payload array
in order. Payload order is: branch ``W0, b0, W1, b1, ...``, trunk likewise,
``branch_inputs`` (N x m), then ``adam_m`` and ``adam_v`` when optimizer state
is saved. Configuration points, normalization constants, seeds, the training
epoch and the run configuration are stored in the header; JSON floats use the
shortest round-trip representation so they reload bit-exactly.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .deeponet import ConfigurationPoints, OperatorModel
from .errors import CheckpointError
from .nn import AdamState, MlpParams

MAGIC = b"PIDEEPONET-CHECKPOINT\n"
END = b"\nEND-HEADER\n"
VERSION = 1
_LE = np.dtype("<f8")


@dataclass
class Checkpoint:
    model: OperatorModel
    branch_inputs: np.ndarray
    header: dict
    adam: object = None

    @property
    def epoch(self):
        return self.header.get("epoch", 0)

    @property
    def mode(self):
        return self.header.get("mode")

    @property
    def config(self):
        return self.header.get("config", {})


def _mlp_arrays(prefix, params):
    out = []
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        out += [(f"{prefix}.W{k}", w), (f"{prefix}.b{k}", b)]
    return out


def save_checkpoint(path, model, branch_inputs, mode, epoch=0, adam=None, config=None,
                    grid=None, extra=None):
    arrays = _mlp_arrays("branch", model.branch) + _mlp_arrays("trunk", model.trunk)
    arrays.append(("branch_inputs", np.asarray(branch_inputs, dtype=np.float64)))
    header = {
        "format": "pideeponet-checkpoint",
        "version": VERSION,
        "dtype": "float64",
        "byte_order": "little",
        "mode": mode,
        "epoch": int(epoch),
        "p": model.p,
        "m": model.m,
        "branch_dims": model.branch.dims,
        "trunk_dims": model.trunk.dims,
        "theta": model.theta.points.tolist(),
        "theta_seed": model.theta.seed,
        "speed_mean": model.speed_mean,
        "speed_std": model.speed_std,
        "length": model.length,
        "duration": model.duration,
        "grid": grid or {},
        "config": config or {},
    }
    if adam is not None:
        arrays += [("adam_m", adam.m), ("adam_v", adam.v)]
        header["adam"] = {
            "step": adam.step, "lr": adam.lr, "beta1": adam.beta1,
            "beta2": adam.beta2, "eps": adam.eps,
        }
    if extra:
        header.update(extra)
    header["arrays"] = [{"name": n, "shape": list(a.shape)} for n, a in arrays]
    text = json.dumps(header, indent=1, sort_keys=True, allow_nan=False)
    with Path(path).open("wb") as fh:
        fh.write(MAGIC)
        fh.write(text.encode("utf-8"))
        fh.write(END)
        for _, a in arrays:
            fh.write(np.ascontiguousarray(a, dtype=_LE).tobytes())
    return Path(path)


def read_header(path):
    data = Path(path).read_bytes()
    return _split(data, path)[0]


def _split(data, path):
    if not data.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    end = data.find(END, len(MAGIC))
    if end < 0:
        raise CheckpointError(f"{path}: header terminator missing")
    try:
        header = json.loads(data[len(MAGIC):end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: unreadable header: {exc}") from None
    if header.get("version") != VERSION:
        raise CheckpointError(f"{path}: unsupported version {header.get('version')!r}")
    return header, data[end + len(END):]


def load_checkpoint(path):
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"{path}: no such checkpoint")
    header, payload = _split(path.read_bytes(), path)
    arrays, pos = {}, 0
    for spec in header["arrays"]:
        n = int(np.prod(spec["shape"], dtype=np.int64))
        nbytes = n * 8
        if pos + nbytes > len(payload):
            raise CheckpointError(f"{path}: payload truncated in {spec['name']}")
        arrays[spec["name"]] = (
            np.frombuffer(payload, dtype=_LE, count=n, offset=pos)
            .astype(np.float64).reshape(spec["shape"])
        )
        pos += nbytes
    if pos != len(payload):
        raise CheckpointError(f"{path}: {len(payload) - pos} trailing payload bytes")

    def mlp(prefix, dims):
        k = len(dims) - 1
        return MlpParams(
            [arrays[f"{prefix}.W{i}"] for i in range(k)],
            [arrays[f"{prefix}.b{i}"] for i in range(k)],
        )

    theta = ConfigurationPoints(np.asarray(header["theta"], dtype=np.float64), header["theta_seed"])
    model = OperatorModel(
        mlp("branch", header["branch_dims"]),
        mlp("trunk", header["trunk_dims"]),
        theta,
        header["speed_mean"],
        header["speed_std"],
        header["length"],
        header["duration"],
    )
    adam = None
    if "adam" in header:
        a = header["adam"]
        adam = AdamState(arrays["adam_m"], arrays["adam_v"], a["step"], a["lr"],
                         a["beta1"], a["beta2"], a["eps"])
    return Checkpoint(model, arrays["branch_inputs"], header, adam)
