"""Run configuration and its flat ``key = value`` file format.

One setting per line, ``#`` starts a comment, blank lines are ignored::

    mode = pi-deeponet
    epochs = 2000
    rate = 0.1

Unknown keys are rejected. Every key is listed in ``RunConfig``.
"""

from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError
from .funcgen import GENERATORS
from .nn import INIT_SCHEMES
from .physics import DEEPONET, DEFAULT_VF, PI_DEEPONET, PhysicsConfig, TrainConfig

MLP_BASELINE = "mlp-baseline"
MODES = (DEEPONET, PI_DEEPONET, MLP_BASELINE)


@dataclass(frozen=True)
class RunConfig:
    mode: str = PI_DEEPONET
    # network and optimizer
    hidden_layers: int = 3
    hidden: int = 128
    p: int = 128
    lr: float = 0.001
    epochs: int = 2000
    batch_size: int = 0
    grad_tol: float = 1e-8
    init: str = "fan-in"
    # operator inputs
    m: int = 100
    n_functions: int = 10
    generator: str = "grf"
    length_scale: float = 0.2
    cheb_degree: int = 5
    # physics
    Q: int = 256
    lam_o: float = 1.0
    lam_p: float = 0.1
    fd_step: float = 1e-3
    resample: bool = True
    v_f: float = DEFAULT_VF
    # data
    truth: str = ""
    rate: float = 0.1
    mask_seed: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.generator not in GENERATORS:
            raise ConfigError(f"generator must be one of {GENERATORS}, got {self.generator!r}")
        if self.init not in INIT_SCHEMES:
            raise ConfigError(f"init must be one of {INIT_SCHEMES}, got {self.init!r}")
        if not 0 < self.rate <= 1:
            raise ConfigError(f"rate must be in (0, 1], got {self.rate}")
        for key in ("hidden_layers", "hidden", "p", "m", "n_functions", "Q", "cheb_degree"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")

    def physics(self):
        return PhysicsConfig(self.Q, self.lam_o, self.lam_p, self.fd_step, self.resample)

    def train_config(self):
        mode = DEEPONET if self.mode == MLP_BASELINE else self.mode
        return TrainConfig(mode, self.epochs, self.lr, self.physics(), self.v_f,
                           self.grad_tol, self.seed, self.batch_size)

    def as_dict(self):
        return asdict(self)

    def to_text(self):
        return "".join(f"{k} = {_format(v)}\n" for k, v in self.as_dict().items())

    def with_overrides(self, overrides):
        return replace(self, **_coerce_all(overrides))


def _format(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key, raw):
    if key not in _TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = _TYPES[key]
    if not isinstance(raw, str):
        return raw
    raw = raw.strip()
    try:
        if kind in ("bool", bool):
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind in ("int", int):
            return int(raw)
        if kind in ("float", float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {kind}") from None
    return raw


def _coerce_all(pairs):
    return {k: _coerce(k, v) for k, v in dict(pairs).items()}


def parse_config_text(text, source="<config>"):
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key = key.strip()
        try:
            values[key] = _coerce(key, val)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return values


def load_config(path=None, overrides=None):
    """Defaults, then the file at ``path``, then ``overrides`` (later wins)."""
    values = {}
    if path:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file {p} not found")
        values.update(parse_config_text(p.read_text(), str(p)))
    values.update(_coerce_all(overrides or {}))
    return RunConfig(**values)


def parse_assignments(items):
    """``['a=1', 'b=x']`` -> ``{'a': '1', 'b': 'x'}``."""
    out = {}
    for item in items or ():
        key, sep, val = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        out[key.strip()] = val.strip()
    return out


SWEEP_PARAMS = {
    "m": int,
    "n_functions": int,
    "rate": float,
    "lam_p": float,
    "generator": str,
}
SWEEP_ALIASES = {"N": "n_functions", "P": "m", "lambda_p": "lam_p"}
DEFAULT_SWEEPS = {
    "m": [5, 10, 20, 30, 40, 50, 100, 200],
    "n_functions": [10, 20, 30, 40, 50, 60, 70, 80, 90, 100],
    "rate": [0.05, 0.1, 0.2, 0.3, 0.4],
    "lam_p": [0.0, 0.01, 0.1, 1.0],
    "generator": ["grf", "chebyshev"],
}


@dataclass(frozen=True)
class SweepSpec:
    param: str
    values: tuple
    reps: int = 1
    base: RunConfig = RunConfig()

    def __post_init__(self):
        if self.param not in SWEEP_PARAMS:
            raise ConfigError(f"cannot sweep {self.param!r}; choose from {sorted(SWEEP_PARAMS)}")
        if not self.values:
            raise ConfigError("sweep value list is empty")
        if self.reps < 1:
            raise ConfigError("reps must be >= 1")

    @classmethod
    def parse(cls, param, values=None, reps=1, base=None):
        param = SWEEP_ALIASES.get(param, param)
        if param not in SWEEP_PARAMS:
            raise ConfigError(f"cannot sweep {param!r}; choose from {sorted(SWEEP_PARAMS)}")
        if values is None:
            vals = DEFAULT_SWEEPS[param]
        else:
            if isinstance(values, str):
                values = [v for v in values.split(",") if v.strip()]
            try:
                vals = [SWEEP_PARAMS[param](str(v).strip()) for v in values]
            except ValueError:
                raise ConfigError(f"bad value in sweep list {values!r}") from None
        return cls(param, tuple(vals), reps, base or RunConfig())

    def cells(self):
        """(index, value, rep, RunConfig) for every sweep cell, in table order."""
        out = []
        for vi, v in enumerate(self.values):
            for r in range(self.reps):
                cfg = replace(self.base, **{self.param: v, "seed": self.base.seed + r,
                                            "mask_seed": self.base.mask_seed + r})
                out.append((vi * self.reps + r, v, r, cfg))
        return out
