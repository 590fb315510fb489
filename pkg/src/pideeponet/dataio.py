"""Grid files, observation masks, error metrics, heatmaps and profiles.

Grid CSV format (``tse-grid v1``)::

    # tse-grid v1, M=21, T=600, dx=30, dt=1.5
    v(0,0),v(0,1),...,v(0,T-1)
    ...
    v(M-1,0),...,v(M-1,T-1)

Row ``i`` is the cell at ``x0 + i*dx``, column ``j`` the time ``t0 + j*dt``.
Optional ``x0=`` and ``t0=`` keys may follow ``dt``. Values are written with
17 significant digits, so a save/load round trip is bit-exact.
"""

import csv
import json
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, GridParseError, ShapeError
from .rng import substream

GRID_MAGIC = "tse-grid v1"
REPORT_SCHEMA_VERSION = 1
MAPE_GUARD = 0.1


@dataclass
class GridField:
    values: np.ndarray
    dx: float = 30.0
    dt: float = 1.5
    x0: float = 0.0
    t0: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ShapeError(f"grid values must be 2-D, got shape {self.values.shape}")
        if not (self.dx > 0 and self.dt > 0):
            raise DomainError("dx and dt must be positive")

    @property
    def shape(self):
        return self.values.shape

    @property
    def M(self):
        return self.values.shape[0]

    @property
    def T(self):
        return self.values.shape[1]

    @property
    def length(self):
        """Physical distance spanned by the cell centres, m."""
        return (self.M - 1) * self.dx

    @property
    def duration(self):
        return (self.T - 1) * self.dt

    def x_coords(self):
        return self.x0 + self.dx * np.arange(self.M)

    def t_coords(self):
        return self.t0 + self.dt * np.arange(self.T)

    def like(self, values):
        """A field with this geometry and new values."""
        return GridField(values, self.dx, self.dt, self.x0, self.t0)


def _fmt(v):
    return "%.17g" % v


def save_grid_csv(field, path):
    path = Path(path)
    head = f"# {GRID_MAGIC}, M={field.M}, T={field.T}, dx={_fmt(field.dx)}, dt={_fmt(field.dt)}"
    if field.x0 or field.t0:
        head += f", x0={_fmt(field.x0)}, t0={_fmt(field.t0)}"
    with path.open("w", newline="") as fh:
        fh.write(head + "\n")
        for row in field.values:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def _parse_header(line):
    if not line.startswith("#"):
        raise GridParseError("missing '# tse-grid v1' header", line=1)
    parts = [p.strip() for p in line[1:].split(",")]
    if parts[0] != GRID_MAGIC:
        raise GridParseError(f"unrecognized header tag {parts[0]!r}", line=1)
    meta = {}
    for col, p in enumerate(parts[1:], start=2):
        key, sep, val = p.partition("=")
        if not sep:
            raise GridParseError(f"header field {p!r} is not key=value", line=1, column=col)
        try:
            meta[key.strip()] = float(val)
        except ValueError:
            raise GridParseError(f"header value {val!r} is not numeric", line=1, column=col)
    for key in ("M", "T", "dx", "dt"):
        if key not in meta:
            raise GridParseError(f"header lacks {key}", line=1)
    return meta


def load_grid_csv(path):
    path = Path(path)
    with path.open(newline="") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].strip():
        raise GridParseError(f"{path}: empty file", line=1)
    meta = _parse_header(lines[0])
    M, T = int(meta["M"]), int(meta["T"])
    rows = [ln for ln in lines[1:]]
    while rows and not rows[-1].strip():
        rows.pop()
    if len(rows) != M:
        raise GridParseError(f"expected {M} data rows, found {len(rows)}", line=len(rows) + 1)
    values = np.empty((M, T))
    for i, ln in enumerate(rows):
        cells = ln.split(",")
        if len(cells) != T:
            raise GridParseError(f"row has {len(cells)} values, expected {T}", line=i + 2)
        for j, c in enumerate(cells):
            try:
                values[i, j] = float(c)
            except ValueError:
                raise GridParseError(f"non-numeric value {c!r}", line=i + 2, column=j + 1)
    return GridField(values, meta["dx"], meta["dt"], meta.get("x0", 0.0), meta.get("t0", 0.0))


def load_pairs_csv(path):
    """Read ``density,speed`` rows (an optional non-numeric header line is skipped)."""
    pairs = []
    with Path(path).open(newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or not "".join(row).strip() or row[0].lstrip().startswith("#"):
                continue
            if len(row) != 2:
                raise GridParseError(f"expected 2 columns, found {len(row)}", line=lineno)
            try:
                pairs.append((float(row[0]), float(row[1])))
            except ValueError:
                if lineno == 1 and not pairs:
                    continue
                raise GridParseError(f"non-numeric pair {row!r}", line=lineno)
    if not pairs:
        raise GridParseError(f"{path}: no density,speed pairs", line=1)
    return np.asarray(pairs)


@dataclass
class ObservationMask:
    observed: np.ndarray
    rate: float
    seed: int

    @property
    def count(self):
        return int(self.observed.sum())

    @property
    def shape(self):
        return self.observed.shape


def mask_count(M, T, rate):
    return int(math.floor(rate * M * T + 0.5))


def make_mask(M, T, rate, seed):
    """Observe exactly ``round(rate*M*T)`` cells, uniformly without replacement."""
    if not (0.0 < rate <= 1.0):
        raise DomainError(f"sampling rate must be in (0, 1], got {rate}")
    n = M * T
    k = mask_count(M, T, rate)
    flat = np.zeros(n, dtype=bool)
    flat[substream(seed, "mask").choice(n, size=k, replace=False)] = True
    return ObservationMask(flat.reshape(M, T), rate, seed)


@dataclass
class EvalReport:
    rmse: float
    mae: float
    mape: float
    n_cells: int
    runtime_s: float = 0.0
    per_rate: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    schema_version: int = REPORT_SCHEMA_VERSION

    def __post_init__(self):
        if not self.rmse >= self.mae - 1e-12 * max(1.0, self.mae):
            raise AssertionError(f"RMSE {self.rmse} < MAE {self.mae}")

    def to_dict(self):
        """Plain dict; an undefined MAPE (every truth value below the guard) becomes None."""
        d = asdict(self)
        if isinstance(d["mape"], float) and math.isnan(d["mape"]):
            d["mape"] = None
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self):
        lines = [
            f"held-out cells : {self.n_cells}",
            f"RMSE (m/s)     : {self.rmse:.6f}",
            f"MAE  (m/s)     : {self.mae:.6f}",
            f"MAPE (%)       : {self.mape:.4f}",
        ]
        for row in self.per_rate:
            lines.append(
                f"  rate {row['rate']:.2f}: RMSE {row['rmse']:.6f}  MAE {row['mae']:.6f}"
            )
        return "\n".join(lines)


def error_metrics(pred, truth):
    """RMSE, MAE and guarded MAPE (percent) between two equal-length arrays."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.size == 0:
        raise DomainError("no cells to evaluate")
    err = pred - truth
    mse = float(np.mean(err * err))
    mae = float(np.mean(np.abs(err)))
    keep = np.abs(truth) >= MAPE_GUARD
    mape = float(100.0 * np.mean(np.abs(err[keep]) / np.abs(truth[keep]))) if keep.any() else float("nan")
    return {"mse": mse, "rmse": math.sqrt(mse), "mae": mae, "mape": mape}


def evaluate(pred, truth, mask, config=None):
    """Metrics over the cells the mask leaves unobserved, in m/s."""
    t0 = time.perf_counter()
    if pred.shape != truth.shape or mask.shape != truth.shape:
        raise ShapeError(f"shapes differ: pred {pred.shape}, truth {truth.shape}, mask {mask.shape}")
    held = ~mask.observed
    if not held.any():
        raise DomainError("mask observes every cell; no held-out set to evaluate")
    m = error_metrics(pred.values[held], truth.values[held])
    return EvalReport(
        rmse=m["rmse"],
        mae=m["mae"],
        mape=m["mape"],
        n_cells=int(held.sum()),
        runtime_s=time.perf_counter() - t0,
        per_rate=[{"rate": mask.rate, "seed": mask.seed, "rmse": m["rmse"], "mae": m["mae"]}],
        config=dict(config or {}),
    )


# Viridis sampled at five stops; luminance rises monotonically along it.
COLORMAP_NAME = "viridis-5"
_CMAP_STOPS = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
_CMAP_RGB = np.array(
    [[68, 1, 84], [59, 82, 139], [33, 145, 140], [94, 201, 98], [253, 231, 37]],
    dtype=np.float64,
)


def colormap(u):
    """Map values in [0, 1] to uint8 RGB."""
    u = np.clip(np.asarray(u, dtype=np.float64), 0.0, 1.0)
    rgb = np.stack([np.interp(u, _CMAP_STOPS, _CMAP_RGB[:, c]) for c in range(3)], axis=-1)
    return np.rint(rgb).astype(np.uint8)


def heatmap_pixels(field, vmin=None, vmax=None, scale=1):
    """RGB image with time left-to-right and position increasing upwards."""
    v = field.values
    vmin = float(v.min()) if vmin is None else float(vmin)
    vmax = float(v.max()) if vmax is None else float(vmax)
    span = vmax - vmin
    u = np.zeros_like(v) if span <= 0 else (v - vmin) / span
    img = colormap(u[::-1, :])
    if scale > 1:
        img = np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)
    return img, vmin, vmax


def write_ppm(img, path):
    h, w, _ = img.shape
    with Path(path).open("wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(img, dtype=np.uint8).tobytes())


def read_ppm(path):
    data = Path(path).read_bytes()
    tokens, pos = [], 0
    while len(tokens) < 4:
        while data[pos:pos + 1].isspace():
            pos += 1
        start = pos
        while not data[pos:pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos].decode("ascii"))
    if tokens[0] != "P6":
        raise GridParseError(f"{path}: not a binary PPM")
    w, h = int(tokens[1]), int(tokens[2])
    pos += 1
    return np.frombuffer(data[pos:pos + w * h * 3], dtype=np.uint8).reshape(h, w, 3)


def render_heatmap(field, path, vmin=None, vmax=None, scale=1):
    """Write a PPM (or PNG, by suffix) heatmap plus a ``.range.txt`` sidecar."""
    path = Path(path)
    img, lo, hi = heatmap_pixels(field, vmin, vmax, scale)
    if path.suffix.lower() == ".png":
        from PIL import Image

        Image.fromarray(img, mode="RGB").save(path)
    else:
        write_ppm(img, path)
    sidecar = path.with_name(path.name + ".range.txt")
    sidecar.write_text(
        f"colormap {COLORMAP_NAME}\nvmin {_fmt(lo)}\nvmax {_fmt(hi)}\n"
        f"vertical position (top = x max), horizontal time\n"
    )
    return path, sidecar


@dataclass
class Profile:
    axis: str
    index: int
    coords: np.ndarray
    values: np.ndarray

    def save_csv(self, path):
        name = "t_s" if self.axis == "location" else "x_m"
        with Path(path).open("w", newline="") as fh:
            fh.write(f"{name},speed\n")
            for c, v in zip(self.coords, self.values):
                fh.write(f"{_fmt(c)},{_fmt(v)}\n")
        return path


def extract_profile(field, axis, index):
    """Time series at a fixed cell (``axis='location'``) or snapshot at a fixed time."""
    if axis == "location":
        if not 0 <= index < field.M:
            raise DomainError(f"location index {index} outside [0, {field.M})")
        return Profile(axis, index, field.t_coords(), field.values[index].copy())
    if axis == "time":
        if not 0 <= index < field.T:
            raise DomainError(f"time index {index} outside [0, {field.T})")
        return Profile(axis, index, field.x_coords(), field.values[:, index].copy())
    raise DomainError(f"axis must be 'location' or 'time', got {axis!r}")
