"""First-order Godunov solver for LWR with the Greenshields flux.

Used to synthesize ground-truth speed fields. The interface flux is the
demand/supply form of the exact Riemann solver for a concave flux:
``F(l, r) = min(D(l), S(r))`` with ``D(rho) = q(min(rho, rho_c))`` and
``S(rho) = q(max(rho, rho_c))``, ``rho_c = rho_m / 2``.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .dataio import GridField
from .errors import DomainError, ShapeError
from .physics import DEFAULT_VF

PERIODIC = "periodic"
DIRICHLET = "dirichlet"
DEFAULT_RHO_M = 0.12


def greenshields_flux(rho, v_f, rho_m):
    """q = v_f * rho * (1 - rho / rho_m), veh/s."""
    r = np.asarray(rho, dtype=np.float64)
    if np.any(r < 0) or np.any(r > rho_m * (1 + 1e-12)):
        raise DomainError(f"density outside [0, {rho_m}]")
    q = v_f * r * (1.0 - r / rho_m)
    return q if q.ndim else float(q)


def interface_flux(left, right, v_f, rho_m):
    crit = 0.5 * rho_m
    dl = np.minimum(left, crit)
    sr = np.maximum(right, crit)
    return np.minimum(v_f * dl * (1.0 - dl / rho_m), v_f * sr * (1.0 - sr / rho_m))


def cfl_number(dt, dx, v_f):
    return v_f * dt / dx


def godunov_step(rho, dt, dx, v_f, rho_m, bc=PERIODIC, left=None, right=None):
    """Advance cell densities by one step; ``left``/``right`` are ghost densities."""
    rho = np.asarray(rho, dtype=np.float64)
    if cfl_number(dt, dx, v_f) > 1.0 + 1e-12:
        raise DomainError(f"CFL number {cfl_number(dt, dx, v_f):.4f} exceeds 1")
    if bc == PERIODIC:
        lg, rg = rho[-1], rho[0]
    elif bc == DIRICHLET:
        if left is None or right is None:
            raise DomainError("Dirichlet step needs left and right ghost densities")
        lg, rg = left, right
    else:
        raise DomainError(f"unknown boundary condition {bc!r}")
    ext = np.concatenate([[lg], rho, [rg]])
    f = interface_flux(ext[:-1], ext[1:], v_f, rho_m)
    return rho - (dt / dx) * (f[1:] - f[:-1])


@dataclass
class LwrScenario:
    """A road of ``M`` cells over ``T`` recorded time columns (``T - 1`` steps).

    For Dirichlet boundaries ``upstream`` and ``downstream`` give ghost-cell
    densities per step (arrays of length ``T - 1``) or constants.
    """

    rho0: np.ndarray
    length: float = 630.0
    T: int = 600
    dt: float = 0.0  # 0 = choose from cfl
    v_f: float = DEFAULT_VF
    rho_m: float = DEFAULT_RHO_M
    bc: str = DIRICHLET
    upstream: object = 0.0
    downstream: object = 0.0
    cfl: float = 0.9

    def __post_init__(self):
        self.rho0 = np.asarray(self.rho0, dtype=np.float64)
        if self.rho0.ndim != 1 or self.rho0.size < 2:
            raise ShapeError("rho0 must be a 1-D array of at least 2 cells")
        if np.any(self.rho0 < 0) or np.any(self.rho0 > self.rho_m):
            raise DomainError("initial density outside [0, rho_m]")
        if self.T < 2:
            raise DomainError("need at least 2 time columns")
        if self.bc not in (PERIODIC, DIRICHLET):
            raise DomainError(f"unknown boundary condition {self.bc!r}")
        if not self.dt:
            self.dt = self.cfl * self.dx / self.v_f
        if cfl_number(self.dt, self.dx, self.v_f) > 1.0 + 1e-12:
            raise DomainError(f"CFL number {cfl_number(self.dt, self.dx, self.v_f):.4f} exceeds 1")

    @property
    def M(self):
        return self.rho0.size

    @property
    def dx(self):
        return self.length / self.M

    def boundary(self, value):
        arr = np.broadcast_to(np.asarray(value, dtype=np.float64), (self.T - 1,))
        if np.any(arr < 0) or np.any(arr > self.rho_m):
            raise DomainError("boundary density outside [0, rho_m]")
        return np.array(arr, dtype=np.float64)


@dataclass
class SimulationResult:
    speed: GridField
    density: GridField
    scenario: LwrScenario

    def vehicle_counts(self):
        """Vehicles on the road at every recorded time."""
        return self.density.values.sum(axis=0) * self.scenario.dx


def simulate(sc):
    """March the scenario and return speed and density grids."""
    left = sc.boundary(sc.upstream)
    right = sc.boundary(sc.downstream)
    rho = kernels.godunov_march(
        sc.rho0, sc.T - 1, sc.dt / sc.dx, sc.v_f, sc.rho_m, sc.bc == PERIODIC, left, right
    )
    # rounding can leave tiny excursions outside [0, rho_m]
    rho = np.clip(rho, 0.0, sc.rho_m)
    speed = sc.v_f * (1.0 - rho / sc.rho_m)
    x0 = 0.5 * sc.dx
    return SimulationResult(
        GridField(speed, sc.dx, sc.dt, x0, 0.0),
        GridField(rho, sc.dx, sc.dt, x0, 0.0),
        sc,
    )


def default_scenario(M=21, T=600, length=630.0, v_f=DEFAULT_VF, rho_m=DEFAULT_RHO_M,
                     bc=DIRICHLET, cfl=0.9, seed=0):
    """Desk-scale stand-in for the freeway grid.

    Light inflow at the upstream end; the downstream ghost cell alternates
    between free flow and a jammed bottleneck, which launches congestion waves
    travelling upstream. ``seed`` jitters the bottleneck schedule. With
    periodic boundaries a smooth sinusoidal density bump circulates instead.
    """
    rng = np.random.default_rng(seed)
    x = (np.arange(M) + 0.5) / M
    if bc == PERIODIC:
        rho0 = rho_m * (0.5 + 0.3 * np.sin(2 * math.pi * x))
        return LwrScenario(rho0, length, T, 0.0, v_f, rho_m, PERIODIC, cfl=cfl)
    dt = cfl * (length / M) / v_f
    t = np.arange(T - 1) * dt
    horizon = (T - 1) * dt
    period = horizon / (2.5 + 0.5 * rng.random())
    phase = rng.random() * period
    jammed = ((t + phase) % period) < 0.45 * period
    downstream = np.where(jammed, 0.85 * rho_m, 0.15 * rho_m)
    upstream = rho_m * (0.3 + 0.1 * np.sin(2 * math.pi * t / (0.7 * horizon) + rng.random()))
    rho0 = np.full(M, 0.3 * rho_m)
    return LwrScenario(rho0, length, T, dt, v_f, rho_m, DIRICHLET, upstream, downstream, cfl)
