"""Method-of-lines right-hand sides for the test problems.

All states are packed coordinate-major: for two-species systems the ``u``
grid comes first (row-major), then the ``v`` grid.  Every ``*_rhs`` accepts a
single state ``(d,)`` or a batch ``(n, d)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "SystemDef",
    "LinearSpec",
    "BurgersSpec",
    "DiffusionReactionSpec",
    "BrusselatorSpec",
    "linear_rhs",
    "burgers_grid",
    "burgers_rhs",
    "burgers_initial",
    "diffusion_reaction_rhs",
    "diffusion_reaction_initial",
    "brusselator_rhs",
    "brusselator_initial",
    "RescaleMap",
    "fit_rescale_map",
    "make_system",
    "SYSTEM_NAMES",
]


@dataclass(frozen=True)
class SystemDef:
    name: str
    dim: int
    rhs: Callable[[float, np.ndarray], np.ndarray]
    u0: np.ndarray
    params: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# linear test ODE
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearSpec:
    """``u' = rate * u`` in ``d`` dimensions, ``u0 = (1, 2, ..., d)``."""

    d: int = 4
    rate: float = -1.0


def linear_rhs(spec: LinearSpec, t: float, u: np.ndarray) -> np.ndarray:
    return spec.rate * u


# --------------------------------------------------------------------------
# viscous Burgers
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BurgersSpec:
    d: int = 128
    half_width: float = 1.0
    nu: float = 0.01

    def __post_init__(self):
        if self.d < 3:
            raise ValueError("Burgers grid needs d >= 3")

    @property
    def dx(self) -> float:
        return 2.0 * self.half_width / self.d


def burgers_grid(spec: BurgersSpec) -> np.ndarray:
    # x_0 = -L, ..., x_{d-1} = L - dx; x_d = L is identified with x_0
    return -spec.half_width + spec.dx * np.arange(spec.d)


def burgers_rhs(spec: BurgersSpec, t: float, v: np.ndarray) -> np.ndarray:
    """``nu v_xx - v v_x`` with periodic second-order central differences."""
    dx = spec.dx
    right = np.roll(v, -1, axis=-1)
    left = np.roll(v, 1, axis=-1)
    v_xx = (right - 2.0 * v + left) / (dx * dx)
    v_x = (right - left) / (2.0 * dx)
    return spec.nu * v_xx - v * v_x


def burgers_initial(spec: BurgersSpec) -> np.ndarray:
    x = burgers_grid(spec)
    return 0.5 * (np.cos(4.5 * np.pi * x) + 1.0)


# --------------------------------------------------------------------------
# Diffusion-Reaction (FitzHugh-Nagumo), no-flux boundaries
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DiffusionReactionSpec:
    nx: int = 8
    ny: int = 8
    Du: float = 1e-3
    Dv: float = 5e-3
    c: float = 5e-3
    reactions: bool = True

    @property
    def dim(self) -> int:
        return 2 * self.nx * self.ny

    @property
    def dx(self) -> float:
        return 2.0 / self.nx

    @property
    def dy(self) -> float:
        return 2.0 / self.ny


def _neumann_laplacian_2d(f: np.ndarray, dx: float, dy: float) -> np.ndarray:
    # f has shape (..., ny, nx); ghost cells copy the boundary value
    xp = np.concatenate([f[..., :, 1:], f[..., :, -1:]], axis=-1)
    xm = np.concatenate([f[..., :, :1], f[..., :, :-1]], axis=-1)
    yp = np.concatenate([f[..., 1:, :], f[..., -1:, :]], axis=-2)
    ym = np.concatenate([f[..., :1, :], f[..., :-1, :]], axis=-2)
    return (xp - 2.0 * f + xm) / (dx * dx) + (yp - 2.0 * f + ym) / (dy * dy)


def diffusion_reaction_rhs(spec: DiffusionReactionSpec, t: float, state: np.ndarray) -> np.ndarray:
    n = spec.nx * spec.ny
    lead = state.shape[:-1]
    u = state[..., :n].reshape(*lead, spec.ny, spec.nx)
    v = state[..., n:].reshape(*lead, spec.ny, spec.nx)
    du = spec.Du * _neumann_laplacian_2d(u, spec.dx, spec.dy)
    dv = spec.Dv * _neumann_laplacian_2d(v, spec.dx, spec.dy)
    if spec.reactions:
        du = du + (u - u * u * u - spec.c - v)
        dv = dv + (u - v)
    return np.concatenate([du.reshape(*lead, n), dv.reshape(*lead, n)], axis=-1)


def diffusion_reaction_initial(spec: DiffusionReactionSpec, seed: int = 0) -> np.ndarray:
    """Independent standard-normal ``u`` and ``v`` cells, each from its own spawned stream."""
    su, sv = np.random.SeedSequence(seed).spawn(2)
    n = spec.nx * spec.ny
    u = np.random.default_rng(su).standard_normal(n)
    v = np.random.default_rng(sv).standard_normal(n)
    return np.concatenate([u, v])


# --------------------------------------------------------------------------
# Brusselator, periodic boundaries
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class BrusselatorSpec:
    spatial_dim: int = 2
    n_per_axis: int = 8
    D0: float = 0.1
    D1: float = 0.01
    a: float = 1.0
    b: float = 3.0

    def __post_init__(self):
        if self.spatial_dim not in (2, 3):
            raise ValueError("spatial_dim must be 2 or 3")

    @property
    def cells(self) -> int:
        return self.n_per_axis ** self.spatial_dim

    @property
    def dim(self) -> int:
        return 2 * self.cells

    @property
    def dx(self) -> float:
        return 2.0 / self.n_per_axis


def _periodic_laplacian(f: np.ndarray, ndim: int, dx: float) -> np.ndarray:
    out = -2.0 * ndim * f
    for axis in range(-ndim, 0):
        out = out + np.roll(f, 1, axis=axis) + np.roll(f, -1, axis=axis)
    return out / (dx * dx)


def brusselator_rhs(spec: BrusselatorSpec, t: float, state: np.ndarray) -> np.ndarray:
    n = spec.cells
    lead = state.shape[:-1]
    grid = (spec.n_per_axis,) * spec.spatial_dim
    u = state[..., :n].reshape(*lead, *grid)
    v = state[..., n:].reshape(*lead, *grid)
    uuv = u * u * v
    du = spec.D0 * _periodic_laplacian(u, spec.spatial_dim, spec.dx) + spec.a - (1.0 + spec.b) * u + uuv
    dv = spec.D1 * _periodic_laplacian(v, spec.spatial_dim, spec.dx) + spec.b * u - uuv
    return np.concatenate([du.reshape(*lead, n), dv.reshape(*lead, n)], axis=-1)


def brusselator_initial(spec: BrusselatorSpec, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.concatenate([np.full(spec.cells, spec.a), rng.standard_normal(spec.cells)])


# --------------------------------------------------------------------------
# rescaling to [-1, 1]
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RescaleMap:
    center: np.ndarray
    half_range: np.ndarray

    def rescale(self, x: np.ndarray) -> np.ndarray:
        return (x - self.center) / self.half_range

    def unrescale(self, y: np.ndarray) -> np.ndarray:
        return y * self.half_range + self.center

    def to_dict(self) -> dict:
        return {"center": self.center.tolist(), "half_range": self.half_range.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "RescaleMap":
        return cls(np.asarray(data["center"], dtype=np.float64), np.asarray(data["half_range"], dtype=np.float64))


def fit_rescale_map(trajectory, margin: float = 0.25, floor: float = 1e-8) -> RescaleMap:
    """Per-coordinate affine map sending the observed range into ``[-1/(1+margin), 1/(1+margin)]``."""
    traj = np.atleast_2d(np.asarray(trajectory, dtype=np.float64))
    if traj.shape[0] == 0:
        raise ValueError("trajectory is empty")
    lo, hi = traj.min(axis=0), traj.max(axis=0)
    center = 0.5 * (lo + hi)
    half = np.maximum((1.0 + margin) * 0.5 * (hi - lo), floor)
    return RescaleMap(center, half)


# --------------------------------------------------------------------------
# registry
# --------------------------------------------------------------------------

SYSTEM_NAMES = ("linear", "burgers", "diffusion_reaction", "brusselator2d", "brusselator3d")


def make_system(name: str, **params) -> SystemDef:
    """Build a ``SystemDef`` by name.

    Parameters are the fields of the matching ``*Spec`` plus ``ic_seed`` for the
    systems with random initial conditions.  Unknown parameters raise ``TypeError``.
    """
    params = dict(params)
    if name == "linear":
        spec = LinearSpec(**params)
        u0 = np.arange(1.0, spec.d + 1.0)
        return SystemDef(name, spec.d, lambda t, u: linear_rhs(spec, t, u), u0, params)
    if name == "burgers":
        spec = BurgersSpec(**params)
        return SystemDef(name, spec.d, lambda t, u: burgers_rhs(spec, t, u), burgers_initial(spec), params)
    if name == "diffusion_reaction":
        seed = int(params.pop("ic_seed", 0))
        spec = DiffusionReactionSpec(**params)
        u0 = diffusion_reaction_initial(spec, seed)
        return SystemDef(name, spec.dim, lambda t, u: diffusion_reaction_rhs(spec, t, u), u0,
                         {**params, "ic_seed": seed})
    if name in ("brusselator2d", "brusselator3d"):
        seed = int(params.pop("ic_seed", 0))
        spec = BrusselatorSpec(spatial_dim=int(name[-2]), **params)
        u0 = brusselator_initial(spec, seed)
        return SystemDef(name, spec.dim, lambda t, u: brusselator_rhs(spec, t, u), u0,
                         {**params, "ic_seed": seed})
    raise ValueError(f"unknown system {name!r}; expected one of {', '.join(SYSTEM_NAMES)}")
