"""Fixed-step explicit Runge-Kutta integrators (orders 1, 4 and 8).

States may be a single vector of shape ``(d,)`` or a batch ``(n, d)``; the
right-hand side is expected to act on the last axis.  Stage sums are formed
term by term in a fixed order so a row of a batch is bitwise identical to the
same state integrated alone.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["Method", "SolverSpec", "BlowUpError", "rk_step", "integrate_interval", "BLOWUP_THRESHOLD"]

Rhs = Callable[[float, np.ndarray], np.ndarray]

BLOWUP_THRESHOLD = 1e12


class Method(enum.Enum):
    RK1 = "RK1"
    RK4 = "RK4"
    RK8 = "RK8"

    @property
    def order(self) -> int:
        return int(self.value[2:])


@dataclass(frozen=True)
class SolverSpec:
    method: Method
    steps_per_interval: int

    def __post_init__(self):
        if not isinstance(self.method, Method):
            object.__setattr__(self, "method", Method(str(self.method).upper()))
        if int(self.steps_per_interval) < 1:
            raise ValueError("steps_per_interval must be >= 1")
        object.__setattr__(self, "steps_per_interval", int(self.steps_per_interval))


class BlowUpError(ArithmeticError):
    """A state component became non-finite or exceeded ``BLOWUP_THRESHOLD``."""

    def __init__(self, t: float, index: int, row: int | None = None):
        self.t = t
        self.index = index
        self.row = row
        self.interval: int | None = None
        super().__init__(self._message())

    def _message(self) -> str:
        msg = f"integration blew up at t={self.t:.6g} in component {self.index}"
        if self.interval is not None:
            msg += f" (interval {self.interval})"
        return msg

    def attach_interval(self, interval: int) -> "BlowUpError":
        self.interval = interval
        self.args = (self._message(),)
        return self


# Butcher tableaux: (a rows, b, c).  a[i] holds the coefficients of stage i.
_RK4 = (
    [[], [0.5], [0.0, 0.5], [0.0, 0.0, 1.0]],
    [1 / 6, 1 / 3, 1 / 3, 1 / 6],
    [0.0, 0.5, 0.5, 1.0],
)

# Order-8 weights of the 12-stage Dormand-Prince pair (Hairer, Norsett & Wanner, DOP853).
_RK8_C = [
    0.0,
    0.526001519587677318785587544488e-01,
    0.789002279381515978178381316732e-01,
    0.118350341907227396726757197510,
    0.281649658092772603273242802490,
    0.333333333333333333333333333333,
    0.25,
    0.307692307692307692307692307692,
    0.651282051282051282051282051282,
    0.6,
    0.857142857142857142857142857142,
    1.0,
]
_RK8_A = [
    [],
    [5.26001519587677318785587544488e-2],
    [1.97250569845378994544595329183e-2, 5.91751709536136983633785987549e-2],
    [2.95875854768068491816892993775e-2, 0.0, 8.87627564304205475450678981324e-2],
    [2.41365134159266685502369798665e-1, 0.0, -8.84549479328286085344864962717e-1,
     9.24834003261792003115737966543e-1],
    [3.7037037037037037037037037037e-2, 0.0, 0.0, 1.70828608729473871279604482173e-1,
     1.25467687566822425016691814123e-1],
    [3.7109375e-2, 0.0, 0.0, 1.70252211019544039314978060272e-1,
     6.02165389804559606850219397283e-2, -1.7578125e-2],
    [3.70920001185047927108779319836e-2, 0.0, 0.0, 1.70383925712239993810214054705e-1,
     1.07262030446373284651809199168e-1, -1.53194377486244017527936158236e-2,
     8.27378916381402288758473766002e-3],
    [6.24110958716075717114429577812e-1, 0.0, 0.0, -3.36089262944694129406857109825,
     -8.68219346841726006818189891453e-1, 2.75920996994467083049415600797e1,
     2.01540675504778934086186788979e1, -4.34898841810699588477366255144e1],
    [4.77662536438264365890433908527e-1, 0.0, 0.0, -2.48811461997166764192642586468,
     -5.90290826836842996371446475743e-1, 2.12300514481811942347288949897e1,
     1.52792336328824235832596922938e1, -3.32882109689848629194453265587e1,
     -2.03312017085086261358222928593e-2],
    [-9.3714243008598732571704021658e-1, 0.0, 0.0, 5.18637242884406370830023853209,
     1.09143734899672957818500254654, -8.14978701074692612513997267357,
     -1.85200656599969598641566180701e1, 2.27394870993505042818970056734e1,
     2.49360555267965238987089396762, -3.0467644718982195003823669022],
    [2.27331014751653820792359768449, 0.0, 0.0, -1.05344954667372501984066689879e1,
     -2.00087205822486249909675718444, -1.79589318631187989172765950534e1,
     2.79488845294199600508499808837e1, -2.85899827713502369474065508674,
     -8.87285693353062954433549289258, 1.23605671757943030647266201528e1,
     6.43392746015763530355970484046e-1],
]
_RK8_B = [
    5.42937341165687622380535766363e-2, 0.0, 0.0, 0.0, 0.0,
    4.45031289275240888144113950566, 1.89151789931450038304281599044,
    -5.8012039600105847814672114227, 3.1116436695781989440891606237e-1,
    -1.52160949662516078556178806805e-1, 2.01365400804030348374776537501e-1,
    4.47106157277725905176885569043e-2,
]
_TABLEAUX = {Method.RK4: _RK4, Method.RK8: (_RK8_A, _RK8_B, _RK8_C)}


def _combine(u: np.ndarray, dt: float, coeffs, ks) -> np.ndarray:
    acc = None
    for a, k in zip(coeffs, ks):
        if a == 0.0:
            continue
        term = a * k
        acc = term if acc is None else acc + term
    return u if acc is None else u + dt * acc


def _check(u: np.ndarray, t) -> None:
    peak = np.max(np.abs(u))
    if not peak <= BLOWUP_THRESHOLD:
        bad = ~(np.abs(u) <= BLOWUP_THRESHOLD)
        flat = int(np.flatnonzero(bad.reshape(-1))[0])
        if u.ndim > 1:
            row, index = divmod(flat, u.shape[-1])
            t_row = np.ravel(t)[row] if np.ndim(t) else t
            raise BlowUpError(float(t_row), index, row)
        raise BlowUpError(float(np.ravel(t)[0]), flat)


def _step(rhs: Rhs, t: float, u: np.ndarray, dt: float, method: Method) -> np.ndarray:
    if method is Method.RK1:
        return u + dt * rhs(t, u)
    a, b, c = _TABLEAUX[method]
    ks = []
    for i in range(len(b)):
        ks.append(rhs(t + c[i] * dt, _combine(u, dt, a[i], ks)))
    return _combine(u, dt, b, ks)


def rk_step(rhs: Rhs, t: float, u, dt: float, method: Method | str) -> np.ndarray:
    """One explicit Runge-Kutta step of size ``dt`` from ``(t, u)``."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    method = Method(method) if not isinstance(method, Method) else method
    u_new = _step(rhs, t, np.asarray(u, dtype=np.float64), dt, method)
    _check(u_new, t + dt)
    return u_new


def integrate_interval(rhs: Rhs, t_start, t_end, u0, spec: SolverSpec) -> np.ndarray:
    """Advance ``u0`` from ``t_start`` to ``t_end`` with ``spec.steps_per_interval`` equal steps.

    For a batch ``u0`` of shape ``(n, d)`` the interval ends may be arrays of
    length ``n``; row ``r`` is then advanced over ``[t_start[r], t_end[r]]`` and
    ``rhs`` receives times as an ``(n, 1)`` array.
    """
    if np.ndim(t_start) or np.ndim(t_end):
        t_start = np.asarray(t_start, dtype=np.float64).reshape(-1, 1)
        t_end = np.asarray(t_end, dtype=np.float64).reshape(-1, 1)
    if not np.all(t_end > t_start):
        raise ValueError("t_end must exceed t_start")
    n = spec.steps_per_interval
    dt = (t_end - t_start) / n
    u = np.asarray(u0, dtype=np.float64)
    for j in range(n):
        t = t_start + j * dt
        u = _step(rhs, t, u, dt, spec.method)
        _check(u, t + dt)
    return u
