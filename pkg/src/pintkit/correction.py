"""Correction models plugged into the predictor-corrector update.

Three models map a state ``U`` (in rescaled coordinates) to an estimate of
the fine-minus-coarse discrepancy at ``U``:

* ``LaggedCorrectionStore``: classic Parareal, reuses the discrepancy
  observed at the same interval one iteration earlier.
* ``NnGpModel``: one scalar Gaussian process per output coordinate, trained
  on the ``m`` nearest neighbours of the query.
* ``RandNetModel``: a ReLU random-feature network whose readout is fitted by
  min-norm least squares on the ``m`` nearest neighbours.
"""
from __future__ import annotations

import math

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .numerics import (
    NumericError,
    batched_cholesky,
    batched_forward_substitution,
    min_norm_least_squares,
)

__all__ = [
    "NoTrainingDataError",
    "SequencingError",
    "CorrectionDataset",
    "knn_query",
    "RandNetModel",
    "randnet_features",
    "randnet_correct",
    "gp_kernel",
    "gp_loglik",
    "gp_optimize_theta",
    "NnGpModel",
    "nngp_correct",
    "LaggedCorrectionStore",
    "lagged_correct",
    "prop1_decay_probe",
    "DEFAULT_THETA",
    "LOG_THETA_BOUND",
]

# hyperparameters are searched as log10 values in [-LOG_THETA_BOUND, LOG_THETA_BOUND]
LOG_THETA_BOUND = 8.0
DEFAULT_THETA = np.array([1.0, 1.0, 1e-7])

_NM_MAX_EVALS = 200
_NM_TOL = 1e-4
_HEURISTIC_LOG_NUGGET = -4.0
# initial simplex as in scipy's Nelder-Mead: 5% of each coordinate, 0.00025 for zeros
_NM_REL_STEP = 0.05
_NM_ZERO_STEP = 0.00025
# reassociation and fast exp/log, but keep inf/nan semantics for the failure checks
_FASTMATH = {"reassoc", "contract", "afn", "arcp", "nsz"}


class NoTrainingDataError(ValueError):
    pass


class SequencingError(RuntimeError):
    """The engine asked for a correction that its own bookkeeping cannot supply."""


# --------------------------------------------------------------------------
# dataset and neighbour search
# --------------------------------------------------------------------------

class CorrectionDataset:
    """Append-only store of ``(U, (F - G)(U))`` pairs tagged with ``(iteration, interval)``."""

    def __init__(self, dim: int, capacity: int = 64):
        self.dim = dim
        capacity = max(1, int(capacity))
        self._inputs = np.empty((capacity, dim))
        self._targets = np.empty((capacity, dim))
        self._keys: list[tuple[int, int]] = []
        self._seen: set[tuple[int, int]] = set()

    def __len__(self) -> int:
        return len(self._keys)

    @property
    def inputs(self) -> np.ndarray:
        return self._inputs[: len(self)]

    @property
    def targets(self) -> np.ndarray:
        return self._targets[: len(self)]

    @property
    def keys(self) -> list[tuple[int, int]]:
        return list(self._keys)

    def append(self, iteration: int, interval: int, u, discrepancy) -> None:
        key = (int(iteration), int(interval))
        if key in self._seen:
            raise ValueError(f"duplicate dataset key {key}")
        n = len(self)
        if n == self._inputs.shape[0]:
            self._inputs = np.concatenate([self._inputs, np.empty_like(self._inputs)])
            self._targets = np.concatenate([self._targets, np.empty_like(self._targets)])
        self._inputs[n] = u
        self._targets[n] = discrepancy
        self._keys.append(key)
        self._seen.add(key)

    @classmethod
    def from_arrays(cls, inputs, targets) -> "CorrectionDataset":
        inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
        ds = cls(inputs.shape[1], capacity=max(1, inputs.shape[0]))
        for i, (u, y) in enumerate(zip(inputs, targets)):
            ds.append(0, i, u, y)
        return ds


def knn_query(dataset: CorrectionDataset | np.ndarray, query, m: int) -> np.ndarray:
    """Indices of the ``min(m, n)`` nearest stored inputs, nearest first.

    Brute-force scan; equal distances keep insertion order.
    """
    inputs = dataset.inputs if isinstance(dataset, CorrectionDataset) else np.asarray(dataset)
    if len(inputs) == 0:
        raise NoTrainingDataError("no training data")
    if m < 1:
        raise ValueError("m must be at least 1")
    diff = inputs - np.asarray(query, dtype=np.float64)
    dist2 = np.einsum("ij,ij->i", diff, diff)
    order = np.argsort(dist2, kind="stable")
    return order[: min(m, len(order))]


# --------------------------------------------------------------------------
# RandNet
# --------------------------------------------------------------------------

@dataclass
class RandNetModel:
    """Random ReLU network ``W^T relu(A u + zeta)`` with ``A``, ``zeta`` drawn once."""

    A: np.ndarray
    zeta: np.ndarray
    m: int = 4
    seed: int | None = None
    rank_tol: float | None = None

    @property
    def M(self) -> int:
        return self.A.shape[0]

    @classmethod
    def create(cls, dim: int, M: int = 100, m: int = 4, seed: int = 0) -> "RandNetModel":
        rng = np.random.default_rng(seed)
        A = rng.uniform(-1.0, 1.0, size=(M, dim))
        zeta = rng.uniform(-1.0, 1.0, size=M)
        A.setflags(write=False)
        zeta.setflags(write=False)
        return cls(A=A, zeta=zeta, m=m, seed=seed)


def randnet_features(model: RandNetModel, inputs) -> np.ndarray:
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    if inputs.shape[1] != model.A.shape[1]:
        raise ValueError(f"inputs have {inputs.shape[1]} columns, network expects {model.A.shape[1]}")
    return np.maximum(inputs @ model.A.T + model.zeta, 0.0)


def randnet_correct(model: RandNetModel, dataset: CorrectionDataset, query) -> np.ndarray:
    """Refit the readout on the query's nearest neighbours and predict at the query."""
    idx = knn_query(dataset, query, model.m)
    X = randnet_features(model, dataset.inputs[idx])
    W = min_norm_least_squares(X, dataset.targets[idx], model.rank_tol)
    return randnet_features(model, query)[0] @ W


# --------------------------------------------------------------------------
# nearest-neighbour Gaussian process
# --------------------------------------------------------------------------

def gp_kernel(theta, U, Uprime) -> float:
    """Squared-exponential kernel ``sigma_o^2 exp(-|U - U'|^2 / sigma_in^2)``."""
    sigma_in2, sigma_o2 = float(theta[0]), float(theta[1])
    diff = np.asarray(U, dtype=np.float64) - np.asarray(Uprime, dtype=np.float64)
    return sigma_o2 * float(np.exp(-np.dot(diff, diff) / sigma_in2))


def _sqdist(X: np.ndarray, Z: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - Z[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


@numba.njit(cache=True, fastmath=_FASTMATH)
def _factor_kernel(log_theta, sqdist, regularized, L):
    """Lower Cholesky factor of ``K(theta) [+ s I]`` written into ``L``.

    Returns the first non-positive pivot, or -1 on success.
    """
    m = sqdist.shape[0]
    inv = -1.0 / 10.0 ** log_theta[0]
    so = 10.0 ** log_theta[1]
    sr = 10.0 ** log_theta[2] if regularized else 0.0
    for j in range(m):
        for i in range(j, m):
            v = so * math.exp(sqdist[i, j] * inv)
            if i == j:
                v += sr
            for k in range(j):
                v -= L[i, k] * L[j, k]
            if i == j:
                if not v > 0.0:
                    return j
                L[j, j] = math.sqrt(v)
            else:
                L[i, j] = v / L[j, j]
    return -1


@numba.njit(cache=True, fastmath=_FASTMATH)
def _forward(L, b, out):
    m = b.shape[0]
    for j in range(m):
        acc = b[j]
        for k in range(j):
            acc -= L[j, k] * out[k]
        out[j] = acc / L[j, j]


@numba.njit(cache=True, fastmath=_FASTMATH)
def _chol_terms(log_theta, sqdist, y, regularized, L, z):
    """Returns ``(quad, logdet, ok)`` for ``K(theta) [+ s I]`` and target ``y``."""
    if _factor_kernel(log_theta, sqdist, regularized, L) >= 0:
        return 0.0, 0.0, False
    _forward(L, y, z)
    quad = 0.0
    logdet = 0.0
    for j in range(y.shape[0]):
        quad += z[j] * z[j]
        logdet += 2.0 * math.log(L[j, j])
    return quad, logdet, True


@numba.njit(cache=True, fastmath=_FASTMATH)
def _posterior_kernel(log_theta, sqdist, qdist, Y):
    """Posterior means at one query for each column of ``Y`` (m, d).

    Returns ``(mean, failed_pivot)`` with ``failed_pivot[s] = -1`` on success.
    """
    m, d = Y.shape
    mean = np.zeros(d)
    failed = np.full(d, -1, dtype=np.int64)
    L = np.empty((m, m))
    z = np.empty(m)
    w = np.empty(m)
    kq = np.empty(m)
    for s in range(d):
        piv = _factor_kernel(log_theta[s], sqdist, True, L)
        if piv >= 0:
            failed[s] = piv
            continue
        inv = -1.0 / 10.0 ** log_theta[s, 0]
        so = 10.0 ** log_theta[s, 1]
        for i in range(m):
            kq[i] = so * math.exp(qdist[i] * inv)
        # k_q^T (L L^T)^{-1} y = (L^{-1} k_q) . (L^{-1} y)
        _forward(L, Y[:, s].copy(), z)
        _forward(L, kq, w)
        acc = 0.0
        for i in range(m):
            acc += w[i] * z[i]
        mean[s] = acc
    return mean, failed


@numba.njit(cache=True, fastmath=_FASTMATH)
def _loglik_kernel(log_theta, sqdist, Y, verbatim):
    B, m = Y.shape
    ll = np.empty(B)
    fallback = np.zeros(B, dtype=np.bool_)
    L = np.empty((m, m))
    z = np.empty(m)
    for b in range(B):
        quad, logdet, ok = _chol_terms(log_theta[b], sqdist, Y[b], True, L, z)
        if not ok:
            ll[b] = -np.inf
            continue
        if verbatim:
            _, logdet_k, ok_k = _chol_terms(log_theta[b], sqdist, Y[b], False, L, z)
            if ok_k:
                logdet = logdet_k
            else:
                fallback[b] = True
        val = -quad - logdet
        ll[b] = val if math.isfinite(val) else -np.inf
    return ll, fallback


def _loglik_batch(
    log_theta: np.ndarray, sqdist: np.ndarray, Y: np.ndarray, logdet: str
) -> tuple[np.ndarray, np.ndarray]:
    """Log-likelihood for a stack of (theta, target) pairs sharing one input set.

    ``log_theta`` is (B, 3), ``Y`` is (B, m).  Returns ``(ll, fallback)`` where
    ``ll`` is ``-inf`` when the regularized kernel is not positive definite and
    ``fallback`` marks members whose unregularized log-determinant had to be
    replaced by the regularized one.
    """
    return _loglik_kernel(
        np.ascontiguousarray(log_theta, dtype=np.float64),
        np.ascontiguousarray(sqdist, dtype=np.float64),
        np.ascontiguousarray(Y, dtype=np.float64),
        logdet == "verbatim",
    )


def gp_loglik(theta, inputs, targets, logdet: str = "regularized") -> float:
    """Marginal log-likelihood, up to additive and positive multiplicative constants.

    ``-y^T (K + sigma_reg^2 I)^{-1} y - log det(K_*)`` where ``K_*`` is the
    regularized kernel by default.  With ``logdet="verbatim"`` the
    log-determinant of the unregularized kernel is used, falling back to the
    regularized one when the unregularized factorization fails.

    Raises
    ------
    NumericError
        If the regularized kernel matrix is not positive definite.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.float64).reshape(1, -1)
    theta = np.asarray(theta, dtype=np.float64)
    if np.any(theta[:2] <= 0) or theta[2] < 0:
        raise ValueError("theta components must be positive")
    sq = _sqdist(inputs, inputs)
    m = sq.shape[0]
    K = theta[1] * np.exp(-sq / theta[0])
    Lr, fail = batched_cholesky(K + theta[2] * np.eye(m))
    if fail >= 0:
        raise NumericError(f"regularized kernel is not positive definite (pivot {int(fail)})", K.shape)
    z = batched_forward_substitution(Lr, targets[0])
    logdet_val = 2.0 * np.sum(np.log(np.diag(Lr)))
    if logdet == "verbatim":
        Lk, fail_k = batched_cholesky(K)
        if fail_k < 0:
            logdet_val = 2.0 * np.sum(np.log(np.diag(Lk)))
    return float(-np.dot(z, z) - logdet_val)


@numba.njit(cache=True, fastmath=_FASTMATH)
def _nm_objective(x, sqdist, y, verbatim, L, z):
    quad, logdet, ok = _chol_terms(x, sqdist, y, True, L, z)
    if not ok:
        return np.inf
    if verbatim:
        _, logdet_k, ok_k = _chol_terms(x, sqdist, y, False, L, z)
        if ok_k:
            logdet = logdet_k
    val = quad + logdet
    return val if math.isfinite(val) else np.inf


@numba.njit(cache=True, fastmath=_FASTMATH)
def _nelder_mead_kernel(starts, sqdist, Y, verbatim, lower, upper, max_evals, tol, rel_step, zero_step):
    """Minimize the negative log-likelihood of ``Y[b]`` from ``starts[b]`` for every row b.

    Standard reflection/expansion/contraction/shrink moves with candidates
    clipped into ``[lower, upper]``.  A problem stops after ``max_evals``
    evaluations or once both the simplex diameter and the spread of objective
    values are within ``tol``.
    """
    B, n = starts.shape
    m = sqdist.shape[0]
    L = np.empty((m, m))
    z = np.empty(m)
    best_x = np.empty((B, n))
    best_f = np.empty(B)
    sim = np.empty((n + 1, n))
    fs = np.empty(n + 1)
    cen = np.empty(n)
    xr = np.empty(n)
    xc = np.empty(n)
    for b in range(B):
        y = Y[b]
        for j in range(n + 1):
            for c in range(n):
                v = starts[b, c]
                if j == c + 1:
                    v = (1.0 + rel_step) * v if v != 0.0 else zero_step
                sim[j, c] = min(max(v, lower), upper)
            fs[j] = _nm_objective(sim[j], sqdist, y, verbatim, L, z)
        nfev = n + 1
        while True:
            order = np.argsort(fs, kind="mergesort")
            sim[:] = sim[order]
            fs[:] = fs[order]
            xspread = 0.0
            fspread = 0.0
            for j in range(1, n + 1):
                fspread = max(fspread, abs(fs[j] - fs[0]))
                for c in range(n):
                    xspread = max(xspread, abs(sim[j, c] - sim[0, c]))
            if nfev >= max_evals or not math.isfinite(fs[0]) or (xspread <= tol and fspread <= tol):
                break
            for c in range(n):
                acc = 0.0
                for j in range(n):
                    acc += sim[j, c]
                cen[c] = acc / n
                xr[c] = min(max(2.0 * cen[c] - sim[n, c], lower), upper)
            fr = _nm_objective(xr, sqdist, y, verbatim, L, z)
            nfev += 1
            f0, fsecond, fworst = fs[0], fs[n - 1], fs[n]
            if fr >= f0 and fr < fsecond:
                sim[n] = xr
                fs[n] = fr
                continue
            if fr < f0:
                coef = 2.0
                base = sim[n]
            elif fr < fworst:
                coef = 0.5
                base = xr
            else:
                coef = 0.5
                base = sim[n]
            for c in range(n):
                if fr < f0:
                    v = cen[c] + coef * (cen[c] - base[c])
                else:
                    v = cen[c] + coef * (base[c] - cen[c])
                xc[c] = min(max(v, lower), upper)
            fc = _nm_objective(xc, sqdist, y, verbatim, L, z)
            nfev += 1
            if fr < f0:
                if fc < fr:
                    sim[n] = xc
                    fs[n] = fc
                else:
                    sim[n] = xr
                    fs[n] = fr
            elif (fr < fworst and fc <= fr) or (fr >= fworst and fc < fworst):
                sim[n] = xc
                fs[n] = fc
            else:
                for j in range(1, n + 1):
                    for c in range(n):
                        sim[j, c] = sim[0, c] + 0.5 * (sim[j, c] - sim[0, c])
                    fs[j] = _nm_objective(sim[j], sqdist, y, verbatim, L, z)
                nfev += n
        best_x[b] = sim[0]
        best_f[b] = fs[0]
    return best_x, best_f


@dataclass
class _ThetaFit:
    log_theta: np.ndarray      # (d, 3)
    loglik: np.ndarray         # (d,)
    start_loglik: np.ndarray   # (d, n_start)
    failed: np.ndarray         # (d,) all restarts failed, default used
    logdet_fallback: np.ndarray  # (d,)


def _optimize_theta_batch(
    inputs: np.ndarray, Y: np.ndarray, n_start: int, rng: np.random.Generator, logdet: str
) -> _ThetaFit:
    """Fit one theta per column of ``Y`` (m, d) by multi-start Nelder-Mead."""
    m, d = Y.shape
    sq = _sqdist(inputs, inputs)
    targets = np.repeat(Y.T, n_start, axis=0)  # problem b -> column b // n_start
    starts = rng.uniform(-LOG_THETA_BOUND, LOG_THETA_BOUND, size=(d * n_start, 3))
    # first restart of each output: median-distance length scale, unit signal, small nugget
    off = sq[np.triu_indices(m, 1)]
    off = off[off > 0]
    scale = np.log10(np.median(off)) if off.size else 0.0
    starts[::n_start] = np.clip([scale, 0.0, _HEURISTIC_LOG_NUGGET], -LOG_THETA_BOUND, LOG_THETA_BOUND)

    start_ll, _ = _loglik_batch(starts, sq, targets, logdet)
    best_x, best_f = _nelder_mead_kernel(
        starts, np.ascontiguousarray(sq), np.ascontiguousarray(targets), logdet == "verbatim",
        -LOG_THETA_BOUND, LOG_THETA_BOUND, _NM_MAX_EVALS, _NM_TOL, _NM_REL_STEP, _NM_ZERO_STEP,
    )
    best_f = best_f.reshape(d, n_start)
    pick = np.argmin(best_f, axis=1)
    log_theta = best_x.reshape(d, n_start, 3)[np.arange(d), pick]
    loglik = -best_f[np.arange(d), pick]
    failed = ~np.isfinite(loglik)
    if failed.any():
        log_theta[failed] = np.log10(DEFAULT_THETA)
        loglik[failed] = -np.inf
    _, fb = _loglik_batch(log_theta, sq, Y.T, logdet)
    return _ThetaFit(log_theta, loglik, start_ll.reshape(d, n_start), failed, fb)


def gp_optimize_theta(inputs, targets, n_start: int = 10, seed: int = 0, logdet: str = "regularized") -> np.ndarray:
    """Maximize the GP log-likelihood over log10-theta in ``[-8, 8]^3`` from ``n_start`` starts.

    The first start is placed at the median pairwise squared distance, unit
    signal variance and a nugget of 1e-4; the others are uniform in the box.

    Returns theta on the natural scale ``(sigma_in^2, sigma_o^2, sigma_reg^2)``.
    Falls back to ``DEFAULT_THETA`` (with a ``RuntimeWarning``) if every restart
    fails numerically.
    """
    if n_start < 1:
        raise ValueError("n_start must be at least 1")
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.float64).reshape(-1, 1)
    fit = _optimize_theta_batch(inputs, targets, n_start, np.random.default_rng(seed), logdet)
    if fit.failed[0]:
        warnings.warn("all GP restarts failed; using default theta", RuntimeWarning, stacklevel=2)
    return 10.0 ** fit.log_theta[0]


@dataclass
class NnGpModel:
    """Per-coordinate nearest-neighbour GP.

    ``theta`` pins the hyperparameters (natural scale, shape (3,) or (d, 3));
    when ``None`` they are re-optimized for every prediction.  With
    ``standardize`` each output's neighbour targets are centred and scaled to
    unit variance before fitting, which keeps small discrepancies clear of the
    lower bound on the nugget.
    """

    m: int = 20
    n_start: int = 10
    seed: int = 0
    theta: np.ndarray | None = None
    logdet: str = "regularized"
    standardize: bool = True
    diagnostics: dict = field(init=False, repr=False)

    def __post_init__(self):
        self.diagnostics = {"predictions": 0, "theta_fallbacks": 0, "logdet_fallbacks": 0,
                            "last_log_theta": None}


def nngp_correct(model: NnGpModel, dataset: CorrectionDataset, query) -> np.ndarray:
    """Posterior mean of the ``d`` scalar GPs conditioned on the query's nearest neighbours."""
    query = np.asarray(query, dtype=np.float64)
    idx = knn_query(dataset, query, model.m)
    X = dataset.inputs[idx]
    Y = dataset.targets[idx]
    m, d = Y.shape
    if model.standardize:
        shift = Y.mean(axis=0)
        scale = Y.std(axis=0)
        scale = np.where(scale > 0.0, scale, 1.0)
    else:
        shift, scale = np.zeros(d), np.ones(d)
    Y = (Y - shift) / scale
    if model.theta is None:
        # same restart points for every prediction, so the fitted theta varies
        # smoothly with the data rather than with the draw
        fit = _optimize_theta_batch(X, Y, model.n_start, np.random.default_rng(model.seed), model.logdet)
        log_theta = fit.log_theta
        model.diagnostics["theta_fallbacks"] += int(fit.failed.sum())
        model.diagnostics["logdet_fallbacks"] += int(fit.logdet_fallback.sum())
    else:
        with np.errstate(divide="ignore"):
            log_theta = np.log10(np.broadcast_to(np.asarray(model.theta, dtype=np.float64), (d, 3)))
    model.diagnostics["predictions"] += 1
    model.diagnostics["last_log_theta"] = log_theta.tolist()

    mean, failed = _posterior_kernel(
        np.ascontiguousarray(log_theta), _sqdist(X, X), _sqdist(X, query[None])[:, 0], np.ascontiguousarray(Y)
    )
    if np.any(failed >= 0):
        s = int(np.flatnonzero(failed >= 0)[0])
        raise NumericError(f"kernel for output {s} is not positive definite (pivot {int(failed[s])})", (m, m))
    return mean * scale + shift


# --------------------------------------------------------------------------
# classic Parareal
# --------------------------------------------------------------------------

class LaggedCorrectionStore:
    """Discrepancies from the previous iteration, keyed by interval."""

    def __init__(self):
        self._store: dict[int, np.ndarray] = {}

    def set(self, interval: int, discrepancy) -> None:
        self._store[int(interval)] = np.asarray(discrepancy, dtype=np.float64)

    def discard(self, interval: int) -> None:
        self._store.pop(int(interval), None)

    def __contains__(self, interval: int) -> bool:
        return int(interval) in self._store


def lagged_correct(store: LaggedCorrectionStore, interval: int) -> np.ndarray:
    try:
        return store._store[int(interval)]
    except KeyError:
        raise SequencingError(f"no lagged discrepancy recorded for interval {interval}") from None


# --------------------------------------------------------------------------
# approximation-rate probe
# --------------------------------------------------------------------------

def prop1_decay_probe(
    target: Callable[[np.ndarray], np.ndarray],
    M_list: Sequence[int],
    n_train: int,
    seed: int,
    dim: int = 1,
    n_test: int = 2000,
) -> list[tuple[int, float]]:
    """Held-out mean-squared error of min-norm RandNet fits for each width in ``M_list``.

    Training and test inputs are uniform on ``[-1, 1]^dim``; ``target`` maps an
    (n, dim) array to (n,) values.
    """
    rng = np.random.default_rng(seed)
    x_train = rng.uniform(-1.0, 1.0, size=(n_train, dim))
    x_test = rng.uniform(-1.0, 1.0, size=(n_test, dim))
    y_train = np.asarray(target(x_train), dtype=np.float64).reshape(n_train)
    y_test = np.asarray(target(x_test), dtype=np.float64).reshape(n_test)
    out = []
    for M in M_list:
        net = RandNetModel.create(dim, M=M, m=n_train, seed=int(rng.integers(2**63)))
        W = min_norm_least_squares(randnet_features(net, x_train), y_train)
        err = randnet_features(net, x_test) @ W - y_test
        out.append((int(M), float(np.mean(err**2))))
    return out
