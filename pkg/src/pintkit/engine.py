"""Parallel-in-time driver.

``run_pint`` runs the predictor-corrector iteration

    U_i^k = G(U_{i-1}^k) + fhat(U_{i-1}^k)

with a pluggable correction ``fhat``, locking the leading block of intervals
whose update fell below ``epsilon`` in the infinity norm.  All iteration
states live in rescaled coordinates; reports carry unrescaled final states.

Timing model
------------
Fine propagations over the unconverged intervals are executed as batched
integrations split into ``thread_count`` contiguous chunks.  The per-interval
fine time recorded for the cost model is the chunk wall time divided by the
chunk size.  ``model_parallel_time`` turns the recorded trace into the time an
ideal machine with one core per interval would need.
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Iterable, Sequence

import numpy as np

from .correction import (
    CorrectionDataset,
    LaggedCorrectionStore,
    NnGpModel,
    RandNetModel,
    lagged_correct,
    nngp_correct,
    randnet_correct,
)
from .integrators import BlowUpError, Method, SolverSpec, integrate_interval
from .numerics import infinity_norm
from .systems import SystemDef, fit_rescale_map, make_system

__all__ = [
    "CorrectionSpec",
    "PintConfig",
    "FineReference",
    "CostReport",
    "IterationRecord",
    "RunReport",
    "sequential_fine",
    "run_pint",
    "compute_accuracy",
    "parallel_speedup",
    "model_parallel_time",
    "cost_model_curves",
    "robustness_sweep",
    "MODEL_NAMES",
    "TIMING_KEYS",
]

MODEL_NAMES = ("parareal", "nngp", "randnet")
_DEFAULT_M_NEIGHBOURS = {"nngp": 20, "randnet": 4}

# report fields that legitimately differ between otherwise identical runs
TIMING_KEYS = frozenset({
    "fine_ms", "coarse_ms", "model_ms", "fine_wall_ms", "coarse_total_ms", "model_total_ms",
    "T_G_per_interval", "T_F_per_interval_mean", "T_F_per_interval_max", "T_model_total",
    "T_alg_measured", "T_alg_modeled", "S_alg_modeled", "wall_seconds", "thread_count", "final_fine_ms",
})


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

@dataclass
class CorrectionSpec:
    model: str = "randnet"
    m: int | None = None
    M: int = 100
    n_start: int = 10
    logdet: str = "regularized"

    def __post_init__(self):
        if self.model not in MODEL_NAMES:
            raise ValueError(f"unknown correction model {self.model!r}; expected one of {', '.join(MODEL_NAMES)}")
        if self.m is None:
            self.m = _DEFAULT_M_NEIGHBOURS.get(self.model, 1)
        if self.m < 1 or self.M < 1 or self.n_start < 1:
            raise ValueError("m, M and n_start must be positive")
        if self.logdet not in ("regularized", "verbatim"):
            raise ValueError("logdet must be 'regularized' or 'verbatim'")


@dataclass
class PintConfig:
    system: str
    N: int
    t0: float
    tN: float
    fine: SolverSpec
    coarse: SolverSpec
    system_params: dict = field(default_factory=dict)
    epsilon: float = 5e-7
    correction: CorrectionSpec = field(default_factory=CorrectionSpec)
    seed: int = 0
    thread_count: int = 1
    max_wall_seconds: float = 48 * 3600.0
    rescale_margin: float = 0.25

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be at least 2")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if not self.t0 < self.tN:
            raise ValueError("t0 must be smaller than tN")
        if self.thread_count < 1:
            raise ValueError("thread_count must be positive")

    def boundaries(self) -> np.ndarray:
        h = (self.tN - self.t0) / self.N
        return self.t0 + h * np.arange(self.N + 1)

    def build_system(self) -> SystemDef:
        return make_system(self.system, **self.system_params)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fine"] = {"method": self.fine.method.value, "steps": self.fine.steps_per_interval}
        d["coarse"] = {"method": self.coarse.method.value, "steps": self.coarse.steps_per_interval}
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "PintConfig":
        data = dict(data)
        for key in ("fine", "coarse"):
            s = data[key]
            data[key] = SolverSpec(Method(s["method"]), s["steps"])
        data["correction"] = CorrectionSpec(**data["correction"])
        data["system_params"] = dict(data.get("system_params", {}))
        return cls(**data)

    def replace(self, **changes) -> "PintConfig":
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d.update(changes)
        return PintConfig(**d)


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

@dataclass
class CostReport:
    T_G_per_interval: float = 0.0
    T_F_per_interval_mean: float = 0.0
    T_F_per_interval_max: float = 0.0
    T_model_total: float = 0.0
    K: int = 0
    T_alg_measured: float = 0.0
    T_alg_modeled: float = 0.0
    S_alg_modeled: float = 0.0
    accuracy_vs_fine: float | None = None


@dataclass
class IterationRecord:
    k: int
    L_start: int
    L_end: int
    intervals: list[int]
    update_inf_norm: dict[str, float]
    fine_ms: dict[str, float]
    coarse_ms: dict[str, float]
    model_ms: dict[str, float]
    fine_wall_ms: float
    coarse_total_ms: float
    model_total_ms: float
    dataset_size: int
    final_fine_ms: float = 0.0


@dataclass
class RunReport:
    config: dict
    status: str
    message: str
    K: int
    converged_prefix: int
    iterations: list[IterationRecord]
    final_states: list[list[float]]
    rescale: dict
    cost: CostReport
    diagnostics: dict
    history: dict | None = None

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def states(self) -> np.ndarray:
        return np.asarray(self.final_states, dtype=np.float64)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunReport":
        data = dict(data)
        data["iterations"] = [IterationRecord(**it) for it in data["iterations"]]
        data["cost"] = CostReport(**data["cost"])
        return cls(**data)


@dataclass
class FineReference:
    states: np.ndarray
    interval_seconds: list[float]
    total_seconds: float


# --------------------------------------------------------------------------
# serial reference
# --------------------------------------------------------------------------

def sequential_fine(config: PintConfig, system: SystemDef | None = None) -> FineReference:
    """Run the fine solver across all intervals one after another."""
    system = system or config.build_system()
    t = config.boundaries()
    states = np.empty((config.N + 1, system.dim))
    states[0] = system.u0
    per = []
    start = time.perf_counter()
    for i in range(1, config.N + 1):
        t_i = time.perf_counter()
        try:
            states[i] = integrate_interval(system.rhs, t[i - 1], t[i], states[i - 1], config.fine)
        except BlowUpError as exc:
            raise exc.attach_interval(i)
        per.append(time.perf_counter() - t_i)
    return FineReference(states, per, time.perf_counter() - start)


# --------------------------------------------------------------------------
# cost accounting
# --------------------------------------------------------------------------

def parallel_speedup(N: int, T_F: float, T_alg: float) -> float:
    """``N * T_F / T_alg``: serial fine cost over parallel algorithm cost."""
    return N * T_F / T_alg


def model_parallel_time(
    N: int,
    T_G: float,
    T_F: float,
    fine_max: Sequence[float],
    L_start: Sequence[int],
    model_time: Sequence[float],
) -> tuple[float, float]:
    """Modeled runtime and speedup on an ideal machine with one core per interval.

    ``T_alg = N T_G + sum_k [fine_max_k + (N - L_k) T_G + model_time_k]`` where
    ``L_k`` is the converged prefix at the start of iteration ``k``.
    """
    t_alg = N * T_G
    for f, L, m in zip(fine_max, L_start, model_time, strict=True):
        t_alg += f + (N - L) * T_G + m
    if t_alg <= 0:
        return 0.0, float("inf")
    return t_alg, parallel_speedup(N, T_F, t_alg)


def _finalize_cost(report: RunReport, N: int, T_G: float, wall: float) -> None:
    its = report.iterations
    fine_vals = [v for it in its for v in it.fine_ms.values()]
    T_F_mean = float(np.mean(fine_vals)) / 1e3 if fine_vals else 0.0
    T_F_max = float(np.max(fine_vals)) / 1e3 if fine_vals else 0.0
    fine_max = [(max(it.fine_ms.values(), default=0.0) + it.final_fine_ms) / 1e3 for it in its]
    model = [it.model_total_ms / 1e3 for it in its]
    t_alg, s_alg = model_parallel_time(N, T_G, T_F_mean, fine_max, [it.L_start for it in its], model)
    report.cost = CostReport(
        T_G_per_interval=T_G,
        T_F_per_interval_mean=T_F_mean,
        T_F_per_interval_max=T_F_max,
        T_model_total=float(sum(model)),
        K=report.K,
        T_alg_measured=wall,
        T_alg_modeled=t_alg,
        S_alg_modeled=s_alg,
        accuracy_vs_fine=report.cost.accuracy_vs_fine,
    )


def compute_accuracy(report: RunReport, fine_reference: FineReference | np.ndarray) -> float:
    """Mean over boundaries ``i = 1..N`` of the max-abs error against the serial fine solution."""
    ref = fine_reference.states if isinstance(fine_reference, FineReference) else np.asarray(fine_reference)
    states = report.states()
    if states.shape != ref.shape:
        raise ValueError(f"report states {states.shape} do not match reference {ref.shape}")
    return float(np.mean(np.max(np.abs(states[1:] - ref[1:]), axis=1)))


# --------------------------------------------------------------------------
# the iteration
# --------------------------------------------------------------------------

class _BudgetExhausted(Exception):
    pass


class _Propagator:
    """Coarse/fine maps in rescaled coordinates, with timing."""

    def __init__(self, system: SystemDef, config: PintConfig, rmap, pool: ThreadPoolExecutor | None):
        self.rhs = system.rhs
        self.t = config.boundaries()
        self.fine_spec = config.fine
        self.coarse_spec = config.coarse
        self.rmap = rmap
        self.pool = pool
        self.threads = config.thread_count

    def coarse(self, i: int, U: np.ndarray) -> np.ndarray:
        u = self.rmap.unrescale(U)
        try:
            out = integrate_interval(self.rhs, self.t[i - 1], self.t[i], u, self.coarse_spec)
        except BlowUpError as exc:
            raise exc.attach_interval(i)
        return self.rmap.rescale(out)

    def _fine_chunk(self, intervals: np.ndarray, U_in: np.ndarray) -> tuple[np.ndarray, float]:
        start = time.perf_counter()
        u = self.rmap.unrescale(U_in)
        try:
            out = integrate_interval(self.rhs, self.t[intervals - 1], self.t[intervals], u, self.fine_spec)
        except BlowUpError as exc:
            raise exc.attach_interval(int(intervals[exc.row or 0]))
        return self.rmap.rescale(out), time.perf_counter() - start

    def fine_many(self, intervals: np.ndarray, U_in: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Fine propagation of ``U_in[r]`` over interval ``intervals[r]``; returns results and per-interval seconds."""
        chunks = [c for c in np.array_split(np.arange(len(intervals)), min(self.threads, len(intervals))) if len(c)]
        out = np.empty_like(U_in)
        secs = np.empty(len(intervals))
        if self.pool is None or len(chunks) == 1:
            results = [self._fine_chunk(intervals[c], U_in[c]) for c in chunks]
        else:
            futures = [self.pool.submit(self._fine_chunk, intervals[c], U_in[c]) for c in chunks]
            results = [f.result() for f in futures]
        for c, (vals, dt) in zip(chunks, results):
            out[c] = vals
            secs[c] = dt / len(c)
        return out, secs


def _make_corrector(config: PintConfig, dim: int):
    spec = config.correction
    if spec.model == "parareal":
        return LaggedCorrectionStore()
    if spec.model == "randnet":
        return RandNetModel.create(dim, M=spec.M, m=spec.m, seed=config.seed)
    return NnGpModel(m=spec.m, n_start=spec.n_start, seed=config.seed, logdet=spec.logdet)


def run_pint(config: PintConfig, keep_history: bool = True) -> RunReport:
    """Solve the configured problem with the predictor-corrector iteration.

    The first unconverged interval ``L+1`` always receives the discrepancy
    observed at its locked input during the current fine sweep, so its new
    value is the fine solution itself and it locks at once.  At least one
    interval locks per iteration, which bounds the iteration count by ``N``
    for every correction model.
    """
    wall_start = time.perf_counter()
    deadline = wall_start + config.max_wall_seconds
    system = config.build_system()
    N, d, eps = config.N, system.dim, config.epsilon
    t = config.boundaries()
    report = RunReport(config=config.to_dict(), status="running", message="", K=0, converged_prefix=0,
                       iterations=[], final_states=[], rescale={}, cost=CostReport(), diagnostics={},
                       history={"states": [], "coarse": [], "corrections": []} if keep_history else None)
    coarse_secs: list[float] = []
    pool = ThreadPoolExecutor(config.thread_count) if config.thread_count > 1 else None
    U = None
    rmap = None

    def check_budget():
        if time.perf_counter() > deadline:
            raise _BudgetExhausted

    try:
        # preliminary coarse sweep in problem coordinates fixes the rescaling
        raw = [np.asarray(system.u0, dtype=np.float64)]
        for i in range(1, N + 1):
            try:
                raw.append(integrate_interval(system.rhs, t[i - 1], t[i], raw[-1], config.coarse))
            except BlowUpError as exc:
                raise exc.attach_interval(i)
        rmap = fit_rescale_map(np.array(raw), config.rescale_margin)
        report.rescale = rmap.to_dict()
        prop = _Propagator(system, config, rmap, pool)

        U = np.empty((N + 1, d))
        U[0] = rmap.rescale(raw[0])
        G_cur = np.empty((N + 1, d))  # G_cur[i] = G(U[i-1]) for the current U
        for i in range(1, N + 1):
            t_i = time.perf_counter()
            G_cur[i] = prop.coarse(i, U[i - 1])
            coarse_secs.append(time.perf_counter() - t_i)
            U[i] = G_cur[i]
        if report.history is not None:
            report.history["states"].append(U.tolist())

        model = _make_corrector(config, d)
        dataset = CorrectionDataset(d, capacity=N * 4)
        L = 0
        for k in range(1, N + 1):
            check_budget()
            active = np.arange(L + 1, N + 1)
            t_f = time.perf_counter()
            F_vals, F_secs = prop.fine_many(active, U[active - 1])
            fine_wall = time.perf_counter() - t_f
            disc = {}
            for r, i in enumerate(active):
                disc[int(i)] = F_vals[r] - G_cur[i]
                dataset.append(k - 1, int(i), U[i - 1], disc[int(i)])
                if isinstance(model, LaggedCorrectionStore):
                    model.set(int(i), disc[int(i)])
            check_budget()

            U_new = U.copy()
            G_new = G_cur.copy()
            coarse_ms: dict[str, float] = {}
            model_ms: dict[str, float] = {}
            hist_g = {}
            hist_f = {}
            for i in range(L + 1, N + 1):
                if i == L + 1:
                    # input U[L] is locked: G(U[L]) is unchanged and its discrepancy was just observed
                    g, fhat = G_cur[i], disc[i]
                    coarse_ms[str(i)] = 0.0
                    model_ms[str(i)] = 0.0
                else:
                    t_c = time.perf_counter()
                    g = prop.coarse(i, U_new[i - 1])
                    dt_c = time.perf_counter() - t_c
                    coarse_secs.append(dt_c)
                    coarse_ms[str(i)] = dt_c * 1e3
                    G_new[i] = g
                    if i == N:
                        break
                    t_m = time.perf_counter()
                    if isinstance(model, LaggedCorrectionStore):
                        fhat = lagged_correct(model, i)
                    elif isinstance(model, RandNetModel):
                        fhat = randnet_correct(model, dataset, U_new[i - 1])
                    else:
                        fhat = nngp_correct(model, dataset, U_new[i - 1])
                    model_ms[str(i)] = (time.perf_counter() - t_m) * 1e3
                    check_budget()
                U_new[i] = g + fhat
                hist_g[str(i)] = g.tolist()
                hist_f[str(i)] = np.asarray(fhat).tolist()
            U_new[N] = F_vals[-1]
            U_prev_last = U[N - 1]

            norms = {str(i): infinity_norm(U_new[i] - U[i]) for i in range(L + 1, N)}
            # interval L+1 now holds the fine solution from a locked state and can
            # no longer change, so it locks regardless of its update size
            L_new = L + 1
            for i in range(L + 2, N):
                if norms[str(i)] < eps:
                    L_new = i
                else:
                    break
            report.iterations.append(IterationRecord(
                k=k, L_start=L, L_end=L_new, intervals=[int(i) for i in active],
                update_inf_norm=norms,
                fine_ms={str(int(i)): float(s * 1e3) for i, s in zip(active, F_secs)},
                coarse_ms=coarse_ms, model_ms=model_ms,
                fine_wall_ms=fine_wall * 1e3,
                coarse_total_ms=float(sum(coarse_ms.values())),
                model_total_ms=float(sum(model_ms.values())),
                dataset_size=len(dataset),
            ))
            if report.history is not None:
                report.history["states"].append(U_new.tolist())
                report.history["coarse"].append(hist_g)
                report.history["corrections"].append(hist_f)
            U, G_cur, L = U_new, G_new, L_new
            report.K = k
            report.converged_prefix = L
            if L == N - 1:
                if not np.array_equal(U[N - 1], U_prev_last):
                    # the last boundary must come from the converged U_{N-1}
                    vals, secs = prop.fine_many(np.array([N]), U[N - 1:N])
                    U[N] = vals[0]
                    report.iterations[-1].final_fine_ms = float(secs[0] * 1e3)
                report.status = "converged"
                break
        else:
            report.status = "max_iterations"
        report.diagnostics = _diagnostics(model, dataset)
    except _BudgetExhausted:
        report.status = "budget_exhausted"
        report.message = f"wall budget of {config.max_wall_seconds:g} s exhausted"
    except BlowUpError as exc:
        report.status = "blowup"
        report.message = str(exc)
    finally:
        if pool is not None:
            pool.shutdown()

    if U is not None and rmap is not None:
        report.final_states = rmap.unrescale(U).tolist()
    wall = time.perf_counter() - wall_start
    T_G = float(np.mean(coarse_secs)) if coarse_secs else 0.0
    _finalize_cost(report, N, T_G, wall)
    return report


def _diagnostics(model, dataset: CorrectionDataset) -> dict:
    out: dict[str, Any] = {"dataset_size": len(dataset)}
    if isinstance(model, NnGpModel):
        out.update({k: v for k, v in model.diagnostics.items()})
    elif isinstance(model, RandNetModel):
        out.update({"M": model.M, "m": model.m, "seed": model.seed})
    return out


# --------------------------------------------------------------------------
# closed-form model-cost bounds
# --------------------------------------------------------------------------

def cost_model_curves(
    N: int,
    d_values: Iterable[float],
    m_nngp: int = 20,
    m_randnet: int = 4,
    M: int = 100,
    n_start: int = 10,
    n_reg: int = 1,
    k: int = 1,
    rank: int | None = None,
    C_nngp: float = 1.0,
    C_randnet: float = 1.0,
) -> list[tuple[float, float, float]]:
    """Evaluate the per-iteration model-cost bounds of nnGP and RandNet corrections.

    ``rank`` is the numerical rank of the activated-neuron covariance and
    defaults to ``min(M, m_randnet)``.  The constants convert operation counts
    to time units and must be calibrated against measured runs.

    Returns rows ``(d, T_nnGP, T_RandNet)``.
    """
    r = min(M, m_randnet) if rank is None else rank
    rows = []
    for d in d_values:
        d = float(d)
        m = m_nngp
        t_gp = C_nngp * N * k * max(n_start * n_reg * d / N, 1.0) * (
            m**3 + m**2 + d * (m**2 + 2 * m) + m * N * k)
        mr = m_randnet
        t_rn = C_randnet * k * (M * r**2 + M**2 * mr + d * (M**2 + 3 * M * mr) + mr * N * k)
        rows.append((d, t_gp, t_rn))
    return rows


# --------------------------------------------------------------------------
# robustness sweep
# --------------------------------------------------------------------------

def robustness_sweep(
    base: PintConfig,
    m_list: Sequence[int],
    M_list: Sequence[int],
    seeds: int | Sequence[int],
) -> list[dict]:
    """Run the RandNet correction over a grid of neighbour counts, widths and weight seeds."""
    seed_list = list(range(base.seed, base.seed + seeds)) if isinstance(seeds, int) else list(seeds)
    rows = []
    for m in m_list:
        for M in M_list:
            for seed in seed_list:
                cfg = base.replace(correction=CorrectionSpec(model="randnet", m=int(m), M=int(M)), seed=int(seed))
                try:
                    rep = run_pint(cfg, keep_history=False)
                except Exception as exc:  # noqa: BLE001 - a failed cell must not stop the sweep
                    rows.append({"m": int(m), "M": int(M), "seed": int(seed), "K": None, "status": f"error: {exc}"})
                    continue
                K = rep.K if rep.converged else None
                rows.append({"m": int(m), "M": int(M), "seed": int(seed), "K": K, "status": rep.status})
    return rows


def default_thread_count() -> int:
    return os.cpu_count() or 1
