"""Command-line front end: ``pintkit run|compare|sweep|costmodel``.

Run configurations are INI files with five sections::

    [system]      name = burgers, plus the system's own parameters (d, nu, ...)
    [time]        t0, tN, N
    [solvers]     fine_method, fine_steps, coarse_method, coarse_steps
    [correction]  model, m, M, n_start, logdet
    [run]         epsilon, seed, threads, budget_seconds, rescale_margin

Keys are case-sensitive and unknown keys are rejected with their line number.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import json
import logging
import math
import re
import sys
from pathlib import Path
from typing import Sequence

from . import systems
from .engine import (
    MODEL_NAMES,
    CorrectionSpec,
    PintConfig,
    RunReport,
    compute_accuracy,
    cost_model_curves,
    robustness_sweep,
    run_pint,
    sequential_fine,
)
from .integrators import SolverSpec
from .svg import bar_chart, line_chart

__all__ = [
    "ConfigError",
    "load_config",
    "parse_config",
    "write_trace_csv",
    "cmd_run",
    "cmd_compare",
    "cmd_sweep",
    "cmd_costmodel",
    "main",
    "TRACE_HEADER",
    "SUMMARY_HEADER",
    "SWEEP_HEADER",
    "COST_HEADER",
]

log = logging.getLogger("pintkit")

TRACE_HEADER = ["k", "interval", "update_inf_norm", "converged", "fine_ms", "coarse_ms", "model_ms"]
SUMMARY_HEADER = ["Algorithm", "K", "NT_G", "T_F", "T_model", "T_alg", "S_alg", "accuracy", "status"]
SWEEP_HEADER = ["m", "M", "seed", "K", "status"]
COST_HEADER = ["d", "T_nngp_hours", "T_randnet_hours"]

EXIT_OK, EXIT_ERROR, EXIT_BUDGET = 0, 1, 2


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# config files
# --------------------------------------------------------------------------

_SECTION_KEYS = {
    "system": {"name"},
    "time": {"t0", "tN", "N"},
    "solvers": {"fine_method", "fine_steps", "coarse_method", "coarse_steps"},
    "correction": {"model", "m", "M", "n_start", "logdet"},
    "run": {"epsilon", "seed", "threads", "budget_seconds", "rescale_margin"},
}
_REQUIRED = {
    "system": {"name"},
    "time": {"t0", "tN", "N"},
    "solvers": {"fine_method", "fine_steps", "coarse_method", "coarse_steps"},
    "correction": {"model"},
}

_SYSTEM_SPECS = {
    "linear": (systems.LinearSpec, ()),
    "burgers": (systems.BurgersSpec, ()),
    "diffusion_reaction": (systems.DiffusionReactionSpec, ("ic_seed",)),
    "brusselator2d": (systems.BrusselatorSpec, ("ic_seed",)),
    "brusselator3d": (systems.BrusselatorSpec, ("ic_seed",)),
}


def _line_of(text: str, section: str | None, key: str | None = None) -> int:
    current = None
    for no, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[(.+)\]$", s)
        if m:
            current = m.group(1).strip()
            if key is None and current == section:
                return no
            continue
        if key is not None and current == section and re.match(rf"{re.escape(key)}\s*[=:]", s):
            return no
    return 0


def _coerce(raw: str, kind: str, where: str):
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
    except ValueError:
        raise ConfigError(f"{where}: expected {kind}, got {raw!r}") from None
    return raw


def parse_config(text: str, source: str = "<config>") -> PintConfig:
    """Parse INI text into a ``PintConfig``; every problem is reported with its line."""
    cp = configparser.ConfigParser(interpolation=None, strict=True)
    cp.optionxform = str  # keep "m" and "M" apart
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None

    def where(section, key=None):
        label = f"[{section}]" if key is None else f"key {key!r} in [{section}]"
        return f"{source}:{_line_of(text, section, key)}: {label}"

    for section in cp.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"{where(section)}: unknown section")
    for section, keys in _REQUIRED.items():
        if not cp.has_section(section):
            raise ConfigError(f"{source}: missing section [{section}]")
        for key in keys:
            if key not in cp[section]:
                raise ConfigError(f"{source}: missing key {key!r} in [{section}]")

    sysname = cp["system"]["name"].strip()
    if sysname not in _SYSTEM_SPECS:
        raise ConfigError(f"{where('system', 'name')}: unknown system {sysname!r}")
    spec_cls, extra = _SYSTEM_SPECS[sysname]
    field_kinds = {f.name: f.type for f in dataclasses.fields(spec_cls) if f.name != "spatial_dim"}
    field_kinds.update({k: "int" for k in extra})
    params = {}
    for key, raw in cp["system"].items():
        if key == "name":
            continue
        if key not in field_kinds:
            raise ConfigError(f"{where('system', key)}: unknown key for system {sysname!r}")
        params[key] = _coerce(raw, str(field_kinds[key]), where("system", key))

    for section, allowed in _SECTION_KEYS.items():
        if section == "system" or not cp.has_section(section):
            continue
        for key in cp[section]:
            if key not in allowed:
                raise ConfigError(f"{where(section, key)}: unknown key")

    def get(section, key, kind, default=None):
        if not cp.has_section(section) or key not in cp[section]:
            return default
        return _coerce(cp[section][key], kind, where(section, key))

    try:
        corr = CorrectionSpec(
            model=get("correction", "model", "str"),
            m=get("correction", "m", "int"),
            M=get("correction", "M", "int", 100),
            n_start=get("correction", "n_start", "int", 10),
            logdet=get("correction", "logdet", "str", "regularized"),
        )
        return PintConfig(
            system=sysname,
            system_params=params,
            N=get("time", "N", "int"),
            t0=get("time", "t0", "float"),
            tN=get("time", "tN", "float"),
            fine=SolverSpec(get("solvers", "fine_method", "str"), get("solvers", "fine_steps", "int")),
            coarse=SolverSpec(get("solvers", "coarse_method", "str"), get("solvers", "coarse_steps", "int")),
            correction=corr,
            epsilon=get("run", "epsilon", "float", 5e-7),
            seed=get("run", "seed", "int", 0),
            thread_count=get("run", "threads", "int", 1),
            max_wall_seconds=get("run", "budget_seconds", "float", 48 * 3600.0),
            rescale_margin=get("run", "rescale_margin", "float", 0.25),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_config(path, overrides: argparse.Namespace | None = None) -> PintConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    cfg = parse_config(text, str(path))
    if overrides is None:
        return cfg
    changes = {}
    if getattr(overrides, "seed", None) is not None:
        changes["seed"] = overrides.seed
    if getattr(overrides, "threads", None) is not None:
        changes["thread_count"] = overrides.threads
    if getattr(overrides, "epsilon", None) is not None:
        changes["epsilon"] = overrides.epsilon
    if getattr(overrides, "budget_seconds", None) is not None:
        changes["max_wall_seconds"] = overrides.budget_seconds
    return cfg.replace(**changes) if changes else cfg


# --------------------------------------------------------------------------
# csv helpers
# --------------------------------------------------------------------------

def _num(v) -> str:
    """Shortest round-trip text for a float; empty for missing values."""
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, int):
        return str(v)
    return repr(float(v))


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_MINIMAL, lineterminator="\r\n")
        w.writerow(header)
        w.writerows(rows)


def trace_rows(report: RunReport) -> list[list[str]]:
    rows = []
    for it in report.iterations:
        for i in it.intervals:
            key = str(i)
            rows.append([
                _num(it.k), _num(i),
                _num(it.update_inf_norm.get(key)),
                _num(i <= it.L_end),
                _num(it.fine_ms.get(key)),
                _num(it.coarse_ms.get(key)),
                _num(it.model_ms.get(key)),
            ])
    return rows


def write_trace_csv(report: RunReport, path) -> None:
    _write_csv(Path(path), TRACE_HEADER, trace_rows(report))


def _write_json(path: Path, data) -> None:
    def default(o):
        if hasattr(o, "tolist"):
            return o.tolist()
        raise TypeError(f"cannot serialize {type(o).__name__}")
    # NaN/inf would not be valid JSON; write them as null
    def clean(o):
        if isinstance(o, float) and not math.isfinite(o):
            return None
        if isinstance(o, dict):
            return {k: clean(v) for k, v in o.items()}
        if isinstance(o, (list, tuple)):
            return [clean(v) for v in o]
        return o
    path.write_text(json.dumps(clean(data), indent=1, sort_keys=True, default=default) + "\n")


def speedup_identity_holds(report_data: dict) -> bool:
    """Check S_alg = N T_F / T_alg on a report as read back from JSON."""
    c = report_data.get("cost") or {}
    t_alg, t_f, s = c.get("T_alg_modeled"), c.get("T_F_per_interval_mean"), c.get("S_alg_modeled")
    if t_alg is None or t_f is None or s is None or t_alg == 0:
        # nothing was timed (early failure); the identity is vacuous
        return True
    return s == report_data["config"]["N"] * t_f / t_alg


def _exit_for(status: str) -> int:
    if status == "converged":
        return EXIT_OK
    if status == "budget_exhausted":
        return EXIT_BUDGET
    return EXIT_ERROR


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_run(config_path, out_dir, overrides=None) -> int:
    """Run one solve; writes report.json, trace.csv and convergence.svg."""
    try:
        cfg = load_config(config_path, overrides)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        report = run_pint(cfg)
    except Exception as exc:  # noqa: BLE001 - the exit code is the contract
        log.error("%s", exc)
        return EXIT_ERROR
    _write_json(out / "report.json", report.to_dict())
    if not speedup_identity_holds(json.loads((out / "report.json").read_text())):
        log.error("serialized report violates S_alg = N T_F / T_alg")
        return EXIT_ERROR
    write_trace_csv(report, out / "trace.csv")
    ks = [it.k for it in report.iterations]
    norms = [max(it.update_inf_norm.values(), default=float("nan")) for it in report.iterations]
    (out / "convergence.svg").write_text(line_chart(
        {cfg.correction.model: (ks, norms)},
        title=f"{cfg.system}: max update norm per iteration",
        xlabel="iteration k", ylabel="log10 max |U^k - U^(k-1)|", log_y=True))
    log.info("%s: status=%s K=%d", cfg.correction.model, report.status, report.K)
    if report.message:
        log.info("%s", report.message)
    return _exit_for(report.status)


def cmd_compare(config_path, models: Sequence[str], out_dir, overrides=None) -> int:
    """Run each correction model on the same problem plus a serial fine reference."""
    try:
        base = load_config(config_path, overrides)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for name in models:
            if name not in MODEL_NAMES:
                raise ConfigError(f"unknown model {name!r}; expected one of {', '.join(MODEL_NAMES)}")
        ref = sequential_fine(base)
    except Exception as exc:  # noqa: BLE001
        log.error("%s", exc)
        return EXIT_ERROR

    N = base.N
    rows = [["Fine", "", "", "", "", _num(ref.total_seconds), _num(1.0), "", "converged"]]
    speedups = {}
    codes = []
    for name in models:
        # m defaults per model unless the config set it for this very model
        c0 = base.correction
        m = c0.m if name == c0.model else None
        cfg = base.replace(correction=CorrectionSpec(model=name, m=m, M=c0.M, n_start=c0.n_start, logdet=c0.logdet))
        try:
            rep = run_pint(cfg, keep_history=False)
        except Exception as exc:  # noqa: BLE001 - one failing model must not stop the others
            log.error("%s: %s", name, exc)
            rows.append([name, "", "", "", "", "", "", "", f"error: {exc}"])
            codes.append(EXIT_ERROR)
            continue
        c = rep.cost
        acc = compute_accuracy(rep, ref) if rep.final_states else None
        rows.append([name, _num(rep.K), _num(N * c.T_G_per_interval), _num(c.T_F_per_interval_mean),
                     _num(c.T_model_total), _num(c.T_alg_modeled), _num(c.S_alg_modeled), _num(acc),
                     rep.status])
        speedups[name] = c.S_alg_modeled
        codes.append(_exit_for(rep.status))
        log.info("%s: status=%s K=%d S_alg=%.3g", name, rep.status, rep.K, c.S_alg_modeled)
    _write_csv(out / "summary.csv", SUMMARY_HEADER, rows)
    cats = ["Fine"] + list(speedups)
    (out / "speedup.svg").write_text(bar_chart(
        cats, {"S_alg (modeled)": [1.0] + list(speedups.values())},
        title=f"{base.system}: modeled speedup", xlabel="algorithm", ylabel="S_alg"))
    if EXIT_ERROR in codes:
        return EXIT_ERROR
    return EXIT_BUDGET if EXIT_BUDGET in codes else EXIT_OK


def _histogram(rows: list[dict], by: str) -> tuple[list[str], dict[str, list[int]]]:
    """Counts of K per value of ``by``; non-converged cells go to the ``nc`` bin."""
    labels = sorted({r["K"] for r in rows if r["K"] is not None})
    cats = [str(k) for k in labels]
    if any(r["K"] is None for r in rows):
        cats.append("nc")
    series = {}
    for v in sorted({r[by] for r in rows}):
        counts = [0] * len(cats)
        for r in rows:
            if r[by] != v:
                continue
            counts[cats.index("nc" if r["K"] is None else str(r["K"]))] += 1
        series[f"{by}={v}"] = counts
    return cats, series


def cmd_sweep(config_path, m_list, M_list, seeds, out_dir, overrides=None) -> int:
    """RandNet robustness grid; writes sweep.csv and histograms over m and over M."""
    try:
        base = load_config(config_path, overrides)
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        rows = robustness_sweep(base, m_list, M_list, seeds)
    except Exception as exc:  # noqa: BLE001
        log.error("%s", exc)
        return EXIT_ERROR
    _write_csv(out / "sweep.csv", SWEEP_HEADER,
               [[_num(r["m"]), _num(r["M"]), _num(r["seed"]), _num(r["K"]), r["status"]] for r in rows])
    for by, fname in (("m", "sweep_by_m.svg"), ("M", "sweep_by_M.svg")):
        cats, series = _histogram(rows, by)
        (out / fname).write_text(bar_chart(cats, series, title=f"iterations to converge, grouped by {by}",
                                           xlabel="K", ylabel="count"))
    if any(r["status"].startswith("error") for r in rows):
        return EXIT_ERROR
    return EXIT_OK


def cmd_costmodel(out_dir, N: int, d_values: Sequence[float], hours_per_op: float = 1e-9 / 3600.0,
                  **kwargs) -> int:
    """Closed-form model cost against d; cost.csv and cost.svg (log10 hours)."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        rows = cost_model_curves(N, d_values, C_nngp=hours_per_op, C_randnet=hours_per_op, **kwargs)
    except Exception as exc:  # noqa: BLE001
        log.error("%s", exc)
        return EXIT_ERROR
    _write_csv(out / "cost.csv", COST_HEADER, [[_num(d), _num(g), _num(r)] for d, g, r in rows])
    ds = [r[0] for r in rows]
    (out / "cost.svg").write_text(line_chart(
        {"nnGP": (ds, [r[1] for r in rows]), "RandNet": (ds, [r[2] for r in rows])},
        title=f"model cost per iteration, N={N}", xlabel="d", ylabel="log10 hours", log_y=True))
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing
# --------------------------------------------------------------------------

def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pintkit", description="Parallel-in-time solves with learned corrections.")
    p.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="INI run configuration")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--threads", type=int)
        sp.add_argument("--epsilon", type=float)
        sp.add_argument("--budget-seconds", type=float)

    common(sub.add_parser("run", help="solve once and write report.json, trace.csv, convergence.svg"))
    sp = sub.add_parser("compare", help="run several correction models and a serial fine reference")
    common(sp)
    sp.add_argument("--models", default="parareal,nngp,randnet")
    sp = sub.add_parser("sweep", help="RandNet robustness over m, M and weight seeds")
    common(sp)
    sp.add_argument("--m", dest="m_list", type=_int_list, default=[2, 4, 8, 16])
    sp.add_argument("--M", dest="M_list", type=_int_list, default=[20, 100, 500])
    sp.add_argument("--seeds", type=int, default=10, help="number of consecutive seeds from the config seed")
    sp = sub.add_parser("costmodel", help="closed-form model cost as a function of d")
    common(sp, config_required=False)
    sp.add_argument("--N", type=int, default=None)
    sp.add_argument("--d", dest="d_values", type=_float_list, default=[1e2, 1e3, 1e4, 1e5, 1e6])
    sp.add_argument("--m-nngp", type=int, default=20)
    sp.add_argument("--m-randnet", type=int, default=4)
    sp.add_argument("--M-width", dest="M", type=int, default=100)
    sp.add_argument("--n-start", type=int, default=10)
    sp.add_argument("--k", type=int, default=1, help="iteration index")
    sp.add_argument("--hours-per-op", type=float, default=1e-9 / 3600.0)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    # plain uncoloured log lines, so NO_COLOR needs no special handling
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    if args.command == "run":
        return cmd_run(args.config, args.out, args)
    if args.command == "compare":
        models = [m.strip() for m in args.models.split(",") if m.strip()]
        return cmd_compare(args.config, models, args.out, args)
    if args.command == "sweep":
        return cmd_sweep(args.config, args.m_list, args.M_list, args.seeds, args.out, args)
    N = args.N
    m_nngp, m_rn, M, n_start = args.m_nngp, args.m_randnet, args.M, args.n_start
    if args.config:
        try:
            cfg = load_config(args.config, args)
        except ConfigError as exc:
            log.error("%s", exc)
            return EXIT_ERROR
        N = N or cfg.N
        if cfg.correction.model == "nngp":
            m_nngp, n_start = cfg.correction.m, cfg.correction.n_start
        elif cfg.correction.model == "randnet":
            m_rn, M = cfg.correction.m, cfg.correction.M
    return cmd_costmodel(args.out, N or 128, args.d_values, args.hours_per_op, m_nngp=m_nngp,
                         m_randnet=m_rn, M=M, n_start=n_start, k=args.k)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
