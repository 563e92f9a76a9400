"""Batch experiments: config parsing, mode runners and sweeps.

A config is one JSON document describing one experiment. An optional
``sweep`` section maps dotted keys to lists of values; the cartesian product
of those lists expands into separate runs.
"""
import concurrent.futures
import copy
import itertools
import json
import logging
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

import semigroup
from analytics import summarize_trace, trace_frame, tv_identity_frame
from config import CHECKS, ITERATION, OUTPUT, QUADRATURE, RETRACTION, TAIL_GRID, get_output_dir
from ergodic import apply_mean_operator, ergodic_residual
from errors import (ConfigError, DomainError, InfeasibleError, InvalidArgumentError,
                    IterationLimitError, NumericError)
from iterate import (MannConfig, characterize, constant_alpha, default_schedule, mann_iterate, mean_for_index,
                     projected_retraction, retraction_apply, retraction_sensitivity, table_alpha)
from mean import CesaroSchedule, TimeSchedule, indicator_bound_check, solve_invariant_mean, translate_intersection
from operators import build_family
from oracle import fixed_set_for, verify_invariant_mean
from utils import append_summary_line, ensure_output_dir, export_to_markdown, write_summary, write_trace

logger = logging.getLogger(__name__)

MODES = ("mann", "retraction", "characterize", "verify-means", "invariant-mean")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


SECTION_FIELDS = ("family", "schedule", "tolerances", "semigroup", "output", "sweep")
COUNT_FIELDS = {"samples": 1, "max_iter": 1, "n_max": 1, "max_inner": 1, "identity_samples": 0, "seed": 0}
POSITIVE_FIELDS = ("horizon", "mean_index")


def _is_number(value):
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _vector(value, path):
    if not isinstance(value, list) or not value or not all(_is_number(v) for v in value):
        raise ConfigError(f"{path} must be a nonempty list of numbers")
    return value


def _count(value, path, minimum):
    if not _is_number(value) or float(value) != int(value) or value < minimum:
        raise ConfigError(f"{path} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def _check_types(raw):
    """Type-check the top-level fields of a config and normalise integer counts."""
    checked = dict(raw)
    if not isinstance(raw.get("name", ""), str):
        raise ConfigError("name must be a string")
    for key in SECTION_FIELDS:
        if raw.get(key) is not None and not isinstance(raw[key], dict):
            raise ConfigError(f"{key} must be an object")
    for key, minimum in COUNT_FIELDS.items():
        if key in raw:
            checked[key] = _count(raw[key], key, minimum)
    for key in POSITIVE_FIELDS:
        value = raw.get(key)
        if value is not None and (not _is_number(value) or value <= 0):
            raise ConfigError(f"{key} must be a positive number, got {value!r}")
    if raw.get("start") is not None:
        _vector(raw["start"], "start")
    if raw.get("points") is not None:
        if not isinstance(raw["points"], list) or not raw["points"]:
            raise ConfigError("points must be a nonempty list of points")
        for k, p in enumerate(raw["points"]):
            _vector(p, f"points[{k}]")
    if raw.get("sets") is not None:
        families = raw["sets"]
        if not isinstance(families, list) or not all(
                isinstance(sets, list) and sets and all(isinstance(A, list) for A in sets) for sets in families):
            raise ConfigError("sets must be a list of nonempty lists of subsets")

    for key, value in (raw.get("tolerances") or {}).items():
        if not _is_number(value) or value <= 0:
            raise ConfigError(f"tolerances.{key} must be a positive number, got {value!r}")
    schedule = raw.get("schedule") or {}
    alpha = schedule.get("alpha")
    if alpha is not None and not _is_number(alpha):
        _vector(alpha, "schedule.alpha")
    for key in ("time_scale", "time_exponent"):
        if key in schedule and not _is_number(schedule[key]):
            raise ConfigError(f"schedule.{key} must be a number, got {schedule[key]!r}")
    return checked


@dataclass
class ExperimentConfig:
    mode: str
    name: str = "experiment"
    family: dict = field(default_factory=dict)
    schedule: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    start: list = None
    points: list = None
    samples: int = 10
    seed: int = 0
    max_iter: int = ITERATION["max_iter"]
    n_max: int = ITERATION["n_max"]
    horizon: float = TAIL_GRID["horizon"]
    mean_index: float = None
    max_inner: int = RETRACTION["max_inner"]
    identity_samples: int = 3
    semigroup: dict = None
    sets: list = None
    output: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)

    @property
    def tol(self):
        return float(self.tolerances.get("tol", ITERATION["tol"]))

    @property
    def quad_tol(self):
        return float(self.tolerances.get("quad_tol", QUADRATURE["quad_tol"]))

    @property
    def inner_tol(self):
        return float(self.tolerances.get("inner_tol", RETRACTION["inner_tol"]))

    @property
    def check_tol(self):
        return float(self.tolerances.get("check_tol", 1e-6))

    def tolerance_report(self):
        return {"tol": self.tol, "quad_tol": self.quad_tol, "inner_tol": self.inner_tol,
                "check_tol": self.check_tol}

    @classmethod
    def from_dict(cls, raw):
        """Validate a parsed config document and build an ExperimentConfig."""
        if not isinstance(raw, dict):
            raise ConfigError("Config must be a JSON object")
        _check_finite(raw)
        mode = raw.get("mode")
        if mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}, got {mode!r}")
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"Unknown config keys: {', '.join(unknown)}")

        needs_family = mode in ("mann", "retraction", "characterize")
        if needs_family and not raw.get("family"):
            raise ConfigError(f"mode {mode} needs a family section")
        if mode == "retraction" and raw.get("mean_index") is None:
            raise ConfigError("mode retraction needs mean_index")
        if mode == "invariant-mean" and not raw.get("semigroup"):
            raise ConfigError("mode invariant-mean needs a semigroup section")
        return cls(**copy.deepcopy(_check_types(raw)))


def _check_finite(value, path="config"):
    if isinstance(value, dict):
        for k, v in value.items():
            _check_finite(v, f"{path}.{k}")
    elif isinstance(value, list):
        for k, v in enumerate(value):
            _check_finite(v, f"{path}[{k}]")
    elif isinstance(value, float) and not math.isfinite(value):
        raise ConfigError(f"{path} is not a finite number")


def parse_config_text(text):
    """Parse a JSON config document, reporting line and column on errors."""
    try:
        # NaN/Infinity literals are rejected as non-finite
        return json.loads(text, parse_constant=lambda name: float(name.replace("Infinity", "inf")))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"Config is not valid JSON: {exc.msg}", exc.lineno, exc.colno) from exc


def load_config(path):
    try:
        with open(path) as f:
            text = f.read()
    except OSError as exc:
        raise ConfigError(f"Cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def _set_dotted(raw, dotted, value):
    keys = dotted.split(".")
    target = raw
    for key in keys[:-1]:
        target = target.setdefault(key, {})
        if not isinstance(target, dict):
            raise ConfigError(f"Sweep key {dotted!r} does not address a section")
    target[keys[-1]] = value


def expand_sweep(raw):
    """One raw config per point of the sweep's cartesian product."""
    sweep = raw.get("sweep") or {}
    if not isinstance(sweep, dict) or any(not isinstance(v, list) or not v for v in sweep.values()):
        raise ConfigError("sweep must map dotted keys to nonempty lists")
    base = {k: v for k, v in raw.items() if k != "sweep"}
    if not sweep:
        return [base]
    keys = sorted(sweep)
    runs = []
    for values in itertools.product(*(sweep[k] for k in keys)):
        run = copy.deepcopy(base)
        for key, value in zip(keys, values):
            _set_dotted(run, key, value)
        runs.append(run)
    return runs


def _build_schedule(cfg, family):
    spec = cfg.schedule
    kind = spec.get("mean")
    if kind is None:
        return default_schedule(family)
    if kind == "cesaro":
        return CesaroSchedule()
    if kind == "time":
        return TimeSchedule(spec.get("time_scale", 1.0), spec.get("time_exponent", 1.0))
    raise ConfigError(f"Unknown mean schedule {kind!r}")


def _build_alpha(cfg):
    alpha = cfg.schedule.get("alpha", ITERATION["alpha"])
    if isinstance(alpha, list):
        return table_alpha(alpha)
    return constant_alpha(alpha)


def _points(cfg, family):
    if cfg.points:
        return [np.asarray(p, dtype=float) for p in cfg.points]
    if cfg.start is not None:
        return [np.asarray(cfg.start, dtype=float)]
    rng = np.random.default_rng(cfg.seed)
    return list(family.domain.sample(rng, cfg.samples))


def _base_summary(cfg):
    return {
        "name": cfg.name,
        "mode": cfg.mode,
        "status": "ok",
        "converged": False,
        "final_point": [],
        "iterations": 0,
        "max_residual_last5": None,
        "tolerances": cfg.tolerance_report(),
        "seed": cfg.seed,
        "wall_time": 0.0,
        "details": {},
    }


def _run_mann(cfg, summary):
    family = build_family(cfg.family)
    schedule = _build_schedule(cfg, family)
    config = MannConfig(alpha_schedule=_build_alpha(cfg), mean_schedule=schedule, tol=cfg.tol,
                        max_iter=cfg.max_iter, quad_tol=cfg.quad_tol)
    x1 = _points(cfg, family)[0]
    try:
        trace, final = mann_iterate(family, config, x1)
    except NumericError as exc:
        if exc.trace is not None:
            exc.frame = trace_frame(exc.trace)
        raise

    stats = summarize_trace(trace)
    summary.update({k: stats[k] for k in ("converged", "final_point", "iterations", "max_residual_last5")})
    summary["details"] = {
        "start": x1.tolist(),
        "min_residual": stats["min_residual"],
        "running_min_final": stats["running_min_final"],
        "fejer_violation": stats["fejer_violation"],
        "final_mean_residual": ergodic_residual(family, schedule(len(trace)), final, cfg.quad_tol),
    }
    return trace_frame(trace)


def _run_retraction(cfg, summary):
    family = build_family(cfg.family)
    mean = mean_for_index(family, cfg.mean_index)
    try:
        fixed_set = fixed_set_for(family)
    except InvalidArgumentError:
        fixed_set = None

    def retract(x):
        return retraction_apply(family, cfg.mean_index, x, cfg.inner_tol, cfg.max_inner, cfg.quad_tol)

    rng = np.random.default_rng(cfg.seed + 1)
    rows, residuals, worst = [], [], 0.0
    q = np.zeros(family.dimension)
    for k, x in enumerate(_points(cfg, family)):
        q = retract(x)
        sensitivity = retraction_sensitivity(family, cfg.mean_index, x, cfg.inner_tol, cfg.max_inner, cfg.quad_tol)
        identity = 0.0
        for _ in range(cfg.identity_samples):
            s = family.sample_index(rng)
            moved = family.domain.project(family.act(s, x))
            identity = max(identity, float(np.linalg.norm(retract(moved) - q)),
                           float(np.linalg.norm(family.act(s, q) - q)))
        residual = float(np.linalg.norm(apply_mean_operator(family, mean, q, cfg.quad_tol, factorize=True).point - q))
        row = {"k": k}
        row.update({f"x_{i}": float(v) for i, v in enumerate(x)})
        row.update({f"q_{i}": float(v) for i, v in enumerate(q)})
        row.update({"residual": residual, "sensitivity": sensitivity, "identity_defect": identity})
        if fixed_set is not None:
            row["projected_gap"] = float(np.linalg.norm(projected_retraction(family, fixed_set, mean, x,
                                                                             cfg.quad_tol) - q))
        rows.append(row)
        residuals.append(residual)
        worst = max(worst, sensitivity, identity)

    summary.update({
        "converged": worst <= cfg.check_tol,
        "final_point": q.tolist(),
        "iterations": len(rows),
        "max_residual_last5": max(residuals[-5:]),
    })
    summary["details"] = {"mean_index": cfg.mean_index, "max_sensitivity": max(r["sensitivity"] for r in rows),
                          "max_identity_defect": max(r["identity_defect"] for r in rows)}
    return pd.DataFrame(rows)


def _run_characterize(cfg, summary):
    family = build_family(cfg.family)
    schedule = _build_schedule(cfg, family)
    try:
        fixed_set = fixed_set_for(family)
    except InvalidArgumentError:
        fixed_set = None

    rows, agreements, report = [], [], None
    z = None
    for k, z in enumerate(_points(cfg, family)):
        report = characterize(family, z, schedule, cfg.n_max, cfg.tol, cfg.horizon, cfg.quad_tol)
        row = {"k": k}
        row.update({f"z_{i}": float(v) for i, v in enumerate(z)})
        row.update({
            "verdict": bool(report.verdict),
            "lambda": report.lambda_estimate,
            "orbit_excess": report.orbit_excess,
            "mean_residual": report.mean_residual,
            "subnet_residual": report.subnet_residual,
        })
        if fixed_set is not None:
            distance = fixed_set.distance(z)
            row["oracle_distance"] = distance
            row["agrees"] = bool(report.verdict == (distance <= cfg.tol))
            agreements.append(row["agrees"])
        rows.append(row)

    summary.update({
        "converged": all(agreements),
        "final_point": [] if z is None else z.tolist(),
        "iterations": cfg.n_max,
        "max_residual_last5": max(report.residual_sequence[-5:]) if report else None,
    })
    summary["details"] = {"points": len(rows), "fixed_points_found": sum(r["verdict"] for r in rows),
                          "oracle_misclassifications": agreements.count(False)}
    return pd.DataFrame(rows)


def _run_verify_means(cfg, summary):
    frame = tv_identity_frame(cfg.n_max, include_time=cfg.schedule.get("mean") != "cesaro",
                              quad_tol=cfg.quad_tol)
    deviation = float(frame["deviation_cesaro"].max())
    if "deviation_time" in frame:
        deviation = max(deviation, float(frame["deviation_time"].max()))
    summary.update({
        "converged": deviation <= 1e-12,
        "iterations": cfg.n_max,
        "max_residual_last5": float(frame["deviation_cesaro"].tail(5).max()),
    })
    summary["details"] = {"max_deviation": deviation,
                          "final_deficiency_cesaro": float(frame["deficiency_cesaro"].iloc[-1])}
    return frame


def build_semigroup(spec):
    kind = spec.get("type")
    builders = {"saturating": semigroup.saturating, "cyclic": semigroup.cyclic,
                "max": semigroup.max_semilattice, "multiplicative": semigroup.multiplicative}
    try:
        if kind in builders:
            return builders[kind](int(spec["size"]))
        if kind == "table":
            return semigroup.FiniteSemigroup(spec["elements"], spec["table"], spec.get("name", "table"))
    except KeyError as exc:
        raise ConfigError(f"Semigroup spec is missing {exc.args[0]!r}") from exc
    raise ConfigError(f"Unknown semigroup type {kind!r}")


def _run_invariant_mean(cfg, summary):
    sg = build_semigroup(cfg.semigroup)
    mu = solve_invariant_mean(sg)
    defect = verify_invariant_mean(sg, mu)
    weights = [mu.weight(sg.element(e)) for e in sg.elements]

    checks = []
    for sets in cfg.sets or []:
        bound = indicator_bound_check(sg, mu, sets)
        check = {"sets": sets, "alpha": bound.alpha, "mass": bound.mass, "holds": bound.holds}
        if bound.alpha > 0:
            intersection = set.intersection(*(set(A) for A in sets))
            check["translates_meet"] = all(translate_intersection(sg, s0, intersection) for s0 in sg.elements)
        checks.append(check)

    checks_pass = all(c["holds"] and c.get("translates_meet", True) for c in checks)
    summary.update({
        "converged": defect <= CHECKS["lp_tol"] and checks_pass,
        "final_point": weights,
        "iterations": len(sg),
        "max_residual_last5": defect,
    })
    summary["details"] = {"semigroup": sg.name, "defect": defect, "indicator_checks": checks}
    return pd.DataFrame({"element": list(sg.elements), "weight": weights})


RUNNERS = {
    "mann": _run_mann,
    "retraction": _run_retraction,
    "characterize": _run_characterize,
    "verify-means": _run_verify_means,
    "invariant-mean": _run_invariant_mean,
}


def run_experiment(raw, run_dir):
    """
    Execute one expanded config and write its trace and summary into run_dir

    Returns:
        tuple: (summary dict, exit code)
    """
    cfg = ExperimentConfig.from_dict(raw)
    if not ensure_output_dir(run_dir):
        raise ConfigError(f"Output directory {run_dir} is not writable")
    trace_path = os.path.join(run_dir, cfg.output.get("trace", OUTPUT["trace_file"]))
    summary_path = os.path.join(run_dir, cfg.output.get("summary", OUTPUT["summary_file"]))

    summary = _base_summary(cfg)
    started = time.perf_counter()
    code = EXIT_OK
    try:
        frame = RUNNERS[cfg.mode](cfg, summary)
        write_trace(frame, trace_path)
    except (NumericError, IterationLimitError, InfeasibleError) as exc:
        logger.error("Run %s failed: %s", cfg.name, exc)
        code = EXIT_NUMERIC
        summary["status"] = "error"
        summary["message"] = str(exc)
        partial = getattr(exc, "frame", None)
        write_trace(partial if partial is not None else pd.DataFrame(), trace_path)
    summary["wall_time"] = time.perf_counter() - started
    write_summary(summary, summary_path)
    return summary, code


def _run_worker(raw, run_dir):
    try:
        return run_experiment(raw, run_dir)
    except (ConfigError, InvalidArgumentError, DomainError, ValueError, TypeError) as exc:
        # ill-typed values inside family or semigroup sections surface here
        return {"name": raw.get("name"), "mode": raw.get("mode"), "status": "error", "message": str(exc)}, EXIT_CONFIG


def run(config_path, jobs=1, out=None, seed=None):
    """
    Run every experiment described by a config file

    Args:
        config_path (str): Path of the JSON config
        jobs (int): Sweep runs executed concurrently
        out (str, optional): Output directory override
        seed (int, optional): Seed override

    Returns:
        int: 0 on success, 2 on config errors, 3 on numeric failures
    """
    try:
        raw = load_config(config_path)
        if seed is not None:
            raw["seed"] = int(seed)
        runs = expand_sweep(raw)
        for r in runs:
            ExperimentConfig.from_dict(r)
    except ConfigError as exc:
        logger.error("%s: %s", config_path, exc)
        return EXIT_CONFIG

    out_dir = get_output_dir(out)
    if not ensure_output_dir(out_dir):
        logger.error("Output directory %s is not writable", out_dir)
        return EXIT_CONFIG

    name = raw.get("name", "experiment")
    if len(runs) == 1:
        run_dirs = [os.path.join(out_dir, name)]
    else:
        run_dirs = [os.path.join(out_dir, f"{name}-{k}") for k in range(len(runs))]
        for k, r in enumerate(runs):
            r["name"] = f"{name}-{k}"

    if jobs > 1 and len(runs) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_worker, runs, run_dirs))
    else:
        results = [_run_worker(r, d) for r, d in zip(runs, run_dirs)]

    summaries_path = os.path.join(out_dir, OUTPUT["summaries_file"])
    if os.path.exists(summaries_path):
        os.remove(summaries_path)
    for summary, _ in results:
        append_summary_line(summary, summaries_path)
    if len(runs) > 1:
        with open(os.path.join(out_dir, f"{name}-report.md"), "w") as f:
            f.write(export_to_markdown([s for s, _ in results]))

    codes = [code for _, code in results]
    for summary, code in results:
        if code != EXIT_OK:
            logger.error("Run %s exited with %d: %s", summary.get("name"), code, summary.get("message"))
    return max(codes)
