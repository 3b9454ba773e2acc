"""Command-line front end: config resolution, dispatch, artifact writing.

Exit codes: 0 success, 1 usage/config errors, 2 when a theorem-level
numerical check fails.  Artifacts are written atomically (temp file +
rename) only after a command has fully succeeded, so failures leave no
partial files.  Every JSON report echoes the effective configuration; the
only timestamp lives in the one-line stdout summary, keeping artifact bytes
reproducible from (config, seed).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from .analysis import (
    calibrate_slack,
    compare_fields,
    d_limit_check,
    kappa_sweep,
)
from .exact import (
    STATE_CAP_DEFAULT,
    LinearSolveError,
    build_transition_matrix,
    conditional_means,
    solve_hitting_times,
)
from .model import (
    Field,
    GridState,
    ModelParams,
    analytic_bounds,
    build_exchange_matrix,
    generator_apply,
    tau_lower,
)
from .montecarlo import (
    McConfig,
    default_max_steps,
    estimate_extinction_time,
    result_rows,
)
from .pde import (
    EllipticSolveError,
    MMatrixError,
    PdeGrid,
    discretize_Ld,
    elliptic_residual,
    solve_elliptic,
    solve_parabolic,
)

__all__ = ["main", "UsageError", "EXIT_OK", "EXIT_USAGE", "EXIT_CHECK_FAILED"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_CHECK_FAILED = 2

OUTPUT_DIR_ENV = "TWOPATCH_OUTPUT_DIR"

COMMANDS = (
    "simulate",
    "exact-hitting",
    "pde-elliptic",
    "pde-parabolic",
    "compare",
    "sweep",
    "validate",
)


class UsageError(Exception):
    """Bad flags, config file, or parameter values (exit status 1)."""


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors routed through UsageError (exit 1, not 2)."""

    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


# ---------------------------------------------------------------------------
# Configuration: defaults < config file < flags, unknown keys rejected.

_DEFAULTS: dict[str, Any] = {
    "n1": None,
    "n2": None,
    "kappa": None,
    "d": None,
    "seed": 0,
    "replicates": 10_000,
    "max_steps": None,
    "start": None,
    "grid_n": 128,
    "horizon": 1.0,
    "nt": 100,
    "kappas": None,
    "d_list": None,
    "check": None,
    "output_dir": None,
}

_COMMAND_KEYS: dict[str, set[str]] = {
    "simulate": {"n1", "n2", "kappa", "seed", "replicates", "max_steps", "start", "output_dir"},
    "exact-hitting": {"n1", "n2", "kappa", "output_dir"},
    "pde-elliptic": {"n1", "n2", "kappa", "d", "grid_n", "output_dir"},
    "pde-parabolic": {"n1", "n2", "kappa", "d", "grid_n", "horizon", "nt", "output_dir"},
    "compare": {"n1", "n2", "kappa", "d", "grid_n", "check", "output_dir"},
    "sweep": {"n1", "n2", "kappa", "d", "kappas", "d_list", "grid_n", "output_dir"},
    "validate": {"n1", "n2", "kappa", "seed", "replicates", "grid_n", "output_dir"},
}

_REQUIRED: dict[str, tuple[str, ...]] = {
    "simulate": ("n1", "n2", "kappa"),
    "exact-hitting": ("n1", "n2", "kappa"),
    "pde-elliptic": ("kappa",),
    "pde-parabolic": ("kappa",),
    "compare": ("kappa", "check"),
    "sweep": (),
    "validate": ("n1", "n2", "kappa"),
}

_INT_KEYS = {"n1", "n2", "seed", "replicates", "max_steps", "grid_n", "nt"}
_FLOAT_KEYS = {"kappa", "d", "horizon"}
_LIST_KEYS = {"kappas", "d_list"}


def _coerce(key: str, value: Any) -> Any:
    """Normalize a config value (from file or flag) to its canonical type."""
    if value is None:
        return None
    if key in _INT_KEYS:
        if isinstance(value, bool) or (not isinstance(value, int) and int(value) != value):
            raise UsageError(f"config key '{key}' must be an integer, got {value!r}")
        return int(value)
    if key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise UsageError(f"config key '{key}' must be a number, got {value!r}")
        return float(value)
    if key in _LIST_KEYS:
        if not isinstance(value, (list, tuple)) or not value:
            raise UsageError(f"config key '{key}' must be a non-empty list of numbers")
        try:
            return [float(v) for v in value]
        except (TypeError, ValueError):
            raise UsageError(f"config key '{key}' must contain only numbers")
    if key == "start":
        if (
            not isinstance(value, (list, tuple))
            or len(value) != 2
            or any(isinstance(v, bool) or int(v) != v for v in value)
        ):
            raise UsageError("config key 'start' must be a pair of integers [j1, j2]")
        return int(value[0]), int(value[1])
    if key == "check":
        if value not in ("lower-bound", "barrier", "sandwich"):
            raise UsageError(f"unknown check {value!r} (choose lower-bound, barrier, sandwich)")
        return str(value)
    if key == "output_dir":
        return str(value)
    raise UsageError(f"unknown config key '{key}'")


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}")
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}")
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a JSON object")
    return data


def _resolve_config(command: str, flags: dict[str, Any], config_path: str | None) -> dict[str, Any]:
    allowed = _COMMAND_KEYS[command]
    cfg = {k: _DEFAULTS[k] for k in allowed}
    if config_path is not None:
        file_cfg = _load_config_file(config_path)
        unknown = sorted(set(file_cfg) - allowed)
        if unknown:
            raise UsageError(
                f"unknown config key(s) for {command}: {', '.join(unknown)}"
            )
        cfg.update(file_cfg)
    for key, value in flags.items():
        if key in allowed and value is not None:
            cfg[key] = value
    cfg = {k: _coerce(k, v) for k, v in cfg.items()}
    missing = [k for k in _REQUIRED[command] if cfg.get(k) is None]
    if missing:
        flags_text = ", ".join("--" + k.replace("_", "-") for k in missing)
        raise UsageError(f"{command}: missing required option(s): {flags_text}")
    cfg["command"] = command
    if cfg.get("output_dir") is None:
        cfg["output_dir"] = os.environ.get(OUTPUT_DIR_ENV) or "."
    return cfg


def _model_params(cfg: dict) -> ModelParams:
    try:
        return ModelParams(cfg["n1"], cfg["n2"], cfg["kappa"])
    except ValueError as exc:
        raise UsageError(str(exc))


def _distortion(cfg: dict) -> float:
    """Distortion for PDE-side commands: --d directly, or n2/n1."""
    if cfg.get("d") is not None:
        d = cfg["d"]
    elif cfg.get("n1") is not None and cfg.get("n2") is not None:
        if cfg["n1"] < 1 or cfg["n2"] < 1:
            raise UsageError("patch capacities must be >= 1")
        d = cfg["n2"] / cfg["n1"]
    else:
        raise UsageError("provide --d, or both --n1 and --n2, to fix the distortion")
    if not 0.0 < d <= 1.0:
        raise UsageError(f"distortion d={d:g} outside (0, 1]")
    return float(d)


def _public_config(cfg: dict) -> dict:
    """Effective config as echoed into reports (JSON-friendly values).

    The output directory is deliberately omitted: it describes where the
    artifacts live, not what was computed, and keeping it out makes reports
    byte-for-byte identical across working directories.
    """
    out = {}
    for key, value in sorted(cfg.items()):
        if key == "output_dir":
            continue
        out[key] = list(value) if isinstance(value, tuple) else value
    return out


# ---------------------------------------------------------------------------
# Artifact serialization.


def _fmt_cell(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _csv_text(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt_cell(v) for v in row])
    return buf.getvalue()


def _json_text(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f"{path.name}.tmp{os.getpid()}")
    try:
        with open(tmp, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    finally:
        tmp.unlink(missing_ok=True)


def _emit(cfg: dict, outputs: list[tuple[Path, str]], payload: dict, status: str) -> None:
    """Write all artifacts, then print the one-line stdout summary."""
    for path, text in outputs:
        _write_atomic(path, text)
    summary = {
        "command": cfg["command"],
        "status": status,
        "outputs": [str(p) for p, _ in outputs],
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    summary.update(payload)
    print(json.dumps(summary, sort_keys=True))


def _field_rows(field: Field) -> list[tuple]:
    n1, n2 = field.n1, field.n2
    return [
        (i, k, i / n1, k / n2, float(field.values[i, k]))
        for i in range(n1 + 1)
        for k in range(n2 + 1)
    ]


# ---------------------------------------------------------------------------
# Commands.


def _cmd_simulate(cfg: dict) -> int:
    params = _model_params(cfg)
    if cfg.get("start") is not None:
        start = GridState(*cfg["start"])
    else:
        start = GridState(params.n1 // 2, params.n2 // 2)
    try:
        start.validate(params)
        mc = McConfig(replicates=cfg["replicates"], seed=cfg["seed"], max_steps=cfg["max_steps"])
    except ValueError as exc:
        raise UsageError(str(exc))
    result = estimate_extinction_time(params, start, mc)
    outdir = Path(cfg["output_dir"])
    report = {
        "config": _public_config(cfg),
        "start": [start.j1, start.j2],
        "dt": params.dt,
        "max_steps": mc.max_steps if mc.max_steps is not None else default_max_steps(params),
        "mean_time": result.mean_time,
        "stderr": result.stderr,
        "censored_fraction": result.censored_fraction,
        "is_lower_bound": result.is_lower_bound,
    }
    outputs = [
        (outdir / "simulate_raw.csv", _csv_text(("replicate_index", "steps", "censored_flag"), result_rows(result))),
        (outdir / "simulate_report.json", _json_text(report)),
    ]
    payload = {
        "mean_time": result.mean_time,
        "stderr": result.stderr,
        "censored_fraction": result.censored_fraction,
    }
    _emit(cfg, outputs, payload, "ok")
    return EXIT_OK


def _cmd_exact_hitting(cfg: dict) -> int:
    params = _model_params(cfg)
    if params.kappa == 0.0:
        raise UsageError(
            "kappa = 0 admits no absorption path from mixed states; hitting times are undefined"
        )
    tm = build_transition_matrix(params)
    table = solve_hitting_times(params, tm=tm)
    rows = [
        (j1, j2, j1 / params.n1, j2 / params.n2, table.value(j1, j2))
        for j1 in range(params.n1 + 1)
        for j2 in range(params.n2 + 1)
    ]
    report = {
        "config": _public_config(cfg),
        "matrix": tm.stats(),
        "residual": table.residual,
        "max_time": float(table.field.values.max()),
    }
    outdir = Path(cfg["output_dir"])
    outputs = [
        (outdir / "hitting_times.csv", _csv_text(("j1", "j2", "x1", "x2", "T"), rows)),
        (outdir / "exact_report.json", _json_text(report)),
    ]
    _emit(cfg, outputs, {"n_states": tm.n_states, "residual": table.residual}, "ok")
    return EXIT_OK


def _cmd_pde_elliptic(cfg: dict) -> int:
    d = _distortion(cfg)
    if cfg["kappa"] < 0.0:
        raise UsageError("kappa must be nonnegative")
    grid = _grid(cfg)
    op = discretize_Ld(grid, d, cfg["kappa"])
    tau = solve_elliptic(op)
    report = {
        "config": _public_config(cfg),
        "d": d,
        "certificate": op.certificate,
        "residual": elliptic_residual(op, tau),
        "max_value": float(tau.values.max()),
    }
    outdir = Path(cfg["output_dir"])
    outputs = [
        (outdir / "elliptic.csv", _csv_text(("i", "k", "x1", "x2", "value"), _field_rows(tau))),
        (outdir / "elliptic_report.json", _json_text(report)),
    ]
    _emit(cfg, outputs, {"residual": report["residual"], "max_value": report["max_value"]}, "ok")
    return EXIT_OK


def _cmd_pde_parabolic(cfg: dict) -> int:
    d = _distortion(cfg)
    if cfg["kappa"] < 0.0:
        raise UsageError("kappa must be nonnegative")
    if cfg["horizon"] <= 0.0 or cfg["nt"] < 1:
        raise UsageError("pde-parabolic requires --horizon > 0 and --nt >= 1")
    grid = _grid(cfg)
    op = discretize_Ld(grid, d, cfg["kappa"])
    initial = Field.from_function(grid.n, grid.n, lambda x1, x2: x1 * (1.0 - x1))
    result = solve_parabolic(op, initial, horizon=cfg["horizon"], nt=cfg["nt"])
    positive = result.min_value >= -1e-10
    contracting = result.sup_nonincreasing
    ok = positive and contracting
    report = {
        "config": _public_config(cfg),
        "d": d,
        "initial": "x1*(1-x1)",
        "certificate": op.certificate,
        "min_value": result.min_value,
        "positivity_ok": positive,
        "sup_nonincreasing": contracting,
        "supnorms": [float(s) for s in result.supnorms],
    }
    outdir = Path(cfg["output_dir"])
    outputs = [
        (outdir / "parabolic.csv", _csv_text(("i", "k", "x1", "x2", "value"), _field_rows(result.final))),
        (outdir / "parabolic_report.json", _json_text(report)),
    ]
    payload = {"min_value": result.min_value, "sup_nonincreasing": contracting}
    _emit(cfg, outputs, payload, "ok" if ok else "check-failed")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _cmd_compare(cfg: dict) -> int:
    d = _distortion(cfg)
    kappa = cfg["kappa"]
    if kappa <= 0.0:
        raise UsageError("compare requires kappa > 0 (extinction diverges otherwise)")
    grid = _grid(cfg)
    slack = calibrate_slack(d)
    eps = slack.epsilon(grid.h)
    op = discretize_Ld(grid, d, kappa)
    tau = solve_elliptic(op)
    x1, x2 = tau.nodes()
    check = cfg["check"]
    if check == "lower-bound":
        reports = [
            compare_fields(Field(tau_lower(x1, x2, d)), tau, eps, name="extinction-time-lower-bound")
        ]
    elif check == "barrier":
        barrier = analytic_bounds(x1, x2, d, kappa).kappa_barrier
        reports = [compare_fields(Field(barrier), tau, eps, name="small-kappa-barrier")]
    else:  # sandwich
        bounds = analytic_bounds(x1, x2, d, kappa)
        gap = Field(tau.values - tau_lower(x1, x2, d))
        zero = Field(np.zeros_like(tau.values))
        reports = [
            compare_fields(zero, gap, eps, name="sandwich-lower"),
            compare_fields(gap, Field(bounds.sandwich_width), eps, name="sandwich-upper"),
        ]
    ok = all(r.passed for r in reports)
    report = {
        "config": _public_config(cfg),
        "d": d,
        "slack": slack.as_dict(),
        "epsilon": eps,
        "reports": [r.as_dict() for r in reports],
    }
    outdir = Path(cfg["output_dir"])
    outputs = [(outdir / f"compare_{check}.json", _json_text(report))]
    payload = {
        "passed": ok,
        "min_margin": min(r.min_margin for r in reports),
        "epsilon": eps,
    }
    _emit(cfg, outputs, payload, "ok" if ok else "check-failed")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _cmd_sweep(cfg: dict) -> int:
    grid = _grid(cfg)
    kappas = cfg.get("kappas")
    d_list = cfg.get("d_list")
    if (kappas is None) == (d_list is None):
        raise UsageError("sweep requires exactly one of --kappas or --d-list")
    outdir = Path(cfg["output_dir"])
    if kappas is not None:
        if any(k <= 0.0 for k in kappas):
            raise UsageError("--kappas must all be > 0")
        d = _distortion(cfg)
        slack = calibrate_slack(d)
        rows = kappa_sweep(sorted(kappas, reverse=True), d, grid, slack=slack)
        centers = [r.tau_center for r in rows]
        monotone = all(b > a for a, b in zip(centers, centers[1:]))
        barrier_ok = all(r.barrier_min_margin >= -r.epsilon for r in rows)
        ok = monotone and barrier_ok
        report = {
            "config": _public_config(cfg),
            "d": d,
            "slack": slack.as_dict(),
            "rows": [
                {
                    "kappa": r.kappa,
                    "tau_center": r.tau_center,
                    "barrier_min_margin": r.barrier_min_margin,
                    "epsilon": r.epsilon,
                }
                for r in rows
            ],
            "center_increases_as_kappa_decreases": monotone,
            "barrier_ok": barrier_ok,
        }
        outputs = [
            (
                outdir / "kappa_sweep.csv",
                _csv_text(
                    ("kappa", "tau_center", "barrier_min_margin", "epsilon"),
                    [(r.kappa, r.tau_center, r.barrier_min_margin, r.epsilon) for r in rows],
                ),
            ),
            (outdir / "sweep_report.json", _json_text(report)),
        ]
        payload = {"monotone": monotone, "barrier_ok": barrier_ok}
    else:
        if cfg.get("kappa") is None:
            raise UsageError("--kappa is required with --d-list")
        if cfg["kappa"] <= 0.0:
            raise UsageError("sweep over d requires kappa > 0")
        if any(not 0.0 < d_ <= 1.0 for d_ in d_list):
            raise UsageError("--d-list values must lie in (0, 1]")
        rows = d_limit_check(cfg["kappa"], sorted(d_list, reverse=True), grid)
        gaps = [r.interior_max_gap for r in rows]
        shrinking = all(b < a for a, b in zip(gaps, gaps[1:]))
        lower_ok = all(r.min_lower_margin >= -r.epsilon for r in rows)
        # The literal nodewise upper bound fails at the conflict corners for
        # every d (the width vanishes there while the gap does not), so the
        # gate asserts the provable half plus the interior limit trend and
        # reports the nodewise verdict alongside.
        ok = shrinking and lower_ok
        report = {
            "config": _public_config(cfg),
            "rows": [
                {
                    "d": r.d,
                    "max_gap": r.max_gap,
                    "interior_max_gap": r.interior_max_gap,
                    "bound_ok": r.bound_ok,
                    "min_lower_margin": r.min_lower_margin,
                    "max_overshoot": r.max_overshoot,
                    "epsilon": r.epsilon,
                }
                for r in rows
            ],
            "interior_gap_decreases_with_d": shrinking,
            "lower_bound_ok": lower_ok,
            "nodewise_sandwich_ok": all(r.bound_ok for r in rows),
        }
        outputs = [
            (
                outdir / "d_sweep.csv",
                _csv_text(
                    (
                        "d",
                        "max_gap",
                        "interior_max_gap",
                        "bound_ok",
                        "min_lower_margin",
                        "max_overshoot",
                        "epsilon",
                    ),
                    [
                        (
                            r.d,
                            r.max_gap,
                            r.interior_max_gap,
                            r.bound_ok,
                            r.min_lower_margin,
                            r.max_overshoot,
                            r.epsilon,
                        )
                        for r in rows
                    ],
                ),
            ),
            (outdir / "sweep_report.json", _json_text(report)),
        ]
        payload = {"monotone": shrinking, "lower_bound_ok": lower_ok}
    _emit(cfg, outputs, payload, "ok" if ok else "check-failed")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


def _grid(cfg: dict) -> PdeGrid:
    try:
        return PdeGrid(cfg["grid_n"])
    except ValueError as exc:
        raise UsageError(str(exc))


# ---------------------------------------------------------------------------
# validate: run every module's invariant suite at one parameter point.


def _run_suite(name: str, fn: Callable[[], tuple[bool, dict]]) -> dict:
    try:
        passed, detail = fn()
    except Exception as exc:  # a crash is a failed suite, not a crashed CLI
        return {"name": name, "passed": False, "detail": {"error": f"{type(exc).__name__}: {exc}"}}
    return {"name": name, "passed": bool(passed), "detail": detail}


def _cmd_validate(cfg: dict) -> int:
    params = _model_params(cfg)
    seed = cfg["seed"]
    grid = _grid(cfg)
    mixed_start = GridState(params.n1, 0)  # worst case for absorption at kappa ~ 0

    def suite_exchange() -> tuple[bool, dict]:
        ex = build_exchange_matrix(params)
        arr = ex.as_array()
        row_err = float(np.abs(arr.sum(axis=1) - 1.0).max())
        in_unit = bool(arr.min() >= 0.0 and arr.max() <= 1.0)
        rng = np.random.default_rng(seed)
        x = rng.random((256, 2))
        y1, y2 = ex.apply(x[:, 0], x[:, 1])
        cons_err = float(np.abs((y1 + params.d * y2) - (x[:, 0] + params.d * x[:, 1])).max())
        corners_fixed = ex.apply(0.0, 0.0) == (0.0, 0.0) and ex.apply(1.0, 1.0) == (1.0, 1.0)
        passed = row_err <= 1e-12 and in_unit and cons_err <= 1e-12 and corners_fixed
        return passed, {"row_sum_error": row_err, "conservation_error": cons_err}

    def suite_kernel() -> tuple[bool, dict]:
        if params.n_states > STATE_CAP_DEFAULT:
            return True, {"skipped": f"state space {params.n_states} above the dense cap"}
        tm = build_transition_matrix(params)
        sums_err = float(np.abs(tm.matrix.sum(axis=1) - 1.0).max())
        nonneg = bool(tm.matrix.min() >= 0.0)
        means = conditional_means(tm)
        j1 = np.repeat(np.arange(params.n1 + 1), params.n2 + 1)
        j2 = np.tile(np.arange(params.n2 + 1), params.n1 + 1)
        a1, a2 = build_exchange_matrix(params).apply(j1 / params.n1, j2 / params.n2)
        mean_err = float(
            max(np.abs(means[:, 0] - a1).max(), np.abs(means[:, 1] - a2).max())
        )
        passed = sums_err <= 1e-12 and nonneg and mean_err <= 1e-12
        return passed, {"row_sum_error": sums_err, "mean_identity_error": mean_err}

    def suite_generator() -> tuple[bool, dict]:
        conserved = generator_apply(lambda x1, x2: x1 + params.d * x2, params)
        constant = generator_apply(lambda x1, x2: 1.0 + 0.0 * x1, params)
        err = float(max(np.abs(conserved.values).max(), np.abs(constant.values).max()))
        return err <= 1e-12, {"max_generator_error": err}

    def suite_hitting() -> tuple[bool, dict]:
        if params.kappa == 0.0:
            return True, {"skipped": "kappa = 0: no absorption path, nothing to solve"}
        if params.n_states > STATE_CAP_DEFAULT:
            return True, {"skipped": f"state space {params.n_states} above the dense cap"}
        table = solve_hitting_times(params)
        vals = table.field.values
        swap_err = float(np.abs(vals - vals[::-1, ::-1]).max())
        corners_zero = vals[0, 0] == 0.0 and vals[-1, -1] == 0.0
        nonneg = bool(vals.min() >= 0.0)
        mc = estimate_extinction_time(
            params,
            mixed_start,
            McConfig(replicates=cfg["replicates"], seed=seed),
        )
        exact_value = table.value(mixed_start.j1, mixed_start.j2)
        mc_ok = (
            mc.censored_fraction == 0.0
            and abs(mc.mean_time - exact_value) <= 4.0 * max(mc.stderr, 1e-12)
        )
        passed = (
            table.residual <= 1e-10 and swap_err <= 5e-9 and corners_zero and nonneg and mc_ok
        )
        return passed, {
            "residual": table.residual,
            "species_swap_error": swap_err,
            "mc_mean": mc.mean_time,
            "mc_stderr": mc.stderr,
            "mc_censored_fraction": mc.censored_fraction,
            "exact_value": exact_value,
        }

    def suite_pde() -> tuple[bool, dict]:
        op = discretize_Ld(grid, params.d, params.kappa)
        detail: dict[str, Any] = {"certificate": op.certificate}
        ok = bool(op.certificate.get("is_m_matrix", False))
        if params.kappa > 0.0:
            tau = solve_elliptic(op)
            interior_min = float(np.sort(tau.values.ravel())[2])
            x1, x2 = tau.nodes()
            slack = calibrate_slack(params.d)
            eps = slack.epsilon(grid.h)
            lower_margin = float((tau.values - tau_lower(x1, x2, params.d)).min())
            detail.update(
                {
                    "elliptic_residual": elliptic_residual(op, tau),
                    "interior_min": interior_min,
                    "lower_bound_margin": lower_margin,
                    "epsilon": eps,
                }
            )
            ok = ok and interior_min > 0.0 and lower_margin >= -eps
        initial = Field.from_function(grid.n, grid.n, lambda x1_, x2_: x1_ * (1.0 - x1_))
        par = solve_parabolic(op, initial, horizon=0.5, nt=20)
        detail.update({"parabolic_min": par.min_value, "sup_nonincreasing": par.sup_nonincreasing})
        return ok and par.min_value >= -1e-10 and par.sup_nonincreasing, detail

    def suite_bounds() -> tuple[bool, dict]:
        if params.kappa == 0.0:
            return True, {"skipped": "kappa = 0: barrier undefined"}
        grid1d = np.linspace(0.02, 0.98, 50)
        x1, x2 = np.meshgrid(grid1d, grid1d, indexing="ij")
        bounds = analytic_bounds(x1, x2, params.d, params.kappa)
        identity_err = float(np.nanmax(np.abs(bounds.residual_identity)))
        corners = [
            tau_lower(0.0, 0.0, params.d),
            tau_lower(1.0, 1.0, params.d),
            float(analytic_bounds(0.0, 0.0, params.d, params.kappa).kappa_barrier),
            float(analytic_bounds(1.0, 1.0, params.d, params.kappa).kappa_barrier),
        ]
        vanish = max(abs(c) for c in corners)
        passed = identity_err <= 1e-12 and vanish == 0.0
        return passed, {"identity_error": identity_err, "corner_values": corners}

    suites = [
        _run_suite("exchange", suite_exchange),
        _run_suite("kernel", suite_kernel),
        _run_suite("generator", suite_generator),
        _run_suite("hitting", suite_hitting),
        _run_suite("pde", suite_pde),
        _run_suite("bounds", suite_bounds),
    ]
    ok = all(s["passed"] for s in suites)
    report = {"config": _public_config(cfg), "suites": suites, "all_passed": ok}
    outdir = Path(cfg["output_dir"])
    outputs = [(outdir / "validate_report.json", _json_text(report))]
    payload = {
        "all_passed": ok,
        "failed": [s["name"] for s in suites if not s["passed"]],
    }
    _emit(cfg, outputs, payload, "ok" if ok else "check-failed")
    return EXIT_OK if ok else EXIT_CHECK_FAILED


_DISPATCH: dict[str, Callable[[dict], int]] = {
    "simulate": _cmd_simulate,
    "exact-hitting": _cmd_exact_hitting,
    "pde-elliptic": _cmd_pde_elliptic,
    "pde-parabolic": _cmd_pde_parabolic,
    "compare": _cmd_compare,
    "sweep": _cmd_sweep,
    "validate": _cmd_validate,
}


# ---------------------------------------------------------------------------
# Argument parsing.


def _pair(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected 'j1,j2'")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError("expected two integers 'j1,j2'")


def _float_list(text: str) -> list[float]:
    try:
        values = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated numbers")
    if not values:
        raise argparse.ArgumentTypeError("expected at least one number")
    return values


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="twopatch",
        description=(
            "Two-patch Wright-Fisher laboratory: exact chain, Monte Carlo, "
            "degenerate-diffusion PDE solves and theorem-level checks."
        ),
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def add(name: str, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, help=help_text, parents=[], add_help=True)
        p.add_argument("--config", help="JSON config file (flags override it)")
        p.add_argument("--output-dir", dest="output_dir", help="artifact directory")
        return p

    p = add("simulate", "Monte Carlo extinction-time estimate")
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--max-steps", dest="max_steps", type=int)
    p.add_argument("--start", type=_pair, help="start state 'j1,j2' (default n1//2,n2//2)")

    p = add("exact-hitting", "exact expected hitting times via the dense kernel")
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--kappa", type=float)

    p = add("pde-elliptic", "solve the extinction-time equation -L tau = 1")
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--d", type=float, help="distortion (overrides n2/n1)")
    p.add_argument("--grid-n", dest="grid_n", type=int)

    p = add("pde-parabolic", "implicit-Euler solve of u_t = L u")
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--d", type=float)
    p.add_argument("--grid-n", dest="grid_n", type=int)
    p.add_argument("--horizon", type=float)
    p.add_argument("--nt", type=int)

    p = add("compare", "verify one closed-form bound against the elliptic solve")
    p.add_argument("--check", choices=("lower-bound", "barrier", "sandwich"))
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--d", type=float)
    p.add_argument("--grid-n", dest="grid_n", type=int)

    p = add("sweep", "elliptic solves across kappas (or across d with --d-list)")
    p.add_argument("--kappas", type=_float_list, help="comma-separated kappa values")
    p.add_argument("--d-list", dest="d_list", type=_float_list, help="comma-separated d values")
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--kappa", type=float, help="fixed kappa for --d-list sweeps")
    p.add_argument("--d", type=float, help="fixed distortion for --kappas sweeps")
    p.add_argument("--grid-n", dest="grid_n", type=int)

    p = add("validate", "run every module's invariant suite at one parameter point")
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--kappa", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--grid-n", dest="grid_n", type=int)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        args = _build_parser().parse_args(list(argv))
        flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
        cfg = _resolve_config(args.command, flags, args.config)
        return _DISPATCH[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MMatrixError, EllipticSolveError, LinearSolveError) as exc:
        print(f"check failed: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
