"""Command line front end: sweeps, trade-off curves and report tables.

Subcommands
-----------
``visibility``
    Critical-visibility sweeps for the built-in instrument families
    against a reference noise model.  Rows: ``(gamma, d, noise, v_sdp,
    v_analytic, residual)`` where ``v_analytic`` is the closed form when
    one is known and ``residual`` is the largest constraint violation of
    the returned solution.
``hemisphere``
    Trade-off curves of the state-discrimination game on a ``p_win``
    grid.  Rows: ``(p_win, f_pi, f_q, f_unsharp_z)``.
``seesaw``
    Sequential CHSH alternating optimisation over a floor grid.  Rows:
    ``(floor, s_ab, s_ac, seed)``.

Every command is deterministic given its configuration and seed.  CSV
cells carry 17 significant digits so parsed floats agree bit for bit
with the JSON output of the same run.  Exit codes: 0 success, 2
configuration error, 3 solver failure, 4 I/O failure.  Command line
flags override ``INSTRASIM_*`` environment variables (``FORMAT``,
``OUTPUT``, ``TOL``, ``SEED``, ``JOBS``), which override defaults.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from .analytic import (
    v_deph_highd_bound,
    v_deph_qubit,
    v_white_qubit,
    v_worst_qubit,
)
from .applications import pi_tradeoff_curves, seesaw_sequential_chsh
from .instruments import (
    NoiseModel,
    kraus_to_choi,
    luders_unsharp,
    noise_instrument,
    sic_instrument,
)
from .simulability import (
    OPTIMAL,
    qubit_critical_visibility,
    relaxed_critical_visibility,
    worst_case_visibility,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4

_NOISE_TAGS = ("dephasing", "white", "worst")
_DEFAULT_PWIN_GRID = "0.5:0.75:0.0125"


def parse_grid(text: str) -> list[float]:
    """Parse a value grid: either a single number or ``start:stop:step``.

    Endpoints are inclusive within half a step, so ``0:1:0.05`` yields 21
    points even when the arithmetic lands on 1.0000000000000002.
    """
    parts = text.split(":")
    if len(parts) == 1:
        value = float(parts[0])
        if not math.isfinite(value):
            raise ValueError(f"grid value must be finite, got {text!r}")
        return [value]
    if len(parts) != 3:
        raise ValueError(
            f"grid must be a number or 'start:stop:step', got {text!r}"
        )
    start, stop, step = (float(p) for p in parts)
    if not all(math.isfinite(v) for v in (start, stop, step)):
        raise ValueError(f"grid endpoints must be finite, got {text!r}")
    if step <= 0.0:
        raise ValueError(f"grid step must be positive, got {step}")
    if stop < start:
        raise ValueError(f"grid stop must be >= start, got {text!r}")
    count = int(math.floor((stop - start) / step + 0.5)) + 1
    return [start + k * step for k in range(max(count, 1))]


@dataclass(frozen=True)
class RunConfig:
    """Validated invocation of one subcommand.

    ``params`` holds the command-specific knobs (grids, tags, restart
    counts); the shared fields cover output routing and numerics.
    """

    command: str
    params: dict
    fmt: str
    output: str | None
    tol: float
    seed: int
    jobs: int

    def __post_init__(self):
        if self.command not in ("visibility", "hemisphere", "seesaw"):
            raise ValueError(f"unknown command {self.command!r}")
        if self.fmt not in ("json", "csv"):
            raise ValueError(f"format must be json or csv, got {self.fmt!r}")
        if not (self.tol > 0.0 and math.isfinite(self.tol)):
            raise ValueError(f"tol must be a positive real, got {self.tol}")
        if self.seed < 0:
            raise ValueError(f"seed must be >= 0, got {self.seed}")
        if self.jobs < 1:
            raise ValueError(f"jobs must be >= 1, got {self.jobs}")


def _env(name: str):
    return os.environ.get(f"INSTRASIM_{name}")


def _resolve(flag_value, env_name: str, cast, default):
    """Flag > environment > default, with env parse errors surfaced."""
    if flag_value is not None:
        return flag_value
    raw = _env(env_name)
    if raw is not None:
        try:
            return cast(raw)
        except (TypeError, ValueError):
            raise ValueError(
                f"environment variable INSTRASIM_{env_name}={raw!r} is not "
                f"a valid {cast.__name__}"
            ) from None
    return default


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="instrasim",
        description="Projective simulability sweeps and sequential-game tables.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--format", choices=("json", "csv"), default=None)
        p.add_argument("--output", default=None, help="file path (default stdout)")
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--jobs", type=int, default=None)

    vis = sub.add_parser("visibility", help="critical-visibility sweep")
    vis.add_argument("--instrument", choices=("luders", "sic"), default="luders")
    vis.add_argument("--d", type=int, default=2)
    vis.add_argument("--noise", choices=_NOISE_TAGS, default="dephasing")
    gamma_group = vis.add_mutually_exclusive_group()
    gamma_group.add_argument("--gamma", type=float, default=None)
    gamma_group.add_argument("--gamma-grid", default=None)
    vis.add_argument(
        "--relaxed",
        action="store_true",
        help="solve the reduction-map relaxation (required for d > 2, "
        "where the result is an upper bound)",
    )
    add_common(vis)

    hemi = sub.add_parser("hemisphere", help="discrimination trade-off curves")
    hemi.add_argument("--pwin-grid", default=_DEFAULT_PWIN_GRID)
    add_common(hemi)

    see = sub.add_parser("seesaw", help="sequential CHSH floor sweep")
    floor_group = see.add_mutually_exclusive_group(required=True)
    floor_group.add_argument("--floor", type=float, default=None)
    floor_group.add_argument("--floor-grid", default=None)
    see.add_argument("--restarts", type=int, default=25)
    add_common(see)

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    params: dict = {}
    if args.command == "visibility":
        params = {
            "instrument": args.instrument,
            "d": args.d,
            "noise": args.noise,
            "gamma": args.gamma,
            "gamma_grid": args.gamma_grid,
            "relaxed": bool(args.relaxed),
        }
    elif args.command == "hemisphere":
        params = {"pwin_grid": args.pwin_grid}
    elif args.command == "seesaw":
        params = {
            "floor": args.floor,
            "floor_grid": args.floor_grid,
            "restarts": args.restarts,
        }
    return RunConfig(
        command=args.command,
        params=params,
        fmt=_resolve(args.format, "FORMAT", str, "csv"),
        output=_resolve(args.output, "OUTPUT", str, None),
        tol=_resolve(args.tol, "TOL", float, 1e-6),
        seed=_resolve(args.seed, "SEED", int, 0),
        jobs=_resolve(args.jobs, "JOBS", int, 1),
    )


def _map_points(worker, tasks: list, jobs: int) -> list[dict]:
    """Run ``worker`` over ``tasks``, preserving grid order."""
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(worker, tasks))
    return [worker(t) for t in tasks]


# ===== visibility =====


def _closed_form(
    instrument: str, d: int, noise: str, gamma: float | None
) -> float | None:
    if instrument != "luders" or gamma is None:
        return None
    if noise == "dephasing":
        return v_deph_qubit(gamma) if d == 2 else v_deph_highd_bound(d, gamma)
    if d != 2:
        return None
    if noise == "white":
        if not 0.0 < gamma < 1.0:
            return None
        value = v_white_qubit(gamma)
        assert isinstance(value, float)
        return value
    value = v_worst_qubit(gamma)
    assert isinstance(value, float)
    return value


def _visibility_point(task: tuple) -> dict:
    instrument, d, noise, gamma, relaxed = task
    if instrument == "sic":
        target = kraus_to_choi(sic_instrument())
    else:
        target = kraus_to_choi(luders_unsharp(d, gamma))
    if noise == "worst":
        result = worst_case_visibility(target)
    else:
        reference = noise_instrument(
            NoiseModel(noise), target.n_outcomes, target.dA, target.dA_prime
        )
        if relaxed:
            result = relaxed_critical_visibility(target, reference)
        else:
            result = qubit_critical_visibility(target, reference)
    if result.status != OPTIMAL:
        raise RuntimeError(
            f"visibility solve returned {result.status} "
            f"(instrument={instrument}, d={d}, noise={noise}, gamma={gamma})"
        )
    residual = max(
        (v for k, v in result.solver_stats.items() if k.startswith("residual")),
        default=0.0,
    )
    return {
        "gamma": gamma,
        "d": d,
        "noise": noise,
        "v_sdp": result.visibility,
        "v_analytic": _closed_form(instrument, d, noise, gamma),
        "residual": residual,
    }


_VISIBILITY_COLUMNS = ("gamma", "d", "noise", "v_sdp", "v_analytic", "residual")


def _cmd_visibility(config: RunConfig) -> tuple[tuple[str, ...], list[dict]]:
    p = config.params
    instrument, d, noise = p["instrument"], p["d"], p["noise"]
    if d < 2:
        raise ValueError(f"d must be >= 2, got {d}")
    if instrument == "sic":
        if d != 2:
            raise ValueError("the sic instrument is qubit-only; drop --d")
        if p["gamma"] is not None or p["gamma_grid"] is not None:
            raise ValueError("the sic instrument has no sharpness parameter")
        gammas: list[float | None] = [None]
    else:
        if p["gamma"] is not None:
            gammas = [p["gamma"]]
        elif p["gamma_grid"] is not None:
            gammas = list(parse_grid(p["gamma_grid"]))
        else:
            raise ValueError("luders requires --gamma or --gamma-grid")
    if d > 2 and not p["relaxed"]:
        raise ValueError(
            "d > 2 is solved as a relaxation whose value is an upper bound; "
            "pass --relaxed to acknowledge"
        )
    tasks = [(instrument, d, noise, g, p["relaxed"]) for g in gammas]
    rows = _map_points(_visibility_point, tasks, config.jobs)
    for row in rows:
        if row["v_analytic"] is not None:
            gap = abs(row["v_sdp"] - row["v_analytic"])
            if gap > max(config.tol, 1e2 * row["residual"]):
                logger.warning(
                    "v_sdp deviates from the closed form by %.3g at gamma=%s",
                    gap,
                    row["gamma"],
                )
    return _VISIBILITY_COLUMNS, rows


# ===== hemisphere =====

_HEMISPHERE_COLUMNS = ("p_win", "f_pi", "f_q", "f_unsharp_z")


def _cmd_hemisphere(config: RunConfig) -> tuple[tuple[str, ...], list[dict]]:
    grid = parse_grid(config.params["pwin_grid"])
    rows = []
    for p_win in grid:
        f_pi, f_q = pi_tradeoff_curves(p_win)
        gamma = 4.0 * (p_win - 0.5)
        f_unsharp = 2.0 / 3.0 + math.sqrt(max(1.0 - gamma * gamma, 0.0)) / 3.0
        rows.append(
            {"p_win": p_win, "f_pi": f_pi, "f_q": f_q, "f_unsharp_z": f_unsharp}
        )
    return _HEMISPHERE_COLUMNS, rows


# ===== seesaw =====

_SEESAW_COLUMNS = ("floor", "s_ab", "s_ac", "seed")


def _seesaw_point(task: tuple) -> dict:
    floor, restarts, seed, tol = task
    state = seesaw_sequential_chsh(
        floor, restarts=restarts, seed=seed, improve_tol=tol
    )
    if state.status != "Converged":
        logger.warning(
            "floor %.6g not reached: best s_ab=%.6f, s_ac=%.6f",
            floor,
            state.s_ab,
            state.s_ac,
        )
    return {"floor": floor, "s_ab": state.s_ab, "s_ac": state.s_ac, "seed": seed}


def _cmd_seesaw(config: RunConfig) -> tuple[tuple[str, ...], list[dict]]:
    p = config.params
    if p["restarts"] < 1:
        raise ValueError(f"restarts must be >= 1, got {p['restarts']}")
    if p["floor"] is not None:
        floors = [p["floor"]]
    else:
        floors = list(parse_grid(p["floor_grid"]))
    tasks = [(f, p["restarts"], config.seed, config.tol) for f in floors]
    rows = _map_points(_seesaw_point, tasks, config.jobs)
    return _SEESAW_COLUMNS, rows


# ===== output =====


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_output(
    config: RunConfig, columns: tuple[str, ...], rows: list[dict]
) -> None:
    if config.output is None:
        _emit(config, columns, rows, sys.stdout)
        return
    with open(config.output, "w", newline="") as fh:
        _emit(config, columns, rows, fh)


def _emit(config: RunConfig, columns: tuple[str, ...], rows: list[dict], fh) -> None:
    if config.fmt == "csv":
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_format_cell(row[c]) for c in columns])
    else:
        payload = {
            "command": config.command,
            "columns": list(columns),
            "rows": [{c: row[c] for c in columns} for row in rows],
        }
        json.dump(payload, fh, indent=2)
        fh.write("\n")


_COMMANDS = {
    "visibility": _cmd_visibility,
    "hemisphere": _cmd_hemisphere,
    "seesaw": _cmd_seesaw,
}


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad flags and 0 on --help, matching the
        # documented codes
        return int(exc.code or 0)
    try:
        config = _config_from_args(args)
        columns, rows = _COMMANDS[config.command](config)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RuntimeError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    try:
        _write_output(config, columns, rows)
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
