"""Command-line front end: parameter sweeps and the training-length calculator.

Subcommands
-----------
pout-sweep   outage probability vs density, simulated plus analytic bounds
tc-sweep     density inversion to target outage, with capacity brackets
train-len    training-length formula and capacity-loss bound

Configuration is a flat ``key = value`` text file ('#' starts a comment);
command-line flags override config values.  Every run writes a CSV and a
JSON manifest next to it.  Exit codes: 0 success, 2 bad configuration,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import subprocess
import sys
import time
from pathlib import Path

from . import analytic, montecarlo
from .errors import NumericalError, ParameterError
from .network import SystemParams

_CONFIG_KEYS = {
    "n_antennas": int,
    "n_cancel": int,
    "array_gain": int,
    "pathloss_alpha": float,
    "sir_threshold": float,
    "mean_node_count": float,
    "train_len": int,
    "trials": int,
    "master_seed": int,
    "threads": int,
    "mode": str,
    "output": str,
    "lambda_grid": "floats",
    "eps_grid": "floats",
    "L_grid": "ints",
    "M_list": "ints",
    "rel_tol": float,
    "max_expand": int,
    "lambda_lo": float,
    "lambda_hi": float,
}

_MODE_MAP = {
    "perfect": "perfect",
    "explicit": "imperfect_explicit",
    "shortcut": "imperfect_shortcut",
}


def _parse_value(key: str, raw: str):
    kind = _CONFIG_KEYS[key]
    raw = raw.strip()
    if kind == "floats":
        return [float(v) for v in raw.split(",") if v.strip()]
    if kind == "ints":
        return [int(v) for v in raw.split(",") if v.strip()]
    return kind(raw)


def read_config(path) -> dict:
    """Parse a flat key = value config file, validating every key."""
    cfg = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _CONFIG_KEYS:
            raise ParameterError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            cfg[key] = _parse_value(key, raw)
        except ValueError as exc:
            raise ParameterError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return cfg


def _build_params(cfg: dict, n_cancel: int, density: float,
                  train_len: int | None) -> SystemParams:
    if "n_antennas" in cfg:
        n_ant = cfg["n_antennas"]
    else:
        n_ant = n_cancel + cfg.get("array_gain", 2)
    return SystemParams(
        n_antennas=n_ant,
        n_cancel=n_cancel,
        pathloss_alpha=cfg.get("pathloss_alpha", 4.0),
        sir_threshold=cfg.get("sir_threshold", 3.0),
        density=density,
        train_len=train_len,
        mean_node_count=cfg.get("mean_node_count", 200.0),
    )


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
            cwd=Path(__file__).resolve().parent,
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except OSError:
        pass
    return "unknown"


def _write_manifest(out_path: Path, command: str, cfg: dict, seed: int,
                    wall: float, columns) -> None:
    manifest = {
        "command": command,
        "config": {k: cfg[k] for k in sorted(cfg)},
        "master_seed": seed,
        "git_describe": _git_describe(),
        "wall_time_s": round(wall, 3),
        "output": str(out_path),
        "columns": list(columns),
    }
    out_path.with_suffix(out_path.suffix + ".manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def _merged_config(args) -> dict:
    cfg = read_config(args.config) if args.config else {}
    if args.seed is not None:
        cfg["master_seed"] = args.seed
    if args.trials is not None:
        cfg["trials"] = args.trials
    if args.threads is not None:
        cfg["threads"] = args.threads
    if args.out is not None:
        cfg["output"] = args.out
    if args.mode is not None:
        cfg["mode"] = args.mode
    return cfg


def cmd_pout_sweep(args) -> int:
    cfg = _merged_config(args)
    lambdas = cfg.get("lambda_grid", [])
    if not lambdas:
        raise ParameterError("lambda_grid must be a non-empty list")
    l_grid = cfg.get("L_grid", [1, 3])
    modes = [m.strip() for m in cfg.get("mode", "perfect").split(",")]
    for m in modes:
        if m not in _MODE_MAP:
            raise ParameterError(f"unknown mode {m!r}")
    trials = cfg.get("trials", 100_000)
    seed = cfg.get("master_seed", 0)
    threads = cfg.get("threads", 1)
    out_path = Path(cfg.get("output", "pout_sweep.csv"))
    train_len = cfg.get("train_len")

    columns = ["lambda", "mode", "L", "M", "p_sim", "ci", "p_lower", "p_upper"]
    t0 = time.perf_counter()
    rows = []
    for n_cancel in l_grid:
        for lam in lambdas:
            params = _build_params(cfg, n_cancel, lam, train_len)
            report = analytic.pout_upper(lam, params)
            for mode in modes:
                est = montecarlo.estimate_outage(
                    params, trials, _MODE_MAP[mode], seed, threads=threads
                )
                rows.append([
                    repr(lam), mode, n_cancel,
                    "" if (mode == "perfect" or train_len is None) else train_len,
                    repr(est.p_hat), repr(est.ci_halfwidth),
                    repr(report.lower), repr(report.upper),
                ])
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        w.writerows(rows)
    _write_manifest(out_path, "pout-sweep", cfg, seed, time.perf_counter() - t0, columns)
    print(f"wrote {out_path} ({len(rows)} rows)")
    return 0


def cmd_tc_sweep(args) -> int:
    cfg = _merged_config(args)
    eps_grid = cfg.get("eps_grid", [])
    if not eps_grid:
        raise ParameterError("eps_grid must be a non-empty list")
    l_grid = cfg.get("L_grid", [1])
    m_list = cfg.get("M_list", [None])
    mode = cfg.get("mode", "perfect")
    if mode not in _MODE_MAP:
        raise ParameterError(f"unknown mode {mode!r}")
    if mode != "perfect" and cfg.get("M_list") is None and cfg.get("train_len") is None:
        raise ParameterError("imperfect modes need M_list or train_len")
    if mode == "perfect":
        m_list = [None]
    elif cfg.get("M_list") is None:
        m_list = [cfg["train_len"]]
    trials = cfg.get("trials", 100_000)
    seed = cfg.get("master_seed", 0)
    threads = cfg.get("threads", 1)
    rel_tol = cfg.get("rel_tol", 0.02)
    max_expand = cfg.get("max_expand", 40)
    bracket = None
    if "lambda_lo" in cfg or "lambda_hi" in cfg:
        if not ("lambda_lo" in cfg and "lambda_hi" in cfg):
            raise ParameterError("lambda_lo and lambda_hi must be given together")
        bracket = (cfg["lambda_lo"], cfg["lambda_hi"])
    out_path = Path(cfg.get("output", "tc_sweep.csv"))

    columns = ["eps", "L", "M", "lambda_star", "capacity", "bracket_lo", "bracket_hi"]
    t0 = time.perf_counter()
    rows = []
    for n_cancel in l_grid:
        for m_train in m_list:
            for eps in eps_grid:
                params = _build_params(cfg, n_cancel, 1.0, m_train)
                res = montecarlo.invert_density(
                    params, eps, trials=trials, mode=_MODE_MAP[mode],
                    master_seed=seed, rel_tol=rel_tol, max_expand=max_expand,
                    threads=threads, bracket=bracket,
                )
                lo, hi = analytic.tc_asymptotic_eps(eps, params)
                rows.append([
                    repr(eps), n_cancel, "" if m_train is None else m_train,
                    repr(res.lambda_star), repr(res.capacity),
                    "" if lo is None else repr(lo),
                    "" if hi is None else repr(hi),
                ])
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        w.writerows(rows)
    _write_manifest(out_path, "tc-sweep", cfg, seed, time.perf_counter() - t0, columns)
    print(f"wrote {out_path} ({len(rows)} rows)")
    return 0


def cmd_train_len(args) -> int:
    result = analytic.training_length(args.n_cancel, args.theta_p, args.theta_b)
    loss = analytic.capacity_loss_bound(args.theta_p, args.theta_b, args.eps, args.theta)
    print(f"M = {result.m}")
    print(f"omega = {result.omega!r}")
    print(
        f"capacity loss bound (eps={args.eps:g}, theta={args.theta:g}): {loss!r}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sicnet", description=__doc__.split("\n")[0])
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", type=str, default=None, help="key=value config file")
        sp.add_argument("--seed", type=int, default=None, help="master seed")
        sp.add_argument("--trials", type=int, default=None, help="trials per grid point")
        sp.add_argument("--threads", type=int, default=None, help="worker threads")
        sp.add_argument("--out", type=str, default=None, help="output CSV path")
        sp.add_argument(
            "--mode", type=str, default=None,
            help="perfect, explicit, or shortcut (comma list for pout-sweep)",
        )

    sp = sub.add_parser("pout-sweep", help="outage probability sweep over density")
    add_common(sp)
    sp.set_defaults(fn=cmd_pout_sweep)

    sp = sub.add_parser("tc-sweep", help="transmission capacity over outage targets")
    add_common(sp)
    sp.set_defaults(fn=cmd_tc_sweep)

    sp = sub.add_parser("train-len", help="training-length calculator")
    sp.add_argument("n_cancel", type=int)
    sp.add_argument("theta_p", type=float)
    sp.add_argument("theta_b", type=float)
    sp.add_argument("--theta", type=float, default=3.0, help="SIR threshold (linear)")
    sp.add_argument("--eps", type=float, default=0.01, help="outage target for the loss bound")
    sp.set_defaults(fn=cmd_train_len)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (ParameterError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
