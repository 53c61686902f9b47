"""Monte Carlo outage estimation, density inversion, and capacity.

Single realizations go through :func:`sir_perfect` / :func:`sir_imperfect`;
bulk estimation uses a vectorized engine that simulates thousands of trials
per batch.  Batches draw from independent substreams keyed by
``(master_seed, stream_base + batch_index)`` and reduce order-independently,
so results are reproducible for a fixed seed regardless of thread count.

Density inversion finds the density at which the outage probability hits a
target by bisection on the density axis, with a fixed trial budget per
evaluation and termination either when the estimate's confidence interval
contains the target or when the bracket is narrower than the tolerance.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import optimize as _so

from . import analytic
from .beamforming import (
    estimate_csi_explicit,
    residual_noise_shortcut,
    zf_mrc,
    zf_mrc_batch,
)
from .errors import ParameterError, SearchError
from .network import (
    CancellationSplit,
    NetworkRealization,
    SystemParams,
    sample_batch,
    split_batch,
    split_interferers,
)
from .specrand import RngStream, _as_generator

__all__ = [
    "OutageEstimate",
    "TcResult",
    "MODES",
    "sir_perfect",
    "sir_imperfect",
    "estimate_outage",
    "collect_trials",
    "invert_density",
    "capacity",
    "write_outage_csv",
]

MODES = ("perfect", "imperfect_explicit", "imperfect_shortcut")

# Stream indices are partitioned in blocks so that distinct inversion
# evaluations can never collide with each other's per-batch substreams.
_STREAM_BLOCK = 1 << 32


@dataclass(frozen=True)
class OutageEstimate:
    """Monte Carlo outage probability with a 95% normal-approximation CI."""

    p_hat: float
    trials: int
    ci_halfwidth: float
    mode: str


@dataclass(frozen=True)
class TcResult:
    """Result of inverting density to a target outage probability."""

    epsilon: float
    lambda_star: float
    capacity: float
    evaluations: int = 0
    bracket_lo: float = 0.0
    bracket_hi: float = 0.0
    p_hat: float = float("nan")
    ci_halfwidth: float = float("nan")


def capacity(eps: float, density: float, sir_threshold: float) -> float:
    """Area spectral throughput at outage target eps and the given density:
    ``(1 - eps) * log2(1 + theta) * density``."""
    return (1.0 - eps) * math.log2(1.0 + sir_threshold) * density


# ---------------------------------------------------------------------------
# Single-realization operations
# ---------------------------------------------------------------------------

def sir_perfect(real: NetworkRealization, split: CancellationSplit) -> float:
    """SIR of the typical receiver with perfectly canceled strongest set.

    Returns infinity when no uncanceled interference remains (counted as a
    non-outage by the estimators).
    """
    nulled = [real.interferers[i].eff_channel for i in split.canceled]
    bf = zf_mrc(real.own_channel, nulled)
    w = bf.signal_power(real.own_channel)
    canceled = set(split.canceled)
    den = 0.0
    for i, itf in enumerate(real.interferers):
        if i not in canceled:
            den += float(np.abs(np.vdot(bf.v0, itf.eff_channel)) ** 2)
    return w / den if den > 0.0 else float("inf")


def sir_imperfect(
    real: NetworkRealization,
    split: CancellationSplit,
    m_train: int,
    mode: str,
    rng,
) -> float:
    """SIR with channel-estimation error in the canceled set.

    ``mode="explicit"`` runs least-squares training and nulls the estimates;
    ``mode="shortcut"`` nulls the true channels and inflates the denominator
    by the distributionally equivalent ``(1 + zeta/M)`` factor.  With no
    canceled interferers both collapse to the perfect-CSI SIR.
    """
    if mode not in ("explicit", "shortcut"):
        raise ParameterError(f"unknown imperfect-CSI mode {mode!r}")
    n_canc = len(split.canceled)
    if n_canc == 0:
        return sir_perfect(real, split)
    if m_train < n_canc:
        raise ParameterError("training length must be >= number of canceled interferers")
    canceled = set(split.canceled)
    if mode == "explicit":
        est = estimate_csi_explicit(real, split, m_train, rng)
        bf = zf_mrc(real.own_channel, est.estimates)
        w = bf.signal_power(real.own_channel)
        den = est.residual_var
        for i, itf in enumerate(real.interferers):
            if i not in canceled:
                den += float(np.abs(np.vdot(bf.v0, itf.eff_channel)) ** 2)
        return w / den if den > 0.0 else float("inf")
    nulled = [real.interferers[i].eff_channel for i in split.canceled]
    bf = zf_mrc(real.own_channel, nulled)
    w = bf.signal_power(real.own_channel)
    i_total = 0.0
    for i, itf in enumerate(real.interferers):
        if i not in canceled:
            i_total += float(np.abs(np.vdot(bf.v0, itf.eff_channel)) ** 2)
    if i_total == 0.0:
        return float("inf")
    den = i_total + residual_noise_shortcut(i_total, n_canc, m_train, rng)
    return w / den


# ---------------------------------------------------------------------------
# Vectorized engine
# ---------------------------------------------------------------------------

_FIELDS = (
    "sir",
    "signal_power",
    "primary_mark",
    "primary_power",
    "secondary_power",
    "total_interference",
    "residual_var",
    "delta_primary",
    "delta_second",
    "count",
)


def _require_train_len(params: SystemParams) -> int:
    if params.train_len is None:
        raise ParameterError("imperfect-CSI modes require params.train_len")
    return params.train_len


def _run_batch(params: SystemParams, n: int, gen, mode: str, want) -> dict:
    """Simulate ``n`` trials and return the requested per-trial arrays."""
    L = params.n_cancel
    theta = params.sir_threshold
    n_rank = L + 2 if "delta_second" in want else L + 1

    batch = sample_batch(params, n, gen)
    K = batch.marks.shape[1]
    canc_idx, canc_ok, ranked_idx, ranked_ok = split_batch(
        batch.marks, batch.counts, L, n_rank
    )
    has_primary = ranked_ok[:, L] if n_rank > L else np.zeros(n, bool)
    primary_idx = ranked_idx[:, L] if n_rank > L else np.zeros(n, np.int64)

    if K == 0:
        nulled = np.zeros((n, L, params.n_antennas), np.complex128)
    else:
        nulled = np.take_along_axis(batch.chan, canc_idx[:, :, None], axis=1)

    sigma_r2 = np.zeros(n)
    if mode == "imperfect_explicit" and L > 0 and K > 0:
        m_train = _require_train_len(params)
        # Estimation noise: projected interference symbols are i.i.d. unit
        # complex Gaussians because the training rows are orthonormal.
        proj = (
            gen.standard_normal((n, K, L, 2)) * np.sqrt(0.5)
        ).view(np.complex128)[..., 0]
        uncanc = batch.valid.copy()
        np.put_along_axis(uncanc, canc_idx, False, axis=1)
        proj[~uncanc] = 0.0
        amp = np.sqrt(batch.path_gain, where=batch.valid, out=np.zeros_like(batch.path_gain))
        hs = amp[:, :, None] * batch.chan
        noise = np.einsum("nkj,nkc->ncj", hs, proj)
        h_canc = np.sqrt(
            np.take_along_axis(batch.path_gain, canc_idx, axis=1)
        )[:, :, None] * nulled
        h_canc = np.where(canc_ok[:, :, None], h_canc, 0.0)
        nulled = h_canc + noise / np.sqrt(m_train)

    v0 = zf_mrc_batch(batch.own_chan, nulled, canc_ok)
    w = np.abs(np.einsum("nj,nj->n", v0.conj(), batch.own_chan)) ** 2

    if K:
        leak = np.abs(np.einsum("nkj,nj->nk", batch.chan, v0.conj())) ** 2
        power = np.where(batch.valid, batch.path_gain * leak, 0.0)
        canc_power = np.take_along_axis(power, canc_idx, axis=1)
        canc_power = np.where(canc_ok, canc_power, 0.0)
        np.put_along_axis(power, canc_idx, 0.0, axis=1)
        i_unc = power.sum(axis=1)
        i_primary = np.where(
            has_primary, np.take_along_axis(power, primary_idx[:, None], axis=1)[:, 0], 0.0
        )
    else:
        power = np.zeros((n, 0))
        canc_power = np.zeros((n, L))
        i_unc = np.zeros(n)
        i_primary = np.zeros(n)

    if mode == "perfect":
        den = i_unc
    elif mode == "imperfect_explicit":
        # Residual from imperfect nulling is exactly the canceled set's leak
        # through the estimate-based beamformer.
        sigma_r2 = canc_power.sum(axis=1)
        den = sigma_r2 + i_unc
    elif mode == "imperfect_shortcut":
        m_train = _require_train_len(params)
        n_canc = np.minimum(batch.counts, L).astype(float)
        zeta = np.where(n_canc > 0, gen.gamma(np.maximum(n_canc, 1.0)), 0.0)
        sigma_r2 = zeta / m_train * i_unc
        den = i_unc + sigma_r2
    else:
        raise ParameterError(f"unknown mode {mode!r}")

    with np.errstate(divide="ignore", invalid="ignore"):
        sir = np.where(den > 0.0, w / np.where(den > 0.0, den, 1.0), np.inf)

    out = {"outage": sir < theta}
    if "sir" in want:
        out["sir"] = sir
    if "signal_power" in want:
        out["signal_power"] = w
    if "primary_mark" in want:
        jp = np.where(
            has_primary,
            np.take_along_axis(batch.marks, primary_idx[:, None], axis=1)[:, 0]
            if K else 0.0,
            np.nan,
        )
        out["primary_mark"] = jp
    if "primary_power" in want:
        out["primary_power"] = i_primary
    if "secondary_power" in want:
        out["secondary_power"] = i_unc - i_primary
    if "total_interference" in want:
        out["total_interference"] = i_unc
    if "residual_var" in want:
        out["residual_var"] = sigma_r2
    if "delta_primary" in want:
        jp = np.take_along_axis(batch.marks, primary_idx[:, None], axis=1)[:, 0] if K else np.ones(n)
        out["delta_primary"] = np.where(has_primary, i_primary / np.where(jp > 0, jp, 1.0), np.nan)
    if "delta_second" in want:
        has_second = ranked_ok[:, L + 1]
        second_idx = ranked_idx[:, L + 1]
        if K:
            js = np.take_along_axis(batch.marks, second_idx[:, None], axis=1)[:, 0]
            ps = np.take_along_axis(power, second_idx[:, None], axis=1)[:, 0]
            out["delta_second"] = np.where(has_second, ps / np.where(js > 0, js, 1.0), np.nan)
        else:
            out["delta_second"] = np.full(n, np.nan)
    if "count" in want:
        out["count"] = batch.counts.astype(float)
    return out


def _auto_batch_size(params: SystemParams, mode: str) -> int:
    k_est = params.mean_node_count + 5.0 * math.sqrt(params.mean_node_count) + 10.0
    budget = 6.0e6 if mode != "imperfect_explicit" else 2.5e6
    bs = int(budget / (k_est * params.n_antennas))
    return max(256, min(bs, 8192))


def _batch_plan(trials: int, batch_size: int):
    start = 0
    idx = 0
    while start < trials:
        size = min(batch_size, trials - start)
        yield idx, start, size
        idx += 1
        start += size


def estimate_outage(
    params: SystemParams,
    trials: int,
    mode: str = "perfect",
    master_seed: int = 0,
    threads: int = 1,
    batch_size: int | None = None,
    stream_base: int = 0,
) -> OutageEstimate:
    """Estimate the outage probability over independent realizations.

    Outage is the strict event ``SIR < sir_threshold``.  The estimate is
    deterministic for a fixed ``master_seed`` (and ``stream_base``)
    regardless of ``threads``.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}")
    if mode != "perfect":
        _require_train_len(params)
    bs = batch_size or _auto_batch_size(params, mode)

    def job(args):
        idx, _, size = args
        gen = RngStream(master_seed, stream_base + idx).generator
        return int(_run_batch(params, size, gen, mode, frozenset())["outage"].sum())

    plan = list(_batch_plan(trials, bs))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outages = sum(pool.map(job, plan))
    else:
        outages = sum(map(job, plan))
    p = outages / trials
    ci = 1.96 * math.sqrt(p * (1.0 - p) / trials)
    return OutageEstimate(p, trials, ci, mode)


def collect_trials(
    params: SystemParams,
    trials: int,
    fields,
    mode: str = "perfect",
    master_seed: int = 0,
    threads: int = 1,
    batch_size: int | None = None,
    stream_base: int = 0,
) -> dict:
    """Simulate trials and return per-trial arrays for the requested fields.

    Available fields: sir, signal_power, primary_mark, primary_power,
    secondary_power, total_interference, residual_var, delta_primary,
    delta_second, count.  Entries are NaN where undefined (e.g. no primary
    interferer in a sparse trial).
    """
    fields = tuple(fields)
    unknown = set(fields) - set(_FIELDS)
    if unknown:
        raise ParameterError(f"unknown fields {sorted(unknown)}")
    if mode not in MODES:
        raise ParameterError(f"mode must be one of {MODES}")
    bs = batch_size or _auto_batch_size(params, mode)
    want = frozenset(fields)
    out = {f: np.empty(trials) for f in fields}

    def job(args):
        idx, start, size = args
        gen = RngStream(master_seed, stream_base + idx).generator
        res = _run_batch(params, size, gen, mode, want)
        for f in fields:
            out[f][start:start + size] = res[f]

    plan = list(_batch_plan(trials, bs))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(job, plan))
    else:
        for args in plan:
            job(args)
    return out


# ---------------------------------------------------------------------------
# Density inversion
# ---------------------------------------------------------------------------

def _initial_bracket(params: SystemParams, eps: float):
    """Starting density bracket from the small-density power law when its
    constant exists, otherwise from the analytic outage bounds."""
    L = params.n_cancel
    ks = analytic.kappas(params)
    if ks.kappa1 is not None:
        guess = (eps / ks.kappa1) ** (1.0 / (L + 1))
        return 0.5 * guess, 2.0 * guess

    def solve(fn):
        lo, hi = None, None
        lam = 1e-12
        prev = fn(lam) - eps
        for _ in range(60):
            nxt = lam * 10.0
            cur = fn(nxt) - eps
            if prev <= 0.0 <= cur:
                lo, hi = lam, nxt
                break
            lam, prev = nxt, cur
            if lam > 1e6:
                break
        if lo is None:
            raise SearchError("analytic bounds never cross the outage target")
        return _so.brentq(lambda x: fn(x) - eps, lo, hi, rtol=1e-6)

    hi = solve(lambda lam: analytic.pout_lower(lam, params, 1e-5))
    lo = solve(lambda lam: analytic.pout_upper(lam, params, 1e-5).upper)
    return 0.8 * lo, 1.25 * hi


def invert_density(
    params: SystemParams,
    eps: float,
    trials: int = 100_000,
    mode: str = "perfect",
    master_seed: int = 0,
    rel_tol: float = 0.02,
    max_expand: int = 40,
    threads: int = 1,
    batch_size: int | None = None,
    bracket: tuple[float, float] | None = None,
) -> TcResult:
    """Find the density whose outage probability equals ``eps``; return it
    with the corresponding transmission capacity.

    Bisection on the density axis with a fixed trial budget per evaluation.
    Terminates when the midpoint estimate's confidence interval contains
    ``eps`` or the bracket's relative width drops below ``rel_tol``.  The
    ``params.density`` field is ignored.  ``bracket`` overrides the
    automatic starting interval.
    """
    if not 0.0 < eps < 1.0:
        raise ParameterError("eps must lie in (0, 1)")
    evals = 0

    def p_hat(lam):
        nonlocal evals
        est = estimate_outage(
            params.with_density(lam), trials, mode, master_seed,
            threads=threads, batch_size=batch_size,
            stream_base=(evals + 1) * _STREAM_BLOCK,
        )
        evals += 1
        return est

    lo, hi = bracket if bracket is not None else _initial_bracket(params, eps)
    if not 0.0 < lo < hi:
        raise ParameterError("bracket must satisfy 0 < lo < hi")
    p_lo = p_hat(lo)
    expansions = 0
    while p_lo.p_hat >= eps:
        if expansions >= max_expand:
            raise SearchError(
                f"no density with outage below {eps:g} found (last tried "
                f"{lo:g}, p_hat {p_lo.p_hat:g})"
            )
        lo *= 0.5
        p_lo = p_hat(lo)
        expansions += 1
    p_hi = p_hat(hi)
    expansions = 0
    while p_hi.p_hat <= eps:
        if expansions >= max_expand:
            raise SearchError(
                f"no density with outage above {eps:g} found (last tried "
                f"{hi:g}, p_hat {p_hi.p_hat:g})"
            )
        hi *= 2.0
        p_hi = p_hat(hi)
        expansions += 1

    mid, est = math.sqrt(lo * hi), None
    while hi / lo - 1.0 > rel_tol:
        mid = math.sqrt(lo * hi)
        est = p_hat(mid)
        if abs(est.p_hat - eps) <= est.ci_halfwidth:
            break
        if est.p_hat > eps:
            hi = mid
        else:
            lo = mid
    else:
        mid = math.sqrt(lo * hi)

    return TcResult(
        epsilon=eps,
        lambda_star=mid,
        capacity=capacity(eps, mid, params.sir_threshold),
        evaluations=evals,
        bracket_lo=lo,
        bracket_hi=hi,
        p_hat=est.p_hat if est else float("nan"),
        ci_halfwidth=est.ci_halfwidth if est else float("nan"),
    )


def write_outage_csv(path, rows) -> None:
    """One row per grid point: (lambda, trials, p_hat, ci, mode, L, N, alpha,
    theta, M, seed)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["lambda", "trials", "p_hat", "ci", "mode", "L", "N", "alpha",
             "theta", "M", "seed"]
        )
        for params, est, seed in rows:
            w.writerow([
                repr(params.density), est.trials, repr(est.p_hat),
                repr(est.ci_halfwidth), est.mode, params.n_cancel,
                params.n_antennas, repr(params.pathloss_alpha),
                repr(params.sir_threshold),
                "" if params.train_len is None else params.train_len,
                seed,
            ])
