"""Poisson network realizations on a disk.

A realization places a Poisson-distributed number of interfering
transmitters uniformly on a disk sized so the intensity matches the target
density, with the typical receiver at the center and its own transmitter at
unit distance.  Every interferer carries an effective channel vector
``h = r**(-alpha/2) * g`` (g a unit complex Gaussian vector from the fading
matrix times the fixed transmit beam) and the scalar mark ``J = ||h||**2``,
the pre-cancellation interference power used to rank interferers.

Two sampling paths are provided: :func:`sample_network` builds one
object-level realization, and :func:`sample_batch` produces flat arrays for
many trials at once (same model, orders of magnitude faster).  The
object path is a thin wrapper over the batch path so the two cannot drift.
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .specrand import RngStream, _as_generator

__all__ = [
    "SystemParams",
    "Interferer",
    "NetworkRealization",
    "CancellationSplit",
    "TrialBatch",
    "sample_network",
    "sample_batch",
    "split_interferers",
    "split_batch",
    "write_realization_csv",
]


@dataclass(frozen=True)
class SystemParams:
    """Scalar model parameters.

    n_antennas      receive antennas per node (N)
    n_cancel        interferers canceled per receiver (L), L <= N - 1
    pathloss_alpha  path-loss exponent, > 2
    sir_threshold   SIR decoding threshold, linear scale
    density         transmitting-node density (nodes per unit area)
    train_len       training sequence length for channel estimation, or
                    None when only perfect CSI is used; must be >= n_cancel
    mean_node_count expected number of interferers on the simulation disk
    """

    n_antennas: int
    n_cancel: int
    pathloss_alpha: float
    sir_threshold: float
    density: float
    train_len: int | None = None
    mean_node_count: float = 200.0

    def __post_init__(self):
        if int(self.n_antennas) != self.n_antennas or self.n_antennas < 1:
            raise ParameterError("n_antennas must be a positive integer")
        if int(self.n_cancel) != self.n_cancel or self.n_cancel < 0:
            raise ParameterError("n_cancel must be a non-negative integer")
        if self.n_cancel > self.n_antennas - 1:
            raise ParameterError("n_cancel must not exceed n_antennas - 1")
        if not self.pathloss_alpha > 2.0:
            raise ParameterError("pathloss_alpha must exceed 2")
        if not self.sir_threshold > 0.0:
            raise ParameterError("sir_threshold must be positive")
        if not self.density > 0.0:
            raise ParameterError("density must be positive")
        if not self.mean_node_count > 0.0:
            raise ParameterError("mean_node_count must be positive")
        if self.train_len is not None:
            if int(self.train_len) != self.train_len or self.train_len < 1:
                raise ParameterError("train_len must be a positive integer")
            if self.train_len < self.n_cancel:
                raise ParameterError("train_len must be >= n_cancel")

    @property
    def array_gain(self) -> int:
        """Spatial degrees of freedom left for the own link, N - L."""
        return self.n_antennas - self.n_cancel

    @property
    def disk_radius(self) -> float:
        """Radius such that the disk holds mean_node_count nodes on average."""
        return float(np.sqrt(self.mean_node_count / (np.pi * self.density)))

    def with_density(self, density: float) -> "SystemParams":
        return dataclasses.replace(self, density=density)


@dataclass(frozen=True)
class Interferer:
    """One interfering transmitter as seen by the typical receiver."""

    distance: float
    eff_channel: np.ndarray       # length-N complex vector, r**(-a/2) scaled
    mark: float                   # pre-cancellation power ||eff_channel||**2


@dataclass(frozen=True)
class NetworkRealization:
    params: SystemParams
    own_channel: np.ndarray       # unit-distance link vector
    interferers: list[Interferer]
    disk_radius: float


@dataclass(frozen=True)
class CancellationSplit:
    """Partition of the interferers of one realization.

    canceled       indices of the min(L, count) strongest interferers
    primary_index  index of the strongest uncanceled interferer, or None
    primary_mark   its pre-cancellation power, or None
    """

    canceled: tuple[int, ...]
    primary_index: int | None
    primary_mark: float | None


@dataclass(frozen=True)
class TrialBatch:
    """Flat arrays describing ``n`` independent realizations.

    Entries with ``valid[i, k] == False`` are padding (trial i has fewer
    interferers than the batch-wide maximum); their marks are set to -1 so
    they never win a strongest-interferer comparison.
    """

    params: SystemParams
    counts: np.ndarray        # (n,) interferer count per trial
    radii: np.ndarray         # (n, K)
    path_gain: np.ndarray     # (n, K) = radii ** -alpha
    chan: np.ndarray          # (n, K, N) complex fading vectors (unit variance)
    marks: np.ndarray         # (n, K) = path_gain * ||chan||^2, -1 where invalid
    valid: np.ndarray         # (n, K) bool
    own_chan: np.ndarray      # (n, N) complex

    @property
    def n_trials(self) -> int:
        return self.counts.shape[0]


def sample_batch(params: SystemParams, n: int, rng) -> TrialBatch:
    """Sample ``n`` network realizations as flat arrays.

    Interferer counts are Poisson(mean_node_count), positions uniform on the
    disk, fading vectors i.i.d. unit complex Gaussian.  The effective channel
    of interferer k in trial i is ``path_gain[i,k]**0.5 * chan[i,k]``.
    """
    if n < 1:
        raise ParameterError("batch size must be >= 1")
    gen = _as_generator(rng)
    N = params.n_antennas
    alpha = params.pathloss_alpha
    R = params.disk_radius

    counts = gen.poisson(params.mean_node_count, size=n)
    K = int(counts.max()) if n else 0
    valid = np.arange(K)[None, :] < counts[:, None]

    u = gen.random((n, K))
    radii = R * np.sqrt(u)
    z = gen.standard_normal((n, K, 2 * N)) * np.sqrt(0.5)
    chan = z.view(np.complex128)
    own = (gen.standard_normal((n, 2 * N)) * np.sqrt(0.5)).view(np.complex128)

    if K:
        if alpha == 4.0:
            path_gain = (R ** -4.0) / (u * u)
        else:
            path_gain = radii ** (-alpha)
        rho = np.einsum("nkj,nkj->nk", z, z)   # ||chan||^2 via the real view
        marks = np.where(valid, path_gain * rho, -1.0)
    else:
        path_gain = np.zeros((n, 0))
        marks = np.zeros((n, 0))

    return TrialBatch(params, counts, radii, path_gain, chan, marks, valid, own)


def sample_network(params: SystemParams, rng) -> NetworkRealization:
    """Sample one realization as objects (wrapper over :func:`sample_batch`)."""
    batch = sample_batch(params, 1, rng)
    count = int(batch.counts[0])
    interferers = []
    for k in range(count):
        h = np.sqrt(batch.path_gain[0, k]) * batch.chan[0, k]
        interferers.append(
            Interferer(float(batch.radii[0, k]), h, float(batch.marks[0, k]))
        )
    return NetworkRealization(
        params=params,
        own_channel=batch.own_chan[0],
        interferers=interferers,
        disk_radius=params.disk_radius,
    )


def split_interferers(real: NetworkRealization) -> CancellationSplit:
    """Split interferers into canceled set and primary interferer.

    The canceled set holds the L strongest marks; the primary is the
    (L+1)-st strongest if it exists.  Ties (a probability-zero event) break
    deterministically: larger mark first, then smaller distance, then
    insertion order.
    """
    L = real.params.n_cancel
    n = len(real.interferers)
    order = sorted(
        range(n),
        key=lambda i: (-real.interferers[i].mark, real.interferers[i].distance, i),
    )
    canceled = tuple(order[:L])
    if n > L:
        p = order[L]
        return CancellationSplit(canceled, p, real.interferers[p].mark)
    return CancellationSplit(canceled, None, None)


def split_batch(marks: np.ndarray, counts: np.ndarray, n_cancel: int,
                n_rank: int | None = None):
    """Vectorized strongest-interferer selection for a batch.

    Returns ``(canc_idx, canc_ok, ranked_idx, ranked_ok)``: ``canc_idx`` is
    (n, L) column indices of the strongest marks in descending order with
    ``canc_ok`` masking slots beyond a trial's interferer count, and
    ``ranked_idx`` is (n, n_rank) of the same ordering continued past the
    canceled set (column L is the primary interferer, column L+1 the
    strongest secondary, and so on), masked by ``ranked_ok``.

    Padding entries carry negative marks and therefore sort after every real
    interferer; a trial with fewer than L+1 interferers simply has all of
    them canceled and no primary.
    """
    n, K = marks.shape
    L = n_cancel
    if n_rank is None:
        n_rank = L + 1
    if n_rank < L:
        raise ParameterError("n_rank must be at least n_cancel")
    kth = min(n_rank, K)
    ranked_idx = np.zeros((n, n_rank), dtype=np.int64)
    if kth > 0:
        if kth >= K:
            top = np.argsort(-marks, axis=1, kind="stable")[:, :kth]
        else:
            top = np.argpartition(-marks, kth, axis=1)[:, :kth]
            top_vals = np.take_along_axis(marks, top, axis=1)
            order = np.argsort(-top_vals, axis=1, kind="stable")
            top = np.take_along_axis(top, order, axis=1)
        ranked_idx[:, :kth] = top
    ranked_ok = np.arange(n_rank)[None, :] < np.minimum(counts, n_rank)[:, None]
    canc_idx = ranked_idx[:, :L]
    canc_ok = ranked_ok[:, :L]
    return canc_idx, canc_ok, ranked_idx, ranked_ok


def write_realization_csv(path, params: SystemParams, n_trials: int, rng) -> None:
    """Dump sampled realizations, one row per interferer, for debugging.

    Columns: trial_id, r_T, J_T, canceled_flag, primary_flag.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["trial_id", "r_T", "J_T", "canceled_flag", "primary_flag"])
        for t in range(n_trials):
            real = sample_network(params, rng)
            split = split_interferers(real)
            canceled = set(split.canceled)
            for i, itf in enumerate(real.interferers):
                w.writerow(
                    [
                        t,
                        repr(itf.distance),
                        repr(itf.mark),
                        int(i in canceled),
                        int(i == split.primary_index),
                    ]
                )
