"""Zero-forcing receive beamforming and channel-state estimation.

The receive beamformer maximizes the own-link power subject to exact nulls
on a chosen set of interference channel vectors: it is the normalized
projection of the own channel onto the orthogonal complement of the nulled
span.  With L nulled vectors the resulting own-link power is chi-square
with N - L complex degrees of freedom, and the power fraction an uncanceled
interferer leaks through the beamformer is beta(1, N-1), independent of its
pre-cancellation power.

Channel estimation is least-squares over an orthonormal training matrix.
The estimate of a canceled interferer's channel picks up a scaled sum of
the uncanceled channels weighted by the interferers' data symbols projected
onto the training rows; nulling the estimates instead of the true channels
leaves residual interference whose conditional variance enters the SIR as
extra noise.  A distributional shortcut replaces that residual variance by
``(zeta / M) * I_total`` with ``zeta ~ Gamma(L, 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateChannelError, ParameterError
from .network import CancellationSplit, NetworkRealization
from .specrand import _as_generator

__all__ = [
    "Beamformer",
    "CsiEstimate",
    "zf_mrc",
    "post_cancellation_gain",
    "estimate_csi_explicit",
    "residual_noise_shortcut",
]

# Literal training-symbol construction is used as long as the symbol matrix
# stays below this many entries; beyond that, the projected symbols are drawn
# directly (they are i.i.d. unit complex Gaussian either way because the
# training rows are orthonormal).
_MAX_SYMBOL_ENTRIES = 1 << 22


@dataclass(frozen=True)
class Beamformer:
    """Unit-norm receive beamforming vector."""

    v0: np.ndarray

    def signal_power(self, h: np.ndarray) -> float:
        """|v0^H h|^2 for a channel vector h."""
        return float(np.abs(np.vdot(self.v0, h)) ** 2)


@dataclass(frozen=True)
class CsiEstimate:
    """Least-squares channel estimates for the canceled interferers.

    estimates     (L_c, N) complex array, one row per canceled interferer
    train_len     training sequence length used
    residual_var  conditional variance of the residual interference left by
                  nulling the estimates instead of the true channels
    """

    estimates: np.ndarray
    train_len: int
    residual_var: float


def _orthonormalize(nulled: np.ndarray, tol: float) -> np.ndarray:
    """Gram-Schmidt with one reorthogonalization pass; rows span the input."""
    q = np.ascontiguousarray(nulled, dtype=np.complex128).copy()
    m = q.shape[0]
    for j in range(m):
        norm0 = np.linalg.norm(q[j])
        for _ in range(2):
            for i in range(j):
                q[j] -= np.vdot(q[i], q[j]) * q[i]
        norm = np.linalg.norm(q[j])
        if norm <= tol * max(norm0, 1.0):
            raise DegenerateChannelError(
                "nulled channel vectors are numerically rank deficient"
            )
        q[j] /= norm
    return q


def zf_mrc(h0: np.ndarray, nulled, tol: float = 1e-12) -> Beamformer:
    """Zero-forcing beamformer with maximum ratio combining.

    Returns the unit vector maximizing |v^H h0|^2 subject to v^H h = 0 for
    every channel h in ``nulled``: the normalized projection of h0 onto the
    orthogonal complement of span(nulled).

    Raises :class:`DegenerateChannelError` if the nulled set is rank
    deficient beyond tolerance or the projection annihilates h0 (both
    probability-zero events; callers resample).
    """
    h0 = np.asarray(h0, dtype=np.complex128)
    nulled = np.asarray(list(nulled), dtype=np.complex128).reshape(-1, h0.shape[0])
    if nulled.shape[0] > h0.shape[0] - 1:
        raise ParameterError("cannot null more than n_antennas - 1 vectors")
    v = h0.copy()
    if nulled.shape[0]:
        q = _orthonormalize(nulled, tol)
        for _ in range(2):
            v -= (q.conj() @ v) @ q
    norm = np.linalg.norm(v)
    if norm <= tol * np.linalg.norm(h0):
        raise DegenerateChannelError("own channel lies in the nulled span")
    return Beamformer(v / norm)


def post_cancellation_gain(bf: Beamformer, h: np.ndarray):
    """Power an uncanceled interferer leaks through the beamformer.

    Returns ``(I, delta)`` with ``I = |v0^H h|^2`` and ``delta = I / ||h||^2``,
    the surviving fraction of the pre-cancellation power.
    """
    h = np.asarray(h, dtype=np.complex128)
    power = float(np.abs(np.vdot(bf.v0, h)) ** 2)
    return power, power / float(np.linalg.norm(h) ** 2)


def training_matrix(n_rows: int, m: int) -> np.ndarray:
    """Orthonormal training rows: the first ``n_rows`` rows of the unitary
    m-point DFT matrix."""
    if n_rows > m:
        raise ParameterError("training length must be >= number of sequences")
    j = np.arange(m)
    k = np.arange(n_rows)[:, None]
    return np.exp(-2j * np.pi * k * j / m) / np.sqrt(m)


def estimate_csi_explicit(
    real: NetworkRealization,
    split: CancellationSplit,
    m_train: int,
    rng,
) -> CsiEstimate:
    """Least-squares channel estimation of the canceled interferers.

    The receiver observes the canceled interferers' orthonormal training
    sequences buried in the uncanceled interferers' data symbols.  Each
    estimate is the true channel plus ``(1/sqrt(M))`` times the sum of
    uncanceled channels weighted by their symbols projected onto that
    training row.  The residual variance is the conditional variance of the
    interference left after nulling the estimates, computed for the
    beamformer built on those estimates.
    """
    if int(m_train) != m_train or m_train < 1:
        raise ParameterError("training length must be a positive integer")
    m_train = int(m_train)
    n_canc = len(split.canceled)
    if n_canc == 0:
        # No training needed; estimation degenerates to perfect CSI.
        return CsiEstimate(np.zeros((0, real.params.n_antennas), complex), m_train, 0.0)
    if m_train < n_canc:
        raise ParameterError("training length must be >= number of canceled interferers")
    gen = _as_generator(rng)

    canceled = list(split.canceled)
    others = [i for i in range(len(real.interferers)) if i not in set(canceled)]
    h_canc = np.array([real.interferers[i].eff_channel for i in canceled])
    if not others:
        return CsiEstimate(h_canc, m_train, 0.0)
    h_unc = np.array([real.interferers[i].eff_channel for i in others])

    n_unc = len(others)
    if n_unc * m_train <= _MAX_SYMBOL_ENTRIES:
        q = training_matrix(n_canc, m_train)
        symbols = (
            gen.standard_normal((n_unc, m_train, 2)) * np.sqrt(0.5)
        ).view(np.complex128)[..., 0]
        proj = symbols @ q.conj().T                      # (n_unc, n_canc)
    else:
        proj = (
            gen.standard_normal((n_unc, n_canc, 2)) * np.sqrt(0.5)
        ).view(np.complex128)[..., 0]

    estimates = h_canc + (proj.T @ h_unc) / np.sqrt(m_train)

    bf = zf_mrc(real.own_channel, estimates)
    leak = h_unc @ bf.v0.conj()                          # v0^H h per uncanceled
    resid = proj.T @ leak                                # per canceled interferer
    sigma_r2 = float(np.sum(np.abs(resid) ** 2)) / m_train
    return CsiEstimate(estimates, m_train, sigma_r2)


def residual_noise_shortcut(i_total: float, n_cancel: int, m_train: int, rng) -> float:
    """Distributional shortcut for the residual-interference variance.

    Returns ``(zeta / M) * i_total`` with ``zeta ~ Gamma(L, 1)``, which has
    the same conditional law as the explicit training residual.
    """
    if n_cancel < 1:
        raise ParameterError("n_cancel must be >= 1")
    if m_train < n_cancel:
        raise ParameterError("training length must be >= n_cancel")
    gen = _as_generator(rng)
    zeta = gen.gamma(float(n_cancel))
    return float(zeta / m_train * i_total)


# ---------------------------------------------------------------------------
# Batched counterparts used by the Monte Carlo engine.
# ---------------------------------------------------------------------------

def zf_mrc_batch(own: np.ndarray, nulled: np.ndarray, ok: np.ndarray, tol: float = 1e-12):
    """Vectorized zero-forcing + MRC over a batch of trials.

    own     (n, N) own-link channel vectors
    nulled  (n, L, N) channel vectors to null; slot j of trial i is ignored
            unless ``ok[i, j]``
    Returns (n, N) unit beamforming vectors.  Rank-deficient slots (below
    tolerance after reorthogonalization) are skipped, matching the
    resample-on-degeneracy contract in spirit: such events have probability
    zero and, in floating point, only arise from masked zero slots.
    """
    n, L = ok.shape
    v = own.copy()
    if L == 0:
        pass
    else:
        q = np.zeros_like(nulled)
        for j in range(L):
            vj = nulled[:, j, :].copy()
            vj[~ok[:, j]] = 0.0
            for _ in range(2):
                for i in range(j):
                    proj = np.einsum("nj,nj->n", q[:, i].conj(), vj)
                    vj -= proj[:, None] * q[:, i]
            nrm = np.sqrt(np.einsum("nj,nj->n", vj.conj(), vj).real)
            good = nrm > tol
            q[:, j] = np.where(good[:, None], vj / np.where(good, nrm, 1.0)[:, None], 0.0)
        for _ in range(2):
            for i in range(L):
                proj = np.einsum("nj,nj->n", q[:, i].conj(), v)
                v -= proj[:, None] * q[:, i]
    nrm = np.sqrt(np.einsum("nj,nj->n", v.conj(), v).real)
    return v / nrm[:, None]
