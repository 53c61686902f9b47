"""Special functions and random sampling primitives.

Everything random in this package flows through an :class:`RngStream`, a
value-like handle keyed by ``(master_seed, stream_index)``.  Equal keys
replay bit-identical sequences; distinct stream indices give statistically
independent streams, so batches of Monte Carlo trials can be farmed out to
threads and still reduce to the same answer in any order.

The special functions are thin wrappers over :mod:`scipy.special`; the
samplers cover exactly the distributions the network model needs (complex
Gaussian vectors, integer-shape gamma, beta(1, m), Poisson counts).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special as _sp

from .errors import ParameterError

__all__ = [
    "RngStream",
    "log_gamma",
    "regularized_gamma_q",
    "sample_complex_gaussian_vector",
    "sample_gamma_integer_shape",
    "sample_beta_1_m",
    "sample_poisson",
]

_SEED_MASK = (1 << 64) - 1

# Integer-shape gamma variates are drawn as a sum of this many exponentials
# at most; larger shapes fall back to the generator's rejection sampler.
GAMMA_SUM_MAX_SHAPE = 32


@dataclass(eq=True)
class RngStream:
    """Reproducible random stream keyed by ``(master_seed, stream_index)``.

    The underlying bit generator is PCG64 seeded through a
    ``numpy.random.SeedSequence`` with the stream index as spawn key, which
    is NumPy's supported mechanism for deriving independent substreams from
    one master seed.  Construction is cheap; the stream is stateful and
    advances as samples are drawn.
    """

    master_seed: int
    stream_index: int = 0
    _gen: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.stream_index < 0:
            raise ParameterError("stream_index must be non-negative")
        seed = int(self.master_seed) & _SEED_MASK
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(int(self.stream_index),))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def substream(self, index: int) -> "RngStream":
        """Fresh independent stream with the same master seed."""
        return RngStream(self.master_seed, index)


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise ParameterError(f"expected RngStream or numpy Generator, got {type(rng)!r}")


def log_gamma(x):
    """Natural log of the gamma function for positive arguments.

    Raises :class:`ParameterError` on non-positive input (scalar or any
    array element).
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr <= 0.0):
        raise ParameterError("log_gamma requires x > 0")
    out = _sp.gammaln(arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def regularized_gamma_q(k: int, x):
    """Upper regularized incomplete gamma Q(k, x) at integer order k >= 1.

    For integer k this equals the Poisson tail sum
    ``sum_{j=0}^{k-1} x^j e^{-x} / j!``, which is how the cumulative law of
    the (L+1)-st strongest mark of the interferer field is expressed.
    """
    if int(k) != k or k < 1:
        raise ParameterError("regularized_gamma_q requires integer k >= 1")
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0.0):
        raise ParameterError("regularized_gamma_q requires x >= 0")
    out = _sp.gammaincc(int(k), arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


def sample_complex_gaussian_vector(n: int, rng, size: int | None = None):
    """Circularly symmetric complex Gaussian vector(s) of length ``n``.

    Each entry has unit total variance, split evenly between the real and
    imaginary parts.  With ``size=None`` returns shape ``(n,)``; otherwise
    shape ``(size, n)``.
    """
    if n < 1:
        raise ParameterError("vector length must be >= 1")
    gen = _as_generator(rng)
    shape = (n, 2) if size is None else (size, n, 2)
    z = gen.standard_normal(shape) * np.sqrt(0.5)
    out = z.view(np.complex128)[..., 0]
    return out


def sample_gamma_integer_shape(k: int, rng, size: int | None = None):
    """Gamma(k, 1) variates for integer shape ``k >= 1``.

    Small shapes (k <= 32) are drawn exactly as a sum of k unit
    exponentials; larger shapes use the generator's gamma sampler.
    """
    if int(k) != k or k < 1:
        raise ParameterError("shape k must be a positive integer")
    gen = _as_generator(rng)
    k = int(k)
    if k <= GAMMA_SUM_MAX_SHAPE:
        shape = (k,) if size is None else (size, k)
        out = gen.exponential(size=shape).sum(axis=-1)
    else:
        out = gen.gamma(float(k), size=size)
    return float(out) if size is None else out


def sample_beta_1_m(m: int, rng, size: int | None = None):
    """Beta(1, m) variates via the inverse CDF ``x = 1 - u**(1/m)``."""
    if int(m) != m or m < 1:
        raise ParameterError("m must be a positive integer")
    gen = _as_generator(rng)
    u = gen.random(size=size)
    out = 1.0 - u ** (1.0 / int(m))
    return float(out) if size is None else out


def sample_poisson(mean: float, rng, size: int | None = None):
    """Poisson counts with the given positive mean."""
    if not mean > 0.0:
        raise ParameterError("mean must be positive")
    gen = _as_generator(rng)
    out = gen.poisson(mean, size=size)
    return int(out) if size is None else out
