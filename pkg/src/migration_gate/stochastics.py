"""Seeded random variates and the Beta special functions.

Every variate is a pure function of ``(seed, stream_index, counter)``: a lane's
``k``-th uniform is the SplitMix64 finalizer applied to ``key + k * golden``,
where ``key`` is derived from the seed and the stream index. Nothing depends
on call order across lanes, so a bank of a million substreams evaluated in
one vectorised pass gives the same numbers as a million separate streams, and
splitting work across threads cannot change a single bit.

Gamma draws use Marsaglia & Tsang's squeeze/rejection method, with the usual
``U ** (1 / shape)`` boost for shapes below one. Beta draws are ``X / (X + Y)``
for independent gamma draws.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_SEED_MAX = 2**64 - 1

# smallest positive double and largest double below one
_TINY = np.nextafter(0.0, 1.0)
_BELOW_ONE = np.nextafter(1.0, 0.0)


def _mix64(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _MIX1
        z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed <= _SEED_MAX:
        raise DomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


@dataclass(frozen=True)
class BetaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0) or not (
            math.isfinite(self.alpha) and math.isfinite(self.beta)
        ):
            raise DomainError(f"Beta parameters must be positive, got ({self.alpha}, {self.beta})")

    @property
    def mean(self) -> float:
        return self.alpha / (self.alpha + self.beta)


class StreamBank:
    """A vector of independent substreams sharing one seed.

    Lane ``i`` of ``StreamBank(seed, indices)`` produces exactly the sequence of
    ``RandomStream(seed, indices[i])``.
    """

    def __init__(self, seed: int, indices):
        self.seed = _check_seed(seed)
        idx = np.asarray(indices)
        if idx.ndim != 1:
            raise DomainError("stream indices must be one-dimensional")
        if idx.size and (not np.issubdtype(idx.dtype, np.integer) or idx.min() < 0):
            raise DomainError("stream indices must be non-negative integers")
        self.indices = idx.astype(np.uint64)
        base = _mix64(np.array([self.seed], dtype=np.uint64))
        with np.errstate(over="ignore"):
            self._keys = _mix64(base + self.indices * _GOLDEN)
        self._counters = np.zeros(self.indices.size, dtype=np.uint64)

    def __len__(self) -> int:
        return int(self.indices.size)

    def uniforms(self, lanes=None) -> np.ndarray:
        """One uniform in the open interval (0, 1) per requested lane."""
        if lanes is None:
            lanes = slice(None)
        with np.errstate(over="ignore"):
            self._counters[lanes] += np.uint64(1)
            bits = _mix64(self._keys[lanes] + self._counters[lanes] * _GOLDEN)
        return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53

    def normals(self, lanes=None) -> np.ndarray:
        u1 = self.uniforms(lanes)
        u2 = self.uniforms(lanes)
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)


class RandomStream:
    """A single deterministic substream identified by ``(seed, stream_index)``."""

    def __init__(self, seed: int, stream_index: int = 0):
        stream_index = int(stream_index)
        if stream_index < 0:
            raise DomainError("stream_index must be non-negative")
        self._bank = StreamBank(seed, np.array([stream_index], dtype=np.uint64))
        self.seed = self._bank.seed
        self.stream_index = stream_index

    def __repr__(self) -> str:
        return f"RandomStream(seed={self.seed}, stream_index={self.stream_index})"

    def uniform(self) -> float:
        return float(self._bank.uniforms()[0])


Stream = Union[RandomStream, StreamBank]


def substream(seed: int, index: int) -> RandomStream:
    return RandomStream(seed, index)


def substreams(seed: int, indices) -> StreamBank:
    return StreamBank(seed, indices)


def _bank_of(stream: Stream) -> StreamBank:
    return stream._bank if isinstance(stream, RandomStream) else stream


def _unwrap(values: np.ndarray, stream: Stream):
    return float(values[0]) if isinstance(stream, RandomStream) else values


def _gamma_lanes(shape: float, bank: StreamBank) -> np.ndarray:
    boosted = shape < 1.0
    a = shape + 1.0 if boosted else shape
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(len(bank))
    pending = np.arange(len(bank))
    while pending.size:
        x = bank.normals(pending)
        u = bank.uniforms(pending)
        v = 1.0 + c * x
        ok = v > 0.0
        v = np.where(ok, v, 1.0) ** 3
        x2 = x * x
        with np.errstate(divide="ignore", invalid="ignore"):
            squeeze = u < 1.0 - 0.0331 * x2 * x2
            full = np.log(u) < 0.5 * x2 + d * (1.0 - v + np.log(v))
        ok &= squeeze | full
        out[pending[ok]] = d * v[ok]
        pending = pending[~ok]
    if boosted:
        out *= bank.uniforms() ** (1.0 / shape)
    return np.maximum(out, _TINY)


def gamma_sample(shape: float, stream: Stream):
    """Gamma(shape, scale=1) draw; one per lane when given a ``StreamBank``."""
    if not (shape > 0) or not math.isfinite(shape):
        raise DomainError(f"gamma shape must be positive, got {shape}")
    return _unwrap(_gamma_lanes(float(shape), _bank_of(stream)), stream)


def beta_sample(params: BetaParams, stream: Stream):
    bank = _bank_of(stream)
    x = _gamma_lanes(float(params.alpha), bank)
    y = _gamma_lanes(float(params.beta), bank)
    return _unwrap(np.clip(x / (x + y), _TINY, _BELOW_ONE), stream)


def normal_sample(mean: float, sd: float, stream: Stream):
    if not sd >= 0:
        raise DomainError(f"standard deviation must be non-negative, got {sd}")
    z = _bank_of(stream).normals()
    if sd == 0:
        return _unwrap(np.full(z.shape, float(mean)), stream)
    return _unwrap(mean + sd * z, stream)


# --- incomplete beta -------------------------------------------------------

_CF_MAX_ITER = 10_000
_CF_EPS = 1e-15
_FPMIN = 1e-300


def _log_beta(a: float, b: float) -> float:
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def _betacf(a: float, b: float, x: float) -> float:
    # modified Lentz evaluation of the incomplete beta continued fraction
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise ArithmeticError(f"incomplete beta continued fraction did not converge for a={a}, b={b}, x={x}")


def beta_cdf(params: BetaParams, x: float) -> float:
    """Regularized incomplete beta function I_x(alpha, beta)."""
    a, b = float(params.alpha), float(params.beta)
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    front = math.exp(a * math.log(x) + b * math.log1p(-x) - _log_beta(a, b))
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def beta_pdf(params: BetaParams, x: float) -> float:
    a, b = float(params.alpha), float(params.beta)
    if x <= 0.0 or x >= 1.0:
        if x == 0.0 and a == 1.0:
            return b
        if x == 1.0 and b == 1.0:
            return a
        return 0.0
    return math.exp((a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - _log_beta(a, b))


def beta_quantile(params: BetaParams, q: float, tol: float = 1e-10) -> float:
    """Inverse of :func:`beta_cdf` by safeguarded Newton iteration.

    The root is kept inside a shrinking bisection bracket, so a Newton step that
    leaves the bracket is replaced by a bisection step. ``tol`` is absolute for
    moderate quantiles and relative for tiny ones.
    """
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"quantile level must lie in [0, 1], got {q}")
    if q == 0.0:
        return 0.0
    if q == 1.0:
        return 1.0
    lo, hi = 0.0, 1.0
    x = params.mean
    for _ in range(500):
        f = beta_cdf(params, x) - q
        if f == 0.0:
            return x
        if f < 0.0:
            lo = x
        else:
            hi = x
        slope = beta_pdf(params, x)
        nxt = x - f / slope if slope > 0.0 else -1.0
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        scale = min(1.0, nxt)
        if abs(nxt - x) < 1e-2 * tol * scale or hi - lo < tol * scale:
            return nxt
        x = nxt
    return x
