"""Log-gamma, stable moment constants, symmetric stable sampling and Monte Carlo checks.

The stable law is normalized by its characteristic function exp(-|t|**r).
Monte Carlo checks compare ratios of moments, which do not depend on that
normalization.
"""

from __future__ import annotations

import math

import numpy as np

from ._parallel import ordered_map
from ._rng import make_rng
from .errors import DomainError, ValidationError

__all__ = [
    "log_gamma",
    "gamma",
    "moment_c",
    "sample_stable",
    "stable_from_uniforms",
    "abs_moment",
    "moment_ratio",
    "mc_ratio_check",
    "mc_integration_lemma",
]

# Lanczos approximation, g = 607/128, 15 terms
_LANCZOS_G = 607.0 / 128.0
_LANCZOS_C0 = 0.999999999999997092
_LANCZOS_C = (
    57.1562356658629235,
    -59.5979603554754912,
    14.1360979747417471,
    -0.491913816097620199,
    0.339946499848118887e-4,
    0.465236289270485756e-4,
    -0.983744753048795646e-4,
    0.158088703224912494e-3,
    -0.210264441724104883e-3,
    0.217439618115212643e-3,
    -0.164318106536763890e-3,
    0.844182239838527433e-4,
    -0.261908384015814087e-4,
    0.368991826595316234e-5,
)
_SQRT_2PI = 2.5066282746310005

CHUNK = 1 << 16


def _lanczos(x: float) -> float:
    ser = _LANCZOS_C0
    y = x
    for c in _LANCZOS_C:
        y += 1.0
        ser += c / y
    t = x + _LANCZOS_G + 0.5
    return (x + 0.5) * math.log(t) - t + math.log(_SQRT_2PI * ser / x)


def log_gamma(x: float) -> float:
    """ln Gamma(x) for x > 0."""
    x = float(x)
    if not (x > 0) or math.isinf(x):
        raise DomainError(f"log_gamma needs a finite x > 0, got {x!r}")
    if x == 1.0 or x == 2.0:
        return 0.0
    if x < 0.5:
        # Gamma(x) = Gamma(x + 1) / x keeps the series argument away from 0
        return _lanczos(x + 1.0) - math.log(x)
    return _lanczos(x)


def gamma(x: float) -> float:
    return math.exp(log_gamma(x))


def _check_r(r) -> float:
    r = float(r)
    if not (0.0 < r <= 2.0):
        raise DomainError(f"stable index r must lie in (0, 2], got {r!r}")
    return r


def moment_c(r, p) -> float:
    """c_{r,p} = (Gamma((r-p)/r) Gamma((1+p)/2) / (Gamma((2-p)/2) Gamma(1/2)))**(1/p).

    At r = 2 the first and third factors coincide and are cancelled, leaving
    (Gamma((1+p)/2) / Gamma(1/2))**(1/p), which is finite for every p > 0.
    """
    r = _check_r(r)
    p = float(p)
    if not (p > 0) or math.isinf(p):
        raise DomainError(f"moment order p must be finite and > 0, got {p!r}")
    if r == 2.0:
        return math.exp((log_gamma((1.0 + p) / 2.0) - log_gamma(0.5)) / p)
    if p >= r:
        raise DomainError(f"moment_c needs p < r when r < 2, got p={p!r}, r={r!r}")
    lg = (
        log_gamma((r - p) / r)
        + log_gamma((1.0 + p) / 2.0)
        - log_gamma((2.0 - p) / 2.0)
        - log_gamma(0.5)
    )
    return math.exp(lg / p)


def stable_from_uniforms(r: float, u: np.ndarray, e: np.ndarray) -> np.ndarray:
    """Chambers-Mallows-Stuck transform of U ~ Uniform(0,1), E ~ Exp(1)."""
    v = math.pi * (u - 0.5)
    if r == 1.0:
        return np.tan(v)
    if r == 2.0:
        return 2.0 * np.sin(v) * np.sqrt(e)
    return (
        np.sin(r * v)
        / np.cos(v) ** (1.0 / r)
        * (np.cos((1.0 - r) * v) / e) ** ((1.0 - r) / r)
    )


def _chunk_samples(r: float, seed: int, index: int, size: int, stream: int = 0) -> np.ndarray:
    # full chunks are always drawn so a shorter run is a prefix of a longer one
    rng = make_rng(seed, stream, index)
    u = rng.random(CHUNK)[:size]
    # keep U strictly inside (0, 1) so tan/cos stay finite
    u = np.where(u == 0.0, 0.5, u)
    e = rng.standard_exponential(CHUNK)[:size]
    return stable_from_uniforms(r, u, e)


def _chunks(n: int) -> list[tuple[int, int]]:
    return [(i, min(CHUNK, n - i * CHUNK)) for i in range((n + CHUNK - 1) // CHUNK)]


def sample_stable(r, n: int, seed: int, stream: int = 0) -> np.ndarray:
    """n i.i.d. symmetric r-stable samples with characteristic function exp(-|t|**r).

    Samples are drawn in fixed chunks, each from its own counter-based stream,
    so the result is the same whether chunks are generated serially or in
    parallel.
    """
    r = _check_r(r)
    n = int(n)
    if n < 1:
        raise ValidationError("sample count must be >= 1")
    parts = ordered_map(lambda c: _chunk_samples(r, seed, c[0], c[1], stream), _chunks(n))
    return np.concatenate(parts)


def abs_moment(x: np.ndarray, p: float) -> float:
    """Mean of |x|**p with compensated summation."""
    x = np.asarray(x, dtype=float)
    return math.fsum(np.abs(x) ** p) / x.size


def moment_ratio(x: np.ndarray, p: float, q: float) -> float:
    """(mean|x|^q)^(1/q) / (mean|x|^p)^(1/p)."""
    return abs_moment(x, q) ** (1.0 / q) / abs_moment(x, p) ** (1.0 / p)


def mc_ratio_check(r, p, q, samples: int, seed: int) -> tuple[float, float]:
    """Monte Carlo moment ratio of one stable sample set against c_{r,q} / c_{r,p}."""
    formula = moment_c(r, q) / moment_c(r, p)
    w = sample_stable(r, samples, seed)
    return moment_ratio(w, float(p), float(q)), formula


def mc_integration_lemma(r, s, a, b, samples: int, seed: int) -> tuple[float, float]:
    """Compare s-th moment norms of sum a_k w_k and sum b_k w_k with ||a||_r / ||b||_r.

    The w_k are independent symmetric r-stable variables shared by both sums.
    """
    r = _check_r(r)
    s = float(s)
    if not (s > 0):
        raise DomainError("moment order s must be > 0")
    if r < 2.0 and s >= r:
        raise DomainError(f"need s < r when r < 2, got s={s!r}, r={r!r}")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 1 or a.shape != b.shape:
        raise ValidationError("coefficient lists must be 1-D and of equal length")
    if not (np.any(a != 0) and np.any(b != 0)):
        raise ValidationError("coefficient lists must be nonzero")
    W = np.stack([sample_stable(r, samples, seed, stream=k) for k in range(a.size)], axis=1)
    lhs = abs_moment(W @ a, s) ** (1.0 / s) / abs_moment(W @ b, s) ** (1.0 / s)
    rhs = float(np.sum(np.abs(a) ** r) ** (1.0 / r) / np.sum(np.abs(b) ** r) ** (1.0 / r))
    return lhs, rhs
