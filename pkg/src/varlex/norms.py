"""Modular, Luxemburg norm, associate norm and l^r mixed norms on finite spaces.

Functions are plain arrays with one value per cell of a truncated
:class:`~varlex.spaces.SpaceSpec`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .spaces import SpaceSpec, as_exponent, conjugate_space

__all__ = [
    "NormResult",
    "AssociateResult",
    "as_function",
    "modular",
    "luxemburg_norm",
    "luxemburg_batch",
    "associate_norm",
    "associate_maximizer",
    "pointwise_lr",
    "vector_norm",
    "holder_check",
]

DEFAULT_RTOL = 1e-12
_MAX_BISECT = 2000


@dataclass(frozen=True)
class NormResult:
    value: float
    residual: float
    iterations: int


@dataclass(frozen=True)
class AssociateResult:
    value: float
    g: np.ndarray
    iterations: int
    method: str
    residual: float


def as_function(space: SpaceSpec, f) -> np.ndarray:
    space.require_truncated()
    arr = np.asarray(f, dtype=float)
    if arr.ndim != 1 or arr.shape[0] != space.n_cells:
        raise ValidationError(
            f"function has shape {arr.shape}, expected ({space.n_cells},) for this space"
        )
    if not np.all(np.isfinite(arr)):
        raise ValidationError("function values must be finite")
    return arr


def _as_rows(space: SpaceSpec, F) -> np.ndarray:
    space.require_truncated()
    arr = np.asarray(F, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != space.n_cells:
        raise ValidationError(f"functions have shape {arr.shape}, expected (N, {space.n_cells})")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("function values must be finite")
    return arr


def _modular_rows(w: np.ndarray, p: np.ndarray, A: np.ndarray) -> np.ndarray:
    # A holds |f| / lambda, one row per function.
    fin = np.isfinite(p)
    if fin.all():
        return (A ** p) @ w
    out = (A[:, fin] ** p[fin]) @ w[fin]
    return out + A[:, ~fin].max(axis=1)


def modular(space: SpaceSpec, f) -> float:
    """Sum of w_i |f_i|^p_i over finite-exponent cells plus the sup of |f| over inf-cells."""
    arr = as_function(space, f)
    return float(_modular_rows(space.weights, space.exponents, np.abs(arr)[None, :])[0])


def _bracket(rho, A, lam0, factor, square):
    """Find lo < hi with rho(A/lo) > 1 >= rho(A/hi) for every row."""
    k = A.shape[0]
    lo = lam0.copy()
    hi = lam0.copy()
    evals = np.ones(k, dtype=int)
    m0 = rho(A, lam0)
    up = m0 > 1
    down = ~up
    fac = np.full(k, factor)
    # rows where lam0 is too small: grow hi
    act = np.flatnonzero(up)
    while act.size:
        cand = hi[act] * fac[act]
        m = rho(A[act], cand)
        evals[act] += 1
        ok = m <= 1
        lo[act[~ok]] = cand[~ok]
        hi[act] = cand
        if square:
            fac[act[~ok]] = fac[act[~ok]] ** 2
        act = act[~ok]
    act = np.flatnonzero(down)
    while act.size:
        cand = lo[act] / fac[act]
        m = rho(A[act], cand)
        evals[act] += 1
        ok = m > 1
        hi[act[~ok]] = cand[~ok]
        lo[act] = cand
        if square:
            fac[act[~ok]] = fac[act[~ok]] ** 2
        act = act[~ok]
    return lo, hi, evals


def luxemburg_batch(
    space: SpaceSpec,
    F,
    rtol: float = DEFAULT_RTOL,
    guess=None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Luxemburg norms of the rows of ``F``.

    Returns ``(values, residuals, iterations)``. Each value is the upper end of
    the final bisection bracket, so ``rho(f / value) <= 1`` holds exactly as
    evaluated. Without ``guess`` the bracket comes from doubling/halving around
    ``max |f|``; with a guess (e.g. a nearby norm) it starts from a 1e-6
    relative window that widens geometrically.
    """
    A = np.abs(_as_rows(space, F))
    w, p = space.weights, space.exponents
    k = A.shape[0]
    values = np.zeros(k)
    residuals = np.zeros(k)
    iterations = np.zeros(k, dtype=int)
    scale = A.max(axis=1) if A.shape[1] else np.zeros(k)
    live = np.flatnonzero(scale > 0)
    if live.size == 0:
        return values, residuals, iterations
    A = A[live]

    def rho(rows, lam):
        return _modular_rows(w, p, rows / lam[:, None])

    if guess is None:
        lam0, factor, square = scale[live], 2.0, False
    else:
        g = np.broadcast_to(np.asarray(guess, dtype=float), (k,))[live]
        g = np.where(np.isfinite(g) & (g > 0), g, scale[live])
        lam0, factor, square = g.copy(), 1.0 + 1e-6, True
    lo, hi, evals = _bracket(rho, A, lam0, factor, square)

    act = np.flatnonzero(hi - lo > rtol * hi)
    steps = 0
    while act.size and steps < _MAX_BISECT:
        mid = 0.5 * (lo[act] + hi[act])
        m = rho(A[act], mid)
        evals[act] += 1
        above = m > 1
        lo[act[above]] = mid[above]
        hi[act[~above]] = mid[~above]
        act = act[hi[act] - lo[act] > rtol * hi[act]]
        steps += 1

    values[live] = hi
    residuals[live] = np.abs(rho(A, hi) - 1.0)
    iterations[live] = evals
    return values, residuals, iterations


def luxemburg_norm(space: SpaceSpec, f, rtol: float = DEFAULT_RTOL) -> NormResult:
    """inf{lam > 0 : rho(f / lam) <= 1} by exponential bracketing and bisection."""
    arr = as_function(space, f)
    v, res, it = luxemburg_batch(space, arr[None, :], rtol=rtol)
    return NormResult(float(v[0]), float(res[0]), int(it[0]))


# -- associate norm ---------------------------------------------------------


def _conjugate_exponents(space: SpaceSpec) -> np.ndarray:
    p = space.exponents
    if np.isinf(p).any():
        raise ValidationError(
            "associate norm requires finite exponents (p_+ < inf); the space has inf-exponent cells"
        )
    with np.errstate(divide="ignore"):
        return np.where(p == 1.0, np.inf, p / (p - 1.0))


def _associate_kkt(w, pc, a):
    """Closed-form maximizer of sum w_i a_i g_i under the conjugate modular budget.

    Finite-exponent cells take g_i = (a_i / (mu p'_i)) ** (1 / (p'_i - 1)).
    Cells with p'_i = inf share one value t that costs t and earns
    C = sum w_i a_i over them, so once mu drops to C the rest of the budget
    goes to t. mu is found by bisection on log(mu).
    """
    m = (a > 0) & np.isfinite(pc)
    m_inf = (a > 0) & ~np.isfinite(pc)
    C = float(np.sum(w[m_inf] * a[m_inf]))
    g = np.zeros_like(a)
    if not m.any():
        g[m_inf] = 1.0
        return g, 0
    la = np.log(a[m])
    lw = np.log(w[m])
    pcm = pc[m]
    lpc = np.log(pcm)

    def log_g(lmu):
        return (la - lmu - lpc) / (pcm - 1.0)

    def log_budget(lmu):
        z = lw + pcm * log_g(lmu)
        zmax = z.max()
        return zmax + math.log(np.exp(z - zmax).sum())

    if C > 0 and log_budget(math.log(C)) <= 0:
        lmu = math.log(C)
        g[m] = np.exp(log_g(lmu))
        g[m_inf] = -math.expm1(log_budget(lmu))
        return g, 0
    lo, hi = -1.0, 1.0
    if C > 0:
        lo = math.log(C)
        hi = lo + 1.0
    while log_budget(lo) <= 0:
        lo = lo - abs(lo) - 1.0
    while log_budget(hi) > 0:
        hi = hi + abs(hi) + 1.0
    it = 0
    while hi - lo > 1e-15 * max(1.0, abs(hi)) and it < 400:
        mid = 0.5 * (lo + hi)
        if log_budget(mid) > 0:
            lo = mid
        else:
            hi = mid
        it += 1
    g[m] = np.exp(log_g(hi))
    return g, it


def _associate_ascent(w, pc, c, rng, tol, max_iter):
    """Multiplicative ascent over budget shares.

    With u_i = w_i g_i**p'_i the pairing sum c_i g_i becomes the separable
    concave function sum c_i (u_i / w_i)**(1/p'_i) on the simplex sum u_i = 1;
    renormalizing u is the same as rescaling g to unit conjugate modular.
    All inf-exponent cells share one value t, which enters the modular
    linearly, so they collapse into a single coordinate with exponent 1.
    Steps use log-gradients, u <- u * (grad)**theta renormalized, and stop
    when the Frank-Wolfe gap, an upper bound on the distance to the optimum,
    falls below ``tol`` times the current value.
    """
    active = c > 0
    fin = active & np.isfinite(pc)
    inf_cells = active & ~np.isfinite(pc)
    coef = list(c[fin] * w[fin] ** (-1.0 / pc[fin]))
    expo = list(1.0 / pc[fin])
    if inf_cells.any():
        coef.append(c[inf_cells].sum())
        expo.append(1.0)
    coef = np.array(coef)
    expo = np.array(expo)

    def value(u):
        return float(np.sum(coef * u ** expo))

    u = 0.5 + rng.random(coef.size)
    u /= u.sum()
    val = value(u)
    theta = 1.0
    it = 0
    for it in range(1, max_iter + 1):
        lgrad = np.log(expo * coef) + (expo - 1.0) * np.log(u)
        grad = np.exp(lgrad)
        if grad.max() - grad @ u <= tol * val:
            break
        # multiplicative step on log-gradients; stable where u -> 0 blows up grad
        z = np.log(u) + theta * (lgrad - lgrad.max())
        un = np.exp(z - z.max())
        un = np.maximum(un / un.sum(), 1e-300)
        un /= un.sum()
        vn = value(un)
        if vn > val:
            u, val = un, vn
            theta = min(2.0 * theta, 1.0)
        else:
            theta *= 0.5
            if theta < 1e-30:
                break
    g = np.zeros_like(c)
    n_fin = int(fin.sum())
    g[fin] = (u[:n_fin] / w[fin]) ** (1.0 / pc[fin])
    if inf_cells.any():
        g[inf_cells] = u[-1]
    return g, it


def associate_maximizer(
    space: SpaceSpec,
    f,
    method: str = "auto",
    seed: int = 0,
    tol: float = 1e-13,
    max_iter: int = 20000,
) -> AssociateResult:
    """Maximize sum w_i |f_i| g_i over g >= 0 with conjugate modular <= 1.

    ``method``: ``"kkt"`` (closed form with bisection on the multiplier),
    ``"ascent"`` (iterative cross-check), or ``"auto"`` (= kkt).
    """
    arr = as_function(space, f)
    pc = _conjugate_exponents(space)
    w = space.weights
    a = np.abs(arr)
    c = w * a
    if not (c > 0).any():
        return AssociateResult(0.0, np.zeros_like(a), 0, "zero", 0.0)
    if method == "auto":
        method = "kkt"
    if method == "kkt":
        g, it = _associate_kkt(w, pc, a)
    elif method == "ascent":
        g, it = _associate_ascent(w, pc, c, np.random.Generator(np.random.Philox(seed)), tol, max_iter)
    else:
        raise ValidationError(f"unknown associate-norm method {method!r}")
    conj = conjugate_space(space)
    residual = abs(modular(conj, g) - 1.0)
    return AssociateResult(float(c @ g), g, it, method, residual)


def associate_norm(space: SpaceSpec, f, method: str = "auto", seed: int = 0) -> float:
    return associate_maximizer(space, f, method=method, seed=seed).value


# -- vector-valued norms ----------------------------------------------------


def pointwise_lr(F: np.ndarray, r) -> np.ndarray:
    """Column-wise (sum_k |F_k|^r)^(1/r), or max_k |F_k| for r = inf."""
    r = as_exponent(r)
    A = np.abs(np.asarray(F, dtype=float))
    if A.ndim == 1:
        A = A[None, :]
    if r.is_infinite:
        return A.max(axis=0)
    rv = float(r)
    m = A.max(axis=0)
    safe = np.where(m > 0, m, 1.0)
    return m * ((A / safe) ** rv).sum(axis=0) ** (1.0 / rv)


def vector_norm(space: SpaceSpec, F, r, rtol: float = DEFAULT_RTOL) -> float:
    """Luxemburg norm of the pointwise l^r sum of the functions in ``F``."""
    rows = _as_rows(space, F)
    if rows.shape[0] == 0:
        raise ValidationError("vector_norm needs at least one function")
    g = pointwise_lr(rows, r)
    return luxemburg_norm(space, g, rtol=rtol).value


def holder_check(space: SpaceSpec, f, g) -> tuple[float, float]:
    """Pairing sum w|fg| against 2 ||f||_p ||g||_p'."""
    fa = as_function(space, f)
    ga = as_function(space, g)
    lhs = float(np.sum(space.weights * np.abs(fa * ga)))
    rhs = 2.0 * luxemburg_norm(space, fa).value * luxemburg_norm(conjugate_space(space), ga).value
    return lhs, rhs
