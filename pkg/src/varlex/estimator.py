"""Operator-norm estimates and certified lower bounds for l^r-extension constants.

Everything here is a numerical estimate on finite spaces. A *certified* lower
bound divides the l^r numerator by a provable upper bound on ||T||, so it never
exceeds the true constant. The *optimistic* ratio uses an ascent estimate of
||T||, which is tighter but carries no guarantee.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import ordered_map
from ._rng import make_rng
from .errors import ValidationError
from .norms import luxemburg_batch, pointwise_lr, vector_norm
from .spaces import SpaceSpec, TailSpec, as_exponent, conjugate_space, truncate
from .stable import stable_from_uniforms

__all__ = [
    "OperatorMatrix",
    "MzWitness",
    "AscentRun",
    "fd_gradient",
    "ratio_objective",
    "op_norm_lower_run",
    "op_norm_lower",
    "op_norm_upper_certified",
    "mz_numerator_denominator",
    "mz_certified_ratio",
    "estimate_k_lower",
    "blowup_predicted",
    "blowup_experiment",
]


@dataclass(frozen=True)
class OperatorMatrix:
    """Dense matrix acting as (Tf)_i = sum_j t_ij f_j from ``source`` to ``target``."""

    entries: np.ndarray
    source: SpaceSpec
    target: SpaceSpec

    def __post_init__(self):
        self.source.require_truncated()
        self.target.require_truncated()
        t = np.array(self.entries, dtype=float)
        if t.ndim != 2 or t.shape != (self.target.n_cells, self.source.n_cells):
            raise ValidationError(
                f"matrix shape {t.shape} does not match (target cells, source cells) = "
                f"({self.target.n_cells}, {self.source.n_cells})"
            )
        if not np.all(np.isfinite(t)):
            raise ValidationError("matrix entries must be finite")
        t.setflags(write=False)
        object.__setattr__(self, "entries", t)

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def apply(self, F) -> np.ndarray:
        """Apply T to each row of F."""
        return np.asarray(F, dtype=float) @ self.entries.T

    def scaled(self, c: float) -> "OperatorMatrix":
        return OperatorMatrix(c * self.entries, self.source, self.target)


@dataclass(frozen=True)
class MzWitness:
    operator: OperatorMatrix
    functions: np.ndarray
    r: object
    certified_lower_bound: float = math.nan
    optimistic_ratio: float = math.nan


@dataclass
class AscentRun:
    value: float
    f: np.ndarray
    history: list[float] = field(default_factory=list)


# -- finite differences -----------------------------------------------------


def fd_gradient(fun, x: np.ndarray, h: float) -> np.ndarray:
    """Central-difference gradient of a batched scalar function.

    ``fun`` maps a (k, d) array of points to k values.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    E = h * np.eye(d)
    vals = fun(np.vstack([x + E, x - E]))
    return (vals[:d] - vals[d:]) / (2.0 * h)


def ratio_objective(T: OperatorMatrix, guess_source=None, guess_target=None):
    """Batched f -> ||Tf||_target / ||f||_source (rows of the input are the f's)."""

    def fun(X):
        X = np.atleast_2d(X)
        num, _, _ = luxemburg_batch(T.target, T.apply(X), guess=guess_target)
        den, _, _ = luxemburg_batch(T.source, X, guess=guess_source)
        out = np.zeros(X.shape[0])
        ok = den > 0
        out[ok] = num[ok] / den[ok]
        return out

    return fun


# -- operator norm ----------------------------------------------------------


def _ascent(T: OperatorMatrix, f0: np.ndarray, iters: int) -> AscentRun:
    src = T.source
    n0, _, _ = luxemburg_batch(src, f0[None, :])
    if n0[0] == 0:
        return AscentRun(0.0, f0, [0.0])
    f = f0 / n0[0]
    value = float(ratio_objective(T)(f[None, :])[0])
    history = [value]
    eta = 0.5
    for _ in range(iters):
        tn, _, _ = luxemburg_batch(T.target, T.apply(f[None, :]))
        fun = ratio_objective(T, guess_source=1.0, guess_target=tn[0])
        h = 1e-6 * float(np.max(np.abs(f)))
        g = fd_gradient(fun, f, h)
        gn = float(np.linalg.norm(g))
        if not np.isfinite(gn) or gn == 0:
            break
        step = g / gn * float(np.linalg.norm(f))
        improved = False
        while eta > 1e-10:
            cand = f + eta * step
            cn, _, _ = luxemburg_batch(src, cand[None, :])
            if cn[0] > 0:
                cand = cand / cn[0]
                cv = float(ratio_objective(T)(cand[None, :])[0])
                if cv > value:
                    f, value = cand, cv
                    improved = True
                    eta = min(2.0 * eta, 1.0)
                    break
            eta *= 0.5
        history.append(value)
        if not improved:
            break
    return AscentRun(value, f, history)


def op_norm_lower_run(
    T: OperatorMatrix,
    restarts: int = 8,
    iters: int = 200,
    seed: int = 0,
    starts=None,
) -> AscentRun:
    """Best finite-difference ascent run over restarts of f -> ||Tf|| / ||f||.

    Restart 0 starts from the constant vector, then any explicit ``starts``,
    then seeded Gaussian vectors. Ties go to the lowest restart index.
    """
    n = T.shape[1]
    if not np.any(T.entries):
        return AscentRun(0.0, np.ones(n), [0.0])
    extra = [] if starts is None else [np.asarray(s, dtype=float) for s in np.atleast_2d(starts)]
    inits = [np.ones(n)] + extra
    inits += [make_rng(seed, k).standard_normal(n) for k in range(max(restarts, 1) - 1)]
    runs = ordered_map(lambda f0: _ascent(T, f0, iters), inits)
    best = runs[0]
    for run in runs[1:]:
        if run.value > best.value:
            best = run
    return best


def op_norm_lower(T: OperatorMatrix, restarts: int = 8, iters: int = 200, seed: int = 0) -> float:
    """Lower estimate of ||T|| by restarted finite-difference ascent."""
    return op_norm_lower_run(T, restarts, iters, seed).value


def op_norm_upper_certified(T: OperatorMatrix) -> float:
    """2 ||h||_target with h_i the conjugate-space norm of row i divided by the source weights.

    Row-wise Hölder with constant 2 makes this an upper bound for ||T||.
    """
    rows = T.entries / T.source.weights[None, :]
    h, _, _ = luxemburg_batch(conjugate_space(T.source), rows)
    hn, _, _ = luxemburg_batch(T.target, h[None, :])
    return 2.0 * float(hn[0])


# -- MZ ratios --------------------------------------------------------------


def mz_numerator_denominator(T: OperatorMatrix, F, r) -> tuple[float, float]:
    """(|| (sum |T f_k|^r)^(1/r) ||_target, || (sum |f_k|^r)^(1/r) ||_source)."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    return vector_norm(T.target, T.apply(F), r), vector_norm(T.source, F, r)


def mz_certified_ratio(witness: MzWitness) -> float:
    T = witness.operator
    num, den = mz_numerator_denominator(T, witness.functions, witness.r)
    upper = op_norm_upper_certified(T)
    if den == 0 or upper == 0:
        raise ValidationError("certified ratio undefined: zero functions or zero operator")
    return num / (upper * den)


def _certified_value(T: OperatorMatrix, F: np.ndarray, r) -> float:
    num, den = mz_numerator_denominator(T, F, r)
    upper = op_norm_upper_certified(T)
    if den == 0 or upper == 0:
        return 0.0
    return num / (upper * den)


def _draw_witness(source, target, r, N, seed, k):
    """k-th random witness: families cycle Gaussian, stable, identity/diagonal."""
    m, n = target.n_cells, source.n_cells
    rng = make_rng(seed, 1, k)
    family = k % 3
    if family == 0:
        T = rng.standard_normal((m, n))
    elif family == 1:
        idx = 2.0 if r.is_infinite else min(float(r), 2.0)
        T = stable_from_uniforms(idx, rng.random((m, n)), rng.standard_exponential((m, n)))
        T = np.clip(T, -1e150, 1e150)
    else:
        d = min(m, n)
        T = np.zeros((m, n))
        if k == 2:
            sel = np.arange(d)
            T[sel, sel] = 1.0
        else:
            size = int(rng.integers(1, d + 1))
            sel = np.sort(rng.choice(d, size=size, replace=False))
            T[sel, sel] = rng.standard_normal(size)
        # functions live on the diagonal's support
        if (k // 3) % 2 == 0:
            F = np.eye(n)[sel[np.arange(N) % sel.size]]
        else:
            F = np.zeros((N, n))
            F[:, sel] = rng.standard_normal((N, sel.size))
        return T, F
    if (k // 3) % 2 == 0:
        F = np.eye(n)[np.arange(N) % n]
    else:
        F = rng.standard_normal((N, n))
    return T, F


def _scale_max(X):
    m = float(np.max(np.abs(X)))
    return X / m if m > 0 else X


def _local_ascent(source, target, r, T, F, value, sweeps, seed):
    """Alternating random-direction ascent on F (T fixed), then on T (F fixed).

    The direction's sign comes from a central difference of the certified
    ratio; the step length is found by backtracking halving.
    """
    rng = make_rng(seed, 2)
    etas = [0.5, 0.5]
    for _ in range(sweeps):
        for phase in (0, 1):
            X = F if phase == 0 else T
            D = rng.standard_normal(X.shape)
            if phase == 1:
                # keep the sparsity pattern roughly so diagonal witnesses stay diagonal-like
                D *= (np.abs(X) > 0) + 0.1
            D /= np.linalg.norm(D)
            D *= np.linalg.norm(X)

            def J(Y):
                if phase == 0:
                    return _certified_value(OperatorMatrix(T, source, target), Y, r)
                return _certified_value(OperatorMatrix(Y, source, target), F, r)

            h = 1e-6
            slope = J(X + h * D) - J(X - h * D)
            direction = D if slope >= 0 else -D
            eta = etas[phase]
            while eta > 1e-6:
                cand = _scale_max(X + eta * direction)
                cv = J(cand)
                if cv > value:
                    value = cv
                    if phase == 0:
                        F = cand
                    else:
                        T = cand
                    etas[phase] = min(2.0 * eta, 1.0)
                    break
                eta *= 0.5
            else:
                etas[phase] = 0.5
    return T, F, value


def estimate_k_lower(
    source: SpaceSpec,
    target: SpaceSpec,
    r,
    N: int,
    budget: int,
    seed: int,
    sweeps: int | None = None,
    optimistic_restarts: int = 2,
    optimistic_iters: int = 60,
) -> MzWitness:
    """Best certified lower bound for the l^r-extension constant over random witnesses.

    ``budget`` random (T, F) draws are scored, cycling over Gaussian matrices,
    matrices with symmetric stable entries, and identity/random diagonals, with
    F alternating between basis vectors and Gaussian functions. The best draw
    (lowest index on ties) is then refined by alternating local ascent. The
    returned witness carries the certified value and an optimistic value that
    uses an ascent estimate of ||T|| instead of the certified upper bound.
    """
    source.require_truncated()
    target.require_truncated()
    r = as_exponent(r)
    N = int(N)
    budget = int(budget)
    if budget < 1:
        raise ValidationError("budget must be >= 1")
    if N < 1:
        raise ValidationError("N must be >= 1")

    def score(k):
        T, F = _draw_witness(source, target, r, N, seed, k)
        return _certified_value(OperatorMatrix(T, source, target), F, r)

    scores = ordered_map(score, range(budget))
    best_k = int(np.argmax(scores))
    T, F = _draw_witness(source, target, r, N, seed, best_k)
    T, F = _scale_max(T), _scale_max(F)
    value = _certified_value(OperatorMatrix(T, source, target), F, r)
    if sweeps is None:
        sweeps = 2 * max(1, budget // 20)
    T, F, value = _local_ascent(source, target, r, T, F, value, sweeps, seed)

    op = OperatorMatrix(T, source, target)
    num, den = mz_numerator_denominator(op, F, r)
    row_ratios = ratio_objective(op)(F)
    start = F[int(np.argmax(row_ratios))]
    lower = op_norm_lower_run(op, optimistic_restarts, optimistic_iters, seed, starts=start).value
    upper = op_norm_upper_certified(op)
    lower = min(lower, upper)
    optimistic = num / (lower * den) if lower > 0 and den > 0 else math.nan
    return MzWitness(op, F, r, float(value), float(optimistic))


# -- atomic blow-up ---------------------------------------------------------


def blowup_predicted(q0: float, n: int, scale: float = 1.0) -> float:
    """n ** (1/q0 - 1/(q0 + lam_n)) with lam_n = scale / sqrt(log(n + 2))."""
    lam = scale / math.sqrt(math.log(n + 2))
    return n ** (1.0 / q0 - 1.0 / (q0 + lam))


def blowup_experiment(
    q0: float,
    p0: float,
    scale: float = 1.0,
    n_list=(4, 8, 16, 32, 64, 128),
    budget: int = 200,
    seed: int = 0,
    sweeps: int | None = None,
) -> list[tuple[int, float, float, float]]:
    """Rows (n, certified, optimistic, predicted) for tail source exponents q0 + lam_k.

    Source: the first n tail atoms with exponents q0 + lam_k; target: n unit
    atoms with constant exponent p0; r = q0.
    """
    q0, p0 = float(q0), float(p0)
    if not (1.0 < q0 < p0 < 2.0):
        raise ValidationError(f"need 1 < q0 < p0 < 2, got q0={q0!r}, p0={p0!r}")
    tail_space = SpaceSpec((), TailSpec(q0, scale))
    rows = []
    for n in n_list:
        n = int(n)
        source = truncate(tail_space, n)
        target = SpaceSpec.constant(p0, n)
        w = estimate_k_lower(source, target, q0, n, budget, seed, sweeps=sweeps)
        rows.append((n, w.certified_lower_bound, w.optimistic_ratio, blowup_predicted(q0, n, scale)))
    return rows
