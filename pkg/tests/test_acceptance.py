"""Acceptance criteria 1-10, each printing one PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or directly with ``python tests/test_acceptance.py``.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest
from scipy.stats import spearmanr

from conftest import random_function, random_space
from varlex.estimator import (
    MzWitness,
    OperatorMatrix,
    blowup_experiment,
    estimate_k_lower,
    mz_certified_ratio,
    op_norm_lower,
    op_norm_lower_run,
    op_norm_upper_certified,
)
from varlex.norms import associate_norm, holder_check, luxemburg_norm
from varlex.oracle import (
    BoundFact,
    BoundKey,
    ExponentDescriptor,
    ExtensionQuery,
    Status,
    decide_atomic,
    decide_constant,
    decide_variable,
    propagate_bounds,
    replay,
)
from varlex.spaces import INF, Cell, CellKind, Exponent, SpaceSpec, interval_Ipq
from varlex.stable import log_gamma, mc_integration_lemma, mc_ratio_check, moment_c

LINES: list[str] = []


def report(n, ok, detail):
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    LINES.append(line)
    print(line)
    return ok


def corpus(count=1000, seed=20240601):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        sp = random_space(rng)
        out.append((sp, random_function(rng, sp.n_cells), random_function(rng, sp.n_cells), float(rng.uniform(1, 6))))
    return out


def test_criterion_01_norm_correctness():
    t0 = time.perf_counter()
    worst_const = worst_res = 0.0
    for sp, f, _, p0 in corpus():
        const = SpaceSpec.from_exponents([p0] * sp.n_cells, sp.weights)
        want = np.sum(sp.weights * np.abs(f) ** p0) ** (1 / p0)
        got = luxemburg_norm(const, f).value
        if want > 0:
            worst_const = max(worst_const, abs(got - want) / want)
        res = luxemburg_norm(sp, f)
        if res.value > 0 and np.isfinite(sp.exponents).all():
            worst_res = max(worst_res, res.residual)
    dt = time.perf_counter() - t0
    ok = worst_const <= 1e-9 and worst_res <= 1e-10 and dt < 10
    assert report(1, ok, f"max rel err {worst_const:.2e} (<=1e-9), max residual {worst_res:.2e} (<=1e-10), {dt:.1f}s (<10s)")


def test_criterion_02_sandwich_and_holder():
    worst_sand = worst_holder = worst_const = 0.0
    for sp, f, g, p0 in corpus():
        lhs, rhs = holder_check(sp, f, g)
        worst_holder = max(worst_holder, lhs - rhs)
        if np.isfinite(sp.exponents).all():
            lux = luxemburg_norm(sp, f).value
            a = associate_norm(sp, f)
            worst_sand = max(worst_sand, 0.5 * lux - a, a - 2 * lux)
        const = SpaceSpec.from_exponents([p0] * sp.n_cells, sp.weights)
        want = np.sum(sp.weights * np.abs(f) ** p0) ** (1 / p0)
        if want > 0:
            worst_const = max(worst_const, abs(associate_norm(const, f) - want) / want)
    ok = worst_sand <= 1e-8 and worst_holder <= 1e-8 and worst_const <= 1e-6
    assert report(
        2, ok,
        f"sandwich slack {worst_sand:.2e}, Hölder slack {worst_holder:.2e} (<=1e-8), "
        f"constant-exponent associate rel err {worst_const:.2e} (<=1e-6)",
    )


def test_criterion_03_moment_constants():
    t0 = time.perf_counter()
    cancelled = lambda p: (math.gamma((1 + p) / 2) / math.gamma(0.5)) ** (1 / p)
    exact_ok = (
        abs(moment_c(2, 2) - math.sqrt(0.5)) <= 1e-12
        and abs(moment_c(2, 1) - 1 / math.sqrt(math.pi)) <= 1e-12
        and abs(moment_c(2, 2) - cancelled(2)) <= 1e-12
        and abs(moment_c(2, 1) - cancelled(1)) <= 1e-12
    )
    errs = []
    for r, p, q in [(2, 1, 2), (1.5, 1, 1.2), (1.8, 1, 1.5)]:
        mc, formula = mc_ratio_check(r, p, q, 10**6, seed=0)
        errs.append(((r, p, q), (mc - formula) / formula))
    dt = time.perf_counter() - t0
    ok = exact_ok and all(abs(e) <= 0.02 for _, e in errs) and dt < 60
    detail = ", ".join(f"{k}: {e:+.2%}" for k, e in errs)
    assert report(3, ok, f"closed forms {'ok' if exact_ok else 'off'}; MC rel err {detail} (|.|<=2%); {dt:.1f}s")


def test_criterion_04_stable_lemma():
    errs = []
    for r in (1.2, 1.5, 2.0):
        lhs, rhs = mc_integration_lemma(r, r / 2, [1, 1], [1, 0], 10**6, seed=0)
        assert rhs == pytest.approx(2 ** (1 / r), rel=1e-14)
        errs.append((r, (lhs - rhs) / rhs))
    ok = all(abs(e) <= 0.02 for _, e in errs)
    assert report(4, ok, ", ".join(f"r={r}: {e:+.2%}" for r, e in errs) + " (|.|<=2%)")


def test_criterion_05_oracle_grid():
    t0 = time.perf_counter()
    grid = [Exponent(Fraction(10 + k, 10)) for k in range(31)] + [INF]
    G = range(len(grid))
    status = {(i, j, k): decide_constant(grid[i], grid[j], grid[k]).status for i in G for j in G for k in G}
    conj = {g: g.conjugate() for g in grid}
    dual_bad = sum(
        s != decide_constant(conj[grid[j]], conj[grid[i]], conj[grid[k]]).status for (i, j, k), s in status.items()
    )
    # Finite must persist when p grows or q shrinks; adjacent grid steps suffice
    mono_bad = 0
    for (i, j, k), s in status.items():
        if s is Status.FINITE:
            mono_bad += j + 1 < len(grid) and status[(i, j + 1, k)] is not Status.FINITE
            mono_bad += i > 0 and status[(i - 1, j, k)] is not Status.FINITE
    diffuse = lambda e: SpaceSpec((Cell(1.0, e, CellKind.DIFFUSE),))
    inner = [g for g in grid if 1 < g < INF]
    var_bad = 0
    for q in inner:
        for p in inner:
            sq, sp = diffuse(q), diffuse(p)
            for r in grid:
                v = decide_variable(ExtensionQuery.from_spaces(sq, sp, r)).status
                var_bad += v != decide_constant(q, p, r).status
    src = SpaceSpec((Cell(1.0, "3/2", CellKind.DIFFUSE), Cell(1.0, 2.0)))
    tgt = diffuse(2)
    atomic = {r: decide_atomic(ExtensionQuery.from_spaces(src, tgt, r)).status for r in (1.6, 2, 1.4)}
    example_ok = atomic[1.6] is Status.FINITE and atomic[2] is Status.FINITE and atomic[1.4] is Status.INFINITE
    undet_bad = 0
    for qt in inner:
        for pt in inner[::2]:
            s2 = SpaceSpec((Cell(1.0, qt, CellKind.DIFFUSE), Cell(1.0, 1.1)))
            s1 = SpaceSpec((Cell(1.0, pt, CellKind.DIFFUSE),))
            I = interval_Ipq(pt, qt)
            for r in grid:
                v = decide_atomic(ExtensionQuery.from_spaces(s2, s1, r)).status
                edge = I.contains(r) and I.on_boundary(r) and r != 2
                undet_bad += (v is Status.UNDETERMINED) != edge
    dt = time.perf_counter() - t0
    ok = dual_bad == mono_bad == var_bad == undet_bad == 0 and example_ok and dt < 5
    assert report(
        5, ok,
        f"duality/monotone/variable/undetermined mismatches {dual_bad}/{mono_bad}/{var_bad}/{undet_bad}, "
        f"atomic example {'ok' if example_ok else 'wrong'}, {dt:.1f}s (<5s)",
    )


def test_criterion_06_positive_operators():
    rng = np.random.default_rng(606)
    worst = -np.inf
    for k in range(100):
        m, n = (int(x) for x in rng.integers(1, 17, size=2))
        source, target = random_space(rng, n), random_space(rng, m)
        T = OperatorMatrix(rng.random((m, n)) * (rng.random((m, n)) < 0.7), source, target)
        if not T.entries.any():
            T = OperatorMatrix(np.ones((m, n)), source, target)
        F = rng.standard_normal((int(rng.integers(1, 6)), n))
        for r in (1, 1.5, 2, 3, "inf"):
            worst = max(worst, mz_certified_ratio(MzWitness(T, F, r)))
    assert report(6, worst <= 1 + 1e-9, f"max certified ratio {worst:.6f} (<=1+1e-9) over 500 cases")


def test_criterion_07_estimator_coherence():
    rng = np.random.default_rng(707)
    violations = 0
    nonmono = 0
    for k in range(200):
        m, n = (int(x) for x in rng.integers(1, 9, size=2))
        source, target = random_space(rng, n), random_space(rng, m)
        T = OperatorMatrix(rng.standard_normal((m, n)), source, target)
        run = op_norm_lower_run(T, restarts=2, iters=15, seed=k)
        violations += run.value > op_norm_upper_certified(T)
        nonmono += any(b < a - 1e-12 for a, b in zip(run.history, run.history[1:]))
    worst = 0.0
    for n in (1, 2, 4, 8, 16, 32, 64):
        T = OperatorMatrix(np.eye(n), SpaceSpec.constant(3, n), SpaceSpec.constant(2, n))
        worst = max(worst, abs(op_norm_lower(T, restarts=2, iters=30) / n ** (1 / 2 - 1 / 3) - 1))
    ok = violations == 0 and nonmono == 0 and worst <= 1e-3
    assert report(7, ok, f"lower>upper {violations}/200, non-monotone runs {nonmono}, identity rel err {worst:.1e} (<=1e-3)")


@pytest.mark.slow
def test_criterion_08_blowup():
    t0 = time.perf_counter()
    rows = blowup_experiment(1.2, 1.5, scale=1.0, n_list=(4, 8, 16, 32, 64, 128), budget=200, seed=0)
    dt = time.perf_counter() - t0
    cert = [r[1] for r in rows]
    pred = [r[3] for r in rows]
    growth = cert[-1] / cert[0]
    rho = spearmanr(cert, pred).statistic if np.ptp(cert) > 0 else float("nan")
    table = " ".join(f"n={n}:{c:.4f}/{o:.4f}/{p:.3f}" for n, c, o, p in rows)
    ok = growth >= 1.5 and rho >= 0.9 and dt < 300
    assert report(
        8, ok,
        f"certified(128)/certified(4) = {growth:.3f} (>=1.5), spearman {rho:.3f} (>=0.9), {dt:.0f}s; "
        f"certified/optimistic/predicted {table}",
    )


@pytest.mark.slow
def test_criterion_09_out_of_interval_growth():
    vals = {}
    for n in (4, 64):
        s = SpaceSpec.constant(4, n)
        w = estimate_k_lower(s, s, 8, n, budget=200, seed=0)
        vals[n] = (w.certified_lower_bound, w.optimistic_ratio)
    growth = vals[64][0] / vals[4][0]
    assert report(
        9, growth >= 1.15,
        f"certified(64)/certified(4) = {growth:.3f} (>=1.15); certified {vals[4][0]:.4f} -> {vals[64][0]:.4f}, "
        f"optimistic {vals[4][1]:.4f} -> {vals[64][1]:.4f}",
    )


def _key(q, p, r, qs="S", ps="T"):
    return BoundKey(ExponentDescriptor(qs, (0,), (q,)), ExponentDescriptor(ps, (0,), (p,)), r)


def test_criterion_10_propagation():
    queries = [_key(q, p, r) for q in (1.5, 2, 3) for p in (1.5, 2, 3, 4) for r in (1.5, 2, 3, 4)]
    big = BoundKey(ExponentDescriptor("S", (0, 1), (1.5, 2)), ExponentDescriptor("T", (0, 1), (2, 3)), 3)
    queries += [big, BoundKey(ExponentDescriptor("S", (1,), (2,)), ExponentDescriptor("T", (0,), (2,)), 3)]
    assert len(set(queries)) == 50
    seeds = [
        BoundFact.seed(_key(3, 3, 4), "given", 2),
        BoundFact.seed(_key(2, 4, 3), "given", "5/4"),
        BoundFact.seed(big, "given", 3),
        BoundFact.seed(_key(2, 2, 2), "finite-unknown"),
    ]
    serial = propagate_bounds(seeds, queries)
    base = serial.signature()
    same = all(propagate_bounds(seeds, queries, order_seed=s).signature() == base for s in range(10))
    replay_bad = sum(replay(f) != f.value for f in serial.facts.values())
    ok = same and replay_bad == 0 and serial.converged
    assert report(
        10, ok,
        f"10 shuffled orders {'identical' if same else 'DIFFER'} to serial ({len(serial.keys)} keys after closure, "
        f"{len(serial.facts)} bounded), replay mismatches {replay_bad}",
    )


if __name__ == "__main__":
    import sys

    fns = [v for k, v in sorted(globals().items()) if k.startswith("test_criterion_")]
    failed = 0
    for fn in fns:
        try:
            fn()
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
