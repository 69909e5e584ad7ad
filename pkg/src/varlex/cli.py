"""Command-line front end: ``varlex <subcommand> [options]``.

Every subcommand writes CSV (header row, 17 significant digits) to stdout or
``--out``. Validation problems exit with status 2 and a one-line message on
stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .errors import DomainError, ValidationError
from .estimator import blowup_experiment, estimate_k_lower
from .norms import associate_maximizer, luxemburg_norm, pointwise_lr
from .oracle import (
    BoundFact,
    BoundKey,
    ExponentDescriptor,
    decide,
    propagate_bounds,
)
from .spaces import Exponent, as_exponent, interval_Ipq, space_from_dict, truncate
from .stable import mc_ratio_check, moment_c


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(f"{self.prog}: {message}")


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, Exponent):
        return "inf" if x.is_infinite else format(float(x), ".17g")
    if x is None:
        return ""
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def _write_csv(header, rows, out):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    text = buf.getvalue()
    if out:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def load_json(path: str):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ValidationError(f"{path}: cannot read ({exc.strerror})") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _function(data, key: str, n: int, where: str) -> np.ndarray:
    if key not in data:
        raise ValidationError(f"{where}.{key}: missing")
    raw = data[key]
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise ValidationError(f"{where}.{key}: expected numbers") from None
    want = 1 if key == "f" else 2
    if arr.ndim != want or arr.shape[-1] != n:
        raise ValidationError(f"{where}.{key}: shape {arr.shape} does not fit {n} cells")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{where}.{key}: values must be finite")
    return arr


def _space(path: str, depth: int | None, where: str = "space", data=None):
    data = load_json(path) if data is None else data
    try:
        sp = space_from_dict(data, where)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    if sp.has_tail:
        if depth is None:
            raise ValidationError(f"{path}: {where} has a tail; pass --truncate N")
        sp = truncate(sp, depth)
    return sp, data


def _pair(path: str, depth: int | None, keep_tail: bool = False):
    data = load_json(path)
    if not isinstance(data, dict) or "source" not in data or "target" not in data:
        raise ValidationError(f"{path}: expected an object with 'source' and 'target'")
    out = []
    for side in ("source", "target"):
        try:
            sp = space_from_dict(data[side], side)
        except ValidationError as exc:
            raise ValidationError(f"{path}: {exc}") from None
        if sp.has_tail and not keep_tail:
            if depth is None:
                raise ValidationError(f"{path}: {side} has a tail; pass --truncate N")
            sp = truncate(sp, depth)
        out.append(sp)
    return out[0], out[1]


def _exp_arg(text: str) -> Exponent:
    try:
        return as_exponent(text)
    except ValidationError as exc:
        raise ValidationError(f"invalid exponent {text!r}: {exc}") from None


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ValidationError(f"expected a number, got {text!r}") from None
    return v


# -- subcommands ------------------------------------------------------------


def cmd_norm(a):
    sp, data = _space(a.config, a.truncate)
    f = _function(data, "f", sp.n_cells, "space")
    res = luxemburg_norm(sp, f, rtol=a.rtol)
    _write_csv(["value", "residual", "iterations"], [(res.value, res.residual, res.iterations)], a.out)


def cmd_vnorm(a):
    sp, data = _space(a.config, a.truncate)
    F = _function(data, "F", sp.n_cells, "space")
    if F.shape[0] == 0:
        raise ValidationError("space.F: needs at least one function")
    res = luxemburg_norm(sp, pointwise_lr(F, a.r), rtol=a.rtol)
    _write_csv(["value", "residual", "iterations"], [(res.value, res.residual, res.iterations)], a.out)


def cmd_dualnorm(a):
    sp, data = _space(a.config, a.truncate)
    f = _function(data, "f", sp.n_cells, "space")
    res = associate_maximizer(sp, f, method=a.method, seed=a.seed)
    _write_csv(["value", "residual", "iterations"], [(res.value, res.residual, res.iterations)], a.out)


def cmd_interval(a):
    I = interval_Ipq(a.p, a.q)
    _write_csv(["lo", "hi", "lo_closed", "hi_closed"], [(I.lo, I.hi, I.lo_closed, I.hi_closed)], a.out)


def cmd_decide(a):
    source, target = _pair(a.config, None, keep_tail=True)
    rows = []
    for r in a.r:
        v = decide(source, target, r)
        rows.append((r, v.status.value, v.rule, str(v.interval) if v.interval else ""))
    _write_csv(["r", "status", "rule", "interval"], rows, a.out)


def _descriptor(d, where):
    if not isinstance(d, dict):
        raise ValidationError(f"{where}: expected an object")
    extra = set(d) - {"space", "cells", "p"}
    if extra:
        raise ValidationError(f"{where}: unknown field(s) {sorted(extra)}")
    for k in ("space", "cells", "p"):
        if k not in d:
            raise ValidationError(f"{where}.{k}: missing")
    if not isinstance(d["cells"], list) or not isinstance(d["p"], list):
        raise ValidationError(f"{where}: 'cells' and 'p' must be lists")
    try:
        return ExponentDescriptor(str(d["space"]), tuple(d["cells"]), tuple(d["p"]))
    except (ValidationError, TypeError, ValueError) as exc:
        raise ValidationError(f"{where}: {exc}") from None


def _key(d, where):
    if not isinstance(d, dict):
        raise ValidationError(f"{where}: expected an object")
    if "r" not in d:
        raise ValidationError(f"{where}.r: missing")
    try:
        r = as_exponent(d["r"])
    except ValidationError as exc:
        raise ValidationError(f"{where}.r: {exc}") from None
    return BoundKey(_descriptor(d.get("source"), f"{where}.source"),
                    _descriptor(d.get("target"), f"{where}.target"), r)


def cmd_propagate(a):
    raw_seeds = load_json(a.seeds)
    raw_queries = load_json(a.queries)
    if not isinstance(raw_seeds, list):
        raise ValidationError(f"{a.seeds}: expected a list of seed objects")
    if not isinstance(raw_queries, list):
        raise ValidationError(f"{a.queries}: expected a list of key objects")
    seeds = []
    for i, s in enumerate(raw_seeds):
        where = f"{a.seeds}: seeds[{i}]"
        key = _key(s, where)
        rule = s.get("rule", "given")
        bound = s.get("bound")
        if isinstance(bound, bool):
            raise ValidationError(f"{where}.bound: expected a number")
        try:
            seeds.append(BoundFact.seed(key, rule, bound))
        except ValidationError as exc:
            raise ValidationError(f"{where}: {exc}") from None
    queries = [_key(q, f"{a.queries}: queries[{i}]") for i, q in enumerate(raw_queries)]
    ledger = propagate_bounds(seeds, queries, max_steps=a.max_steps, use_builtin=not a.no_builtin)
    rows = [(k, b, d) for k, b, _, d in ledger.rows(only_queries=a.queries_only)]
    _write_csv(["key", "bound", "derivation"], rows, a.out)


def cmd_moment(a):
    _write_csv(["r", "p", "value"], [(a.r, a.p, moment_c(a.r, a.p))], a.out)


def cmd_mc_check(a):
    mc, formula = mc_ratio_check(a.r, a.p, a.q, a.samples, a.seed)
    _write_csv(
        ["r", "p", "q", "formula", "mc", "rel_err"],
        [(a.r, a.p, a.q, formula, mc, (mc - formula) / formula)],
        a.out,
    )


def cmd_estimate_k(a):
    source, target = _pair(a.config, a.truncate)
    w = estimate_k_lower(source, target, a.r, a.N, a.budget, a.seed)
    _write_csv(
        ["n", "certified", "optimistic", "predicted"],
        [(source.n_cells, w.certified_lower_bound, w.optimistic_ratio, None)],
        a.out,
    )


def cmd_blowup(a):
    n_list = []
    n = 4
    while n <= a.nmax:
        n_list.append(n)
        n *= 2
    if not n_list:
        raise ValidationError("--nmax must be >= 4")
    rows = blowup_experiment(a.q0, a.p0, a.scale, n_list, a.budget, a.seed)
    _write_csv(["n", "certified", "optimistic", "predicted"], rows, a.out)


def _nonneg_int(text):
    try:
        v = int(text)
    except ValueError:
        raise ValidationError(f"expected an integer, got {text!r}") from None
    if v < 0:
        raise ValidationError(f"expected a non-negative integer, got {v}")
    return v


def _pos_tol(text):
    v = _positive_float(text)
    if not v > 0:
        raise ValidationError("tolerance must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--out", help="write CSV here instead of stdout")
    parser = _Parser(prog="varlex", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def space_cmd(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.add_argument("--config", required=True, help="space JSON with inline function")
        p.add_argument("--truncate", type=_nonneg_int, help="materialize N tail atoms")
        p.set_defaults(func=fn)
        return p

    p = space_cmd("norm", cmd_norm, "Luxemburg norm of f")
    p.add_argument("--rtol", type=_pos_tol, default=1e-12)
    p = space_cmd("vnorm", cmd_vnorm, "norm of the pointwise l^r sum of F")
    p.add_argument("--r", type=_exp_arg, required=True)
    p.add_argument("--rtol", type=_pos_tol, default=1e-12)
    p = space_cmd("dualnorm", cmd_dualnorm, "associate norm of f")
    p.add_argument("--method", choices=["auto", "kkt", "ascent"], default="auto")
    p.add_argument("--seed", type=_nonneg_int, default=0)

    p = sub.add_parser("interval", parents=[common], help="the interval I(p,q)")
    p.add_argument("--p", type=_exp_arg, required=True, help="target exponent")
    p.add_argument("--q", type=_exp_arg, required=True, help="source exponent")
    p.set_defaults(func=cmd_interval)

    p = sub.add_parser("decide", parents=[common], help="finiteness verdicts")
    p.add_argument("--config", required=True, help="pair JSON {source, target}")
    p.add_argument("--r", type=_exp_arg, nargs="+", required=True)
    p.set_defaults(func=cmd_decide)

    p = sub.add_parser("propagate", parents=[common], help="bound propagation fixpoint")
    p.add_argument("--seeds", required=True)
    p.add_argument("--queries", required=True)
    p.add_argument("--max-steps", type=_nonneg_int, default=1000)
    p.add_argument("--no-builtin", action="store_true", help="skip built-in seeds")
    p.add_argument("--queries-only", action="store_true", help="only print the query keys")
    p.set_defaults(func=cmd_propagate)

    p = sub.add_parser("moment", parents=[common], help="stable moment constant c_{r,p}")
    p.add_argument("--r", type=_positive_float, required=True)
    p.add_argument("--p", type=_positive_float, required=True)
    p.set_defaults(func=cmd_moment)

    p = sub.add_parser("mc-check", parents=[common], help="Monte Carlo moment-ratio check")
    p.add_argument("--r", type=_positive_float, required=True)
    p.add_argument("--p", type=_positive_float, required=True)
    p.add_argument("--q", type=_positive_float, required=True)
    p.add_argument("--samples", type=_nonneg_int, default=10**6)
    p.add_argument("--seed", type=_nonneg_int, required=True)
    p.set_defaults(func=cmd_mc_check)

    p = sub.add_parser("estimate-k", parents=[common], help="certified lower bound for k")
    p.add_argument("--config", required=True, help="pair JSON {source, target}")
    p.add_argument("--truncate", type=_nonneg_int)
    p.add_argument("--r", type=_exp_arg, required=True)
    p.add_argument("--N", type=_nonneg_int, required=True)
    p.add_argument("--budget", type=_nonneg_int, required=True)
    p.add_argument("--seed", type=_nonneg_int, required=True)
    p.set_defaults(func=cmd_estimate_k)

    p = sub.add_parser("blowup", parents=[common], help="atomic blow-up experiment")
    p.add_argument("--q0", type=_positive_float, required=True)
    p.add_argument("--p0", type=_positive_float, required=True)
    p.add_argument("--scale", type=_positive_float, default=1.0)
    p.add_argument("--nmax", type=_nonneg_int, default=128)
    p.add_argument("--budget", type=_nonneg_int, default=200)
    p.add_argument("--seed", type=_nonneg_int, required=True)
    p.set_defaults(func=cmd_blowup)
    return parser


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except (ValidationError, DomainError) as exc:
        msg = " ".join(str(exc).split())
        print(f"varlex: error: {msg}", file=sys.stderr)
        return 2
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
