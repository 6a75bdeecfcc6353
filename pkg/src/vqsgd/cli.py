"""Command-line front end.

Exit codes: 0 ok, 1 check failed, 2 input parse error, 3 dimension error,
4 divergence, 64 usage error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import geometry, privacy, sgd_sim
from .encoder import encode, pad_to_valid
from .errors import (
    BallViolation,
    CardinalityOverflow,
    DimensionConstraint,
    InvalidDimension,
    MismatchError,
    ParameterRange,
    ParseError,
    UnsupportedDimension,
)
from .pointset import Family, make_pointset
from .quantizer import (
    MAGIC,
    NORM_BITS,
    RngState,
    dequantize,
    exact_second_moment,
    index_bits,
    iter_records,
    quantize,
    serialize,
)

EXIT_OK, EXIT_FAIL, EXIT_PARSE, EXIT_DIM, EXIT_DIVERGED, EXIT_USAGE = 0, 1, 2, 3, 4, 64
FAMILY_CHOICES = ("cp", "scp", "simplex", "hadamard", "rm", "gauss", "epsnet")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _num(x):
    """Fixed-precision float for reproducible text output."""
    if x is None or not math.isfinite(x):
        return x if x is None else str(x)
    return float(f"{x:.10e}")


def _pointset_args(args, d):
    family = Family.parse(args.family)
    if family is Family.GAUSSIAN:
        if args.radius is None or args.points is None:
            raise UsageError("--family gauss needs --radius and --points")
        return {"R": args.radius, "seed": args.seed, "cardinality_override": args.points}
    if family is Family.EPS_NET:
        if args.eps is None:
            raise UsageError("--family epsnet needs --eps")
        return {"eps": args.eps}
    return {}


def _make_pointset(args, d):
    return make_pointset(args.family, d, **_pointset_args(args, d))


def _write(path, data):
    if path in (None, "-"):
        if isinstance(data, bytes):
            sys.stdout.buffer.write(data)
        else:
            sys.stdout.write(data)
    else:
        Path(path).write_bytes(data) if isinstance(data, bytes) else Path(path).write_text(data)


# -- subcommands -------------------------------------------------------------


def _read_vectors(raw, args):
    """Vectors from CSV text or from VQSG records (which are decoded first)."""
    if raw.startswith(MAGIC):
        out = []
        for qg in iter_records(raw):
            ps = make_pointset(Family(qg.family_id), qg.d, **_pointset_args(args, qg.d))
            if ps.family_id != qg.family_id:
                raise MismatchError("record family differs from --family")
            out.append(dequantize(ps, qg))
        return out
    try:
        text = raw.decode("utf-8")
    except UnicodeDecodeError:
        raise ParseError("input is neither UTF-8 CSV nor VQSG records") from None
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            out.append(np.array([float(tok) for tok in line.split(",")]))
        except ValueError:
            raise ParseError(f"non-numeric value in {line.strip()!r}", lineno) from None
    return out


def cmd_quantize(args):
    raw = sys.stdin.buffer.read() if args.input == "-" else Path(args.input).read_bytes()
    vectors = _read_vectors(raw, args)
    ps = _make_pointset(args, args.d)
    chunks = []
    for i, vec in enumerate(vectors):
        if len(vec) != args.d:
            raise MismatchError(f"vector {i} has width {len(vec)}, expected --d {args.d}")
        qg = quantize(ps, vec, args.s, RngState(args.seed, i))
        chunks.append(serialize(qg))
        print(
            f"vector {i}: {index_bits(ps.m, args.s)} index bits + {NORM_BITS} norm bits",
            file=sys.stderr if args.out in (None, "-") else sys.stdout,
        )
    _write(args.out, b"".join(chunks))
    return EXIT_OK


def cmd_verify(args):
    ps = _make_pointset(args, args.d)
    net = geometry.make_direction_net(ps.pad_d, args.eps_grid, seed=args.seed)
    report = geometry.verify_covering(ps, net)
    payload = report.to_dict()
    payload.update(family=ps.family.short_name, d=ps.d, pad_d=ps.pad_d, m=ps.m, R=_num(ps.R))
    _write(args.out, json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_audit_dp(args):
    ps = _make_pointset(args, args.d)
    res = privacy.audit_dp_ratio(ps, args.pairs, RngState(args.seed))
    bound = privacy.published_ratio_bound(ps.family, ps.pad_d)
    eps = math.log(res.max_ratio) if math.isfinite(res.max_ratio) else math.inf
    lines = {
        "family": ps.family.short_name,
        "d": ps.d,
        "candidates": res.n_candidates,
        "max_ratio": _num(res.max_ratio),
        "implied_epsilon": _num(eps),
        "bound": _num(bound),
        "bound_epsilon": _num(math.log(bound)) if math.isfinite(bound) else "inf",
        "point_index": res.point_index,
    }
    text = json.dumps(lines, indent=2, sort_keys=True) + "\n"
    _write(args.out, text)
    return EXIT_OK if res.max_ratio <= bound * (1 + 1e-6) else EXIT_FAIL


def cmd_simulate(args):
    config = sgd_sim.load_config(args.config)
    metrics = sgd_sim.run(config)
    prefix = Path(args.out) if args.out else Path(args.config).with_suffix("")
    prefix.parent.mkdir(parents=True, exist_ok=True)
    Path(f"{prefix}.csv").write_text(metrics.to_csv(timing=args.timing))
    summary = metrics.summary()
    Path(f"{prefix}.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(json.dumps(summary, sort_keys=True))
    return EXIT_DIVERGED if metrics.diverged else EXIT_OK


def cmd_bench(args):
    ps = _make_pointset(args, args.d)
    rng = RngState(args.seed)
    v = rng.generator.standard_normal(args.d)
    v /= np.linalg.norm(v)
    padded, _ = pad_to_valid(v, ps.family)
    padded = np.concatenate((padded, np.zeros(ps.pad_d - len(padded))))
    predicted = (exact_second_moment(ps, encode(ps, padded)) - 1.0) / args.s
    errs = np.empty(args.trials)
    for k in range(args.trials):
        errs[k] = np.sum((dequantize(ps, quantize(ps, v, args.s, rng)) - v) ** 2)
    out = {
        "family": ps.family.short_name,
        "d": args.d,
        "m": ps.m,
        "s": args.s,
        "trials": args.trials,
        "empirical_variance": _num(errs.mean()),
        "standard_error": _num(errs.std(ddof=1) / math.sqrt(args.trials)) if args.trials > 1 else None,
        "predicted_variance": _num(predicted),
        "bound_R2_over_s": _num(ps.R**2 / args.s),
        "bits_per_iteration": index_bits(ps.m, args.s) + NORM_BITS,
        "bits_exact_log": _num(index_bits(ps.m, args.s, exact_log=True) + NORM_BITS),
    }
    _write(args.out, json.dumps(out, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


# -- argument parsing ----------------------------------------------------------


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return value


def _add_family(p, required=True):
    p.add_argument("--family", choices=FAMILY_CHOICES, required=required, help="point-set family")
    p.add_argument("--d", type=_positive_int, required=True, help="vector dimension")
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--radius", type=float, help="gauss: circumradius R")
    p.add_argument("--points", type=_positive_int, help="gauss: number of points")
    p.add_argument("--out", help="output path ('-' or omitted: stdout)")


def build_parser():
    parser = _Parser(prog="vqsgd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("quantize", help="quantize vectors from a CSV or VQSG file")
    p.add_argument("--in", dest="input", required=True, help="input file ('-' for stdin)")
    _add_family(p)
    p.add_argument("--s", type=_positive_int, default=1, help="repetition count")
    p.add_argument("--eps", type=float, help="epsnet: net radius")
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("verify", help="check that a point set covers the unit ball")
    _add_family(p)
    p.add_argument("--eps", type=float, help="epsnet: net radius of the point set")
    p.add_argument("--grid", dest="eps_grid", type=float, default=0.01,
                   help="covering radius of the direction net (default 0.01)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("audit-dp", help="search for the worst coefficient ratio")
    _add_family(p)
    p.add_argument("--eps", type=float, help="epsnet: net radius")
    p.add_argument("--pairs", type=_positive_int, default=10_000, help="random input pairs")
    p.set_defaults(func=cmd_audit_dp)

    p = sub.add_parser("simulate", help="run a distributed SGD simulation from JSON")
    p.add_argument("--config", required=True, help="simulation config (JSON)")
    p.add_argument("--out", help="output prefix for <out>.csv and <out>.json")
    p.add_argument("--timing", action="store_true", help="record wall time in the ms column")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="empirical vs exact quantizer variance")
    _add_family(p)
    p.add_argument("--s", type=_positive_int, default=1, help="repetition count")
    p.add_argument("--eps", type=float, help="epsnet: net radius")
    p.add_argument("--trials", type=_positive_int, default=10_000, help="Monte Carlo draws")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"vqsgd: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, json.JSONDecodeError, KeyError) as exc:
        print(f"vqsgd: parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (MismatchError, InvalidDimension, DimensionConstraint, UnsupportedDimension,
            BallViolation) as exc:
        print(f"vqsgd: dimension error: {exc}", file=sys.stderr)
        return EXIT_DIM
    except (ParameterRange, CardinalityOverflow, ValueError) as exc:
        print(f"vqsgd: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"vqsgd: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
