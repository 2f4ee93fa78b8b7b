"""Command-line front end.

Exit codes: 0 ok, 64 usage, 1 IO/parse, 2 numeric failure, 3 non-convergence.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import time
from pathlib import Path

from . import __version__
from .adaptive import AsConfig, run_mscs_as
from .core import build_mscs, inclusion_importance
from .errors import InvalidData, InvalidSpec, MscsError
from .io import read_dataset_csv, write_csv, write_json
from .likelihood import Family
from .model_space import ModelSpace
from .simulate import SAMPLER, ScenarioSpec, bootstrap_ii, ii_null_bound_check, mc_coverage

EXIT_OK, EXIT_IO, EXIT_NUMERIC, EXIT_NONCONVERGED, EXIT_USAGE = 0, 1, 2, 3, 64

log = logging.getLogger("mscs")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _default_workers() -> int:
    env = os.environ.get("MSCS_WORKERS")
    if env:
        return max(1, int(env))
    return len(os.sched_getaffinity(0)) if hasattr(os, "sched_getaffinity") else os.cpu_count() or 1


def _probability(name):
    def parse(text):
        v = float(text)
        if not 0.0 < v < 1.0:
            raise argparse.ArgumentTypeError(f"{name} must lie strictly between 0 and 1")
        return v

    return parse


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _id_list(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _add_common(p):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=_positive_int, default=None)
    p.add_argument("--out-dir", default=".")
    p.add_argument("--prefix", default="")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _add_data(p):
    p.add_argument("data", help="CSV file with header (y or y1..yp, x1..xp)")
    p.add_argument("--family", required=True, choices=[f.value for f in Family])
    p.add_argument("--space", choices=["subsets", "partitions"], default=None)
    p.add_argument("--forced", type=_id_list, default=[])


def _add_sampler(p):
    p.add_argument("--B", type=_positive_int, default=300)
    p.add_argument("--zeta", type=_probability("zeta"), default=0.25)
    p.add_argument("--xi", type=float, default=0.2)
    p.add_argument("--alpha-star", type=_probability("alpha-star"), default=0.05)
    p.add_argument("--alpha0", type=_probability("alpha0"), default=None)
    p.add_argument("--stall-d", type=int, default=10)
    p.add_argument("--max-iters", type=_positive_int, default=200)
    p.add_argument("--fixed-iters", type=_positive_int, default=None)
    p.add_argument("--final-draw", type=_positive_int, default=10**6)
    p.add_argument("--clamp-lo", type=float, default=0.01)
    p.add_argument("--clamp-hi", type=float, default=0.99)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mscs", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"mscs {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    ex = sub.add_parser("exhaustive", help="screen every model of the space")
    _add_data(ex)
    ex.add_argument("--alpha", type=_probability("alpha"), default=0.05)
    ex.add_argument("--bootstrap", type=int, default=0, metavar="S",
                    help="parametric bootstrap replicates for importance intervals")
    _add_common(ex)

    sa = sub.add_parser("sample", help="adaptive stochastic search (subset spaces)")
    _add_data(sa)
    _add_sampler(sa)
    _add_common(sa)

    si = sub.add_parser("simulate", help="Monte Carlo coverage and cardinality")
    si.add_argument("--model", type=int, choices=[1, 2, 3, 4], required=True)
    si.add_argument("--setting", choices=["1", "2", SAMPLER], default="1")
    si.add_argument("--n", type=_positive_int, default=100)
    si.add_argument("--p", type=_positive_int, default=8)
    si.add_argument("--psi", type=float, default=None)
    si.add_argument("--runs", type=_positive_int, default=500)
    si.add_argument("--alphas", type=lambda s: [float(t) for t in s.split(",")],
                    default=[0.10, 0.05, 0.01])
    si.add_argument("--ii-delta", type=float, default=None,
                    help="also check the null inclusion-importance bound at this delta")
    _add_common(si)
    return parser


def _resolved(args) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("verbose", "func")}
    return cfg


def _space_for(args, p: int) -> ModelSpace:
    family = Family(args.family)
    kind = args.space or ("partitions" if family.model_kind == "partition" else "subsets")
    if kind == "partitions":
        if args.forced:
            raise UsageError("--forced applies to subset spaces only")
        return ModelSpace.partitions(p)
    return ModelSpace.subsets(p, args.forced)


def _out(args, name: str) -> Path:
    d = Path(args.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d / f"{args.prefix}{name}"


def cmd_exhaustive(args) -> int:
    data = read_dataset_csv(args.data, args.family)
    space = _space_for(args, data.p)
    config = _resolved(args)
    res = build_mscs(data, space, args.alpha, workers=args.workers)
    if args.bootstrap > 0:
        report = bootstrap_ii(data, space, args.alpha, args.bootstrap, "exhaustive", seed=args.seed)
    else:
        report = inclusion_importance(res)
    write_json(_out(args, "mscs.json"), res.to_dict(), config)
    write_csv(
        _out(args, "survivors.csv"),
        [r.to_dict() for r in res.records if r.survived],
        config,
        ["model", "lambda", "df", "pvalue", "survived", "note"],
    )
    write_csv(_out(args, "importance.csv"), report.rows(), config, ["feature", "ii", "ci_lo", "ci_hi"])
    print(f"{res.cardinality} of {len(res.records)} models survive at alpha={args.alpha}")
    return EXIT_OK


def cmd_sample(args) -> int:
    data = read_dataset_csv(args.data, args.family)
    if data.p >= data.n:
        raise InvalidData(f"adaptive search needs p < n (p={data.p}, n={data.n})")
    space = _space_for(args, data.p)
    if space.kind != "all-subsets":
        raise UsageError("sample runs on subset spaces only")
    try:
        cfg = AsConfig(
            B=args.B, zeta=args.zeta, xi=args.xi, alpha_star=args.alpha_star, alpha0=args.alpha0,
            stall_d=args.stall_d, max_iters=args.max_iters, fixed_iters=args.fixed_iters,
            clamp=(args.clamp_lo, args.clamp_hi), final_draw=args.final_draw, seed=args.seed,
            workers=args.workers,
        )
    except InvalidSpec as exc:
        raise UsageError(str(exc)) from None
    config = _resolved(args)
    res = run_mscs_as(data, space, cfg)
    write_json(_out(args, "as_result.json"), res.to_dict(), config)
    rows = res.trajectory_rows()
    write_csv(_out(args, "trajectory.csv"), rows, config)
    if res.members:
        write_csv(_out(args, "importance.csv"), res.importance().rows(), config,
                  ["feature", "ii", "ci_lo", "ci_hi"])
    print(f"hit_rate={res.hit_rate:.6f} members={len(res.members)} iterations={res.iterations}")
    if not res.converged:
        print("warning: stopping rule not met within max-iters; outputs are partial", file=sys.stderr)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_simulate(args) -> int:
    setting = SAMPLER if args.setting == SAMPLER else int(args.setting)
    try:
        spec = ScenarioSpec(args.model, setting, args.n, args.p, args.psi, args.seed, args.runs,
                            tuple(args.alphas))
    except InvalidSpec as exc:
        raise UsageError(str(exc)) from None
    config = _resolved(args)
    summary = mc_coverage(spec, workers=args.workers)
    payload = summary.to_dict()
    if args.ii_delta is not None:
        bound = ii_null_bound_check(spec, delta=args.ii_delta, alpha=min(spec.alphas),
                                    workers=args.workers)
        payload["ii_null_bound"] = bound.rows()
    write_json(_out(args, "summary.json"), payload, config)
    write_csv(_out(args, "summary.csv"), summary.rows(), config)
    for row in summary.rows():
        print(",".join(str(v) for v in row.values()))
    if summary.flagged:
        print(f"warning: {summary.discarded} runs discarded", file=sys.stderr)
    return EXIT_OK


COMMANDS = {"exhaustive": cmd_exhaustive, "sample": cmd_sample, "simulate": cmd_simulate}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", None) is None:
        args.workers = _default_workers()
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    start = time.perf_counter()
    try:
        code = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"mscs: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, InvalidData) as exc:
        print(f"mscs: input error: {exc}", file=sys.stderr)
        return EXIT_IO
    except MscsError as exc:
        print(f"mscs: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    log.info("finished in %.2fs", time.perf_counter() - start)
    return code


if __name__ == "__main__":
    sys.exit(main())
