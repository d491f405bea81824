"""Command-line interface.

    fistalyap run --config exp.cfg [--iterations 500 --rule nesterov ...]
    fistalyap compare --configs a.cfg b.cfg [--output DIR]
    fistalyap validate-tseq --rule nesterov --n 100000
    fistalyap problem-dump --name lasso --dim 5 --seed 42 [--output FILE]
"""

import argparse
import logging
import sys

from . import harness, problems, tseq
from .io import write_csv


def _overrides(extra):
    """Turn leftover ``--key value`` tokens into a dict."""
    out, i = {}, 0
    while i < len(extra):
        tok = extra[i]
        if not tok.startswith("--"):
            raise harness.ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise harness.ConfigError(f"missing value for {tok}")
            val = extra[i + 1]
            i += 2
        out[key.replace("-", "_")] = val
    return out


def cmd_run(args, extra):
    cfg = harness.load_config(args.config, _overrides(extra))
    summary = harness.run_experiment(cfg)
    for r in summary.reports:
        print(r.line() + ("" if r.asserted else " (informational)"))
    for name, why in summary.skipped.items():
        print(f"[SKIP] {name}: {why}")
    print(f"final gap = {summary.final_gap!r}; summary: {summary.files.get('summary')}")
    return summary.exit_status


def cmd_compare(args, extra):
    ov = _overrides(extra)
    cfgs = [harness.load_config(p, ov) for p in args.configs]
    cmp = harness.compare_rules(cfgs, write_to=args.output)
    if args.output is None:
        write_csv(sys.stdout, cmp.header, cmp.rows)
    else:
        print(f"wrote {args.output}/comparison.csv and comparison_series.csv")
    return 0


def cmd_validate(args, extra):
    if extra:
        raise harness.ConfigError(f"unexpected arguments {extra}")
    rule = tseq.parse_rule(args.rule)
    prefix = tseq.generate(rule, args.n)
    reports = [tseq.validate_admissible(prefix)]
    if rule.theta is not None:
        reports += [tseq.check_recurrence(prefix, rule.theta), tseq.check_growth(prefix, rule.theta)]
    for r in reports:
        print(r.line())
    return 0 if all(r.passed for r in reports) else 1


def cmd_dump(args, extra):
    if extra:
        raise harness.ConfigError(f"unexpected arguments {extra}")
    try:
        prob = problems.catalog(args.name, args.dim, args.seed)
    except ValueError as exc:
        raise harness.ConfigError(str(exc)) from None
    problems.dump_problem(prob, args.output or sys.stdout)
    return 0


def main(argv=None):
    parser = argparse.ArgumentParser(prog="fistalyap")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("run", help="run one experiment")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("compare", help="compare step rules on one problem")
    p.add_argument("--configs", nargs="+", required=True)
    p.add_argument("--output")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate-tseq", help="check a t-sequence rule")
    p.add_argument("--rule", required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("problem-dump", help="write a catalog problem to a file")
    p.add_argument("--name", required=True)
    p.add_argument("--dim", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_dump)

    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args, extra)
    except (harness.ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return harness.EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return harness.EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
