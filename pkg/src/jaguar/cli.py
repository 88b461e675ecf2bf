"""Command-line surface: eval, width, gen, oracle, bench.

Exit codes: 1 for usage errors, 2 for input validation errors, 3 for
internal invariant violations or solver failures. All outputs are
byte-deterministic given identical inputs and flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

from .bench import CSV_HEADER, run_ladder
from .calibration import calibrate
from .decompositions import decomposition_family, family_to_json
from .engine import EngineConfig, _env_max_vars, evaluate
from .errors import (
    InvariantError,
    JaguarError,
    LimitError,
    QueryParseError,
    SchemaError,
    SolverError,
    ValidationError,
)
from .frontend import default_stats, load_instance, parse_query, parse_stats
from .generators import brute_force, gen_random, gen_square
from .relations import AnswerSet, DatabaseInstance
from .setfunctions import init_g
from .widthlp import subw

USAGE_EXIT = 1
VALIDATION_EXIT = 2
INTERNAL_EXIT = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def build_parser() -> _Parser:
    parser = _Parser(prog="jaguar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("eval", help="evaluate a query over a data directory")
    p_eval.add_argument("--query", required=True, help="query file")
    p_eval.add_argument("--data", required=True, help="directory of .tsv relations")
    p_eval.add_argument("--stats", help="statistics file")
    p_eval.add_argument("--classic", action="store_true", help="unit caps per atom")
    p_eval.add_argument("--epsilon", type=float, default=0.5)
    p_eval.add_argument("--trace", help="write the recursion trace JSON here")
    p_eval.add_argument("--output", help="write the answer TSV here (default stdout)")
    p_eval.add_argument("--dump-tds", action="store_true")
    p_eval.add_argument("--dump-g", action="store_true")

    p_width = sub.add_parser("width", help="submodular width of a query")
    p_width.add_argument("--query", required=True)
    p_width.add_argument("--data", help="data directory for size-based statistics")
    p_width.add_argument("--stats", help="statistics file (needs --data)")
    p_width.add_argument("--classic", action="store_true")
    p_width.add_argument("--dump-tds", action="store_true")

    p_gen = sub.add_parser("gen", help="write a generated instance")
    gen_sub = p_gen.add_subparsers(dest="generator", required=True)
    p_square = gen_sub.add_parser("square", help="skewed four-cycle instance")
    p_square.add_argument("--m", type=int, required=True)
    p_square.add_argument("--out", required=True)
    p_random = gen_sub.add_parser("random", help="seeded random instance")
    p_random.add_argument("--seed", type=int, required=True)
    p_random.add_argument("--spec", required=True, help="relation spec file")
    p_random.add_argument("--out", required=True)

    p_oracle = sub.add_parser("oracle", help="brute-force reference answer")
    p_oracle.add_argument("--query", required=True)
    p_oracle.add_argument("--data", required=True)
    p_oracle.add_argument("--output", help="default stdout")

    p_bench = sub.add_parser("bench", help="scaling ladder on the four-cycle family")
    p_bench.add_argument("--epsilon", type=float, default=0.5)
    p_bench.add_argument("--m-min", type=int, default=64)
    p_bench.add_argument("--m-max", type=int, default=4096)
    p_bench.add_argument(
        "--force-td",
        type=int,
        help="run the single-decomposition baseline through this family index",
    )
    p_bench.add_argument("--csv", help="write rows here (default stdout)")
    return parser


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}")


def _write_text(path: Optional[str], text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def answer_tsv(answers: AnswerSet) -> str:
    lines = ["\t".join(answers.free.members)]
    for row in answers:
        lines.append("\t".join(str(v) for v in row))
    return "\n".join(lines) + "\n"


def _build_stats(args, query, instance: Optional[DatabaseInstance]):
    if args.classic and args.stats:
        raise ValidationError("--classic and --stats are mutually exclusive")
    if args.classic:
        return default_stats(query, None, 0, classic=True)
    if args.stats:
        if instance is None:
            raise ValidationError("--stats needs --data to verify the bounds")
        return parse_stats(_read(args.stats), instance, instance.size, query.universe)
    if instance is None:
        raise ValidationError("size-based statistics need --data (or pass --classic)")
    if instance.size < 2:
        return default_stats(query, None, 0, classic=True)
    return default_stats(query, instance, instance.size)


def _cmd_eval(args) -> int:
    query = parse_query(_read(args.query))
    instance = load_instance(args.data, query=query)
    stats = _build_stats(args, query, instance)
    if args.dump_tds:
        print(family_to_json(decomposition_family(query, _env_max_vars())))
    config = EngineConfig(epsilon=args.epsilon, classic_stats=args.classic)
    if args.dump_g:
        if instance.size >= 2 and not instance.has_empty_relation():
            g0 = init_g(instance, instance.size)
            _, g0 = calibrate(stats, instance, g0, instance.size)
            print(json.dumps(g0.to_json_dict(), sort_keys=True))
        else:
            print(json.dumps(None))
    answers, trace = evaluate(query, stats, instance, config)
    if args.trace:
        _write_text(args.trace, trace.to_json() + "\n")
    _write_text(args.output, answer_tsv(answers))
    return 0


def _cmd_width(args) -> int:
    query = parse_query(_read(args.query))
    instance = load_instance(args.data, query=query) if args.data else None
    stats = _build_stats(args, query, instance)
    family = decomposition_family(query, _env_max_vars())
    if args.dump_tds:
        print(family_to_json(family))
    result = subw(query, stats, family=family)
    payload = {
        "subw": result.value if result.value != float("inf") else "inf",
        "selector": None
        if result.selector is None
        else [list(b.members) for b in result.selector],
        "certificate": None
        if result.certificate is None
        else result.certificate.to_json_dict(),
        "complete": result.complete,
    }
    print(json.dumps(payload, sort_keys=True))
    return 0


def _write_instance(instance: DatabaseInstance, out_dir: str) -> None:
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    for rel in instance:
        name = rel.name or "REL_" + "_".join(rel.schema.members)
        lines = ["\t".join(rel.schema.members)]
        for row in rel.sorted_rows():
            lines.append("\t".join(str(v) for v in row))
        (directory / f"{name}.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_gen_spec(text: str) -> tuple[list[tuple[str, list[str]]], list[int], int]:
    import re

    line_re = re.compile(
        r"([A-Za-z_][A-Za-z0-9_]*)\(([^)]*)\)\s+(\d+)\s+(\d+)\s*\Z"
    )
    schemas: list[tuple[str, list[str]]] = []
    sizes: list[int] = []
    domain = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = line_re.match(line)
        if m is None:
            raise ValidationError(
                f"line {line_no}: expected 'Name(V1,V2) <size> <domain>', got {raw!r}"
            )
        name, vars_txt, size_txt, domain_txt = m.groups()
        vs = [v.strip() for v in vars_txt.split(",") if v.strip()]
        if not vs:
            raise ValidationError(f"line {line_no}: relation needs variables")
        schemas.append((name, vs))
        sizes.append(int(size_txt))
        d = int(domain_txt)
        if domain is not None and d != domain:
            raise ValidationError("all relations must share one domain size")
        domain = d
    if not schemas:
        raise ValidationError("empty generator spec")
    return schemas, sizes, domain


def _cmd_gen(args) -> int:
    if args.generator == "square":
        instance = gen_square(args.m)
    else:
        schemas, sizes, domain = _parse_gen_spec(_read(args.spec))
        instance = gen_random(args.seed, schemas, sizes, domain)
    _write_instance(instance, args.out)
    return 0


def _cmd_oracle(args) -> int:
    query = parse_query(_read(args.query))
    instance = load_instance(args.data, query=query)
    answers = brute_force(query, instance)
    _write_text(args.output, answer_tsv(answers))
    return 0


def _cmd_bench(args) -> int:
    rows = run_ladder(args.m_min, args.m_max, args.epsilon, args.force_td)
    text = "\n".join([CSV_HEADER] + [r.csv() for r in rows]) + "\n"
    _write_text(args.csv, text)
    return 0


_COMMANDS = {
    "eval": _cmd_eval,
    "width": _cmd_width,
    "gen": _cmd_gen,
    "oracle": _cmd_oracle,
    "bench": _cmd_bench,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else USAGE_EXIT
    except (QueryParseError, ValidationError, LimitError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return VALIDATION_EXIT
    except (InvariantError, SolverError) as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return INTERNAL_EXIT
    except JaguarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return VALIDATION_EXIT


if __name__ == "__main__":
    raise SystemExit(main())
