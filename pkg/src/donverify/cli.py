"""Command-line workflow: generate, publish, cheat, verify, audit, simulate.

Exit codes: 0 ok / nothing found, 1 usage or file error, 2 the donor's
check detected cheating, 3 the donor is absent from the published tree.
"""
from __future__ import annotations

import argparse
import json
import random
import sys
from dataclasses import dataclass
from pathlib import Path

from . import adversary, simulator
from .money import format_amount, parse_amount
from .participation import model_from_dict
from .tree import (
    DonorRecord,
    TreeError,
    UnknownDonorError,
    build_region_forest,
    build_tree,
    verify_donor_path,
)
from .treefile import (
    dumps_donors,
    read_donors,
    read_tree,
    write_donors,
    write_tree,
)

EXIT_OK, EXIT_USAGE, EXIT_DETECTED, EXIT_ABSENT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage, which is reserved for detection
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class GenSpec:
    n: int
    seed: int = 0
    a: int | None = None  # upper bound of uniform draws, minor units
    amounts: tuple[int, ...] | None = None
    ids: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.n < 1:
            raise UsageError("n must be at least 1")
        if self.amounts is None and (self.a is None or self.a < 1):
            raise UsageError("uniform generation needs a >= 1 minor unit")
        if self.amounts is not None and len(self.amounts) != self.n:
            raise UsageError(f"{len(self.amounts)} amounts given for n={self.n}")
        if self.ids is not None and len(self.ids) != self.n:
            raise UsageError(f"{len(self.ids)} ids given for n={self.n}")

    def records(self) -> list[DonorRecord]:
        width = len(str(self.n))
        ids = self.ids or tuple(f"donor{i:0{width}d}" for i in range(1, self.n + 1))
        if self.amounts is not None:
            amounts = self.amounts
        else:
            rng = random.Random(self.seed)
            amounts = tuple(rng.randint(1, self.a) for _ in range(self.n))
        return [DonorRecord(i, s) for i, s in zip(ids, amounts)]


def _split(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _amounts(text: str, decimals: int) -> list[int]:
    try:
        return [parse_amount(t, decimals) for t in _split(text)]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _out(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# ---- subcommands ------------------------------------------------------------------


def cmd_generate(args) -> int:
    amounts = _amounts(args.amounts, args.decimals) if args.amounts else None
    ids = tuple(_split(args.ids)) if args.ids else None
    n = args.n if args.n is not None else (len(amounts) if amounts else None)
    if n is None:
        raise UsageError("give --n or --amounts")
    a = parse_amount(args.a, args.decimals) if args.a is not None else None
    spec = GenSpec(n, args.seed, a, tuple(amounts) if amounts else None, ids)
    records = spec.records()
    if args.out:
        write_donors(records, args.out)
        print(f"wrote {len(records)} donors to {args.out}")
    else:
        sys.stdout.write(dumps_donors(records))
    return EXIT_OK


def cmd_publish(args) -> int:
    records = read_donors(args.donors)
    if not records:
        raise UsageError(f"{args.donors}: donor file is empty")
    if args.boundaries:
        tree = build_region_forest(records, _amounts(args.boundaries, args.decimals), args.k)
    else:
        tree = build_tree(records, args.k)
    write_tree(tree, args.out)
    print(f"published {len(tree)} donors, root V={tree.nodes[tree.root].claimed}, depth {tree.depth()} -> {args.out}")
    return EXIT_OK


def cmd_cheat(args) -> int:
    if args.attack == "negative":
        if args.n is None or args.M is None:
            raise UsageError("the negative attack needs --n and --M")
        pair = adversary.negative_pair(args.n, parse_amount(args.M, args.decimals), args.k)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for w, tree in (("a", pair.world_a), ("b", pair.world_b)):
            write_tree(tree, out / f"world_{w}.json")
            write_donors(pair.truth(w), out / f"truth_{w}.json")
        print(f"wrote negative-donation worlds to {out}; distinguishing donor {pair.distinguishing_donor}")
        return EXIT_OK
    if not args.tree:
        raise UsageError("a tree file is required")
    tree = read_tree(args.tree)
    if args.spec:
        spec = adversary.CheatSpec.from_dict(json.loads(Path(args.spec).read_text(encoding="utf-8")))
        result = adversary.apply_cheat(tree, spec)
    elif args.attack == "skim":
        if args.amount is None:
            raise UsageError("the skim attack needs --amount")
        at = [int(x) for x in _split(args.at)] if args.at else None
        result = adversary.random_skim(tree, parse_amount(args.amount, args.decimals), args.seed, at)
    elif args.attack == "omit":
        if not args.donor:
            raise UsageError("the omit attack needs --donor")
        result = adversary.omit_big_donor(tree, args.donor, args.encoding)
    else:
        raise UsageError("give --spec or --attack")
    write_tree(result, args.out)
    return EXIT_OK


def _render_report(report, decimals: int) -> str:
    fa = lambda v: format_amount(v, decimals)  # noqa: E731
    lines = [
        f"donor {report.donor_id}: claimed donation {fa(report.claimed_donation)}, "
        f"leaf V={fa(report.leaf_claim)}  {'ok' if report.leaf_ok else 'LEAF MISMATCH'}"
    ]
    for c in report.node_checks:
        mark = "ok" if c.ok else c.kind.upper()
        lines.append(f"  node {c.node_id}: V={fa(c.claimed)}  children sum={fa(c.children_sum)}  {mark}")
    verdict = "ERROR: cheating detected" if report.is_error else "all checks passed"
    lines.append(f"result: {verdict} ({report.steps} steps)")
    return "\n".join(lines) + "\n"


def cmd_verify(args) -> int:
    tree = read_tree(args.tree)
    amount = parse_amount(args.amount, args.decimals)
    try:
        report = verify_donor_path(tree, args.donor, amount)
    except UnknownDonorError:
        print(f"donor {args.donor}: leaf absent from the published tree (cheating detected)")
        return EXIT_ABSENT
    sys.stdout.write(_render_report(report, args.decimals))
    return EXIT_DETECTED if report.is_error else EXIT_OK


def cmd_audit(args) -> int:
    tree = read_tree(args.tree)
    truth = read_donors(args.truth)
    result = simulator.audit(tree, truth)
    if args.format == "json":
        _out(json.dumps(result, indent=2) + "\n", args.out)
        return EXIT_OK
    eps = result["epsilon"]
    lines = [
        f"true total:      {result['true_total']}",
        f"claimed total:   {result['claimed_total']}",
        f"deficit:         {result['deficit']}",
        f"epsilon:         {'undefined' if eps is None else f'{eps:.6g}'}",
        f"detecting set:   {', '.join(result['detecting_set']) or '(none)'}",
    ]
    for donor, kinds in result["classification"].items():
        lines.append(f"  {donor}: {', '.join(kinds)}")
    for node, kind in result["failing_nodes"].items():
        lines.append(f"  node {node}: {kind}")
    lines.append(f"count lemma:     {'holds' if result['count_lemma_holds'] else 'VIOLATED'}")
    if not result["detecting_set"] and result["deficit"] == 0:
        lines.append("all clear")
    _out("\n".join(lines) + "\n", args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    tree = read_tree(args.tree)
    truth = read_donors(args.truth)
    cfg = json.loads(Path(args.model).read_text(encoding="utf-8"))
    models = [model_from_dict(c) for c in (cfg if isinstance(cfg, list) else [cfg])]
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    rows = [simulator.simulation_row(tree, truth, m, args.trials, args.seed) for m in models]
    fmt = args.format or ("csv" if args.out and args.out.endswith(".csv") else "json")
    _out(simulator.dumps_report(rows, fmt), args.out)
    return EXIT_OK


# ---- parser --------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="donverify", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, k=False, seed=False):
        sp.add_argument("--decimals", type=int, default=2, help="decimal places of one minor unit (default 2)")
        if k:
            sp.add_argument("--k", type=int, default=2, help="tree arity (default 2)")
        if seed:
            sp.add_argument("--seed", type=int, default=0)

    g = sub.add_parser("generate", help="write a donor file")
    common(g, seed=True)
    g.add_argument("--n", type=int)
    g.add_argument("--a", help="uniform amounts in [1 minor unit, a]")
    g.add_argument("--amounts", help="comma-separated fixed amounts")
    g.add_argument("--ids", help="comma-separated donor ids")
    g.add_argument("--out")
    g.set_defaults(func=cmd_generate)

    pub = sub.add_parser("publish", help="build the honest tree file from a donor file")
    common(pub, k=True)
    pub.add_argument("donors")
    pub.add_argument("--boundaries", help="comma-separated region boundaries: build a region forest")
    pub.add_argument("--out", required=True)
    pub.set_defaults(func=cmd_publish)

    c = sub.add_parser("cheat", help="tamper with a published tree")
    common(c, k=True, seed=True)
    c.add_argument("tree", nargs="?")
    c.add_argument("--spec", help="cheat spec JSON file")
    c.add_argument("--attack", choices=["skim", "omit", "negative"])
    c.add_argument("--amount", help="skim total")
    c.add_argument("--at", help="comma-separated node ids the skim may use")
    c.add_argument("--donor", help="donor to omit")
    c.add_argument("--encoding", choices=["zero", "delete"], default="zero")
    c.add_argument("--n", type=int, help="donor count for the negative attack")
    c.add_argument("--M", help="mass of the positive donors for the negative attack")
    c.add_argument("--out", required=True, help="output file (directory for the negative attack)")
    c.set_defaults(func=cmd_cheat)

    v = sub.add_parser("verify", help="run one donor's path check")
    common(v)
    v.add_argument("tree")
    v.add_argument("donor")
    v.add_argument("amount")
    v.set_defaults(func=cmd_verify)

    a = sub.add_parser("audit", help="check a tree against every true amount")
    a.add_argument("tree")
    a.add_argument("truth")
    a.add_argument("--format", choices=["text", "json"], default="text")
    a.add_argument("--out")
    a.set_defaults(func=cmd_audit)

    s = sub.add_parser("simulate", help="exact vs Monte Carlo detection and the bounds")
    s.add_argument("tree")
    s.add_argument("truth")
    s.add_argument("--model", required=True, help="model config JSON (object or list)")
    s.add_argument("--trials", type=int, default=100_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--format", choices=["json", "csv"])
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, TreeError, ValueError, KeyError, OSError) as exc:
        msg = exc.args[0] if type(exc) is KeyError and exc.args else exc
        print(f"donverify {args.command}: error: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
