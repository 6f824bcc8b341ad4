"""Command-line entry point.

Exit codes: 0 success, 1 a verification or solve came out negative
(incoherent family, failed identity, inconclusive solve), 2 usage or I/O
error.  Rational numbers are written as ``p/q`` strings.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .coherence import (
    check_weight_identity,
    decomposition_case,
    enumerate_decompositions,
    factor_pairs,
    field_coherence_error,
    verify_family_coherence,
)
from .continuum import SampledPolynomial, build_tower
from .engine import apply, apply_separable
from .errors import FieldFormatError, LatticeError
from .estimator import PRODUCT_FAMILIES
from .lattice import Convention, format_number, parse_rational, read_field, save_field
from .schemes import FAMILY_NAMES, get_family, perturbed_family
from .uniqueness import probe_higher_dim_uniqueness, solve_1d_factorized, solve_2d_symmetric, solve_corner

DEFAULT_SEED = 20240101
EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _extent(text: str) -> list[tuple[int, int]]:
    # "lo:hi,lo:hi" inclusive
    try:
        box = []
        for part in text.split(","):
            lo, hi = part.split(":")
            box.append((int(lo), int(hi)))
        return box
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected extents like -8:8,-8:8, got {text!r}") from None


def _rational(text: str) -> Fraction:
    try:
        return parse_rational(text)
    except FieldFormatError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(rows) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def _json(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


# -- subcommands -------------------------------------------------------------


def cmd_weights(args) -> int:
    st = get_family(args.family, args.dim)(args.d)
    items = [(off, st.weight(off)) for off in st.offsets()] if args.all_offsets else sorted(st.nonzero_weights().items())
    if args.format == "json":
        _emit(_json({
            "family": args.family,
            "d": st.d,
            "dimension": st.dim,
            "convention": st.convention.value,
            "weights": [{"offset": list(off), "weight": format_number(w)} for off, w in items],
        }), args.output)
    else:
        header = [f"i{k}" for k in range(st.dim)] + ["weight"]
        _emit(_csv([header] + [list(off) + [format_number(w)] for off, w in items]), args.output)
    return EXIT_OK


def cmd_apply(args) -> int:
    field = read_field(args.input)
    family = get_family(args.family, field.dim)
    if args.convention and Convention(args.convention) is not family.convention:
        raise UsageError(f"family {args.family!r} uses the {family.convention.value} convention, not {args.convention}")
    if args.separable:
        if args.family not in PRODUCT_FAMILIES:
            raise UsageError(f"family {args.family!r} is not a tensor product")
        family(args.d)  # admissibility
        out = apply_separable([get_family(args.family, 1)(args.d)] * field.dim, field)
    else:
        out = apply(family(args.d), field)
    save_field(out, args.output)
    print(f"wrote {args.output}: scale {out.scale}, extent {list(out.extent)}", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    family = get_family(args.family, args.dim)
    if args.perturb_factor is not None:
        if args.perturb_offset is None or args.perturb_value is None:
            raise UsageError("--perturb-factor needs --perturb-offset and --perturb-value")
        family = perturbed_family(family, args.perturb_factor, tuple(args.perturb_offset), args.perturb_value)
    pairs = factor_pairs(args.max_factor, family, args.min_factor)
    report = verify_family_coherence(family, pairs)
    result = report.to_dict()
    ok = report.coherent
    if args.field_check:
        rng = np.random.default_rng(args.seed)
        worst = max((field_coherence_error(family, d, e, rng) for d, e in pairs if d * e <= args.field_check_max), default=0.0)
        result["field_check"] = {"seed": args.seed, "max_relative_error": worst, "tolerance": 1e-12}
        ok = ok and worst <= 1e-12
    if args.format == "json":
        _emit(_json(result), args.output)
    else:
        rows = [["d", "e", "coherent", "discrepancies"]]
        rows += [[p.d, p.e, p.coherent, len(p.discrepancies)] for p in report.pairs]
        _emit(_csv(rows), args.output)
    print(f"{family.name}: {'coherent' if ok else 'INCOHERENT'} on {len(pairs)} factor pairs", file=sys.stderr)
    return EXIT_OK if ok else EXIT_FAILED


def cmd_solve(args) -> int:
    generic = args.generic != "none"
    kwargs = {"max_branches": args.max_branches, "time_limit": args.time_limit}
    if args.convention == "corner":
        result = solve_corner(generic=generic, max_factor=args.max_factor or 7, dim=args.dim, **kwargs)
    elif args.dim == 1:
        result = solve_1d_factorized(generic=generic, max_factor=args.max_factor or 12, **kwargs)
    elif args.dim == 2:
        result = solve_2d_symmetric(generic=generic, max_factor=args.max_factor or 7, **kwargs)
    else:
        if not generic:
            raise UsageError("the higher-dimensional probe runs on the generic branch only")
        report = probe_higher_dim_uniqueness(args.dim, time_limit=args.time_limit or 120, max_branches=args.max_branches)
        _emit(_json(report), args.output)
        return EXIT_OK if report["status"] == "supported" else EXIT_FAILED
    if args.format == "json":
        _emit(_json(result.to_dict()), args.output)
    else:
        rows = [["family", "d"] + [f"i{k}" for k in range(args.dim)] + ["weight"]]
        for fam in result.families:
            for d, st in sorted(fam.tables.items()):
                for off, w in sorted(st.nonzero_weights().items()):
                    rows.append([fam.name, d] + list(off) + [format_number(w)])
        _emit(_csv(rows), args.output)
    ok = result.complete and all(f.verified for f in result.families)
    return EXIT_OK if ok else EXIT_FAILED


def cmd_tower(args) -> int:
    path = Path(args.source)
    if path.exists():
        source = read_field(path)
        tower = build_tower(source, args.family, args.factors)
    else:
        poly = SampledPolynomial.parse(args.source, args.dim)
        if args.extent is None:
            raise UsageError("a polynomial source needs --extent")
        tower = build_tower(poly, args.family, args.factors, z=args.z, extent=args.extent)
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = tower.manifest()
    save_field(tower.base, out / "level-0.field")
    manifest["base"]["file"] = "level-0.field"
    for k, level in enumerate(tower.levels, start=1):
        name = f"level-{k}.field"
        save_field(level.field, out / name)
        manifest["levels"][k - 1]["file"] = name
    (out / "manifest.json").write_text(_json(manifest))
    if tower.truncated:
        print(f"warning: {tower.truncated}", file=sys.stderr)
    print(f"wrote {tower.depth} levels to {out}", file=sys.stderr)
    return EXIT_OK


def cmd_lemma(args) -> int:
    conv = Convention(args.convention)
    if args.i is not None:
        sols = enumerate_decompositions(args.i, args.d, args.e, conv)
        data = {"i": args.i, "d": args.d, "e": args.e, "convention": conv.value,
                "solutions": [list(s) for s in sols.solutions]}
        if conv is Convention.CENTERED:
            data["case"] = decomposition_case(args.i, args.d, args.e)
        if args.format == "json":
            _emit(_json(data), args.output)
        else:
            _emit(_csv([["r", "t"]] + [list(s) for s in sols.solutions]), args.output)
        return EXIT_OK
    if conv is not Convention.CENTERED:
        raise UsageError("the weight identity is stated for the centered convention; pass --i for corner decompositions")
    report = check_weight_identity(args.d, args.e)
    rows = []
    for i in range(-(args.d * args.e - 1), args.d * args.e):
        sols = enumerate_decompositions(i, args.d, args.e).solutions
        lhs = sum((args.e - abs(r)) * (args.d - abs(t)) for r, t in sols)
        rows.append({"i": i, "case": decomposition_case(i, args.d, args.e), "solutions": [list(s) for s in sols],
                     "sum": lhs, "expected": args.d * args.e - abs(i)})
    if args.format == "json":
        _emit(_json({"d": args.d, "e": args.e, "checked": report.checked, "ok": report.ok, "offsets": rows}), args.output)
    else:
        table = [["i", "case", "solutions", "sum", "expected"]]
        table += [[r["i"], r["case"], len(r["solutions"]), r["sum"], r["expected"]] for r in rows]
        _emit(_csv(table), args.output)
    return EXIT_OK if report.ok else EXIT_FAILED


# -- parser ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coherent-averaging", description="Coherent lattice averaging operators.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, formats=("csv", "json"), default="json"):
        p.add_argument("--format", choices=formats, default=default)
        p.add_argument("--output", help="write to this file instead of stdout")

    p = sub.add_parser("weights", help="print the stencil of one family at one factor")
    p.add_argument("--family", required=True, choices=FAMILY_NAMES)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--all-offsets", action="store_true", help="include zero weights")
    common(p, default="csv")
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("apply", help="coarsen a field file")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--family", required=True, choices=FAMILY_NAMES)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--convention", choices=[c.value for c in Convention], help="assert the family convention")
    p.add_argument("--separable", action="store_true", help="per-axis application for product families")
    p.set_defaults(func=cmd_apply)

    p = sub.add_parser("verify", help="check coherence of a family on factor pairs")
    p.add_argument("--family", required=True, choices=FAMILY_NAMES)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--max-factor", type=int, default=5)
    p.add_argument("--min-factor", type=int, default=1)
    p.add_argument("--json", dest="format", action="store_const", const="json", help="same as --format json")
    p.add_argument("--field-check", action="store_true", help="also compare two-step and one-step application on random float fields")
    p.add_argument("--field-check-max", type=int, default=16, help="largest product e*d used by --field-check")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"seed for --field-check (default {DEFAULT_SEED})")
    p.add_argument("--perturb-factor", type=int, help="replace one weight of this factor's stencil")
    p.add_argument("--perturb-offset", type=_int_list, help="offset of the replaced weight, e.g. 0,0")
    p.add_argument("--perturb-value", type=_rational, help="new weight before renormalization, e.g. 17/64")
    common(p, default="csv")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("solve", help="solve for all coherent weight families")
    p.add_argument("--convention", choices=[c.value for c in Convention], default="centered")
    p.add_argument("--dim", type=int, choices=(1, 2, 3), default=1)
    p.add_argument("--symmetry", choices=("auto",), default="auto",
                   help="sign symmetry in 1-D, square symmetry in 2-D, none for corner, permutations and reflections in 3-D")
    p.add_argument("--generic", choices=("w2-all-nonzero", "none"), default="w2-all-nonzero",
                   help="assume every factor-2 orbit weight is nonzero, or nothing")
    p.add_argument("--max-factor", type=int, help="largest factor to extend each family to")
    p.add_argument("--max-branches", type=int, default=2000)
    p.add_argument("--time-limit", type=float, help="seconds before open branches are reported inconclusive")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("tower", help="build a multiscale tower of coarsenings")
    p.add_argument("--source", required=True, help="field file, or a polynomial such as 'x^2*y'")
    p.add_argument("--family", required=True, choices=FAMILY_NAMES)
    p.add_argument("--factors", type=_int_list, required=True, help="e.g. 2,3")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--dim", type=int, help="dimension of a polynomial source (default: variables used)")
    p.add_argument("--z", type=_rational, default=Fraction(1), help="finest scale for a polynomial source")
    p.add_argument("--extent", type=_extent, help="cell box for a polynomial source, e.g. -12:12,-12:12")
    p.set_defaults(func=cmd_tower)

    p = sub.add_parser("lemma", help="decompositions r*d + t = i and the triangular weight identity")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--e", type=int, required=True)
    p.add_argument("--i", type=int, help="only this offset")
    p.add_argument("--convention", choices=[c.value for c in Convention], default="centered")
    common(p)
    p.set_defaults(func=cmd_lemma)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
    except KeyError as exc:
        print(f"error: unknown scheme: {exc.args[0]}", file=sys.stderr)
    except FieldFormatError as exc:
        print(f"error: malformed field file: {exc}", file=sys.stderr)
    except LatticeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
    return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
