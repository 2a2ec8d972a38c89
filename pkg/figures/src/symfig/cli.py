"""One CLI per figure kind, under a common ``symfig`` entry point."""

from __future__ import annotations

import argparse
import sys

from .readers import SchemaError
from .render import FigureSpec, render


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="symfig", description="Render simulator output figures")
    sub = p.add_subparsers(dest="kind", required=True)

    def common(sp, many_inputs=True):
        if many_inputs:
            sp.add_argument("--input", action="append", required=True, help="input file (repeatable)")
        else:
            sp.add_argument("--input", action="append", required=True, help="input file")
        sp.add_argument("--out", required=True, help="output image path (.png or .svg)")
        sp.add_argument("--label", action="append", default=[], help="series label (repeatable)")

    sp = sub.add_parser("price", help="price trajectories from timeseries.csv")
    common(sp)
    sp.add_argument("--p-m", type=float, default=None, help="reference market price line")
    sp.add_argument("--c-d", type=float, default=None, help="disposal cost for the floor line")
    sp.set_defaults(kind="price")

    sp = sub.add_parser("regret", help="rolling-median regret from regret.csv")
    common(sp)
    sp.set_defaults(kind="regret")

    sp = sub.add_parser("sweep", help="mean +/- std panels from sweep.csv")
    common(sp)
    sp.add_argument("--metric", choices=("price", "si"), default="price")
    sp.add_argument("--x", default=None, help="grid column for the x axis")
    sp.set_defaults(kind="sweep")

    sp = sub.add_parser("layout", help="firm scatter from layout.json")
    common(sp, many_inputs=False)
    sp.set_defaults(kind="layout")

    sp = sub.add_parser("pdp-ice", help="PDP/ICE panels from pdp_ice.csv")
    common(sp, many_inputs=False)
    sp.add_argument("--metric", choices=("price", "si"), default="price")
    sp.set_defaults(kind="pdp_ice")

    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(
        inputs=tuple(args.input),
        kind=args.kind,
        output=args.out,
        p_m=getattr(args, "p_m", None),
        c_d=getattr(args, "c_d", None),
        metric=getattr(args, "metric", "price"),
        x=getattr(args, "x", None),
        labels=tuple(args.label),
    )
    try:
        render(spec)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"input not found: {exc}", file=sys.stderr)
        return 1
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":  # pragma: no cover
    entry()
