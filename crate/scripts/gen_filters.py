#!/usr/bin/env python3
"""Regenerate crates/core/data/filters_v1.txt with exact rational taps.

A wavelet at odd node 2k+1 of mesh h is the fine hat there minus a
combination a*phi_k + b*phi_{k+1} of two coarse hats (mesh 2h). The taps
(a, b) are chosen so that the wavelet has two vanishing moments. At the
left boundary there is no coarse hat at x = 0, so the wavelet next to it
uses coarse hats 1 and 2; the right boundary mirrors this.

Usage: gen_filters.py [--check] [--out PATH]
"""

import argparse
import sys
from pathlib import Path

import sympy as sp

ROOT = Path(__file__).resolve().parent.parent
DEFAULT_OUT = ROOT / "crates" / "core" / "data" / "filters_v1.txt"

HEADER = """\
# Lifting filters of the piecewise-linear Dirichlet wavelet basis.
#
# Schema: one "key value" header line each for version, family and coarsest
# mesh level, then one filter per line:
#   filter <name> <tap> <tap>
# Taps are exact rationals "p/q" or decimals. Nodal values on mesh h are
# split into even nodes (coarse values) and odd nodes (details).
#   predict_interior  weights of the two even neighbours of an odd node
#   update_interior   wavelet k acts on coarse hats k and k+1
#   update_left       wavelet 0 acts on coarse hats 1 and 2
#   update_right      wavelet n-1 acts on coarse hats n-2 and n-1
# The update taps give every wavelet two vanishing moments; regenerate with
# scripts/gen_filters.py.
version 1
family linear-dirichlet-lifted
coarsest_level 2
"""

h = sp.symbols("h", positive=True)


def hat_moments(center, width):
    """Integrals of 1 and x against the hat of half-width `width` at `center`.

    The hat is symmetric with unit height, so both moments are exact.
    """
    return width, width * center


def update_taps(center, left, right):
    """Taps (a, b) making hat(center, h) - a*hat(left, 2h) - b*hat(right, 2h)
    orthogonal to 1 and x."""
    a, b = sp.symbols("a b")
    fine = hat_moments(center, h)
    cl = hat_moments(left, 2 * h)
    cr = hat_moments(right, 2 * h)
    eqs = [fine[p] - a * cl[p] - b * cr[p] for p in (0, 1)]
    sol = sp.solve(eqs, [a, b], dict=True)[0]
    return sp.nsimplify(sol[a]), sp.nsimplify(sol[b])


def table():
    k = 3  # any interior index gives the same taps
    interior = update_taps((2 * k + 1) * h, 2 * k * h, (2 * k + 2) * h)
    left = update_taps(h, 2 * h, 4 * h)
    n = 8  # mirror of the left boundary on a mesh with 2n intervals
    right = update_taps((2 * n - 1) * h, (2 * n - 4) * h, (2 * n - 2) * h)
    predict = (sp.Rational(1, 2), sp.Rational(1, 2))
    lines = [
        ("predict_interior", predict),
        ("update_interior", interior),
        ("update_left", left),
        ("update_right", right),
    ]
    body = "".join(f"filter {name} {a} {b}\n" for name, (a, b) in lines)
    return HEADER + body


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--check", action="store_true", help="compare with the file instead of writing it")
    parser.add_argument("--out", type=Path, default=DEFAULT_OUT)
    args = parser.parse_args()
    text = table()
    if args.check:
        current = args.out.read_text()
        if current != text:
            print(f"{args.out} differs from the generated table", file=sys.stderr)
            return 1
        print(f"{args.out} is up to date")
        return 0
    args.out.write_text(text)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
