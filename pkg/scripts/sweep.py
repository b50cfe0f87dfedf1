"""Axiom residuals of the metric generalized inverse over an exponent grid.

Prints one row per domain exponent p and one column per codomain exponent q
with the worst relative residual over random operators of each shape.

    python scripts/sweep.py --instances 10 --seed 0
"""

import argparse

import numpy as np

from metricgi.operator import PNormOperator, mgi_axiom_check

GRID = (1.5, 2.0, 3.0, 4.0)


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--instances", type=int, default=10, help="operators per (p, q) cell")
    parser.add_argument("--samples", type=int, default=20, help="sample vectors per operator")
    parser.add_argument("--max-dim", type=int, default=6)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    print("p \\ q " + "".join(f"{q:>11g}" for q in GRID))
    for p in GRID:
        row = []
        for q in GRID:
            worst = 0.0
            for _ in range(args.instances):
                m, n = rng.integers(1, args.max_dim + 1, size=2)
                r = int(rng.integers(1, min(m, n) + 1))
                a = rng.standard_normal((m, r)) @ rng.standard_normal((r, n))
                rep = mgi_axiom_check(PNormOperator.from_matrix(a, p, q), args.samples, rng=rng)
                worst = max(worst, rep.worst)
            row.append(worst)
        print(f"{p:<6g}" + "".join(f"{w:>11.2e}" for w in row))


if __name__ == "__main__":
    main()
