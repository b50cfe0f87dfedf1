"""Summarize how tight the checked bounds were in a report.json.

For every bound record in the equations suite and every gamma trial, prints
the ratio lhs / rhs (1.0 means the bound is attained), grouped by record name.

    python scripts/tightness.py results/example/report.json
"""

import argparse
import json
from collections import defaultdict


def main(argv=None) -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("report", help="path to a report.json written by metricgi run")
    args = parser.parse_args(argv)
    with open(args.report, encoding="utf-8") as fh:
        doc = json.load(fh)
    ratios = defaultdict(list)
    for rec in doc["records"]:
        if rec["verdict"] == "SKIPPED":
            continue
        if rec["suite"] == "equations":
            for row in rec["details"]["records"]:
                if row["rhs"] and row["rhs"] > 0:
                    ratios[row["name"]].append(row["lhs"] / row["rhs"])
        elif rec["suite"] == "gamma_gap" and rec["rhs"]:
            ratios[f"gamma ({rec['details']['kind']})"].append(rec["lhs"] / rec["rhs"])
    if not ratios:
        print("no executed bound records")
        return
    print(f"{'record':<28}{'count':>7}{'median':>10}{'max':>10}")
    for name in sorted(ratios):
        vals = sorted(ratios[name])
        print(f"{name:<28}{len(vals):>7}{vals[len(vals) // 2]:>10.3f}{vals[-1]:>10.3f}")


if __name__ == "__main__":
    main()
