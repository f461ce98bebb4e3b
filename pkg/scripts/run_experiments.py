"""Run every CLI subcommand on the shipped configurations.

Usage: python3 scripts/run_experiments.py [--out out] [--seed 42]
Artifacts land in <out>/<config>/<subcommand>/.
"""
import argparse
import os
import sys

from cascade_hum.cli import SUBCOMMANDS, main

HERE = os.path.dirname(os.path.abspath(__file__))
CONFIGS = os.path.join(HERE, "..", "configs")

PLAN = {
    "coupled": ["solve-adjoint", "synthesize", "observability", "uc-probe", "carleman"],
    "decoupled": ["observability", "uc-probe", "carleman"],
    "heat_n1": ["observability", "cost-sweep", "carleman"],
    "zero_terminal": ["synthesize"],
}


def parse_args():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=42)
    return p.parse_args()


if __name__ == "__main__":
    args = parse_args()
    status = 0
    for name, subs in PLAN.items():
        for sub in subs:
            assert sub in SUBCOMMANDS
            out = os.path.join(args.out, name, sub)
            code = main([sub, "--config", os.path.join(CONFIGS, f"{name}.toml"), "--out", out, "--seed", str(args.seed)])
            print(f"{name:14s} {sub:14s} exit {code}", file=sys.stderr)
            status = max(status, code)
    sys.exit(status)
