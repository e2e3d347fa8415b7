"""Convergence study on the beam preset: POD (extended / plain) and greedy variants.

Writes one CSV per variant plus the greedy traces, e.g.

    python3 scripts/beam_study.py --K 4 --out results/beam_K4
"""

import argparse
import logging

from rbeig import config as C
from rbeig.experiments import STUDY_VARIANTS, cmd_convergence_study


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--K", type=int, default=4)
    p.add_argument("--out", default="results/beam")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variants", nargs="*", default=list(STUDY_VARIANTS), choices=list(STUDY_VARIANTS))
    p.add_argument("--paper-scale", action="store_true")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    cfg = C.normalize({"K": args.K}, args.seed, args.paper_scale)
    results = cmd_convergence_study(cfg, args.out, args.variants)
    for v, rows in results.items():
        last = [r for r in rows if r[0] == rows[-1][0]]
        print(v, "N =", last[0][0], "errors:", " ".join(f"{r[2]:.2e}" for r in last))


if __name__ == "__main__":
    main()
