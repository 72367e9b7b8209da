#!/usr/bin/env python3
"""Toy transfer experiment: does the shared component carry the transferable part?

For each seed, two source tasks are fine-tuned from a common base, their task
vectors are decomposed, and each component is swept over a coefficient grid
on a held-out target (and on its corrupted variant).
"""
import argparse

from taskdecomp.scenarios import transfer_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--tau", type=float, default=0.85)
    args = ap.parse_args()

    for corrupted in (False, True):
        label = "corrupted" if corrupted else "target"
        print(f"== {label} ==")
        print(f"{'seed':>4} {'base':>6} {'shared':>7} {'uniq0':>6} {'uniq1':>6} {'r_shared':>8}")
        for seed in range(args.seeds):
            o = transfer_scenario(seed, corrupted=corrupted, tau=args.tau)
            r = o.decomposition.layers["layer0.weight"].basis.dim
            u0, u1 = (o.best(u) for u in o.unique_ids)
            print(f"{seed:4d} {o.base_accuracy:6.3f} {o.best('shared'):7.3f} {u0:6.3f} {u1:6.3f} {r:8d}")


if __name__ == "__main__":
    main()
