#!/usr/bin/env python3
"""Toy negation: subtract a source's full task vector or only its unique part.

Accuracy on the task being removed should drop under both edits; the control
task should suffer less when only the unique component is negated.
"""
import argparse

from taskdecomp.scenarios import negation_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--tau", type=float, default=0.85)
    args = ap.parse_args()

    for seed in range(args.seeds):
        o = negation_scenario(seed, tau=args.tau)
        print(f"seed {seed}: base removed={o.base_accuracy['removed']:.3f} control={o.base_accuracy['control']:.3f}")
        for comp in ("full:source0", "unique:source0"):
            rem = {p.lam: p.accuracy for p in o.curves["removed"].curve(comp)}
            ctl = {p.lam: p.accuracy for p in o.curves["control"].curve(comp)}
            lam = min(rem)
            print(f"  {comp:15s} lambda={lam:+.2f}: removed={rem[lam]:.3f} control={ctl[lam]:.3f}")


if __name__ == "__main__":
    main()
