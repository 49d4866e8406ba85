#!/usr/bin/env python3
"""Show the scale ambiguity of purely photometric self-supervision.

Scaling every depth and the camera translation by the same factor leaves
all image evidence unchanged: the total loss without the ground terms is
identical across k, and an optimizer started at the wrong scale stays
there. The ground terms break the tie.
"""

import os

from groundscale import (LossWeights, ablate, reference_scene, scale_sweep,
                         write_json)

OUT = os.path.join(os.path.dirname(__file__), "out")


def main():
    os.makedirs(OUT, exist_ok=True)
    spec = reference_scene(seed=0)

    print("photometric-only loss at jointly scaled configurations:")
    sweep = scale_sweep(spec, ks=(0.5, 1.0, 2.0))
    for k, v in sweep.items():
        print(f"  k = {k:3}: total = {v:.9f}")
    vals = list(sweep.values())
    print(f"  spread: {max(vals) - min(vals):.1e} (the losses are bitwise equal)")

    print("\nwith the ground terms back on, k = 1 is strictly preferred:")
    full = scale_sweep(spec, ks=(0.5, 1.0, 2.0),
                       weights=LossWeights(smooth=1e-2, const=0.1, reg=0.1),
                       attention_logits=0.0)
    for k, v in full.items():
        print(f"  k = {k:3}: total = {v:.6f}")

    print("\nablation run (no ground terms), started at twice the true scale:")
    res = ablate(spec, k0=2.0)
    drift = abs(res.pose_scale - 2.0) / 2.0
    print(f"  pose scale after {res.state.step} steps: {res.pose_scale:.4f} "
          f"(stayed within {100 * drift:.2f}% of its start; nothing pulls it to 1)")
    write_json(os.path.join(OUT, "ablation.json"), res.to_dict())
    print(f"wrote {OUT}/ablation.json")


if __name__ == "__main__":
    main()
