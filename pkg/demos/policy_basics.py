"""Walk through the three placement policies on a six-node toy cluster.

Each policy picks a destination for a relocated copy given the current
loads and a set of excluded nodes. This script draws many selections from
one fixed state and prints the empirical pick frequencies side by side.
"""

from __future__ import annotations

import random

import numpy as np

from placement_lab.policies import PolicyKind, select_slot

LOADS = np.array([4, 0, 2, 6, 1, 3], dtype=np.int64)
EXCLUDED = {0, 3}
DRAWS = 20000


def frequencies(policy: PolicyKind, rng: random.Random) -> np.ndarray:
    counts = np.zeros(len(LOADS), dtype=np.int64)
    for _ in range(DRAWS):
        counts[select_slot(policy, LOADS, len(LOADS), EXCLUDED, rng)] += 1
    return counts / DRAWS


def main() -> None:
    rng = random.Random(7)
    print("loads:    ", "  ".join(f"{x:5d}" for x in LOADS))
    print("excluded: ", "  ".join("  yes" if i in EXCLUDED else "    -" for i in range(len(LOADS))))
    print()
    print(f"pick frequency over {DRAWS} draws:")
    for policy in PolicyKind:
        freq = frequencies(policy, rng)
        print(f"  {policy.value:16s}", "  ".join(f"{f:5.3f}" for f in freq))
    print()
    print("random spreads uniformly over the four eligible nodes;")
    print("least_loaded always takes node 1 (the unique eligible minimum);")
    print("power_of_choice favours low loads but still reaches the middle,")
    print("while the most loaded eligible node never wins a pairwise duel.")


if __name__ == "__main__":
    main()
