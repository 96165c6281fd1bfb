"""Rescale the equilibrium laws and watch them converge to simple shapes.

Measured in units of beta, the random-policy load tends to an exponential
random variable with mean 1, while the power-of-choice load tends to a
uniform random variable on [0, 2]. This script tabulates the rescaled
tails for growing beta against those limiting curves.
"""

from __future__ import annotations

import math

from placement_lab.meanfield import (
    poc_invariant_tail,
    random_invariant_tail,
    scaled_limit_tail,
)

BETAS = (10, 50, 150, 500)
GRID = [i / 4.0 for i in range(13)]


def sup_gap(policy: str, beta: float) -> float:
    builder = random_invariant_tail if policy == "random" else poc_invariant_tail
    model = builder(beta, x_max=math.ceil(3 * beta) + 1)
    return max(
        abs(model.tail[math.ceil(x * beta)] - scaled_limit_tail(policy, x))
        for x in GRID
    )


def main() -> None:
    print("sup gap between the rescaled tail and its limit curve:")
    print("  beta   random->exp(-x)   power_of_choice->(1-x/2)+")
    for beta in BETAS:
        print(f"  {beta:4d}   {sup_gap('random', beta):15.6f}   "
              f"{sup_gap('power_of_choice', beta):18.6f}")
    print()

    beta = 150
    rnd = random_invariant_tail(beta, x_max=3 * beta)
    poc = poc_invariant_tail(beta, x_max=3 * beta)
    print(f"rescaled tails at beta = {beta}:")
    print("  x/beta   random   exp(-x)   poc   (1-x/2)+")
    for x in GRID:
        idx = math.ceil(x * beta)
        print(f"  {x:5.2f}   {rnd.tail[idx]:6.4f}   {math.exp(-x):7.4f}   "
              f"{poc.tail[idx]:5.4f}   {max(1 - x / 2, 0):8.4f}")
    print()
    print("both gaps shrink roughly like 1/beta; the power-of-choice tail")
    print("hits zero at x = 2, which is the bounded-support effect the")
    print("max-load comparison shows at system scale.")


if __name__ == "__main__":
    main()
