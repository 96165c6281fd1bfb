"""Compare worst-case node load across policies in the detailed model.

The detailed mode adds what the idealized model abstracts away: failures
are only noticed by hourly maintenance sweeps, copies move over a shared
bandwidth-limited link, and a block whose last copy dies before repair is
lost. The placement policy decides how lopsided the cluster gets, which
this script summarizes as the mean of the daily maximum load.
"""

from __future__ import annotations

import time

from placement_lab.core import SimConfig
from placement_lab.simulator import run
from placement_lab.stats import max_load_stats

POLICIES = ("least_loaded", "power_of_choice", "random")
RUNS = 3
BASE = dict(
    n_nodes=100,
    n_blocks=2500,
    replication=3,
    mtbf_days=7.0,
    mode="detailed",
    horizon_days=200.0,
    snapshot_period_days=1.0,
)
WARMUP = 50.0


def main() -> None:
    beta = BASE["replication"] * BASE["n_blocks"] / BASE["n_nodes"]
    print(f"{BASE['n_nodes']} nodes, beta = {beta:g}, {RUNS} runs per policy,")
    print(f"daily max load sampled after day {WARMUP:g}:")
    print()
    print("  policy            mean_of_max    min  max   lost_blocks")
    for policy in POLICIES:
        start = time.perf_counter()
        lost = 0
        traces = []
        for k in range(RUNS):
            trace = run(SimConfig(policy=policy, seed=300 + k, **BASE))
            lost += trace.lost_blocks
            traces.append(trace)
        stats = max_load_stats(traces, warmup_days=WARMUP)
        elapsed = time.perf_counter() - start
        print(f"  {policy:16s} {stats.mean_of_max:11.1f}   {stats.minimum:4d} "
              f"{stats.maximum:4d}   {lost:7d}      ({elapsed:.0f}s)")
    print()
    print(f"least_loaded pins the maximum at beta = {beta:g}; power_of_choice")
    print("keeps it under roughly twice beta; random lets old nodes pile up")
    print("copies, so its maximum drifts far beyond both. The handful of")
    print("lost blocks are the rare cases where every copy died inside one")
    print("repair window.")


if __name__ == "__main__":
    main()
