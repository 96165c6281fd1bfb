"""State model: nodes and blocks on an identifier ring, replica placement, invariant checks."""

from __future__ import annotations

import enum
import math
import random
from dataclasses import dataclass

import numpy as np

from placement_lab.policies import PolicyKind, select_slot

RING_BITS = 64
RING_SIZE = 1 << RING_BITS


class ConfigError(ValueError):
    """Invalid simulation configuration; message names the offending key."""


class Mode(str, enum.Enum):
    IDEALIZED = "idealized"
    DETAILED = "detailed"


class Bootstrap(str, enum.Enum):
    """Initial placement style: balanced round robin or sequential policy-driven."""

    OPTIMAL = "optimal"
    POLICY = "policy"


@dataclass(frozen=True)
class NodeId:
    """Identity of one incarnation of a node slot.

    slot is the dense array index, ring_id the position on the identifier
    ring, generation counts reincarnations of the slot.
    """

    slot: int
    ring_id: int
    generation: int


@dataclass(frozen=True)
class BlockId:
    slot: int
    ring_id: int


@dataclass
class SimConfig:
    """All parameters of one simulation run."""

    n_nodes: int = 200
    n_blocks: int = 10000
    replication: int = 3
    mtbf_days: float = 7.0
    block_size_mb: float = 10.0
    bandwidth_mbps: float = 5.5
    latency_s: float = 0.1
    maintenance_period_hours: float = 1.0
    policy: PolicyKind = PolicyKind.RANDOM
    mode: Mode = Mode.IDEALIZED
    horizon_days: float = 729.0
    seed: int = 0
    snapshot_period_days: float = 1.0

    def __post_init__(self):
        # accept plain strings from JSON specs
        try:
            self.policy = PolicyKind(self.policy)
        except ValueError:
            raise ConfigError(f"policy: unknown value {self.policy!r}") from None
        try:
            self.mode = Mode(self.mode)
        except ValueError:
            raise ConfigError(f"mode: unknown value {self.mode!r}") from None

    @property
    def beta(self) -> float:
        """Mean copies per node, replication * n_blocks / n_nodes."""
        return self.replication * self.n_blocks / self.n_nodes

    @property
    def total_copies(self) -> int:
        return self.replication * self.n_blocks

    def validate(self) -> None:
        """Raise ConfigError naming the first invalid key."""
        for key in ("n_nodes", "n_blocks", "replication"):
            value = getattr(self, key)
            if not isinstance(value, int) or value < 1:
                raise ConfigError(f"{key}: expected integer >= 1, got {value!r}")
        if self.replication > self.n_nodes:
            raise ConfigError(
                f"replication: {self.replication} exceeds n_nodes={self.n_nodes}"
            )
        for key in (
            "mtbf_days",
            "block_size_mb",
            "bandwidth_mbps",
            "latency_s",
            "maintenance_period_hours",
            "snapshot_period_days",
        ):
            value = getattr(self, key)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigError(f"{key}: expected positive number, got {value!r}")
        if not (
            isinstance(self.horizon_days, (int, float))
            and math.isfinite(self.horizon_days)
            and self.horizon_days >= 0
        ):
            raise ConfigError(
                f"horizon_days: expected number >= 0, got {self.horizon_days!r}"
            )
        if not isinstance(self.seed, int) or not 0 <= self.seed < RING_SIZE:
            raise ConfigError(f"seed: expected integer in [0, 2**64), got {self.seed!r}")


class SystemState:
    """Full placement map: per-node loads, per-block holder sets, ring ids, roots.

    Nodes live in dense slots 0..n_nodes-1; a slot is always occupied, and a
    failure replaces its node by an empty one with a fresh ring id and a
    bumped generation. Blocks whose last copy is gone have replicas[b] set to
    None and are counted in lost_blocks.
    """

    def __init__(self, config: SimConfig, rng: random.Random):
        n = config.n_nodes
        self.config = config
        self.n_nodes = n
        self.n_blocks = config.n_blocks
        self.replication = config.replication
        self.mode = config.mode
        self.loads = np.zeros(n, dtype=np.int64)
        self.generations = [0] * n
        self.born_at = np.zeros(n, dtype=np.float64)
        self._used_ids: set[int] = set()
        self.ring_ids = [self._fresh_ring_id(rng) for _ in range(n)]
        self.block_ring_ids = [self._fresh_ring_id(rng) for _ in range(config.n_blocks)]
        # holder slots per block; None once the block is lost
        self.replicas: list[list[int] | None] = [[] for _ in range(config.n_blocks)]
        self.blocks_on_node: list[list[int]] = [[] for _ in range(n)]
        # per-block root as (slot, generation), detailed mode only; a stale
        # generation marks a dead root awaiting reassignment
        self.roots: list[tuple[int, int] | None] = [None] * config.n_blocks
        self.total_copies = 0
        self.lost_blocks = 0

    def _fresh_ring_id(self, rng: random.Random) -> int:
        while True:
            candidate = rng.getrandbits(RING_BITS)
            if candidate not in self._used_ids:
                self._used_ids.add(candidate)
                return candidate

    def node_id(self, slot: int) -> NodeId:
        return NodeId(slot, self.ring_ids[slot], self.generations[slot])

    def block_id(self, block: int) -> BlockId:
        return BlockId(block, self.block_ring_ids[block])

    def holders(self, block: int) -> list[NodeId]:
        holder_slots = self.replicas[block]
        if holder_slots is None:
            return []
        return [self.node_id(slot) for slot in holder_slots]

    def root_of(self, block: int) -> NodeId | None:
        """NodeId of the block's root, or None if unset or dead."""
        entry = self.roots[block]
        if entry is None:
            return None
        slot, generation = entry
        if self.generations[slot] != generation:
            return None
        return self.node_id(slot)

    def add_copy(self, block: int, slot: int) -> None:
        self.replicas[block].append(slot)
        self.blocks_on_node[slot].append(block)
        self.loads[slot] += 1
        self.total_copies += 1

    def rebirth(self, slot: int, rng: random.Random, now: float) -> None:
        """Replace the node in `slot` by a fresh empty node."""
        self.generations[slot] += 1
        self.ring_ids[slot] = self._fresh_ring_id(rng)
        self.born_at[slot] = now
        self.loads[slot] = 0
        self.blocks_on_node[slot] = []

    def clockwise_root(self, block: int) -> int:
        """Holder slot whose ring id is the clockwise successor of the block id."""
        holder_slots = self.replicas[block]
        if not holder_slots:
            raise ValueError(f"block {block} has no holders")
        base = self.block_ring_ids[block]
        return min(holder_slots, key=lambda s: ((self.ring_ids[s] - base) % RING_SIZE, s))


def place_initial(
    config: SimConfig,
    rng: random.Random,
    bootstrap: Bootstrap | str | None = None,
) -> SystemState:
    """Build the initial placement.

    The `optimal` bootstrap spreads copies round robin so every load lies in
    {ceil(F/N)-1, ceil(F/N)}; the `policy` bootstrap places copies one block
    at a time with the configured selection rule. Defaults: optimal for
    idealized mode, policy for detailed mode.
    """
    config.validate()
    if bootstrap is None:
        bootstrap = Bootstrap.OPTIMAL if config.mode is Mode.IDEALIZED else Bootstrap.POLICY
    bootstrap = Bootstrap(bootstrap)

    state = SystemState(config, rng)
    n, d = config.n_nodes, config.replication
    if bootstrap is Bootstrap.OPTIMAL:
        for block in range(config.n_blocks):
            for j in range(d):
                state.add_copy(block, (block * d + j) % n)
    else:
        for block in range(config.n_blocks):
            chosen: list[int] = []
            for _ in range(d):
                slot = select_slot(config.policy, state.loads, n, chosen, rng)
                chosen.append(slot)
                state.add_copy(block, slot)
    if config.mode is Mode.DETAILED:
        for block in range(config.n_blocks):
            slot = state.clockwise_root(block)
            state.roots[block] = (slot, state.generations[slot])
    return state


def verify_state(state: SystemState) -> list[str]:
    """Return invariant violations as human-readable strings; empty means healthy."""
    violations: list[str] = []
    live_copies = 0
    seen_by_node: list[int] = [0] * state.n_nodes
    for block, holder_slots in enumerate(state.replicas):
        if holder_slots is None:
            continue
        if len(set(holder_slots)) != len(holder_slots):
            violations.append(f"duplicate holder: block {block} holders {holder_slots}")
        if not holder_slots:
            violations.append(f"empty replica set: block {block} not marked lost")
        if len(holder_slots) > state.replication:
            violations.append(
                f"over-replicated: block {block} has {len(holder_slots)} copies"
            )
        if state.mode is Mode.IDEALIZED and len(holder_slots) != state.replication:
            violations.append(
                f"replication: block {block} has {len(holder_slots)} copies, "
                f"expected {state.replication}"
            )
        if state.mode is Mode.DETAILED:
            entry = state.roots[block]
            if entry is None:
                violations.append(f"root unset: block {block}")
            else:
                root_slot, root_gen = entry
                # a stale generation means the root died and reassignment is
                # pending at the next maintenance sweep, which is legal
                if (
                    state.generations[root_slot] == root_gen
                    and root_slot not in holder_slots
                ):
                    violations.append(
                        f"root not a holder: block {block} root slot {root_slot}"
                    )
        live_copies += len(holder_slots)
        for slot in holder_slots:
            seen_by_node[slot] += 1
    if live_copies != state.total_copies:
        violations.append(
            f"conservation: counted {live_copies} copies, recorded {state.total_copies}"
        )
    if state.mode is Mode.IDEALIZED and state.total_copies != state.replication * state.n_blocks:
        violations.append(
            f"conservation: total_copies {state.total_copies} != "
            f"{state.replication * state.n_blocks}"
        )
    held: list[list[int]] = [[] for _ in range(state.n_nodes)]
    for block, holder_slots in enumerate(state.replicas):
        if holder_slots is None:
            continue
        for slot in holder_slots:
            held[slot].append(block)
    for slot in range(state.n_nodes):
        if state.loads[slot] != seen_by_node[slot]:
            violations.append(
                f"load mismatch: node {slot} load {state.loads[slot]}, "
                f"holds {seen_by_node[slot]}"
            )
        if sorted(state.blocks_on_node[slot]) != sorted(held[slot]):
            violations.append(f"holder index mismatch: node {slot}")
    lost = sum(1 for hs in state.replicas if hs is None)
    if lost != state.lost_blocks:
        violations.append(
            f"loss count: {lost} blocks lost, recorded {state.lost_blocks}"
        )
    if len(set(state.ring_ids)) != state.n_nodes:
        violations.append("ring collision: node ring ids not distinct")
    return violations
