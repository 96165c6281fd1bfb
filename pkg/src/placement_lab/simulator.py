"""Event-driven simulation: Poisson node failures with instant or deferred repair.

Idealized mode relocates every copy of a failed node immediately, conserving
the copy total. Detailed mode defers repair to a periodic maintenance sweep
and ships copies through per-source FIFO transfer queues, so blocks can be
lost when all holders die before repair lands.
"""

from __future__ import annotations

import heapq
import math
import random
from dataclasses import dataclass, field

import numpy as np

from placement_lab.core import (
    Bootstrap,
    ConfigError,
    Mode,
    NodeId,
    SimConfig,
    SystemState,
    place_initial,
    verify_state,
)
from placement_lab.policies import PolicyKind, select_slot

TAGGED_SLOT = 0

SECONDS_PER_DAY = 86400.0

# same-timestamp ordering: failures, then maintenance, then completions, then snapshots
_CLS_FAILURE = 0
_CLS_MAINTENANCE = 1
_CLS_COMPLETION = 2
_CLS_SNAPSHOT = 3

_INF = math.inf


class FailureClock:
    """Per-node next-failure times, i.i.d. exponential with mean mtbf_days."""

    def __init__(self, n_nodes: int, mtbf_days: float, rng: random.Random):
        self.mtbf_days = mtbf_days
        self.rng = rng
        self.heap = [
            (rng.expovariate(1.0 / mtbf_days), slot) for slot in range(n_nodes)
        ]
        heapq.heapify(self.heap)

    def peek_time(self) -> float:
        return self.heap[0][0]

    def pop(self) -> tuple[float, int]:
        return heapq.heappop(self.heap)

    def reschedule(self, slot: int, now: float) -> None:
        heapq.heappush(
            self.heap, (now + self.rng.expovariate(1.0 / self.mtbf_days), slot)
        )


@dataclass
class Snapshot:
    time: float
    ages: np.ndarray
    loads: np.ndarray


@dataclass
class TraceDiagnostics:
    """Tagged-node measurements: per-failure arrival histogram and arrival counts."""

    jump_sizes: dict[int, int] = field(default_factory=dict)
    tagged_arrivals: list[tuple[float, int]] = field(default_factory=list)
    compensator: list[tuple[float, float]] = field(default_factory=list)


@dataclass
class EventTrace:
    """Time-ordered record of one run plus periodic load snapshots."""

    config: SimConfig
    events: list[tuple]
    snapshots: list[Snapshot]
    diagnostics: TraceDiagnostics
    lost_blocks: int = 0

    @property
    def mode(self) -> Mode:
        return self.config.mode


class TransferQueue:
    """Per-source FIFO of copy transfers served at the full link rate.

    Each source serves one transfer at a time; a transfer occupies the source
    for latency_s plus the block transmission time. The queue is compressed
    to the time the source next falls idle.
    """

    def __init__(self, n_nodes: int, config: SimConfig):
        self.busy_until = [0.0] * n_nodes
        self.transfer_days = (
            config.latency_s + config.block_size_mb * 8.0 / config.bandwidth_mbps
        ) / SECONDS_PER_DAY
        self.in_flight = 0

    def enqueue(self, source: int, now: float) -> float:
        """Append a transfer to `source`'s FIFO; return its completion time."""
        start = self.busy_until[source]
        if start < now:
            start = now
        done = start + self.transfer_days
        self.busy_until[source] = done
        self.in_flight += 1
        return done

    def reset_source(self, source: int, now: float) -> None:
        # a reborn node starts with an empty FIFO
        self.busy_until[source] = now


def _resolve_slot(state: SystemState, node) -> int:
    if isinstance(node, NodeId):
        if state.generations[node.slot] != node.generation:
            raise ValueError(f"node {node} is not live")
        return node.slot
    return int(node)


def _relocate_copies(
    state: SystemState, slot: int, policy: PolicyKind, rng: random.Random
) -> tuple[int, int]:
    """Re-place every copy held by `slot` on policy-chosen other nodes.

    Returns (copies relocated, copies received by the tagged slot).
    """
    loads = state.loads
    replicas = state.replicas
    blocks_on_node = state.blocks_on_node
    n = state.n_nodes
    tagged_gain = 0
    held = blocks_on_node[slot]
    for block in held:
        holder_slots = replicas[block]
        dest = select_slot(policy, loads, n, holder_slots, rng)
        holder_slots[holder_slots.index(slot)] = dest
        blocks_on_node[dest].append(block)
        loads[dest] += 1
        if dest == TAGGED_SLOT:
            tagged_gain += 1
    relocated = len(held)
    loads[slot] = 0
    blocks_on_node[slot] = []
    return relocated, tagged_gain


def fail_node_idealized(
    state: SystemState, node, policy: PolicyKind, rng: random.Random, now: float = 0.0
) -> SystemState:
    """Fail `node`: relocate all its copies, restart the slot empty.

    Mutates `state` in place and returns it. `node` may be a NodeId of the
    current incarnation or a bare slot index.
    """
    slot = _resolve_slot(state, node)
    _relocate_copies(state, slot, policy, rng)
    state.rebirth(slot, rng, now)
    return state


def _take_snapshot(state: SystemState, now: float) -> Snapshot:
    return Snapshot(
        time=now,
        ages=now - state.born_at,
        loads=state.loads.copy(),
    )


def _compensator_from_snapshots(
    snapshots: list[Snapshot], n_nodes: int
) -> list[tuple[float, float]]:
    """Time integral of the mean load over non-tagged nodes, per snapshot time.

    Loads are held piecewise constant between snapshots, so the result has a
    resolution error of order the snapshot period.
    """
    samples: list[tuple[float, float]] = []
    acc = 0.0
    prev_time: float | None = None
    prev_mean: float | None = None
    for snap in snapshots:
        if prev_time is not None:
            acc += prev_mean * (snap.time - prev_time)
        samples.append((snap.time, acc))
        total = int(snap.loads.sum())
        prev_mean = (total - int(snap.loads[TAGGED_SLOT])) / (n_nodes - 1)
        prev_time = snap.time
    return samples


def compensator_diagnostic(trace: EventTrace) -> list[tuple[float, float]]:
    """Series (t, C(t)) with C the integrated mean load over non-tagged nodes."""
    if trace.mode is not Mode.IDEALIZED:
        raise ValueError("compensator diagnostic requires an idealized-mode trace")
    return _compensator_from_snapshots(trace.snapshots, trace.config.n_nodes)


def _check_audit(state: SystemState, when: str) -> None:
    violations = verify_state(state)
    if violations:
        raise AssertionError(f"invariant violations after {when}: {violations}")


def run_idealized(
    config: SimConfig,
    rng: random.Random | None = None,
    bootstrap: Bootstrap | str | None = None,
    audit: bool = False,
) -> EventTrace:
    """Simulate Poisson failures with instant repair up to the horizon.

    Deterministic: a given (config, seed) pair always yields an identical
    trace when `rng` is left as None.
    """
    config.validate()
    if config.mode is not Mode.IDEALIZED:
        raise ConfigError(f"mode: run_idealized requires {Mode.IDEALIZED.value!r}")
    if config.replication >= config.n_nodes:
        raise ConfigError("replication: repair needs a non-holder, so replication < n_nodes")
    if rng is None:
        rng = random.Random(config.seed)

    state = place_initial(config, rng, bootstrap)
    clock = FailureClock(config.n_nodes, config.mtbf_days, rng)
    policy = config.policy
    horizon = float(config.horizon_days)
    snap_period = config.snapshot_period_days

    events: list[tuple] = []
    snapshots: list[Snapshot] = []
    diag = TraceDiagnostics()
    jump_sizes = diag.jump_sizes
    tagged_total = 0
    next_snap = 0.0

    while True:
        t_fail = clock.peek_time()
        while next_snap <= horizon and (next_snap < t_fail or t_fail > horizon):
            snapshots.append(_take_snapshot(state, next_snap))
            events.append((next_snap, "snapshot", (len(snapshots) - 1,)))
            diag.tagged_arrivals.append((next_snap, tagged_total))
            next_snap += snap_period
        if t_fail > horizon:
            break
        t_fail, slot = clock.pop()
        load_before = int(state.loads[slot])
        events.append((t_fail, "failure", (slot, state.generations[slot], load_before)))
        relocated, tagged_gain = _relocate_copies(state, slot, policy, rng)
        state.rebirth(slot, rng, t_fail)
        clock.reschedule(slot, t_fail)
        events.append((t_fail, "repair_batch", (slot, relocated)))
        tagged_total += tagged_gain
        jump_sizes[tagged_gain] = jump_sizes.get(tagged_gain, 0) + 1
        if audit:
            _check_audit(state, f"failure of slot {slot} at t={t_fail}")

    diag.compensator = _compensator_from_snapshots(snapshots, config.n_nodes)
    return EventTrace(
        config=config,
        events=events,
        snapshots=snapshots,
        diagnostics=diag,
        lost_blocks=0,
    )


def run_detailed(
    config: SimConfig,
    rng: random.Random | None = None,
    bootstrap: Bootstrap | str | None = None,
    audit: bool = False,
) -> EventTrace:
    """Simulate failures with periodic maintenance and queued transfers.

    Every maintenance period, blocks whose root died are handed to the
    clockwise successor among live holders first, then each block's root
    schedules one transfer per missing copy (source: the root, destination:
    policy-chosen among non-holders with nothing already in flight to them).
    Adopting before scheduling lets a freshly rooted block repair in the
    same sweep; deferring it a period widens the window in which the last
    copies can die. A block whose live copies hit zero before repair lands
    is lost.
    """
    config.validate()
    if config.mode is not Mode.DETAILED:
        raise ConfigError(f"mode: run_detailed requires {Mode.DETAILED.value!r}")
    if config.replication >= config.n_nodes:
        raise ConfigError("replication: repair needs a non-holder, so replication < n_nodes")
    if rng is None:
        rng = random.Random(config.seed)

    state = place_initial(config, rng, bootstrap)
    clock = FailureClock(config.n_nodes, config.mtbf_days, rng)
    queue = TransferQueue(config.n_nodes, config)
    policy = config.policy
    d = config.replication
    n = config.n_nodes
    horizon = float(config.horizon_days)
    snap_period = config.snapshot_period_days
    sweep_period = config.maintenance_period_hours / 24.0

    loads = state.loads
    replicas = state.replicas
    blocks_on_node = state.blocks_on_node
    roots = state.roots
    generations = state.generations
    # placement decisions see live copies plus reserved in-flight arrivals,
    # otherwise a whole sweep's repairs herd onto one momentarily-empty node
    effective_loads = loads.copy()

    # transfers in flight per block: (dest, dest_gen, source, source_gen)
    pending: list[list[tuple[int, int, int, int]]] = [[] for _ in range(config.n_blocks)]
    # blocks to re-examine when a slot dies while it is a transfer endpoint
    pending_by_src: list[list[int]] = [[] for _ in range(n)]
    pending_by_dest: list[list[int]] = [[] for _ in range(n)]
    needing_repair: set[int] = set()
    needing_root: set[int] = set()
    completions: list[tuple] = []  # (time, source, seq, block, dest, src_gen, dest_gen)
    seq = 0

    events: list[tuple] = []
    snapshots: list[Snapshot] = []
    next_snap = 0.0
    next_sweep = sweep_period if sweep_period <= horizon else _INF

    heappush = heapq.heappush
    heappop = heapq.heappop

    def _audit_now(when: str) -> None:
        _check_audit(state, when)
        expected = loads.copy()
        for entries in pending:
            for dest, dest_gen, _, _ in entries:
                if generations[dest] == dest_gen:
                    expected[dest] += 1
        if not np.array_equal(expected, effective_loads):
            raise AssertionError(f"effective load drift after {when}")

    while True:
        t_fail = clock.peek_time()
        t_comp = completions[0][0] if completions else _INF
        # lexicographic (time, class) pick keeps same-timestamp ordering fixed
        t_next, cls = t_fail, _CLS_FAILURE
        if (next_sweep, _CLS_MAINTENANCE) < (t_next, cls):
            t_next, cls = next_sweep, _CLS_MAINTENANCE
        if (t_comp, _CLS_COMPLETION) < (t_next, cls):
            t_next, cls = t_comp, _CLS_COMPLETION
        if (next_snap, _CLS_SNAPSHOT) < (t_next, cls):
            t_next, cls = next_snap, _CLS_SNAPSHOT
        if t_next > horizon:
            while next_snap <= horizon:
                snapshots.append(_take_snapshot(state, next_snap))
                events.append((next_snap, "snapshot", (len(snapshots) - 1,)))
                next_snap += snap_period
            break

        if cls == _CLS_FAILURE:
            now, slot = clock.pop()
            load_before = int(loads[slot])
            events.append((now, "failure", (slot, generations[slot], load_before)))
            for block in blocks_on_node[slot]:
                holder_slots = replicas[block]
                holder_slots.remove(slot)
                state.total_copies -= 1
                if holder_slots:
                    needing_repair.add(block)
                    if roots[block][0] == slot:
                        needing_root.add(block)
                else:
                    replicas[block] = None
                    state.lost_blocks += 1
                    for entry in pending[block]:
                        if generations[entry[0]] == entry[1]:
                            effective_loads[entry[0]] -= 1
                    pending[block] = []
                    events.append((now, "block_lost", (block,)))
            for block in pending_by_dest[slot]:
                if replicas[block] is not None:
                    needing_repair.add(block)
            for block in pending_by_src[slot]:
                if replicas[block] is not None:
                    needing_repair.add(block)
            pending_by_dest[slot] = []
            pending_by_src[slot] = []
            state.rebirth(slot, rng, now)
            effective_loads[slot] = 0
            queue.reset_source(slot, now)
            clock.reschedule(slot, now)
            if audit:
                _audit_now(f"failure of slot {slot} at t={now}")

        elif cls == _CLS_MAINTENANCE:
            now = next_sweep
            next_sweep += sweep_period
            scheduled = 0
            if needing_root:
                for block in sorted(needing_root):
                    holder_slots = replicas[block]
                    if holder_slots is None:
                        continue
                    root_slot, root_gen = roots[block]
                    if generations[root_slot] != root_gen or root_slot not in holder_slots:
                        new_root = state.clockwise_root(block)
                        roots[block] = (new_root, generations[new_root])
                needing_root.clear()
            if needing_repair:
                repair_items = []
                drop = []
                for block in needing_repair:
                    holder_slots = replicas[block]
                    if holder_slots is None:
                        drop.append(block)
                        continue
                    root_slot, root_gen = roots[block]
                    if generations[root_slot] != root_gen or root_slot not in holder_slots:
                        # every root death lands in needing_root, but adopt
                        # inline rather than assume the tracking set is exact
                        root_slot = state.clockwise_root(block)
                        roots[block] = (root_slot, generations[root_slot])
                    repair_items.append((root_slot, block))
                for block in drop:
                    needing_repair.discard(block)
                repair_items.sort()
                for root, block in repair_items:
                    holder_slots = replicas[block]
                    if holder_slots is None:
                        needing_repair.discard(block)
                        continue
                    flight = pending[block]
                    if flight:
                        kept = []
                        for entry in flight:
                            if (
                                generations[entry[0]] == entry[1]
                                and generations[entry[2]] == entry[3]
                            ):
                                kept.append(entry)
                            elif generations[entry[0]] == entry[1]:
                                # destination alive but source died: the copy
                                # will never arrive, release its reservation
                                effective_loads[entry[0]] -= 1
                        pending[block] = kept
                        flight = kept
                    missing = d - len(holder_slots) - len(flight)
                    if missing > 0:
                        excluded = holder_slots + [entry[0] for entry in flight]
                        for _ in range(missing):
                            dest = select_slot(policy, effective_loads, n, excluded, rng)
                            excluded.append(dest)
                            effective_loads[dest] += 1
                            done = queue.enqueue(root, now)
                            seq += 1
                            heappush(
                                completions,
                                (done, root, seq, block, dest,
                                 generations[root], generations[dest]),
                            )
                            pending[block].append(
                                (dest, generations[dest], root, generations[root])
                            )
                            pending_by_src[root].append(block)
                            pending_by_dest[dest].append(block)
                            scheduled += 1
                    needing_repair.discard(block)
            if scheduled:
                events.append((now, "repair_batch", (scheduled,)))
            if audit:
                _audit_now(f"maintenance sweep at t={now}")

        elif cls == _CLS_COMPLETION:
            entry = heappop(completions)
            now, source, _, block, dest, src_gen, dest_gen = entry
            queue.in_flight -= 1
            holder_slots = replicas[block]
            stale = (
                holder_slots is None
                or generations[source] != src_gen
                or generations[dest] != dest_gen
            )
            removed = False
            if holder_slots is not None:
                record = (dest, dest_gen, source, src_gen)
                flight = pending[block]
                if record in flight:
                    flight.remove(record)
                    removed = True
            if not stale:
                if dest in holder_slots:
                    raise RuntimeError(
                        f"duplicate copy delivered: block {block} to slot {dest}"
                    )
                # the reservation in effective_loads turns into a live copy
                holder_slots.append(dest)
                blocks_on_node[dest].append(block)
                loads[dest] += 1
                state.total_copies += 1
            elif removed and generations[dest] == dest_gen:
                effective_loads[dest] -= 1
            if audit:
                _audit_now(f"transfer completion at t={now}")

        else:
            snapshots.append(_take_snapshot(state, next_snap))
            events.append((next_snap, "snapshot", (len(snapshots) - 1,)))
            next_snap += snap_period

    return EventTrace(
        config=config,
        events=events,
        snapshots=snapshots,
        diagnostics=TraceDiagnostics(),
        lost_blocks=state.lost_blocks,
    )


def run(config: SimConfig, rng: random.Random | None = None, **kwargs) -> EventTrace:
    """Dispatch on config.mode."""
    if config.mode is Mode.IDEALIZED:
        return run_idealized(config, rng, **kwargs)
    return run_detailed(config, rng, **kwargs)
