"""Placement policies: pick the destination node for one new block copy.

Each rule excludes the block's current holders and returns a node chosen
from the rest: uniformly (random), the minimum-load node (least loaded), or
the lower-loaded of a uniformly sampled pair (power of choice).
"""

from __future__ import annotations

import enum
import random
from typing import TYPE_CHECKING, Iterable

import numpy as np

if TYPE_CHECKING:
    from placement_lab.core import NodeId, SystemState

_LOAD_SENTINEL = np.iinfo(np.int64).max


class SelectionError(RuntimeError):
    """No eligible node remains for the requested placement."""


class PolicyKind(str, enum.Enum):
    RANDOM = "random"
    LEAST_LOADED = "least_loaded"
    POWER_OF_CHOICE = "power_of_choice"


def _eligible_count(n_nodes: int, excluded) -> int:
    return n_nodes - sum(1 for slot in set(excluded) if 0 <= slot < n_nodes)


def _only_eligible(n_nodes: int, excluded) -> int:
    banned = set(excluded)
    for slot in range(n_nodes):
        if slot not in banned:
            return slot
    raise SelectionError("no eligible node")


def random_slot(n_nodes: int, excluded, rng: random.Random) -> int:
    """Uniform over slots not in `excluded`."""
    # rejection sampling; excluded is small (holders of one block) in the hot path
    if len(excluded) >= n_nodes:
        if _eligible_count(n_nodes, excluded) == 0:
            raise SelectionError("no eligible node")
    while True:
        slot = rng.randrange(n_nodes)
        if slot not in excluded:
            return slot


def least_loaded_slot(loads: np.ndarray, excluded, rng: random.Random) -> int:
    """Minimum-load slot outside `excluded`, ties broken uniformly."""
    candidates = loads.copy()
    banned = [slot for slot in excluded if 0 <= slot < len(candidates)]
    if banned:
        candidates[banned] = _LOAD_SENTINEL
    lowest = candidates.min()
    if lowest == _LOAD_SENTINEL:
        raise SelectionError("no eligible node")
    pool = np.flatnonzero(candidates == lowest)
    return int(pool[rng.randrange(len(pool))])


def power_of_choice_slot(
    loads: np.ndarray, n_nodes: int, excluded, rng: random.Random
) -> int:
    """Lower-loaded of a uniform pair of distinct eligible slots, fair coin on ties.

    With a single eligible slot the pair degenerates and that slot is returned.
    """
    if len(excluded) + 1 >= n_nodes:
        count = _eligible_count(n_nodes, excluded)
        if count == 0:
            raise SelectionError("no eligible node")
        if count == 1:
            return _only_eligible(n_nodes, excluded)
    while True:
        first = rng.randrange(n_nodes)
        if first not in excluded:
            break
    while True:
        second = rng.randrange(n_nodes)
        if second != first and second not in excluded:
            break
    if loads[first] < loads[second]:
        return first
    if loads[second] < loads[first]:
        return second
    return first if rng.getrandbits(1) else second


def select_slot(
    policy: PolicyKind, loads: np.ndarray, n_nodes: int, excluded, rng: random.Random
) -> int:
    if not isinstance(policy, PolicyKind):
        policy = PolicyKind(policy)
    if policy is PolicyKind.RANDOM:
        return random_slot(n_nodes, excluded, rng)
    if policy is PolicyKind.LEAST_LOADED:
        return least_loaded_slot(loads, excluded, rng)
    return power_of_choice_slot(loads, n_nodes, excluded, rng)


def _excluded_slots(excluded: Iterable) -> set[int]:
    return {item.slot if hasattr(item, "slot") else int(item) for item in excluded}


def select_random(state: "SystemState", excluded: Iterable, rng: random.Random) -> "NodeId":
    slot = random_slot(state.n_nodes, _excluded_slots(excluded), rng)
    return state.node_id(slot)


def select_least_loaded(
    state: "SystemState", excluded: Iterable, rng: random.Random
) -> "NodeId":
    slot = least_loaded_slot(state.loads, _excluded_slots(excluded), rng)
    return state.node_id(slot)


def select_power_of_choice(
    state: "SystemState", excluded: Iterable, rng: random.Random
) -> "NodeId":
    slot = power_of_choice_slot(
        state.loads, state.n_nodes, _excluded_slots(excluded), rng
    )
    return state.node_id(slot)


def select(
    policy: PolicyKind, state: "SystemState", excluded: Iterable, rng: random.Random
) -> "NodeId":
    """Policy-dispatched selection returning a full NodeId."""
    slot = select_slot(policy, state.loads, state.n_nodes, _excluded_slots(excluded), rng)
    return state.node_id(slot)
