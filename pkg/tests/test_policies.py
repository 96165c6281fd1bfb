"""Selection rules: eligibility, exact laws on small states, determinism."""

from __future__ import annotations

import random
from collections import Counter

import numpy as np
import pytest

from _laws import EXACT_LAWS, power_of_choice_law
from placement_lab.core import SimConfig, place_initial
from placement_lab.policies import (
    PolicyKind,
    SelectionError,
    least_loaded_slot,
    power_of_choice_slot,
    random_slot,
    select,
    select_least_loaded,
    select_power_of_choice,
    select_random,
    select_slot,
)

ALL_POLICIES = list(PolicyKind)


def draw_counts(policy: PolicyKind, loads, excluded, draws: int, seed: int) -> Counter:
    loads = np.asarray(loads, dtype=np.int64)
    rng = random.Random(seed)
    counts: Counter = Counter()
    for _ in range(draws):
        counts[select_slot(policy, loads, len(loads), excluded, rng)] += 1
    return counts


class TestEligibility:
    @pytest.mark.parametrize("policy", ALL_POLICIES)
    def test_all_excluded_raises(self, policy):
        loads = np.zeros(4, dtype=np.int64)
        with pytest.raises(SelectionError):
            select_slot(policy, loads, 4, {0, 1, 2, 3}, random.Random(0))

    @pytest.mark.parametrize("policy", ALL_POLICIES)
    def test_single_node_fully_excluded(self, policy):
        loads = np.zeros(1, dtype=np.int64)
        with pytest.raises(SelectionError):
            select_slot(policy, loads, 1, [0], random.Random(0))

    @pytest.mark.parametrize("policy", ALL_POLICIES)
    def test_single_eligible_is_forced(self, policy):
        loads = np.array([9, 0, 7], dtype=np.int64)
        rng = random.Random(1)
        for _ in range(20):
            assert select_slot(policy, loads, 3, {1, 2}, rng) == 0

    @pytest.mark.parametrize("policy", ALL_POLICIES)
    def test_excluded_never_chosen(self, policy):
        loads = np.array([0, 0, 1, 2, 3, 0], dtype=np.int64)
        excluded = {0, 5}
        rng = random.Random(2)
        seen = {select_slot(policy, loads, 6, excluded, rng) for _ in range(500)}
        assert seen.isdisjoint(excluded)

    def test_out_of_range_exclusions_are_ignored(self):
        loads = np.array([3, 1], dtype=np.int64)
        slot = least_loaded_slot(loads, {-1, 7, 0}, random.Random(3))
        assert slot == 1


class TestLeastLoaded:
    def test_unique_minimum_is_deterministic(self):
        loads = np.array([5, 2, 9, 4], dtype=np.int64)
        rng = random.Random(4)
        assert all(least_loaded_slot(loads, (), rng) == 1 for _ in range(10))

    def test_minimum_respects_exclusion(self):
        loads = np.array([5, 2, 9, 4], dtype=np.int64)
        rng = random.Random(5)
        assert all(least_loaded_slot(loads, {1}, rng) == 3 for _ in range(10))

    def test_tie_break_is_roughly_uniform(self):
        counts = draw_counts(PolicyKind.LEAST_LOADED, [1, 0, 0, 0], (), 6000, seed=6)
        assert set(counts) == {1, 2, 3}
        for slot in (1, 2, 3):
            assert counts[slot] == pytest.approx(2000, rel=0.12)

    def test_input_loads_not_mutated(self):
        loads = np.array([2, 1], dtype=np.int64)
        least_loaded_slot(loads, {1}, random.Random(7))
        assert loads.tolist() == [2, 1]


class TestPowerOfChoice:
    def test_strictly_lower_always_wins_in_pair(self):
        loads = np.array([0, 5], dtype=np.int64)
        rng = random.Random(8)
        assert all(power_of_choice_slot(loads, 2, (), rng) == 0 for _ in range(50))

    def test_two_way_tie_is_a_fair_coin(self):
        counts = draw_counts(PolicyKind.POWER_OF_CHOICE, [3, 3], (), 4000, seed=9)
        assert counts[0] + counts[1] == 4000
        assert counts[0] == pytest.approx(2000, rel=0.1)

    def test_dominated_slot_never_wins(self):
        # slot 3 has the unique maximum; it loses every pair it appears in
        loads = np.array([1, 2, 2, 9], dtype=np.int64)
        counts = draw_counts(PolicyKind.POWER_OF_CHOICE, loads, (), 3000, seed=10)
        assert counts[3] == 0

    def test_empirical_matches_enumerated_law(self):
        loads = [1, 2, 2, 9, 0]
        law = power_of_choice_law(loads, 5, ())
        counts = draw_counts(PolicyKind.POWER_OF_CHOICE, loads, (), 30000, seed=11)
        for slot, prob in law.items():
            assert counts[slot] / 30000 == pytest.approx(prob, abs=0.015)


class TestExactLawAgreement:
    """Moderate-draw sanity; the full chi-square sweep lives in acceptance."""

    STATES = [
        ([0, 0, 0, 0], ()),
        ([4, 1, 3, 1], {0}),
        ([2, 2, 5], ()),
    ]

    @pytest.mark.parametrize("policy", ALL_POLICIES)
    @pytest.mark.parametrize("loads,excluded", STATES)
    def test_frequencies_track_law(self, policy, loads, excluded):
        law = EXACT_LAWS[policy.value](loads, len(loads), excluded)
        draws = 20000
        counts = draw_counts(policy, loads, excluded, draws, seed=12)
        assert set(counts) <= set(law)
        for slot, prob in law.items():
            assert counts[slot] / draws == pytest.approx(prob, abs=0.02)


class TestStateLevelSelection:
    def make_state(self):
        config = SimConfig(n_nodes=6, n_blocks=12, replication=2, seed=0)
        return place_initial(config, random.Random(13))

    def test_select_returns_live_node_id(self):
        state = self.make_state()
        node = select(PolicyKind.RANDOM, state, state.holders(0), random.Random(14))
        assert node.generation == state.generations[node.slot]
        assert node.ring_id == state.ring_ids[node.slot]

    def test_node_id_exclusions_are_honored(self):
        state = self.make_state()
        excluded = state.holders(3)
        banned = {h.slot for h in excluded}
        for _ in range(100):
            node = select_random(state, excluded, random.Random(15))
            assert node.slot not in banned

    def test_wrappers_agree_with_slot_laws(self):
        state = self.make_state()
        rng = random.Random(16)
        node = select_least_loaded(state, [], rng)
        assert state.loads[node.slot] == state.loads.min()
        node = select_power_of_choice(state, list(range(5)), rng)
        assert node.slot == 5

    def test_string_policy_is_coerced(self):
        loads = np.array([1, 0], dtype=np.int64)
        assert select_slot("least_loaded", loads, 2, (), random.Random(17)) == 1
        with pytest.raises(ValueError):
            select_slot("bogus", loads, 2, (), random.Random(17))


def test_selections_are_deterministic_per_seed():
    loads = np.array([3, 0, 2, 2, 8, 1], dtype=np.int64)
    for policy in ALL_POLICIES:
        runs = []
        for _ in range(2):
            rng = random.Random(19)
            runs.append([select_slot(policy, loads, 6, {4}, rng) for _ in range(200)])
        assert runs[0] == runs[1]
