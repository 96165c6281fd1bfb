"""Configuration validation, initial placement, and state invariants."""

from __future__ import annotations

import dataclasses
import random

import numpy as np
import pytest

from placement_lab.core import (
    Bootstrap,
    ConfigError,
    Mode,
    NodeId,
    SimConfig,
    place_initial,
    verify_state,
)
from placement_lab.policies import PolicyKind


def small_config(**overrides) -> SimConfig:
    base = dict(
        n_nodes=10,
        n_blocks=40,
        replication=2,
        mtbf_days=3.0,
        horizon_days=5.0,
        seed=11,
    )
    base.update(overrides)
    return SimConfig(**base)


class TestSimConfig:
    def test_defaults_validate(self):
        SimConfig().validate()

    def test_string_coercion(self):
        config = SimConfig(policy="least_loaded", mode="detailed")
        assert config.policy is PolicyKind.LEAST_LOADED
        assert config.mode is Mode.DETAILED

    def test_unknown_policy_names_key(self):
        with pytest.raises(ConfigError, match="policy"):
            SimConfig(policy="frobnicate")

    def test_unknown_mode_names_key(self):
        with pytest.raises(ConfigError, match="mode"):
            SimConfig(mode="imaginary")

    @pytest.mark.parametrize(
        "key,value",
        [
            ("n_nodes", 0),
            ("n_blocks", -1),
            ("n_blocks", 2.5),
            ("replication", 0),
            ("mtbf_days", 0.0),
            ("mtbf_days", float("inf")),
            ("bandwidth_mbps", -1.0),
            ("latency_s", 0.0),
            ("maintenance_period_hours", 0.0),
            ("snapshot_period_days", 0.0),
            ("horizon_days", -1.0),
            ("horizon_days", float("nan")),
            ("seed", -1),
            ("seed", 2**64),
        ],
    )
    def test_invalid_field_names_key(self, key, value):
        config = SimConfig(**{key: value})
        with pytest.raises(ConfigError, match=key):
            config.validate()

    def test_replication_exceeding_nodes(self):
        config = SimConfig(n_nodes=3, n_blocks=5, replication=4)
        with pytest.raises(ConfigError, match="replication"):
            config.validate()

    def test_beta_and_total_copies(self):
        config = SimConfig(n_nodes=200, n_blocks=10000, replication=3)
        assert config.beta == pytest.approx(150.0)
        assert config.total_copies == 30000

    def test_horizon_zero_is_valid(self):
        small_config(horizon_days=0.0).validate()


class TestPlaceInitial:
    def test_optimal_is_balanced(self):
        config = small_config()
        state = place_initial(config, random.Random(1))
        # 80 copies over 10 nodes divide evenly
        assert np.all(state.loads == 8)
        assert state.total_copies == config.total_copies
        assert verify_state(state) == []

    def test_optimal_balanced_within_one_when_uneven(self):
        config = small_config(n_nodes=7, n_blocks=11, replication=3)
        state = place_initial(config, random.Random(1))
        assert state.loads.max() - state.loads.min() <= 1
        assert verify_state(state) == []

    def test_default_bootstrap_by_mode(self):
        idealized = place_initial(small_config(), random.Random(2))
        assert idealized.loads.max() == idealized.loads.min()
        detailed = place_initial(small_config(mode="detailed"), random.Random(2))
        assert all(entry is not None for entry in detailed.roots)

    def test_policy_bootstrap_least_loaded_balances(self):
        config = small_config(policy="least_loaded")
        state = place_initial(config, random.Random(3), bootstrap=Bootstrap.POLICY)
        assert np.all(state.loads == 8)
        assert verify_state(state) == []

    def test_policy_bootstrap_random_conserves(self):
        config = small_config(policy="random", n_blocks=50)
        state = place_initial(config, random.Random(4), bootstrap="policy")
        assert int(state.loads.sum()) == config.total_copies
        assert verify_state(state) == []

    def test_replicas_distinct(self):
        config = small_config(n_nodes=5, replication=5)
        state = place_initial(config, random.Random(5))
        for block in range(config.n_blocks):
            holders = state.replicas[block]
            assert len(set(holders)) == config.replication

    def test_ring_ids_all_distinct(self):
        state = place_initial(small_config(), random.Random(6))
        ids = state.ring_ids + state.block_ring_ids
        assert len(set(ids)) == len(ids)

    def test_detailed_roots_are_holders(self):
        config = small_config(mode="detailed")
        state = place_initial(config, random.Random(7))
        for block in range(config.n_blocks):
            root = state.root_of(block)
            assert isinstance(root, NodeId)
            assert root.slot in state.replicas[block]

    def test_invalid_config_rejected(self):
        with pytest.raises(ConfigError):
            place_initial(small_config(n_nodes=0), random.Random(8))


class TestSystemState:
    def test_clockwise_root_matches_ring_order(self):
        state = place_initial(small_config(mode="detailed"), random.Random(9))
        ring_size = 2**64
        for block in range(state.n_blocks):
            base = state.block_ring_ids[block]
            expected = min(
                state.replicas[block],
                key=lambda s: ((state.ring_ids[s] - base) % ring_size, s),
            )
            assert state.clockwise_root(block) == expected

    def test_rebirth_resets_slot(self):
        state = place_initial(small_config(), random.Random(10))
        old_ring = state.ring_ids[4]
        state.blocks_on_node[4] = []
        state.loads[4] = 0
        state.rebirth(4, random.Random(11), now=2.5)
        assert state.generations[4] == 1
        assert state.ring_ids[4] != old_ring
        assert state.born_at[4] == 2.5
        assert state.loads[4] == 0

    def test_node_id_tracks_generation(self):
        state = place_initial(small_config(), random.Random(12))
        before = state.node_id(0)
        state.loads[0] = 0
        state.blocks_on_node[0] = []
        state.rebirth(0, random.Random(13), now=1.0)
        after = state.node_id(0)
        assert before.slot == after.slot == 0
        assert before.generation == 0 and after.generation == 1
        assert before != after

    def test_holders_returns_current_incarnations(self):
        state = place_initial(small_config(), random.Random(14))
        holders = state.holders(0)
        assert len(holders) == state.replication
        assert all(h.generation == 0 for h in holders)

    def test_root_of_dead_root_is_none(self):
        state = place_initial(small_config(mode="detailed"), random.Random(15))
        block = 0
        slot, _ = state.roots[block]
        state.generations[slot] += 1
        assert state.root_of(block) is None


class TestVerifyState:
    def test_clean_state_has_no_findings(self):
        state = place_initial(small_config(mode="detailed"), random.Random(16))
        assert verify_state(state) == []

    def test_detects_duplicate_holder(self):
        state = place_initial(small_config(), random.Random(17))
        slot = state.replicas[0][0]
        state.replicas[0].append(slot)
        state.blocks_on_node[slot].append(0)
        state.loads[slot] += 1
        state.total_copies += 1
        assert any("block 0" in v for v in verify_state(state))

    def test_detects_load_mismatch(self):
        state = place_initial(small_config(), random.Random(18))
        state.loads[3] += 2
        assert verify_state(state)

    def test_detects_conservation_break(self):
        state = place_initial(small_config(), random.Random(19))
        state.total_copies -= 1
        assert verify_state(state)

    def test_detects_foreign_root(self):
        state = place_initial(small_config(mode="detailed"), random.Random(20))
        block = 0
        non_holders = [
            s for s in range(state.n_nodes) if s not in state.replicas[block]
        ]
        state.roots[block] = (non_holders[0], state.generations[non_holders[0]])
        assert any("root" in v for v in verify_state(state))

    def test_detects_lost_count_drift(self):
        state = place_initial(small_config(), random.Random(21))
        state.lost_blocks = 5
        assert verify_state(state)


def test_config_is_dataclass_replaceable():
    config = small_config()
    reseeded = dataclasses.replace(config, seed=99)
    assert reseeded.seed == 99 and config.seed == 11
    assert reseeded.policy is config.policy
