"""Slot-level simulation of hopping users and a policy-switching jammer.

Every actor picks a set of channels out of ``n_channels`` orthogonal ones in
each slot. The jammer redraws its policy every ``switch_period`` slots and
keeps a small amount of policy-local memory in :class:`JammerState`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

ChannelSet = frozenset  # frozenset[int], indices in [0, n_channels)


class ConfigError(ValueError):
    """Raised for an inconsistent simulation or experiment configuration."""


class PolicyKind(enum.IntEnum):
    # Codes follow the row order of the published confusion matrix.
    SJ = 0  # sweeping
    RJ = 1  # random
    FRJ = 2  # fast reactive
    RJWD = 3  # reactive with one-slot delay
    CJ = 4  # combat (hold a random set for M slots)


N_POLICIES = len(PolicyKind)


@dataclass(frozen=True)
class SimConfig:
    n_users: int = 2
    n_channels: int = 12
    switch_period: int = 100
    episode_len: int = 5000
    sweep_width: int = 3
    combat_hold: int = 5
    seed: int = 0

    def validate(self) -> "SimConfig":
        for name in ("n_users", "n_channels", "switch_period", "episode_len",
                     "sweep_width", "combat_hold"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError(f"seed must fit in 64 unsigned bits, got {self.seed!r}")
        if self.n_users > self.n_channels:
            raise ConfigError(
                f"n_users={self.n_users} exceeds n_channels={self.n_channels}; users cannot collide")
        if self.sweep_width > self.n_channels:
            raise ConfigError(
                f"sweep_width={self.sweep_width} exceeds n_channels={self.n_channels}")
        return self


@dataclass(frozen=True)
class JammerState:
    policy: PolicyKind
    policy_age: int = 0
    sweep_pos: int = 0
    combat_channels: ChannelSet = field(default_factory=frozenset)
    combat_age: int = 0
    last_user_channels: ChannelSet = field(default_factory=frozenset)


@dataclass(frozen=True)
class SlotRecord:
    t: int
    user_channels: ChannelSet
    jammer_channels: ChannelSet
    label: PolicyKind


def _distinct(n: int, n_channels: int, rng: np.random.Generator) -> ChannelSet:
    return frozenset(int(c) for c in rng.choice(n_channels, size=n, replace=False))


def sample_user_channels(n_users: int, n_channels: int, rng: np.random.Generator) -> ChannelSet:
    """Draw ``n_users`` distinct channels uniformly without replacement."""
    if n_users > n_channels:
        raise ConfigError(f"cannot place {n_users} users on {n_channels} channels without collision")
    if n_users < 0:
        raise ConfigError(f"n_users must be non-negative, got {n_users}")
    return _distinct(n_users, n_channels, rng)


def policy_scheduler_step(t: int, switch_period: int, current: PolicyKind | None,
                          rng: np.random.Generator) -> PolicyKind:
    """Return the policy active at slot ``t``.

    At multiples of ``switch_period`` a fresh policy is drawn uniformly over all
    five kinds (the current one included); otherwise ``current`` is kept.
    """
    if t % switch_period == 0:
        return PolicyKind(int(rng.integers(N_POLICIES)))
    if current is None:
        raise ValueError(f"slot {t} is not a switch boundary but no current policy was given")
    return current


def enter_policy(state: JammerState, policy: PolicyKind) -> JammerState:
    """Reset policy-local memory at a switch boundary; the user observation survives."""
    return JammerState(policy=policy, last_user_channels=state.last_user_channels)


def jammer_step(state: JammerState, current_user_channels: ChannelSet, config: SimConfig,
                rng: np.random.Generator) -> tuple[ChannelSet, JammerState]:
    L = config.n_channels
    policy = state.policy
    updates: dict = {}
    if policy is PolicyKind.RJ:
        jammed = _distinct(config.n_users, L, rng)
    elif policy is PolicyKind.SJ:
        B = config.sweep_width
        jammed = frozenset((state.sweep_pos + i) % L for i in range(B))
        updates["sweep_pos"] = (state.sweep_pos + B) % L
    elif policy is PolicyKind.FRJ:
        jammed = frozenset(current_user_channels)
    elif policy is PolicyKind.RJWD:
        jammed = frozenset(state.last_user_channels)
    elif policy is PolicyKind.CJ:
        combat = state.combat_channels
        if state.combat_age == 0:
            combat = _distinct(config.sweep_width, L, rng)
        jammed = combat
        updates["combat_channels"] = combat
        updates["combat_age"] = (state.combat_age + 1) % config.combat_hold
    else:  # pragma: no cover
        raise ValueError(f"unknown policy {policy!r}")
    new_state = replace(
        state,
        policy_age=(state.policy_age + 1) % config.switch_period,
        last_user_channels=frozenset(current_user_channels),
        **updates,
    )
    return jammed, new_state


def episode_streams(rng: np.random.Generator) -> tuple[np.random.Generator, ...]:
    """Independent (scheduler, users, jammer) generators derived from ``rng``."""
    return tuple(rng.spawn(3))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def run_episode(config: SimConfig, rng: np.random.Generator | None = None) -> list[SlotRecord]:
    """Simulate ``config.episode_len`` slots.

    The scheduler, the users and the jammer each consume their own child stream
    of ``rng`` (``config.seed`` when omitted), so the label sequence can be
    replayed from the scheduler stream alone.
    """
    config.validate()
    if rng is None:
        rng = make_rng(config.seed)
    sched_rng, user_rng, jam_rng = episode_streams(rng)

    # before slot 0 there is no observation; RJWD would otherwise jam nothing
    initial_obs = _distinct(config.n_users, config.n_channels, jam_rng)
    state: JammerState | None = None
    policy: PolicyKind | None = None
    records: list[SlotRecord] = []
    for t in range(config.episode_len):
        policy = policy_scheduler_step(t, config.switch_period, policy, sched_rng)
        if t % config.switch_period == 0:
            if state is None:
                state = JammerState(policy=policy, last_user_channels=initial_obs)
            else:
                state = enter_policy(state, policy)
        users = sample_user_channels(config.n_users, config.n_channels, user_rng)
        jammed, state = jammer_step(state, users, config, jam_rng)
        records.append(SlotRecord(t, users, jammed, policy))
    return records


def replay_labels(config: SimConfig, rng: np.random.Generator | None = None) -> list[PolicyKind]:
    """Label sequence of :func:`run_episode` recomputed from the scheduler stream only."""
    if rng is None:
        rng = make_rng(config.seed)
    sched_rng = episode_streams(rng)[0]
    labels: list[PolicyKind] = []
    policy = None
    for t in range(config.episode_len):
        policy = policy_scheduler_step(t, config.switch_period, policy, sched_rng)
        labels.append(policy)
    return labels
