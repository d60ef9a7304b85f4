"""Seeded construction of test instances.

Reproducibility: all randomness flows through numpy's PCG64 bit generator
seeded from ``SeedSequence(entropy=seed, spawn_key=(attempt,))``, one stream
per rejection attempt.  The draw order inside an attempt is fixed, so a seed
maps to byte-identical fixtures across runs and platforms.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import action_gap, check_ergodic
from .mdp import DiscountSpec, Mdp, average_gain_from_bias, exact_optimal, policy_matrix
from .solvers import UpdateSchedule

MAX_REJECTIONS = 100
GAP_FLOOR = 1e-6


class GenerationError(RuntimeError):
    """The requested instance class is infeasible at this size/seed."""


@dataclass(frozen=True)
class GeneratorSpec:
    n_states: int
    n_actions: int
    seed: int
    density: float = 0.5
    reward_range: tuple[float, float] = (0.0, 1.0)
    min_gap: float | None = None

    def __post_init__(self):
        if self.n_states < 2:
            raise ValueError("degenerate size: need at least 2 states for span dynamics")
        if self.n_actions < 1:
            raise ValueError("need at least one action")
        if not (0.0 < self.density <= 1.0):
            raise ValueError(f"density must be in (0, 1], got {self.density}")
        if self.density * self.n_states < 1.0:
            raise ValueError("density * n_states must be at least 1")
        lo, hi = self.reward_range
        if self.min_gap is not None and not (lo < hi):
            raise ValueError("min_gap requires a non-degenerate reward range")
        if not (lo <= hi):
            raise ValueError(f"reward_range must be ordered, got {self.reward_range}")


def random_ergodic_mdp(spec: GeneratorSpec, gamma: float) -> Mdp:
    """Random instance on which every deterministic policy induces an ergodic
    chain, with a certified positive action gap at the given discount.

    Structure: every (s, a)-row contains the cycle edge s -> s+1 (mod n), and
    every action at state 0 keeps a self-loop; any policy's chain therefore
    contains a full cycle plus a loop, forcing irreducibility and
    aperiodicity.  The remaining support is a random self-loop-free subset
    sized by ``density``.  Instances are rejected until the optimal policy's
    chain passes the ergodicity check and the action gap clears
    max(min_gap, 1e-6).
    """
    floor = max(spec.min_gap if spec.min_gap is not None else 0.0, GAP_FLOOR)
    for attempt in range(MAX_REJECTIONS):
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence(entropy=spec.seed, spawn_key=(attempt,)))
        )
        mdp = _draw(spec, rng, gamma)
        v_star, pi_star = exact_optimal(mdp, DiscountSpec.discounted(gamma))
        ergodic, _ = check_ergodic(policy_matrix(mdp, pi_star))
        if not ergodic:
            continue
        gap = action_gap(mdp, gamma, v_star, pi_star)
        if gap >= floor:
            return mdp
    raise GenerationError(
        f"no instance with action gap >= {floor} in {MAX_REJECTIONS} attempts "
        f"(n={spec.n_states}, m={spec.n_actions}, seed={spec.seed})"
    )


def _draw(spec: GeneratorSpec, rng: np.random.Generator, gamma: float) -> Mdp:
    n, m = spec.n_states, spec.n_actions
    target_support = max(1, int(round(spec.density * n)))
    transitions = np.zeros((m, n, n))
    for a in range(m):
        for s in range(n):
            support = {(s + 1) % n}
            if s == 0:
                support.add(0)
            candidates = [x for x in range(n) if x != s and x not in support]
            extra = max(0, target_support - len(support))
            if extra and candidates:
                picked = rng.choice(len(candidates), size=min(extra, len(candidates)), replace=False)
                support.update(candidates[i] for i in np.atleast_1d(picked))
            idx = sorted(support)
            weights = rng.uniform(0.1, 1.0, size=len(idx))
            transitions[a, s, idx] = weights / weights.sum()
    lo, hi = spec.reward_range
    rewards = rng.uniform(lo, hi, size=(n, m))
    return Mdp(transitions=transitions, rewards=rewards, gamma=float(gamma))


def tight_gamma_mdp(n: int, gamma: float) -> Mdp:
    """Baseline on which the span contracts at exactly gamma, never faster.

    Single action, every state absorbing with reward r(s) = s: values decouple,
    so V_t(s) - V*(s) = -gamma^t r(s)/(1-gamma) and span(e_t) = gamma^t span(e_0)
    exactly.  The optimal chain is reducible, so the ergodicity assumption
    fails by construction -- witnessing that the extra contraction needs it.
    """
    if n < 2:
        raise ValueError("need at least 2 states")
    transitions = np.eye(n)[None, :, :]
    rewards = np.arange(n, dtype=float)[:, None]
    return Mdp(transitions=transitions, rewards=rewards, gamma=float(gamma))


def gain_normalized(mdp: Mdp) -> Mdp:
    """Shift all rewards so the optimal long-run average reward is zero.

    With zero optimal gain the undiscounted backup has the optimal bias as a
    genuine fixed point, so the error vector propagates multiplicatively under
    asynchronous updates.  Without the shift, each single-state update injects
    alpha * gain into that state only; the resulting phase lag across a sweep
    floors span(V_t - bias) at a level proportional to alpha * gain instead of
    letting it contract to zero.  Same transitions, same optimal policy, same
    bias.
    """
    bias, _ = exact_optimal(mdp, DiscountSpec.average())
    gain = average_gain_from_bias(mdp, bias)
    return Mdp(transitions=mdp.transitions, rewards=mdp.rewards - gain, gamma=mdp.gamma)


def round_robin_schedule(n: int, repeats: int) -> UpdateSchedule:
    """Single-state blocks cycling 0, 1, ..., n-1, the whole cycle `repeats`
    times per period (B = n * repeats).  Coverage requires repeats >= n."""
    if n < 1:
        raise ValueError("n must be positive")
    if repeats < n:
        raise ValueError(f"repeats must be at least n = {n} to satisfy update coverage, got {repeats}")
    blocks = tuple(np.array([s]) for _ in range(repeats) for s in range(n))
    return UpdateSchedule(blocks=blocks, period=n * repeats)
