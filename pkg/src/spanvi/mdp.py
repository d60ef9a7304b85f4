"""Finite tabular MDP model, span semi-norm, Bellman backup, and exact solvers.

Conventions used throughout the package:

* ``transitions`` is a ``(n_actions, n_states, n_states)`` array indexed
  ``[a][s][s']`` with row-stochastic slices ``transitions[a][s]``.
* ``rewards`` is ``(n_states, n_actions)`` holding the expected immediate
  reward ``r(s, a)``.
* Value vectors and policies are plain numpy arrays of length ``n_states``
  (float and int respectively).
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

ROW_SUM_TOL = 1e-12
FIXED_POINT_TOL = 1e-9
LINSOLVE_REL_TOL = 1e-10

# Cap on brute-force policy enumeration for the average-reward oracle.
ENUMERATION_CAP = 10**6


class NumericalFailure(RuntimeError):
    """A linear solve or fixed-point check exceeded its tolerance."""


class AssumptionViolation(ValueError):
    """A structural precondition (ergodicity, uniqueness, ...) does not hold."""

    def __init__(self, assumption: str, message: str):
        super().__init__(f"{assumption}: {message}")
        self.assumption = assumption


class CapabilityError(RuntimeError):
    """The requested computation exceeds what this implementation enumerates."""


@dataclass(frozen=True)
class DiscountSpec:
    """Optimality criterion: discounted with gamma in [0,1), or long-run average."""

    criterion: str
    gamma: float | None = None

    def __post_init__(self):
        if self.criterion == "discounted":
            if self.gamma is None or not (0.0 <= self.gamma < 1.0):
                raise ValueError(f"discounted criterion needs gamma in [0,1), got {self.gamma}")
        elif self.criterion == "average":
            if self.gamma is not None:
                raise ValueError("average criterion carries no gamma")
        else:
            raise ValueError(f"unknown criterion {self.criterion!r}")

    @classmethod
    def discounted(cls, gamma: float) -> "DiscountSpec":
        return cls("discounted", float(gamma))

    @classmethod
    def average(cls) -> "DiscountSpec":
        return cls("average")

    @property
    def effective_gamma(self) -> float:
        """Discount used inside the backup; the average criterion updates with 1."""
        return 1.0 if self.criterion == "average" else float(self.gamma)


@dataclass(frozen=True)
class Mdp:
    """Immutable finite MDP. Arrays are validated and frozen at construction."""

    transitions: np.ndarray
    rewards: np.ndarray
    gamma: float | None = None

    def __post_init__(self):
        p = np.asarray(self.transitions, dtype=float)
        r = np.asarray(self.rewards, dtype=float)
        if p.ndim != 3 or p.shape[1] != p.shape[2]:
            raise ValueError(f"transitions must be (n_actions, n_states, n_states), got {p.shape}")
        if r.shape != (p.shape[1], p.shape[0]):
            raise ValueError(f"rewards must be (n_states, n_actions) = {(p.shape[1], p.shape[0])}, got {r.shape}")
        if np.any(p < 0.0) or np.any(p > 1.0):
            raise ValueError("transition probabilities must lie in [0, 1]")
        row_sums = p.sum(axis=2)
        if np.max(np.abs(row_sums - 1.0)) > ROW_SUM_TOL:
            bad = np.unravel_index(np.argmax(np.abs(row_sums - 1.0)), row_sums.shape)
            raise ValueError(f"transition row (a={bad[0]}, s={bad[1]}) sums to {row_sums[bad]!r}, not 1")
        if not np.all(np.isfinite(r)):
            raise ValueError("rewards must be finite")
        p.setflags(write=False)
        r.setflags(write=False)
        object.__setattr__(self, "transitions", p)
        object.__setattr__(self, "rewards", r)
        if self.gamma is not None:
            object.__setattr__(self, "gamma", float(self.gamma))

    @classmethod
    def from_transition_rewards(
        cls,
        transitions: np.ndarray,
        rewards_sprime: np.ndarray,
        gamma: float | None = None,
    ) -> "Mdp":
        """Build from per-transition rewards r(s, s'), reducing immediately to
        r(s, a) = sum_{s'} P(s'|s,a) r(s, s').  ``rewards_sprime`` is indexed
        like ``transitions``, ``[a][s][s']``."""
        p = np.asarray(transitions, dtype=float)
        rsp = np.asarray(rewards_sprime, dtype=float)
        if rsp.shape != p.shape:
            raise ValueError(f"rewards_sprime must match transitions shape {p.shape}, got {rsp.shape}")
        r = np.einsum("ast,ast->sa", p, rsp)
        return cls(transitions=p, rewards=r, gamma=gamma)

    @property
    def n_states(self) -> int:
        return self.transitions.shape[1]

    @property
    def n_actions(self) -> int:
        return self.transitions.shape[0]


def span(v: np.ndarray) -> float:
    """Span semi-norm max(v) - min(v); zero exactly on constant vectors."""
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise ValueError("span of an empty vector is undefined")
    return float(np.max(v) - np.min(v))


def policy_matrix(mdp: Mdp, pi: np.ndarray) -> np.ndarray:
    """Transition matrix (S, S) of the chain induced by deterministic policy pi."""
    pi = _check_policy(mdp, pi)
    return mdp.transitions[pi, np.arange(mdp.n_states), :]


def policy_rewards(mdp: Mdp, pi: np.ndarray) -> np.ndarray:
    pi = _check_policy(mdp, pi)
    return mdp.rewards[np.arange(mdp.n_states), pi]


def _check_policy(mdp: Mdp, pi: np.ndarray) -> np.ndarray:
    pi = np.asarray(pi, dtype=int)
    if pi.shape != (mdp.n_states,):
        raise ValueError(f"policy must have shape ({mdp.n_states},), got {pi.shape}")
    if np.any(pi < 0) or np.any(pi >= mdp.n_actions):
        raise ValueError("policy contains an action index out of range")
    return pi


def _check_values(mdp: Mdp, v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (mdp.n_states,):
        raise ValueError(f"value vector must have shape ({mdp.n_states},), got {v.shape}")
    return v


def bellman_backup(mdp: Mdp, v: np.ndarray, spec: DiscountSpec) -> tuple[np.ndarray, np.ndarray]:
    """One optimality backup: max_a [r(s,a) + g * P_a(s) v] per state.

    Returns the backed-up values and the greedy policy; argmax ties break to
    the lowest action index.  The average criterion backs up with g = 1.
    """
    v = _check_values(mdp, v)
    g = spec.effective_gamma
    q = mdp.rewards + g * (mdp.transitions @ v).T
    pi = np.argmax(q, axis=1)
    return q[np.arange(mdp.n_states), pi], pi


def greedy_policy(mdp: Mdp, v: np.ndarray, spec: DiscountSpec) -> np.ndarray:
    return bellman_backup(mdp, v, spec)[1]


def policy_evaluation_discounted(mdp: Mdp, pi: np.ndarray, gamma: float) -> np.ndarray:
    """Exact discounted value of pi via the linear system V = r_pi + gamma P_pi V."""
    if not (0.0 <= gamma < 1.0):
        raise ValueError(f"gamma must be in [0,1), got {gamma}")
    p = policy_matrix(mdp, pi)
    r = policy_rewards(mdp, pi)
    a = np.eye(mdp.n_states) - gamma * p
    v = np.linalg.solve(a, r)
    residual = float(np.max(np.abs(a @ v - r)))
    if residual > LINSOLVE_REL_TOL * (1.0 + float(np.max(np.abs(v)))):
        raise NumericalFailure(f"policy evaluation residual {residual:.3e} exceeds tolerance")
    return v


def policy_evaluation_average(mdp: Mdp, pi: np.ndarray) -> tuple[float, np.ndarray]:
    """Gain and bias of pi under the long-run average criterion.

    Requires the induced chain to be irreducible; the gain is then
    state-independent and equals mu_pi . r_pi for the stationary distribution
    mu_pi.  The bias solves (I - P_pi) h = r_pi - gain and is normalized to
    min(h) = 0.
    """
    p = policy_matrix(mdp, pi)
    if not _irreducible(p > 0.0):
        raise AssumptionViolation(
            "irreducible-chain",
            "policy induces a reducible chain; average reward would be state-dependent",
        )
    r = policy_rewards(mdp, pi)
    n = mdp.n_states
    # Stationary distribution: mu^T P = mu^T, sum(mu) = 1.  Replace one
    # balance equation by the normalization; nonsingular for irreducible P.
    m = p.T - np.eye(n)
    m[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    mu = np.linalg.solve(m, b)
    if np.min(mu) < -1e-10:
        raise NumericalFailure(f"stationary distribution has negative mass {np.min(mu):.3e}")
    gain = float(mu @ r)
    d = r - gain
    h, *_ = np.linalg.lstsq(np.eye(n) - p, d, rcond=None)
    residual = float(np.max(np.abs((np.eye(n) - p) @ h - d)))
    if residual > LINSOLVE_REL_TOL * (1.0 + float(np.max(np.abs(h)))):
        raise NumericalFailure(f"bias solve residual {residual:.3e} exceeds tolerance")
    h = h - np.min(h)
    return gain, h


def _irreducible(pattern: np.ndarray) -> bool:
    """Strong connectivity of a boolean adjacency pattern via reachability closure."""
    n = pattern.shape[0]
    reach = pattern | np.eye(n, dtype=bool)
    # (I | B)^(n-1) is the <= (n-1)-step reachability closure.
    power = reach
    steps = 1
    while steps < n - 1:
        power = (power.astype(np.uint8) @ power.astype(np.uint8)) > 0
        steps *= 2
    return bool(np.all(power))


def exact_optimal(mdp: Mdp, spec: DiscountSpec) -> tuple[np.ndarray, np.ndarray]:
    """Reference optimal solution, independent of value iteration.

    discounted: policy iteration (exact evaluation + greedy improvement) until
    the policy repeats; the result satisfies the fixed-point equation to 1e-9.

    average: brute-force enumeration of all deterministic policies (capped at
    n_actions**n_states <= 1e6), maximizing gain; returns the optimal bias
    (min-normalized) and the gain-maximizing policy.
    """
    if spec.criterion == "discounted":
        return _optimal_discounted(mdp, spec.gamma)
    return _optimal_average(mdp)


def _optimal_discounted(mdp: Mdp, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    n = mdp.n_states
    pi = np.zeros(n, dtype=int)
    for _ in range(10_000):
        v = policy_evaluation_discounted(mdp, pi, gamma)
        q = mdp.rewards + gamma * (mdp.transitions @ v).T
        new_pi = np.argmax(q, axis=1)
        if np.array_equal(new_pi, pi):
            break
        pi = new_pi
    else:
        raise NumericalFailure("policy iteration failed to settle within 10000 rounds")
    v = policy_evaluation_discounted(mdp, pi, gamma)
    tv, _ = bellman_backup(mdp, v, DiscountSpec.discounted(gamma))
    gap = float(np.max(np.abs(tv - v)))
    if gap > FIXED_POINT_TOL:
        raise NumericalFailure(f"optimal values violate the fixed point by {gap:.3e}")
    return v, pi


def _optimal_average(mdp: Mdp) -> tuple[np.ndarray, np.ndarray]:
    n, m = mdp.n_states, mdp.n_actions
    if m**n > ENUMERATION_CAP:
        raise CapabilityError(
            f"average-reward oracle enumerates n_actions**n_states policies; "
            f"{m}**{n} exceeds the cap of {ENUMERATION_CAP}"
        )
    best_gain = -np.inf
    best_pi: np.ndarray | None = None
    for assignment in itertools.product(range(m), repeat=n):
        pi = np.array(assignment, dtype=int)
        gain, _ = policy_evaluation_average(mdp, pi)
        if gain > best_gain:
            best_gain = gain
            best_pi = pi
    assert best_pi is not None
    _, bias = policy_evaluation_average(mdp, best_pi)
    return bias, best_pi


def average_gain_from_bias(mdp: Mdp, bias: np.ndarray) -> float:
    """Optimal gain recovered from the optimal bias via one backup:
    the optimality equation makes T h - h a constant vector equal to the gain."""
    tv, _ = bellman_backup(mdp, bias, DiscountSpec.average())
    diff = tv - bias
    if span(diff) > 1e-6 * (1.0 + float(np.max(np.abs(diff)))):
        warnings.warn(f"gain extraction saw non-constant T h - h (span {span(diff):.3e})")
    return float(np.mean(diff))


def is_eps_optimal(
    mdp: Mdp,
    pi: np.ndarray,
    spec: DiscountSpec,
    eps: float,
    v_star: np.ndarray,
) -> bool:
    """True iff pi loses at most eps: pointwise in values (discounted) or in
    gain (average, where v_star is the optimal bias)."""
    if spec.criterion == "discounted":
        v_pi = policy_evaluation_discounted(mdp, pi, spec.gamma)
        return bool(np.max(v_star - v_pi) <= eps)
    gain_star = average_gain_from_bias(mdp, v_star)
    gain_pi, _ = policy_evaluation_average(mdp, pi)
    return gain_star - gain_pi <= eps
