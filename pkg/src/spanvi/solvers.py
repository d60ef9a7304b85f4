"""Three value-iteration variants with span-based stopping and full traces.

All variants share one update kernel:

    V_{t+1}(s) = (1 - alpha) V_t(s) + alpha * max_a [ r(s,a) + g P_a(s) V_t ]

applied on the scheduled subset of states (all states for the synchronous
variants), with g the discount (1 under the average criterion).  Iteration
stops once the span of the change drops to the threshold H; the output policy
is greedy with respect to the final value vector.

Stopping granularity: synchronous variants test span(V_{t+1} - V_t) every
iteration.  The asynchronous variant tests the change across one full
schedule period -- consecutive differences of partially updated vectors are
mostly zeros and would stop far too early.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mdp import AssumptionViolation, DiscountSpec, Mdp, span

VARIANTS = ("sync", "sync_lr", "async_lr")


@dataclass(frozen=True)
class SolverConfig:
    variant: str
    spec: DiscountSpec
    stop_threshold: float
    alpha: float = 1.0
    max_iterations: int = 10**6
    v0: np.ndarray | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if self.variant == "sync":
            if self.alpha != 1.0:
                raise ValueError("the sync variant requires alpha = 1")
        elif not (0.0 < self.alpha < 1.0):
            raise ValueError(f"{self.variant} requires alpha in (0, 1), got {self.alpha}")
        if not (self.stop_threshold > 0.0):
            raise ValueError(f"stop_threshold must be positive, got {self.stop_threshold}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.v0 is not None:
            v0 = np.asarray(self.v0, dtype=float)
            if not np.all(np.isfinite(v0)):
                raise ValueError("v0 must be finite")
            object.__setattr__(self, "v0", v0)


@dataclass(frozen=True)
class UpdateSchedule:
    """Periodic state-update schedule: blocks[t % period] is updated at step t."""

    blocks: tuple[np.ndarray, ...]
    period: int

    def __post_init__(self):
        if self.period != len(self.blocks):
            raise ValueError(f"period {self.period} != number of blocks {len(self.blocks)}")
        blocks = tuple(np.unique(np.asarray(b, dtype=int)) for b in self.blocks)
        for b in blocks:
            if b.size == 0:
                raise ValueError("schedule blocks must be non-empty")
        object.__setattr__(self, "blocks", blocks)

    def update_counts(self, n_states: int) -> np.ndarray:
        """Updates each state receives in one period (equivalently, in any
        window of `period` consecutive iterations, since blocks repeat)."""
        counts = np.zeros(n_states, dtype=int)
        for b in self.blocks:
            if np.any(b < 0) or np.any(b >= n_states):
                raise ValueError("schedule references a state index out of range")
            counts[b] += 1
        return counts

    def check_coverage(self, n_states: int) -> None:
        """Every state must be updated at least n_states times per period."""
        counts = self.update_counts(n_states)
        starved = np.nonzero(counts < n_states)[0]
        if starved.size:
            raise AssumptionViolation(
                "update-frequency",
                f"state(s) {starved.tolist()} updated {counts[starved].tolist()} time(s) "
                f"per period of {self.period}; need at least {n_states}",
            )


@dataclass
class SolveTrace:
    """Per-iteration record of a solve plus the final outcome.

    values[t] is V_t (values has iterations + 1 rows); policies[t] is the
    greedy policy computed from V_t while producing V_{t+1}; span_diffs[t] is
    span(V_{t+1} - V_t); span_errs[t] is span(V_t - V*) when the exact optimum
    was supplied.
    """

    mdp: Mdp
    spec: DiscountSpec
    variant: str
    alpha: float
    stop_threshold: float
    values: np.ndarray
    policies: np.ndarray
    span_diffs: np.ndarray
    updated: list[np.ndarray]
    iterations: int
    converged: bool
    terminated_by: str
    policy: np.ndarray
    stop_span: float
    v_star: np.ndarray | None = None
    span_errs: np.ndarray | None = None
    schedule: UpdateSchedule | None = field(default=None, repr=False)

    @property
    def final_span(self) -> float:
        return float(self.span_diffs[-1]) if self.iterations else 0.0

    def errors(self) -> np.ndarray:
        if self.v_star is None:
            raise ValueError("trace was recorded without the exact optimum")
        return self.values - self.v_star[None, :]


def stopping_threshold(spec: DiscountSpec, eps: float) -> float:
    """Span threshold H that makes the output policy eps-optimal:
    eps(1-gamma)/gamma for discounted, eps for average.  gamma = 0 collapses
    to a single exact backup, so H = eps suffices there too."""
    if eps <= 0.0:
        raise ValueError(f"eps must be positive, got {eps}")
    if spec.criterion == "average":
        return eps
    if spec.gamma == 0.0:
        return eps
    return eps * (1.0 - spec.gamma) / spec.gamma


def _run(
    mdp: Mdp,
    spec: DiscountSpec,
    variant: str,
    alpha: float,
    stop_threshold: float,
    max_iterations: int,
    v0: np.ndarray | None,
    schedule: UpdateSchedule | None,
    v_star: np.ndarray | None,
) -> SolveTrace:
    n = mdp.n_states
    g = spec.effective_gamma
    states = np.arange(n)
    v = np.zeros(n) if v0 is None else np.asarray(v0, dtype=float).copy()
    if v.shape != (n,):
        raise ValueError(f"v0 must have shape ({n},)")

    values = [v.copy()]
    policies: list[np.ndarray] = []
    span_diffs: list[float] = []
    updated: list[np.ndarray] = []
    converged = False
    stop_span = np.inf
    period = schedule.period if schedule is not None else 1

    for t in range(max_iterations):
        q = mdp.rewards + g * (mdp.transitions @ v).T
        pi_t = np.argmax(q, axis=1)
        backed = q[states, pi_t]
        new_v = (1.0 - alpha) * v + alpha * backed
        if schedule is not None:
            block = schedule.blocks[t % period]
            masked = v.copy()
            masked[block] = new_v[block]
            new_v = masked
            updated.append(block)
        else:
            updated.append(states)
        policies.append(pi_t)
        span_diffs.append(span(new_v - v))
        values.append(new_v.copy())
        v = new_v
        if schedule is None:
            stop_span = span_diffs[-1]
            if stop_span <= stop_threshold:
                converged = True
                break
        elif (t + 1) % period == 0:
            stop_span = span(values[-1] - values[-1 - period])
            if stop_span <= stop_threshold:
                converged = True
                break

    values_arr = np.array(values)
    q_final = mdp.rewards + g * (mdp.transitions @ v).T
    out_policy = np.argmax(q_final, axis=1)
    span_errs = None
    if v_star is not None:
        v_star = np.asarray(v_star, dtype=float)
        span_errs = np.array([span(row - v_star) for row in values_arr])
    return SolveTrace(
        mdp=mdp,
        spec=spec,
        variant=variant,
        alpha=alpha,
        stop_threshold=stop_threshold,
        values=values_arr,
        policies=np.array(policies, dtype=int),
        span_diffs=np.array(span_diffs),
        updated=updated,
        iterations=len(span_diffs),
        converged=converged,
        terminated_by="threshold" if converged else "max_iter",
        policy=out_policy,
        stop_span=float(stop_span) if np.isfinite(stop_span) else float("inf"),
        v_star=v_star,
        span_errs=span_errs,
        schedule=schedule,
    )


def vi_sync(mdp: Mdp, cfg: SolverConfig, v_star: np.ndarray | None = None) -> SolveTrace:
    """Classical synchronous value iteration (alpha = 1, all states updated)."""
    if cfg.variant != "sync":
        raise ValueError(f"vi_sync requires variant 'sync', got {cfg.variant!r}")
    return _run(
        mdp, cfg.spec, "sync", 1.0, cfg.stop_threshold, cfg.max_iterations, cfg.v0, None, v_star
    )


def vi_sync_lr(mdp: Mdp, cfg: SolverConfig, v_star: np.ndarray | None = None) -> SolveTrace:
    """Synchronous value iteration with learning rate alpha in (0, 1)."""
    if cfg.variant != "sync_lr":
        raise ValueError(f"vi_sync_lr requires variant 'sync_lr', got {cfg.variant!r}")
    return _run(
        mdp,
        cfg.spec,
        "sync_lr",
        cfg.alpha,
        cfg.stop_threshold,
        cfg.max_iterations,
        cfg.v0,
        None,
        v_star,
    )


def vi_async_lr(
    mdp: Mdp,
    cfg: SolverConfig,
    schedule: UpdateSchedule,
    v_star: np.ndarray | None = None,
) -> SolveTrace:
    """Asynchronous damped value iteration over a periodic update schedule.

    The schedule must update every state at least n times per period (checked
    before iterating); states outside the scheduled block keep their value.
    """
    if cfg.variant != "async_lr":
        raise ValueError(f"vi_async_lr requires variant 'async_lr', got {cfg.variant!r}")
    schedule.check_coverage(mdp.n_states)
    return _run(
        mdp,
        cfg.spec,
        "async_lr",
        cfg.alpha,
        cfg.stop_threshold,
        cfg.max_iterations,
        cfg.v0,
        schedule,
        v_star,
    )


def solve(
    mdp: Mdp,
    cfg: SolverConfig,
    schedule: UpdateSchedule | None = None,
    v_star: np.ndarray | None = None,
) -> SolveTrace:
    """Dispatch on cfg.variant."""
    if cfg.variant == "sync":
        return vi_sync(mdp, cfg, v_star)
    if cfg.variant == "sync_lr":
        return vi_sync_lr(mdp, cfg, v_star)
    if schedule is None:
        raise ValueError("async_lr needs an update schedule")
    return vi_async_lr(mdp, cfg, schedule, v_star)


def discounted_value_estimate(trace: SolveTrace) -> np.ndarray:
    """Midpoint-corrected value estimate from a span-stopped discounted trace.

    Span stopping controls V only up to a constant drift; the standard
    correction adds gamma/(1-gamma) times the midrange of the last change,
    bringing the estimate within gamma * span(dV) / (2(1-gamma)) of the true
    optimum in sup-norm.
    """
    if trace.spec.criterion != "discounted":
        raise ValueError("value estimate is defined for the discounted criterion")
    if trace.iterations == 0:
        return trace.values[-1].copy()
    gamma = trace.spec.gamma
    dv = trace.values[-1] - trace.values[-2]
    mid = (float(np.max(dv)) + float(np.min(dv))) / 2.0
    return trace.values[-1] + gamma / (1.0 - gamma) * mid
