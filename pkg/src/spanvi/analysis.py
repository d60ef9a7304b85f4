"""Certified contraction constants, assumption checks, and trace verifiers.

The solver's span converges geometrically at a rate strictly below the
discount factor whenever (a) the optimal policy's chain is ergodic and
(b) the optimal policy is unique with action gap delta > 0.  This module
computes the constants certifying that extra contraction:

* ``delta``        -- minimal optimality margin of the best action (the gap).
* ``delta_prime``  -- uniform positivity floor of the effective error-propagation
                      matrix along the optimal chain's edges.
* ``n_mix``        -- smallest power at which the optimal chain's pattern is
                      strictly positive (bounded by n^2 - 2n + 2 for primitive
                      patterns, the Wielandt index).
* ``tau``          -- per-window contraction bonus 1 - n * delta_prime**n_mix.

The damped-update (learning-rate alpha) variants replace these with
``n_mix_alpha = n - 1``, ``delta_prime_alpha = min(alpha*delta_prime, (1-alpha)*gamma)``
and ``tau_alpha = ((1-alpha)/gamma + alpha)**n_mix_alpha - n * delta_prime_alpha**n_mix_alpha``.

Verifiers take solver traces (with the exact optimum attached) and check the
certified window bounds empirically.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .mdp import (
    AssumptionViolation,
    DiscountSpec,
    Mdp,
    policy_matrix,
    span,
)

VERIFY_SLACK = 1e-10
RATE_FLOOR_FACTOR = 1e2  # spans below this many machine epsilons of span[0] are noise


def wielandt_bound(n: int) -> int:
    """Largest power ever needed for a primitive n x n pattern to go positive."""
    return n * n - 2 * n + 2


def check_ergodic(p: np.ndarray) -> tuple[bool, int | None]:
    """Primitivity of a stochastic matrix: is some power of its 0/1 pattern
    all-positive, and at which smallest exponent?

    Works on the boolean adjacency pattern with integer matrix products, so
    there is no floating-point underflow however small the entries are.
    Returns (False, None) for reducible or periodic patterns.
    """
    p = np.asarray(p)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {p.shape}")
    n = p.shape[0]
    base = (p > 0).astype(np.uint8)
    power = base.copy()
    for k in range(1, wielandt_bound(n) + 1):
        if power.all():
            return True, k
        power = ((power @ base) > 0).astype(np.uint8)
    return False, None


def min_support_probability(p: np.ndarray) -> float:
    """Smallest strictly positive entry of a stochastic matrix."""
    p = np.asarray(p, dtype=float)
    positive = p[p > 0.0]
    if positive.size == 0:
        raise ValueError("matrix has no positive entries")
    return float(np.min(positive))


def action_gap(mdp: Mdp, gamma: float, v_star: np.ndarray, pi_star: np.ndarray) -> float:
    """Minimal margin by which the optimal action beats every alternative:

        min over s, a' != pi*(s) of  Q*(s, pi*(s)) - Q*(s, a')

    with Q*(s,a) = r(s,a) + gamma * P_a(s) . v_star.  A result <= 0 means the
    optimal policy is not unique.  If no state offers an alternative action the
    gap is vacuous and +inf is returned with a warning.
    """
    v_star = np.asarray(v_star, dtype=float)
    q = mdp.rewards + gamma * (mdp.transitions @ v_star).T
    n = mdp.n_states
    q_star = q[np.arange(n), pi_star]
    rivals = q.copy()
    rivals[np.arange(n), pi_star] = -np.inf
    best_rival = np.max(rivals, axis=1)
    finite = np.isfinite(best_rival)
    if not np.any(finite):
        warnings.warn("every state has a single action; the action gap is vacuous (+inf)")
        return math.inf
    return float(np.min(q_star[finite] - best_rival[finite]))


@dataclass(frozen=True)
class ContractionConstants:
    """Certified constants for one MDP (and optionally one learning rate)."""

    n_states: int
    gamma: float
    delta: float
    delta_prime: float
    n_mix: int
    tau: float
    r_max: float
    r_min: float
    min_p_star: float
    # log(n * delta_prime**n_mix); kept so validity survives underflow of tau to 1.0
    log_bonus: float
    alpha: float | None = None
    n_mix_alpha: int | None = None
    delta_prime_alpha: float | None = None
    tau_alpha: float | None = None
    window_factor_alpha: float | None = None  # gamma**n_mix_alpha * tau_alpha
    vacuous_alpha: bool | None = None

    @property
    def guaranteed_rate_per_iter(self) -> float:
        """gamma * tau**(1/n_mix): the certified per-iteration geometric rate."""
        return self.gamma * math.exp(math.log1p(-math.exp(self.log_bonus)) / self.n_mix)


def contraction_certificate(
    mdp: Mdp,
    gamma: float,
    oracle: tuple[np.ndarray, np.ndarray],
) -> ContractionConstants:
    """Constants certifying extra span contraction for synchronous sweeps.

    Refuses (AssumptionViolation) when the optimal chain is not ergodic, the
    optimal policy is not unique, or the reward range is degenerate.

    delta_prime uses the minimum over the *support* of P* (its strictly
    positive entries); the minimum over all entries is typically zero and
    would certify nothing.  With a single action everywhere the error
    propagates through P* exactly, so delta_prime is the support minimum
    itself.
    """
    v_star, pi_star = oracle
    p_star = policy_matrix(mdp, pi_star)
    ergodic, n_mix = check_ergodic(p_star)
    if not ergodic:
        raise AssumptionViolation(
            "ergodicity", "the optimal policy's chain is not irreducible and aperiodic"
        )
    delta = action_gap(mdp, gamma, v_star, pi_star)
    if delta <= 0.0:
        raise AssumptionViolation(
            "unique-optimal-policy", f"action gap is {delta:.3e}; optimal policy is not unique"
        )
    r_max = float(np.max(mdp.rewards))
    r_min = float(np.min(mdp.rewards))
    min_p = min_support_probability(p_star)
    if math.isinf(delta):
        factor = 1.0
    else:
        if r_max == r_min:
            raise AssumptionViolation(
                "nondegenerate-rewards", "constant rewards make the positivity floor vacuous"
            )
        # Uniform-in-time floor on the diagonal mixing weight; never above 1.
        factor = min(1.0, delta * (1.0 - gamma) / (r_max - r_min))
    delta_prime = factor * min_p
    return _with_tau(
        n_states=mdp.n_states,
        gamma=float(gamma),
        delta=delta,
        delta_prime=delta_prime,
        n_mix=n_mix,
        r_max=r_max,
        r_min=r_min,
        min_p_star=min_p,
    )


def average_contraction_certificate(
    mdp: Mdp,
    oracle: tuple[np.ndarray, np.ndarray],
    span_e0: float,
) -> ContractionConstants:
    """Average-criterion analogue of :func:`contraction_certificate`.

    The discounted positivity floor uses (1 - gamma) / (r_max - r_min) as a
    bound on 1 / span(e_0); that degenerates at gamma = 1, so here the actual
    initial error span is used instead.  The backup discount is 1.
    """
    if span_e0 < 0.0:
        raise ValueError("span_e0 must be nonnegative")
    v_star, pi_star = oracle
    p_star = policy_matrix(mdp, pi_star)
    ergodic, n_mix = check_ergodic(p_star)
    if not ergodic:
        raise AssumptionViolation(
            "ergodicity", "the optimal policy's chain is not irreducible and aperiodic"
        )
    delta = action_gap(mdp, 1.0, v_star, pi_star)
    if delta <= 0.0:
        raise AssumptionViolation(
            "unique-optimal-policy", f"action gap is {delta:.3e}; optimal policy is not unique"
        )
    min_p = min_support_probability(p_star)
    if math.isinf(delta) or span_e0 == 0.0:
        factor = 1.0
    else:
        factor = min(1.0, delta / span_e0)
    return _with_tau(
        n_states=mdp.n_states,
        gamma=1.0,
        delta=delta,
        delta_prime=factor * min_p,
        n_mix=n_mix,
        r_max=float(np.max(mdp.rewards)),
        r_min=float(np.min(mdp.rewards)),
        min_p_star=min_p,
    )


def _with_tau(**kw) -> ContractionConstants:
    n = kw["n_states"]
    n_mix = kw["n_mix"]
    delta_prime = kw["delta_prime"]
    if delta_prime <= 0.0:
        raise AssumptionViolation("positivity-floor", "delta_prime must be positive")
    log_bonus = math.log(n) + n_mix * math.log(delta_prime)
    if log_bonus >= 0.0:
        raise AssumptionViolation(
            "contraction-bonus", f"n * delta_prime**n_mix = {math.exp(log_bonus):.3e} is not below 1"
        )
    # tau may round to 1.0 when the bonus underflows; validity is the log check above.
    tau = -math.expm1(log_bonus)
    return ContractionConstants(tau=tau, log_bonus=log_bonus, **kw)


def damped_contraction_certificate(
    mdp: Mdp,
    gamma: float,
    alpha: float,
    base: ContractionConstants,
) -> ContractionConstants:
    """Constants for the damped update V <- (1-alpha) V + alpha T V.

    Damping guarantees positive self-weights, so only n - 1 updates are needed
    for every state to influence every other; in exchange the off-diagonal
    floor shrinks to alpha * delta_prime and the per-step coefficient mass is
    (1-alpha)/gamma + alpha instead of 1.

    The certificate is *vacuous* (flagged, never an error) when it fails to
    certify a window factor in (0, 1): at alpha = 1 the damping floor
    (1-alpha)*gamma collapses to zero.
    """
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must be in (0, 1]; got {alpha}")
    n = mdp.n_states
    n_mix_alpha = n - 1
    delta_prime_alpha = min(alpha * base.delta_prime, (1.0 - alpha) * gamma)
    coeff = (1.0 - alpha) / gamma + alpha
    bonus = n * delta_prime_alpha**n_mix_alpha
    tau_alpha = coeff**n_mix_alpha - bonus
    window_factor = ((1.0 - alpha) + alpha * gamma) ** n_mix_alpha - gamma**n_mix_alpha * bonus
    vacuous = delta_prime_alpha <= 0.0 or not (0.0 < window_factor < 1.0)
    return replace(
        base,
        alpha=float(alpha),
        n_mix_alpha=n_mix_alpha,
        delta_prime_alpha=delta_prime_alpha,
        tau_alpha=tau_alpha,
        window_factor_alpha=window_factor,
        vacuous_alpha=vacuous,
    )


def async_contraction_certificate(
    mdp: Mdp,
    spec: DiscountSpec,
    alpha: float,
    oracle: tuple[np.ndarray, np.ndarray],
    span_e0: float,
) -> ContractionConstants:
    """Heuristic certificate for asynchronous damped sweeps.

    The per-window factor tau' is instantiated from the damped constants at
    the schedule's effective mixing horizon (n - 1 single-state influences).
    It is a documented heuristic: reports label it as such, and in the
    discounted case the corresponding bound is only ever checked softly.
    """
    if spec.criterion == "average":
        base = average_contraction_certificate(mdp, oracle, span_e0)
        return damped_contraction_certificate(mdp, 1.0, alpha, base)
    base = contraction_certificate(mdp, spec.gamma, oracle)
    return damped_contraction_certificate(mdp, spec.gamma, alpha, base)


def lock_in_index(span_errs: np.ndarray, delta: float, gamma_eff: float) -> int:
    """First iteration with span(e_t) < delta / (1 + gamma): from here on the
    greedy policy provably equals the optimal one.  Returns len(span_errs)
    when the threshold is never reached."""
    if math.isinf(delta):
        return 0
    threshold = delta / (1.0 + gamma_eff)
    below = np.nonzero(np.asarray(span_errs) < threshold)[0]
    return int(below[0]) if below.size else len(span_errs)


@dataclass(frozen=True)
class CheckReport:
    """Outcome of one trace verification."""

    name: str
    hard: bool
    applicable: bool
    passed: bool | None
    windows: int = 0
    worst_observed: float | None = None
    bound: float | None = None
    message: str = ""

    @property
    def ok(self) -> bool:
        """True unless a hard, applicable check actually failed."""
        return not (self.hard and self.applicable and self.passed is False)


def verify_window_contraction(trace, constants: ContractionConstants, gamma: float) -> CheckReport:
    """Check span(e_{t+N}) <= gamma^N * tau * span(e_t) + slack on every
    post-lock-in window of a synchronous trace; pre-lock-in windows must meet
    the plain gamma^N bound.  Reports the worst observed window ratio."""
    spans = _require_span_errs(trace)
    n_mix = constants.n_mix
    if len(spans) < n_mix + 1:
        return CheckReport(
            name="window-contraction",
            hard=True,
            applicable=False,
            passed=None,
            message=f"trace has {len(spans)} values; need at least {n_mix + 1}",
        )
    t_lock = lock_in_index(spans, constants.delta, gamma)
    g_n = gamma**n_mix
    certified = g_n * constants.tau
    worst = -math.inf
    violations = 0
    windows = 0
    for t in range(len(spans) - n_mix):
        bound = (certified if t >= t_lock else g_n) * spans[t] + VERIFY_SLACK
        windows += 1
        if spans[t + n_mix] > bound:
            violations += 1
        if spans[t] > 0:
            worst = max(worst, spans[t + n_mix] / spans[t])
    return CheckReport(
        name="window-contraction",
        hard=True,
        applicable=True,
        passed=violations == 0,
        windows=windows,
        worst_observed=None if worst == -math.inf else worst,
        bound=certified,
        message=f"lock-in at t={t_lock}; {violations} violation(s) in {windows} windows",
    )


def verify_damped_window_contraction(
    trace, constants: ContractionConstants, gamma: float
) -> CheckReport:
    """Post-lock-in window bound for damped synchronous sweeps:

        span(e_{t + N_a}) <= gamma^{N_a} * tau_a * span(e_t) + slack

    with N_a = n - 1.  A vacuous certificate (window factor outside (0, 1))
    is reported as not applicable rather than silently skipped.
    """
    if constants.tau_alpha is None:
        raise ValueError("constants must carry the damped (alpha) fields")
    if constants.vacuous_alpha:
        return CheckReport(
            name="damped-window-contraction",
            hard=True,
            applicable=False,
            passed=None,
            bound=constants.window_factor_alpha,
            message=(
                f"certificate is vacuous (window factor {constants.window_factor_alpha!r} "
                "outside (0,1)); nothing to check"
            ),
        )
    spans = _require_span_errs(trace)
    n_w = constants.n_mix_alpha
    if len(spans) < n_w + 1:
        return CheckReport(
            name="damped-window-contraction",
            hard=True,
            applicable=False,
            passed=None,
            message=f"trace has {len(spans)} values; need at least {n_w + 1}",
        )
    t_lock = lock_in_index(spans, constants.delta, gamma)
    factor = constants.window_factor_alpha
    violations = 0
    windows = 0
    worst = -math.inf
    for t in range(t_lock, len(spans) - n_w):
        windows += 1
        if spans[t + n_w] > factor * spans[t] + VERIFY_SLACK:
            violations += 1
        if spans[t] > 0:
            worst = max(worst, spans[t + n_w] / spans[t])
    if windows == 0:
        return CheckReport(
            name="damped-window-contraction",
            hard=True,
            applicable=False,
            passed=None,
            message=f"no post-lock-in windows (lock-in at t={t_lock})",
        )
    return CheckReport(
        name="damped-window-contraction",
        hard=True,
        applicable=True,
        passed=violations == 0,
        windows=windows,
        worst_observed=None if worst == -math.inf else worst,
        bound=factor,
        message=f"lock-in at t={t_lock}; {violations} violation(s) in {windows} windows",
    )


def verify_sandwich(trace, p_star: np.ndarray, gamma: float) -> CheckReport:
    """Elementwise error-propagation bounds along a synchronous trace:

        gamma P* e_t  <=  e_{t+1}  <=  gamma P_t e_t        (alpha = 1)
        ((1-alpha) I + gamma alpha P*) e_t  <=  e_{t+1}     (alpha < 1)

    where P_t is the chain of the greedy policy recorded at step t.  The upper
    bound only holds for undamped sweeps and is skipped otherwise.
    """
    errors = _require_errors(trace)
    alpha = trace.alpha
    worst = 0.0
    for t in range(trace.iterations):
        e_t = errors[t]
        e_next = errors[t + 1]
        lower = gamma * alpha * (p_star @ e_t) + (1.0 - alpha) * e_t
        worst = max(worst, float(np.max(lower - e_next)))
        if alpha == 1.0:
            p_t = policy_matrix(trace.mdp, trace.policies[t])
            upper = gamma * (p_t @ e_t)
            worst = max(worst, float(np.max(e_next - upper)))
    return CheckReport(
        name="error-sandwich",
        hard=True,
        applicable=trace.iterations > 0,
        passed=worst <= VERIFY_SLACK,
        windows=trace.iterations,
        worst_observed=worst,
        bound=VERIFY_SLACK,
        message="upper bound checked" if alpha == 1.0 else "damped: lower bound only",
    )


def verify_step_span_bound(trace) -> CheckReport:
    """span(V_t - V_{t+1}) <= (1 + gamma) * span(e_t) at every step (the
    average criterion uses gamma = 1)."""
    spans = _require_span_errs(trace)
    g = trace.spec.effective_gamma
    worst = 0.0
    for t in range(trace.iterations):
        bound = (1.0 + g) * spans[t] + VERIFY_SLACK
        worst = max(worst, trace.span_diffs[t] - bound)
    return CheckReport(
        name="step-span-bound",
        hard=True,
        applicable=trace.iterations > 0,
        passed=worst <= 0.0,
        windows=trace.iterations,
        worst_observed=worst,
        bound=0.0,
    )


def verify_async_window_contraction(
    trace,
    constants: ContractionConstants,
    gamma: float,
    period: int,
    gain: float = 0.0,
) -> CheckReport:
    """Per-period contraction of asynchronous traces using the heuristic tau'.

    average (gamma = 1): HARD check span(e_{(k+1)B}) <= tau' span(e_kB) + slack,
    provided the optimal gain is (numerically) zero -- only then is the bias a
    fixed point of the backup and the error purely multiplicative.  With a
    nonzero gain the check downgrades to a soft report: each single-state
    update injects alpha * gain into that state alone, flooring the error span
    at a level no certificate can beat (normalize fixtures with
    ``generators.gain_normalized`` to restore the premise).

    discounted: SOFT report of span(e_{(k+1)B}) <= gamma^N tau' span(e_kB)
    + (1 - gamma^B) min(e_kB); the additive term voids any guarantee, so
    failures are logged, never asserted.
    """
    if constants.tau_alpha is None:
        raise ValueError("constants must carry the damped (alpha) fields")
    spans = _require_span_errs(trace)
    errors = _require_errors(trace)
    tau_prime = constants.tau_alpha
    zero_gain = abs(gain) <= 1e-8
    hard = gamma == 1.0 and zero_gain
    boundaries = range(0, len(spans) - period, period)
    violations = 0
    windows = 0
    worst = -math.inf
    for t in boundaries:
        windows += 1
        if hard:
            bound = tau_prime * spans[t] + VERIFY_SLACK
        else:
            bound = (
                gamma**constants.n_mix_alpha * tau_prime * spans[t]
                + (1.0 - gamma**period) * float(np.min(errors[t]))
                + VERIFY_SLACK
            )
        if spans[t + period] > bound:
            violations += 1
        if spans[t] > 0:
            worst = max(worst, spans[t + period] / spans[t])
    if windows == 0:
        return CheckReport(
            name="async-window-contraction",
            hard=hard,
            applicable=False,
            passed=None,
            message=f"trace shorter than one period ({period})",
        )
    if hard:
        label = "hard average-criterion check"
    elif gamma == 1.0:
        label = f"soft report; optimal gain {gain:.3g} is nonzero, so the bias is not a fixed point"
    else:
        label = "soft report; tau' is heuristic"
    return CheckReport(
        name="async-window-contraction",
        hard=hard,
        applicable=True,
        passed=violations == 0,
        windows=windows,
        worst_observed=None if worst == -math.inf else worst,
        bound=tau_prime,
        message=label + f"; {violations} violation(s) in {windows} windows",
    )


@dataclass(frozen=True)
class RateEstimate:
    """Geometric factor fitted to a span sequence."""

    rate: float
    fit_r2: float
    iterations_used: tuple[int, int]
    window_rate: float | None = None


def estimate_rate(spans, window: int | None = None) -> RateEstimate | None:
    """Least-squares log-linear fit of span_t against t.

    Only strictly positive values enter the fit, and trailing values within
    100 machine epsilons of span[0] are dropped as floor noise.  Returns None
    (inconclusive) when fewer than 5 usable points remain.  ``window`` adds
    the contraction factor over the last window of that length.
    """
    spans = np.asarray(spans, dtype=float)
    if spans.size == 0:
        return None
    floor = RATE_FLOOR_FACTOR * np.finfo(float).eps * spans[0]
    usable = np.nonzero(spans > floor)[0]
    # Keep the contiguous leading run; past the first floored value the tail is noise.
    if usable.size:
        end = usable[np.nonzero(np.diff(usable) > 1)[0][0]] + 1 if np.any(np.diff(usable) > 1) else usable[-1] + 1
        usable = usable[usable < end]
    if usable.size < 5:
        return None
    t = usable.astype(float)
    y = np.log(spans[usable])
    slope, intercept = np.polyfit(t, y, 1)
    fitted = slope * t + intercept
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    if ss_tot <= 1e-30:
        r2 = 1.0 if ss_res <= 1e-20 else 0.0
    else:
        r2 = 1.0 - ss_res / ss_tot
    window_rate = None
    if window is not None and usable[-1] - window >= 0 and spans[usable[-1] - window] > floor:
        window_rate = float(spans[usable[-1]] / spans[usable[-1] - window])
    return RateEstimate(
        rate=float(math.exp(slope)),
        fit_r2=r2,
        iterations_used=(int(usable[0]), int(usable[-1])),
        window_rate=window_rate,
    )


def iteration_bound_discounted(
    eps: float, gamma: float, constants: ContractionConstants, span_e0: float
) -> int:
    """Iterations after which the discounted stopping rule H = eps(1-gamma)/gamma
    is guaranteed to have fired: smallest t with

        gamma^t * tau^(t/N) * span(e_0) <= eps (1 - gamma) / 4.

    Published statements of this bound carry sign typos; this is the
    orientation that follows from span(e_t) <= gamma^t tau^(t/N) span(e_0).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if span_e0 <= 0:
        return 0
    target = eps * (1.0 - gamma) / 4.0
    if span_e0 <= target:
        return 0
    log_rate = math.log(gamma) + math.log1p(-math.exp(constants.log_bonus)) / constants.n_mix
    return math.ceil(math.log(target / span_e0) / log_rate)


def iteration_bound_average(eps: float, constants: ContractionConstants, span_e0: float) -> int:
    """Average-criterion analogue: smallest t with tau^(t/N) span(e_0) <= eps/2."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if span_e0 <= 0:
        return 0
    target = eps / 2.0
    if span_e0 <= target:
        return 0
    log_rate = math.log1p(-math.exp(constants.log_bonus)) / constants.n_mix
    return math.ceil(math.log(target / span_e0) / log_rate)


def certificate_dict(constants: ContractionConstants) -> dict:
    """JSON-ready certificate: assumptions, constants, and the per-iteration
    guaranteed rate gamma * tau**(1/N)."""
    return {
        "assumptions": {
            "ergodicity": True,
            "unique_optimal_policy": True,
            "action_gap": _json_float(constants.delta),
        },
        "constants": {
            "delta": _json_float(constants.delta),
            "delta_prime": constants.delta_prime,
            "n_mix": constants.n_mix,
            "tau": constants.tau,
            "r_max": constants.r_max,
            "r_min": constants.r_min,
            "min_p_star": constants.min_p_star,
            "alpha": constants.alpha,
            "n_mix_alpha": constants.n_mix_alpha,
            "delta_prime_alpha": constants.delta_prime_alpha,
            "tau_alpha": constants.tau_alpha,
            "window_factor_alpha": constants.window_factor_alpha,
            "vacuous_alpha": constants.vacuous_alpha,
        },
        "guaranteed_rate_per_iter": constants.guaranteed_rate_per_iter,
    }


def _json_float(x: float) -> float | None:
    return None if math.isinf(x) or math.isnan(x) else x


def _require_span_errs(trace) -> np.ndarray:
    if trace.span_errs is None:
        raise ValueError("trace was recorded without the exact optimum; span(e_t) unavailable")
    return trace.span_errs


def _require_errors(trace):
    if trace.v_star is None:
        raise ValueError("trace was recorded without the exact optimum; error vectors unavailable")
    return trace.values - trace.v_star[None, :]
