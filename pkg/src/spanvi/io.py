"""File formats: fixture JSON, trace CSV, summaries, and certificates.

Fixture schema (field order is canonical):

    {"n_states": int, "n_actions": int, "transitions": [[[p]]],
     "rewards": [[r]], "gamma": float | null}

``transitions`` is indexed [a][s][s'], ``rewards`` [s][a].  A fixture may
instead carry "rewards_sprime" indexed [a][s][s']; it is reduced to expected
rewards on load, so re-serialization always emits the canonical "rewards"
form.  Floats are written as Python's shortest round-trip decimals, which
makes load -> dump byte-stable.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .mdp import Mdp
from .solvers import SolveTrace

TRACE_HEADER = ["t", "span_diff", "span_err", "policy_changed", "states_updated"]


def mdp_to_dict(mdp: Mdp) -> dict:
    return {
        "n_states": mdp.n_states,
        "n_actions": mdp.n_actions,
        "transitions": mdp.transitions.tolist(),
        "rewards": mdp.rewards.tolist(),
        "gamma": mdp.gamma,
    }


def mdp_from_dict(d: dict) -> Mdp:
    for key in ("n_states", "n_actions", "transitions"):
        if key not in d:
            raise ValueError(f"fixture is missing required field {key!r}")
    if ("rewards" in d) == ("rewards_sprime" in d):
        raise ValueError("fixture must carry exactly one of 'rewards' or 'rewards_sprime'")
    n, m = int(d["n_states"]), int(d["n_actions"])
    transitions = np.asarray(d["transitions"], dtype=float)
    if transitions.shape != (m, n, n):
        raise ValueError(
            f"transitions: expected shape [{m}][{n}][{n}] (indexed [a][s][s']), got {list(transitions.shape)}"
        )
    gamma = d.get("gamma")
    if "rewards_sprime" in d:
        rewards_sprime = np.asarray(d["rewards_sprime"], dtype=float)
        return Mdp.from_transition_rewards(transitions, rewards_sprime, gamma=gamma)
    rewards = np.asarray(d["rewards"], dtype=float)
    if rewards.shape != (n, m):
        raise ValueError(f"rewards: expected shape [{n}][{m}] (indexed [s][a]), got {list(rewards.shape)}")
    return Mdp(transitions=transitions, rewards=rewards, gamma=gamma)


def dumps_canonical(obj) -> str:
    return json.dumps(obj, separators=(",", ":"), allow_nan=False) + "\n"


def save_mdp(path: str | Path, mdp: Mdp) -> Path:
    path = Path(path)
    path.write_text(dumps_canonical(mdp_to_dict(mdp)))
    return path


def load_mdp(path: str | Path) -> Mdp:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    if not isinstance(data, dict):
        raise ValueError(f"{path}: fixture must be a JSON object")
    try:
        return mdp_from_dict(data)
    except ValueError as e:
        raise ValueError(f"{path}: {e}") from e


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_trace_csv(path: str | Path, trace: SolveTrace) -> Path:
    """One row per iteration: span of the change, span of the error (blank
    when no oracle was attached), whether the greedy policy changed since the
    previous iteration, and how many states were updated."""
    path = Path(path)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_HEADER)
        for t in range(trace.iterations):
            if trace.span_errs is not None:
                err = repr(float(trace.span_errs[t]))
            else:
                err = ""
            changed = 1 if t == 0 else int(not np.array_equal(trace.policies[t], trace.policies[t - 1]))
            writer.writerow([t, repr(float(trace.span_diffs[t])), err, changed, len(trace.updated[t])])
    return path


def read_trace_spans(path: str | Path) -> np.ndarray:
    """span_diff column of a trace CSV."""
    with Path(path).open() as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != TRACE_HEADER:
            raise ValueError(f"{path}: unexpected trace header {reader.fieldnames}")
        return np.array([float(row["span_diff"]) for row in reader])


def trace_summary(trace: SolveTrace, fixture_sha256: str | None = None, extra: dict | None = None) -> dict:
    summary = {
        "iterations": trace.iterations,
        "converged": trace.converged,
        "policy": trace.policy.tolist(),
        "final_span": trace.final_span,
        "terminated_by": trace.terminated_by,
        "stop_span": trace.stop_span if np.isfinite(trace.stop_span) else None,
        "config": {
            "variant": trace.variant,
            "alpha": trace.alpha,
            "criterion": trace.spec.criterion,
            "gamma": trace.spec.gamma,
            "stop_threshold": trace.stop_threshold,
        },
    }
    if fixture_sha256 is not None:
        summary["fixture_sha256"] = fixture_sha256
    if extra:
        summary.update(extra)
    return summary


def write_json(path: str | Path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n")
    return path
