"""The explanation engine: synthesize, verify, refine.

Each round synthesizes the least candidate consistent with the accumulated
counterexamples and hands it to the statistical verifier. A verified
candidate is returned as a certified explanation; a refuted one contributes
fresh counterexamples; an exhausted grammar class means no explanation
exists in it. Budget exhaustion (wall-clock or iteration cap) reports the
last conjecture with a sampled accuracy estimate that carries no
(epsilon, delta) guarantee.

Reproducibility: a run's randomness comes from three PCG64 streams spawned
from the seed in a fixed layout (query-coverage calibration, the verify
loop, post-run estimation), so equal configurations and seeds produce
bit-equal results. Wall-clock timings are the only nondeterministic report
fields, and timeout-triggered budget stops naturally depend on them.
"""

from __future__ import annotations

import copy
import datetime
import json
import time
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import __version__
from .distribution import Distribution, ProductPerFeature, distribution_from_json
from .formula import Formula, compare, evaluate, render, size
from .model import Model, model_from_json
from .query import Query, query_from_json
from .synthesizer import (
    Grammar,
    Sample,
    SynthesisDeadlineError,
    synthesize,
    synthesize_general,
)
from .verifier import estimate_query_accuracy, test_suite_size, verify

OUTCOME_EXPLANATION = "explanation"
OUTCOME_NO_EXPLANATION = "no-explanation"
OUTCOME_BUDGET_TIMEOUT = "budget-timeout"
OUTCOME_BUDGET_ITERATIONS = "budget-iteration-cap"

_CALIBRATION_DRAWS = 1000
_CALIBRATION_MIN_HITS = 10  # 1% of the calibration batch

STRATEGIES = ("occam", "general")


class EngineError(RuntimeError):
    pass


class EngineInvariantError(EngineError):
    pass


class ReplayError(RuntimeError):
    pass


class ReplayMismatchError(ReplayError):
    pass


class LowQueryCoverageWarning(UserWarning):
    pass


@dataclass
class RunConfig:
    model: Model
    query: Query
    target_class: object
    grammar: Grammar
    distribution: Optional[Distribution] = None
    epsilon: float = 0.05
    delta: float = 0.05
    seed: int = 0
    timeout: float = 300.0
    max_iterations: int = 100000
    counterexample_batch: int = 1
    strategy: str = "occam"
    accuracy_samples: int = 2000
    feature_names: Optional[list] = None


@dataclass(frozen=True)
class IterationRecord:
    index: int
    conjecture: Formula
    suite_size: int
    tested: int
    counterexamples: tuple


@dataclass
class RunStats:
    iterations: int = 0
    total_test_inputs: int = 0
    counterexample_count: int = 0
    explanation_size: Optional[int] = None
    accuracy: Optional[float] = None
    accuracy_support: int = 0
    learner_seconds: float = 0.0
    verifier_seconds: float = 0.0
    wall_seconds: float = 0.0


@dataclass
class RunResult:
    outcome: str
    explanation: Optional[Formula]
    certified: bool
    stats: RunStats
    trace: list
    sample_entries: list
    config: RunConfig


def _validate_config(cfg: RunConfig):
    if not 0.0 < cfg.epsilon < 1.0 or not 0.0 < cfg.delta < 1.0:
        raise ValueError("epsilon and delta must lie in (0, 1)")
    if cfg.timeout <= 0:
        raise ValueError("timeout must be positive")
    if cfg.max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    if cfg.counterexample_batch < 1:
        raise ValueError("counterexample_batch must be >= 1")
    if cfg.strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}")
    arity = cfg.model.arity
    if cfg.query.arity not in (0, arity):
        raise ValueError(
            f"query arity {cfg.query.arity} does not match model arity {arity}"
        )
    for f in cfg.grammar.features:
        if f.index >= arity:
            raise ValueError(f"grammar feature index {f.index} exceeds model arity")
    if cfg.distribution is not None and cfg.distribution.arity != arity:
        raise ValueError(
            f"distribution arity {cfg.distribution.arity} does not match model arity"
        )
    if cfg.target_class not in cfg.model.classes:
        raise ValueError(
            f"target class {cfg.target_class!r} is not among the model classes"
        )


def _derived_distribution(cfg: RunConfig) -> Distribution:
    # Grammar features carry kinds; anything else defaults to a real in [0,1].
    kinds = {f.index: f.kind for f in cfg.grammar.features}
    specs = []
    for j in range(cfg.model.arity):
        if kinds.get(j) == "bool":
            specs.append(("categorical", {0: 0.5, 1: 0.5}))
        else:
            specs.append(("interval", 0.0, 1.0))
    return ProductPerFeature(specs)


def _calibrate_query_coverage(cfg: RunConfig, dist: Distribution, rng):
    hits = 0
    for _ in range(_CALIBRATION_DRAWS):
        if cfg.query.contains(dist.sample(rng)):
            hits += 1
    if hits < _CALIBRATION_MIN_HITS:
        warnings.warn(
            f"query region captured {hits}/{_CALIBRATION_DRAWS} calibration draws;"
            " verification will rarely exercise it",
            LowQueryCoverageWarning,
            stacklevel=3,
        )


def explain(cfg: RunConfig) -> RunResult:
    _validate_config(cfg)
    dist = cfg.distribution if cfg.distribution is not None else _derived_distribution(cfg)

    calib_seq, loop_seq, post_seq = np.random.SeedSequence(cfg.seed).spawn(3)
    _calibrate_query_coverage(cfg, dist, np.random.Generator(np.random.PCG64(calib_seq)))
    rng = np.random.Generator(np.random.PCG64(loop_seq))

    sample = Sample()
    trace = []
    stats = RunStats()
    start = time.perf_counter()
    deadline = start + cfg.timeout
    hard_deadline = start + 2.0 * cfg.timeout
    conjecture: Optional[Formula] = None
    outcome = None
    iteration = 0

    while True:
        if time.perf_counter() >= deadline:
            outcome = OUTCOME_BUDGET_TIMEOUT
            break
        t0 = time.perf_counter()
        try:
            if cfg.strategy == "occam":
                candidate = synthesize(sample, cfg.grammar, deadline=hard_deadline)
            else:
                candidate = synthesize_general(sample, cfg.grammar)
        except SynthesisDeadlineError:
            stats.learner_seconds += time.perf_counter() - t0
            outcome = OUTCOME_BUDGET_TIMEOUT
            break
        stats.learner_seconds += time.perf_counter() - t0

        if candidate is None:
            if cfg.strategy != "occam":
                # The cover heuristic is incomplete, so coming up empty is a
                # bounds problem, not a proof that the class has no member.
                raise EngineError(
                    "general strategy could not cover the sample within the"
                    " grammar bounds; raise maxClauses/maxLiteralsPerClause"
                    " or use the occam strategy"
                )
            outcome = OUTCOME_NO_EXPLANATION
            conjecture = None
            break
        if (
            cfg.strategy == "occam"
            and conjecture is not None
            and compare(conjecture, candidate) != -1
        ):
            raise EngineInvariantError(
                f"conjecture order violated: {render(conjecture)} !< {render(candidate)}"
            )
        conjecture = candidate

        if time.perf_counter() >= deadline:
            outcome = OUTCOME_BUDGET_TIMEOUT
            break
        if iteration + 1 > cfg.max_iterations:
            outcome = OUTCOME_BUDGET_ITERATIONS
            break
        iteration += 1

        t0 = time.perf_counter()
        result = verify(
            conjecture,
            cfg.model,
            cfg.query,
            cfg.target_class,
            dist,
            cfg.epsilon,
            cfg.delta,
            iteration,
            rng,
            batch_limit=cfg.counterexample_batch,
        )
        stats.verifier_seconds += time.perf_counter() - t0
        stats.total_test_inputs += result.tested_count
        trace.append(
            IterationRecord(
                index=iteration,
                conjecture=conjecture,
                suite_size=result.suite_size,
                tested=result.tested_count,
                counterexamples=result.counterexamples,
            )
        )
        if result.passed:
            outcome = OUTCOME_EXPLANATION
            break
        for x, label in result.counterexamples:
            if not sample.add(x, label):
                raise EngineInvariantError(
                    f"counterexample {x} was already in the sample"
                )

    stats.iterations = iteration
    stats.counterexample_count = len(sample)
    certified = outcome == OUTCOME_EXPLANATION
    explanation = conjecture if outcome != OUTCOME_NO_EXPLANATION else None
    if explanation is not None:
        stats.explanation_size = size(explanation)
        if cfg.accuracy_samples > 0:
            post_rng = np.random.Generator(np.random.PCG64(post_seq))
            accuracy, support = estimate_query_accuracy(
                explanation,
                cfg.model,
                cfg.query,
                cfg.target_class,
                dist,
                post_rng,
                cfg.accuracy_samples,
            )
            stats.accuracy = accuracy
            stats.accuracy_support = support
    stats.wall_seconds = time.perf_counter() - start
    return RunResult(
        outcome=outcome,
        explanation=explanation,
        certified=certified,
        stats=stats,
        trace=trace,
        sample_entries=sample.entries,
        config=cfg,
    )


# --- reports and replay -------------------------------------------------------

VOLATILE_STAT_KEYS = (
    "learnerSeconds",
    "verifierSeconds",
    "wallSeconds",
    "learnerShare",
    "verifierShare",
)


def run_report(result: RunResult) -> dict:
    cfg = result.config
    names = cfg.feature_names
    stats = result.stats
    measured = stats.learner_seconds + stats.verifier_seconds
    report = {
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "seed": cfg.seed,
        "outcome": result.outcome,
        "certified": result.certified,
        "explanation": render(result.explanation) if result.explanation else None,
        "stats": {
            "iterations": stats.iterations,
            "testInputs": stats.total_test_inputs,
            "counterexamples": stats.counterexample_count,
            "size": stats.explanation_size,
            "accuracy": stats.accuracy,
            "accuracySupport": stats.accuracy_support,
            "learnerSeconds": stats.learner_seconds,
            "verifierSeconds": stats.verifier_seconds,
            "wallSeconds": stats.wall_seconds,
            "learnerShare": stats.learner_seconds / measured if measured else None,
            "verifierShare": stats.verifier_seconds / measured if measured else None,
        },
        "config": {
            "model": cfg.model.to_json(),
            "query": cfg.query.to_json(),
            "targetClass": cfg.target_class,
            "grammar": cfg.grammar.to_json(),
            "distribution": (
                cfg.distribution.to_json() if cfg.distribution is not None else None
            ),
            "epsilon": cfg.epsilon,
            "delta": cfg.delta,
            "timeout": cfg.timeout,
            "maxIterations": cfg.max_iterations,
            "counterexampleBatch": cfg.counterexample_batch,
            "strategy": cfg.strategy,
            "accuracySamples": cfg.accuracy_samples,
            "featureNames": list(names) if names else None,
        },
        "trace": [
            {
                "iteration": rec.index,
                "conjecture": render(rec.conjecture),
                "suiteSize": rec.suite_size,
                "tested": rec.tested,
                "counterexamples": [
                    {"x": list(x), "label": label} for x, label in rec.counterexamples
                ],
            }
            for rec in result.trace
        ],
        "sample": [{"x": list(x), "label": label} for x, label in result.sample_entries],
    }
    if names and result.explanation is not None:
        report["explanationNamed"] = render(result.explanation, names)
    return report


def stable_report(report: dict) -> dict:
    """Report copy with the declared volatile fields removed."""
    out = copy.deepcopy(report)
    out.pop("timestamp", None)
    for key in VOLATILE_STAT_KEYS:
        out.get("stats", {}).pop(key, None)
    return out


def write_report(report: dict, path: str):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def config_from_report(config: dict, seed: int) -> RunConfig:
    model = model_from_json(config["model"])
    names = config.get("featureNames")
    query = query_from_json(config["query"], model.arity, names)
    grammar = Grammar.from_json(config["grammar"])
    dist_spec = config.get("distribution")
    distribution = distribution_from_json(dist_spec) if dist_spec else None
    target = config["targetClass"]
    return RunConfig(
        model=model,
        query=query,
        target_class=target,
        grammar=grammar,
        distribution=distribution,
        epsilon=config["epsilon"],
        delta=config["delta"],
        seed=seed,
        timeout=config["timeout"],
        max_iterations=config["maxIterations"],
        counterexample_batch=config["counterexampleBatch"],
        strategy=config.get("strategy", "occam"),
        accuracy_samples=config.get("accuracySamples", 0),
        feature_names=names,
    )


def replay(path: str) -> RunResult:
    """Re-run a recorded report and check bit-for-bit agreement.

    Deterministic for runs that ended with an explanation, no-explanation,
    or the iteration cap; wall-clock timeouts cannot replay exactly and
    raise ReplayMismatchError when they diverge.
    """
    with open(path, "r", encoding="utf-8") as fh:
        recorded = json.load(fh)
    if recorded.get("version") != __version__:
        raise ReplayError(
            f"report version {recorded.get('version')!r} does not match {__version__!r}"
        )
    cfg = config_from_report(recorded["config"], recorded["seed"])
    result = explain(cfg)
    fresh = run_report(result)
    if stable_report(fresh) != stable_report(recorded):
        raise ReplayMismatchError("replayed run differs from the recorded report")
    return result


# --- invariant checking ---------------------------------------------------


def check_run_invariants(result: RunResult):
    """Re-derive the loop invariants from a finished run's trace.

    Raises EngineInvariantError on the first violation: conjectures must be
    consistent with the sample they were synthesized from, strictly
    increasing in the candidate order (occam strategy), counterexamples must
    lie in the query region, violate the explanation condition for their
    conjecture, carry the corrective label, and be genuinely new; distinct
    conjectures must disagree somewhere on the collected points.
    """
    cfg = result.config
    seen = []
    seen_set = set()
    conjectures = []
    previous = None
    for rec in result.trace:
        f = rec.conjecture
        for x, label in seen:
            if evaluate(f, x) != bool(label):
                raise EngineInvariantError(
                    f"iteration {rec.index}: conjecture inconsistent with sample point {x}"
                )
        if previous is not None and cfg.strategy == "occam":
            if compare(previous, f) != -1:
                raise EngineInvariantError(
                    f"iteration {rec.index}: conjecture did not increase in order"
                )
        for x, label in rec.counterexamples:
            if not cfg.query.contains(x):
                raise EngineInvariantError(
                    f"iteration {rec.index}: counterexample outside the query region"
                )
            satisfied = evaluate(f, x)
            is_target = cfg.model.classify(x) == cfg.target_class
            if satisfied == is_target:
                raise EngineInvariantError(
                    f"iteration {rec.index}: counterexample is not a violation"
                )
            if label != (0 if satisfied else 1):
                raise EngineInvariantError(
                    f"iteration {rec.index}: counterexample label {label} is wrong"
                )
            key = (tuple(x), label)
            if key in seen_set or (tuple(x), 1 - label) in seen_set:
                raise EngineInvariantError(
                    f"iteration {rec.index}: sample did not strictly grow"
                )
            seen.append((x, label))
            seen_set.add(key)
        previous = f
        conjectures.append(f)
    points = [x for x, _ in seen]
    for i in range(len(conjectures)):
        for j in range(i + 1, len(conjectures)):
            if points and all(
                evaluate(conjectures[i], x) == evaluate(conjectures[j], x)
                for x in points
            ):
                raise EngineInvariantError(
                    f"conjectures {i + 1} and {j + 1} agree on every collected point"
                )
    # suite sizes must follow the schedule
    for rec in result.trace:
        expected = test_suite_size(cfg.epsilon, cfg.delta, rec.index)
        if rec.suite_size != expected:
            raise EngineInvariantError(
                f"iteration {rec.index}: suite size {rec.suite_size} != {expected}"
            )
