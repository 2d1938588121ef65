"""Sampling and closed-form inference on conditional linear-Gaussian networks.

Queries use logic sampling: draw ancestral samples, keep those matching the
evidence, and estimate the event frequency (or a target's mean) among the
kept samples.  Interventions mutilate the graph by cutting the arcs into the
fixed node.
"""

from __future__ import annotations

import itertools
import json
import math
import re
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .clg import ClgNetwork, DiscreteBlock, GaussianBlock, LocalDiscrete, LocalGaussian
from .dataset import DeltaDataset
from .errors import DataError, InfeasibleEvidenceError
from .graph import Dag

DEFAULT_EPSILON = 0.5


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise DataError(f"empty interval [{self.lo}, {self.hi}]")

    def contains(self, values: np.ndarray) -> np.ndarray:
        return (values >= self.lo) & (values <= self.hi)


@dataclass(frozen=True)
class Evidence:
    """Per-variable conditions: a discrete value or a closed interval."""

    conditions: Mapping[str, str | Interval]

    @classmethod
    def of(cls, **conditions) -> "Evidence":
        return cls(conditions=dict(conditions))

    @classmethod
    def approx(cls, variable: str, value: float, epsilon: float = DEFAULT_EPSILON) -> "Evidence":
        return cls(conditions={variable: Interval(value - epsilon, value + epsilon)})

    def merged(self, other: "Evidence") -> "Evidence":
        merged = dict(self.conditions)
        merged.update(other.conditions)
        return Evidence(conditions=merged)

    def mask(self, samples: DeltaDataset) -> np.ndarray:
        keep = np.ones(samples.n, dtype=bool)
        for name, condition in self.conditions.items():
            if name not in samples.order:
                raise DataError(f"unknown variable {name}")
            if isinstance(condition, Interval):
                if name not in samples.continuous:
                    raise DataError(f"interval condition on discrete variable {name}")
                keep &= condition.contains(samples.continuous[name])
            else:
                if name not in samples.discrete:
                    raise DataError(f"discrete condition on continuous variable {name}")
                keep &= samples.discrete[name] == condition
        return keep


_ITEM_RE = re.compile(
    r"^\s*(?P<var>[^\s=~]+)\s*(?:"
    r"=\s*(?P<value>.+?)|"
    r"~=\s*(?P<approx>[-+0-9.eE]+)|"
    r"in\s*\[\s*(?P<lo>[-+0-9.eE]+)\s*,\s*(?P<hi>[-+0-9.eE]+)\s*\]"
    r")\s*$"
)


def parse_evidence(text: str, epsilon: float = DEFAULT_EPSILON) -> Evidence:
    """Parse strings like ``Treatment=treated,dT in [5,7],dANB ~= 0``."""
    conditions: dict[str, str | Interval] = {}
    for item in _split_items(text):
        match = _ITEM_RE.match(item)
        if not match:
            raise DataError(f"cannot parse condition {item!r}")
        var = match.group("var")
        if match.group("lo") is not None:
            conditions[var] = Interval(float(match.group("lo")), float(match.group("hi")))
        elif match.group("approx") is not None:
            value = float(match.group("approx"))
            conditions[var] = Interval(value - epsilon, value + epsilon)
        else:
            conditions[var] = match.group("value").strip()
    return Evidence(conditions=conditions)


def _split_items(text: str) -> list[str]:
    items = []
    depth = 0
    current = []
    for ch in text:
        if ch == "[":
            depth += 1
        elif ch == "]":
            depth -= 1
        if ch == "," and depth == 0:
            items.append("".join(current))
            current = []
        else:
            current.append(ch)
    if current:
        items.append("".join(current))
    return [item for item in items if item.strip()]


@dataclass(frozen=True)
class QueryResult:
    kind: str  # "probability" or "expectation"
    estimate: float | None
    matched_evidence: int
    matched_event: int | None
    total: int
    standard_error: float | None

    def __post_init__(self):
        if self.matched_event is not None:
            if not 0 <= self.matched_event <= self.matched_evidence <= self.total:
                raise DataError("inconsistent sample counts")

    @property
    def no_matches(self) -> bool:
        return self.matched_evidence == 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "kind": self.kind,
                "estimate": self.estimate,
                "matched_evidence": self.matched_evidence,
                "matched_event": self.matched_event,
                "total_samples": self.total,
                "standard_error": self.standard_error,
            },
            sort_keys=True,
            indent=2,
        ) + "\n"


def simulate(m: ClgNetwork, n: int, seed: int | None = None) -> DeltaDataset:
    """Draw n rows by ancestral sampling.

    One RNG call per node (in topological order) keeps the output
    deterministic for a given seed regardless of block layout.
    """
    rng = np.random.default_rng(seed)
    columns_f: dict[str, np.ndarray] = {}
    columns_d: dict[str, np.ndarray] = {}
    levels: dict[str, tuple[str, ...]] = {}
    for node in m.dag.topological_order():
        local = m.locals[node]
        if isinstance(local, LocalDiscrete):
            u = rng.random(n)
            out = np.empty(n, dtype=object)
            for config, rows in _config_masks(local, columns_d, n):
                if len(rows) == 0:
                    continue
                cum = np.cumsum(local.blocks[config].probs)
                idx = np.minimum(
                    np.searchsorted(cum, u[rows], side="right"), len(local.states) - 1
                )
                out[rows] = np.array(local.states, dtype=object)[idx]
            columns_d[node] = out
            levels[node] = local.states
        else:
            z = rng.standard_normal(n)
            out_f = np.empty(n, dtype=float)
            for config, rows in _config_masks(local, columns_d, n):
                if len(rows) == 0:
                    continue
                block = local.blocks[config]
                mu = np.full(len(rows), block.intercept)
                for parent, coef in zip(local.continuous_parents, block.coefficients):
                    mu += coef * columns_f[parent][rows]
                out_f[rows] = mu + block.sd * z[rows]
            columns_f[node] = out_f
    return DeltaDataset(
        order=m.dag.nodes,
        continuous=columns_f,
        discrete=columns_d,
        levels=levels,
    )


def _config_masks(local, discrete_columns, n):
    if not local.discrete_parents:
        yield (), np.arange(n)
        return
    for config in itertools.product(*local.parent_levels):
        mask = np.ones(n, dtype=bool)
        for parent, value in zip(local.discrete_parents, config):
            mask &= discrete_columns[parent] == value
        yield config, np.nonzero(mask)[0]


def query(
    m: ClgNetwork,
    event: Evidence,
    evidence: Evidence | None = None,
    n: int = 10_000,
    seed: int | None = None,
) -> QueryResult:
    """Logic-sampling estimate of P(event | evidence).

    Zero evidence matches produce an explicit no-matches result with a None
    estimate rather than a 0/0.
    """
    samples = simulate(m, n, seed)
    ev_mask = evidence.mask(samples) if evidence is not None else np.ones(n, dtype=bool)
    q_mask = event.mask(samples) & ev_mask
    n_ev = int(ev_mask.sum())
    n_q = int(q_mask.sum())
    if n_ev == 0:
        return QueryResult("probability", None, 0, 0, n, None)
    p = n_q / n_ev
    se = math.sqrt(p * (1.0 - p) / n_ev)
    return QueryResult("probability", p, n_ev, n_q, n, se)


def expectation(
    m: ClgNetwork,
    target: str,
    evidence: Evidence | None = None,
    n: int = 10_000,
    seed: int | None = None,
) -> QueryResult:
    """Conditional mean of a continuous target over evidence-matching samples."""
    samples = simulate(m, n, seed)
    if target not in samples.continuous:
        raise DataError(f"expectation target {target} must be continuous")
    ev_mask = evidence.mask(samples) if evidence is not None else np.ones(n, dtype=bool)
    n_ev = int(ev_mask.sum())
    if n_ev == 0:
        return QueryResult("expectation", None, 0, None, n, None)
    values = samples.continuous[target][ev_mask]
    se = float(values.std(ddof=0)) / math.sqrt(n_ev) if n_ev > 1 else None
    return QueryResult("expectation", float(values.mean()), n_ev, None, n, se)


def intervene(m: ClgNetwork, node: str, value) -> ClgNetwork:
    """Fix a node from outside: cut its incoming arcs and replace its local.

    ``value`` is a number (continuous point mass), a state name (discrete
    point mass), or a ready-made parentless local distribution.
    """
    if node not in m.dag.nodes:
        raise DataError(f"unknown node {node}")
    local = m.locals[node]
    if isinstance(value, (LocalGaussian, LocalDiscrete)):
        if value.discrete_parents or getattr(value, "continuous_parents", ()):
            raise DataError("an intervention distribution must have no parents")
        new_local = value
    elif isinstance(local, LocalGaussian):
        new_local = LocalGaussian(
            node=node,
            continuous_parents=(),
            discrete_parents=(),
            parent_levels=(),
            blocks={(): GaussianBlock(
                intercept=float(value),
                coefficients=(),
                sd=0.0,
                sd_unbiased=0.0,
                n=0,
                degenerate=True,
            )},
        )
    else:
        state = str(value)
        if state not in local.states:
            raise DataError(f"unknown state {state!r} for {node}")
        probs = tuple(1.0 if s == state else 0.0 for s in local.states)
        new_local = LocalDiscrete(
            node=node,
            states=local.states,
            discrete_parents=(),
            parent_levels=(),
            blocks={(): DiscreteBlock(probs=probs, n=0)},
        )
    arcs = frozenset(a for a in m.dag.arcs if a[1] != node)
    locals_ = dict(m.locals)
    locals_[node] = new_local
    return ClgNetwork(
        dag=Dag(nodes=m.dag.nodes, arcs=arcs),
        locals=locals_,
        sample_size=m.sample_size,
    )


def predict_node(m: ClgNetwork, target: str, row: Mapping[str, object]) -> float | str:
    """Best single-node prediction given every other variable observed.

    Continuous targets: the posterior mean, solved in closed form from the
    jointly quadratic log-density terms of the target and its children.
    Discrete targets: the state maximizing prior times child densities.
    """
    if target not in m.dag.nodes:
        raise DataError(f"unknown node {target}")
    missing = [v for v in m.dag.nodes if v != target and v not in row]
    if missing:
        raise DataError(f"missing evidence for {missing[0]}")
    if m.is_discrete(target):
        return _predict_discrete(m, target, row)
    return _predict_continuous(m, target, row)


def _children_locals(m: ClgNetwork, target: str):
    for child in m.dag.children(target):
        yield child, m.locals[child]


def _predict_continuous(m: ClgNetwork, target: str, row: Mapping[str, object]) -> float:
    local = m.locals[target]
    block = local.block_for(row)
    mu_own = block.intercept + sum(
        coef * float(row[parent])
        for parent, coef in zip(local.continuous_parents, block.coefficients)
    )
    pinned: list[float] = []
    precision = 0.0
    weighted = 0.0
    if block.sd == 0.0:
        pinned.append(mu_own)
    else:
        precision += 1.0 / block.sd**2
        weighted += mu_own / block.sd**2
    for child, child_local in _children_locals(m, target):
        if isinstance(child_local, LocalDiscrete):
            continue  # structural arc only; no density term in the target
        child_block = child_local.block_for(row)
        coef_on_target = 0.0
        rest = child_block.intercept
        for parent, coef in zip(child_local.continuous_parents, child_block.coefficients):
            if parent == target:
                coef_on_target = coef
            else:
                rest += coef * float(row[parent])
        observed = float(row[child])
        if child_block.sd == 0.0:
            if coef_on_target == 0.0:
                if abs(observed - rest) > 1e-9 * (1.0 + abs(rest)):
                    raise InfeasibleEvidenceError(
                        f"zero-sd child {child} contradicts the evidence"
                    )
                continue
            pinned.append((observed - rest) / coef_on_target)
        elif coef_on_target != 0.0:
            precision += coef_on_target**2 / child_block.sd**2
            weighted += coef_on_target * (observed - rest) / child_block.sd**2
    if pinned:
        first = pinned[0]
        for other in pinned[1:]:
            if abs(other - first) > 1e-6 * (1.0 + abs(first)):
                raise InfeasibleEvidenceError(
                    f"deterministic relations disagree about {target}"
                )
        return first
    return weighted / precision


def _predict_discrete(m: ClgNetwork, target: str, row: Mapping[str, object]) -> str:
    local = m.locals[target]
    block = local.block_for(row)
    best_state = local.states[0]
    best_score = -math.inf
    for idx, state in enumerate(local.states):
        candidate = dict(row)
        candidate[target] = state
        prior = block.probs[idx]
        score = math.log(prior) if prior > 0 else -math.inf
        for child, child_local in _children_locals(m, target):
            if score == -math.inf:
                break
            child_block = child_local.block_for(candidate)
            if isinstance(child_local, LocalDiscrete):
                p = child_block.probs[child_local.states.index(str(row[child]))]
                score += math.log(p) if p > 0 else -math.inf
            else:
                observed = float(row[child])
                mu = child_block.intercept + sum(
                    coef * float(candidate[parent])
                    for parent, coef in zip(
                        child_local.continuous_parents, child_block.coefficients
                    )
                )
                if child_block.sd == 0.0:
                    if abs(observed - mu) > 1e-9 * (1.0 + abs(mu)):
                        score = -math.inf
                else:
                    score += -0.5 * (
                        math.log(2.0 * math.pi * child_block.sd**2)
                        + (observed - mu) ** 2 / child_block.sd**2
                    )
        if score > best_score:
            best_score = score
            best_state = state
    if best_score == -math.inf:
        raise InfeasibleEvidenceError(f"no state of {target} is consistent with the evidence")
    return best_state
