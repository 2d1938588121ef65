"""Conditional linear-Gaussian networks: OLS fitting, densities, and the BIC score.

Continuous nodes get one regression block per discrete-parent configuration;
discrete nodes get conditional probability tables over their discrete parents.
A continuous parent of a discrete node is allowed in the graph (the forced
elapsed-time -> prognosis arc produces one) but contributes nothing to the
local distribution or the score; fitting flags it with a warning.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .dataset import DeltaDataset
from .errors import CollinearityError, DataError, InsufficientDataError
from .graph import Dag

LOG_2PI = math.log(2.0 * math.pi)

# relative floor below which a residual variance is treated as exactly zero
_DEGENERATE_REL_TOL = 1e-10


@dataclass(frozen=True)
class GaussianBlock:
    intercept: float
    coefficients: tuple[float, ...]
    sd: float
    sd_unbiased: float
    n: int
    degenerate: bool = False
    fallback: bool = False

    def __post_init__(self):
        if self.sd < 0:
            raise DataError("negative residual sd")
        if self.sd == 0 and not self.degenerate:
            raise DataError("zero sd must be flagged degenerate")


@dataclass(frozen=True)
class LocalGaussian:
    node: str
    continuous_parents: tuple[str, ...]
    discrete_parents: tuple[str, ...]
    parent_levels: tuple[tuple[str, ...], ...]
    blocks: Mapping[tuple[str, ...], GaussianBlock]

    def block_for(self, row: Mapping[str, object]) -> GaussianBlock:
        key = tuple(str(row[p]) for p in self.discrete_parents)
        return self.blocks[key]

    def mean_for(self, row: Mapping[str, object]) -> float:
        block = self.block_for(row)
        mu = block.intercept
        for parent, coef in zip(self.continuous_parents, block.coefficients):
            mu += coef * float(row[parent])
        return mu


@dataclass(frozen=True)
class DiscreteBlock:
    probs: tuple[float, ...]
    n: int
    fallback: bool = False

    def __post_init__(self):
        if any(p < 0 for p in self.probs):
            raise DataError("negative probability")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise DataError("probabilities do not sum to 1")


@dataclass(frozen=True)
class LocalDiscrete:
    node: str
    states: tuple[str, ...]
    discrete_parents: tuple[str, ...]
    parent_levels: tuple[tuple[str, ...], ...]
    blocks: Mapping[tuple[str, ...], DiscreteBlock]

    def block_for(self, row: Mapping[str, object]) -> DiscreteBlock:
        key = tuple(str(row[p]) for p in self.discrete_parents)
        return self.blocks[key]


Local = LocalGaussian | LocalDiscrete


@dataclass(frozen=True)
class ClgNetwork:
    dag: Dag
    locals: Mapping[str, Local]
    sample_size: int

    def __post_init__(self):
        if set(self.locals) != set(self.dag.nodes):
            raise DataError("locals do not cover the graph's nodes")
        for node in self.dag.nodes:
            local = self.locals[node]
            parents = set(self.dag.parents(node))
            disc = {p for p in parents if isinstance(self.locals[p], LocalDiscrete)}
            cont = parents - disc
            if isinstance(local, LocalGaussian):
                if set(local.continuous_parents) != cont or set(local.discrete_parents) != disc:
                    raise DataError(f"parent lists of {node} do not match the graph")
            else:
                if set(local.discrete_parents) != disc:
                    raise DataError(f"discrete parent list of {node} does not match the graph")

    def is_discrete(self, node: str) -> bool:
        return isinstance(self.locals[node], LocalDiscrete)

    def levels(self, node: str) -> tuple[str, ...]:
        local = self.locals[node]
        if not isinstance(local, LocalDiscrete):
            raise DataError(f"{node} is not discrete")
        return local.states


def _ordered(names: Iterable[str], universe: tuple[str, ...]) -> tuple[str, ...]:
    wanted = set(names)
    return tuple(n for n in universe if n in wanted)


class LocalScorer:
    """Decomposable BIC machinery with memoized per-node local scores.

    Sufficient statistics (per discrete-parent partition: counts and the
    cross-moment matrix of the continuous columns) are cached so that scoring
    a candidate parent set costs a small dense solve, independent of n.
    """

    def __init__(self, data: DeltaDataset):
        self.data = data
        self.n = data.n
        self._cont_names = data.continuous_names
        self._cont_index = {name: i + 1 for i, name in enumerate(self._cont_names)}
        cols = [np.ones(self.n)] + [data.continuous[c] for c in self._cont_names]
        self._design = np.column_stack(cols) if self.n else np.zeros((0, len(cols)))
        self._codes = {}
        for name in data.discrete_names:
            lookup = {lv: i for i, lv in enumerate(data.levels[name])}
            self._codes[name] = np.array(
                [lookup[v] for v in data.discrete[name]], dtype=np.int64
            )
        self._partitions: dict[tuple[str, ...], list[tuple[tuple[str, ...], np.ndarray]]] = {}
        self._grams: dict[tuple[str, ...], list[tuple[int, np.ndarray]]] = {}
        self._cache: dict[tuple[str, frozenset[str]], float] = {}

    # -- partitions ---------------------------------------------------------

    def partition(self, disc_parents: tuple[str, ...]) -> list[tuple[tuple[str, ...], np.ndarray]]:
        """Row indices per discrete-parent configuration, in level-product order."""
        if disc_parents in self._partitions:
            return self._partitions[disc_parents]
        level_sets = [self.data.levels[p] for p in disc_parents]
        configs = list(itertools.product(*level_sets))
        if not disc_parents:
            result = [((), np.arange(self.n))]
        else:
            radix = np.zeros(self.n, dtype=np.int64)
            for p in disc_parents:
                radix = radix * len(self.data.levels[p]) + self._codes[p]
            order = np.argsort(radix, kind="stable")
            sorted_ids = radix[order]
            result = []
            for cid, config in enumerate(configs):
                lo = np.searchsorted(sorted_ids, cid, side="left")
                hi = np.searchsorted(sorted_ids, cid, side="right")
                result.append((config, order[lo:hi]))
        self._partitions[disc_parents] = result
        return result

    def _gram(self, disc_parents: tuple[str, ...]) -> list[tuple[int, np.ndarray]]:
        if disc_parents in self._grams:
            return self._grams[disc_parents]
        grams = []
        for _, rows in self.partition(disc_parents):
            if len(rows) == 0:
                grams.append((0, None))
                continue
            z = self._design[rows]
            grams.append((len(rows), z.T @ z))
        self._grams[disc_parents] = grams
        return grams

    def split_parents(self, parents: Iterable[str]) -> tuple[tuple[str, ...], tuple[str, ...]]:
        parents = set(parents)
        cont = _ordered([p for p in parents if not self.data.is_discrete(p)], self.data.order)
        disc = _ordered([p for p in parents if self.data.is_discrete(p)], self.data.order)
        return cont, disc

    # -- scores -------------------------------------------------------------

    def local_score(self, node: str, parents: Iterable[str]) -> float:
        """BIC contribution of one node given a parent set (higher is better)."""
        key = (node, frozenset(parents))
        if key in self._cache:
            return self._cache[key]
        cont, disc = self.split_parents(parents)
        if self.data.is_discrete(node):
            score = self._discrete_score(node, disc)
        else:
            score = self._gaussian_score(node, cont, disc)
        self._cache[key] = score
        return score

    def _gaussian_score(self, node: str, cont: tuple[str, ...], disc: tuple[str, ...]) -> float:
        idx = [0] + [self._cont_index[p] for p in cont]
        yi = self._cont_index[node]
        p = len(cont)
        loglik = 0.0
        unbounded = False
        n_params = 0
        for count, gram in self._gram(disc):
            if count == 0:
                continue
            if count < p + 2:
                raise InsufficientDataError(
                    f"node {node}: a parent configuration has only {count} rows "
                    f"(needs at least {p + 2})"
                )
            xtx = gram[np.ix_(idx, idx)]
            xty = gram[idx, yi]
            yty = float(gram[yi, yi])
            eig = np.linalg.eigvalsh(xtx)
            if eig[0] <= eig[-1] * 1e-10:
                raise CollinearityError(f"node {node}: rank-deficient design matrix")
            beta = np.linalg.solve(xtx, xty)
            rss = max(yty - float(xty @ beta), 0.0)
            sigma2 = rss / count
            if sigma2 <= _DEGENERATE_REL_TOL * (yty / count) + 1e-300:
                unbounded = True
            else:
                loglik += -0.5 * count * (LOG_2PI + math.log(sigma2) + 1.0)
            n_params += p + 2
        if unbounded:
            return math.inf
        return loglik - 0.5 * n_params * math.log(self.n)

    def _discrete_score(self, node: str, disc: tuple[str, ...]) -> float:
        states = self.data.levels[node]
        s = len(states)
        node_codes = self._codes[node]
        loglik = 0.0
        n_params = 0
        for config, rows in self.partition(disc):
            count = len(rows)
            if count == 0:
                continue
            m = np.bincount(node_codes[rows], minlength=s)
            nz = m[m > 0]
            loglik += float(np.sum(nz * (np.log(nz) - math.log(count))))
            n_params += s - 1
        return loglik - 0.5 * n_params * math.log(self.n)

    # -- fitting ------------------------------------------------------------

    def fit_local(self, node: str, parents: Iterable[str]) -> Local:
        cont, disc = self.split_parents(parents)
        if self.data.is_discrete(node):
            dropped = [p for p in parents if not self.data.is_discrete(p)]
            if dropped:
                warnings.warn(
                    f"{node}: continuous parents {sorted(dropped)} are structural only "
                    "and do not enter the conditional table"
                )
            return self._fit_discrete(node, disc)
        return self._fit_gaussian(node, cont, disc)

    def _fit_gaussian(self, node: str, cont: tuple[str, ...], disc: tuple[str, ...]) -> LocalGaussian:
        y_all = self.data.continuous[node]
        p = len(cont)
        x_cols = [self.data.continuous[c] for c in cont]
        blocks: dict[tuple[str, ...], GaussianBlock] = {}
        marginal: GaussianBlock | None = None
        for config, rows in self.partition(disc):
            count = len(rows)
            if count == 0:
                if marginal is None:
                    marginal = _marginal_gaussian(y_all, p)
                warnings.warn(
                    f"{node}: configuration {config} has no rows; "
                    "inheriting the marginal fit"
                )
                blocks[config] = marginal
                continue
            if count < p + 2:
                raise InsufficientDataError(
                    f"node {node}: configuration {config} has only {count} rows "
                    f"(needs at least {p + 2})"
                )
            y = y_all[rows]
            x = np.column_stack([np.ones(count)] + [c[rows] for c in x_cols])
            beta, _, rank, _ = np.linalg.lstsq(x, y, rcond=None)
            if rank < p + 1:
                raise CollinearityError(f"node {node}: rank-deficient design matrix")
            resid = y - x @ beta
            rss = float(resid @ resid)
            sigma2 = rss / count
            scale = float(y @ y) / count
            degenerate = sigma2 <= _DEGENERATE_REL_TOL * scale + 1e-300
            sd = 0.0 if degenerate else math.sqrt(sigma2)
            sd_unbiased = 0.0 if degenerate else math.sqrt(rss / (count - p - 1))
            blocks[config] = GaussianBlock(
                intercept=float(beta[0]),
                coefficients=tuple(float(b) for b in beta[1:]),
                sd=sd,
                sd_unbiased=sd_unbiased,
                n=count,
                degenerate=degenerate,
            )
        return LocalGaussian(
            node=node,
            continuous_parents=cont,
            discrete_parents=disc,
            parent_levels=tuple(self.data.levels[d] for d in disc),
            blocks=blocks,
        )

    def _fit_discrete(self, node: str, disc: tuple[str, ...]) -> LocalDiscrete:
        states = self.data.levels[node]
        s = len(states)
        node_codes = self._codes[node]
        blocks: dict[tuple[str, ...], DiscreteBlock] = {}
        marginal: DiscreteBlock | None = None
        for config, rows in self.partition(disc):
            count = len(rows)
            if count == 0:
                if marginal is None:
                    m = np.bincount(node_codes, minlength=s)
                    marginal = DiscreteBlock(
                        probs=tuple(float(v) / self.n for v in m), n=0, fallback=True
                    )
                warnings.warn(
                    f"{node}: configuration {config} has no rows; "
                    "inheriting the marginal frequencies"
                )
                blocks[config] = marginal
                continue
            m = np.bincount(node_codes[rows], minlength=s)
            blocks[config] = DiscreteBlock(
                probs=tuple(float(v) / count for v in m), n=count
            )
        return LocalDiscrete(
            node=node,
            states=states,
            discrete_parents=disc,
            parent_levels=tuple(self.data.levels[d] for d in disc),
            blocks=blocks,
        )


def _marginal_gaussian(y: np.ndarray, n_cont_parents: int) -> GaussianBlock:
    n = len(y)
    mean = float(y.mean())
    resid = y - mean
    sigma2 = float(resid @ resid) / n
    scale = float(y @ y) / n
    degenerate = sigma2 <= _DEGENERATE_REL_TOL * scale + 1e-300
    sd = 0.0 if degenerate else math.sqrt(sigma2)
    return GaussianBlock(
        intercept=mean,
        coefficients=(0.0,) * n_cont_parents,
        sd=sd,
        sd_unbiased=sd,
        n=0,
        degenerate=degenerate,
        fallback=True,
    )


def fit_parameters(g: Dag, d: DeltaDataset, scorer: LocalScorer | None = None) -> ClgNetwork:
    """Fit per-node OLS regressions and conditional tables for a structure."""
    if set(g.nodes) != set(d.order):
        raise DataError("graph nodes do not match the dataset columns")
    scorer = scorer if scorer is not None and scorer.data is d else LocalScorer(d)
    locals_: dict[str, Local] = {}
    for node in g.nodes:
        locals_[node] = scorer.fit_local(node, g.parents(node))
    return ClgNetwork(dag=g, locals=locals_, sample_size=d.n)


def bic_score(g: Dag, d: DeltaDataset, scorer: LocalScorer | None = None) -> float:
    """Network BIC: log-likelihood minus (k/2) log n, higher is better.

    Decomposes exactly as the sum of per-node local scores.
    """
    scorer = scorer if scorer is not None and scorer.data is d else LocalScorer(d)
    return sum(scorer.local_score(node, g.parents(node)) for node in g.nodes)


def log_likelihood(m: ClgNetwork, d: DeltaDataset) -> float:
    """Total log density of the rows under the fitted network.

    Returns -inf when a zero-sd block meets a nonzero residual or a zero
    probability meets an observed state; +inf when every such block is hit
    exactly (a degenerate but consistent fit).
    """
    if set(m.dag.nodes) != set(d.order):
        raise DataError("network nodes do not match the dataset columns")
    total = 0.0
    has_pos_inf = False
    row_view = {name: d.column(name) for name in d.order}
    for node in m.dag.nodes:
        local = m.locals[node]
        if isinstance(local, LocalGaussian):
            y = d.continuous[node]
            for config, rows in _config_rows(local.discrete_parents, local.parent_levels, row_view, d.n):
                if len(rows) == 0:
                    continue
                block = local.blocks[config]
                mu = np.full(len(rows), block.intercept)
                for parent, coef in zip(local.continuous_parents, block.coefficients):
                    mu += coef * row_view[parent][rows]
                resid = y[rows] - mu
                if block.sd == 0.0:
                    if np.any(np.abs(resid) > 1e-9 * (1.0 + np.abs(mu))):
                        return -math.inf
                    has_pos_inf = True
                else:
                    total += float(
                        np.sum(-0.5 * (LOG_2PI + 2.0 * math.log(block.sd))
                               - resid * resid / (2.0 * block.sd**2))
                    )
        else:
            codes = {s: i for i, s in enumerate(local.states)}
            obs = np.array([codes[v] for v in d.discrete[node]], dtype=np.int64)
            for config, rows in _config_rows(local.discrete_parents, local.parent_levels, row_view, d.n):
                if len(rows) == 0:
                    continue
                probs = np.asarray(local.blocks[config].probs)
                pr = probs[obs[rows]]
                if np.any(pr == 0.0):
                    return -math.inf
                total += float(np.sum(np.log(pr)))
    return math.inf if has_pos_inf else total


def _config_rows(disc_parents, parent_levels, row_view, n):
    if not disc_parents:
        yield (), np.arange(n)
        return
    for config in itertools.product(*parent_levels):
        mask = np.ones(n, dtype=bool)
        for parent, value in zip(disc_parents, config):
            mask &= row_view[parent] == value
        yield config, np.nonzero(mask)[0]


# -- serialization ----------------------------------------------------------


def model_to_json(m: ClgNetwork) -> str:
    locals_payload = {}
    for node, local in m.locals.items():
        if isinstance(local, LocalGaussian):
            locals_payload[node] = {
                "type": "gaussian",
                "continuous_parents": list(local.continuous_parents),
                "discrete_parents": list(local.discrete_parents),
                "parent_levels": [list(lv) for lv in local.parent_levels],
                "blocks": [
                    {
                        "config": list(config),
                        "intercept": b.intercept,
                        "coefficients": list(b.coefficients),
                        "sd": b.sd,
                        "sd_unbiased": b.sd_unbiased,
                        "n": b.n,
                        "degenerate": b.degenerate,
                        "fallback": b.fallback,
                    }
                    for config, b in local.blocks.items()
                ],
            }
        else:
            locals_payload[node] = {
                "type": "discrete",
                "states": list(local.states),
                "discrete_parents": list(local.discrete_parents),
                "parent_levels": [list(lv) for lv in local.parent_levels],
                "blocks": [
                    {
                        "config": list(config),
                        "probs": list(b.probs),
                        "n": b.n,
                        "fallback": b.fallback,
                    }
                    for config, b in local.blocks.items()
                ],
            }
    payload = {
        "nodes": list(m.dag.nodes),
        "arcs": [list(a) for a in sorted(m.dag.arcs)],
        "sample_size": m.sample_size,
        "locals": locals_payload,
    }
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def model_from_json(text: str) -> ClgNetwork:
    payload = json.loads(text)
    dag = Dag.build(payload["nodes"], [tuple(a) for a in payload["arcs"]])
    locals_: dict[str, Local] = {}
    for node, spec in payload["locals"].items():
        if spec["type"] == "gaussian":
            blocks = {
                tuple(b["config"]): GaussianBlock(
                    intercept=b["intercept"],
                    coefficients=tuple(b["coefficients"]),
                    sd=b["sd"],
                    sd_unbiased=b["sd_unbiased"],
                    n=b["n"],
                    degenerate=b["degenerate"],
                    fallback=b["fallback"],
                )
                for b in spec["blocks"]
            }
            locals_[node] = LocalGaussian(
                node=node,
                continuous_parents=tuple(spec["continuous_parents"]),
                discrete_parents=tuple(spec["discrete_parents"]),
                parent_levels=tuple(tuple(lv) for lv in spec["parent_levels"]),
                blocks=blocks,
            )
        else:
            blocks = {
                tuple(b["config"]): DiscreteBlock(
                    probs=tuple(b["probs"]), n=b["n"], fallback=b["fallback"]
                )
                for b in spec["blocks"]
            }
            locals_[node] = LocalDiscrete(
                node=node,
                states=tuple(spec["states"]),
                discrete_parents=tuple(spec["discrete_parents"]),
                parent_levels=tuple(tuple(lv) for lv in spec["parent_levels"]),
                blocks=blocks,
            )
    return ClgNetwork(dag=dag, locals=locals_, sample_size=payload["sample_size"])
