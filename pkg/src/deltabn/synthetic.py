"""Hand-built study-shaped network and demo data generation.

The network mirrors the consensus structure of a two-timepoint craniofacial
growth study: two discrete roots (treatment status and prognosis), an
elapsed-time root, and six difference features with unit residual sd and
coefficients of at least one in absolute value.
"""

from __future__ import annotations

import numpy as np

from .clg import ClgNetwork, DiscreteBlock, GaussianBlock, LocalDiscrete, LocalGaussian
from .dataset import (
    BINARY_TREATMENT_LEVELS,
    GROWTH_LEVELS,
    DeltaDataset,
    LongitudinalTable,
    SubjectRecord,
)
from .graph import Dag
from .inference import simulate

NODES = ("dANB", "dIMPA", "dPPPM", "dCoA", "dGoPg", "dCoGo", "dT", "Treatment", "Growth")

TRUE_ARCS = frozenset(
    {
        ("Treatment", "dCoA"),
        ("Treatment", "dANB"),
        ("Growth", "dANB"),
        ("Growth", "dCoGo"),
        ("dT", "dCoA"),
        ("dT", "dCoGo"),
        ("dCoGo", "dPPPM"),
        ("dANB", "dIMPA"),
        ("dPPPM", "dIMPA"),
        ("dCoA", "dGoPg"),
        ("dCoGo", "dGoPg"),
    }
)

_BASELINES = {
    "ANB": 4.0,
    "IMPA": 88.0,
    "PPPM": 28.0,
    "CoA": 85.0,
    "GoPg": 75.0,
    "CoGo": 55.0,
}


def _gauss(node, cont, disc, levels, blocks):
    return LocalGaussian(
        node=node,
        continuous_parents=cont,
        discrete_parents=disc,
        parent_levels=levels,
        blocks={
            cfg: GaussianBlock(
                intercept=b[0], coefficients=tuple(b[1:]), sd=1.0, sd_unbiased=1.0, n=0
            )
            for cfg, b in blocks.items()
        },
    )


def growth_study_network() -> ClgNetwork:
    """The synthetic ground truth for recovery and intervention experiments."""
    treatment = LocalDiscrete(
        node="Treatment",
        states=BINARY_TREATMENT_LEVELS,
        discrete_parents=(),
        parent_levels=(),
        blocks={(): DiscreteBlock(probs=(0.5, 0.5), n=0)},
    )
    growth = LocalDiscrete(
        node="Growth",
        states=GROWTH_LEVELS,
        discrete_parents=(),
        parent_levels=(),
        blocks={(): DiscreteBlock(probs=(0.55, 0.45), n=0)},
    )
    d_t = _gauss("dT", (), (), (), {(): (6.0,)})
    d_coa = _gauss(
        "dCoA",
        ("dT",),
        ("Treatment",),
        (BINARY_TREATMENT_LEVELS,),
        {("untreated",): (2.0, 1.0), ("treated",): (5.0, 1.0)},
    )
    d_anb = _gauss(
        "dANB",
        (),
        ("Treatment", "Growth"),
        (BINARY_TREATMENT_LEVELS, GROWTH_LEVELS),
        {
            ("untreated", "Good"): (-1.0,),
            ("untreated", "Bad"): (-3.0,),
            ("treated", "Good"): (1.5,),
            ("treated", "Bad"): (-0.5,),
        },
    )
    d_cogo = _gauss(
        "dCoGo",
        ("dT",),
        ("Growth",),
        (GROWTH_LEVELS,),
        {("Good",): (1.0, 1.0), ("Bad",): (3.0, 1.0)},
    )
    d_pppm = _gauss("dPPPM", ("dCoGo",), (), (), {(): (2.0, -1.0)})
    d_impa = _gauss("dIMPA", ("dANB", "dPPPM"), (), (), {(): (0.5, 1.5, 1.0)})
    d_gopg = _gauss("dGoPg", ("dCoA", "dCoGo"), (), (), {(): (-1.0, 1.0, 1.0)})
    return ClgNetwork(
        dag=Dag.build(NODES, TRUE_ARCS),
        locals={
            "Treatment": treatment,
            "Growth": growth,
            "dT": d_t,
            "dCoA": d_coa,
            "dANB": d_anb,
            "dCoGo": d_cogo,
            "dPPPM": d_pppm,
            "dIMPA": d_impa,
            "dGoPg": d_gopg,
        },
        sample_size=0,
    )


def simulate_dataset(n: int, seed: int | None = None) -> DeltaDataset:
    """Difference-table sample from the synthetic truth."""
    return simulate(growth_study_network(), n, seed)


def demo_longitudinal_table(n: int, seed: int | None = None) -> LongitudinalTable:
    """A raw two-visit table whose differences follow the synthetic truth.

    First-visit ages and baseline measurements are arbitrary but plausible;
    second-visit values are baseline plus the simulated difference.  The
    treated label is split at random between the two treated source codes.
    """
    rng = np.random.default_rng(seed)
    deltas = simulate(growth_study_network(), n, seed=rng.integers(2**32))
    t1 = rng.uniform(7.0, 9.0, size=n)
    dt = np.maximum(deltas.continuous["dT"], 0.5)
    subjects = []
    for i in range(n):
        m1 = {
            feature: base + rng.normal(0.0, 2.0)
            for feature, base in _BASELINES.items()
        }
        m2 = {f: m1[f] + float(deltas.continuous["d" + f][i]) for f in _BASELINES}
        if deltas.discrete["Treatment"][i] == "untreated":
            treatment = "NT"
        else:
            treatment = "TB" if rng.random() < 0.5 else "TG"
        subjects.append(
            SubjectRecord(
                id=f"S{i:04d}",
                t1=float(t1[i]),
                t2=float(t1[i] + dt[i]),
                m1=m1,
                m2=m2,
                treatment=treatment,
                growth=str(deltas.discrete["Growth"][i]),
            )
        )
    return LongitudinalTable(features=tuple(_BASELINES), subjects=tuple(subjects))


def demo_atlas_rows() -> list[tuple[str, float, float]]:
    """Reference-curve rows (feature, age, value) for the demo features."""
    rows = []
    for feature, base in _BASELINES.items():
        for age in range(5, 21):
            rows.append((feature, float(age), base + 0.4 * (age - 5)))
    return rows
