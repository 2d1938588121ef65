import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deltabn.dataset import (
    ReferenceAtlas,
    TableSchema,
    adjust_with_atlas,
    compute_deltas,
    load_atlas,
    load_table,
    write_table,
)
from deltabn.errors import DataError

HEADER = "id,t1,t2,treatment,growth,ANB_t1,ANB_t2,PPPM_t1,PPPM_t2"


def table_from(*rows):
    return load_table(io.StringIO("\n".join([HEADER, *rows])))


def test_minimal_table():
    t = table_from("p1,8,14,NT,Good,4,2,28,29")
    assert len(t) == 1
    assert t.features == ("ANB", "PPPM")
    assert t.subjects[0].m2["ANB"] == 2.0


def test_equal_times_rejected_with_row_index():
    with pytest.raises(DataError, match="non-positive dT at row 2"):
        table_from("p1,8,14,NT,Good,4,2,28,29", "p2,9,9,NT,Good,4,2,28,29")


def test_full_cohort_size_and_features():
    features = ["ANB", "IMPA", "PPPM", "CoA", "GoPg", "CoGo"]
    header = "id,t1,t2,treatment,growth," + ",".join(
        f"{f}_t1,{f}_t2" for f in features
    )
    rows = [
        f"p{i},8,14,NT,Good," + ",".join(["1,2"] * len(features)) for i in range(147)
    ]
    t = load_table(io.StringIO("\n".join([header, *rows])))
    assert len(t) == 147
    assert len(t.features) == 6


@pytest.mark.parametrize(
    "row,message",
    [
        ("p1,8,14,NT,Good,4,oops,28,29", "non-numeric value 'oops' in column ANB_t2 at row 1"),
        ("p1,8,14,XX,Good,4,2,28,29", "unknown treatment level 'XX' at row 1"),
        ("p1,8,14,NT,Fine,4,2,28,29", "unknown growth level 'Fine' at row 1"),
        ("p1,8,14,NT,Good,4,2,28,", "missing value in column PPPM_t2 at row 1"),
    ],
)
def test_malformed_rows_are_diagnosed(row, message):
    with pytest.raises(DataError, match=message):
        table_from(row)


def test_missing_column_rejected():
    with pytest.raises(DataError, match="missing column treatment"):
        load_table(io.StringIO("id,t1,t2,growth,ANB_t1,ANB_t2\np1,8,14,Good,4,2"))


def test_unpaired_feature_column_rejected():
    with pytest.raises(DataError, match="missing column ANB_t2"):
        load_table(io.StringIO("id,t1,t2,treatment,growth,ANB_t1\np1,8,14,NT,Good,4"))


def test_compute_deltas_direct_subtraction():
    t = table_from("p1,8,14,NT,Good,4,2,28,29")
    d = compute_deltas(t)
    assert d.continuous["dANB"][0] == -2.0
    assert d.continuous["dT"][0] == 6.0
    assert d.continuous["dPPPM"][0] == 1.0


def test_binary_coding_merges_treated_levels():
    t = table_from("p1,8,14,TG,Good,4,2,28,29", "p2,8,14,TB,Bad,4,2,28,29",
                   "p3,8,14,NT,Bad,4,2,28,29")
    d = compute_deltas(t, treatment_coding="binary")
    assert list(d.discrete["Treatment"]) == ["treated", "treated", "untreated"]
    d3 = compute_deltas(t, treatment_coding="three_level")
    assert list(d3.discrete["Treatment"]) == ["TG", "TB", "NT"]


def test_zero_change_rows_keep_positive_dt():
    t = table_from("p1,8,14,NT,Good,4,4,28,28")
    d = compute_deltas(t)
    assert d.continuous["dANB"][0] == 0.0
    assert d.continuous["dT"][0] > 0


def test_write_then_load_round_trip(tmp_path):
    t = table_from("p1,8.25,14.5,TB,Bad,4.125,2.5,28.0,29.75")
    buf = io.StringIO()
    write_table(t, buf)
    again = load_table(io.StringIO(buf.getvalue()))
    assert again == t


measurements = st.floats(min_value=-500, max_value=500, allow_nan=False)


@given(
    m1=st.lists(measurements, min_size=1, max_size=6),
    deltas=st.lists(measurements, min_size=6, max_size=6),
)
def test_delta_reconstruction_within_one_rounding_step(m1, deltas):
    # m1 + (m2 - m1) must reproduce m2 to within one float rounding
    m1 = np.asarray(m1)
    m2 = m1 + np.asarray(deltas[: len(m1)])
    recovered = m1 + (m2 - m1)
    assert np.allclose(recovered, m2, rtol=1e-12, atol=1e-9)


# -- atlas --------------------------------------------------------------------

ATLAS_CSV = "feature,age,value\nANB,8,78\nANB,9,80\nPPPM,8,20\nPPPM,9,21\n"


def test_atlas_exact_age_lookup():
    atlas = load_atlas(io.StringIO(ATLAS_CSV))
    assert atlas.reference("ANB", 8.0) == 78.0
    t = table_from("p1,8,9,NT,Good,80,80,20,21")
    adjusted = adjust_with_atlas(t, atlas)
    assert adjusted.subjects[0].m1["ANB"] == 2.0


def test_atlas_linear_interpolation_hand_value():
    # age 8.5 between (8 -> 78) and (9 -> 80) gives reference 79
    atlas = load_atlas(io.StringIO(ATLAS_CSV))
    assert atlas.reference("ANB", 8.5) == 79.0
    t = table_from("p1,8.5,9,NT,Good,85,80,20,21")
    adjusted = adjust_with_atlas(t, atlas)
    assert adjusted.subjects[0].m1["ANB"] == pytest.approx(85 - 79)


def test_atlas_clamps_outside_age_range():
    atlas = load_atlas(io.StringIO(ATLAS_CSV))
    assert atlas.reference("ANB", 5.0) == 78.0
    assert atlas.reference("ANB", 30.0) == 80.0


def test_atlas_missing_feature_is_named():
    atlas = load_atlas(io.StringIO("feature,age,value\nANB,8,78\nANB,9,80\n"))
    t = table_from("p1,8,9,NT,Good,80,80,20,21")
    with pytest.raises(DataError, match="PPPM"):
        adjust_with_atlas(t, atlas)


def test_atlas_ages_must_increase():
    with pytest.raises(DataError, match="strictly increasing"):
        load_atlas(io.StringIO("feature,age,value\nANB,8,78\nANB,8,80\n"))


def test_adjust_then_deltas_commutes_with_reference_difference():
    rng = np.random.default_rng(11)
    rows = []
    for i in range(40):
        t1 = rng.uniform(6, 12)
        t2 = t1 + rng.uniform(1, 6)
        vals = rng.uniform(-50, 90, size=4)
        rows.append(f"p{i},{t1},{t2},NT,Good,{vals[0]},{vals[1]},{vals[2]},{vals[3]}")
    table = table_from(*rows)
    atlas = load_atlas(
        io.StringIO(
            "feature,age,value\n"
            + "\n".join(f"ANB,{a},{0.5 * a}" for a in range(5, 21))
            + "\n"
            + "\n".join(f"PPPM,{a},{30 - 0.3 * a}" for a in range(5, 21))
        )
    )
    direct = compute_deltas(adjust_with_atlas(table, atlas))
    plain = compute_deltas(table)
    for feature in ("ANB", "PPPM"):
        ref_diff = np.array(
            [
                atlas.reference(feature, rec.t2) - atlas.reference(feature, rec.t1)
                for rec in table.subjects
            ]
        )
        np.testing.assert_allclose(
            direct.continuous["d" + feature],
            plain.continuous["d" + feature] - ref_diff,
            rtol=1e-12,
            atol=1e-9,
        )
