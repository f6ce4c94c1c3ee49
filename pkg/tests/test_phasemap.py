import math
import xml.etree.ElementTree as ET

import numpy as np
import pytest
from hypothesis import given, strategies as st

from mottlab import HARD_CORE, LatticeSpec, ModelParams, fock
from mottlab.phasemap import (
    LOWER,
    MOTT,
    UNRESOLVED,
    UPPER,
    PhasePoint,
    classify,
    scan_grid,
    scan_to_svg,
    tc_approx,
    tc_hardcore,
)


def test_tc_hardcore():
    assert tc_hardcore(0.0, 2) == 0
    assert tc_hardcore(-0.6, 3) == pytest.approx(0.1)
    assert tc_hardcore(0.37, 2) == tc_hardcore(-0.37, 2)


def test_tc_approx_examples():
    assert tc_approx(1.3, 1.0, 1) == pytest.approx(0.075)
    assert tc_approx(0.3, 1.0, 2) == pytest.approx(0.075)
    for k in range(4):
        assert tc_approx(k * 1.0, 1.0, 2) == 0.0


def test_tc_approx_branch_edges_take_the_smaller_branch():
    U, d = 1.0, 1
    assert tc_approx(0.5, U, d) == pytest.approx(0.5 / 4)
    assert tc_approx(1.5, U, d) == pytest.approx(0.5 / 6)
    # just inside each side of the edge
    assert tc_approx(1.5 - 1e-12, U, d) == pytest.approx(0.5 / 4)
    assert tc_approx(1.5 + 1e-12, U, d) == pytest.approx(0.5 / 6)


@given(st.floats(-3, 3), st.integers(1, 3))
def test_tc_approx_nonnegative_and_below_half_lobe_width(mu, d):
    v = tc_approx(mu, 1.0, d)
    assert v >= 0
    if mu > 0.5:
        assert v <= 1.0 / (4 * d) + 1e-12


def test_point_validation():
    with pytest.raises(ValueError):
        PhasePoint(0.0, 0.1, 1.0, 1)
    with pytest.raises(ValueError):
        PhasePoint(0.1, 0.1, -1.0, 1)


def test_classify_examples():
    v = classify(PhasePoint(0.01, -0.1, 1.0, 1))
    assert v.label == MOTT and v.k == 0 and "theorem1" in v.witnesses
    v = classify(PhasePoint(0.002, 0.2, 1.0, 1))
    assert v.label == MOTT and v.k == 1 and "theorem2" in v.witnesses
    # 3(a) fires but the bordering lobe is rho = 1; its exclusion needs 3(b)
    v = classify(PhasePoint(0.2, 0.1, 1.0, 1))
    assert v.label == UNRESOLVED and "theorem3a" in v.witnesses
    v = classify(PhasePoint(0.2, 0.1, HARD_CORE, 1))
    assert v.label == UPPER and {"theorem3a", "theorem3b"} <= set(v.witnesses)
    v = classify(PhasePoint(0.2, -0.1, 1.0, 1))
    assert v.label == LOWER


def test_mott_zero_requires_dilute_condition():
    for mu in np.linspace(-1, 1, 41):
        for t in (0.01, 0.1, 0.3):
            v = classify(PhasePoint(t, float(mu), 1.0, 2))
            if v.label == MOTT and v.k == 0:
                assert mu < -4 * t


@pytest.mark.parametrize("d", [1, 2, 3])
@pytest.mark.parametrize("U", [HARD_CORE, 1.0, 1e4])
def test_verdict_exclusivity(U, d):
    scan = scan_grid((-1, 1), (0, 0.5), 60, U, d)
    assert len(scan.rows) == 3600
    assert not any(v.contradictory for _, v in scan.rows)


def test_hardcore_wedge_matches_critical_line():
    scan = scan_grid((-1, 1), (0, 0.5), 200, HARD_CORE, 2)
    cell = scan.mu[1] - scan.mu[0]
    pts = [q for key, pts in scan.boundaries.items() if MOTT + "(0)" in key or MOTT + "(1)" in key for q in pts]
    assert pts
    for mu, t in pts:
        assert abs(abs(mu) - 2 * 2 * t) <= cell


def test_generalized_hard_core_lobe_has_unresolved_strip():
    scan = scan_grid((-0.5, 1.0), (0, 0.5), 120, 1e4, 1)
    labels = [str(v) for _, v in scan.rows]
    assert "MottProven(1)" in labels and UPPER in labels
    # along a fixed small t, mu decreasing from the Mott side meets the strip before 3(b)
    row = scan.labels()[:, 10]
    seq = [lab for lab in row if lab in ("MottProven(1)", UNRESOLVED, UPPER)]
    first_upper = seq.index(UPPER)
    last_mott = len(seq) - 1 - seq[::-1].index("MottProven(1)")
    assert UNRESOLVED in seq[first_upper:last_mott]


def test_empty_range():
    assert scan_grid((1, 0), (0, 1), 10).rows == []
    assert scan_grid((0, 1), (0, 1), 0).rows == []


def test_scan_is_deterministic_and_ordered():
    a = scan_grid((-1, 1), (0, 0.5), 15, 1.0, 1)
    b = scan_grid((-1, 1), (0, 0.5), 15, 1.0, 1)
    assert a.to_csv() == b.to_csv()
    keys = [(p.mu, p.t) for p, _ in a.rows]
    assert keys == sorted(keys)
    assert a.to_csv().splitlines()[0] == "mu,t,U,d,label,witnesses"


def test_svg_is_self_contained_xml():
    scan = scan_grid((-1, 1), (0, 0.5), 30, 1e4, 2)
    svg = scan_to_svg(scan)
    root = ET.fromstring(svg)
    assert root.tag.endswith("svg")
    assert "href" not in svg and "<image" not in svg
    assert svg.count("<polyline") >= 2


def test_empty_scan_svg():
    ET.fromstring(scan_to_svg(scan_grid((1, 0), (0, 1), 5)))


def test_ed_agrees_with_verdicts():
    lat = LatticeSpec(1, 4)
    mott = [(0.002, 0.2), (0.005, 0.15), (0.001, 0.1)]
    for t, mu in mott:
        assert classify(PhasePoint(t, mu, 1.0, 1)).label == MOTT
        rho = fock.density_ed(ModelParams(lat, t=t, U=1.0, mu=mu, beta=40.0))
        assert abs(rho - 1) < 0.05
    for t, mu in [(0.2, 0.1), (0.3, 0.2)]:
        assert classify(PhasePoint(t, mu, HARD_CORE, 1)).label == UPPER
        rho = fock.density_ed(ModelParams(lat, t=t, U=HARD_CORE, mu=mu, beta=40.0, n_max=1))
        assert 0.05 < rho < 0.95
