import pytest
from hypothesis import given, settings, strategies as st

from swaplru.fault_tables import (
    FaultTerm,
    WTYPE_FINAL,
    WTYPE_FIRST,
    WTYPE_MIDDLE,
    anchor_of_data_site,
    depol_row,
    endpoint_window,
    flip_vector,
    leak_row,
    term_detectors,
    window_sites,
    window_type,
)
from swaplru.lattice import FEED_FORWARD, FIVE_CNOT, build_layout


def test_window_type_boundaries():
    assert window_type(-1, 5) == WTYPE_FIRST
    assert window_type(0, 5) == WTYPE_MIDDLE
    assert window_type(3, 5) == WTYPE_MIDDLE
    assert window_type(4, 5) == WTYPE_FINAL
    with pytest.raises(ValueError):
        window_type(5, 5)
    with pytest.raises(ValueError):
        window_type(-2, 5)


def test_window_sites_lists():
    assert window_sites(WTYPE_MIDDLE, FIVE_CNOT) == (1, 2, 3, 4, 5, 6, 7, 8, 9, 10)
    assert window_sites(WTYPE_MIDDLE, FEED_FORWARD) == (1, 2, 3, 4, 6, 7, 8, 9)
    assert window_sites(WTYPE_FIRST, FIVE_CNOT) == (6, 7, 8, 9, 10)
    assert window_sites(WTYPE_FIRST, FEED_FORWARD) == (6, 7, 8, 9)
    assert window_sites(WTYPE_FINAL, FIVE_CNOT) == (1, 2, 3, 4, 5)
    assert window_sites(WTYPE_FINAL, FEED_FORWARD) == (1, 2, 3, 4)


def test_fault_term_validation():
    with pytest.raises(ValueError):
        FaultTerm("Q", 0, 0)


def test_leak_row_x_middle_concrete():
    # distance 3, star (1,1): partners (3,1), (2,0), (2,1), swap site (1,1)
    lay = build_layout(3)
    s = 1 * 3 + 1
    p1 = 3 * 3 + 1
    q = 1 * 3 + 1
    row1 = leak_row(lay, "x", s, 2, 1, rounds=5)
    assert row1 == (FaultTerm("D", p1, 2), FaultTerm("D", q, 3))
    row7 = leak_row(lay, "x", s, 2, 7, rounds=5)
    # q = (1,1) is read by plaquette (0,1) on gate 3 and (0,0) on gate 2
    assert FaultTerm("M", 0 * 3 + 0, 3) in row7
    assert FaultTerm("D", q, 3) in row7
    row10 = leak_row(lay, "x", s, 2, 10, rounds=5)
    assert row10 == ()


def test_leak_row_z_middle_concrete():
    lay = build_layout(3)
    s = 1 * 3 + 1  # plaquette (1,1), swap site (2,1)
    q = 2 * 3 + 1
    s_next = 0 * 3 + 1
    for k in (1, 2, 3, 4):
        row = leak_row(lay, "z", s, 1, k, rounds=5)
        assert row == (FaultTerm("M", s, 1), FaultTerm("ME", s, 2),
                       FaultTerm("M", s_next, 2), FaultTerm("D", q, 3))
    row5 = leak_row(lay, "z", s, 1, 5, rounds=5)
    assert FaultTerm("M", s, 1) not in row5
    assert FaultTerm("M", s_next, 2) in row5
    row7 = leak_row(lay, "z", s, 1, 7, rounds=5)
    assert row7 == (FaultTerm("ME", s, 2), FaultTerm("D", q, 3))


def test_leak_row_first_and_final_windows():
    lay = build_layout(3)
    rounds = 4
    # first windows shift the data phase to round 0
    rowz = leak_row(lay, "z", 4, -1, 6, rounds)
    assert rowz == (FaultTerm("ME", 4, 0), FaultTerm("M", 1, 0),
                    FaultTerm("D", int(lay.z_swap[4]), 1))
    rowx = leak_row(lay, "x", 4, -1, 6, rounds)
    assert rowx == (FaultTerm("D", int(lay.x_swap[4]), 0),)
    # final windows: transparent readout catches the erased value at layer R
    rowzf = leak_row(lay, "z", 4, rounds - 1, 2, rounds)
    assert rowzf == (FaultTerm("M", 4, rounds - 1),
                     FaultTerm("D", int(lay.z_swap[4]), rounds))
    rowxf = leak_row(lay, "x", 4, rounds - 1, 4, rounds)
    assert rowxf == (FaultTerm("D", int(lay.x_swap[4]), rounds),)
    with pytest.raises(ValueError):
        leak_row(lay, "z", 4, -1, 1, rounds)
    with pytest.raises(ValueError):
        leak_row(lay, "z", 4, rounds - 1, 6, rounds)
    with pytest.raises(ValueError):
        leak_row(lay, "z", 4, 1, 5, rounds, variant=FEED_FORWARD)


def test_term_detectors_footprints():
    lay = build_layout(3)
    rounds = 3
    q = 2 * 3 + 1  # even row site, plaquettes (1,1) then (0,1)
    pair, bits = term_detectors(lay, FaultTerm("D", q, 1), rounds)
    assert pair == ((1, 4), (1, 1))
    assert bits == (0, 0)
    pair, bits = term_detectors(lay, FaultTerm("V", q, 1), rounds)
    assert pair == ((1, 4), (2, 1))
    pair, _ = term_detectors(lay, FaultTerm("M", 4, 2), rounds)
    assert pair == ((2, 4), (3, 4))
    pair, _ = term_detectors(lay, FaultTerm("ME", 4, 0), rounds)
    assert pair == ((0, 4), (1, 4))
    # cut crossings set the logical frame bits
    _, bits = term_detectors(lay, FaultTerm("D", 0, 3), rounds)
    assert bits == (0, 1)
    _, bits = term_detectors(lay, FaultTerm("D", 1 * 3 + 0, 2), rounds)
    assert bits == (1, 0)
    for bad in (FaultTerm("M", 4, 3), FaultTerm("D", q, 4),
                FaultTerm("V", q, 3), FaultTerm("M", 4, -1)):
        with pytest.raises(ValueError):
            term_detectors(lay, bad, rounds)


@pytest.mark.parametrize("d", [3, 5])
def test_kick_terms_telescope_to_partner_flip(d):
    # the three site-2 kick coins fired together equal a plain flip of the
    # gate-1 partner, because the four star legs multiply to the stabilizer
    lay = build_layout(d)
    rounds = 4
    for s in range(lay.n_stab):
        p1, p2, p3 = (int(v) for v in lay.x_partners[s])
        q = int(lay.x_swap[s])
        combo = (FaultTerm("V", p2, 1), FaultTerm("V", p3, 1),
                 FaultTerm("D", q, 2))
        assert flip_vector(lay, combo, rounds) == flip_vector(
            lay, (FaultTerm("D", p1, 1),), rounds)


@pytest.mark.parametrize("d", [3, 5])
@pytest.mark.parametrize("kind", ["x", "z"])
def test_depol_rows_have_two_detector_footprints(d, kind):
    lay = build_layout(d)
    rounds = 4
    rho = 1
    for s in range(lay.n_stab):
        for gate in (1, 2, 3, 4, 5):
            for klass in ("XX", "XI", "IX"):
                terms = [FaultTerm(k, loc, rho + off)
                         for k, loc, off in depol_row(lay, kind, s, gate, klass)]
                dets, _ = flip_vector(lay, terms, rounds)
                assert len(dets) in (0, 2)


def test_depol_row_concrete_entries():
    lay = build_layout(3)
    s = 4  # stabilizer (1,1)
    assert depol_row(lay, "x", s, 1, "XX") == ()
    assert depol_row(lay, "x", s, 1, "XI") == (("D", 3 * 3 + 1, 0),)
    assert depol_row(lay, "x", s, 4, "IX") == ()
    assert depol_row(lay, "z", s, 4, "XX") == (("M", s, 0),)
    assert depol_row(lay, "z", s, 1, "IX") == (
        ("M", 2 * 3 + 1, 0), ("D", 4 * 3 + 1, 1))
    with pytest.raises(ValueError):
        depol_row(lay, "z", s, 6, "XX")
    with pytest.raises(ValueError):
        depol_row(lay, "z", s, 1, "YY")


@pytest.mark.parametrize("d", [3, 5])
def test_anchor_roundtrip(d):
    lay = build_layout(d)
    for s in range(lay.n_stab):
        assert anchor_of_data_site(lay, int(lay.x_swap[s])) == ("x", s)
        assert anchor_of_data_site(lay, int(lay.z_swap[s])) == ("z", s)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_endpoint_window_consistency(data):
    d = data.draw(st.sampled_from([3, 5]))
    lay = build_layout(d)
    kind = data.draw(st.sampled_from(["x", "z"]))
    s = data.draw(st.integers(0, lay.n_stab - 1))
    gate = data.draw(st.integers(1, 5))
    rnd = data.draw(st.integers(0, 4))
    window, site = endpoint_window(lay, kind, s, gate, "anc", rnd)
    assert window == (kind, s, rnd) and site == gate
    window, site = endpoint_window(lay, kind, s, gate, "data", rnd)
    assert site == gate + 5
    wkind, wstab, wrho = window
    assert wrho == rnd - 1
    partners = lay.x_partners if kind == "x" else lay.z_partners
    swap = lay.x_swap if kind == "x" else lay.z_swap
    pos = int(partners[s][gate - 1]) if gate <= 3 else int(swap[s])
    wswap = lay.x_swap if wkind == "x" else lay.z_swap
    assert int(wswap[wstab]) == pos
