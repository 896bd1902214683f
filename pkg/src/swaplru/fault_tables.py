"""Golden fault tables for the swap schedule and the window bookkeeping.

Every atom lives through one measurement window: five CNOT slots as an
ancilla in round rho (sites 1-5), the swap, five slots as a data holder in
round rho+1 (sites 6-10), then measurement.  Atoms loaded at round 0 start
directly in the data phase (first windows, rho = -1); ancillas of the last
round are read out in the final transparent readout (final windows, sites
1-5 only).  The feed-forward variant replaces the fifth CNOT by a frame
update, removing sites 5 and 10.

A decay at site k of a window produces a fixed set of fault terms, each an
independent 50% coin:

  D(pos, e)   bit flip on data site pos visible from detector layer e on
  V(pos, e)   bit flip that lands between the two parity reads of pos, so
              its own plaquette sees it at layer e and the other at e + 1
  M(s, e)     flip of the plaquette-s outcome in round e
  ME(s, e)    the erased outcome of the leaked atom itself at round e

The tables below are the normative per-site term lists; the rule-based
derivation in the engine must reproduce them exactly.  The depolarizing
tables give the deterministic net flips of an X component on the ancilla
(XI), the data partner (IX) or both (XX) at each of the five gate slots,
already reduced modulo stabilizers.
"""

from __future__ import annotations

from dataclasses import dataclass

from .lattice import FIVE_CNOT, FEED_FORWARD, ToricLayout

WTYPE_FIRST = "first"
WTYPE_MIDDLE = "middle"
WTYPE_FINAL = "final"


@dataclass(frozen=True, order=True)
class FaultTerm:
    kind: str  # 'D', 'V', 'M' or 'ME'
    loc: int  # data site for D/V, plaquette index for M/ME
    epoch: int

    def __post_init__(self):
        if self.kind not in ("D", "V", "M", "ME"):
            raise ValueError(f"unknown term kind {self.kind!r}")


def window_type(rho: int, rounds: int) -> str:
    if rho == -1:
        return WTYPE_FIRST
    if rho == rounds - 1:
        return WTYPE_FINAL
    if 0 <= rho < rounds - 1:
        return WTYPE_MIDDLE
    raise ValueError(f"window anchor {rho} outside -1..{rounds - 1}")


def window_sites(wtype: str, variant: str = FIVE_CNOT) -> tuple[int, ...]:
    """Ordered CNOT slots of a window, the order leakage can strike in."""
    if wtype == WTYPE_FIRST:
        sites = (6, 7, 8, 9, 10)
    elif wtype == WTYPE_FINAL:
        sites = (1, 2, 3, 4, 5)
    elif wtype == WTYPE_MIDDLE:
        sites = (1, 2, 3, 4, 5, 6, 7, 8, 9, 10)
    else:
        raise ValueError(f"unknown window type {wtype!r}")
    if variant == FEED_FORWARD:
        sites = tuple(k for k in sites if k not in (5, 10))
    return sites


def _x_window_roles(layout: ToricLayout, stab: int):
    p1, p2, p3 = (int(v) for v in layout.x_partners[stab])
    q = int(layout.x_swap[stab])
    # q sits on an odd row: first neighbour plaquette reads it on gate 3,
    # the second on gate 2
    s3, s2 = (int(v) for v in layout.plaquettes_of[q])
    return p1, p2, p3, q, s2, s3


def _z_window_roles(layout: ToricLayout, stab: int):
    p1, p2, p3 = (int(v) for v in layout.z_partners[stab])
    q = int(layout.z_swap[stab])
    # q sits on an even row: the other plaquette gathers it on gate 1 of
    # the following round
    s_next = int(layout.plaquettes_of[q][1])
    return p1, p2, p3, q, s_next


def leak_row(layout: ToricLayout, kind: str, stab: int, rho: int, site: int,
             rounds: int, variant: str = FIVE_CNOT) -> tuple[FaultTerm, ...]:
    """Fault terms of a decay at one window site, absolute epochs."""
    wtype = window_type(rho, rounds)
    if site not in window_sites(wtype, variant):
        raise ValueError(f"site {site} not in a {wtype} {variant} window")
    if kind == "x":
        p1, p2, p3, q, s2, s3 = _x_window_roles(layout, stab)
        rows = {
            1: ((("D", p1, 0), ("D", q, 1))),
            2: (("V", p2, 0), ("V", p3, 0), ("D", q, 1)),
            3: (("V", p3, 0), ("D", q, 1)),
            4: (("D", q, 1),),
            5: (("D", q, 1),),
            6: (("D", q, 1),),
            7: (("M", s2, 1), ("D", q, 1)),
            8: (("M", s3, 1), ("D", q, 2)),
            9: (("D", q, 2),),
            10: (),
        }
        row = rows[site]
        if wtype == WTYPE_FINAL:
            # the atom is never handed on, so only the terms up to its
            # transparent readout survive (site <= 5 guaranteed above)
            pass
    elif kind == "z":
        p1, p2, p3, q, s_next = _z_window_roles(layout, stab)
        if wtype == WTYPE_FINAL:
            # read out transparently: the broken parity delivery remains
            # for sites 1-4 and the erased data value shows at layer rho+1
            rows = {
                1: (("M", stab, 0), ("D", q, 1)),
                2: (("M", stab, 0), ("D", q, 1)),
                3: (("M", stab, 0), ("D", q, 1)),
                4: (("M", stab, 0), ("D", q, 1)),
                5: (("D", q, 1),),
            }
        else:
            rows = {
                1: (("M", stab, 0), ("ME", stab, 1), ("M", s_next, 1), ("D", q, 2)),
                2: (("M", stab, 0), ("ME", stab, 1), ("M", s_next, 1), ("D", q, 2)),
                3: (("M", stab, 0), ("ME", stab, 1), ("M", s_next, 1), ("D", q, 2)),
                4: (("M", stab, 0), ("ME", stab, 1), ("M", s_next, 1), ("D", q, 2)),
                5: (("ME", stab, 1), ("M", s_next, 1), ("D", q, 2)),
                6: (("ME", stab, 1), ("M", s_next, 1), ("D", q, 2)),
                7: (("ME", stab, 1), ("D", q, 2)),
                8: (("ME", stab, 1), ("D", q, 2)),
                9: (("ME", stab, 1), ("D", q, 2)),
                10: (("ME", stab, 1), ("D", q, 2)),
            }
        row = rows[site]
    else:
        raise ValueError(f"kind must be 'x' or 'z', got {kind!r}")
    return tuple(FaultTerm(k, loc, rho + off) for k, loc, off in row)


def depol_row(layout: ToricLayout, kind: str, stab: int, gate: int,
              klass: str) -> tuple[tuple[str, int, int], ...]:
    """Net flips of an X component at one gate slot, epochs relative to
    the round the gate runs in.  klass is the side pattern: "XI" ancilla
    only, "IX" data partner only, "XX" both."""
    if klass not in ("XX", "XI", "IX"):
        raise ValueError(f"unknown depolarizing class {klass!r}")
    if gate not in (1, 2, 3, 4, 5):
        raise ValueError(f"gate must be 1..5, got {gate}")
    if kind == "x":
        p1, p2, p3, q, _, _ = _x_window_roles(layout, stab)
        own2 = int(layout.plaquettes_of[p2][0])
        own3 = int(layout.plaquettes_of[p3][0])
        rows = {
            "XX": {
                1: (),
                2: (("D", p1, 0),),
                3: (("D", p3, 1), ("M", own3, 0), ("D", q, 1)),
                4: (("D", q, 1),),
                5: (("D", q, 1),),
            },
            "XI": {
                1: (("D", p1, 0),),
                2: (("D", p3, 1), ("M", own3, 0), ("D", q, 1)),
                3: (("D", q, 1),),
                4: (("D", q, 1),),
                5: (("D", q, 1),),
            },
            "IX": {
                1: (("D", p1, 0),),
                2: (("D", p2, 1), ("M", own2, 0)),
                3: (("D", p3, 1), ("M", own3, 0)),
                4: (),
                5: (),
            },
        }
    elif kind == "z":
        p1, p2, p3, q, _ = _z_window_roles(layout, stab)
        own1 = int(layout.plaquettes_of[p1][0])
        rows = {
            "XX": {
                1: (("D", p1, 0),),
                2: (("D", p2, 0),),
                3: (("D", p3, 1), ("M", stab, 0)),
                4: (("M", stab, 0),),
                5: (("D", q, 1), ("M", stab, 0)),
            },
            "XI": {
                1: (("M", stab, 0),),
                2: (("M", stab, 0),),
                3: (("M", stab, 0),),
                4: (("D", q, 1),),
                5: (("D", q, 1),),
            },
            "IX": {
                1: (("M", own1, 0), ("D", p1, 1)),
                2: (("D", p2, 0), ("M", stab, 0)),
                3: (("D", p3, 1),),
                4: (("D", q, 1), ("M", stab, 0)),
                5: (("M", stab, 0),),
            },
        }
    else:
        raise ValueError(f"kind must be 'x' or 'z', got {kind!r}")
    return rows[klass][gate]


def anchor_of_data_site(layout: ToricLayout, pos: int) -> tuple[str, int]:
    """The stabilizer whose swap slot holds data site pos."""
    row, col = layout.row_col(pos)
    d = layout.d
    if row % 2 == 0:
        return "z", (row // 2) * d + col
    return "x", (((row // 2) + 1) % d) * d + col


def endpoint_window(layout: ToricLayout, kind: str, stab: int, gate: int,
                    side: str, rnd: int):
    """Map one endpoint of a CNOT slot to its (window, site).

    side "anc" is the ancilla atom of (kind, stab) in round rnd: window
    anchored there, site = gate.  side "data" is the atom holding the data
    partner of that gate: it entered its window one round earlier and this
    is the (gate+5)-th slot it participates in.
    """
    if side == "anc":
        return (kind, stab, rnd), gate
    if side != "data":
        raise ValueError(f"side must be 'anc' or 'data', got {side!r}")
    if kind == "x":
        pos = int(layout.x_partners[stab][gate - 1]) if gate <= 3 else int(layout.x_swap[stab])
    else:
        pos = int(layout.z_partners[stab][gate - 1]) if gate <= 3 else int(layout.z_swap[stab])
    wkind, wstab = anchor_of_data_site(layout, pos)
    return (wkind, wstab, rnd - 1), gate + 5


def term_detectors(layout: ToricLayout, term: FaultTerm, rounds: int):
    """Detector footprint and logical frame bits of one fault term.

    Returns ((layer, plaq), (layer, plaq)), (x1_bit, x2_bit).  Layers run
    0..rounds, layer `rounds` being the transparent readout comparison.
    """
    if term.kind in ("M", "ME"):
        if not 0 <= term.epoch <= rounds - 1:
            raise ValueError(f"outcome term epoch {term.epoch} out of range")
        return ((term.epoch, term.loc), (term.epoch + 1, term.loc)), (0, 0)
    if not 0 <= term.epoch <= rounds:
        raise ValueError(f"data term epoch {term.epoch} out of range")
    pa, pb = (int(v) for v in layout.plaquettes_of[term.loc])
    bits = (int(layout.on_cut_x1[term.loc]), int(layout.on_cut_x2[term.loc]))
    if term.kind == "D":
        return ((term.epoch, pa), (term.epoch, pb)), bits
    # V: own plaquette sees the flip one layer before the other one
    if term.epoch > rounds - 1:
        raise ValueError(f"V term epoch {term.epoch} out of range")
    return ((term.epoch, pa), (term.epoch + 1, pb)), bits


def flip_vector(layout: ToricLayout, terms, rounds: int):
    """Reduce a term list to its net set of flipped detectors plus the net
    logical frame bits.  Detector ids are layer * n_stab + plaquette."""
    dets = set()
    x1 = x2 = 0
    for term in terms:
        pair, bits = term_detectors(layout, term, rounds)
        for layer, plaq in pair:
            det = layer * layout.n_stab + plaq
            dets.symmetric_difference_update({det})
        x1 ^= bits[0]
        x2 ^= bits[1]
    return frozenset(dets), (x1, x2)
