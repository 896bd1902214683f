"""Toric code geometry and the SWAP-based syndrome extraction schedule.

Data qubits live on the edges of a d x d torus, indexed by (row, col) with
rows 0..2d-1 and cols 0..d-1, flattened as site = row * d + col.  Even rows
hold the vertical edges (measured through plaquette ancillas), odd rows hold
the horizontal edges (measured through star ancillas).  Plaquette (Z) and
star (X) stabilizers are indexed by (i, j) -> s = i * d + j.

Each round runs five CNOT steps.  At step t every stabilizer of both types
executes its gate t simultaneously; the per-step touch pattern is a perfect
matching on the atoms, so the schedule is well defined.  Steps 4 and 5 form
the role swap: after them the ancilla atom holds the data state and the old
data atom is measured, which removes any leakage within two rounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FIVE_CNOT = "five_cnot"
FEED_FORWARD = "feed_forward"
VARIANTS = (FIVE_CNOT, FEED_FORWARD)


@dataclass(frozen=True)
class ToricLayout:
    """Immutable geometry tables for one code distance.

    Stabilizer partner columns are ordered by gate step.  For star (X)
    stabilizers the ancilla is the CNOT control on steps 1-3 and the swap
    partner is the data site directly above; for plaquette (Z) stabilizers
    the ancilla is the target on steps 1-3 and the swap partner is the data
    site it measures.
    """

    d: int
    n_data: int
    n_stab: int
    # per X stabilizer s: data partners of gates 1..3 and the swap site
    x_partners: np.ndarray  # shape (d*d, 3)
    x_swap: np.ndarray  # shape (d*d,)
    # per Z stabilizer s: data partners of gates 1..3 and the swap site
    z_partners: np.ndarray  # shape (d*d, 3)
    z_swap: np.ndarray  # shape (d*d,)
    # per data site: the two plaquettes / stars containing it
    plaquettes_of: np.ndarray  # shape (2*d*d, 2)
    stars_of: np.ndarray  # shape (2*d*d, 2)
    # plaquette s -> its 4 data sites, star s -> its 4 data sites
    plaquette_support: np.ndarray  # shape (d*d, 4)
    star_support: np.ndarray  # shape (d*d, 4)
    # logical operator supports (d sites each)
    logical_x1: np.ndarray = field(repr=False, default=None)
    logical_x2: np.ndarray = field(repr=False, default=None)
    logical_z1: np.ndarray = field(repr=False, default=None)
    logical_z2: np.ndarray = field(repr=False, default=None)
    # winding cuts: X-error parity over these sites decides the logical class
    cut_x1: np.ndarray = field(repr=False, default=None)
    cut_x2: np.ndarray = field(repr=False, default=None)
    # per data site: 1 if the site is on the x1 / x2 cut
    on_cut_x1: np.ndarray = field(repr=False, default=None)
    on_cut_x2: np.ndarray = field(repr=False, default=None)

    def site(self, row: int, col: int) -> int:
        return (row % (2 * self.d)) * self.d + (col % self.d)

    def row_col(self, site: int) -> tuple[int, int]:
        return site // self.d, site % self.d

    def stab(self, i: int, j: int) -> int:
        return (i % self.d) * self.d + (j % self.d)


def build_layout(d: int) -> ToricLayout:
    """Build the distance-d layout.  d must be odd and at least 3."""
    if d < 3 or d % 2 == 0:
        raise ValueError(f"distance must be an odd integer >= 3, got {d}")
    n_stab = d * d
    n_data = 2 * d * d

    def site(row, col):
        return (row % (2 * d)) * d + (col % d)

    x_partners = np.zeros((n_stab, 3), dtype=np.int64)
    x_swap = np.zeros(n_stab, dtype=np.int64)
    z_partners = np.zeros((n_stab, 3), dtype=np.int64)
    z_swap = np.zeros(n_stab, dtype=np.int64)
    for i in range(d):
        for j in range(d):
            s = i * d + j
            # star (X) stabilizer: gates 1..3 spread from the ancilla, then
            # the swap with the data site above
            x_partners[s] = (site(2 * i + 1, j), site(2 * i, j - 1), site(2 * i, j))
            x_swap[s] = site(2 * i - 1, j)
            # plaquette (Z) stabilizer: gates 1..3 gather into the ancilla,
            # then the swap with the data site it measures
            z_partners[s] = (site(2 * i + 2, j), site(2 * i + 1, j + 1), site(2 * i + 1, j))
            z_swap[s] = site(2 * i, j)

    plaquette_support = np.concatenate([z_partners, z_swap[:, None]], axis=1)
    star_support = np.concatenate([x_partners, x_swap[:, None]], axis=1)

    plaquettes_of = np.zeros((n_data, 2), dtype=np.int64)
    stars_of = np.zeros((n_data, 2), dtype=np.int64)
    for row in range(2 * d):
        for col in range(d):
            q = site(row, col)
            m = row // 2
            if row % 2 == 0:
                # vertical edge: own plaquette below, partner plaquette above
                plaquettes_of[q] = (m * d + col, ((m - 1) % d) * d + col)
                stars_of[q] = (m * d + col, m * d + (col + 1) % d)
            else:
                plaquettes_of[q] = (m * d + col, m * d + (col - 1) % d)
                stars_of[q] = (m * d + col, ((m + 1) % d) * d + col)

    logical_x1 = np.array([site(1, k) for k in range(d)], dtype=np.int64)
    logical_x2 = np.array([site(2 * m, 0) for m in range(d)], dtype=np.int64)
    logical_z1 = np.array([site(2 * m + 1, 0) for m in range(d)], dtype=np.int64)
    logical_z2 = np.array([site(0, k) for k in range(d)], dtype=np.int64)
    # an X-error string is X1-class iff it crosses the column-0 horizontal
    # edges an odd number of times, X2-class iff it crosses row 0
    cut_x1 = np.array([site(2 * m + 1, 0) for m in range(d)], dtype=np.int64)
    cut_x2 = np.array([site(0, k) for k in range(d)], dtype=np.int64)
    on_cut_x1 = np.zeros(n_data, dtype=np.uint8)
    on_cut_x1[cut_x1] = 1
    on_cut_x2 = np.zeros(n_data, dtype=np.uint8)
    on_cut_x2[cut_x2] = 1

    layout = ToricLayout(
        d=d,
        n_data=n_data,
        n_stab=n_stab,
        x_partners=x_partners,
        x_swap=x_swap,
        z_partners=z_partners,
        z_swap=z_swap,
        plaquettes_of=plaquettes_of,
        stars_of=stars_of,
        plaquette_support=plaquette_support,
        star_support=star_support,
        logical_x1=logical_x1,
        logical_x2=logical_x2,
        logical_z1=logical_z1,
        logical_z2=logical_z2,
        cut_x1=cut_x1,
        cut_x2=cut_x2,
        on_cut_x1=on_cut_x1,
        on_cut_x2=on_cut_x2,
    )
    for arr in (x_partners, x_swap, z_partners, z_swap, plaquettes_of, stars_of,
                plaquette_support, star_support, logical_x1, logical_x2,
                logical_z1, logical_z2, cut_x1, cut_x2, on_cut_x1, on_cut_x2):
        arr.setflags(write=False)
    return layout


def gate_sequence(layout: ToricLayout, variant: str = FIVE_CNOT):
    """Ordered CNOT slots of one round.

    Returns a list of 5 steps (4 physical steps for the feed-forward
    variant, which drops the fifth CNOT).  Each step is a list of
    (control, target, kind, s, gate) tuples where kind is 'x' or 'z',
    s the stabilizer index and gate the 1-based slot index.  Ancilla
    endpoints are encoded as ('xa', s) / ('za', s); data endpoints as
    plain site integers.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    steps = []
    for gate in (1, 2, 3):
        step = []
        for s in range(layout.n_stab):
            step.append((("xa", s), int(layout.x_partners[s, gate - 1]), "x", s, gate))
        for s in range(layout.n_stab):
            step.append((int(layout.z_partners[s, gate - 1]), ("za", s), "z", s, gate))
        steps.append(step)
    step4 = []
    for s in range(layout.n_stab):
        step4.append((int(layout.x_swap[s]), ("xa", s), "x", s, 4))
    for s in range(layout.n_stab):
        step4.append((("za", s), int(layout.z_swap[s]), "z", s, 4))
    steps.append(step4)
    if variant == FIVE_CNOT:
        step5 = []
        for s in range(layout.n_stab):
            step5.append((("xa", s), int(layout.x_swap[s]), "x", s, 5))
        for s in range(layout.n_stab):
            step5.append((int(layout.z_swap[s]), ("za", s), "z", s, 5))
        steps.append(step5)
    return steps


@dataclass(frozen=True)
class RoleSchedule:
    """Role assignment of one round plus the swap permutation to the next.

    holder[q] identifies the atom currently carrying data site q; atoms are
    named by the (kind, s, round) ancilla slot they were born into, with
    kind 'd0' for the round-0 data atoms.  After each round the ancilla atom
    of each stabilizer takes over the data site it swapped with and the old
    data atom is measured out.
    """

    round: int
    holder: dict
    measured: dict


def role_schedule(layout: ToricLayout, rnd: int) -> RoleSchedule:
    """Atom occupancy of every data site at the start of round rnd."""
    if rnd < 0:
        raise ValueError("round must be >= 0")
    holder = {q: ("d0", q, 0) for q in range(layout.n_data)}
    measured = {}
    for r in range(rnd):
        measured = {}
        nxt = dict(holder)
        for s in range(layout.n_stab):
            qx = int(layout.x_swap[s])
            qz = int(layout.z_swap[s])
            measured[qx] = holder[qx]
            measured[qz] = holder[qz]
            nxt[qx] = ("xa", s, r)
            nxt[qz] = ("za", s, r)
        holder = nxt
    return RoleSchedule(round=rnd, holder=holder, measured=measured)


def dump(layout: ToricLayout, variant: str = FIVE_CNOT) -> str:
    """Deterministic text dump of the layout and schedule for golden tests."""
    lines = [f"toric d={layout.d} data={layout.n_data} stabs={layout.n_stab}x2"]
    for s in range(layout.n_stab):
        sup = ",".join(str(x) for x in layout.plaquette_support[s])
        lines.append(f"Z {s} support {sup}")
    for s in range(layout.n_stab):
        sup = ",".join(str(x) for x in layout.star_support[s])
        lines.append(f"X {s} support {sup}")
    for name in ("x1", "x2", "z1", "z2"):
        sup = ",".join(str(x) for x in getattr(layout, f"logical_{name}"))
        lines.append(f"logical {name} {sup}")
    for t, step in enumerate(gate_sequence(layout, variant), start=1):
        for ctl, tgt, kind, s, gate in step:
            lines.append(f"step {t} {kind}{s} g{gate} {ctl}->{tgt}")
    return "\n".join(lines) + "\n"
