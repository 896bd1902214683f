"""Reference propagation engine.

This module holds the slow, explicit machinery the fast batch simulator is
validated against: a one-shot frame-flow simulator with hand-injected
faults, the rule-based re-derivation of the leakage fault tables, and the
gate-by-gate injection that re-derives the depolarizing tables.  The
derivations must reproduce the golden tables exactly or
``derive_fault_tables`` raises.

Frame conventions: an X component on the CNOT control copies to the
target, a Z component on the target copies to the control.  Leaked atoms
stop interacting: their frames are pinned to zero and every gate touching
them is skipped.  The physical consequences of a decay are instead applied
as the independent 50% coins listed in the fault tables, which includes
the Pauli kick on the surviving partner, so no extra kick is applied
mechanistically.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fault_tables import (
    FaultTerm,
    WTYPE_FINAL,
    WTYPE_FIRST,
    WTYPE_MIDDLE,
    depol_row,
    endpoint_window,
    leak_row,
    window_sites,
    window_type,
)
from .lattice import FEED_FORWARD, FIVE_CNOT, ToricLayout, build_layout

ALIVE = 0
LEAKED = 1
LEAKED_DETECTED = 2

OUTCOME_L = 2


def side_roles(kind: str, gate: int) -> tuple[str, str]:
    """Window roles (control_role, target_role) of one CNOT slot."""
    if kind == "x":
        return ("data", "anc") if gate == 4 else ("anc", "data")
    if kind == "z":
        return ("anc", "data") if gate == 4 else ("data", "anc")
    raise ValueError(f"kind must be 'x' or 'z', got {kind!r}")


def propagate_kraus_cnot(kraus: str, side: str):
    """Forward propagation of a decay jump operator through one CNOT.

    kraus is the jump label: "K0L" empties the lower level, "K1L" the
    upper one.  Returns the mixture of outcomes as (probability,
    companion Pauli on the surviving partner, jump label afterwards).
    A jump on the control commutes through up to a conditional X on the
    target; a jump on the target averages into a fresh label with a 50%
    Z kicked back onto the control.
    """
    if kraus not in ("K0L", "K1L"):
        raise ValueError(f"not a decay jump operator: {kraus!r}")
    if side == "control":
        if kraus == "K1L":
            return ((1.0, "X", "K1L"),)
        return ((1.0, "I", "K0L"),)
    if side == "target":
        return ((0.25, "I", "K0L"), (0.25, "I", "K1L"),
                (0.25, "Z", "K0L"), (0.25, "Z", "K1L"))
    raise ValueError(f"side must be 'control' or 'target', got {side!r}")


@dataclass
class PauliFrame:
    """Bit-flip and phase-flip frames of every atom currently in play."""

    x: np.ndarray  # data sites, X component
    z: np.ndarray  # data sites, Z component
    xa_x: np.ndarray  # star ancillas
    xa_z: np.ndarray
    za_x: np.ndarray  # plaquette ancillas
    za_z: np.ndarray

    @classmethod
    def zeros(cls, layout: ToricLayout) -> "PauliFrame":
        return cls(
            x=np.zeros(layout.n_data, dtype=np.uint8),
            z=np.zeros(layout.n_data, dtype=np.uint8),
            xa_x=np.zeros(layout.n_stab, dtype=np.uint8),
            xa_z=np.zeros(layout.n_stab, dtype=np.uint8),
            za_x=np.zeros(layout.n_stab, dtype=np.uint8),
            za_z=np.zeros(layout.n_stab, dtype=np.uint8),
        )


@dataclass
class RefResult:
    out_z: np.ndarray  # (rounds, n_stab) values 0/1/2, 2 = flagged leak
    out_x: np.ndarray
    readout: np.ndarray  # (n_data,) final data bit flips
    readout_flags: np.ndarray  # (n_data,) leak state at final readout
    detectors: np.ndarray  # (rounds + 1, n_stab) uint8
    logical_x: tuple  # realized (x1, x2) winding flips
    logical_z: tuple
    final_z: np.ndarray = None  # (n_data,) Z frame at the end of the run
    coins_used: int = 0
    leak_windows: list = field(default_factory=list)


class _CoinSource:
    def __init__(self, coins=None, rng=None):
        self._iter = iter(coins) if coins is not None else None
        self._rng = rng
        self.used = 0

    def flip(self) -> int:
        self.used += 1
        if self._iter is not None:
            return int(next(self._iter)) & 1
        if self._rng is None:
            raise ValueError("leak terms need coins or an rng")
        return int(self._rng.integers(0, 2))


def ref_simulate(layout: ToricLayout, rounds: int, faults=(),
                 variant: str = FIVE_CNOT, coins=None, rng=None) -> RefResult:
    """One-shot reference propagation with hand-placed faults.

    faults is an iterable of
      (rnd, kind, stab, gate, ("pauli", "XZ"))          two Pauli letters,
                                                        control then target
      (rnd, kind, stab, gate, ("leak", side, detected)) side "control",
                                                        "target" or "both";
                                                        detected one bool,
                                                        or a pair for both
    Leak coins are drawn from `coins` (an iterable of bits) when given,
    else from `rng`.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    n_stab, n_data = layout.n_stab, layout.n_data
    frame = PauliFrame.zeros(layout)
    adata = np.zeros(n_data, dtype=np.int8)
    ax = np.zeros(n_stab, dtype=np.int8)
    az = np.zeros(n_stab, dtype=np.int8)

    mech_z = np.zeros((rounds, n_stab), dtype=np.uint8)
    mech_x = np.zeros((rounds, n_stab), dtype=np.uint8)
    out_coin = np.zeros((rounds, n_stab), dtype=np.uint8)
    step_coin = np.zeros((rounds + 1, n_stab), dtype=np.uint8)
    readout_flip = np.zeros(n_data, dtype=np.uint8)
    z_state = np.zeros((rounds, n_stab), dtype=np.int8)
    x_state = np.zeros((rounds, n_stab), dtype=np.int8)

    max_gate = 5 if variant == FIVE_CNOT else 4
    by_slot = {}
    for rnd, kind, stab, gate, spec in faults:
        if not 0 <= rnd < rounds:
            raise ValueError(f"fault round {rnd} outside run")
        if kind not in ("x", "z") or not 0 <= stab < n_stab:
            raise ValueError(f"no stabilizer ({kind}, {stab})")
        if not 1 <= gate <= max_gate:
            raise ValueError(f"gate {gate} not a physical gate here")
        by_slot.setdefault((rnd, kind, stab, gate), []).append(spec)
    source = _CoinSource(coins, rng)
    leak_windows = []

    def apply_term(term: FaultTerm):
        if source.flip() == 0:
            return
        if term.kind in ("M", "ME"):
            out_coin[term.epoch, term.loc] ^= 1
            return
        pa, pb = (int(v) for v in layout.plaquettes_of[term.loc])
        readout_flip[term.loc] ^= 1
        if term.kind == "D":
            if term.epoch < rounds:
                step_coin[term.epoch, pa] ^= 1
                step_coin[term.epoch, pb] ^= 1
        else:  # V: own plaquette one layer earlier than the other
            step_coin[term.epoch, pa] ^= 1
            if term.epoch + 1 < rounds:
                step_coin[term.epoch + 1, pb] ^= 1

    def kill(carrier, detected: bool, rnd: int, kind: str, stab: int,
             gate: int, role: str):
        arr, idx = carrier
        state = LEAKED_DETECTED if detected else LEAKED
        if arr == "d":
            if adata[idx] != ALIVE:
                return
            adata[idx] = state
            frame.x[idx] = frame.z[idx] = 0
        elif arr == "xa":
            if ax[idx] != ALIVE:
                return
            ax[idx] = state
            frame.xa_x[idx] = frame.xa_z[idx] = 0
        else:
            if az[idx] != ALIVE:
                return
            az[idx] = state
            frame.za_x[idx] = frame.za_z[idx] = 0
        window, site = endpoint_window(layout, kind, stab, gate, role, rnd)
        leak_windows.append((window, site, detected))
        wkind, wstab, wrho = window
        for term in leak_row(layout, wkind, wstab, wrho, site, rounds, variant):
            apply_term(term)

    def carrier_alive(carrier) -> bool:
        arr, idx = carrier
        if arr == "d":
            return adata[idx] == ALIVE
        return (ax[idx] if arr == "xa" else az[idx]) == ALIVE

    def flip(carrier, letter: str):
        if not carrier_alive(carrier) or letter == "I":
            return
        arr, idx = carrier
        tx = {"d": frame.x, "xa": frame.xa_x, "za": frame.za_x}[arr]
        tz = {"d": frame.z, "xa": frame.xa_z, "za": frame.za_z}[arr]
        if letter in ("X", "Y"):
            tx[idx] ^= 1
        if letter in ("Z", "Y"):
            tz[idx] ^= 1

    def gate_endpoints(kind, stab, gate):
        if kind == "x":
            if gate <= 3:
                pos = int(layout.x_partners[stab][gate - 1])
            else:
                pos = int(layout.x_swap[stab])
            anc = ("xa", stab)
        else:
            if gate <= 3:
                pos = int(layout.z_partners[stab][gate - 1])
            else:
                pos = int(layout.z_swap[stab])
            anc = ("za", stab)
        data = ("d", pos)
        ctl_role, _ = side_roles(kind, gate)
        return (anc, data) if ctl_role == "anc" else (data, anc)

    def ideal_action(kind, stab, gate):
        ctl, tgt = gate_endpoints(kind, stab, gate)
        if not (carrier_alive(ctl) and carrier_alive(tgt)):
            return
        getx = {"d": frame.x, "xa": frame.xa_x, "za": frame.za_x}
        getz = {"d": frame.z, "xa": frame.xa_z, "za": frame.za_z}
        getx[tgt[0]][tgt[1]] ^= getx[ctl[0]][ctl[1]]
        getz[ctl[0]][ctl[1]] ^= getz[tgt[0]][tgt[1]]

    n_gates = 5 if variant == FIVE_CNOT else 4
    for rnd in range(rounds):
        frame.xa_x[:] = 0
        frame.xa_z[:] = 0
        frame.za_x[:] = 0
        frame.za_z[:] = 0
        ax[:] = ALIVE
        az[:] = ALIVE
        for gate in range(1, n_gates + 1):
            for kind in ("x", "z"):
                for stab in range(n_stab):
                    ideal_action(kind, stab, gate)
            for kind in ("x", "z"):
                for stab in range(n_stab):
                    for spec in by_slot.get((rnd, kind, stab, gate), ()):
                        ctl, tgt = gate_endpoints(kind, stab, gate)
                        ctl_role, tgt_role = side_roles(kind, gate)
                        if spec[0] == "pauli":
                            flip(ctl, spec[1][0])
                            flip(tgt, spec[1][1])
                        elif spec[0] == "leak":
                            _, side, detected = spec
                            if side in ("control", "both"):
                                det = detected[0] if side == "both" else detected
                                kill(ctl, bool(det), rnd, kind, stab, gate, ctl_role)
                            if side in ("target", "both"):
                                det = detected[1] if side == "both" else detected
                                kill(tgt, bool(det), rnd, kind, stab, gate, tgt_role)
                        else:
                            raise ValueError(f"unknown fault spec {spec!r}")
        if variant == FEED_FORWARD:
            # fifth gate handled as a noiseless frame update
            for kind in ("x", "z"):
                for stab in range(n_stab):
                    ideal_action(kind, stab, 5)
        for stab in range(n_stab):
            qz = int(layout.z_swap[stab])
            mech_z[rnd, stab] = frame.x[qz]
            z_state[rnd, stab] = adata[qz]
            frame.x[qz] = frame.za_x[stab]
            frame.z[qz] = frame.za_z[stab]
            adata[qz] = az[stab]
            qx = int(layout.x_swap[stab])
            mech_x[rnd, stab] = frame.z[qx]
            x_state[rnd, stab] = adata[qx]
            frame.x[qx] = frame.xa_x[stab]
            frame.z[qx] = frame.xa_z[stab]
            adata[qx] = ax[stab]

    readout = (frame.x ^ readout_flip).astype(np.uint8)
    cum = np.bitwise_xor.accumulate(step_coin[:rounds], axis=0)
    bits_z = (mech_z ^ out_coin ^ cum).astype(np.uint8)
    out_z = bits_z.copy()
    out_z[z_state == LEAKED_DETECTED] = OUTCOME_L
    out_x = mech_x.copy()
    out_x[x_state == LEAKED_DETECTED] = OUTCOME_L

    detectors = np.zeros((rounds + 1, n_stab), dtype=np.uint8)
    detectors[0] = bits_z[0]
    for r in range(1, rounds):
        detectors[r] = bits_z[r] ^ bits_z[r - 1]
    parity = np.zeros(n_stab, dtype=np.uint8)
    for stab in range(n_stab):
        parity[stab] = readout[layout.plaquette_support[stab]].sum() % 2
    detectors[rounds] = parity ^ bits_z[rounds - 1]

    lx1 = int(readout[layout.cut_x1].sum() % 2)
    lx2 = int(readout[layout.cut_x2].sum() % 2)
    lz1 = int(frame.z[layout.logical_x1].sum() % 2)
    lz2 = int(frame.z[layout.logical_x2].sum() % 2)
    return RefResult(
        out_z=out_z,
        out_x=out_x,
        readout=readout,
        readout_flags=adata.copy(),
        detectors=detectors,
        logical_x=(lx1, lx2),
        logical_z=(lz1, lz2),
        final_z=frame.z.copy(),
        coins_used=source.used,
        leak_windows=leak_windows,
    )


def depolarization_effect(layout: ToricLayout, kind: str, stab: int,
                          gate: int, klass: str, rho: int, rounds: int):
    """Net detector and winding flips of an X-component fault, derived by
    injecting the raw Paulis right after the gate and propagating."""
    if klass not in ("XX", "XI", "IX"):
        raise ValueError(f"unknown depolarizing class {klass!r}")
    ctl_role, _ = side_roles(kind, gate)
    anc_letter = "X" if klass in ("XX", "XI") else "I"
    data_letter = "X" if klass in ("XX", "IX") else "I"
    if ctl_role == "anc":
        pair = anc_letter + data_letter
    else:
        pair = data_letter + anc_letter
    res = ref_simulate(layout, rounds,
                       faults=[(rho, kind, stab, gate, ("pauli", pair))])
    flipped = np.flatnonzero(res.detectors.reshape(-1))
    return frozenset(int(v) for v in flipped), res.logical_x


def _derive_leak_row(layout: ToricLayout, kind: str, stab: int, rho: int,
                     site: int, rounds: int) -> tuple[FaultTerm, ...]:
    """Case analysis of one decay site, built from the schedule geometry."""
    wtype = window_type(rho, rounds)
    terms = []
    if kind == "x":
        p1, p2, p3 = (int(v) for v in layout.x_partners[stab])
        q = int(layout.x_swap[stab])
        # spread-phase kicks onto the data partners still to be touched
        kicks = {1: ((p1, 1),), 2: ((p2, 2), (p3, 3)), 3: ((p3, 3),)}
        for pos, when in kicks.get(site, ()):
            own_read = 4 if layout.row_col(pos)[0] % 2 == 0 else None
            if own_read is None:
                # odd-row partner: both plaquettes gather it on gates 2, 3
                first_read = 2
            else:
                # even-row partner: the second plaquette gathered it on
                # gate 1, its own read happens with the swap
                first_read = 1
            if when < first_read:
                terms.append(FaultTerm("D", pos, rho))
            else:
                terms.append(FaultTerm("V", pos, rho))
        if site in (7, 8):
            # the leaked atom was the source of this parity gather
            plaq = int(layout.plaquettes_of[q][1 if site == 7 else 0])
            terms.append(FaultTerm("M", plaq, rho + 1))
        if site <= 7:
            terms.append(FaultTerm("D", q, rho + 1))
        elif site <= 9:
            terms.append(FaultTerm("D", q, rho + 2))
    else:
        q = int(layout.z_swap[stab])
        s_next = int(layout.plaquettes_of[q][1])
        if site <= 4:
            # parity delivery to the measured atom is broken
            terms.append(FaultTerm("M", stab, rho))
        if wtype == WTYPE_FINAL:
            # the erased value surfaces at the transparent readout
            terms.append(FaultTerm("D", q, rho + 1))
        else:
            terms.append(FaultTerm("ME", stab, rho + 1))
            if site <= 6:
                # next round's first gather misses the dead atom
                terms.append(FaultTerm("M", s_next, rho + 1))
            terms.append(FaultTerm("D", q, rho + 2))
    return tuple(terms)


@dataclass(frozen=True)
class FaultTableEntry:
    kind: str
    stab: int
    rho: int
    site: int
    terms: tuple


def derive_fault_tables(layout: ToricLayout, variant: str = FIVE_CNOT,
                        rounds: int = 6) -> list[FaultTableEntry]:
    """Re-derive both fault tables and check them against the golden data.

    Decay rows are compared term by term; depolarizing rows are compared
    as net detector flip vectors after propagating raw injected Paulis.
    Raises AssertionError on any mismatch.
    """
    from .fault_tables import flip_vector

    entries = []
    anchors = [-1, 0, rounds // 2, rounds - 1]
    for kind in ("x", "z"):
        for stab in range(layout.n_stab):
            for rho in anchors:
                wtype = window_type(rho, rounds)
                for site in window_sites(wtype, variant):
                    derived = _derive_leak_row(layout, kind, stab, rho, site, rounds)
                    golden = leak_row(layout, kind, stab, rho, site, rounds, variant)
                    if sorted(derived) != sorted(golden):
                        raise AssertionError(
                            f"decay table mismatch at {kind}{stab} rho={rho} "
                            f"site={site}: derived {derived}, golden {golden}")
                    entries.append(FaultTableEntry(kind, stab, rho, site, derived))
    gates = range(1, 6 if variant == FIVE_CNOT else 5)
    for kind in ("x", "z"):
        for stab in range(layout.n_stab):
            for rho in (0, rounds // 2, rounds - 1):
                for gate in gates:
                    for klass in ("XX", "XI", "IX"):
                        vec = depolarization_effect(
                            layout, kind, stab, gate, klass, rho, rounds)
                        terms = [FaultTerm(k, loc, rho + off) for k, loc, off
                                 in depol_row(layout, kind, stab, gate, klass)]
                        golden_vec = flip_vector(layout, terms, rounds)
                        if vec != golden_vec:
                            raise AssertionError(
                                f"depolarizing table mismatch at {kind}{stab} "
                                f"gate={gate} class={klass} rho={rho}: "
                                f"derived {vec}, golden {golden_vec}")
    return entries
