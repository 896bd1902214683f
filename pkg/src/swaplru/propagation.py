"""Monte Carlo propagation of the swap-based extraction circuit.

Two paths share one physics definition:

  * `engine.ref_simulate` is the slow single-shot reference with hand-placed
    faults; its behaviour is pinned against the consequence tables.
  * `simulate_batch` is the production path: a compiled kernel that samples
    faults per gate slot and realizes decay consequences through the same
    precomputed rows.  `simulate_shot` is the one-shot wrapper around it.

Shots are generated in fixed chunks of `CHUNK` so a run split across any
number of workers reproduces the single-worker stream byte for byte: chunk
``i`` always covers shots ``[i * CHUNK, (i + 1) * CHUNK)`` and is seeded from
``SeedSequence([seed, i])`` regardless of who executes it.

Decay detection semantics (`detection_mode`):

  * "both": every leaked atom is flagged when it reaches a measurement.
  * "one_type": a single decayed atom is flagged with probability
    `detect_ratio`; when both atoms of a gate decay together, exactly one of
    the two (fair coin) is flagged.  If one endpoint was already dead the
    survivor falls back to the `detect_ratio` coin.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .engine import (
    ALIVE,
    LEAKED,
    LEAKED_DETECTED,
    OUTCOME_L,
    FaultTableEntry,
    PauliFrame,
    depolarization_effect,
    derive_fault_tables,
    propagate_kraus_cnot,
    ref_simulate,
    side_roles,
)
from .fault_tables import endpoint_window, leak_row
from .lattice import FEED_FORWARD, FIVE_CNOT, ToricLayout
from .noise import (
    DETECT_BOTH,
    DETECT_ONE_TYPE,
    GateFault,
    NoiseConfig,
    fault_probabilities,
    pauli_pair,
)

__all__ = [
    "CHUNK",
    "BatchResult",
    "ShotRecord",
    "simulate_batch",
    "simulate_shot",
    "sample_faults",
    # physics layer re-exported for callers that want the reference path
    "ref_simulate",
    "derive_fault_tables",
    "depolarization_effect",
    "propagate_kraus_cnot",
    "PauliFrame",
    "FaultTableEntry",
    "ALIVE",
    "LEAKED",
    "LEAKED_DETECTED",
    "OUTCOME_L",
]

CHUNK = 1024

_TERM_CODE = {"D": 0, "V": 1, "M": 2, "ME": 3}
_REP_ROUNDS = 8


@dataclass(frozen=True)
class _SimTables:
    """Static per-(distance, variant) data consumed by the kernel."""

    n_gates: int
    xp: np.ndarray
    zp: np.ndarray
    xq: np.ndarray
    zq: np.ndarray
    pl_of: np.ndarray
    pl_sup: np.ndarray
    cut1: np.ndarray
    cut2: np.ndarray
    lsup1: np.ndarray
    lsup2: np.ndarray
    tstart: np.ndarray
    tcount: np.ndarray
    tkind: np.ndarray
    tloc: np.ndarray
    trel: np.ndarray


_TABLE_CACHE: dict[tuple[int, str], _SimTables] = {}

_PAULI_LUT = np.zeros((21, 4), dtype=np.uint8)
for _code in range(1, 16):
    _pair = pauli_pair(GateFault(_code))
    _PAULI_LUT[_code, 0] = _pair[0] in "XY"
    _PAULI_LUT[_code, 1] = _pair[0] in "ZY"
    _PAULI_LUT[_code, 2] = _pair[1] in "XY"
    _PAULI_LUT[_code, 3] = _pair[1] in "ZY"


def build_sim_tables(layout: ToricLayout, variant: str = FIVE_CNOT) -> _SimTables:
    """Flatten the decay consequence rows into kernel-ready arrays.

    Rows are stored per (stabilizer kind, gate, gate side, stabilizer,
    window position), with epochs relative to the window round so one table
    serves every round.  Window position 0 is the generic interior row;
    position 1 is the boundary variant (final window on the ancilla side,
    first window on the data side).
    """
    key = (layout.d, variant)
    cached = _TABLE_CACHE.get(key)
    if cached is not None:
        return cached
    n_gates = 5 if variant == FIVE_CNOT else 4
    n_stab = layout.n_stab
    n_slots = 2 * 5 * 2 * n_stab * 2
    tstart = np.zeros(n_slots, dtype=np.int64)
    tcount = np.zeros(n_slots, dtype=np.int64)
    tkind, tloc, trel = [], [], []
    for k, kind in enumerate(("x", "z")):
        for gate in range(1, n_gates + 1):
            roles = side_roles(kind, gate)
            for side in range(2):
                role = roles[side]
                for stab in range(n_stab):
                    for sp in range(2):
                        if role == "anc":
                            rnd = (_REP_ROUNDS - 1) if sp else 3
                        else:
                            rnd = 0 if sp else 4
                        window, site = endpoint_window(
                            layout, kind, stab, gate, role, rnd)
                        wkind, wstab, wrho = window
                        row = leak_row(layout, wkind, wstab, wrho, site,
                                       _REP_ROUNDS, variant)
                        tid = ((((k * 5 + gate - 1) * 2 + side)
                                * n_stab + stab) * 2 + sp)
                        tstart[tid] = len(tkind)
                        tcount[tid] = len(row)
                        for term in row:
                            tkind.append(_TERM_CODE[term.kind])
                            tloc.append(term.loc)
                            trel.append(term.epoch - wrho)
    tables = _SimTables(
        n_gates=n_gates,
        xp=np.ascontiguousarray(layout.x_partners, dtype=np.int32),
        zp=np.ascontiguousarray(layout.z_partners, dtype=np.int32),
        xq=np.ascontiguousarray(layout.x_swap, dtype=np.int32),
        zq=np.ascontiguousarray(layout.z_swap, dtype=np.int32),
        pl_of=np.ascontiguousarray(layout.plaquettes_of, dtype=np.int32),
        pl_sup=np.ascontiguousarray(layout.plaquette_support, dtype=np.int32),
        cut1=np.ascontiguousarray(layout.cut_x1, dtype=np.int32),
        cut2=np.ascontiguousarray(layout.cut_x2, dtype=np.int32),
        lsup1=np.ascontiguousarray(layout.logical_x1, dtype=np.int32),
        lsup2=np.ascontiguousarray(layout.logical_x2, dtype=np.int32),
        tstart=tstart,
        tcount=tcount,
        tkind=np.asarray(tkind, dtype=np.uint8),
        tloc=np.asarray(tloc, dtype=np.int32),
        trel=np.asarray(trel, dtype=np.int8),
    )
    _TABLE_CACHE[key] = tables
    return tables


@njit(cache=True, nogil=True)
def _sim_chunk(seed, nshots, offset, rounds, n_gates, n_stab, n_data,
               xp, zp, xq, zq, pl_of, pl_sup, cut1, cut2, lsup1, lsup2,
               cum, plut, tstart, tcount, tkind, tloc, trel,
               mode, dratio,
               det_o, outz_o, outx_o, rdout_o, rflag_o, logi_o):
    np.random.seed(seed)
    x = np.zeros(n_data, np.uint8)
    z = np.zeros(n_data, np.uint8)
    st_d = np.zeros(n_data, np.uint8)
    xa_x = np.zeros(n_stab, np.uint8)
    xa_z = np.zeros(n_stab, np.uint8)
    za_x = np.zeros(n_stab, np.uint8)
    za_z = np.zeros(n_stab, np.uint8)
    st_xa = np.zeros(n_stab, np.uint8)
    st_za = np.zeros(n_stab, np.uint8)
    mech_z = np.zeros((rounds, n_stab), np.uint8)
    mech_x = np.zeros((rounds, n_stab), np.uint8)
    stz = np.zeros((rounds, n_stab), np.uint8)
    stx = np.zeros((rounds, n_stab), np.uint8)
    outc = np.zeros((rounds, n_stab), np.uint8)
    step = np.zeros((rounds + 1, n_stab), np.uint8)
    rflip = np.zeros(n_data, np.uint8)
    acc = np.zeros(n_stab, np.uint8)
    bits = np.zeros((rounds, n_stab), np.uint8)

    for shot in range(nshots):
        x[:] = 0
        z[:] = 0
        st_d[:] = 0
        mech_z[:] = 0
        mech_x[:] = 0
        stz[:] = 0
        stx[:] = 0
        outc[:] = 0
        step[:] = 0
        rflip[:] = 0
        for r in range(rounds):
            xa_x[:] = 0
            xa_z[:] = 0
            za_x[:] = 0
            za_z[:] = 0
            st_xa[:] = 0
            st_za[:] = 0
            for g in range(1, n_gates + 1):
                for s in range(n_stab):
                    pos = xp[s, g - 1] if g <= 3 else xq[s]
                    if st_xa[s] == 0 and st_d[pos] == 0:
                        if g == 4:
                            xa_x[s] ^= x[pos]
                            z[pos] ^= xa_z[s]
                        else:
                            x[pos] ^= xa_x[s]
                            xa_z[s] ^= z[pos]
                for s in range(n_stab):
                    pos = zp[s, g - 1] if g <= 3 else zq[s]
                    if st_za[s] == 0 and st_d[pos] == 0:
                        if g == 4:
                            x[pos] ^= za_x[s]
                            za_z[s] ^= z[pos]
                        else:
                            za_x[s] ^= x[pos]
                            z[pos] ^= za_z[s]
                for k in range(2):
                    for s in range(n_stab):
                        u = np.random.random()
                        if u < cum[0]:
                            continue
                        code = 1
                        while code < 20 and u >= cum[code]:
                            code += 1
                        if k == 0:
                            pos = xp[s, g - 1] if g <= 3 else xq[s]
                            anc_is_ctl = g != 4
                        else:
                            pos = zp[s, g - 1] if g <= 3 else zq[s]
                            anc_is_ctl = g == 4
                        if k == 0:
                            anc_alive = st_xa[s] == 0
                        else:
                            anc_alive = st_za[s] == 0
                        dat_alive = st_d[pos] == 0
                        if code <= 15:
                            if anc_is_ctl:
                                a_x, a_z = plut[code, 0], plut[code, 1]
                                d_x, d_z = plut[code, 2], plut[code, 3]
                            else:
                                a_x, a_z = plut[code, 2], plut[code, 3]
                                d_x, d_z = plut[code, 0], plut[code, 1]
                            if anc_alive:
                                if k == 0:
                                    xa_x[s] ^= a_x
                                    xa_z[s] ^= a_z
                                else:
                                    za_x[s] ^= a_x
                                    za_z[s] ^= a_z
                            if dat_alive:
                                x[pos] ^= d_x
                                z[pos] ^= d_z
                            continue
                        leak_ctl = code == 16 or code == 17 or code == 20
                        leak_tgt = code == 18 or code == 19 or code == 20
                        det_ctl = False
                        det_tgt = False
                        if code == 20:
                            ctl_alive = anc_alive if anc_is_ctl else dat_alive
                            tgt_alive = dat_alive if anc_is_ctl else anc_alive
                            if ctl_alive and tgt_alive:
                                if mode == 0:
                                    det_ctl = True
                                    det_tgt = True
                                elif np.random.random() < 0.5:
                                    det_ctl = True
                                else:
                                    det_tgt = True
                            elif ctl_alive:
                                det_ctl = (mode == 0
                                           or np.random.random() < dratio)
                            elif tgt_alive:
                                det_tgt = (mode == 0
                                           or np.random.random() < dratio)
                        else:
                            if leak_ctl:
                                det_ctl = (mode == 0
                                           or np.random.random() < dratio)
                            else:
                                det_tgt = (mode == 0
                                           or np.random.random() < dratio)
                        for side in range(2):
                            if side == 0:
                                if not leak_ctl:
                                    continue
                                detected = det_ctl
                            else:
                                if not leak_tgt:
                                    continue
                                detected = det_tgt
                            is_anc = anc_is_ctl == (side == 0)
                            if is_anc:
                                if k == 0:
                                    if st_xa[s] != 0:
                                        continue
                                    st_xa[s] = 2 if detected else 1
                                    xa_x[s] = 0
                                    xa_z[s] = 0
                                else:
                                    if st_za[s] != 0:
                                        continue
                                    st_za[s] = 2 if detected else 1
                                    za_x[s] = 0
                                    za_z[s] = 0
                                sp = 1 if r == rounds - 1 else 0
                                rho = r
                            else:
                                if st_d[pos] != 0:
                                    continue
                                st_d[pos] = 2 if detected else 1
                                x[pos] = 0
                                z[pos] = 0
                                sp = 1 if r == 0 else 0
                                rho = r - 1
                            tid = ((((k * 5 + g - 1) * 2 + side)
                                    * n_stab + s) * 2 + sp)
                            t0 = tstart[tid]
                            for ti in range(t0, t0 + tcount[tid]):
                                if np.random.random() >= 0.5:
                                    continue
                                kd = tkind[ti]
                                loc = tloc[ti]
                                e = rho + trel[ti]
                                if kd >= 2:
                                    outc[e, loc] ^= 1
                                elif kd == 0:
                                    rflip[loc] ^= 1
                                    if e < rounds:
                                        step[e, pl_of[loc, 0]] ^= 1
                                        step[e, pl_of[loc, 1]] ^= 1
                                else:
                                    rflip[loc] ^= 1
                                    step[e, pl_of[loc, 0]] ^= 1
                                    if e + 1 < rounds:
                                        step[e + 1, pl_of[loc, 1]] ^= 1
            if n_gates == 4:
                for s in range(n_stab):
                    pos = xq[s]
                    if st_xa[s] == 0 and st_d[pos] == 0:
                        x[pos] ^= xa_x[s]
                        xa_z[s] ^= z[pos]
                for s in range(n_stab):
                    pos = zq[s]
                    if st_za[s] == 0 and st_d[pos] == 0:
                        za_x[s] ^= x[pos]
                        z[pos] ^= za_z[s]
            for s in range(n_stab):
                q = zq[s]
                mech_z[r, s] = x[q]
                stz[r, s] = st_d[q]
                x[q] = za_x[s]
                z[q] = za_z[s]
                st_d[q] = st_za[s]
                q = xq[s]
                mech_x[r, s] = z[q]
                stx[r, s] = st_d[q]
                x[q] = xa_x[s]
                z[q] = xa_z[s]
                st_d[q] = st_xa[s]

        row = offset + shot
        acc[:] = 0
        for r in range(rounds):
            for s in range(n_stab):
                acc[s] ^= step[r, s]
                bit = mech_z[r, s] ^ outc[r, s] ^ acc[s]
                bits[r, s] = bit
                outz_o[row, r * n_stab + s] = 2 if stz[r, s] == 2 else bit
                outx_o[row, r * n_stab + s] = (
                    2 if stx[r, s] == 2 else mech_x[r, s])
        for i in range(n_data):
            rdout_o[row, i] = x[i] ^ rflip[i]
            rflag_o[row, i] = st_d[i]
        for s in range(n_stab):
            det_o[row, s] = bits[0, s]
            for r in range(1, rounds):
                det_o[row, r * n_stab + s] = bits[r, s] ^ bits[r - 1, s]
            par = np.uint8(0)
            for j in range(4):
                par ^= rdout_o[row, pl_sup[s, j]]
            det_o[row, rounds * n_stab + s] = par ^ bits[rounds - 1, s]
        lx1 = np.uint8(0)
        for i in range(cut1.shape[0]):
            lx1 ^= rdout_o[row, cut1[i]]
        lx2 = np.uint8(0)
        for i in range(cut2.shape[0]):
            lx2 ^= rdout_o[row, cut2[i]]
        lz1 = np.uint8(0)
        for i in range(lsup1.shape[0]):
            lz1 ^= z[lsup1[i]]
        lz2 = np.uint8(0)
        for i in range(lsup2.shape[0]):
            lz2 ^= z[lsup2[i]]
        logi_o[row, 0] = lx1
        logi_o[row, 1] = lx2
        logi_o[row, 2] = lz1
        logi_o[row, 3] = lz2


@dataclass
class BatchResult:
    """Per-shot records of a sampled batch.

    Outcome arrays use 0/1 bits with `OUTCOME_L` (2) marking flagged decayed
    measurements; `readout_flags` carries the atom state at the transparent
    readout (0 intact, 1 silent decay, 2 flagged decay).
    """

    d: int
    rounds: int
    detectors: np.ndarray      # (shots, rounds + 1, n_stab) uint8
    out_z: np.ndarray          # (shots, rounds, n_stab) uint8
    out_x: np.ndarray          # (shots, rounds, n_stab) uint8
    readout: np.ndarray        # (shots, n_data) uint8
    readout_flags: np.ndarray  # (shots, n_data) uint8
    logical_x: np.ndarray      # (shots, 2) uint8
    logical_z: np.ndarray      # (shots, 2) uint8

    @property
    def shots(self) -> int:
        return self.detectors.shape[0]

    def record(self, i: int) -> "ShotRecord":
        return ShotRecord(
            out_z=self.out_z[i],
            out_x=self.out_x[i],
            readout=self.readout[i],
            readout_flags=self.readout_flags[i],
            detectors=self.detectors[i],
            logical_x=(int(self.logical_x[i, 0]), int(self.logical_x[i, 1])),
            logical_z=(int(self.logical_z[i, 0]), int(self.logical_z[i, 1])),
        )


@dataclass
class ShotRecord:
    """One sampled shot in the same layout as the reference result."""

    out_z: np.ndarray
    out_x: np.ndarray
    readout: np.ndarray
    readout_flags: np.ndarray
    detectors: np.ndarray
    logical_x: tuple[int, int]
    logical_z: tuple[int, int]


def _chunk_seed(seed: int, chunk_index: int) -> int:
    return int(np.random.SeedSequence([seed, chunk_index])
               .generate_state(1, np.uint32)[0])


def simulate_batch(layout: ToricLayout, cfg: NoiseConfig, rounds: int,
                   shots: int, seed: int,
                   first_chunk: int = 0) -> BatchResult:
    """Sample `shots` shots starting at chunk `first_chunk`.

    The stream is a pure function of (layout, cfg, rounds, seed, chunk
    index); callers parallelize by handing disjoint chunk ranges to workers
    and concatenating in chunk order.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if shots < 1:
        raise ValueError("shots must be >= 1")
    tab = build_sim_tables(layout, cfg.variant)
    n_stab, n_data = layout.n_stab, layout.n_data
    cum = np.cumsum(fault_probabilities(cfg))
    cum[-1] = 1.0
    mode = 0 if cfg.detection_mode == DETECT_BOTH else 1

    det = np.zeros((shots, (rounds + 1) * n_stab), dtype=np.uint8)
    outz = np.zeros((shots, rounds * n_stab), dtype=np.uint8)
    outx = np.zeros((shots, rounds * n_stab), dtype=np.uint8)
    rdout = np.zeros((shots, n_data), dtype=np.uint8)
    rflag = np.zeros((shots, n_data), dtype=np.uint8)
    logi = np.zeros((shots, 4), dtype=np.uint8)

    done = 0
    chunk = first_chunk
    while done < shots:
        n = min(CHUNK, shots - done)
        _sim_chunk(_chunk_seed(seed, chunk), n, done, rounds, tab.n_gates,
                   n_stab, n_data, tab.xp, tab.zp, tab.xq, tab.zq,
                   tab.pl_of, tab.pl_sup, tab.cut1, tab.cut2,
                   tab.lsup1, tab.lsup2, cum, _PAULI_LUT,
                   tab.tstart, tab.tcount, tab.tkind, tab.tloc, tab.trel,
                   mode, cfg.detect_ratio,
                   det, outz, outx, rdout, rflag, logi)
        done += n
        chunk += 1

    return BatchResult(
        d=layout.d,
        rounds=rounds,
        detectors=det.reshape(shots, rounds + 1, n_stab),
        out_z=outz.reshape(shots, rounds, n_stab),
        out_x=outx.reshape(shots, rounds, n_stab),
        readout=rdout,
        readout_flags=rflag,
        logical_x=logi[:, :2],
        logical_z=logi[:, 2:],
    )


def simulate_shot(layout: ToricLayout, cfg: NoiseConfig, rounds: int,
                  rng: np.random.Generator) -> ShotRecord:
    """Sample a single shot through the production kernel."""
    seed = int(rng.integers(0, 2**63 - 1))
    return simulate_batch(layout, cfg, rounds, 1, seed).record(0)


def sample_faults(layout: ToricLayout, cfg: NoiseConfig, rounds: int,
                  rng: np.random.Generator):
    """Draw a fault list for `ref_simulate`, slot by slot.

    Stateless reference sampler used to cross-check the kernel.  It cannot
    see which atoms are already dead, so a double decay whose endpoint died
    earlier resolves its detection with the fair "exactly one" coin rather
    than the survivor's `detect_ratio` coin; the kernel applies the ratio
    there.  The branches only differ at second order in the decay rate and
    coincide at detect_ratio = 0.5.
    """
    cum = np.cumsum(fault_probabilities(cfg))
    cum[-1] = 1.0
    n_gates = 5 if cfg.variant == FIVE_CNOT else 4
    both = cfg.detection_mode == DETECT_BOTH
    faults = []
    for rnd in range(rounds):
        for gate in range(1, n_gates + 1):
            for kind in ("x", "z"):
                for stab in range(layout.n_stab):
                    u = rng.random()
                    if u < cum[0]:
                        continue
                    code = GateFault(int(np.searchsorted(cum, u, "right")))
                    slot = (rnd, kind, stab, gate)
                    if code <= 15:
                        faults.append(slot + (("pauli", pauli_pair(code)),))
                    elif code == GateFault.LEAK_BOTH:
                        if both:
                            det = (True, True)
                        elif rng.random() < 0.5:
                            det = (True, False)
                        else:
                            det = (False, True)
                        faults.append(slot + (("leak", "both", det),))
                    else:
                        side = ("control" if code in (GateFault.LEAK_CONTROL,
                                GateFault.LEAK_CONTROL_KICK) else "target")
                        det = both or bool(rng.random() < cfg.detect_ratio)
                        faults.append(slot + (("leak", side, det),))
    return faults
