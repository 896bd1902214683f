"""Detector error model: prior edge graphs and per-shot reweighting.

Every decoder runs on the same unconditional base graph.  Its edges come
from two families of two-detector mechanisms:

  * depolarizing gate faults: each (gate slot, X-component class, round)
    carries probability 4/15 of the Pauli branch rate and flips the net
    detector pair of its consequence row;
  * decay consequences: each (window, site, term) carries half the per-atom
    decay rate and flips the term's detector pair.

Coinciding (detector pair, winding signature) keys are merged with the
exclusive-or union p1 + p2 - 2 p1 p2.  Weights are ln((1-p)/p).

Flag information never changes the graph topology; it produces a per-shot
weight overlay:

  * `reweight_located` (flags on both decay sides): every flagged
    measurement names its extraction window; each term edge of that window
    gains the conditional probability (half the chance the decay sat at the
    site generating it, given one decay in the window), combined with the
    prior by the same union.
  * `reweight_critical` (one-sided flags): each flag is committed to the
    worst consistent hypothesis, a double decay at the first CNOT of a
    measurement window.  The damage cones of the site-specific decays that
    realize that hypothesis (each dead atom's own term edges, including the
    garbage readout and syndrome shortfall of the unflagged partner) drop
    to weight zero; every other edge keeps its prior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .engine import ref_simulate, side_roles
from .fault_tables import (
    FaultTerm,
    depol_row,
    leak_row,
    term_detectors,
    window_sites,
    window_type,
)
from .lattice import FIVE_CNOT, ToricLayout
from .noise import NoiseConfig

__all__ = [
    "DetectorGraph",
    "build_base_graph",
    "reweight_located",
    "reweight_critical",
    "flag_windows",
    "site_given_leak",
    "xor_union",
    "weight_of",
]


def xor_union(p1: float, p2: float) -> float:
    """Probability that exactly one of two independent flips fires."""
    return p1 + p2 - 2.0 * p1 * p2


def weight_of(p: float) -> float:
    if not 0.0 < p < 0.5:
        raise ValueError(f"edge probability {p} outside (0, 0.5)")
    return math.log((1.0 - p) / p)


def site_given_leak(q: float, n: int, k: int) -> float:
    """Chance the decay happened at ordered site k of an n-site window,
    given that the window's atom came out decayed.  q is the per-gate decay
    chance of one atom; the q -> 0 limit is uniform."""
    if not 1 <= k <= n:
        raise ValueError(f"site index {k} outside window of {n}")
    if q == 0.0:
        return 1.0 / n
    return q * (1.0 - q) ** (k - 1) / (1.0 - (1.0 - q) ** n)


@dataclass
class DetectorGraph:
    """Immutable prior graph plus the lookup tables overlays need."""

    layout: ToricLayout
    cfg: NoiseConfig
    rounds: int
    basis: str
    n_det: int
    # one entry per (detector pair, winding signature) edge
    eu: np.ndarray
    ev: np.ndarray
    esig: np.ndarray
    ep: np.ndarray
    ew: np.ndarray
    # deduplicated pairs backing the sparse adjacency
    pu: np.ndarray
    pv: np.ndarray
    pair_start: np.ndarray
    pair_edges: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    csr_pid: np.ndarray
    # window key -> (edge ids, conditional probabilities)
    located: dict = field(default_factory=dict)
    # (z stab, rho, site 1|6) -> edge ids of that decay's damage cone
    critical: dict = field(default_factory=dict)
    pair_id: dict = field(default_factory=dict)

    @property
    def n_edges(self) -> int:
        return self.eu.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.pu.shape[0]

    def base_weights(self) -> np.ndarray:
        return self.ew.copy()

    def pair_view(self, w: np.ndarray):
        """Per-pair minimum weight and the signature of the cheapest edge."""
        pw = np.empty(self.n_pairs, dtype=np.float64)
        psig = np.empty(self.n_pairs, dtype=np.uint8)
        for i in range(self.n_pairs):
            lo = self.pair_start[i]
            hi = self.pair_start[i + 1]
            eids = self.pair_edges[lo:hi]
            j = eids[np.argmin(w[eids])]
            pw[i] = w[j]
            psig[i] = self.esig[j]
        return pw, psig

    def csr_weights(self, pw: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix((pw[self.csr_pid], self.indices, self.indptr),
                             shape=(self.n_det, self.n_det))


def _sig(bits) -> int:
    return int(bits[0]) | (int(bits[1]) << 1)


def _det_id(n_stab: int, det) -> int:
    layer, plaq = det
    return layer * n_stab + plaq


class _Accumulator:
    def __init__(self):
        self.prob = {}

    def add(self, a: int, b: int, sig: int, p: float) -> tuple:
        key = (a, b, sig) if a < b else (b, a, sig)
        self.prob[key] = xor_union(self.prob.get(key, 0.0), p)
        return key


def _finalize(layout, cfg, rounds, basis, n_det, acc, located_raw,
              critical_raw=None):
    keys = sorted(acc.prob)
    eu = np.array([k[0] for k in keys], dtype=np.int32)
    ev = np.array([k[1] for k in keys], dtype=np.int32)
    esig = np.array([k[2] for k in keys], dtype=np.uint8)
    ep = np.array([acc.prob[k] for k in keys], dtype=np.float64)
    ew = np.array([weight_of(p) for p in ep], dtype=np.float64)
    index = {k: i for i, k in enumerate(keys)}

    pair_groups: dict[tuple, list] = {}
    for i, k in enumerate(keys):
        pair_groups.setdefault((k[0], k[1]), []).append(i)
    pairs = sorted(pair_groups)
    pu = np.array([p[0] for p in pairs], dtype=np.int32)
    pv = np.array([p[1] for p in pairs], dtype=np.int32)
    pair_start = np.zeros(len(pairs) + 1, dtype=np.int64)
    flat = []
    for i, p in enumerate(pairs):
        flat.extend(pair_groups[p])
        pair_start[i + 1] = len(flat)
    pair_edges = np.array(flat, dtype=np.int64)
    pair_id = {p: i for i, p in enumerate(pairs)}

    rows = np.concatenate([pu, pv])
    cols = np.concatenate([pv, pu])
    pid2 = np.concatenate([np.arange(len(pairs)), np.arange(len(pairs))])
    adj = sp.csr_matrix((pid2 + 1, (rows, cols)), shape=(n_det, n_det))
    csr_pid = (adj.data - 1).astype(np.int64)

    located = {}
    for window, contrib in located_raw.items():
        eids = np.array([index[k] for k in sorted(contrib)], dtype=np.int64)
        pc = np.array([0.5 * contrib[k] for k in sorted(contrib)],
                      dtype=np.float64)
        located[window] = (eids, pc)

    critical = {}
    for (stab, rho, site), keys in (critical_raw or {}).items():
        critical[stab, rho, site] = np.array(
            sorted(index[k] for k in keys), dtype=np.int64)

    return DetectorGraph(
        layout=layout, cfg=cfg, rounds=rounds, basis=basis, n_det=n_det,
        eu=eu, ev=ev, esig=esig, ep=ep, ew=ew,
        pu=pu, pv=pv, pair_start=pair_start, pair_edges=pair_edges,
        indptr=adj.indptr, indices=adj.indices, csr_pid=csr_pid,
        located=located, critical=critical, pair_id=pair_id)


def build_base_graph(layout: ToricLayout, cfg: NoiseConfig, rounds: int,
                     basis: str = "X") -> DetectorGraph:
    """Unconditional prior graph for one noise setting.

    basis "X" is the plaquette graph the decoders run on: depolarizing
    mechanisms plus every decay consequence term.  basis "Z" is the dual
    star-detector graph of the depolarizing channel alone, built by
    propagating each Z-component class through the reference engine.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    if basis == "Z":
        return _build_dual(layout, cfg, rounds)
    if basis != "X":
        raise ValueError(f"unknown basis {basis!r}")
    n_stab = layout.n_stab
    n_det = (rounds + 1) * n_stab
    n_gates = 5 if cfg.variant == FIVE_CNOT else 4
    acc = _Accumulator()
    located_raw: dict[tuple, dict] = {}

    p_class = 4.0 * cfg.p_p / 15.0
    if p_class > 0.0:
        for kind in ("x", "z"):
            for gate in range(1, n_gates + 1):
                for stab in range(n_stab):
                    for klass in ("XX", "XI", "IX"):
                        row = depol_row(layout, kind, stab, gate, klass)
                        for r in range(rounds):
                            terms = [FaultTerm(tk, loc, r + off)
                                     for tk, loc, off in row]
                            dets = set()
                            for t in terms:
                                for dd in term_detectors(layout, t, rounds)[0]:
                                    i = _det_id(n_stab, dd)
                                    dets.symmetric_difference_update({i})
                            bits = [0, 0]
                            for t in terms:
                                tb = term_detectors(layout, t, rounds)[1]
                                bits[0] ^= tb[0]
                                bits[1] ^= tb[1]
                            if not dets:
                                if bits != [0, 0]:
                                    raise AssertionError(
                                        "undetectable winding mechanism")
                                continue
                            if len(dets) != 2:
                                raise AssertionError(
                                    f"{len(dets)}-detector mechanism at "
                                    f"({kind}, {stab}, {gate}, {klass})")
                            a, b = sorted(dets)
                            acc.add(a, b, _sig(bits), p_class)

    r_l = 0.5 * cfg.p_e * (1.0 + cfg.eta)
    critical_raw: dict[tuple, set] = {}
    if r_l > 0.0:
        q = 0.5 * cfg.p_e
        for kind in ("x", "z"):
            for stab in range(n_stab):
                for rho in range(-1, rounds):
                    wtype = window_type(rho, rounds)
                    sites = window_sites(wtype, cfg.variant)
                    n = len(sites)
                    contrib = located_raw.setdefault((kind, stab, rho), {})
                    for pos, site in enumerate(sites, start=1):
                        pk = site_given_leak(q, n, pos)
                        row = leak_row(layout, kind, stab, rho, site, rounds,
                                       cfg.variant)
                        cone = None
                        if kind == "z" and site in (1, 6):
                            cone = critical_raw.setdefault(
                                (stab, rho, site), set())
                        for term in row:
                            dets, bits = term_detectors(layout, term, rounds)
                            a = _det_id(n_stab, dets[0])
                            b = _det_id(n_stab, dets[1])
                            if a == b:
                                raise AssertionError(
                                    f"degenerate term {term}")
                            key = acc.add(a, b, _sig(bits), 0.5 * r_l)
                            contrib[key] = contrib.get(key, 0.0) + pk
                            if cone is not None:
                                cone.add(key)

    return _finalize(layout, cfg, rounds, "X", n_det, acc, located_raw,
                     critical_raw)


def _build_dual(layout: ToricLayout, cfg: NoiseConfig,
                rounds: int) -> DetectorGraph:
    """Star-detector graph of the depolarizing channel, closed at the end
    by the star parities of the final Z frames (the record an X-basis
    transparent readout would produce)."""
    n_stab = layout.n_stab
    n_det = (rounds + 1) * n_stab
    n_gates = 5 if cfg.variant == FIVE_CNOT else 4
    acc = _Accumulator()
    p_class = 4.0 * cfg.p_p / 15.0
    for kind in ("x", "z"):
        for gate in range(1, n_gates + 1):
            for stab in range(n_stab):
                for klass in ("XX", "XI", "IX"):
                    ctl_role, _ = side_roles(kind, gate)
                    anc = "Z" if klass[0] == "X" else "I"
                    dat = "Z" if klass[1] == "X" else "I"
                    pair = anc + dat if ctl_role == "anc" else dat + anc
                    for r in range(rounds):
                        res = ref_simulate(
                            layout, rounds, variant=cfg.variant,
                            faults=[(r, kind, stab, gate, ("pauli", pair))])
                        bits = np.zeros((rounds + 1, n_stab), dtype=np.uint8)
                        bits[0] = res.out_x[0]
                        for rr in range(1, rounds):
                            bits[rr] = res.out_x[rr] ^ res.out_x[rr - 1]
                        for s in range(n_stab):
                            par = res.final_z[layout.star_support[s]].sum() % 2
                            bits[rounds, s] = par ^ res.out_x[rounds - 1, s]
                        dets = np.flatnonzero(bits.reshape(-1))
                        lz = res.logical_z
                        if dets.size == 0:
                            if lz != (0, 0):
                                raise AssertionError(
                                    "undetectable winding mechanism")
                            continue
                        if dets.size != 2:
                            raise AssertionError(
                                f"{dets.size}-detector dual mechanism")
                        acc.add(int(dets[0]), int(dets[1]), _sig(lz),
                                p_class)
    return _finalize(layout, cfg, rounds, "Z", n_det, acc, {})


def flag_windows(graph: DetectorGraph, flag_z: np.ndarray,
                 flag_x: np.ndarray, flag_final: np.ndarray) -> list:
    """Extraction windows named by a shot's decay flags.

    A flagged outcome (s, r) points at window (kind, s, r - 1); a flagged
    readout site points at the last window that parked its atom there.
    """
    lay = graph.layout
    rounds = graph.rounds
    windows = []
    for r, s in np.argwhere(flag_z):
        windows.append(("z", int(s), int(r) - 1))
    for r, s in np.argwhere(flag_x):
        windows.append(("x", int(s), int(r) - 1))
    z_inv = {int(lay.z_swap[s]): s for s in range(lay.n_stab)}
    x_inv = {int(lay.x_swap[s]): s for s in range(lay.n_stab)}
    for (pos,) in np.argwhere(flag_final):
        pos = int(pos)
        if pos in z_inv:
            windows.append(("z", z_inv[pos], rounds - 1))
        else:
            windows.append(("x", x_inv[pos], rounds - 1))
    return windows


def reweight_located(graph: DetectorGraph, flag_z: np.ndarray,
                     flag_x: np.ndarray,
                     flag_final: np.ndarray) -> np.ndarray:
    """Per-shot weights conditioned on fully located decay flags."""
    w = graph.ew.copy()
    windows = flag_windows(graph, flag_z, flag_x, flag_final)
    if not windows:
        return w
    p = None
    touched = None
    for window in windows:
        hit = graph.located.get(window)
        if hit is None:
            continue
        if p is None:
            p = graph.ep.copy()
            touched = np.zeros(graph.n_edges, dtype=bool)
        eids, pc = hit
        p[eids] = p[eids] + pc - 2.0 * p[eids] * pc
        touched[eids] = True
    if p is not None:
        idx = np.flatnonzero(touched)
        # composition keeps p <= 1/2; round a stray ulp back down
        pe = np.minimum(p[idx], 0.5)
        w[idx] = np.log((1.0 - pe) / pe)
    return w


def reweight_critical(graph: DetectorGraph, flag_z: np.ndarray,
                      flag_final: np.ndarray) -> np.ndarray:
    """Per-shot weights when only one decay species is observable.

    Every flag is read as one half of a double decay at a first CNOT,
    the worst fault consistent with it.  A flag at (r, u) is either the
    ancilla side of a double decay at its own window's first gate
    (partner = the data atom of the lower neighbor's window two rounds
    back, hit at its site 6) or the data side of one at the upper
    neighbor's window seeded in round r (own death site 6, partner hit
    at site 1).  The full damage cones of those site-specific decays
    drop to weight zero, which covers both erasure halves of a real
    double decay plus the syndrome shortfall and garbage readout of its
    undetected partner.  Everything else keeps its prior, so lone
    single-decay flags just cheapen a handful of edges.
    """
    lay = graph.layout
    d = lay.d
    rounds = graph.rounds
    w = graph.ew.copy()
    spots = [(int(r), int(s)) for r, s in np.argwhere(flag_z)]
    z_inv = {int(lay.z_swap[s]): s for s in range(lay.n_stab)}
    for (pos,) in np.argwhere(flag_final):
        s = z_inv.get(int(pos))
        if s is not None:
            spots.append((rounds, s))
    for r, u in spots:
        i, j = divmod(u, d)
        up = ((i - 1) % d) * d + j
        down = ((i + 1) % d) * d + j
        for cone in ((u, r - 1, 1), (u, r - 1, 6),
                     (up, r, 1), (down, r - 2, 6)):
            eids = graph.critical.get(cone)
            if eids is not None:
                w[eids] = 0.0
    return w
