"""Matching decoders: detection events to logical correction classes.

Three decoders share one machinery and differ only in the weight overlay:

  * trivial: the unconditional prior graph, decay flags ignored;
  * located: flags name their extraction windows and each window's
    conditional decay terms sharpen the prior (both-sided detection);
  * critical: located reweighting of the flags themselves, and each
    flag additionally frees the partner window of a hypothesized
    double decay at its first CNOT.

Per shot the decoder extracts defects (raised detector bits), computes
exact shortest-path distances from each defect to its `neighbors`
nearest defects over the weighted graph, and picks a minimum weight
perfect matching of the defect set with the blossom solver.  Every
matched pair's path is then walked to accumulate the winding signature
of the correction; a logical failure is a mismatch between that
signature and the sampled one.

If the truncated defect graph has no perfect matching the decoder falls
back to the full distance matrix.  `brute_force_decode` is an
independent second route (scipy distances, exhaustive pairing) used to
cross-check the fast path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.csgraph as csgraph
from numba import njit

from .blossom import min_weight_perfect_matching
from .dem import DetectorGraph, reweight_critical, reweight_located
from .engine import LEAKED_DETECTED, OUTCOME_L

__all__ = [
    "TRIVIAL",
    "LOCATED",
    "CRITICAL",
    "DECODERS",
    "DecodeResult",
    "MatchingDecoder",
    "decode_batch",
    "brute_force_decode",
]

TRIVIAL = "trivial"
LOCATED = "located"
CRITICAL = "critical"
DECODERS = (TRIVIAL, LOCATED, CRITICAL)


@njit(cache=True)
def _pair_min(w, esig, pair_edges, pair_start, pw, psig):
    for i in range(pw.shape[0]):
        lo = pair_start[i]
        hi = pair_start[i + 1]
        best = pair_edges[lo]
        bw = w[best]
        for t in range(lo + 1, hi):
            e = pair_edges[t]
            if w[e] < bw:
                bw = w[e]
                best = e
        pw[i] = bw
        psig[i] = esig[best]


@njit(cache=True)
def _knn_search(indptr, indices, pids, pw, sources, node2def, nnb,
                dist, stamp, done, stamp0, heap_d, heap_n,
                pred_pid, pred_node, out_a, out_b, out_d, out_src):
    """Early-stopped dijkstra from every defect.

    Collects directed candidate edges (source defect, found defect,
    distance) until `nnb` defects are found per source, and leaves valid
    predecessor rows for every settled node of each run.
    """
    k = sources.shape[0]
    stampv = stamp0
    nout = 0
    for s in range(k):
        stampv += 1
        src = sources[s]
        dist[src] = 0.0
        stamp[src] = stampv
        heap_d[0] = 0.0
        heap_n[0] = src
        hn = 1
        found = 0
        while hn > 0:
            top_d = heap_d[0]
            top_n = heap_n[0]
            hn -= 1
            heap_d[0] = heap_d[hn]
            heap_n[0] = heap_n[hn]
            i = 0
            while True:
                l = 2 * i + 1
                r = l + 1
                small = i
                if l < hn and heap_d[l] < heap_d[small]:
                    small = l
                if r < hn and heap_d[r] < heap_d[small]:
                    small = r
                if small == i:
                    break
                heap_d[i], heap_d[small] = heap_d[small], heap_d[i]
                heap_n[i], heap_n[small] = heap_n[small], heap_n[i]
                i = small
            u = top_n
            if done[u] == stampv:
                continue
            done[u] = stampv
            j = node2def[u]
            if j >= 0 and u != src:
                out_a[nout] = s
                out_b[nout] = j
                out_d[nout] = top_d
                out_src[nout] = s
                nout += 1
                found += 1
                if found >= nnb:
                    break
            for e in range(indptr[u], indptr[u + 1]):
                v = indices[e]
                if done[v] == stampv:
                    continue
                nd = top_d + pw[pids[e]]
                if stamp[v] != stampv or nd < dist[v]:
                    stamp[v] = stampv
                    dist[v] = nd
                    pred_node[s, v] = u
                    pred_pid[s, v] = pids[e]
                    heap_d[hn] = nd
                    heap_n[hn] = v
                    i = hn
                    hn += 1
                    while i > 0:
                        parent = (i - 1) // 2
                        if heap_d[parent] <= heap_d[i]:
                            break
                        heap_d[i], heap_d[parent] = heap_d[parent], heap_d[i]
                        heap_n[i], heap_n[parent] = heap_n[parent], heap_n[i]
                        i = parent
    return nout, stampv


@njit(cache=True)
def _walk_pred(pred_pid_row, pred_node_row, psig, src, tgt, nmax):
    sig = 0
    u = tgt
    steps = 0
    while u != src:
        sig ^= psig[pred_pid_row[u]]
        u = pred_node_row[u]
        steps += 1
        if steps > nmax:
            raise RuntimeError("predecessor cycle")
    return sig


@njit(cache=True)
def _walk_csr(indptr, indices, pids, psig, preds, src, tgt):
    sig = 0
    u = tgt
    steps = 0
    while u != src:
        p = preds[u]
        if p < 0:
            raise RuntimeError("broken predecessor chain")
        s = 0
        for e in range(indptr[p], indptr[p + 1]):
            if indices[e] == u:
                s = psig[pids[e]]
                break
        sig ^= s
        u = p
        steps += 1
        if steps > preds.shape[0]:
            raise RuntimeError("predecessor cycle")
    return sig


@njit(cache=True)
def _parity_table(indptr, indices, pids, psig, dmat, preds, par):
    n = dmat.shape[0]
    for s in range(n):
        order = np.argsort(dmat[s])
        for oi in range(n):
            t = order[oi]
            if t == s:
                par[s, t] = 0
                continue
            p = preds[s, t]
            if p < 0:
                par[s, t] = 0
                continue
            sig = 0
            for e in range(indptr[p], indptr[p + 1]):
                if indices[e] == t:
                    sig = psig[pids[e]]
                    break
            par[s, t] = par[s, p] ^ sig


@dataclass
class DecodeResult:
    """Correction summary for one shot."""

    sig: tuple  # winding bits of the matched correction
    weight: float
    pairs: list = field(default_factory=list)  # global detector id pairs
    fallback: bool = False


class MatchingDecoder:
    """Per-shot decoder bound to one detector graph.

    Holds reusable search buffers, so one instance must not be shared
    between threads.  `neighbors` bounds the defect degree of the
    truncated matching graph; when a shot has at most that many defects
    the truncation is exact.
    """

    def __init__(self, graph: DetectorGraph, mode: str = TRIVIAL,
                 neighbors: int = 26):
        if mode not in DECODERS:
            raise ValueError(f"unknown decoder {mode!r}")
        self.graph = graph
        self.mode = mode
        self.neighbors = neighbors
        n = graph.n_det
        ecap = graph.indices.shape[0] + 8
        self._pw = np.empty(graph.n_pairs, dtype=np.float64)
        self._psig = np.empty(graph.n_pairs, dtype=np.uint8)
        _pair_min(graph.ew, graph.esig, graph.pair_edges, graph.pair_start,
                  self._pw, self._psig)
        self._pw0 = self._pw.copy()
        self._psig0 = self._psig.copy()
        self._dist = np.empty(n, dtype=np.float64)
        self._stamp = np.zeros(n, dtype=np.int64)
        self._done = np.zeros(n, dtype=np.int64)
        self._stampv = 0
        self._heap_d = np.empty(ecap, dtype=np.float64)
        self._heap_n = np.empty(ecap, dtype=np.int64)
        self._pred_pid = np.empty((n, n), dtype=np.int32)
        self._pred_node = np.empty((n, n), dtype=np.int32)
        cap = n * neighbors + 8
        self._out_a = np.empty(cap, dtype=np.int32)
        self._out_b = np.empty(cap, dtype=np.int32)
        self._out_d = np.empty(cap, dtype=np.float64)
        self._out_src = np.empty(cap, dtype=np.int32)
        self._node2def = np.full(n, -1, dtype=np.int32)
        self._tdist = None
        self._tpar = None
        if mode == TRIVIAL:
            self._build_static_tables()

    def _build_static_tables(self):
        g = self.graph
        csr = g.csr_weights(self._pw0)
        dmat, preds = csgraph.dijkstra(csr, return_predecessors=True)
        par = np.zeros((g.n_det, g.n_det), dtype=np.uint8)
        _parity_table(g.indptr, g.indices, g.csr_pid, self._psig0,
                      dmat, preds, par)
        self._tdist = dmat
        self._tpar = par

    def weights_for(self, out_z=None, out_x=None, readout_flags=None):
        """Edge weight vector after this decoder's flag overlay."""
        if self.mode == TRIVIAL:
            return self.graph.ew
        if out_z is None or readout_flags is None:
            raise ValueError(f"{self.mode} decoding needs the shot's "
                             "flag arrays")
        flag_z = out_z == OUTCOME_L
        flag_final = readout_flags == LEAKED_DETECTED
        if self.mode == LOCATED:
            if out_x is None:
                raise ValueError("located decoding needs the shot's "
                                 "flag arrays")
            flag_x = out_x == OUTCOME_L
            return reweight_located(self.graph, flag_z, flag_x, flag_final)
        return reweight_critical(self.graph, flag_z, flag_final)

    def decode(self, detectors, out_z=None, out_x=None,
               readout_flags=None, weights=None) -> DecodeResult:
        """Decode one detector vector.

        `weights` overrides the flag overlay with an explicit per-edge
        weight vector (zeros allowed); flags are then ignored.
        """
        g = self.graph
        flat = np.asarray(detectors).reshape(-1)
        if flat.shape[0] != g.n_det:
            raise ValueError("detector vector does not match the graph")
        dets = np.flatnonzero(flat)
        k = dets.shape[0]
        if k == 0:
            return DecodeResult(sig=(0, 0), weight=0.0)
        if k % 2:
            raise ValueError("odd defect count on a closed surface")
        if weights is None:
            if self.mode == TRIVIAL:
                return self._decode_static(dets)
            w = self.weights_for(out_z, out_x, readout_flags)
        else:
            w = np.asarray(weights, dtype=np.float64)
            if w.shape != (g.n_edges,):
                raise ValueError("weight vector does not match the graph")
        _pair_min(w, g.esig, g.pair_edges, g.pair_start,
                  self._pw, self._psig)
        return self._decode_dynamic(dets, self._pw, self._psig)

    def decode_shot(self, rec) -> DecodeResult:
        return self.decode(rec.detectors, rec.out_z, rec.out_x,
                           rec.readout_flags)

    def _decode_static(self, dets):
        k = dets.shape[0]
        sub = self._tdist[np.ix_(dets, dets)]
        iu, jv = np.triu_indices(k, 1)
        mate = min_weight_perfect_matching(k, iu, jv, sub[iu, jv],
                                           validate=False)
        sig1 = sig2 = 0
        weight = 0.0
        pairs = []
        for a in range(k):
            b = int(mate[a])
            if b <= a:
                continue
            u, v = int(dets[a]), int(dets[b])
            par = self._tpar[u, v]
            sig1 ^= par & 1
            sig2 ^= (par >> 1) & 1
            weight += sub[a, b]
            pairs.append((u, v))
        return DecodeResult(sig=(sig1, sig2), weight=weight, pairs=pairs)

    def _decode_dynamic(self, dets, pw, psig):
        g = self.graph
        k = dets.shape[0]
        self._node2def[dets] = np.arange(k, dtype=np.int32)
        nout, self._stampv = _knn_search(
            g.indptr, g.indices, g.csr_pid, pw, dets, self._node2def,
            min(self.neighbors, k - 1), self._dist, self._stamp, self._done,
            self._stampv, self._heap_d, self._heap_n,
            self._pred_pid, self._pred_node,
            self._out_a, self._out_b, self._out_d, self._out_src)
        self._node2def[dets] = -1
        a = self._out_a[:nout]
        b = self._out_b[:nout]
        dd = self._out_d[:nout]
        ss = self._out_src[:nout]
        lo = np.minimum(a, b).astype(np.int64)
        hi = np.maximum(a, b).astype(np.int64)
        key = lo * k + hi
        ukey, idx = np.unique(key, return_index=True)
        try:
            mate = min_weight_perfect_matching(
                k, lo[idx], hi[idx], dd[idx], validate=False)
        except ValueError:
            return self._decode_exact(dets, pw, psig)
        sig1 = sig2 = 0
        weight = 0.0
        pairs = []
        for va in range(k):
            vb = int(mate[va])
            if vb <= va:
                continue
            j = idx[np.searchsorted(ukey, va * k + vb)]
            s = int(ss[j])
            tgt = int(dets[vb if s == va else va])
            par = _walk_pred(self._pred_pid[s], self._pred_node[s], psig,
                             int(dets[s]), tgt, g.n_det)
            sig1 ^= par & 1
            sig2 ^= (par >> 1) & 1
            weight += dd[j]
            pairs.append((int(dets[va]), int(dets[vb])))
        return DecodeResult(sig=(sig1, sig2), weight=weight, pairs=pairs)

    def _decode_exact(self, dets, pw, psig):
        g = self.graph
        k = dets.shape[0]
        csr = g.csr_weights(pw)
        dmat, preds = csgraph.dijkstra(csr, indices=dets,
                                       return_predecessors=True)
        sub = dmat[:, dets]
        iu, jv = np.triu_indices(k, 1)
        mate = min_weight_perfect_matching(k, iu, jv, sub[iu, jv],
                                           validate=False)
        sig1 = sig2 = 0
        weight = 0.0
        pairs = []
        for a in range(k):
            b = int(mate[a])
            if b <= a:
                continue
            par = _walk_csr(g.indptr, g.indices, g.csr_pid, psig,
                            preds[a], int(dets[a]), int(dets[b]))
            sig1 ^= par & 1
            sig2 ^= (par >> 1) & 1
            weight += sub[a, b]
            pairs.append((int(dets[a]), int(dets[b])))
        return DecodeResult(sig=(sig1, sig2), weight=weight, pairs=pairs,
                            fallback=True)


def decode_batch(graph: DetectorGraph, batch, mode: str = TRIVIAL,
                 neighbors: int = 26,
                 decoder: MatchingDecoder | None = None) -> np.ndarray:
    """Fail bits (shots, 2): corrected winding vs the sampled one."""
    dec = decoder if decoder is not None else MatchingDecoder(
        graph, mode, neighbors)
    fails = np.zeros((batch.shots, 2), dtype=np.uint8)
    for i in range(batch.shots):
        res = dec.decode(batch.detectors[i], batch.out_z[i],
                         batch.out_x[i], batch.readout_flags[i])
        fails[i, 0] = res.sig[0] != batch.logical_x[i, 0]
        fails[i, 1] = res.sig[1] != batch.logical_x[i, 1]
    return fails


def _pairings(items):
    if not items:
        yield []
        return
    a = items[0]
    for i in range(1, len(items)):
        rest = items[1:i] + items[i + 1:]
        for tail in _pairings(rest):
            yield [(a, items[i])] + tail


def brute_force_decode(graph: DetectorGraph, detectors,
                       w: np.ndarray | None = None,
                       limit: int = 10) -> DecodeResult:
    """Exhaustive minimum weight pairing, as an independent cross-check.

    Distances and paths come from scipy's dijkstra rather than the
    decoder's own search.
    """
    flat = np.asarray(detectors).reshape(-1)
    dets = np.flatnonzero(flat)
    k = dets.shape[0]
    if k == 0:
        return DecodeResult(sig=(0, 0), weight=0.0)
    if k % 2:
        raise ValueError("odd defect count on a closed surface")
    if k > limit:
        raise ValueError(f"{k} defects exceed the exhaustive limit {limit}")
    if w is None:
        w = graph.ew
    pw = np.empty(graph.n_pairs, dtype=np.float64)
    psig = np.empty(graph.n_pairs, dtype=np.uint8)
    _pair_min(w, graph.esig, graph.pair_edges, graph.pair_start, pw, psig)
    csr = graph.csr_weights(pw)
    dmat, preds = csgraph.dijkstra(csr, indices=dets,
                                   return_predecessors=True)
    sub = dmat[:, dets]
    best = None
    best_w = np.inf
    for pairing in _pairings(list(range(k))):
        tot = sum(sub[a, b] for a, b in pairing)
        if tot < best_w:
            best_w = tot
            best = pairing
    sig1 = sig2 = 0
    pairs = []
    for a, b in best:
        par = _walk_csr(graph.indptr, graph.indices, graph.csr_pid, psig,
                        preds[a], int(dets[a]), int(dets[b]))
        sig1 ^= par & 1
        sig2 ^= (par >> 1) & 1
        pairs.append((int(dets[a]), int(dets[b])))
    return DecodeResult(sig=(sig1, sig2), weight=float(best_w), pairs=pairs)
