"""Maximum weight matching on array graphs, compiled with numba.

Port of the primal-dual blossom algorithm in the Galil / van Rantwijk
lineage (the same algorithm networkx implements) onto flat arrays so a
per-shot decoder can call it without interpreter overhead.  Vertices are
0..n-1, non-trivial blossoms live in slots n..2n-1, and every edge
reference is an oriented edge id 2*k+o whose orientation bit o picks
which endpoint comes first.  Dual variables are premultiplied by two as
in the reference implementation.

`min_weight_perfect_matching` is the decoder entry point: it negates the
weights (shifted to stay nonnegative) and asks for a maximum-cardinality
maximum-weight matching.

The graph must be simple: no self loops, at most one edge per vertex
pair.  Weight lookups go through edge ids, so a duplicate pair would
silently decouple the two copies.
"""

from __future__ import annotations

from collections import namedtuple

import numpy as np
from numba import njit

__all__ = [
    "max_weight_matching",
    "min_weight_perfect_matching",
    "matching_weight",
]

NOEDGE = -1

_BS = namedtuple("_BS", [
    "n", "nt",
    "eu", "ev", "ew",
    "adj_ptr", "adj_oe",
    "mate", "label", "labeledge", "inblossom",
    "blossomparent", "blossombase", "bestedge",
    "dualvar", "blossomdual", "balloc", "allowed",
    "queue", "qn", "unused", "un",
    "bnch", "bchilds", "bedges",
    "bnbest", "bbest", "bhasbest",
    "leafbuf", "leafbuf2", "lstack", "pathbuf",
    "tmpe", "bestedgeto", "rotbuf", "expstack",
    "fb", "fv", "fi", "fj", "fstep", "fphase", "fw",
])


@njit(cache=True)
def _fst(S, oe):
    k = oe >> 1
    if oe & 1:
        return S.ev[k]
    return S.eu[k]


@njit(cache=True)
def _snd(S, oe):
    k = oe >> 1
    if oe & 1:
        return S.eu[k]
    return S.ev[k]


@njit(cache=True)
def _slack(S, oe):
    k = oe >> 1
    return S.dualvar[S.eu[k]] + S.dualvar[S.ev[k]] - 2.0 * S.ew[k]


@njit(cache=True)
def _leaves(S, b, out):
    if b < S.n:
        out[0] = b
        return 1
    cnt = 0
    sp = 0
    S.lstack[sp] = b
    sp += 1
    while sp > 0:
        sp -= 1
        t = S.lstack[sp]
        if t < S.n:
            out[cnt] = t
            cnt += 1
        else:
            row = t - S.n
            for i in range(S.bnch[row]):
                S.lstack[sp] = S.bchilds[row, i]
                sp += 1
    return cnt


@njit(cache=True)
def _qpush(S, v):
    i = S.qn[0]
    if i >= S.queue.shape[0]:
        raise RuntimeError("matching queue overflow")
    S.queue[i] = v
    S.qn[0] = i + 1


@njit(cache=True)
def _assign_label(S, w, t, oe):
    # oe is oriented (v, w) with w the newly labeled vertex, or NOEDGE.
    while True:
        b = S.inblossom[w]
        S.label[w] = t
        S.label[b] = t
        S.labeledge[w] = oe
        S.labeledge[b] = oe
        S.bestedge[w] = NOEDGE
        S.bestedge[b] = NOEDGE
        if t == 1:
            cnt = _leaves(S, b, S.leafbuf)
            for i in range(cnt):
                _qpush(S, S.leafbuf[i])
            return
        # T label: the blossom's base mate becomes an S vertex.
        base = S.blossombase[b]
        me = S.mate[base]
        w = _snd(S, me)
        oe = me
        t = 1


@njit(cache=True)
def _scan_blossom(S, v, w):
    # Trace back from both endpoints; return the first common base vertex
    # or -1 if the paths end in two distinct single vertices.
    pathn = 0
    base = -1
    while v != -1:
        b = S.inblossom[v]
        if S.label[b] & 4:
            base = S.blossombase[b]
            break
        S.pathbuf[pathn] = b
        pathn += 1
        S.label[b] = 5
        if S.labeledge[b] == NOEDGE:
            v = -1
        else:
            v = _fst(S, S.labeledge[b])
            b = S.inblossom[v]
            v = _fst(S, S.labeledge[b])
        if w != -1:
            v, w = w, v
    for i in range(pathn):
        S.label[S.pathbuf[i]] = 1
    return base


@njit(cache=True)
def _bet_consider(S, b, oe):
    i = _fst(S, oe)
    j = _snd(S, oe)
    if i == j:
        return
    if S.inblossom[j] == b:
        i, j = j, i
    bj = S.inblossom[j]
    if bj == b or S.label[bj] != 1:
        return
    cur = S.bestedgeto[bj]
    if cur == NOEDGE or _slack(S, oe) < _slack(S, cur):
        S.bestedgeto[bj] = oe


@njit(cache=True)
def _add_blossom(S, base, oe):
    n = S.n
    v = _fst(S, oe)
    w = _snd(S, oe)
    bb = S.inblossom[base]
    bv = S.inblossom[v]
    bw = S.inblossom[w]
    if S.un[0] == 0:
        raise RuntimeError("blossom slots exhausted")
    S.un[0] -= 1
    b = S.unused[S.un[0]]
    row = b - n
    S.blossombase[b] = base
    S.blossomparent[b] = -1
    S.blossomparent[bb] = b

    # Trace the v side into scratch, to be reversed below.
    ne = 0
    S.tmpe[ne] = oe
    ne += 1
    nc = 0
    while bv != bb:
        S.blossomparent[bv] = b
        S.pathbuf[nc] = bv
        nc += 1
        S.tmpe[ne] = S.labeledge[bv]
        ne += 1
        v2 = _fst(S, S.labeledge[bv])
        bv = S.inblossom[v2]
    cn = 0
    S.bchilds[row, cn] = bb
    cn += 1
    for i in range(nc - 1, -1, -1):
        S.bchilds[row, cn] = S.pathbuf[i]
        cn += 1
    en = 0
    for i in range(ne - 1, -1, -1):
        S.bedges[row, en] = S.tmpe[i]
        en += 1
    # Trace the w side, edges flipped to keep the forward orientation.
    while bw != bb:
        S.blossomparent[bw] = b
        S.bchilds[row, cn] = bw
        cn += 1
        S.bedges[row, en] = S.labeledge[bw] ^ 1
        en += 1
        w2 = _fst(S, S.labeledge[bw])
        bw = S.inblossom[w2]
    S.bnch[row] = cn

    S.label[b] = 1
    S.labeledge[b] = S.labeledge[bb]
    S.blossomdual[b] = 0.0
    S.balloc[b] = True

    cnt = _leaves(S, b, S.leafbuf)
    for i in range(cnt):
        lv = S.leafbuf[i]
        if S.label[S.inblossom[lv]] == 2:
            _qpush(S, lv)
        S.inblossom[lv] = b

    # Least-slack edges to each neighboring S blossom.
    for t in range(S.nt):
        S.bestedgeto[t] = NOEDGE
    for ci in range(cn):
        cb = S.bchilds[row, ci]
        if cb >= n:
            crow = cb - n
            if S.bhasbest[crow]:
                for q in range(S.bnbest[crow]):
                    _bet_consider(S, b, S.bbest[crow, q])
                S.bhasbest[crow] = False
            else:
                lcnt = _leaves(S, cb, S.leafbuf2)
                for li in range(lcnt):
                    lv = S.leafbuf2[li]
                    for ai in range(S.adj_ptr[lv], S.adj_ptr[lv + 1]):
                        _bet_consider(S, b, S.adj_oe[ai])
        else:
            for ai in range(S.adj_ptr[cb], S.adj_ptr[cb + 1]):
                _bet_consider(S, b, S.adj_oe[ai])
        S.bestedge[cb] = NOEDGE
    nb = 0
    for t in range(S.nt):
        if S.bestedgeto[t] != NOEDGE:
            S.bbest[row, nb] = S.bestedgeto[t]
            nb += 1
    S.bnbest[row] = nb
    S.bhasbest[row] = True
    mybest = NOEDGE
    mybestsl = 0.0
    for q in range(nb):
        k = S.bbest[row, q]
        ks = _slack(S, k)
        if mybest == NOEDGE or ks < mybestsl:
            mybest = k
            mybestsl = ks
    S.bestedge[b] = mybest


@njit(cache=True)
def _expand_blossom(S, b0, endstage):
    n = S.n
    esp = 0
    S.expstack[esp] = b0
    esp += 1
    while esp > 0:
        esp -= 1
        b = S.expstack[esp]
        row = b - n
        nch = S.bnch[row]
        for ci in range(nch):
            s = S.bchilds[row, ci]
            S.blossomparent[s] = -1
            if s < n:
                S.inblossom[s] = s
            elif endstage and S.blossomdual[s] == 0.0:
                S.expstack[esp] = s
                esp += 1
            else:
                cnt = _leaves(S, s, S.leafbuf)
                for i in range(cnt):
                    S.inblossom[S.leafbuf[i]] = s
        if (not endstage) and S.label[b] == 2:
            # A T blossom expanded between augmentations: walk from the
            # entry child to the base relabeling the interleaved pairs.
            entry = S.inblossom[_snd(S, S.labeledge[b])]
            j = 0
            for ci in range(nch):
                if S.bchilds[row, ci] == entry:
                    j = ci
                    break
            if j & 1:
                j -= nch
                jstep = 1
            else:
                jstep = -1
            oe_vw = S.labeledge[b]
            while j != 0:
                if jstep == 1:
                    jj = j + nch if j < 0 else j
                    oe_pq = S.bedges[row, jj]
                else:
                    oe_pq = S.bedges[row, j - 1] ^ 1
                w = _snd(S, oe_vw)
                q = _snd(S, oe_pq)
                S.label[w] = 0
                S.label[q] = 0
                _assign_label(S, w, 2, oe_vw)
                S.allowed[oe_pq >> 1] = True
                j += jstep
                if jstep == 1:
                    jj = j + nch if j < 0 else j
                    oe_vw = S.bedges[row, jj]
                else:
                    oe_vw = S.bedges[row, j - 1] ^ 1
                S.allowed[oe_vw >> 1] = True
                j += jstep
            bw = S.bchilds[row, 0]
            w = _snd(S, oe_vw)
            S.label[w] = 2
            S.label[bw] = 2
            S.labeledge[w] = oe_vw
            S.labeledge[bw] = oe_vw
            S.bestedge[bw] = NOEDGE
            j += jstep
            while True:
                jj = j + nch if j < 0 else j
                bv = S.bchilds[row, jj]
                if bv == entry:
                    break
                if S.label[bv] == 1:
                    j += jstep
                    continue
                vv = -1
                if bv >= n:
                    cnt = _leaves(S, bv, S.leafbuf)
                    vv = S.leafbuf[cnt - 1]
                    for i in range(cnt):
                        if S.label[S.leafbuf[i]] != 0:
                            vv = S.leafbuf[i]
                            break
                else:
                    vv = bv
                if S.label[vv] != 0:
                    S.label[vv] = 0
                    S.label[_snd(S, S.mate[S.blossombase[bv]])] = 0
                    _assign_label(S, vv, 2, S.labeledge[vv])
                j += jstep
        S.label[b] = 0
        S.labeledge[b] = NOEDGE
        S.bestedge[b] = NOEDGE
        S.blossomparent[b] = -1
        S.blossombase[b] = -1
        S.blossomdual[b] = 0.0
        S.balloc[b] = False
        S.bhasbest[row] = False
        S.unused[S.un[0]] = b
        S.un[0] += 1


@njit(cache=True)
def _augment_blossom(S, b0, v0):
    n = S.n
    S.fb[0] = b0
    S.fv[0] = v0
    S.fphase[0] = 0
    sp = 1
    while sp > 0:
        top = sp - 1
        b = S.fb[top]
        row = b - n
        nch = S.bnch[row]
        phase = S.fphase[top]
        if phase == 0:
            # Bubble the entry vertex up to an immediate child of b.
            t = S.fv[top]
            while S.blossomparent[t] != b:
                t = S.blossomparent[t]
            i = 0
            for ci in range(nch):
                if S.bchilds[row, ci] == t:
                    i = ci
                    break
            j = i
            if i & 1:
                j -= nch
                jstep = 1
            else:
                jstep = -1
            S.fi[top] = i
            S.fj[top] = j
            S.fstep[top] = jstep
            S.fphase[top] = 1
            if t >= n:
                S.fb[sp] = t
                S.fv[sp] = S.fv[top]
                S.fphase[sp] = 0
                sp += 1
            continue
        if phase == 1:
            j = S.fj[top]
            if j == 0:
                i = S.fi[top]
                if i > 0:
                    for c in range(nch):
                        S.rotbuf[c] = S.bchilds[row, (c + i) % nch]
                    for c in range(nch):
                        S.bchilds[row, c] = S.rotbuf[c]
                    for c in range(nch):
                        S.rotbuf[c] = S.bedges[row, (c + i) % nch]
                    for c in range(nch):
                        S.bedges[row, c] = S.rotbuf[c]
                S.blossombase[b] = S.blossombase[S.bchilds[row, 0]]
                sp -= 1
                continue
            jstep = S.fstep[top]
            j += jstep
            jj = j + nch if j < 0 else j
            t = S.bchilds[row, jj]
            if jstep == 1:
                me_w = S.bedges[row, jj]
            else:
                me_w = S.bedges[row, j - 1] ^ 1
            S.fj[top] = j
            S.fw[top] = me_w
            S.fphase[top] = 2
            if t >= n:
                S.fb[sp] = t
                S.fv[sp] = _fst(S, me_w)
                S.fphase[sp] = 0
                sp += 1
            continue
        if phase == 2:
            jstep = S.fstep[top]
            j = S.fj[top] + jstep
            jj = j + nch if j < 0 else j
            t = S.bchilds[row, jj]
            S.fj[top] = j
            S.fphase[top] = 3
            if t >= n:
                S.fb[sp] = t
                S.fv[sp] = _snd(S, S.fw[top])
                S.fphase[sp] = 0
                sp += 1
            continue
        # phase 3: match the edge connecting the two sub-blossoms.
        me_w = S.fw[top]
        S.mate[_fst(S, me_w)] = me_w
        S.mate[_snd(S, me_w)] = me_w ^ 1
        S.fphase[top] = 1


@njit(cache=True)
def _augment_matching(S, oe):
    n = S.n
    for side in range(2):
        if side == 0:
            s = _fst(S, oe)
            me = oe
        else:
            s = _snd(S, oe)
            me = oe ^ 1
        while True:
            bs = S.inblossom[s]
            if bs >= n:
                _augment_blossom(S, bs, s)
            S.mate[s] = me
            if S.labeledge[bs] == NOEDGE:
                break
            t = _fst(S, S.labeledge[bs])
            bt = S.inblossom[t]
            le = S.labeledge[bt]
            j2 = _snd(S, le)
            if bt >= n:
                _augment_blossom(S, bt, j2)
            S.mate[j2] = le ^ 1
            s = _fst(S, le)
            me = le


@njit(cache=True)
def _solve(n, eu, ev, ew, adj_ptr, adj_oe, maxcardinality):
    nt = 2 * n
    m = eu.shape[0]
    maxweight = 0.0
    for k in range(m):
        if ew[k] > maxweight:
            maxweight = ew[k]
    qcap = 4 * n + 2 * m + 64

    S = _BS(
        n, nt, eu, ev, ew, adj_ptr, adj_oe,
        np.full(n, NOEDGE, dtype=np.int64),           # mate
        np.zeros(nt, np.int64),                 # label
        np.full(nt, NOEDGE, dtype=np.int64),          # labeledge
        np.arange(n, dtype=np.int64),           # inblossom
        np.full(nt, -1, dtype=np.int64),              # blossomparent
        np.concatenate((np.arange(n, dtype=np.int64),
                        np.full(n, -1, dtype=np.int64))),  # blossombase
        np.full(nt, NOEDGE, dtype=np.int64),          # bestedge
        np.full(n, maxweight, dtype=np.float64),      # dualvar
        np.zeros(nt, np.float64),               # blossomdual
        np.zeros(nt, np.bool_),                 # balloc
        np.zeros(m, np.bool_),                  # allowed
        np.empty(qcap, np.int64), np.zeros(1, np.int64),   # queue, qn
        np.arange(n, nt, dtype=np.int64), np.full(1, n, dtype=np.int64),  # unused
        np.zeros(n, np.int64),                  # bnch
        np.empty((n, n + 1), np.int64),         # bchilds
        np.empty((n, n + 1), np.int64),         # bedges
        np.zeros(n, np.int64),                  # bnbest
        np.empty((n, n + 1), np.int64),         # bbest
        np.zeros(n, np.bool_),                  # bhasbest
        np.empty(n, np.int64),                  # leafbuf
        np.empty(n, np.int64),                  # leafbuf2
        np.empty(nt, np.int64),                 # lstack
        np.empty(nt + 1, np.int64),             # pathbuf
        np.empty(n + 1, np.int64),              # tmpe
        np.empty(nt, np.int64),                 # bestedgeto
        np.empty(n + 1, np.int64),              # rotbuf
        np.empty(n + 1, np.int64),              # expstack
        np.empty(n + 2, np.int64),              # fb
        np.empty(n + 2, np.int64),              # fv
        np.empty(n + 2, np.int64),              # fi
        np.empty(n + 2, np.int64),              # fj
        np.empty(n + 2, np.int64),              # fstep
        np.empty(n + 2, np.int64),              # fphase
        np.empty(n + 2, np.int64),              # fw
    )

    while True:
        # Stage: find one augmenting path.
        for t in range(nt):
            S.label[t] = 0
            S.labeledge[t] = NOEDGE
            S.bestedge[t] = NOEDGE
        for r in range(n):
            S.bhasbest[r] = False
        for k in range(m):
            S.allowed[k] = False
        S.qn[0] = 0
        for v in range(n):
            if S.mate[v] == NOEDGE and S.label[S.inblossom[v]] == 0:
                _assign_label(S, v, 1, NOEDGE)

        augmented = False
        while True:
            while S.qn[0] > 0 and not augmented:
                S.qn[0] -= 1
                v = S.queue[S.qn[0]]
                for ai in range(adj_ptr[v], adj_ptr[v + 1]):
                    oe = adj_oe[ai]
                    k = oe >> 1
                    w = _snd(S, oe)
                    if w == v:
                        continue
                    bv = S.inblossom[v]
                    bw = S.inblossom[w]
                    if bv == bw:
                        continue
                    kslack = 0.0
                    if not S.allowed[k]:
                        kslack = _slack(S, oe)
                        if kslack <= 0.0:
                            S.allowed[k] = True
                    if S.allowed[k]:
                        if S.label[bw] == 0:
                            _assign_label(S, w, 2, oe)
                        elif S.label[bw] == 1:
                            base = _scan_blossom(S, v, w)
                            if base >= 0:
                                _add_blossom(S, base, oe)
                            else:
                                _augment_matching(S, oe)
                                augmented = True
                                break
                        elif S.label[w] == 0:
                            S.label[w] = 2
                            S.labeledge[w] = oe
                    elif S.label[bw] == 1:
                        if (S.bestedge[bv] == NOEDGE
                                or kslack < _slack(S, S.bestedge[bv])):
                            S.bestedge[bv] = oe
                    elif S.label[w] == 0:
                        if (S.bestedge[w] == NOEDGE
                                or kslack < _slack(S, S.bestedge[w])):
                            S.bestedge[w] = oe

            if augmented:
                break

            # No augmenting path yet: pump slack out of the duals.
            deltatype = -1
            delta = 0.0
            deltaedge = NOEDGE
            deltablossom = -1
            if not maxcardinality:
                deltatype = 1
                delta = S.dualvar.min()
            for v in range(n):
                if (S.label[S.inblossom[v]] == 0
                        and S.bestedge[v] != NOEDGE):
                    d = _slack(S, S.bestedge[v])
                    if deltatype == -1 or d < delta:
                        delta = d
                        deltatype = 2
                        deltaedge = S.bestedge[v]
            for b in range(nt):
                if b >= n and not S.balloc[b]:
                    continue
                if (S.blossomparent[b] == -1 and S.label[b] == 1
                        and S.bestedge[b] != NOEDGE):
                    d = _slack(S, S.bestedge[b]) / 2.0
                    if deltatype == -1 or d < delta:
                        delta = d
                        deltatype = 3
                        deltaedge = S.bestedge[b]
            for b in range(n, nt):
                if (S.balloc[b] and S.blossomparent[b] == -1
                        and S.label[b] == 2
                        and (deltatype == -1 or S.blossomdual[b] < delta)):
                    delta = S.blossomdual[b]
                    deltatype = 4
                    deltablossom = b
            if deltatype == -1:
                deltatype = 1
                delta = S.dualvar.min()
                if delta < 0.0:
                    delta = 0.0

            for v in range(n):
                lb = S.label[S.inblossom[v]]
                if lb == 1:
                    S.dualvar[v] -= delta
                elif lb == 2:
                    S.dualvar[v] += delta
            for b in range(n, nt):
                if S.balloc[b] and S.blossomparent[b] == -1:
                    if S.label[b] == 1:
                        S.blossomdual[b] += delta
                    elif S.label[b] == 2:
                        S.blossomdual[b] -= delta

            if deltatype == 1:
                break
            if deltatype == 2 or deltatype == 3:
                S.allowed[deltaedge >> 1] = True
                _qpush(S, _fst(S, deltaedge))
            else:
                _expand_blossom(S, deltablossom, False)

        if not augmented:
            break

        for b in range(n, nt):
            if (S.balloc[b] and S.blossomparent[b] == -1
                    and S.label[b] == 1 and S.blossomdual[b] == 0.0):
                _expand_blossom(S, b, True)

    matev = np.full(n, -1, dtype=np.int64)
    for v in range(n):
        if S.mate[v] != NOEDGE:
            matev[v] = _snd(S, S.mate[v])
    return matev


def _adjacency(n, eu, ev):
    m = eu.shape[0]
    ends = np.concatenate((eu, ev))
    oes = np.concatenate((2 * np.arange(m, dtype=np.int64),
                          2 * np.arange(m, dtype=np.int64) + 1))
    order = np.argsort(ends, kind="stable")
    adj_oe = oes[order]
    adj_ptr = np.searchsorted(ends[order], np.arange(n + 1))
    return adj_ptr.astype(np.int64), adj_oe


def max_weight_matching(n: int, eu, ev, ew,
                        maxcardinality: bool = False,
                        validate: bool = True) -> np.ndarray:
    """Mate array of a maximum weight matching; -1 marks unmatched."""
    eu = np.ascontiguousarray(eu, dtype=np.int64)
    ev = np.ascontiguousarray(ev, dtype=np.int64)
    ew = np.ascontiguousarray(ew, dtype=np.float64)
    if not (eu.shape == ev.shape == ew.shape):
        raise ValueError("edge arrays differ in length")
    if n == 0:
        return np.empty(0, dtype=np.int64)
    if validate and eu.size:
        if eu.min() < 0 or ev.min() < 0 or max(eu.max(), ev.max()) >= n:
            raise ValueError("edge endpoint outside 0..n-1")
        if (eu == ev).any():
            raise ValueError("self loops are not allowed")
        key = np.minimum(eu, ev) * n + np.maximum(eu, ev)
        if np.unique(key).size != key.size:
            raise ValueError("duplicate edges for a vertex pair")
    adj_ptr, adj_oe = _adjacency(n, eu, ev)
    return _solve(n, eu, ev, ew, adj_ptr, adj_oe, maxcardinality)


def min_weight_perfect_matching(n: int, eu, ev, ew,
                                validate: bool = True) -> np.ndarray:
    """Mate array of a minimum weight perfect matching.

    Raises ValueError when the graph admits no perfect matching.
    """
    if n % 2:
        raise ValueError("odd vertex count has no perfect matching")
    ew = np.ascontiguousarray(ew, dtype=np.float64)
    shift = ew.max() if ew.size else 0.0
    mate = max_weight_matching(n, eu, ev, shift - ew,
                               maxcardinality=True, validate=validate)
    if n and (mate < 0).any():
        raise ValueError("graph admits no perfect matching")
    return mate


def matching_weight(mate: np.ndarray, eu, ev, ew) -> float:
    """Total weight of the matched edges in a mate array."""
    pair = {}
    for k in range(len(eu)):
        a, b = int(eu[k]), int(ev[k])
        pair[(a, b)] = pair[(b, a)] = float(ew[k])
    total = 0.0
    for v in range(mate.shape[0]):
        w = int(mate[v])
        if w > v:
            total += pair[(v, w)]
    return total
