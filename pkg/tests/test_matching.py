"""Decoder checks against independent routes and hand-built instances."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from swaplru.dem import build_base_graph
from swaplru.engine import ref_simulate
from swaplru.lattice import build_layout
from swaplru.matching import (CRITICAL, DECODERS, LOCATED, TRIVIAL,
                              MatchingDecoder, brute_force_decode,
                              decode_batch)
from swaplru.noise import PAULI_PAIRS, NoiseConfig
from swaplru.propagation import simulate_batch

D = 3
ROUNDS = 3


@pytest.fixture(scope="module")
def layout():
    return build_layout(D)


@pytest.fixture(scope="module")
def cfg():
    return NoiseConfig(p=0.006, r_e=1.0, eta=0.0755)


@pytest.fixture(scope="module")
def graph(layout, cfg):
    return build_base_graph(layout, cfg, ROUNDS, basis="X")


@pytest.fixture(scope="module")
def batch(layout, cfg):
    return simulate_batch(layout, cfg, ROUNDS, 600, seed=20260815)


@pytest.fixture(scope="module")
def decoders(graph):
    return {mode: MatchingDecoder(graph, mode) for mode in DECODERS}


def test_zero_defects(graph, decoders):
    res = decoders[TRIVIAL].decode(np.zeros(graph.n_det, dtype=np.uint8))
    assert res.sig == (0, 0)
    assert res.weight == 0.0
    assert res.pairs == []


def test_input_validation(graph, decoders):
    with pytest.raises(ValueError):
        MatchingDecoder(graph, "fancy")
    with pytest.raises(ValueError):
        decoders[TRIVIAL].decode(np.zeros(graph.n_det - 1, dtype=np.uint8))
    odd = np.zeros(graph.n_det, dtype=np.uint8)
    odd[0] = 1
    with pytest.raises(ValueError):
        decoders[TRIVIAL].decode(odd)
    two = np.zeros(graph.n_det, dtype=np.uint8)
    two[[0, 1]] = 1
    with pytest.raises(ValueError):
        decoders[LOCATED].decode(two)  # flags missing
    with pytest.raises(ValueError):
        decoders[CRITICAL].decode(two)


def test_trivial_ignores_flags(graph, batch, decoders):
    dec = decoders[TRIVIAL]
    i = int(np.argmax(batch.detectors.reshape(batch.shots, -1).sum(axis=1)))
    bare = dec.decode(batch.detectors[i])
    flagged = dec.decode(batch.detectors[i], batch.out_z[i], batch.out_x[i],
                         batch.readout_flags[i])
    assert bare.sig == flagged.sig
    assert bare.weight == flagged.weight
    assert bare.pairs == flagged.pairs


def test_flag_free_located_equals_trivial(layout, graph, decoders):
    # without decay there is nothing to locate
    pure = NoiseConfig(p=0.006, r_e=0.0)
    b = simulate_batch(layout, pure, ROUNDS, 200, seed=7)
    assert not (b.out_z == 2).any() and not (b.readout_flags == 2).any()
    for i in range(b.shots):
        if not b.detectors[i].any():
            continue
        rt = decoders[TRIVIAL].decode(b.detectors[i])
        rl = decoders[LOCATED].decode(b.detectors[i], b.out_z[i],
                                      b.out_x[i], b.readout_flags[i])
        assert rl.weight == pytest.approx(rt.weight, abs=1e-9)
        assert rl.sig == rt.sig


def test_single_pauli_faults_corrected(layout, cfg):
    # distance 3 must absorb every single gate Pauli, whatever the decoder
    rounds = 2
    g = build_base_graph(layout, cfg, rounds, basis="X")
    dec_t = MatchingDecoder(g, TRIVIAL)
    dec_l = MatchingDecoder(g, LOCATED)
    n_checked = 0
    for rnd in range(rounds):
        for kind in ("x", "z"):
            for stab in range(layout.n_stab):
                for gate in range(1, 6):
                    for pair in PAULI_PAIRS:
                        res = ref_simulate(
                            layout, rounds,
                            [(rnd, kind, stab, gate, ("pauli", pair))])
                        det = res.detectors.reshape(-1)
                        rt = dec_t.decode(det)
                        assert rt.sig == tuple(res.logical_x), (
                            rnd, kind, stab, gate, pair)
                        rl = dec_l.decode(det, res.out_z, res.out_x,
                                          res.readout_flags)
                        assert rl.sig == tuple(res.logical_x), (
                            rnd, kind, stab, gate, pair)
                        n_checked += 1
    assert n_checked == rounds * 2 * layout.n_stab * 5 * len(PAULI_PAIRS)


def test_matches_brute_force(graph, batch, decoders):
    # fast path and exhaustive path must agree on total weight
    checked = 0
    for i in range(batch.shots):
        det = batch.detectors[i]
        k = int(det.sum())
        if k == 0 or k > 8:
            continue
        rt = decoders[TRIVIAL].decode(det)
        bt = brute_force_decode(graph, det)
        assert abs(rt.weight - bt.weight) <= 1e-12
        for mode in (LOCATED, CRITICAL):
            dec = decoders[mode]
            r = dec.decode(det, batch.out_z[i], batch.out_x[i],
                           batch.readout_flags[i])
            if mode == LOCATED:
                w = dec.weights_for(batch.out_z[i], batch.out_x[i],
                                    batch.readout_flags[i])
            else:
                w = dec.weights_for(batch.out_z[i],
                                    readout_flags=batch.readout_flags[i])
            b = brute_force_decode(graph, det, w=w)
            assert abs(r.weight - b.weight) <= 1e-12
        checked += 1
    assert checked >= 200


def test_brute_force_guards(graph):
    det = np.zeros(graph.n_det, dtype=np.uint8)
    assert brute_force_decode(graph, det).sig == (0, 0)
    det[:12] = 1
    with pytest.raises(ValueError):
        brute_force_decode(graph, det)
    det[:] = 0
    det[0] = 1
    with pytest.raises(ValueError):
        brute_force_decode(graph, det)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_pairs_partition_defects(graph, decoders, data):
    picks = data.draw(st.sets(st.integers(0, graph.n_det - 1),
                              min_size=2, max_size=7))
    picks = sorted(picks)
    if len(picks) % 2:
        picks = picks[:-1]
    det = np.zeros(graph.n_det, dtype=np.uint8)
    det[picks] = 1
    res = decoders[TRIVIAL].decode(det)
    seen = [u for pair in res.pairs for u in pair]
    assert sorted(seen) == picks
    assert res.weight >= 0.0
    assert res.sig[0] in (0, 1) and res.sig[1] in (0, 1)
    if len(picks) <= 8:
        ref = brute_force_decode(graph, det)
        assert abs(res.weight - ref.weight) <= 1e-12


def test_fallback_matches_exhaustive(graph):
    # a starved neighbour budget eventually leaves no perfect matching
    dec = MatchingDecoder(graph, LOCATED, neighbors=1)
    rng = np.random.default_rng(5)
    zeros_z = np.zeros((ROUNDS, graph.layout.n_stab), dtype=np.uint8)
    zeros_f = np.zeros(graph.layout.n_data, dtype=np.uint8)
    hit = 0
    for _ in range(300):
        det = np.zeros(graph.n_det, dtype=np.uint8)
        det[rng.choice(graph.n_det, size=6, replace=False)] = 1
        res = dec.decode(det, zeros_z, zeros_z, zeros_f)
        if res.fallback:
            ref = brute_force_decode(graph, det)
            assert abs(res.weight - ref.weight) <= 1e-12
            hit += 1
    assert hit > 0


def test_repeat_decoding_is_stable(graph, batch, decoders):
    # buffers are reused across shots; stale state must not leak through
    dec = MatchingDecoder(graph, LOCATED)
    order = [5, 11, 5, 42, 5]
    base = None
    for i in order:
        res = dec.decode(batch.detectors[i], batch.out_z[i], batch.out_x[i],
                         batch.readout_flags[i])
        if i == 5:
            if base is None:
                base = res
            else:
                assert res.sig == base.sig
                assert res.weight == base.weight
                assert res.pairs == base.pairs
    fresh = decoders[LOCATED].decode(batch.detectors[5], batch.out_z[5],
                                     batch.out_x[5], batch.readout_flags[5])
    assert fresh.sig == base.sig and fresh.weight == base.weight


def test_decode_batch_output(graph, batch):
    fails = decode_batch(graph, batch, TRIVIAL)
    assert fails.shape == (batch.shots, 2)
    assert fails.dtype == np.uint8
    dec = MatchingDecoder(graph, TRIVIAL)
    i = int(np.argmax(batch.detectors.reshape(batch.shots, -1).sum(axis=1)))
    res = dec.decode(batch.detectors[i])
    assert fails[i, 0] == (res.sig[0] != batch.logical_x[i, 0])
    assert fails[i, 1] == (res.sig[1] != batch.logical_x[i, 1])
