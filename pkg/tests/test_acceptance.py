"""Acceptance suite: eight checks, one verdict line each.

Run with ``pytest -s tests/test_acceptance.py`` to see the verdict
lines.  The campaign-backed checks (4 to 7) read the archived CSVs
under results/ and (re)produce any missing cells first, so a cold run
is self-contained but takes a few hours on one core; with the shipped
results it completes in seconds.  Checks 1 to 3 and 8 always recompute.
"""

import numpy as np
import pytest

import _campaigns as camp
from swaplru.lattice import FEED_FORWARD, FIVE_CNOT, VARIANTS, build_layout
from swaplru.noise import DETECT_BOTH, DETECT_ONE_TYPE, NoiseConfig
from swaplru.engine import derive_fault_tables
from swaplru.dem import build_base_graph
from swaplru.matching import MatchingDecoder, brute_force_decode
from swaplru.analysis import fit_distance, fit_threshold
from swaplru.experiment import (
    RunConfig,
    curves_by_distance,
    filter_rows,
    rate_points,
    read_rows,
    run_inject,
)
from swaplru.cli import main


def _verdict(tag, ok, detail):
    print(f"{tag}: {'PASS' if ok else 'FAIL'}  ({detail})", flush=True)
    assert ok, f"{tag}: {detail}"


def _slope(rows, p_ref, account="x2", **match):
    sel = filter_rows(rows, **match)
    assert sel, f"no rows match {match}"
    return fit_distance(rate_points(sel, account=account), p_ref)


def test_c1_fault_table_fidelity():
    layout = build_layout(3)
    detail = []
    ok = True
    for variant in VARIANTS:
        try:
            entries = derive_fault_tables(layout, variant, rounds=6)
            detail.append(f"{variant}: {len(entries)} decay rows exact")
        except AssertionError as exc:
            ok = False
            detail.append(f"{variant}: {exc}")
    _verdict("C1 fault-table fidelity", ok, "; ".join(detail))


def test_c2_matching_equals_brute_force():
    layout = build_layout(3)
    cfg = NoiseConfig(p=0.005, r_e=1.0, eta=0.0755)
    graph = build_base_graph(layout, cfg, 3, basis="X")
    decoder = MatchingDecoder(graph)
    shape = (graph.rounds + 1, layout.n_stab)
    n_det = graph.n_det
    assert n_det == shape[0] * shape[1]
    rng = np.random.default_rng(20260815)
    worst = 0.0
    for _ in range(10000):
        w = rng.uniform(0.05, 8.0, graph.ew.shape)
        w[rng.random(w.shape) < 0.1] = 0.0  # zero-weight erasure edges
        det = np.zeros(shape, np.uint8)
        k = int(rng.integers(0, 5)) * 2  # even: the torus has no boundary
        det.reshape(-1)[rng.choice(n_det, size=k, replace=False)] = 1
        got = decoder.decode(det, weights=w).weight
        ref = brute_force_decode(graph, det, w=w).weight
        worst = max(worst, abs(got - ref))
    _verdict("C2 matching exactness", worst <= 1e-12,
             f"10000 random instances, max weight gap = {worst:.3g}")


def _critical_fault(rnd, stab):
    return (rnd, "z", stab, 1, ("leak", "both"))


def test_c3_distance_certification():
    modes = ((DETECT_BOTH, 1.0), (DETECT_ONE_TYPE, 0.5))

    # d=3: sweep the single fault over every window and round
    trivial_hit = 0
    critical_hit3 = 0
    for mode, ratio in modes:
        for stab in range(9):
            for rnd in range(3):
                rep = run_inject(3, [_critical_fault(rnd, stab)],
                                 decoders=("trivial", "critical"),
                                 detection_mode=mode, detect_ratio=ratio)
                trivial_hit += rep.failing("trivial")
                critical_hit3 += rep.failing("critical")

    # d=5: a neighboring pair defeats the trivial decoder
    pair = [_critical_fault(0, 0), _critical_fault(0, 5)]
    trivial_pair = all(
        run_inject(5, pair, decoders=("trivial",), detection_mode=mode,
                   detect_ratio=ratio).failing("trivial")
        for mode, ratio in modes)

    # d=5: no pair of critical faults defeats the critical decoder.
    # Spatial translation symmetry of the torus pins one fault to
    # window 0; its round and the full second-fault slot range sweep.
    critical_hit5 = 0
    n_pairs = 0
    for mode, ratio in modes:
        for r1 in range(5):
            for r2 in range(r1, 5):
                for s2 in range(25):
                    if (r2, s2) == (r1, 0):
                        continue
                    faults = [_critical_fault(r1, 0), _critical_fault(r2, s2)]
                    rep = run_inject(5, faults, decoders=("critical",),
                                     detection_mode=mode, detect_ratio=ratio)
                    critical_hit5 += rep.failing("critical")
                    n_pairs += 1

    ok = (trivial_hit > 0 and critical_hit3 == 0
          and trivial_pair and critical_hit5 == 0)
    _verdict(
        "C3 critical-fault certification", ok,
        f"d=3 single fault: trivial fails {trivial_hit}/54 placements, "
        f"critical {critical_hit3}; d=5: trivial beaten by a pair, "
        f"critical clean on {n_pairs} pairs")


def test_c4_threshold_reproduction():
    path, cells = camp.threshold_cells()
    camp.ensure(path, cells)
    rows = read_rows(path)
    detail = []
    ok = True
    for decoder, variant, lo, hi in (
            ("located", FEED_FORWARD, 0.020, 0.026),
            ("trivial", FIVE_CNOT, 0.0055, 0.0090)):
        sel = filter_rows(rows, decoder=decoder, variant=variant)
        fit = fit_threshold(curves_by_distance(sel, account="both"))
        ok &= lo <= fit.p_th <= hi
        detail.append(f"{decoder}/{variant}: p_th = {100 * fit.p_th:.3f}%"
                      f" (window [{100 * lo:.2f}, {100 * hi:.2f}]%)")
    _verdict("C4 threshold reproduction", ok, "; ".join(detail))


def test_c5_distance_slopes():
    path, cells = camp.slope_cells()
    camp.ensure(path, cells)
    rows = read_rows(path)
    targets = (("located", 0.0, camp.P_REF_LOCATED, 3.06),
               ("located", camp.ETA, camp.P_REF_LOCATED, 2.63),
               ("trivial", 0.0, camp.P_REF_TRIVIAL, 2.00),
               ("trivial", camp.ETA, camp.P_REF_TRIVIAL, 1.65))
    detail = []
    ok = True
    for decoder, eta, p_ref, want in targets:
        fit = _slope(rows, p_ref, decoder=decoder, eta=repr(eta))
        ok &= abs(fit.slope - want) <= 0.35
        detail.append(f"{decoder}/eta={eta}: {fit.slope:.2f} "
                      f"(want {want}+-0.35)")
    _verdict("C5 error-distance slopes", ok, "; ".join(detail))


def test_c6_mixed_error_ordering():
    path, cells = camp.mixed_cells()
    camp.ensure(path, cells)
    rows = read_rows(path)
    base = _slope(rows, camp.MIXED_ANCHOR, R_e=repr(0.0))
    detail = [f"baseline {base.slope:.2f}+-{base.slope_err:.2f}"]
    ok = True
    for r_e in (0.5, 0.9):
        loc = _slope(rows, camp.MIXED_ANCHOR, decoder="located",
                     R_e=repr(r_e))
        tri = _slope(rows, camp.MIXED_ANCHOR, decoder="trivial",
                     R_e=repr(r_e))
        for hi, lo, tag in ((loc, base, "located>base"),
                            (base, tri, "base>trivial")):
            gap = hi.slope - lo.slope
            sigma = float(np.hypot(hi.slope_err, lo.slope_err))
            ok &= gap >= 2.0 * sigma
            detail.append(f"R_e={r_e} {tag}: gap {gap:.2f} "
                          f"vs 2s = {2 * sigma:.2f}")
    _verdict("C6 mixed-error ordering", ok, "; ".join(detail))


def test_c7_critical_slope_preservation():
    path, cells = camp.onesided_cells()
    camp.ensure(path, cells)
    rows = read_rows(path)
    base = _slope(rows, camp.ONESIDED_ANCHOR, R_e=repr(0.0))
    crit = _slope(rows, camp.ONESIDED_ANCHOR, decoder="critical",
                  R_e=repr(0.9))
    triv = _slope(rows, camp.ONESIDED_ANCHOR, decoder="trivial",
                  R_e=repr(0.9))
    ok = (crit.slope >= triv.slope + 0.3
          and abs(crit.slope - base.slope) <= 0.35)
    _verdict(
        "C7 critical slope preservation", ok,
        f"critical {crit.slope:.2f} vs trivial {triv.slope:.2f} "
        f"(need +0.3) and baseline {base.slope:.2f} (need within 0.35)")


def test_c8_worker_determinism(tmp_path):
    cell = min(camp.threshold_cells()[1], key=lambda c: (c.d, c.p))
    argv = ["simulate", "--d", str(cell.d), "--p", repr(cell.p),
            "--re", repr(cell.r_e), "--eta", repr(cell.eta),
            "--decoder", cell.decoder, "--variant", cell.variant,
            "--shots", str(cell.shots), "--seed", str(cell.seed)]
    blobs = []
    for repeat in (1, 2):
        for workers in (1, 3):
            out = tmp_path / f"run{repeat}_w{workers}.csv"
            assert main(argv + ["--workers", str(workers),
                                "--out", str(out)]) == 0
            blobs.append(out.read_bytes())
    ok = all(b == blobs[0] for b in blobs[1:])
    _verdict("C8 worker determinism", ok,
             f"d={cell.d} p={cell.p} {cell.decoder}: two full runs at "
             f"1 and 3 workers, {len(blobs)} byte-identical CSVs")
