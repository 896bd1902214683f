"""Shot campaigns: reproducible execution, CSV emission, fault injection.

A campaign cell is one (configuration, seed) pair; its shots are split
into fixed-size chunks whose streams depend only on (seed, chunk index),
so any worker count reproduces the same bytes.  Rows carry failure
counts per logical operator and append to CSV resumably: a cell whose
run id is already present is never recomputed.

`run_inject` certifies decoder behavior under hand-placed faults.  The
reference engine is affine over its leak coins, so instead of running
all coin vectors it measures each coin's toggle vector once, reduces
them to an independent set, and decodes every distinct outcome pattern
exactly once.
"""

from __future__ import annotations

import csv
import hashlib
import itertools
import os
import time
from dataclasses import dataclass

import joblib
import numpy as np

from .analysis import RatePoint
from .dem import build_base_graph
from .engine import ref_simulate
from .lattice import FIVE_CNOT, build_layout
from .matching import DECODERS, TRIVIAL, MatchingDecoder, decode_batch
from .noise import DETECT_BOTH, DETECT_ONE_TYPE, NoiseConfig, PAULI_PAIRS
from .propagation import CHUNK, simulate_batch

__all__ = [
    "WORKERS_ENV",
    "CSV_COLUMNS",
    "RunConfig",
    "default_workers",
    "segment_chunks",
    "run_cell",
    "append_rows",
    "existing_run_ids",
    "read_rows",
    "filter_rows",
    "rate_points",
    "curves_by_distance",
    "parse_fault",
    "run_inject",
    "InjectOutcome",
    "InjectReport",
]

WORKERS_ENV = "SWAPLRU_WORKERS"

CSV_COLUMNS = ("run_id", "d", "rounds", "p", "R_e", "eta", "decoder",
               "variant", "detect_mode", "detect_ratio", "shots",
               "fail_X1", "fail_X2", "fail_Z1", "fail_Z2",
               "p_L_X2", "stderr_X2", "wall_seconds", "seed")


@dataclass(frozen=True)
class RunConfig:
    """One campaign cell; immutable and hashable into a run id."""

    d: int
    p: float
    rounds: int = 0  # 0 means d rounds
    r_e: float = 1.0
    eta: float = 0.0
    decoder: str = TRIVIAL
    variant: str = FIVE_CNOT
    detection_mode: str = DETECT_BOTH
    detect_ratio: float = 1.0
    shots: int = 1000
    seed: int = 0
    neighbors: int = 26

    def __post_init__(self):
        if self.d < 3 or self.d % 2 == 0:
            raise ValueError("d must be odd and >= 3")
        if self.rounds == 0:
            object.__setattr__(self, "rounds", self.d)
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.decoder not in DECODERS:
            raise ValueError(f"unknown decoder {self.decoder!r}")
        self.noise_config()  # validates the remaining fields

    def noise_config(self) -> NoiseConfig:
        return NoiseConfig(p=self.p, r_e=self.r_e, eta=self.eta,
                           detection_mode=self.detection_mode,
                           detect_ratio=self.detect_ratio,
                           variant=self.variant)

    @property
    def run_id(self) -> str:
        key = "|".join(repr(v) for v in (
            self.d, self.rounds, self.p, self.r_e, self.eta, self.decoder,
            self.variant, self.detection_mode, self.detect_ratio,
            self.shots, self.seed))
        return hashlib.sha1(key.encode("ascii")).hexdigest()[:12]


def default_workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"{WORKERS_ENV} must be an integer, got {raw!r}")
    if n < 1:
        raise ValueError(f"{WORKERS_ENV} must be >= 1")
    return n


def segment_chunks(shots: int, workers: int):
    """Contiguous chunk-aligned (first_chunk, n_shots) segments.

    Only the globally last chunk may be partial, so every worker
    replays exactly the chunks a single worker would.
    """
    n_chunks = -(-shots // CHUNK)
    workers = max(1, min(workers, n_chunks))
    per, extra = divmod(n_chunks, workers)
    segs = []
    start = 0
    for w in range(workers):
        take = per + (1 if w < extra else 0)
        lo = start * CHUNK
        hi = min((start + take) * CHUNK, shots)
        segs.append((start, hi - lo))
        start += take
    return segs


def _count_segment(cfg: RunConfig, first_chunk: int, n_shots: int):
    layout = build_layout(cfg.d)
    ncfg = cfg.noise_config()
    batch = simulate_batch(layout, ncfg, cfg.rounds, n_shots, cfg.seed,
                           first_chunk=first_chunk)
    if cfg.p == 0.0:
        # nothing can fire, and the weight graph is undefined at p = 0
        if batch.detectors.any() or batch.logical_x.any():
            raise AssertionError("noiseless shots produced events")
        return np.zeros(2, dtype=np.int64)
    graph = build_base_graph(layout, ncfg, cfg.rounds, basis="X")
    fails = decode_batch(graph, batch, cfg.decoder, cfg.neighbors)
    return fails.sum(axis=0, dtype=np.int64)


def run_cell(cfg: RunConfig, workers: int | None = None,
             timing: bool = False) -> dict:
    """Simulate and decode one cell; returns its CSV row."""
    if workers is None:
        workers = default_workers()
    t0 = time.perf_counter()
    segs = segment_chunks(cfg.shots, workers)
    if len(segs) == 1:
        counts = _count_segment(cfg, *segs[0])
    else:
        parts = joblib.Parallel(n_jobs=len(segs))(
            joblib.delayed(_count_segment)(cfg, fc, ns) for fc, ns in segs)
        counts = np.sum(parts, axis=0)
    wall = time.perf_counter() - t0
    return row_of(cfg, counts, wall if timing else None)


def row_of(cfg: RunConfig, counts, wall: float | None = None) -> dict:
    p_l = counts[1] / cfg.shots
    err = float(np.sqrt(p_l * (1.0 - p_l) / cfg.shots))
    return {
        "run_id": cfg.run_id,
        "d": str(cfg.d),
        "rounds": str(cfg.rounds),
        "p": repr(cfg.p),
        "R_e": repr(cfg.r_e),
        "eta": repr(cfg.eta),
        "decoder": cfg.decoder,
        "variant": cfg.variant,
        "detect_mode": cfg.detection_mode,
        "detect_ratio": repr(cfg.detect_ratio),
        "shots": str(cfg.shots),
        "fail_X1": str(int(counts[0])),
        "fail_X2": str(int(counts[1])),
        "fail_Z1": "0",
        "fail_Z2": "0",
        "p_L_X2": repr(float(p_l)),
        "stderr_X2": repr(err),
        "wall_seconds": "" if wall is None else f"{wall:.3f}",
        "seed": str(cfg.seed),
    }


def existing_run_ids(path) -> set:
    if not os.path.exists(path):
        return set()
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["run_id"] for row in csv.DictReader(fh)}


def append_rows(path, rows) -> int:
    """Append rows whose run id is not yet present; returns the count."""
    seen = existing_run_ids(path)
    fresh = [r for r in rows if r["run_id"] not in seen]
    header = not os.path.exists(path)
    with open(path, "a", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(CSV_COLUMNS))
        if header:
            writer.writeheader()
        for r in fresh:
            writer.writerow(r)
    return len(fresh)


def read_rows(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def filter_rows(rows, **match) -> list:
    out = []
    for r in rows:
        if all(r[k] == v for k, v in match.items()):
            out.append(r)
    return out


def rate_points(rows, account: str = "x2") -> list:
    """Rows to RatePoints; `both` averages the two X operators."""
    pts = []
    for r in rows:
        shots = int(r["shots"])
        if account == "x2":
            pts.append(RatePoint(p=float(r["p"]), shots=shots,
                                 fails=int(r["fail_X2"])))
        elif account == "both":
            pts.append(RatePoint(p=float(r["p"]), shots=2 * shots,
                                 fails=int(r["fail_X1"]) + int(r["fail_X2"])))
        else:
            raise ValueError(f"unknown accounting {account!r}")
    return pts


def curves_by_distance(rows, account: str = "both") -> dict:
    groups = {}
    for r in rows:
        groups.setdefault(int(r["d"]), []).append(r)
    return {d: rate_points(g, account) for d, g in sorted(groups.items())}


# ---------------------------------------------------------------------------
# fault injection


def parse_fault(text: str):
    """Parse "round:kind:stab:gate:pauli:XZ" or "round:kind:stab:gate:leak:SIDE"."""
    parts = text.split(":")
    if len(parts) != 6:
        raise ValueError(f"fault spec needs 6 fields, got {text!r}")
    rnd, kind, stab, gate = int(parts[0]), parts[1], int(parts[2]), int(parts[3])
    family, what = parts[4], parts[5]
    if kind not in ("x", "z"):
        raise ValueError(f"unknown stabilizer kind {kind!r}")
    if not 1 <= gate <= 5:
        raise ValueError(f"gate slot must be 1..5, got {gate}")
    if rnd < 0 or stab < 0:
        raise ValueError("round and stabilizer index must be >= 0")
    if family == "pauli":
        if what not in PAULI_PAIRS:
            raise ValueError(f"unknown Pauli pair {what!r}")
        return (rnd, kind, stab, gate, ("pauli", what))
    if family == "leak":
        if what not in ("control", "target", "both"):
            raise ValueError(f"unknown leak side {what!r}")
        return (rnd, kind, stab, gate, ("leak", what))
    raise ValueError(f"unknown fault family {family!r}")


def _detect_branches(spec, detection_mode: str, detect_ratio: float):
    """Possible detection outcomes of one fault under the noise model."""
    if spec[0] == "pauli":
        return [spec]
    side = spec[1]
    if side == "both":
        if detection_mode == DETECT_BOTH:
            return [("leak", "both", (True, True))]
        # one observable species: exactly one side gets flagged
        return [("leak", "both", (True, False)),
                ("leak", "both", (False, True))]
    if detection_mode == DETECT_BOTH or detect_ratio == 1.0:
        return [("leak", side, True)]
    if detect_ratio == 0.0:
        return [("leak", side, False)]
    return [("leak", side, True), ("leak", side, False)]


def _fingerprint(res, n_det):
    out = np.empty(n_det + 2, dtype=np.uint8)
    out[:n_det] = res.detectors.reshape(-1)
    out[n_det] = res.logical_x[0]
    out[n_det + 1] = res.logical_x[1]
    return out


def _flag_state(res):
    return ((res.out_z == 2).copy(), (res.out_x == 2).copy(),
            (res.readout_flags == 2).copy())


def _independent_rows(rows):
    """GF(2) row reduction; returns the independent toggle vectors."""
    basis = []
    for vec in rows:
        v = vec.copy()
        for b in basis:
            pivot = int(np.argmax(b))
            if v[pivot]:
                v ^= b
        if v.any():
            basis.append(v)
    return basis


@dataclass
class InjectOutcome:
    decoder: str
    n_realizations: int  # coin vectors across all detection branches
    n_patterns: int      # distinct decoded outcome patterns
    n_fail_x1: int       # failing patterns per observable
    n_fail_x2: int


@dataclass
class InjectReport:
    d: int
    rounds: int
    faults: tuple
    outcomes: dict

    def failing(self, decoder: str) -> bool:
        out = self.outcomes[decoder]
        return out.n_fail_x1 + out.n_fail_x2 > 0


def run_inject(d: int, faults, decoders=DECODERS, rounds: int = 0,
               p_nominal: float = 0.005, r_e: float = 1.0,
               eta: float = 0.0755, detection_mode: str = DETECT_BOTH,
               detect_ratio: float = 1.0,
               variant: str = FIVE_CNOT) -> InjectReport:
    """Decode every outcome the injected faults can realize.

    Enumerates the detection branches of each fault, measures the
    per-coin toggle vectors of the reference engine (which is affine
    over coins), and decodes each element of the spanned outcome space
    once.  Counts are reported per decoder and observable.
    """
    layout = build_layout(d)
    rounds = rounds or d
    ncfg = NoiseConfig(p=p_nominal, r_e=r_e, eta=eta,
                       detection_mode=detection_mode,
                       detect_ratio=detect_ratio, variant=variant)
    graph = build_base_graph(layout, ncfg, rounds, basis="X")
    decs = {m: MatchingDecoder(graph, m) for m in decoders}
    tallies = {m: [0, 0, 0, 0] for m in decoders}

    branch_lists = [_detect_branches(spec, detection_mode, detect_ratio)
                    for *_, spec in faults]
    slots = [tuple(f[:4]) for f in faults]
    for branch in itertools.product(*branch_lists):
        placed = [slot + (spec,) for slot, spec in zip(slots, branch)]
        base = ref_simulate(layout, rounds, placed,
                            variant=variant, coins=itertools.repeat(0))
        n = base.coins_used
        fp0 = _fingerprint(base, graph.n_det)
        flags = _flag_state(base)
        toggles = []
        for i in range(n):
            bits = [0] * n
            bits[i] = 1
            res = ref_simulate(layout, rounds, placed,
                               variant=variant, coins=iter(bits))
            if res.coins_used != n:
                raise AssertionError("coin count changed with coin values")
            for a, b in zip(_flag_state(res), flags):
                if not np.array_equal(a, b):
                    raise AssertionError("flags moved with a coin value")
            toggles.append(_fingerprint(res, graph.n_det) ^ fp0)
        basis = _independent_rows(toggles)
        patterns = [fp0]
        for vec in basis:
            patterns.extend([q ^ vec for q in patterns])
        flag_z, flag_x, flag_final = flags
        out_z = flag_z.astype(np.uint8) * 2
        out_x = flag_x.astype(np.uint8) * 2
        rflags = flag_final.astype(np.uint8) * 2
        for m in decoders:
            tallies[m][0] += 2 ** n  # coin vectors this branch spans
        for q in patterns:
            det = q[:graph.n_det]
            truth = (int(q[graph.n_det]), int(q[graph.n_det + 1]))
            for m in decoders:
                res = decs[m].decode(det, out_z, out_x, rflags)
                t = tallies[m]
                t[1] += 1
                t[2] += res.sig[0] != truth[0]
                t[3] += res.sig[1] != truth[1]

    outcomes = {}
    for m in decoders:
        tot, pat, f1, f2 = tallies[m]
        outcomes[m] = InjectOutcome(decoder=m, n_realizations=tot,
                                    n_patterns=pat, n_fail_x1=f1,
                                    n_fail_x2=f2)
    return InjectReport(d=d, rounds=rounds, faults=tuple(faults),
                        outcomes=outcomes)
