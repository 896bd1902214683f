"""Per-gate noise channel: two-qubit depolarizing plus Rydberg decay leakage.

Every CNOT fails with total probability p, split into a leakage part
p_e = p * R_e and a Pauli part p_p = p * (1 - R_e).  The leakage part is
itself split: with probability eta both atoms leak, otherwise one side
leaks (equal weight per side) and the decay jump kicks a Pauli onto the
surviving partner half of the time (an X when the partner is the CNOT
target, a Z when it is the control).  The Pauli part is the uniform
two-qubit depolarizing channel, each of the 15 non-identity pairs with
probability p_p / 15.

Detection of leakage happens at measurement.  In mode "both" every leaked
atom is flagged.  In mode "one_type" a single leaked atom is flagged with
probability detect_ratio, and when both atoms of a gate leaked exactly one
of the two (fair coin) is flagged.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

import numpy as np

from .lattice import FIVE_CNOT, VARIANTS

PAULI_PAIRS = (
    "IX", "IY", "IZ",
    "XI", "XX", "XY", "XZ",
    "YI", "YX", "YY", "YZ",
    "ZI", "ZX", "ZY", "ZZ",
)

_members = {"NONE": 0}
_members.update({name: k + 1 for k, name in enumerate(PAULI_PAIRS)})
_members.update({
    "LEAK_CONTROL": 16,       # control leaks, no kick on the target
    "LEAK_CONTROL_KICK": 17,  # control leaks, X kicked onto the target
    "LEAK_TARGET": 18,        # target leaks, no kick on the control
    "LEAK_TARGET_KICK": 19,   # target leaks, Z kicked onto the control
    "LEAK_BOTH": 20,
})
GateFault = IntEnum("GateFault", _members)

N_FAULT_CODES = 21

DETECT_BOTH = "both"
DETECT_ONE_TYPE = "one_type"
DETECTION_MODES = (DETECT_BOTH, DETECT_ONE_TYPE)


@dataclass(frozen=True)
class NoiseConfig:
    p: float
    r_e: float = 1.0
    eta: float = 0.0
    detection_mode: str = DETECT_BOTH
    detect_ratio: float = 1.0
    variant: str = FIVE_CNOT

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {self.p}")
        if not 0.0 <= self.r_e <= 1.0:
            raise ValueError(f"r_e must be in [0, 1], got {self.r_e}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must be in [0, 1], got {self.eta}")
        if self.detection_mode not in DETECTION_MODES:
            raise ValueError(f"unknown detection mode {self.detection_mode!r}")
        if not 0.0 <= self.detect_ratio <= 1.0:
            raise ValueError(f"detect_ratio must be in [0, 1], got {self.detect_ratio}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")

    @property
    def p_e(self) -> float:
        return self.p * self.r_e

    @property
    def p_p(self) -> float:
        return self.p * (1.0 - self.r_e)


def fault_probabilities(cfg: NoiseConfig) -> np.ndarray:
    """Probability of each GateFault code, index = code value."""
    probs = np.zeros(N_FAULT_CODES)
    probs[1:16] = cfg.p_p / 15.0
    single = cfg.p_e * (1.0 - cfg.eta) / 2.0
    probs[GateFault.LEAK_CONTROL] = single / 2.0
    probs[GateFault.LEAK_CONTROL_KICK] = single / 2.0
    probs[GateFault.LEAK_TARGET] = single / 2.0
    probs[GateFault.LEAK_TARGET_KICK] = single / 2.0
    probs[GateFault.LEAK_BOTH] = cfg.p_e * cfg.eta
    probs[0] = 1.0 - probs[1:].sum()
    return probs


def sample_gate_fault(rng: np.random.Generator, cfg: NoiseConfig) -> GateFault:
    return GateFault(int(rng.choice(N_FAULT_CODES, p=fault_probabilities(cfg))))


def pauli_pair(fault) -> str | None:
    """The (control, target) Pauli letters of a depolarizing fault, else None."""
    code = int(fault)
    if 1 <= code <= 15:
        return PAULI_PAIRS[code - 1]
    return None


def is_leak(fault) -> bool:
    return int(fault) >= GateFault.LEAK_CONTROL


def leaks_control(fault) -> bool:
    code = int(fault)
    return code in (GateFault.LEAK_CONTROL, GateFault.LEAK_CONTROL_KICK,
                    GateFault.LEAK_BOTH)


def leaks_target(fault) -> bool:
    code = int(fault)
    return code in (GateFault.LEAK_TARGET, GateFault.LEAK_TARGET_KICK,
                    GateFault.LEAK_BOTH)


def classify_pauli(fault, basis: str = "X") -> str:
    """Flip class of a Pauli fault in one basis.

    basis "X": which side carries an X component (X or Y), since only those
    flip the tracked bit-flip frames.  basis "Z": which side carries a Z
    component (Z or Y).  Returns "XX" for both sides, "XI" for control only,
    "IX" for target only, "trivial" otherwise.  Leak codes are rejected.
    """
    pair = pauli_pair(fault)
    if pair is None:
        if int(fault) == 0:
            return "trivial"
        raise ValueError(f"not a Pauli fault: {fault!r}")
    if basis == "X":
        active = "XY"
    elif basis == "Z":
        active = "ZY"
    else:
        raise ValueError(f"basis must be 'X' or 'Z', got {basis!r}")
    ctl = pair[0] in active
    tgt = pair[1] in active
    if ctl and tgt:
        return "XX"
    if ctl:
        return "XI"
    if tgt:
        return "IX"
    return "trivial"
