"""Dense statevector simulation of small qubit registers.

Conventions, inherited by every other module:

* qubit 0 is the least-significant bit of a basis index, so basis state
  ``b`` assigns ``(b >> k) & 1`` to qubit ``k``;
* rotations are ``R_A(phi) = exp(-i * phi * A / 2)`` for A in {X, Y, Z}.

Gates are applied by pairing amplitudes along the target qubit's stride,
never by building the full ``2^q x 2^q`` unitary.  A dense-matrix route
exists only as an independent oracle in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConfigurationError

# 2^24 complex doubles is ~268 MB; anything larger is a configuration bug.
MAX_QUBITS = 24

ROTATION_KINDS = ("RX", "RY", "RZ")
GATE_KINDS = ROTATION_KINDS + ("CNOT",)


@dataclass(frozen=True)
class GateOp:
    """A single-qubit rotation or a CNOT."""

    kind: str
    target: int
    angle: float = 0.0
    control: int | None = None


def rx(target: int, angle: float) -> GateOp:
    return GateOp("RX", target, angle)


def ry(target: int, angle: float) -> GateOp:
    return GateOp("RY", target, angle)


def rz(target: int, angle: float) -> GateOp:
    return GateOp("RZ", target, angle)


def cnot(control: int, target: int) -> GateOp:
    return GateOp("CNOT", target, control=control)


@dataclass
class StateVector:
    """Complex amplitudes over all 2^q basis states of a q-qubit register."""

    num_qubits: int
    amplitudes: np.ndarray


def init_zero(num_qubits: int) -> StateVector:
    """Return the all-zeros computational basis state on ``num_qubits`` qubits."""
    if not isinstance(num_qubits, (int, np.integer)) or not 1 <= num_qubits <= MAX_QUBITS:
        raise ConfigurationError(
            f"num_qubits must be an integer in [1, {MAX_QUBITS}], got {num_qubits!r}"
        )
    amps = np.zeros(2**num_qubits, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(int(num_qubits), amps)


def _check_gate(gate: GateOp, num_qubits: int) -> None:
    if gate.kind not in GATE_KINDS:
        raise ConfigurationError(f"unknown gate kind {gate.kind!r}")
    if not 0 <= gate.target < num_qubits:
        raise ConfigurationError(
            f"target {gate.target} out of range for {num_qubits} qubits"
        )
    if gate.kind == "CNOT":
        if gate.control is None or not 0 <= gate.control < num_qubits:
            raise ConfigurationError(
                f"control {gate.control} out of range for {num_qubits} qubits"
            )
        if gate.control == gate.target:
            raise ConfigurationError("control and target must differ")


@lru_cache(maxsize=None)
def cnot_permutation(num_qubits: int, control: int, target: int) -> np.ndarray:
    """Source-index permutation implementing CNOT: ``new[i] = old[perm[i]]``."""
    idx = np.arange(2**num_qubits)
    flipped = idx ^ (1 << target)
    perm = np.where((idx >> control) & 1 == 1, flipped, idx)
    perm.setflags(write=False)
    return perm


def _rotated(amps: np.ndarray, num_qubits: int, kind: str, target: int,
             angle: float) -> np.ndarray:
    half = 0.5 * angle
    view = amps.reshape(2 ** (num_qubits - 1 - target), 2, 2**target)
    a0 = view[:, 0, :]
    a1 = view[:, 1, :]
    out = np.empty_like(view)
    if kind == "RX":
        c, s = math.cos(half), math.sin(half)
        out[:, 0, :] = c * a0 - 1j * s * a1
        out[:, 1, :] = c * a1 - 1j * s * a0
    elif kind == "RY":
        c, s = math.cos(half), math.sin(half)
        out[:, 0, :] = c * a0 - s * a1
        out[:, 1, :] = c * a1 + s * a0
    else:  # RZ
        out[:, 0, :] = np.exp(-1j * half) * a0
        out[:, 1, :] = np.exp(1j * half) * a1
    return out.reshape(amps.size)


def apply_gate(state: StateVector, gate: GateOp) -> StateVector:
    """Apply one gate, returning a fresh state (the input is untouched)."""
    _check_gate(gate, state.num_qubits)
    if gate.kind == "CNOT":
        perm = cnot_permutation(state.num_qubits, gate.control, gate.target)
        return StateVector(state.num_qubits, state.amplitudes[perm])
    amps = _rotated(state.amplitudes, state.num_qubits, gate.kind,
                    gate.target, gate.angle)
    return StateVector(state.num_qubits, amps)


def apply_circuit(state: StateVector, gates) -> StateVector:
    """Apply gates left to right (list order is temporal order)."""
    for gate in gates:
        state = apply_gate(state, gate)
    return state


def probabilities(state: StateVector) -> np.ndarray:
    """Measurement probabilities |amplitude|^2 per basis state."""
    a = state.amplitudes
    return a.real**2 + a.imag**2


def marginal_one(state: StateVector, qubit: int) -> float:
    """P(qubit reads 1), i.e. (1 - <Z_qubit>) / 2."""
    if not 0 <= qubit < state.num_qubits:
        raise ConfigurationError(
            f"qubit {qubit} out of range for {state.num_qubits} qubits"
        )
    probs = probabilities(state)
    view = probs.reshape(2 ** (state.num_qubits - 1 - qubit), 2, 2**qubit)
    return float(view[:, 1, :].sum())


def sample_bitstring(state: StateVector, rng: np.random.Generator) -> np.ndarray:
    """Draw one measurement outcome over all qubits by inverse CDF.

    Returns a uint8 array of length q; entry k is the bit read off qubit k.
    """
    probs = probabilities(state)
    cum = np.cumsum(probs)
    basis = int(np.searchsorted(cum, rng.random(), side="right"))
    basis = min(basis, probs.size - 1)
    bits = (basis >> np.arange(state.num_qubits)) & 1
    return bits.astype(np.uint8)
