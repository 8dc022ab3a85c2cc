"""Exact statevector simulation of the 5-qubit turn-critic circuit.

The register holds 32 complex amplitudes. Wire 0 is the most significant
bit of the basis index throughout: basis state ``|b0 b1 b2 b3 b4>`` sits at
index ``b0*16 + b1*8 + b2*4 + b3*2 + b4``. All gates preserve the norm; the
critic pipeline is a pure function of its inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import SameWireError, ZeroVectorError

N_WIRES = 5
DIM = 1 << N_WIRES


@dataclass
class StateVector:
    """Amplitudes of the 5-qubit register (wire 0 = most significant bit)."""

    amps: np.ndarray

    @classmethod
    def zero(cls) -> "StateVector":
        amps = np.zeros(DIM, dtype=np.complex128)
        amps[0] = 1.0
        return cls(amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def tensor(self) -> np.ndarray:
        return self.amps.reshape([2] * N_WIRES)


@dataclass
class CircuitParams:
    """Fixed rotation angles of the critic circuit, reproducible from seed.

    ``thetas[k][w]`` holds the (phi, theta, omega) triple for wire w in
    layer k, drawn once from Uniform[0, 2*pi).
    """

    layers: int = 2
    seed: int = 130
    thetas: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if self.layers < 1:
            raise ValueError("layers must be >= 1")
        rng = np.random.default_rng(self.seed)
        self.thetas = rng.uniform(0.0, 2.0 * math.pi, size=(self.layers, N_WIRES, 3))

    @classmethod
    def zero(cls, layers: int = 2) -> "CircuitParams":
        params = cls(layers=layers)
        params.thetas = np.zeros((layers, N_WIRES, 3))
        return params


def _check_wire(wire: int) -> None:
    if not 0 <= wire < N_WIRES:
        raise ValueError(f"wire must be 0-{N_WIRES - 1}, got {wire}")


def amplitude_encode(
    values: np.ndarray, target_wires: list[int], state: StateVector
) -> StateVector:
    """Write a real vector as amplitudes on the target wires' subspace.

    The vector is zero-padded to 2^k (k target wires) and L2-normalized.
    Non-target wires are assumed to be |0> on the target subspace at encode
    time, which holds for the critic's encode-then-encode pipeline.
    """
    values = np.asarray(values, dtype=np.float64)
    k = len(target_wires)
    if values.ndim != 1 or len(values) > (1 << k):
        raise ValueError(f"need <= {1 << k} values for {k} wires")
    for w in target_wires:
        _check_wire(w)
    norm = np.linalg.norm(values)
    if norm == 0.0:
        raise ZeroVectorError("cannot amplitude-encode an all-zero vector")
    padded = np.zeros(1 << k, dtype=np.complex128)
    padded[: len(values)] = values / norm

    tensor = state.tensor()
    rest_idx: list[object] = [slice(None)] * N_WIRES
    for w in target_wires:
        rest_idx[w] = 0
    rest = tensor[tuple(rest_idx)]
    # new[target bits = j, rest] = padded[j] * old[target bits = 0, rest]
    out = np.multiply.outer(padded.reshape([2] * k), rest)
    out = np.moveaxis(out, range(k), target_wires)
    return StateVector(np.ascontiguousarray(out).reshape(DIM))


def _apply_1q(state: StateVector, wire: int, matrix: np.ndarray) -> StateVector:
    tensor = state.tensor()
    out = np.tensordot(matrix, tensor, axes=([1], [wire]))
    out = np.moveaxis(out, 0, wire)
    return StateVector(np.ascontiguousarray(out).reshape(DIM))


def ry_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2.0), math.sin(angle / 2.0)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def rz_matrix(angle: float) -> np.ndarray:
    return np.array(
        [[np.exp(-0.5j * angle), 0.0], [0.0, np.exp(0.5j * angle)]],
        dtype=np.complex128,
    )


def rot_matrix(phi: float, theta: float, omega: float) -> np.ndarray:
    """Universal single-qubit rotation RZ(omega) @ RY(theta) @ RZ(phi)."""
    return rz_matrix(omega) @ ry_matrix(theta) @ rz_matrix(phi)


def apply_ry(state: StateVector, wire: int, angle: float) -> StateVector:
    _check_wire(wire)
    return _apply_1q(state, wire, ry_matrix(angle))


def apply_rot(
    state: StateVector, wire: int, phi: float, theta: float, omega: float
) -> StateVector:
    _check_wire(wire)
    return _apply_1q(state, wire, rot_matrix(phi, theta, omega))


def apply_cnot(state: StateVector, control: int, target: int) -> StateVector:
    _check_wire(control)
    _check_wire(target)
    if control == target:
        raise SameWireError("CNOT control and target must differ")
    tensor = state.tensor().copy()
    idx10: list[object] = [slice(None)] * N_WIRES
    idx11: list[object] = [slice(None)] * N_WIRES
    idx10[control] = idx11[control] = 1
    idx10[target], idx11[target] = 0, 1
    tensor[tuple(idx10)], tensor[tuple(idx11)] = (
        tensor[tuple(idx11)].copy(),
        tensor[tuple(idx10)].copy(),
    )
    return StateVector(tensor.reshape(DIM))


def expect_z(state: StateVector, wire: int) -> float:
    """Pauli-Z expectation on ``wire``: +1 for |0>, -1 for |1>."""
    _check_wire(wire)
    probs = np.abs(state.tensor()) ** 2
    other = tuple(ax for ax in range(N_WIRES) if ax != wire)
    marginal = probs.sum(axis=other)
    return float(marginal[0] - marginal[1])


ENTANGLER_PAIRS: tuple[tuple[int, int], ...] = ((0, 1), (1, 2), (2, 3), (3, 4))
ACTION_WIRES = [0, 1, 2]
DENSITY_WIRES = [3, 4]


class TurnCritic:
    """Precompiled turn critic for tight training loops.

    The entangling layers are independent of the per-cell inputs, so their
    whole gate sequence collapses into one fixed 32x32 unitary built once
    per parameter set; each evaluation is then two small products. Matches
    :func:`run_turn_critic` to float precision (pinned by tests).
    """

    def __init__(self, params: CircuitParams):
        unitary = np.eye(DIM, dtype=np.complex128)
        for layer in range(params.layers):
            for wire in range(N_WIRES):
                unitary = _lift(rot_matrix(*params.thetas[layer, wire]), wire) @ unitary
            for control, target in ENTANGLER_PAIRS:
                unitary = _cnot_permutation(control, target) @ unitary
        self.unitary = unitary
        self.z_signs = np.array(
            [[1.0 - 2.0 * ((i >> (N_WIRES - 1 - w)) & 1) for i in range(DIM)] for w in range(N_WIRES)]
        )

    def measure(self, q_row: np.ndarray, d_row: np.ndarray, turn_feat: float) -> np.ndarray:
        qn = np.asarray(q_row, dtype=np.float64)
        q_norm = np.linalg.norm(qn)
        if q_norm == 0.0:
            raise ZeroVectorError("cannot amplitude-encode an all-zero vector")
        qn = qn / q_norm
        dn = np.asarray(d_row, dtype=np.float64)
        d_norm = np.linalg.norm(dn)
        if d_norm == 0.0:
            raise ZeroVectorError("cannot amplitude-encode an all-zero vector")
        dn = dn / d_norm
        half = math.pi * turn_feat / 2.0
        c, s = math.cos(half), math.sin(half)
        # RY(pi*tf) on wires 3 and 4 applied to the encoded pair [d0, d1, 0, 0]
        d4 = np.array(
            [c * c * dn[0] - c * s * dn[1],
             c * s * dn[0] + c * c * dn[1],
             s * c * dn[0] - s * s * dn[1],
             s * s * dn[0] + s * c * dn[1]]
        )
        psi = (qn[:, None] * d4[None, :]).reshape(DIM)
        phi = self.unitary @ psi
        return self.z_signs @ (phi.real**2 + phi.imag**2)


def _lift(u: np.ndarray, wire: int) -> np.ndarray:
    return np.kron(np.eye(1 << wire), np.kron(u, np.eye(1 << (N_WIRES - 1 - wire))))


def _cnot_permutation(control: int, target: int) -> np.ndarray:
    mat = np.zeros((DIM, DIM), dtype=np.complex128)
    cbit = N_WIRES - 1 - control
    tbit = N_WIRES - 1 - target
    for i in range(DIM):
        j = i ^ (1 << tbit) if (i >> cbit) & 1 else i
        mat[j, i] = 1.0
    return mat


def run_turn_critic(
    q_row: np.ndarray,
    d_row: np.ndarray,
    turn_feat: float,
    params: CircuitParams,
) -> np.ndarray:
    """Evaluate the 5-qubit turn critic and return [<Z0> ... <Z4>].

    Pipeline: amplitude-encode the 8 action values on wires 0-2 and the
    2 density values (zero-padded to 4) on wires 3-4; modulate wires 3 and
    4 with RY(pi * turn_feat); then per layer apply the parameterized
    rotation on every wire followed by the CNOT chain 0->1->2->3->4.
    """
    if not 0.0 <= turn_feat <= 1.0:
        raise ValueError(f"turn_feat must lie in [0, 1], got {turn_feat}")
    d_row = np.asarray(d_row, dtype=np.float64)
    if len(d_row) == 2:
        d_row = np.concatenate([d_row, [0.0, 0.0]])

    state = StateVector.zero()
    state = amplitude_encode(np.asarray(q_row, dtype=np.float64), ACTION_WIRES, state)
    state = amplitude_encode(d_row, DENSITY_WIRES, state)
    angle = math.pi * turn_feat
    for wire in DENSITY_WIRES:
        state = apply_ry(state, wire, angle)
    for layer in range(params.layers):
        for wire in range(N_WIRES):
            phi, theta, omega = params.thetas[layer, wire]
            state = apply_rot(state, wire, phi, theta, omega)
        for control, target in ENTANGLER_PAIRS:
            state = apply_cnot(state, control, target)
    return np.array([expect_z(state, w) for w in range(N_WIRES)])
