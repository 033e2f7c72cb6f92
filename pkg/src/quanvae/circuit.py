"""Gate-list circuits: seeded random generation, execution, text serialization.

File format (UTF-8, one gate per line)::

    # qubits=16 depth=2 seed=42
    # rng=numpy.PCG64
    RY 0 1.2345
    CNOT 1 0

Rotation lines are ``KIND wire angle``; CNOT lines are ``CNOT target control``.
Angles are written with ``repr`` so a parse/serialize cycle is byte-exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from quanvae import qsim
from quanvae.errors import ConfigError, ParseError, ShapeError
from quanvae.qsim import Gate

RNG_NAME = "numpy.PCG64"
DEFAULT_DEPTH = 2
DEFAULT_SEED = 42


@dataclass(frozen=True)
class CircuitSpec:
    num_qubits: int
    gates: tuple = field(default_factory=tuple)
    seed: int = 0
    depth: int = 0
    rng: str = RNG_NAME

    def __post_init__(self):
        if not 1 <= self.num_qubits <= qsim.MAX_QUBITS:
            raise ConfigError(f"num_qubits must be in [1, {qsim.MAX_QUBITS}]")
        object.__setattr__(self, "gates", tuple(self.gates))
        for g in self.gates:
            g.check_wires(self.num_qubits)


def generate_random_circuit(num_qubits: int, depth: int = DEFAULT_DEPTH, seed: int = DEFAULT_SEED) -> CircuitSpec:
    """Draw ``depth`` layers of random rotations followed by a random ring of CNOTs.

    Each layer puts one rotation (kind uniform over RX/RY/RZ, angle uniform
    in [0, 2pi)) on every wire, then for each wire ``i`` independently with
    probability 1/2 a CNOT with control ``i`` and target ``(i + 1) % n``.
    """
    if num_qubits < 2 or num_qubits > qsim.MAX_QUBITS:
        raise ConfigError(f"random circuits need 2..{qsim.MAX_QUBITS} qubits, got {num_qubits}")
    if depth < 1:
        raise ConfigError(f"depth must be >= 1, got {depth}")
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    rng = np.random.Generator(np.random.PCG64(seed))
    gates = []
    for _ in range(depth):
        for wire in range(num_qubits):
            kind = qsim.ROTATIONS[int(rng.integers(3))]
            angle = float(rng.uniform(0.0, 2 * math.pi))
            gates.append(Gate(kind, wire, angle=angle))
        for wire in range(num_qubits):
            if rng.random() < 0.5:
                gates.append(Gate("CNOT", (wire + 1) % num_qubits, control=wire))
    return CircuitSpec(num_qubits, tuple(gates), seed=seed, depth=depth)


def run_circuit(circuit: CircuitSpec, input_angles: Sequence[float]) -> list[float]:
    """Encode ``input_angles`` as RY rotations on |0...0>, apply the circuit, read <Z> per wire."""
    angles = np.asarray(input_angles, dtype=np.float64)
    if angles.shape != (circuit.num_qubits,):
        raise ShapeError(f"expected {circuit.num_qubits} input angles, got shape {angles.shape}")
    if not np.all(np.isfinite(angles)):
        raise ConfigError("input angles must be finite")
    state = qsim.new_ground_state(circuit.num_qubits)
    amps = state.amplitudes
    for wire, theta in enumerate(angles):
        qsim.apply_gate_inplace(amps, circuit.num_qubits, Gate("RY", wire, angle=float(theta)))
    for g in circuit.gates:
        qsim.apply_gate_inplace(amps, circuit.num_qubits, g)
    return qsim.all_expectations_z(state).tolist()


def serialize(circuit: CircuitSpec) -> str:
    lines = [
        f"# qubits={circuit.num_qubits} depth={circuit.depth} seed={circuit.seed}",
        f"# rng={circuit.rng}",
    ]
    for g in circuit.gates:
        if g.kind == "CNOT":
            lines.append(f"CNOT {g.target} {g.control}")
        else:
            lines.append(f"{g.kind} {g.target} {g.angle!r}")
    return "\n".join(lines) + "\n"


def deserialize(text: str) -> CircuitSpec:
    header = {}
    gates = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for item in line[1:].split():
                key, sep, value = item.partition("=")
                if not sep:
                    raise ParseError(f"bad header item {item!r}", lineno)
                header[key] = value
            continue
        tokens = line.split()
        kind = tokens[0]
        try:
            if kind == "CNOT":
                if len(tokens) != 3:
                    raise ParseError("CNOT needs target and control", lineno)
                gates.append(Gate("CNOT", int(tokens[1]), control=int(tokens[2])))
            elif kind in qsim.ROTATIONS:
                if len(tokens) != 3:
                    raise ParseError(f"{kind} needs wire and angle", lineno)
                gates.append(Gate(kind, int(tokens[1]), angle=float(tokens[2])))
            else:
                raise ParseError(f"unknown gate {kind!r}", lineno)
        except (ValueError, ConfigError) as exc:
            raise ParseError(str(exc), lineno) from exc
    try:
        num_qubits = int(header["qubits"])
        depth = int(header.get("depth", 0))
        seed = int(header.get("seed", 0))
    except (KeyError, ValueError) as exc:
        raise ParseError(f"missing or malformed header: {exc}") from exc
    try:
        return CircuitSpec(num_qubits, tuple(gates), seed=seed, depth=depth, rng=header.get("rng", RNG_NAME))
    except ConfigError as exc:
        raise ParseError(str(exc)) from exc


def save(circuit: CircuitSpec, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(serialize(circuit))


def load(path) -> CircuitSpec:
    with open(path, encoding="utf-8") as f:
        return deserialize(f.read())
