"""Master-equation representations and their derived dynamical objects.

A representation is a Hamiltonian ``H`` (hbar = 1) together with an ordered
list of nonzero jump operators ``J_1..J_d`` (units of rate**0.5) acting on a
``dim``-dimensional Hilbert space.  From it we derive the generator acting on
column-stacked density matrices, the non-Hermitian effective Hamiltonian, the
state-dependent jump rates and destinations, and the no-jump drift.

Wire format (UTF-8 JSON)::

    {
      "label": "optional name",
      "dim": 3,
      "hamiltonian": [[[re, im], ...], ...],   # row-major, required
      "jumps": [ [[[re, im], ...], ...], ... ] # one matrix per operator
    }

Complex scalars are two-element ``[re, im]`` arrays.  Jump indices are
1-based in all documents and reports, 0-based in the Python API.

Representations are treated as immutable after construction; all derived
computations are pure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ParseError, ValidationError
from .linalg import (
    DEFAULT_TOL,
    Tolerance,
    as_operator,
    dagger,
    frobenius,
    superoperator_matrix,
)

HERMITICITY_TOL = 1e-12


@dataclass(eq=False)
class Representation:
    """Hamiltonian plus ordered jump operators; ``hamiltonian=None`` means 0."""

    hamiltonian: Optional[np.ndarray]
    jumps: Sequence[np.ndarray]
    label: str = ""

    def __post_init__(self) -> None:
        jumps = tuple(as_operator(j) for j in self.jumps)
        if not jumps:
            raise ValidationError("a representation needs at least one jump operator")
        dim = jumps[0].shape[0]
        if self.hamiltonian is None:
            ham = np.zeros((dim, dim), dtype=complex)
        else:
            ham = as_operator(self.hamiltonian)
        self.hamiltonian = ham
        self.jumps = jumps

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def n_jumps(self) -> int:
        return len(self.jumps)


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def validate(rep: Representation, tol: Tolerance = DEFAULT_TOL) -> ValidationReport:
    """Collect structural violations; an empty report means valid."""
    violations: list[str] = []
    dim = rep.dim
    ham = rep.hamiltonian
    if ham.shape != (dim, dim):
        violations.append(f"Hamiltonian is not square: shape {ham.shape}")
    elif frobenius(ham - dagger(ham)) > HERMITICITY_TOL * max(1.0, frobenius(ham)):
        violations.append("Hamiltonian not Hermitian")
    for k, jump in enumerate(rep.jumps):
        if jump.shape != (dim, dim):
            violations.append(
                f"jump operator {k + 1} has shape {jump.shape}, expected {(dim, dim)}"
            )
        elif frobenius(jump) <= tol.atol:
            violations.append(f"zero jump operator at index {k + 1}")
    return ValidationReport(tuple(violations))


def require_valid(rep: Representation, tol: Tolerance = DEFAULT_TOL) -> None:
    report = validate(rep, tol)
    if not report.ok:
        raise ValidationError("; ".join(report.violations))


def effective_hamiltonian(rep: Representation) -> np.ndarray:
    """Non-Hermitian drift generator ``H - (i/2) sum_k J_k^+ J_k``."""
    acc = np.zeros((rep.dim, rep.dim), dtype=complex)
    for jump in rep.jumps:
        acc += dagger(jump) @ jump
    return rep.hamiltonian - 0.5j * acc


def liouvillian_matrix(rep: Representation, tol: Tolerance = DEFAULT_TOL) -> np.ndarray:
    """Generator of the averaged-state dynamics on column-stacked matrices.

    Applying the result to ``vec(rho)`` gives
    ``-i[H, rho] + sum_k (J_k rho J_k^+ - (1/2){J_k^+ J_k, rho})``.
    """
    require_valid(rep, tol)
    dim = rep.dim
    eye = np.eye(dim)
    ham = rep.hamiltonian
    out = -1j * (np.kron(eye, ham) - np.kron(ham.T, eye))
    out += superoperator_matrix(rep.jumps)
    for jump in rep.jumps:
        jj = dagger(jump) @ jump
        out -= 0.5 * (np.kron(eye, jj) + np.kron(jj.T, eye))
    return out


def jump_rate(rep: Representation, k: int, psi: np.ndarray) -> float:
    """Rate ``|J_k psi|**2`` of channel ``k`` (0-based) at state vector ``psi``."""
    jump = rep.jumps[k]
    amp = jump @ np.asarray(psi, dtype=complex).reshape(-1)
    return float(np.real(np.vdot(amp, amp)))


def jump_rates(rep: Representation, psi: np.ndarray) -> np.ndarray:
    """All channel rates at ``psi`` as a length-``d`` array."""
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    return np.array([jump_rate(rep, k, psi) for k in range(rep.n_jumps)])


def jump_destination(
    rep: Representation, k: int, psi: np.ndarray, tol: Tolerance = DEFAULT_TOL
) -> np.ndarray:
    """Post-jump density matrix for channel ``k``; zero matrix below threshold.

    A rate at or below ``atol`` means the jump cannot fire, so the
    conventional zero matrix is returned instead of normalizing a null state.
    """
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    amp = rep.jumps[k] @ psi
    rate = float(np.real(np.vdot(amp, amp)))
    if rate <= tol.atol:
        return np.zeros((rep.dim, rep.dim), dtype=complex)
    return np.outer(amp, amp.conj()) / rate


def drift(rep: Representation, psi_density: np.ndarray) -> np.ndarray:
    """No-jump flow of a pure density matrix; traceless and Hermitian."""
    psi = as_operator(psi_density)
    h_eff = effective_hamiltonian(rep)
    flow = -1j * (h_eff @ psi) + 1j * (psi @ dagger(h_eff))
    return flow - psi * np.trace(flow)


# -- serialization ----------------------------------------------------------


def _complex_to_pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


def matrix_to_json(mat: np.ndarray) -> list[list[list[float]]]:
    return [[_complex_to_pair(entry) for entry in row] for row in np.asarray(mat, dtype=complex)]


def vector_to_json(v: np.ndarray) -> list[list[float]]:
    return [_complex_to_pair(entry) for entry in np.asarray(v, dtype=complex).reshape(-1)]


def _pair_from_json(obj, where: str) -> complex:
    if (
        not isinstance(obj, (list, tuple))
        or len(obj) != 2
        or not all(isinstance(part, (int, float)) for part in obj)
    ):
        raise ParseError(f"{where}: complex scalars must be [re, im] pairs, got {obj!r}")
    return complex(obj[0], obj[1])


def matrix_from_json(obj, where: str) -> np.ndarray:
    if not isinstance(obj, list) or not obj:
        raise ParseError(f"{where}: expected a non-empty list of rows")
    rows = []
    width = None
    for i, row in enumerate(obj):
        if not isinstance(row, list) or not row:
            raise ParseError(f"{where}[{i}]: expected a non-empty row")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise ParseError(f"{where}[{i}]: ragged row of length {len(row)}")
        rows.append([_pair_from_json(entry, f"{where}[{i}][{j}]") for j, entry in enumerate(row)])
    return np.array(rows, dtype=complex)


def vector_from_json(obj, where: str) -> np.ndarray:
    if not isinstance(obj, list) or not obj:
        raise ParseError(f"{where}: expected a non-empty list of [re, im] pairs")
    return np.array([_pair_from_json(entry, f"{where}[{i}]") for i, entry in enumerate(obj)])


def to_document(rep: Representation) -> dict:
    return {
        "label": rep.label,
        "dim": rep.dim,
        "hamiltonian": matrix_to_json(rep.hamiltonian),
        "jumps": [matrix_to_json(j) for j in rep.jumps],
    }


def from_document(doc) -> Representation:
    if not isinstance(doc, dict):
        raise ParseError("representation document must be a JSON object")
    for key in ("dim", "hamiltonian", "jumps"):
        if key not in doc:
            raise ParseError(f"missing field {key}")
    dim = doc["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ParseError(f"dim: expected a positive integer, got {dim!r}")
    label = doc.get("label", "")
    if not isinstance(label, str):
        raise ParseError("label: expected a string")
    ham = matrix_from_json(doc["hamiltonian"], "hamiltonian")
    if ham.shape != (dim, dim):
        raise ParseError(f"hamiltonian: shape {ham.shape} does not match dim {dim}")
    if not isinstance(doc["jumps"], list) or not doc["jumps"]:
        raise ParseError("jumps: expected a non-empty list of matrices")
    jumps = []
    for k, entry in enumerate(doc["jumps"]):
        jump = matrix_from_json(entry, f"jumps[{k}]")
        if jump.shape != (dim, dim):
            raise ParseError(f"jumps[{k}]: shape {jump.shape} does not match dim {dim}")
        jumps.append(jump)
    return Representation(hamiltonian=ham, jumps=jumps, label=label)


def serialize(rep: Representation, indent: Optional[int] = None) -> str:
    return json.dumps(to_document(rep), indent=indent)


def parse(text: str) -> Representation:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return from_document(doc)
