"""Step-two Carnot groups G(q, m, U) and spectral calculus for U(tau).

A group is given by m linearly independent real skew-symmetric q x q
generators. For a real parameter ``tau`` the matrix ``U(tau) = i sum tau_k U_k``
is Hermitian with spectrum symmetric about zero; scalar functions are applied
to it through its eigen-decomposition.
"""

from __future__ import annotations

import json
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DimensionMismatch,
    InternalConsistencyError,
    LinearlyDependentFamily,
    NotSkewSymmetric,
    PoleAtEigenvalue,
    ValidationError,
)
from .kernels import PI, KernelName, nearest_pole_distance

TOL_BOUNDARY = 1e-9


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Group:
    """Validated, immutable group data; build with :func:`validate_group`."""

    q: int
    m: int
    U: np.ndarray  # shape (m, q, q), read-only
    name: str = "custom"

    def skew(self, tau) -> np.ndarray:
        """Real skew matrix sum_k tau_k U_k."""
        return np.tensordot(self.check_tau(tau), self.U, axes=1)

    def hermitian(self, tau) -> np.ndarray:
        return 1j * self.skew(tau)

    def check_tau(self, tau) -> np.ndarray:
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        if tau.shape != (self.m,):
            raise DimensionMismatch(f"expected a {self.m}-vector, got shape {tau.shape}")
        return tau

    def check_x(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.q,):
            raise DimensionMismatch(f"expected a {self.q}-vector, got shape {x.shape}")
        return x

    def point(self, x, t) -> Point:
        return Point(_readonly(self.check_x(x)), _readonly(self.check_tau(t)))

    def to_json(self) -> dict:
        return {"q": self.q, "m": self.m, "U": self.U.tolist()}


@dataclass(frozen=True, eq=False)
class Point:
    x: np.ndarray
    t: np.ndarray

    def dilate(self, r: float) -> Point:
        """Image under the anisotropic dilation (x, t) -> (r x, r^2 t)."""
        return Point(_readonly(r * self.x), _readonly(r * r * self.t))


@dataclass(frozen=True, eq=False)
class Spectrum:
    tau: np.ndarray
    eigenvalues: np.ndarray  # ascending
    basis: np.ndarray  # unitary, columns are eigenvectors

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.eigenvalues))) if self.eigenvalues.size else 0.0

    def matrix(self, values) -> np.ndarray:
        """B diag(values) B*."""
        return (self.basis * np.asarray(values)) @ self.basis.conj().T

    def coordinates(self, x) -> np.ndarray:
        return self.basis.conj().T @ x


def validate_group(generators: Sequence, name: str = "custom", q: int | None = None, m: int | None = None) -> Group:
    """Check skew-symmetry, independence and dimensions of the generators."""
    mats = [np.asarray(u, dtype=float) for u in generators]
    if not mats:
        raise DimensionMismatch("at least one generator is required")
    q_found = mats[0].shape[0] if mats[0].ndim == 2 else -1
    for u in mats:
        if u.ndim != 2 or u.shape != (q_found, q_found):
            raise DimensionMismatch("generators must be square matrices of a common size")
    if q is not None and q != q_found:
        raise DimensionMismatch(f"declared q={q} but generators are {q_found}x{q_found}")
    if m is not None and m != len(mats):
        raise DimensionMismatch(f"declared m={m} but {len(mats)} generators given")
    q_found, m_found = q_found, len(mats)
    if m_found > q_found * (q_found - 1) // 2:
        raise LinearlyDependentFamily(f"m={m_found} exceeds q(q-1)/2={q_found * (q_found - 1) // 2}")
    for j, u in enumerate(mats):
        if np.max(np.abs(u + u.T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(u), initial=0.0)):
            raise NotSkewSymmetric(j)
        if not np.all(np.isfinite(u)):
            raise ValidationError(f"generator {j} has non-finite entries")
    stack = np.stack(mats)
    sv = np.linalg.svd(stack.reshape(m_found, -1), compute_uv=False)
    if sv[-1] <= 1e-10 * max(sv[0], 1e-300):
        raise LinearlyDependentFamily("generators are linearly dependent")
    return Group(q_found, m_found, _readonly(stack), name)


def _fix_phases(basis: np.ndarray) -> np.ndarray:
    """Rotate each eigenvector so that its first non-negligible entry is real positive."""
    mag = np.abs(basis)
    lead = np.argmax(mag > 1e-12 * np.max(mag, axis=0), axis=0)
    c = basis[lead, np.arange(basis.shape[1])]
    return basis * (np.abs(c) / c)


def spectrum(group: Group, tau) -> Spectrum:
    tau = group.check_tau(tau)
    if not np.any(tau):
        return Spectrum(_readonly(tau), np.zeros(group.q), np.eye(group.q, dtype=complex))
    lam, basis = np.linalg.eigh(group.hermitian(tau))
    # the spectrum of i*(skew) is symmetric; enforce it exactly
    lam = 0.5 * (lam - lam[::-1])
    return Spectrum(_readonly(tau), lam, _fix_phases(basis))


def operator_norm(group: Group, tau) -> float:
    tau = group.check_tau(tau)
    if not np.any(tau):
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvalsh(group.hermitian(tau)))))


def in_spectral_ball(group: Group, tau, tol: float = TOL_BOUNDARY) -> bool:
    """Whether ||U(tau)|| < pi - tol."""
    return operator_norm(group, tau) < PI - tol


def in_regular_set(group: Group, theta) -> bool:
    """Whether no eigenvalue of U(theta) is (numerically) a nonzero multiple of pi."""
    theta = group.check_tau(theta)
    tol = 1e-8 * (1.0 + float(np.linalg.norm(theta)))
    lam = spectrum(group, theta).eigenvalues
    return all(abs(v) < PI - tol or nearest_pole_distance(v) > tol for v in lam)


ScalarFn = Callable[[np.ndarray], np.ndarray]


def _evaluate(fn: KernelName | ScalarFn, lam: np.ndarray, pole_at_pi_multiples: bool | None) -> np.ndarray:
    if pole_at_pi_multiples is None:
        pole_at_pi_multiples = isinstance(fn, KernelName)
    if pole_at_pi_multiples:
        for v in lam:
            if v != 0.0 and nearest_pole_distance(v) <= 8 * np.finfo(float).eps * max(1.0, abs(v)):
                raise PoleAtEigenvalue(float(v))
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.asarray(fn(lam))
    for v, w in zip(lam, np.broadcast_to(vals, lam.shape)):
        if not np.isfinite(w):
            raise PoleAtEigenvalue(float(v))
    return np.broadcast_to(vals, lam.shape)


def apply_fn_complex(spec: Spectrum, fn: KernelName | ScalarFn, x, pole_at_pi_multiples: bool | None = None) -> np.ndarray:
    """fn(U(tau)) x as a complex vector."""
    vals = _evaluate(fn, spec.eigenvalues, pole_at_pi_multiples)
    return spec.basis @ (vals * spec.coordinates(np.asarray(x)))


def apply_fn(spec: Spectrum, fn: KernelName | ScalarFn, x, pole_at_pi_multiples: bool | None = None) -> np.ndarray:
    """fn(U(tau)) x for an even real function, returned as a real vector.

    The imaginary residue is checked against 1e-10 ||x|| max|fn| before it is
    dropped.
    """
    x = np.asarray(x, dtype=float)
    vals = _evaluate(fn, spec.eigenvalues, pole_at_pi_multiples)
    y = spec.basis @ (vals * spec.coordinates(x))
    bound = 1e-10 * float(np.linalg.norm(x)) * max(float(np.max(np.abs(vals), initial=0.0)), 1.0)
    if np.max(np.abs(y.imag), initial=0.0) > bound:
        raise InternalConsistencyError("matrix function is not real; is the scalar function even?")
    return y.real


# ---------------------------------------------------------------------------
# built-in groups


def rotation_generator() -> np.ndarray:
    return np.array([[0.0, 1.0], [-1.0, 0.0]])


def heisenberg_group(q: int = 2) -> Group:
    """H(q, 1): one generator made of q/2 standard rotation blocks."""
    if q <= 0 or q % 2:
        raise ValidationError("Heisenberg group needs an even positive q")
    return validate_group([np.kron(np.eye(q // 2), rotation_generator())], name=f"heisenberg:{q}")


def star_group(n: int) -> Group:
    """Group of the star graph K_{1,n}: generators E_{1,j+1} - E_{j+1,1}."""
    if n < 1:
        raise ValidationError("star graph needs n >= 1")
    gens = []
    for j in range(1, n + 1):
        u = np.zeros((n + 1, n + 1))
        u[0, j], u[j, 0] = 1.0, -1.0
        gens.append(u)
    return validate_group(gens, name=f"star:{n}")


def n32_group() -> Group:
    """Free step-two group on three generators; U(tau) x equals x cross tau."""
    e = np.zeros((3, 3, 3))
    e[0, 1, 2], e[0, 2, 1] = 1.0, -1.0
    e[1, 0, 2], e[1, 2, 0] = -1.0, 1.0
    e[2, 0, 1], e[2, 1, 0] = 1.0, -1.0
    return validate_group(list(e), name="n32")


def group_from_json(source: str | Path | dict) -> Group:
    if isinstance(source, dict):
        data = source
    else:
        try:
            data = json.loads(Path(source).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ValidationError(f"cannot read group file {source}: {exc}") from exc
    try:
        return validate_group(data["U"], q=int(data["q"]), m=int(data["m"]), name=str(data.get("name", "custom")))
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed group description: {exc}") from exc


def group_norm_bound(group: Group) -> float:
    """Upper bound of ||U(tau)|| / |tau| via the Frobenius norm of the generators."""
    return math.sqrt(float(np.sum(group.U**2)))
