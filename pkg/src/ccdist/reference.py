"""The concave reference function and its derivatives.

For a point g = (x, t) and a parameter tau,

    value(tau) = <F(U(tau)) x, x> + 4 t . tau,   F(s) = s cot s.

Derivatives in tau are assembled in the eigenbasis of U(tau) from divided
differences of F (Daleckii-Krein). Independent slow routes (central finite
differences and the resolvent series) are kept for cross-checking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InternalConsistencyError, NotACriticalPoint
from .groups import Group, Point, spectrum
from .kernels import PI, scot_divided_differences


@dataclass(frozen=True)
class ReferenceEval:
    value: float
    gradient: np.ndarray
    hessian: np.ndarray | None


@dataclass(frozen=True)
class DegeneracyReport:
    direction: np.ndarray
    hess_quadratic: float
    t_dot_v: float
    kernel_chain_ok: bool
    chain_residual: float
    scale: float = 1.0

    @property
    def degenerate(self) -> bool:
        return self.kernel_chain_ok and abs(self.t_dot_v) <= 1e-9 * (1.0 + self.scale)


def value_scale(g: Point) -> float:
    """Natural size of the reference function at g (it is homogeneous of degree 2)."""
    return float(g.x @ g.x) + float(np.linalg.norm(g.t))


def spectral_frame(group: Group, x: np.ndarray, tau: np.ndarray):
    """Eigenvalues of U(tau), x and the generators i U_k in its eigenbasis."""
    spec = spectrum(group, tau)
    basis = spec.basis
    xhat = basis.conj().T @ x
    ehat = np.einsum("ia,kij,jb->kab", basis.conj(), 1j * group.U, basis)
    return spec.eigenvalues, xhat, ehat


_frame = spectral_frame


def reference_eval(group: Group, g: Point, tau, hessian: bool = True, frame=None) -> ReferenceEval:
    """Value, gradient and (analytic) Hessian in one spectral pass."""
    tau = group.check_tau(tau)
    lam, xhat, ehat = frame if frame is not None else spectral_frame(group, g.x, tau)
    dd = scot_divided_differences(lam, order=2 if hessian else 1)
    f0, f1 = dd[0], dd[1]
    value = float(np.sum(f0 * np.abs(xhat) ** 2)) + 4.0 * float(g.t @ tau)
    left = xhat.conj()[None, :, None] * ehat  # conj(x_a) E_k[a, b]
    grad = np.einsum("kab,ab,b->k", left, f1, xhat).real + 4.0 * g.t
    hess = None
    if hessian:
        right = ehat * xhat[None, None, :]  # E_l[b, c] x_c
        m, q = left.shape[0], left.shape[1]
        weighted = np.einsum("kab,abc->kbc", left, dd[2])
        a = weighted.reshape(m, q * q) @ right.reshape(m, q * q).T
        hess = (a + a.T).real
        hess = 0.5 * (hess + hess.T)
    return ReferenceEval(value, grad, hess)


def reference_value(group: Group, g: Point, tau) -> float:
    tau = group.check_tau(tau)
    spec = spectrum(group, tau)
    f0 = scot_divided_differences(spec.eigenvalues, order=1)[0]
    xhat = spec.coordinates(g.x)
    return float(np.sum(f0 * np.abs(xhat) ** 2)) + 4.0 * float(g.t @ tau)


def reference_gradient(group: Group, g: Point, tau) -> np.ndarray:
    return reference_eval(group, g, tau, hessian=False).gradient


def reference_hessian(group: Group, g: Point, tau, method: str = "fd") -> np.ndarray:
    """Hessian in tau.

    ``fd`` differentiates the analytic gradient by central differences with
    step eps^(1/3) (1 + |tau|); ``analytic`` uses second divided differences;
    ``series`` sums the resolvent expansion.
    """
    tau = group.check_tau(tau)
    if method == "analytic":
        return reference_eval(group, g, tau).hessian
    if method == "series":
        return hessian_series(group, g, tau)
    if method != "fd":
        raise ValueError(f"unknown Hessian method {method!r}")
    h = np.finfo(float).eps ** (1.0 / 3.0) * (1.0 + float(np.linalg.norm(tau)))
    cols = []
    for k in range(group.m):
        e = np.zeros(group.m)
        e[k] = h
        cols.append((reference_gradient(group, g, tau + e) - reference_gradient(group, g, tau - e)) / (2 * h))
    hess = np.array(cols)
    return 0.5 * (hess + hess.T)


def critical_t(group: Group, x, theta) -> np.ndarray:
    """The t making theta a critical point: t = -(1/4) grad <F(U(theta)) x, x>."""
    x = group.check_x(x)
    zero = group.point(x, np.zeros(group.m))
    return -0.25 * reference_gradient(group, zero, theta)


# ---------------------------------------------------------------------------
# resolvent series (slow independent route)

_SERIES_TERMS = 4000


def _tail_weight(order: int, terms: int) -> float:
    """sum_{j > terms} j^-order, by Euler-Maclaurin."""
    n = float(terms)
    return n ** (1 - order) / (order - 1) - 0.5 * n ** (-order) + order / 12.0 * n ** (-order - 1)


def gradient_series(group: Group, g: Point, tau, terms: int = _SERIES_TERMS) -> np.ndarray:
    """Gradient from the resolvent expansion of s cot s, with an O(1/j^2) tail correction."""
    tau = group.check_tau(tau)
    lam, xhat, ehat = _frame(group, g.x, tau)
    j = np.arange(1, terms + 1, dtype=float)[:, None]
    dminus = 1.0 / (1.0 - lam[None, :] / (j * PI))
    dplus = 1.0 / (1.0 + lam[None, :] / (j * PI))
    ym, yp = dminus * xhat, dplus * xhat
    terms_k = (
        np.einsum("ja,kab,jb->jk", ym.conj(), ehat, ym) - np.einsum("ja,kab,jb->jk", yp.conj(), ehat, yp)
    ).real / (j * PI)
    lead = np.einsum("a,kab,b->k", xhat.conj(), ehat, lam * xhat).real
    lead = lead + np.einsum("a,a,kab,b->k", xhat.conj(), lam, ehat, xhat).real
    tail = 2.0 / PI**2 * _tail_weight(2, terms) * lead
    return -(terms_k.sum(axis=0) + tail) + 4.0 * g.t


def hessian_series(group: Group, g: Point, tau, terms: int = _SERIES_TERMS) -> np.ndarray:
    """Hessian from the resolvent expansion (negative semidefinite term by term)."""
    tau = group.check_tau(tau)
    lam, xhat, ehat = _frame(group, g.x, tau)
    j = np.arange(1, terms + 1, dtype=float)[:, None]
    total = np.zeros((group.m, group.m))
    for sign in (1.0, -1.0):
        d = 1.0 / (1.0 - sign * lam[None, :] / (j * PI))  # (J, q)
        w = np.einsum("kab,jb->jka", ehat, d * xhat)  # E_k D x
        total += np.einsum("jka,ja,jla,j->kl", w.conj(), d, w, 2.0 / (j[:, 0] * PI) ** 2).real
    ex = np.einsum("kab,b->ka", ehat, xhat)
    lead = 4.0 / PI**2 * _tail_weight(2, terms) * (ex.conj() @ ex.T).real
    hess = -(total + lead)
    return 0.5 * (hess + hess.T)


# ---------------------------------------------------------------------------
# degeneracy


def kernel_chain_residual(group: Group, x, theta, v) -> float:
    """max_j |U(v) U(theta)^j x| / (|x| (1 + |U(theta)|)^j) for j < q."""
    x = group.check_x(x)
    a = group.skew(theta)
    b = group.skew(v)
    norm_a = float(np.linalg.norm(a, 2))
    y = x.copy()
    worst = 0.0
    base = max(float(np.linalg.norm(x)), 1e-300)
    for j in range(group.q):
        worst = max(worst, float(np.linalg.norm(b @ y)) / (base * (1.0 + norm_a) ** j))
        y = a @ y
    return worst


def degeneracy_test(group: Group, g: Point, theta, v) -> DegeneracyReport:
    theta = group.check_tau(theta)
    v = group.check_tau(v)
    v = v / np.linalg.norm(v)
    scale = value_scale(g)
    ev = reference_eval(group, g, theta)
    if np.linalg.norm(ev.gradient) > 1e-8 * (1.0 + scale):
        raise NotACriticalPoint(f"gradient norm {np.linalg.norm(ev.gradient):.3e} at theta")
    hq = float(v @ ev.hessian @ v)
    tv = float(g.t @ v)
    resid = kernel_chain_residual(group, g.x, theta, v) if np.any(g.x) else 0.0
    chain = resid <= 1e-9
    flat = chain and abs(tv) <= 1e-9 * (1.0 + scale)
    xx = float(g.x @ g.x)
    if flat and abs(hq) > 1e-6 * (1.0 + xx):
        raise InternalConsistencyError("kernel chain holds but the Hessian form is not zero")
    if abs(hq) <= 1e-12 * (1.0 + xx) and (resid > 1e-5 or abs(tv) > 1e-5 * (1.0 + scale)):
        raise InternalConsistencyError("Hessian form vanishes but the kernel chain fails")
    return DegeneracyReport(v, hq, tv, chain, resid, scale)


def flatness_probe(group: Group, g: Point, theta, v, s0: float) -> float:
    """value(theta + s0 v) - value(theta); zero along a degenerate direction."""
    theta = group.check_tau(theta)
    v = group.check_tau(v)
    return reference_value(group, g, theta + s0 * v) - reference_value(group, g, theta)


def is_finite_eval(ev: ReferenceEval) -> bool:
    ok = math.isfinite(ev.value) and bool(np.all(np.isfinite(ev.gradient)))
    return ok and (ev.hessian is None or bool(np.all(np.isfinite(ev.hessian))))
