"""Dense small-matrix primitives for bilinear forms and rotation groups.

Everything operates on plain numpy arrays at desk scale (dimension <= 8 or
so): representing endomorphisms of symmetric bilinear forms, operator norms
induced by a metric, symmetric square roots (certified power series or
eigendecomposition), conjugation frames that carry standard rotations to the
rotations preserving another positive form, and principal matrix logarithms
near the identity.  All functions are pure; arrays are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = [
    "DomainError",
    "SqrtFrame",
    "frobenius",
    "operator_norm",
    "principal_log",
    "random_rotation",
    "representing_endomorphism",
    "so_residual",
    "sym_sqrt",
]

SYMMETRY_TOL = 1e-10

# Series truncation orders beyond this indicate the input is essentially on
# the boundary of the convergence ball; the eigen method should be used.
_MAX_SERIES_ORDER = 10_000


class DomainError(ValueError):
    """Input lies outside the mathematical domain of the operation."""


def frobenius(a) -> float:
    """Frobenius norm as a plain float."""
    return float(np.linalg.norm(np.asarray(a, dtype=float)))


def _as_square(a, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(a, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_symmetric(m, tol: float = SYMMETRY_TOL, name: str = "form") -> np.ndarray:
    arr = _as_square(m, name)
    defect = frobenius(arr - arr.T)
    if defect > tol * max(1.0, frobenius(arr)):
        raise ValueError(f"{name} is not symmetric (defect {defect:.3e})")
    return 0.5 * (arr + arr.T)


def check_spd(m, name: str = "form") -> np.ndarray:
    arr = check_symmetric(m, name=name)
    eigs = np.linalg.eigvalsh(arr)
    if eigs[0] <= 0.0:
        raise ValueError(f"{name} is not positive definite (min eigenvalue {eigs[0]:.3e})")
    return arr


def representing_endomorphism(form, metric) -> np.ndarray:
    """Endomorphism Z with metric(X, Z Y) = form(X, Y) for all X, Y.

    In the fixed basis this is metric^(-1) @ form.  The result is
    self-adjoint for the metric but symmetric as a matrix only when the
    metric is (a multiple of) the identity.
    """
    q = check_symmetric(form, name="form")
    g = check_spd(metric, name="metric")
    if q.shape != g.shape:
        raise ValueError("form and metric must have matching shapes")
    return np.linalg.solve(g, q)


def operator_norm(z, metric=None) -> float:
    """Operator norm of an endomorphism, measured in a metric.

    With no metric this is the largest singular value.  Otherwise it is the
    norm of W @ z @ W^(-1) where W is the symmetric square root of the
    metric's matrix, i.e. the sup of |Zv|_g over unit g-vectors v.
    """
    arr = _as_square(z, "endomorphism")
    if metric is None:
        return float(np.linalg.norm(arr, 2))
    w = sym_sqrt(metric, method="eigen")
    return float(np.linalg.norm(w @ arr @ np.linalg.inv(w), 2))


def _sqrt_series_order(radius: float, tol: float) -> int:
    # Geometric tail bound: radius^(N+1) / (1 - radius) < tol.
    if radius == 0.0:
        return 0
    order = int(np.ceil(np.log(tol * (1.0 - radius)) / np.log(radius))) - 1
    return max(order, 1)


def sym_sqrt(z, method: str = "eigen", tol: float = 1e-12) -> np.ndarray:
    """Symmetric positive definite square root of an SPD matrix.

    method="eigen" diagonalizes and takes elementwise square roots; it works
    for every SPD input and serves as the reference.  method="power_series"
    sums binom(1/2, n) (Z - I)^n and is only valid when the operator norm of
    Z - I is below 1; the truncation order is chosen from the geometric tail
    bound so the remainder is below tol.
    """
    arr = check_spd(z, name="matrix")
    dim = arr.shape[0]
    if method == "eigen":
        eigvals, eigvecs = np.linalg.eigh(arr)
        return (eigvecs * np.sqrt(eigvals)) @ eigvecs.T
    if method != "power_series":
        raise ValueError(f"unknown square-root method {method!r}")

    delta = arr - np.eye(dim)
    radius = float(np.linalg.norm(delta, 2))
    if radius >= 1.0:
        raise DomainError(
            f"power-series square root needs operator norm of Z - I below 1, got {radius:.6g}"
        )
    order = _sqrt_series_order(radius, tol)
    if order > _MAX_SERIES_ORDER:
        raise DomainError(
            f"series order {order} exceeds cap {_MAX_SERIES_ORDER}; use method='eigen'"
        )
    total = np.eye(dim)
    power = np.eye(dim)
    coeff = 1.0
    for n in range(1, order + 1):
        coeff *= (1.5 - n) / n  # binom(1/2, n) recurrence
        power = power @ delta
        total = total + coeff * power
    return 0.5 * (total + total.T)


def so_residual(a, form=None) -> float:
    """Distance of a matrix from the rotations preserving a positive form.

    Returns |A^T M A - M|_F + |det A - 1|; zero exactly when A preserves the
    form and has unit determinant.  With form=None the form is the identity.
    """
    arr = _as_square(a, "matrix")
    if form is None:
        m = np.eye(arr.shape[0])
    else:
        m = check_spd(form, name="form")
    defect = frobenius(arr.T @ m @ arr - m)
    return defect + abs(float(np.linalg.det(arr)) - 1.0)


@dataclass(frozen=True)
class SqrtFrame:
    """Conjugation frame built from the symmetric square root of an SPD form.

    Conjugation by the square root carries rotations of the standard inner
    product to the linear maps preserving the given form (and back), assuming
    the ambient basis is orthonormal for the reference metric.
    """

    form: np.ndarray
    sqrt: np.ndarray
    sqrt_inverse: np.ndarray

    @classmethod
    def from_form(cls, form, method: str = "auto", tol: float = 1e-12) -> "SqrtFrame":
        arr = check_spd(form, name="form")
        if method == "auto":
            inside = float(np.linalg.norm(arr - np.eye(arr.shape[0]), 2)) < 1.0
            method = "power_series" if inside else "eigen"
        w = sym_sqrt(arr, method=method, tol=tol)
        w_inv = np.linalg.inv(w)
        return cls(form=arr, sqrt=w, sqrt_inverse=w_inv)

    def __post_init__(self):
        w = self.sqrt
        if frobenius(w @ w - self.form) > 1e-8 * max(1.0, frobenius(self.form)):
            raise ValueError("sqrt does not square to the form")
        if frobenius(w @ self.sqrt_inverse - np.eye(w.shape[0])) > 1e-8:
            raise ValueError("sqrt_inverse is not the inverse of sqrt")

    def embed(self, a, check: bool = True) -> np.ndarray:
        """Map a standard rotation to the rotation preserving the form."""
        arr = _as_square(a, "rotation")
        if check and so_residual(arr) > 1e-6:
            raise ValueError("input is not a rotation of the standard inner product")
        return self.sqrt_inverse @ arr @ self.sqrt

    def unembed(self, a) -> np.ndarray:
        """Inverse of embed."""
        arr = _as_square(a, "matrix")
        return self.sqrt @ arr @ self.sqrt_inverse


def principal_log(a, tol: float = 1e-10) -> np.ndarray:
    """Principal matrix logarithm for matrices near the identity.

    Requires the operator norm of A - I to be below 1 (small transports).
    The result L satisfies exp(L) = A within tol; for inputs in a rotation
    group it is skew-symmetric up to the same tolerance.
    """
    arr = _as_square(a, "matrix")
    dim = arr.shape[0]
    radius = float(np.linalg.norm(arr - np.eye(dim), 2))
    if radius >= 1.0:
        raise DomainError(f"principal log needs operator norm of A - I below 1, got {radius:.6g}")
    log = scipy.linalg.logm(arr)
    if np.iscomplexobj(log):
        if np.abs(log.imag).max() > 1e-12:
            raise ArithmeticError("matrix log has a significant imaginary part")
        log = log.real
    back = scipy.linalg.expm(log)
    if frobenius(back - arr) > max(tol, 1e-13) * max(1.0, frobenius(arr)):
        raise ArithmeticError("matrix log failed round-trip verification")
    return log


def random_rotation(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Haar-ish random rotation from a QR decomposition (determinant +1)."""
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
