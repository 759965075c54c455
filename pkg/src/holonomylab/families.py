"""Built-in metric families used by the experiment harness.

Each builder returns a MetricFamily whose members are indexed by a positive
integer k and converge to the family's limit metric on the fixed chart.
Member fields are vectorized over point batches; analytic first derivatives
are provided where the closed form is manageable.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .geometry import ChartDomain, MetricFamily, MetricField

__all__ = ["FAMILY_NAMES", "builtin_family"]


def _chart(bounds: float, dim: int, margin: float) -> ChartDomain:
    return ChartDomain(lower=-bounds * np.ones(dim), upper=bounds * np.ones(dim), margin=margin)


def _constant_metric(matrix: np.ndarray, label: str) -> MetricField:
    matrix = np.asarray(matrix, dtype=float)
    dim = matrix.shape[0]

    def evaluate(pts):
        pts = np.atleast_2d(pts)
        return np.broadcast_to(matrix, (pts.shape[0], dim, dim)).copy()

    def derivative(pts):
        pts = np.atleast_2d(pts)
        return np.zeros((pts.shape[0], dim, dim, dim))

    return MetricField(evaluate=evaluate, dim=dim, derivative=derivative, label=label)


# -- scaled hyperbolic disks -------------------------------------------------

def _poincare_member(k: float) -> MetricField:
    ksq = float(k) ** 2

    def evaluate(pts):
        pts = np.atleast_2d(pts)
        r2 = np.sum(pts**2, axis=-1)
        conf = 4.0 / (1.0 - r2 / ksq) ** 2
        return conf[:, None, None] * np.eye(2)

    def derivative(pts):
        pts = np.atleast_2d(pts)
        r2 = np.sum(pts**2, axis=-1)
        dconf = 16.0 * pts / (ksq * (1.0 - r2 / ksq)[:, None] ** 3)
        return dconf[:, :, None, None] * np.eye(2)

    return MetricField(evaluate=evaluate, dim=2, derivative=derivative, label=f"poincare2d[k={k}]")


def poincare_disk_family(bounds: float = 0.45, margin: float = 0.02, basepoint=(0.05, 0.0)) -> MetricFamily:
    """Conformal disk metrics 4/(1 - r^2/k^2)^2 (dx1^2 + dx2^2) with flat limit 4 I."""
    return MetricFamily(
        member=_poincare_member,
        limit=_constant_metric(4.0 * np.eye(2), "poincare2d[limit]"),
        basepoint=np.asarray(basepoint, dtype=float),
        chart=_chart(bounds, 2, margin),
        name="poincare2d",
    )


# -- constant metrics --------------------------------------------------------

def flat_family(dim: int = 2, scale: float = 4.0, bounds: float = 0.45, margin: float = 0.02, basepoint=None) -> MetricFamily:
    """Constant metric; member and limit coincide for every k."""
    metric = _constant_metric(scale * np.eye(dim), f"flat{dim}d")
    if basepoint is None:
        basepoint = np.zeros(dim)
        basepoint[0] = 0.05
    return MetricFamily(
        member=lambda k: metric,
        limit=metric,
        basepoint=np.asarray(basepoint, dtype=float),
        chart=_chart(bounds, dim, margin),
        name="flat",
    )


# -- hyperbolic x flat product ----------------------------------------------

def _product_member(k: float) -> MetricField:
    plane = _poincare_member(k)

    def evaluate(pts):
        pts = np.atleast_2d(pts)
        out = np.zeros((pts.shape[0], 4, 4))
        out[:, :2, :2] = plane.evaluate(pts[:, :2])
        out[:, 2:, 2:] = np.eye(2)
        return out

    def derivative(pts):
        pts = np.atleast_2d(pts)
        out = np.zeros((pts.shape[0], 4, 4, 4))
        out[:, :2, :2, :2] = plane.derivative(pts[:, :2])
        return out

    return MetricField(evaluate=evaluate, dim=4, derivative=derivative, label=f"product4d[k={k}]")


def product_family(bounds: float = 0.45, margin: float = 0.02, basepoint=(0.05, 0.0, 0.0, 0.0)) -> MetricFamily:
    """Direct sum of the disk family with a flat 2d factor (rotations in one plane)."""
    limit = _constant_metric(np.diag([4.0, 4.0, 1.0, 1.0]), "product4d[limit]")
    return MetricFamily(
        member=_product_member,
        limit=limit,
        basepoint=np.asarray(basepoint, dtype=float),
        chart=_chart(bounds, 4, margin),
        name="product4d",
    )


# -- sheared pullbacks with a rotating holonomy plane ------------------------

def _mixing_rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    rot = np.eye(4)
    rot[:2, :2] = c * np.eye(2)
    rot[2:, 2:] = c * np.eye(2)
    rot[:2, 2:] = -s * np.eye(2)
    rot[2:, :2] = s * np.eye(2)
    return rot


def _pullback_metric(base: MetricField, linear: np.ndarray, label: str) -> MetricField:
    lin = np.asarray(linear, dtype=float)

    def evaluate(pts):
        pts = np.atleast_2d(pts)
        inner = base.evaluate(pts @ lin.T)
        return np.einsum("ba,mbc,cd->mad", lin, inner, lin)

    def derivative(pts):
        pts = np.atleast_2d(pts)
        dinner = base.derivative(pts @ lin.T)
        pulled = np.einsum("ec,mbef,fd->mbcd", lin, dinner, lin)
        return np.einsum("ba,mbcd->macd", lin, pulled)

    return MetricField(evaluate=evaluate, dim=base.dim, derivative=derivative, label=label)


def sheared_family(
    shear: float = 0.3,
    angle_limit: float = 0.4,
    bounds: float = 0.3,
    margin: float = 0.02,
    basepoint=(0.05, 0.0, 0.0, 0.0),
) -> MetricFamily:
    """Product family pulled back by a fixed shear composed with a k-dependent
    rotation that mixes the curved plane into the flat one.

    The rotation angle is angle_limit - 1/(2k), so the plane carrying the
    holonomy converges as k grows; classification witnesses must track it.
    """
    shear_map = np.eye(4)
    shear_map[0, 1] = shear

    def transform(k: float) -> np.ndarray:
        return shear_map @ _mixing_rotation(angle_limit - 0.5 / float(k))

    def member(k: int) -> MetricField:
        return _pullback_metric(_product_member(k), transform(k), f"sheared_poincare[k={k}]")

    limit_map = shear_map @ _mixing_rotation(angle_limit)
    limit_matrix = limit_map.T @ np.diag([4.0, 4.0, 1.0, 1.0]) @ limit_map
    return MetricFamily(
        member=member,
        limit=_constant_metric(limit_matrix, "sheared_poincare[limit]"),
        basepoint=np.asarray(basepoint, dtype=float),
        chart=_chart(bounds, 4, margin),
        name="sheared_poincare",
    )


# -- complex projective plane chart ------------------------------------------

def _fubini_study_metric(scale: float, label: str) -> MetricField:
    """Real metric on an affine chart of the complex projective plane.

    Coordinates are (x1, x2, y1, y2) with complex points z_j = x_j + i y_j.
    The hermitian matrix H = A + iB from the potential log(1 + scale^2 |z|^2)
    gives the real metric g(u, v) = 2 Re(u^T H conj(v)) on complex tangent
    components u_j = u_xj + i u_yj, realized as [[A, B], [-B, A]]; the result
    commutes with the standard complex structure by construction.
    """
    s2 = float(scale) ** 2

    def evaluate(pts):
        pts = np.atleast_2d(pts)
        x = pts[:, :2]
        y = pts[:, 2:]
        rho = np.sum(pts**2, axis=-1)
        denom = (1.0 + s2 * rho)[:, None, None]
        sym = np.einsum("mi,mj->mij", x, x) + np.einsum("mi,mj->mij", y, y)
        asym = np.einsum("mi,mj->mij", x, y) - np.einsum("mi,mj->mij", y, x)
        a = s2 * (denom * np.eye(2) - s2 * sym) / denom**2
        b = -(s2**2) * asym / denom**2
        out = np.empty((pts.shape[0], 4, 4))
        out[:, :2, :2] = a
        out[:, 2:, 2:] = a
        out[:, :2, 2:] = b
        out[:, 2:, :2] = -b
        return out

    return MetricField(evaluate=evaluate, dim=4, derivative=None, label=label)


def fubini_study_family(
    bounds: float = 0.4,
    margin: float = 0.02,
    basepoint=(0.1, 0.05, -0.04, 0.08),
) -> MetricFamily:
    """Projective-plane chart metrics at scale 1 + 1/k, converging to scale 1."""

    def member(k: int) -> MetricField:
        return _fubini_study_metric(1.0 + 1.0 / float(k), f"fubini_study_chart[k={k}]")

    return MetricFamily(
        member=member,
        limit=_fubini_study_metric(1.0, "fubini_study_chart[limit]"),
        basepoint=np.asarray(basepoint, dtype=float),
        chart=_chart(bounds, 4, margin),
        name="fubini_study_chart",
    )


_BUILDERS = {
    "poincare2d": poincare_disk_family,
    "flat": flat_family,
    "product4d": product_family,
    "sheared_poincare": sheared_family,
    "fubini_study_chart": fubini_study_family,
}

FAMILY_NAMES = tuple(sorted(_BUILDERS))


def builtin_family(name: str, **params) -> MetricFamily:
    """Construct a built-in family by name; unknown names are rejected."""
    try:
        builder = _BUILDERS[name]
    except KeyError:
        known = ", ".join(FAMILY_NAMES)
        raise ValueError(f"unknown family {name!r}; built-ins are: {known}") from None
    return builder(**params)
