"""Chart-based metrics, connections, curvature and sup-distances.

A chart is a coordinate box with an interior safety band (margin) inside
which finite differences are allowed.  Metric and connection fields are
immutable wrappers around vectorized callables: a metric maps a batch of
chart points (m, n) to SPD matrices (m, n, n); a connection maps points to
coefficient matrices (m, n, l, l), slot i holding the matrix that multiplies
the i-th velocity component in the transport equation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .matrices import DomainError, check_spd, frobenius

__all__ = [
    "ChartDomain",
    "ConnectionField",
    "MetricFamily",
    "MetricField",
    "c0_connection_distance",
    "c1_metric_distance",
    "christoffel",
    "compatibility_residual",
    "curvature",
    "levi_civita",
]

DEFAULT_GRID = 21
FD_STEP_FACTOR = 1e-4


@dataclass(frozen=True)
class ChartDomain:
    """Coordinate box with an interior safety band for finite differences."""

    lower: np.ndarray
    upper: np.ndarray
    margin: float

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float)
        upper = np.asarray(self.upper, dtype=float)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise ValueError("lower and upper must be 1-d arrays of equal length")
        if not np.all(lower < upper):
            raise ValueError("chart box needs lower < upper componentwise")
        if not (0.0 < self.margin < 0.5 * float(np.min(upper - lower))):
            raise ValueError("margin must be positive and below half the smallest extent")

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def extent(self) -> float:
        return float(np.max(self.upper - self.lower))

    def contains(self, points, margin: Optional[float] = None) -> np.ndarray:
        """Boolean mask of points inside the margin-shrunk interior."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        band = self.margin if margin is None else margin
        ok = (pts >= self.lower + band) & (pts <= self.upper - band)
        return ok.all(axis=-1)

    def require_interior(self, points, what: str = "point") -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        inside = self.contains(pts)
        if not inside.all():
            bad = pts[~inside][0]
            raise DomainError(f"{what} {bad} leaves the chart interior safety band")
        return pts

    def interior_grid(self, per_axis: int = DEFAULT_GRID) -> np.ndarray:
        """Lattice of per_axis**dim points spanning the interior band."""
        if per_axis < 2:
            raise ValueError("grid resolution must be at least 2 per axis")
        axes = [
            np.linspace(lo + self.margin, hi - self.margin, per_axis)
            for lo, hi in zip(self.lower, self.upper)
        ]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def fd_step(self) -> float:
        return FD_STEP_FACTOR * self.extent


def _batched(points) -> tuple[np.ndarray, bool]:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        return pts[None, :], True
    return pts, False


@dataclass(frozen=True)
class MetricField:
    """Field of SPD bilinear forms over a chart.

    evaluate maps (m, n) point batches to (m, n, n) matrices (a single point
    is also accepted).  derivative, when given, maps batches to
    (m, n, n, n) arrays with index order [point, direction, row, col]; when
    absent central differences are used.
    """

    evaluate: Callable[[np.ndarray], np.ndarray]
    dim: int
    derivative: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label: str = ""

    def __call__(self, points) -> np.ndarray:
        pts, single = _batched(points)
        vals = np.asarray(self.evaluate(pts), dtype=float)
        return vals[0] if single else vals

    def derivative_at(self, points, step: float) -> np.ndarray:
        """Analytic derivative when available, else central differences."""
        pts, single = _batched(points)
        if self.derivative is not None:
            out = np.asarray(self.derivative(pts), dtype=float)
        else:
            out = _central_difference(self.evaluate, pts, step)
        return out[0] if single else out


def _central_difference(func, pts: np.ndarray, step: float) -> np.ndarray:
    m, n = pts.shape
    offsets = np.concatenate([step * np.eye(n), -step * np.eye(n)])
    shifted = (pts[None, :, :] + offsets[:, None, :]).reshape(2 * n * m, n)
    vals = np.asarray(func(shifted), dtype=float)
    vals = vals.reshape(2, n, m, *vals.shape[1:])
    diff = (vals[0] - vals[1]) / (2.0 * step)  # (n, m, ...)
    return np.moveaxis(diff, 0, 1)


@dataclass(frozen=True)
class ConnectionField:
    """Field of connection coefficient matrices over a chart.

    coefficients maps (m, n) point batches to (m, n, l, l); slot [.., i, :, :]
    is the matrix contracted with the i-th velocity component.  metric, when
    set, is the field this connection is compatible with (used for transport
    quality checks).
    """

    coefficients: Callable[[np.ndarray], np.ndarray]
    fibre_dim: int
    label: str = ""
    metric: Optional[MetricField] = None

    def __call__(self, points) -> np.ndarray:
        pts, single = _batched(points)
        vals = np.asarray(self.coefficients(pts), dtype=float)
        return vals[0] if single else vals


@dataclass(frozen=True)
class MetricFamily:
    """Integer-indexed sequence of metrics with a designated limit."""

    member: Callable[[int], MetricField]
    limit: MetricField
    basepoint: np.ndarray
    chart: ChartDomain
    name: str

    def __post_init__(self):
        bp = np.asarray(self.basepoint, dtype=float)
        object.__setattr__(self, "basepoint", bp)
        if not self.chart.contains(bp).all():
            raise ValueError("family basepoint must lie in the chart interior")


def christoffel(metric: MetricField, points, step: float = 1e-4) -> np.ndarray:
    """Levi-Civita coefficient matrices at the given points.

    Output slot [.., i, k, j] is Gamma^k_{ij} = (1/2) g^{kl} (d_i g_{jl} +
    d_j g_{il} - d_l g_{ij}), computed from analytic metric derivatives when
    the field carries them and from central differences otherwise.
    """
    pts, single = _batched(points)
    g = np.asarray(metric.evaluate(pts), dtype=float)
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise ValueError("metric is not positive definite on the requested points") from exc
    dg = metric.derivative_at(pts, step)
    # lowered[m, i, j, l] = d_i g_{jl} + d_j g_{il} - d_l g_{ij}
    lowered = dg + dg.transpose(0, 2, 1, 3) - dg.transpose(0, 2, 3, 1)
    gamma = 0.5 * np.einsum("mkl,mijl->mikj", np.linalg.inv(g), lowered)
    return gamma[0] if single else gamma


def levi_civita(metric: MetricField, chart: ChartDomain, step: Optional[float] = None) -> ConnectionField:
    """Levi-Civita connection of a metric as a chart-guarded field."""
    h = chart.fd_step() if step is None else float(step)
    if h > chart.margin:
        raise ValueError("finite-difference step exceeds the chart margin")

    def coeffs(points):
        pts = chart.require_interior(points, what="connection evaluation point")
        return christoffel(metric, pts, step=h)

    return ConnectionField(
        coefficients=coeffs,
        fibre_dim=metric.dim,
        label=f"levi_civita({metric.label})" if metric.label else "levi_civita",
        metric=metric,
    )


def compatibility_residual(conn: ConnectionField, metric: MetricField, point, step: float = 1e-4) -> float:
    """Defect of metric compatibility at a point.

    Returns the max over coordinate directions of |d_i M - A_i^T M - M A_i|_F,
    which vanishes exactly when transport preserves the metric.
    """
    pts, _ = _batched(point)
    g = np.asarray(metric.evaluate(pts), dtype=float)
    dg = metric.derivative_at(pts, step)
    a = conn(pts)
    defect = dg - np.einsum("mikj,mkl->mijl", a, g) - np.einsum("mjk,mikl->mijl", g, a)
    # defect[m, i, j, l] = d_i g_{jl} - (A_i^T g)_{jl} - (g A_i)_{jl}
    return float(np.linalg.norm(defect, axis=(2, 3)).max())


def c0_connection_distance(a: ConnectionField, b: ConnectionField, chart: ChartDomain, grid: int = DEFAULT_GRID) -> float:
    """Grid-sup over the chart interior of the coefficient-matrix distance."""
    pts = chart.interior_grid(grid)
    diff = a(pts) - b(pts)
    return float(np.linalg.norm(diff, axis=(-2, -1)).max())


def c1_metric_distance(a: MetricField, b: MetricField, chart: ChartDomain, grid: int = DEFAULT_GRID, step: Optional[float] = None) -> float:
    """Grid-sup distance between metrics plus their first derivatives."""
    h = chart.fd_step() if step is None else float(step)
    pts = chart.interior_grid(grid)
    value = float(np.linalg.norm(a(pts) - b(pts), axis=(-2, -1)).max())
    dval = float(np.linalg.norm(a.derivative_at(pts, h) - b.derivative_at(pts, h), axis=(-2, -1)).max())
    return value + dval


def curvature(conn: ConnectionField, point, step: float = 1e-4) -> np.ndarray:
    """Curvature matrices F_ij = d_i A_j - d_j A_i + [A_i, A_j] at one point.

    Coefficient derivatives are taken by central differences, so the point
    must sit at least step inside the coefficient field's domain.
    """
    pts, single = _batched(point)
    if not single and pts.shape[0] != 1:
        raise ValueError("curvature expects a single chart point")
    x = pts[0]
    n = x.shape[0]
    a0 = conn(x)
    offsets = np.concatenate([step * np.eye(n), -step * np.eye(n)])
    vals = conn(x[None, :] + offsets)
    da = (vals[:n] - vals[n:]) / (2.0 * step)  # da[i, j] = d_i A_j
    dpart = da - da.transpose(1, 0, 2, 3)
    comm = np.einsum("ikl,jlm->ijkm", a0, a0) - np.einsum("jkl,ilm->ijkm", a0, a0)
    return dpart + comm
