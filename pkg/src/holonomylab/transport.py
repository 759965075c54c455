"""Parallel transport along piecewise-differentiable loops.

Transport integrates the linear system S'(t) = -sum_i c_i'(t) A_i(c(t)) S(t)
segment by segment with a fixed-step fourth-order Runge-Kutta scheme, starting
from the identity.  Conventions used throughout the package:

* composition: traversing loop c then loop d gives P = P_d @ P_c (matrices
  act on the left, matching ODE flow composition);
* orientation: for a counterclockwise loop in the (i, j) coordinate plane the
  leading term of log P is -area * F_ij with F_ij the curvature matrix of the
  connection (calibrated once on the disk family and asserted in the tests).

Transport matrices are never projected onto the rotation group: the reported
so_defect doubles as an integrator diagnostic.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .geometry import ChartDomain, ConnectionField, MetricFamily, c0_connection_distance, levi_civita
from .matrices import DomainError, frobenius, so_residual

__all__ = [
    "CurveSegment",
    "LoopPath",
    "LoopSpec",
    "TransportResult",
    "bounding_constant",
    "circle_loop",
    "fourier_loop",
    "loop_catalog",
    "parallel_transport",
    "reparametrize_smooth",
    "square_loop",
    "transport_convergence_table",
]

log = logging.getLogger(__name__)

MIN_STEPS = 16


@dataclass(frozen=True)
class CurveSegment:
    """One differentiable piece of a loop, parametrized over [0, 1].

    position and velocity accept a parameter array (m,) and return (m, n).
    """

    position: Callable[[np.ndarray], np.ndarray]
    velocity: Callable[[np.ndarray], np.ndarray]


def line_segment(start, end) -> CurveSegment:
    a = np.asarray(start, dtype=float)
    b = np.asarray(end, dtype=float)

    def position(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return a + t[:, None] * (b - a)

    def velocity(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.broadcast_to(b - a, (t.shape[0], a.shape[0])).copy()

    return CurveSegment(position=position, velocity=velocity)


@dataclass(frozen=True)
class LoopPath:
    """Piecewise-differentiable loop: segments chaining back to the basepoint."""

    segments: tuple
    basepoint: np.ndarray
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        object.__setattr__(self, "basepoint", np.asarray(self.basepoint, dtype=float))
        if not self.segments:
            raise ValueError("a loop needs at least one segment")
        tol = 1e-9
        prev_end = self.basepoint
        for seg in self.segments:
            start = np.asarray(seg.position(np.zeros(1)))[0]
            if np.linalg.norm(start - prev_end) > tol:
                raise ValueError(f"loop {self.label!r}: segments do not chain (gap at {start})")
            prev_end = np.asarray(seg.position(np.ones(1)))[0]
        if np.linalg.norm(prev_end - self.basepoint) > tol:
            raise ValueError(f"loop {self.label!r} does not close up at its basepoint")

    def sample_points(self, per_segment: int = 64) -> np.ndarray:
        ts = np.linspace(0.0, 1.0, per_segment)
        return np.concatenate([np.asarray(seg.position(ts)) for seg in self.segments])

    def validate(self, chart: ChartDomain, per_segment: int = 128) -> bool:
        return bool(chart.contains(self.sample_points(per_segment)).all())

    def reversed(self) -> "LoopPath":
        rev = []
        for seg in self.segments[::-1]:
            pos, vel = seg.position, seg.velocity
            rev.append(
                CurveSegment(
                    position=lambda t, pos=pos: pos(1.0 - np.atleast_1d(np.asarray(t, dtype=float))),
                    velocity=lambda t, vel=vel: -vel(1.0 - np.atleast_1d(np.asarray(t, dtype=float))),
                )
            )
        return LoopPath(segments=tuple(rev), basepoint=self.basepoint, label=f"{self.label}~reversed")


def _bump(t: np.ndarray) -> np.ndarray:
    return t - np.sin(2.0 * np.pi * t) / (2.0 * np.pi)


def _bump_rate(t: np.ndarray) -> np.ndarray:
    return 1.0 - np.cos(2.0 * np.pi * t)


def reparametrize_smooth(loop: LoopPath) -> LoopPath:
    """Reparametrize every segment so velocity vanishes at segment endpoints.

    The image (and hence the transport) is unchanged; the whole loop becomes a
    C^1 path even across corners.
    """
    smooth = []
    for seg in loop.segments:
        pos, vel = seg.position, seg.velocity

        def position(t, pos=pos):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            return pos(_bump(t))

        def velocity(t, pos=pos, vel=vel):
            t = np.atleast_1d(np.asarray(t, dtype=float))
            return vel(_bump(t)) * _bump_rate(t)[:, None]

        smooth.append(CurveSegment(position=position, velocity=velocity))
    return LoopPath(segments=tuple(smooth), basepoint=loop.basepoint, label=loop.label)


# -- loop constructors ---------------------------------------------------------

def square_loop(basepoint, i: int, j: int, side: float, label: str = "") -> LoopPath:
    """Counterclockwise coordinate square of the given side, cornered at the basepoint."""
    x = np.asarray(basepoint, dtype=float)
    ei = np.zeros_like(x)
    ej = np.zeros_like(x)
    ei[i] = side
    ej[j] = side
    corners = [x, x + ei, x + ei + ej, x + ej, x]
    segments = [line_segment(corners[m], corners[m + 1]) for m in range(4)]
    return LoopPath(segments=tuple(segments), basepoint=x, label=label or f"square[{i},{j}]x{side:g}")


def circle_loop(basepoint, i: int, j: int, radius: float, label: str = "") -> LoopPath:
    """Counterclockwise circle in the (i, j) plane through the basepoint.

    The center sits at basepoint - radius * e_i, so e.g. a basepoint (r, 0)
    with radius r traverses the origin-centered circle of radius r.
    """
    x = np.asarray(basepoint, dtype=float)

    def position(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.broadcast_to(x, (t.shape[0], x.shape[0])).copy()
        out[:, i] += radius * (np.cos(2.0 * np.pi * t) - 1.0)
        out[:, j] += radius * np.sin(2.0 * np.pi * t)
        return out

    def velocity(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros((t.shape[0], x.shape[0]))
        out[:, i] = -2.0 * np.pi * radius * np.sin(2.0 * np.pi * t)
        out[:, j] = 2.0 * np.pi * radius * np.cos(2.0 * np.pi * t)
        return out

    return LoopPath(
        segments=(CurveSegment(position=position, velocity=velocity),),
        basepoint=x,
        label=label or f"circle[{i},{j}]r{radius:g}",
    )


def fourier_loop(basepoint, rng: np.random.Generator, amplitude: float, modes: int = 3, label: str = "") -> LoopPath:
    """Smooth random closed loop from a low-order trigonometric series."""
    x = np.asarray(basepoint, dtype=float)
    n = x.shape[0]
    weights = amplitude / np.arange(1, modes + 1)[:, None] ** 2
    sin_coeff = rng.standard_normal((modes, n)) * weights
    cos_coeff = rng.standard_normal((modes, n)) * weights
    freqs = 2.0 * np.pi * np.arange(1, modes + 1)

    def position(t, scale=1.0):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        phases = freqs[:, None] * t[None, :]
        wander = np.einsum("kn,km->mn", sin_coeff, np.sin(phases))
        wander += np.einsum("kn,km->mn", cos_coeff, np.cos(phases) - 1.0)
        return x + scale * wander

    def velocity(t, scale=1.0):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        phases = freqs[:, None] * t[None, :]
        rate = np.einsum("kn,km->mn", sin_coeff * freqs[:, None], np.cos(phases))
        rate -= np.einsum("kn,km->mn", cos_coeff * freqs[:, None], np.sin(phases))
        return scale * rate

    return LoopPath(
        segments=(CurveSegment(position=position, velocity=velocity),),
        basepoint=x,
        label=label or "random",
    )


def _shrink_toward_basepoint(loop: LoopPath, factor: float) -> LoopPath:
    x = loop.basepoint
    segments = []
    for seg in loop.segments:
        pos, vel = seg.position, seg.velocity
        segments.append(
            CurveSegment(
                position=lambda t, pos=pos: x + factor * (pos(t) - x),
                velocity=lambda t, vel=vel: factor * vel(t),
            )
        )
    return LoopPath(segments=tuple(segments), basepoint=x, label=f"{loop.label}~shrunk{factor:g}")


@dataclass(frozen=True)
class LoopSpec:
    """Catalog request: square scales, circle radii and seeded random loops."""

    square_scales: tuple = (0.04, 0.02)
    circle_radii: tuple = (0.1,)
    random_count: int = 4
    random_amplitude: float = 0.05
    random_modes: int = 3
    seed: int = 0


def loop_catalog(basepoint, spec: LoopSpec, chart: ChartDomain) -> list[LoopPath]:
    """Loops based at a point: coordinate squares, plane circles, random loops.

    Loops leaving the interior safety band are shrunk toward the basepoint
    (halving up to three times) or dropped with a warning.
    """
    x = np.asarray(basepoint, dtype=float)
    chart.require_interior(x, what="catalog basepoint")
    n = chart.dim
    candidates: list[LoopPath] = []
    for i in range(n):
        for j in range(i + 1, n):
            for side in spec.square_scales:
                candidates.append(square_loop(x, i, j, side))
            for radius in spec.circle_radii:
                candidates.append(circle_loop(x, i, j, radius))
    rng = np.random.default_rng(spec.seed)
    for idx in range(spec.random_count):
        candidates.append(fourier_loop(x, rng, spec.random_amplitude, spec.random_modes, label=f"random{idx}"))

    loops = []
    for loop in candidates:
        kept = loop
        for _ in range(4):
            if kept.validate(chart):
                loops.append(kept)
                break
            kept = _shrink_toward_basepoint(kept, 0.5)
        else:
            log.warning("dropping loop %s: leaves the chart interior even after shrinking", loop.label)
    return loops


# -- the integrator ------------------------------------------------------------

@dataclass(frozen=True)
class TransportResult:
    """Transport matrix with integration and group-membership diagnostics."""

    matrix: np.ndarray
    error_estimate: float
    so_defect: float
    steps_used: int


def _rk4_transfer(coeff: np.ndarray, h: float) -> np.ndarray:
    """Per-step update matrices from coefficients on the half-step grid."""
    eye = np.eye(coeff.shape[-1])
    b0 = coeff[0:-2:2]
    bm = coeff[1::2]
    b1 = coeff[2::2]
    k1 = b0
    k2 = bm @ (eye + (0.5 * h) * k1)
    k3 = bm @ (eye + (0.5 * h) * k2)
    k4 = b1 @ (eye + h * k3)
    return eye + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _fold(transfer: np.ndarray) -> np.ndarray:
    out = np.eye(transfer.shape[-1])
    for step in transfer:
        out = step @ out
    return out


def parallel_transport(conn: ConnectionField, loop: LoopPath, steps: int = 2048) -> TransportResult:
    """Transport the identity frame around a loop.

    steps is the number of Runge-Kutta steps per segment (rounded up to an
    even count, at least 16).  The error estimate is the Frobenius distance
    to a rerun with half as many steps on the same coefficient grid; the
    so_defect is measured against the connection's metric at the basepoint
    (against the identity when no metric is attached).
    """
    if steps < MIN_STEPS:
        raise ValueError(f"steps must be at least {MIN_STEPS}")
    n_steps = steps + (steps % 2)
    full = np.eye(conn.fibre_dim)
    half = np.eye(conn.fibre_dim)
    for seg in loop.segments:
        ts = np.linspace(0.0, 1.0, 2 * n_steps + 1)
        pts = np.asarray(seg.position(ts), dtype=float)
        vel = np.asarray(seg.velocity(ts), dtype=float)
        coeff = np.asarray(conn.coefficients(pts), dtype=float)
        if not np.all(np.isfinite(coeff)):
            raise ArithmeticError(f"non-finite connection coefficients along loop {loop.label!r}")
        b = -np.einsum("mi,mikl->mkl", vel, coeff)
        full = _fold(_rk4_transfer(b, 1.0 / n_steps)) @ full
        half = _fold(_rk4_transfer(b[::2], 2.0 / n_steps)) @ half
    error = frobenius(full - half)
    if conn.metric is not None:
        form = conn.metric(loop.basepoint)
        defect = so_residual(full, form)
    else:
        defect = so_residual(full)
    return TransportResult(
        matrix=full,
        error_estimate=error,
        so_defect=defect,
        steps_used=n_steps * len(loop.segments),
    )


# -- convergence tables ----------------------------------------------------------

@dataclass(frozen=True)
class ConvergenceRow:
    k: int
    transport_dist: float
    c0_dist: float


def transport_convergence_table(
    family: MetricFamily,
    loop: LoopPath,
    ks: Sequence[int],
    steps: int = 2048,
    grid: int = 21,
) -> list[ConvergenceRow]:
    """Distance of member transports and connections to the limit, per k."""
    chart = family.chart
    limit_conn = levi_civita(family.limit, chart)
    limit_p = parallel_transport(limit_conn, loop, steps).matrix
    rows = []
    for k in ks:
        conn_k = levi_civita(family.member(k), chart)
        p_k = parallel_transport(conn_k, loop, steps).matrix
        rows.append(
            ConvergenceRow(
                k=int(k),
                transport_dist=frobenius(p_k - limit_p),
                c0_dist=c0_connection_distance(conn_k, limit_conn, chart, grid=grid),
            )
        )
    return rows


def bounding_constant(rows: Sequence[ConvergenceRow]) -> float:
    """Smallest C with transport_dist <= C * c0_dist across the table.

    This is the sup-norm regression constant through the origin; rows with
    vanishing connection distance and transport distance contribute nothing.
    """
    best = 0.0
    for row in rows:
        if row.c0_dist <= 0.0:
            if row.transport_dist > 1e-12:
                return float("inf")
            continue
        best = max(best, row.transport_dist / row.c0_dist)
    return best
