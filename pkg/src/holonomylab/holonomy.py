"""Holonomy-algebra estimation at a basepoint and classification.

Transport matrices of many loops, expressed in an orthonormal frame for the
metric at the basepoint, are rotations.  Their principal logarithms, together
with curvature generators from small coordinate squares and one pass of Lie
brackets, span (numerically) the holonomy algebra; a singular value
decomposition separates genuine directions from integrator noise.  The
estimate is then matched against the subgroup catalog by conjugacy search,
preferring the most special candidate the evidence supports.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import ConnectionField, curvature
from .matrices import frobenius, principal_log, so_residual, sym_sqrt
from .subgroups import OrderVerdict, SubgroupSpec, conjugacy_search
from .transport import LoopSpec, TransportResult, loop_catalog, parallel_transport, square_loop

__all__ = [
    "AlgebraEstimate",
    "ClassificationResult",
    "HolonomySample",
    "classify",
    "estimate_algebra",
    "orthonormal_frame",
    "sample_holonomy",
    "small_loop_generators",
]

log = logging.getLogger(__name__)

# ||P - I|| (spectral) below which a transport contributes a usable logarithm.
LOG_WINDOW = 0.9
# Frobenius floor under which a candidate algebra element is integrator noise.
NOISE_FLOOR = 1e-7
GAP_THRESHOLD = 1e-4

# Sign relating log of a counterclockwise (i, j) square transport to the
# curvature matrix: log P = CURVATURE_LOG_SIGN * side^2 * F_ij + O(side^3).
CURVATURE_LOG_SIGN = -1.0


def orthonormal_frame(form: np.ndarray) -> np.ndarray:
    """Positively oriented orthonormal basis for an SPD form, as columns.

    The inverse symmetric square root is used, so the frame is symmetric
    positive definite and in particular has positive determinant.
    """
    return np.linalg.inv(sym_sqrt(form, method="eigen"))


@dataclass(frozen=True)
class HolonomySample:
    """Frame-expressed transports of a loop catalog at one basepoint."""

    transports: tuple
    loop_labels: tuple
    basepoint: np.ndarray
    frame: np.ndarray


def _into_frame(result: TransportResult, frame: np.ndarray, frame_inv: np.ndarray) -> TransportResult:
    moved = frame_inv @ result.matrix @ frame
    return TransportResult(
        matrix=moved,
        error_estimate=result.error_estimate,
        so_defect=so_residual(moved),
        steps_used=result.steps_used,
    )


def sample_holonomy(
    conn: ConnectionField,
    basepoint,
    frame: np.ndarray,
    n_loops: int = 4,
    seed: int = 0,
    square_scales: tuple = (0.04, 0.02),
    steps: int = 2048,
    chart=None,
) -> HolonomySample:
    """Transport a loop catalog and express every matrix in the given frame.

    The frame columns must be orthonormal for the connection's metric at the
    basepoint (checked when the metric is known); the framed transports are
    then rotations up to integrator error.
    """
    x = np.asarray(basepoint, dtype=float)
    if conn.metric is not None:
        gram = frame.T @ conn.metric(x) @ frame
        if frobenius(gram - np.eye(frame.shape[0])) > 1e-8:
            raise ValueError("frame is not orthonormal for the metric at the basepoint")
        if np.linalg.det(frame) <= 0:
            raise ValueError("frame must be positively oriented")
    if chart is None:
        raise ValueError("sample_holonomy needs the chart to build its loop catalog")
    spec = LoopSpec(square_scales=square_scales, circle_radii=(), random_count=n_loops, seed=seed)
    loops = loop_catalog(x, spec, chart)
    frame_inv = np.linalg.inv(frame)
    results = []
    labels = []
    for loop in loops:
        raw = parallel_transport(conn, loop, steps=steps)
        results.append(_into_frame(raw, frame, frame_inv))
        labels.append(loop.label)
    return HolonomySample(
        transports=tuple(results),
        loop_labels=tuple(labels),
        basepoint=x,
        frame=np.asarray(frame, dtype=float),
    )


def small_loop_generators(
    conn: ConnectionField,
    basepoint,
    frame: np.ndarray,
    side: float,
    steps: int = 2048,
) -> list[np.ndarray]:
    """Curvature-scale generators log(P_square) / side^2 for every plane.

    Each generator matches CURVATURE_LOG_SIGN times the frame-conjugated
    curvature matrix of its coordinate plane up to O(side).
    """
    x = np.asarray(basepoint, dtype=float)
    n = x.shape[0]
    frame_inv = np.linalg.inv(frame)
    gens = []
    for i in range(n):
        for j in range(i + 1, n):
            loop = square_loop(x, i, j, side)
            result = parallel_transport(conn, loop, steps=steps)
            moved = frame_inv @ result.matrix @ frame
            gens.append(principal_log(moved) / side**2)
    return gens


@dataclass(frozen=True)
class AlgebraEstimate:
    """Estimated holonomy algebra: orthonormal skew basis plus diagnostics."""

    basis: tuple
    dim: int
    spectral_gap: float
    residual: float
    ambient_dim: int
    empty_sample: bool = False


def estimate_algebra(
    sample: HolonomySample,
    generators: Sequence[np.ndarray] = (),
    gap_threshold: float = GAP_THRESHOLD,
    noise_floor: float = NOISE_FLOOR,
) -> AlgebraEstimate:
    """Span of transport logs, curvature generators and one bracket pass.

    Elements with Frobenius norm below noise_floor are discarded as
    integrator noise before stacking; singular directions above
    gap_threshold times the leading singular value are kept.  An empty
    usable set yields dimension zero with the empty_sample flag raised.
    """
    dim = sample.frame.shape[0]
    elements: list[np.ndarray] = []
    for result in sample.transports:
        if float(np.linalg.norm(result.matrix - np.eye(dim), 2)) < LOG_WINDOW:
            elements.append(principal_log(result.matrix))
    elements.extend(np.asarray(g, dtype=float) for g in generators)
    elements = [e for e in elements if frobenius(e) >= noise_floor]
    brackets = []
    for a_idx in range(len(elements)):
        for b_idx in range(a_idx + 1, len(elements)):
            a, b = elements[a_idx], elements[b_idx]
            br = a @ b - b @ a
            if frobenius(br) >= noise_floor:
                brackets.append(br)
    elements.extend(brackets)

    if not elements:
        return AlgebraEstimate(
            basis=(), dim=0, spectral_gap=float("inf"), residual=0.0, ambient_dim=dim, empty_sample=True
        )

    stack = np.stack([e.ravel() for e in elements])
    _, sing, vt = np.linalg.svd(stack, full_matrices=False)
    keep = sing > gap_threshold * sing[0]
    kept = int(np.sum(keep))
    basis = []
    for row in vt[:kept]:
        mat = row.reshape(dim, dim)
        basis.append(0.5 * (mat - mat.T))  # exact skew projection
    discarded = sing[kept:]
    gap = float(sing[kept - 1] / discarded[0]) if kept and discarded.size else float("inf")
    residual = float(discarded[0]) if discarded.size else 0.0
    return AlgebraEstimate(basis=tuple(basis), dim=kept, spectral_gap=gap, residual=residual, ambient_dim=dim)


@dataclass(frozen=True)
class ClassificationResult:
    """Most special catalog subgroup containing the estimated algebra."""

    subgroup_id: str
    witness: np.ndarray
    residual: float
    searched: tuple

    @property
    def classified(self) -> bool:
        return self.subgroup_id != "unclassified"


def classify(
    estimate: AlgebraEstimate,
    specs: Sequence[SubgroupSpec],
    restarts: int = 32,
    tol: float = 1e-6,
    seed: int = 0,
    initial: Sequence[np.ndarray] = (),
) -> ClassificationResult:
    """Match an algebra estimate against catalog subgroups, smallest first.

    Candidates of dimension below the estimate are skipped; the first (most
    special) candidate whose conjugacy search succeeds wins.  When nothing
    passes, the verdict is "unclassified" carrying the best residual seen.
    """
    if not specs:
        raise ValueError("classification needs a nonempty catalog")
    searched = []
    best: Optional[tuple[str, OrderVerdict]] = None
    for spec in sorted(specs, key=lambda s: s.group_dim):
        if spec.group_dim < estimate.dim:
            continue
        verdict = conjugacy_search(
            list(estimate.basis), spec, restarts=restarts, tol=tol, seed=seed, initial=initial
        )
        searched.append((spec.id, verdict.residual))
        if best is None or verdict.residual < best[1].residual:
            best = (spec.id, verdict)
        if verdict.holds:
            return ClassificationResult(
                subgroup_id=spec.id,
                witness=verdict.witness,
                residual=verdict.residual,
                searched=tuple(searched),
            )
    assert best is not None
    return ClassificationResult(
        subgroup_id="unclassified",
        witness=best[1].witness,
        residual=best[1].residual,
        searched=tuple(searched),
    )
