"""Closed connected subgroups of SO(l), conjugacy search and the inclusion order.

Subgroups are carried by orthonormal bases of their Lie algebras (skew
matrices under the Frobenius inner product).  The order relation "class of A
is below class of B" is decided by searching for a rotation U with
U a U^T inside the algebra of B for every generator a; the search runs
seeded random restarts of a geodesic gradient descent on the rotation group
and reduces by minimal residual.  Comparisons between connected groups are
decided entirely at the algebra level.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg
import scipy.optimize

from .matrices import frobenius, random_rotation, so_residual

__all__ = [
    "AntisymmetryReport",
    "ConjugacyClass",
    "OrderVerdict",
    "SubgroupSpec",
    "antisymmetry_check",
    "catalog",
    "conjugacy_search",
    "leq",
    "standard_complex_structure",
]

DEFAULT_RESTARTS = 32
DEFAULT_TOL = 1e-6
DESCENT_CAP = 500


def standard_complex_structure(m: int) -> np.ndarray:
    """Multiplication by i on R^(2m) in (x1..xm, y1..ym) coordinates."""
    j = np.zeros((2 * m, 2 * m))
    j[:m, m:] = -np.eye(m)
    j[m:, :m] = np.eye(m)
    return j


def _normalized(mat: np.ndarray) -> np.ndarray:
    return mat / frobenius(mat)


def _plane_rotation_generator(dim: int, i: int, j: int) -> np.ndarray:
    gen = np.zeros((dim, dim))
    gen[i, j] = -1.0
    gen[j, i] = 1.0
    return _normalized(gen)


def _skew_basis(dim: int) -> list[np.ndarray]:
    return [_plane_rotation_generator(dim, i, j) for i in range(dim) for j in range(i + 1, dim)]


def _unitary_algebra_basis(m: int) -> list[np.ndarray]:
    """Orthonormal basis of the skew matrices commuting with the complex structure."""
    dim = 2 * m
    basis = []
    # anti-hermitian with zero imaginary part: X skew, realized as diag(X, X)
    for i in range(m):
        for j in range(i + 1, m):
            x = np.zeros((m, m))
            x[i, j] = -1.0
            x[j, i] = 1.0
            mat = np.zeros((dim, dim))
            mat[:m, :m] = x
            mat[m:, m:] = x
            basis.append(_normalized(mat))
    # purely imaginary hermitian parts: Y symmetric, realized as [[0, -Y], [Y, 0]]
    sym_basis = []
    for i in range(m):
        for j in range(i, m):
            y = np.zeros((m, m))
            y[i, j] = 1.0
            y[j, i] = 1.0
            sym_basis.append(y)
    for y in sym_basis:
        mat = np.zeros((dim, dim))
        mat[:m, m:] = -y
        mat[m:, :m] = y
        basis.append(_normalized(mat))
    return basis


def _traceless_unitary_basis(m: int) -> list[np.ndarray]:
    """The unitary algebra with the complex-trace direction removed."""
    struct = standard_complex_structure(m)
    j_hat = _normalized(struct)
    kept = []
    for mat in _unitary_algebra_basis(m):
        overlap = float(np.tensordot(mat, j_hat))
        reduced = mat - overlap * j_hat
        norm = frobenius(reduced)
        if norm < 1e-12:
            continue
        reduced = reduced / norm
        for prev in kept:  # re-orthogonalize the diagonal directions
            reduced = reduced - float(np.tensordot(reduced, prev)) * prev
        norm = frobenius(reduced)
        if norm > 1e-9:
            kept.append(reduced / norm)
    return kept


@dataclass(frozen=True)
class SubgroupSpec:
    """Closed connected subgroup of SO(l) described at the algebra level."""

    id: str
    ambient_dim: int
    algebra_basis: tuple
    group_dim: int
    membership: Optional[Callable[[np.ndarray], float]] = None
    structure: Optional[np.ndarray] = None

    def __post_init__(self):
        basis = tuple(np.asarray(b, dtype=float) for b in self.algebra_basis)
        object.__setattr__(self, "algebra_basis", basis)
        if len(basis) != self.group_dim:
            raise ValueError(f"spec {self.id!r}: basis length does not match group dimension")
        for a in basis:
            if frobenius(a + a.T) > 1e-10:
                raise ValueError(f"spec {self.id!r}: algebra basis must be skew")
        gram = np.array([[float(np.tensordot(a, b)) for b in basis] for a in basis])
        if basis and frobenius(gram - np.eye(len(basis))) > 1e-8:
            raise ValueError(f"spec {self.id!r}: algebra basis must be orthonormal")

    def basis_stack(self) -> np.ndarray:
        if not self.algebra_basis:
            return np.zeros((0, self.ambient_dim**2))
        return np.stack([b.ravel() for b in self.algebra_basis])


def _block_rotation_membership(dim: int) -> Callable[[np.ndarray], float]:
    def membership(a: np.ndarray) -> float:
        res = so_residual(a)
        res += frobenius(a[2:, :2]) + frobenius(a[:2, 2:])
        res += frobenius(a[2:, 2:] - np.eye(dim - 2))
        return res

    return membership


def _unitary_membership(m: int) -> Callable[[np.ndarray], float]:
    struct = standard_complex_structure(m)

    def membership(a: np.ndarray) -> float:
        return so_residual(a) + frobenius(a @ struct - struct @ a)

    return membership


def _special_unitary_membership(m: int) -> Callable[[np.ndarray], float]:
    unitary = _unitary_membership(m)

    def membership(a: np.ndarray) -> float:
        res = unitary(a)
        complex_block = a[:m, :m] + 1j * a[m:, :m]
        res += abs(np.linalg.det(complex_block) - 1.0)
        return res

    return membership


def catalog(dim: int) -> list[SubgroupSpec]:
    """Catalog of comparison targets in SO(dim), ordered by group dimension.

    Supports dim in {2, 3, 4}: the trivial group, rotations of the leading
    coordinate plane, the full rotation group, and for dim 4 the unitary and
    special unitary groups of the standard complex structure.
    """
    if dim not in (2, 3, 4):
        raise ValueError(f"catalog supports ambient dimensions 2, 3, 4; got {dim}")
    specs = [
        SubgroupSpec(
            id="trivial",
            ambient_dim=dim,
            algebra_basis=(),
            group_dim=0,
            membership=lambda a, d=dim: frobenius(a - np.eye(d)),
        ),
        SubgroupSpec(
            id="so2_block",
            ambient_dim=dim,
            algebra_basis=(_plane_rotation_generator(dim, 0, 1),),
            group_dim=1,
            membership=_block_rotation_membership(dim) if dim > 2 else (lambda a: so_residual(a)),
        ),
    ]
    if dim == 4:
        m = 2
        specs.append(
            SubgroupSpec(
                id="su2",
                ambient_dim=4,
                algebra_basis=tuple(_traceless_unitary_basis(m)),
                group_dim=3,
                membership=_special_unitary_membership(m),
                structure=standard_complex_structure(m),
            )
        )
        specs.append(
            SubgroupSpec(
                id="u2",
                ambient_dim=4,
                algebra_basis=tuple(_unitary_algebra_basis(m)),
                group_dim=4,
                membership=_unitary_membership(m),
                structure=standard_complex_structure(m),
            )
        )
    if dim > 2:
        specs.append(
            SubgroupSpec(
                id=f"so{dim}",
                ambient_dim=dim,
                algebra_basis=tuple(_skew_basis(dim)),
                group_dim=dim * (dim - 1) // 2,
                membership=lambda a: so_residual(a),
            )
        )
    return specs


def catalog_entry(dim: int, spec_id: str) -> SubgroupSpec:
    for spec in catalog(dim):
        if spec.id == spec_id:
            return spec
    known = ", ".join(s.id for s in catalog(dim))
    raise KeyError(f"no subgroup {spec_id!r} in the SO({dim}) catalog (known: {known})")


# -- conjugacy search -----------------------------------------------------------

@dataclass(frozen=True)
class OrderVerdict:
    """Outcome of a conjugate-containment search."""

    holds: bool
    witness: np.ndarray
    residual: float
    restarts_used: int


def _source_stack(source: Sequence[np.ndarray]) -> np.ndarray:
    mats = [np.asarray(s, dtype=float) for s in source]
    for s in mats:
        if frobenius(s + s.T) > 1e-8:
            raise ValueError("source elements must be skew matrices")
    return np.stack(mats) if mats else np.zeros((0, 0, 0))


def _span_dim(stack: np.ndarray, rel_tol: float = 1e-9) -> int:
    if stack.shape[0] == 0:
        return 0
    sing = np.linalg.svd(stack.reshape(stack.shape[0], -1), compute_uv=False)
    if sing[0] == 0.0:
        return 0
    return int(np.sum(sing > rel_tol * sing[0]))


def _gap(u: np.ndarray, source: np.ndarray, basis: np.ndarray):
    moved = np.einsum("ab,mbc,dc->mad", u, source, u)
    flat = moved.reshape(moved.shape[0], -1)
    if basis.shape[0]:
        rest = flat - (flat @ basis.T) @ basis
    else:
        rest = flat
    value = float(np.sum(rest**2))
    return value, moved, rest.reshape(moved.shape)


def _plane_pairs(dim: int) -> list[tuple[int, int]]:
    return [(i, j) for i in range(dim) for j in range(i + 1, dim)]


def _skew_from_vector(omega: np.ndarray, dim: int, pairs) -> np.ndarray:
    mat = np.zeros((dim, dim))
    for idx, (i, j) in enumerate(pairs):
        mat[i, j] = -omega[idx]
        mat[j, i] = omega[idx]
    return mat


def _descend(u0, source, basis, max_iter=DESCENT_CAP):
    """Minimize the containment gap over rotations exp(skew(omega)) @ u0.

    Quasi-Newton in the exponential chart around u0; gradients are exact via
    the left-trivialized gradient paired with the Frechet derivative of the
    matrix exponential (plain geodesic descent crawls in the ill-conditioned
    valleys of this objective).
    """
    dim = u0.shape[0]
    pairs = _plane_pairs(dim)

    def fun_and_grad(omega):
        skew = _skew_from_vector(omega, dim, pairs)
        exp_skew = scipy.linalg.expm(skew)
        u = exp_skew @ u0
        value, moved, rest = _gap(u, source, basis)
        g_left = 2.0 * (
            np.einsum("mab,mbc->ac", moved, rest) - np.einsum("mab,mbc->ac", rest, moved)
        )
        grad = np.empty(len(pairs))
        exp_inv = exp_skew.T
        for idx, (i, j) in enumerate(pairs):
            direction = np.zeros((dim, dim))
            direction[i, j] = -1.0
            direction[j, i] = 1.0
            frechet = scipy.linalg.expm_frechet(skew, direction, compute_expm=False)
            grad[idx] = np.tensordot(g_left, frechet @ exp_inv)
        return value, grad

    result = scipy.optimize.minimize(
        fun_and_grad,
        np.zeros(len(pairs)),
        jac=True,
        method="BFGS",
        options={"gtol": 1e-14, "maxiter": max_iter},
    )
    u = scipy.linalg.expm(_skew_from_vector(result.x, dim, pairs)) @ u0
    value, _, _ = _gap(u, source, basis)
    return u, value


def conjugacy_search(
    source: Sequence[np.ndarray],
    target: SubgroupSpec,
    restarts: int = DEFAULT_RESTARTS,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    initial: Sequence[np.ndarray] = (),
) -> OrderVerdict:
    """Search for a rotation conjugating the source span into the target algebra.

    Minimizes f(U) = sum_s |U s U^T - proj_target(U s U^T)|_F^2 over rotations
    via geodesic descent with backtracking, started from any supplied warm
    starts, then the identity, then seeded random rotations.  The first start
    reaching residual sqrt(f) below tol wins (deterministic given the seed);
    otherwise every start runs and the best residual is reported.  A source
    span larger than the target dimension short-circuits to a failed verdict.
    """
    dim = target.ambient_dim
    stack = _source_stack(source)
    if stack.shape[0] == 0:
        return OrderVerdict(holds=True, witness=np.eye(dim), residual=0.0, restarts_used=0)
    if stack.shape[-1] != dim:
        raise ValueError("source and target live in different ambient dimensions")
    basis = target.basis_stack()

    if _span_dim(stack) > target.group_dim:
        value, _, _ = _gap(np.eye(dim), stack, basis)
        return OrderVerdict(holds=False, witness=np.eye(dim), residual=float(np.sqrt(value)), restarts_used=0)

    rng = np.random.default_rng(seed)
    starts = [np.asarray(u, dtype=float) for u in initial]
    starts.append(np.eye(dim))
    while len(starts) < max(restarts, 1):
        starts.append(random_rotation(rng, dim))

    best_u = np.eye(dim)
    best_value = np.inf
    used = 0
    for u0 in starts[: max(restarts, 1)]:
        used += 1
        u, value = _descend(u0, stack, basis)
        if value < best_value:
            best_u, best_value = u, value
        if np.sqrt(value) < tol:
            break
    residual = float(np.sqrt(best_value))
    return OrderVerdict(holds=residual < tol, witness=best_u, residual=residual, restarts_used=used)


# -- the order relation -----------------------------------------------------------

@dataclass(frozen=True)
class ConjugacyClass:
    """Conjugacy class carried by a representative.

    The representative is a SubgroupSpec or any object exposing an algebra
    basis (a `basis` attribute) plus `dim`, e.g. an estimated holonomy
    algebra.
    """

    representative: object

    def algebra(self) -> list[np.ndarray]:
        rep = self.representative
        if isinstance(rep, SubgroupSpec):
            return list(rep.algebra_basis)
        return [np.asarray(b, dtype=float) for b in rep.basis]

    def group_dim(self) -> int:
        rep = self.representative
        if isinstance(rep, SubgroupSpec):
            return rep.group_dim
        return int(rep.dim)

    def ambient_dim(self) -> int:
        rep = self.representative
        if isinstance(rep, SubgroupSpec):
            return rep.ambient_dim
        if hasattr(rep, "ambient_dim"):
            return int(rep.ambient_dim)
        basis = self.algebra()
        if not basis:
            raise ValueError("cannot infer ambient dimension from an empty algebra")
        return basis[0].shape[0]

    def as_target(self) -> SubgroupSpec:
        rep = self.representative
        if isinstance(rep, SubgroupSpec):
            return rep
        basis = self.algebra()
        return SubgroupSpec(
            id="empirical",
            ambient_dim=self.ambient_dim(),
            algebra_basis=tuple(basis),
            group_dim=len(basis),
        )


def leq(
    a: ConjugacyClass,
    b: ConjugacyClass,
    restarts: int = DEFAULT_RESTARTS,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
    initial: Sequence[np.ndarray] = (),
) -> OrderVerdict:
    """Conjugate-inclusion verdict between two conjugacy classes.

    Dimension comparison runs first (strictly larger sources cannot embed);
    otherwise the witness search decides.
    """
    source = a.algebra()
    if source and source[0].shape[0] != b.ambient_dim():
        raise ValueError("classes live in different ambient dimensions")
    target = b.as_target()
    if a.group_dim() > b.group_dim():
        stack = _source_stack(source)
        value, _, _ = _gap(np.eye(target.ambient_dim), stack, target.basis_stack())
        return OrderVerdict(holds=False, witness=np.eye(target.ambient_dim), residual=float(np.sqrt(value)), restarts_used=0)
    return conjugacy_search(source, target, restarts=restarts, tol=tol, seed=seed, initial=initial)


def _containment_residual(witness: np.ndarray, source: Sequence[np.ndarray], target: SubgroupSpec) -> float:
    stack = _source_stack(source)
    if stack.shape[0] == 0:
        return 0.0
    value, _, _ = _gap(witness, stack, target.basis_stack())
    return float(np.sqrt(value))


@dataclass(frozen=True)
class AntisymmetryReport:
    """Two-way comparison certifying the equality-from-mutual-inclusion law."""

    forward: OrderVerdict
    backward: OrderVerdict
    mutual: bool
    dims_equal: bool
    equality_residual_forward: float
    equality_residual_backward: float
    tol: float

    @property
    def ok(self) -> bool:
        """True when mutual inclusion, if present, was certified as equality."""
        if not self.mutual:
            return True
        return self.dims_equal and max(self.equality_residual_forward, self.equality_residual_backward) < self.tol


def antisymmetry_check(
    spec_a: SubgroupSpec,
    spec_b: SubgroupSpec,
    restarts: int = DEFAULT_RESTARTS,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
) -> AntisymmetryReport:
    """Run the order both ways; on mutual inclusion certify equality.

    Equality through a witness U means every basis element of the target is
    also reproduced inside the conjugated source span (and dimensions agree),
    which is checked as a reverse projection residual.
    """
    forward = leq(ConjugacyClass(spec_a), ConjugacyClass(spec_b), restarts=restarts, tol=tol, seed=seed)
    backward = leq(ConjugacyClass(spec_b), ConjugacyClass(spec_a), restarts=restarts, tol=tol, seed=seed)
    mutual = forward.holds and backward.holds
    dims_equal = spec_a.group_dim == spec_b.group_dim
    eq_fwd = eq_bwd = float("nan")
    if mutual:
        # conjugated source span must reproduce the whole target algebra
        moved_a = [forward.witness @ s @ forward.witness.T for s in spec_a.algebra_basis]
        moved_b = [backward.witness @ s @ backward.witness.T for s in spec_b.algebra_basis]
        eq_fwd = _reverse_residual(moved_a, spec_b)
        eq_bwd = _reverse_residual(moved_b, spec_a)
    return AntisymmetryReport(
        forward=forward,
        backward=backward,
        mutual=mutual,
        dims_equal=dims_equal,
        equality_residual_forward=eq_fwd,
        equality_residual_backward=eq_bwd,
        tol=tol,
    )


def _reverse_residual(moved_source: Sequence[np.ndarray], target: SubgroupSpec) -> float:
    """Projection residual of the target algebra onto the moved source span."""
    if not moved_source:
        return 0.0 if target.group_dim == 0 else float("inf")
    stack = np.stack([m.ravel() for m in moved_source])
    q, _ = np.linalg.qr(stack.T)
    worst = 0.0
    for b in target.algebra_basis:
        vec = b.ravel()
        rest = vec - q @ (q.T @ vec)
        worst = max(worst, float(np.linalg.norm(rest)))
    return worst
