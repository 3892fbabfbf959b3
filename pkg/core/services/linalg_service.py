"""
linalg_service.py — Exact sparse linear algebra over QQ.

Responsible for:
- LinearSolver: one reduced echelon factorisation reused for many right-hand sides
- kernels, ranks and pivot columns of sparse column lists
- cohomology of finite cochain complexes with deterministic representatives
- tensor products of finite complexes (Koszul sign on the second factor)

Vectors are sparse dicts {index: QQ element}; a linear map is the list of the
images of the source basis vectors (its columns).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from core.services.errors import InconsistencyError, IncompatibleDataError

logger = logging.getLogger(__name__)


# ─────────────────────────────────────────────────────────────────────────────
# Sparse vector helpers
# ─────────────────────────────────────────────────────────────────────────────

def vec_add(a: dict, b: dict, scale=QQ.one) -> dict:
    """a + scale*b, dropping zeros."""
    out = dict(a)
    for i, v in b.items():
        w = out.get(i, QQ.zero) + scale * v
        if w:
            out[i] = w
        else:
            out.pop(i, None)
    return out


def vec_scale(a: dict, c) -> dict:
    if not c:
        return {}
    return {i: v * c for i, v in a.items()}


def apply_columns(columns: list[dict], vec: dict) -> dict:
    """Image of vec under the map whose j-th column is columns[j]."""
    out: dict = {}
    for j, c in vec.items():
        for i, v in columns[j].items():
            w = out.get(i, QQ.zero) + c * v
            if w:
                out[i] = w
            else:
                out.pop(i, None)
    return out


def _to_domain_matrix(columns: list[dict], nrows: int, extra_identity: bool = False) -> DomainMatrix:
    ncols = len(columns)
    dok = {}
    for j, col in enumerate(columns):
        for i, v in col.items():
            if v:
                dok[(i, j)] = v
    width = ncols
    if extra_identity:
        for i in range(nrows):
            dok[(i, ncols + i)] = QQ.one
        width += nrows
    return DomainMatrix.from_dok(dok, (nrows, width), QQ)


def pivot_columns(columns: list[dict], nrows: int) -> tuple[int, ...]:
    """Pivot columns of the reduced echelon form; a basis of the span, chosen left to right."""
    if not columns or nrows == 0:
        return ()
    _, pivots = _to_domain_matrix(columns, nrows).rref()
    return tuple(pivots)


def rank_of(columns: list[dict], nrows: int) -> int:
    return len(pivot_columns(columns, nrows))


# ─────────────────────────────────────────────────────────────────────────────
# LinearSolver
# ─────────────────────────────────────────────────────────────────────────────

class LinearSolver:
    """
    Exact solver for A x = b with A fixed.

    The augmented matrix [A | I] is brought to reduced echelon form [R | E]
    once. Then E A = R, so A x = b has a solution iff the rows of E b past the
    rank vanish, and the solution with every free variable set to 0 is read
    off the pivot rows.
    """

    def __init__(self, columns: list[dict], nrows: int):
        self.ncols = len(columns)
        self.nrows = nrows
        self.pivots: tuple[int, ...] = ()
        self._rows: dict[int, dict[int, object]] = {}
        self._e_cols: list[dict[int, object]] = [dict() for _ in range(nrows)]
        if nrows == 0:
            return
        reduced, pivots = _to_domain_matrix(columns, nrows, extra_identity=True).rref()
        self.pivots = tuple(p for p in pivots if p < self.ncols)
        for (i, j), v in reduced.to_dok().items():
            if not v:
                continue
            if j < self.ncols:
                self._rows.setdefault(i, {})[j] = v
            else:
                self._e_cols[j - self.ncols][i] = v

    @property
    def rank(self) -> int:
        return len(self.pivots)

    def _reduce(self, b: dict) -> dict:
        out: dict = {}
        for j, c in b.items():
            if not c:
                continue
            for i, v in self._e_cols[j].items():
                w = out.get(i, QQ.zero) + c * v
                if w:
                    out[i] = w
                else:
                    out.pop(i, None)
        return out

    def solve(self, b: dict) -> dict | None:
        """A solution of A x = b with free variables 0, or None when b is not in the image."""
        reduced = self._reduce(b)
        rank = self.rank
        if any(i >= rank for i in reduced):
            return None
        return {self.pivots[i]: v for i, v in reduced.items()}

    def in_image(self, b: dict) -> bool:
        return all(i < self.rank for i in self._reduce(b))

    def kernel_basis(self) -> list[dict]:
        """One kernel vector per free column, in increasing column order."""
        pivot_set = set(self.pivots)
        basis = []
        for f in range(self.ncols):
            if f in pivot_set:
                continue
            vec = {f: QQ.one}
            for i, p in enumerate(self.pivots):
                v = self._rows.get(i, {}).get(f)
                if v:
                    vec[p] = -v
            basis.append(vec)
        return basis


# ─────────────────────────────────────────────────────────────────────────────
# Cohomology
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class CohomologyDegree:
    """Kernel, image and chosen class representatives in one degree."""

    degree: int
    dimension: int
    cycles: list[dict]
    representatives: list[dict]
    coordinate_solver: LinearSolver | None = None
    primitive_solver: LinearSolver | None = None

    @property
    def rank(self) -> int:
        return len(self.representatives)


@dataclass
class CochainComplex:
    """
    A finite cochain complex: dims[n] = dim C^n, maps[n] = columns of d: C^n -> C^(n+1).

    Missing maps are zero.
    """

    dims: dict[int, int]
    maps: dict[int, list[dict]] = field(default_factory=dict)

    def differential(self, n: int, vec: dict) -> dict:
        cols = self.maps.get(n)
        if not cols:
            return {}
        return apply_columns(cols, vec)

    def check_square_zero(self) -> tuple | None:
        """First (degree, basis index) where d∘d is nonzero, or None."""
        for n in sorted(self.maps):
            for j, col in enumerate(self.maps[n]):
                if self.differential(n + 1, col):
                    return (n, j)
        return None


def cohomology(complex_: CochainComplex, degrees=None) -> dict[int, CohomologyDegree]:
    """
    Cohomology of a finite complex by echelon splitting.

    Representatives are the kernel vectors whose columns are pivots of the
    reduced echelon form of [image | kernel], so the choice is reproducible.

    Raises:
        IncompatibleDataError: if d∘d != 0
    """
    witness = complex_.check_square_zero()
    if witness is not None:
        raise IncompatibleDataError(f"Differential does not square to zero (degree {witness[0]}, column {witness[1]})")

    out = {}
    for n in sorted(degrees if degrees is not None else complex_.dims):
        dim = complex_.dims.get(n, 0)
        outgoing = complex_.maps.get(n) or [{} for _ in range(dim)]
        cycles = LinearSolver(outgoing, complex_.dims.get(n + 1, 0)).kernel_basis()
        boundaries = [c for c in (complex_.maps.get(n - 1) or []) if c]
        pivots = pivot_columns(boundaries + cycles, dim)
        offset = len(boundaries)
        reps = [cycles[p - offset] for p in pivots if p >= offset]
        coordinate_solver = LinearSolver(reps + boundaries, dim) if dim else None
        primitive_solver = LinearSolver(complex_.maps.get(n - 1) or [], dim) if complex_.maps.get(n - 1) else None
        out[n] = CohomologyDegree(
            degree=n,
            dimension=dim,
            cycles=cycles,
            representatives=reps,
            coordinate_solver=coordinate_solver,
            primitive_solver=primitive_solver,
        )
        logger.debug(f"H^{n}: dim C={dim}, dim Z={len(cycles)}, rank={len(reps)}")
    return out


def class_coordinates(piece: CohomologyDegree, cycle: dict) -> list:
    """
    Coordinates of a cycle's class in the representative basis.

    Raises:
        InconsistencyError: if the vector is not a cycle of this degree
    """
    if piece.coordinate_solver is None:
        return []
    sol = piece.coordinate_solver.solve(cycle)
    if sol is None:
        raise InconsistencyError(f"Vector is not a cycle in degree {piece.degree}")
    return [sol.get(i, QQ.zero) for i in range(piece.rank)]


def find_primitive(piece: CohomologyDegree, boundary: dict) -> dict | None:
    """A preimage under d of a vector in degree piece.degree, or None if it is not exact."""
    if not boundary:
        return {}
    if piece.primitive_solver is None:
        return None
    return piece.primitive_solver.solve(boundary)


def tensor_complex(a: CochainComplex, b: CochainComplex) -> tuple[CochainComplex, dict]:
    """
    A ⊗ B with d(x⊗y) = dx⊗y + (−1)^{|x|} x⊗dy.

    Returns:
        (complex, basis) where basis[n] lists the pairs ((p, i), (q, j)) with
        p + q = n, in the order used for the complex
    """
    basis: dict = {}
    for p, da in sorted(a.dims.items()):
        for q, db in sorted(b.dims.items()):
            for i in range(da):
                for j in range(db):
                    basis.setdefault(p + q, []).append(((p, i), (q, j)))
    index = {n: {pair: k for k, pair in enumerate(pairs)} for n, pairs in basis.items()}
    maps = {}
    for n, pairs in basis.items():
        target = index.get(n + 1, {})
        columns = []
        for (p, i), (q, j) in pairs:
            col: dict = {}
            a_cols = a.maps.get(p)
            if a_cols:
                for i2, v in a_cols[i].items():
                    k = target[((p + 1, i2), (q, j))]
                    col[k] = col.get(k, QQ.zero) + v
            b_cols = b.maps.get(q)
            if b_cols:
                sgn = -QQ.one if p % 2 else QQ.one
                for j2, v in b_cols[j].items():
                    k = target[((p, i), (q + 1, j2))]
                    col[k] = col.get(k, QQ.zero) + sgn * v
            columns.append({k: v for k, v in col.items() if v})
        maps[n] = columns
    return CochainComplex(dims={n: len(pairs) for n, pairs in basis.items()}, maps=maps), basis


def cohomology_ranks(complex_: CochainComplex) -> dict[int, int]:
    return {n: piece.rank for n, piece in cohomology(complex_).items()}
