"""
gauss_manin_service.py — The de Rham side and the Gauss-Manin connection.

Responsible for:
- build_de_rham_system(): the filtered de Rham modules on the glued charts,
  with the total differential 𝒹 = ∂̄ + 𝓛_𝔡 + ∂ + 𝔩⌟ and its checks
- SeriesMatrix: square matrices over R_k
- gm_connection(): the cohomology of ∂̂ over R_k as a free module, the
  connection matrices of ∇_ν, flatness, residues N_ν, the Hodge filtration and
  Griffiths transversality
- weight filtrations (by index, from the residues, or supplied) and the
  opposite-filtration check
- elementary_frame(): a frame in which ∇_ν acts by the constant matrix N_ν

Hodge and weight indices are half-integers and are stored doubled: a class of
PV^{p,q} has doubled Hodge index p − q + 2d, and F^{≥h}, W_{≤w} use the same
scale, so the opposite condition reads F^{≥h} ⊕ W_{≤h−1} = H.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from math import comb

from sympy import QQ

from core.dtos import CheckReport
from core.services import linalg_service
from core.services.errors import (
    IncompatibleDataError,
    InconsistencyError,
    NotNilpotentError,
)
from core.services.graded_service import (
    AlgebraTable,
    Element,
    ModuleElement,
    cohomology_basis,
    contract,
    sign,
    table_complex,
)
from core.services.layer_service import hat_tensor
from core.services.mc_service import MCProblem
from core.services.scalars_service import ArtinRing, ArtinSeries, format_rational, mono_mul
from core.services.tw_service import TWElement
from core.services.twist_service import TwistData

logger = logging.getLogger(__name__)


# ─────────────────────────────────────────────────────────────────────────────
# De Rham system on the charts
# ─────────────────────────────────────────────────────────────────────────────

def base_form_name(nu: int) -> str:
    return f"dlog_q{nu + 1}"


def tw_base_wedge(m: TWElement, nu: int) -> TWElement:
    """dlog q_ν ∧ m on a Thom-Whitney module element, passing the form factor with its sign."""
    if not m.module:
        raise IncompatibleDataError("Base forms act on module elements")
    try:
        _, op = m.table.module.base_forms[base_form_name(nu)]
    except KeyError as exc:
        raise IncompatibleDataError(f"Module declares no base form {base_form_name(nu)!r}") from exc
    return m._unary(op, True)


def filtration_levels(table: AlgebraTable) -> tuple:
    """Number of base-form factors of each module basis vector."""
    return tuple(label.count("dlog_q") for label in table.module.labels)


def _level(m: TWElement, levels: tuple) -> int | None:
    found = [levels[i] for comp in m.comps.values() for (i, _) in comp]
    return min(found) if found else None


@dataclass
class DeRhamSystem:
    twist: TwistData
    levels: tuple
    report: CheckReport

    @property
    def table(self) -> AlgebraTable:
        return self.twist.system.table


def _module_probes(twist: TwistData, a: int) -> list[TWElement]:
    system = twist.system
    table = system.table
    space = system.space((a,))
    omega = twist.volumes[a]
    probes = []
    for i in range(table.dimension):
        m = TWElement.constant(space, table.basis_element(i)).contract(omega)
        probes.append(m)
        probes.extend(tw_base_wedge(m, nu) for nu in range(table.ring.s))
    return probes


def graded_piece_ranks(table: AlgebraTable) -> dict:
    """
    Rank of {dlog q_E ∧ w[g] : |E| = r} in the module, per r.

    The identification of the r-th graded piece with Ω^r ⊗ (relative part) is
    an isomorphism exactly when this rank is C(s, r)·dim.
    """
    base = table.over(table.ring.restrict(0))
    s, n = base.ring.s, base.dimension
    out = {}
    for r in range(s + 1):
        columns = []
        for subset in itertools.combinations(range(s), r):
            for g in range(n):
                m = ModuleElement.basis(base, g)
                for nu in reversed(subset):
                    m = m.base_wedge(base_form_name(nu))
                columns.append({i: c for (i, _), c in m.coords.items()})
        out[r] = linalg_service.rank_of(columns, base.module.dimension)
    return out


def build_de_rham_system(twist: TwistData) -> DeRhamSystem:
    """
    Check the filtered de Rham system carried by the glued charts.

    Raises:
        IncompatibleDataError: the table has no module with base forms
        InconsistencyError: an identity fails
    """
    system = twist.system
    table = system.table
    nerve = system.nerve
    if table.module is None or len(table.module.base_forms) != table.ring.s:
        raise IncompatibleDataError(
            f"Table {table.name!r} needs a de Rham module with one base form per direction"
        )
    levels = filtration_levels(table)
    report = CheckReport(subject=f"de_rham[{table.name}]")

    square = filtered = None
    for a in sorted(twist.d):
        for m in _module_probes(twist, a):
            dm = twist.total_differential(a, m)
            if square is None and not twist.total_differential(a, dm).is_zero():
                square = f"{nerve.v_label((a,))} on {m.render()}"
            lm, ldm = _level(m, levels), _level(dm, levels)
            if filtered is None and ldm is not None and lm is not None and ldm < lm:
                filtered = f"{nerve.v_label((a,))}: level {lm} → {ldm} on {m.render()}"
    report.add("total_differential_square_zero", square is None, witness=square)
    report.add("filtration_preserved", filtered is None, witness=filtered)

    n = table.dimension
    for r, rank in graded_piece_ranks(table).items():
        expected = comb(table.ring.s, r) * n
        report.add(f"graded_piece_{r}", rank == expected, witness=f"rank {rank}, expected {expected}")

    commutator = None
    for i in range(n):
        phi = table.basis_element(i)
        deg = table.degree(i)
        for g in range(table.module.dimension):
            m = ModuleElement.basis(table, g)
            for nu in range(table.ring.s):
                name = base_form_name(nu)
                lhs = contract(phi, m.base_wedge(name))
                rhs = contract(phi, m).base_wedge(name).scale(sign(deg))
                if commutator is None and not (lhs - rhs).is_zero():
                    commutator = f"{table.labels[i]} with {name} on {table.module.labels[g]}"
    report.add("contraction_commutes_with_base_forms", commutator is None, witness=commutator)

    if twist.report is not None:
        for name in ("volume_glues", "hat_identity"):
            try:
                result = twist.report.result(name)
            except KeyError:
                continue
            report.add(name, result.passed, witness=result.witness)

    if not report.passed:
        failed = report.failures()[0]
        raise InconsistencyError(f"De Rham check {failed.name} failed: {failed.witness}")
    logger.info(f"De Rham system on {len(twist.d)} charts verified")
    return DeRhamSystem(twist, levels, report)


# ─────────────────────────────────────────────────────────────────────────────
# Matrices over R_k
# ─────────────────────────────────────────────────────────────────────────────

def _qzero(n: int) -> list:
    return [[QQ.zero] * n for _ in range(n)]


def _qeye(n: int) -> list:
    return [[QQ.one if i == j else QQ.zero for j in range(n)] for i in range(n)]


def _qmul(a: list, b: list) -> list:
    n = len(a)
    return [[sum((a[i][l] * b[l][j] for l in range(n)), QQ.zero) for j in range(n)] for i in range(n)]


def _qadd(a: list, b: list, c=QQ.one) -> list:
    return [[x + c * y for x, y in zip(ra, rb)] for ra, rb in zip(a, b)]


def _qscale(a: list, c) -> list:
    return [[x * c for x in row] for row in a]


def _qis_zero(a: list) -> bool:
    return all(not x for row in a for x in row)


def _qapply(a: list, v: list) -> list:
    return [sum((a[i][j] * v[j] for j in range(len(v))), QQ.zero) for i in range(len(a))]


def _columns(vectors: list) -> list[dict]:
    return [{i: c for i, c in enumerate(v) if c} for v in vectors]


def qrank(vectors: list, n: int) -> int:
    return linalg_service.rank_of(_columns(vectors), n) if vectors else 0


def qinverse(a: list) -> list:
    """Inverse of an invertible rational matrix."""
    n = len(a)
    solver = linalg_service.LinearSolver(_columns([[a[i][j] for i in range(n)] for j in range(n)]), n)
    if solver.rank != n:
        raise IncompatibleDataError(f"Matrix of size {n} is singular (rank {solver.rank})")
    inv = _qzero(n)
    for j in range(n):
        sol = solver.solve({j: QQ.one})
        for i, c in sol.items():
            inv[i][j] = c
    return inv


class SeriesMatrix:
    """A square matrix over R_k stored as {monomial: rational matrix}."""

    __slots__ = ("ring", "n", "parts")

    def __init__(self, ring: ArtinRing, n: int, parts: dict | None = None):
        self.ring = ring
        self.n = n
        self.parts = {m: rows for m, rows in (parts or {}).items() if sum(m) <= ring.k and not _qis_zero(rows)}

    @classmethod
    def zero(cls, ring: ArtinRing, n: int) -> "SeriesMatrix":
        return cls(ring, n)

    @classmethod
    def identity(cls, ring: ArtinRing, n: int) -> "SeriesMatrix":
        return cls(ring, n, {ring.zero_mono: _qeye(n)})

    @classmethod
    def constant_matrix(cls, ring: ArtinRing, rows: list) -> "SeriesMatrix":
        return cls(ring, len(rows), {ring.zero_mono: rows})

    @classmethod
    def from_entries(cls, ring: ArtinRing, entries: list) -> "SeriesMatrix":
        """entries[i][j] is an ArtinSeries."""
        n = len(entries)
        parts: dict = {}
        for i, row in enumerate(entries):
            for j, series in enumerate(row):
                for m, c in series.terms.items():
                    parts.setdefault(m, _qzero(n))[i][j] += c
        return cls(ring, n, parts)

    def entry(self, i: int, j: int) -> ArtinSeries:
        return ArtinSeries(self.ring, {m: rows[i][j] for m, rows in self.parts.items()})

    def part(self, m: tuple) -> list:
        return self.parts.get(tuple(m), _qzero(self.n))

    def constant(self) -> list:
        return self.part(self.ring.zero_mono)

    def _check(self, other: "SeriesMatrix") -> None:
        if other.ring != self.ring or other.n != self.n:
            raise IncompatibleDataError("Matrices over different rings or of different sizes")

    def __add__(self, other: "SeriesMatrix") -> "SeriesMatrix":
        self._check(other)
        out = dict(self.parts)
        for m, rows in other.parts.items():
            out[m] = _qadd(out[m], rows) if m in out else rows
        return SeriesMatrix(self.ring, self.n, out)

    def __neg__(self) -> "SeriesMatrix":
        return self.scale(-QQ.one)

    def __sub__(self, other: "SeriesMatrix") -> "SeriesMatrix":
        return self + (-other)

    def scale(self, c) -> "SeriesMatrix":
        return SeriesMatrix(self.ring, self.n, {m: _qscale(rows, c) for m, rows in self.parts.items()})

    def __mul__(self, other: "SeriesMatrix") -> "SeriesMatrix":
        self._check(other)
        k = self.ring.k
        out: dict = {}
        for m1, a in self.parts.items():
            for m2, b in other.parts.items():
                if sum(m1) + sum(m2) > k:
                    continue
                m = mono_mul(m1, m2)
                prod = _qmul(a, b)
                out[m] = _qadd(out[m], prod) if m in out else prod
        return SeriesMatrix(self.ring, self.n, out)

    def euler(self, nu: int) -> "SeriesMatrix":
        """q_ν∂_ν applied entrywise."""
        return SeriesMatrix(self.ring, self.n, {m: _qscale(rows, QQ(m[nu])) for m, rows in self.parts.items()})

    def conjugate(self, basis: list, inverse: list | None = None) -> "SeriesMatrix":
        """B^{-1}·M·B for a constant change of basis B."""
        inverse = inverse if inverse is not None else qinverse(basis)
        return SeriesMatrix(
            self.ring, self.n, {m: _qmul(inverse, _qmul(rows, basis)) for m, rows in self.parts.items()}
        )

    def restrict(self, l: int) -> "SeriesMatrix":
        ring = self.ring.restrict(l)
        return SeriesMatrix(ring, self.n, {m: rows for m, rows in self.parts.items() if sum(m) <= l})

    def apply(self, vec: list) -> list:
        """M·v for a column of ArtinSeries."""
        out = [ArtinSeries.zero(self.ring) for _ in range(self.n)]
        for i in range(self.n):
            for j, v in enumerate(vec):
                if not v.is_zero():
                    out[i] = out[i] + self.entry(i, j) * v
        return out

    def inverse(self) -> "SeriesMatrix":
        """
        Inverse over R_k.

        Raises:
            IncompatibleDataError: the constant part is singular
        """
        inv0 = SeriesMatrix.constant_matrix(self.ring, qinverse(self.constant()))
        # M = M0 (1 + X) with X in 𝔪; invert 1 + X by the geometric series.
        x = inv0 * self - SeriesMatrix.identity(self.ring, self.n)
        total = SeriesMatrix.identity(self.ring, self.n)
        power = SeriesMatrix.identity(self.ring, self.n)
        for _ in range(self.ring.k):
            power = power * (-x)
            total = total + power
        return total * inv0

    def is_zero(self) -> bool:
        return not self.parts

    def __eq__(self, other):
        if not isinstance(other, SeriesMatrix):
            return NotImplemented
        return self.ring == other.ring and self.n == other.n and (self - other).is_zero()

    __hash__ = None

    def to_json(self) -> list:
        return [[self.entry(i, j).to_json() for j in range(self.n)] for i in range(self.n)]

    def render(self) -> str:
        return "[" + "; ".join(
            ", ".join(self.entry(i, j).render() for j in range(self.n)) for i in range(self.n)
        ) + "]"

    def __repr__(self) -> str:
        return f"SeriesMatrix({self.render()})"


def render_rows(rows: list) -> list:
    return [[format_rational(x) for x in row] for row in rows]


# ─────────────────────────────────────────────────────────────────────────────
# Gauss-Manin connection on the global model
# ─────────────────────────────────────────────────────────────────────────────

def euler_derivative(x: Element, nu: int) -> Element:
    """q_ν∂_ν on the coefficients of x."""
    return x.like({(i, m): c * m[nu] for (i, m), c in x.coords.items() if m[nu]})


def default_connection_forms(problem: MCProblem) -> dict:
    """A_ν = q_ν∂_ν𝔡 for a planted twist, 0 otherwise."""
    s = problem.table.ring.s
    if problem.twist is None:
        return {nu: problem.table.zero() for nu in range(s)}
    return {nu: euler_derivative(problem.twist, nu) for nu in range(s)}


class _Coordinates:
    """R_k-coordinates of ∂̂-cycles against a basis of lifted classes."""

    def __init__(self, table: AlgebraTable, tensor: dict, classes: list, degrees: list):
        self.table = table
        self.complex_, self.keys = table_complex(table, tensor)
        self.index = {deg: {key: n for n, key in enumerate(keys)} for deg, keys in self.keys.items()}
        self.monomials = table.ring.monomials()
        self._solvers: dict = {}
        self.classes = classes
        self.degrees = degrees

    def vector(self, x: Element, degree: int) -> dict:
        index = self.index.get(degree, {})
        return {index[key]: c for key, c in x.coords.items()}

    def element(self, vec: dict, degree: int) -> Element:
        keys = self.keys.get(degree, [])
        return Element(self.table, {keys[n]: c for n, c in vec.items()})

    def _solver(self, degree: int):
        if degree not in self._solvers:
            layout = []
            columns = []
            for j, (c, deg) in enumerate(zip(self.classes, self.degrees)):
                if deg != degree:
                    continue
                for m in self.monomials:
                    layout.append((j, m))
                    columns.append(self.vector(c.scale(ArtinSeries.monomial(self.table.ring, m)), degree))
            columns.extend(c for c in (self.complex_.maps.get(degree - 1) or []) if c)
            solver = linalg_service.LinearSolver(columns, self.complex_.dims.get(degree, 0))
            self._solvers[degree] = (solver, layout)
        return self._solvers[degree]

    def _part(self, x: Element, degree: int) -> Element:
        t = self.table
        return x.like({key: c for key, c in x.coords.items() if t.degree(key[0]) + t.mono_degree(key[1]) == degree})

    def is_cycle(self, x: Element) -> bool:
        for degree in x.degrees():
            part = self._part(x, degree)
            if self.complex_.differential(degree, self.vector(part, degree)):
                return False
        return True

    def solve(self, x: Element) -> list:
        """a_j ∈ R_k with x = Σ a_j c_j + ∂̂b."""
        ring = self.table.ring
        out = [ArtinSeries.zero(ring) for _ in self.classes]
        for degree in sorted(x.degrees()):
            part = self._part(x, degree)
            solver, layout = self._solver(degree)
            sol = solver.solve(self.vector(part, degree))
            if sol is None:
                raise InconsistencyError(f"Cycle {part.render()} is not in the span of the lifted classes")
            for p, c in sol.items():
                if p < len(layout):
                    j, m = layout[p]
                    out[j] = out[j] + ArtinSeries.monomial(ring, m, c)
        return out


@dataclass
class HodgeBundle:
    """
    H(PV ⊗ R_k, ∂̂) with the lifted basis c_i and ∇_ν c_i = Σ_j (M_ν)_{ji} c_j.

    Coordinates at order 0 are dense rational vectors against the classes.
    """

    problem: MCProblem
    dim_d: int
    degrees: list
    classes: list                        # c_i over R_k
    representatives: list                # c_i at order 0
    forms: dict                          # ν -> A_ν
    matrices: dict                       # ν -> SeriesMatrix
    residues: dict                       # ν -> rational rows
    hodge: dict                          # doubled h -> spanning vectors of F^{≥h}
    report: CheckReport
    coordinates: _Coordinates = field(repr=False, default=None)
    base_coordinates: _Coordinates = field(repr=False, default=None)

    @property
    def dimension(self) -> int:
        return len(self.classes)

    @property
    def ring(self) -> ArtinRing:
        return self.problem.table.ring

    def hodge_space(self, h: int) -> list:
        if h <= 0:
            return [list(row) for row in _qeye(self.dimension)]
        return self.hodge.get(h, [])

    def section(self, coeffs: list) -> Element:
        out = self.problem.table.zero()
        for a, c in zip(coeffs, self.classes):
            out = out + c.scale(a)
        return out

    def residue_sum(self) -> list:
        total = _qzero(self.dimension)
        for rows in self.residues.values():
            total = _qadd(total, rows)
        return total


def top_dimension(table: AlgebraTable) -> int:
    """d with PV^{p,q} nonzero only for −d ≤ p ≤ 0."""
    return max(0, -min(p for p, _ in table.bidegrees))


def hodge_index(table: AlgebraTable, i: int, d: int) -> int:
    """Doubled Hodge index p − q + 2d of a basis vector of PV^{p,q}."""
    p, q = table.bidegrees[i]
    return p - q + 2 * d


def _classes_in_span(complex_, keys: list, piece, predicate, offset: int, dim: int) -> list:
    """Order-0 classes with a representative supported on the keys satisfying predicate."""
    chosen = [n for n, key in enumerate(keys) if predicate(key)]
    if not chosen or piece is None or piece.rank == 0:
        return []
    degree = piece.degree
    outgoing = complex_.maps.get(degree) or []
    nrows = complex_.dims.get(degree + 1, 0)
    if nrows:
        kernel = linalg_service.LinearSolver([outgoing[n] for n in chosen], nrows).kernel_basis()
    else:
        kernel = [{j: QQ.one} for j in range(len(chosen))]
    out = []
    for vec in kernel:
        cycle = {chosen[j]: c for j, c in vec.items()}
        coords = linalg_service.class_coordinates(piece, cycle)
        full = [QQ.zero] * dim
        for j, c in enumerate(coords):
            full[offset + j] = c
        if any(full):
            out.append(full)
    return out


def _lift(table: AlgebraTable, complex_, keys: dict, rep: Element, degree: int) -> Element:
    """c₀ + x with x ∈ 𝔪 and ∂̂(c₀ + x) = 0."""
    index = {key: n for n, key in enumerate(keys.get(degree, []))}
    ideal = [n for key, n in index.items() if sum(key[1]) >= 1]
    outgoing = complex_.maps.get(degree) or []
    zero = table.ring.zero_mono
    vec = {index[(i, zero)]: c for (i, _), c in rep.coords.items()}
    image = complex_.differential(degree, vec)
    if not image:
        return Element(table, {(i, zero): c for (i, _), c in rep.coords.items()})
    solver = linalg_service.LinearSolver([outgoing[n] for n in ideal], complex_.dims.get(degree + 1, 0))
    sol = solver.solve(linalg_service.vec_scale(image, -QQ.one))
    if sol is None:
        raise InconsistencyError(f"Class {rep.render()} of degree {degree} does not lift; the cohomology is not free")
    for p, c in sol.items():
        vec = linalg_service.vec_add(vec, {ideal[p]: c})
    key_list = keys[degree]
    return Element(table, {key_list[n]: c for n, c in vec.items()})


def _connection_matrices(coords: _Coordinates, forms: dict, classes: list) -> dict:
    ring = coords.table.ring
    n = len(classes)
    out = {}
    for nu in range(ring.s):
        columns = []
        for c in classes:
            y = euler_derivative(c, nu) + forms[nu].wedge(c)
            if not coords.is_cycle(y):
                raise InconsistencyError(f"∇_{nu + 1} of {c.render()} is not ∂̂-closed")
            columns.append(coords.solve(y))
        entries = [[columns[i][j] for i in range(n)] for j in range(n)]
        out[nu] = SeriesMatrix.from_entries(ring, entries)
    return out


def absolute_square_report(table: AlgebraTable, tensor: dict, forms: dict) -> CheckReport:
    """[∂̂, q_ν∂_ν + A_ν∧] = 0 on every basis vector over R_k."""
    report = CheckReport(subject="absolute_differential")
    complex_, keys = table_complex(table, tensor)
    for nu, a in forms.items():
        failure = None
        for degree, key_list in keys.items():
            for key in key_list:
                x = Element(table, {key: QQ.one})
                hx = _apply(complex_, keys, x, degree)
                lhs = _apply(complex_, keys, euler_derivative(x, nu) + a.wedge(x), degree)
                rhs = euler_derivative(hx, nu) + a.wedge(hx)
                if lhs != rhs:
                    failure = f"{table.labels[key[0]]}*{table.ring.label(key[1])}"
                    break
            if failure:
                break
        report.add(f"absolute_square_{nu + 1}", failure is None, witness=failure)
    return report


def _apply(complex_, keys: dict, x: Element, degree: int) -> Element:
    index = {key: n for n, key in enumerate(keys.get(degree, []))}
    vec = {index[key]: c for key, c in x.coords.items()}
    image = complex_.differential(degree, vec)
    targets = keys.get(degree + 1, [])
    return Element(x.table, {targets[n]: c for n, c in image.items()})


def gm_connection(problem: MCProblem, forms: dict | None = None, k: int | None = None) -> HodgeBundle:
    """
    The Gauss-Manin connection of the global model.

    The absolute differential is ∂̂ + Σ_ν dlog q_ν ∧ (q_ν∂_ν + A_ν∧); ∇_ν c is the
    class of (q_ν∂_ν + A_ν∧)c.

    Args:
        problem: the global model
        forms: A_ν per direction; default q_ν∂_ν𝔡 for a planted twist
        k: order; default the ring order

    Raises:
        IncompatibleDataError: the order exceeds the ring order
        InconsistencyError: a class does not lift, or a connection image is not closed
    """
    if k is not None and k > problem.k:
        raise IncompatibleDataError(f"Order {k} exceeds the ring order {problem.k}")
    if k is not None and k < problem.k:
        problem = problem.restrict(k)
        forms = {nu: a.restrict(k) for nu, a in forms.items()} if forms else None
    table = problem.table
    ring = table.ring
    forms = forms if forms is not None else default_connection_forms(problem)
    d = top_dimension(table)
    report = CheckReport(subject=f"gauss_manin[{table.name}]")

    tensor = hat_tensor(table, problem.curvature, problem.mixed)
    report.extend(absolute_square_report(table, tensor, forms))

    base = table.over(ring.restrict(0))
    tensor0 = hat_tensor(base, problem.curvature.restrict(0), problem.mixed.restrict(0))
    h0 = cohomology_basis(base, tensor0)
    complex_, keys = table_complex(table, tensor)
    degrees, representatives, classes = [], [], []
    for degree in sorted(h0.pieces):
        for rep in h0.representatives(degree):
            degrees.append(degree)
            representatives.append(rep)
            classes.append(_lift(table, complex_, keys, rep, degree))
    dim = len(classes)
    coords = _Coordinates(table, tensor, classes, degrees)
    matrices = _connection_matrices(coords, forms, classes)
    residues = {nu: m.constant() for nu, m in matrices.items()}

    flat = None
    for nu, mu in itertools.combinations(range(ring.s), 2):
        curvature = matrices[nu] * matrices[mu] - matrices[mu] * matrices[nu] \
            + matrices[mu].euler(nu) - matrices[nu].euler(mu)
        if not curvature.is_zero() and flat is None:
            flat = f"directions {nu + 1},{mu + 1}: {curvature.render()}"
    report.add("flat", flat is None, witness=flat)
    commute = None
    for nu, mu in itertools.combinations(range(ring.s), 2):
        if _qmul(residues[nu], residues[mu]) != _qmul(residues[mu], residues[nu]):
            commute = f"N_{nu + 1}, N_{mu + 1}"
    report.add("residues_commute", commute is None, witness=commute)

    for l in range(ring.k):
        table_l = table.over(ring.restrict(l))
        tensor_l = hat_tensor(table_l, problem.curvature.restrict(l), problem.mixed.restrict(l))
        classes_l = [c.restrict(l) for c in classes]
        coords_l = _Coordinates(table_l, tensor_l, classes_l, degrees)
        forms_l = {nu: a.restrict(l) for nu, a in forms.items()}
        restricted = _connection_matrices(coords_l, forms_l, classes_l)
        ok = all(restricted[nu] == matrices[nu].restrict(l) for nu in matrices)
        report.add(f"order_compatible_{l}", ok)

    complex0, keys0 = table_complex(base, tensor0)
    hodge: dict = {}
    offset = 0
    for degree in sorted(h0.pieces):
        piece = h0.pieces[degree]
        for h in range(1, 2 * d + 1):
            p = -((-(h + degree)) // 2)
            hodge.setdefault(h, []).extend(_classes_in_span(
                complex0, keys0.get(degree, []), piece,
                lambda key, p=p: base.bidegrees[key[0]][0] + d >= p, offset, dim,
            ))
        offset += piece.rank

    bundle = HodgeBundle(problem, d, degrees, classes, representatives, forms, matrices, residues,
                         hodge, report, coords,
                         _Coordinates(base, tensor0, representatives, degrees))
    report.extend(transversality_report(bundle))
    logger.info(
        f"Gauss-Manin connection on {table.name!r}: rank {dim}, "
        f"Hodge ranks {{{', '.join(f'{h}: {qrank(v, dim)}' for h, v in sorted(hodge.items()))}}}"
    )
    if not report.passed:
        failed = report.failures()[0]
        raise InconsistencyError(f"Gauss-Manin check {failed.name} failed: {failed.witness}")
    return bundle


def transversality_report(bundle: HodgeBundle) -> CheckReport:
    """N_ν F^{≥h} ⊂ F^{≥h−2} at order 0, by rank."""
    report = CheckReport(subject="griffiths_transversality")
    dim = bundle.dimension
    for nu, rows in sorted(bundle.residues.items()):
        failure = None
        for h in range(1, 2 * bundle.dim_d + 1):
            target = bundle.hodge_space(h - 2)
            moved = [_qapply(rows, v) for v in bundle.hodge_space(h)]
            if qrank(target + moved, dim) != qrank(target, dim):
                failure = f"F^≥{h} (doubled)"
                break
        report.add(f"transversal_{nu + 1}", failure is None, witness=failure)
    return report


# ─────────────────────────────────────────────────────────────────────────────
# Weight filtrations
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class WeightFiltration:
    """W_{≤w} for doubled w, given by spanning vectors; a level holds until the next one."""

    levels: dict
    source: str

    def space(self, w: int) -> list:
        below = [key for key in self.levels if key <= w]
        return self.levels[max(below)] if below else []


def index_weight_filtration(bundle: HodgeBundle) -> WeightFiltration:
    """W_{≤w}: classes with a representative in span{PV^{p,q} : p − q + 2d ≤ w}."""
    problem = bundle.problem
    base = problem.table.over(problem.table.ring.restrict(0))
    tensor0 = hat_tensor(base, problem.curvature.restrict(0), problem.mixed.restrict(0))
    h0 = cohomology_basis(base, tensor0)
    complex0, keys0 = table_complex(base, tensor0)
    d = bundle.dim_d
    levels: dict = {}
    offset = 0
    for degree in sorted(h0.pieces):
        piece = h0.pieces[degree]
        for w in range(-1, 2 * d + 1):
            levels.setdefault(w, []).extend(_classes_in_span(
                complex0, keys0.get(degree, []), piece,
                lambda key, w=w: hodge_index(base, key[0], d) <= w, offset, bundle.dimension,
            ))
        offset += piece.rank
    return WeightFiltration(levels, "index")


def _power(rows: list, e: int) -> list:
    out = _qeye(len(rows))
    for _ in range(e):
        out = _qmul(rows, out)
    return out


def monodromy_weight_filtration(bundle: HodgeBundle) -> WeightFiltration:
    """
    The filtration of N = Σ N_ν centred at d:

        W_{≤w} = Σ_{i − l = w − d} ker N^{i+1} ∩ im N^l.

    Raises:
        NotNilpotentError: N is not nilpotent
    """
    n = bundle.dimension
    total = bundle.residue_sum()
    if not _qis_zero(_power(total, n + 1)):
        raise NotNilpotentError("The residue sum N is not nilpotent")
    images = [[[_power(total, l)[i][j] for i in range(n)] for j in range(n)] for l in range(n + 1)]
    d = bundle.dim_d
    levels = {}
    for w in range(-1, 2 * d + 1):
        j = w - d
        vectors = []
        for l in range(n + 1):
            i = j + l
            if i < 0 or i > n:
                continue
            kill = _power(total, i + 1)
            span = [v for v in images[l] if any(v)]
            if not span:
                continue
            kernel = linalg_service.LinearSolver(_columns([_qapply(kill, v) for v in span]), n).kernel_basis()
            for combo in kernel:
                vec = [QQ.zero] * n
                for p, c in combo.items():
                    vec = [x + c * y for x, y in zip(vec, span[p])]
                if any(vec):
                    vectors.append(vec)
        levels[w] = vectors
    return WeightFiltration(levels, "monodromy")


def supplied_weight_filtration(bundle: HodgeBundle, levels: dict) -> WeightFiltration:
    """
    A weight filtration given as instance data.

    Raises:
        IncompatibleDataError: a vector has the wrong length
    """
    out = {}
    for w, vectors in levels.items():
        for v in vectors:
            if len(v) != bundle.dimension:
                raise IncompatibleDataError(
                    f"Weight vector at level {w} has length {len(v)}, cohomology has rank {bundle.dimension}"
                )
        out[int(w)] = [list(v) for v in vectors]
    return WeightFiltration(out, "supplied")


def opposite_report(bundle: HodgeBundle, weight: WeightFiltration) -> CheckReport:
    """F^{≥h} ⊕ W_{≤h−1} = H for every doubled h, and N_ν W_{≤w} ⊂ W_{≤w−2}."""
    report = CheckReport(subject=f"opposite[{weight.source}]")
    dim = bundle.dimension
    for h in range(0, 2 * bundle.dim_d + 2):
        f, w = bundle.hodge_space(h), weight.space(h - 1)
        rf, rw, ru = qrank(f, dim), qrank(w, dim), qrank(f + w, dim)
        report.add(
            f"opposite_{h}", rf + rw == dim and ru == dim,
            witness=f"rank F^≥{h} = {rf}, rank W_≤{h - 1} = {rw}, rank of the sum = {ru}, dim = {dim}",
        )
    for nu, rows in sorted(bundle.residues.items()):
        failure = None
        for w in range(-1, 2 * bundle.dim_d + 1):
            target = weight.space(w - 2)
            moved = [_qapply(rows, v) for v in weight.space(w)]
            if qrank(target + moved, dim) != qrank(target, dim):
                failure = f"W_≤{w}"
                break
        report.add(f"residue_lowers_weight_{nu + 1}", failure is None, witness=failure)
    return report


def filtered_basis(bundle: HodgeBundle, weight: WeightFiltration) -> tuple[list, list]:
    """
    A degree-homogeneous basis lifting bases of the graded pieces of W.

    Returns:
        (vectors, doubled weight of each vector)
    """
    dim = bundle.dimension
    vectors, weights = [], []
    for degree in sorted(set(bundle.degrees)):
        block = [j for j in range(dim) if bundle.degrees[j] == degree]
        chosen: list = []
        for w in range(-1, 2 * bundle.dim_d + 1):
            for v in weight.space(w):
                projected = [v[j] if j in block else QQ.zero for j in range(dim)]
                if any(projected) and qrank(chosen + [projected], dim) > len(chosen):
                    chosen.append(projected)
                    vectors.append(projected)
                    weights.append(w)
    if len(vectors) != dim:
        raise IncompatibleDataError(f"Weight filtration spans rank {len(vectors)} of {dim}")
    return vectors, weights


# ─────────────────────────────────────────────────────────────────────────────
# Elementary frames
# ─────────────────────────────────────────────────────────────────────────────

def _ad(n_rows: list, x: list) -> list:
    return _qadd(_qmul(n_rows, x), _qmul(x, n_rows), -QQ.one)


def _divides(b: tuple, a: tuple) -> bool:
    return all(x <= y for x, y in zip(b, a))


def flat_frame(matrices: dict, ring: ArtinRing, rounds_bound: int | None = None) -> tuple[SeriesMatrix, int]:
    """
    P ≡ 1 mod 𝔪 with M_ν P + q_ν∂_νP = P N_ν for N_ν = M_ν mod 𝔪.

    Monomial by monomial, P_a = −Σ_n (−ad N_ν)^n R_a / a_ν^{n+1} with ν the
    least direction where a_ν ≠ 0 and R_a = Σ_{b ≠ 0} (M_ν)_b P_{a−b}.

    Returns:
        (P, the largest number of rounds any monomial needed)

    Raises:
        NotNilpotentError: the correction does not stop within the bound
        InconsistencyError: a parameter-only monomial carries a nonzero correction
    """
    n = next(iter(matrices.values())).n if matrices else 0
    bound = rounds_bound if rounds_bound is not None else 2 * n + 1
    zero = ring.zero_mono
    residues = {nu: m.constant() for nu, m in matrices.items()}
    parts = {zero: _qeye(n)}
    rounds = 0
    for a in ring.monomials():
        if a == zero:
            continue
        directions = [nu for nu in range(ring.s) if a[nu]]

        def remainder(nu):
            total = _qzero(n)
            for b, rows in matrices[nu].parts.items():
                if b == zero or not _divides(b, a):
                    continue
                c = tuple(x - y for x, y in zip(a, b))
                if c in parts:
                    total = _qadd(total, _qmul(rows, parts[c]))
            return total

        if not directions:
            if any(not _qis_zero(remainder(nu)) for nu in matrices):
                raise InconsistencyError(f"Connection depends on the parameter monomial {ring.label(a)}")
            continue
        nu = directions[0]
        lam = QQ(a[nu])
        term = _qscale(remainder(nu), -QQ.one / lam)
        total = term
        for r in range(1, bound + 1):
            term = _qscale(_ad(residues[nu], term), -QQ.one / lam)
            if _qis_zero(term):
                rounds = max(rounds, r)
                break
            total = _qadd(total, term)
        else:
            raise NotNilpotentError(f"Frame correction at {ring.label(a)} did not stop within {bound} rounds")
        if not _qis_zero(total):
            parts[a] = total
    return SeriesMatrix(ring, n, parts), rounds


@dataclass
class ElementaryFrame:
    bundle: HodgeBundle
    weight: WeightFiltration
    basis: list                          # constant filtered basis, as columns
    weights: list                        # doubled weight per column
    residues: dict                       # ν -> N_ν in the filtered basis
    frame: SeriesMatrix                  # columns: sections in the lifted classes
    sections: list                       # 𝔢_i as elements
    rounds: int
    report: CheckReport


def elementary_frame(
    bundle: HodgeBundle,
    weight: WeightFiltration,
    basis: list | None = None,
) -> ElementaryFrame:
    """
    Sections 𝔢_i with ∇_ν 𝔢_i = Σ_j (N_ν)_{ji} 𝔢_j exactly.

    Args:
        bundle: the Gauss-Manin data
        weight: a weight filtration opposite to F
        basis: optional constant filtered basis (columns); default from W

    Raises:
        IncompatibleDataError: W is not opposite to F, or the basis is singular
        NotNilpotentError: the residues are not nilpotent
    """
    opposite = opposite_report(bundle, weight)
    if not opposite.passed:
        failed = opposite.failures()[0]
        raise IncompatibleDataError(f"Weight filtration is not opposite: {failed.name}: {failed.witness}")
    n = bundle.dimension
    ring = bundle.ring
    if basis is None:
        basis, weights = filtered_basis(bundle, weight)
    else:
        weights = [None] * len(basis)
    rows = [[basis[j][i] for j in range(n)] for i in range(n)]
    inverse = qinverse(rows)
    moved = {nu: m.conjugate(rows, inverse) for nu, m in bundle.matrices.items()}
    total = _qzero(n)
    for m in moved.values():
        total = _qadd(total, m.constant())
    if not _qis_zero(_power(total, n + 1)):
        raise NotNilpotentError("The residues are not nilpotent")

    p, rounds = flat_frame(moved, ring)
    frame = SeriesMatrix.constant_matrix(ring, rows) * p
    report = CheckReport(subject="elementary_frame")
    report.extend(opposite)
    residues = {nu: m.constant() for nu, m in moved.items()}
    for nu, m in bundle.matrices.items():
        lhs = m * frame + frame.euler(nu)
        rhs = frame * SeriesMatrix.constant_matrix(ring, residues[nu])
        report.add(f"frame_flat_{nu + 1}", lhs == rhs, witness=(lhs - rhs).render())
    report.add("frame_identity_mod_m", frame.restrict(0) == SeriesMatrix.constant_matrix(ring.restrict(0), rows))
    sections = [bundle.section([frame.entry(j, i) for j in range(n)]) for i in range(n)]
    logger.info(f"Elementary frame of rank {n} after at most {rounds} rounds")
    if not report.passed:
        failed = report.failures()[0]
        raise InconsistencyError(f"Elementary frame check {failed.name} failed: {failed.witness}")
    return ElementaryFrame(bundle, weight, basis, weights, residues, frame, sections, rounds, report)


def frame_change(a: ElementaryFrame, b: ElementaryFrame) -> list | None:
    """The constant matrix C with frame_b = frame_a·C, or None if it is not constant."""
    ring = a.bundle.ring
    change = a.frame.inverse() * b.frame
    if any(m != ring.zero_mono for m in change.parts):
        return None
    return change.constant()
