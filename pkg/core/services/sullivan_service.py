"""
sullivan_service.py — Polynomial differential forms on simplices and prisms.

Responsible for:
- Cell / SullivanForm: forms on Δ_n and on the prism Δ_1×Δ_n in canonical
  coordinates (x_0 = 1 − Σx_i and dx_0 = −Σdx_i eliminated)
- wedge, d, face pullbacks d*_j and prism end restrictions r*_j
- exact integration over Δ_q and Whitney elementary forms
- extend_from_boundary(): the extension lemma, solved as a linear system over
  Q with an escalating polynomial-degree ansatz
- relative_primitive(): primitives vanishing on the boundary
- vform_extend() / constrained_lift(): the extension and lifting lemmas for
  families of forms indexed by a basis, on simplices and prisms

Polynomials are sympy PolyElements over QQ. Every cell of dimension n uses
the ring QQ[t, x_1..x_n]; generator 0 is the prism coordinate t = t_1 and is
absent on plain simplices. A dx multi-index is a sorted tuple of generator
indices, so (0,) is dt and (i,) is dx_i.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache

import sympy
from sympy import QQ
from sympy.polys.orderings import lex
from sympy.polys.rings import PolyRing

from core.services import linalg_service
from core.services.errors import InconsistencyError, IncompatibleDataError
from core.services.scalars_service import format_rational, rational

logger = logging.getLogger(__name__)

DEFAULT_ESCALATION = 4


@lru_cache(maxsize=None)
def poly_ring(n: int) -> PolyRing:
    """QQ[t, x_1..x_n] in lex order."""
    return PolyRing(("t",) + tuple(f"x{i}" for i in range(1, n + 1)), QQ, lex)


def _inversions(seq) -> int:
    return sum(1 for a, b in itertools.combinations(seq, 2) if a > b)


def _factorial(n: int):
    return QQ(int(sympy.factorial(n)))


# ─────────────────────────────────────────────────────────────────────────────
# Cells and forms
# ─────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class Cell:
    """Δ_n, or the prism Δ_1×Δ_n when prism is set."""

    n: int
    prism: bool = False

    def __post_init__(self):
        if self.n < 0:
            raise IncompatibleDataError(f"Simplex dimension must be >= 0, got {self.n}")

    @property
    def ring(self) -> PolyRing:
        return poly_ring(self.n)

    @property
    def variables(self) -> tuple[int, ...]:
        """Generator indices that are coordinates of this cell."""
        return ((0,) if self.prism else ()) + tuple(range(1, self.n + 1))

    @property
    def top_degree(self) -> int:
        return self.n + (1 if self.prism else 0)

    def face(self) -> "Cell":
        if self.n == 0:
            raise IncompatibleDataError(f"{self.label} has no faces")
        return Cell(self.n - 1, self.prism)

    @property
    def label(self) -> str:
        return f"Δ1×Δ{self.n}" if self.prism else f"Δ{self.n}"


def _clean(ring: PolyRing, terms: dict) -> dict:
    out = {}
    for dxs, p in terms.items():
        if p:
            out[tuple(dxs)] = p
    return out


class SullivanForm:
    """A polynomial form Σ p_I dx_I on a cell."""

    __slots__ = ("cell", "terms")

    def __init__(self, cell: Cell, terms: dict | None = None):
        self.cell = cell
        self.terms = _clean(cell.ring, terms or {})

    # ── constructors ──────────────────────────────────────────────────────────

    @classmethod
    def zero(cls, cell: Cell) -> "SullivanForm":
        return cls(cell)

    @classmethod
    def const(cls, cell: Cell, c=1) -> "SullivanForm":
        return cls(cell, {(): cell.ring(rational(c))})

    @classmethod
    def from_poly(cls, cell: Cell, p, dxs: tuple = ()) -> "SullivanForm":
        return cls(cell, {tuple(dxs): p})

    @classmethod
    def coordinate(cls, cell: Cell, i: int) -> "SullivanForm":
        """Barycentric coordinate x_i of the simplex factor (x_0 = 1 − Σ x_i)."""
        if not 0 <= i <= cell.n:
            raise IncompatibleDataError(f"Coordinate x{i} out of range on {cell.label}")
        return cls.from_poly(cell, _barycentric(cell.ring, cell.n, i))

    @classmethod
    def t(cls, cell: Cell) -> "SullivanForm":
        if not cell.prism:
            raise IncompatibleDataError(f"{cell.label} has no prism coordinate")
        return cls.from_poly(cell, cell.ring.gens[0])

    def like(self, terms: dict) -> "SullivanForm":
        return SullivanForm(self.cell, terms)

    def _check(self, other: "SullivanForm") -> None:
        if other.cell != self.cell:
            raise IncompatibleDataError(f"Forms live on different cells: {self.cell.label} vs {other.cell.label}")

    # ── arithmetic ────────────────────────────────────────────────────────────

    def __add__(self, other: "SullivanForm") -> "SullivanForm":
        self._check(other)
        out = dict(self.terms)
        for dxs, p in other.terms.items():
            out[dxs] = out[dxs] + p if dxs in out else p
        return self.like(out)

    def __neg__(self) -> "SullivanForm":
        return self.like({dxs: -p for dxs, p in self.terms.items()})

    def __sub__(self, other: "SullivanForm") -> "SullivanForm":
        return self + (-other)

    def scale(self, c) -> "SullivanForm":
        c = rational(c)
        if not c:
            return self.like({})
        return self.like({dxs: p.mul_ground(c) for dxs, p in self.terms.items()})

    def wedge(self, other: "SullivanForm") -> "SullivanForm":
        self._check(other)
        out: dict = {}
        for I, p in self.terms.items():
            for J, q in other.terms.items():
                if set(I) & set(J):
                    continue
                key = tuple(sorted(I + J))
                value = p * q
                if _inversions(I + J) % 2:
                    value = -value
                out[key] = out[key] + value if key in out else value
        return self.like(out)

    def d(self) -> "SullivanForm":
        out: dict = {}
        for I, p in self.terms.items():
            for v in self.cell.variables:
                if v in I:
                    continue
                dp = p.diff(v)
                if not dp:
                    continue
                key = tuple(sorted(I + (v,)))
                if sum(1 for i in I if i < v) % 2:
                    dp = -dp
                out[key] = out[key] + dp if key in out else dp
        return self.like(out)

    def __eq__(self, other):
        if not isinstance(other, SullivanForm):
            return NotImplemented
        return self.cell == other.cell and self.terms == other.terms

    __hash__ = None

    # ── queries ───────────────────────────────────────────────────────────────

    def is_zero(self) -> bool:
        return not self.terms

    def degrees(self) -> set[int]:
        return {len(dxs) for dxs in self.terms}

    def degree_part(self, p: int) -> "SullivanForm":
        return self.like({dxs: q for dxs, q in self.terms.items() if len(dxs) == p})

    def poly_degree(self) -> int:
        """Largest total polynomial degree (0 for the zero form)."""
        return max((sum(m) for p in self.terms.values() for m in p.keys()), default=0)

    def total_degree(self) -> int:
        """Largest polynomial degree plus form degree over the terms."""
        return max((sum(m) + len(dxs) for dxs, p in self.terms.items() for m in p.keys()), default=0)

    def constant_value(self):
        """The value of a 0-form on Δ_0."""
        if self.cell.top_degree != 0:
            raise IncompatibleDataError(f"constant_value needs a point, got {self.cell.label}")
        p = self.terms.get(())
        return p.coeff(1) if p else QQ.zero

    def render(self) -> str:
        if not self.terms:
            return "0"
        names = ["dt"] + [f"dx{i}" for i in range(1, self.cell.n + 1)]
        parts = []
        for dxs in sorted(self.terms, key=lambda I: (len(I), I)):
            poly = str(self.terms[dxs].as_expr())
            if dxs:
                parts.append(f"({poly})*" + "^".join(names[i] for i in dxs))
            else:
                parts.append(f"({poly})")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"SullivanForm[{self.cell.label}]({self.render()})"

    def to_json(self) -> dict:
        names = ["dt"] + [f"dx{i}" for i in range(1, self.cell.n + 1)]
        out = {}
        for dxs in sorted(self.terms, key=lambda I: (len(I), I)):
            key = "*".join(names[i] for i in dxs) or "1"
            out[key] = {
                ",".join(str(e) for e in m): format_rational(c)
                for m, c in sorted(self.terms[dxs].items())
            }
        return out

    @classmethod
    def from_json(cls, cell: Cell, data: dict) -> "SullivanForm":
        """Inverse of to_json; monomial keys list the exponents of (t, x_1..x_n)."""
        ring = cell.ring
        names = {"dt": 0, **{f"dx{i}": i for i in range(1, cell.n + 1)}}
        terms = {}
        for key, poly in data.items():
            dxs = () if key == "1" else tuple(names[name] for name in key.split("*"))
            coeffs = {}
            for mono, c in poly.items():
                exps = tuple(int(e) for e in mono.split(","))
                if len(exps) != ring.ngens:
                    raise IncompatibleDataError(f"Form monomial {mono!r} does not fit {cell.label}")
                coeffs[exps] = rational(c)
            terms[dxs] = ring.from_dict(coeffs)
        return cls(cell, terms)

    @classmethod
    def from_expressions(cls, cell: Cell, data: dict) -> "SullivanForm":
        """
        Build a form from text, e.g. {"1": "x0*x1", "dx0": "1", "dx1*dx2": "x1"}.

        x0 (and t0 on prisms) are eliminated through Σ x_i = 1, dx0 through
        Σ dx_i = 0.

        Raises:
            IncompatibleDataError: unknown symbols or malformed expressions
        """
        ring = cell.ring
        symbols = {f"x{i}": sympy.Symbol(f"x{i}") for i in range(cell.n + 1)}
        symbols.update({"t": sympy.Symbol("t"), "t0": sympy.Symbol("t0")})
        x_rest = sum((symbols[f"x{i}"] for i in range(1, cell.n + 1)), sympy.Integer(0))
        result = cls.zero(cell)
        for key, text in data.items():
            try:
                expr = sympy.sympify(text, locals=symbols)
                expr = expr.subs({symbols["x0"]: 1 - x_rest, symbols["t0"]: 1 - symbols["t"]})
                poly = ring.from_expr(sympy.expand(expr))
            except (sympy.SympifyError, ValueError, TypeError) as exc:
                raise IncompatibleDataError(f"Cannot read form coefficient {text!r}: {exc}") from exc
            term = cls.from_poly(cell, poly)
            if key != "1":
                for name in key.split("*"):
                    term = term.wedge(_named_differential(cell, name))
            result = result + term
        return result


def _barycentric(ring: PolyRing, n: int, i: int):
    if i == 0:
        return ring.one - sum((ring.gens[j] for j in range(1, n + 1)), ring.zero)
    return ring.gens[i]


def _named_differential(cell: Cell, name: str) -> SullivanForm:
    if name == "dt" and cell.prism:
        return SullivanForm(cell, {(0,): cell.ring.one})
    if name == "dt0" and cell.prism:
        return SullivanForm(cell, {(0,): -cell.ring.one})
    if name.startswith("dx"):
        try:
            i = int(name[2:])
        except ValueError as exc:
            raise IncompatibleDataError(f"Unknown differential {name!r}") from exc
        return SullivanForm.coordinate(cell, i).d() if 0 <= i <= cell.n else _bad_differential(cell, name)
    return _bad_differential(cell, name)


def _bad_differential(cell: Cell, name: str):
    raise IncompatibleDataError(f"Unknown differential {name!r} on {cell.label}")


def form_arith(a: SullivanForm, b: SullivanForm | None, op: str) -> SullivanForm:
    """
    Args:
        op: "wedge", "add" or "d" (b is ignored for "d")

    Raises:
        IncompatibleDataError: forms on different cells or unknown op
    """
    if op == "d":
        return a.d()
    if b is None:
        raise IncompatibleDataError(f"Operation {op!r} needs two forms")
    if op == "wedge":
        return a.wedge(b)
    if op == "add":
        return a + b
    raise IncompatibleDataError(f"Unknown form operation {op!r}")


# ─────────────────────────────────────────────────────────────────────────────
# Pullbacks
# ─────────────────────────────────────────────────────────────────────────────

def _pullback(form: SullivanForm, target: Cell, images: list) -> SullivanForm:
    """Substitute generator g by images[g] (a polynomial of the target ring)."""
    ring = target.ring
    one_forms = {}
    for g, image in enumerate(images):
        one_forms[g] = SullivanForm.from_poly(target, image).d()
    powers: dict = {}

    def power(g, e):
        key = (g, e)
        if key not in powers:
            powers[key] = images[g] ** e
        return powers[key]

    result = SullivanForm.zero(target)
    for dxs, p in form.terms.items():
        poly = ring.zero
        for mono, c in p.items():
            term = ring(c)
            for g, e in enumerate(mono):
                if e:
                    term = term * power(g, e)
                    if not term:
                        break
            poly = poly + term
        if not poly:
            continue
        piece = SullivanForm.from_poly(target, poly)
        for g in dxs:
            piece = piece.wedge(one_forms[g])
            if piece.is_zero():
                break
        result = result + piece
    return result


def face_pullback(form: SullivanForm, j: int) -> SullivanForm:
    """
    d*_j: forms on Δ_n (or Δ_1×Δ_n) to forms on the face opposite vertex j.

    In barycentric coordinates x_i ↦ y_i for i < j, x_j ↦ 0 and x_i ↦ y_{i−1}
    for i > j, with y_0 = 1 − Σ y_i.

    Raises:
        IncompatibleDataError: face index out of range
    """
    cell = form.cell
    if not 0 <= j <= cell.n or cell.n == 0:
        raise IncompatibleDataError(f"Face index {j} out of range on {cell.label}")
    target = cell.face()
    ring = target.ring
    images = [ring.gens[0]]
    for i in range(1, cell.n + 1):
        if i < j:
            images.append(_barycentric(ring, target.n, i))
        elif i == j:
            images.append(ring.zero)
        else:
            images.append(_barycentric(ring, target.n, i - 1))
    return _pullback(form, target, images)


def prism_restrict(form: SullivanForm, j: int) -> SullivanForm:
    """
    r*_j: the end t_j = 1 of Δ_1×Δ_n (t = t_1, t_0 = 1 − t).

    Raises:
        IncompatibleDataError: not a prism form or j not in {0, 1}
    """
    cell = form.cell
    if not cell.prism:
        raise IncompatibleDataError(f"{cell.label} is not a prism")
    if j not in (0, 1):
        raise IncompatibleDataError(f"Prism end must be 0 or 1, got {j}")
    target = Cell(cell.n)
    ring = target.ring
    images = [ring.one if j == 1 else ring.zero] + [ring.gens[i] for i in range(1, cell.n + 1)]
    return _pullback(form, target, images)


def face_of_simplex(form: SullivanForm, vertices: tuple) -> SullivanForm:
    """Restrict a simplex form to the sub-face spanned by the given sorted vertices."""
    n = form.cell.n
    missing = [v for v in range(n + 1) if v not in vertices]
    for v in sorted(missing, reverse=True):
        form = face_pullback(form, v)
    return form


def stokes_defect(form: SullivanForm):
    """∫ dω − Σ_j (−1)^j ∫ d*_j ω for an (n−1)-form on Δ_n; zero when Stokes holds."""
    n = form.cell.n
    total = integrate_simplex(form.d().degree_part(n)) if n else QQ.zero
    for j in range(n + 1):
        face = face_pullback(form, j).degree_part(n - 1)
        value = integrate_simplex(face)
        total -= value if j % 2 == 0 else -value
    return total


# ─────────────────────────────────────────────────────────────────────────────
# Integration and Whitney forms
# ─────────────────────────────────────────────────────────────────────────────

def integrate_simplex(form: SullivanForm):
    """
    ∫_{Δ_q} ω for a q-form, with ∫ x^a dx_1…dx_q = Π a_i! / (Σ a_i + q)!.

    Raises:
        IncompatibleDataError: prism forms or components of degree != q
    """
    cell = form.cell
    if cell.prism:
        raise IncompatibleDataError("integrate_simplex expects a simplex form")
    q = cell.n
    wrong = [len(dxs) for dxs in form.terms if len(dxs) != q]
    if wrong:
        raise IncompatibleDataError(f"Cannot integrate a degree {wrong[0]} form over Δ{q}")
    p = form.terms.get(tuple(range(1, q + 1)))
    if not p:
        return QQ.zero
    total = QQ.zero
    for mono, c in p.items():
        a = mono[1:]
        num = QQ.one
        for e in a:
            num *= _factorial(e)
        total += c * num / _factorial(sum(a) + q)
    return total


def integrate_top(form: SullivanForm):
    """∫ of the top-degree part, other degrees ignored."""
    return integrate_simplex(form.degree_part(form.cell.n))


def whitney_form(n: int, vertices: tuple) -> SullivanForm:
    """
    ω_I = r! Σ_k (−1)^k x_{i_k} dx_{i_0}…(omit k)…dx_{i_r} on Δ_n for I = (i_0 < … < i_r).

    ∫ of ω_I over the face I is 1 and it vanishes on the other r-faces.
    """
    cell = Cell(n)
    r = len(vertices) - 1
    if r < 0 or any(not 0 <= v <= n for v in vertices) or list(vertices) != sorted(set(vertices)):
        raise IncompatibleDataError(f"Bad face {vertices} of Δ{n}")
    coords = [SullivanForm.coordinate(cell, v) for v in vertices]
    diffs = [c.d() for c in coords]
    result = SullivanForm.zero(cell)
    for k in range(r + 1):
        term = coords[k]
        for m in range(r + 1):
            if m != k:
                term = term.wedge(diffs[m])
        result = result + (term if k % 2 == 0 else -term)
    return result.scale(_factorial(r))


# ─────────────────────────────────────────────────────────────────────────────
# Linear problems on forms
# ─────────────────────────────────────────────────────────────────────────────

def _monomials(cell: Cell, max_degree: int) -> list[tuple]:
    variables = cell.variables
    out = []
    for total in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(variables, total):
            exps = [0] * (cell.n + 1)
            for v in combo:
                exps[v] += 1
            out.append(tuple(exps))
    return out


def basis_forms(cell: Cell, p: int, max_degree: int) -> list[SullivanForm]:
    ring = cell.ring
    out = []
    for dxs in itertools.combinations(cell.variables, p):
        for mono in _monomials(cell, max_degree):
            out.append(SullivanForm(cell, {dxs: ring.from_dict({mono: QQ.one})}))
    return out


def _boundary_maps(cell: Cell) -> list:
    maps = [lambda form, j=j: face_pullback(form, j) for j in range(cell.n + 1)] if cell.n else []
    if cell.prism:
        maps += [lambda form: prism_restrict(form, 0), lambda form: prism_restrict(form, 1)]
    return maps


def _coordinates(images: list[SullivanForm], rows: dict, grow: bool) -> dict | None:
    vec = {}
    for c, form in enumerate(images):
        for dxs, p in form.terms.items():
            for mono, coeff in p.items():
                key = (c, dxs, mono)
                if key not in rows:
                    if not grow:
                        return None
                    rows[key] = len(rows)
                vec[rows[key]] = coeff
    return vec


@dataclass
class _FormSystem:
    basis: list
    rows: dict
    solver: linalg_service.LinearSolver


@lru_cache(maxsize=256)
def _system(cell: Cell, p: int, max_degree: int, kind: str) -> _FormSystem:
    """Linear map from the degree-(p, ≤max_degree) ansatz to its constraint images."""
    basis = basis_forms(cell, p, max_degree)
    maps = _boundary_maps(cell)
    if kind == "primitive":
        maps = [lambda form: form.d()] + maps
    rows: dict = {}
    columns = [_coordinates([m(b) for m in maps], rows, grow=True) for b in basis]
    solver = linalg_service.LinearSolver(columns, len(rows))
    logger.debug(f"Form system {kind} on {cell.label}: degree {p}, poly degree <= {max_degree}, {len(basis)} unknowns")
    return _FormSystem(basis=basis, rows=rows, solver=solver)


def _solve_system(cell: Cell, p: int, targets: list[SullivanForm], kind: str, start: int, escalation: int):
    for degree in range(start, start + escalation + 1):
        system = _system(cell, p, degree, kind)
        vec = _coordinates(targets, system.rows, grow=False)
        if vec is None:
            continue
        solution = system.solver.solve(vec)
        if solution is None:
            continue
        result = SullivanForm.zero(cell)
        for j, c in solution.items():
            result = result + system.basis[j].scale(c)
        return result
    return None


def check_boundary_data(cell: Cell, faces: list, ends: tuple | None = None) -> None:
    """
    Face-compatibility of boundary data.

    Raises:
        IncompatibleDataError: naming the first incompatible pair
    """
    if cell.n and len(faces) != cell.n + 1:
        raise IncompatibleDataError(f"{cell.label} needs {cell.n + 1} faces, got {len(faces)}")
    face_cell = cell.face() if cell.n else None
    for j, form in enumerate(faces):
        if form.cell != face_cell:
            raise IncompatibleDataError(f"Face {j} lives on {form.cell.label}, expected {face_cell.label}")
    if cell.n >= 2:
        for i, j in itertools.combinations(range(cell.n + 1), 2):
            if face_pullback(faces[j], i) != face_pullback(faces[i], j - 1):
                raise IncompatibleDataError(f"Boundary data incompatible on faces ({i}, {j})")
    if cell.prism:
        if ends is None or len(ends) != 2:
            raise IncompatibleDataError("Prism data needs both end forms")
        for e, beta in enumerate(ends):
            if beta.cell != Cell(cell.n):
                raise IncompatibleDataError(f"End {e} lives on {beta.cell.label}, expected Δ{cell.n}")
            for j, alpha in enumerate(faces):
                if prism_restrict(alpha, e) != face_pullback(beta, j):
                    raise IncompatibleDataError(f"End {e} incompatible with face {j}")


def extend_from_boundary(
    cell: Cell,
    faces: list,
    ends: tuple | None = None,
    escalation: int = DEFAULT_ESCALATION,
) -> SullivanForm:
    """
    A form on the cell restricting to the given faces (and prism ends).

    The ansatz starts at the largest polynomial degree in the data and grows by
    one up to `escalation` times; the solution with every free coordinate 0 is
    returned, so the output is deterministic.

    Raises:
        IncompatibleDataError: boundary data not face-compatible
        InconsistencyError: no polynomial extension within the escalation range
    """
    check_boundary_data(cell, faces, ends)
    targets = list(faces) + (list(ends) if cell.prism else [])
    if not targets:
        return SullivanForm.zero(cell)
    degrees = set()
    for form in targets:
        degrees |= form.degrees()
    start = max(form.poly_degree() for form in targets)
    result = SullivanForm.zero(cell)
    for p in sorted(degrees):
        parts = [form.degree_part(p) for form in targets]
        piece = _solve_system(cell, p, parts, "boundary", start, escalation)
        if piece is None:
            raise InconsistencyError(
                f"No polynomial extension of degree {p} data on {cell.label} up to degree {start + escalation}"
            )
        result = result + piece
    return result


def relative_primitive(form: SullivanForm, escalation: int = DEFAULT_ESCALATION) -> SullivanForm | None:
    """
    η with dη = ω and η vanishing on every face (and prism end).

    Returns None when no such polynomial primitive exists in range (for a
    top-degree ω on Δ_n this happens exactly when ∫ω ≠ 0).

    Raises:
        IncompatibleDataError: ω not closed or not vanishing on the boundary
    """
    cell = form.cell
    if not form.d().is_zero():
        raise IncompatibleDataError("Relative primitive requested for a non-closed form")
    maps = _boundary_maps(cell)
    if any(not m(form).is_zero() for m in maps):
        raise IncompatibleDataError("Relative primitive requested for a form not vanishing on the boundary")
    if form.is_zero():
        return SullivanForm.zero(cell)
    result = SullivanForm.zero(cell)
    for p in sorted(form.degrees()):
        if p == 0:
            return None
        target = form.degree_part(p)
        zeros = [SullivanForm.zero(cell.face()) for _ in range(cell.n + 1)] if cell.n else []
        if cell.prism:
            zeros += [SullivanForm.zero(Cell(cell.n)), SullivanForm.zero(Cell(cell.n))]
        start = max(target.poly_degree() + 1, 1)
        piece = _solve_system(cell, p - 1, [target] + zeros, "primitive", start, escalation)
        if piece is None:
            return None
        result = result + piece
    return result


# ─────────────────────────────────────────────────────────────────────────────
# Vector-valued forms and the lifting lemma
# ─────────────────────────────────────────────────────────────────────────────

def vform_add(a: dict, b: dict, scale=QQ.one) -> dict:
    """Sum of {key: SullivanForm} families."""
    out = dict(a)
    for key, form in b.items():
        term = form.scale(scale) if scale != QQ.one else form
        out[key] = out[key] + term if key in out else term
        if out[key].is_zero():
            del out[key]
    return out


def vform_map(linear: dict, v: dict) -> dict:
    """Apply a linear map {source key: {target key: rational}} coefficientwise."""
    out: dict = {}
    for key, form in v.items():
        for target, c in linear.get(key, {}).items():
            out = vform_add(out, {target: form}, c)
    return out


def vform_face(v: dict, j: int) -> dict:
    out = {}
    for key, form in v.items():
        face = face_pullback(form, j)
        if not face.is_zero():
            out[key] = face
    return out


def vform_equal(a: dict, b: dict) -> bool:
    return not vform_add(a, b, -QQ.one)


def vform_end(v: dict, j: int) -> dict:
    out = {}
    for key, form in v.items():
        end = prism_restrict(form, j)
        if not end.is_zero():
            out[key] = end
    return out


def vform_extend(
    cell: Cell,
    faces: list,
    ends: tuple | None = None,
    escalation: int = DEFAULT_ESCALATION,
) -> dict:
    """extend_from_boundary applied key by key to {key: SullivanForm} families."""
    ends = tuple(ends) if ends is not None else None
    keys = {key for face_data in faces for key in face_data}
    if ends is not None:
        keys |= {key for end_data in ends for key in end_data}
    out = {}
    for key in sorted(keys, key=repr):
        face_forms = [face_data.get(key, SullivanForm.zero(cell.face())) for face_data in faces]
        end_forms = None
        if ends is not None:
            end_forms = tuple(end_data.get(key, SullivanForm.zero(Cell(cell.n))) for end_data in ends)
        form = extend_from_boundary(cell, face_forms, end_forms, escalation)
        if not form.is_zero():
            out[key] = form
    return out


def constrained_lift(
    cell: Cell,
    rho: dict,
    w: dict,
    boundary: list,
    ends: tuple | None = None,
    escalation: int = DEFAULT_ESCALATION,
) -> dict:
    """
    The lifting lemma: v with v|_∂ = ∂v and ρ(v) = w.

    Args:
        cell: a simplex Δ_l or a prism Δ_1×Δ_l
        rho: the surjection F → H as {f key: {h key: rational}}
        w: H-valued form on the cell, {h key: SullivanForm}
        boundary: per face j, the F-valued form {f key: SullivanForm} on the
            face (empty for l = 0)
        ends: on a prism, the F-valued forms at t = 0 and t = 1

    Raises:
        IncompatibleDataError: ρ not surjective, or ρ(∂v) ≠ w|_∂
    """
    f_keys = sorted(rho, key=repr)
    h_keys = sorted({h for image in rho.values() for h in image} | set(w), key=repr)
    h_index = {h: i for i, h in enumerate(h_keys)}
    columns = [{h_index[h]: c for h, c in rho[f].items() if c} for f in f_keys]
    solver = linalg_service.LinearSolver(columns, len(h_keys))
    if solver.rank < len(h_keys):
        raise IncompatibleDataError(f"ρ is not surjective: rank {solver.rank} < {len(h_keys)}")
    section = {}
    for h, i in h_index.items():
        sol = solver.solve({i: QQ.one})
        section[h] = {f_keys[j]: c for j, c in sol.items()}

    for j, face_data in enumerate(boundary):
        if not vform_equal(vform_map(rho, face_data), vform_face(w, j)):
            raise IncompatibleDataError(f"ρ(∂v) differs from w on face {j}")
    if ends is not None:
        for e, end_data in enumerate(ends):
            if not vform_equal(vform_map(rho, end_data), vform_end(w, e)):
                raise IncompatibleDataError(f"ρ(v) differs from w at prism end {e}")

    base = vform_extend(cell, boundary, ends, escalation) if boundary or ends else {}
    residual = vform_add(w, vform_map(rho, base), -QQ.one)
    return vform_add(base, vform_map(section, residual))
