"""
graded_service.py — Tabulated graded algebras, their elements and axiom checks.

Responsible for:
- AlgebraTable: a finite bigraded basis with sparse structure tensors for
  the product, bracket, ∂̄ and Δ, plus an optional de Rham module part
- Element / ModuleElement: sparse coordinates over the truncated ring
- evaluate(): a small expression evaluator over elements
- bracket_from_bv(): the bracket induced by Δ
- check_axioms(): BV, dgLa, dgBV, almost dgBV and de Rham module identities
- table_complex() / cohomology_basis(): a table as a complex under ∂̄, Δ or
  ∂̄+Δ and its exact cohomology

Coordinates are flat dicts {(basis index, monomial): rational}. Tensor entries
are tuples (target index, monomial, rational) meaning coefficient * q^monomial
times the target basis vector. Ring scalars are even, so every Koszul sign
lives in the tensors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from sympy import QQ

from core.dtos import AxiomKind, CheckReport
from core.services import linalg_service
from core.services.errors import IncompatibleDataError, TruncationMismatchError
from core.services.scalars_service import (
    ArtinRing,
    ArtinSeries,
    format_rational,
    mono_mul,
    mono_sort_key,
    mono_weight,
    rational,
)

logger = logging.getLogger(__name__)

ZERO = QQ.zero
ONE = QQ.one


def sign(n: int) -> int:
    return -1 if n % 2 else 1


# ─────────────────────────────────────────────────────────────────────────────
# Flat coordinate arithmetic
# ─────────────────────────────────────────────────────────────────────────────

def accumulate(out: dict, key, c) -> None:
    v = out.get(key, ZERO) + c
    if v:
        out[key] = v
    else:
        out.pop(key, None)


def coords_add(a: dict, b: dict, scale=ONE) -> dict:
    out = dict(a)
    for key, c in b.items():
        accumulate(out, key, scale * c)
    return out


def coords_scale(a: dict, c) -> dict:
    c = rational(c)
    if not c:
        return {}
    return {key: v * c for key, v in a.items()}


def coords_mul_series(a: dict, series: ArtinSeries, k: int) -> dict:
    """Multiply coordinates {(i, mono): c} by a ring element."""
    out: dict = {}
    for (i, m), c in a.items():
        w = sum(m)
        for m2, c2 in series.terms.items():
            if w + sum(m2) > k:
                continue
            accumulate(out, (i, mono_mul(m, m2)), c * c2)
    return out


def apply_unary(op: dict, coords: dict, k: int) -> dict:
    out: dict = {}
    for (i, m), c in coords.items():
        entries = op.get(i)
        if not entries:
            continue
        w = sum(m)
        for j, m2, c2 in entries:
            if w + sum(m2) > k:
                continue
            accumulate(out, (j, mono_mul(m, m2)), c * c2)
    return out


def apply_binary(tensor: dict, a: dict, b: dict, k: int) -> dict:
    out: dict = {}
    for (i, m1), c1 in a.items():
        w1 = sum(m1)
        for (j, m2), c2 in b.items():
            entries = tensor.get((i, j))
            if not entries:
                continue
            w12 = w1 + sum(m2)
            if w12 > k:
                continue
            m12 = mono_mul(m1, m2)
            c12 = c1 * c2
            for l, m3, c3 in entries:
                if w12 + sum(m3) > k:
                    continue
                accumulate(out, (l, mono_mul(m12, m3)), c12 * c3)
    return out


def entries_from_coords(coords: dict) -> tuple:
    """Turn {(j, mono): c} into a sorted tensor entry tuple."""
    return tuple(
        (j, m, c) for (j, m), c in sorted(coords.items(), key=lambda item: (item[0][0], mono_sort_key(item[0][1])))
    )


def truncate_coords(coords: dict, max_weight: int) -> dict:
    return {key: c for key, c in coords.items() if sum(key[1]) <= max_weight}


# ─────────────────────────────────────────────────────────────────────────────
# Tables
# ─────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True, eq=False)
class ModuleStructure:
    """
    A de Rham module over the table: basis, contraction φ⌟, the differential ∂,
    an optional ∂̄, wedge operators by base forms and the volume element.
    """

    labels: tuple
    degrees: tuple
    contraction: dict                    # (algebra index, module index) -> entries
    d: dict                              # module index -> entries
    dbar: dict | None = None
    base_forms: dict = field(default_factory=dict)   # name -> (degree, {index: entries})
    volume: int = 0

    @property
    def dimension(self) -> int:
        return len(self.labels)


@dataclass(frozen=True, eq=False)
class AlgebraTable:
    """A finite graded algebra over R_k with tabulated structure maps."""

    ring: ArtinRing
    labels: tuple
    bidegrees: tuple
    unit: int
    product: dict
    bracket: dict | None = None
    pdb: dict | None = None
    delta: dict | None = None
    module: ModuleStructure | None = None
    name: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if len(self.labels) != len(self.bidegrees):
            raise IncompatibleDataError("One bidegree per basis label is required")
        if len(set(self.labels)) != len(self.labels):
            raise IncompatibleDataError("Basis labels must be distinct")
        if not 0 <= self.unit < len(self.labels):
            raise IncompatibleDataError(f"Unit index {self.unit} out of range")

    @property
    def dimension(self) -> int:
        return len(self.labels)

    def degree(self, i: int) -> int:
        p, q = self.bidegrees[i]
        return p + q

    def index(self, label) -> int:
        if isinstance(label, int):
            return label
        try:
            return self.labels.index(label)
        except ValueError as exc:
            raise IncompatibleDataError(f"Unknown basis label {label!r}") from exc

    def mono_degree(self, m: tuple) -> int:
        s = self.ring.s
        return sum(e * d for e, d in zip(m[s:], self.ring.param_degrees))

    def indices_of_bidegree(self, p: int, q: int) -> list[int]:
        return [i for i, bd in enumerate(self.bidegrees) if bd == (p, q)]

    def derived_bracket(self) -> dict:
        """Declared bracket, else the one induced by Δ."""
        if self.bracket is not None:
            return self.bracket
        if "bracket" not in self._cache:
            if self.delta is None:
                raise IncompatibleDataError(f"Table {self.name!r} has neither a bracket nor Δ")
            self._cache["bracket"] = bracket_from_bv(self)
        return self._cache["bracket"]

    def over(self, ring: ArtinRing) -> "AlgebraTable":
        """
        The same table over another truncation or with appended parameters.

        Raises:
            TruncationMismatchError: if the rings are not related by truncation
                or by appending parameters
        """
        if ring == self.ring:
            return self
        if ring in self._cache:
            return self._cache[ring]
        src = self.ring
        if ring.s != src.s or ring.params[: len(src.params)] != src.params:
            raise TruncationMismatchError(f"Cannot move table {self.name!r} to an unrelated ring")
        pad = (0,) * (len(ring.params) - len(src.params))
        k = ring.k

        def move(entries):
            out = []
            for j, m, c in entries:
                if sum(m) <= k:
                    out.append((j, tuple(m) + pad, c))
            return tuple(out)

        def move_tensor(tensor):
            if tensor is None:
                return None
            return {key: move(entries) for key, entries in tensor.items()}

        module = None
        if self.module is not None:
            mod = self.module
            module = ModuleStructure(
                labels=mod.labels,
                degrees=mod.degrees,
                contraction=move_tensor(mod.contraction),
                d=move_tensor(mod.d),
                dbar=move_tensor(mod.dbar),
                base_forms={name: (deg, move_tensor(op)) for name, (deg, op) in mod.base_forms.items()},
                volume=mod.volume,
            )
        moved = AlgebraTable(
            ring=ring,
            labels=self.labels,
            bidegrees=self.bidegrees,
            unit=self.unit,
            product=move_tensor(self.product),
            bracket=move_tensor(self.bracket) if self.bracket is not None else None,
            pdb=move_tensor(self.pdb),
            delta=move_tensor(self.delta),
            module=module,
            name=self.name,
        )
        if self.bracket is None and "bracket" in self._cache:
            moved._cache["bracket"] = move_tensor(self._cache["bracket"])
        self._cache[ring] = moved
        return moved

    def basis_element(self, label, c=1) -> "Element":
        return Element(self, {(self.index(label), self.ring.zero_mono): rational(c)})

    def one(self) -> "Element":
        return self.basis_element(self.unit)

    def zero(self) -> "Element":
        return Element(self, {})


# ─────────────────────────────────────────────────────────────────────────────
# Elements
# ─────────────────────────────────────────────────────────────────────────────

class Element:
    """A sparse element of an AlgebraTable."""

    __slots__ = ("table", "coords")

    def __init__(self, table: AlgebraTable, coords: dict | None = None):
        self.table = table
        k = table.ring.k
        self.coords = {key: c for key, c in (coords or {}).items() if c and sum(key[1]) <= k}

    @classmethod
    def from_series(cls, table: AlgebraTable, values: dict) -> "Element":
        """values: {label or index: ArtinSeries or rational}."""
        coords: dict = {}
        for label, value in values.items():
            i = table.index(label)
            if not isinstance(value, ArtinSeries):
                value = ArtinSeries.const(table.ring, value)
            if value.ring != table.ring:
                raise TruncationMismatchError("Series ring differs from the table ring")
            for m, c in value.terms.items():
                accumulate(coords, (i, m), c)
        return cls(table, coords)

    def like(self, coords: dict) -> "Element":
        return Element(self.table, coords)

    def _check(self, other: "Element") -> None:
        if other.table is not self.table:
            raise IncompatibleDataError("Elements belong to different tables")

    # ── arithmetic ────────────────────────────────────────────────────────────

    def __add__(self, other: "Element") -> "Element":
        self._check(other)
        return self.like(coords_add(self.coords, other.coords))

    def __sub__(self, other: "Element") -> "Element":
        self._check(other)
        return self.like(coords_add(self.coords, other.coords, -ONE))

    def __neg__(self) -> "Element":
        return self.like({key: -c for key, c in self.coords.items()})

    def scale(self, c) -> "Element":
        if isinstance(c, ArtinSeries):
            return self.like(coords_mul_series(self.coords, c, self.table.ring.k))
        return self.like(coords_scale(self.coords, c))

    def wedge(self, other: "Element") -> "Element":
        self._check(other)
        return self.like(apply_binary(self.table.product, self.coords, other.coords, self.table.ring.k))

    def bracket(self, other: "Element") -> "Element":
        self._check(other)
        return self.like(apply_binary(self.table.derived_bracket(), self.coords, other.coords, self.table.ring.k))

    def pdb(self) -> "Element":
        if self.table.pdb is None:
            raise IncompatibleDataError(f"Table {self.table.name!r} declares no ∂̄")
        return self.like(apply_unary(self.table.pdb, self.coords, self.table.ring.k))

    def delta(self) -> "Element":
        if self.table.delta is None:
            raise IncompatibleDataError(f"Table {self.table.name!r} declares no Δ")
        return self.like(apply_unary(self.table.delta, self.coords, self.table.ring.k))

    def __eq__(self, other):
        if not isinstance(other, Element):
            return NotImplemented
        return self.table is other.table and self.coords == other.coords

    __hash__ = None

    # ── queries ───────────────────────────────────────────────────────────────

    def term_count(self) -> int:
        return len(self.coords)

    def is_zero(self) -> bool:
        return not self.coords

    def order(self) -> int | None:
        if not self.coords:
            return None
        return min(sum(m) for (_, m) in self.coords)

    def degrees(self) -> set[int]:
        t = self.table
        return {t.degree(i) + t.mono_degree(m) for (i, m) in self.coords}

    def bidegree_part(self, p: int, q: int) -> "Element":
        bd = self.table.bidegrees
        return self.like({key: c for key, c in self.coords.items() if bd[key[0]] == (p, q)})

    def weight_part(self, w: int) -> "Element":
        return self.like({key: c for key, c in self.coords.items() if sum(key[1]) == w})

    def truncate(self, max_weight: int) -> "Element":
        return self.like(truncate_coords(self.coords, max_weight))

    def restrict(self, l: int) -> "Element":
        """The image under r^{k,l}, living on the restricted table."""
        if l > self.table.ring.k or l < 0:
            raise TruncationMismatchError(f"Cannot restrict from order {self.table.ring.k} to {l}")
        table = self.table.over(self.table.ring.restrict(l))
        return Element(table, truncate_coords(self.coords, l))

    def series(self, label) -> ArtinSeries:
        i = self.table.index(label)
        return ArtinSeries(self.table.ring, {m: c for (j, m), c in self.coords.items() if j == i})

    def render(self) -> str:
        if not self.coords:
            return "0"
        parts = []
        for i in sorted({i for (i, _) in self.coords}):
            parts.append(f"({self.series(i).render()})*{self.table.labels[i]}")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"Element({self.render()})"


class ModuleElement:
    """A sparse element of the de Rham module attached to a table."""

    __slots__ = ("table", "coords")

    def __init__(self, table: AlgebraTable, coords: dict | None = None):
        if table.module is None:
            raise IncompatibleDataError(f"Table {table.name!r} has no module part")
        self.table = table
        k = table.ring.k
        self.coords = {key: c for key, c in (coords or {}).items() if c and sum(key[1]) <= k}

    @classmethod
    def basis(cls, table: AlgebraTable, a: int, c=1) -> "ModuleElement":
        return cls(table, {(a, table.ring.zero_mono): rational(c)})

    @classmethod
    def volume(cls, table: AlgebraTable) -> "ModuleElement":
        return cls.basis(table, table.module.volume)

    def like(self, coords: dict) -> "ModuleElement":
        return ModuleElement(self.table, coords)

    def __add__(self, other):
        return self.like(coords_add(self.coords, other.coords))

    def __sub__(self, other):
        return self.like(coords_add(self.coords, other.coords, -ONE))

    def __neg__(self):
        return self.like({key: -c for key, c in self.coords.items()})

    def scale(self, c) -> "ModuleElement":
        if isinstance(c, ArtinSeries):
            return self.like(coords_mul_series(self.coords, c, self.table.ring.k))
        return self.like(coords_scale(self.coords, c))

    def d(self) -> "ModuleElement":
        return self.like(apply_unary(self.table.module.d, self.coords, self.table.ring.k))

    def dbar(self) -> "ModuleElement":
        if self.table.module.dbar is None:
            raise IncompatibleDataError("Module declares no ∂̄")
        return self.like(apply_unary(self.table.module.dbar, self.coords, self.table.ring.k))

    def base_wedge(self, name: str) -> "ModuleElement":
        try:
            _, op = self.table.module.base_forms[name]
        except KeyError as exc:
            raise IncompatibleDataError(f"Unknown base form {name!r}") from exc
        return self.like(apply_unary(op, self.coords, self.table.ring.k))

    def __eq__(self, other):
        if not isinstance(other, ModuleElement):
            return NotImplemented
        return self.table is other.table and self.coords == other.coords

    __hash__ = None

    def is_zero(self) -> bool:
        return not self.coords

    def render(self) -> str:
        if not self.coords:
            return "0"
        labels = self.table.module.labels
        parts = []
        for a in sorted({a for (a, _) in self.coords}):
            series = ArtinSeries(self.table.ring, {m: c for (b, m), c in self.coords.items() if b == a})
            parts.append(f"({series.render()})*{labels[a]}")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"ModuleElement({self.render()})"


def contract(v: Element, m: ModuleElement) -> ModuleElement:
    """v⌟m."""
    if v.table is not m.table:
        raise IncompatibleDataError("Contraction operands belong to different tables")
    return m.like(apply_binary(v.table.module.contraction, v.coords, m.coords, v.table.ring.k))


def lie_derivative(v: Element, m: ModuleElement) -> ModuleElement:
    """𝓛_v = (−1)^{|v|} [∂, v⌟] for homogeneous v."""
    deg = _homogeneous_degree(v)
    inner = contract(v, m).d() - contract(v, m.d()).scale(sign(deg))
    return inner.scale(sign(deg))


def _homogeneous_degree(v: Element) -> int:
    degs = v.degrees()
    if len(degs) > 1:
        raise IncompatibleDataError(f"Element {v.render()} is not homogeneous: degrees {sorted(degs)}")
    return degs.pop() if degs else 0


# ─────────────────────────────────────────────────────────────────────────────
# Expression evaluation
# ─────────────────────────────────────────────────────────────────────────────

def evaluate(expr):
    """
    Evaluate a nested-tuple expression.

    Leaves are Element / ModuleElement values. Nodes:
        ("add", a, b), ("sub", a, b), ("neg", a), ("scale", c, a),
        ("wedge", a, b), ("bracket", a, b), ("pdb", a), ("delta", a),
        ("contract", a, m), ("d", m), ("lie", a, m)

    Raises:
        IncompatibleDataError: table mismatch, unknown node or degree mismatch in a sum
    """
    if isinstance(expr, (Element, ModuleElement)):
        return expr
    if not isinstance(expr, tuple) or not expr:
        raise IncompatibleDataError(f"Cannot evaluate {expr!r}")
    head, *args = expr
    if head == "scale":
        return evaluate(args[1]).scale(args[0])
    vals = [evaluate(a) for a in args]
    if head in ("add", "sub"):
        a, b = vals
        if isinstance(a, Element) and isinstance(b, Element):
            da, db = a.degrees(), b.degrees()
            if len(da) == 1 and len(db) == 1 and da != db:
                raise IncompatibleDataError(f"Cannot add elements of degrees {da.pop()} and {db.pop()}")
        return a + b if head == "add" else a - b
    if head == "neg":
        return -vals[0]
    if head == "wedge":
        return vals[0].wedge(vals[1])
    if head == "bracket":
        return vals[0].bracket(vals[1])
    if head == "pdb":
        return vals[0].pdb()
    if head == "delta":
        return vals[0].delta()
    if head == "contract":
        return contract(vals[0], vals[1])
    if head == "d":
        return vals[0].d()
    if head == "lie":
        return lie_derivative(vals[0], vals[1])
    raise IncompatibleDataError(f"Unknown expression node {head!r}")


# ─────────────────────────────────────────────────────────────────────────────
# Bracket from Δ
# ─────────────────────────────────────────────────────────────────────────────

def bracket_from_bv(table: AlgebraTable) -> dict:
    """
    [v, w] = (−1)^{|v|} δ_v(w) with δ_v(w) = Δ(vw) − Δ(v)w − (−1)^{|v|} vΔ(w).

    Raises:
        IncompatibleDataError: missing Δ or Δ(1) != 0
    """
    if table.delta is None:
        raise IncompatibleDataError(f"Table {table.name!r} declares no Δ")
    k = table.ring.k
    zero = table.ring.zero_mono
    if apply_unary(table.delta, {(table.unit, zero): ONE}, k):
        raise IncompatibleDataError("Δ(1) != 0, no bracket is induced")
    out = {}
    for i in range(table.dimension):
        ei = {(i, zero): ONE}
        di = apply_unary(table.delta, ei, k)
        si = sign(table.degree(i))
        for j in range(table.dimension):
            ej = {(j, zero): ONE}
            vw = apply_binary(table.product, ei, ej, k)
            value = apply_unary(table.delta, vw, k)
            value = coords_add(value, apply_binary(table.product, di, ej, k), -ONE)
            dj = apply_unary(table.delta, ej, k)
            value = coords_add(value, apply_binary(table.product, ei, dj, k), QQ(-si))
            value = coords_scale(value, si)
            if value:
                out[(i, j)] = entries_from_coords(value)
    return out


# ─────────────────────────────────────────────────────────────────────────────
# Axiom checks
# ─────────────────────────────────────────────────────────────────────────────

class _Checker:
    """Brute-force identity checks on basis tuples; multilinearity does the rest."""

    def __init__(self, table: AlgebraTable, report: CheckReport):
        self.t = table
        self.k = table.ring.k
        self.zero = table.ring.zero_mono
        self.report = report
        self.n = table.dimension

    def e(self, i: int) -> dict:
        return {(i, self.zero): ONE}

    def deg(self, i: int) -> int:
        return self.t.degree(i)

    def mul(self, a, b):
        return apply_binary(self.t.product, a, b, self.k)

    def br(self, a, b):
        return apply_binary(self.t.derived_bracket(), a, b, self.k)

    def op(self, tensor, a):
        return apply_unary(tensor, a, self.k)

    def render(self, coords: dict) -> str:
        return Element(self.t, coords).render()

    def names(self, *idx) -> str:
        return ",".join(self.t.labels[i] for i in idx)

    def expect(self, name: str, cases, detail: str = "") -> None:
        """cases yields (witness label, lhs, rhs); the first mismatch is the witness."""
        for label, lhs, rhs in cases:
            if lhs != rhs:
                diff = coords_add(lhs, rhs, -ONE)
                self.report.add(name, False, witness=f"({label}): difference {self.render(diff)}", detail=detail)
                return
        self.report.add(name, True, detail=detail)

    # ── product and BV ────────────────────────────────────────────────────────

    def degrees_respected(self, name: str, tensor: dict, shift: int, arity: int) -> None:
        t = self.t
        for key, entries in tensor.items():
            idx = key if arity == 2 else (key,)
            expected = sum(t.degree(i) for i in idx) + shift
            for j, m, _ in entries:
                if t.degree(j) + t.mono_degree(m) != expected:
                    self.report.add(name, False, witness=f"({self.names(*idx)}) -> {t.labels[j]}")
                    return
        self.report.add(name, True)

    def product_axioms(self) -> None:
        u = self.t.unit
        self.degrees_respected("product_degree", self.t.product, 0, 2)
        self.expect("unit", (
            (self.names(j), self.mul(self.e(u), self.e(j)), self.e(j)) for j in range(self.n)
        ))
        self.expect("unit_right", (
            (self.names(j), self.mul(self.e(j), self.e(u)), self.e(j)) for j in range(self.n)
        ))
        self.expect("graded_commutativity", (
            (self.names(i, j), self.mul(self.e(i), self.e(j)),
             coords_scale(self.mul(self.e(j), self.e(i)), sign(self.deg(i) * self.deg(j))))
            for i in range(self.n) for j in range(self.n)
        ))
        self.expect("associativity", (
            (self.names(i, j, l), self.mul(self.mul(self.e(i), self.e(j)), self.e(l)),
             self.mul(self.e(i), self.mul(self.e(j), self.e(l))))
            for i in range(self.n) for j in range(self.n) for l in range(self.n)
        ))

    def bv_axioms(self) -> None:
        t = self.t
        self.product_axioms()
        self.degrees_respected("delta_degree", t.delta, 1, 1)
        self.expect("delta_unit", [("1", self.op(t.delta, self.e(t.unit)), {})])
        self.expect("delta_square", (
            (self.names(i), self.op(t.delta, self.op(t.delta, self.e(i))), {}) for i in range(self.n)
        ))
        if self.report.results and not self.report.result("delta_unit").passed:
            return
        self.expect("delta_second_order", (
            (self.names(i, j, l), self.br(self.e(i), self.mul(self.e(j), self.e(l))),
             coords_add(
                 self.mul(self.br(self.e(i), self.e(j)), self.e(l)),
                 self.mul(self.e(j), self.br(self.e(i), self.e(l))),
                 QQ(sign((self.deg(i) + 1) * self.deg(j))),
             ))
            for i in range(self.n) for j in range(self.n) for l in range(self.n)
        ), detail="[u, vw] = [u,v]w + (−1)^{(|u|+1)|v|} v[u,w]")
        if t.bracket is not None:
            derived = bracket_from_bv(t)
            self.expect("bracket_agrees_with_delta", (
                (self.names(i, j), apply_binary(t.bracket, self.e(i), self.e(j), self.k),
                 apply_binary(derived, self.e(i), self.e(j), self.k))
                for i in range(self.n) for j in range(self.n)
            ))

    # ── dgLa ──────────────────────────────────────────────────────────────────

    def dgla_axioms(self) -> None:
        n, e, br = self.n, self.e, self.br
        self.expect("bracket_antisymmetry", (
            (self.names(i, j), br(e(i), e(j)),
             coords_scale(br(e(j), e(i)), -sign((self.deg(i) + 1) * (self.deg(j) + 1))))
            for i in range(n) for j in range(n)
        ))
        self.expect("jacobi", (
            (self.names(i, j, l), br(e(i), br(e(j), e(l))),
             coords_add(br(br(e(i), e(j)), e(l)), br(e(j), br(e(i), e(l))),
                        QQ(sign((self.deg(i) + 1) * (self.deg(j) + 1)))))
            for i in range(n) for j in range(n) for l in range(n)
        ))
        self.pdb_square(exact=True)
        pdb = self.t.pdb
        self.expect("pdb_leibniz_bracket", (
            (self.names(i, j), self.op(pdb, br(e(i), e(j))),
             coords_add(br(self.op(pdb, e(i)), e(j)), br(e(i), self.op(pdb, e(j))), QQ(sign(self.deg(i) + 1))))
            for i in range(n) for j in range(n)
        ))

    # ── ∂̄ ────────────────────────────────────────────────────────────────────

    def pdb_square(self, exact: bool, modulus: int = 0) -> None:
        pdb = self.t.pdb
        name = "pdb_square" if exact else f"pdb_square_mod_m{modulus + 1}"

        def value(i):
            out = self.op(pdb, self.op(pdb, self.e(i)))
            return out if exact else truncate_coords(out, modulus)

        self.expect(name, ((self.names(i), value(i), {}) for i in range(self.n)))

    def pdb_delta(self, exact: bool, modulus: int = 0) -> None:
        pdb, delta = self.t.pdb, self.t.delta
        name = "pdb_delta_anticommute" if exact else f"pdb_delta_anticommute_mod_m{modulus + 1}"

        def value(i):
            out = coords_add(self.op(pdb, self.op(delta, self.e(i))), self.op(delta, self.op(pdb, self.e(i))))
            return out if exact else truncate_coords(out, modulus)

        self.expect(name, ((self.names(i), value(i), {}) for i in range(self.n)))

    def pdb_leibniz_product(self) -> None:
        pdb, e = self.t.pdb, self.e
        self.degrees_respected("pdb_degree", pdb, 1, 1)
        self.expect("pdb_leibniz_product", (
            (self.names(i, j), self.op(pdb, self.mul(e(i), e(j))),
             coords_add(self.mul(self.op(pdb, e(i)), e(j)), self.mul(e(i), self.op(pdb, e(j))), QQ(sign(self.deg(i)))))
            for i in range(self.n) for j in range(self.n)
        ))

    # ── de Rham module ────────────────────────────────────────────────────────

    def module_axioms(self) -> None:
        t, mod, k = self.t, self.t.module, self.k
        na = mod.dimension
        zero = self.zero

        def m(a):
            return {(a, zero): ONE}

        def ctr(i, x):
            return apply_binary(mod.contraction, self.e(i), x, k)

        def ctr_coords(v, x):
            return apply_binary(mod.contraction, v, x, k)

        def dm(x):
            return apply_unary(mod.d, x, k)

        def lie(i, x):
            s = sign(self.deg(i))
            inner = coords_add(dm(ctr(i, x)), ctr(i, dm(x)), QQ(-s))
            return coords_scale(inner, s)

        def render_module(coords):
            return ModuleElement(t, coords).render()

        def expect(name, cases, detail=""):
            for label, lhs, rhs in cases:
                if lhs != rhs:
                    diff = coords_add(lhs, rhs, -ONE)
                    self.report.add(name, False, witness=f"({label}): difference {render_module(diff)}", detail=detail)
                    return
            self.report.add(name, True, detail=detail)

        def mlabel(a):
            return mod.labels[a]

        expect("module_d_square", ((mlabel(a), dm(dm(m(a))), {}) for a in range(na)))
        expect("contraction_unit", ((mlabel(a), ctr(t.unit, m(a)), m(a)) for a in range(na)))
        expect("contraction_action", (
            (f"{self.names(i, j)};{mlabel(a)}", ctr_coords(self.mul(self.e(i), self.e(j)), m(a)), ctr(i, ctr(j, m(a))))
            for i in range(self.n) for j in range(self.n) for a in range(na)
        ))
        expect("lie_contraction", (
            (f"{self.names(i, j)};{mlabel(a)}",
             coords_add(lie(i, ctr(j, m(a))), ctr(j, lie(i, m(a))), QQ(-sign((self.deg(i) + 1) * self.deg(j)))),
             ctr_coords(self.br(self.e(i), self.e(j)), m(a)))
            for i in range(self.n) for j in range(self.n) for a in range(na)
        ), detail="[𝓛_v1, v2⌟] = [v1,v2]⌟")
        expect("d_lie_commute", (
            (f"{self.names(i)};{mlabel(a)}",
             coords_add(dm(lie(i, m(a))), lie(i, dm(m(a))), QQ(-sign(self.deg(i) + 1))), {})
            for i in range(self.n) for a in range(na)
        ))
        for name, (fdeg, op) in sorted(mod.base_forms.items()):
            expect(f"base_form_commute[{name}]", (
                (f"{self.names(i)};{mlabel(a)}",
                 coords_add(ctr(i, apply_unary(op, m(a), k)), apply_unary(op, ctr(i, m(a)), k),
                            QQ(-sign(self.deg(i) * fdeg))), {})
                for i in range(self.n) for a in range(na)
            ))
        if t.delta is not None:
            vol = m(mod.volume)
            expect("volume_relation", (
                (self.names(i), ctr_coords(self.op(t.delta, self.e(i)), vol), dm(ctr(i, vol)))
                for i in range(self.n)
            ), detail="Δ(v)⌟ω = ∂(v⌟ω)")
        if mod.dbar is not None and t.pdb is not None:
            expect("dbar_contraction", (
                (f"{self.names(i)};{mlabel(a)}",
                 coords_add(apply_unary(mod.dbar, ctr(i, m(a)), k), ctr(i, apply_unary(mod.dbar, m(a), k)),
                            QQ(-sign(self.deg(i)))),
                 ctr_coords(self.op(t.pdb, self.e(i)), m(a)))
                for i in range(self.n) for a in range(na)
            ))


def check_axioms(table: AlgebraTable, kind: str, modulus_order: int | None = None) -> CheckReport:
    """
    Check the identities of the requested structure on every basis tuple.

    Args:
        table: the table under test
        kind: an AxiomKind value
        modulus_order: for almost_dgbv, the order modulo which ∂̄² and
            ∂̄Δ + Δ∂̄ must vanish (default 0, i.e. modulo m)

    Returns:
        CheckReport with one result per identity and a witness on failure

    Raises:
        IncompatibleDataError: unknown kind or missing tensors
    """
    if kind not in AxiomKind.VALUES:
        raise IncompatibleDataError(f"Unknown axiom kind {kind!r}")
    required = {
        AxiomKind.BV: ("delta",),
        AxiomKind.DGLA: ("pdb",),
        AxiomKind.DGBV: ("delta", "pdb"),
        AxiomKind.ALMOST_DGBV: ("delta", "pdb"),
        AxiomKind.DE_RHAM_MODULE: ("module",),
    }[kind]
    missing = [name for name in required if getattr(table, name) is None]
    if kind == AxiomKind.DGLA and table.bracket is None and table.delta is None:
        missing.append("bracket")
    if missing:
        raise IncompatibleDataError(f"Table {table.name!r} lacks {', '.join(missing)} needed for {kind}")

    report = CheckReport(subject=f"{kind}:{table.name}")
    checker = _Checker(table, report)
    if kind == AxiomKind.BV:
        checker.bv_axioms()
    elif kind == AxiomKind.DGLA:
        checker.dgla_axioms()
    elif kind == AxiomKind.DGBV:
        checker.bv_axioms()
        checker.pdb_leibniz_product()
        checker.pdb_square(exact=True)
        checker.pdb_delta(exact=True)
    elif kind == AxiomKind.ALMOST_DGBV:
        modulus = 0 if modulus_order is None else modulus_order
        checker.bv_axioms()
        checker.pdb_leibniz_product()
        checker.pdb_square(exact=False, modulus=modulus)
        checker.pdb_delta(exact=False, modulus=modulus)
    else:
        checker.module_axioms()
    failed = [r.name for r in report.failures()]
    logger.info(f"Axioms {kind} on {table.name!r}: {len(report.results)} checks, failed={failed}")
    return report


def ad_injectivity_rank(table: AlgebraTable, elements: list[int]) -> tuple[int, int]:
    """
    Rank of v -> [v, ·] on the span of the given basis indices over Q.

    Returns:
        (rank, number of elements); injective iff equal
    """
    k = table.ring.k
    zero = table.ring.zero_mono
    bracket = table.derived_bracket()
    index: dict = {}
    columns = []
    for i in elements:
        image = {}
        for j in range(table.dimension):
            for (l, m), c in apply_binary(bracket, {(i, zero): ONE}, {(j, zero): ONE}, k).items():
                image[index.setdefault((j, l, m), len(index))] = c
        columns.append(image)
    return linalg_service.rank_of(columns, len(index)), len(elements)


# ─────────────────────────────────────────────────────────────────────────────
# Cohomology
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class TableCohomology:
    """Per-degree cohomology of a degree +1 operator on a table over R_k (as Q-spaces)."""

    table: AlgebraTable
    basis: dict                          # degree -> list of (index, mono)
    pieces: dict                         # degree -> linalg_service.CohomologyDegree
    complex_: linalg_service.CochainComplex | None = None

    def rank(self, degree: int) -> int:
        piece = self.pieces.get(degree)
        return piece.rank if piece else 0

    def ranks(self) -> dict:
        return {n: p.rank for n, p in sorted(self.pieces.items())}

    def ranks_by_weight(self) -> dict:
        """
        {degree: {weight: rank}} for the associated graded of the 𝔪-adic filtration.

        The operator never lowers weight, so its weight-preserving part is a
        differential on each weight slice.
        """
        if self.complex_ is None:
            return {}
        out: dict = {}
        weights = sorted({mono_weight(m) for keys in self.basis.values() for _, m in keys})
        for w in weights:
            positions = {
                deg: [n for n, (_, m) in enumerate(keys) if mono_weight(m) == w]
                for deg, keys in self.basis.items()
            }
            slot = {deg: {n: j for j, n in enumerate(ps)} for deg, ps in positions.items()}
            maps = {}
            for deg, ps in positions.items():
                cols = self.complex_.maps.get(deg) or []
                target = slot.get(deg + 1, {})
                maps[deg] = [
                    {target[r]: c for r, c in (cols[n] if n < len(cols) else {}).items() if r in target}
                    for n in ps
                ]
            sliced = linalg_service.CochainComplex(dims={d: len(ps) for d, ps in positions.items()}, maps=maps)
            for deg, rank in linalg_service.cohomology_ranks(sliced).items():
                if rank:
                    out.setdefault(deg, {})[w] = rank
        return {deg: out[deg] for deg in sorted(out)}

    def representatives(self, degree: int) -> list[Element]:
        piece = self.pieces.get(degree)
        if piece is None:
            return []
        keys = self.basis[degree]
        return [Element(self.table, {keys[j]: c for j, c in rep.items()}) for rep in piece.representatives]


def _operator_tensor(table: AlgebraTable, op) -> dict:
    if isinstance(op, dict):
        return op
    names = op.split("+")
    out: dict = {}
    for name in names:
        tensor = getattr(table, name.strip(), None)
        if tensor is None:
            raise IncompatibleDataError(f"Table {table.name!r} declares no {name!r} operator")
        for i, entries in tensor.items():
            coords = {}
            for j, m, c in out.get(i, ()):
                accumulate(coords, (j, m), c)
            for j, m, c in entries:
                accumulate(coords, (j, m), c)
            out[i] = entries_from_coords(coords)
    return out


def table_complex(table: AlgebraTable, op="pdb") -> tuple[linalg_service.CochainComplex, dict]:
    """
    The table over R_k as a complex of Q-spaces under a degree +1 operator.

    Returns:
        (complex, basis) with basis[degree] the list of (index, mono) keys

    Raises:
        IncompatibleDataError: the operator is missing or does not raise degree by one
    """
    tensor = _operator_tensor(table, op)
    ring = table.ring
    basis: dict = {}
    for i in range(table.dimension):
        for m in ring.monomials():
            basis.setdefault(table.degree(i) + table.mono_degree(m), []).append((i, m))
    index = {deg: {key: n for n, key in enumerate(keys)} for deg, keys in basis.items()}
    maps = {}
    for deg, keys in basis.items():
        target = index.get(deg + 1, {})
        cols = []
        for key in keys:
            image = apply_unary(tensor, {key: ONE}, ring.k)
            col = {}
            for tkey, c in image.items():
                if tkey not in target:
                    raise IncompatibleDataError(f"Operator does not raise degree by one at {table.labels[key[0]]}")
                col[target[tkey]] = c
            cols.append(col)
        maps[deg] = cols
    complex_ = linalg_service.CochainComplex(dims={d: len(k) for d, k in basis.items()}, maps=maps)
    return complex_, basis


def cohomology_basis(table: AlgebraTable, op="pdb", degrees=None) -> TableCohomology:
    """
    Exact cohomology of a degree +1 operator, over Q, on every degree of the table.

    Args:
        table: the table
        op: "pdb", "delta", "pdb+delta" or an explicit unary tensor
        degrees: optional iterable restricting the reported degrees

    Raises:
        IncompatibleDataError: if op∘op != 0
    """
    complex_, basis = table_complex(table, op)
    wanted = sorted(basis) if degrees is None else sorted(degrees)
    pieces = linalg_service.cohomology(complex_, wanted)
    return TableCohomology(
        table=table,
        basis={d: basis.get(d, []) for d in wanted},
        pieces=pieces,
        complex_=complex_ if degrees is None else None,
    )


# ─────────────────────────────────────────────────────────────────────────────
# Serialization
# ─────────────────────────────────────────────────────────────────────────────

def _entries_to_json(ring: ArtinRing, entries) -> list:
    return [[j, ",".join(str(e) for e in m), format_rational(c)] for j, m, c in entries]


def _entries_from_json(ring: ArtinRing, data) -> tuple:
    out = []
    for j, mono, c in data:
        m = tuple(int(x) for x in mono.split(",")) if mono else ()
        if len(m) != ring.nvars:
            raise IncompatibleDataError(f"Tensor monomial {mono!r} does not match the ring")
        out.append((int(j), m, rational(c)))
    return tuple(out)


def table_to_json(table: AlgebraTable) -> dict:
    """Documented table schema: basis with bidegrees plus tensor entry lists."""
    ring = table.ring

    def binary(tensor):
        return [[i, j, _entries_to_json(ring, e)] for (i, j), e in sorted(tensor.items())]

    def unary(tensor):
        return [[i, _entries_to_json(ring, e)] for i, e in sorted(tensor.items())]

    out = {
        "name": table.name,
        "basis": [[label, p, q] for label, (p, q) in zip(table.labels, table.bidegrees)],
        "unit": table.unit,
        "product": binary(table.product),
    }
    for name in ("bracket",):
        if getattr(table, name) is not None:
            out[name] = binary(getattr(table, name))
    for name in ("pdb", "delta"):
        if getattr(table, name) is not None:
            out[name] = unary(getattr(table, name))
    return out


def table_from_json(ring: ArtinRing, data: dict) -> AlgebraTable:
    """
    Inverse of table_to_json; the module part is not serialized.

    Raises:
        IncompatibleDataError: malformed entries
    """
    try:
        labels = tuple(str(row[0]) for row in data["basis"])
        bidegrees = tuple((int(row[1]), int(row[2])) for row in data["basis"])

        def binary(rows):
            return {(int(i), int(j)): _entries_from_json(ring, e) for i, j, e in rows}

        def unary(rows):
            return {int(i): _entries_from_json(ring, e) for i, e in rows}

        return AlgebraTable(
            ring=ring,
            labels=labels,
            bidegrees=bidegrees,
            unit=int(data.get("unit", 0)),
            product=binary(data["product"]),
            bracket=binary(data["bracket"]) if "bracket" in data else None,
            pdb=unary(data["pdb"]) if "pdb" in data else None,
            delta=unary(data["delta"]) if "delta" in data else None,
            name=str(data.get("name", "")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise IncompatibleDataError(f"Malformed table document: {exc}") from exc


