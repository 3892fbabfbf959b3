"""
tw_service.py — Thom-Whitney complexes over a cover nerve.

Responsible for:
- TWSpace: the nerve simplices carrying components (a face-closed support),
  the local table, and whether components live on simplices or on prisms
- TWElement: face-compatible families {simplex: {(basis index, mono): form}}
  with the componentwise product, bracket, ∂̄, Δ, contraction and ∂
- whitney_element() / form_probes(): ω_σ⊗v and the probe families built from them
- tw_validate_build(): validation of raw families
- integration_map() / check_integration_chain_map(): I(α⊗v) = (∫α)·v
- tw_primitive(): solving ∂̄x = y simplex by simplex
- scalar_tw_complex() / quasi_iso_report(): capped scalar Thom-Whitney
  complexes and their comparison with simplicial cochains

Sections are locally constant: every chart carries the same table and the
restriction maps are identities. Signs follow the Koszul rule with the form
factor written first:

    (α⊗v)(β⊗w)   = (−1)^{|v||β|} αβ ⊗ vw
    [α⊗v, β⊗w]   = (−1)^{(|v|+1)|β|} αβ ⊗ [v, w]
    Δ(α⊗v)       = (−1)^{|α|} α ⊗ Δv
    ∂̄(α⊗v)       = dα ⊗ v
    (α⊗v)⌟(β⊗m)  = (−1)^{|v||β|} αβ ⊗ (v⌟m)
    ∂(α⊗m)       = (−1)^{|α|} α ⊗ ∂m
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from sympy import QQ

from core.dtos import CheckReport
from core.services import linalg_service
from core.services.errors import InconsistencyError, IncompatibleDataError
from core.services.graded_service import AlgebraTable, Element, sign, table_complex
from core.services.nerve_service import CechCochain, CoverNerve, simplex_faces, simplicial_complex
from core.services.scalars_service import ArtinSeries, mono_mul, mono_sort_key
from core.services.sullivan_service import (
    DEFAULT_ESCALATION,
    Cell,
    SullivanForm,
    basis_forms,
    face_pullback,
    integrate_simplex,
    prism_restrict,
    relative_primitive,
    vform_extend,
    whitney_form,
)

logger = logging.getLogger(__name__)


def _key_sort(key) -> tuple:
    return (key[0], mono_sort_key(key[1]))


def _simplex_sort(simplex: tuple) -> tuple:
    return (len(simplex), simplex)


def _acc(out: dict, key, form: SullivanForm) -> None:
    if form.is_zero():
        return
    if key in out:
        total = out[key] + form
        if total.is_zero():
            del out[key]
        else:
            out[key] = total
    else:
        out[key] = form


# ─────────────────────────────────────────────────────────────────────────────
# Spaces
# ─────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class TWSpace:
    """Where a Thom-Whitney element lives."""

    nerve: CoverNerve
    table: AlgebraTable
    support: tuple
    prism: bool = False

    def __post_init__(self):
        if self.table.pdb and any(self.table.pdb.values()):
            raise IncompatibleDataError(
                f"Table {self.table.name!r} has ∂̄ ≠ 0; Thom-Whitney components need holomorphic sections"
            )
        members = set(self.support)
        for simplex in self.support:
            for _, face in simplex_faces(simplex):
                if face not in members:
                    raise IncompatibleDataError(f"Support is not closed under faces: {face} missing below {simplex}")

    @property
    def ring(self):
        return self.table.ring

    def cell(self, simplex: tuple) -> Cell:
        return Cell(len(simplex) - 1, self.prism)

    def zero(self, module: bool = False) -> "TWElement":
        return TWElement(self, {}, module)

    def over(self, table: AlgebraTable) -> "TWSpace":
        return TWSpace(self.nerve, table, self.support, self.prism)

    def restricted(self, support) -> "TWSpace":
        support = tuple(sorted(support, key=_simplex_sort))
        missing = set(support) - set(self.support)
        if missing:
            raise IncompatibleDataError(f"Simplex {sorted(missing)[0]} is outside the support")
        return TWSpace(self.nerve, self.table, support, self.prism)

    def as_prism(self) -> "TWSpace":
        return TWSpace(self.nerve, self.table, self.support, True)

    def as_simplex(self) -> "TWSpace":
        return TWSpace(self.nerve, self.table, self.support, False)


def chart_space(nerve: CoverNerve, table: AlgebraTable, charts, prism: bool = False) -> TWSpace:
    """The space of V_{α_0} ∩ … ∩ V_{α_ℓ}: the U-simplices lying in all of the charts."""
    return TWSpace(nerve, table, nerve.simplices_in(charts), prism)


def full_space(nerve: CoverNerve, table: AlgebraTable) -> TWSpace:
    return TWSpace(nerve, table, nerve.u_simplices)


# ─────────────────────────────────────────────────────────────────────────────
# Elements
# ─────────────────────────────────────────────────────────────────────────────

class TWElement:
    """
    A family of form-valued coordinates over the support of a TWSpace.

    comps[simplex][(basis index, mono)] is a SullivanForm on the simplex (or
    prism). With module=True the basis indices refer to the de Rham module of
    the table.
    """

    __slots__ = ("space", "comps", "module")

    def __init__(self, space: TWSpace, comps: dict | None = None, module: bool = False):
        self.space = space
        self.module = module
        k = space.ring.k
        clean = {}
        for simplex, comp in (comps or {}).items():
            kept = {key: form for key, form in comp.items() if not form.is_zero() and sum(key[1]) <= k}
            if kept:
                clean[simplex] = kept
        self.comps = clean

    # ── constructors ──────────────────────────────────────────────────────────

    @classmethod
    def constant(cls, space: TWSpace, element, module: bool = False) -> "TWElement":
        """1⊗v on every simplex of the support, for a table Element or ModuleElement v."""
        comps = {}
        for simplex in space.support:
            cell = space.cell(simplex)
            comps[simplex] = {key: SullivanForm.const(cell, c) for key, c in element.coords.items()}
        return cls(space, comps, module)

    @property
    def table(self) -> AlgebraTable:
        return self.space.table

    def like(self, comps: dict) -> "TWElement":
        return TWElement(self.space, comps, self.module)

    def _check(self, other: "TWElement") -> None:
        if other.space != self.space:
            raise IncompatibleDataError("Thom-Whitney elements live on different spaces")

    def component(self, simplex: tuple) -> dict:
        return self.comps.get(simplex, {})

    # ── linear structure ──────────────────────────────────────────────────────

    def __add__(self, other: "TWElement") -> "TWElement":
        self._check(other)
        out = {s: dict(c) for s, c in self.comps.items()}
        for simplex, comp in other.comps.items():
            target = out.setdefault(simplex, {})
            for key, form in comp.items():
                _acc(target, key, form)
        return self.like(out)

    def __neg__(self) -> "TWElement":
        return self.like({s: {key: -form for key, form in c.items()} for s, c in self.comps.items()})

    def __sub__(self, other: "TWElement") -> "TWElement":
        return self + (-other)

    def scale(self, c) -> "TWElement":
        if isinstance(c, ArtinSeries):
            k = self.space.ring.k
            out = {}
            for simplex, comp in self.comps.items():
                target = out.setdefault(simplex, {})
                for (i, m), form in comp.items():
                    for m2, c2 in c.terms.items():
                        if sum(m) + sum(m2) <= k:
                            _acc(target, (i, mono_mul(m, m2)), form.scale(c2))
            return self.like(out)
        return self.like({s: {key: form.scale(c) for key, form in comp.items()} for s, comp in self.comps.items()})

    # ── degrees ───────────────────────────────────────────────────────────────

    def _coeff_degree(self, key) -> int:
        i, m = key
        table = self.table
        base = table.module.degrees[i] if self.module else table.degree(i)
        return base + table.mono_degree(m)

    def degrees(self) -> set[int]:
        out = set()
        for comp in self.comps.values():
            for key, form in comp.items():
                d = self._coeff_degree(key)
                out |= {d + p for p in form.degrees()}
        return out

    def form_degrees(self) -> set[int]:
        return {p for comp in self.comps.values() for form in comp.values() for p in form.degrees()}

    def form_degree_part(self, p: int) -> "TWElement":
        return self.like(
            {s: {key: form.degree_part(p) for key, form in comp.items()} for s, comp in self.comps.items()}
        )

    def bidegree_part(self, p: int, q: int) -> "TWElement":
        """Table bidegree (p, q0) with form degree q − q0."""
        bd = self.table.bidegrees
        out = {}
        for simplex, comp in self.comps.items():
            for key, form in comp.items():
                tp, tq = bd[key[0]]
                if tp == p and q >= tq:
                    part = form.degree_part(q - tq)
                    if not part.is_zero():
                        out.setdefault(simplex, {})[key] = part
        return self.like(out)

    def _homogeneous_degree(self) -> int:
        degs = self.degrees()
        if len(degs) > 1:
            raise IncompatibleDataError(f"Thom-Whitney element is not homogeneous: degrees {sorted(degs)}")
        return degs.pop() if degs else 0

    # ── weights ───────────────────────────────────────────────────────────────

    def is_zero(self) -> bool:
        return not self.comps

    def order(self) -> int | None:
        weights = [sum(key[1]) for comp in self.comps.values() for key in comp]
        return min(weights) if weights else None

    def weight_part(self, w: int) -> "TWElement":
        return self.like({s: {key: f for key, f in c.items() if sum(key[1]) == w} for s, c in self.comps.items()})

    def truncate(self, max_weight: int) -> "TWElement":
        return self.like(
            {s: {key: f for key, f in c.items() if sum(key[1]) <= max_weight} for s, c in self.comps.items()}
        )

    def restrict(self, l: int) -> "TWElement":
        """The image under r^{k,l}, on the space over the restricted table."""
        table = self.table.over(self.table.ring.restrict(l))
        return TWElement(self.space.over(table), self.truncate(l).comps, self.module)

    def on(self, space: TWSpace) -> "TWElement":
        """Restriction to a smaller support over the same table."""
        if space.table is not self.table or space.prism != self.space.prism:
            raise IncompatibleDataError("Restriction needs the same table and cell type")
        members = set(self.space.support)
        missing = [s for s in space.support if s not in members]
        if missing:
            raise IncompatibleDataError(f"Simplex {missing[0]} is outside the support of the element")
        return TWElement(space, {s: self.comps[s] for s in space.support if s in self.comps}, self.module)

    def end(self, j: int) -> "TWElement":
        """r*_j of a prism element."""
        if not self.space.prism:
            raise IncompatibleDataError("Only prism elements have ends")
        out = {}
        for simplex, comp in self.comps.items():
            out[simplex] = {key: prism_restrict(form, j) for key, form in comp.items()}
        return TWElement(self.space.as_simplex(), out, self.module)

    # ── algebra ───────────────────────────────────────────────────────────────

    def _bilinear(self, other: "TWElement", tensor: dict, sign_rule, module_result: bool) -> "TWElement":
        k = self.space.ring.k
        out: dict = {}
        for simplex, comp_a in self.comps.items():
            comp_b = other.comps.get(simplex)
            if not comp_b:
                continue
            target: dict = {}
            for (i, m1), alpha in comp_a.items():
                v_deg = self._coeff_degree((i, m1))
                w1 = sum(m1)
                for (j, m2), beta in comp_b.items():
                    entries = tensor.get((i, j))
                    if not entries or w1 + sum(m2) > k:
                        continue
                    m12 = mono_mul(m1, m2)
                    for p in sorted(beta.degrees()):
                        prod = alpha.wedge(beta.degree_part(p))
                        if prod.is_zero():
                            continue
                        s = sign_rule(v_deg, p)
                        for l, m3, c in entries:
                            if w1 + sum(m2) + sum(m3) > k:
                                continue
                            _acc(target, (l, mono_mul(m12, m3)), prod.scale(s * c))
            if target:
                out[simplex] = target
        return TWElement(self.space, out, module_result)

    def wedge(self, other: "TWElement") -> "TWElement":
        self._check(other)
        return self._bilinear(other, self.table.product, lambda v, b: sign(v * b), False)

    def bracket(self, other: "TWElement") -> "TWElement":
        self._check(other)
        return self._bilinear(other, self.table.derived_bracket(), lambda v, b: sign((v + 1) * b), False)

    def contract(self, m: "TWElement") -> "TWElement":
        """self⌟m for a module element m."""
        self._check(m)
        if not m.module or self.module:
            raise IncompatibleDataError("Contraction takes an algebra element and a module element")
        return self._bilinear(m, self.table.module.contraction, lambda v, b: sign(v * b), True)

    def _unary(self, tensor: dict, sign_by_form: bool) -> "TWElement":
        k = self.space.ring.k
        out: dict = {}
        for simplex, comp in self.comps.items():
            target: dict = {}
            for (i, m), form in comp.items():
                entries = tensor.get(i)
                if not entries:
                    continue
                for p in sorted(form.degrees()):
                    part = form.degree_part(p)
                    s = sign(p) if sign_by_form else 1
                    for j, m2, c in entries:
                        if sum(m) + sum(m2) <= k:
                            _acc(target, (j, mono_mul(m, m2)), part.scale(s * c))
            if target:
                out[simplex] = target
        return self.like(out)

    def pdb(self) -> "TWElement":
        """∂̄ = d⊗1 (also on module elements)."""
        return self.like({s: {key: form.d() for key, form in c.items()} for s, c in self.comps.items()})

    dbar = pdb

    def delta(self) -> "TWElement":
        if self.module:
            raise IncompatibleDataError("Δ acts on algebra elements")
        if self.table.delta is None:
            raise IncompatibleDataError(f"Table {self.table.name!r} declares no Δ")
        return self._unary(self.table.delta, True)

    def d(self) -> "TWElement":
        """The module differential ∂(α⊗m) = (−1)^{|α|} α⊗∂m."""
        if not self.module:
            raise IncompatibleDataError("∂ acts on module elements")
        return self._unary(self.table.module.d, True)

    def lie_derivative(self, m: "TWElement") -> "TWElement":
        """𝓛_v m = (−1)^{|v|} [∂, v⌟] m for homogeneous v = self."""
        deg = self._homogeneous_degree()
        inner = self.contract(m).d() - self.contract(m.d()).scale(sign(deg))
        return inner.scale(sign(deg))

    # ── comparison and display ────────────────────────────────────────────────

    def __eq__(self, other):
        if not isinstance(other, TWElement):
            return NotImplemented
        return self.space == other.space and self.module == other.module and self.comps == other.comps

    __hash__ = None

    def face_mismatch(self) -> tuple | None:
        """First (simplex, j) with d*_j φ_I ≠ φ_{I∖i_j}, or None."""
        for simplex in self.space.support:
            comp = self.component(simplex)
            for j, face in simplex_faces(simplex):
                pulled = {}
                for key, form in comp.items():
                    _acc(pulled, key, face_pullback(form, j))
                if pulled != self.component(face):
                    return simplex, j
        return None

    def render(self) -> str:
        if not self.comps:
            return "0"
        labels = self.table.module.labels if self.module else self.table.labels
        ring = self.space.ring
        parts = []
        for simplex in sorted(self.comps, key=_simplex_sort):
            comp = self.comps[simplex]
            terms = [
                f"{ring.label(m)}*{labels[i]}⊗({comp[(i, m)].render()})"
                for (i, m) in sorted(comp, key=_key_sort)
            ]
            parts.append(f"{self.space.nerve.label(simplex)}: " + " + ".join(terms))
        return "; ".join(parts)

    def __repr__(self) -> str:
        return f"TWElement({self.render()})"


def whitney_element(space: TWSpace, sigma: tuple, element) -> TWElement:
    """
    ω_σ⊗v: the Whitney form of σ on every support simplex containing σ.

    Raises:
        IncompatibleDataError: a prism space, or σ outside the support
    """
    if space.prism:
        raise IncompatibleDataError("Whitney elements live on simplices")
    if sigma not in space.support:
        raise IncompatibleDataError(f"Simplex {sigma} is outside the support")
    members = set(sigma)
    comps = {}
    for simplex in space.support:
        if not members <= set(simplex):
            continue
        form = whitney_form(len(simplex) - 1, tuple(simplex.index(u) for u in sigma))
        comps[simplex] = {key: form.scale(c) for key, c in element.coords.items()}
    return TWElement(space, comps)


def form_probes(space: TWSpace, elements) -> list[TWElement]:
    """Constants 1⊗v, and ω_σ⊗v for the vertices and edges σ of the support."""
    elements = list(elements)
    probes = [TWElement.constant(space, v) for v in elements]
    if space.prism:
        return probes
    for simplex in space.support:
        if len(simplex) <= 2:
            probes.extend(whitney_element(space, simplex, v) for v in elements)
    return probes


def tw_validate_build(space: TWSpace, raw: dict, module: bool = False) -> TWElement:
    """
    Validate a raw family {simplex: {(index, mono): SullivanForm}}.

    Raises:
        IncompatibleDataError: a support simplex without a component, a
            component on a foreign simplex or cell, or a face mismatch
            (the simplex and face index are named)
    """
    members = set(space.support)
    for simplex in raw:
        if simplex not in members:
            raise IncompatibleDataError(f"Component on {simplex}, which is not in the support")
    for simplex in space.support:
        if simplex not in raw:
            raise IncompatibleDataError(f"No component on simplex {simplex}")
        cell = space.cell(simplex)
        for key, form in raw[simplex].items():
            if form.cell != cell:
                raise IncompatibleDataError(f"Component {key} on {simplex} lives on {form.cell.label}, expected {cell.label}")
    ordered = {
        simplex: {key: raw[simplex][key] for key in sorted(raw[simplex], key=_key_sort)}
        for simplex in space.support
    }
    element = TWElement(space, ordered, module)
    mismatch = element.face_mismatch()
    if mismatch is not None:
        simplex, j = mismatch
        raise IncompatibleDataError(f"Face mismatch on simplex {simplex}, face {j}")
    return element


def extend_on(space: TWSpace, known: dict, simplex: tuple, ends: tuple | None = None,
              escalation: int = DEFAULT_ESCALATION) -> dict:
    """
    Extend the faces of a simplex, read from known components, to the simplex.

    known maps every face of the simplex to its {key: form} component.
    """
    cell = space.cell(simplex)
    faces = [known.get(face, {}) for _, face in simplex_faces(simplex)]
    return vform_extend(cell, faces, ends, escalation)


# ─────────────────────────────────────────────────────────────────────────────
# Integration
# ─────────────────────────────────────────────────────────────────────────────

def integration_map(x: TWElement, degree: int) -> CechCochain:
    """
    I on the degree-ℓ forms: (Iφ)_I = Σ_key (∫_{Δ_ℓ} φ_I[key]) e_key on ℓ-simplices.

    Raises:
        IncompatibleDataError: prism or module elements
    """
    if x.space.prism or x.module:
        raise IncompatibleDataError("The integration map takes algebra elements on simplices")
    values = {}
    for simplex, comp in x.comps.items():
        if len(simplex) != degree + 1:
            continue
        coords = {}
        for key, form in comp.items():
            c = integrate_simplex(form.degree_part(degree))
            if c:
                coords[key] = c
        if coords:
            values[simplex] = Element(x.table, coords)
    return CechCochain(x.table, degree, values)


def cochains_equal(a: CechCochain, b: CechCochain) -> bool:
    keys = set(a.values) | set(b.values)
    return all(a.value(s) == b.value(s) for s in keys)


def check_integration_chain_map(x: TWElement) -> CheckReport:
    """I∘∂̄ = δ∘I in every form degree present in x."""
    report = CheckReport(subject="integration_chain_map")
    dx = x.pdb()
    for p in sorted(x.form_degrees()):
        lhs = integration_map(dx, p + 1)
        rhs = integration_map(x, p).coboundary(x.space.support)
        ok = cochains_equal(lhs, rhs)
        report.add(f"degree_{p}", ok, witness=f"I(∂̄x)={lhs.render()} δI(x)={rhs.render()}")
    return report


# ─────────────────────────────────────────────────────────────────────────────
# Solving ∂̄x = y
# ─────────────────────────────────────────────────────────────────────────────

def _cech_primitive(space: TWSpace, cochain: CechCochain) -> dict:
    """b with δb = c on the support, as {simplex: {key: rational}}."""
    p = cochain.degree
    lower = [s for s in space.support if len(s) == p]
    upper = [s for s in space.support if len(s) == p + 1]
    keys = sorted({key for value in cochain.values.values() for key in value.coords}, key=_key_sort)
    if not keys:
        return {}
    key_index = {key: n for n, key in enumerate(keys)}
    row = {s: n for n, s in enumerate(upper)}
    faces_of = {s: [] for s in lower}
    for s in upper:
        for j, face in simplex_faces(s):
            faces_of[face].append((s, j))
    nkeys = len(keys)
    columns = []
    for s in lower:
        for key in keys:
            col = {}
            for big, j in faces_of[s]:
                col[row[big] * nkeys + key_index[key]] = QQ(-1) if j % 2 else QQ.one
            columns.append(col)
    target = {}
    for s, value in cochain.values.items():
        for key, c in value.coords.items():
            target[row[s] * nkeys + key_index[key]] = c
    solution = linalg_service.LinearSolver(columns, len(upper) * nkeys).solve(target)
    if solution is None:
        raise IncompatibleDataError(f"The degree {p} integral of the right-hand side is not a Čech coboundary")
    out: dict = {}
    for col, c in solution.items():
        s = lower[col // nkeys]
        out.setdefault(s, {})[keys[col % nkeys]] = c
    return out


def _primitive_of_degree(y: TWElement, p: int, escalation: int) -> TWElement:
    space = y.space
    if y.is_zero():
        return space.zero(y.module)
    if p == 0:
        raise IncompatibleDataError("A nonzero element of form degree 0 has no ∂̄-primitive")
    if y.module:
        raise IncompatibleDataError("tw_primitive takes algebra elements")
    b = _cech_primitive(space, integration_map(y, p))
    x: dict = {}
    for simplex in space.support:
        l = len(simplex) - 1
        if l < p - 1:
            continue
        if l == p - 1:
            top = whitney_form(l, tuple(range(l + 1)))
            comp = {key: top.scale(c) for key, c in b.get(simplex, {}).items()}
            if comp:
                x[simplex] = comp
            continue
        ext = extend_on(space, x, simplex, escalation=escalation)
        comp = dict(ext)
        target = y.component(simplex)
        for key in sorted(set(target) | set(ext), key=_key_sort):
            cell = space.cell(simplex)
            z = target.get(key, SullivanForm.zero(cell)) - ext.get(key, SullivanForm.zero(cell)).d()
            if z.is_zero():
                continue
            r = relative_primitive(z, escalation)
            if r is None:
                raise InconsistencyError(f"No relative primitive on simplex {simplex} for coordinate {key}")
            _acc(comp, key, r)
        if comp:
            x[simplex] = comp
    return TWElement(space, x, y.module)


def tw_primitive(y: TWElement, escalation: int = DEFAULT_ESCALATION) -> TWElement:
    """
    x with ∂̄x = y, built simplex by simplex.

    The Čech class I(y) is killed first (δb = I(y)); b is carried by Whitney
    top forms on the simplices of dimension p − 1, and on larger simplices the
    extension of the faces is corrected by a relative primitive.

    Raises:
        IncompatibleDataError: y not ∂̄-closed or its integral not a coboundary
        InconsistencyError: the assembled x fails ∂̄x = y
    """
    if y.space.prism:
        raise IncompatibleDataError("tw_primitive works on simplices")
    if not y.pdb().is_zero():
        raise IncompatibleDataError("tw_primitive needs a ∂̄-closed element")
    result = y.space.zero(y.module)
    for p in sorted(y.form_degrees()):
        result = result + _primitive_of_degree(y.form_degree_part(p), p, escalation)
    if result.pdb() != y:
        raise InconsistencyError("Assembled Thom-Whitney primitive does not satisfy ∂̄x = y")
    mismatch = result.face_mismatch()
    if mismatch is not None:
        raise InconsistencyError(f"Assembled Thom-Whitney primitive is not face-compatible at {mismatch}")
    logger.debug(f"tw_primitive: form degrees {sorted(y.form_degrees())} on {len(y.space.support)} simplices")
    return result


# ─────────────────────────────────────────────────────────────────────────────
# Scalar Thom-Whitney complexes
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class ScalarTW:
    """Face-compatible scalar forms of total degree ≤ cap, as a finite complex."""

    complex: linalg_service.CochainComplex
    basis: dict                          # form degree -> kernel vectors over the ambient index
    ambient: dict                        # form degree -> {(simplex, dxs, mono): position}
    cap: int


def _form_vector(simplex: tuple, form: SullivanForm, index: dict) -> dict:
    vec = {}
    for dxs, poly in form.terms.items():
        for mono, c in poly.items():
            vec[index[(simplex, dxs, mono)]] = c
    return vec


def scalar_tw_complex(nerve: CoverNerve, support=None, cap: int | None = None) -> ScalarTW:
    """
    The scalar Thom-Whitney complex capped at total degree (polynomial + form) ≤ cap.

    d and the face maps do not raise the total degree, so the capped families
    form a subcomplex; the default cap is the nerve dimension + 1, the total
    degree of the Whitney forms.
    """
    support = nerve.u_simplices if support is None else tuple(support)
    top = max(len(s) for s in support) - 1
    cap = top + 1 if cap is None else cap
    cofaces: dict = {}
    for simplex in support:
        for j, face in simplex_faces(simplex):
            cofaces.setdefault(face, []).append((simplex, j))

    ambient: dict = {}
    kernels: dict = {}
    for p in range(top + 1):
        entries = []
        for simplex in support:
            cell = Cell(len(simplex) - 1)
            if p <= cell.n and cap - p >= 0:
                entries.extend((simplex, form) for form in basis_forms(cell, p, cap - p))
        index = {}
        for simplex, form in entries:
            (dxs, poly), = form.terms.items()
            (mono, _), = poly.items()
            index[(simplex, dxs, mono)] = len(index)
        ambient[p] = index
        rows: dict = {}
        columns = []
        for simplex, form in entries:
            col: dict = {}
            for j, _ in simplex_faces(simplex):
                for dxs, poly in face_pullback(form, j).terms.items():
                    for mono, c in poly.items():
                        key = (simplex, j, dxs, mono)
                        rows.setdefault(key, len(rows))
                        col[rows[key]] = col.get(rows[key], QQ.zero) + c
            for big, j in cofaces.get(simplex, []):
                for dxs, poly in form.terms.items():
                    for mono, c in poly.items():
                        key = (big, j, dxs, mono)
                        rows.setdefault(key, len(rows))
                        col[rows[key]] = col.get(rows[key], QQ.zero) - c
            columns.append({r: v for r, v in col.items() if v})
        kernels[p] = linalg_service.LinearSolver(columns, len(rows)).kernel_basis()

    position = {p: {pos: key for key, pos in index.items()} for p, index in ambient.items()}
    maps = {}
    for p in range(top):
        solver = linalg_service.LinearSolver(kernels[p + 1], len(ambient[p + 1]))
        cols = []
        for vec in kernels[p]:
            image: dict = {}
            for pos, c in vec.items():
                simplex, dxs, mono = position[p][pos]
                cell = Cell(len(simplex) - 1)
                form = SullivanForm(cell, {dxs: cell.ring.from_dict({mono: c})}).d()
                image = linalg_service.vec_add(image, _form_vector(simplex, form, ambient[p + 1]))
            coords = solver.solve(image)
            if coords is None:
                raise InconsistencyError(f"d leaves the capped Thom-Whitney complex in degree {p}")
            cols.append(coords)
        maps[p] = cols
    complex_ = linalg_service.CochainComplex(dims={p: len(kernels[p]) for p in kernels}, maps=maps)
    logger.debug(f"Scalar TW complex (cap {cap}): dims {complex_.dims}")
    return ScalarTW(complex=complex_, basis=kernels, ambient=ambient, cap=cap)


def _bidegree_piece(table: AlgebraTable, p: int) -> linalg_service.CochainComplex:
    dims: dict = {}
    for i, (tp, tq) in enumerate(table.bidegrees):
        if tp == p:
            dims[tq] = dims.get(tq, 0) + 1
    return linalg_service.CochainComplex(dims=dims)


def quasi_iso_report(nerve: CoverNerve, table: AlgebraTable | None = None, support=None,
                     cap: int | None = None) -> CheckReport:
    """
    Compare cohomology ranks of Thom-Whitney complexes with Čech ranks.

    Compared are: the scalar complex against simplicial cochains; with a
    table (taken over R_0), every column TW^{p,*} against Čech cochains with
    values in the p-part, and the total ∂̄ + Δ complex against δ ± Δ.
    """
    report = CheckReport(subject="tw_quasi_isomorphism")
    scalar = scalar_tw_complex(nerve, support, cap)
    cech, _ = simplicial_complex(nerve, support)
    tw_ranks = linalg_service.cohomology_ranks(scalar.complex)
    cech_ranks = linalg_service.cohomology_ranks(cech)

    def compare(name: str, a: dict, b: dict) -> None:
        degrees = sorted(set(a) | set(b))
        left = {n: a.get(n, 0) for n in degrees}
        right = {n: b.get(n, 0) for n in degrees}
        report.add(name, left == right, witness=f"TW {left} vs Čech {right}", detail=str(left))

    compare("scalar", tw_ranks, cech_ranks)
    if table is None:
        return report
    base = table.over(table.ring.restrict(0))
    for p in sorted({bd[0] for bd in base.bidegrees}):
        piece = _bidegree_piece(base, p)
        tw_col, _ = linalg_service.tensor_complex(scalar.complex, piece)
        cech_col, _ = linalg_service.tensor_complex(cech, piece)
        compare(f"column_{p}", linalg_service.cohomology_ranks(tw_col), linalg_service.cohomology_ranks(cech_col))
    if base.delta is not None:
        delta_complex, _ = table_complex(base, "delta")
        tw_total, _ = linalg_service.tensor_complex(scalar.complex, delta_complex)
        cech_total, _ = linalg_service.tensor_complex(cech, delta_complex)
        compare("total", linalg_service.cohomology_ranks(tw_total), linalg_service.cohomology_ranks(cech_total))
    logger.info(f"Quasi-isomorphism report on {len(cech.dims)} Čech degrees: passed={report.passed}")
    return report
