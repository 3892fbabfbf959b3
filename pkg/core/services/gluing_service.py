"""
gluing_service.py — Patching data, compatible gluing morphisms and comparison cocycles.

Responsible for:
- PatchingData: exponents ε_{αβ,i} with ψ_{αβ,i} = exp(ad ε_{αβ,i}) on U_i ⊂ V_αβ,
  and the derived ledger (BV discrepancy 𝔴, overlap fields 𝔭, cocycle fields 𝔬)
- validate_patching(): the defining relations, checked exactly on a basis
- solve_gluing(): exponents G_{αβ} ∈ TW^{−1,0}(V_αβ) with g_{αβ} = exp(ad G_{αβ})
  satisfying face compatibility and the cocycle condition
- solve_homotopy(): a prism family joining two solutions
- compute_comparison_cocycles(): w = −T(ad G)(∂̄G) and f = −T(ad G)(ΔG)

The solve runs once at the top order, weight by weight. At weight j the
vertex exponents are corrected by contracting the weight-j part of their
cocycle defect, and every higher simplex takes the exponents from its apex
chart α* (the least chart of its index set, or the largest with reverse=True)
by a lift that restricts to the faces and to the weight j−1 stage; the other
pairs follow from G_{βγ} = G_{α*γ}⊙(−G_{α*β}). Truncating the result to
order l gives the order-l solution.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

from sympy import QQ

from core.dtos import CheckReport, SeriesKind
from core.services import lie_service
from core.services.errors import IncompatibleDataError, InconsistencyError, InstanceError
from core.services.graded_service import (
    AlgebraTable,
    Element,
    ModuleElement,
    ad_injectivity_rank,
    contract,
    lie_derivative,
    truncate_coords,
)
from core.services.nerve_service import CoverNerve, point_cech_contract, simplex_faces
from core.services.sullivan_service import DEFAULT_ESCALATION, Cell, SullivanForm, constrained_lift, face_pullback
from core.services.tw_service import TWElement, TWSpace, chart_space, form_probes

logger = logging.getLogger(__name__)

EXPONENT_BIDEGREE = (-1, 0)


def closure(simplex: tuple) -> tuple:
    """All faces of a simplex, itself included."""
    out = []
    for r in range(1, len(simplex) + 1):
        out.extend(itertools.combinations(simplex, r))
    return tuple(out)


def constant_value(comp: dict, table: AlgebraTable) -> Element:
    """The table element of a component made of constant 0-forms."""
    return Element(table, {key: form.constant_value() for key, form in comp.items()})


def _negate(comp: dict) -> dict:
    return {key: -form for key, form in comp.items()}


def _truncate(comp: dict, j: int) -> dict:
    return {key: form for key, form in comp.items() if sum(key[1]) <= j}


# ─────────────────────────────────────────────────────────────────────────────
# Patching data
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class PatchingData:
    """
    Patching isomorphisms ψ_{αβ,i} = exp(ad ε_{αβ,i}) of the local table.

    exponents holds the declared ε_{αβ,i} keyed by (α, β, i). An undeclared
    (α, β, i) uses −ε_{βα,i} when that is declared and 0 otherwise.
    """

    nerve: CoverNerve
    table: AlgebraTable
    exponents: dict = field(default_factory=dict)

    @property
    def order(self) -> int:
        return self.table.ring.k

    def epsilon(self, a: int, b: int, i: int) -> Element:
        if a == b:
            return self.table.zero()
        if (a, b, i) in self.exponents:
            return self.exponents[(a, b, i)]
        if (b, a, i) in self.exponents:
            return -self.exponents[(b, a, i)]
        return self.table.zero()

    def psi(self, a: int, b: int, i: int, x: Element) -> Element:
        return lie_service.exp_ad(self.epsilon(a, b, i), x)

    def pairs(self) -> list[tuple]:
        """(α < β) with V_αβ containing some U-chart."""
        return [s for s in self.nerve.v_simplices if len(s) == 2]

    def triples(self) -> list[tuple]:
        return [s for s in self.nerve.v_simplices if len(s) == 3]

    def charts_of(self, i: int) -> tuple:
        return self.nerve.containment[i]

    def coordinate(self, *charts, i: int) -> str:
        return f"({self.nerve.v_label(tuple(charts))}, {self.nerve.u_charts[i]}, k={self.order})"

    def restrict(self, l: int) -> "PatchingData":
        table = self.table.over(self.table.ring.restrict(l))
        exponents = {key: Element(table, truncate_coords(e.coords, l)) for key, e in self.exponents.items()}
        return PatchingData(self.nerve, table, exponents)


def build_patching(nerve: CoverNerve, table: AlgebraTable, exponents: dict) -> PatchingData:
    """
    Validate the shape of declared exponents.

    Args:
        exponents: {(α, β, i): Element} by chart position

    Raises:
        InstanceError: α = β, U_i not inside V_α ∩ V_β, or a foreign table
    """
    for (a, b, i), e in exponents.items():
        if a == b:
            raise InstanceError(f"Patching exponent declared from chart {nerve.v_charts[a]!r} to itself")
        if not {a, b} <= set(nerve.containment[i]):
            raise InstanceError(
                f"Patching exponent on U-chart {nerve.u_charts[i]!r} outside {nerve.v_label(tuple(sorted((a, b))))}"
            )
        if e.table is not table:
            raise InstanceError("Patching exponents must live on the local table")
    logger.info(f"Patching data: {len(exponents)} declared exponents over {len(nerve.u_charts)} U-charts")
    return PatchingData(nerve, table, dict(exponents))


@dataclass
class PatchingLedger:
    """The elements determined by the patching isomorphisms."""

    bv: dict = field(default_factory=dict)          # (α, β, i) -> 𝔴
    overlap: dict = field(default_factory=dict)     # (α, β, i, j) -> 𝔭
    cocycle: dict = field(default_factory=dict)     # (α, β, γ, i) -> 𝔬


def _bound(table: AlgebraTable) -> int:
    return table.ring.k + table.dimension + 2


def compute_ledger(p: PatchingData) -> PatchingLedger:
    """
    𝔴_{αβ,i} = Σ δ_{−ε}^n(−Δε)/(n+1)!, 𝔭_{αβ,ij} = (−ε_{αβ,j})⊙ε_{αβ,i} and
    𝔬_{αβγ,i} = ε_{γα,i}⊙ε_{βγ,i}⊙ε_{αβ,i}.
    """
    ledger = PatchingLedger()
    bound = _bound(p.table)
    for a, b in p.pairs():
        for i, j in _overlap_edges(p, (a, b)):
            for x, y in ((a, b), (b, a)):
                ledger.overlap[(x, y, i, j)] = lie_service.bch(-p.epsilon(x, y, j), p.epsilon(x, y, i))
        for i in _vertices(p, (a, b)):
            for x, y in ((a, b), (b, a)):
                ledger.bv[(x, y, i)] = lie_service.bv_exponent(-p.epsilon(x, y, i), bound)
    for a, b, c in p.triples():
        for i in _vertices(p, (a, b, c)):
            ledger.cocycle[(a, b, c, i)] = lie_service.bch_many(
                p.epsilon(c, a, i), p.epsilon(b, c, i), p.epsilon(a, b, i)
            )
    return ledger


def _vertices(p: PatchingData, charts: tuple) -> list[int]:
    return [s[0] for s in p.nerve.simplices_in(charts) if len(s) == 1]


def _overlap_edges(p: PatchingData, charts: tuple) -> list[tuple]:
    return [s for s in p.nerve.simplices_in(charts) if len(s) == 2]


def validate_patching(p: PatchingData) -> CheckReport:
    """
    Check the patching relations exactly on the basis of the local table.

    Each failing relation is reported with its (charts, U-chart, k) coordinate.
    """
    table = p.table
    report = CheckReport(subject=f"patching[{table.name}]")
    basis = [table.basis_element(n) for n in range(table.dimension)]

    def first(cases):
        for coordinate, ok, witness in cases:
            if not ok:
                return coordinate, witness
        return None

    def record(name: str, cases) -> None:
        failure = first(cases)
        report.add(name, failure is None, witness=None if failure is None else f"{failure[0]}: {failure[1]}")

    exps = list(p.exponents.items())
    record("exponents_nilpotent", (
        (p.coordinate(a, b, i=i), e.order() is None or e.order() >= 1, e.render()) for (a, b, i), e in exps
    ))
    record("exponents_bidegree", (
        (p.coordinate(a, b, i=i), e == e.bidegree_part(*EXPONENT_BIDEGREE), e.render()) for (a, b, i), e in exps
    ))
    if not report.passed:
        return report

    def inverse_cases():
        for a, b in p.pairs():
            for i in _vertices(p, (a, b)):
                for x in basis:
                    back = p.psi(b, a, i, p.psi(a, b, i, x))
                    yield p.coordinate(a, b, i=i), back == x, f"ψ_βα ψ_αβ({x.render()}) = {back.render()}"
    record("inverse", inverse_cases())

    ledger = compute_ledger(p)

    def overlap_cases():
        for (a, b, i, j), e in ledger.overlap.items():
            for x in basis:
                lhs = lie_service.exp_ad(e, x)
                rhs = lie_service.exp_ad(-p.epsilon(a, b, j), p.psi(a, b, i, x))
                yield f"{p.coordinate(a, b, i=i)}∩{p.nerve.u_charts[j]}", lhs == rhs, f"on {x.render()}"
    record("overlap", overlap_cases())

    def cocycle_cases():
        for (a, b, c, i), e in ledger.cocycle.items():
            for x in basis:
                lhs = lie_service.exp_ad(e, x)
                rhs = p.psi(c, a, i, p.psi(b, c, i, p.psi(a, b, i, x)))
                yield p.coordinate(a, b, c, i=i), lhs == rhs, f"on {x.render()}"
    record("cocycle", cocycle_cases())

    def order_cases():
        for (a, b, i), e in exps:
            for l in range(1, p.order):
                for x in basis:
                    lhs = lie_service.exp_ad(e, x).restrict(l)
                    rhs = lie_service.exp_ad(e.restrict(l), x.restrict(l))
                    yield f"{p.coordinate(a, b, i=i)} l={l}", lhs == rhs, f"on {x.render()}"
    record("order_comparison", order_cases())

    if table.delta is not None:
        def bv_cases():
            for (a, b, i), mu in ledger.bv.items():
                eps = p.epsilon(a, b, i)
                closed = -lie_service.series_apply(SeriesKind.EXPM1_OVER_AD, eps, eps.delta())
                yield p.coordinate(a, b, i=i), closed == mu, f"closed form {closed.render()} vs {mu.render()}"
                for x in basis:
                    lhs = lie_service.exp_ad(eps, lie_service.exp_ad(-eps, x).delta()) - x.delta()
                    yield p.coordinate(a, b, i=i), lhs == mu.bracket(x), f"on {x.render()}"
        record("bv_discrepancy", bv_cases())

    if table.module is not None:
        omega = ModuleElement.volume(table)
        bound = _bound(table)

        def volume_cases():
            for (a, b, i), mu in ledger.bv.items():
                eps = p.epsilon(a, b, i)
                lhs = lie_service.exp_operator(lambda m: lie_derivative(eps, m), omega, bound, "𝓛_ε")
                rhs = contract(lie_service.wedge_exp(mu, bound), omega)
                yield p.coordinate(a, b, i=i), lhs == rhs, f"{lhs.render()} vs {rhs.render()}"
        record("volume", volume_cases())

    indices = table.indices_of_bidegree(*EXPONENT_BIDEGREE)
    rank, count = ad_injectivity_rank(table, indices)
    report.add("ledger_unique", rank == count, witness=f"rank {rank} of {count}", detail=f"ad rank {rank}/{count}")
    logger.info(f"Patching validation on {table.name!r}: failed={[r.name for r in report.failures()]}")
    return report


# ─────────────────────────────────────────────────────────────────────────────
# Gluing systems
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class GluingSystem:
    """
    Exponents G_{αβ} ∈ TW^{−1,0}(V_αβ) for α < β, with g_{αβ} = exp(ad G_{αβ})
    and G_{βα} = −G_{αβ}. Prism systems are homotopies between two systems.
    """

    patching: PatchingData
    exponents: dict                      # (α, β) with α < β -> TWElement
    prism: bool = False
    transcript: list = field(default_factory=list)
    _spaces: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def nerve(self) -> CoverNerve:
        return self.patching.nerve

    @property
    def table(self) -> AlgebraTable:
        return self.patching.table

    def space(self, charts) -> TWSpace:
        charts = tuple(sorted(charts))
        if charts not in self._spaces:
            self._spaces[charts] = chart_space(self.nerve, self.table, charts, self.prism)
        return self._spaces[charts]

    def exponent(self, a: int, b: int) -> TWElement:
        if a == b:
            return self.space((a,)).zero()
        if a < b:
            return self.exponents.get((a, b), self.space((a, b)).zero())
        return -self.exponent(b, a)

    def on(self, a: int, b: int, charts) -> TWElement:
        """G_{αβ} restricted to the intersection of the given charts."""
        return self.exponent(a, b).on(self.space(charts))

    def gluing(self, a: int, b: int, x: TWElement) -> TWElement:
        """g_{αβ}(x) for x on (a part of) V_αβ."""
        return lie_service.exp_ad(self.exponent(a, b).on(x.space), x)

    def end(self, j: int) -> "GluingSystem":
        if not self.prism:
            raise IncompatibleDataError("Only prism systems have ends")
        return GluingSystem(self.patching, {pair: G.end(j) for pair, G in self.exponents.items()})

    def restrict(self, l: int) -> "GluingSystem":
        patching = self.patching.restrict(l)
        return GluingSystem(patching, {pair: G.restrict(l) for pair, G in self.exponents.items()}, self.prism)

    # ── derived normal form ───────────────────────────────────────────────────

    def chart_exponents(self) -> dict:
        """θ_{αβ,i} with exp(ad G_{αβ,i}) = exp(ad θ_{αβ,i})∘ψ_{αβ,i}."""
        out = {}
        for (a, b), G in self.exponents.items():
            for simplex in G.space.support:
                if len(simplex) != 1:
                    continue
                i = simplex[0]
                value = constant_value(G.component(simplex), self.table)
                out[(a, b, i)] = lie_service.bch(value, -self.patching.epsilon(a, b, i))
        return out

    def simplex_exponents(self) -> dict:
        """a_{αβ,I} = G_{αβ,I}⊙(−ε_{αβ,i_0}), so that g_I = exp(ad a_I)∘ψ_{i_0}."""
        out = {}
        for (a, b), G in self.exponents.items():
            for simplex in G.space.support:
                local = TWSpace(self.nerve, self.table, closure(simplex), self.prism)
                g_part = TWElement(local, {simplex: G.component(simplex)})
                psi = TWElement.constant(local, self.patching.epsilon(a, b, simplex[0]))
                out[(a, b, simplex)] = lie_service.bch(g_part, -psi).component(simplex)
        return out

    def edge_elements(self) -> dict:
        """𝔟_{αβ,i_0i_1}: the normal-form exponents on edges."""
        return {key: comp for key, comp in self.simplex_exponents().items() if len(key[2]) == 2}


def _oriented(store: dict, a: int, b: int, simplex: tuple) -> dict:
    if a < b:
        return store.get((a, b), {}).get(simplex, {})
    return _negate(store.get((b, a), {}).get(simplex, {}))


def _put(store: dict, a: int, b: int, simplex: tuple, comp: dict) -> None:
    if a < b:
        store.setdefault((a, b), {})[simplex] = comp
    else:
        store.setdefault((b, a), {})[simplex] = _negate(comp)


def _lift_keys(table: AlgebraTable, j: int) -> list[tuple]:
    monos = [m for m in table.ring.monomials(j) if sum(m) >= 1]
    return [(n, m) for n in table.indices_of_bidegree(*EXPONENT_BIDEGREE) for m in monos]


def _truncation_map(keys: list[tuple], j: int) -> dict:
    """ρ: weight ≤ j coordinates onto weight ≤ j − 1 coordinates."""
    return {key: ({key: QQ.one} if sum(key[1]) <= j - 1 else {}) for key in keys}


def _const_comp(cell: Cell, element: Element) -> dict:
    return {key: SullivanForm.const(cell, c) for key, c in element.coords.items()}


def _vertex_exponents(p: PatchingData, reverse: bool) -> tuple[dict, list]:
    """
    Exponents on the U-charts, corrected weight by weight into a cocycle.

    Returns:
        ({(α, β, i): Element} for α < β, transcript entries)
    """
    table = p.table
    values = {}
    for i in range(len(p.nerve.u_charts)):
        for a, b in itertools.combinations(p.charts_of(i), 2):
            values[(a, b, i)] = p.epsilon(a, b, i)

    def oriented(a, b, i):
        return values[(a, b, i)] if a < b else -values[(b, a, i)]

    transcript = []
    for j in range(1, p.order + 1):
        for i in range(len(p.nerve.u_charts)):
            index = p.charts_of(i)
            if len(index) < 3:
                continue
            defect = {}
            for a, b, c in itertools.combinations(index, 3):
                d = lie_service.bch_many(oriented(b, c, i), oriented(a, b, i), -oriented(a, c, i))
                if not d.truncate(j - 1).is_zero():
                    raise InconsistencyError(
                        f"Cocycle defect at {p.coordinate(a, b, c, i=i)} has weight below {j}: {d.render()}"
                    )
                part = d.weight_part(j)
                if not part.is_zero():
                    defect[(a, b, c)] = part
            if not defect:
                continue
            apex = index[-1] if reverse else index[0]
            try:
                correction = point_cech_contract(defect, index, 2, table.zero(), apex=apex)
            except IncompatibleDataError as exc:
                raise InconsistencyError(
                    f"Cocycle obstruction on U-chart {p.nerve.u_charts[i]!r} at weight {j} is not closed: {exc}"
                ) from exc
            for (a, b), value in correction.items():
                values[(a, b, i)] = values[(a, b, i)] - value
            transcript.append({
                "weight": j,
                "u_chart": p.nerve.u_charts[i],
                "defects": len(defect),
                "apex": p.nerve.v_charts[apex],
            })
            logger.debug(f"Weight {j} obstruction on {p.nerve.u_charts[i]!r}: {len(defect)} triples contracted")
    return values, transcript


def _assemble(
    p: PatchingData,
    prism: bool,
    vertex_values: dict | None,
    ends: tuple | None,
    reverse: bool,
    escalation: int,
) -> dict:
    """
    Components {(α, β): {simplex: comp}} built simplex by simplex at each weight.

    vertex_values fixes the 0-simplices (simplex systems); ends gives the two
    end systems' components (prism systems).
    """
    nerve, table = p.nerve, p.table
    previous: dict = {}
    for j in range(1, p.order + 1):
        keys = _lift_keys(table, j)
        rho = _truncation_map(keys, j)
        current: dict = {}
        for simplex in nerve.u_simplices:
            index = nerve.index_set(simplex)
            if len(index) < 2:
                continue
            cell = Cell(len(simplex) - 1, prism)
            if vertex_values is not None and len(simplex) == 1:
                for a, b in itertools.combinations(index, 2):
                    value = vertex_values[(a, b, simplex[0])].truncate(j)
                    _put(current, a, b, simplex, _const_comp(cell, value))
                continue
            star = index[-1] if reverse else index[0]
            faces = simplex_faces(simplex)
            lifted = {}
            for beta in index:
                if beta == star:
                    continue
                w = _oriented(previous, star, beta, simplex)
                boundary = [_oriented(current, star, beta, face) for _, face in faces]
                end_data = None
                if ends is not None:
                    end_data = tuple(_truncate(_oriented(e, star, beta, simplex), j) for e in ends)
                try:
                    lifted[beta] = constrained_lift(cell, rho, w, boundary, end_data, escalation)
                except IncompatibleDataError as exc:
                    raise InconsistencyError(
                        f"Lift of G_{nerve.v_label((star, beta))} on {nerve.label(simplex)} at weight {j} failed: {exc}"
                    ) from exc
                _put(current, star, beta, simplex, lifted[beta])
            local = TWSpace(nerve, table, closure(simplex), prism)
            for beta, gamma in itertools.combinations([c for c in index if c != star], 2):
                g_gamma = TWElement(local, {simplex: lifted[gamma]})
                g_beta = TWElement(local, {simplex: lifted[beta]})
                derived = lie_service.bch(g_gamma, -g_beta).truncate(j)
                _put(current, beta, gamma, simplex, derived.component(simplex))
        previous = current
        logger.debug(f"Gluing weight {j}: {sum(len(v) for v in current.values())} components")
    return previous


def _as_system(p: PatchingData, comps: dict, prism: bool, transcript: list) -> GluingSystem:
    system = GluingSystem(p, {}, prism, transcript)
    for a, b in p.pairs():
        system.exponents[(a, b)] = TWElement(system.space((a, b)), comps.get((a, b), {}))
    return system


def _face_component(comp: dict, j: int) -> dict:
    out = {}
    for key, form in comp.items():
        face = face_pullback(form, j)
        if not face.is_zero():
            out[key] = face
    return out


def verify_gluing(system: GluingSystem) -> CheckReport:
    """Exponent shape, face compatibility, the cocycle condition and the normal-form face relations."""
    p = system.patching
    nerve = system.nerve
    kind = "homotopy" if system.prism else "gluing"
    report = CheckReport(subject=f"{kind}[{system.table.name}]")

    failure = None
    for (a, b), G in system.exponents.items():
        if G.bidegree_part(*EXPONENT_BIDEGREE) != G:
            failure = f"G_{nerve.v_label((a, b))} leaves bidegree {EXPONENT_BIDEGREE}"
        elif G.order() is not None and G.order() < 1:
            failure = f"G_{nerve.v_label((a, b))} is not ≡ 0 mod 𝔪"
        if failure:
            break
    report.add("exponent_shape", failure is None, witness=failure)
    if failure:
        return report

    failure = None
    for (a, b), G in system.exponents.items():
        found = G.face_mismatch()
        if found is not None:
            failure = f"G_{nerve.v_label((a, b))} on {nerve.label(found[0])}, face {found[1]}"
            break
    report.add("face_compatible", failure is None, witness=failure)

    failure = None
    for a, b, c in p.triples():
        charts = (a, b, c)
        defect = lie_service.bch(system.on(b, c, charts), system.on(a, b, charts)) - system.on(a, c, charts)
        if not defect.is_zero():
            failure = f"{nerve.v_label(charts)}: G_βγ⊙G_αβ − G_αγ = {defect.render()}"
            break
    report.add("cocycle", failure is None, witness=failure)

    if system.prism:
        return report
    failure = None
    normal = system.simplex_exponents()
    for (a, b, simplex), comp in normal.items():
        for j, face in simplex_faces(simplex):
            expected = normal.get((a, b, face), {})
            if j == 0:
                local = TWSpace(nerve, system.table, closure(face))
                step = lie_service.bch(p.epsilon(a, b, simplex[1]), -p.epsilon(a, b, simplex[0]))
                moved = lie_service.bch(TWElement(local, {face: expected}), TWElement.constant(local, step))
                expected = moved.component(face)
            if _face_component(comp, j) != expected:
                failure = f"a_{nerve.v_label((a, b))} on {nerve.label(simplex)}, face {j}"
                break
        if failure:
            break
    report.add("normal_form_faces", failure is None, witness=failure)
    return report


def solve_gluing(
    p: PatchingData,
    reverse: bool = False,
    escalation: int = DEFAULT_ESCALATION,
) -> GluingSystem:
    """
    Compatible gluing morphisms for validated patching data.

    Args:
        p: patching data at the top order k
        reverse: contract towards the largest chart of each index set
        escalation: extension degree headroom

    Raises:
        InconsistencyError: a cocycle obstruction that is not closed, a failed
            lift, or an output that fails verify_gluing
    """
    logger.info(f"Solving gluing on {p.table.name!r} to order {p.order} (reverse={reverse})")
    vertex_values, transcript = _vertex_exponents(p, reverse)
    comps = _assemble(p, False, vertex_values, None, reverse, escalation)
    system = _as_system(p, comps, False, transcript)
    report = verify_gluing(system)
    if not report.passed:
        failed = report.failures()[0]
        raise InconsistencyError(f"Gluing solve failed its own check {failed.name}: {failed.witness}")
    logger.info(f"Gluing solved: {len(system.exponents)} pairs, {len(transcript)} obstruction contractions")
    return system


def check_order_compatibility(system: GluingSystem, reverse: bool = False,
                              escalation: int = DEFAULT_ESCALATION) -> CheckReport:
    """Solving at each lower order l reproduces the truncation r^{k,l} of the system."""
    report = CheckReport(subject=f"order_compatibility[{system.table.name}]")
    for l in range(1, system.patching.order):
        truncated = system.restrict(l)
        resolved = solve_gluing(system.patching.restrict(l), reverse, escalation)
        failure = None
        for pair, G in truncated.exponents.items():
            if resolved.exponents[pair] != G:
                failure = f"G_{system.nerve.v_label(pair)}"
                break
        report.add(f"order_{l}", failure is None, witness=failure)
    return report


def solve_homotopy(g0: GluingSystem, g1: GluingSystem, reverse: bool = False,
                   escalation: int = DEFAULT_ESCALATION) -> GluingSystem:
    """
    A prism system H with r*_0 H = g0 and r*_1 H = g1.

    Raises:
        IncompatibleDataError: the inputs solve different patching data or one
            of them fails verify_gluing
        InconsistencyError: the assembled homotopy fails its checks
    """
    p = g0.patching
    if g1.patching.nerve != p.nerve or g1.patching.table is not p.table or g0.prism or g1.prism:
        raise IncompatibleDataError("Homotopy endpoints must solve the same patching data")
    for name, system in (("g0", g0), ("g1", g1)):
        report = verify_gluing(system)
        if not report.passed:
            failed = report.failures()[0]
            raise IncompatibleDataError(f"Homotopy endpoint {name} fails {failed.name}: {failed.witness}")
    ends = tuple({pair: G.comps for pair, G in g.exponents.items()} for g in (g0, g1))
    comps = _assemble(p, True, None, ends, reverse, escalation)
    homotopy = _as_system(p, comps, True, [])
    report = verify_gluing(homotopy)
    for j, g in enumerate((g0, g1)):
        end = homotopy.end(j)
        same = all(end.exponents[pair] == G for pair, G in g.exponents.items())
        report.add(f"end_{j}", same)
    if not report.passed:
        failed = report.failures()[0]
        raise InconsistencyError(f"Homotopy failed its own check {failed.name}: {failed.witness}")
    logger.info(f"Homotopy solved between two gluing systems on {p.table.name!r}")
    return homotopy


# ─────────────────────────────────────────────────────────────────────────────
# Comparison cocycles
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class ComparisonCocycles:
    """
    w_{αβ} ∈ TW^{−1,1}(V_αβ) and f_{αβ} ∈ TW^{0,0}(V_αβ) for every ordered pair,
    with g_{βα}∘∂̄∘g_{αβ} = ∂̄ + [w_{αβ}, ·] and g_{βα}∘Δ∘g_{αβ} = Δ + [f_{αβ}, ·].
    """

    w: dict
    f: dict
    report: CheckReport


def comparison_terms(G: TWElement) -> tuple[TWElement, TWElement]:
    """(−T(ad G)(∂̄G), −T(ad G)(ΔG))."""
    w = -lie_service.series_apply(SeriesKind.T, G, G.pdb())
    f = -lie_service.series_apply(SeriesKind.T, G, G.delta())
    return w, f


def compute_comparison_cocycles(system: GluingSystem) -> ComparisonCocycles:
    """
    Compute w and f and verify twisted closedness and the operator identities.

    Twisted closedness reads c_{αγ} = c_{αβ} + g_{βα}(c_{βγ}) on V_αβγ.

    Raises:
        InconsistencyError: closedness or an operator identity fails
    """
    nerve = system.nerve
    w, f = {}, {}
    for a, b in system.patching.pairs():
        for x, y in ((a, b), (b, a)):
            w[(x, y)], f[(x, y)] = comparison_terms(system.exponent(x, y))
    report = CheckReport(subject=f"comparison_cocycles[{system.table.name}]")

    for name, cocycle in (("w", w), ("f", f)):
        failure = None
        for a, b, c in system.patching.triples():
            space = system.space((a, b, c))
            lhs = cocycle[(a, c)].on(space)
            rhs = cocycle[(a, b)].on(space) + system.gluing(b, a, cocycle[(b, c)].on(space))
            if lhs != rhs:
                failure = f"{nerve.v_label((a, b, c))}: {(lhs - rhs).render()}"
                break
        report.add(f"{name}_closed", failure is None, witness=failure)

    for name, op, cocycle in (("w", "pdb", w), ("f", "delta", f)):
        failure = None
        for (a, b), c in cocycle.items():
            space = system.space((a, b))
            G = system.exponent(a, b)
            probes = form_probes(space, [system.table.basis_element(n) for n in range(system.table.dimension)])
            probes.append(G)
            for x in probes:
                moved = getattr(lie_service.exp_ad(G, x), op)()
                lhs = lie_service.exp_ad(-G, moved)
                rhs = getattr(x, op)() + c.bracket(x)
                if lhs != rhs:
                    failure = f"{nerve.v_label((a, b))} on {x.render()}"
                    break
            if failure:
                break
        report.add(f"{name}_operator_identity", failure is None, witness=failure)

    if not report.passed:
        failed = report.failures()[0]
        raise InconsistencyError(f"Comparison cocycle check {failed.name} failed: {failed.witness}")
    logger.info(f"Comparison cocycles on {len(w) // 2} pairs verified")
    return ComparisonCocycles(w, f, report)
