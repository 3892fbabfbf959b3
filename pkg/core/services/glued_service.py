"""
glued_service.py — The glued almost dgBV algebra of a cover and its Maurer-Cartan problem.

Responsible for:
- untwisting_frame(): gauge elements ϑ_α with exp(ad G_{αβ}) = exp(−ad ϑ_β)∘exp(ad ϑ_α),
  so that global sections become single families y with x_α = exp(−ad ϑ_α)(y)
- GluedModel / GluedElement: families over the covered part of the nerve with
  ∂̄ = ∂̄ + [D, ·] and Δ = Δ + [F, ·], where D and F are the twisting elements
  moved into the untwisted frame
- FormRetraction: (π, ι, H) for ∂̄₀ + tΔ₀, composed from the Thom-Whitney
  contraction onto constants and the retraction of the local table
- glued_problem() / GluedMCProblem: the problem solve_mc runs on when the
  Maurer-Cartan stage works from a gluing system
- GluedMCProblem.along(): the structures at both ends of a homotopy of gluing
  systems, for homotopy transport
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from core.dtos import CheckReport
from core.services import layer_service, lie_service, linalg_service
from core.services.errors import IncompatibleDataError, InconsistencyError, WindowOverflowError
from core.services.gluing_service import (
    GluingSystem,
    comparison_terms,
    compute_comparison_cocycles,
    constant_value,
)
from core.services.graded_service import AlgebraTable, Element
from core.services.layer_service import Retraction, TVector
from core.services.mc_service import HALF, ProblemPath, curvature_report, psi0_correction
from core.services.nerve_service import simplicial_complex
from core.services.polynomial_service import random_element
from core.services.sullivan_service import DEFAULT_ESCALATION
from core.services.tw_service import TWElement, TWSpace, tw_primitive, whitney_element
from core.services.twist_service import (
    TwistData,
    cech_split,
    covered_space,
    holomorphic_exponents,
    solve_global_operators,
)

logger = logging.getLogger(__name__)


# ─────────────────────────────────────────────────────────────────────────────
# Untwisting frame
# ─────────────────────────────────────────────────────────────────────────────

def untwisting_frame(system: GluingSystem, reverse: bool = False,
                     escalation: int = DEFAULT_ESCALATION) -> dict:
    """
    ϑ_α ∈ TW^{−1,0}(V_α) with ϑ_β⊙G_{αβ}⊙(−ϑ_α) = 0 on every overlap.

    At weight j the weight-j parts of the remaining exponents form an
    untwisted Čech cocycle; its splitting is added to ϑ.

    Raises:
        InconsistencyError: an exponent survives below the current weight or at the end
    """
    nerve = system.nerve
    theta = {a: system.space((a,)).zero() for a in range(len(nerve.v_charts))}
    for j in range(1, system.table.ring.k + 1):
        exponents = holomorphic_exponents(system, theta)
        for pair, G in exponents.items():
            if not G.truncate(j - 1).is_zero():
                raise InconsistencyError(f"Untwisted exponent on {nerve.v_label(pair)} has weight below {j}")
        parts = {pair: G.weight_part(j) for pair, G in exponents.items()}
        if all(part.is_zero() for part in parts.values()):
            continue
        step = cech_split(system, parts, reverse, escalation)
        theta = {a: theta[a] + step[a] for a in theta}
    for pair, G in holomorphic_exponents(system, theta).items():
        if not G.is_zero():
            raise InconsistencyError(f"Untwisted exponent on {nerve.v_label(pair)} is nonzero: {G.render()}")
    logger.debug(f"Untwisting frame on {len(theta)} charts")
    return theta


def _assemble(space: TWSpace, system: GluingSystem, parts: dict) -> TWElement:
    nerve = system.nerve
    comps = {}
    for simplex in space.support:
        comp = parts[nerve.index_set(simplex)[0]].component(simplex)
        if comp:
            comps[simplex] = comp
    return TWElement(space, comps)


def _support_report(space: TWSpace) -> CheckReport:
    report = CheckReport(subject="covered_support")
    complex_, _ = simplicial_complex(space.nerve, space.support)
    ranks = linalg_service.cohomology_ranks(complex_)
    ok = ranks.get(0, 0) == 1 and all(r == 0 for n, r in ranks.items() if n > 0)
    report.add("support_acyclic", ok, witness=str(ranks))
    return report


def frame_operators(twist: TwistData, theta: dict) -> tuple[dict, CheckReport]:
    """
    D, F, L and Y on the covered support, assembled from the chart frames.

    D_α = w(−ϑ_α) + e^{ad ϑ_α}𝔡_α, F_α = f(−ϑ_α) + e^{ad ϑ_α}𝔣_α, and L_α, Y_α
    are 𝔩_α and 𝔶_α moved by e^{ad ϑ_α}.
    """
    system = twist.system
    space = covered_space(system)
    report = CheckReport(subject=f"untwisting_frame[{system.table.name}]")
    charts = sorted(twist.d)
    parts = {"d": {}, "f": {}, "curvature": {}, "mixed": {}}
    for a in charts:
        w, f = comparison_terms(-theta[a])
        parts["d"][a] = w + lie_service.exp_ad(theta[a], twist.d[a])
        parts["f"][a] = f + lie_service.exp_ad(theta[a], twist.f[a])
        parts["curvature"][a] = lie_service.exp_ad(theta[a], twist.curvature[a])
        parts["mixed"][a] = lie_service.exp_ad(theta[a], twist.mixed[a])
    out = {name: _assemble(space, system, values) for name, values in parts.items()}
    for name, values in parts.items():
        failure = None
        for a in charts:
            if out[name].on(system.space((a,))) != values[a]:
                failure = system.nerve.v_label((a,))
                break
        report.add(f"{name}_glues", failure is None, witness=failure)
    d, f = out["d"], out["f"]
    curvature = d.pdb() + d.bracket(d).scale(HALF)
    report.add("curvature_structure", out["curvature"] == curvature, witness=(out["curvature"] - curvature).render())
    mixed = f.pdb() + d.delta() + d.bracket(f)
    report.add("mixed_structure", out["mixed"] == mixed, witness=(out["mixed"] - mixed).render())
    return out, report


# ─────────────────────────────────────────────────────────────────────────────
# Glued model
# ─────────────────────────────────────────────────────────────────────────────

class GluedModel:
    """
    Global sections in the untwisted frame: Thom-Whitney families on the
    covered support with the operators ∂̄ + [D, ·] and Δ + [F, ·].

    Models of one family (one per order) are cached so that restriction
    returns the same object every time.
    """

    def __init__(self, space: TWSpace, d: TWElement, f: TWElement, name: str, family: dict | None = None):
        self.space = space
        self.d = d
        self.f = f
        self.name = name
        self.family = family if family is not None else {}
        self.family.setdefault(space.ring.k, self)

    @property
    def ring(self):
        return self.space.ring

    @property
    def local(self) -> AlgebraTable:
        return self.space.table

    def zero(self) -> "GluedElement":
        return GluedElement(self, self.space.zero())

    def one(self) -> "GluedElement":
        return self.constant(self.local.one())

    def constant(self, element: Element) -> "GluedElement":
        return GluedElement(self, TWElement.constant(self.space, element))

    def over(self, ring) -> "GluedModel":
        if ring.k == self.ring.k:
            return self
        if ring.k not in self.family:
            local = self.local.over(ring)
            GluedModel(self.space.over(local), self.d.restrict(ring.k), self.f.restrict(ring.k), self.name, self.family)
        return self.family[ring.k]

    def bidegrees(self) -> set:
        """Table bidegrees (p, q) shifted by every form degree up to the support dimension."""
        top = max(len(s) for s in self.space.support) - 1
        return {(p, q + r) for p, q in self.local.bidegrees for r in range(top + 1)}

    def probes(self) -> list[tuple[str, "GluedElement"]]:
        """Constants 1⊗v and ω_σ⊗v for the vertices and edges σ, with labels."""
        local = self.local
        basis = [(local.labels[i], local.basis_element(i)) for i in range(local.dimension)]
        out = [(label, self.constant(v)) for label, v in basis]
        for simplex in self.space.support:
            if len(simplex) <= 2:
                name = self.space.nerve.label(simplex)
                out.extend(
                    (f"ω[{name}]⊗{label}", GluedElement(self, whitney_element(self.space, simplex, v)))
                    for label, v in basis
                )
        return out

    def __repr__(self) -> str:
        return f"GluedModel({self.name!r}, k={self.ring.k}, {len(self.space.support)} simplices)"


class GluedElement:
    """A Thom-Whitney family read in a GluedModel."""

    __slots__ = ("model", "x")

    def __init__(self, model: GluedModel, x: TWElement):
        self.model = model
        self.x = x

    @property
    def table(self) -> GluedModel:
        return self.model

    def like(self, value) -> "GluedElement":
        if isinstance(value, TWElement):
            return GluedElement(self.model, value)
        return GluedElement(self.model, self.x.like(value))

    def __add__(self, other: "GluedElement") -> "GluedElement":
        return self.like(self.x + other.x)

    def __sub__(self, other: "GluedElement") -> "GluedElement":
        return self.like(self.x - other.x)

    def __neg__(self) -> "GluedElement":
        return self.like(-self.x)

    def scale(self, c) -> "GluedElement":
        return self.like(self.x.scale(c))

    def bracket(self, other: "GluedElement") -> "GluedElement":
        return self.like(self.x.bracket(other.x))

    def wedge(self, other: "GluedElement") -> "GluedElement":
        return self.like(self.x.wedge(other.x))

    def pdb(self) -> "GluedElement":
        return self.like(self.x.pdb() + self.model.d.bracket(self.x))

    def delta(self) -> "GluedElement":
        return self.like(self.x.delta() + self.model.f.bracket(self.x))

    def degrees(self) -> set[int]:
        return self.x.degrees()

    def is_zero(self) -> bool:
        return self.x.is_zero()

    def order(self) -> int | None:
        return self.x.order()

    def term_count(self) -> int:
        return sum(len(comp) for comp in self.x.comps.values())

    def weight_part(self, w: int) -> "GluedElement":
        return self.like(self.x.weight_part(w))

    def truncate(self, max_weight: int) -> "GluedElement":
        return self.like(self.x.truncate(max_weight))

    def bidegree_part(self, p: int, q: int) -> "GluedElement":
        return self.like(self.x.bidegree_part(p, q))

    def form_degree_part(self, p: int) -> "GluedElement":
        return self.like(self.x.form_degree_part(p))

    def restrict(self, l: int) -> "GluedElement":
        return GluedElement(self.model.over(self.model.ring.restrict(l)), self.x.restrict(l))

    def __eq__(self, other):
        if not isinstance(other, GluedElement):
            return NotImplemented
        return self.model is other.model and self.x == other.x

    __hash__ = None

    def render(self) -> str:
        return self.x.render()

    def __repr__(self) -> str:
        return f"GluedElement({self.render()})"


# ─────────────────────────────────────────────────────────────────────────────
# Retraction of the glued model at order 0
# ─────────────────────────────────────────────────────────────────────────────

class FormRetraction:
    """
    (π, ι, H) for ∂̄₀ + tΔ₀ on the glued model.

    The form part contracts families onto constants through a chosen vertex;
    the constants are then retracted by the local table's retraction:
    H = h_form + ι h_table π.
    """

    def __init__(self, model: GluedModel, table_retraction: Retraction, escalation: int = DEFAULT_ESCALATION):
        self.model = model
        self.table_retraction = table_retraction
        self.escalation = escalation
        self.vertex = next(s for s in model.space.support if len(s) == 1)

    def vertex_value(self, x: TWElement) -> Element:
        return constant_value(x.component(self.vertex), self.model.local)

    def form_homotopy(self, x: TWElement) -> TWElement:
        """h with dh + hd = 1 − (value at the vertex), degree by degree in the forms."""
        out = x.space.zero()
        for p in sorted(x.form_degrees(), reverse=True):
            if p == 0:
                continue
            part = x.form_degree_part(p)
            closed = part - self.form_homotopy(part.pdb())
            if closed.is_zero():
                continue
            y = tw_primitive(closed, self.escalation)
            if p == 1:
                y = y - TWElement.constant(y.space, self.vertex_value(y))
            out = out + y
        return out

    def project_vertex(self, y: TVector) -> TVector:
        local = self.model.local
        return TVector(local, y.low, y.high, {n: self.vertex_value(g.x) for n, g in y.coeffs.items()})

    def include_constants(self, v: TVector, like: TVector) -> TVector:
        return like.like({n: self.model.constant(x) for n, x in v.coeffs.items()})

    def _local_like(self, y: TVector) -> TVector:
        return TVector(self.model.local, y.low, y.high)

    def differential(self, y: TVector) -> TVector:
        """∂̄₀ + tΔ₀: the weight-preserving part of the raw form differential and Δ."""
        out = y.like({})
        for w in sorted(set().union(*(_weights(g) for g in y.coeffs.values()))):
            part = y.weight_part(w)
            raw = part.apply(lambda g: g.like(g.x.pdb())) + part.apply(lambda g: g.like(g.x.delta())).shift(2)
            out = out + raw.weight_part(w)
        return out

    def project(self, y: TVector, degree: int) -> dict:
        """{mono: harmonic coordinates} of y."""
        r = self.table_retraction
        return {m: r.project(vec, degree) for m, vec in r.vectors(self.project_vertex(y), degree).items()}

    def include_project(self, y: TVector, degree: int) -> TVector:
        r = self.table_retraction
        parts = {m: r.include(coords, degree) for m, coords in self.project(y, degree).items()}
        return self.include_constants(r.tvector(parts, degree, self._local_like(y)), y)

    def homotopy(self, y: TVector, degree: int) -> TVector:
        r = self.table_retraction
        formed = y.apply(lambda g: g.like(self.form_homotopy(g.x)))
        parts = {m: r.homotopy(vec, degree) for m, vec in r.vectors(self.project_vertex(y), degree).items()}
        return formed + self.include_constants(r.tvector(parts, degree - 1, self._local_like(y)), y)

    def check(self, zero: TVector) -> CheckReport:
        """dH + Hd = 1 − ιπ on every probe at t⁰, and the local retraction identities."""
        report = CheckReport(subject=f"form_retraction[{self.model.name}]")
        failure = None
        for label, probe in self.model.probes():
            degrees = probe.degrees()
            if not degrees:
                continue
            degree = degrees.pop()
            y = zero.at(probe)
            lhs = self.differential(self.homotopy(y, degree)) + self.homotopy(self.differential(y), degree + 1)
            rhs = y - self.include_project(y, degree)
            if lhs != rhs:
                failure = label
                break
        report.add("homotopy_retraction", failure is None, witness=failure)
        report.extend(self.table_retraction.check(), "table.")
        return report


def _weights(g: GluedElement) -> set[int]:
    return {sum(key[1]) for comp in g.x.comps.values() for key in comp}


# ─────────────────────────────────────────────────────────────────────────────
# The Maurer-Cartan problem of a gluing system
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class GluedMCProblem:
    """The extended Maurer-Cartan equation on the glued model of a twist."""

    table: GluedModel
    curvature: GluedElement              # L
    mixed: GluedElement                  # Y
    t_neg: int
    t_cap: int
    twist: TwistData                     # at the order of the gluing system
    theta: dict                          # α -> ϑ_α at the same order
    reverse: bool = False
    escalation: int = DEFAULT_ESCALATION
    supplied: Retraction | None = None
    frame_report: CheckReport | None = None
    _shared: dict = field(default_factory=dict, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def k(self) -> int:
        return self.table.ring.k

    def zero(self) -> TVector:
        return TVector.window(self.table, self.t_neg, self.t_cap)

    def at(self, x: GluedElement, power: int = 0) -> TVector:
        return self.zero().at(x, power)

    def pole_order(self) -> int:
        return 0 if self.curvature.is_zero() else 1

    def local_retraction(self) -> Retraction:
        if self.supplied is not None:
            return self.supplied
        if "local" not in self._shared:
            self._shared["local"] = layer_service.build_retraction(self.table.local, self.t_neg, self.t_cap)
        return self._shared["local"]

    def nonnegative_retraction(self) -> Retraction:
        if "nonnegative" not in self._shared:
            self._shared["nonnegative"] = layer_service.build_retraction(self.table.local, 0, self.t_cap)
        return self._shared["nonnegative"]

    def retraction(self) -> FormRetraction:
        if "retraction" not in self._cache:
            self._cache["retraction"] = FormRetraction(self.table, self.local_retraction(), self.escalation)
        return self._cache["retraction"]

    def restrict(self, l: int) -> "GluedMCProblem":
        model = self.table.over(self.table.ring.restrict(l))
        return GluedMCProblem(
            table=model,
            curvature=self.curvature.restrict(l),
            mixed=self.mixed.restrict(l),
            t_neg=self.t_neg,
            t_cap=self.t_cap,
            twist=self.twist,
            theta=self.theta,
            reverse=self.reverse,
            escalation=self.escalation,
            supplied=self.supplied,
            frame_report=self.frame_report,
            _shared=self._shared,
        )

    # ── solver interface ──────────────────────────────────────────────────────

    def probes(self) -> list[tuple[str, GluedElement]]:
        return self.table.probes()

    def bidegrees(self) -> set:
        return self.table.bidegrees()

    def exact_primitive(self, target: TVector, degree: int) -> TVector | None:
        """
        ζ with (∂̄₀ + tΔ₀)ζ = target.

        Returns:
            ζ, or None when the class of the target is nonzero

        Raises:
            InconsistencyError: the target is not closed
        """
        r = self.retraction()
        if not r.differential(target).is_zero():
            raise InconsistencyError(f"A degree {degree} element of {self.table.name!r} is not closed under ∂̄₀ + tΔ₀")
        if any(any(coords) for coords in r.project(target, degree).values()):
            return None
        return r.homotopy(target, degree)

    def primitive(self, target: TVector, weight: int) -> TVector:
        zeta = self.exact_primitive(target, 1)
        if zeta is None:
            raise InconsistencyError(f"Obstruction class at weight {weight} is nonzero")
        return -zeta

    def remove_negative_powers(self, zeta: TVector, weight: int) -> tuple[TVector, int]:
        """
        Subtract closed elements η − H((∂̄₀ + tΔ₀)η) for the lowest negative part η.

        Raises:
            WindowOverflowError: the negative powers survive the step bound
        """
        if (zeta.min_power() or 0) >= 0:
            return zeta, 0
        r = self.retraction()
        bound = self.pole_order() + (zeta.high - zeta.low) // 2
        steps = 0
        while (zeta.min_power() or 0) < 0:
            if steps > bound:
                raise WindowOverflowError(
                    f"Negative t-powers at weight {weight} survive {bound} removal steps; widen the t-window"
                )
            n = zeta.min_power()
            lowest = zeta.like({n: zeta.coeffs[n]})
            closed = lowest - r.homotopy(r.differential(lowest), 1)
            zeta = zeta - closed
            steps += 1
        return zeta, steps

    def remove_psi0(self, zeta: TVector) -> tuple[TVector, bool | None]:
        """Subtract a closed constant family carrying the t⁰ (0,0)-part of ζ."""
        part = zeta.component(0).bidegree_part(0, 0)
        if part.is_zero():
            return zeta, None
        r = self.retraction()
        value = r.vertex_value(part.x)
        if TWElement.constant(part.x.space, value) != part.x:
            return zeta, False
        correction = psi0_correction(self.nonnegative_retraction(), value, TVector(self.table.local, zeta.low, zeta.high))
        if correction is None:
            return zeta, False
        return zeta - r.include_constants(correction, zeta), True

    def preconditions(self) -> CheckReport:
        """Frame, degeneracy, degeneration and freeness of the local model, and the retraction."""
        local = self.table.local
        report = CheckReport(subject=f"mc_preconditions[{self.table.name}]")
        if self.frame_report is not None:
            report.extend(self.frame_report, "frame.")
        report.extend(curvature_report(self), "almost_dgbv.")
        report.extend(layer_service.hdr_report(local, self.t_cap, (1,)), "hdr.")
        report.extend(layer_service.freeness_report(local, local.zero(), local.zero()), "freeness.")
        report.extend(self.retraction().check(self.zero()), "retraction.")
        return report

    def lift(self, direction: TVector) -> TVector:
        """A first-order direction on the local table, read as constant families."""
        if direction.table is not self.table.local:
            direction = direction.restrict(self.k)
        if direction.table is not self.table.local:
            raise IncompatibleDataError("ψ lives on another table than the local model")
        zero = self.zero()
        return self.retraction().include_constants(direction.rewindow(zero.low, zero.high), zero)

    def random_gauge(self, rng) -> TVector:
        local = self.table.local
        indices = [i for i in range(local.dimension) if local.degree(i) == -1]
        return self.at(self.table.constant(random_element(rng, local, indices, nilpotent=True)))

    def adopt(self, x: GluedElement) -> GluedElement:
        return GluedElement(self.table, x.x)

    def shifted(self, v: GluedElement) -> "GluedMCProblem":
        """The problem for ∂̄ + [v, ·] on the same carrier."""
        model = GluedModel(self.table.space, self.table.d + v.x, self.table.f, self.table.name)
        curvature = self.curvature + v.pdb() + v.bracket(v).scale(HALF)
        mixed = self.mixed + v.delta()
        return GluedMCProblem(
            table=model,
            curvature=GluedElement(model, curvature.x),
            mixed=GluedElement(model, mixed.x),
            t_neg=self.t_neg,
            t_cap=self.t_cap,
            twist=self.twist,
            theta=self.theta,
            reverse=self.reverse,
            escalation=self.escalation,
            supplied=self.supplied,
            _shared=self._shared,
        )

    def chart_view(self, x: GluedElement) -> dict:
        """{α: e^{−ad ϑ_α}(x) on V_α}, the chart values of a global family."""
        out = {}
        for a, t in sorted(self.theta.items()):
            if t.space.ring.k != self.k:
                t = t.restrict(self.k)
            out[a] = lie_service.exp_ad(-t, x.x.on(t.space))
        return out

    def along(self, homotopy: GluingSystem) -> ProblemPath:
        """
        The glued problem at r*_1 of a homotopy, with 𝔳 = D₁ − D₀ and 𝔲 = F₁ − F₀.

        Raises:
            IncompatibleDataError: not a prism system, or r*_0 differs from this problem's system
            InconsistencyError: an end identity fails
        """
        if not homotopy.prism:
            raise IncompatibleDataError("Homotopy transport takes a prism gluing system")
        if homotopy.table.ring.k != self.k:
            homotopy = homotopy.restrict(self.k)
        start = self.twist.system if self.twist.system.table.ring.k == self.k else self.twist.system.restrict(self.k)
        report = CheckReport(subject=f"homotopy_path[{self.table.name}]")
        begin = homotopy.end(0)
        same = all(begin.exponent(a, b) == start.exponent(a, b) for a, b in start.patching.pairs())
        if not same:
            raise IncompatibleDataError("The homotopy does not start at this problem's gluing system")
        report.add("start_system", same)

        finish = homotopy.end(1)
        cocycles = compute_comparison_cocycles(finish)
        twist = solve_global_operators(finish, cocycles, self.reverse, self.escalation)
        end = glued_problem(twist, self.t_neg, self.t_cap, self.reverse, self.escalation, self.supplied)
        report.add("same_carrier", end.table.space == self.table.space)
        d0, f0 = self.table.d, self.table.f
        v = end.table.d - d0
        u = end.table.f - f0
        dbar_v = v.pdb() + d0.bracket(v)
        expected = self.curvature.x + dbar_v + v.bracket(v).scale(HALF)
        report.add("end_curvature", end.curvature.x == expected, witness=(end.curvature.x - expected).render())
        expected = self.mixed.x + u.pdb() + d0.bracket(u) + v.delta() + f0.bracket(v) + v.bracket(u)
        report.add("end_mixed", end.mixed.x == expected, witness=(end.mixed.x - expected).render())
        residual = u.delta() + f0.bracket(u) + u.bracket(u).scale(HALF)
        report.add("path_residual", residual.is_zero(), witness=residual.render())
        if not report.passed:
            failed = report.failures()[0]
            raise InconsistencyError(f"Homotopy path check {failed.name} failed: {failed.witness}")
        logger.info(f"Homotopy path on {self.table.name!r}: end curvature {'zero' if end.curvature.is_zero() else 'nonzero'}")
        return ProblemPath(self, end, GluedElement(end.table, v), GluedElement(end.table, u), report)


def glued_problem(
    twist: TwistData,
    t_neg: int = 1,
    t_cap: int = 2,
    reverse: bool = False,
    escalation: int = DEFAULT_ESCALATION,
    retraction: Retraction | None = None,
) -> GluedMCProblem:
    """
    The Maurer-Cartan problem of the glued model of a twist.

    Args:
        twist: global operators from solve_global_operators
        t_neg, t_cap: the t-window
        reverse: contraction order of the Čech splittings
        escalation: polynomial degree escalation of the form extensions
        retraction: supplied (π, ι, h) for the local table; computed when None

    Raises:
        IncompatibleDataError: a negative window, or a covered support that is not acyclic
        InconsistencyError: the frame fails to untwist or to glue
    """
    if t_neg < 0 or t_cap < 0:
        raise IncompatibleDataError(f"t-window [−{t_neg}, {t_cap}] must have t_neg, t_cap ≥ 0")
    system = twist.system
    space = covered_space(system)
    support = _support_report(space)
    if not support.passed:
        ranks = support.result("support_acyclic").witness
        raise IncompatibleDataError(f"The covered part of the nerve is not acyclic: ranks {ranks}")
    theta = untwisting_frame(system, reverse, escalation)
    operators, report = frame_operators(twist, theta)
    report.extend(support)
    if not report.passed:
        failed = report.failures()[0]
        raise InconsistencyError(f"Untwisting frame check {failed.name} failed: {failed.witness}")
    model = GluedModel(space, operators["d"], operators["f"], f"glued[{system.table.name}]")
    logger.info(
        f"Glued model on {len(space.support)} simplices: curvature "
        f"{'zero' if operators['curvature'].is_zero() else 'nonzero'}"
    )
    return GluedMCProblem(
        table=model,
        curvature=GluedElement(model, operators["curvature"]),
        mixed=GluedElement(model, operators["mixed"]),
        t_neg=t_neg,
        t_cap=t_cap,
        twist=twist,
        theta=theta,
        reverse=reverse,
        escalation=escalation,
        supplied=retraction,
        frame_report=report,
    )
