"""
twist_service.py — Global almost dgBV operators from a gluing system.

Responsible for:
- solve_global_operators(): 𝔡_α ∈ TW^{−1,1}(V_α) and 𝔣_α ∈ TW^{0,0}(V_α) with
  𝔡_α − g_{βα}(𝔡_β) = w_{αβ} and 𝔣_α − g_{βα}(𝔣_β) = f_{αβ}, the twisted
  operators ∂̄_α = ∂̄ + [𝔡_α, ·] and Δ_α = Δ + [𝔣_α, ·], the curvature terms
  𝔩_α = ∂̄𝔡_α + ½[𝔡_α, 𝔡_α] and 𝔶_α = ∂̄𝔣_α + Δ𝔡_α + [𝔡_α, 𝔣_α], and the
  volume forms ω_α = exp(𝔣_α)⌟ω
- twist_ambiguity(): the global difference of two solutions
- solve_classical_gauge() / trivialize_charts(): gauge elements ϑ_α with
  exp(−ad ϑ_α)∘∂̄∘exp(ad ϑ_α) = ∂̄_α + [ψ_α, ·] for a global classical
  Maurer-Cartan element ψ, and the holomorphic gluing they induce
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from sympy import QQ

from core.dtos import CheckReport, SeriesKind
from core.services import lie_service
from core.services.errors import IncompatibleDataError, InconsistencyError
from core.services.gluing_service import ComparisonCocycles, GluingSystem, constant_value
from core.services.graded_service import ModuleElement
from core.services.nerve_service import simplex_faces
from core.services.sullivan_service import DEFAULT_ESCALATION, Cell, vform_add, vform_extend
from core.services.tw_service import TWElement, TWSpace, tw_primitive

logger = logging.getLogger(__name__)


def _bound(system: GluingSystem) -> int:
    return system.table.ring.k + system.table.dimension + 4


# ─────────────────────────────────────────────────────────────────────────────
# Čech splitting
# ─────────────────────────────────────────────────────────────────────────────

def cech_split(system: GluingSystem, r: dict, reverse: bool = False,
               escalation: int = DEFAULT_ESCALATION) -> dict:
    """
    c_α on V_α with c_α − c_β = r_{αβ}, for an untwisted cocycle r (α < β keys).

    Each simplex extends the faces of its apex chart's component; the other
    charts differ from the apex by r.
    """
    nerve = system.nerve
    charts = range(len(nerve.v_charts))
    comps: dict = {a: {} for a in charts}

    def r_comp(a, b, simplex):
        if a < b:
            return r[(a, b)].component(simplex) if (a, b) in r else {}
        return {key: -form for key, form in (r[(b, a)].component(simplex) if (b, a) in r else {}).items()}

    for simplex in nerve.u_simplices:
        index = nerve.index_set(simplex)
        if not index:
            continue
        star = index[-1] if reverse else index[0]
        if len(simplex) > 1:
            faces = [comps[star].get(face, {}) for _, face in simplex_faces(simplex)]
            comps[star][simplex] = vform_extend(Cell(len(simplex) - 1), faces, None, escalation)
        else:
            comps[star][simplex] = {}
        for beta in index:
            if beta != star:
                comps[beta][simplex] = vform_add(comps[star][simplex], r_comp(star, beta, simplex), -QQ.one)
    return {a: TWElement(system.space((a,)), comps[a]) for a in charts}


def twisted_split(system: GluingSystem, cocycle: dict, reverse: bool = False,
                  escalation: int = DEFAULT_ESCALATION) -> dict:
    """
    c_α with c_α − g_{βα}(c_β) = cocycle_{αβ}, solved weight by weight.

    Raises:
        InconsistencyError: a residual of too low weight, or a nonzero final residual
    """
    pairs = system.patching.pairs()
    c = {a: system.space((a,)).zero() for a in range(len(system.nerve.v_charts))}

    def residual():
        out = {}
        for a, b in pairs:
            space = system.space((a, b))
            out[(a, b)] = cocycle[(a, b)] - c[a].on(space) + system.gluing(b, a, c[b].on(space))
        return out

    for j in range(1, system.table.ring.k + 1):
        current = residual()
        low = [pair for pair, value in current.items() if not value.truncate(j - 1).is_zero()]
        if low:
            raise InconsistencyError(
                f"Twisted Čech residual on {system.nerve.v_label(low[0])} has weight below {j}"
            )
        step = cech_split(system, {pair: value.weight_part(j) for pair, value in current.items()}, reverse, escalation)
        c = {a: c[a] + step[a] for a in c}
    final = residual()
    bad = [pair for pair, value in final.items() if not value.is_zero()]
    if bad:
        raise InconsistencyError(f"Twisted Čech equation fails on {system.nerve.v_label(bad[0])}")
    return c


# ─────────────────────────────────────────────────────────────────────────────
# Twist data
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class TwistData:
    """Per-chart twisting elements, curvature terms and volume forms."""

    system: GluingSystem
    d: dict                              # α -> 𝔡_α
    f: dict                              # α -> 𝔣_α
    curvature: dict = field(default_factory=dict)    # α -> 𝔩_α
    mixed: dict = field(default_factory=dict)        # α -> 𝔶_α
    volumes: dict = field(default_factory=dict)      # α -> ω_α
    report: CheckReport | None = None

    def dbar(self, a: int, x: TWElement) -> TWElement:
        return x.pdb() + self.d[a].on(x.space).bracket(x)

    def delta(self, a: int, x: TWElement) -> TWElement:
        return x.delta() + self.f[a].on(x.space).bracket(x)

    def total_differential(self, a: int, m: TWElement) -> TWElement:
        """𝒹_α = ∂̄ + 𝓛_{𝔡_α} + ∂ + 𝔩_α⌟ on module elements over V_α."""
        d = self.d[a].on(m.space)
        return m.pdb() + d.lie_derivative(m) + m.d() + self.curvature[a].on(m.space).contract(m)

    def hat(self, a: int, x: TWElement) -> TWElement:
        """∂̂ = ∂̄_α + Δ_α + (𝔩_α + 𝔶_α)∧."""
        obstruction = (self.curvature[a] + self.mixed[a]).on(x.space)
        return self.dbar(a, x) + self.delta(a, x) + obstruction.wedge(x)

    def is_trivial(self) -> bool:
        return all(v.is_zero() for v in list(self.d.values()) + list(self.f.values()))


def wedge_exponential(y: TWElement, bound: int) -> TWElement:
    one = TWElement.constant(y.space, y.table.one())
    return lie_service.exp_operator(lambda z: y.wedge(z), one, bound, "wedge exponential")


def glued_volume(system: GluingSystem, f: TWElement, a: int) -> TWElement:
    space = system.space((a,))
    omega = TWElement.constant(space, ModuleElement.volume(system.table), module=True)
    return wedge_exponential(f, _bound(system)).contract(omega)


def _probes(system: GluingSystem, space: TWSpace, extra=()) -> list[TWElement]:
    probes = [TWElement.constant(space, system.table.basis_element(n)) for n in range(system.table.dimension)]
    probes.extend(x.on(space) for x in extra)
    return probes


def _first_failure(cases) -> str | None:
    for ok, witness in cases:
        if not ok:
            return witness
    return None


def check_twist(twist: TwistData, cocycles: ComparisonCocycles) -> CheckReport:
    """The conjugation, curvature, gluing, volume and ∂̂ identities."""
    system = twist.system
    nerve = system.nerve
    report = CheckReport(subject=f"global_operators[{system.table.name}]")
    pairs = system.patching.pairs()
    charts = sorted(twist.d)

    def twisted_eq(name, values, target):
        def cases():
            for a, b in pairs:
                space = system.space((a, b))
                lhs = values[a].on(space) - system.gluing(b, a, values[b].on(space))
                rhs = target[(a, b)].on(space) if target is not None else space.zero()
                yield lhs == rhs, f"{nerve.v_label((a, b))}: {(lhs - rhs).render()}"
        failure = _first_failure(cases())
        report.add(name, failure is None, witness=failure)

    twisted_eq("d_solves_w", twist.d, cocycles.w)
    twisted_eq("f_solves_f", twist.f, cocycles.f)
    twisted_eq("curvature_glues", twist.curvature, None)
    twisted_eq("mixed_glues", twist.mixed, None)

    def chart_cases(check):
        for a in charts:
            space = system.space((a,))
            for x in _probes(system, space, (twist.d[a], twist.f[a])):
                yield check(a, x), f"{nerve.v_label((a,))} on {x.render()}"

    report.add("delta_square_zero", _first_failure(chart_cases(
        lambda a, x: twist.delta(a, twist.delta(a, x)).is_zero()
    )) is None)
    report.add("dbar_square_curvature", _first_failure(chart_cases(
        lambda a, x: twist.dbar(a, twist.dbar(a, x)) == twist.curvature[a].bracket(x)
    )) is None)
    report.add("dbar_delta_mixed", _first_failure(chart_cases(
        lambda a, x: twist.dbar(a, twist.delta(a, x)) + twist.delta(a, twist.dbar(a, x)) == twist.mixed[a].bracket(x)
    )) is None)
    nilpotent = all(
        (v.order() is None or v.order() >= 1)
        for v in list(twist.curvature.values()) + list(twist.mixed.values())
    )
    report.add("curvature_nilpotent", nilpotent)

    def glue_cases():
        for a, b in pairs:
            space = system.space((a, b))
            for x in _probes(system, space):
                for name, op in (("∂̄", twist.dbar), ("Δ", twist.delta)):
                    lhs = system.gluing(b, a, op(b, system.gluing(a, b, x)))
                    yield lhs == op(a, x), f"{name} on {nerve.v_label((a, b))}, {x.render()}"
    failure = _first_failure(glue_cases())
    report.add("operators_glue", failure is None, witness=failure)

    if system.table.module is not None:
        bound = _bound(system)

        def volume_cases():
            for a, b in pairs:
                space = system.space((a, b))
                G = system.exponent(a, b).on(space)
                moved = lie_service.exp_operator(
                    lambda m: (-G).lie_derivative(m), twist.volumes[b].on(space), bound, "𝓛_G"
                )
                yield moved == twist.volumes[a].on(space), nerve.v_label((a, b))
        failure = _first_failure(volume_cases())
        report.add("volume_glues", failure is None, witness=failure)

        def hat_cases():
            for a in charts:
                space = system.space((a,))
                omega = twist.volumes[a]
                for x in _probes(system, space, (twist.d[a], twist.f[a])):
                    lhs = twist.total_differential(a, x.contract(omega))
                    rhs = twist.hat(a, x).contract(omega)
                    yield lhs == rhs, f"{nerve.v_label((a,))} on {x.render()}"
        failure = _first_failure(hat_cases())
        report.add("hat_identity", failure is None, witness=failure)
    return report


def solve_global_operators(
    system: GluingSystem,
    cocycles: ComparisonCocycles,
    reverse: bool = False,
    escalation: int = DEFAULT_ESCALATION,
) -> TwistData:
    """
    Solve for 𝔡 and 𝔣 and assemble the twisted operators.

    Raises:
        InconsistencyError: the twisted Čech equations have no solution, or an
            identity fails after the solve
    """
    d = twisted_split(system, cocycles.w, reverse, escalation)
    f = twisted_split(system, cocycles.f, reverse, escalation)
    twist = TwistData(system, d, f)
    half = QQ(1, 2)
    for a in d:
        twist.curvature[a] = d[a].pdb() + d[a].bracket(d[a]).scale(half)
        twist.mixed[a] = f[a].pdb() + d[a].delta() + d[a].bracket(f[a])
        if system.table.module is not None:
            twist.volumes[a] = glued_volume(system, f[a], a)
    twist.report = check_twist(twist, cocycles)
    if not twist.report.passed:
        failed = twist.report.failures()[0]
        raise InconsistencyError(f"Global operator check {failed.name} failed: {failed.witness}")
    nonzero = [system.nerve.v_charts[a] for a, v in twist.curvature.items() if not v.is_zero()]
    logger.info(f"Global operators on {system.table.name!r}: curvature nonzero on {nonzero}")
    return twist


def twist_ambiguity(
    system: GluingSystem,
    cocycles: ComparisonCocycles,
    first: TwistData,
    escalation: int = DEFAULT_ESCALATION,
) -> tuple[dict, dict, CheckReport]:
    """
    Solve with the opposite contraction order and return the differences
    𝔳₁ = 𝔡' − 𝔡 and 𝔳₂ = 𝔣' − 𝔣 with the check that both are global.
    """
    second = solve_global_operators(system, cocycles, reverse=True, escalation=escalation)
    v1 = {a: second.d[a] - first.d[a] for a in first.d}
    v2 = {a: second.f[a] - first.f[a] for a in first.f}
    report = CheckReport(subject=f"twist_ambiguity[{system.table.name}]")
    for name, v in (("v1_global", v1), ("v2_global", v2)):
        failure = None
        for a, b in system.patching.pairs():
            space = system.space((a, b))
            if v[a].on(space) != system.gluing(b, a, v[b].on(space)):
                failure = system.nerve.v_label((a, b))
                break
        report.add(name, failure is None, witness=failure)
    return v1, v2, report


# ─────────────────────────────────────────────────────────────────────────────
# Classical Maurer-Cartan elements and holomorphic gluing
# ─────────────────────────────────────────────────────────────────────────────

def gauge_connection(theta: TWElement) -> TWElement:
    """Φ with exp(−ad ϑ)∘∂̄∘exp(ad ϑ) = ∂̄ + [Φ, ·]."""
    return -lie_service.series_apply(SeriesKind.T, theta, theta.pdb())


@dataclass
class GeometricGluing:
    """Gauge elements ϑ_α, the classical solution ψ_α and constant gluing exponents Ĝ_{αβ}."""

    theta: dict                          # α -> ϑ_α
    psi: dict                            # α -> ψ_α
    exponents: dict                      # (α, β) with α < β -> Element
    report: CheckReport


def holomorphic_exponents(system: GluingSystem, theta: dict) -> dict:
    """Ĝ_{αβ} = ϑ_β⊙G_{αβ}⊙(−ϑ_α) on V_αβ."""
    out = {}
    for a, b in system.patching.pairs():
        space = system.space((a, b))
        out[(a, b)] = lie_service.bch_many(theta[b].on(space), system.exponent(a, b), -theta[a].on(space))
    return out


def covered_space(system: GluingSystem) -> TWSpace:
    """The U-simplices lying in at least one V-chart."""
    nerve = system.nerve
    support = tuple(s for s in nerve.u_simplices if nerve.index_set(s))
    return TWSpace(nerve, system.table, support)


def solve_classical_gauge(twist: TwistData, reverse: bool = False,
                          escalation: int = DEFAULT_ESCALATION) -> dict:
    """
    ϑ_α ∈ TW^{−1,0}(V_α) making every Ĝ_{αβ} ∂̄-closed, weight by weight.

    At weight j the weight-j part E of Ĝ is split as ϑ_β − ϑ_α + (constant):
    ∂̄E is split over the charts, the global ∂̄-closed remainder is removed by a
    primitive on the whole cover, and the chart pieces are integrated.

    Raises:
        IncompatibleDataError: a ∂̄-equation without solution on this cover
        InconsistencyError: Ĝ is not ∂̄-closed after the step
    """
    system = twist.system
    charts = sorted(twist.d)
    theta = {a: system.space((a,)).zero() for a in charts}
    covered = covered_space(system)
    for j in range(1, system.table.ring.k + 1):
        exponents = holomorphic_exponents(system, theta)
        split = cech_split(
            system, {pair: G.weight_part(j).pdb() for pair, G in exponents.items()}, reverse, escalation
        )
        closed = {}
        for a in charts:
            for simplex, comp in split[a].pdb().comps.items():
                closed.setdefault(simplex, comp)
        remainder = TWElement(covered, closed)
        if not remainder.is_zero():
            correction = tw_primitive(remainder, escalation)
            split = {a: split[a] - correction.on(system.space((a,))) for a in charts}
        for a in charts:
            if not split[a].is_zero():
                theta[a] = theta[a] + tw_primitive(split[a], escalation)
        for pair, G in holomorphic_exponents(system, theta).items():
            if not G.truncate(j).pdb().is_zero():
                raise InconsistencyError(f"Ĝ_{system.nerve.v_label(pair)} is not ∂̄-closed at weight {j}")
        logger.debug(f"Classical gauge weight {j} solved on {len(charts)} charts")
    return theta


def trivialize_charts(twist: TwistData, psi: dict, escalation: int = DEFAULT_ESCALATION) -> dict:
    """
    ϑ_α with gauge_connection(ϑ_α) = 𝔡_α + ψ_α, chart by chart.

    Raises:
        IncompatibleDataError: 𝔡_α + ψ_α is not gauge-trivial on the chart
    """
    system = twist.system
    theta = {}
    for a in sorted(twist.d):
        target = twist.d[a] + psi[a]
        t = system.space((a,)).zero()
        for j in range(1, system.table.ring.k + 1):
            gap = target - gauge_connection(t)
            if not gap.truncate(j - 1).is_zero():
                raise IncompatibleDataError(f"𝔡 + ψ on {system.nerve.v_label((a,))} is not Maurer-Cartan")
            part = gap.weight_part(j)
            if not part.is_zero():
                t = t - tw_primitive(part, escalation)
        theta[a] = t
    return theta


def psi_from_gauge(twist: TwistData, theta: dict) -> dict:
    return {a: gauge_connection(theta[a]) - twist.d[a] for a in theta}


def check_classical_solution(twist: TwistData, psi: dict) -> CheckReport:
    """ψ global and ∂̄_αψ_α + ½[ψ_α, ψ_α] + 𝔩_α = 0."""
    system = twist.system
    report = CheckReport(subject=f"classical_mc[{system.table.name}]")
    failure = None
    for a, b in system.patching.pairs():
        space = system.space((a, b))
        if psi[a].on(space) != system.gluing(b, a, psi[b].on(space)):
            failure = system.nerve.v_label((a, b))
            break
    report.add("psi_global", failure is None, witness=failure)
    failure = None
    for a, value in psi.items():
        residual = twist.dbar(a, value) + value.bracket(value).scale(QQ(1, 2)) + twist.curvature[a]
        if not residual.is_zero():
            failure = f"{system.nerve.v_label((a,))}: {residual.render()}"
            break
    report.add("psi_maurer_cartan", failure is None, witness=failure)
    return report


def holomorphic_gluing(twist: TwistData, theta: dict, psi: dict) -> GeometricGluing:
    """Read the constant exponents Ĝ_{αβ} and check the gluing they define."""
    system = twist.system
    table = system.table
    report = check_classical_solution(twist, psi)
    exponents = {}
    failure = None
    for pair, G in holomorphic_exponents(system, theta).items():
        vertex = next(s for s in G.space.support if len(s) == 1)
        value = constant_value(G.component(vertex), table) if G.component(vertex) else table.zero()
        if G != TWElement.constant(G.space, value):
            failure = system.nerve.v_label(pair)
        exponents[pair] = value
    report.add("gluing_constant", failure is None, witness=failure)

    def oriented(a, b):
        return exponents[(a, b)] if a < b else -exponents[(b, a)]

    failure = None
    for a, b, c in system.patching.triples():
        if lie_service.bch(oriented(b, c), oriented(a, b)) != oriented(a, c):
            failure = system.nerve.v_label((a, b, c))
            break
    report.add("gluing_cocycle", failure is None, witness=failure)
    report.add("gluing_identity_mod_m", all(e.order() is None or e.order() >= 1 for e in exponents.values()))

    basis = [table.basis_element(n) for n in range(table.dimension)]
    failure = None
    for pair, e in exponents.items():
        for x in basis:
            for y in basis:
                gx, gy = lie_service.exp_ad(e, x), lie_service.exp_ad(e, y)
                if lie_service.exp_ad(e, x.wedge(y)) != gx.wedge(gy):
                    failure = f"product on {system.nerve.v_label(pair)}"
                elif lie_service.exp_ad(e, x.bracket(y)) != gx.bracket(gy):
                    failure = f"bracket on {system.nerve.v_label(pair)}"
                if failure:
                    break
            if failure:
                break
        if failure:
            break
    report.add("gluing_gerstenhaber", failure is None, witness=failure)
    return GeometricGluing(theta, psi, exponents, report)
