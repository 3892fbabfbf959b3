"""
mc_service.py — The extended Maurer-Cartan equation with descendant variable t.

Responsible for:
- MCProblem: a global almost dgBV table with curvature 𝔩, mixed term 𝔶 and a t-window
- mc_residual(): (∂̄ + tΔ)φ + ½[φ, φ] + 𝔩 + t𝔶, with the operator cross-check
- freeness_and_hdr_check(): the report gating the solver
- solve_mc(): weight-by-weight solution through the order-0 retraction
- normalize_and_extract_classical(): ψ₀ = 0 and the classical element ψ₁
- transport(): gauge elements, homotopies of gluing systems and operator paths
- connecting_gauge(): the gauge element between two solutions of one problem
- extract_geometric_gluing(): chart trivializations and the holomorphic gluing

The solver talks to its problem through a small set of methods (probes,
bidegrees, exact_primitive, remove_negative_powers, remove_psi0,
preconditions, lift, shifted, adopt, along), so the glued model of a cover
(glued_service.GluedMCProblem) is solved by the same code as a finite table.

Solutions are computed at k_max and truncated; an order-l solution is the
restriction of the order-k one.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from sympy import QQ

from core.dtos import CheckReport, TransportKind
from core.services import layer_service, lie_service, linalg_service
from core.services.errors import (
    IncompatibleDataError,
    InconsistencyError,
    WindowOverflowError,
)
from core.services.graded_service import AlgebraTable, Element
from core.services.layer_service import Retraction, TVector, hat_t
from core.services.nerve_service import simplicial_complex
from core.services.polynomial_service import random_element, twist_table
from core.services.sullivan_service import DEFAULT_ESCALATION
from core.services.twist_service import (
    GeometricGluing,
    TwistData,
    holomorphic_gluing,
    psi_from_gauge,
    solve_classical_gauge,
    trivialize_charts,
)

logger = logging.getLogger(__name__)

HALF = QQ(1, 2)


# ─────────────────────────────────────────────────────────────────────────────
# Problems
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class MCProblem:
    """The data of the extended Maurer-Cartan equation on a finite global model."""

    table: AlgebraTable
    curvature: Element                   # 𝔩 ∈ PV^{−1,2}
    mixed: Element                       # 𝔶 ∈ PV^{0,1}
    t_neg: int = 1
    t_cap: int = 2
    twist: Element | None = None         # 𝔡 when the model is a planted twist
    supplied: Retraction | None = None   # (π, ι, h) from the instance document
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def k(self) -> int:
        return self.table.ring.k

    def zero(self) -> TVector:
        return TVector.window(self.table, self.t_neg, self.t_cap)

    def at(self, x: Element, power: int = 0) -> TVector:
        return self.zero().at(x, power)

    def retraction(self) -> Retraction:
        if self.supplied is not None:
            return self.supplied
        if "retraction" not in self._cache:
            self._cache["retraction"] = layer_service.build_retraction(self.table, self.t_neg, self.t_cap)
        return self._cache["retraction"]

    def nonnegative_retraction(self) -> Retraction:
        if "nonnegative" not in self._cache:
            self._cache["nonnegative"] = layer_service.build_retraction(self.table, 0, self.t_cap)
        return self._cache["nonnegative"]

    def restrict(self, l: int) -> "MCProblem":
        table = self.table.over(self.table.ring.restrict(l))
        return MCProblem(
            table=table,
            curvature=self.curvature.restrict(l),
            mixed=self.mixed.restrict(l),
            t_neg=self.t_neg,
            t_cap=self.t_cap,
            twist=self.twist.restrict(l) if self.twist is not None else None,
            supplied=self.supplied,
        )

    def pole_order(self) -> int:
        """Order of the t-pole of t^{−1}(𝔩 + t𝔶)."""
        return 0 if self.curvature.is_zero() else 1

    # ── solver interface ──────────────────────────────────────────────────────

    def probes(self) -> list[tuple[str, Element]]:
        """(label, element) pairs the operator identities are checked on."""
        return [(self.table.labels[i], self.table.basis_element(i)) for i in range(self.table.dimension)]

    def bidegrees(self) -> set:
        return set(self.table.bidegrees)

    def exact_primitive(self, target: TVector, degree: int) -> TVector | None:
        """
        ζ with (∂̄₀ + tΔ₀)ζ = target for a closed weight-homogeneous target.

        Returns:
            ζ, or None when the class of the target is nonzero

        Raises:
            InconsistencyError: the target is not closed
        """
        r = self.retraction()
        out = {}
        for m, vec in r.vectors(target, degree).items():
            if r.differential(vec, degree):
                raise InconsistencyError(
                    f"The {self.table.ring.label(m)} part in degree {degree} is not closed under ∂̄₀ + tΔ₀"
                )
            if any(r.project(vec, degree)):
                return None
            out[m] = r.homotopy(vec, degree)
        return r.tvector(out, degree - 1, target)

    def primitive(self, target: TVector, weight: int) -> TVector:
        return _primitive(self, target, weight)

    def remove_negative_powers(self, zeta: TVector, weight: int) -> tuple[TVector, int]:
        return _remove_negative_powers(self, zeta, weight)

    def remove_psi0(self, zeta: TVector) -> tuple[TVector, bool | None]:
        return _remove_psi0(self, zeta)

    def preconditions(self) -> CheckReport:
        """Degeneracy, freeness, the rescaled-operator identity and the retraction."""
        report = CheckReport(subject=f"mc_preconditions[{self.table.name}]")
        required = (1, 0) if self.t_neg > 0 else (1,)
        report.extend(curvature_report(self), "almost_dgbv.")
        report.extend(layer_service.hdr_report(self.table, self.t_cap, required), "hdr.")
        report.extend(layer_service.freeness_report(self.table, self.curvature, self.mixed), "freeness.")
        report.extend(layer_service.check_hat_t(self.table, self.curvature, self.mixed), "hat_t.")
        report.extend(self.retraction().check(), "retraction.")
        return report

    def lift(self, direction: TVector) -> TVector:
        """A first-order direction read against this problem's table."""
        if direction.table is not self.table:
            direction = direction.restrict(self.k)
        if direction.table is not self.table:
            raise IncompatibleDataError("ψ lives on another table")
        return direction.rewindow(*self._window())

    def random_gauge(self, rng) -> TVector:
        """A seeded degree −1 gauge element vanishing modulo 𝔪."""
        indices = [i for i in range(self.table.dimension) if self.table.degree(i) == -1]
        return self.at(random_element(rng, self.table, indices, nilpotent=True))

    def adopt(self, x: Element) -> Element:
        """The same coordinates on this problem's table."""
        return Element(self.table, x.coords)

    def shifted(self, v: Element) -> "MCProblem":
        return shift_problem(self, v)

    def along(self, homotopy) -> "ProblemPath":
        raise IncompatibleDataError(
            "Homotopy transport needs a problem built from a gluing system; "
            f"{self.table.name!r} is a finite global model"
        )

    def _window(self) -> tuple[int, int]:
        zero = self.zero()
        return zero.low, zero.high


@dataclass
class ProblemPath:
    """
    The structures at both ends of a homotopy, on one carrier.

    The end operators are ∂̄ + [𝔳, ·] and Δ + [𝔲, ·]; 𝔳 and 𝔲 live on the end table.
    """

    start: object
    end: object
    v: object
    u: object
    report: CheckReport


def build_problem(
    table: AlgebraTable,
    curvature: Element | None = None,
    mixed: Element | None = None,
    t_neg: int = 1,
    t_cap: int = 2,
    twist: Element | None = None,
    supplied: Retraction | None = None,
) -> MCProblem:
    """
    Validate and assemble an MCProblem.

    Raises:
        IncompatibleDataError: wrong degrees, 𝔩 or 𝔶 not ≡ 0 mod 𝔪, or a
            negative window
    """
    if t_neg < 0 or t_cap < 0:
        raise IncompatibleDataError(f"t-window [−{t_neg}, {t_cap}] must have t_neg, t_cap ≥ 0")
    curvature = curvature if curvature is not None else table.zero()
    mixed = mixed if mixed is not None else table.zero()
    for name, value in (("curvature", curvature), ("mixed term", mixed)):
        if value.table is not table:
            raise IncompatibleDataError(f"The {name} lives on another table")
        if value.degrees() - {1}:
            raise IncompatibleDataError(f"The {name} must have degree 1: {value.render()}")
        if value.order() is not None and value.order() < 1:
            raise IncompatibleDataError(f"The {name} must vanish modulo 𝔪: {value.render()}")
    return MCProblem(table, curvature, mixed, t_neg, t_cap, twist, supplied)


def problem_from_twist(base: AlgebraTable, d: Element, t_neg: int = 1, t_cap: int = 2) -> MCProblem:
    """
    The almost dgBV model ∂̄ + [𝔡, ·] over a dgBV table.

    𝔩 = ∂̄𝔡 + ½[𝔡, 𝔡] and 𝔶 = Δ𝔡, both moved to the twisted table.
    """
    table = twist_table(base, d)
    curvature = d.pdb() + d.bracket(d).scale(HALF)
    mixed = d.delta()
    return build_problem(
        table,
        Element(table, curvature.coords),
        Element(table, mixed.coords),
        t_neg,
        t_cap,
        twist=Element(table, d.coords),
    )


def curvature_report(problem) -> CheckReport:
    """∂̄² = [𝔩, ·], ∂̄Δ + Δ∂̄ = [𝔶, ·] and Δ² = 0 on every probe."""
    report = CheckReport(subject=f"almost_dgbv[{problem.table.name}]")
    checks = {
        "dbar_square": lambda x: x.pdb().pdb() == problem.curvature.bracket(x),
        "dbar_delta": lambda x: x.pdb().delta() + x.delta().pdb() == problem.mixed.bracket(x),
        "delta_square": lambda x: x.delta().delta().is_zero(),
    }
    probes = problem.probes()
    for name, check in checks.items():
        failure = next((label for label, x in probes if not check(x)), None)
        report.add(name, failure is None, witness=failure)
    return report


# ─────────────────────────────────────────────────────────────────────────────
# Residuals
# ─────────────────────────────────────────────────────────────────────────────

def _require_mc_shape(phi: TVector) -> None:
    extra = phi.degrees() - {0}
    if extra:
        raise IncompatibleDataError(f"A Maurer-Cartan element has degree 0, found degrees {sorted(extra)}")
    order = phi.order()
    if order is not None and order < 1:
        raise IncompatibleDataError(f"A Maurer-Cartan element must vanish modulo 𝔪: {phi.render()}")


def mc_residual(problem, phi: TVector) -> TVector:
    """
    (∂̄ + tΔ)φ + ½[φ, φ] + 𝔩 + t𝔶.

    Raises:
        IncompatibleDataError: φ not of degree 0 or not ≡ 0 mod 𝔪
    """
    _require_mc_shape(phi)
    out = phi.dbar_t() + phi.bracket(phi).scale(HALF)
    return out + phi.at(problem.curvature) + phi.at(problem.mixed, 2)


def operator_square_check(problem, phi: TVector) -> CheckReport:
    """(∂̄ + tΔ + [φ, ·])² = [R(φ), ·] on every probe."""
    residual = mc_residual(problem, phi)
    report = CheckReport(subject="mc_operator_square")

    def op(x: TVector) -> TVector:
        return x.dbar_t() + phi.bracket(x)

    failure = None
    for label, probe in problem.probes():
        x = phi.at(probe)
        if op(op(x)) != residual.bracket(x):
            failure = label
            break
    report.add("operator_square", failure is None, witness=failure)
    return report


def obstruction(problem, phi: TVector) -> TVector:
    """
    ∂̂_t(t·e^{φ/t}), which equals e^{φ/t}·R(φ).

    Computed on a window wide enough for e^{φ/t} and cut back to the window
    of φ. When R(φ) vanishes below weight j the weight-j part is exact.
    """
    k = problem.k
    wide = phi.rewindow(phi.low - 2 * (k + 2), phi.high + 2 * (k + 2))
    exponential = layer_service.wedge_exp_t(wide.shift(-2), k + 2)
    value = hat_t(exponential.shift(2), problem.curvature, problem.mixed)
    return phi.like({n: x for n, x in value.coeffs.items() if phi.low <= n <= phi.high})


# ─────────────────────────────────────────────────────────────────────────────
# Solutions
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class MCSolution:
    """φ at k_max with the first-order input, the transcript and the checks."""

    problem: object
    phi: TVector
    psi: TVector | None
    normalized: bool
    transcript: list = field(default_factory=list)
    report: CheckReport | None = None

    def at_order(self, l: int) -> TVector:
        return self.phi.restrict(l)

    def components(self) -> dict:
        """ψ_i ∈ PV^{−i,i} of the t⁰ part of φ."""
        head = self.phi.component(0)
        out = {}
        for p, q in sorted(self.problem.bidegrees()):
            if p + q == 0:
                part = head.bidegree_part(p, q)
                if not part.is_zero():
                    out[-p] = part
        return out


def freeness_and_hdr_check(problem) -> CheckReport:
    """
    The preconditions of the solver for this problem.

    Report only: nothing raises.
    """
    return problem.preconditions()


def _primitive(problem, target: TVector, weight: int) -> TVector:
    """ζ with (∂̄₀ + tΔ₀)ζ = −target, for a closed exact weight-homogeneous target."""
    zeta = problem.exact_primitive(target, 1)
    if zeta is None:
        raise InconsistencyError(f"Obstruction class at weight {weight} is nonzero")
    return -zeta


def _remove_negative_powers(problem: MCProblem, zeta: TVector, weight: int) -> tuple[TVector, int]:
    """
    Subtract closed elements until ζ has no negative t-powers.

    Each step removes the lowest negative part η by η − h((∂̄₀ + tΔ₀)η), which
    is closed. The number of steps is bounded by the pole order plus the
    window width.

    Raises:
        WindowOverflowError: the bound is exceeded
    """
    r = problem.retraction()
    bound = problem.pole_order() + (r.high - r.low) // 2
    keys = r.basis.get(0, [])
    parts = r.vectors(zeta, 0)
    steps = 0
    for m, vec in parts.items():
        for _ in range(bound + 1):
            negative = sorted({keys[p][0] for p in vec if keys[p][0] < 0})
            if not negative:
                break
            lowest = {p: c for p, c in vec.items() if keys[p][0] == negative[0]}
            closed = linalg_service.vec_add(lowest, r.homotopy(r.differential(lowest, 0), 1), -QQ.one)
            vec = linalg_service.vec_add(vec, closed, -QQ.one)
            steps += 1
        else:
            raise WindowOverflowError(
                f"Negative t-powers at weight {weight} survive {bound} removal steps; widen the t-window"
            )
        parts[m] = vec
    return r.tvector(parts, 0, zeta), steps


def psi0_correction(r: Retraction, target: Element, like: TVector) -> TVector | None:
    """
    A degree-0 cycle of the nonnegative window whose t⁰ (0,0)-part is `target`.

    Args:
        r: retraction over t-powers ≥ 0
        target: a (0,0) element on the table of `like`
        like: the TVector whose table and window the result takes

    Returns:
        The cycle, or None when no cycle carries that (0,0)-part
    """
    keys = r.basis.get(0, [])
    rows = {(0, i): n for n, i in enumerate(r.table.indices_of_bidegree(0, 0))}
    piece = r.pieces.get(0)
    cycles = piece.cycles if piece else []
    columns = [{rows[keys[p]]: c for p, c in cyc.items() if keys[p] in rows} for cyc in cycles]
    solver = linalg_service.LinearSolver(columns, len(rows))
    parts: dict = {}
    for (i, m), c in target.coords.items():
        parts.setdefault(m, {})[rows[(0, i)]] = c
    correction = {}
    for m, vec in parts.items():
        sol = solver.solve(vec)
        if sol is None:
            return None
        combo: dict = {}
        for p, c in sol.items():
            combo = linalg_service.vec_add(combo, cycles[p], c)
        correction[m] = combo
    return r.tvector(correction, 0, like)


def _remove_psi0(problem: MCProblem, zeta: TVector) -> tuple[TVector, bool | None]:
    """
    Subtract a closed element whose t⁰ (0,0)-part equals that of ζ.

    Returns:
        (ζ', removed) with removed None when there was nothing to remove
    """
    target = zeta.component(0).bidegree_part(0, 0)
    if target.is_zero():
        return zeta, None
    correction = psi0_correction(problem.nonnegative_retraction(), target, zeta)
    if correction is None:
        return zeta, False
    return zeta - correction, True


def solve_mc(
    problem,
    psi: TVector | None = None,
    k_max: int | None = None,
    normalize: bool = True,
) -> MCSolution:
    """
    Solve R(φ) = 0 weight by weight.

    At weight j the obstruction O = ∂̂_t(t·e^{φ/t}) has its lowest part in
    weight j, equal to R(φ)_j. Its class under the order-0 retraction must
    vanish; ζ = −h(O) then solves (∂̄₀ + tΔ₀)ζ = −O, negative t-powers are
    removed, and (when normalizing) the ψ₀ part is removed eagerly.

    Args:
        problem: an MCProblem or a problem glued from a gluing system
        psi: first-order direction, weight 1, closed under ∂̄₀ + tΔ₀
        k_max: order cap, at most the ring order; default the ring order
        normalize: remove ψ₀ at every weight

    Raises:
        IncompatibleDataError: ψ is not a closed weight-1 element of degree 0
        InconsistencyError: an obstruction class is nonzero or the final residual is not 0
        WindowOverflowError: the negative-power removal does not terminate
    """
    k = problem.k if k_max is None else k_max
    if k > problem.k:
        raise IncompatibleDataError(f"Order {k} exceeds the ring order {problem.k}")
    if k < problem.k:
        problem = problem.restrict(k)
        psi = psi.restrict(k) if psi is not None else None
    phi = problem.zero()
    if psi is not None:
        _require_mc_shape(psi)
        if psi.table is not problem.table:
            raise IncompatibleDataError("ψ lives on another table")
        if psi != psi.weight_part(1):
            raise IncompatibleDataError(f"ψ must be homogeneous of weight 1: {psi.render()}")
        if not psi.dbar_t().weight_part(1).is_zero():
            raise IncompatibleDataError(f"ψ is not closed under ∂̄₀ + tΔ₀: {psi.render()}")
        psi = psi.rewindow(phi.low, phi.high)

    transcript = []
    for j in range(1, k + 1):
        residual = mc_residual(problem, phi)
        if not residual.truncate(j - 1).is_zero():
            raise InconsistencyError(f"Residual has weight below {j}: {residual.truncate(j - 1).render()}")
        o = obstruction(problem, phi).weight_part(j)
        if o != residual.weight_part(j):
            raise InconsistencyError(f"∂̂_t(t·e^{{φ/t}}) disagrees with the residual at weight {j}")
        zeta = problem.primitive(o, j)
        if j == 1 and psi is not None:
            zeta = zeta + psi
        zeta, steps = problem.remove_negative_powers(zeta, j)
        removed = None
        if normalize:
            zeta, removed = problem.remove_psi0(zeta)
        phi = phi + zeta
        entry = {"weight": j, "obstruction_terms": sum(x.term_count() for x in o.coeffs.values()),
                 "negative_power_steps": steps, "psi0_removed": removed}
        transcript.append(entry)
        logger.info(
            f"MC weight {j}: obstruction with {entry['obstruction_terms']} terms, "
            f"{steps} negative-power steps, ψ₀ removed={removed}"
        )

    report = CheckReport(subject=f"mc_solution[{problem.table.name}]")
    final = mc_residual(problem, phi)
    report.add("residual_zero", final.is_zero(), witness=final.render())
    report.add("nonnegative_powers", (phi.min_power() or 0) >= 0, witness=phi.render())
    for l in range(1, k):
        restricted = problem.restrict(l)
        report.add(f"order_{l}", mc_residual(restricted, phi.restrict(l)).is_zero())
    report.extend(operator_square_check(problem, phi))
    if not final.is_zero():
        raise InconsistencyError(f"MC residual is nonzero after solving to order {k}: {final.render()}")
    return MCSolution(problem, phi, psi, normalize, transcript, report)

# ─────────────────────────────────────────────────────────────────────────────
# Normalization and the classical element
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class ClassicalElement:
    psi1: object
    solution: MCSolution
    report: CheckReport


def classical_residual(problem, psi1):
    """∂̄ψ₁ + ½[ψ₁, ψ₁] + 𝔩."""
    return psi1.pdb() + psi1.bracket(psi1).scale(HALF) + problem.curvature


def normalize_and_extract_classical(solution: MCSolution) -> ClassicalElement:
    """
    ψ₀ = 0 and ψ₁ with ∂̄ψ₁ + ½[ψ₁, ψ₁] + 𝔩 = 0.

    An unnormalized solution is solved again with eager normalization.

    Raises:
        InconsistencyError: the normalized solution is not a solution
    """
    problem = solution.problem
    normalized = solution if solution.normalized else solve_mc(problem, solution.psi, normalize=True)
    report = CheckReport(subject=f"classical[{problem.table.name}]")
    residual = mc_residual(problem, normalized.phi)
    if not residual.is_zero():
        raise InconsistencyError(f"Normalization changed the residual: {residual.render()}")
    report.add("residual_unchanged", True)
    parts = normalized.components()
    psi0 = parts.get(0)
    report.add("psi0_zero", psi0 is None, witness=psi0.render() if psi0 is not None else None)
    psi1 = parts.get(1, problem.table.zero())
    classical = classical_residual(problem, psi1)
    report.add("classical_mc", classical.is_zero(), witness=classical.render())
    for l in range(1, problem.k):
        restricted = problem.restrict(l)
        report.add(f"classical_order_{l}", classical_residual(restricted, psi1.restrict(l)).is_zero())
    logger.info(f"Classical element ψ₁ = {psi1.render()}")
    return ClassicalElement(psi1, normalized, report)


# ─────────────────────────────────────────────────────────────────────────────
# Transport
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class TransportResult:
    phi: TVector
    problem: object
    certificate: dict
    report: CheckReport


def gauge_path(problem, phi: TVector, theta: TVector) -> list[TVector]:
    """
    Coefficients F_n of F(σ) = exp(σϑ)⋆φ = Σ σ^n F_n.

    (n+1)F_{n+1} = [ϑ, F_n] − δ_{n0}(∂̄ + tΔ)ϑ.
    """
    coeffs = [phi]
    d_theta = theta.dbar_t()
    n = 0
    while True:
        nxt = theta.bracket(coeffs[-1])
        if n == 0:
            nxt = nxt - d_theta
        nxt = nxt.scale(QQ(1, n + 1))
        if nxt.is_zero():
            break
        coeffs.append(nxt)
        n += 1
        if n > problem.k + 1:
            raise InconsistencyError("Gauge path does not terminate within the ring order")
    return coeffs


def _carry(phi: TVector, problem) -> TVector:
    """The same coefficients on another problem's table."""
    return TVector(problem.table, phi.low, phi.high, {n: problem.adopt(x) for n, x in phi.coeffs.items()})


def _act(theta: TVector, phi: TVector) -> TVector:
    if theta.is_zero():
        return phi
    return lie_service.gauge_act(theta, phi, lambda x: x.dbar_t())


def connecting_gauge(problem, source: TVector, target: TVector) -> TVector | None:
    """
    ϑ with exp(ϑ)⋆source = target for two solutions of one problem.

    Built weight by weight: once the two agree below weight j, their
    weight-j gap is closed and ϑ_j is minus its primitive.

    Returns:
        ϑ, or None when some gap has a nonzero class
    """
    theta = source.like({})
    for j in range(1, problem.k + 1):
        gap = (target - _act(theta, source)).weight_part(j)
        if gap.is_zero():
            continue
        step = problem.exact_primitive(gap, 0)
        if step is None:
            logger.info(f"Solutions differ by a nonzero class at weight {j}")
            return None
        theta = theta - step
    if _act(theta, source) != target:
        raise InconsistencyError("The connecting gauge does not reach the target solution")
    return theta


def _gauge_transport(problem, phi: TVector, target, report: CheckReport) -> TransportResult:
    theta = target if target is not None else problem.zero()
    if not isinstance(theta, TVector) or theta.table is not problem.table:
        raise IncompatibleDataError("A gauge target is a TVector on the problem's table")
    if theta.degrees() - {-1}:
        raise IncompatibleDataError(f"A gauge element has degree −1: {theta.render()}")
    theta = theta.rewindow(phi.low, phi.high)
    moved = _act(theta, phi)
    path = gauge_path(problem, phi, theta) if not theta.is_zero() else [phi]
    end = path[0]
    for c in path[1:]:
        end = end + c
    report.add("path_start", path[0] == phi)
    report.add("path_end", end == moved, witness=end.render())
    failure = None
    for n in range(2 * len(path)):
        coefficient = path[n].dbar_t() if n < len(path) else phi.like({})
        for a in range(len(path)):
            b = n - a
            if 0 <= b < len(path):
                coefficient = coefficient + path[a].bracket(path[b]).scale(HALF)
        if n == 0:
            coefficient = coefficient + phi.at(problem.curvature) + phi.at(problem.mixed, 2)
        if not coefficient.is_zero():
            failure = f"σ^{n}: {coefficient.render()}"
            break
    report.add("path_residual", failure is None, witness=failure)
    residual = mc_residual(problem, moved)
    report.add("transported_residual", residual.is_zero(), witness=residual.render())
    return TransportResult(moved, problem, {"theta": theta, "path": path}, report)


def _homotopy_transport(solution: MCSolution, homotopy, report: CheckReport) -> TransportResult:
    """
    Carry φ along a homotopy of gluing systems to a solution at the far end.

    On the common carrier the end operators are ∂̄ + [𝔳, ·] and Δ + [𝔲, ·],
    so φ − 𝔳 − t𝔲 solves the end equation. It is then compared with a
    solution computed at the end from the same first-order direction.
    """
    problem = solution.problem
    phi = solution.phi
    path = problem.along(homotopy)
    report.extend(path.report)
    end = path.end
    carried = _carry(phi, end)
    moved = carried - carried.at(path.v) - carried.at(path.u, 2)
    back = _carry(moved + moved.at(path.v) + moved.at(path.u, 2), problem)
    report.add("start_matches", back == phi, witness=back.render())
    residual = mc_residual(end, moved)
    report.add("end_residual", residual.is_zero(), witness=residual.render())
    direction = moved.weight_part(1) - end.primitive(mc_residual(end, end.zero()).weight_part(1), 1)
    endpoint = solve_mc(end, direction, normalize=False)
    theta = connecting_gauge(end, moved, endpoint.phi)
    report.add(
        "gauge_to_endpoint",
        theta is not None,
        witness=None if theta is not None else "the solutions differ by a nonzero class",
    )
    certificate = {"homotopy": homotopy, "v": path.v, "u": path.u, "theta": theta, "endpoint": endpoint}
    return TransportResult(moved, end, certificate, report)


def _operator_transport(problem, phi: TVector, target, report: CheckReport) -> TransportResult:
    v = target if target is not None else problem.table.zero()
    if getattr(v, "table", None) is not problem.table:
        raise IncompatibleDataError("An operator-path target is an element of the problem's table")
    if v.degrees() - {0}:
        raise IncompatibleDataError(f"An operator path is given by a degree 0 element: {v.render()}")
    moved_problem = problem.shifted(v)
    moved = _carry(phi, moved_problem)
    moved = moved - moved.at(moved_problem.adopt(v))
    vt = phi.at(v)
    # σ-coefficients of R_σ(φ − σ𝔳) for ∂̄ + σ[𝔳, ·], 𝔩 + σ∂̄𝔳 + ½σ²[𝔳, 𝔳], 𝔶 + σΔ𝔳
    sigma1 = (vt.bracket(phi) - vt.dbar_t() - (phi.bracket(vt) + vt.bracket(phi)).scale(HALF)
              + phi.at(v.pdb()) + phi.at(v.delta(), 2))
    sigma2 = vt.bracket(vt).scale(HALF) - vt.bracket(vt) + phi.at(v.bracket(v).scale(HALF))
    report.add("path_residual_sigma_1", sigma1.is_zero(), witness=sigma1.render())
    report.add("path_residual_sigma_2", sigma2.is_zero())
    report.add("start_matches", mc_residual(problem, phi).is_zero())
    residual = mc_residual(moved_problem, moved)
    report.add("transported_residual", residual.is_zero(), witness=residual.render())
    return TransportResult(moved, moved_problem, {"v": v}, report)


def transport(solution: MCSolution, kind: str, target) -> TransportResult:
    """
    Move a solution along a gauge element, a homotopy or an operator path.

    Args:
        solution: a solved MCSolution
        kind: TransportKind.GAUGE takes ϑ (degree −1, ≡ 0 mod 𝔪);
            HOMOTOPY takes a prism gluing system from solve_homotopy;
            OPERATOR_PATH takes 𝔳 ∈ PV^{−1,1} on the problem's table
        target: ϑ, the homotopy or 𝔳

    Raises:
        IncompatibleDataError: unknown kind, malformed target, or a homotopy
            for a problem not built from a gluing system
        InconsistencyError: an endpoint or the transported residual fails
    """
    if kind not in TransportKind.VALUES:
        raise IncompatibleDataError(f"Unknown transport {kind!r}; expected one of {sorted(TransportKind.VALUES)}")
    problem = solution.problem
    report = CheckReport(subject=f"transport[{kind}]")
    if kind == TransportKind.GAUGE:
        result = _gauge_transport(problem, solution.phi, target, report)
    elif kind == TransportKind.HOMOTOPY:
        result = _homotopy_transport(solution, target, report)
    else:
        result = _operator_transport(problem, solution.phi, target, report)

    if not report.passed:
        failed = report.failures()[0]
        raise InconsistencyError(f"Transport check {failed.name} failed: {failed.witness}")
    logger.info(f"Transported MC solution along {kind}")
    return result


def shift_problem(problem: MCProblem, v: Element) -> MCProblem:
    """The structure at the end of the operator path ∂̄ + σ[𝔳, ·], σ = 1."""
    table = twist_table(problem.table, v)
    curvature = problem.curvature + v.pdb() + v.bracket(v).scale(HALF)
    mixed = problem.mixed + v.delta()
    twist = problem.twist + v if problem.twist is not None else None
    return MCProblem(
        table=table,
        curvature=Element(table, curvature.coords),
        mixed=Element(table, mixed.coords),
        t_neg=problem.t_neg,
        t_cap=problem.t_cap,
        twist=Element(table, twist.coords) if twist is not None else None,
        supplied=problem.supplied,
    )


# ─────────────────────────────────────────────────────────────────────────────
# Geometric gluing
# ─────────────────────────────────────────────────────────────────────────────

def chart_acyclicity(twist: TwistData) -> CheckReport:
    """Each chart's part of the nerve has the rational cohomology of a point."""
    nerve = twist.system.nerve
    report = CheckReport(subject="chart_acyclicity")
    for a in sorted(twist.d):
        support = nerve.simplices_in((a,))
        complex_, _ = simplicial_complex(nerve, support)
        ranks = linalg_service.cohomology_ranks(complex_)
        ok = ranks.get(0, 0) == 1 and all(r == 0 for n, r in ranks.items() if n > 0)
        report.add(f"chart_{nerve.v_charts[a]}", ok, witness=str(ranks))
    return report


def extract_geometric_gluing(
    twist: TwistData,
    psi: dict | None = None,
    reverse: bool = False,
    escalation: int = DEFAULT_ESCALATION,
) -> GeometricGluing:
    """
    Gauge elements ϑ_α with ∂̄_α + [ψ_α, ·] = e^{−ad ϑ_α}∂̄e^{ad ϑ_α}, and the gluing they induce.

    Without ψ, the classical solution is produced by the gauge solve itself.

    Raises:
        IncompatibleDataError: a chart is not acyclic, or 𝔡 + ψ is not gauge-trivial
        InconsistencyError: the induced gluing fails a check
    """
    acyclic = chart_acyclicity(twist)
    if not acyclic.passed:
        failed = acyclic.failures()[0]
        raise IncompatibleDataError(f"{failed.name} is not acyclic: ranks {failed.witness}")
    if psi is None:
        theta = solve_classical_gauge(twist, reverse, escalation)
        psi = psi_from_gauge(twist, theta)
    else:
        theta = trivialize_charts(twist, psi, escalation)
    gluing = holomorphic_gluing(twist, theta, psi)
    gluing.report.extend(acyclic)
    if not gluing.report.passed:
        failed = gluing.report.failures()[0]
        raise InconsistencyError(f"Geometric gluing check {failed.name} failed: {failed.witness}")
    logger.info(f"Geometric gluing on {len(gluing.exponents)} pairs")
    return gluing
