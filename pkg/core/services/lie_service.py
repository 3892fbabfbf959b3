"""
lie_service.py — Nilpotent exponential calculus on tabulated dgLas.

Responsible for:
- bch(): the Baker-Campbell-Hausdorff product, truncated at the ring order
- series_apply(): exp(ad_a), (exp(ad_a) - 1)/ad_a and T(ad_a) on an element
- gauge_act(): the gauge action exp(ϑ)⋆ξ
- bv_exp_identity_check(): the exponential identities of a BV algebra acting
  on a volume element

The functions are written against a small duck-typed interface (+, -,
scale, bracket, is_zero, order, table.ring.k) so they apply both to
table Elements and to Thom-Whitney elements.
"""

from __future__ import annotations

import logging
from functools import lru_cache

from sympy import QQ, bernoulli, factorial

from core.dtos import CheckReport, SeriesKind
from core.services.errors import IncompatibleDataError, NotNilpotentError
from core.services.graded_service import Element, ModuleElement, contract

logger = logging.getLogger(__name__)


@lru_cache(maxsize=None)
def series_coefficient(kind: str, n: int):
    """Coefficient of x^n in the named power series."""
    if kind == SeriesKind.EXP_AD:
        return QQ(1, int(factorial(n)))
    if kind == SeriesKind.EXPM1_OVER_AD:
        return QQ(1, int(factorial(n + 1)))
    if kind == SeriesKind.T:
        return QQ((-1) ** (n + 1), int(factorial(n + 1)))
    raise IncompatibleDataError(f"Unknown series {kind!r}; expected one of {sorted(SeriesKind.VALUES)}")


@lru_cache(maxsize=None)
def _bernoulli_weight(p: int):
    """B_{2p} / (2p)!"""
    return QQ.from_sympy(bernoulli(2 * p) / factorial(2 * p))


def require_nilpotent(a, what: str = "element") -> None:
    """
    Raises:
        NotNilpotentError: if a has a nonzero constant (order 0) part
    """
    order = a.order()
    if order is not None and order < 1:
        raise NotNilpotentError(f"{what} is not ≡ 0 mod 𝔪, so ad is not known to be nilpotent: {a.render()}")


# ─────────────────────────────────────────────────────────────────────────────
# Series in ad
# ─────────────────────────────────────────────────────────────────────────────

def series_apply(kind: str, a, b):
    """
    Σ_n c_n ad_a^n(b) for the series named by kind.

    Each ad_a raises the 𝔪-order, so the sum stops once the iterated bracket
    is truncated away.

    Raises:
        NotNilpotentError: if a is not ≡ 0 mod 𝔪
    """
    if kind not in SeriesKind.VALUES:
        raise IncompatibleDataError(f"Unknown series {kind!r}")
    require_nilpotent(a, "ad argument")
    result = b.scale(series_coefficient(kind, 0))
    term = b
    n = 0
    while True:
        n += 1
        term = a.bracket(term)
        if term.is_zero():
            break
        result = result + term.scale(series_coefficient(kind, n))
    return result


def exp_ad(a, b):
    return series_apply(SeriesKind.EXP_AD, a, b)


def gauge_act(theta, xi, d=None):
    """
    exp(ϑ)⋆ξ = e^{ad_ϑ}(ξ) − ((e^{ad_ϑ} − 1)/ad_ϑ)(dϑ).

    Args:
        theta: degree 0 element, ≡ 0 mod 𝔪
        xi: the element acted on
        d: callable differential; None means d = 0

    Raises:
        NotNilpotentError: if ϑ is not ≡ 0 mod 𝔪
    """
    require_nilpotent(theta, "gauge element")
    moved = series_apply(SeriesKind.EXP_AD, theta, xi)
    if d is None:
        return moved
    d_theta = d(theta)
    if d_theta.is_zero():
        return moved
    return moved - series_apply(SeriesKind.EXPM1_OVER_AD, theta, d_theta)


# ─────────────────────────────────────────────────────────────────────────────
# BCH product
# ─────────────────────────────────────────────────────────────────────────────

def bch(a, b):
    """
    a⊙b with exp(ad_a)exp(ad_b) = exp(ad_{a⊙b}).

    Uses the recursion for the homogeneous parts Z_n (Z_1 = a + b):

        (n+1) Z_{n+1} = ½[a − b, Z_n]
                        + Σ_{p≥1, 2p≤n} B_{2p}/(2p)! Σ_{k_1+…+k_{2p}=n} [Z_{k_1}, […, [Z_{k_{2p}}, a + b]…]]

    Z_n has 𝔪-order ≥ n, so parts beyond the ring order vanish.

    Raises:
        NotNilpotentError: if a or b is not ≡ 0 mod 𝔪
    """
    require_nilpotent(a, "left BCH factor")
    require_nilpotent(b, "right BCH factor")
    if a.is_zero():
        return b
    if b.is_zero():
        return a
    k = a.table.ring.k
    total = a + b
    half_diff = (a - b).scale(QQ(1, 2))
    parts = {1: total}
    nested: dict = {}

    def nested_sum(m: int, r: int):
        # Σ over compositions of m into r positive parts of [Z_{k_1}, […, [Z_{k_r}, a + b]…]]
        key = (m, r)
        if key in nested:
            return nested[key]
        if r == 0:
            value = total if m == 0 else total.like({})
        else:
            value = total.like({})
            for j in range(1, m - r + 2):
                inner = nested_sum(m - j, r - 1)
                if not inner.is_zero() and not parts[j].is_zero():
                    value = value + parts[j].bracket(inner)
        nested[key] = value
        return value

    for n in range(1, k):
        nxt = half_diff.bracket(parts[n])
        for p in range(1, n // 2 + 1):
            acc = nested_sum(n, 2 * p)
            if not acc.is_zero():
                nxt = nxt + acc.scale(_bernoulli_weight(p))
        parts[n + 1] = nxt.scale(QQ(1, n + 1))

    result = total
    for n in range(2, k + 1):
        result = result + parts[n]
    logger.debug(f"bch: {len(parts)} homogeneous parts up to order {k}")
    return result


def bch_many(*factors):
    """a_1⊙a_2⊙…⊙a_n, associated left to right."""
    if not factors:
        raise IncompatibleDataError("bch_many needs at least one factor")
    result = factors[0]
    for f in factors[1:]:
        result = bch(result, f)
    return result


# ─────────────────────────────────────────────────────────────────────────────
# BV exponential identities
# ─────────────────────────────────────────────────────────────────────────────

def exp_operator(op, x, bound: int, what: str = "operator"):
    """
    Σ_n op^n(x)/n!.

    Raises:
        NotNilpotentError: if op^n(x) is still nonzero after `bound` steps
    """
    result = x
    term = x
    for n in range(1, bound + 1):
        term = op(term).scale(QQ(1, n))
        if term.is_zero():
            return result
        result = result + term
    raise NotNilpotentError(f"{what} is not nilpotent within {bound} steps")


def wedge_exp(y: Element, bound: int) -> Element:
    """exp_∧(y) = Σ y^n / n! for an even element y."""
    return exp_operator(lambda w: y.wedge(w), y.table.one(), bound, "wedge exponential")


def delta_operator(v: Element):
    """δ_v(w) = Δ(vw) − Δ(v)w − (−1)^{|v|} vΔ(w) for v of degree −1."""
    dv = v.delta()

    def apply(w: Element) -> Element:
        return v.wedge(w).delta() - dv.wedge(w) + v.wedge(w.delta())

    return apply


def bv_exponent(v: Element, bound: int) -> Element:
    """Σ_{k≥0} δ_v^k(Δv)/(k+1)!"""
    step = delta_operator(v)
    term = v.delta()
    result = term
    for n in range(1, bound + 1):
        term = step(term)
        if term.is_zero():
            return result
        result = result + term.scale(QQ(1, int(factorial(n + 1))))
    raise NotNilpotentError(f"δ_v is not nilpotent on Δv within {bound} steps")


def bv_exp_identity_check(v: Element, omega: ModuleElement | None = None) -> CheckReport:
    """
    Verify exp([Δ, v∧])(1) = exp(Σ δ_v^k(Δv)/(k+1)!) and, when a volume
    element ω is given, exp([∂, v⌟])ω = exp(Σ δ_v^k(Δv)/(k+1)!)⌟ω.

    Precondition failures are recorded in the report and the corresponding
    identity is reported as not verified.
    """
    table = v.table
    report = CheckReport(subject=f"bv_exp_identity[{table.name}]")
    bound = table.ring.k + table.dimension + 2

    degrees = v.degrees()
    homogeneous = not degrees or degrees == {-1}
    report.add("v_degree_minus_one", homogeneous, witness=f"degrees {sorted(degrees)}")
    if not homogeneous:
        return report

    def bracket_delta_wedge(w: Element) -> Element:
        return v.wedge(w).delta() + v.wedge(w.delta())

    try:
        exponent = bv_exponent(v, bound)
        rhs = wedge_exp(exponent, bound)
        lhs = exp_operator(bracket_delta_wedge, table.one(), bound, "[Δ, v∧]")
    except NotNilpotentError as exc:
        report.add("nilpotent", False, witness=str(exc))
        return report
    report.add("nilpotent", True)
    report.add(
        "exp_delta_v_on_unit",
        lhs == rhs,
        witness=f"lhs={lhs.render()} rhs={rhs.render()}",
    )

    if omega is None:
        return report

    closed = omega.d().is_zero()
    report.add("volume_closed", closed, witness=f"∂ω = {omega.d().render()}")
    mismatch = None
    for i in range(table.dimension):
        alpha = table.basis_element(i)
        if contract(alpha.delta(), omega) != contract(alpha, omega).d():
            mismatch = table.labels[i]
            break
    report.add("volume_bv_relation", mismatch is None, witness=f"basis element {mismatch}")
    if not closed or mismatch is not None:
        return report

    def d_contract(m: ModuleElement) -> ModuleElement:
        return contract(v, m).d() + contract(v, m.d())

    try:
        lhs_m = exp_operator(d_contract, omega, bound, "[∂, v⌟]")
    except NotNilpotentError as exc:
        report.add("exp_d_v_on_volume", False, witness=str(exc))
        return report
    rhs_m = contract(rhs, omega)
    report.add(
        "exp_d_v_on_volume",
        lhs_m == rhs_m,
        witness=f"lhs={lhs_m.render()} rhs={rhs_m.render()}",
    )
    logger.debug(f"bv exponential identities on {table.name}: passed={report.passed}")
    return report
