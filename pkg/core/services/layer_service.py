"""
layer_service.py — Polyvector series in the descendant variable t.

Responsible for:
- TVector: finite sums Σ_n x_n s^n with s = t^{1/2} and table coefficients
- lt_scale(): the scaling l_t(φ) = t^{(q−p−2)/2} φ and its inverse
- hat_t(): ∂̂_t = ∂̄ + tΔ + t^{−1}(𝔩 + t𝔶)∧, and the check that it is the
  rescaled s·l_t^{−1}∘∂̂∘l_t
- Retraction: (π, ι, h) for (PV⁰[t^{±1}], ∂̄₀ + tΔ₀) on the t-window
- supplied_retraction(): (π, ι, h) read from an instance, validated against the window complex
- hdr_report() / freeness_report(): Hodge-to-de-Rham degeneracy and freeness
  of the cohomology of ∂̂ over R_k (with Bockstein lifting of order-0 classes)

A TVector lives on a window [low, high] of s-powers. It stands for an element
of s^{low}PV[[s]] modulo s^{high+1}: powers above the window are dropped as in
any truncated power series, powers below it raise WindowOverflowError.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from sympy import QQ

from core.dtos import CheckReport
from core.services import lie_service, linalg_service
from core.services.errors import IncompatibleDataError, TruncationMismatchError, WindowOverflowError
from core.services.graded_service import (
    AlgebraTable,
    Element,
    accumulate,
    apply_unary,
    cohomology_basis,
    entries_from_coords,
    table_complex,
)
logger = logging.getLogger(__name__)


class TVector:
    """A Laurent polynomial in s = t^{1/2} with coefficients in a table."""

    __slots__ = ("table", "low", "high", "coeffs")

    def __init__(self, table: AlgebraTable, low: int, high: int, coeffs: dict | None = None):
        if low > high:
            raise IncompatibleDataError(f"Empty window [{low}, {high}]")
        self.table = table
        self.low = low
        self.high = high
        clean = {}
        for n, x in (coeffs or {}).items():
            if x.table is not table:
                raise TruncationMismatchError("TVector coefficient lives on another table")
            if x.is_zero() or n > high:
                continue
            if n < low:
                raise WindowOverflowError(f"s-power {n} below the window [{low}, {high}]")
            clean[n] = x
        self.coeffs = clean

    @classmethod
    def window(cls, table: AlgebraTable, t_neg: int, t_cap: int) -> "TVector":
        """The zero vector on the t-window [−t_neg, t_cap]."""
        return cls(table, -2 * t_neg, 2 * t_cap)

    def like(self, coeffs: dict) -> "TVector":
        return TVector(self.table, self.low, self.high, coeffs)

    def at(self, x: Element, power: int = 0) -> "TVector":
        """x·s^power on this window."""
        return self.like({power: x})

    def component(self, power: int) -> Element:
        return self.coeffs.get(power, self.table.zero())

    def _check(self, other: "TVector") -> None:
        if other.table is not self.table:
            raise TruncationMismatchError("TVectors over different tables")
        if (other.low, other.high) != (self.low, self.high):
            raise TruncationMismatchError(
                f"TVector windows differ: [{self.low}, {self.high}] vs [{other.low}, {other.high}]"
            )

    # ── linear structure ──────────────────────────────────────────────────────

    def __add__(self, other: "TVector") -> "TVector":
        self._check(other)
        out = dict(self.coeffs)
        for n, x in other.coeffs.items():
            out[n] = out[n] + x if n in out else x
        return self.like(out)

    def __neg__(self) -> "TVector":
        return self.like({n: -x for n, x in self.coeffs.items()})

    def __sub__(self, other: "TVector") -> "TVector":
        return self + (-other)

    def scale(self, c) -> "TVector":
        return self.like({n: x.scale(c) for n, x in self.coeffs.items()})

    def shift(self, n: int) -> "TVector":
        """Multiplication by s^n."""
        return self.like({m + n: x for m, x in self.coeffs.items()})

    def apply(self, op) -> "TVector":
        return self.like({n: op(x) for n, x in self.coeffs.items()})

    def _pair(self, other: "TVector", op) -> "TVector":
        self._check(other)
        out: dict = {}
        for n, x in self.coeffs.items():
            for m, y in other.coeffs.items():
                if n + m > self.high:
                    continue
                z = op(x, y)
                if not z.is_zero():
                    out[n + m] = out[n + m] + z if n + m in out else z
        return self.like(out)

    def bracket(self, other: "TVector") -> "TVector":
        return self._pair(other, lambda x, y: x.bracket(y))

    def wedge(self, other: "TVector") -> "TVector":
        return self._pair(other, lambda x, y: x.wedge(y))

    def pdb(self) -> "TVector":
        return self.apply(lambda x: x.pdb())

    def delta(self) -> "TVector":
        return self.apply(lambda x: x.delta())

    def dbar_t(self) -> "TVector":
        """(∂̄ + tΔ)."""
        return self.pdb() + self.delta().shift(2)

    # ── gradings ──────────────────────────────────────────────────────────────

    def degrees(self) -> set[int]:
        out = set()
        for x in self.coeffs.values():
            out |= x.degrees()
        return out

    def bidegree_part(self, p: int, q: int) -> "TVector":
        return self.apply(lambda x: x.bidegree_part(p, q))

    def is_zero(self) -> bool:
        return not self.coeffs

    def order(self) -> int | None:
        orders = [x.order() for x in self.coeffs.values()]
        orders = [o for o in orders if o is not None]
        return min(orders) if orders else None

    def weight_part(self, w: int) -> "TVector":
        return self.apply(lambda x: x.weight_part(w))

    def truncate(self, max_weight: int) -> "TVector":
        return self.apply(lambda x: x.truncate(max_weight))

    def restrict(self, l: int) -> "TVector":
        table = self.table.over(self.table.ring.restrict(l))
        return TVector(table, self.low, self.high, {n: x.restrict(l) for n, x in self.coeffs.items()})

    def rewindow(self, low: int, high: int) -> "TVector":
        return TVector(self.table, low, high, self.coeffs)

    def min_power(self) -> int | None:
        return min(self.coeffs) if self.coeffs else None

    def __eq__(self, other):
        if not isinstance(other, TVector):
            return NotImplemented
        return self.table is other.table and self.coeffs == other.coeffs

    __hash__ = None

    def render(self) -> str:
        if not self.coeffs:
            return "0"
        parts = []
        for n in sorted(self.coeffs):
            power = "" if n == 0 else (f"t^{n // 2}" if n % 2 == 0 else f"s^{n}")
            parts.append(f"[{self.coeffs[n].render()}]{'*' + power if power else ''}")
        return " + ".join(parts)

    def __repr__(self) -> str:
        return f"TVector({self.render()})"


def wedge_exp_t(y: TVector, bound: int) -> TVector:
    """exp_∧(y) for an even TVector y."""
    one = y.at(y.table.one())
    return lie_service.exp_operator(lambda z: y.wedge(z), one, bound, "wedge exponential in t")


# ─────────────────────────────────────────────────────────────────────────────
# Scaling and the rescaled operator
# ─────────────────────────────────────────────────────────────────────────────

def lt_exponent(table: AlgebraTable, i: int) -> int:
    """q − p − 2 for the basis vector i, in units of s."""
    p, q = table.bidegrees[i]
    return q - p - 2


def lt_scale(x: TVector, inverse: bool = False) -> TVector:
    """
    l_t(φ) = t^{(q−p−2)/2}φ on each bidegree piece (or its inverse).

    Raises:
        WindowOverflowError: a power leaves the window
    """
    direction = -1 if inverse else 1
    table = x.table
    grouped: dict = {}
    for n, element in x.coeffs.items():
        for (i, m), c in element.coords.items():
            power = n + direction * lt_exponent(table, i)
            if power < x.low or power > x.high:
                raise WindowOverflowError(
                    f"l_t moves {table.labels[i]} to s-power {power}, outside [{x.low}, {x.high}]"
                )
            accumulate(grouped.setdefault(power, {}), (i, m), c)
    return x.like({n: Element(table, coords) for n, coords in grouped.items()})


def hat_t(x: TVector, curvature: Element, mixed: Element) -> TVector:
    """∂̂_t x = (∂̄ + tΔ)x + t^{−1}𝔩∧x + 𝔶∧x."""
    out = x.dbar_t()
    if not curvature.is_zero():
        out = out + x.at(curvature).wedge(x).shift(-2)
    if not mixed.is_zero():
        out = out + x.at(mixed).wedge(x)
    return out


def hat(x: Element, curvature: Element, mixed: Element) -> Element:
    """∂̂ = ∂̄ + Δ + (𝔩 + 𝔶)∧."""
    return x.pdb() + x.delta() + (curvature + mixed).wedge(x)


def check_hat_t(table: AlgebraTable, curvature: Element, mixed: Element) -> CheckReport:
    """s·l_t^{−1}∘∂̂∘l_t = ∂̄ + tΔ + t^{−1}(𝔩 + t𝔶)∧ on every basis vector."""
    report = CheckReport(subject=f"hat_t[{table.name}]")
    spread = max(abs(lt_exponent(table, i)) for i in range(table.dimension)) + 4
    zero = TVector(table, -2 * spread, 2 * spread)
    failure = None
    for i in range(table.dimension):
        x = zero.at(table.basis_element(i))
        scaled = lt_scale(x)
        moved = scaled.apply(lambda y: hat(y, curvature, mixed))
        lhs = lt_scale(moved, inverse=True).shift(1)
        rhs = hat_t(x, curvature, mixed)
        if lhs != rhs:
            failure = f"{table.labels[i]}: {lhs.render()} vs {rhs.render()}"
            break
    report.add("rescaled_operator", failure is None, witness=failure)
    roundtrip = all(
        lt_scale(lt_scale(zero.at(table.basis_element(i))), inverse=True) == zero.at(table.basis_element(i))
        for i in range(table.dimension)
    )
    report.add("lt_roundtrip", roundtrip)
    return report


# ─────────────────────────────────────────────────────────────────────────────
# Retraction data at order 0
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class Retraction:
    """
    π, ι, h for (PV₀ ⊗ span{t^n : low ≤ 2n ≤ high}, ∂̄₀ + tΔ₀), powers above the
    window set to zero.

    Vectors are sparse dicts over the keys (s-power, basis index).
    """

    table: AlgebraTable                  # the order-0 table
    low: int
    high: int
    basis: dict                          # degree -> [(power, index)]
    complex_: linalg_service.CochainComplex
    pieces: dict = field(default_factory=dict)
    _split: dict = field(default_factory=dict, repr=False)

    def key_index(self, degree: int) -> dict:
        return {key: n for n, key in enumerate(self.basis.get(degree, []))}

    def _decomposition(self, degree: int):
        """Solver over [B | H | C] for the degree, and the sizes of the blocks."""
        if degree in self._split:
            return self._split[degree]
        dim = self.complex_.dims.get(degree, 0)
        incoming = [c for c in (self.complex_.maps.get(degree - 1) or []) if c]
        b_cols = [incoming[p] for p in linalg_service.pivot_columns(incoming, dim)] if incoming else []
        piece = self.pieces[degree]
        h_cols = list(piece.representatives)
        identity = [{n: QQ.one} for n in range(dim)]
        cycles = piece.cycles
        picked = linalg_service.pivot_columns(cycles + identity, dim)
        c_cols = [identity[p - len(cycles)] for p in picked if p >= len(cycles)]
        solver = linalg_service.LinearSolver(b_cols + h_cols + c_cols, dim)
        self._split[degree] = (solver, b_cols, len(h_cols), c_cols)
        return self._split[degree]

    def project(self, vec: dict, degree: int) -> list:
        """π: coordinates of the harmonic part."""
        if degree not in self.pieces:
            return []
        if not vec:
            return [QQ.zero] * self.pieces[degree].rank
        solver, b_cols, nh, _ = self._decomposition(degree)
        sol = solver.solve(vec)
        return [sol.get(len(b_cols) + j, QQ.zero) for j in range(nh)]

    def include(self, coords: list, degree: int) -> dict:
        """ι: a combination of the chosen representatives."""
        out: dict = {}
        for c, rep in zip(coords, self.pieces[degree].representatives):
            out = linalg_service.vec_add(out, rep, c)
        return out

    def homotopy(self, vec: dict, degree: int) -> dict:
        """h: degree → degree − 1, inverting d from the complement onto the boundaries."""
        if not vec or degree - 1 not in self.pieces:
            return {}
        solver, b_cols, _, _ = self._decomposition(degree)
        sol = solver.solve(vec)
        boundary = {}
        for j, col in enumerate(b_cols):
            c = sol.get(j)
            if c:
                boundary = linalg_service.vec_add(boundary, col, c)
        if not boundary:
            return {}
        _, _, _, c_cols = self._decomposition(degree - 1)
        images = [self.complex_.differential(degree - 1, col) for col in c_cols]
        primitive = linalg_service.LinearSolver(images, self.complex_.dims.get(degree, 0)).solve(boundary)
        out: dict = {}
        for j, c in (primitive or {}).items():
            out = linalg_service.vec_add(out, c_cols[j], c)
        return out

    def differential(self, vec: dict, degree: int) -> dict:
        return self.complex_.differential(degree, vec)

    def check(self) -> CheckReport:
        """π∘ι = id and dh + hd = id − ιπ on every basis vector."""
        report = CheckReport(subject=f"retraction[{self.table.name}]")
        failure = None
        for degree, piece in sorted(self.pieces.items()):
            for j in range(piece.rank):
                unit = [QQ.one if n == j else QQ.zero for n in range(piece.rank)]
                if self.project(self.include(unit, degree), degree) != unit:
                    failure = f"π∘ι in degree {degree}"
            for n in range(self.complex_.dims.get(degree, 0)):
                e = {n: QQ.one}
                lhs = linalg_service.vec_add(
                    self.differential(self.homotopy(e, degree), degree - 1),
                    self.homotopy(self.differential(e, degree), degree + 1),
                )
                rhs = linalg_service.vec_add(e, self.include(self.project(e, degree), degree), -QQ.one)
                if linalg_service.vec_add(lhs, rhs, -QQ.one):
                    failure = f"dh + hd ≠ id − ιπ at {self.basis[degree][n]}"
                    break
            if failure:
                break
        report.add("homotopy_retraction", failure is None, witness=failure)
        return report

    # ── TVector coordinates ───────────────────────────────────────────────────

    def vectors(self, x: TVector, degree: int) -> dict:
        """{mono: vector} splitting x by coefficient monomial."""
        index = self.key_index(degree)
        out: dict = {}
        for n, element in x.coeffs.items():
            for (i, m), c in element.coords.items():
                key = (n, i)
                if key not in index:
                    if self.table.degree(i) != degree:
                        raise IncompatibleDataError(f"{self.table.labels[i]} is not of degree {degree}")
                    raise WindowOverflowError(f"s-power {n} outside the retraction window [{self.low}, {self.high}]")
                out.setdefault(m, {})[index[key]] = c
        return out

    def tvector(self, parts: dict, degree: int, like: TVector) -> TVector:
        """Inverse of vectors() onto the table of `like`."""
        keys = self.basis.get(degree, [])
        grouped: dict = {}
        for m, vec in parts.items():
            for n, c in vec.items():
                power, i = keys[n]
                accumulate(grouped.setdefault(power, {}), (i, m), c)
        return like.like({n: Element(like.table, coords) for n, coords in grouped.items()})


def build_retraction(table: AlgebraTable, t_neg: int, t_cap: int) -> Retraction:
    """Echelon-split retraction for ∂̄₀ + tΔ₀ on PV₀ over the integer t-powers of the window."""
    base = table.over(table.ring.restrict(0))
    low, high = -2 * t_neg, 2 * t_cap
    powers = list(range(low, high + 1, 2))
    zero = base.ring.zero_mono
    basis: dict = {}
    for n in powers:
        for i in range(base.dimension):
            basis.setdefault(base.degree(i), []).append((n, i))
    index = {deg: {key: j for j, key in enumerate(keys)} for deg, keys in basis.items()}
    maps = {}
    for deg, keys in basis.items():
        target = index.get(deg + 1, {})
        columns = []
        for n, i in keys:
            col: dict = {}
            for shift, tensor in ((0, base.pdb or {}), (2, base.delta or {})):
                if n + shift > high:
                    continue
                for (j, m), c in apply_unary(tensor, {(i, zero): QQ.one}, 0).items():
                    row = target[(n + shift, j)]
                    col[row] = col.get(row, QQ.zero) + c
            columns.append({r: c for r, c in col.items() if c})
        maps[deg] = columns
    complex_ = linalg_service.CochainComplex(dims={d: len(k) for d, k in basis.items()}, maps=maps)
    retraction = Retraction(base, low, high, basis, complex_)
    retraction.pieces = linalg_service.cohomology(complex_)
    logger.info(
        f"Retraction on {table.name!r}: window [{low}, {high}], "
        f"ranks {{{', '.join(f'{d}: {p.rank}' for d, p in sorted(retraction.pieces.items()))}}}"
    )
    return retraction


class SuppliedRetraction(Retraction):
    """
    A retraction whose π, ι and h are given rather than computed.

    include[degree] lists the representatives, project[degree] the matching
    coordinate functionals and homotopy[degree] maps basis positions to
    vectors of degree − 1. Degrees absent from the data have no harmonic part
    and a zero homotopy.
    """

    def __init__(self, computed: Retraction, include: dict, project: dict, homotopy: dict):
        super().__init__(computed.table, computed.low, computed.high, computed.basis, computed.complex_, computed.pieces)
        self.supplied_include = include
        self.supplied_project = project
        self.supplied_homotopy = homotopy

    def harmonic_rank(self, degree: int) -> int:
        return len(self.supplied_include.get(degree, []))

    def project(self, vec: dict, degree: int) -> list:
        rows = self.supplied_project.get(degree, [])
        return [sum((row.get(n, QQ.zero) * c for n, c in vec.items()), QQ.zero) for row in rows]

    def include(self, coords: list, degree: int) -> dict:
        out: dict = {}
        for c, rep in zip(coords, self.supplied_include.get(degree, [])):
            out = linalg_service.vec_add(out, rep, c)
        return out

    def homotopy(self, vec: dict, degree: int) -> dict:
        images = self.supplied_homotopy.get(degree, {})
        out: dict = {}
        for n, c in vec.items():
            if n in images:
                out = linalg_service.vec_add(out, images[n], c)
        return out

    def check(self) -> CheckReport:
        """π∘ι = id, dh + hd = id − ιπ on every basis vector, and the harmonic ranks."""
        report = CheckReport(subject=f"retraction[{self.table.name}]")
        failure = None
        for degree in sorted(self.basis):
            rank = self.harmonic_rank(degree)
            for j in range(rank):
                unit = [QQ.one if n == j else QQ.zero for n in range(rank)]
                if self.project(self.include(unit, degree), degree) != unit:
                    failure = f"π∘ι in degree {degree}"
                    break
            if failure:
                break
            for n in range(self.complex_.dims.get(degree, 0)):
                e = {n: QQ.one}
                lhs = linalg_service.vec_add(
                    self.differential(self.homotopy(e, degree), degree - 1),
                    self.homotopy(self.differential(e, degree), degree + 1),
                )
                rhs = linalg_service.vec_add(e, self.include(self.project(e, degree), degree), -QQ.one)
                if linalg_service.vec_add(lhs, rhs, -QQ.one):
                    failure = f"dh + hd ≠ id − ιπ at {self.basis[degree][n]}"
                    break
            if failure:
                break
        report.add("homotopy_retraction", failure is None, witness=failure)
        ranks = {d: self.harmonic_rank(d) for d in self.basis}
        expected = {d: self.pieces[d].rank if d in self.pieces else 0 for d in self.basis}
        bad = [d for d in sorted(ranks) if ranks[d] != expected[d]]
        report.add("harmonic_ranks", not bad, witness=f"degree {bad[0]}: {ranks[bad[0]]} vs {expected[bad[0]]}" if bad else None)
        return report


def supplied_retraction(
    table: AlgebraTable,
    t_neg: int,
    t_cap: int,
    include: dict,
    project: dict,
    homotopy: dict,
) -> SuppliedRetraction:
    """
    Validate supplied (π, ι, h) for the order-0 window complex of a table.

    Args:
        table: the table the retraction is for
        t_neg, t_cap: the t-window
        include: degree -> [{(s-power, index): c}] representatives
        project: degree -> [{(s-power, index): c}] coordinate functionals
        homotopy: degree -> {(s-power, index): {(s-power, index): c}}

    Raises:
        IncompatibleDataError: unknown keys, mismatched degrees, or failed identities
    """
    computed = build_retraction(table, t_neg, t_cap)

    def positions(degree: int, vec: dict, what: str) -> dict:
        index = computed.key_index(degree)
        out = {}
        for key, c in vec.items():
            if key not in index:
                raise IncompatibleDataError(f"{what}: {key} is not a degree {degree} key of the window")
            if c:
                out[index[key]] = QQ(c)
        return out

    inc = {d: [positions(d, v, f"include[{d}]") for v in vectors] for d, vectors in include.items()}
    proj = {d: [positions(d, v, f"project[{d}]") for v in rows] for d, rows in project.items()}
    for d in set(inc) | set(proj):
        if len(inc.get(d, [])) != len(proj.get(d, [])):
            raise IncompatibleDataError(f"Degree {d}: {len(inc.get(d, []))} representatives, {len(proj.get(d, []))} functionals")
    hom = {}
    for d, images in homotopy.items():
        index = computed.key_index(d)
        hom[d] = {}
        for key, vec in images.items():
            if key not in index:
                raise IncompatibleDataError(f"homotopy[{d}]: {key} is not a degree {d} key of the window")
            hom[d][index[key]] = positions(d - 1, vec, f"homotopy[{d}]")
    retraction = SuppliedRetraction(computed, inc, proj, hom)
    report = retraction.check()
    if not report.passed:
        failed = report.failures()[0]
        raise IncompatibleDataError(f"Supplied retraction fails {failed.name}: {failed.witness}")
    logger.info(f"Supplied retraction on {table.name!r} accepted")
    return retraction


# ─────────────────────────────────────────────────────────────────────────────
# Degeneracy and freeness
# ─────────────────────────────────────────────────────────────────────────────

def hdr_report(table: AlgebraTable, t_cap: int, required=(1,)) -> CheckReport:
    """
    Hodge-to-de-Rham degeneracy at order 0.

    Per total degree, dim H(∂̄₀) is compared with dim H(∂̄₀ + Δ₀); the degrees in
    `required` must agree. The t-rank check asks H(PV₀[t]/t^{n+1}, ∂̄₀ + tΔ₀)
    to have rank (n+1)·dim H(∂̄₀) for n ≤ t_cap.
    """
    base = table.over(table.ring.restrict(0))
    report = CheckReport(subject=f"hdr[{table.name}]")
    dbar = cohomology_basis(base, "pdb").ranks()
    total = cohomology_basis(base, "pdb+delta").ranks()
    for degree in sorted(set(dbar) | set(total)):
        a, b = dbar.get(degree, 0), total.get(degree, 0)
        name = f"degree_{degree}"
        if degree in required:
            report.add(name, a == b, witness=f"dim H(∂̄₀)={a}, dim H(∂̄₀+Δ₀)={b}", detail=f"{a} vs {b}")
        else:
            report.add(name, True, detail=f"{a} vs {b}" + ("" if a == b else " (not required)"))
    for n in range(t_cap + 1):
        retraction = build_retraction(table, 0, n)
        ranks = {d: p.rank for d, p in retraction.pieces.items()}
        bad = [d for d in required if ranks.get(d, 0) != (n + 1) * dbar.get(d, 0)]
        report.add(f"t_rank_{n}", not bad, witness=f"degrees {bad}: {ranks}")
    return report


def hat_tensor(table: AlgebraTable, curvature: Element, mixed: Element) -> dict:
    """The unary tensor of ∂̂ = ∂̄ + Δ + (𝔩 + 𝔶)∧."""
    zero = table.ring.zero_mono
    out = {}
    for i in range(table.dimension):
        image = hat(Element(table, {(i, zero): QQ.one}), curvature, mixed)
        if image.coords:
            out[i] = entries_from_coords(image.coords)
    return out


def freeness_report(table: AlgebraTable, curvature: Element, mixed: Element) -> CheckReport:
    """
    Freeness of H(PV ⊗ R_l, ∂̂) over R_l for l ≤ k.

    Free of rank r_n in degree n iff dim_Q H^n = r_n·dim_Q R_l. Every order-0
    class is also lifted order by order to a ∂̂-cocycle; the first order where a
    lift fails is named.
    """
    k = table.ring.k
    report = CheckReport(subject=f"freeness[{table.name}]")
    base_table = table.over(table.ring.restrict(0))
    base = cohomology_basis(base_table, hat_tensor(base_table, curvature.restrict(0), mixed.restrict(0)))
    base_ranks = base.ranks()
    first_failure = None
    for l in range(k + 1):
        t_l = table.over(table.ring.restrict(l))
        tensor = hat_tensor(t_l, curvature.restrict(l), mixed.restrict(l))
        ranks = cohomology_basis(t_l, tensor).ranks()
        size = len(t_l.ring.monomials())
        bad = [d for d, r in base_ranks.items() if ranks.get(d, 0) != r * size]
        report.add(f"rank_order_{l}", not bad, witness=f"degrees {bad}: {ranks} vs {base_ranks}×{size}")
        if bad and first_failure is None:
            first_failure = l
        if l == 0:
            continue
        complex_, keys = table_complex(t_l, tensor)
        lifted = _bockstein(t_l, complex_, keys, base)
        report.add(f"bockstein_order_{l}", lifted is None, witness=lifted)
        if lifted is not None and first_failure is None:
            first_failure = l
    report.add("free", first_failure is None, witness=f"first failing order {first_failure}")
    logger.info(f"Freeness on {table.name!r}: first failing order {first_failure}")
    return report


def _bockstein(table: AlgebraTable, complex_, keys: dict, base) -> str | None:
    """Lift every order-0 representative c₀ to c₀ + x, x ∈ 𝔪, with ∂̂(c₀ + x) = 0."""
    for degree in sorted(base.pieces):
        index = {key: n for n, key in enumerate(keys.get(degree, []))}
        ideal = [n for key, n in index.items() if sum(key[1]) >= 1]
        outgoing = complex_.maps.get(degree) or []
        columns = [outgoing[n] for n in ideal]
        solver = linalg_service.LinearSolver(columns, complex_.dims.get(degree + 1, 0))
        for rep in base.representatives(degree):
            vec = {index[(i, table.ring.zero_mono)]: c for (i, _), c in rep.coords.items()}
            image = complex_.differential(degree, vec)
            if image and solver.solve(linalg_service.vec_scale(image, -QQ.one)) is None:
                return f"degree {degree} class {rep.render()}"
    return None
