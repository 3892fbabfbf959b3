"""
vhs_service.py — Semi-infinite variation of Hodge structure on the Gauss-Manin data.

Responsible for:
- Section: elements of H_± = H ⊗ R_k((t^{1/2})) in lifted-class coordinates
- build_vhs(): H_+ (the image of l_t), the opposite module H_− spanned by
  elementary sections, the pairing built from a trace on PV^{−d,d}, the
  grading operator ∇_{t∂t}, and every containment and isotropy check
- miniversal_check(): the four miniversality conditions for a candidate ξ

Powers of t are stored as exponents of s = t^{1/2}. The elementary section
𝔢_i of doubled weight w_i spans R_k[t^{-1}]·s^{2d−4−w_i}𝔢_i inside H_−; the
class of a cycle of doubled Hodge index h sits in H_+ from s^{2d−2−h} on.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from sympy import QQ

from core.dtos import CheckReport
from core.services import linalg_service
from core.services.errors import IncompatibleDataError
from core.services.gauss_manin_service import (
    ElementaryFrame,
    HodgeBundle,
    SeriesMatrix,
    _qapply,
    _qis_zero,
    _qmul,
    elementary_frame,
    gm_connection,
    hodge_index,
    qinverse,
    qrank,
)
from core.services.graded_service import AlgebraTable, Element
from core.services.scalars_service import ArtinRing, ArtinSeries, format_rational, rational

logger = logging.getLogger(__name__)


# ─────────────────────────────────────────────────────────────────────────────
# Sections of H_±
# ─────────────────────────────────────────────────────────────────────────────

class Section:
    """Σ_e s^e Σ_i a_{e,i} c_i with a_{e,i} ∈ R_k and c_i the lifted classes."""

    __slots__ = ("ring", "n", "parts")

    def __init__(self, ring: ArtinRing, n: int, parts: dict | None = None):
        self.ring = ring
        self.n = n
        self.parts = {
            int(e): list(vec) for e, vec in (parts or {}).items()
            if any(not a.is_zero() for a in vec)
        }

    @classmethod
    def zero(cls, ring: ArtinRing, n: int) -> "Section":
        return cls(ring, n)

    @classmethod
    def at(cls, ring: ArtinRing, exponent: int, vec: list) -> "Section":
        return cls(ring, len(vec), {exponent: vec})

    def part(self, e: int) -> list:
        return self.parts.get(e, [ArtinSeries.zero(self.ring) for _ in range(self.n)])

    def exponents(self) -> list:
        return sorted(self.parts)

    def __add__(self, other: "Section") -> "Section":
        out = {e: list(v) for e, v in self.parts.items()}
        for e, vec in other.parts.items():
            base = out.get(e, [ArtinSeries.zero(self.ring) for _ in range(self.n)])
            out[e] = [a + b for a, b in zip(base, vec)]
        return Section(self.ring, self.n, out)

    def __neg__(self) -> "Section":
        return self.scale(-1)

    def __sub__(self, other: "Section") -> "Section":
        return self + (-other)

    def scale(self, c) -> "Section":
        return Section(self.ring, self.n, {e: [a * c for a in vec] for e, vec in self.parts.items()})

    def shift(self, e: int) -> "Section":
        """Multiplication by s^e."""
        return Section(self.ring, self.n, {x + e: vec for x, vec in self.parts.items()})

    def restrict(self, l: int) -> "Section":
        ring = self.ring.restrict(l)
        return Section(ring, self.n, {e: [a.restrict(l) for a in vec] for e, vec in self.parts.items()})

    def apply(self, matrix: SeriesMatrix) -> "Section":
        return Section(self.ring, self.n, {e: matrix.apply(vec) for e, vec in self.parts.items()})

    def is_zero(self) -> bool:
        return not self.parts

    def __eq__(self, other):
        if not isinstance(other, Section):
            return NotImplemented
        return self.ring == other.ring and (self - other).is_zero()

    __hash__ = None

    def to_json(self) -> dict:
        return {str(e): [a.to_json() for a in vec] for e, vec in sorted(self.parts.items())}

    def render(self) -> str:
        if not self.parts:
            return "0"
        terms = []
        for e, vec in sorted(self.parts.items()):
            for i, a in enumerate(vec):
                if not a.is_zero():
                    terms.append(f"({a.render()})·s^{e}·c{i}")
        return " + ".join(terms)

    def __repr__(self) -> str:
        return f"Section({self.render()})"


def connection(bundle: HodgeBundle, nu: int, section: Section) -> Section:
    """∇_ν on H_±, acting s-linearly."""
    m = bundle.matrices[nu]
    out = {}
    for e, vec in section.parts.items():
        moved = m.apply(vec)
        out[e] = [a + b.euler(nu) for a, b in zip(moved, vec)]
    return Section(section.ring, section.n, out)


def grading(d: int, section: Section) -> Section:
    """∇_{t∂t}: (2−d)/2 on classes, extended by t∂t on coefficients."""
    return Section(section.ring, section.n, {
        e: [a * (QQ(e, 2) + QQ(2 - d, 2)) for a in vec] for e, vec in section.parts.items()
    })


# ─────────────────────────────────────────────────────────────────────────────
# Flattened R_k-modules
# ─────────────────────────────────────────────────────────────────────────────

class _Flat:
    """R_k^n as a Q-space: coordinate (i, monomial) ↦ i·|monomials| + position."""

    def __init__(self, ring: ArtinRing, n: int):
        self.ring = ring
        self.n = n
        self.monomials = ring.monomials()
        self.position = {m: p for p, m in enumerate(self.monomials)}
        self.size = n * len(self.monomials)

    def vector(self, vec: list) -> dict:
        width = len(self.monomials)
        out = {}
        for i, a in enumerate(vec):
            for m, c in a.terms.items():
                out[i * width + self.position[m]] = c
        return out

    def multiples(self, vec: list) -> list[dict]:
        """The Q-span of R_k·vec."""
        return [self.vector([a * ArtinSeries.monomial(self.ring, m) for a in vec]) for m in self.monomials]


def _span_rank(columns: list[dict], size: int) -> int:
    return linalg_service.rank_of([c for c in columns if c], size) if columns else 0


# ─────────────────────────────────────────────────────────────────────────────
# VHS data
# ─────────────────────────────────────────────────────────────────────────────

def trace_vector(table: AlgebraTable, trace: dict, d: int) -> dict:
    """
    The trace as {basis index: rational}, supported on PV^{−d,d}.

    Raises:
        IncompatibleDataError: unknown label, or a value off the top bidegree
    """
    out = {}
    for label, value in trace.items():
        if label not in table.labels:
            raise IncompatibleDataError(f"Trace names unknown basis vector {label!r}")
        i = table.labels.index(label)
        if table.bidegrees[i] != (-d, d):
            raise IncompatibleDataError(
                f"Trace is supported on PV^{{{-d},{d}}}, but {label!r} has bidegree {table.bidegrees[i]}"
            )
        c = rational(value)
        if c:
            out[i] = c
    return out


def apply_trace(x: Element, trace: dict) -> ArtinSeries:
    ring = x.table.ring
    total = ArtinSeries.zero(ring)
    for (i, m), c in x.coords.items():
        if i in trace:
            total = total + ArtinSeries.monomial(ring, m, c * trace[i])
    return total


@dataclass
class VHSData:
    frame: ElementaryFrame
    trace: dict                          # basis index -> rational
    gram: list                           # tr(e_a ∧ e_b) on the order-0 classes
    frame_gram: list                     # tr(𝔢_a ∧ 𝔢_b) on the elementary sections
    minus_exponents: list                # s-exponent of the top generator of H_− per section
    parities: list                       # degree parity per elementary section
    report: CheckReport
    _plus: dict = field(default_factory=dict, repr=False)

    @property
    def bundle(self) -> HodgeBundle:
        return self.frame.bundle

    @property
    def ring(self) -> ArtinRing:
        return self.bundle.ring

    @property
    def d(self) -> int:
        return self.bundle.dim_d

    @property
    def r_grading(self):
        return QQ(2 - self.d, 2)

    # ── H_+ ──────────────────────────────────────────────────────────────────

    def plus_level(self, e: int) -> list[list]:
        """Coordinates of the classes spanning the s^e level of H_+ over Q."""
        if e not in self._plus:
            self._plus[e] = _plus_level(self.bundle, 2 * self.d - 2 - e, e % 2)
        return self._plus[e]

    def plus_span(self, e: int) -> list[dict]:
        flat = _Flat(self.ring, self.bundle.dimension)
        return [flat.vector(vec) for vec in self.plus_level(e)]

    def in_plus(self, section: Section) -> bool:
        flat = _Flat(self.ring, self.bundle.dimension)
        for e, vec in section.parts.items():
            span = self.plus_span(e)
            if not span or not linalg_service.LinearSolver(span, flat.size).in_image(flat.vector(vec)):
                return False
        return True

    # ── H_− ──────────────────────────────────────────────────────────────────

    def frame_coordinates(self, section: Section) -> Section:
        """Coordinates against the elementary sections."""
        return section.apply(self.frame.frame.inverse())

    def minus_span(self, e: int) -> list[dict]:
        flat = _Flat(self.ring, self.bundle.dimension)
        out = []
        for i, b in enumerate(self.minus_exponents):
            if b >= e and (b - e) % 2 == 0:
                column = [self.frame.frame.entry(j, i) for j in range(self.bundle.dimension)]
                out.extend(flat.multiples(column))
        return out

    def in_minus(self, section: Section) -> bool:
        coords = self.frame_coordinates(section)
        for e, vec in coords.parts.items():
            for i, a in enumerate(vec):
                b = self.minus_exponents[i]
                if not a.is_zero() and (e > b or (b - e) % 2):
                    return False
        return True

    def minus_part(self, section: Section) -> Section:
        """The H_− component in frame coordinates, as a section."""
        coords = self.frame_coordinates(section)
        kept = {}
        for e, vec in coords.parts.items():
            kept[e] = [
                a if e <= self.minus_exponents[i] and (self.minus_exponents[i] - e) % 2 == 0
                else ArtinSeries.zero(self.ring)
                for i, a in enumerate(vec)
            ]
        return Section(self.ring, section.n, kept).apply(self.frame.frame)

    # ── pairing ──────────────────────────────────────────────────────────────

    def pairing(self, a: Section, b: Section) -> dict:
        """
        ⟨a, b⟩ as {s-exponent: ArtinSeries}.

        On elementary sections ⟨f𝔢_i, g𝔢_j⟩ = (−1)^{1 + d|𝔢_j| + |g||𝔢_i|} t^{2−d} f(t)g(−t) tr(𝔢_i ∧ 𝔢_j),
        where g(−t) sends s^e to (−1)^{⌊e/2⌋} s^e.
        """
        x, y = self.frame_coordinates(a), self.frame_coordinates(b)
        out: dict = {}
        shift = 4 - 2 * self.d
        for e1, v1 in x.parts.items():
            for e2, v2 in y.parts.items():
                for i, f in enumerate(v1):
                    if f.is_zero():
                        continue
                    for j, g in enumerate(v2):
                        value = self.frame_gram[i][j]
                        if g.is_zero() or not value:
                            continue
                        sign = (1 + self.d * self.parities[j] + e2 * self.parities[i] + e2 // 2) % 2
                        term = f * g * (value if not sign else -value)
                        e = e1 + e2 + shift
                        out[e] = out.get(e, ArtinSeries.zero(self.ring)) + term
        return {e: c for e, c in sorted(out.items()) if not c.is_zero()}

    def symplectic(self, a: Section, b: Section) -> ArtinSeries:
        """Res_{t=0}⟨a, b⟩dt: the coefficient of t^{-1}."""
        return self.pairing(a, b).get(-2, ArtinSeries.zero(self.ring))

    # ── generators ───────────────────────────────────────────────────────────

    def minus_generator(self, i: int, steps: int = 0) -> Section:
        n = self.bundle.dimension
        column = [self.frame.frame.entry(j, i) for j in range(n)]
        return Section.at(self.ring, self.minus_exponents[i] - 2 * steps, column)

    def plus_generators(self) -> list[Section]:
        """Q-generators of H_+ at the s-powers where a Hodge level first enters."""
        out = []
        for e in range(-2, 2 * self.d - 1):
            out.extend(Section.at(self.ring, e, vec) for vec in self.plus_level(e))
        return out


def _plus_level(bundle: HodgeBundle, h: int, parity: int) -> list[list]:
    coords = bundle.coordinates
    table = bundle.problem.table
    out = []
    for degree in sorted(set(bundle.degrees)):
        if degree % 2 != parity:
            continue
        keys = coords.keys.get(degree, [])
        chosen = [n for n, (i, _) in enumerate(keys) if hodge_index(table, i, bundle.dim_d) >= h]
        if not chosen:
            continue
        outgoing = coords.complex_.maps.get(degree) or []
        nrows = coords.complex_.dims.get(degree + 1, 0)
        if nrows:
            kernel = linalg_service.LinearSolver([outgoing[n] for n in chosen], nrows).kernel_basis()
        else:
            kernel = [{j: QQ.one} for j in range(len(chosen))]
        for vec in kernel:
            cycle = coords.element({chosen[j]: c for j, c in vec.items()}, degree)
            vec = coords.solve(cycle)
            if any(not a.is_zero() for a in vec):
                out.append(vec)
    return out


def _adjusted_weights(frame: ElementaryFrame) -> tuple[list, list]:
    """Weights raised to the parity of the degree, and the parities."""
    bundle = frame.bundle
    n = bundle.dimension
    weights, parities = [], []
    for i, vec in enumerate(frame.basis):
        degree = next(bundle.degrees[j] for j in range(n) if vec[j])
        w = frame.weights[i]
        if w is None:
            w = next(
                (level for level in range(-1, 2 * bundle.dim_d + 1)
                 if qrank(frame.weight.space(level) + [vec], n) == qrank(frame.weight.space(level), n)),
                2 * bundle.dim_d,
            )
        if (w - degree) % 2:
            w += 1
        weights.append(w)
        parities.append(degree % 2)
    return weights, parities


def _gram(bundle: HodgeBundle, trace: dict) -> list:
    reps = bundle.representatives
    return [[apply_trace(a.wedge(b), trace).constant() for b in reps] for a in reps]


def _bilinear(gram: list, u: list, v: list):
    return sum((u[a] * gram[a][b] * v[b] for a in range(len(u)) for b in range(len(v)) if u[a] and v[b]), QQ.zero)


def build_vhs(frame: ElementaryFrame, trace: dict) -> VHSData:
    """
    Assemble and check the semi-infinite VHS of an elementary frame.

    Args:
        frame: elementary sections with their weight filtration
        trace: {basis label of PV^{−d,d}: value}

    Raises:
        IncompatibleDataError: the trace is not supported on the top bidegree
    """
    bundle = frame.bundle
    table = bundle.problem.table
    d = bundle.dim_d
    n = bundle.dimension
    base = table.over(table.ring.restrict(0))
    tr = trace_vector(base, trace, d)
    report = CheckReport(subject=f"vhs[{table.name}]")

    # trace and order-0 pairing
    boundaries = [c for c in (bundle.base_coordinates.complex_.maps.get(-1) or []) if c]
    keys0 = bundle.base_coordinates.keys.get(0, [])
    descends = all(
        not sum((c * tr.get(keys0[p][0], QQ.zero) for p, c in col.items()), QQ.zero) for col in boundaries
    )
    report.add("trace_vanishes_on_boundaries", descends)
    gram = _gram(bundle, tr)
    rank = qrank([list(row) for row in gram], n) if n else 0
    report.add("pairing_nondegenerate", rank == n, witness=f"rank {rank} of {n}")
    for h in range(0, 2 * d + 1):
        f_h, f_next, f_dual = bundle.hodge_space(h), bundle.hodge_space(h + 1), bundle.hodge_space(2 * d - h)
        graded = qrank(f_h, n) - qrank(f_next, n)
        block = [[_bilinear(gram, u, v) for v in f_dual] for u in f_h]
        block_rank = qrank(block, len(f_dual)) if block and f_dual else 0
        report.add(f"graded_nondegenerate_{h}", block_rank == graded,
                   witness=f"rank {block_rank}, graded piece {graded}")

    f_isotropy = None
    for h in range(0, 2 * d + 1):
        for h2 in range(2 * d - h + 1, 2 * d + 1):
            if any(_bilinear(gram, u, v) for u in bundle.hodge_space(h) for v in bundle.hodge_space(h2)):
                f_isotropy = f_isotropy or f"F^≥{h}, F^≥{h2}"
    report.add("hodge_isotropic", f_isotropy is None, witness=f_isotropy)
    w_isotropy = None
    weight = frame.weight
    for w in range(-1, 2 * d + 1):
        for w2 in range(-1, 2 * d - w):
            if any(_bilinear(gram, u, v) for u in weight.space(w) for v in weight.space(w2)):
                w_isotropy = w_isotropy or f"W_≤{w}, W_≤{w2}"
    report.add("weight_isotropic", w_isotropy is None, witness=w_isotropy)

    for nu, rows in sorted(bundle.residues.items()):
        moved = _qmul([[rows[j][i] for j in range(n)] for i in range(n)], gram)
        total = [[moved[i][j] + sum((gram[i][l] * rows[l][j] for l in range(n)), QQ.zero) for j in range(n)]
                 for i in range(n)]
        report.add(f"pairing_flat_{nu + 1}", _qis_zero(total))

    # tr(𝔢_i ∧ 𝔢_j) is constant
    frame_gram = [[QQ.zero] * n for _ in range(n)]
    constant = None
    for i, a in enumerate(frame.sections):
        for j, b in enumerate(frame.sections):
            value = apply_trace(a.wedge(b), tr)
            frame_gram[i][j] = value.constant()
            if constant is None and value != ArtinSeries.const(value.ring, value.constant()):
                constant = f"tr(𝔢_{i}∧𝔢_{j}) = {value.render()}"
    report.add("elementary_products_constant", constant is None, witness=constant)

    weights, parities = _adjusted_weights(frame)
    minus = [2 * d - 4 - w for w in weights]
    vhs = VHSData(frame, tr, gram, frame_gram, minus, parities, report)

    flat = _Flat(bundle.ring, n)
    low, high = min(minus, default=0) - 2, 2 * d
    direct = None
    for e in range(low, high + 1):
        size = sum(1 for j in range(n) if bundle.degrees[j] % 2 == e % 2) * len(flat.monomials)
        plus, minus_span = vhs.plus_span(e), vhs.minus_span(e)
        rp, rm = _span_rank(plus, flat.size), _span_rank(minus_span, flat.size)
        ru = _span_rank(plus + minus_span, flat.size)
        if direct is None and not (rp + rm == size and ru == size):
            direct = f"s^{e}: rank H_+ = {rp}, rank H_− = {rm}, rank of the sum = {ru}, expected {size}"
    report.add("plus_minus_direct_sum", direct is None, witness=direct)

    plus_gens = vhs.plus_generators()
    minus_gens = [vhs.minus_generator(i) for i in range(n)]
    plus_pairs = None
    for a in plus_gens:
        for b in plus_gens:
            bad = [e for e in vhs.pairing(a, b) if e < 0 or e % 2]
            if bad and plus_pairs is None:
                plus_pairs = f"s^{bad[0]} in ⟨{a.render()}, {b.render()}⟩"
    report.add("plus_pairing_in_power_series", plus_pairs is None, witness=plus_pairs)
    minus_pairs = None
    for a in minus_gens:
        for b in minus_gens:
            bad = [e for e in vhs.pairing(a, b) if e > -4 or e % 2]
            if bad and minus_pairs is None:
                minus_pairs = f"s^{bad[0]} in ⟨{a.render()}, {b.render()}⟩"
    report.add("minus_pairing_in_t_minus_two", minus_pairs is None, witness=minus_pairs)
    report.add("minus_isotropic", all(vhs.symplectic(a, b).is_zero() for a in minus_gens for b in minus_gens))

    sesqui = True
    for a in plus_gens[:2]:
        for b in plus_gens[:2]:
            base_pair = vhs.pairing(a, b)
            left = vhs.pairing(a.shift(2), b)
            right = vhs.pairing(a, b.shift(2))
            sesqui &= left == {e + 2: c for e, c in base_pair.items()}
            sesqui &= right == {e + 2: -c for e, c in base_pair.items()}
    report.add("pairing_sesquilinear", sesqui)

    report.extend(grading_report(vhs, plus_gens, minus_gens))
    report.add("minus_preserved_by_connection", all(
        vhs.in_minus(connection(bundle, nu, g)) for nu in bundle.matrices for g in minus_gens
    ))
    logger.info(f"VHS on {table.name!r}: H_− exponents {minus}, checks {'pass' if report.passed else 'fail'}")
    return vhs


def grading_report(vhs: VHSData, plus_gens: list, minus_gens: list) -> CheckReport:
    """∇_{t∂t} commutes with ∇_ν, preserves H_−, maps H_+ into t^{-1}H_+ and keeps the pairing flat."""
    report = CheckReport(subject="grading")
    bundle, d = vhs.bundle, vhs.d
    gens = plus_gens + minus_gens
    commute = all(
        grading(d, connection(bundle, nu, g)) == connection(bundle, nu, grading(d, g))
        for nu in bundle.matrices for g in gens
    )
    report.add("grading_commutes_with_connection", commute)
    report.add("grading_preserves_minus", all(vhs.in_minus(grading(d, g)) for g in minus_gens))
    report.add("grading_plus_into_t_inverse_plus", all(vhs.in_plus(grading(d, g).shift(2)) for g in plus_gens))
    flat = True
    for a in gens:
        for b in gens:
            lhs = {e: c * QQ(e, 2) for e, c in vhs.pairing(a, b).items() if e}
            rhs: dict = {}
            for part in (vhs.pairing(grading(d, a), b), vhs.pairing(a, grading(d, b))):
                for e, c in part.items():
                    rhs[e] = rhs.get(e, ArtinSeries.zero(vhs.ring)) + c
            flat &= lhs == {e: c for e, c in rhs.items() if not c.is_zero()}
    report.add("pairing_flat_for_grading", flat)
    return report


# ─────────────────────────────────────────────────────────────────────────────
# Miniversal sections
# ─────────────────────────────────────────────────────────────────────────────

def restrict_vhs(vhs: VHSData, l: int) -> VHSData:
    """Rebuild the VHS at order l with the same weight filtration and filtered basis."""
    bundle = vhs.bundle
    forms = {nu: a.restrict(l) for nu, a in bundle.forms.items()}
    lower = gm_connection(bundle.problem, forms, k=l)
    frame = elementary_frame(lower, vhs.frame.weight, vhs.frame.basis)
    labels = vhs.bundle.problem.table.labels
    return build_vhs(frame, {labels[i]: c for i, c in vhs.trace.items()})


def volume_class(bundle: HodgeBundle) -> list:
    """Order-0 coordinates of the class of 1."""
    base = bundle.base_coordinates.table
    return [a.constant() for a in bundle.base_coordinates.solve(base.one())]


def volume_section(vhs: VHSData) -> Section:
    """t^{-1}·(flat extension of the class of 1)."""
    bundle = vhs.bundle
    n = bundle.dimension
    ring = bundle.ring
    vol = volume_class(bundle)
    frame = vhs.frame
    inverse = qinverse([[frame.basis[j][i] for j in range(n)] for i in range(n)])
    coeffs = [ArtinSeries.const(ring, c) for c in _qapply(inverse, vol)]
    return Section.at(ring, -2, frame.frame.apply(coeffs))


@dataclass
class MiniversalReport:
    report: CheckReport
    eigenvalue: object = None
    ks_rank: int = 0
    failing_directions: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "report": self.report.to_dict(),
            "eigenvalue": None if self.eigenvalue is None else format_rational(self.eigenvalue),
            "ks_rank": self.ks_rank,
            "failing_directions": self.failing_directions,
        }


def _eigenvalue(vhs: VHSData, xi: Section):
    """r with ∇_{t∂t}ξ = rξ modulo H_−, or (None, witness)."""
    rest = xi - vhs.minus_part(xi)
    if rest.is_zero():
        return None, "ξ lies in H_−"
    values = {QQ(e, 2) + vhs.r_grading for e in rest.parts}
    if len(values) != 1:
        return None, f"several eigenvalues {sorted(format_rational(v) for v in values)}"
    r = values.pop()
    residual = grading(vhs.d, xi) - xi.scale(r)
    if not vhs.in_minus(residual):
        return None, f"∇_t∂t ξ − {format_rational(r)}ξ not in H_−"
    return r, None


def miniversal_check(vhs: VHSData, candidates: dict | None = None) -> MiniversalReport:
    """
    Report the miniversality conditions for ξ ∈ H_+ ∩ tH_−.

    Args:
        vhs: the data at the top order k
        candidates: {order l: Section over R_l}; default t^{-1} times the flat
            extension of the class of 1 at every order
    """
    bundle = vhs.bundle
    k = bundle.ring.k
    n = bundle.dimension
    report = CheckReport(subject="miniversal")
    if candidates is None:
        lowers = {l: restrict_vhs(vhs, l) for l in range(k)}
        candidates = {l: volume_section(lower) for l, lower in lowers.items()}
        candidates[k] = volume_section(vhs)
    xi = candidates.get(k)
    if xi is None:
        raise IncompatibleDataError(f"No candidate section at the top order {k}")

    report.add("in_plus", vhs.in_plus(xi))
    report.add("in_t_minus", vhs.in_minus(xi.shift(-2)))

    compatible = None
    for l, lower in sorted(candidates.items()):
        if l < k and xi.restrict(l) != lower:
            compatible = compatible or f"order {l}"
    report.add("order_compatible", compatible is None, witness=compatible)

    flat = None
    for nu in sorted(bundle.matrices):
        if not vhs.in_minus(connection(bundle, nu, xi)):
            flat = flat or f"direction {nu + 1}"
    report.add("flat_modulo_minus", flat is None, witness=flat)

    r, witness = _eigenvalue(vhs, xi)
    report.add("eigen_modulo_minus", r is not None, witness=witness)

    ks_rank, failing, ks_ok = _kodaira_spencer(vhs, xi)
    report.add("kodaira_spencer_bijective", ks_ok and ks_rank == n and not failing,
               witness=f"rank {ks_rank} of {n}, failing directions {failing}")
    logger.info(f"Miniversal check: r = {r}, KS rank {ks_rank}/{n}, failing directions {failing}")
    return MiniversalReport(report, r, ks_rank, failing)


def _kodaira_spencer(vhs: VHSData, xi: Section) -> tuple[int, list, bool]:
    """
    Rank of X ↦ t∇_Xξ mod tH_+ at order 0, and the directions adding nothing.

    A bundle map of free modules is an isomorphism iff it is one modulo 𝔪.
    """
    bundle = vhs.bundle
    n = bundle.dimension
    images = {nu: connection(bundle, nu, xi).shift(2) for nu in sorted(bundle.matrices)}
    in_plus = all(vhs.in_plus(img) for img in images.values())
    exponents = sorted({e for img in images.values() for e in img.parts})
    index = {e: p for p, e in enumerate(exponents)}
    size = n * len(exponents)

    def order0(section: Section) -> dict:
        out = {}
        for e, vec in section.parts.items():
            for j, a in enumerate(vec):
                if a.constant():
                    out[index[e] * n + j] = a.constant()
        return out

    relations = []
    for e in exponents:
        for vec in bundle.hodge_space(2 * vhs.d - e):
            if any(vec) and all(bundle.degrees[j] % 2 == e % 2 for j in range(n) if vec[j]):
                relations.append({index[e] * n + j: c for j, c in enumerate(vec) if c})
    base_rank = _span_rank(relations, size)
    columns = list(relations)
    failing = []
    for nu, img in images.items():
        candidate = columns + [order0(img)]
        if _span_rank(candidate, size) > _span_rank(columns, size):
            columns = candidate
        else:
            failing.append(nu + 1)
    ks_rank = _span_rank(columns, size) - base_rank
    return ks_rank, failing, in_plus
