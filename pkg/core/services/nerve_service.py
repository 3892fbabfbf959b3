"""
nerve_service.py — Cover combinatorics and Čech cochains.

Responsible for:
- CoverNerve: the V-charts, the U-charts refining them, the U-nerve closed
  under faces, the index sets I_{i_0…i_l} and the V-nerve
- CechCochain: table-valued cochains on U-nerve simplices and their coboundary
- simplicial_complex(): the rational cochain complex of (part of) the U-nerve
- cech_coboundary() / point_cech_contract(): the Čech complex of the full
  simplex on an index set and its cone contraction

Charts are referred to by position: V-chart α and U-chart i are indices into
v_charts and u_charts. Simplices are strictly increasing tuples, enumerated
by dimension and then lexicographically.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

from sympy import QQ

from core.services import linalg_service
from core.services.errors import IncompatibleDataError, InstanceError

logger = logging.getLogger(__name__)


def simplex_faces(simplex: tuple) -> list[tuple[int, tuple]]:
    """[(j, simplex with the j-th vertex removed)]."""
    if len(simplex) < 2:
        return []
    return [(j, simplex[:j] + simplex[j + 1:]) for j in range(len(simplex))]


def _sort_key(simplex: tuple) -> tuple:
    return (len(simplex), simplex)


# ─────────────────────────────────────────────────────────────────────────────
# Nerve
# ─────────────────────────────────────────────────────────────────────────────

@dataclass(frozen=True)
class CoverNerve:
    """A finite cover 𝒱 = {V_α}, a refinement 𝒰 = {U_i} and the nerve of 𝒰."""

    v_charts: tuple
    u_charts: tuple
    containment: tuple                   # per U-chart, sorted V indices containing it
    u_simplices: tuple                   # closed under faces, sorted
    _index_sets: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    @property
    def dimension(self) -> int:
        return max(len(s) for s in self.u_simplices) - 1

    def index_set(self, simplex: tuple) -> tuple:
        """I_{i_0…i_l} = {α : every U_{i_r} ⊂ V_α}."""
        if simplex not in self._index_sets:
            common = set(self.containment[simplex[0]])
            for i in simplex[1:]:
                common &= set(self.containment[i])
            self._index_sets[simplex] = tuple(sorted(common))
        return self._index_sets[simplex]

    def simplices_of_dim(self, l: int) -> list[tuple]:
        return [s for s in self.u_simplices if len(s) == l + 1]

    def simplices_in(self, charts) -> tuple:
        """U-simplices lying in V_{α_0} ∩ … ∩ V_{α_ℓ}; closed under faces."""
        charts = set(charts)
        return tuple(s for s in self.u_simplices if charts <= set(self.index_set(s)))

    @property
    def v_simplices(self) -> tuple:
        """(α_0 < … < α_ℓ) is present iff some U_i lies in all of its charts."""
        present = set()
        for charts in self.containment:
            for r in range(1, len(charts) + 1):
                present.update(itertools.combinations(charts, r))
        return tuple(sorted(present, key=_sort_key))

    def v_simplices_of_dim(self, l: int) -> list[tuple]:
        return [s for s in self.v_simplices if len(s) == l + 1]

    def label(self, simplex: tuple) -> str:
        return "".join(f"[{self.u_charts[i]}]" for i in simplex)

    def v_label(self, charts: tuple) -> str:
        return "".join(f"[{self.v_charts[a]}]" for a in charts)


def build_nerve(v_charts, u_charts, containment: dict, simplices=()) -> CoverNerve:
    """
    Assemble and validate a CoverNerve.

    Args:
        v_charts: V-chart labels
        u_charts: U-chart labels
        containment: {U label: [V labels containing it]}
        simplices: declared U-simplices as label lists; faces are added, and
            every U-chart is a vertex

    Raises:
        InstanceError: unknown labels, repeated vertices, or a U-chart with no
            containing V-chart
    """
    v_charts = tuple(v_charts)
    u_charts = tuple(u_charts)
    if len(set(v_charts)) != len(v_charts) or len(set(u_charts)) != len(u_charts):
        raise InstanceError("Chart labels must be distinct")
    v_index = {a: n for n, a in enumerate(v_charts)}
    u_index = {i: n for n, i in enumerate(u_charts)}

    unknown = sorted(set(containment) - set(u_index), key=str)
    if unknown:
        raise InstanceError(f"Containment lists unknown U-chart {unknown[0]!r}")
    contained = []
    for label in u_charts:
        charts = containment.get(label)
        if not charts:
            raise InstanceError(f"U-chart {label!r} has no containing V-chart")
        try:
            contained.append(tuple(sorted({v_index[a] for a in charts})))
        except KeyError as exc:
            raise InstanceError(f"U-chart {label!r} names unknown V-chart {exc.args[0]!r}") from exc

    closed = {(i,) for i in range(len(u_charts))}
    for declared in simplices:
        try:
            vertices = [u_index[label] for label in declared]
        except KeyError as exc:
            raise InstanceError(f"Simplex {list(declared)} names unknown U-chart {exc.args[0]!r}") from exc
        if len(set(vertices)) != len(vertices) or not vertices:
            raise InstanceError(f"Simplex {list(declared)} repeats a vertex or is empty")
        vertices = tuple(sorted(vertices))
        for r in range(1, len(vertices) + 1):
            closed.update(itertools.combinations(vertices, r))

    nerve = CoverNerve(
        v_charts=v_charts,
        u_charts=u_charts,
        containment=tuple(contained),
        u_simplices=tuple(sorted(closed, key=_sort_key)),
    )
    logger.info(
        f"Nerve: {len(v_charts)} V-charts, {len(u_charts)} U-charts, "
        f"{len(nerve.u_simplices)} U-simplices up to dimension {nerve.dimension}"
    )
    return nerve


# ─────────────────────────────────────────────────────────────────────────────
# Čech cochains on the U-nerve
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class CechCochain:
    """A cochain of the given degree with values in a table (Elements)."""

    table: object
    degree: int
    values: dict                         # simplex -> Element

    def value(self, simplex: tuple):
        return self.values.get(simplex, self.table.zero())

    def coboundary(self, simplices) -> "CechCochain":
        """(δc)_I = Σ_j (−1)^j c_{I∖i_j} over the given simplices of degree + 1."""
        out = {}
        for simplex in simplices:
            if len(simplex) != self.degree + 2:
                continue
            total = self.table.zero()
            for j, face in simplex_faces(simplex):
                term = self.value(face)
                total = total - term if j % 2 else total + term
            if not total.is_zero():
                out[simplex] = total
        return CechCochain(self.table, self.degree + 1, out)

    def is_zero(self) -> bool:
        return all(v.is_zero() for v in self.values.values())

    def render(self) -> str:
        parts = [f"{s}: {v.render()}" for s, v in sorted(self.values.items(), key=lambda kv: _sort_key(kv[0]))]
        return "{" + ", ".join(parts) + "}"


def simplicial_complex(nerve: CoverNerve, support=None) -> tuple[linalg_service.CochainComplex, dict]:
    """
    The rational cochain complex of the U-nerve (or of a face-closed part of it).

    Returns:
        (complex, basis) where basis[l] lists the l-simplices in order
    """
    simplices = nerve.u_simplices if support is None else tuple(support)
    basis: dict = {}
    for s in simplices:
        basis.setdefault(len(s) - 1, []).append(s)
    index = {l: {s: n for n, s in enumerate(items)} for l, items in basis.items()}
    maps = {}
    for l, items in basis.items():
        upper = basis.get(l + 1, [])
        columns = [dict() for _ in items]
        for s in upper:
            for j, face in simplex_faces(s):
                columns[index[l][face]][index[l + 1][s]] = QQ(-1) if j % 2 else QQ.one
        maps[l] = columns
    dims = {l: len(items) for l, items in basis.items()}
    return linalg_service.CochainComplex(dims=dims, maps=maps), basis


# ─────────────────────────────────────────────────────────────────────────────
# The point Čech complex
# ─────────────────────────────────────────────────────────────────────────────

def cech_coboundary(cochain: dict, index_set, degree: int, zero) -> dict:
    """
    δ of a degree-ℓ cochain on the full simplex over index_set.

    Values only need +, − and is_zero; missing entries are zero.
    """
    out = {}
    for sigma in itertools.combinations(sorted(index_set), degree + 2):
        total = zero
        for j, face in simplex_faces(sigma):
            term = cochain.get(face)
            if term is None:
                continue
            total = total - term if j % 2 else total + term
        if not total.is_zero():
            out[sigma] = total
    return out


def point_cech_contract(cochain: dict, index_set, degree: int, zero, apex: int | None = None) -> dict:
    """
    b with δb = c for a closed degree-ℓ cochain c (ℓ ≥ 1) on the full simplex.

    b_σ = ± c_{σ ∪ α*}, the sign being that of moving α* to its sorted place;
    α* defaults to the least index.

    Raises:
        IncompatibleDataError: ℓ < 1, or c not closed (the failing simplex is named)
    """
    if degree < 1:
        raise IncompatibleDataError(f"Point contraction needs degree >= 1, got {degree}")
    indices = sorted(index_set)
    if not indices:
        return {}
    failing = cech_coboundary(cochain, indices, degree, zero)
    if failing:
        sigma = next(iter(failing))
        raise IncompatibleDataError(f"Čech cochain is not closed at {sigma}")
    star = indices[0] if apex is None else apex
    if star not in indices:
        raise IncompatibleDataError(f"Apex {star} is not in the index set {indices}")
    out = {}
    for sigma in itertools.combinations(indices, degree):
        if star in sigma:
            continue
        full = tuple(sorted(sigma + (star,)))
        value = cochain.get(full)
        if value is None or value.is_zero():
            continue
        out[sigma] = -value if full.index(star) % 2 else value
    return out
