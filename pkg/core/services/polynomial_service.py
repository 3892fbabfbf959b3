"""
polynomial_service.py — Builds AlgebraTables from polynomial presentations.

Responsible for:
- the truncated polyvector model Q[x_1..x_n]/(deg > N) ⊗ Λ(ξ) ⊗ Λ(η) with
  Δ = Σ_i ∂_{ξ_i} ∘ (Σ_l λ_il x_l ∂_{x_l}) and ∂̄ = Σ_j η_j ∧ (Σ_l μ_jl x_l ∂_{x_l})
- the Euler-type local model used by the bundled fixtures
- planted twists ∂̄ + [𝔡, ·] (almost dgBV tables)
- de Rham module parts (relative, and absolute over Λ(dlog q))
- seeded random tables for the axiom suites

Both operators preserve the x-degree, so the quotient by x-degree > N is
compatible with every structure map.
"""

from __future__ import annotations

import itertools
import logging
import random

from sympy import QQ

from core.services.errors import IncompatibleDataError
from core.services.graded_service import (
    AlgebraTable,
    Element,
    ModuleStructure,
    accumulate,
    apply_binary,
    apply_unary,
    coords_add,
    entries_from_coords,
    sign,
)
from core.services.scalars_service import ArtinRing, ArtinSeries

logger = logging.getLogger(__name__)

ONE = QQ.one


def _inversions(seq) -> int:
    return sum(1 for a, b in itertools.combinations(seq, 2) if a > b)


def _x_label(a: tuple) -> list[str]:
    names = ["x"] if len(a) == 1 else [f"x{l + 1}" for l in range(len(a))]
    out = []
    for name, e in zip(names, a):
        if e == 1:
            out.append(name)
        elif e > 1:
            out.append(f"{name}^{e}")
    return out


def _odd_label(prefix: str, subset: tuple, count: int) -> list[str]:
    if count == 1:
        return [prefix] if subset else []
    return [f"{prefix}{i + 1}" for i in subset]


def _label(a: tuple, S: tuple, T: tuple, n_xi: int, n_eta: int) -> str:
    parts = _x_label(a) + _odd_label("xi", S, n_xi) + _odd_label("eta", T, n_eta)
    return "*".join(parts) if parts else "1"


def _series(ring: ArtinRing, value) -> ArtinSeries:
    if isinstance(value, ArtinSeries):
        if value.ring != ring:
            raise IncompatibleDataError("Coefficient series lives over a different ring")
        return value
    return ArtinSeries.const(ring, value)


# ─────────────────────────────────────────────────────────────────────────────
# General builder
# ─────────────────────────────────────────────────────────────────────────────

def build_polynomial_table(
    ring: ArtinRing,
    n_x: int = 1,
    degree_cap: int = 1,
    n_xi: int = 1,
    n_eta: int = 0,
    lam=None,
    mu=None,
    name: str = "polynomial",
) -> AlgebraTable:
    """
    Tabulate the truncated polynomial polyvector model.

    Args:
        ring: coefficient ring R_k
        n_x: number of even coordinates x_l (bidegree (0,0))
        degree_cap: N, the maximal total x-degree kept
        n_xi: number of odd ξ_i (bidegree (−1,0))
        n_eta: number of odd η_j (bidegree (0,1))
        lam: n_xi × n_x matrix of series or rationals (defaults to all ones)
        mu: n_eta × n_x matrix (defaults to all zeros)

    Raises:
        IncompatibleDataError: on size mismatches
    """
    if n_x < 0 or n_xi < 0 or n_eta < 0 or degree_cap < 0:
        raise IncompatibleDataError("Generator counts and degree cap must be non-negative")
    lam = lam if lam is not None else [[1] * n_x for _ in range(n_xi)]
    mu = mu if mu is not None else [[0] * n_x for _ in range(n_eta)]
    if len(lam) != n_xi or any(len(row) != n_x for row in lam):
        raise IncompatibleDataError(f"λ must be a {n_xi}×{n_x} matrix")
    if len(mu) != n_eta or any(len(row) != n_x for row in mu):
        raise IncompatibleDataError(f"μ must be a {n_eta}×{n_x} matrix")
    lam = [[_series(ring, v) for v in row] for row in lam]
    mu = [[_series(ring, v) for v in row] for row in mu]

    x_monos = [a for d in range(degree_cap + 1) for a in _exponents(n_x, d)]
    xi_sets = [S for r in range(n_xi + 1) for S in itertools.combinations(range(n_xi), r)]
    eta_sets = [T for r in range(n_eta + 1) for T in itertools.combinations(range(n_eta), r)]
    keys = [(a, S, T) for S in xi_sets for T in eta_sets for a in x_monos]
    keys.sort(key=lambda key: (len(key[1]), len(key[2]), key[1], key[2], sum(key[0]), tuple(-e for e in key[0])))
    index = {key: i for i, key in enumerate(keys)}
    zero = ring.zero_mono

    product = {}
    for (a, S, T), i in index.items():
        for (b, S2, T2), j in index.items():
            ab = tuple(x + y for x, y in zip(a, b))
            if sum(ab) > degree_cap or set(S) & set(S2) or set(T) & set(T2):
                continue
            sgn = sign(len(S2) * len(T) + _inversions(S + S2) + _inversions(T + T2))
            target = index[(ab, tuple(sorted(S + S2)), tuple(sorted(T + T2)))]
            product[(i, j)] = ((target, zero, QQ(sgn)),)

    delta = {}
    pdb = {}
    for (a, S, T), i in index.items():
        coords: dict = {}
        for pos, xi in enumerate(S):
            rest = S[:pos] + S[pos + 1:]
            target = index[(a, rest, T)]
            for l in range(n_x):
                if not a[l]:
                    continue
                for m, c in lam[xi][l].terms.items():
                    accumulate(coords, (target, m), c * a[l] * sign(pos))
        if coords:
            delta[i] = entries_from_coords(coords)
        coords = {}
        for eta in range(n_eta):
            if eta in T:
                continue
            below = sum(1 for t in T if t < eta)
            target = index[(a, S, tuple(sorted(T + (eta,))))]
            for l in range(n_x):
                if not a[l]:
                    continue
                for m, c in mu[eta][l].terms.items():
                    accumulate(coords, (target, m), c * a[l] * sign(len(S) + below))
        if coords:
            pdb[i] = entries_from_coords(coords)

    labels = tuple(_label(a, S, T, n_xi, n_eta) for (a, S, T) in keys)
    bidegrees = tuple((-len(S), len(T)) for (_, S, T) in keys)
    table = AlgebraTable(
        ring=ring,
        labels=labels,
        bidegrees=bidegrees,
        unit=index[((0,) * n_x, (), ())],
        product=product,
        pdb=pdb,
        delta=delta,
        name=name,
    )
    logger.debug(f"Built table {name!r}: dim={table.dimension}, k={ring.k}")
    return table


def _exponents(n: int, total: int) -> list[tuple]:
    if n == 0:
        return [()] if total == 0 else []
    out = []
    for first in range(total, -1, -1):
        for rest in _exponents(n - 1, total - first):
            out.append((first,) + rest)
    return out


def twist_table(table: AlgebraTable, element: Element, name: str | None = None) -> AlgebraTable:
    """
    The table with ∂̄ replaced by ∂̄ + [𝔡, ·].

    Δ and the product are unchanged, so the bracket is still the one induced by Δ.
    """
    if element.table is not table:
        raise IncompatibleDataError("Twist element belongs to another table")
    k = table.ring.k
    zero = table.ring.zero_mono
    bracket = table.derived_bracket()
    pdb = {}
    for i in range(table.dimension):
        ei = {(i, zero): ONE}
        value = apply_unary(table.pdb or {}, ei, k)
        value = coords_add(value, apply_binary(bracket, element.coords, ei, k))
        if value:
            pdb[i] = entries_from_coords(value)
    return AlgebraTable(
        ring=table.ring,
        labels=table.labels,
        bidegrees=table.bidegrees,
        unit=table.unit,
        product=table.product,
        bracket=table.bracket,
        pdb=pdb,
        delta=table.delta,
        module=table.module,
        name=name or f"{table.name}+twist",
    )


# ─────────────────────────────────────────────────────────────────────────────
# Named models
# ─────────────────────────────────────────────────────────────────────────────

def euler_model(ring: ArtinRing, lam=1, name: str = "euler") -> AlgebraTable:
    """
    Basis {1, x, xi, x*xi} with x² = 0 and Δ(x*xi) = λx; ∂̄ = 0.

    Brackets: [xi, x] = −λx, [xi, x*xi] = −λ x*xi, [x*xi, x] = 0.
    """
    return build_polynomial_table(ring, n_x=1, degree_cap=1, n_xi=1, n_eta=0, lam=[[lam]], name=name)


def eta_model(ring: ArtinRing, lam=1, mu=1, name: str = "euler-eta") -> AlgebraTable:
    """The Euler model with one η and ∂̄ = μ η x∂_x."""
    return build_polynomial_table(ring, n_x=1, degree_cap=1, n_xi=1, n_eta=1, lam=[[lam]], mu=[[mu]], name=name)


def planted_base(ring: ArtinRing, lam=1, mu=1) -> tuple[AlgebraTable, Element]:
    """
    The dgBV table under the planted twist, with 𝔡 = q_1·x*xi*eta1 on it.

    Two η's, x-degree cap 2 and ∂̄ = μ η2 x∂_x.
    """
    if ring.s < 1:
        raise IncompatibleDataError("The planted twist needs at least one q variable")
    base = build_polynomial_table(
        ring, n_x=1, degree_cap=2, n_xi=1, n_eta=2,
        lam=[[lam]], mu=[[0], [mu]], name="planted",
    )
    q1 = ArtinSeries.monomial(ring, ring.gen(0))
    return base, Element.from_series(base, {"x*xi*eta1": q1})


def planted_almost_table(ring: ArtinRing, lam=1, mu=1) -> tuple[AlgebraTable, Element]:
    """
    An almost dgBV table that is not dgBV.

    The planted base twisted by 𝔡. Then ∂̄'² = [𝔩, ·] with
    𝔩 = μ q_1 x*xi*eta1*eta2, which vanishes modulo m only.

    Returns:
        (twisted table, 𝔡)
    """
    base, twist = planted_base(ring, lam, mu)
    return twist_table(base, twist, name="planted-almost"), twist


# ─────────────────────────────────────────────────────────────────────────────
# Module parts
# ─────────────────────────────────────────────────────────────────────────────

def with_relative_module(table: AlgebraTable) -> AlgebraTable:
    """
    Attach K = A with φ⌟g = φ∧g, ∂ = Δ, ∂̄_K = ∂̄ and volume ω = 1.

    Δ(v)⌟ω = ∂(v⌟ω) then holds by construction.
    """
    module = ModuleStructure(
        labels=tuple(f"w[{label}]" for label in table.labels),
        degrees=tuple(table.degree(i) for i in range(table.dimension)),
        contraction=dict(table.product),
        d=dict(table.delta or {}),
        dbar=dict(table.pdb) if table.pdb is not None else None,
        volume=table.unit,
    )
    return _replace_module(table, module)


def with_absolute_module(table: AlgebraTable) -> AlgebraTable:
    """
    Attach Λ(dlog q_1..q_s) ⊗ K with

        φ⌟(E, g) = (−1)^{|E||φ|} (E, φg),   ∂(E, g) = (−1)^{|E|} (E, Δg),

    and the base forms dlog q_ν acting by wedge from the left.
    """
    s = table.ring.s
    subsets = [E for r in range(s + 1) for E in itertools.combinations(range(s), r)]
    n = table.dimension
    index = {(E, g): i for i, (E, g) in enumerate((E, g) for E in subsets for g in range(n))}

    def lift_unary(op, degree_sign):
        out = {}
        for (E, g), i in index.items():
            entries = []
            for j, m, c in op.get(g, ()):
                entries.append((index[(E, j)], m, c * (sign(len(E)) if degree_sign else 1)))
            if entries:
                out[i] = tuple(entries)
        return out

    contraction = {}
    for (E, g), a in index.items():
        for phi in range(n):
            entries = table.product.get((phi, g), ())
            sgn = sign(len(E) * table.degree(phi))
            if entries:
                contraction[(phi, a)] = tuple((index[(E, j)], m, c * sgn) for j, m, c in entries)

    base_forms = {}
    for nu in range(s):
        op = {}
        for (E, g), a in index.items():
            if nu in E:
                continue
            sgn = sign(sum(1 for e in E if e < nu))
            op[a] = ((index[(tuple(sorted(E + (nu,))), g)], table.ring.zero_mono, QQ(sgn)),)
        base_forms[f"dlog_q{nu + 1}"] = (1, op)

    labels = tuple(
        ("".join(f"dlog_q{e + 1}^" for e in E) + f"w[{table.labels[g]}]") for (E, g) in index
    )
    module = ModuleStructure(
        labels=labels,
        degrees=tuple(len(E) + table.degree(g) for (E, g) in index),
        contraction=contraction,
        d=lift_unary(table.delta or {}, True),
        dbar=lift_unary(table.pdb, True) if table.pdb is not None else None,
        base_forms=base_forms,
        volume=index[((), table.unit)],
    )
    return _replace_module(table, module)


def _replace_module(table: AlgebraTable, module: ModuleStructure) -> AlgebraTable:
    return AlgebraTable(
        ring=table.ring,
        labels=table.labels,
        bidegrees=table.bidegrees,
        unit=table.unit,
        product=table.product,
        bracket=table.bracket,
        pdb=table.pdb,
        delta=table.delta,
        module=module,
        name=table.name,
    )


# ─────────────────────────────────────────────────────────────────────────────
# Random tables
# ─────────────────────────────────────────────────────────────────────────────

def random_series(rng: random.Random, ring: ArtinRing, max_coeff: int = 3, constant: bool = True) -> ArtinSeries:
    terms = {}
    for m in ring.monomials():
        if not constant and sum(m) == 0:
            continue
        if rng.random() < 0.5:
            terms[m] = QQ(rng.randint(-max_coeff, max_coeff), rng.randint(1, 2))
    return ArtinSeries(ring, terms)


def random_table(rng: random.Random, ring: ArtinRing) -> AlgebraTable:
    """A seeded random dgBV table within small generator windows."""
    n_x = rng.randint(1, 2)
    n_xi = rng.randint(1, 2)
    n_eta = rng.randint(0, 1)
    degree_cap = rng.randint(1, 2)
    lam = [[random_series(rng, ring) for _ in range(n_x)] for _ in range(n_xi)]
    mu = [[random_series(rng, ring) for _ in range(n_x)] for _ in range(n_eta)]
    return build_polynomial_table(ring, n_x, degree_cap, n_xi, n_eta, lam, mu, name="random")


def random_element(rng: random.Random, table: AlgebraTable, indices: list[int], nilpotent: bool = True) -> Element:
    """A random combination of the given basis vectors; coefficients in m when nilpotent."""
    values = {}
    for i in indices:
        series = random_series(rng, table.ring, constant=not nilpotent)
        if not series.is_zero():
            values[i] = series
    return Element.from_series(table, values)
