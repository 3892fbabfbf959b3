"""
fixture_service.py — Generators for the bundled instance families.

Responsible for:
- trivial: identity patchings on a chain of V-charts; the gluing solver must
  return identities and every stage passes; it carries a supplied retraction
  for the Euler model
- twisted: three V-charts, three U-charts and a nerve through the triple
  overlap, with exponents of nilpotent vector fields whose overlap, cocycle and
  BV ledgers are all nonzero; the global model is the planted almost dgBV table
- rank-drop: Δ = q·(...), so the cohomology of ∂̂ loses rank at order 1 and
  the freeness check flags it

Every generated document is run through ingest_instance before it is returned.
"""

from __future__ import annotations

import logging

from core.dtos import FixtureKind
from core.services.errors import InstanceError
from core.services.instance_service import SCHEMA_VERSION, ingest_instance

logger = logging.getLogger(__name__)

K_BOUNDS = (1, 4)
CHART_BOUNDS = (2, 5)


def _q(c=1, e=1) -> dict:
    """c·q^e over a one-variable ring."""
    return {str(e): str(c)}


def _check_bounds(name: str, value: int, bounds: tuple) -> None:
    low, high = bounds
    if isinstance(value, bool) or not isinstance(value, int) or not low <= value <= high:
        raise InstanceError(f"{name} must be an integer in [{low}, {high}], got {value!r}")


def _chain_cover(charts: int) -> dict:
    """V_0..V_{n−1} in a row; U-chart u_{2a} inside V_a, u_{2a+1} inside V_a ∩ V_{a+1}."""
    v_charts = [chr(ord("A") + a) for a in range(charts)]
    u_charts, containment, simplices = [], {}, []
    for a, v in enumerate(v_charts):
        inner = f"u{2 * a}"
        u_charts.append(inner)
        containment[inner] = [v]
        if a + 1 < charts:
            overlap = f"u{2 * a + 1}"
            u_charts.append(overlap)
            containment[overlap] = [v, v_charts[a + 1]]
            simplices.append([inner, overlap])
            simplices.append([overlap, f"u{2 * a + 2}"])
    return {"v_charts": v_charts, "u_charts": u_charts, "containment": containment, "simplices": simplices}


def _base(name: str, k: int) -> dict:
    return {
        "schema": SCHEMA_VERSION,
        "name": name,
        "ring": {"s": 1, "k": k, "params": [], "param_degrees": []},
        "window": {"t_neg": 1, "t_cap": 2},
        "weight": {"kind": "index"},
        "mc_source": "gluing",
    }


def _euler_retraction(t_neg: int = 1, t_cap: int = 2) -> dict:
    """
    (π, ι, h) for the Euler model with λ = 1 over the window.

    tΔ₀ sends t^p·x*xi to t^{p+1}·x; every other basis vector is closed, and
    the representatives are the t-powers of 1 and xi, t^{−t_neg}·x and t^{t_cap}·x*xi.
    """
    powers = range(-t_neg, t_cap + 1)
    harmonic = {
        "0": [f"1@{p}" for p in powers] + [f"x@{-t_neg}"],
        "-1": [f"xi@{p}" for p in powers] + [f"x*xi@{t_cap}"],
    }
    units = {d: [{key: "1"} for key in keys] for d, keys in harmonic.items()}
    return {
        "include": units,
        "project": units,
        "homotopy": {"0": {f"x@{p}": {f"x*xi@{p - 1}": "1"} for p in powers if p > -t_neg}},
    }


def trivial_fixture(k: int = 2, charts: int = 2) -> dict:
    document = _base("trivial", k)
    document.update({
        "local_model": {"kind": "euler", "lambda": "1", "module": "absolute"},
        "cover": _chain_cover(charts),
        "patching": [],
        "global_model": {"kind": "eta", "lambda": "1", "mu": "1"},
        "trace": {"xi*eta": "1"},
        "retraction": _euler_retraction(),
    })
    return document


def twisted_fixture(k: int = 3) -> dict:
    cover = {
        "v_charts": ["A", "B", "C"],
        "u_charts": ["u1", "u2", "u3"],
        "containment": {"u1": ["A", "B"], "u2": ["B", "C"], "u3": ["A", "B", "C"]},
        "simplices": [["u1", "u2", "u3"]],
    }
    patching = [
        {"from": "A", "to": "B", "u": "u1", "exponent": {"x*xi": _q()}},
        {"from": "A", "to": "B", "u": "u3", "exponent": {"x*xi": _q(), "xi": _q()}},
        {"from": "B", "to": "C", "u": "u2", "exponent": {"xi": _q()}},
        {"from": "B", "to": "C", "u": "u3", "exponent": {"xi": _q()}},
        {"from": "A", "to": "C", "u": "u3", "exponent": {"x*xi": _q()}},
    ]
    document = _base("twisted", k)
    document.update({
        "local_model": {"kind": "euler", "lambda": {"0": "1", "1": "1"}, "module": "absolute"},
        "cover": cover,
        "patching": patching,
        "global_model": {"kind": "planted", "lambda": "1", "mu": "1"},
        "trace": {},
    })
    return document


def rank_drop_fixture(k: int = 2) -> dict:
    document = _base("rank-drop", k)
    document.update({
        "local_model": {"kind": "euler", "lambda": _q(), "module": "absolute"},
        "cover": _chain_cover(2),
        "patching": [],
        "global_model": {"kind": "euler", "lambda": _q()},
        "trace": {},
    })
    return document


def generate_fixture(kind: str, k: int | None = None, charts: int | None = None) -> dict:
    """
    Build a validated instance document of one of the bundled families.

    Args:
        kind: a FixtureKind value
        k: order cap; defaults 2 (trivial, rank-drop) and 3 (twisted)
        charts: number of V-charts, trivial family only

    Returns:
        the canonical document

    Raises:
        InstanceError: unknown kind or a size parameter out of bounds
    """
    if kind not in FixtureKind.VALUES:
        raise InstanceError(f"Unknown fixture kind {kind!r}; expected one of {sorted(FixtureKind.VALUES)}")
    if charts is not None and kind != FixtureKind.TRIVIAL:
        raise InstanceError(f"The {kind} family has a fixed cover; charts applies to trivial only")
    if k is None:
        k = 3 if kind == FixtureKind.TWISTED else 2
    _check_bounds("k", k, K_BOUNDS)
    if kind == FixtureKind.TRIVIAL:
        charts = 2 if charts is None else charts
        _check_bounds("charts", charts, CHART_BOUNDS)
        document = trivial_fixture(k, charts)
    elif kind == FixtureKind.TWISTED:
        document = twisted_fixture(k)
    else:
        document = rank_drop_fixture(k)
    model = ingest_instance(document)
    logger.info(f"Generated {kind} fixture at k={k}")
    return model.document
