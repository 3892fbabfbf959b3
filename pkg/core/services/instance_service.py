"""
instance_service.py — Instance documents: parsing, validation and canonical JSON.

Responsible for:
- ingest_instance(): a schema-1 document (dict) to a validated InstanceModel,
  every error naming the document path it comes from
- serialize_instance(): canonical JSON (sorted keys, rationals as "p/q")
- load_instance() / dump_instance(): the same through files

An instance carries two algebraic models. The local model is the table shared
by every chart of the cover; the gluing, operator and de Rham stages run on
it, and by default (mc_source "gluing") the Maurer-Cartan stage solves on the
algebra glued from it. The global model is a finite almost dgBV table; the
Gauss-Manin and VHS stages run on it, and with mc_source "global_model" the
Maurer-Cartan stage does too. An optional retraction section supplies (π, ι, h)
for the table the Maurer-Cartan stage retracts onto.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from django.conf import settings

from core.services import polynomial_service
from core.services.errors import (
    IncompatibleDataError,
    InstanceError,
    TruncationMismatchError,
    WindowOverflowError,
)
from core.services.gluing_service import PatchingData, build_patching
from core.services.graded_service import AlgebraTable, Element, table_from_json, table_to_json
from core.services.layer_service import Retraction, TVector, supplied_retraction
from core.services.mc_service import MCProblem, build_problem, problem_from_twist
from core.services.nerve_service import CoverNerve, build_nerve
from core.services.scalars_service import ArtinRing, ArtinSeries, format_rational, rational

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

LOCAL_KINDS = {"euler", "table"}
GLOBAL_KINDS = {"euler", "eta", "planted", "table"}
MODULE_KINDS = {"none", "relative", "absolute"}
WEIGHT_KINDS = {"index", "monodromy", "supplied"}
MC_SOURCES = {"gluing", "global_model"}

_DATA_ERRORS = (IncompatibleDataError, TruncationMismatchError, WindowOverflowError)


# ─────────────────────────────────────────────────────────────────────────────
# Model
# ─────────────────────────────────────────────────────────────────────────────

@dataclass
class InstanceModel:
    """A validated instance. `document` is the canonical form it was built from."""

    name: str
    ring: ArtinRing
    t_neg: int
    t_cap: int
    local: AlgebraTable
    nerve: CoverNerve
    patching: PatchingData
    problem: MCProblem
    psi: TVector | None = None
    weight: dict = field(default_factory=lambda: {"kind": "index"})
    trace: dict = field(default_factory=dict)        # label -> rational
    document: dict = field(default_factory=dict)
    mc_source: str = "gluing"
    direction: MCProblem | None = None               # the problem ψ is read against
    retraction: Retraction | None = None

    @property
    def k(self) -> int:
        return self.ring.k

    def has_trace(self) -> bool:
        return bool(self.trace)


# ─────────────────────────────────────────────────────────────────────────────
# Path-aware readers
# ─────────────────────────────────────────────────────────────────────────────

def _get(data: dict, key: str, path: str, kind=None, default=...):
    if not isinstance(data, dict):
        raise InstanceError(f"{path}: expected an object")
    if key not in data:
        if default is ...:
            raise InstanceError(f"{path}.{key}: required field missing")
        return default
    value = data[key]
    if kind is not None and not isinstance(value, kind) or isinstance(value, bool) and kind is int:
        expected = kind.__name__ if isinstance(kind, type) else "/".join(k.__name__ for k in kind)
        raise InstanceError(f"{path}.{key}: expected {expected}, got {type(value).__name__}")
    return value


def _series(ring: ArtinRing, value, path: str) -> ArtinSeries:
    try:
        return ArtinSeries.from_json(ring, value)
    except _DATA_ERRORS as exc:
        raise InstanceError(f"{path}: {exc}") from exc


def _element(table: AlgebraTable, values, path: str) -> Element:
    if not isinstance(values, dict):
        raise InstanceError(f"{path}: expected an object of label -> series")
    out = table.zero()
    for label in sorted(values):
        if label not in table.labels:
            raise InstanceError(f"{path}.{label}: unknown basis label of table {table.name!r}")
        series = _series(table.ring, values[label], f"{path}.{label}")
        out = out + Element.from_series(table, {label: series})
    return out


def _element_json(x: Element) -> dict:
    table = x.table
    labels = sorted({table.labels[i] for i, _ in x.coords})
    return {label: x.series(label).to_json() for label in labels}


# ─────────────────────────────────────────────────────────────────────────────
# Sections of the document
# ─────────────────────────────────────────────────────────────────────────────

def _read_ring(data: dict) -> ArtinRing:
    section = _get(data, "ring", "$", dict)
    s = _get(section, "s", "$.ring", int)
    k = _get(section, "k", "$.ring", int)
    params = tuple(str(p) for p in _get(section, "params", "$.ring", list, []))
    degrees = tuple(_get(section, "param_degrees", "$.ring", list, []))
    try:
        return ArtinRing(s=s, k=k, params=params, param_degrees=tuple(int(d) for d in degrees))
    except (*_DATA_ERRORS, TypeError) as exc:
        raise InstanceError(f"$.ring: {exc}") from exc


def _ring_json(ring: ArtinRing) -> dict:
    return {"s": ring.s, "k": ring.k, "params": list(ring.params), "param_degrees": list(ring.param_degrees)}


def _read_local(ring: ArtinRing, data: dict) -> tuple[AlgebraTable, dict]:
    path = "$.local_model"
    section = _get(data, "local_model", "$", dict)
    kind = _get(section, "kind", path, str)
    if kind not in LOCAL_KINDS:
        raise InstanceError(f"{path}.kind: {kind!r} is not one of {sorted(LOCAL_KINDS)}")
    module = _get(section, "module", path, str, "absolute")
    if module not in MODULE_KINDS:
        raise InstanceError(f"{path}.module: {module!r} is not one of {sorted(MODULE_KINDS)}")
    canon: dict = {"kind": kind, "module": module}
    try:
        if kind == "table":
            table = table_from_json(ring, _get(section, "table", path, dict))
            canon["table"] = table_to_json(table)
        else:
            lam = _series(ring, section.get("lambda", 1), f"{path}.lambda")
            canon["lambda"] = lam.to_json()
            table = polynomial_service.euler_model(ring, lam)
        if table.pdb is not None and any(table.pdb.values()):
            raise InstanceError(f"{path}: the local model must have ∂̄ = 0")
        if module == "relative":
            table = polynomial_service.with_relative_module(table)
        elif module == "absolute":
            table = polynomial_service.with_absolute_module(table)
    except _DATA_ERRORS as exc:
        raise InstanceError(f"{path}: {exc}") from exc
    return table, canon


def _read_cover(data: dict) -> tuple[CoverNerve, dict]:
    path = "$.cover"
    section = _get(data, "cover", "$", dict)
    v_charts = [str(a) for a in _get(section, "v_charts", path, list)]
    u_charts = [str(i) for i in _get(section, "u_charts", path, list)]
    containment = _get(section, "containment", path, dict)
    for label in u_charts:
        if label not in containment:
            raise InstanceError(f"{path}.containment: no entry for U-chart {label!r}")
        if not isinstance(containment[label], list):
            raise InstanceError(f"{path}.containment.{label}: expected a list of V-charts")
    simplices = _get(section, "simplices", path, list, [])
    for n, simplex in enumerate(simplices):
        if not isinstance(simplex, list):
            raise InstanceError(f"{path}.simplices[{n}]: expected a list of U-charts")
    try:
        nerve = build_nerve(v_charts, u_charts, containment, simplices)
    except InstanceError as exc:
        raise InstanceError(f"{path}: {exc}") from exc
    canon = {
        "v_charts": v_charts,
        "u_charts": u_charts,
        "containment": {label: sorted(str(a) for a in containment[label]) for label in u_charts},
        "simplices": [[str(i) for i in simplex] for simplex in simplices],
    }
    return nerve, canon


def _read_patching(data: dict, nerve: CoverNerve, table: AlgebraTable) -> tuple[PatchingData, list]:
    v_index = {a: n for n, a in enumerate(nerve.v_charts)}
    u_index = {i: n for n, i in enumerate(nerve.u_charts)}
    exponents, canon = {}, []
    for n, entry in enumerate(_get(data, "patching", "$", list, [])):
        path = f"$.patching[{n}]"
        source = str(_get(entry, "from", path))
        target = str(_get(entry, "to", path))
        chart = str(_get(entry, "u", path))
        for name, label, index in (("from", source, v_index), ("to", target, v_index), ("u", chart, u_index)):
            if label not in index:
                raise InstanceError(f"{path}.{name}: unknown chart {label!r}")
        key = (v_index[source], v_index[target], u_index[chart])
        if key in exponents:
            raise InstanceError(f"{path}: exponent for ({source}, {target}, {chart}) declared twice")
        exponents[key] = _element(table, _get(entry, "exponent", path, dict), f"{path}.exponent")
        canon.append({"from": source, "to": target, "u": chart, "exponent": _element_json(exponents[key])})
    try:
        patching = build_patching(nerve, table, exponents)
    except InstanceError as exc:
        raise InstanceError(f"$.patching: {exc}") from exc
    canon.sort(key=lambda e: (v_index[e["from"]], v_index[e["to"]], u_index[e["u"]]))
    return patching, canon


def _read_global(ring: ArtinRing, data: dict, t_neg: int, t_cap: int) -> tuple[MCProblem, dict]:
    path = "$.global_model"
    section = _get(data, "global_model", "$", dict)
    kind = _get(section, "kind", path, str)
    if kind not in GLOBAL_KINDS:
        raise InstanceError(f"{path}.kind: {kind!r} is not one of {sorted(GLOBAL_KINDS)}")
    canon: dict = {"kind": kind}
    try:
        if kind == "table":
            table = table_from_json(ring, _get(section, "table", path, dict))
            canon["table"] = table_to_json(table)
            curvature = _element(table, section.get("curvature", {}), f"{path}.curvature")
            mixed = _element(table, section.get("mixed", {}), f"{path}.mixed")
            canon["curvature"] = _element_json(curvature)
            canon["mixed"] = _element_json(mixed)
            problem = build_problem(table, curvature, mixed, t_neg, t_cap)
        else:
            lam = _series(ring, section.get("lambda", 1), f"{path}.lambda")
            canon["lambda"] = lam.to_json()
            if kind == "euler":
                problem = build_problem(polynomial_service.euler_model(ring, lam), t_neg=t_neg, t_cap=t_cap)
            else:
                mu = _series(ring, section.get("mu", 1), f"{path}.mu")
                canon["mu"] = mu.to_json()
                if kind == "eta":
                    problem = build_problem(polynomial_service.eta_model(ring, lam, mu), t_neg=t_neg, t_cap=t_cap)
                else:
                    base, twist = polynomial_service.planted_base(ring, lam, mu)
                    problem = problem_from_twist(base, twist, t_neg, t_cap)
    except _DATA_ERRORS as exc:
        raise InstanceError(f"{path}: {exc}") from exc
    return problem, canon


def read_psi(problem: MCProblem, values, path: str = "$.psi") -> TVector:
    """
    A first-order direction {"<s-power>": {label: series}} on the table of `problem`.

    Raises:
        InstanceError: bad powers or labels
    """
    if not isinstance(values, dict):
        raise InstanceError(f"{path}: expected an object of s-power -> element")
    coeffs = {}
    for power in sorted(values, key=str):
        try:
            n = int(power)
        except ValueError as exc:
            raise InstanceError(f"{path}.{power}: s-powers must be integers") from exc
        coeffs[n] = _element(problem.table, values[power], f"{path}.{power}")
    zero = problem.zero()
    try:
        return zero.like(coeffs)
    except _DATA_ERRORS as exc:
        raise InstanceError(f"{path}: {exc}") from exc


def psi_json(psi: TVector) -> dict:
    return {str(n): _element_json(x) for n, x in sorted(psi.coeffs.items())}


def _retraction_key(table: AlgebraTable, text: str, path: str) -> tuple:
    """"label@p" to the window key (2p, index) of t^p·label."""
    label, _, power = str(text).rpartition("@")
    if label not in table.labels:
        raise InstanceError(f"{path}: {text!r} does not name a basis label as label@t-power")
    try:
        return 2 * int(power), table.labels.index(label)
    except ValueError as exc:
        raise InstanceError(f"{path}: t-power of {text!r} must be an integer") from exc


def _retraction_vector(table: AlgebraTable, values, path: str) -> tuple[dict, dict]:
    if not isinstance(values, dict):
        raise InstanceError(f"{path}: expected an object of label@t-power -> rational")
    vec, canon = {}, {}
    for text in sorted(values):
        key = _retraction_key(table, text, f"{path}.{text}")
        try:
            c = rational(values[text])
        except IncompatibleDataError as exc:
            raise InstanceError(f"{path}.{text}: {exc}") from exc
        if c:
            vec[key] = c
            canon[text] = format_rational(c)
    return vec, canon


def _degree(text: str, path: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise InstanceError(f"{path}.{text}: degrees must be integers") from exc


def _read_retraction(data: dict, table: AlgebraTable, t_neg: int, t_cap: int) -> tuple[Retraction | None, dict | None]:
    """
    The optional retraction section, validated against the window complex of `table`.

    Keys are "label@p" for t^p·label. include and project map a degree to
    matching lists of representatives and coordinate functionals; homotopy
    maps a degree to {key: vector of degree − 1}.
    """
    path = "$.retraction"
    section = _get(data, "retraction", "$", dict, None)
    if section is None:
        return None, None
    include, project, homotopy = {}, {}, {}
    canon: dict = {"include": {}, "project": {}, "homotopy": {}}
    for name, target in (("include", include), ("project", project)):
        for d, vectors in _get(section, name, path, dict, {}).items():
            degree = _degree(d, f"{path}.{name}")
            if not isinstance(vectors, list):
                raise InstanceError(f"{path}.{name}.{d}: expected a list of vectors")
            parsed = [_retraction_vector(table, v, f"{path}.{name}.{d}[{j}]") for j, v in enumerate(vectors)]
            target[degree] = [vec for vec, _ in parsed]
            canon[name][str(degree)] = [c for _, c in parsed]
    for d, images in _get(section, "homotopy", path, dict, {}).items():
        degree = _degree(d, f"{path}.homotopy")
        if not isinstance(images, dict):
            raise InstanceError(f"{path}.homotopy.{d}: expected an object of label@t-power -> vector")
        homotopy[degree], canon["homotopy"][str(degree)] = {}, {}
        for text in sorted(images):
            key = _retraction_key(table, text, f"{path}.homotopy.{d}.{text}")
            vec, vec_canon = _retraction_vector(table, images[text], f"{path}.homotopy.{d}.{text}")
            homotopy[degree][key] = vec
            canon["homotopy"][str(degree)][text] = vec_canon
    try:
        retraction = supplied_retraction(table, t_neg, t_cap, include, project, homotopy)
    except _DATA_ERRORS as exc:
        raise InstanceError(f"{path}: {exc}") from exc
    return retraction, canon


def _read_weight(data: dict) -> dict:
    path = "$.weight"
    section = _get(data, "weight", "$", dict, {"kind": "index"})
    kind = _get(section, "kind", path, str)
    if kind not in WEIGHT_KINDS:
        raise InstanceError(f"{path}.kind: {kind!r} is not one of {sorted(WEIGHT_KINDS)}")
    if kind != "supplied":
        return {"kind": kind}
    levels = {}
    for w, vectors in _get(section, "levels", path, dict).items():
        try:
            key = int(w)
            levels[str(key)] = [[format_rational(rational(c)) for c in v] for v in vectors]
        except (*_DATA_ERRORS, TypeError, ValueError) as exc:
            raise InstanceError(f"{path}.levels.{w}: {exc}") from exc
    return {"kind": kind, "levels": dict(sorted(levels.items(), key=lambda item: int(item[0])))}


def supplied_levels(weight: dict) -> dict:
    """Supplied levels as {int: [[rational]]}."""
    return {int(w): [[rational(c) for c in v] for v in vectors] for w, vectors in weight["levels"].items()}


def _read_trace(data: dict, table: AlgebraTable) -> dict:
    path = "$.trace"
    section = _get(data, "trace", "$", dict, {})
    out = {}
    for label in sorted(section):
        if label not in table.labels:
            raise InstanceError(f"{path}.{label}: unknown basis label of the global model")
        try:
            value = rational(section[label])
        except IncompatibleDataError as exc:
            raise InstanceError(f"{path}.{label}: {exc}") from exc
        if value:
            out[label] = value
    return out


# ─────────────────────────────────────────────────────────────────────────────
# Ingestion and serialization
# ─────────────────────────────────────────────────────────────────────────────

def ingest_instance(data: dict) -> InstanceModel:
    """
    Validate a document and resolve every cross-reference.

    Args:
        data: the parsed JSON document

    Returns:
        InstanceModel with its canonical document attached

    Raises:
        InstanceError: schema violations and dangling references, with the
            document path in the message
    """
    if not isinstance(data, dict):
        raise InstanceError("$: an instance document must be a JSON object")
    schema = _get(data, "schema", "$", int)
    if schema != SCHEMA_VERSION:
        raise InstanceError(f"$.schema: unsupported schema version {schema}, expected {SCHEMA_VERSION}")
    name = str(_get(data, "name", "$", str, "instance"))
    ring = _read_ring(data)
    window = _get(data, "window", "$", dict, {})
    t_neg = _get(window, "t_neg", "$.window", int, settings.DEFORMATION_T_NEG)
    t_cap = _get(window, "t_cap", "$.window", int, settings.DEFORMATION_T_CAP)
    if t_neg < 0 or t_cap < 0:
        raise InstanceError(f"$.window: t_neg and t_cap must be non-negative, got {t_neg}, {t_cap}")

    local, local_canon = _read_local(ring, data)
    nerve, cover_canon = _read_cover(data)
    patching, patching_canon = _read_patching(data, nerve, local)
    problem, global_canon = _read_global(ring, data, t_neg, t_cap)
    mc_source = _get(data, "mc_source", "$", str, "gluing")
    if mc_source not in MC_SOURCES:
        raise InstanceError(f"$.mc_source: {mc_source!r} is not one of {sorted(MC_SOURCES)}")
    direction = problem if mc_source == "global_model" else build_problem(local, t_neg=t_neg, t_cap=t_cap)
    retraction, retraction_canon = _read_retraction(data, direction.table, t_neg, t_cap)
    if retraction is not None and mc_source == "global_model":
        problem.supplied = retraction
    psi = read_psi(direction, data["psi"]) if data.get("psi") else None
    weight = _read_weight(data)
    trace = _read_trace(data, problem.table)

    document = {
        "schema": SCHEMA_VERSION,
        "name": name,
        "ring": _ring_json(ring),
        "window": {"t_neg": t_neg, "t_cap": t_cap},
        "local_model": local_canon,
        "cover": cover_canon,
        "patching": patching_canon,
        "global_model": global_canon,
        "mc_source": mc_source,
        "weight": weight,
        "trace": {label: format_rational(c) for label, c in trace.items()},
    }
    if psi is not None:
        document["psi"] = psi_json(psi)
    if retraction_canon is not None:
        document["retraction"] = retraction_canon
    logger.info(
        f"Instance {name!r}: k={ring.k}, s={ring.s}, {len(nerve.v_charts)} V-charts, "
        f"{len(nerve.u_charts)} U-charts, {len(patching.exponents)} exponents, global model {global_canon['kind']}, "
        f"Maurer-Cartan on {mc_source}"
    )
    return InstanceModel(
        name, ring, t_neg, t_cap, local, nerve, patching, problem, psi, weight, trace, document,
        mc_source=mc_source, direction=direction, retraction=retraction,
    )


def serialize_instance(model: InstanceModel) -> str:
    """Canonical JSON text of the model's document."""
    return canonical_json(model.document)


def canonical_json(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def parse_json(text: str, source: str = "<input>") -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"{source}: not valid JSON ({exc.msg} at line {exc.lineno})") from exc


def load_instance(path) -> InstanceModel:
    """
    Read and ingest an instance file.

    Raises:
        InstanceError: unreadable file, bad JSON, or an invalid document
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise InstanceError(f"{path}: cannot read instance ({exc.strerror})") from exc
    return ingest_instance(parse_json(text, str(path)))


def dump_instance(model: InstanceModel, path) -> None:
    Path(path).write_text(serialize_instance(model), encoding="utf-8")
