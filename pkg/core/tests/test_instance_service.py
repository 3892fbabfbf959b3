"""
test_instance_service.py — Tests for instance ingestion, validation paths and
canonical serialization.
"""

from __future__ import annotations

import copy
import json

import pytest

from core.services.errors import InstanceError
from core.services.instance_service import (
    canonical_json,
    dump_instance,
    ingest_instance,
    load_instance,
    parse_json,
    read_psi,
    serialize_instance,
)


class TestIngest:
    """The bundled documents and the model they give."""

    def test_trivial_loads(self, trivial_instance):
        assert trivial_instance.name == "trivial"
        assert trivial_instance.k == 2
        assert trivial_instance.nerve.v_charts == ("A", "B")
        assert trivial_instance.has_trace()
        assert not trivial_instance.patching.exponents

    def test_local_model_is_holomorphic(self, trivial_instance):
        """The local table carries the absolute module and no ∂̄."""
        local = trivial_instance.local
        assert local.module is not None
        assert local.pdb is None or not any(local.pdb.values())

    def test_twisted_global_model_is_planted(self, twisted_instance):
        assert twisted_instance.problem.twist is not None
        assert not twisted_instance.problem.curvature.is_zero()
        assert not twisted_instance.has_trace()

    @pytest.mark.parametrize("name", ["trivial", "twisted", "rank_drop"])
    def test_bundled_files_are_canonical(self, fixture_path, name):
        """Every bundled file is already in canonical form."""
        path = fixture_path(name)
        assert serialize_instance(load_instance(path)) == path.read_text(encoding="utf-8")

    def test_round_trip(self, twisted_document):
        """serialize ∘ ingest is idempotent on its own output."""
        first = serialize_instance(ingest_instance(twisted_document))
        assert serialize_instance(ingest_instance(json.loads(first))) == first

    def test_defaults_are_written_out(self, trivial_document):
        document = copy.deepcopy(trivial_document)
        del document["weight"]
        document["local_model"]["lambda"] = 1
        model = ingest_instance(document)
        assert model.document["weight"] == {"kind": "index"}
        assert model.document["local_model"]["lambda"] == {"0": "1"}

    def test_dump_and_load(self, tmp_path, trivial_instance):
        target = tmp_path / "copy.json"
        dump_instance(trivial_instance, target)
        assert serialize_instance(load_instance(target)) == serialize_instance(trivial_instance)


class TestValidationErrors:
    """Errors carry the document path."""

    def test_missing_containment_names_u_chart(self, trivial_document):
        document = copy.deepcopy(trivial_document)
        del document["cover"]["containment"]["u1"]
        with pytest.raises(InstanceError, match="U-chart 'u1'"):
            ingest_instance(document)

    def test_unsupported_schema(self, trivial_document):
        document = dict(trivial_document, schema=2)
        with pytest.raises(InstanceError, match=r"\$\.schema"):
            ingest_instance(document)

    def test_missing_ring(self, trivial_document):
        document = copy.deepcopy(trivial_document)
        del document["ring"]
        with pytest.raises(InstanceError, match=r"\$\.ring: required field missing"):
            ingest_instance(document)

    def test_unknown_label_in_exponent(self, twisted_document):
        document = copy.deepcopy(twisted_document)
        document["patching"][0]["exponent"] = {"zeta": {"1": "1"}}
        with pytest.raises(InstanceError, match=r"\$\.patching\[0\]\.exponent\.zeta"):
            ingest_instance(document)

    def test_unknown_chart_in_patching(self, twisted_document):
        document = copy.deepcopy(twisted_document)
        document["patching"][0]["to"] = "D"
        with pytest.raises(InstanceError, match="unknown chart 'D'"):
            ingest_instance(document)

    def test_duplicate_exponent(self, twisted_document):
        document = copy.deepcopy(twisted_document)
        document["patching"].append(copy.deepcopy(document["patching"][0]))
        with pytest.raises(InstanceError, match="declared twice"):
            ingest_instance(document)

    def test_wrong_type(self, trivial_document):
        document = copy.deepcopy(trivial_document)
        document["ring"]["k"] = "two"
        with pytest.raises(InstanceError, match=r"\$\.ring\.k: expected int"):
            ingest_instance(document)

    def test_boolean_is_not_an_int(self, trivial_document):
        document = copy.deepcopy(trivial_document)
        document["window"]["t_cap"] = True
        with pytest.raises(InstanceError, match="t_cap"):
            ingest_instance(document)

    def test_negative_window(self, trivial_document):
        document = copy.deepcopy(trivial_document)
        document["window"]["t_neg"] = -1
        with pytest.raises(InstanceError, match="non-negative"):
            ingest_instance(document)

    def test_unknown_global_kind(self, trivial_document):
        document = copy.deepcopy(trivial_document)
        document["global_model"]["kind"] = "quintic"
        with pytest.raises(InstanceError, match=r"\$\.global_model\.kind"):
            ingest_instance(document)

    def test_trace_label_must_exist(self, trivial_document):
        document = copy.deepcopy(trivial_document)
        document["trace"] = {"zeta": "1"}
        with pytest.raises(InstanceError, match=r"\$\.trace\.zeta"):
            ingest_instance(document)

    def test_bad_json(self):
        with pytest.raises(InstanceError, match="not valid JSON"):
            parse_json("{", "broken.json")

    def test_missing_file(self, tmp_path):
        with pytest.raises(InstanceError, match="cannot read"):
            load_instance(tmp_path / "absent.json")


class TestPsi:
    """First-order directions in the document."""

    def test_read_psi(self, trivial_instance, q_series):
        problem = trivial_instance.direction
        psi = read_psi(problem, {"0": {"1": {"1": "1"}}})
        assert psi.component(0) == problem.table.one().scale(q_series(problem.table.ring))

    def test_non_integer_power(self, trivial_instance):
        with pytest.raises(InstanceError, match="s-powers"):
            read_psi(trivial_instance.direction, {"half": {}})

    def test_canonical_json_is_sorted(self):
        assert canonical_json({"b": 1, "a": [1]}) == '{\n  "a": [\n    1\n  ],\n  "b": 1\n}\n'


class TestMCSource:
    """Which table the Maurer-Cartan stage reads ψ against."""

    def test_gluing_by_default(self, trivial_instance):
        assert trivial_instance.mc_source == "gluing"
        assert trivial_instance.direction.table is trivial_instance.local
        assert trivial_instance.document["mc_source"] == "gluing"

    def test_global_model_source(self, trivial_document):
        document = copy.deepcopy(trivial_document)
        document["mc_source"] = "global_model"
        del document["retraction"]
        model = ingest_instance(document)
        assert model.direction is model.problem
        assert model.retraction is None

    def test_unknown_source(self, trivial_document):
        document = copy.deepcopy(trivial_document)
        document["mc_source"] = "oracle"
        with pytest.raises(InstanceError, match=r"\$\.mc_source"):
            ingest_instance(document)


class TestRetraction:
    """The optional supplied (π, ι, h)."""

    def test_trivial_carries_a_retraction(self, trivial_instance):
        retraction = trivial_instance.retraction
        assert retraction is not None
        assert retraction.harmonic_rank(0) == 5
        assert retraction.harmonic_rank(-1) == 5
        assert retraction.check().passed

    def test_other_fixtures_compute_theirs(self, twisted_instance, rank_drop_instance):
        assert twisted_instance.retraction is None
        assert rank_drop_instance.retraction is None

    def test_wrong_homotopy_rejected(self, trivial_document):
        """h(t⁰x) = t⁰x*xi misses dh = id on t⁰x."""
        document = copy.deepcopy(trivial_document)
        document["retraction"]["homotopy"]["0"]["x@0"] = {"x*xi@0": "1"}
        with pytest.raises(InstanceError, match="homotopy_retraction"):
            ingest_instance(document)

    def test_unknown_label(self, trivial_document):
        document = copy.deepcopy(trivial_document)
        document["retraction"]["include"]["0"][0] = {"zeta@0": "1"}
        with pytest.raises(InstanceError, match=r"\$\.retraction\.include\.0\[0\]\.zeta@0"):
            ingest_instance(document)

    def test_missing_representative(self, trivial_document):
        document = copy.deepcopy(trivial_document)
        document["retraction"]["include"]["0"].pop()
        with pytest.raises(InstanceError, match="4 representatives, 5 functionals"):
            ingest_instance(document)
