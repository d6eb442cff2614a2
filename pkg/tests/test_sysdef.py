from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sunrise import sysdef as sd
from sunrise.errors import (
    FileParamInlineValueError,
    KindMismatchError,
    MissingUploadError,
    SchemaError,
    SysDefSyntaxError,
    UnknownParameterError,
)


class TestParseGolden:
    def test_golden_fields(self, golden_sysdef):
        d = golden_sysdef
        assert d.name == "AGRA RISC-V"
        assert d.version == "1.0"
        assert d.documentation.contact == "T. Kraus"
        assert d.documentation.summary == "RISC-V Demonstration VP"
        assert d.image_ref == "some_docker_registry.com/eval_platform_agra:ready-to-run"
        assert d.build_command == "python build.py"
        assert d.run_command == "source run.sh"
        assert set(d.build_parameters) == {"compile_args"}
        assert d.build_parameters["compile_args"].default == sd.ParamValue.text("-O3 -Wall")
        assert set(d.run_parameters) == {"run_time_ms", "app", "simulator_args"}
        assert d.run_parameters["run_time_ms"].default == sd.ParamValue.number(1000)
        assert d.run_parameters["app"].default == sd.ParamValue.file("demo_sw/demo_app")
        assert d.run_parameters["simulator_args"].default == sd.ParamValue.text(
            "--intercept-syscalls"
        )
        assert set(d.results) == {"signal_trace"}
        assert d.results["signal_trace"].path == "vp/install/sim_trace.vcd"
        assert d.results["signal_trace"].type == "vcd"

    def test_golden_is_valid(self, golden_sysdef):
        assert sd.validate_sysdef(golden_sysdef) == []

    def test_minimal_document(self):
        d = sd.parse_sysdef(
            json.dumps(
                {"name": "n", "version": "1", "docker_image": "img", "run_command": "true"}
            )
        )
        assert d.build_command is None
        assert not d.has_build_step
        assert d.build_parameters == {} and d.run_parameters == {} and d.results == {}

    def test_duplicate_param_across_phases(self, golden_text):
        # Oracle: a uniqueness scan over the merged build+run key sets must
        # find the collision this edit introduces.
        doc = json.loads(golden_text)
        doc["build_parameters"]["run_time_ms"] = 5
        merged = list(doc["build_parameters"]) + list(doc["run_parameters"])
        assert len(merged) != len(set(merged))
        with pytest.raises(SchemaError, match="duplicate parameter"):
            sd.parse_sysdef(json.dumps(doc))

    def test_trailing_comma_is_rejected(self, golden_text):
        broken = golden_text.replace(
            '"simulator_args": "--intercept-syscalls"',
            '"simulator_args": "--intercept-syscalls",',
        )
        with pytest.raises(SysDefSyntaxError):
            sd.parse_sysdef(broken)

    def test_unknown_top_level_key(self, golden_text):
        doc = json.loads(golden_text)
        doc["extra_stuff"] = 1
        with pytest.raises(SchemaError, match="unknown top-level"):
            sd.parse_sysdef(json.dumps(doc))

    def test_duplicate_json_key_rejected(self):
        text = '{"name": "a", "name": "b", "version": "1", "docker_image": "i", "run_command": "r"}'
        with pytest.raises(SchemaError, match="duplicate key"):
            sd.parse_sysdef(text)

    def test_missing_required_key(self, golden_text):
        doc = json.loads(golden_text)
        del doc["run_command"]
        with pytest.raises(SchemaError, match="run_command"):
            sd.parse_sysdef(json.dumps(doc))

    def test_build_params_without_build_command(self, golden_text):
        doc = json.loads(golden_text)
        del doc["build_command"]
        with pytest.raises(SchemaError, match="build step"):
            sd.parse_sysdef(json.dumps(doc))

    def test_absolute_result_path(self, golden_text):
        doc = json.loads(golden_text)
        doc["results"]["signal_trace"]["path"] = "/etc/passwd"
        with pytest.raises(SchemaError, match="relative"):
            sd.parse_sysdef(json.dumps(doc))


class TestValidate:
    def test_empty_run_command(self, golden_sysdef):
        import dataclasses

        broken = dataclasses.replace(golden_sysdef, run_command="")
        violations = sd.validate_sysdef(broken)
        assert any(v.field == "run_command" for v in violations)

    def test_traversal_result_path(self, golden_sysdef):
        import dataclasses

        broken = dataclasses.replace(
            golden_sysdef,
            results={"signal_trace": sd.ResultSpec("signal_trace", "../../etc/x", "vcd")},
        )
        violations = sd.validate_sysdef(broken)
        assert any(v.field == "results.signal_trace.path" and "traversal" in v.rule for v in violations)


class TestDeriveAndOverrides:
    def test_derive_golden_defaults(self, golden_sysdef):
        cfg = sd.derive_syscfg(golden_sysdef)
        assert cfg.build_parameters == {"compile_args": sd.ParamValue.text("-O3 -Wall")}
        assert cfg.run_parameters == {
            "run_time_ms": sd.ParamValue.number(1000),
            "app": sd.ParamValue.file("demo_sw/demo_app"),
            "simulator_args": sd.ParamValue.text("--intercept-syscalls"),
        }
        assert (cfg.system_name, cfg.system_version) == golden_sysdef.identity

    def test_derive_no_parameters(self):
        d = sd.parse_sysdef(
            json.dumps({"name": "n", "version": "1", "docker_image": "img", "run_command": "true"})
        )
        cfg = sd.derive_syscfg(d)
        assert cfg.build_parameters == {} and cfg.run_parameters == {}

    def test_derived_cfg_checks_clean(self, golden_sysdef):
        # Oracle: field-by-field comparison against the declared defaults.
        cfg = sd.derive_syscfg(golden_sysdef)
        assert sd.check_against(cfg, golden_sysdef) == []
        for name, spec in golden_sysdef.run_parameters.items():
            assert cfg.run_parameters[name] == spec.default

    def test_override_run_time(self, golden_sysdef):
        base = sd.derive_syscfg(golden_sysdef)
        # Oracle: a plain map-update over the derived config.
        expected = dict(base.run_parameters)
        expected["run_time_ms"] = sd.ParamValue.number(500)
        cfg = sd.apply_overrides(base, golden_sysdef, {"run_time_ms": 500})
        assert cfg.run_parameters == expected
        assert cfg.build_parameters == base.build_parameters

    def test_override_identity(self, golden_sysdef):
        base = sd.derive_syscfg(golden_sysdef)
        assert sd.apply_overrides(base, golden_sysdef, {}) == base

    def test_override_unknown(self, golden_sysdef):
        base = sd.derive_syscfg(golden_sysdef)
        with pytest.raises(UnknownParameterError):
            sd.apply_overrides(base, golden_sysdef, {"bogus": 1})

    def test_override_kind_mismatch(self, golden_sysdef):
        base = sd.derive_syscfg(golden_sysdef)
        with pytest.raises(KindMismatchError):
            sd.apply_overrides(base, golden_sysdef, {"run_time_ms": "fast"})

    def test_file_param_rejects_inline(self, golden_sysdef):
        base = sd.derive_syscfg(golden_sysdef)
        with pytest.raises(FileParamInlineValueError):
            sd.apply_overrides(base, golden_sysdef, {"app": "inline-bytes"})

    def test_file_param_accepts_descriptor(self, golden_sysdef):
        base = sd.derive_syscfg(golden_sysdef)
        cfg = sd.apply_overrides(
            base, golden_sysdef, {"app": {"value": "upload-token-1", "is_file": True}}
        )
        assert cfg.run_parameters["app"] == sd.ParamValue.file("upload-token-1")


class TestClassify:
    def test_build_text(self, golden_sysdef):
        info = sd.classify_param(golden_sysdef, "compile_args")
        assert (info.phase, info.kind) == (sd.Phase.BUILD, sd.ParamKind.TEXT)

    def test_run_file(self, golden_sysdef):
        info = sd.classify_param(golden_sysdef, "app")
        assert (info.phase, info.kind) == (sd.Phase.RUN, sd.ParamKind.FILE)

    def test_unknown(self, golden_sysdef):
        with pytest.raises(UnknownParameterError):
            sd.classify_param(golden_sysdef, "nonexistent")


class TestMaterialize:
    def test_staged_file_rewrite(self, golden_sysdef):
        cfg = sd.derive_syscfg(golden_sysdef)
        doc = json.loads(sd.materialize_syscfg(cfg, {"app": "params/app"}))
        assert doc["run_parameters"]["app"] == {"value": "params/app", "is_file": True}
        assert doc["run_parameters"]["run_time_ms"] == 1000
        assert doc["system"] == {"name": "AGRA RISC-V", "version": "1.0"}

    def test_no_file_params_equals_plain_serialization(self):
        d = sd.parse_sysdef(
            json.dumps(
                {
                    "name": "n",
                    "version": "1",
                    "docker_image": "img",
                    "run_command": "true",
                    "run_parameters": {"x": 1},
                }
            )
        )
        cfg = sd.derive_syscfg(d)
        assert sd.materialize_syscfg(cfg, {}) == sd.canonical_json(sd.syscfg_to_wire(cfg))

    def test_missing_upload(self, golden_sysdef):
        cfg = sd.derive_syscfg(golden_sysdef)
        with pytest.raises(MissingUploadError):
            sd.materialize_syscfg(cfg, {})

    def test_deterministic(self, golden_sysdef):
        cfg = sd.derive_syscfg(golden_sysdef)
        staged = {"app": "params/app"}
        assert sd.materialize_syscfg(cfg, staged) == sd.materialize_syscfg(cfg, staged)


# -- property tests ----------------------------------------------------------

identifiers = st.from_regex(r"[a-z_][a-z0-9_]{0,8}", fullmatch=True)
safe_segments = st.from_regex(r"[a-z0-9]{1,6}", fullmatch=True)
rel_paths = st.lists(safe_segments, min_size=1, max_size=3).map("/".join)
text_values = st.text(max_size=12)
number_values = st.one_of(
    st.integers(min_value=-(2**53), max_value=2**53),
    st.floats(allow_nan=False, allow_infinity=False, width=64),
)
param_defaults = st.one_of(
    text_values.map(sd.ParamValue.text),
    number_values.map(sd.ParamValue.number),
    st.booleans().map(sd.ParamValue.flag),
    rel_paths.map(sd.ParamValue.file),
)


@st.composite
def sysdefs(draw) -> sd.SysDef:
    names = draw(
        st.lists(identifiers, min_size=0, max_size=6, unique=True)
    )
    split = draw(st.integers(min_value=0, max_value=len(names)))
    has_build = draw(st.booleans()) or split > 0
    build_names, run_names = names[:split], names[split:]
    build_params = {
        n: sd.ParamSpec(n, sd.Phase.BUILD, draw(param_defaults)) for n in build_names
    }
    run_params = {n: sd.ParamSpec(n, sd.Phase.RUN, draw(param_defaults)) for n in run_names}
    result_names = draw(st.lists(identifiers, min_size=0, max_size=3, unique=True))
    results = {
        n: sd.ResultSpec(n, draw(rel_paths), draw(st.sampled_from(["vcd", "json", "txt", "bin"])))
        for n in result_names
    }
    return sd.SysDef(
        name=draw(st.text(min_size=1, max_size=10)),
        version=draw(st.from_regex(r"[0-9]\.[0-9]", fullmatch=True)),
        image_ref=draw(st.text(min_size=1, max_size=15)),
        run_command=draw(st.text(min_size=1, max_size=15)),
        build_command="make" if has_build else None,
        build_parameters=build_params,
        run_parameters=run_params,
        results=results,
    )


@given(sysdefs())
@settings(max_examples=60)
def test_roundtrip(d: sd.SysDef):
    assert sd.validate_sysdef(d) == []
    assert sd.parse_sysdef(sd.serialize_sysdef(d)) == d


@given(sysdefs())
@settings(max_examples=60)
def test_canonical_serialization_is_byte_stable(d: sd.SysDef):
    once = sd.serialize_sysdef(d)
    assert sd.serialize_sysdef(sd.parse_sysdef(once)) == once


@given(sysdefs())
@settings(max_examples=40)
def test_derive_apply_identity(d: sd.SysDef):
    cfg = sd.derive_syscfg(d)
    assert sd.apply_overrides(cfg, d, {}) == cfg
    assert sd.check_against(cfg, d) == []


@st.composite
def sysdef_with_disjoint_overrides(draw):
    d = draw(sysdefs().filter(lambda d: len(list(d.parameters())) >= 2))
    specs = list(d.parameters())
    picked = draw(st.permutations(specs))
    cut = draw(st.integers(min_value=1, max_value=len(picked) - 1))
    first, second = picked[:cut], picked[cut:]

    def overrides_for(specs_subset):
        out = {}
        for spec in specs_subset:
            if spec.default.kind is sd.ParamKind.FILE:
                out[spec.name] = {"value": draw(rel_paths), "is_file": True}
            elif spec.default.kind is sd.ParamKind.TEXT:
                out[spec.name] = draw(text_values)
            elif spec.default.kind is sd.ParamKind.NUMBER:
                out[spec.name] = draw(number_values)
            else:
                out[spec.name] = draw(st.booleans())
        return out

    return d, overrides_for(first), overrides_for(second)


@given(sysdef_with_disjoint_overrides())
@settings(max_examples=40)
def test_override_commutativity_on_disjoint_keys(case):
    d, first, second = case
    base = sd.derive_syscfg(d)
    sequential = sd.apply_overrides(sd.apply_overrides(base, d, first), d, second)
    merged = sd.apply_overrides(base, d, {**first, **second})
    flipped = sd.apply_overrides(sd.apply_overrides(base, d, second), d, first)
    assert sequential == merged == flipped


@given(sysdef_with_disjoint_overrides())
@settings(max_examples=40)
def test_key_set_closure(case):
    d, first, second = case
    cfg = sd.derive_syscfg(d)
    for overrides in (first, second, first):
        cfg = sd.apply_overrides(cfg, d, overrides)
        assert set(cfg.build_parameters) == set(d.build_parameters)
        assert set(cfg.run_parameters) == set(d.run_parameters)
