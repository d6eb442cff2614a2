from __future__ import annotations

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sunrise import sysdef as sd
from sunrise.errors import (
    CfgMismatchError,
    IllegalTransitionError,
    NotAFileParameterError,
    UnknownParameterError,
)
from sunrise.experiment import (
    ArtifactRef,
    Event,
    Experiment,
    ExperimentState,
    JobRecord,
    create_experiment,
    transition,
    utc_now_iso,
)

S = ExperimentState
E = Event

# Expected table, written out independently from the implementation:
# build_requested fires from CREATED and BUILD_FAILED; build outcomes resolve
# BUILDING; run_requested fires from BUILT, COMPLETED and RUN_FAILED; run
# outcomes resolve RUNNING; a build-parameter change falls BUILT, COMPLETED
# and RUN_FAILED back to CREATED; a run-parameter change is a self-loop in
# CREATED, BUILT, COMPLETED and RUN_FAILED; archiving is legal from every
# state except BUILDING, RUNNING and ARCHIVED. Everything else is illegal.
def expected_transition(state: S, event: E) -> S | None:
    if event is E.BUILD_REQUESTED and state in (S.CREATED, S.BUILD_FAILED):
        return S.BUILDING
    if event is E.BUILD_SUCCEEDED and state is S.BUILDING:
        return S.BUILT
    if event is E.BUILD_FAILED and state is S.BUILDING:
        return S.BUILD_FAILED
    if event is E.RUN_REQUESTED and state in (S.BUILT, S.COMPLETED, S.RUN_FAILED):
        return S.RUNNING
    if event is E.RUN_SUCCEEDED and state is S.RUNNING:
        return S.COMPLETED
    if event is E.RUN_FAILED and state is S.RUNNING:
        return S.RUN_FAILED
    if event is E.BUILD_PARAMS_CHANGED and state in (S.BUILT, S.COMPLETED, S.RUN_FAILED):
        return S.CREATED
    if event is E.RUN_PARAMS_CHANGED and state in (S.CREATED, S.BUILT, S.COMPLETED, S.RUN_FAILED):
        return state
    if event is E.ARCHIVE_REQUESTED and state not in (S.BUILDING, S.RUNNING, S.ARCHIVED):
        return S.ARCHIVED
    return None


def test_exhaustive_transition_table():
    # 8 states x 9 events: every pair either matches the documented table or
    # raises IllegalTransitionError; no other behaviour.
    pairs = [(state, event) for state in S for event in E]
    assert len(pairs) == 72
    for state, event in pairs:
        expected = expected_transition(state, event)
        if expected is None:
            with pytest.raises(IllegalTransitionError):
                transition(state, event)
        else:
            assert transition(state, event) is expected, (state, event)


def test_archived_is_absorbing():
    for event in E:
        with pytest.raises(IllegalTransitionError):
            transition(S.ARCHIVED, event)


def test_reachability_of_completed():
    state = S.CREATED
    for event in (E.BUILD_REQUESTED, E.BUILD_SUCCEEDED, E.RUN_REQUESTED, E.RUN_SUCCEEDED):
        state = transition(state, event)
    assert state is S.COMPLETED


def test_run_requires_finished_build():
    with pytest.raises(IllegalTransitionError):
        transition(S.CREATED, E.RUN_REQUESTED)


def test_build_invalidation_blocks_run_until_rebuild():
    state = transition(S.COMPLETED, E.BUILD_PARAMS_CHANGED)
    assert state is S.CREATED
    with pytest.raises(IllegalTransitionError):
        transition(state, E.RUN_REQUESTED)
    state = transition(state, E.BUILD_REQUESTED)
    state = transition(state, E.BUILD_SUCCEEDED)
    assert transition(state, E.RUN_REQUESTED) is S.RUNNING


# -- experiment object lifecycle ------------------------------------------------


def _record(phase: str) -> JobRecord:
    return JobRecord(f"job-{phase}", "local", phase, started_at=utc_now_iso())


def _artifact() -> ArtifactRef:
    return ArtifactRef("metrics", "json", 2, "artifacts/metrics")


@pytest.fixture
def golden_experiment(golden_sysdef) -> Experiment:
    return create_experiment(sd.derive_syscfg(golden_sysdef), golden_sysdef, creator="alice")


class TestCreate:
    def test_build_system_starts_created(self, golden_experiment):
        assert golden_experiment.state is S.CREATED
        assert golden_experiment.creator == "alice"

    def test_no_build_system_starts_built(self, golden_sysdef):
        import dataclasses

        prebuilt = dataclasses.replace(golden_sysdef, build_command=None, build_parameters={})
        exp = create_experiment(sd.derive_syscfg(prebuilt), prebuilt, creator="bob")
        assert exp.state is S.BUILT

    def test_distinct_uuids(self, golden_sysdef):
        cfg = sd.derive_syscfg(golden_sysdef)
        a = create_experiment(cfg, golden_sysdef, creator="u")
        b = create_experiment(cfg, golden_sysdef, creator="u")
        assert a.id != b.id
        import uuid

        assert uuid.UUID(a.id).version == 4
        assert a.id == a.id.lower()

    def test_mismatched_cfg_rejected(self, golden_sysdef):
        cfg = sd.SysCfg("AGRA RISC-V", "1.0", {}, {})
        with pytest.raises(CfgMismatchError):
            create_experiment(cfg, golden_sysdef, creator="u")


class TestSetParameters:
    def test_run_override_keeps_built(self, golden_experiment, golden_sysdef):
        exp = golden_experiment
        exp.start_build(_record("build"))
        exp.finish_build(True)
        assert exp.state is S.BUILT
        exp.set_parameters(golden_sysdef, {"run_time_ms": 2000})
        assert exp.state is S.BUILT
        assert exp.cfg.run_parameters["run_time_ms"] == sd.ParamValue.number(2000)

    def test_build_override_falls_back_to_created(self, golden_experiment, golden_sysdef):
        exp = golden_experiment
        exp.start_build(_record("build"))
        exp.finish_build(True)
        exp.start_run(_record("run"))
        exp.finish_run(True, {"signal_trace": _artifact()})
        assert exp.state is S.COMPLETED and exp.results_index
        exp.set_parameters(golden_sysdef, {"compile_args": "-O0"})
        assert exp.state is S.CREATED
        assert exp.results_index == {}
        assert exp.build_record is None

    def test_edit_while_running_rejected(self, golden_experiment, golden_sysdef):
        exp = golden_experiment
        exp.start_build(_record("build"))
        exp.finish_build(True)
        exp.start_run(_record("run"))
        with pytest.raises(IllegalTransitionError):
            exp.set_parameters(golden_sysdef, {"run_time_ms": 1})

    def test_build_edit_in_created_stays_created(self, golden_experiment, golden_sysdef):
        exp = golden_experiment
        assert exp.state is S.CREATED
        exp.set_parameters(golden_sysdef, {"compile_args": "-O1"})
        assert exp.state is S.CREATED

    def test_build_edit_in_build_failed_resets_to_created(self, golden_experiment, golden_sysdef):
        exp = golden_experiment
        exp.start_build(_record("build"))
        exp.finish_build(False, "exit 1")
        assert exp.state is S.BUILD_FAILED
        exp.set_parameters(golden_sysdef, {"compile_args": "-O1"})
        assert exp.state is S.CREATED


class TestUploads:
    def test_upload_file_param(self, golden_experiment, golden_sysdef):
        exp = golden_experiment
        exp.record_upload(golden_sysdef, "app", "params/app")
        assert exp.uploads == {"app": "params/app"}
        assert exp.state is S.CREATED

    def test_upload_keeps_built_for_run_phase_file(self, golden_experiment, golden_sysdef):
        exp = golden_experiment
        exp.start_build(_record("build"))
        exp.finish_build(True)
        exp.record_upload(golden_sysdef, "app", "params/app")
        assert exp.state is S.BUILT

    def test_upload_non_file_param(self, golden_experiment, golden_sysdef):
        with pytest.raises(NotAFileParameterError):
            golden_experiment.record_upload(golden_sysdef, "run_time_ms", "params/x")

    def test_upload_unknown_param(self, golden_experiment, golden_sysdef):
        with pytest.raises(UnknownParameterError):
            golden_experiment.record_upload(golden_sysdef, "nope", "params/x")

    def test_reupload_replaces(self, golden_experiment, golden_sysdef):
        exp = golden_experiment
        exp.record_upload(golden_sysdef, "app", "params/app")
        exp.record_upload(golden_sysdef, "app", "params/app")
        assert list(exp.uploads) == ["app"]


class TestSerialization:
    def test_roundtrip(self, golden_experiment):
        exp = golden_experiment
        exp.start_build(_record("build"))
        exp.finish_build(True)
        exp.start_run(_record("run"))
        exp.finish_run(False, {"signal_trace": _artifact()}, "exit 3")
        doc = json.loads(json.dumps(exp.to_json()))
        restored = Experiment.from_json(doc)
        assert restored.to_json() == exp.to_json()
        assert restored.state is S.RUN_FAILED
        assert restored.cfg == exp.cfg
        assert restored.sysdef_snapshot == exp.sysdef_snapshot


# -- randomized trace property -------------------------------------------------


@given(st.lists(st.sampled_from(list(E)), max_size=40))
@settings(max_examples=80, deadline=None)
def test_result_gating_over_random_traces(events):
    from conftest import GOLDEN_SYSDEF_PATH

    golden = sd.parse_sysdef(GOLDEN_SYSDEF_PATH.read_text())
    exp = create_experiment(sd.derive_syscfg(golden), golden, creator="prop")
    for event in events:
        had_results = bool(exp.results_index)
        try:
            if event is E.BUILD_REQUESTED:
                exp.start_build(_record("build"))
            elif event is E.BUILD_SUCCEEDED:
                exp.finish_build(True)
            elif event is E.BUILD_FAILED:
                exp.finish_build(False, "boom")
            elif event is E.RUN_REQUESTED:
                exp.start_run(_record("run"))
            elif event is E.RUN_SUCCEEDED:
                exp.finish_run(True, {"signal_trace": _artifact()})
            elif event is E.RUN_FAILED:
                exp.finish_run(False, {"signal_trace": _artifact()}, "boom")
            elif event is E.BUILD_PARAMS_CHANGED:
                exp.set_parameters(golden, {"compile_args": "-O0"})
            elif event is E.RUN_PARAMS_CHANGED:
                exp.set_parameters(golden, {"run_time_ms": 7})
            elif event is E.ARCHIVE_REQUESTED:
                exp.mark_archived()
        except IllegalTransitionError:
            assert bool(exp.results_index) == had_results
            continue
        # results_index becomes non-empty only through a run outcome
        if not had_results and exp.results_index:
            assert event in (E.RUN_SUCCEEDED, E.RUN_FAILED)
        if exp.results_index and exp.state is not S.ARCHIVED:
            assert exp.state in (S.COMPLETED, S.RUN_FAILED)
