"""Question answering, verdicts, and report assembly."""

import math

import pytest

from auditbox.catalog import default_catalog
from auditbox.engine import create_workflow, register_binding, select_questions, transition
from auditbox.errors import IllegalState, MissingParam, UnknownQuestion
from auditbox.model import AuditGoal, AuditorIdentity, Party, Relationship, canonical_json
from auditbox.reporting import answer_question, generate_report, render_report_text
from auditbox.store import IngestBatch, StatementStore

from test_engine import UC1_BINDINGS, binding, uc1_system

T0 = 1704067200000
DAY = 86400000
ACTOR = AuditorIdentity("aud-1", "Internal QA", Relationship.INTERNAL, Party.FIRST)


def draft(subject, predicate, obj, run_id, component_id, recorded_at):
    d = {
        "subject": subject,
        "predicate": predicate,
        "object": obj,
        "component_id": component_id,
        "recorded_at": recorded_at,
    }
    if run_id:
        d["run_id"] = run_id
    return d


def collecting_workflow(selected=("uc1-q1", "uc1-q2"), override=False):
    catalog = default_catalog()
    workflow, _ = create_workflow("a1", uc1_system(), AuditGoal.TRANSPARENCY, catalog, ACTOR, T0)
    select_questions(workflow, list(selected), catalog, ACTOR.id, T0 + 1000)
    for binding_id, component_id, provides in UC1_BINDINGS:
        register_binding(workflow, binding(binding_id, component_id, provides), ACTOR.id, T0 + 2000)
    transition(workflow, "collecting", ACTOR.id, T0 + 3000, catalog=catalog, override=override)
    return workflow, catalog


CONFIDENCES = [
    # (subject, value, run, day offset)
    ("entitytype:operator", 0.9, "run-0001", 0),
    ("entitytype:operator", 0.8, "run-0002", 0),
    ("entitytype:location", 0.7, "run-0002", 0),
    ("entitytype:operator", 0.6, "run-0003", 1),
]


def seeded_store(tmp_path=None):
    store = StatementStore(path=str(tmp_path / "log.jsonl") if tmp_path else None)
    drafts = [
        draft(
            subject,
            "audit:confidence",
            {"type": "decimal", "value": value},
            run,
            "svc-ml-1",
            T0 + day * DAY + i * 60000,
        )
        for i, (subject, value, run, day) in enumerate(CONFIDENCES)
    ]
    drafts += [
        draft("run:run-0001", "audit:runStatus", {"type": "string", "value": "completed"}, "run-0001", "ui-1", T0 + 1),
        draft("run:run-0002", "audit:runStatus", {"type": "string", "value": "failed"}, "run-0002", "ui-1", T0 + 2),
    ]
    store.ingest(IngestBatch("seed-1", drafts, []))
    return store


class TestAnswerQuestion:
    def test_timeseries_answer_matches_hand_average(self):
        workflow, catalog = collecting_workflow()
        store = seeded_store()
        answer = answer_question(workflow, "uc1-q1", {}, store, catalog)
        assert answer.verdict is None  # timeseries, not boolean
        rows = {
            (r["group"]["?entity"], r["group"]["bucket"]): r["value"] for r in answer.rows
        }
        day0 = "2024-01-01T00:00:00.000Z"
        day1 = "2024-01-02T00:00:00.000Z"
        assert math.isclose(rows[("entitytype:operator", day0)], (0.9 + 0.8) / 2, rel_tol=1e-12)
        assert rows[("entitytype:location", day0)] == 0.7
        assert rows[("entitytype:operator", day1)] == 0.6
        assert len(rows) == 3
        assert answer.watermark == store.watermark

    def test_boolean_pass_fail_no_data(self):
        workflow, catalog = collecting_workflow()
        store = seeded_store()
        assert answer_question(workflow, "uc1-q2", {"run": "run-0001"}, store, catalog).verdict == "pass"
        assert answer_question(workflow, "uc1-q2", {"run": "run-0002"}, store, catalog).verdict == "fail"
        # run-9999 never ran: the evidence domain is empty, not a failure
        assert answer_question(workflow, "uc1-q2", {"run": "run-9999"}, store, catalog).verdict == "no_data"

    def test_unselected_question_rejected(self):
        workflow, catalog = collecting_workflow(selected=("uc1-q1",))
        store = seeded_store()
        with pytest.raises(UnknownQuestion):
            answer_question(workflow, "uc2-q1", {"run": "run-0001"}, store, catalog)

    def test_missing_param_rejected(self):
        workflow, catalog = collecting_workflow()
        store = seeded_store()
        with pytest.raises(MissingParam):
            answer_question(workflow, "uc1-q2", {}, store, catalog)

    def test_wrong_state_rejected(self):
        catalog = default_catalog()
        workflow, _ = create_workflow("a1", uc1_system(), AuditGoal.TRANSPARENCY, catalog, ACTOR, T0)
        store = seeded_store()
        with pytest.raises(IllegalState):
            answer_question(workflow, "uc1-q1", {}, store, catalog)

    def test_as_of_snapshot(self):
        workflow, catalog = collecting_workflow()
        store = seeded_store()
        mark = store.watermark
        store.ingest(
            IngestBatch(
                "late",
                [draft("entitytype:operator", "audit:confidence", {"type": "decimal", "value": 0.1}, "run-0009", "svc-ml-1", T0)],
                [],
            )
        )
        old = answer_question(workflow, "uc1-q1", {}, store, catalog, as_of=mark)
        new = answer_question(workflow, "uc1-q1", {}, store, catalog)
        day0 = "2024-01-01T00:00:00.000Z"
        pick = lambda a: {
            (r["group"]["?entity"], r["group"]["bucket"]): r["value"] for r in a.rows
        }
        assert pick(old)[("entitytype:operator", day0)] == pytest.approx((0.9 + 0.8) / 2)
        assert pick(new)[("entitytype:operator", day0)] == pytest.approx((0.9 + 0.8 + 0.1) / 3)


class TestGenerateReport:
    def test_report_shape_and_transition(self):
        workflow, catalog = collecting_workflow()
        store = seeded_store()
        report = generate_report(
            workflow,
            store,
            catalog,
            params_per_question={"uc1-q2": {"run": "run-0001"}},
            actor=ACTOR.id,
            at_ms=T0 + 9000,
        )
        assert workflow.state == "reporting"
        assert report["audit_id"] == "a1"
        assert [a["question_id"] for a in report["answers"]] == ["uc1-q1", "uc1-q2"]
        assert report["answers"][1]["verdict"] == "pass"
        assert report["coverage"]["overall_ratio"] == 1.0
        assert report["store_sequence_high_watermark"] == store.watermark
        assert report["format_version"] == "1"
        assert report["system"]["component_count"] == 6

    def test_regeneration_is_byte_identical(self):
        workflow, catalog = collecting_workflow()
        store = seeded_store()
        params = {"uc1-q2": {"run": "run-0001"}}
        first = generate_report(workflow, store, catalog, params, ACTOR.id, at_ms=T0 + 9000)
        again = generate_report(workflow, store, catalog, params, ACTOR.id, at_ms=T0 + 99999)
        assert canonical_json(first) == canonical_json(again)

    def test_regeneration_at_old_watermark_after_new_data(self):
        workflow, catalog = collecting_workflow()
        store = seeded_store()
        params = {"uc1-q2": {"run": "run-0001"}}
        first = generate_report(workflow, store, catalog, params, ACTOR.id, at_ms=T0 + 9000)
        mark = first["store_sequence_high_watermark"]
        store.ingest(
            IngestBatch(
                "late",
                [draft("entitytype:operator", "audit:confidence", {"type": "decimal", "value": 0.1}, "run-0009", "svc-ml-1", T0)],
                [],
            )
        )
        again = generate_report(workflow, store, catalog, params, ACTOR.id, as_of=mark)
        assert canonical_json(first) == canonical_json(again)
        fresh = generate_report(workflow, store, catalog, params, ACTOR.id)
        assert canonical_json(fresh) != canonical_json(first)

    def test_missing_params_listed_for_all_questions(self):
        workflow, catalog = collecting_workflow(selected=("uc1-q2", "uc2-q1", "uc1-q1"), override=True)
        store = seeded_store()
        with pytest.raises(MissingParam) as err:
            generate_report(workflow, store, catalog, {}, ACTOR.id, at_ms=T0 + 9000)
        assert err.value.details["questions"] == {"uc1-q2": ["run"], "uc2-q1": ["run"]}
        # the failed attempt must not have moved the workflow
        assert workflow.state == "collecting"

    def test_setup_state_rejected(self):
        catalog = default_catalog()
        workflow, _ = create_workflow("a1", uc1_system(), AuditGoal.TRANSPARENCY, catalog, ACTOR, T0)
        select_questions(workflow, ["uc1-q1"], catalog, ACTOR.id, T0 + 1)
        register_binding(
            workflow,
            binding("b1", "svc-ml-1", [{"predicate": "audit:confidence", "object_type": "decimal"}]),
            ACTOR.id,
            T0 + 2,
        )
        assert workflow.state == "setup"
        with pytest.raises(IllegalState):
            generate_report(workflow, seeded_store(), catalog, {}, ACTOR.id, at_ms=T0 + 3)

    def test_loop_back_to_collecting_and_report_again(self):
        workflow, catalog = collecting_workflow(selected=("uc1-q1",))
        store = seeded_store()
        first = generate_report(workflow, store, catalog, {}, ACTOR.id, at_ms=T0 + 9000)
        transition(workflow, "collecting", ACTOR.id, T0 + 10000, catalog=catalog)
        store.ingest(
            IngestBatch(
                "late",
                [draft("entitytype:operator", "audit:confidence", {"type": "decimal", "value": 0.1}, "run-0009", "svc-ml-1", T0)],
                [],
            )
        )
        second = generate_report(workflow, store, catalog, {}, ACTOR.id, at_ms=T0 + 11000)
        assert second["store_sequence_high_watermark"] > first["store_sequence_high_watermark"]
        assert canonical_json(second) != canonical_json(first)

    def test_text_rendering_deterministic_and_complete(self):
        workflow, catalog = collecting_workflow()
        store = seeded_store()
        params = {"uc1-q2": {"run": "run-0001"}}
        report = generate_report(workflow, store, catalog, params, ACTOR.id, at_ms=T0 + 9000)
        text = render_report_text(report)
        assert text == render_report_text(report)
        assert "uc1-q1" in text and "uc1-q2" in text
        assert "verdict=pass" in text
        assert "Coverage: 1.000" in text
