"""Answering audit questions and assembling audit reports.

Boolean questions carry a three-valued verdict. ``no_data`` is decided on
the question's evidence domain, not its aggregate: if the first match
pattern of the instantiated query matches nothing at the watermark, there
was nothing to judge, and neither pass nor fail would be honest.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .catalog import Catalog, resolve_template
from .engine import AuditWorkflow, check_coverage, transition
from .errors import IllegalState, MissingParam, UnknownQuestion
from .model import canonical_json, epoch_ms_to_iso
from .query import count_matches, evaluate, parse_query_ast

VERDICTS = ("pass", "fail", "no_data")

ANSWERABLE_STATES = ("collecting", "reporting")

REPORT_FORMAT_VERSION = "1"


@dataclass(frozen=True)
class AnswerRecord:
    question_id: str
    query: dict  # fully instantiated AST document
    rows: list
    verdict: Optional[str]  # boolean questions only
    computed_at: int
    watermark: int

    def to_dict(self) -> dict:
        out = {
            "question_id": self.question_id,
            "query": self.query,
            "rows": self.rows,
            "computed_at": epoch_ms_to_iso(self.computed_at),
            "store_sequence_high_watermark": self.watermark,
        }
        if self.verdict is not None:
            out["verdict"] = self.verdict
        return out


def _selected_ids(workflow: AuditWorkflow) -> tuple[str, ...]:
    return workflow.selected.question_ids if workflow.selected else ()


def answer_question(
    workflow: AuditWorkflow,
    question_id: str,
    params: dict,
    store,
    catalog: Catalog,
    as_of: Optional[int] = None,
) -> AnswerRecord:
    """Evaluate one selected question's query against the statement store."""
    if workflow.state not in ANSWERABLE_STATES:
        raise IllegalState(
            f"questions are answerable while collecting or reporting, not {workflow.state}",
            state=workflow.state,
        )
    if question_id not in _selected_ids(workflow):
        raise UnknownQuestion(f"question {question_id!r} is not in this audit's selection")
    question = catalog.question(question_id)
    template = resolve_template(catalog, question.template_id)
    doc = template.instantiate(params)
    ast = parse_query_ast(doc)
    if as_of is None:
        as_of = store.watermark
    rows = evaluate(ast, store, as_of)
    verdict = None
    if question.answer_type == "boolean":
        if count_matches(ast.match[0], store, as_of) == 0:
            verdict = "no_data"
        elif rows and bool(rows[0].get("value")):
            verdict = "pass"
        else:
            verdict = "fail"
    return AnswerRecord(
        question_id=question_id,
        query=doc,
        rows=rows,
        verdict=verdict,
        # Anchored to the last event, not the wall clock, so regenerating at
        # the same watermark reproduces the record byte for byte.
        computed_at=workflow.last_event_at,
        watermark=as_of,
    )


def _check_params(workflow: AuditWorkflow, catalog: Catalog, params_per_question: dict) -> None:
    lacking = {}
    for qid in _selected_ids(workflow):
        question = catalog.question(qid)
        template = resolve_template(catalog, question.template_id)
        missing = set(template.params) - set(params_per_question.get(qid, {}))
        if missing:
            lacking[qid] = sorted(missing)
    if lacking:
        raise MissingParam(
            f"missing query params for question(s): {sorted(lacking)}", questions=lacking
        )


def generate_report(
    workflow: AuditWorkflow,
    store,
    catalog: Catalog,
    params_per_question: Optional[dict] = None,
    actor: str = "",
    at_ms: Optional[int] = None,
    as_of: Optional[int] = None,
    on_event=None,
) -> dict:
    """Answer every selected question and assemble the audit report.

    A collecting workflow is moved to reporting first (one state event,
    handed to ``on_event`` so callers can persist it); a workflow already
    reporting stays put, which is what makes regeneration at the same
    watermark byte-identical.
    """
    params_per_question = params_per_question or {}
    if workflow.state not in ANSWERABLE_STATES:
        raise IllegalState(
            f"reports are generated from collecting or reporting, not {workflow.state}",
            state=workflow.state,
        )
    # Fail on missing params before any state change.
    _check_params(workflow, catalog, params_per_question)
    if workflow.state == "collecting":
        if at_ms is None:
            raise IllegalState("moving collecting -> reporting needs a timestamp")
        event = transition(workflow, "reporting", actor, at_ms, catalog=catalog)
        if on_event is not None:
            on_event(event)
    if as_of is None:
        as_of = store.watermark
    answers = [
        answer_question(
            workflow, qid, params_per_question.get(qid, {}), store, catalog, as_of
        ).to_dict()
        for qid in sorted(_selected_ids(workflow))
    ]
    system = workflow.system
    return {
        "audit_id": workflow.audit_id,
        "catalog_ref": {"catalog_id": workflow.catalog_ref[0], "version": workflow.catalog_ref[1]},
        "goal": workflow.goal.value if workflow.goal else None,
        "system": {
            "system_id": system.system_id if system else None,
            "component_count": len(system.components) if system else 0,
            "kinds": sorted(k.value for k in system.kinds_present()) if system else [],
        },
        "coverage": check_coverage(workflow, catalog).to_dict(),
        "answers": answers,
        "generated_at": epoch_ms_to_iso(workflow.last_event_at),
        "store_sequence_high_watermark": as_of,
        "format_version": REPORT_FORMAT_VERSION,
    }


def render_report_text(report: dict) -> str:
    """Plain-text rendering of a report document. Deterministic."""
    lines = [
        f"Audit report: {report['audit_id']}",
        f"Catalog: {report['catalog_ref']['catalog_id']} {report['catalog_ref']['version']}",
        f"Goal: {report['goal']}",
        f"System: {report['system']['system_id']} "
        f"({report['system']['component_count']} components)",
        f"Generated: {report['generated_at']} at store sequence "
        f"{report['store_sequence_high_watermark']}",
        f"Coverage: {report['coverage']['overall_ratio']:.3f}",
        "",
    ]
    for answer in report["answers"]:
        head = f"[{answer['question_id']}]"
        if "verdict" in answer:
            head += f" verdict={answer['verdict']}"
        head += f" ({len(answer['rows'])} row(s))"
        lines.append(head)
        for row in answer["rows"]:
            lines.append("  " + canonical_json(row))
    lines.append("")
    return "\n".join(lines)
