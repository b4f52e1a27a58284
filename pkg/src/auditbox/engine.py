"""Audit lifecycle engine: scoping, bindings, coverage, guarded transitions.

Workflows are event-sourced. Commands validate against the current state,
emit one event, and apply it; replaying the event log from scratch must
reproduce the same state byte for byte. History never shrinks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .catalog import Catalog, require_questions
from .errors import (
    CoverageIncomplete,
    DuplicateBindingId,
    EmptySelection,
    IllegalState,
    MissingField,
    ParseError,
    UnknownComponent,
    UnknownQuestion,
)
from .model import (
    AuditGoal,
    AuditorIdentity,
    StatementPattern,
    SystemDescription,
    dedup_patterns,
    epoch_ms_to_iso,
    iso_to_epoch_ms,
    parse_goal,
    pattern_subsumes,
    system_from_dict,
    validate_system_description,
)

STATES = ("draft", "scoped", "setup", "collecting", "reporting", "closed")
STATE_ORDER = {name: i for i, name in enumerate(STATES)}
EDGES = frozenset(
    {
        ("draft", "scoped"),
        ("scoped", "setup"),
        ("setup", "collecting"),
        ("collecting", "reporting"),
        ("reporting", "closed"),
        ("reporting", "collecting"),
    }
)
SOURCE_FORMATS = ("nested_record", "delimited_table", "triple_file", "http_push")

SCORE_GOAL_WEIGHT = 0.5
SCORE_COMPONENT_WEIGHT = 0.3
SCORE_PHASE_WEIGHT = 0.2
SCORE_THRESHOLD = 0.2


@dataclass(frozen=True)
class AuditDataModel:
    question_ids: tuple[str, ...]
    required_patterns: tuple[StatementPattern, ...]
    derived_at: int

    def to_dict(self) -> dict:
        return {
            "question_ids": list(self.question_ids),
            "required_patterns": [p.to_dict() for p in self.required_patterns],
            "derived_at": epoch_ms_to_iso(self.derived_at),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "AuditDataModel":
        return cls(
            question_ids=tuple(obj["question_ids"]),
            required_patterns=tuple(
                StatementPattern.from_dict(p) for p in obj["required_patterns"]
            ),
            derived_at=iso_to_epoch_ms(obj["derived_at"]),
        )


@dataclass(frozen=True)
class CollectorBinding:
    binding_id: str
    component_id: str
    source_format: str
    mapping_ref: Optional[str]
    provides_patterns: tuple[StatementPattern, ...]

    def to_dict(self) -> dict:
        out = {
            "binding_id": self.binding_id,
            "component_id": self.component_id,
            "source_format": self.source_format,
            "provides_patterns": [p.to_dict() for p in self.provides_patterns],
        }
        if self.mapping_ref is not None:
            out["mapping_ref"] = self.mapping_ref
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "CollectorBinding":
        if not isinstance(obj, dict):
            raise ParseError("binding must be an object")
        unknown = set(obj) - {
            "binding_id",
            "component_id",
            "source_format",
            "mapping_ref",
            "provides_patterns",
        }
        if unknown:
            raise ParseError(f"unknown binding field(s): {sorted(unknown)}")
        for name in ("binding_id", "component_id", "source_format", "provides_patterns"):
            if name not in obj:
                raise MissingField(f"binding missing field {name!r}")
        if obj["source_format"] not in SOURCE_FORMATS:
            raise ParseError(f"unknown source_format {obj['source_format']!r}")
        patterns = tuple(StatementPattern.from_dict(p) for p in obj["provides_patterns"])
        if not patterns:
            raise MissingField("binding provides_patterns must be non-empty")
        mapping_ref = obj.get("mapping_ref")
        if mapping_ref is None and obj["source_format"] != "http_push":
            raise MissingField(
                f"binding with source_format {obj['source_format']!r} needs a mapping_ref"
            )
        return cls(
            binding_id=str(obj["binding_id"]),
            component_id=str(obj["component_id"]),
            source_format=obj["source_format"],
            mapping_ref=mapping_ref,
            provides_patterns=patterns,
        )


@dataclass(frozen=True)
class Recommendation:
    question_id: str
    question: dict
    score: float
    reasons: tuple[str, ...]
    related_risks: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "question": self.question,
            "score": self.score,
            "reasons": list(self.reasons),
            "related_risks": list(self.related_risks),
        }


@dataclass(frozen=True)
class CoverageReport:
    per_question: dict
    overall_ratio: float

    def to_dict(self) -> dict:
        return {"per_question": self.per_question, "overall_ratio": self.overall_ratio}


@dataclass(frozen=True)
class HistoryEntry:
    state: str
    timestamp: int
    actor: str

    def to_dict(self) -> dict:
        return {"state": self.state, "timestamp": epoch_ms_to_iso(self.timestamp), "actor": self.actor}


class AuditWorkflow:
    """Mutable projection of one audit's event log."""

    def __init__(self):
        self.audit_id: str = ""
        self.system: Optional[SystemDescription] = None
        self.goal: Optional[AuditGoal] = None
        self.catalog_ref: tuple[str, str] = ("", "")
        self.state: str = "draft"
        self.selected: Optional[AuditDataModel] = None
        self.bindings: list[CollectorBinding] = []
        self.created_by: Optional[AuditorIdentity] = None
        self.history: list[HistoryEntry] = []
        self.applied: int = 0  # events applied; the next event gets seq applied+1

    @property
    def last_event_at(self) -> int:
        return self.history[-1].timestamp if self.history else 0

    def binding_ids(self) -> set[str]:
        return {b.binding_id for b in self.bindings}

    def to_dict(self) -> dict:
        out = {
            "audit_id": self.audit_id,
            "system": self.system.to_dict() if self.system else None,
            "goal": self.goal.value if self.goal else None,
            "catalog_ref": {"catalog_id": self.catalog_ref[0], "version": self.catalog_ref[1]},
            "state": self.state,
            "bindings": [b.to_dict() for b in self.bindings],
            "created_by": self.created_by.to_dict() if self.created_by else None,
            "history": [h.to_dict() for h in self.history],
        }
        if self.selected is not None:
            out["selected"] = self.selected.to_dict()
        return out

    # -- event application -------------------------------------------------

    def apply(self, event: dict) -> None:
        expected = self.applied + 1
        if event["seq"] != expected:
            raise ParseError(f"event seq {event['seq']} does not follow {self.applied}")
        etype = event["event_type"]
        payload = event["payload"]
        ts = iso_to_epoch_ms(event["timestamp"])
        actor = event["actor"]
        if etype == "created":
            self.audit_id = event["audit_id"]
            self.system = system_from_dict(payload["system"])
            self.goal = parse_goal(payload["goal"])
            ref = payload["catalog_ref"]
            self.catalog_ref = (ref["catalog_id"], ref["version"])
            self.created_by = AuditorIdentity.from_dict(payload["created_by"])
            self.state = "draft"
            self.history.append(HistoryEntry("draft", ts, actor))
        elif etype == "questions_selected":
            self.selected = AuditDataModel.from_dict(payload["data_model"])
            self.state = "scoped"
            self.history.append(HistoryEntry("scoped", ts, actor))
        elif etype == "binding_registered":
            self.bindings.append(CollectorBinding.from_dict(payload["binding"]))
            if self.state == "scoped":
                self.state = "setup"
                self.history.append(HistoryEntry("setup", ts, actor))
        elif etype == "state_changed":
            self.state = payload["target"]
            self.history.append(HistoryEntry(self.state, ts, actor))
        else:
            raise ParseError(f"unknown event type {etype!r}")
        self.applied = expected

    def _emit(self, event_type: str, payload: dict, actor: str, at_ms: int) -> dict:
        event = {
            "audit_id": self.audit_id,
            "seq": self.applied + 1,
            "event_type": event_type,
            "payload": payload,
            "timestamp": epoch_ms_to_iso(at_ms),
            "actor": actor,
        }
        self.apply(event)
        return event


def replay(events: list[dict]) -> AuditWorkflow:
    """Rebuild a workflow from its event log."""
    workflow = AuditWorkflow()
    if events:
        workflow.audit_id = events[0]["audit_id"]
    for event in events:
        workflow.apply(event)
    return workflow


# -- commands ----------------------------------------------------------------


def create_workflow(
    audit_id: str,
    system: SystemDescription,
    goal: AuditGoal,
    catalog: Catalog,
    actor: AuditorIdentity,
    at_ms: int,
) -> tuple[AuditWorkflow, dict]:
    violations = validate_system_description(system)
    if violations:
        raise ParseError(
            "system description is invalid: "
            + "; ".join(f"{v.field}: {v.rule}" for v in violations),
            violations=[v.to_dict() for v in violations],
        )
    workflow = AuditWorkflow()
    workflow.audit_id = audit_id
    event = workflow._emit(
        "created",
        {
            "system": system.to_dict(),
            "goal": goal.value,
            "catalog_ref": {"catalog_id": catalog.ref[0], "version": catalog.ref[1]},
            "created_by": actor.to_dict(),
        },
        actor.id,
        at_ms,
    )
    return workflow, event


def recommend_questions(
    system: SystemDescription, goal: AuditGoal, catalog: Catalog
) -> list[Recommendation]:
    """Score every catalog question against the system and goal.

    score = 0.5*goal_match + 0.3*component_match + 0.2*phase_overlap, kept
    when score >= 0.2, ordered by score descending then question_id.
    """
    require_questions(catalog)
    kinds = {k.value for k in system.kinds_present()}
    out = []
    for q in catalog.questions:
        g = 1.0 if goal in q.goals else 0.0
        if q.target == "whole_system":
            c = 1.0
        else:
            c = 1.0 if q.target in kinds else 0.0
        if q.phases:
            overlap = len(q.phases & system.phases_in_scope)
            p = overlap / len(q.phases)
        else:
            p = 1.0  # no phase restriction: vacuously full overlap
        score = (
            SCORE_GOAL_WEIGHT * g + SCORE_COMPONENT_WEIGHT * c + SCORE_PHASE_WEIGHT * p
        )
        if score < SCORE_THRESHOLD:
            continue
        reasons = []
        if g:
            reasons.append(f"goal {goal.value} is among the question's goals")
        if c:
            if q.target == "whole_system":
                reasons.append("question targets the whole system")
            else:
                reasons.append(f"system has a component of kind {q.target}")
        if p:
            if q.phases:
                reasons.append(
                    f"phase overlap {len(q.phases & system.phases_in_scope)}/{len(q.phases)}"
                )
            else:
                reasons.append("question is not phase-restricted")
        related = sorted(
            r.risk_id for r in catalog.risks if q.question_id in r.mitigating_question_ids
        )
        out.append(
            Recommendation(
                question_id=q.question_id,
                question=q.to_dict(),
                score=score,
                reasons=tuple(reasons),
                related_risks=tuple(related),
            )
        )
    out.sort(key=lambda r: (-r.score, r.question_id))
    return out


def build_data_model(catalog: Catalog, question_ids: list, at_ms: int) -> AuditDataModel:
    if not question_ids:
        raise EmptySelection("no questions selected")
    known = {q.question_id for q in catalog.questions}
    deduped = []
    for qid in question_ids:
        if qid not in known:
            raise UnknownQuestion(f"unknown question {qid!r}")
        if qid not in deduped:
            deduped.append(qid)
    patterns = []
    for qid in deduped:
        patterns.extend(catalog.question(qid).required_patterns)
    return AuditDataModel(
        question_ids=tuple(deduped),
        required_patterns=tuple(dedup_patterns(patterns)),
        derived_at=at_ms,
    )


def select_questions(
    workflow: AuditWorkflow, question_ids: list, catalog: Catalog, actor: str, at_ms: int
) -> dict:
    if workflow.state != "draft":
        raise IllegalState(
            f"questions can only be selected in draft, workflow is {workflow.state}",
            state=workflow.state,
        )
    model = build_data_model(catalog, question_ids, at_ms)
    return workflow._emit("questions_selected", {"data_model": model.to_dict()}, actor, at_ms)


def register_binding(
    workflow: AuditWorkflow, binding: CollectorBinding, actor: str, at_ms: int
) -> dict:
    if workflow.state not in ("scoped", "setup"):
        raise IllegalState(
            f"bindings can only be registered in scoped or setup, workflow is {workflow.state}",
            state=workflow.state,
        )
    if workflow.system is None or binding.component_id not in workflow.system.component_ids():
        raise UnknownComponent(f"unknown component {binding.component_id!r}")
    if binding.binding_id in workflow.binding_ids():
        raise DuplicateBindingId(f"binding id {binding.binding_id!r} already registered")
    return workflow._emit("binding_registered", {"binding": binding.to_dict()}, actor, at_ms)


def check_coverage(workflow: AuditWorkflow, catalog: Catalog) -> CoverageReport:
    if STATE_ORDER[workflow.state] < STATE_ORDER["scoped"]:
        raise IllegalState(
            f"coverage requires a scoped workflow, got {workflow.state}", state=workflow.state
        )
    provided = [p for b in workflow.bindings for p in b.provides_patterns]
    per_question = {}
    covered_count = 0
    question_ids = workflow.selected.question_ids if workflow.selected else ()
    for qid in question_ids:
        question = catalog.question(qid)
        missing = [
            req.to_dict()
            for req in question.required_patterns
            if not any(pattern_subsumes(prov, req) for prov in provided)
        ]
        covered = not missing
        covered_count += covered
        per_question[qid] = {"covered": covered, "missing_patterns": missing}
    total = len(question_ids)
    ratio = 1.0 if total == 0 else covered_count / total
    return CoverageReport(per_question=per_question, overall_ratio=ratio)


def transition(
    workflow: AuditWorkflow,
    target: str,
    actor: str,
    at_ms: int,
    catalog: Optional[Catalog] = None,
    override: bool = False,
    selection: Optional[list] = None,
) -> dict:
    """Move along one edge of the state graph; emits one event.

    draft->scoped needs a question selection (it is the select operation);
    setup->collecting is gated on full coverage unless override is set, and
    the override is recorded in the event payload.
    """
    if target not in STATES:
        raise IllegalState(f"unknown state {target!r}", target=target)
    edge = (workflow.state, target)
    if edge not in EDGES:
        raise IllegalState(
            f"no transition {workflow.state} -> {target}", state=workflow.state, target=target
        )
    if edge == ("draft", "scoped"):
        if selection is None:
            raise IllegalState("draft -> scoped requires a question selection")
        if catalog is None:
            raise IllegalState("draft -> scoped requires the catalog to resolve questions")
        return select_questions(workflow, selection, catalog, actor, at_ms)
    if edge == ("setup", "collecting") and not override:
        if catalog is None:
            raise IllegalState("setup -> collecting requires the catalog to check coverage")
        report = check_coverage(workflow, catalog)
        if report.overall_ratio < 1.0:
            raise CoverageIncomplete(
                f"coverage is {report.overall_ratio:.3f}, not 1.0; pass override to proceed",
                overall_ratio=report.overall_ratio,
            )
    payload = {"target": target}
    if edge == ("setup", "collecting") and override:
        payload["override"] = True
    return workflow._emit("state_changed", payload, actor, at_ms)
