"""Versioned, immutable catalogs of audit questions, risks, standards, and tools.

A catalog is a single JSON document loaded as a whole; updating knowledge
means loading a new version, so every audit stays reproducible against the
catalog version recorded in its workflow.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .errors import (
    AuditboxError,
    DanglingReference,
    DuplicateId,
    EmptyCatalog,
    MissingField,
    ParseError,
)
from .model import (
    AuditGoal,
    ComponentKind,
    LifecyclePhase,
    StatementPattern,
    parse_goal,
    parse_phase,
    validate_predicate,
)
from .query import collect_params, instantiate, parse_query_ast

ANSWER_TYPES = ("boolean", "scalar", "set", "timeseries")
WHOLE_SYSTEM = "whole_system"


@dataclass(frozen=True)
class AuditQuestion:
    question_id: str
    text: str
    goals: frozenset[AuditGoal]
    target: str  # whole_system or a component kind
    phases: frozenset[LifecyclePhase]
    required_patterns: tuple[StatementPattern, ...]
    template_id: str
    answer_type: str

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "text": self.text,
            "goals": sorted(g.value for g in self.goals),
            "target": self.target,
            "phases": sorted(p.value for p in self.phases),
            "required_patterns": [p.to_dict() for p in self.required_patterns],
            "template_id": self.template_id,
            "answer_type": self.answer_type,
        }


@dataclass(frozen=True)
class RiskEntry:
    risk_id: str
    description: str
    goals: frozenset[AuditGoal]
    mitigating_question_ids: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "risk_id": self.risk_id,
            "description": self.description,
            "goals": sorted(g.value for g in self.goals),
            "mitigating_question_ids": list(self.mitigating_question_ids),
        }


@dataclass(frozen=True)
class DocumentationStandardEntry:
    standard_id: str
    name: str
    artefact_kind: str  # static or dynamic
    field_predicates: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "standard_id": self.standard_id,
            "name": self.name,
            "artefact_kind": self.artefact_kind,
            "field_predicates": list(self.field_predicates),
        }


@dataclass(frozen=True)
class ToolMetricEntry:
    entry_id: str
    name: str
    category: str  # collector, metric, or analyzer
    applicable_goals: frozenset[AuditGoal]

    def to_dict(self) -> dict:
        return {
            "entry_id": self.entry_id,
            "name": self.name,
            "category": self.category,
            "applicable_goals": sorted(g.value for g in self.applicable_goals),
        }


@dataclass(frozen=True)
class QueryTemplate:
    template_id: str
    ast: dict  # AST document with {param} placeholders
    answer_type: str
    params: tuple[str, ...]

    def instantiate(self, params: dict) -> dict:
        return instantiate(self.ast, params)

    def to_dict(self) -> dict:
        return {
            "template_id": self.template_id,
            "ast": self.ast,
            "answer_type": self.answer_type,
            "params": list(self.params),
        }


@dataclass(frozen=True)
class Catalog:
    catalog_id: str
    version: str
    questions: tuple[AuditQuestion, ...]
    risks: tuple[RiskEntry, ...]
    standards: tuple[DocumentationStandardEntry, ...]
    tools: tuple[ToolMetricEntry, ...]
    templates: tuple[QueryTemplate, ...]

    @property
    def ref(self) -> tuple[str, str]:
        return (self.catalog_id, self.version)

    def question(self, question_id: str) -> AuditQuestion:
        for q in self.questions:
            if q.question_id == question_id:
                return q
        raise DanglingReference(f"unknown question {question_id!r}")

    def to_dict(self) -> dict:
        return {
            "catalog_id": self.catalog_id,
            "version": self.version,
            "questions": [q.to_dict() for q in self.questions],
            "risks": [r.to_dict() for r in self.risks],
            "standards": [s.to_dict() for s in self.standards],
            "tools": [t.to_dict() for t in self.tools],
            "templates": [t.to_dict() for t in self.templates],
        }


_TOP_KEYS = {"catalog_id", "version", "questions", "risks", "standards", "tools", "templates"}
_TARGETS = frozenset({WHOLE_SYSTEM} | {k.value for k in ComponentKind})


def _require(obj: dict, key: str, where: str):
    if key not in obj:
        raise MissingField(f"{where} missing field {key!r}")
    return obj[key]


def _check_unique(ids: list, kind: str) -> None:
    seen = set()
    for i in ids:
        if i in seen:
            raise DuplicateId(f"duplicate {kind} id {i!r}")
        seen.add(i)


def _parse_question(obj: dict) -> AuditQuestion:
    qid = _require(obj, "question_id", "question")
    where = f"question {qid!r}"
    goals = frozenset(parse_goal(g) for g in _require(obj, "goals", where))
    if not goals:
        raise ParseError(f"{where} has no goals")
    target = _require(obj, "target", where)
    if target not in _TARGETS:
        raise ParseError(f"{where} has unknown target {target!r}")
    patterns = tuple(
        StatementPattern.from_dict(p) for p in _require(obj, "required_patterns", where)
    )
    if not patterns:
        raise ParseError(f"{where} has no required_patterns")
    for p in patterns:
        if p.predicate is None:
            raise ParseError(f"{where} required pattern must constrain a predicate")
    answer_type = _require(obj, "answer_type", where)
    if answer_type not in ANSWER_TYPES:
        raise ParseError(f"{where} has unknown answer_type {answer_type!r}")
    return AuditQuestion(
        question_id=qid,
        text=str(_require(obj, "text", where)),
        goals=goals,
        target=target,
        phases=frozenset(parse_phase(p) for p in _require(obj, "phases", where)),
        required_patterns=patterns,
        template_id=str(_require(obj, "template_id", where)),
        answer_type=answer_type,
    )


def _parse_template(obj: dict) -> QueryTemplate:
    tid = _require(obj, "template_id", "template")
    where = f"template {tid!r}"
    ast = _require(obj, "ast", where)
    answer_type = _require(obj, "answer_type", where)
    if answer_type not in ANSWER_TYPES:
        raise ParseError(f"{where} has unknown answer_type {answer_type!r}")
    used = collect_params(ast)
    declared = obj.get("params")
    if declared is not None:
        if set(declared) != used:
            raise ParseError(
                f"{where} declares params {sorted(declared)} but uses {sorted(used)}"
            )
        params = tuple(declared)
    else:
        params = tuple(sorted(used))
    # a template must yield a valid query once every placeholder is filled
    try:
        parse_query_ast(instantiate(ast, {name: f"probe-{name}" for name in params}))
    except AuditboxError as exc:
        raise ParseError(f"{where} does not instantiate to a valid query: {exc}") from None
    return QueryTemplate(template_id=tid, ast=ast, answer_type=answer_type, params=params)


def load_catalog(document) -> Catalog:
    """Parse and validate a catalog JSON document (bytes or str)."""
    if isinstance(document, bytes):
        document = document.decode("utf-8")
    try:
        doc = json.loads(document)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"catalog document is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("catalog document must be a JSON object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ParseError(f"unknown catalog field(s): {sorted(unknown)}")
    missing = _TOP_KEYS - set(doc)
    if missing:
        raise MissingField(f"catalog missing field(s): {sorted(missing)}")

    questions = tuple(_parse_question(q) for q in doc["questions"])
    templates = tuple(_parse_template(t) for t in doc["templates"])
    risks = []
    for r in doc["risks"]:
        rid = _require(r, "risk_id", "risk")
        risks.append(
            RiskEntry(
                risk_id=rid,
                description=str(r.get("description", "")),
                goals=frozenset(parse_goal(g) for g in _require(r, "goals", f"risk {rid!r}")),
                mitigating_question_ids=tuple(
                    _require(r, "mitigating_question_ids", f"risk {rid!r}")
                ),
            )
        )
    standards = []
    for s in doc["standards"]:
        sid = _require(s, "standard_id", "standard")
        kind = _require(s, "artefact_kind", f"standard {sid!r}")
        if kind not in ("static", "dynamic"):
            raise ParseError(f"standard {sid!r} has unknown artefact_kind {kind!r}")
        predicates = tuple(_require(s, "field_predicates", f"standard {sid!r}"))
        if not predicates:
            raise ParseError(f"standard {sid!r} has no field_predicates")
        for p in predicates:
            validate_predicate(p)
        standards.append(
            DocumentationStandardEntry(
                standard_id=sid,
                name=str(_require(s, "name", f"standard {sid!r}")),
                artefact_kind=kind,
                field_predicates=predicates,
            )
        )
    tools = []
    for t in doc["tools"]:
        eid = _require(t, "entry_id", "tool")
        category = _require(t, "category", f"tool {eid!r}")
        if category not in ("collector", "metric", "analyzer"):
            raise ParseError(f"tool {eid!r} has unknown category {category!r}")
        tools.append(
            ToolMetricEntry(
                entry_id=eid,
                name=str(_require(t, "name", f"tool {eid!r}")),
                category=category,
                applicable_goals=frozenset(
                    parse_goal(g) for g in _require(t, "applicable_goals", f"tool {eid!r}")
                ),
            )
        )

    _check_unique([q.question_id for q in questions], "question")
    _check_unique([r.risk_id for r in risks], "risk")
    _check_unique([s.standard_id for s in standards], "standard")
    _check_unique([t.entry_id for t in tools], "tool")
    _check_unique([t.template_id for t in templates], "template")

    template_ids = {t.template_id for t in templates}
    question_ids = {q.question_id for q in questions}
    for q in questions:
        if q.template_id not in template_ids:
            raise DanglingReference(
                f"question {q.question_id!r} references unknown template {q.template_id!r}"
            )
    for r in risks:
        for qid in r.mitigating_question_ids:
            if qid not in question_ids:
                raise DanglingReference(
                    f"risk {r.risk_id!r} references unknown question {qid!r}"
                )

    return Catalog(
        catalog_id=str(doc["catalog_id"]),
        version=str(doc["version"]),
        questions=questions,
        risks=tuple(risks),
        standards=tuple(standards),
        tools=tuple(tools),
        templates=templates,
    )


def serialize_catalog(catalog: Catalog) -> bytes:
    """Stable serialization: lexicographic key order, two-space indent."""
    return (json.dumps(catalog.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n").encode(
        "utf-8"
    )


def find_questions(
    catalog: Catalog,
    goals: Optional[set] = None,
    target_kinds: Optional[set] = None,
    phases: Optional[set] = None,
) -> list[AuditQuestion]:
    """Questions matching every provided dimension, sorted by question_id."""
    goals = {AuditGoal(g) for g in goals} if goals else None
    phases = {LifecyclePhase(p) for p in phases} if phases else None
    target_kinds = {str(k) for k in target_kinds} if target_kinds else None
    out = []
    for q in catalog.questions:
        if goals is not None and not (q.goals & goals):
            continue
        if target_kinds is not None and q.target != WHOLE_SYSTEM and q.target not in target_kinds:
            continue
        if phases is not None and not (q.phases & phases):
            continue
        out.append(q)
    return sorted(out, key=lambda q: q.question_id)


def resolve_template(catalog: Catalog, template_id: str) -> QueryTemplate:
    for t in catalog.templates:
        if t.template_id == template_id:
            return t
    raise DanglingReference(f"unknown template {template_id!r}")


def lint_catalog(catalog: Catalog) -> list[str]:
    """Warnings for question predicates that no standard declares and that are
    not explicitly marked ad-hoc. Heuristic completeness check, never an error."""
    declared: set[str] = set()
    for s in catalog.standards:
        declared.update(s.field_predicates)
    warnings = []
    for q in catalog.questions:
        for p in q.required_patterns:
            if p.ad_hoc or p.predicate in declared:
                continue
            warnings.append(
                f"question {q.question_id}: predicate {p.predicate} is not declared by any "
                f"standard and not marked ad_hoc"
            )
    if not catalog.questions:
        warnings.append("catalog has no questions")
    return warnings


def require_questions(catalog: Catalog) -> None:
    if not catalog.questions:
        raise EmptyCatalog(f"catalog {catalog.catalog_id} has no questions")


def default_catalog() -> Catalog:
    """The bundled catalog shipped with the package."""
    data = resources.files("auditbox.data").joinpath("default_catalog.json").read_bytes()
    return load_catalog(data)
