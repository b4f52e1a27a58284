"""Core domain vocabulary: statements, object values, system descriptions, patterns.

All types here are immutable values; operations are pure functions. Timestamps
are UTC epoch milliseconds internally and ISO-8601 (millisecond precision,
``Z`` suffix) at every external interface.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Any, Iterable, Optional, Union

from .errors import (
    InvalidObjectType,
    InvalidPredicate,
    MissingField,
    ParseError,
)

# ---------------------------------------------------------------------------
# serialization helpers
# ---------------------------------------------------------------------------


def canonical_json(obj: Any) -> str:
    """Serialize with lexicographic key order and compact separators."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


_ISO_MS = "%Y-%m-%dT%H:%M:%S"


def epoch_ms_to_iso(ms: int) -> str:
    secs, frac = divmod(int(ms), 1000)
    dt = datetime.fromtimestamp(secs, tz=timezone.utc)
    return f"{dt.strftime(_ISO_MS)}.{frac:03d}Z"


def iso_to_epoch_ms(text: str) -> int:
    """Parse an ISO-8601 timestamp to epoch ms; sub-ms digits are truncated."""
    if not isinstance(text, str) or not text:
        raise ParseError(f"invalid timestamp: {text!r}")
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(raw)
    except ValueError as exc:
        raise ParseError(f"invalid timestamp: {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    # integer math below the second to avoid float rounding at ms precision
    whole = int(dt.replace(microsecond=0).timestamp())
    return whole * 1000 + dt.microsecond // 1000


def now_ms() -> int:
    import time

    return time.time_ns() // 1_000_000


# ---------------------------------------------------------------------------
# enums
# ---------------------------------------------------------------------------


class AuditGoal(str, Enum):
    TRANSPARENCY = "transparency"
    ACCOUNTABILITY = "accountability"
    FAIRNESS = "fairness"
    ROBUSTNESS = "robustness"
    COMPLIANCE = "compliance"
    PRIVACY = "privacy"


class LifecyclePhase(str, Enum):
    DESIGN = "design"
    DEVELOPMENT = "development"
    TRAINING = "training"
    EXPLOITATION = "exploitation"
    DECOMMISSIONING = "decommissioning"

    @property
    def order(self) -> int:
        return _PHASE_ORDER[self.value]


_PHASE_ORDER = {
    "design": 0,
    "development": 1,
    "training": 2,
    "exploitation": 3,
    "decommissioning": 4,
}


class ComponentKind(str, Enum):
    UI = "ui"
    ML_MODEL = "ml_model"
    NON_ML_SERVICE = "non_ml_service"
    ONTOLOGY = "ontology"
    CONSENT_CHECK = "consent_check"
    DATA_STORE = "data_store"
    TRANSFORM = "transform"


class ArtefactKind(str, Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


class Relationship(str, Enum):
    INTERNAL = "internal"
    EXTERNAL = "external"


class Party(str, Enum):
    FIRST = "first"
    SECOND = "second"
    THIRD = "third"


def _parse_enum(cls, value, what: str):
    try:
        return cls(value)
    except ValueError:
        raise ParseError(f"unknown {what}: {value!r}") from None


def parse_goal(value: str) -> AuditGoal:
    return _parse_enum(AuditGoal, value, "audit goal")


def parse_phase(value: str) -> LifecyclePhase:
    return _parse_enum(LifecyclePhase, value, "lifecycle phase")


# ---------------------------------------------------------------------------
# object values (closed tagged union of 6 types)
# ---------------------------------------------------------------------------

OBJECT_TYPES = ("string", "integer", "decimal", "boolean", "timestamp", "entity_ref")
STRINGISH_TYPES = frozenset({"string", "entity_ref"})
NUMERIC_TYPES = frozenset({"integer", "decimal"})


@dataclass(frozen=True)
class ObjectValue:
    """Typed object slot of a statement.

    ``value`` holds str for string/entity_ref, int for integer and timestamp
    (epoch ms), float for decimal, bool for boolean.
    """

    type: str
    value: Union[str, int, float, bool]

    def lexical(self) -> str:
        """Canonical lexical form, used in hashing and triple lines."""
        if self.type == "boolean":
            return "true" if self.value else "false"
        if self.type == "integer":
            return str(self.value)
        if self.type == "decimal":
            return repr(float(self.value))
        if self.type == "timestamp":
            return epoch_ms_to_iso(int(self.value))
        return str(self.value)

    def json_value(self):
        if self.type == "timestamp":
            return epoch_ms_to_iso(int(self.value))
        return self.value

    def to_dict(self) -> dict:
        return {"type": self.type, "value": self.json_value()}

    @classmethod
    def from_dict(cls, obj: dict) -> "ObjectValue":
        if not isinstance(obj, dict) or set(obj) != {"type", "value"}:
            raise InvalidObjectType(f"object must be {{type, value}}, got {obj!r}")
        return cls.parse(obj["type"], obj["value"])

    @classmethod
    def parse(cls, type_tag: str, value) -> "ObjectValue":
        """Validate ``value`` against ``type_tag`` and normalize it."""
        if type_tag not in OBJECT_TYPES:
            raise InvalidObjectType(f"unknown object type {type_tag!r}")
        if type_tag in STRINGISH_TYPES:
            if not isinstance(value, str):
                raise InvalidObjectType(f"{type_tag} value must be a string")
            return cls(type_tag, value)
        if type_tag == "boolean":
            if not isinstance(value, bool):
                raise InvalidObjectType("boolean value must be true/false")
            return cls(type_tag, value)
        if type_tag == "integer":
            if isinstance(value, bool) or not isinstance(value, int):
                raise InvalidObjectType(f"integer value unparsable: {value!r}")
            return cls(type_tag, value)
        if type_tag == "decimal":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise InvalidObjectType(f"decimal value unparsable: {value!r}")
            return cls(type_tag, float(value))
        # timestamp: ISO string or epoch ms int
        if isinstance(value, str):
            try:
                return cls(type_tag, iso_to_epoch_ms(value))
            except ParseError as exc:
                raise InvalidObjectType(str(exc)) from None
        if isinstance(value, bool) or not isinstance(value, int):
            raise InvalidObjectType(f"timestamp value unparsable: {value!r}")
        return cls(type_tag, value)

    @classmethod
    def from_lexical(cls, type_tag: str, lexical: str) -> "ObjectValue":
        """Coerce a lexical (string) form into the declared type."""
        if type_tag not in OBJECT_TYPES:
            raise InvalidObjectType(f"unknown object type {type_tag!r}")
        if type_tag in STRINGISH_TYPES:
            return cls(type_tag, lexical)
        if type_tag == "boolean":
            if lexical == "true":
                return cls(type_tag, True)
            if lexical == "false":
                return cls(type_tag, False)
            raise InvalidObjectType(f"boolean lexical unparsable: {lexical!r}")
        if type_tag == "integer":
            if _INT_RE.match(lexical):
                return cls(type_tag, int(lexical))
            raise InvalidObjectType(f"integer lexical unparsable: {lexical!r}")
        if type_tag == "decimal":
            if _DECIMAL_RE.match(lexical) or _INT_RE.match(lexical):
                return cls(type_tag, float(lexical))
            raise InvalidObjectType(f"decimal lexical unparsable: {lexical!r}")
        try:
            return cls(type_tag, iso_to_epoch_ms(lexical))
        except ParseError:
            raise InvalidObjectType(f"timestamp lexical unparsable: {lexical!r}") from None


_INT_RE = re.compile(r"^[+-]?\d+$")
_DECIMAL_RE = re.compile(r"^[+-]?(\d+\.\d*|\.\d+|\d+)([eE][+-]?\d+)?$")


def sniff_object(lexical: str) -> ObjectValue:
    """Type a bare lexical form: boolean, integer, decimal, timestamp, string."""
    if lexical in ("true", "false"):
        return ObjectValue("boolean", lexical == "true")
    if _INT_RE.match(lexical):
        return ObjectValue("integer", int(lexical))
    if _DECIMAL_RE.match(lexical):
        return ObjectValue("decimal", float(lexical))
    try:
        return ObjectValue("timestamp", iso_to_epoch_ms(lexical))
    except ParseError:
        return ObjectValue("string", lexical)


# ---------------------------------------------------------------------------
# predicates
# ---------------------------------------------------------------------------


def validate_predicate(term: str) -> str:
    """Predicates are opaque ``namespace:local`` terms with exactly one colon."""
    if not isinstance(term, str) or not term:
        raise InvalidPredicate(f"predicate must be a non-empty term, got {term!r}")
    parts = term.split(":")
    if len(parts) != 2 or not parts[0] or not parts[1]:
        raise InvalidPredicate(f"predicate must be namespace:local, got {term!r}")
    return term


# ---------------------------------------------------------------------------
# statements
# ---------------------------------------------------------------------------

_HASH_SEP = "\x1f"


@dataclass(frozen=True)
class ArtefactStatement:
    """Canonical unit of auditable evidence with provenance."""

    statement_id: str
    subject: str
    predicate: str
    object: ObjectValue
    run_id: Optional[str]
    component_id: str
    recorded_at: int  # epoch ms UTC

    @property
    def artefact_kind(self) -> ArtefactKind:
        return ArtefactKind.DYNAMIC if self.run_id is not None else ArtefactKind.STATIC

    def to_dict(self) -> dict:
        out = {
            "id": self.statement_id,
            "subject": self.subject,
            "predicate": self.predicate,
            "object": self.object.to_dict(),
            "component_id": self.component_id,
            "recorded_at": epoch_ms_to_iso(self.recorded_at),
            "kind": self.artefact_kind.value,
        }
        if self.run_id is not None:
            out["run_id"] = self.run_id
        return out


_DRAFT_FIELDS = {"subject", "predicate", "object", "run_id", "component_id", "recorded_at"}


def parse_draft(raw: dict) -> dict:
    """Validate a statement draft (external dict form) into normalized fields.

    Empty-string run_id is normalized to absent here, so downstream code only
    ever sees present-or-None.
    """
    if not isinstance(raw, dict):
        raise ParseError(f"statement draft must be an object, got {type(raw).__name__}")
    unknown = set(raw) - _DRAFT_FIELDS
    if unknown:
        raise ParseError(f"unknown statement field(s): {sorted(unknown)}")
    for name in ("subject", "predicate", "object", "component_id", "recorded_at"):
        if name not in raw:
            raise MissingField(f"statement draft missing field {name!r}")
    subject = raw["subject"]
    if not isinstance(subject, str) or not subject:
        raise MissingField("subject must be a non-empty string")
    predicate = validate_predicate(raw["predicate"])
    obj = raw["object"]
    value = obj if isinstance(obj, ObjectValue) else ObjectValue.from_dict(obj)
    component_id = raw["component_id"]
    if not isinstance(component_id, str) or not component_id:
        raise MissingField("component_id must be a non-empty string")
    run_id = raw.get("run_id")
    if run_id is not None and not isinstance(run_id, str):
        raise ParseError(f"run_id must be a string, got {run_id!r}")
    if run_id == "":
        run_id = None
    recorded_at = raw["recorded_at"]
    if isinstance(recorded_at, str):
        recorded_at = iso_to_epoch_ms(recorded_at)
    elif isinstance(recorded_at, bool) or not isinstance(recorded_at, int):
        raise ParseError(f"recorded_at must be ISO-8601 or epoch ms, got {recorded_at!r}")
    return {
        "subject": subject,
        "predicate": predicate,
        "object": value,
        "run_id": run_id,
        "component_id": component_id,
        "recorded_at": recorded_at,
    }


def canonicalize_statement(raw: dict) -> ArtefactStatement:
    """Assign the content hash id over the canonical byte serialization.

    Hash input: (subject, predicate, object type tag, object lexical form,
    run_id or empty, component_id, recorded_at as epoch ms) joined by 0x1F,
    SHA-256 hex digest. Equal inputs yield equal ids.
    """
    d = raw if _is_parsed_draft(raw) else parse_draft(raw)
    obj: ObjectValue = d["object"]
    payload = _HASH_SEP.join(
        (
            d["subject"],
            d["predicate"],
            obj.type,
            obj.lexical(),
            d["run_id"] or "",
            d["component_id"],
            str(d["recorded_at"]),
        )
    )
    digest = hashlib.sha256(payload.encode("utf-8")).hexdigest()
    return ArtefactStatement(
        statement_id=digest,
        subject=d["subject"],
        predicate=d["predicate"],
        object=obj,
        run_id=d["run_id"],
        component_id=d["component_id"],
        recorded_at=d["recorded_at"],
    )


def _is_parsed_draft(raw: dict) -> bool:
    return (
        isinstance(raw, dict)
        and set(raw) == _DRAFT_FIELDS
        and isinstance(raw.get("object"), ObjectValue)
        and isinstance(raw.get("recorded_at"), int)
        and raw.get("run_id") != ""
    )


def classify_artefact_kind(run_id: Optional[str]) -> ArtefactKind:
    """Dynamic iff a run context is present."""
    return ArtefactKind.DYNAMIC if run_id is not None else ArtefactKind.STATIC


def statement_from_dict(obj: dict) -> ArtefactStatement:
    """Parse the external statement form (without seq) and verify its id."""
    data = dict(obj)
    stated_id = data.pop("id", None)
    data.pop("kind", None)
    stmt = canonicalize_statement(data)
    if stated_id is not None and stated_id != stmt.statement_id:
        raise ParseError(f"statement id mismatch: stated {stated_id}, computed {stmt.statement_id}")
    return stmt


# ---------------------------------------------------------------------------
# auditors and run contexts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditorIdentity:
    id: str
    display_name: str
    relationship: Relationship
    party: Party

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "display_name": self.display_name,
            "relationship": self.relationship.value,
            "party": self.party.value,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "AuditorIdentity":
        if not isinstance(obj, dict):
            raise ParseError("auditor must be an object")
        try:
            ident = obj["id"]
            rel = obj["relationship"]
            party = obj["party"]
        except KeyError as exc:
            raise MissingField(f"auditor missing field {exc.args[0]!r}") from None
        if not ident or not isinstance(ident, str):
            raise MissingField("auditor id must be non-empty")
        return cls(
            id=ident,
            display_name=str(obj.get("display_name", ident)),
            relationship=_parse_enum(Relationship, rel, "auditor relationship"),
            party=_parse_enum(Party, party, "auditor party"),
        )


@dataclass(frozen=True)
class RunContext:
    run_id: str
    system_id: str
    started_at: int
    ended_at: Optional[int] = None
    status: str = "running"

    def __post_init__(self):
        if self.status not in ("running", "completed", "failed", "unknown"):
            raise ParseError(f"unknown run status {self.status!r}")
        if self.ended_at is None and self.status not in ("running", "unknown"):
            raise ParseError("run without ended_at must be running or unknown")
        if self.ended_at is not None and self.ended_at < self.started_at:
            raise ParseError("run ended_at precedes started_at")


# ---------------------------------------------------------------------------
# system descriptions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Component:
    id: str
    name: str
    kind: ComponentKind
    phase_coverage: frozenset[LifecyclePhase]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "name": self.name,
            "kind": self.kind.value,
            "phase_coverage": sorted(p.value for p in self.phase_coverage),
        }


@dataclass(frozen=True)
class DataFlow:
    from_id: str
    to_id: str
    payload_label: str

    def to_dict(self) -> dict:
        return {"from": self.from_id, "to": self.to_id, "payload_label": self.payload_label}


@dataclass(frozen=True)
class SystemDescription:
    system_id: str
    components: tuple[Component, ...]
    data_flows: tuple[DataFlow, ...]
    phases_in_scope: frozenset[LifecyclePhase]

    def component_ids(self) -> set[str]:
        return {c.id for c in self.components}

    def kinds_present(self) -> set[ComponentKind]:
        return {c.kind for c in self.components}

    def to_dict(self) -> dict:
        return {
            "system_id": self.system_id,
            "components": [c.to_dict() for c in self.components],
            "data_flows": [f.to_dict() for f in self.data_flows],
            "phases_in_scope": sorted(p.value for p in self.phases_in_scope),
        }


_SYSTEM_FIELDS = {"system_id", "components", "data_flows", "phases_in_scope"}
_COMPONENT_FIELDS = {"id", "name", "kind", "phase_coverage"}
_FLOW_FIELDS = {"from", "to", "payload_label"}


def system_from_dict(obj: dict) -> SystemDescription:
    """Parse a SystemDescription document; unknown fields are rejected."""
    if not isinstance(obj, dict):
        raise ParseError("system description must be an object")
    unknown = set(obj) - _SYSTEM_FIELDS
    if unknown:
        raise ParseError(f"unknown system description field(s): {sorted(unknown)}")
    missing = _SYSTEM_FIELDS - set(obj)
    if missing:
        raise MissingField(f"system description missing field(s): {sorted(missing)}")
    components = []
    for c in obj["components"]:
        unk = set(c) - _COMPONENT_FIELDS
        if unk:
            raise ParseError(f"unknown component field(s): {sorted(unk)}")
        components.append(
            Component(
                id=str(c.get("id", "")),
                name=str(c.get("name", c.get("id", ""))),
                kind=_parse_enum(ComponentKind, c.get("kind"), "component kind"),
                phase_coverage=frozenset(parse_phase(p) for p in c.get("phase_coverage", [])),
            )
        )
    flows = []
    for f in obj["data_flows"]:
        unk = set(f) - _FLOW_FIELDS
        if unk:
            raise ParseError(f"unknown data flow field(s): {sorted(unk)}")
        flows.append(
            DataFlow(
                from_id=str(f.get("from", "")),
                to_id=str(f.get("to", "")),
                payload_label=str(f.get("payload_label", "")),
            )
        )
    return SystemDescription(
        system_id=str(obj["system_id"]),
        components=tuple(components),
        data_flows=tuple(flows),
        phases_in_scope=frozenset(parse_phase(p) for p in obj["phases_in_scope"]),
    )


@dataclass(frozen=True)
class Violation:
    field: str
    rule: str
    detail: str = ""

    def to_dict(self) -> dict:
        return {"field": self.field, "rule": self.rule, "detail": self.detail}


def validate_system_description(desc: SystemDescription) -> list[Violation]:
    """Return all invariant violations; empty list means the description is valid."""
    violations: list[Violation] = []
    if not desc.system_id:
        violations.append(Violation("system_id", "empty"))
    if not desc.components:
        violations.append(Violation("components", "empty", "at least one component required"))
    seen: set[str] = set()
    union_phases: set[LifecyclePhase] = set()
    for i, comp in enumerate(desc.components):
        if not comp.id:
            violations.append(Violation(f"components[{i}].id", "empty"))
        elif comp.id in seen:
            violations.append(Violation(f"components[{i}].id", "duplicate component id", comp.id))
        seen.add(comp.id)
        if not comp.phase_coverage:
            violations.append(
                Violation(f"components[{i}].phase_coverage", "empty phase coverage", comp.id)
            )
        union_phases |= comp.phase_coverage
    for i, flow in enumerate(desc.data_flows):
        for end, label in ((flow.from_id, "from"), (flow.to_id, "to")):
            if end not in seen:
                violations.append(
                    Violation(f"data_flows[{i}].{label}", "dangling flow endpoint", end)
                )
        if flow.from_id == flow.to_id:
            violations.append(Violation(f"data_flows[{i}]", "self-loop", flow.from_id))
    extra = desc.phases_in_scope - union_phases
    if extra:
        violations.append(
            Violation(
                "phases_in_scope",
                "phase not covered by any component",
                ",".join(sorted(p.value for p in extra)),
            )
        )
    return violations


# ---------------------------------------------------------------------------
# statement patterns
# ---------------------------------------------------------------------------


def is_variable(value) -> bool:
    return isinstance(value, str) and value.startswith("?") and len(value) > 1


@dataclass(frozen=True)
class StatementPattern:
    """Constraint template over statements; the query and coverage primitive.

    ``subject`` is an exact string, a ``{"prefix": ...}`` match, or a ``?var``
    binding; ``run_id``/``component_id``/``object_var`` likewise accept ``?var``.
    At least one literal constraint must be present.
    """

    subject: Optional[str] = None
    subject_prefix: Optional[str] = None
    predicate: Optional[str] = None
    object_type: Optional[str] = None
    component_id: Optional[str] = None
    run_id: Optional[str] = None
    object_var: Optional[str] = None
    ad_hoc: bool = False

    def variables(self) -> list[str]:
        out = []
        for v in (self.subject, self.run_id, self.component_id, self.object_var):
            if is_variable(v):
                out.append(v)
        return out

    def has_constraint(self) -> bool:
        return any(
            (
                self.subject is not None and not is_variable(self.subject),
                self.subject_prefix is not None,
                self.predicate is not None,
                self.object_type is not None,
                self.component_id is not None and not is_variable(self.component_id),
                self.run_id is not None and not is_variable(self.run_id),
            )
        )

    def matches(self, stmt: ArtefactStatement) -> bool:
        """Literal constraints only; variable slots are unconstrained here."""
        if self.predicate is not None and stmt.predicate != self.predicate:
            return False
        if self.subject is not None and not is_variable(self.subject):
            if stmt.subject != self.subject:
                return False
        if self.subject_prefix is not None and not stmt.subject.startswith(self.subject_prefix):
            return False
        if self.object_type is not None and stmt.object.type != self.object_type:
            return False
        if self.component_id is not None and not is_variable(self.component_id):
            if stmt.component_id != self.component_id:
                return False
        if self.run_id is not None and not is_variable(self.run_id):
            if stmt.run_id != self.run_id:
                return False
        return True

    def key(self) -> tuple:
        """Identity for deduplication; the ad-hoc lint marker is excluded."""
        return (
            self.subject,
            self.subject_prefix,
            self.predicate,
            self.object_type,
            self.component_id,
            self.run_id,
            self.object_var,
        )

    def to_dict(self) -> dict:
        out: dict = {}
        if self.subject is not None:
            out["subject"] = self.subject
        if self.subject_prefix is not None:
            out["subject"] = {"prefix": self.subject_prefix}
        if self.predicate is not None:
            out["predicate"] = self.predicate
        if self.object_type is not None:
            out["object_type"] = self.object_type
        if self.component_id is not None:
            out["component_id"] = self.component_id
        if self.run_id is not None:
            out["run_id"] = self.run_id
        if self.object_var is not None:
            out["object"] = self.object_var
        if self.ad_hoc:
            out["ad_hoc"] = True
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "StatementPattern":
        if not isinstance(obj, dict):
            raise ParseError(f"pattern must be an object, got {obj!r}")
        unknown = set(obj) - {
            "subject",
            "predicate",
            "object_type",
            "component_id",
            "run_id",
            "object",
            "ad_hoc",
        }
        if unknown:
            raise ParseError(f"unknown pattern field(s): {sorted(unknown)}")
        subject = obj.get("subject")
        subject_prefix = None
        if isinstance(subject, dict):
            if set(subject) != {"prefix"}:
                raise ParseError(f"subject match must be exact or {{prefix}}, got {subject!r}")
            subject_prefix = str(subject["prefix"])
            subject = None
        predicate = obj.get("predicate")
        if predicate is not None:
            validate_predicate(predicate)
        object_type = obj.get("object_type")
        if object_type is not None and object_type not in OBJECT_TYPES:
            raise InvalidObjectType(f"unknown object type {object_type!r}")
        object_var = obj.get("object")
        if object_var is not None and not is_variable(object_var):
            raise ParseError(f"object slot only accepts a ?variable, got {object_var!r}")
        pattern = cls(
            subject=subject,
            subject_prefix=subject_prefix,
            predicate=predicate,
            object_type=object_type,
            component_id=obj.get("component_id"),
            run_id=obj.get("run_id"),
            object_var=object_var,
            ad_hoc=bool(obj.get("ad_hoc", False)),
        )
        names = pattern.variables()
        if len(names) != len(set(names)):
            raise ParseError(f"duplicate variable within one pattern: {names}")
        return pattern


def pattern_subsumes(provided: StatementPattern, required: StatementPattern) -> bool:
    """True when a binding's provided pattern covers a question's required one.

    Predicates must match exactly. On component the provider must be
    unconstrained or equal. On object type the requirement must be a wildcard
    or met exactly: an untyped provision does not cover a typed requirement.
    """
    if provided.predicate != required.predicate:
        return False
    if provided.component_id is not None and provided.component_id != required.component_id:
        return False
    if required.object_type is not None and provided.object_type != required.object_type:
        return False
    return True


def dedup_patterns(patterns: Iterable[StatementPattern]) -> list[StatementPattern]:
    """First-occurrence-order dedup by pattern identity (ad-hoc flag ignored)."""
    seen: set[tuple] = set()
    out: list[StatementPattern] = []
    for p in patterns:
        k = p.key()
        if k not in seen:
            seen.add(k)
            out.append(p)
    return out
