"""Mapping specs: turning heterogeneous source records into statement drafts.

Three source shapes are supported. Nested records resolve dot-separated
paths with ``[*]`` list expansion; delimited tables treat source paths as
column names holding lexical values; triple files pass (subject, predicate,
object) lines through, with predicate-keyed rules acting as type overrides.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .errors import (
    InvalidObjectType,
    MissingField,
    MissingRequiredField,
    ParseError,
    TemplateFieldUnresolved,
    TypeCoercionError,
)
from .model import (
    OBJECT_TYPES,
    ObjectValue,
    now_ms,
    sniff_object,
    validate_predicate,
)
import re

SOURCE_FORMATS = ("nested_record", "delimited_table", "triple_file")

RUN_FIELDS = ("run_id", "run")
COMPONENT_FIELDS = ("component_id", "component")
TIME_FIELDS = ("recorded_at", "timestamp", "ts")

_PLACEHOLDER_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_.]*)\}")


@dataclass(frozen=True)
class MappingRule:
    source_path: str
    predicate: str
    object_type: str
    required: bool = False

    def to_dict(self) -> dict:
        return {
            "source_path": self.source_path,
            "predicate": self.predicate,
            "object_type": self.object_type,
            "required": self.required,
        }


@dataclass(frozen=True)
class MappingSpec:
    mapping_id: str
    source_format: str
    subject_template: str
    rules: tuple[MappingRule, ...]
    default_component_id: Optional[str] = None

    def to_dict(self) -> dict:
        out = {
            "mapping_id": self.mapping_id,
            "source_format": self.source_format,
            "subject_template": self.subject_template,
            "rules": [r.to_dict() for r in self.rules],
        }
        if self.default_component_id is not None:
            out["default_component_id"] = self.default_component_id
        return out


def parse_mapping_spec(obj: dict) -> MappingSpec:
    if not isinstance(obj, dict):
        raise ParseError("mapping spec must be an object")
    unknown = set(obj) - {
        "mapping_id",
        "source_format",
        "subject_template",
        "rules",
        "default_component_id",
    }
    if unknown:
        raise ParseError(f"unknown mapping spec field(s): {sorted(unknown)}")
    for name in ("mapping_id", "source_format", "subject_template", "rules"):
        if name not in obj:
            raise MissingField(f"mapping spec missing field {name!r}")
    if obj["source_format"] not in SOURCE_FORMATS:
        raise ParseError(f"unknown source_format {obj['source_format']!r}")
    if not isinstance(obj["subject_template"], str) or not obj["subject_template"]:
        raise ParseError("subject_template must be a non-empty string")
    rules = []
    for i, r in enumerate(obj["rules"]):
        for name in ("source_path", "predicate", "object_type"):
            if name not in r:
                raise MissingField(f"rules[{i}] missing field {name!r}")
        validate_predicate(r["predicate"])
        if r["object_type"] not in OBJECT_TYPES:
            raise InvalidObjectType(f"rules[{i}] has unknown object_type {r['object_type']!r}")
        if not r["source_path"]:
            raise ParseError(f"rules[{i}] has an empty source_path")
        rules.append(
            MappingRule(
                source_path=r["source_path"],
                predicate=r["predicate"],
                object_type=r["object_type"],
                required=bool(r.get("required", False)),
            )
        )
    if not rules:
        raise ParseError("mapping spec needs at least one rule")
    return MappingSpec(
        mapping_id=str(obj["mapping_id"]),
        source_format=obj["source_format"],
        subject_template=obj["subject_template"],
        rules=tuple(rules),
        default_component_id=obj.get("default_component_id"),
    )


# -- path resolution ----------------------------------------------------------


def resolve_path(record, path: str) -> list:
    """Values at a dot path; ``seg[*]`` fans out over a list. Missing -> []."""
    values = [record]
    for seg in path.split("."):
        fan_out = seg.endswith("[*]")
        name = seg[:-3] if fan_out else seg
        next_values = []
        for v in values:
            if not isinstance(v, dict) or name not in v:
                continue
            child = v[name]
            if fan_out:
                if isinstance(child, list):
                    next_values.extend(child)
            else:
                next_values.append(child)
        values = next_values
        if not values:
            return []
    return values


def _scalar_field(record: dict, names: tuple) -> Optional[str]:
    for name in names:
        value = record.get(name)
        if value is not None and value != "":
            return value
    return None


def _coerce(value, object_type: str, path: str) -> ObjectValue:
    try:
        if isinstance(value, str) and object_type not in ("string", "entity_ref"):
            return ObjectValue.from_lexical(object_type, value)
        return ObjectValue.parse(object_type, value)
    except InvalidObjectType as exc:
        raise TypeCoercionError(
            f"cannot coerce {path!r} value {value!r} to {object_type}: {exc}",
            path=path,
            object_type=object_type,
        ) from None


def _fill_subject(template: str, record: dict) -> str:
    def lookup(match):
        field = match.group(1)
        values = resolve_path(record, field)
        if not values or not isinstance(values[0], (str, int, float)) or values[0] == "":
            raise TemplateFieldUnresolved(
                f"subject template field {field!r} is unresolved", field=field
            )
        return str(values[0])

    return _PLACEHOLDER_RE.sub(lookup, template)


def _parse_triple_line(record) -> tuple[str, str, str]:
    if isinstance(record, (tuple, list)) and len(record) == 3:
        return str(record[0]), str(record[1]), str(record[2])
    if isinstance(record, str):
        parts = record.rstrip("\n").split("\t")
        if len(parts) == 3 and all(parts):
            return parts[0], parts[1], parts[2]
    raise ParseError(f"triple record must be subject<TAB>predicate<TAB>object, got {record!r}")


def apply_mapping(record, spec: MappingSpec, context: Optional[dict] = None) -> list[dict]:
    """One statement draft per resolved rule (triple files: per line).

    recorded_at precedence: context, then a record time field, then ingest
    time; run and component analogously (component falls back to the spec's
    default). Missing optional paths skip the rule; missing required paths
    fail the whole record.
    """
    context = context or {}

    if spec.source_format == "triple_file":
        subject, predicate, obj_lexical = _parse_triple_line(record)
        validate_predicate(predicate)
        rule = next((r for r in spec.rules if r.source_path == predicate), None)
        if rule is not None:
            value = _coerce(obj_lexical, rule.object_type, predicate)
            predicate = rule.predicate
        else:
            value = sniff_object(obj_lexical)
        draft = {
            "subject": subject,
            "predicate": predicate,
            "object": value.to_dict(),
            "component_id": context.get("component_id") or spec.default_component_id,
            "recorded_at": context.get("recorded_at", now_ms()),
        }
        if context.get("run_id"):
            draft["run_id"] = context["run_id"]
        if not draft["component_id"]:
            raise MissingRequiredField("no component_id in context or mapping default")
        return [draft]

    if not isinstance(record, dict):
        raise ParseError(f"{spec.source_format} record must be an object, got {type(record).__name__}")

    recorded_at = context.get("recorded_at")
    if recorded_at is None:
        recorded_at = _scalar_field(record, TIME_FIELDS)
    if recorded_at is None:
        recorded_at = now_ms()
    run_id = context.get("run_id")
    if run_id is None:
        run_id = _scalar_field(record, RUN_FIELDS)
    component_id = context.get("component_id")
    if component_id is None:
        component_id = _scalar_field(record, COMPONENT_FIELDS)
    if component_id is None:
        component_id = spec.default_component_id
    if not component_id:
        raise MissingRequiredField("no component_id in context, record, or mapping default")

    subject = _fill_subject(spec.subject_template, record)

    drafts = []
    for rule in spec.rules:
        values = resolve_path(record, rule.source_path)
        if spec.source_format == "delimited_table":
            values = [v for v in values if v != "" and v is not None]
        else:
            values = [v for v in values if v is not None]
        if not values:
            if rule.required:
                raise MissingRequiredField(
                    f"required path {rule.source_path!r} missing from record",
                    path=rule.source_path,
                )
            continue
        for value in values:
            draft = {
                "subject": subject,
                "predicate": rule.predicate,
                "object": _coerce(value, rule.object_type, rule.source_path).to_dict(),
                "component_id": component_id,
                "recorded_at": recorded_at,
            }
            if run_id:
                draft["run_id"] = str(run_id)
            drafts.append(draft)
    return drafts


def apply_mapping_batch(
    records: list, spec: MappingSpec, context: Optional[dict] = None
) -> tuple[list[dict], list[tuple[int, str]]]:
    """Map a record list; failures are collected per record index, not raised."""
    drafts: list[dict] = []
    rejected: list[tuple[int, str]] = []
    for i, record in enumerate(records):
        try:
            drafts.extend(apply_mapping(record, spec, context))
        except Exception as exc:
            rejected.append((i, str(exc)))
    return drafts, rejected
