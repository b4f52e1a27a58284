"""Conjunctive queries over the statement store.

A query is a structured AST document: a list of statement patterns joined on
shared ``?variables``, then filters, grouping (variables, fields, and an
optional time bucket over recorded_at), and exactly one aggregate. Evaluation
is a pure function of (query, log prefix up to the watermark).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Any, Optional

from .errors import (
    InvalidBucket,
    InvalidQuery,
    MissingParam,
    TypeMismatch,
    UnboundVariable,
)
from .model import (
    ArtefactStatement,
    ObjectValue,
    StatementPattern,
    epoch_ms_to_iso,
    is_variable,
)

AGGREGATES = ("COUNT", "COUNT_DISTINCT", "AVG", "MIN", "MAX", "SUM", "EXISTS", "COLLECT_SET")
NEEDS_OVER = frozenset({"COUNT_DISTINCT", "AVG", "MIN", "MAX", "SUM", "COLLECT_SET"})
NUMERIC_AGGREGATES = frozenset({"AVG", "MIN", "MAX", "SUM"})
FIELD_NAMES = ("subject", "predicate", "object", "component_id", "run_id", "recorded_at")

_OP_ALIASES = {"≠": "!=", "≤": "<=", "≥": ">="}
FILTER_OPS = ("=", "!=", "<", "<=", ">", ">=", "prefix")

_BUCKET_RE = re.compile(r"^(\d+)(ms|s|m|h|d)$")
_BUCKET_UNIT_MS = {"ms": 1, "s": 1000, "m": 60_000, "h": 3_600_000, "d": 86_400_000}

_PARAM_RE = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")

# -- normalized comparison domain -------------------------------------------
# Bound values live in (kind, value) pairs so joins and filters compare
# across slots: integer and decimal share the "num" kind, subjects and
# string/entity_ref objects share "str".

_KIND_RANK = {"null": 0, "bool": 1, "num": 2, "str": 3, "ts": 4}


def norm_plain(value) -> tuple:
    if value is None:
        return ("null", None)
    return ("str", value)


def norm_object(obj: ObjectValue) -> tuple:
    if obj.type in ("string", "entity_ref"):
        return ("str", obj.value)
    if obj.type in ("integer", "decimal"):
        return ("num", obj.value)
    if obj.type == "boolean":
        return ("bool", obj.value)
    return ("ts", obj.value)


def denorm(norm: tuple):
    kind, value = norm
    if kind == "ts":
        return epoch_ms_to_iso(value)
    return value


def sort_key(norm: tuple) -> tuple:
    kind, value = norm
    if value is None:
        return (_KIND_RANK[kind], 0)
    return (_KIND_RANK[kind], value)


# -- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class Filter:
    lhs: str
    op: str
    rhs: Any

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "op": self.op, "rhs": self.rhs}


@dataclass(frozen=True)
class QueryAST:
    match: tuple[StatementPattern, ...]
    aggregate_op: str
    aggregate_over: Optional[str] = None
    filters: tuple[Filter, ...] = ()
    group_by: tuple[str, ...] = ()
    time_bucket: Optional[str] = None
    order_by: tuple[tuple[str, str], ...] = ()
    limit: Optional[int] = None

    def bucket_ms(self) -> Optional[int]:
        if self.time_bucket is None:
            return None
        m = _BUCKET_RE.match(self.time_bucket)
        return int(m.group(1)) * _BUCKET_UNIT_MS[m.group(2)]

    def variables(self) -> set[str]:
        out: set[str] = set()
        for p in self.match:
            out.update(p.variables())
        return out

    def to_dict(self) -> dict:
        out: dict = {
            "match": [p.to_dict() for p in self.match],
            "aggregate": {"op": self.aggregate_op},
        }
        if self.aggregate_over is not None:
            out["aggregate"]["over"] = self.aggregate_over
        if self.filters:
            out["filters"] = [f.to_dict() for f in self.filters]
        if self.group_by:
            out["group_by"] = list(self.group_by)
        if self.time_bucket is not None:
            out["time_bucket"] = self.time_bucket
        if self.order_by:
            out["order_by"] = [{"key": k, "dir": d} for k, d in self.order_by]
        if self.limit is not None:
            out["limit"] = self.limit
        return out


_AST_KEYS = {"match", "filters", "group_by", "aggregate", "time_bucket", "order_by", "limit"}


def parse_query_ast(doc: dict) -> QueryAST:
    if not isinstance(doc, dict):
        raise InvalidQuery("query must be an object")
    unknown = set(doc) - _AST_KEYS
    if unknown:
        raise InvalidQuery(f"unknown query field(s): {sorted(unknown)}")

    raw_match = doc.get("match")
    if not isinstance(raw_match, list) or not raw_match:
        raise InvalidQuery("match must be a non-empty list of patterns")
    patterns = []
    for i, p in enumerate(raw_match):
        pattern = StatementPattern.from_dict(p)
        if not pattern.has_constraint():
            raise InvalidQuery(f"match[{i}] has no constrained field")
        patterns.append(pattern)
    query_vars = {v for p in patterns for v in p.variables()}
    single = len(patterns) == 1

    def check_ref(ref: str, where: str) -> None:
        if is_variable(ref):
            if ref not in query_vars:
                raise UnboundVariable(f"{where} references unbound variable {ref}")
        elif ref in FIELD_NAMES:
            if not single:
                raise UnboundVariable(
                    f"{where} field reference {ref!r} requires a single-pattern query"
                )
        else:
            raise InvalidQuery(f"{where} must be a ?variable or field name, got {ref!r}")

    raw_agg = doc.get("aggregate")
    if not isinstance(raw_agg, dict) or "op" not in raw_agg:
        raise InvalidQuery("aggregate must be an object with an op")
    if set(raw_agg) - {"op", "over"}:
        raise InvalidQuery(f"unknown aggregate field(s): {sorted(set(raw_agg) - {'op', 'over'})}")
    op = raw_agg["op"]
    if op not in AGGREGATES:
        raise InvalidQuery(f"unknown aggregate op {op!r}")
    over = raw_agg.get("over")
    if op in NEEDS_OVER and over is None:
        raise InvalidQuery(f"aggregate {op} requires an over reference")
    if op in ("EXISTS", "COUNT") and over is not None and op == "EXISTS":
        raise InvalidQuery("EXISTS takes no over reference")
    if over is not None:
        check_ref(over, "aggregate.over")

    filters = []
    for i, f in enumerate(doc.get("filters", []) or []):
        if not isinstance(f, dict) or set(f) != {"lhs", "op", "rhs"}:
            raise InvalidQuery(f"filters[{i}] must be {{lhs, op, rhs}}")
        fop = _OP_ALIASES.get(f["op"], f["op"])
        if fop not in FILTER_OPS:
            raise InvalidQuery(f"filters[{i}] has unknown op {f['op']!r}")
        check_ref(f["lhs"], f"filters[{i}].lhs")
        rhs = f["rhs"]
        if isinstance(rhs, (dict, list)):
            raise InvalidQuery(f"filters[{i}].rhs must be a scalar literal")
        filters.append(Filter(f["lhs"], fop, rhs))

    group_by = []
    raw_group = doc.get("group_by", []) or []
    if not isinstance(raw_group, list):
        raise InvalidQuery("group_by must be a list")
    for g in raw_group:
        check_ref(g, "group_by")
        if g in group_by:
            raise InvalidQuery(f"duplicate group_by entry {g!r}")
        group_by.append(g)

    time_bucket = doc.get("time_bucket")
    if time_bucket is not None:
        if not isinstance(time_bucket, str) or not _BUCKET_RE.match(time_bucket):
            raise InvalidBucket(f"time_bucket must look like '1d', got {time_bucket!r}")
        if int(_BUCKET_RE.match(time_bucket).group(1)) == 0:
            raise InvalidBucket("time_bucket duration must be positive")

    order_by = []
    for i, o in enumerate(doc.get("order_by", []) or []):
        if not isinstance(o, dict) or set(o) - {"key", "dir"} or "key" not in o:
            raise InvalidQuery(f"order_by[{i}] must be {{key, dir?}}")
        direction = o.get("dir", "asc")
        if direction not in ("asc", "desc"):
            raise InvalidQuery(f"order_by[{i}].dir must be asc or desc")
        key = o["key"]
        legal = set(group_by) | {"value"}
        if time_bucket is not None:
            legal.add("bucket")
        if key not in legal:
            raise InvalidQuery(f"order_by[{i}].key {key!r} is not a group key or 'value'")
        order_by.append((key, direction))

    limit = doc.get("limit")
    if limit is not None:
        if isinstance(limit, bool) or not isinstance(limit, int) or limit < 1:
            raise InvalidQuery(f"limit must be an integer >= 1, got {limit!r}")

    return QueryAST(
        match=tuple(patterns),
        aggregate_op=op,
        aggregate_over=over,
        filters=tuple(filters),
        group_by=tuple(group_by),
        time_bucket=time_bucket,
        order_by=tuple(order_by),
        limit=limit,
    )


# -- template parameters -----------------------------------------------------


def collect_params(doc) -> set[str]:
    """All {name} placeholders appearing in string leaves of an AST document."""
    found: set[str] = set()

    def walk(node):
        if isinstance(node, str):
            found.update(_PARAM_RE.findall(node))
        elif isinstance(node, dict):
            for v in node.values():
                walk(v)
        elif isinstance(node, list):
            for v in node:
                walk(v)

    walk(doc)
    return found


def _param_text(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def instantiate(doc, params: dict):
    """Substitute {name} placeholders in string leaves of an AST document.

    A leaf that is exactly one placeholder takes the typed parameter value;
    embedded placeholders substitute textually.
    """
    needed = collect_params(doc)
    missing = sorted(needed - set(params))
    if missing:
        raise MissingParam(f"missing template parameter(s): {missing}", params=missing)

    def walk(node):
        if isinstance(node, str):
            m = _PARAM_RE.fullmatch(node)
            if m:
                return params[m.group(1)]
            return _PARAM_RE.sub(lambda mm: _param_text(params[mm.group(1)]), node)
        if isinstance(node, dict):
            return {k: walk(v) for k, v in node.items()}
        if isinstance(node, list):
            return [walk(v) for v in node]
        return node

    return walk(doc)


# -- evaluation ---------------------------------------------------------------


@dataclass
class _Row:
    bindings: dict
    first: ArtefactStatement
    only: Optional[ArtefactStatement]  # set for single-pattern queries


def _bind(pattern: StatementPattern, stmt: ArtefactStatement, base: dict) -> Optional[dict]:
    """Extend base bindings with this statement's variable slots, or None on clash."""
    out = None
    for slot, value in (
        (pattern.subject, norm_plain(stmt.subject)),
        (pattern.run_id, norm_plain(stmt.run_id) if stmt.run_id is not None else None),
        (pattern.component_id, norm_plain(stmt.component_id)),
        (pattern.object_var, norm_object(stmt.object)),
    ):
        if slot is None or not is_variable(slot):
            continue
        if value is None:
            return None  # variable over an absent run_id never binds
        prior = base.get(slot) if out is None else out.get(slot, base.get(slot))
        if prior is not None and prior != value:
            return None
        if out is None:
            out = dict(base)
        out[slot] = value
    return dict(base) if out is None else out


def _field_value(stmt: ArtefactStatement, name: str) -> tuple:
    if name == "subject":
        return norm_plain(stmt.subject)
    if name == "predicate":
        return norm_plain(stmt.predicate)
    if name == "object":
        return norm_object(stmt.object)
    if name == "component_id":
        return norm_plain(stmt.component_id)
    if name == "run_id":
        return norm_plain(stmt.run_id)
    return ("ts", stmt.recorded_at)


def _resolve(row: _Row, ref: str) -> tuple:
    if is_variable(ref):
        return row.bindings[ref]
    return _field_value(row.only if row.only is not None else row.first, ref)


def _coerce_rhs(lhs: tuple, rhs) -> Optional[tuple]:
    """Bring a filter literal into the lhs kind; None when incompatible."""
    kind = lhs[0]
    if rhs is None:
        return ("null", None) if kind == "null" else None
    if isinstance(rhs, bool):
        return ("bool", rhs) if kind == "bool" else None
    if isinstance(rhs, (int, float)):
        return ("num", rhs) if kind == "num" else None
    if isinstance(rhs, str):
        if kind == "str":
            return ("str", rhs)
        if kind == "ts":
            try:
                from .model import iso_to_epoch_ms

                return ("ts", iso_to_epoch_ms(rhs))
            except Exception:
                return None
    return None


def _filter_passes(row: _Row, flt: Filter) -> bool:
    lhs = _resolve(row, flt.lhs)
    rhs = _coerce_rhs(lhs, flt.rhs)
    if rhs is None and not (flt.op in ("=", "!=") and lhs[0] == "null" and flt.rhs is None):
        return False
    if flt.op == "prefix":
        return lhs[0] == "str" and isinstance(flt.rhs, str) and lhs[1].startswith(flt.rhs)
    if flt.op == "=":
        return lhs == rhs
    if flt.op == "!=":
        return lhs != rhs
    if lhs[0] not in ("num", "ts", "str"):
        return False  # ordering comparisons need an ordered kind
    a, b = lhs[1], rhs[1]
    if flt.op == "<":
        return a < b
    if flt.op == "<=":
        return a <= b
    if flt.op == ">":
        return a > b
    return a >= b


def _kahan_sum(values: list[float]) -> float:
    total = 0.0
    carry = 0.0
    for v in values:
        y = v - carry
        t = total + y
        carry = (t - total) - y
        total = t
    return total


def _numeric(values: list[tuple], op: str) -> list:
    out = []
    for kind, value in values:
        if kind != "num":
            raise TypeMismatch(f"{op} requires numeric values, got kind {kind!r}")
        out.append(value)
    return out


def _aggregate(op: str, values: list[tuple]):
    if op == "COUNT":
        return len(values)
    if op == "COUNT_DISTINCT":
        return len(set(values))
    if op == "COLLECT_SET":
        return [denorm(v) for v in sorted(set(values), key=sort_key)]
    nums = _numeric(values, op)
    if op == "MIN":
        return min(nums)
    if op == "MAX":
        return max(nums)
    if op == "SUM":
        if all(isinstance(n, int) for n in nums):
            return sum(nums)
        return _kahan_sum([float(n) for n in nums])
    # AVG
    return _kahan_sum([float(n) for n in nums]) / len(nums)


def evaluate(ast: QueryAST, store, as_of: Optional[int] = None) -> list[dict]:
    """Join, filter, group, aggregate; rows ordered by group key then order_by."""
    if as_of is not None:
        if isinstance(as_of, bool) or not isinstance(as_of, int) or as_of < 0:
            raise InvalidQuery(f"as_of must be a non-negative integer, got {as_of!r}")
        if as_of > store.watermark:
            raise InvalidQuery(
                f"as_of {as_of} is beyond the store watermark {store.watermark}"
            )
    single = len(ast.match) == 1

    rows: list[_Row] = []
    partial: list[tuple[dict, Optional[ArtefactStatement]]] = [({}, None)]
    for idx, pattern in enumerate(ast.match):
        matched = store.select(pattern, as_of=as_of)
        extended = []
        for bindings, first in partial:
            for _, stmt in matched:
                new = _bind(pattern, stmt, bindings)
                if new is not None:
                    extended.append((new, stmt if idx == 0 else first))
        partial = extended
        if not partial:
            break
    for bindings, first in partial:
        rows.append(_Row(bindings, first, first if single else None))

    for flt in ast.filters:
        rows = [r for r in rows if _filter_passes(r, flt)]

    if ast.aggregate_op == "EXISTS":
        return [{"value": bool(rows)}]
    if not rows:
        return []

    bucket_ms = ast.bucket_ms()
    groups: dict[tuple, dict] = {}
    group_order: list[tuple] = []
    for row in rows:
        key_parts = []
        group_obj = {}
        for g in ast.group_by:
            v = _resolve(row, g)
            key_parts.append(v)
            group_obj[g] = denorm(v)
        if bucket_ms is not None:
            start = (row.first.recorded_at // bucket_ms) * bucket_ms
            key_parts.append(("ts", start))
            group_obj["bucket"] = epoch_ms_to_iso(start)
        key = tuple(key_parts)
        if key not in groups:
            groups[key] = {"group": group_obj, "values": []}
            group_order.append(key)
        if ast.aggregate_over is not None:
            groups[key]["values"].append(_resolve(row, ast.aggregate_over))
        else:
            groups[key]["values"].append(("num", 1))

    out = []
    for key in sorted(groups, key=lambda k: tuple(sort_key(part) for part in k)):
        entry = groups[key]
        value = _aggregate(ast.aggregate_op, entry["values"])
        row_out: dict = {}
        if entry["group"]:
            row_out["group"] = entry["group"]
        row_out["value"] = value
        out.append(row_out)

    if ast.order_by:

        def order_key(row_out: dict):
            parts = []
            for key_name, direction in ast.order_by:
                if key_name == "value":
                    raw = row_out["value"]
                else:
                    raw = row_out.get("group", {}).get(key_name)
                if isinstance(raw, bool):
                    norm = ("bool", raw)
                elif isinstance(raw, (int, float)):
                    norm = ("num", raw)
                elif raw is None:
                    norm = ("null", None)
                elif isinstance(raw, list):
                    norm = ("str", "\x00".join(map(str, raw)))
                else:
                    norm = ("str", raw)
                k = sort_key(norm)
                parts.append(_Desc(k) if direction == "desc" else k)
            return tuple(parts)

        out.sort(key=order_key)

    if ast.limit is not None:
        out = out[: ast.limit]
    return out


class _Desc:
    """Inverts comparison so one sort call handles mixed asc/desc keys."""

    __slots__ = ("inner",)

    def __init__(self, inner):
        self.inner = inner

    def __lt__(self, other):
        return other.inner < self.inner

    def __eq__(self, other):
        return self.inner == other.inner


def count_matches(pattern: StatementPattern, store, as_of: Optional[int] = None) -> int:
    """How many statements the pattern alone matches; the no_data domain probe."""
    return len(store.select(pattern, as_of=as_of))
