"""HTTP service: audits, ingest, queries, and reports over a REST surface.

State lives on disk under one data directory; every mutation is an appended
line (workflow events, statement batches), so a restarted server replays to
exactly where it stopped. Authentication is static bearer tokens mapped to
principals with permission sets.
"""

from __future__ import annotations

import json
import threading
import uuid
from pathlib import Path
from typing import Optional

from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse, Response

from . import __version__
from .catalog import Catalog, default_catalog, lint_catalog, load_catalog, serialize_catalog
from .engine import (
    AuditWorkflow,
    CollectorBinding,
    check_coverage,
    create_workflow,
    recommend_questions,
    register_binding,
    replay,
    select_questions,
    transition,
)
from .errors import (
    AuditboxError,
    BatchTooLarge,
    ConfigError,
    CorruptLog,
    IllegalState,
    MissingField,
    ParseError,
    PermissionDenied,
    UnknownAudit,
    WorkflowNotCollecting,
)
from .mapping import apply_mapping_batch, parse_mapping_spec
from .model import AuditorIdentity, canonical_json, now_ms, parse_goal, system_from_dict
from .query import evaluate, parse_query_ast
from .reporting import answer_question, generate_report
from .store import DEFAULT_MAX_BATCH, IngestBatch, StatementStore

PERMISSIONS = ("scope_audit", "register_binding", "ingest", "query", "report", "admin")

# permissions an external auditor may never hold
INTERNAL_ONLY_PERMISSIONS = frozenset({"ingest", "register_binding"})

ERROR_STATUS = {
    "permission_denied": 403,
    "unknown_audit": 404,
    "unknown_question": 400,
    "illegal_state": 409,
    "workflow_not_collecting": 409,
    "idempotency_conflict": 409,
    "coverage_incomplete": 409,
    "duplicate_binding_id": 409,
    "duplicate_id": 409,
    "batch_too_large": 413,
    "storage_failure": 500,
    "corrupt_log": 500,
}


class ApiPrincipal:
    def __init__(self, identity: AuditorIdentity, permissions: frozenset):
        self.identity = identity
        self.permissions = permissions

    def require(self, permission: str) -> None:
        if permission not in self.permissions and "admin" not in self.permissions:
            raise PermissionDenied(
                f"principal {self.identity.id!r} lacks permission {permission!r}",
                required=permission,
            )


def parse_principal(token_entry: dict) -> ApiPrincipal:
    identity = AuditorIdentity.from_dict(
        {k: token_entry[k] for k in ("id", "display_name", "relationship", "party") if k in token_entry}
    )
    perms = token_entry.get("permissions", [])
    unknown = set(perms) - set(PERMISSIONS)
    if unknown:
        raise ConfigError(f"unknown permission(s) {sorted(unknown)} for {identity.id!r}")
    granted = frozenset(perms)
    if identity.relationship.value == "external":
        forbidden = granted & INTERNAL_ONLY_PERMISSIONS
        if "admin" in granted:
            forbidden = forbidden | {"admin"}
        if forbidden:
            raise ConfigError(
                f"external auditor {identity.id!r} may not hold {sorted(forbidden)}",
                principal=identity.id,
            )
    return ApiPrincipal(identity, granted)


class ServerConfig:
    def __init__(self, data_dir, tokens: dict, max_batch: int = DEFAULT_MAX_BATCH):
        self.data_dir = Path(data_dir)
        self.tokens = tokens  # token string -> ApiPrincipal
        self.max_batch = max_batch


def load_server_config(doc: dict) -> ServerConfig:
    if not isinstance(doc, dict):
        raise ConfigError("server config must be an object")
    unknown = set(doc) - {"data_dir", "tokens", "max_batch"}
    if unknown:
        raise ConfigError(f"unknown server config field(s): {sorted(unknown)}")
    if "data_dir" not in doc:
        raise ConfigError("server config needs data_dir")
    raw_tokens = doc.get("tokens", {})
    if not isinstance(raw_tokens, dict) or not raw_tokens:
        raise ConfigError("server config needs at least one token")
    tokens = {}
    for token, entry in raw_tokens.items():
        if not token or not isinstance(token, str):
            raise ConfigError("tokens must be non-empty strings")
        tokens[token] = parse_principal(entry)
    max_batch = doc.get("max_batch", DEFAULT_MAX_BATCH)
    if not isinstance(max_batch, int) or max_batch < 1:
        raise ConfigError("max_batch must be a positive integer")
    return ServerConfig(doc["data_dir"], tokens, max_batch)


# -- event log persistence -----------------------------------------------------


def _append_event(path: Path, event: dict) -> None:
    with path.open("a", encoding="utf-8") as fh:
        fh.write(canonical_json(event) + "\n")
        fh.flush()


def _read_events(path: Path) -> list[dict]:
    if not path.exists():
        return []
    events = []
    data = path.read_bytes()
    lines = data.split(b"\n")
    for i, line in enumerate(lines):
        if not line:
            continue
        try:
            events.append(json.loads(line.decode("utf-8")))
        except (ValueError, UnicodeDecodeError):
            terminated = i < len(lines) - 1
            if terminated:
                raise CorruptLog(f"unparsable event at line {i + 1} of {path}")
            # torn final write: drop it
            keep = b"\n".join(lines[:i])
            path.write_bytes(keep + b"\n" if keep else b"")
            break
    return events


class AuditRecord:
    def __init__(self, root: Path, workflow: AuditWorkflow, store: StatementStore):
        self.root = root
        self.workflow = workflow
        self.store = store
        self.lock = threading.RLock()

    @property
    def events_path(self) -> Path:
        return self.root / "events.jsonl"


class ServiceState:
    def __init__(self, config: ServerConfig):
        self.config = config
        self.lock = threading.RLock()
        self.audits: dict[str, AuditRecord] = {}
        self.config.data_dir.mkdir(parents=True, exist_ok=True)
        self.catalog_path = self.config.data_dir / "catalog.json"
        if self.catalog_path.exists():
            self.catalog = load_catalog(self.catalog_path.read_bytes())
        else:
            self.catalog = default_catalog()
            self.catalog_path.write_bytes(serialize_catalog(self.catalog))
        audits_dir = self.config.data_dir / "audits"
        audits_dir.mkdir(exist_ok=True)
        for audit_dir in sorted(audits_dir.iterdir()):
            if not audit_dir.is_dir():
                continue
            events = _read_events(audit_dir / "events.jsonl")
            if not events:
                continue
            workflow = replay(events)
            store = StatementStore.recover(
                str(audit_dir / "statements.jsonl"), max_batch=self.config.max_batch
            )
            self.audits[workflow.audit_id] = AuditRecord(audit_dir, workflow, store)

    def put_catalog(self, catalog: Catalog) -> None:
        data = serialize_catalog(catalog)
        tmp = self.catalog_path.with_suffix(".tmp")
        tmp.write_bytes(data)
        tmp.replace(self.catalog_path)
        self.catalog = catalog

    def create_audit(self, audit_id: str, workflow: AuditWorkflow, event: dict) -> AuditRecord:
        root = self.config.data_dir / "audits" / audit_id
        root.mkdir(parents=True, exist_ok=False)
        store = StatementStore(
            path=str(root / "statements.jsonl"), max_batch=self.config.max_batch
        )
        record = AuditRecord(root, workflow, store)
        _append_event(record.events_path, event)
        self.audits[audit_id] = record
        return record

    def audit(self, audit_id: str) -> AuditRecord:
        record = self.audits.get(audit_id)
        if record is None:
            raise UnknownAudit(f"no audit {audit_id!r}")
        return record


# -- app factory ---------------------------------------------------------------


def create_app(config: ServerConfig) -> FastAPI:
    app = FastAPI(title="auditbox", version=__version__, docs_url=None, redoc_url=None)
    state = ServiceState(config)
    app.state.service = state

    def principal_of(authorization: Optional[str] = Header(default=None)) -> ApiPrincipal:
        if not authorization or not authorization.startswith("Bearer "):
            raise PermissionDenied("missing bearer token", unauthenticated=True)
        principal = config.tokens.get(authorization[len("Bearer ") :])
        if principal is None:
            raise PermissionDenied("unknown bearer token", unauthenticated=True)
        return principal

    @app.exception_handler(AuditboxError)
    def on_domain_error(request: Request, exc: AuditboxError):
        status = ERROR_STATUS.get(exc.code, 400)
        if isinstance(exc, PermissionDenied) and exc.details.get("unauthenticated"):
            status = 401
        return JSONResponse(status_code=status, content={"error": exc.to_dict()})

    def read_body(request_body: bytes) -> dict:
        if not request_body:
            return {}
        try:
            body = json.loads(request_body)
        except ValueError as exc:
            raise ParseError(f"request body is not valid JSON: {exc}")
        if not isinstance(body, dict):
            raise ParseError("request body must be a JSON object")
        return body

    async def body_of(request: Request) -> dict:
        return read_body(await request.body())

    # -- meta -------------------------------------------------------------

    @app.get("/api/v1/healthz")
    def healthz():
        return {
            "status": "ok",
            "version": __version__,
            "catalog": {"catalog_id": state.catalog.catalog_id, "version": state.catalog.version},
            "audits": len(state.audits),
        }

    @app.get("/api/v1/catalog")
    def get_catalog(principal: ApiPrincipal = Depends(principal_of)):
        principal.require("query")
        return Response(content=serialize_catalog(state.catalog), media_type="application/json")

    @app.put("/api/v1/catalog")
    async def put_catalog(request: Request, principal: ApiPrincipal = Depends(principal_of)):
        principal.require("admin")
        catalog = load_catalog(await request.body())
        with state.lock:
            state.put_catalog(catalog)
        return {
            "catalog": {"catalog_id": catalog.catalog_id, "version": catalog.version},
            "warnings": lint_catalog(catalog),
        }

    # -- audit lifecycle ----------------------------------------------------

    @app.get("/api/v1/audits")
    def list_audits(principal: ApiPrincipal = Depends(principal_of)):
        principal.require("query")
        out = []
        with state.lock:
            for audit_id, record in sorted(state.audits.items()):
                workflow = record.workflow
                out.append(
                    {
                        "audit_id": audit_id,
                        "state": workflow.state,
                        "goal": workflow.goal.value if workflow.goal else None,
                        "system_id": workflow.system.system_id if workflow.system else None,
                    }
                )
        return {"audits": out}

    @app.post("/api/v1/audits", status_code=201)
    async def post_audit(request: Request, principal: ApiPrincipal = Depends(principal_of)):
        principal.require("scope_audit")
        body = await body_of(request)
        for name in ("system", "goal"):
            if name not in body:
                raise MissingField(f"audit creation needs field {name!r}")
        audit_id = body.get("audit_id") or f"audit-{uuid.uuid4().hex[:12]}"
        if not isinstance(audit_id, str) or not audit_id.replace("-", "").replace("_", "").isalnum():
            raise ParseError(f"audit_id must be a simple identifier, got {audit_id!r}")
        system = system_from_dict(body["system"])
        goal = parse_goal(body["goal"])
        with state.lock:
            if audit_id in state.audits:
                raise IllegalState(f"audit {audit_id!r} already exists", audit_id=audit_id)
            workflow, event = create_workflow(
                audit_id, system, goal, state.catalog, principal.identity, now_ms()
            )
            state.create_audit(audit_id, workflow, event)
        return {"audit": workflow.to_dict()}

    @app.get("/api/v1/audits/{audit_id}")
    def get_audit(audit_id: str, principal: ApiPrincipal = Depends(principal_of)):
        principal.require("query")
        record = state.audit(audit_id)
        with record.lock:
            out = record.workflow.to_dict()
            out["store_sequence_high_watermark"] = record.store.watermark
        return {"audit": out}

    @app.get("/api/v1/audits/{audit_id}/events")
    def get_events(audit_id: str, principal: ApiPrincipal = Depends(principal_of)):
        principal.require("query")
        record = state.audit(audit_id)
        with record.lock:
            return {"events": _read_events(record.events_path)}

    @app.get("/api/v1/audits/{audit_id}/recommendations")
    def get_recommendations(audit_id: str, principal: ApiPrincipal = Depends(principal_of)):
        principal.require("query")
        record = state.audit(audit_id)
        with record.lock:
            recs = recommend_questions(record.workflow.system, record.workflow.goal, state.catalog)
        return {"recommendations": [r.to_dict() for r in recs]}

    @app.post("/api/v1/audits/{audit_id}/selection")
    async def post_selection(
        audit_id: str, request: Request, principal: ApiPrincipal = Depends(principal_of)
    ):
        principal.require("scope_audit")
        body = await body_of(request)
        question_ids = body.get("question_ids")
        if not isinstance(question_ids, list):
            raise MissingField("selection needs a question_ids list")
        record = state.audit(audit_id)
        with record.lock:
            event = select_questions(
                record.workflow, question_ids, state.catalog, principal.identity.id, now_ms()
            )
            _append_event(record.events_path, event)
            return {"audit": record.workflow.to_dict()}

    @app.post("/api/v1/audits/{audit_id}/bindings")
    async def post_binding(
        audit_id: str, request: Request, principal: ApiPrincipal = Depends(principal_of)
    ):
        principal.require("register_binding")
        body = await body_of(request)
        binding = CollectorBinding.from_dict(body.get("binding", body))
        record = state.audit(audit_id)
        with record.lock:
            event = register_binding(record.workflow, binding, principal.identity.id, now_ms())
            _append_event(record.events_path, event)
            return {"audit": record.workflow.to_dict()}

    @app.get("/api/v1/audits/{audit_id}/coverage")
    def get_coverage(audit_id: str, principal: ApiPrincipal = Depends(principal_of)):
        principal.require("query")
        record = state.audit(audit_id)
        with record.lock:
            return {"coverage": check_coverage(record.workflow, state.catalog).to_dict()}

    @app.post("/api/v1/audits/{audit_id}/state")
    async def post_state(
        audit_id: str, request: Request, principal: ApiPrincipal = Depends(principal_of)
    ):
        principal.require("scope_audit")
        body = await body_of(request)
        target = body.get("target")
        if not target:
            raise MissingField("state change needs a target")
        record = state.audit(audit_id)
        with record.lock:
            event = transition(
                record.workflow,
                target,
                principal.identity.id,
                now_ms(),
                catalog=state.catalog,
                override=bool(body.get("override", False)),
                selection=body.get("question_ids"),
            )
            _append_event(record.events_path, event)
            return {"audit": record.workflow.to_dict()}

    # -- artefacts ----------------------------------------------------------

    @app.post("/api/v1/audits/{audit_id}/artefacts:batch")
    async def post_artefacts(
        audit_id: str,
        request: Request,
        principal: ApiPrincipal = Depends(principal_of),
        idempotency_key: Optional[str] = Header(default=None, alias="Idempotency-Key"),
    ):
        principal.require("ingest")
        if not idempotency_key:
            raise MissingField("ingest requires an Idempotency-Key header")
        body = await body_of(request)
        record = state.audit(audit_id)
        with record.lock:
            if record.workflow.state != "collecting":
                raise WorkflowNotCollecting(
                    f"audit {audit_id!r} is {record.workflow.state}, not collecting",
                    state=record.workflow.state,
                )
            if "statements" in body:
                if "records" in body or "mapping" in body:
                    raise ParseError("pass either statements or mapping+records, not both")
                drafts = body["statements"]
                if not isinstance(drafts, list):
                    raise ParseError("statements must be a list")
                rejected: list[tuple[int, str]] = []
            else:
                records = body.get("records")
                if not isinstance(records, list):
                    raise MissingField("ingest needs statements or mapping+records")
                if "mapping" not in body:
                    raise MissingField("record ingest needs an inline mapping spec")
                if len(records) > config.max_batch:
                    raise BatchTooLarge(
                        f"{len(records)} records exceed the batch limit {config.max_batch}",
                        limit=config.max_batch,
                    )
                spec = parse_mapping_spec(body["mapping"])
                drafts, rejected = apply_mapping_batch(records, spec, body.get("context") or {})
            receipt = record.store.ingest(IngestBatch(idempotency_key, drafts, rejected))
            return {"receipt": receipt.to_dict()}

    # -- analytics ------------------------------------------------------------

    @app.post("/api/v1/audits/{audit_id}/queries")
    async def post_query(
        audit_id: str, request: Request, principal: ApiPrincipal = Depends(principal_of)
    ):
        principal.require("query")
        body = await body_of(request)
        if "query" not in body:
            raise MissingField("query request needs a query document")
        ast = parse_query_ast(body["query"])
        record = state.audit(audit_id)
        with record.lock:
            as_of = body.get("as_of")
            if as_of is None:
                as_of = record.store.watermark
            rows = evaluate(ast, record.store, as_of)
        return {"rows": rows, "store_sequence_high_watermark": as_of}

    @app.post("/api/v1/audits/{audit_id}/answers")
    async def post_answer(
        audit_id: str, request: Request, principal: ApiPrincipal = Depends(principal_of)
    ):
        principal.require("query")
        body = await body_of(request)
        question_id = body.get("question_id")
        if not question_id:
            raise MissingField("answer request needs a question_id")
        record = state.audit(audit_id)
        with record.lock:
            answer = answer_question(
                record.workflow,
                question_id,
                body.get("params") or {},
                record.store,
                state.catalog,
                as_of=body.get("as_of"),
            )
        return {"answer": answer.to_dict()}

    @app.post("/api/v1/audits/{audit_id}/report")
    async def post_report(
        audit_id: str, request: Request, principal: ApiPrincipal = Depends(principal_of)
    ):
        principal.require("report")
        body = await body_of(request)
        record = state.audit(audit_id)
        with record.lock:
            report = generate_report(
                record.workflow,
                record.store,
                state.catalog,
                params_per_question=body.get("params") or {},
                actor=principal.identity.id,
                at_ms=now_ms(),
                as_of=body.get("as_of"),
                on_event=lambda event: _append_event(record.events_path, event),
            )
        return {"report": report}

    return app


def run(config_path: str, host: str = "127.0.0.1", port: int = 8640) -> None:
    import uvicorn

    doc = json.loads(Path(config_path).read_text(encoding="utf-8"))
    app = create_app(load_server_config(doc))
    uvicorn.run(app, host=host, port=port, log_level="warning")
