"""Command-line client for the audit service, plus local utilities.

Exit codes: 0 success, 1 the operation was refused or failed (domain
error), 2 usage or transport problems.
"""

from __future__ import annotations

import hashlib
import json
import sys
from pathlib import Path

import click
import httpx

from .catalog import lint_catalog, load_catalog
from .errors import AuditboxError
from .model import canonical_json
from .reporting import render_report_text
from .simulate import parse_simulator_config, simulate

DEFAULT_SERVER = "http://127.0.0.1:8640"


def fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def client_options(fn):
    fn = click.option(
        "--server",
        envvar="AUDITBOX_SERVER",
        default=DEFAULT_SERVER,
        show_default=True,
        help="Service base URL (env AUDITBOX_SERVER).",
    )(fn)
    fn = click.option(
        "--token",
        envvar="AUDITBOX_TOKEN",
        default=None,
        help="Bearer token (env AUDITBOX_TOKEN).",
    )(fn)
    fn = click.option(
        "--format",
        "output_format",
        type=click.Choice(["text", "json"]),
        default="text",
        show_default=True,
        help="Output rendering.",
    )(fn)
    return fn


def api(server: str, token: str, method: str, path: str, body=None, headers=None) -> dict:
    """One request; prints the error and exits nonzero on failure."""
    send_headers = dict(headers or {})
    if token:
        send_headers["Authorization"] = f"Bearer {token}"
    try:
        response = httpx.request(
            method, server.rstrip("/") + path, json=body, headers=send_headers, timeout=60.0
        )
    except httpx.HTTPError as exc:
        fail(f"cannot reach {server}: {exc}", 2)
    if response.status_code >= 400:
        try:
            err = response.json()["error"]
            fail(f"{err['code']}: {err['message']}", 1)
        except (ValueError, KeyError):
            fail(f"HTTP {response.status_code}: {response.text[:300]}", 1)
    return response.json()


def emit(data: dict, output_format: str, text: str) -> None:
    if output_format == "json":
        click.echo(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False))
    else:
        click.echo(text)


def read_json_file(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        fail(f"no such file: {path}", 2)
    except ValueError as exc:
        fail(f"{path} is not valid JSON: {exc}", 2)


@click.group()
def main():
    """Continuous audit service client."""


# -- audit ---------------------------------------------------------------------


@main.group()
def audit():
    """Audit lifecycle: create, scope, bind, start, stop."""


@audit.command("create")
@click.option("--system", "system_file", required=True, type=click.Path(), help="System description JSON file.")
@click.option("--goal", required=True, help="Audit goal.")
@click.option("--audit-id", default=None, help="Explicit audit id (otherwise generated).")
@client_options
def audit_create(system_file, goal, audit_id, server, token, output_format):
    body = {"system": read_json_file(system_file), "goal": goal}
    if audit_id:
        body["audit_id"] = audit_id
    data = api(server, token, "POST", "/api/v1/audits", body)
    a = data["audit"]
    emit(data, output_format, f"created audit {a['audit_id']} (state: {a['state']})")


@audit.command("recommend")
@click.option("--audit", "audit_id", required=True)
@client_options
def audit_recommend(audit_id, server, token, output_format):
    data = api(server, token, "GET", f"/api/v1/audits/{audit_id}/recommendations")
    lines = [
        f"{r['score']:.2f}  {r['question_id']}  {r['question']['text']}"
        for r in data["recommendations"]
    ]
    emit(data, output_format, "\n".join(lines) if lines else "no recommended questions")


@audit.command("scope")
@click.option("--audit", "audit_id", required=True)
@click.option("--questions", required=True, help="Comma-separated question ids.")
@client_options
def audit_scope(audit_id, questions, server, token, output_format):
    ids = [q.strip() for q in questions.split(",") if q.strip()]
    data = api(server, token, "POST", f"/api/v1/audits/{audit_id}/selection", {"question_ids": ids})
    a = data["audit"]
    emit(data, output_format, f"audit {audit_id} scoped to {len(ids)} question(s) (state: {a['state']})")


@audit.command("bind")
@click.option("--audit", "audit_id", required=True)
@click.option("--binding", "binding_file", required=True, type=click.Path(), help="Binding JSON file (one object or a list).")
@client_options
def audit_bind(audit_id, binding_file, server, token, output_format):
    doc = read_json_file(binding_file)
    bindings = doc if isinstance(doc, list) else [doc]
    data = {}
    for binding in bindings:
        data = api(server, token, "POST", f"/api/v1/audits/{audit_id}/bindings", binding)
    state = data.get("audit", {}).get("state", "?")
    emit(data, output_format, f"registered {len(bindings)} binding(s) (state: {state})")


@audit.command("coverage")
@click.option("--audit", "audit_id", required=True)
@client_options
def audit_coverage(audit_id, server, token, output_format):
    data = api(server, token, "GET", f"/api/v1/audits/{audit_id}/coverage")
    coverage = data["coverage"]
    lines = [f"overall: {coverage['overall_ratio']:.3f}"]
    for qid, entry in sorted(coverage["per_question"].items()):
        mark = "covered" if entry["covered"] else "MISSING"
        lines.append(f"  {qid}: {mark}")
        for pattern in entry["missing_patterns"]:
            lines.append(f"    needs {canonical_json(pattern)}")
    emit(data, output_format, "\n".join(lines))


def _state_change(audit_id, target, server, token, output_format, override=False):
    body = {"target": target}
    if override:
        body["override"] = True
    data = api(server, token, "POST", f"/api/v1/audits/{audit_id}/state", body)
    emit(data, output_format, f"audit {audit_id} is now {data['audit']['state']}")


@audit.command("start")
@click.option("--audit", "audit_id", required=True)
@click.option("--override", is_flag=True, help="Start despite incomplete coverage.")
@client_options
def audit_start(audit_id, override, server, token, output_format):
    """Move the audit into collecting."""
    _state_change(audit_id, "collecting", server, token, output_format, override)


@audit.command("stop")
@click.option("--audit", "audit_id", required=True)
@client_options
def audit_stop(audit_id, server, token, output_format):
    """Close the audit (must be in reporting)."""
    _state_change(audit_id, "closed", server, token, output_format)


@audit.command("show")
@click.option("--audit", "audit_id", required=True)
@client_options
def audit_show(audit_id, server, token, output_format):
    data = api(server, token, "GET", f"/api/v1/audits/{audit_id}")
    a = data["audit"]
    text = (
        f"audit {a['audit_id']}: state={a['state']} goal={a['goal']}\n"
        f"system: {a['system']['system_id']} ({len(a['system']['components'])} components)\n"
        f"bindings: {len(a['bindings'])}  watermark: {a['store_sequence_high_watermark']}"
    )
    emit(data, output_format, text)


# -- catalog -------------------------------------------------------------------


@main.group()
def catalog():
    """Audit knowledge catalogs."""


@catalog.command("load")
@click.option("--file", "catalog_file", required=True, type=click.Path())
@client_options
def catalog_load(catalog_file, server, token, output_format):
    """Validate a catalog file and install it on the server."""
    raw = Path(catalog_file).read_bytes() if Path(catalog_file).exists() else None
    if raw is None:
        fail(f"no such file: {catalog_file}", 2)
    try:
        load_catalog(raw)
    except AuditboxError as exc:
        fail(f"{exc.code}: {exc.message}", 1)
    send_headers = {"Content-Type": "application/json"}
    if token:
        send_headers["Authorization"] = f"Bearer {token}"
    try:
        response = httpx.put(
            server.rstrip("/") + "/api/v1/catalog", content=raw, headers=send_headers, timeout=60.0
        )
    except httpx.HTTPError as exc:
        fail(f"cannot reach {server}: {exc}", 2)
    if response.status_code >= 400:
        err = response.json().get("error", {})
        fail(f"{err.get('code', response.status_code)}: {err.get('message', '')}", 1)
    data = response.json()
    text = f"installed catalog {data['catalog']['catalog_id']} {data['catalog']['version']}"
    for warning in data.get("warnings", []):
        text += f"\nwarning: {warning}"
    emit(data, output_format, text)


@catalog.command("lint")
@click.option("--file", "catalog_file", required=True, type=click.Path())
@click.option("--format", "output_format", type=click.Choice(["text", "json"]), default="text")
def catalog_lint(catalog_file, output_format):
    """Validate a catalog file locally and print lint warnings."""
    path = Path(catalog_file)
    if not path.exists():
        fail(f"no such file: {catalog_file}", 2)
    try:
        cat = load_catalog(path.read_bytes())
    except AuditboxError as exc:
        fail(f"{exc.code}: {exc.message}", 1)
    warnings = lint_catalog(cat)
    data = {
        "catalog": {"catalog_id": cat.catalog_id, "version": cat.version},
        "questions": len(cat.questions),
        "warnings": warnings,
    }
    text = f"catalog {cat.catalog_id} {cat.version}: {len(cat.questions)} question(s), ok"
    for warning in warnings:
        text += f"\nwarning: {warning}"
    emit(data, output_format, text)


# -- ingest ---------------------------------------------------------------------


def _read_records(path: str, record_format: str) -> list:
    import csv
    import io

    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        fail(f"no such file: {path}", 2)
    if record_format == "jsonl":
        return [json.loads(line) for line in text.splitlines() if line]
    if record_format == "triples":
        return [line for line in text.splitlines() if line]
    return list(csv.DictReader(io.StringIO(text)))


@main.group()
def ingest():
    """Push runtime artefacts into an audit."""


@ingest.command("push")
@click.option("--audit", "audit_id", required=True)
@click.option("--mapping", "mapping_file", default=None, type=click.Path(), help="Mapping spec JSON (omit when pushing raw statements).")
@click.option("--records", "records_file", default=None, type=click.Path(), help="Source records file.")
@click.option("--records-format", type=click.Choice(["jsonl", "csv", "triples"]), default="jsonl", show_default=True)
@click.option("--statements", "statements_file", default=None, type=click.Path(), help="Statement drafts JSONL (alternative to mapping+records).")
@click.option("--context", "context_json", default=None, help="Batch context JSON ({run_id, component_id, recorded_at}).")
@click.option("--batch-key", default=None, help="Idempotency key (default: content hash).")
@client_options
def ingest_push(
    audit_id,
    mapping_file,
    records_file,
    records_format,
    statements_file,
    context_json,
    batch_key,
    server,
    token,
    output_format,
):
    if bool(statements_file) == bool(records_file):
        fail("pass exactly one of --statements or --mapping/--records", 2)
    if records_file and not mapping_file:
        fail("--records needs --mapping", 2)
    context = {}
    if context_json:
        try:
            context = json.loads(context_json)
        except ValueError as exc:
            fail(f"--context is not valid JSON: {exc}", 2)
    if statements_file:
        body = {"statements": _read_records(statements_file, "jsonl")}
    else:
        body = {
            "mapping": read_json_file(mapping_file),
            "records": _read_records(records_file, records_format),
            "context": context,
        }
    if not batch_key:
        batch_key = "cli-" + hashlib.sha256(canonical_json(body).encode("utf-8")).hexdigest()[:24]
    data = api(
        server,
        token,
        "POST",
        f"/api/v1/audits/{audit_id}/artefacts:batch",
        body,
        headers={"Idempotency-Key": batch_key},
    )
    receipt = data["receipt"]
    text = (
        f"batch {receipt['batch_key']}: accepted {receipt['accepted']}, "
        f"deduplicated {receipt['deduplicated']}, rejected {len(receipt['rejected'])}"
    )
    for entry in receipt["rejected"]:
        text += f"\n  [{entry['index']}] {entry['reason']}"
    emit(data, output_format, text)


# -- query / report --------------------------------------------------------------


@main.group()
def query():
    """Run analytic queries."""


@query.command("run")
@click.option("--audit", "audit_id", required=True)
@click.option("--query", "query_file", required=True, type=click.Path(), help="Query AST JSON file.")
@click.option("--as-of", type=int, default=None, help="Evaluate at a store sequence watermark.")
@client_options
def query_run(audit_id, query_file, as_of, server, token, output_format):
    body = {"query": read_json_file(query_file)}
    if as_of is not None:
        body["as_of"] = as_of
    data = api(server, token, "POST", f"/api/v1/audits/{audit_id}/queries", body)
    lines = [canonical_json(row) for row in data["rows"]]
    lines.append(f"({len(data['rows'])} row(s) at watermark {data['store_sequence_high_watermark']})")
    emit(data, output_format, "\n".join(lines))


@main.group()
def report():
    """Generate audit reports."""


@report.command("generate")
@click.option("--audit", "audit_id", required=True)
@click.option("--params", "params_file", default=None, type=click.Path(), help="Per-question params JSON file.")
@click.option("--as-of", type=int, default=None)
@click.option("--out", "out_file", default=None, type=click.Path(), help="Write the report JSON here.")
@client_options
def report_generate(audit_id, params_file, as_of, out_file, server, token, output_format):
    body = {}
    if params_file:
        body["params"] = read_json_file(params_file)
    if as_of is not None:
        body["as_of"] = as_of
    data = api(server, token, "POST", f"/api/v1/audits/{audit_id}/report", body)
    if out_file:
        Path(out_file).write_text(
            json.dumps(data["report"], indent=2, sort_keys=True, ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
    emit(data, output_format, render_report_text(data["report"]))


# -- sim / serve ------------------------------------------------------------------


@main.group()
def sim():
    """Deterministic trace generators."""


@sim.command("run")
@click.option("--use-case", type=click.Choice(["uc1", "uc2"]), required=True)
@click.option("--seed", type=int, required=True)
@click.option("--n-runs", type=int, required=True)
@click.option("--rate", "rates", multiple=True, help="Fault rate override, name=value (repeatable).")
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--format", "output_format", type=click.Choice(["text", "json"]), default="text")
def sim_run(use_case, seed, n_runs, rates, out_dir, output_format):
    """Generate a synthetic trace corpus with ground truth."""
    fault_rates = {}
    for item in rates:
        name, _, value = item.partition("=")
        if not value:
            fail(f"--rate needs name=value, got {item!r}", 2)
        try:
            fault_rates[name] = float(value)
        except ValueError:
            fail(f"--rate {name} value must be a number", 2)
    try:
        config = parse_simulator_config(
            {"use_case": use_case, "seed": seed, "n_runs": n_runs, "fault_rates": fault_rates}
        )
        manifest = simulate(config, out_dir)
    except AuditboxError as exc:
        fail(f"{exc.code}: {exc.message}", 1)
    text = (
        f"wrote {use_case} corpus to {out_dir}: {len(manifest['selected_questions'])} "
        f"question(s), goal {manifest['goal']}"
    )
    emit(manifest, output_format, text)


@main.command("serve")
@click.option("--config", "config_file", required=True, type=click.Path())
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8640, show_default=True)
def serve(config_file, host, port):
    """Run the audit service."""
    import uvicorn

    from .server import create_app, load_server_config

    try:
        app = create_app(load_server_config(read_json_file(config_file)))
    except AuditboxError as exc:
        fail(f"{exc.code}: {exc.message}", 1)
    uvicorn.run(app, host=host, port=port, log_level="info")


if __name__ == "__main__":
    main()
