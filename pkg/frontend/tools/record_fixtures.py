#!/usr/bin/env python3
"""Record API fixtures for the dashboard contract tests.

Drives the audit service in-process through a full uc1 lifecycle plus the
error paths the dashboard must handle, capturing each request/response
pair verbatim into test/fixtures/fixtures.json. Rerun after changing the
service; the dashboard tests replay these exchanges.
"""

import json
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from auditbox.catalog import default_catalog, resolve_template
from auditbox.server import create_app, load_server_config
from auditbox.simulate import SimulatorConfig, batch_records, load_manifest, simulate

HERE = Path(__file__).resolve().parent
OUT = HERE.parent / "test" / "fixtures" / "fixtures.json"

OPS = {"Authorization": "Bearer tok-ops"}
AUDITOR = {"Authorization": "Bearer tok-auditor"}

fixtures: dict = {}


def record(client, name, method, path, *, body=None, headers=None, token_note=None):
    kwargs = {"headers": headers or OPS}
    if body is not None:
        kwargs["json"] = body
    response = client.request(method, path, **kwargs)
    request_doc = {"method": method, "path": path}
    if body is not None:
        request_doc["body"] = body
    if headers and "Idempotency-Key" in headers:
        request_doc["idempotency_key"] = headers["Idempotency-Key"]
    if token_note:
        request_doc["token"] = token_note
    fixtures[name] = {
        "request": request_doc,
        "response": {"status": response.status_code, "body": response.json()},
    }
    return response


def main():
    tmp = Path(tempfile.mkdtemp(prefix="fixture-rec-"))
    corpus = tmp / "corpus"
    simulate(SimulatorConfig(use_case="uc1", seed=11, n_runs=6), corpus)
    manifest = load_manifest(corpus)
    specs = {m["mapping_id"]: m for m in manifest["mappings"]}

    config = load_server_config(
        {
            "data_dir": str(tmp / "data"),
            "tokens": {
                "tok-ops": {
                    "id": "ops-1",
                    "display_name": "Ops",
                    "relationship": "internal",
                    "party": "first",
                    "permissions": [
                        "scope_audit",
                        "register_binding",
                        "ingest",
                        "query",
                        "report",
                    ],
                },
                "tok-auditor": {
                    "id": "aud-9",
                    "display_name": "External auditor",
                    "relationship": "external",
                    "party": "third",
                    "permissions": ["query", "report"],
                },
            },
        }
    )

    with TestClient(create_app(config), raise_server_exceptions=False) as client:
        record(client, "healthz", "GET", "/api/v1/healthz", headers={})
        record(client, "catalog", "GET", "/api/v1/catalog")

        record(
            client,
            "audit_created",
            "POST",
            "/api/v1/audits",
            body={"audit_id": "dash-a1", "system": manifest["system"], "goal": manifest["goal"]},
        )
        record(client, "audit_draft", "GET", "/api/v1/audits/dash-a1")
        record(client, "recommendations", "GET", "/api/v1/audits/dash-a1/recommendations")

        record(
            client,
            "selection_empty",
            "POST",
            "/api/v1/audits/dash-a1/selection",
            body={"question_ids": []},
        )
        record(
            client,
            "selection_accepted",
            "POST",
            "/api/v1/audits/dash-a1/selection",
            body={"question_ids": manifest["selected_questions"]},
        )

        record(
            client,
            "binding_first",
            "POST",
            "/api/v1/audits/dash-a1/bindings",
            body=manifest["bindings"][0],
        )
        record(client, "coverage_partial", "GET", "/api/v1/audits/dash-a1/coverage")
        for binding in manifest["bindings"][1:]:
            client.post("/api/v1/audits/dash-a1/bindings", json=binding, headers=OPS)
        record(client, "coverage_full", "GET", "/api/v1/audits/dash-a1/coverage")

        record(
            client,
            "start_collecting",
            "POST",
            "/api/v1/audits/dash-a1/state",
            body={"target": "collecting"},
        )
        record(
            client,
            "state_illegal",
            "POST",
            "/api/v1/audits/dash-a1/state",
            body={"target": "collecting"},
        )
        record(
            client,
            "selection_illegal",
            "POST",
            "/api/v1/audits/dash-a1/selection",
            body={"question_ids": manifest["selected_questions"]},
        )

        first = manifest["batches"][0]
        record(
            client,
            "ingest_batch",
            "POST",
            "/api/v1/audits/dash-a1/artefacts:batch",
            body={
                "mapping": specs[first["mapping_id"]],
                "records": batch_records(corpus, first),
                "context": first["context"],
            },
            headers={**OPS, "Idempotency-Key": first["batch_key"]},
        )
        for batch in manifest["batches"][1:]:
            client.post(
                "/api/v1/audits/dash-a1/artefacts:batch",
                json={
                    "mapping": specs[batch["mapping_id"]],
                    "records": batch_records(corpus, batch),
                    "context": batch["context"],
                },
                headers={**OPS, "Idempotency-Key": batch["batch_key"]},
            )

        record(client, "audit_collecting", "GET", "/api/v1/audits/dash-a1")

        catalog = default_catalog()
        timeseries_doc = resolve_template(catalog, "tmpl-avg-confidence").instantiate({})
        record(
            client,
            "query_timeseries",
            "POST",
            "/api/v1/audits/dash-a1/queries",
            body={"query": timeseries_doc},
        )
        record(
            client,
            "query_invalid",
            "POST",
            "/api/v1/audits/dash-a1/queries",
            body={"query": {"match": [{"subject": "?s"}], "aggregate": {"op": "COUNT"}}},
        )
        record(
            client,
            "query_type_mismatch",
            "POST",
            "/api/v1/audits/dash-a1/queries",
            body={
                "query": {
                    "match": [{"predicate": "audit:runStatus", "object": "?s"}],
                    "aggregate": {"op": "AVG", "over": "?s"},
                }
            },
        )

        truth = manifest["ground_truth"]["run_success"]
        passing = sorted(run for run, ok in truth.items() if ok)[0]
        record(
            client,
            "answer_pass",
            "POST",
            "/api/v1/audits/dash-a1/answers",
            body={"question_id": "uc1-q2", "params": {"run": passing}},
        )
        record(
            client,
            "answer_no_data",
            "POST",
            "/api/v1/audits/dash-a1/answers",
            body={"question_id": "uc1-q2", "params": {"run": "run-9999"}},
        )

        record(
            client,
            "report",
            "POST",
            "/api/v1/audits/dash-a1/report",
            body={"params": {"uc1-q2": {"run": passing}}},
        )

        # second audit: partial coverage released with an explicit override
        client.post(
            "/api/v1/audits",
            json={"audit_id": "dash-a2", "system": manifest["system"], "goal": manifest["goal"]},
            headers=OPS,
        )
        client.post(
            "/api/v1/audits/dash-a2/selection",
            json={"question_ids": manifest["selected_questions"]},
            headers=OPS,
        )
        client.post(
            "/api/v1/audits/dash-a2/bindings", json=manifest["bindings"][0], headers=OPS
        )
        record(client, "coverage_a2_partial", "GET", "/api/v1/audits/dash-a2/coverage")
        record(
            client,
            "start_override",
            "POST",
            "/api/v1/audits/dash-a2/state",
            body={"target": "collecting", "override": True},
        )

        record(client, "unknown_audit", "GET", "/api/v1/audits/nope")
        record(
            client,
            "unauthorized",
            "GET",
            "/api/v1/audits/dash-a1",
            headers={"Authorization": "Bearer bogus"},
            token_note="bogus",
        )
        record(
            client,
            "forbidden",
            "POST",
            "/api/v1/audits/dash-a1/state",
            body={"target": "closed"},
            headers=AUDITOR,
            token_note="tok-auditor",
        )

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(fixtures, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(f"wrote {len(fixtures)} fixtures to {OUT}")


if __name__ == "__main__":
    main()
