import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import {
  consoleAvailable,
  initConsole,
  paramNames,
  resultModel,
  runCustom,
  runPredefined,
} from "../src/console.js";
import { validateQuery } from "../src/validate.js";
import { FakeHttp, fixture } from "./helpers.js";

const QUERIES = "/api/v1/audits/dash-a1/queries";
const ANSWERS = "/api/v1/audits/dash-a1/answers";

function client(fake: FakeHttp): ApiClient {
  return new ApiClient("", "tok-ops", fake.handler());
}

describe("structural validation", () => {
  it("accepts every query the service accepted", () => {
    for (const name of ["query_timeseries", "query_type_mismatch"]) {
      expect(validateQuery(fixture(name).request.body.query)).toEqual([]);
    }
  });

  it("flags the exact document the service rejected", () => {
    const doc = fixture("query_invalid").request.body.query;
    const issues = validateQuery(doc);
    expect(issues.length).toBeGreaterThan(0);
    expect(issues[0].path).toBe("match[0]");
    expect(issues[0].message).toMatch(/no constrained field/);
  });

  it.each([
    [{ aggregate: { op: "COUNT" } }, "match"],
    [{ match: [{ predicate: "a:b" }], aggregate: { op: "TOTAL" } }, "aggregate.op"],
    [{ match: [{ predicate: "a:b" }], aggregate: { op: "AVG" } }, "aggregate"],
    [{ match: [{ predicate: "a:b" }], aggregate: { op: "EXISTS", over: "?v" } }, "aggregate.over"],
    [{ match: [{ predicate: "a:b" }], aggregate: { op: "AVG", over: "?v" } }, "aggregate.over"],
    [
      { match: [{ predicate: "a:b", object: "?v" }], aggregate: { op: "COUNT" }, group_by: ["?v", "?v"] },
      "group_by[1]",
    ],
    [
      {
        match: [{ predicate: "a:b" }, { predicate: "c:d" }],
        aggregate: { op: "COUNT" },
        group_by: ["subject"],
      },
      "group_by[0]",
    ],
    [
      {
        match: [{ predicate: "a:b" }],
        aggregate: { op: "COUNT" },
        filters: [{ lhs: "subject", op: "=", rhs: { bad: true } }],
      },
      "filters[0].rhs",
    ],
    [
      { match: [{ predicate: "a:b" }], aggregate: { op: "COUNT" }, time_bucket: "soon" },
      "time_bucket",
    ],
    [
      { match: [{ predicate: "a:b" }], aggregate: { op: "COUNT" }, order_by: [{ key: "?x" }] },
      "order_by[0].key",
    ],
    [{ match: [{ predicate: "a:b" }], aggregate: { op: "COUNT" }, limit: 0 }, "limit"],
    [{ match: [{ predicate: "a:b", object: "?v" }], aggregate: { op: "COUNT" }, extra: 1 }, "extra"],
  ])("rejects structurally bad documents (%#)", (doc, path) => {
    const issues = validateQuery(doc);
    expect(issues.map((i) => i.path)).toContain(path);
  });

  it("blocks invalid custom queries before they reach the wire", async () => {
    const fake = new FakeHttp();
    const state = initConsole("dash-a1");
    const entry = await runCustom(client(fake), state, fixture("query_invalid").request.body.query);

    expect(entry.issues.length).toBeGreaterThan(0);
    expect(entry.rows).toBeNull();
    expect(fake.requests).toHaveLength(0);
    expect(state.history).toHaveLength(1);
  });
});

describe("running queries", () => {
  it("returns recorded rows with their watermark", async () => {
    const fake = new FakeHttp().on("POST", QUERIES, fixture("query_timeseries"));
    const state = initConsole("dash-a1");
    const doc = fixture("query_timeseries").request.body.query;

    const entry = await runCustom(client(fake), state, doc);
    expect(entry.issues).toEqual([]);
    expect(entry.rows).toEqual(fixture("query_timeseries").response.body.rows);
    expect(entry.watermark).toBe(
      fixture("query_timeseries").response.body.store_sequence_high_watermark,
    );
  });

  it("reruns at the same watermark identically", async () => {
    const fake = new FakeHttp().on("POST", QUERIES, fixture("query_timeseries"));
    const state = initConsole("dash-a1");
    const doc = fixture("query_timeseries").request.body.query;

    const first = await runCustom(client(fake), state, doc);
    const second = await runCustom(client(fake), state, doc);
    expect(second.rows).toEqual(first.rows);
    expect(second.watermark).toBe(first.watermark);
  });

  it("surfaces a server-side type mismatch on the history entry", async () => {
    const fake = new FakeHttp().on("POST", QUERIES, fixture("query_type_mismatch"));
    const state = initConsole("dash-a1");
    const entry = await runCustom(
      client(fake),
      state,
      fixture("query_type_mismatch").request.body.query,
    );

    expect(entry.issues).toEqual([]);
    expect(entry.error).not.toBeNull();
    expect(entry.error!.code).toBe("type_mismatch");
    expect(entry.rows).toBeNull();
  });

  it("predefined questions come back with verdicts", async () => {
    const fake = new FakeHttp().on(
      "POST",
      ANSWERS,
      fixture("answer_pass"),
      fixture("answer_no_data"),
    );
    const state = initConsole("dash-a1");
    const api = client(fake);

    const passing = await runPredefined(
      api,
      state,
      "uc1-q2",
      fixture("answer_pass").request.body.params,
    );
    expect(passing.verdict).toBe("pass");
    expect(passing.rows).toEqual(fixture("answer_pass").response.body.answer.rows);

    const missing = await runPredefined(api, state, "uc1-q2", { run: "run-9999" });
    expect(missing.verdict).toBe("no_data");
  });

  it("is only offered while the audit can answer", () => {
    expect(consoleAvailable("collecting")).toBe(true);
    expect(consoleAvailable("reporting")).toBe(true);
    for (const state of ["draft", "scoped", "setup", "closed"]) {
      expect(consoleAvailable(state)).toBe(false);
    }
  });
});

describe("template parameters", () => {
  it("finds the parameter slots of the run-success template", () => {
    const catalog = fixture("catalog").response.body;
    const question = catalog.questions.find((q: any) => q.question_id === "uc1-q2");
    const template = catalog.templates.find(
      (t: any) => t.template_id === question.template_id,
    );
    expect(paramNames(template.ast)).toEqual(["run"]);
  });

  it("parameter-free templates need no form", () => {
    const catalog = fixture("catalog").response.body;
    const question = catalog.questions.find((q: any) => q.question_id === "uc1-q1");
    const template = catalog.templates.find(
      (t: any) => t.template_id === question.template_id,
    );
    expect(paramNames(template.ast)).toEqual([]);
  });
});

describe("result presentation", () => {
  it("bucketed numeric rows become a line chart", () => {
    const body = fixture("query_timeseries").response.body;
    const model = resultModel(body.rows, body.store_sequence_high_watermark);
    expect(model.kind).toBe("chart");
    if (model.kind !== "chart") return;
    expect(model.series.map((s) => s.label).length).toBeGreaterThan(1);
    for (const series of model.series) {
      const buckets = series.points.map((p) => p.bucket);
      expect([...buckets].sort()).toEqual(buckets);
    }
  });

  it("set answers become member tables", () => {
    const rows = [{ group: { "?study": "study:s1" }, value: ["libA", "libB"] }];
    const model = resultModel(rows, 7);
    expect(model.kind).toBe("set-table");
    if (model.kind !== "set-table") return;
    expect(model.groups[0].members).toEqual(["libA", "libB"]);
  });

  it("scalar answers become plain tables", () => {
    const body = fixture("answer_pass").response.body.answer;
    const model = resultModel(body.rows, body.store_sequence_high_watermark);
    expect(model.kind).toBe("table");
    if (model.kind !== "table") return;
    expect(model.columns).toContain("value");
    expect(model.watermark).toBe(body.store_sequence_high_watermark);
  });
});
