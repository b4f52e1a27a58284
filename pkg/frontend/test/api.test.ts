import { describe, expect, it } from "vitest";

import { ApiClient, ApiError, makeIdempotencyKey } from "../src/api.js";
import type { HttpRequest } from "../src/api.js";
import { FakeHttp, fixture } from "./helpers.js";

describe("error envelopes", () => {
  it("turns structured errors into ApiError with the server's code", async () => {
    const fake = new FakeHttp().on("GET", "/api/v1/audits/nope", fixture("unknown_audit"));
    const client = new ApiClient("", "tok-ops", fake.handler());

    const err = await client.getAudit("nope").catch((e) => e);
    expect(err).toBeInstanceOf(ApiError);
    expect(err.status).toBe(404);
    expect(err.code).toBe(fixture("unknown_audit").response.body.error.code);
  });

  it("carries 401 and 403 through unchanged", async () => {
    const fake = new FakeHttp()
      .on("GET", "/api/v1/audits/dash-a1", fixture("unauthorized"))
      .on("POST", "/api/v1/audits/dash-a1/state", fixture("forbidden"));
    const client = new ApiClient("", "bogus", fake.handler());

    const unauthorized = await client.getAudit("dash-a1").catch((e) => e);
    expect(unauthorized.status).toBe(401);

    const forbidden = await client.changeState("dash-a1", "closed").catch((e) => e);
    expect(forbidden.status).toBe(403);
    expect(forbidden.code).toBe(fixture("forbidden").response.body.error.code);
  });

  it("sends the bearer token on every call", async () => {
    const fake = new FakeHttp().on("GET", "/api/v1/audits/dash-a1", fixture("audit_draft"));
    await new ApiClient("", "tok-ops", fake.handler()).getAudit("dash-a1");
    expect(fake.requests[0].headers.authorization).toBe("Bearer tok-ops");
  });
});

describe("mutation serialization", () => {
  it("runs mutations on one audit strictly in sequence", async () => {
    const order: string[] = [];
    let releaseFirst: () => void = () => {};
    const gate = new Promise<void>((resolve) => {
      releaseFirst = resolve;
    });

    const http = async (req: HttpRequest) => {
      order.push(`start ${req.url}`);
      if (order.length === 1) await gate;
      order.push(`end ${req.url}`);
      return { status: 200, body: { audit: fixture("audit_draft").response.body.audit } };
    };
    const client = new ApiClient("", "tok-ops", http);

    const first = client.changeState("dash-a1", "collecting");
    const second = client.submitSelection("dash-a1", ["uc1-q1"]);
    await new Promise((r) => setTimeout(r, 5));
    expect(order).toEqual(["start /api/v1/audits/dash-a1/state"]);

    releaseFirst();
    await Promise.all([first, second]);
    expect(order).toEqual([
      "start /api/v1/audits/dash-a1/state",
      "end /api/v1/audits/dash-a1/state",
      "start /api/v1/audits/dash-a1/selection",
      "end /api/v1/audits/dash-a1/selection",
    ]);
  });

  it("keeps serializing after a failed mutation", async () => {
    const fake = new FakeHttp()
      .on("POST", "/api/v1/audits/dash-a1/state", fixture("state_illegal"), fixture("start_collecting"))
      .on("POST", "/api/v1/audits/dash-a1/selection", fixture("selection_accepted"));
    const client = new ApiClient("", "tok-ops", fake.handler());

    await expect(client.changeState("dash-a1", "collecting")).rejects.toBeInstanceOf(ApiError);
    const audit = await client.submitSelection("dash-a1", ["uc1-q1"]);
    expect(audit.state).toBe("scoped");
  });
});

describe("idempotency keys", () => {
  it("reuses one key across retries of the same intent", async () => {
    const fake = new FakeHttp().on(
      "POST",
      "/api/v1/audits/dash-a1/artefacts:batch",
      fixture("ingest_batch"),
    );
    const client = new ApiClient("", "tok-ops", fake.handler());

    const key = makeIdempotencyKey();
    await client.ingestBatch("dash-a1", { statements: [] }, key);
    await client.ingestBatch("dash-a1", { statements: [] }, key);

    const sent = fake.sent("POST", "/api/v1/audits/dash-a1/artefacts:batch");
    expect(sent).toHaveLength(2);
    expect(sent[0].headers["idempotency-key"]).toBe(key);
    expect(sent[1].headers["idempotency-key"]).toBe(key);
  });

  it("distinct intents get distinct keys", () => {
    expect(makeIdempotencyKey()).not.toBe(makeIdempotencyKey());
  });
});
