import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api.js";
import {
  canStart,
  coverageRows,
  initPanel,
  pollDelayMs,
  refreshCoverage,
  startCollecting,
  startEnabled,
  startRequestBody,
} from "../src/coverage.js";
import { FakeHttp, fixture } from "./helpers.js";

function client(fake: FakeHttp): ApiClient {
  return new ApiClient("", "tok-ops", fake.handler());
}

describe("start gating", () => {
  it("enables start only at full coverage or with an explicit override", () => {
    expect(canStart(1.0, false)).toBe(true);
    expect(canStart(0.0, false)).toBe(false);
    expect(canStart(0.5, false)).toBe(false);
    expect(canStart(0.9999999, false)).toBe(false);
    expect(canStart(null, false)).toBe(false);
    expect(canStart(0.5, true)).toBe(true);
    expect(canStart(null, true)).toBe(true);
  });

  it("start button follows the recorded coverage ratio", () => {
    const panel = initPanel("dash-a1", "setup");
    panel.coverage = fixture("coverage_partial").response.body.coverage;
    expect(startEnabled(panel)).toBe(false);

    panel.coverage = fixture("coverage_full").response.body.coverage;
    expect(startEnabled(panel)).toBe(true);

    panel.workflowState = "collecting";
    expect(startEnabled(panel)).toBe(false);
  });

  it("override checked at partial coverage carries override=true", async () => {
    const fake = new FakeHttp().on(
      "POST",
      "/api/v1/audits/dash-a2/state",
      fixture("start_override"),
    );
    const panel = initPanel("dash-a2", "setup");
    panel.coverage = fixture("coverage_a2_partial").response.body.coverage;
    panel.overrideChecked = true;

    expect(startRequestBody(panel)).toEqual({ target: "collecting", override: true });
    const after = await startCollecting(client(fake), panel);

    const posted = fake.sent("POST", "/api/v1/audits/dash-a2/state");
    expect(posted).toHaveLength(1);
    expect(posted[0].body).toEqual(fixture("start_override").request.body);
    expect(after.workflowState).toBe("collecting");
  });

  it("a clean start at full coverage sends no override flag", async () => {
    const fake = new FakeHttp().on(
      "POST",
      "/api/v1/audits/dash-a1/state",
      fixture("start_collecting"),
    );
    const panel = initPanel("dash-a1", "setup");
    panel.coverage = fixture("coverage_full").response.body.coverage;

    await startCollecting(client(fake), panel);
    expect(fake.sent("POST", "/api/v1/audits/dash-a1/state")[0].body).toEqual({
      target: "collecting",
    });
  });
});

describe("panel rendering data", () => {
  it("lists each missing pattern under its question", () => {
    const panel = initPanel("dash-a1", "setup");
    panel.coverage = fixture("coverage_partial").response.body.coverage;
    const rows = coverageRows(panel);
    const recorded = fixture("coverage_partial").response.body.coverage.per_question;

    expect(rows.map((r) => r.questionId)).toEqual(Object.keys(recorded).sort());
    for (const row of rows) {
      expect(row.covered).toBe(recorded[row.questionId].covered);
      expect(row.missingPatterns).toEqual(recorded[row.questionId].missing_patterns);
    }
  });

  it("polls every 5 seconds only while in setup", () => {
    expect(pollDelayMs("setup")).toBe(5000);
    for (const state of ["draft", "scoped", "collecting", "reporting", "closed"]) {
      expect(pollDelayMs(state)).toBeNull();
    }
  });
});

describe("refresh resilience", () => {
  it("keeps the last coverage and surfaces a retryable error", async () => {
    const fake = new FakeHttp().on(
      "GET",
      "/api/v1/audits/dash-a1/coverage",
      "transport-error",
      fixture("coverage_full"),
    );
    let panel = initPanel("dash-a1", "setup");
    panel.coverage = fixture("coverage_partial").response.body.coverage;

    panel = await refreshCoverage(client(fake), panel);
    expect(panel.fetchError).toMatch(/coverage refresh failed/);
    expect(panel.coverage).toEqual(fixture("coverage_partial").response.body.coverage);

    panel = await refreshCoverage(client(fake), panel);
    expect(panel.fetchError).toBeNull();
    expect(panel.coverage).toEqual(fixture("coverage_full").response.body.coverage);
  });
});
