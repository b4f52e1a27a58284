/** Coverage panel: which selected questions have collectors behind them.
 *
 * The panel re-renders whatever GET /coverage returned; covered flags,
 * missing patterns, and the overall ratio are never recomputed locally.
 */

import { ApiClient, TransportError } from "./api.js";
import type { CoverageDoc, PatternDoc } from "./types.js";

export const POLL_INTERVAL_MS = 5000;

export interface CoverageRow {
  questionId: string;
  covered: boolean;
  missingPatterns: PatternDoc[];
}

export interface CoveragePanel {
  auditId: string;
  workflowState: string;
  coverage: CoverageDoc | null;
  overrideChecked: boolean;
  fetchError: string | null;
  starting: boolean;
}

export function initPanel(auditId: string, workflowState: string): CoveragePanel {
  return {
    auditId,
    workflowState,
    coverage: null,
    overrideChecked: false,
    fetchError: null,
    starting: false,
  };
}

export function coverageRows(panel: CoveragePanel): CoverageRow[] {
  if (!panel.coverage) return [];
  return Object.keys(panel.coverage.per_question)
    .sort()
    .map((questionId) => {
      const entry = panel.coverage!.per_question[questionId];
      return {
        questionId,
        covered: entry.covered,
        missingPatterns: entry.missing_patterns,
      };
    });
}

/** Start is allowed only at full coverage, unless the auditor overrides. */
export function canStart(overallRatio: number | null, overrideChecked: boolean): boolean {
  if (overrideChecked) return true;
  return overallRatio === 1.0;
}

export function startEnabled(panel: CoveragePanel): boolean {
  if (panel.starting || panel.workflowState !== "setup") return false;
  return canStart(panel.coverage ? panel.coverage.overall_ratio : null, panel.overrideChecked);
}

/** Poll cadence; only the setup state is worth watching. */
export function pollDelayMs(workflowState: string): number | null {
  return workflowState === "setup" ? POLL_INTERVAL_MS : null;
}

export function startRequestBody(panel: CoveragePanel): Record<string, unknown> {
  const body: Record<string, unknown> = { target: "collecting" };
  if (panel.overrideChecked) body.override = true;
  return body;
}

/** Refresh from the server; network trouble is shown, not fatal. */
export async function refreshCoverage(
  client: ApiClient,
  panel: CoveragePanel,
): Promise<CoveragePanel> {
  try {
    const coverage = await client.getCoverage(panel.auditId);
    return { ...panel, coverage, fetchError: null };
  } catch (exc) {
    if (exc instanceof TransportError) {
      return { ...panel, fetchError: `coverage refresh failed: ${exc.message}` };
    }
    throw exc;
  }
}

export async function startCollecting(
  client: ApiClient,
  panel: CoveragePanel,
): Promise<CoveragePanel> {
  if (!startEnabled(panel)) return panel;
  panel.starting = true;
  try {
    const audit = await client.changeState(panel.auditId, "collecting", panel.overrideChecked);
    return { ...panel, workflowState: audit.state, starting: false };
  } catch (exc) {
    const message = exc instanceof Error ? exc.message : String(exc);
    return { ...panel, starting: false, fetchError: message };
  }
}
