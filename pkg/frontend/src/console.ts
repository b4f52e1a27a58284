/** Query console: predefined questions with parameter forms, plus a
 * structured editor for custom queries.
 *
 * Custom documents are validated structurally before they leave the
 * browser; anything semantic (type mismatches, unknown questions) comes
 * back from the server and is attached to the history entry.
 */

import { ApiClient, ApiError } from "./api.js";
import type { AnswerDoc, QueryDoc, ResultRow, Scalar } from "./types.js";
import { Issue, validateQuery } from "./validate.js";

const PARAM_RE = /\{([A-Za-z_][A-Za-z0-9_]*)\}/g;

/** Names of `{param}` slots in a template document, in first-seen order. */
export function paramNames(node: unknown): string[] {
  const found: string[] = [];
  const walk = (value: unknown): void => {
    if (typeof value === "string") {
      for (const match of value.matchAll(PARAM_RE)) {
        if (!found.includes(match[1])) found.push(match[1]);
      }
    } else if (Array.isArray(value)) {
      value.forEach(walk);
    } else if (typeof value === "object" && value !== null) {
      Object.values(value).forEach(walk);
    }
  };
  walk(node);
  return found;
}

export const ANSWERABLE_STATES = ["collecting", "reporting"];

export function consoleAvailable(workflowState: string): boolean {
  return ANSWERABLE_STATES.includes(workflowState);
}

export interface HistoryEntry {
  kind: "custom" | "predefined";
  label: string;
  query?: QueryDoc;
  questionId?: string;
  params?: Record<string, Scalar>;
  asOf?: number;
  rows: ResultRow[] | null;
  watermark: number | null;
  verdict: string | null;
  issues: Issue[];
  error: { code: string; message: string } | null;
}

export interface ConsoleState {
  auditId: string;
  history: HistoryEntry[];
}

export function initConsole(auditId: string): ConsoleState {
  return { auditId, history: [] };
}

/** Run a custom document; structurally invalid ones never reach the wire. */
export async function runCustom(
  client: ApiClient,
  state: ConsoleState,
  doc: QueryDoc,
  asOf?: number,
): Promise<HistoryEntry> {
  const entry: HistoryEntry = {
    kind: "custom",
    label: "custom query",
    query: doc,
    rows: null,
    watermark: null,
    verdict: null,
    issues: validateQuery(doc),
    error: null,
  };
  if (asOf !== undefined) entry.asOf = asOf;
  if (entry.issues.length === 0) {
    try {
      const result = await client.runQuery(state.auditId, doc, asOf);
      entry.rows = result.rows;
      entry.watermark = result.store_sequence_high_watermark;
    } catch (exc) {
      entry.error = describeError(exc);
    }
  }
  state.history.push(entry);
  return entry;
}

export async function runPredefined(
  client: ApiClient,
  state: ConsoleState,
  questionId: string,
  params: Record<string, Scalar>,
  asOf?: number,
): Promise<HistoryEntry> {
  const entry: HistoryEntry = {
    kind: "predefined",
    label: questionId,
    questionId,
    params,
    rows: null,
    watermark: null,
    verdict: null,
    issues: [],
    error: null,
  };
  if (asOf !== undefined) entry.asOf = asOf;
  try {
    const answer: AnswerDoc = await client.answerQuestion(state.auditId, questionId, params, asOf);
    entry.rows = answer.rows;
    entry.watermark = answer.store_sequence_high_watermark;
    entry.verdict = answer.verdict ?? null;
    entry.query = answer.query;
  } catch (exc) {
    entry.error = describeError(exc);
  }
  state.history.push(entry);
  return entry;
}

function describeError(exc: unknown): { code: string; message: string } {
  if (exc instanceof ApiError) {
    return { code: exc.code, message: exc.message };
  }
  return { code: "transport", message: exc instanceof Error ? exc.message : String(exc) };
}

// -- result presentation ----------------------------------------------------

export interface SeriesPoint {
  bucket: string;
  value: number;
}

export interface Series {
  label: string;
  points: SeriesPoint[];
}

export interface ChartModel {
  kind: "chart";
  watermark: number;
  series: Series[];
}

export interface TableModel {
  kind: "table";
  watermark: number;
  columns: string[];
  cells: Scalar[][];
}

export interface SetTableModel {
  kind: "set-table";
  watermark: number;
  groups: { label: string; members: Scalar[] }[];
}

export type ResultModel = ChartModel | TableModel | SetTableModel;

function groupLabel(group: Record<string, Scalar>, omit?: string): string {
  const parts = Object.keys(group)
    .filter((k) => k !== omit)
    .sort()
    .map((k) => `${k}=${String(group[k])}`);
  return parts.length ? parts.join(", ") : "all";
}

/** Choose a presentation for rows: bucketed numbers chart as lines, set
 * aggregates list their members, everything else is a plain table. Every
 * number shown comes straight out of the rows. */
export function resultModel(rows: ResultRow[], watermark: number): ResultModel {
  const bucketed =
    rows.length > 0 &&
    rows.every(
      (r) => r.group !== undefined && "bucket" in r.group && typeof r.value === "number",
    );
  if (bucketed) {
    const bySeries = new Map<string, SeriesPoint[]>();
    for (const row of rows) {
      const group = row.group as Record<string, Scalar>;
      const label = groupLabel(group, "bucket");
      const points = bySeries.get(label) ?? [];
      points.push({ bucket: String(group.bucket), value: row.value as number });
      bySeries.set(label, points);
    }
    const series = [...bySeries.entries()]
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([label, points]) => ({
        label,
        points: [...points].sort((a, b) => (a.bucket < b.bucket ? -1 : 1)),
      }));
    return { kind: "chart", watermark, series };
  }

  if (rows.some((r) => Array.isArray(r.value))) {
    return {
      kind: "set-table",
      watermark,
      groups: rows.map((row) => ({
        label: row.group ? groupLabel(row.group) : "all",
        members: Array.isArray(row.value) ? row.value : [row.value],
      })),
    };
  }

  const groupKeys = new Set<string>();
  for (const row of rows) {
    if (row.group) Object.keys(row.group).forEach((k) => groupKeys.add(k));
  }
  const columns = [...groupKeys].sort();
  return {
    kind: "table",
    watermark,
    columns: [...columns, "value"],
    cells: rows.map((row) => [
      ...columns.map((k) => (row.group ? (row.group[k] ?? null) : null)),
      row.value as Scalar,
    ]),
  };
}
