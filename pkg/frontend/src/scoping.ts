/** Scoping wizard: accept or reject recommended questions, then submit.
 *
 * The wizard holds the recommendation list as the server sent it plus one
 * local mark per question. Scores and reasons are displayed verbatim; the
 * only thing computed here is which ids the user accepted.
 */

import { ApiClient, ApiError } from "./api.js";
import type { AuditSnapshot, Recommendation } from "./types.js";

export type Mark = "undecided" | "accepted" | "rejected";

export interface WizardState {
  auditId: string;
  audit: AuditSnapshot;
  recommendations: Recommendation[];
  marks: Record<string, Mark>;
  submitting: boolean;
  banner: string | null;
}

export interface WizardRow {
  questionId: string;
  text: string;
  score: number;
  reasons: string[];
  relatedRisks: string[];
  mark: Mark;
}

export function initWizard(audit: AuditSnapshot, recommendations: Recommendation[]): WizardState {
  const marks: Record<string, Mark> = {};
  for (const rec of recommendations) marks[rec.question_id] = "undecided";
  return {
    auditId: audit.audit_id,
    audit,
    recommendations,
    marks,
    submitting: false,
    banner: null,
  };
}

export function setMark(state: WizardState, questionId: string, mark: Mark): WizardState {
  if (!(questionId in state.marks)) return state;
  return { ...state, marks: { ...state.marks, [questionId]: mark } };
}

/** Accepted ids in recommendation order; exactly what submit will send. */
export function acceptedIds(state: WizardState): string[] {
  return state.recommendations
    .map((r) => r.question_id)
    .filter((id) => state.marks[id] === "accepted");
}

export function wizardRows(state: WizardState): WizardRow[] {
  return state.recommendations.map((rec) => ({
    questionId: rec.question_id,
    text: rec.question.text,
    score: rec.score,
    reasons: rec.reasons,
    relatedRisks: rec.related_risks,
    mark: state.marks[rec.question_id] ?? "undecided",
  }));
}

export interface SubmitGate {
  ok: boolean;
  reason?: string;
}

export function canSubmit(state: WizardState): SubmitGate {
  if (state.submitting) {
    return { ok: false, reason: "submission in progress" };
  }
  if (state.audit.state !== "draft") {
    return { ok: false, reason: `audit is ${state.audit.state}, selection is closed` };
  }
  if (acceptedIds(state).length === 0) {
    return { ok: false, reason: "accept at least one question before submitting" };
  }
  return { ok: true };
}

export interface SubmitOutcome {
  state: WizardState;
  submitted: boolean;
}

/** Submit the accepted ids. On a state conflict the wizard re-syncs from
 * the server and shows a banner instead of dying. */
export async function submitSelection(
  client: ApiClient,
  state: WizardState,
): Promise<SubmitOutcome> {
  const gate = canSubmit(state);
  if (!gate.ok) {
    return { state, submitted: false };
  }
  state.submitting = true;
  try {
    const audit = await client.submitSelection(state.auditId, acceptedIds(state));
    return { state: { ...state, audit, submitting: false, banner: null }, submitted: true };
  } catch (exc) {
    if (exc instanceof ApiError && exc.code === "illegal_state") {
      const fresh = await resetWizard(client, state.auditId);
      fresh.banner = `selection rejected: ${exc.message}; view refreshed from the server`;
      return { state: fresh, submitted: false };
    }
    const banner = exc instanceof Error ? exc.message : String(exc);
    return { state: { ...state, submitting: false, banner }, submitted: false };
  }
}

export async function resetWizard(client: ApiClient, auditId: string): Promise<WizardState> {
  const [audit, recommendations] = await Promise.all([
    client.getAudit(auditId),
    client.getRecommendations(auditId),
  ]);
  return initWizard(audit, recommendations);
}
