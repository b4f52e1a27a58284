/** Report view model: the generated report, restructured for display.
 *
 * Everything shown is lifted verbatim from the report document; the only
 * transformation is attaching a presentation model to each answer's rows.
 */

import type { ReportDoc } from "./types.js";
import { ResultModel, resultModel } from "./console.js";

export interface ReportAnswerView {
  questionId: string;
  verdict: string | null;
  computedAt: string;
  result: ResultModel;
}

export interface ReportView {
  auditId: string;
  goal: string;
  generatedAt: string;
  watermark: number;
  catalogVersion: string;
  overallCoverageRatio: number;
  answers: ReportAnswerView[];
}

export function reportView(report: ReportDoc): ReportView {
  return {
    auditId: report.audit_id,
    goal: report.goal,
    generatedAt: report.generated_at,
    watermark: report.store_sequence_high_watermark,
    catalogVersion: report.catalog_ref.version,
    overallCoverageRatio: report.coverage.overall_ratio,
    answers: report.answers.map((answer) => ({
      questionId: answer.question_id,
      verdict: answer.verdict ?? null,
      computedAt: answer.computed_at,
      result: resultModel(answer.rows, answer.store_sequence_high_watermark),
    })),
  };
}
