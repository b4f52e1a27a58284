/** Payload shapes of the /api/v1 surface, as the server serializes them. */

export type Scalar = string | number | boolean | null;

export interface PatternDoc {
  subject?: string | { prefix: string };
  predicate?: string;
  object_type?: string;
  component_id?: string;
  run_id?: string;
  object?: string;
  ad_hoc?: boolean;
}

export interface FilterDoc {
  lhs: string;
  op: string;
  rhs: Scalar;
}

export interface QueryDoc {
  match: PatternDoc[];
  aggregate: { op: string; over?: string };
  filters?: FilterDoc[];
  group_by?: string[];
  time_bucket?: string;
  order_by?: { key: string; dir?: string }[];
  limit?: number;
}

export interface ResultRow {
  group?: Record<string, Scalar>;
  value: Scalar | Scalar[];
}

export interface CatalogRef {
  catalog_id: string;
  version: string;
}

export interface SystemComponent {
  id: string;
  name: string;
  kind: string;
  phase_coverage: string[];
}

export interface SystemDescription {
  system_id: string;
  components: SystemComponent[];
  data_flows: { from: string; to: string; payload_label: string }[];
  phases_in_scope: string[];
}

export interface QuestionDoc {
  question_id: string;
  text: string;
  goals: string[];
  target: string;
  phases: string[];
  required_patterns: PatternDoc[];
  template_id: string;
  answer_type: string;
}

export interface TemplateDoc {
  template_id: string;
  ast: QueryDoc;
  description?: string;
}

export interface CatalogDoc {
  catalog_id: string;
  version: string;
  questions: QuestionDoc[];
  templates: TemplateDoc[];
  risks: unknown[];
  standards?: unknown[];
  tools?: unknown[];
}

export interface Recommendation {
  question_id: string;
  question: QuestionDoc;
  score: number;
  reasons: string[];
  related_risks: string[];
}

export interface BindingDoc {
  binding_id: string;
  component_id: string;
  source_format: string;
  mapping_ref?: string;
  provides_patterns: PatternDoc[];
}

export interface WorkflowHistoryEntry {
  state: string;
  timestamp: string;
  actor: string;
}

export interface AuditSnapshot {
  audit_id: string;
  system: SystemDescription;
  goal: string;
  catalog_ref: CatalogRef;
  state: string;
  bindings: BindingDoc[];
  created_by: { id: string; display_name: string; relationship: string; party: string };
  history: WorkflowHistoryEntry[];
  selected?: {
    question_ids: string[];
    required_patterns: PatternDoc[];
    derived_at: string;
  };
  store_sequence_high_watermark?: number;
}

export interface CoverageQuestionDoc {
  covered: boolean;
  missing_patterns: PatternDoc[];
}

export interface CoverageDoc {
  per_question: Record<string, CoverageQuestionDoc>;
  overall_ratio: number;
}

export interface IngestReceipt {
  batch_key: string;
  accepted: number;
  deduplicated: number;
  rejected: { index: number; reason: string }[];
  store_sequence_high_watermark: number;
}

export interface AnswerDoc {
  question_id: string;
  query: QueryDoc;
  rows: ResultRow[];
  computed_at: string;
  store_sequence_high_watermark: number;
  verdict?: string;
}

export interface ReportDoc {
  audit_id: string;
  catalog_ref: CatalogRef;
  goal: string;
  system: { system_id: string; component_count: number; kinds: string[] };
  coverage: CoverageDoc;
  answers: AnswerDoc[];
  generated_at: string;
  store_sequence_high_watermark: number;
  format_version: string;
}

export interface QueryResponse {
  rows: ResultRow[];
  store_sequence_high_watermark: number;
}

export interface ErrorEnvelope {
  error: { code: string; message: string; [key: string]: unknown };
}
