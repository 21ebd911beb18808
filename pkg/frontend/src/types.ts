/** Document shapes served by the adjudication API. The console never
 * invents numbers: every metric it shows is one of these fields. */

export interface RunCard {
  run_id: string;
  case_id: string;
  pipeline: string;
  model_id: string;
  status: string;
}

export interface RatioDoc {
  numerator: string;
  denominator: string;
  display: string;
  value: number | null;
}

export interface MetricsDoc {
  schema_version: number;
  run_id: string;
  case_id: string;
  pipeline: string;
  model_id: string;
  provisional: boolean;
  tally: Record<string, unknown>;
  correctness: RatioDoc;
  completeness: RatioDoc;
  ddi_ratio: RatioDoc;
  contraindication_ratio: RatioDoc;
  medication_ratio: RatioDoc;
  met_goal_ratio: string | null;
  met_goal_display: string | null;
  preferred_included: boolean | null;
  counts: Record<string, unknown>;
  goal_counts: { original: number[]; revised: number[] } | null;
}

export interface GoldActionDoc {
  action_id: string;
  description: string;
  acceptable_alternatives: string[];
  goal_ids: string[];
}

export interface OptionSetDoc {
  set_id: string;
  preferred: boolean;
  explanation: string;
  actions: GoldActionDoc[];
}

export interface GoldDoc {
  case_id: string;
  option_sets: OptionSetDoc[];
}

export interface MedicationDoc {
  name: string;
  action: string;
  dose?: string | null;
  frequency?: string | null;
  rationale?: string | null;
  timing?: string | null;
}

export interface PlanDoc {
  medications: MedicationDoc[];
  monitoring: string[];
}

export interface CaseDoc {
  case_id: string;
  demographics: string;
  chief_complaint: string;
  conditions: { condition_id: string; name: string; canonical: string }[];
  goals: { goal_id: string; description: string; addressed_by: string[] }[];
  initial_plan: PlanDoc;
}

export interface ClassificationRecordDoc {
  target: string;
  target_kind: string;
  label: string;
  adjudicator: string;
  note: string | null;
  superseded?: boolean;
  submitted_at?: string;
}

export interface ClassificationStoreDoc {
  records: ClassificationRecordDoc[];
  counts?: {
    overrides: Record<string, number>;
    provenance: string;
  };
  goal_counts?: { original: number[]; revised: number[] };
}

export interface RatingSummaryDoc {
  mean: number;
  std: number;
  n: number;
  needs_consensus: boolean;
  consensus_score: number | null;
  effective_score: number;
}

export interface RunBundle {
  status: string;
  run: {
    record: {
      run_id: string;
      case_id: string;
      pipeline: string;
      model_id: string;
      [key: string]: unknown;
    };
    inputs: { case: CaseDoc; gold: GoldDoc; lexicon: unknown };
  };
  classifications: ClassificationStoreDoc | null;
  ratings: { records: unknown[] } | null;
  rating_summaries?: Record<string, RatingSummaryDoc>;
  metrics: MetricsDoc | null;
}

export interface TranscriptEntryDoc {
  sequence: number;
  agent_id: string | null;
  round: number | null;
  request: { request_tag: string; messages: { role: string; content: string }[] };
  response: { content: string };
}

export interface TranscriptDoc {
  header: Record<string, unknown>;
  entries: TranscriptEntryDoc[];
}

export interface RadarDoc {
  kind: string;
  scale: { min: number; max: number };
  axes: { case: string; dimension: string }[];
  series: { model: string; values: (number | null)[] }[];
}

export interface ClassificationSubmission {
  adjudicator: string;
  classifications: { target: string; target_kind: string; label: string; note: string | null }[];
  count_overrides?: Record<string, number>;
  override_provenance?: string;
  goal_counts?: { original: number[]; revised: number[] };
}

export interface ClassificationResponse {
  provisional: boolean;
  metrics: MetricsDoc;
}

export interface RatingSubmission {
  rater: string;
  ratings: { dimension: string; score: number }[];
  consensus?: Record<string, number>;
}

export interface RatingResponse {
  summaries: Record<string, RatingSummaryDoc>;
}
