import type {
  ClassificationResponse,
  ClassificationStoreDoc,
  ClassificationSubmission,
  GoldDoc,
  MedicationDoc,
  MetricsDoc,
  PlanDoc,
} from "./types";

export const GOLD_LABELS = ["exact_match", "alternative_correct", "imprecise", "omission"] as const;
export const OTHER_LABELS = ["fp_correct", "fp_wrong"] as const;

export type GoldLabel = (typeof GOLD_LABELS)[number];
export type OtherLabel = (typeof OTHER_LABELS)[number];

export interface GoldRow {
  target: string;
  description: string;
  alternatives: string[];
  setId: string;
  preferred: boolean;
  label: GoldLabel | null;
  note: string | null;
}

export interface OtherRow {
  target: string;
  label: OtherLabel;
  note: string | null;
}

export interface GoalCounts {
  original: number[];
  revised: number[];
}

/** Mutable board state for one run's adjudication session.
 *
 * Selections, overrides, and goal counts mirror exactly what the API stores,
 * so a board built from a fetched bundle is indistinguishable from one the
 * adjudicator filled in by hand. Metrics are whatever the server last said;
 * the board never computes them.
 */
export class Board {
  adjudicator = "";
  goldRows: GoldRow[];
  otherRows: OtherRow[] = [];
  countOverrides: Record<string, number> | null = null;
  overrideProvenance: string | null = null;
  goalCounts: GoalCounts | null = null;
  metrics: MetricsDoc | null = null;
  provisional: boolean | null = null;

  constructor(
    public readonly runId: string,
    gold: GoldDoc,
  ) {
    this.goldRows = gold.option_sets.flatMap((set) =>
      set.actions.map((action) => ({
        target: action.action_id,
        description: action.description,
        alternatives: action.acceptable_alternatives,
        setId: set.set_id,
        preferred: set.preferred,
        label: null,
        note: null,
      })),
    );
  }

  /** Rebuild selections from a persisted store; the reload path. */
  applyStore(store: ClassificationStoreDoc | null): void {
    if (!store) return;
    const rows = new Map(this.goldRows.map((row) => [row.target, row]));
    for (const record of store.records) {
      if (record.superseded) continue;
      this.adjudicator = record.adjudicator;
      if (record.target_kind === "gold") {
        const row = rows.get(record.target);
        if (row) {
          row.label = record.label as GoldLabel;
          row.note = record.note;
        }
      } else {
        this.setOtherLabel(record.target, record.label as OtherLabel, record.note);
      }
    }
    if (store.counts) {
      this.countOverrides = { ...store.counts.overrides };
      this.overrideProvenance = store.counts.provenance;
    }
    if (store.goal_counts) {
      this.goalCounts = {
        original: [...store.goal_counts.original],
        revised: [...store.goal_counts.revised],
      };
    }
  }

  setLabel(target: string, label: GoldLabel | null): void {
    const row = this.goldRows.find((r) => r.target === target);
    if (!row) throw new Error(`unknown gold action ${target}`);
    row.label = label;
  }

  setOtherLabel(target: string, label: OtherLabel | null, note: string | null = null): void {
    const index = this.otherRows.findIndex((r) => r.target === target);
    if (label === null) {
      if (index >= 0) this.otherRows.splice(index, 1);
    } else if (index >= 0) {
      const row = this.otherRows[index]!;
      row.label = label;
      row.note = note;
    } else {
      this.otherRows.push({ target, label, note });
    }
  }

  /** Classified gold actions over total; drives the progress indicator. */
  completion(): number {
    if (this.goldRows.length === 0) return 0;
    return this.goldRows.filter((r) => r.label !== null).length / this.goldRows.length;
  }

  submitEnabled(): boolean {
    return this.adjudicator.trim().length > 0;
  }

  toSubmission(): ClassificationSubmission {
    const submission: ClassificationSubmission = {
      adjudicator: this.adjudicator,
      classifications: [
        ...this.goldRows
          .filter((r) => r.label !== null)
          .map((r) => ({
            target: r.target,
            target_kind: "gold",
            label: r.label as string,
            note: r.note,
          })),
        ...this.otherRows.map((r) => ({
          target: r.target,
          target_kind: "other",
          label: r.label as string,
          note: r.note,
        })),
      ],
    };
    if (this.countOverrides && Object.keys(this.countOverrides).length > 0) {
      submission.count_overrides = this.countOverrides;
      submission.override_provenance = this.overrideProvenance ?? "";
    }
    if (this.goalCounts) {
      submission.goal_counts = this.goalCounts;
    }
    return submission;
  }

  applyResponse(response: ClassificationResponse): void {
    this.metrics = response.metrics;
    this.provisional = response.provisional;
  }
}

/** Stable identifier for a generated action outside the gold standard. */
export function extraActionTarget(medication: MedicationDoc): string {
  const slug = medication.name.trim().toLowerCase().replace(/\s+/g, "-");
  return `gen:${slug}-${medication.action}`;
}

export function planRows(plan: PlanDoc): { medication: MedicationDoc; target: string }[] {
  return plan.medications.map((medication) => ({
    medication,
    target: extraActionTarget(medication),
  }));
}
