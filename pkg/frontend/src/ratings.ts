import { el } from "./dom";
import type { RatingSubmission, RatingSummaryDoc } from "./types";

export const DIMENSIONS = ["explainability", "reasonableness", "efficiency"] as const;
export type Dimension = (typeof DIMENSIONS)[number];

/** One adjudicator's pending scores plus the latest server summaries. */
export class RatingForm {
  rater = "";
  scores: Partial<Record<Dimension, number>> = {};
  consensusEntries: Partial<Record<Dimension, number>> = {};
  summaries: Record<string, RatingSummaryDoc> = {};

  constructor(summaries?: Record<string, RatingSummaryDoc>) {
    if (summaries) this.summaries = summaries;
  }

  setScore(dimension: Dimension, score: number): void {
    if (score < 1 || score > 5 || !Number.isInteger(score)) {
      throw new Error(`score ${score} outside 1..5`);
    }
    this.scores[dimension] = score;
  }

  setConsensus(dimension: Dimension, score: number): void {
    this.consensusEntries[dimension] = score;
  }

  submitEnabled(): boolean {
    return this.rater.trim().length > 0;
  }

  toSubmission(): RatingSubmission {
    const submission: RatingSubmission = {
      rater: this.rater,
      ratings: Object.entries(this.scores).map(([dimension, score]) => ({
        dimension,
        score: score as number,
      })),
    };
    const consensus = Object.entries(this.consensusEntries);
    if (consensus.length > 0) {
      submission.consensus = Object.fromEntries(consensus);
    }
    return submission;
  }

  applySummaries(summaries: Record<string, RatingSummaryDoc>): void {
    this.summaries = summaries;
    this.scores = {};
    this.consensusEntries = {};
  }
}

/** "mean ± std" with the server's 2-decimal values; no local statistics. */
export function formatSummary(summary: RatingSummaryDoc): string {
  return `${summary.mean.toFixed(2)} ± ${summary.std.toFixed(2)}`;
}

export function renderSummaries(form: RatingForm): HTMLElement {
  const list = el("dl", { class: "rating-summaries" });
  for (const dimension of DIMENSIONS) {
    const summary = form.summaries[dimension];
    if (!summary) continue;
    list.append(el("dt", {}, dimension));
    const value = el("dd", {}, formatSummary(summary), ` (n=${summary.n})`);
    if (summary.consensus_score !== null && summary.consensus_score !== undefined) {
      value.append(
        el("span", { class: "consensus-score" }, ` consensus ${summary.effective_score}`),
      );
    }
    list.append(value);
    if (summary.needs_consensus && summary.consensus_score == null) {
      list.append(
        el(
          "dd",
          { class: "consensus-alert" },
          `Raters disagree on ${dimension}; enter a consensus score.`,
        ),
      );
    }
  }
  return list;
}
