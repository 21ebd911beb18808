import { ApiClient } from "./api";
import { Board, GOLD_LABELS, planRows } from "./board";
import type { GoldLabel, OtherLabel } from "./board";
import { clear, el } from "./dom";
import { renderMetrics } from "./metrics";
import { renderRadar } from "./radar";
import { DIMENSIONS, RatingForm, renderSummaries } from "./ratings";
import { renderTranscript } from "./transcript";
import type { PlanDoc, RadarDoc, RunBundle, TranscriptDoc } from "./types";

const OVERRIDE_KEYS = [
  "ddi_original",
  "ddi_revised",
  "contraindication_original",
  "contraindication_revised",
  "medication_original",
  "medication_revised",
];

/** Page controller: run browser, and per-run adjudication view.
 *
 * All state worth keeping lives on the server; after every write the view is
 * refreshed from the response, so closing and reopening the page loses
 * nothing but unsubmitted selections.
 */
export class App {
  board: Board | null = null;
  ratingForm = new RatingForm();
  lastWrite: Promise<void> | null = null;
  private bundle: RunBundle | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly api: ApiClient,
  ) {}

  async showRunList(): Promise<void> {
    clear(this.root);
    let runs;
    try {
      runs = (await this.api.listRuns()).runs;
    } catch (error) {
      this.banner(`Cannot reach the adjudication service: ${describe(error)}`, () =>
        this.showRunList(),
      );
      return;
    }
    const list = el("div", { class: "run-list" });
    for (const run of runs) {
      const card = el(
        "div",
        { class: "run-card", "data-run-id": run.run_id },
        el("h3", {}, run.run_id),
        el("p", {}, `${run.case_id} · ${run.pipeline} · ${run.model_id}`),
        el("span", { class: `badge status-${run.status}` }, run.status),
      );
      card.addEventListener("click", () => {
        this.lastWrite = this.openRun(run.run_id);
      });
      list.append(card);
    }
    this.root.append(el("h2", {}, "Runs"), list);
  }

  async openRun(runId: string): Promise<void> {
    clear(this.root);
    let bundle: RunBundle;
    let transcript: TranscriptDoc;
    try {
      bundle = await this.api.getRun(runId);
      const gold = await this.api.getGold(bundle.run.record.case_id);
      transcript = await this.api.getTranscript(runId);
      this.board = new Board(runId, gold);
    } catch (error) {
      this.banner(`Cannot load run ${runId}: ${describe(error)}`, () => this.openRun(runId));
      return;
    }
    this.bundle = bundle;
    this.board.applyStore(bundle.classifications);
    if (bundle.metrics) {
      this.board.metrics = bundle.metrics;
      this.board.provisional = bundle.metrics.provisional;
    }
    this.ratingForm = new RatingForm(bundle.rating_summaries ?? {});

    let radar: RadarDoc | null = null;
    try {
      radar = await this.api.getRadar();
    } catch {
      radar = null;
    }
    this.renderRunView(bundle, transcript, radar);
  }

  async submitClassifications(): Promise<void> {
    if (!this.board) return;
    try {
      const response = await this.api.postClassifications(
        this.board.runId,
        this.board.toSubmission(),
      );
      this.board.applyResponse(response);
      this.refreshMetricsSlot();
    } catch (error) {
      this.banner(`Submission failed: ${describe(error)}`, null);
    }
  }

  async submitRatings(): Promise<void> {
    if (!this.board) return;
    try {
      const response = await this.api.postRatings(this.board.runId, this.ratingForm.toSubmission());
      this.ratingForm.applySummaries(response.summaries);
      this.refreshSummariesSlot();
      try {
        const radar = await this.api.getRadar();
        this.refreshRadarSlot(radar);
      } catch {
        // chart keeps its last state when the refresh fails
      }
    } catch (error) {
      this.banner(`Rating failed: ${describe(error)}`, null);
    }
  }

  private banner(message: string, retry: (() => Promise<void>) | null): void {
    const node = el("div", { class: "banner error" }, el("p", {}, message));
    if (retry) {
      const button = el("button", { class: "retry" }, "Retry");
      button.addEventListener("click", () => {
        node.remove();
        this.lastWrite = retry();
      });
      node.append(button);
    }
    this.root.prepend(node);
  }

  private renderRunView(bundle: RunBundle, transcript: TranscriptDoc, radar: RadarDoc | null) {
    const board = this.board!;
    const record = bundle.run.record;
    this.root.append(
      el(
        "header",
        { class: "run-header" },
        el("h2", {}, board.runId),
        el("span", { class: `badge status-${bundle.status}` }, bundle.status),
        el("p", {}, `${record.case_id} · ${record.pipeline} · ${record.model_id}`),
      ),
    );

    const panes = el("div", { class: "panes" });
    panes.append(this.goldPane(), this.planPane(record.revised_plan as unknown as PlanDoc));
    this.root.append(panes);

    this.root.append(this.controlsSection());
    this.root.append(el("div", { id: "metrics-slot" }, renderMetrics(board.metrics)));
    this.root.append(this.ratingsSection());
    this.root.append(
      el("section", { class: "transcript-panel" }, el("h3", {}, "Consultation transcript"), renderTranscript(transcript)),
    );
    const radarSlot = el("div", { id: "radar-slot", class: "radar-panel" });
    if (radar) radarSlot.append(renderRadar(radar));
    this.root.append(radarSlot);
  }

  private goldPane(): HTMLElement {
    const board = this.board!;
    const pane = el("section", { class: "gold-pane" }, el("h3", {}, "Gold standard"));
    const bySet = new Map<string, typeof board.goldRows>();
    for (const row of board.goldRows) {
      const bucket = bySet.get(row.setId) ?? [];
      bucket.push(row);
      bySet.set(row.setId, bucket);
    }
    for (const [setId, rows] of bySet) {
      const fieldset = el(
        "fieldset",
        { class: "option-set", "data-set": setId },
        el(
          "legend",
          {},
          `Option set ${setId}`,
          rows[0]!.preferred ? el("span", { class: "preferred-flag" }, " (preferred)") : null,
        ),
      );
      for (const row of rows) {
        const rowNode = el(
          "div",
          { class: "gold-row", "data-target": row.target },
          el("p", { class: "description" }, `${row.target}: ${row.description}`),
        );
        if (row.alternatives.length > 0) {
          rowNode.append(
            el("p", { class: "alternatives" }, `Also acceptable: ${row.alternatives.join("; ")}`),
          );
        }
        const controls = el("div", { class: "label-controls" });
        for (const label of GOLD_LABELS) {
          const input = el("input", {
            type: "radio",
            name: `label-${row.target}`,
            value: label,
          }) as HTMLInputElement;
          input.checked = row.label === label;
          input.addEventListener("change", () => {
            this.board!.setLabel(row.target, label as GoldLabel);
            this.refreshCompletion();
          });
          controls.append(el("label", { class: `pick-${label}` }, input, label));
        }
        rowNode.append(controls);
        fieldset.append(rowNode);
      }
      pane.append(fieldset);
    }
    return pane;
  }

  private planPane(plan: PlanDoc): HTMLElement {
    const pane = el("section", { class: "plan-pane" }, el("h3", {}, "Generated plan"));
    for (const { medication, target } of planRows(plan)) {
      const parts = [medication.name, medication.action, medication.dose, medication.frequency]
        .filter(Boolean)
        .join(" · ");
      const select = el("select", { class: "extra-label", "data-target": target });
      select.append(el("option", { value: "" }, "in gold standard"));
      select.append(el("option", { value: "fp_correct" }, "extra, clinically correct"));
      select.append(el("option", { value: "fp_wrong" }, "extra, clinically wrong"));
      const existing = this.board!.otherRows.find((r) => r.target === target);
      if (existing) (select as HTMLSelectElement).value = existing.label;
      select.addEventListener("change", () => {
        const value = (select as HTMLSelectElement).value;
        this.board!.setOtherLabel(target, value === "" ? null : (value as OtherLabel));
      });
      pane.append(
        el("div", { class: "plan-row", "data-target": target }, el("p", {}, parts), select),
      );
    }
    if (plan.monitoring.length > 0) {
      pane.append(el("p", { class: "monitoring" }, `Monitoring: ${plan.monitoring.join("; ")}`));
    }
    return pane;
  }

  private controlsSection(): HTMLElement {
    const board = this.board!;
    const section = el("section", { class: "adjudication-controls" });

    const name = el("input", {
      class: "adjudicator-name",
      placeholder: "adjudicator name",
    }) as HTMLInputElement;
    name.value = board.adjudicator;
    const submit = el("button", { class: "submit-classifications" }, "Submit classifications");
    (submit as HTMLButtonElement).disabled = !board.submitEnabled();
    name.addEventListener("input", () => {
      board.adjudicator = name.value;
      (submit as HTMLButtonElement).disabled = !board.submitEnabled();
    });
    submit.addEventListener("click", () => {
      this.lastWrite = this.submitClassifications();
    });

    const counts = el("fieldset", { class: "counts-fieldset" }, el("legend", {}, "Count overrides"));
    for (const key of OVERRIDE_KEYS) {
      const input = el("input", {
        type: "number",
        class: "override-input",
        "data-override-key": key,
      }) as HTMLInputElement;
      const current = board.countOverrides?.[key];
      if (current !== undefined) input.value = String(current);
      input.addEventListener("change", () => this.collectOverrides());
      counts.append(el("label", {}, key, input));
    }
    const provenance = el("textarea", {
      class: "override-provenance",
      placeholder: "who decided this and why",
    }) as HTMLTextAreaElement;
    provenance.value = board.overrideProvenance ?? "";
    provenance.addEventListener("change", () => this.collectOverrides());
    counts.append(provenance);

    const goals = el("fieldset", { class: "goals-fieldset" }, el("legend", {}, "Goals met"));
    const goalFields: [string, number | undefined][] = [
      ["original-met", board.goalCounts?.original[0]],
      ["original-total", board.goalCounts?.original[1]],
      ["revised-met", board.goalCounts?.revised[0]],
      ["revised-total", board.goalCounts?.revised[1]],
    ];
    for (const [slot, current] of goalFields) {
      const input = el("input", {
        type: "number",
        class: "goal-input",
        "data-goal": slot,
      }) as HTMLInputElement;
      if (current !== undefined) input.value = String(current);
      input.addEventListener("change", () => this.collectGoals());
      goals.append(el("label", {}, slot.replace("-", " "), input));
    }

    section.append(
      el("label", {}, "Adjudicator ", name),
      counts,
      goals,
      el("div", { class: "completion" }, this.completionText()),
      submit,
    );
    return section;
  }

  private ratingsSection(): HTMLElement {
    const section = el("section", { class: "ratings-panel" }, el("h3", {}, "Process ratings"));
    const name = el("input", { class: "rater-name", placeholder: "rater name" }) as HTMLInputElement;
    name.value = this.ratingForm.rater;
    const submit = el("button", { class: "submit-ratings" }, "Submit ratings");
    (submit as HTMLButtonElement).disabled = !this.ratingForm.submitEnabled();
    name.addEventListener("input", () => {
      this.ratingForm.rater = name.value;
      (submit as HTMLButtonElement).disabled = !this.ratingForm.submitEnabled();
    });
    submit.addEventListener("click", () => {
      this.lastWrite = this.submitRatings();
    });

    for (const dimension of DIMENSIONS) {
      const input = el("input", {
        type: "number",
        min: "1",
        max: "5",
        class: "score-input",
        "data-dimension": dimension,
      }) as HTMLInputElement;
      input.addEventListener("change", () => {
        if (input.value !== "") this.ratingForm.setScore(dimension, Number(input.value));
      });
      const consensus = el("input", {
        type: "number",
        step: "0.5",
        class: "consensus-input",
        "data-dimension": dimension,
      }) as HTMLInputElement;
      consensus.addEventListener("change", () => {
        if (consensus.value !== "") this.ratingForm.setConsensus(dimension, Number(consensus.value));
      });
      section.append(el("label", {}, dimension, input, consensus));
    }
    section.append(name, submit, el("div", { id: "summaries-slot" }, renderSummaries(this.ratingForm)));
    return section;
  }

  private collectOverrides(): void {
    const board = this.board!;
    const overrides: Record<string, number> = {};
    for (const input of this.root.querySelectorAll<HTMLInputElement>(".override-input")) {
      if (input.value !== "") {
        overrides[input.dataset["overrideKey"]!] = Number(input.value);
      }
    }
    board.countOverrides = Object.keys(overrides).length > 0 ? overrides : null;
    const provenance = this.root.querySelector<HTMLTextAreaElement>(".override-provenance");
    board.overrideProvenance = provenance && provenance.value !== "" ? provenance.value : null;
  }

  private collectGoals(): void {
    const board = this.board!;
    const values: Record<string, number> = {};
    for (const input of this.root.querySelectorAll<HTMLInputElement>(".goal-input")) {
      if (input.value !== "") values[input.dataset["goal"]!] = Number(input.value);
    }
    if (
      ["original-met", "original-total", "revised-met", "revised-total"].every(
        (slot) => slot in values,
      )
    ) {
      board.goalCounts = {
        original: [values["original-met"]!, values["original-total"]!],
        revised: [values["revised-met"]!, values["revised-total"]!],
      };
    } else {
      board.goalCounts = null;
    }
  }

  private completionText(): string {
    const board = this.board!;
    return `Classified ${Math.round(board.completion() * 100)}% of gold actions`;
  }

  private refreshCompletion(): void {
    const node = this.root.querySelector(".completion");
    if (node) node.textContent = this.completionText();
  }

  private refreshMetricsSlot(): void {
    const slot = this.root.querySelector<HTMLElement>("#metrics-slot");
    if (!slot || !this.board) return;
    clear(slot);
    slot.append(renderMetrics(this.board.metrics));
  }

  private refreshSummariesSlot(): void {
    const slot = this.root.querySelector<HTMLElement>("#summaries-slot");
    if (!slot) return;
    clear(slot);
    slot.append(renderSummaries(this.ratingForm));
  }

  private refreshRadarSlot(radar: RadarDoc): void {
    const slot = this.root.querySelector<HTMLElement>("#radar-slot");
    if (!slot) return;
    clear(slot);
    slot.append(renderRadar(radar));
  }
}

function describe(error: unknown): string {
  return error instanceof Error ? error.message : String(error);
}

export function boot(root: HTMLElement, baseUrl = ""): App {
  const app = new App(root, new ApiClient(baseUrl));
  const match = window.location.hash.match(/^#run\/(.+)$/);
  if (match) {
    app.lastWrite = app.openRun(decodeURIComponent(match[1]!));
  } else {
    app.lastWrite = app.showRunList();
  }
  return app;
}
