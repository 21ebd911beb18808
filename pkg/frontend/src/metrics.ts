import { el } from "./dom";
import type { MetricsDoc } from "./types";

const RATIO_ROWS: [keyof MetricsDoc, string][] = [
  ["correctness", "Correctness"],
  ["completeness", "Completeness"],
  ["ddi_ratio", "DDI-R"],
  ["contraindication_ratio", "CR"],
  ["medication_ratio", "MR"],
];

/** Score panel. Every figure is a server-provided display string; the panel
 * holds no arithmetic of its own. */
export function renderMetrics(metrics: MetricsDoc | null): HTMLElement {
  const panel = el("section", { class: "metrics-panel" }, el("h3", {}, "Metrics"));
  if (!metrics) {
    panel.append(el("p", { class: "metrics-empty" }, "No metrics yet; classify actions below."));
    return panel;
  }
  if (metrics.provisional) {
    panel.append(el("span", { class: "provisional-badge" }, "provisional"));
  }
  const list = el("dl", { class: "metric-list" });
  for (const [key, label] of RATIO_ROWS) {
    const ratio = metrics[key] as { display: string };
    list.append(
      el("dt", {}, label),
      el("dd", { "data-metric": key as string }, ratio.display),
    );
  }
  list.append(
    el("dt", {}, "GR"),
    el("dd", { "data-metric": "met_goal" }, metrics.met_goal_display ?? "–"),
  );
  const preferred =
    metrics.preferred_included === null ? "–" : metrics.preferred_included ? "Yes" : "No";
  list.append(
    el("dt", {}, "Preferred included"),
    el("dd", { "data-metric": "preferred_included" }, preferred),
  );
  panel.append(list);
  return panel;
}
