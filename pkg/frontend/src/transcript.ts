import { el } from "./dom";
import type { TranscriptDoc, TranscriptEntryDoc } from "./types";

export interface TagInfo {
  kind: "stage" | "direct" | "forum" | "mediator";
  stage: string;
  conflictId: string | null;
  round: number | null;
  agent: string | null;
  repair: boolean;
}

export function parseTag(tag: string): TagInfo {
  let repair = false;
  let rest = tag;
  if (rest.endsWith("/repair")) {
    repair = true;
    rest = rest.slice(0, -"/repair".length);
  }
  if (rest.startsWith("resolve/")) {
    const body = rest.slice("resolve/".length);
    if (body.endsWith("/mediator")) {
      return {
        kind: "mediator",
        stage: "resolve",
        conflictId: body.slice(0, -"/mediator".length),
        round: null,
        agent: "mediator",
        repair,
      };
    }
    const forum = body.match(/^(.*)\/round(\d+)\/([^/]+)$/);
    if (forum) {
      return {
        kind: "forum",
        stage: "resolve",
        conflictId: forum[1]!,
        round: Number(forum[2]),
        agent: forum[3]!,
        repair,
      };
    }
    const direct = body.match(/^(.*)\/direct\/([^/]+)$/);
    if (direct) {
      return {
        kind: "direct",
        stage: "resolve",
        conflictId: direct[1]!,
        round: null,
        agent: direct[2]!,
        repair,
      };
    }
  }
  return { kind: "stage", stage: rest, conflictId: null, round: null, agent: null, repair };
}

interface Consultation {
  conflictId: string;
  rounds: Map<number, TranscriptEntryDoc[]>;
  direct: TranscriptEntryDoc[];
  mediator: TranscriptEntryDoc[];
}

interface StageGroup {
  kind: "stage";
  entry: TranscriptEntryDoc;
  info: TagInfo;
}

interface ConsultationGroup {
  kind: "consultation";
  consultation: Consultation;
}

export type ThreadGroup = StageGroup | ConsultationGroup;

/** Group a flat exchange list into staged exchanges and per-conflict
 * consultations, preserving transcript order. */
export function threadEntries(entries: TranscriptEntryDoc[]): ThreadGroup[] {
  const groups: ThreadGroup[] = [];
  const open = new Map<string, Consultation>();
  for (const entry of entries) {
    const info = parseTag(entry.request.request_tag);
    if (info.conflictId === null) {
      groups.push({ kind: "stage", entry, info });
      continue;
    }
    let consultation = open.get(info.conflictId);
    if (!consultation) {
      consultation = { conflictId: info.conflictId, rounds: new Map(), direct: [], mediator: [] };
      open.set(info.conflictId, consultation);
      groups.push({ kind: "consultation", consultation });
    }
    if (info.kind === "mediator") {
      consultation.mediator.push(entry);
    } else if (info.kind === "direct") {
      consultation.direct.push(entry);
    } else {
      const round = info.round ?? 0;
      const bucket = consultation.rounds.get(round) ?? [];
      bucket.push(entry);
      consultation.rounds.set(round, bucket);
    }
  }
  return groups;
}

function exchangeNode(entry: TranscriptEntryDoc, extraClass = ""): HTMLElement {
  const info = parseTag(entry.request.request_tag);
  const classes = ["exchange", extraClass].filter(Boolean).join(" ");
  return el(
    "article",
    { class: classes },
    el(
      "header",
      {},
      el("span", { class: "agent" }, entry.agent_id ?? "unknown"),
      el("span", { class: "tag" }, entry.request.request_tag),
      info.repair ? el("span", { class: "repair-flag" }, "repaired") : null,
    ),
    el("pre", { class: "reply" }, entry.response.content),
  );
}

function consultationNode(consultation: Consultation): HTMLElement {
  const section = el(
    "section",
    { class: "consultation" },
    el("h3", {}, `Conflict ${consultation.conflictId}`),
  );
  for (const entry of consultation.direct) {
    section.append(
      el("p", { class: "direct-note" }, "Resolved directly, no forum rounds."),
      exchangeNode(entry, "direct"),
    );
  }
  for (const round of [...consultation.rounds.keys()].sort((a, b) => a - b)) {
    section.append(el("div", { class: "round-marker" }, `Round ${round}`));
    for (const entry of consultation.rounds.get(round)!) {
      section.append(exchangeNode(entry, "statement"));
    }
  }
  for (const entry of consultation.mediator) {
    section.append(
      el(
        "div",
        { class: "mediator" },
        el("h4", {}, "Mediator decision"),
        exchangeNode(entry, "mediator-exchange"),
      ),
    );
  }
  return section;
}

/** Threaded view; anything it cannot interpret falls back to raw JSON so the
 * adjudicator is never left without the evidence. */
export function renderTranscript(doc: TranscriptDoc): HTMLElement {
  const container = el("div", { class: "transcript" });
  try {
    for (const group of threadEntries(doc.entries)) {
      if (group.kind === "stage") {
        container.append(exchangeNode(group.entry));
      } else {
        container.append(consultationNode(group.consultation));
      }
    }
    return container;
  } catch {
    return el(
      "div",
      { class: "transcript" },
      el("pre", { class: "raw-fallback" }, JSON.stringify(doc, null, 2)),
    );
  }
}
