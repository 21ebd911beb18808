import { describe, expect, it } from "vitest";

import { ApiClient } from "../src/api";
import { App } from "../src/app";
import { flakyFetch, fx, mount, stubFetch } from "./helpers";

const RUN_ROUTES = {
  "GET /runs": fx("runs"),
  "GET /runs/case1-pure-demo-model": fx("bundle_recorded"),
  "GET /cases/case1/gold": fx("gold_case1"),
  "GET /runs/case1-pure-demo-model/transcript": fx("transcript_pure"),
  "GET /report/radar": fx("radar"),
};

describe("run browser", () => {
  it("renders a card with a status badge for every stored run", async () => {
    const root = mount();
    const app = new App(root, new ApiClient("", stubFetch(RUN_ROUTES)));
    await app.showRunList();

    const cards = root.querySelectorAll(".run-card");
    expect(cards).toHaveLength(12);
    const badges = [...root.querySelectorAll(".run-card .badge")].map((b) => b.textContent);
    expect(badges.filter((b) => b === "classified")).toHaveLength(8);
    expect(badges.filter((b) => b === "complete")).toHaveLength(4);
    expect(
      root.querySelector('[data-run-id="case1-multi_agent-demo-model"] .badge')?.className,
    ).toContain("status-complete");
  });

  it("opens a run when its card is clicked", async () => {
    const root = mount();
    const app = new App(root, new ApiClient("", stubFetch(RUN_ROUTES)));
    await app.showRunList();

    const card = root.querySelector<HTMLElement>('[data-run-id="case1-pure-demo-model"]')!;
    card.click();
    await app.lastWrite;
    expect(root.querySelector(".run-header h2")?.textContent).toBe("case1-pure-demo-model");
    expect(root.querySelector(".gold-pane")).toBeTruthy();
  });

  it("shows a retry banner instead of crashing when the service is down", async () => {
    const root = mount();
    const fetch = flakyFetch(1, stubFetch(RUN_ROUTES));
    const app = new App(root, new ApiClient("", fetch));
    await app.showRunList();

    const banner = root.querySelector(".banner.error");
    expect(banner?.textContent).toContain("Cannot reach the adjudication service");
    expect(root.querySelectorAll(".run-card")).toHaveLength(0);

    root.querySelector<HTMLElement>(".retry")!.click();
    await app.lastWrite;
    expect(root.querySelector(".banner.error")).toBeNull();
    expect(root.querySelectorAll(".run-card")).toHaveLength(12);
  });
});
