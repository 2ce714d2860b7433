import { describe, expect, it } from "vitest";

import { Gallery, badgeCounts } from "../src/gallery.js";
import { MockService, frame } from "./mock.js";

describe("frame gallery", () => {
  it("shows the empty-state placeholder on a fresh mission", async () => {
    const gallery = new Gallery(new MockService());
    const state = await gallery.refresh();
    expect(state.cards).toHaveLength(0);
    expect(state.emptyPlaceholder).toBe(true);
  });

  it("badges mirror exactly the service-reported labels after detection", async () => {
    const svc = new MockService();
    svc.frames = [frame(0), frame(1), frame(2), frame(3)];
    svc.classified = [
      frame(0, "Crack"),
      frame(1, "NonCrack"),
      frame(2, "Crack"),
      frame(3, "NonCrack"),
    ];
    const gallery = new Gallery(svc);
    await gallery.refresh();
    expect(gallery.state.cards.every((c) => c.badge === "none")).toBe(true);

    const state = await gallery.detectCracks();
    expect(svc.classifyCalls).toBe(1);
    const crackIds = state.cards.filter((c) => c.badge === "Crack").map((c) => c.frameId);
    const serviceCrackIds = svc.classified
      .filter((f) => f.label === "Crack")
      .map((f) => f.id);
    expect(crackIds).toEqual(serviceCrackIds);
  });

  it("badge counts equal the /frames label counts", async () => {
    const svc = new MockService();
    svc.frames = [
      frame(0, "Crack"),
      frame(1, "Crack"),
      frame(2, "NonCrack"),
      frame(3),
    ];
    const gallery = new Gallery(svc);
    const state = await gallery.refresh();
    const counts = badgeCounts(state.cards);
    expect(counts.Crack).toBe(svc.frames.filter((f) => f.label === "Crack").length);
    expect(counts.NonCrack).toBe(svc.frames.filter((f) => f.label === "NonCrack").length);
    expect(counts.none).toBe(svc.frames.filter((f) => !f.label).length);
  });

  it("pose summary and thumbnail come from the service record verbatim", async () => {
    const svc = new MockService();
    svc.frames = [frame(7, "Crack")];
    const gallery = new Gallery(svc);
    const state = await gallery.refresh();
    expect(state.cards[0].thumbnail).toBe("/frames/7/image");
    expect(state.cards[0].poseSummary).toContain("2.70");
    expect(state.cards[0].confidence).toBe(0.9);
  });

  it("service failures surface as a banner, never swallowed", async () => {
    const svc = new MockService();
    svc.getFrames = async () => {
      throw new Error("connection refused");
    };
    const gallery = new Gallery(svc);
    const state = await gallery.refresh();
    expect(state.banner).toMatch(/unreachable|connection/);
  });
});
