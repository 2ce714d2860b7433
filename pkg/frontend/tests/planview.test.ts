import { describe, expect, it } from "vitest";

import { NO_PLAN_BANNER, Planner } from "../src/planview.js";
import { MockService } from "./mock.js";

const WAYPOINTS = [
  { x: 2.0, y: 2.0, z: 1.2, yaw: 0.0 },
  { x: 2.4, y: 2.3, z: 1.2, yaw: 0.2 },
  { x: 2.8, y: 2.6, z: 1.2, yaw: 0.4 },
  { x: 3.2, y: 3.0, z: 1.2, yaw: 0.5 },
];

describe("select-and-plan view", () => {
  it("renders the service waypoints verbatim with one polyline segment per pair", async () => {
    const svc = new MockService();
    svc.planResponses.set(5, {
      frame_id: 5,
      status: "planned",
      path: { planner: "RRT_STAR", length: 1.71, waypoints: WAYPOINTS },
    });
    const planner = new Planner(svc);
    const view = await planner.selectAndPlan(5);
    expect(view.waypoints).toEqual(WAYPOINTS); // never recomputed client-side
    expect(view.polyline).toEqual(WAYPOINTS.map((w) => [w.x, w.y]));
    expect(view.segments).toBe(WAYPOINTS.length - 1);
    expect(view.banner).toBeNull();
  });

  it("renders the failure banner on no_feasible_plan", async () => {
    const svc = new MockService();
    svc.planResponses.set(9, { frame_id: 9, status: "no_feasible_plan" });
    const planner = new Planner(svc);
    const view = await planner.selectAndPlan(9);
    expect(view.banner).toBe(NO_PLAN_BANNER);
    expect(view.waypoints).toHaveLength(0);
    expect(view.segments).toBe(0);
  });

  it("guards against double submission while a plan is pending", async () => {
    const svc = new MockService();
    let release!: () => void;
    svc.planDelay = new Promise((resolve) => {
      release = () => resolve();
    });
    svc.planResponses.set(1, {
      frame_id: 1,
      status: "planned",
      path: { planner: "RRT_STAR", length: 0.5, waypoints: WAYPOINTS.slice(0, 2) },
    });
    const planner = new Planner(svc);
    const first = planner.selectAndPlan(1);
    const second = planner.selectAndPlan(1); // while pending: dropped
    release();
    await Promise.all([first, second]);
    expect(svc.planCalls).toBe(1);
  });

  it("service errors surface as banners", async () => {
    const svc = new MockService();
    const planner = new Planner(svc);
    const view = await planner.selectAndPlan(404);
    expect(view.banner).toMatch(/service error 404/);
  });
});
