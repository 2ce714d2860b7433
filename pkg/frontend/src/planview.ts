/**
 * Revisit planning view model.
 *
 * Waypoints are kept exactly as the service returned them; the top-down
 * polyline is their (x, y) projection over the voxel-map slice. The view
 * guards against double submission while a plan request is in flight.
 */

import type { MissionClient, Waypoint } from "./api.js";
import { describeError } from "./gallery.js";

export interface PlanView {
  frameId: number | null;
  waypoints: Waypoint[];
  polyline: Array<[number, number]>;
  segments: number;
  banner: string | null;
  pending: boolean;
}

export const NO_PLAN_BANNER = "no feasible motion plan";

export class Planner {
  view: PlanView = {
    frameId: null,
    waypoints: [],
    polyline: [],
    segments: 0,
    banner: null,
    pending: false,
  };

  constructor(private client: MissionClient) {}

  async selectAndPlan(frameId: number, algorithm?: string): Promise<PlanView> {
    if (this.view.pending) return this.view; // idempotent double-submit guard
    this.view.pending = true;
    this.view.banner = null;
    try {
      const resp = await this.client.plan(frameId, algorithm);
      this.view.frameId = frameId;
      if (resp.status === "planned" && resp.path) {
        this.view.waypoints = resp.path.waypoints;
        this.view.polyline = resp.path.waypoints.map((w) => [w.x, w.y]);
        this.view.segments = Math.max(0, this.view.waypoints.length - 1);
      } else {
        this.view.waypoints = [];
        this.view.polyline = [];
        this.view.segments = 0;
        this.view.banner = NO_PLAN_BANNER;
      }
    } catch (err) {
      this.view.banner = describeError(err);
    } finally {
      this.view.pending = false;
    }
    return this.view;
  }
}
