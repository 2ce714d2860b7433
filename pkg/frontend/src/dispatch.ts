/**
 * Dispatch flow: POST /execute, follow the streamed status transitions to a
 * terminal banner, and track the live vehicle marker from /telemetry with a
 * stale-data indicator and reconnect.
 */

import type { MissionClient, TelemetryEvent } from "./api.js";
import { describeError } from "./gallery.js";

export type DispatchBanner =
  | "idle"
  | "planning"
  | "executing"
  | "executed"
  | "no feasible motion plan"
  | "execution aborted"
  | string;

export interface DispatchState {
  frameId: number | null;
  banner: DispatchBanner;
  finalError: number | null;
  terminal: boolean;
}

const TERMINAL: Record<string, DispatchBanner> = {
  executed: "executed",
  execution_aborted: "execution aborted",
  no_feasible_plan: "no feasible motion plan",
};

export class Dispatcher {
  state: DispatchState = {
    frameId: null,
    banner: "idle",
    finalError: null,
    terminal: false,
  };

  constructor(private client: MissionClient) {}

  async dispatch(frameId: number): Promise<DispatchState> {
    this.state = { frameId, banner: "planning", finalError: null, terminal: false };
    try {
      for await (const ev of this.client.execute(frameId)) {
        if (ev.status in TERMINAL) {
          this.state.banner = TERMINAL[ev.status];
          this.state.finalError = ev.final_error ?? null;
          this.state.terminal = true;
        } else {
          this.state.banner = ev.status as DispatchBanner;
        }
      }
      if (!this.state.terminal) {
        this.state.banner = "execution aborted";
        this.state.terminal = true;
      }
    } catch (err) {
      this.state.banner = describeError(err);
      this.state.terminal = true;
    }
    return this.state;
  }
}

export interface MarkerState {
  pose: { x: number; y: number; z: number; yaw: number } | null;
  phase: string;
  stale: boolean;
  reconnects: number;
}

export class TelemetryTracker {
  marker: MarkerState = { pose: null, phase: "unknown", stale: false, reconnects: 0 };

  constructor(
    private client: MissionClient,
    private maxReconnects = 3,
  ) {}

  /** Consume the telemetry stream, reconnecting on drops. */
  async run(onUpdate?: (m: MarkerState) => void): Promise<MarkerState> {
    for (let attempt = 0; ; attempt++) {
      try {
        for await (const ev of this.client.telemetry()) {
          this.apply(ev);
          onUpdate?.(this.marker);
        }
        return this.marker; // clean end of stream
      } catch {
        this.marker.stale = true;
        this.marker.reconnects += 1;
        onUpdate?.(this.marker);
        if (attempt + 1 >= this.maxReconnects) return this.marker;
      }
    }
  }

  apply(ev: TelemetryEvent): void {
    this.marker.pose = ev.pose;
    this.marker.phase = ev.phase;
    this.marker.stale = false;
  }
}
