/** In-memory mocked mission service implementing the MissionClient interface. */

import type {
  FrameRecord,
  MissionClient,
  MissionSnapshot,
  PlanResponse,
  StatusEvent,
  TelemetryEvent,
  VoxelRecord,
} from "../src/api.js";
import { ServiceError } from "../src/api.js";

export function frame(id: number, label?: "Crack" | "NonCrack"): FrameRecord {
  return {
    id,
    t: id * 0.5,
    x: 2 + 0.1 * id,
    y: 2,
    z: 1.2,
    yaw: 0.1 * id,
    image: `frame_${id}_rgb.png`,
    ...(label ? { label, confidence: 0.9 } : {}),
  };
}

export class MockService implements MissionClient {
  frames: FrameRecord[] = [];
  planResponses = new Map<number, PlanResponse>();
  executeScripts = new Map<number, StatusEvent[]>();
  telemetryBatches: TelemetryEvent[][] = [];
  voxels: VoxelRecord[] = [];
  classifyCalls = 0;
  planCalls = 0;
  classified: FrameRecord[] | null = null;
  planDelay: Promise<void> | null = null;

  async getMission(): Promise<MissionSnapshot> {
    return {
      phase: "awaiting_selection",
      t: 0,
      vehicle: { x: 2, y: 2, z: 1.2, yaw: 0 },
      counters: { frames: this.frames.length },
    };
  }

  async getFrames(): Promise<FrameRecord[]> {
    return this.frames.map((f) => ({ ...f }));
  }

  frameImageUrl(frameId: number): string {
    return `/frames/${frameId}/image`;
  }

  async classifyAll(): Promise<void> {
    this.classifyCalls += 1;
    if (this.classified) this.frames = this.classified;
  }

  async plan(frameId: number): Promise<PlanResponse> {
    this.planCalls += 1;
    if (this.planDelay) await this.planDelay;
    const resp = this.planResponses.get(frameId);
    if (!resp) throw new ServiceError(404, `no frame ${frameId}`);
    return resp;
  }

  async *execute(frameId: number): AsyncIterable<StatusEvent> {
    const script = this.executeScripts.get(frameId);
    if (!script) throw new ServiceError(404, `no frame ${frameId}`);
    for (const ev of script) yield ev;
  }

  async *telemetry(): AsyncIterable<TelemetryEvent> {
    const batch = this.telemetryBatches.shift();
    if (batch === undefined) throw new Error("stream dropped");
    for (const ev of batch) yield ev;
    if (this.telemetryBatches.length > 0) throw new Error("stream dropped");
  }

  async mapVoxels() {
    return { voxel_size: 0.1, voxels: this.voxels };
  }
}
