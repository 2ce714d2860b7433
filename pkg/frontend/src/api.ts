/**
 * Typed client for the mission service HTTP API.
 *
 * View models depend on the MissionClient interface, never on fetch, so
 * tests drive them with an in-memory mock service. HttpMissionClient is the
 * production implementation; streaming endpoints surface as async iterables
 * of parsed JSONL events.
 */

export interface FrameRecord {
  id: number;
  t: number;
  x: number;
  y: number;
  z: number;
  yaw: number;
  image: string;
  label?: "Crack" | "NonCrack";
  confidence?: number;
}

export interface Waypoint {
  x: number;
  y: number;
  z: number;
  yaw: number;
}

export interface PlanResponse {
  frame_id: number;
  status: string; // planned | no_feasible_plan
  path?: { planner: string; length: number; waypoints: Waypoint[] };
}

export interface StatusEvent {
  status: string;
  frame_id: number;
  final_error?: number;
}

export interface TelemetryEvent {
  t: number;
  phase: string;
  pose: { x: number; y: number; z: number; yaw: number };
}

export interface VoxelRecord {
  i: number;
  j: number;
  k: number;
  x: number;
  y: number;
  z: number;
  p: number;
}

export interface MissionSnapshot {
  phase: string;
  t: number;
  vehicle: { x: number; y: number; z: number; yaw: number };
  counters: Record<string, number>;
}

export interface MissionClient {
  getMission(): Promise<MissionSnapshot>;
  getFrames(): Promise<FrameRecord[]>;
  frameImageUrl(frameId: number): string;
  classifyAll(classifier: string, endpoint?: string): Promise<void>;
  plan(frameId: number, algorithm?: string): Promise<PlanResponse>;
  execute(frameId: number): AsyncIterable<StatusEvent>;
  telemetry(): AsyncIterable<TelemetryEvent>;
  mapVoxels(): Promise<{ voxel_size: number; voxels: VoxelRecord[] }>;
}

export class ServiceError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

async function jsonOrThrow(resp: Response): Promise<unknown> {
  if (!resp.ok) {
    let detail = `HTTP ${resp.status}`;
    try {
      const doc = (await resp.json()) as { error?: string };
      if (doc.error) detail = doc.error;
    } catch {
      /* body was not JSON; keep the status text */
    }
    throw new ServiceError(resp.status, detail);
  }
  return resp.json();
}

/** Parse a streaming body into JSONL records. */
export async function* jsonLines<T>(resp: Response): AsyncIterable<T> {
  if (!resp.ok || resp.body === null) {
    throw new ServiceError(resp.status, `stream failed: HTTP ${resp.status}`);
  }
  const reader = resp.body.getReader();
  const decoder = new TextDecoder();
  let buffer = "";
  for (;;) {
    const { done, value } = await reader.read();
    if (done) break;
    buffer += decoder.decode(value, { stream: true });
    let nl;
    while ((nl = buffer.indexOf("\n")) >= 0) {
      const line = buffer.slice(0, nl).trim();
      buffer = buffer.slice(nl + 1);
      if (line) yield JSON.parse(line) as T;
    }
  }
  const tail = buffer.trim();
  if (tail) yield JSON.parse(tail) as T;
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class HttpMissionClient implements MissionClient {
  constructor(
    private baseUrl: string,
    private fetchFn: FetchLike = (u, i) => fetch(u, i),
  ) {}

  async getMission(): Promise<MissionSnapshot> {
    const resp = await this.fetchFn(`${this.baseUrl}/mission`);
    return (await jsonOrThrow(resp)) as MissionSnapshot;
  }

  async getFrames(): Promise<FrameRecord[]> {
    const resp = await this.fetchFn(`${this.baseUrl}/frames`);
    return (await jsonOrThrow(resp)) as FrameRecord[];
  }

  frameImageUrl(frameId: number): string {
    return `${this.baseUrl}/frames/${frameId}/image`;
  }

  async classifyAll(classifier: string, endpoint?: string): Promise<void> {
    const resp = await this.fetchFn(`${this.baseUrl}/classify_all`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(endpoint ? { classifier, endpoint } : { classifier }),
    });
    await jsonOrThrow(resp);
  }

  async plan(frameId: number, algorithm?: string): Promise<PlanResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/plan`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(
        algorithm ? { frame_id: frameId, algorithm } : { frame_id: frameId },
      ),
    });
    return (await jsonOrThrow(resp)) as PlanResponse;
  }

  async *execute(frameId: number): AsyncIterable<StatusEvent> {
    const resp = await this.fetchFn(`${this.baseUrl}/execute`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ frame_id: frameId }),
    });
    yield* jsonLines<StatusEvent>(resp);
  }

  async *telemetry(): AsyncIterable<TelemetryEvent> {
    const resp = await this.fetchFn(`${this.baseUrl}/telemetry`);
    yield* jsonLines<TelemetryEvent>(resp);
  }

  async mapVoxels(): Promise<{ voxel_size: number; voxels: VoxelRecord[] }> {
    const resp = await this.fetchFn(`${this.baseUrl}/map/voxels`);
    return (await jsonOrThrow(resp)) as {
      voxel_size: number;
      voxels: VoxelRecord[];
    };
  }
}
