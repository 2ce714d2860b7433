/**
 * Frame gallery view model.
 *
 * Badges mirror the latest service-side classification verbatim; nothing is
 * classified client-side. "Detect cracks" posts classify_all and refreshes.
 */

import type { FrameRecord, MissionClient } from "./api.js";
import { ServiceError } from "./api.js";

export type Badge = "none" | "Crack" | "NonCrack";

export interface FrameCard {
  frameId: number;
  thumbnail: string;
  poseSummary: string;
  badge: Badge;
  confidence?: number;
}

export interface GalleryState {
  cards: FrameCard[];
  emptyPlaceholder: boolean;
  busy: boolean;
  banner: string | null;
}

export function cardFromRecord(rec: FrameRecord, imageUrl: string): FrameCard {
  return {
    frameId: rec.id,
    thumbnail: imageUrl,
    poseSummary:
      `(${rec.x.toFixed(2)}, ${rec.y.toFixed(2)}, ${rec.z.toFixed(2)}) ` +
      `yaw ${rec.yaw.toFixed(2)}`,
    badge: rec.label ?? "none",
    confidence: rec.confidence,
  };
}

export function badgeCounts(cards: FrameCard[]): Record<Badge, number> {
  const counts: Record<Badge, number> = { none: 0, Crack: 0, NonCrack: 0 };
  for (const c of cards) counts[c.badge] += 1;
  return counts;
}

export class Gallery {
  state: GalleryState = {
    cards: [],
    emptyPlaceholder: true,
    busy: false,
    banner: null,
  };

  constructor(private client: MissionClient) {}

  async refresh(): Promise<GalleryState> {
    try {
      const frames = await this.client.getFrames();
      this.state.cards = frames.map((f) =>
        cardFromRecord(f, this.client.frameImageUrl(f.id)),
      );
      this.state.emptyPlaceholder = this.state.cards.length === 0;
      this.state.banner = null;
    } catch (err) {
      this.state.banner = describeError(err);
    }
    return this.state;
  }

  /** The optional crack-detection action; re-badges from the service. */
  async detectCracks(classifier = "reference", endpoint?: string): Promise<GalleryState> {
    if (this.state.busy) return this.state;
    this.state.busy = true;
    try {
      await this.client.classifyAll(classifier, endpoint);
      await this.refresh();
    } catch (err) {
      this.state.banner = describeError(err);
    } finally {
      this.state.busy = false;
    }
    return this.state;
  }
}

export function describeError(err: unknown): string {
  if (err instanceof ServiceError) return `service error ${err.status}: ${err.message}`;
  return `service unreachable: ${String(err)}`;
}
