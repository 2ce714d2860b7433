/**
 * DOM wiring for the operator console. All logic lives in the view models;
 * this file only renders their state and forwards clicks.
 */

import { HttpMissionClient } from "./api.js";
import { Dispatcher, TelemetryTracker } from "./dispatch.js";
import { Gallery, badgeCounts } from "./gallery.js";
import { topDownProjection, mapBounds } from "./mapview.js";
import { Planner } from "./planview.js";

const client = new HttpMissionClient("");
const gallery = new Gallery(client);
const planner = new Planner(client);
const dispatcher = new Dispatcher(client);
const tracker = new TelemetryTracker(client, Number.MAX_SAFE_INTEGER);

let selectedFrame: number | null = null;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setBanner(text: string | null): void {
  const banner = el<HTMLDivElement>("banner");
  banner.textContent = text ?? "";
  banner.style.display = text ? "block" : "none";
}

function renderGallery(): void {
  const root = el<HTMLDivElement>("gallery");
  root.replaceChildren();
  if (gallery.state.emptyPlaceholder) {
    const empty = document.createElement("p");
    empty.className = "empty";
    empty.textContent = "No frames captured yet - run a mapping flight.";
    root.appendChild(empty);
    return;
  }
  for (const card of gallery.state.cards) {
    const div = document.createElement("div");
    div.className = `card${selectedFrame === card.frameId ? " selected" : ""}`;
    const img = document.createElement("img");
    img.src = card.thumbnail;
    img.alt = `frame ${card.frameId}`;
    const caption = document.createElement("div");
    caption.textContent = `#${card.frameId} ${card.poseSummary}`;
    div.append(img, caption);
    if (card.badge !== "none") {
      const badge = document.createElement("span");
      badge.className = `badge ${card.badge.toLowerCase()}`;
      badge.textContent =
        card.confidence === undefined
          ? card.badge
          : `${card.badge} ${(card.confidence * 100).toFixed(0)}%`;
      div.appendChild(badge);
    }
    div.addEventListener("click", () => {
      selectedFrame = card.frameId;
      renderGallery();
    });
    root.appendChild(div);
  }
  const counts = badgeCounts(gallery.state.cards);
  el<HTMLSpanElement>("counts").textContent =
    `${counts.Crack} crack / ${counts.NonCrack} clean / ${counts.none} unlabeled`;
}

function renderPlan(): void {
  const svg = el<HTMLElement>("planline");
  const pts = planner.view.polyline
    .map(([x, y]) => `${(x * 60).toFixed(1)},${(400 - y * 60).toFixed(1)}`)
    .join(" ");
  svg.setAttribute("points", pts);
  el<HTMLSpanElement>("planinfo").textContent = planner.view.waypoints.length
    ? `${planner.view.segments} segments`
    : "";
  setBanner(planner.view.banner);
}

async function renderMap(): Promise<void> {
  const doc = await client.mapVoxels();
  const cells = topDownProjection(doc.voxels);
  const bounds = mapBounds(cells);
  const canvas = el<HTMLCanvasElement>("map");
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const sx = canvas.width / (bounds.maxX - bounds.minX + 1e-6);
  const sy = canvas.height / (bounds.maxY - bounds.minY + 1e-6);
  ctx.fillStyle = "#555";
  for (const c of cells) {
    ctx.fillRect((c.x - bounds.minX) * sx, canvas.height - (c.y - bounds.minY) * sy, 3, 3);
  }
  const pose = tracker.marker.pose;
  if (pose) {
    ctx.fillStyle = tracker.marker.stale ? "#f90" : "#d22";
    ctx.beginPath();
    ctx.arc((pose.x - bounds.minX) * sx, canvas.height - (pose.y - bounds.minY) * sy,
            5, 0, 2 * Math.PI);
    ctx.fill();
  }
}

async function init(): Promise<void> {
  el<HTMLButtonElement>("refresh").addEventListener("click", async () => {
    await gallery.refresh();
    renderGallery();
  });
  el<HTMLButtonElement>("detect").addEventListener("click", async () => {
    await gallery.detectCracks();
    renderGallery();
    setBanner(gallery.state.banner);
  });
  el<HTMLButtonElement>("plan").addEventListener("click", async () => {
    if (selectedFrame === null) return setBanner("select a frame first");
    await planner.selectAndPlan(selectedFrame);
    renderPlan();
  });
  el<HTMLButtonElement>("dispatch").addEventListener("click", async () => {
    if (selectedFrame === null) return setBanner("select a frame first");
    const state = await dispatcher.dispatch(selectedFrame);
    setBanner(`dispatch: ${state.banner}` +
      (state.finalError !== null ? ` (error ${state.finalError.toFixed(3)} m)` : ""));
  });

  await gallery.refresh();
  renderGallery();
  void renderMap();
  void tracker.run(() => void renderMap());
  setInterval(() => void renderMap(), 500); // live view at the capture rate
}

void init();
