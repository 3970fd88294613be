/** DOM wiring for the pair-labeling UI.
 *
 * Cards show both points of a high-loss pair (pixel grid for image data,
 * feature bars plus a highlighted scatter otherwise). Keyboard: m = must,
 * c = cannot, s = skip, applied to the first open card. The embedding
 * panel polls the server and animates across training rounds.
 */

import { ApiClient } from "./api.js";
import { featureBars, grayscaleToRgba, normalizeScatter } from "./pixels.js";
import { Card, LabelingSession } from "./session.js";
import type { Embedding, PointPayload } from "./types.js";

const api = new ApiClient("");
const session = new LabelingSession(api);

const cardsEl = document.getElementById("cards") as HTMLElement;
const statusEl = document.getElementById("status") as HTMLElement;
const pendingEl = document.getElementById("pending") as HTMLElement;
const emptyEl = document.getElementById("empty") as HTMLElement;
const roundBtn = document.getElementById("round") as HTMLButtonElement;
const epochsEl = document.getElementById("epochs") as HTMLInputElement;
const embedCanvas = document.getElementById("embedding") as HTMLCanvasElement;
const embedRound = document.getElementById("embedding-round") as HTMLElement;

let lastEmbeddingRound = -1;
let lastEmbedding: Embedding | null = null;

const PALETTE = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3",
                 "#937860", "#da8bc3", "#8c8c8c", "#ccb974", "#64b5cd"];

function renderPoint(payload: PointPayload, el: HTMLElement): void {
  if (payload.pixels && payload.shape) {
    const [h, w] = payload.shape;
    const canvas = document.createElement("canvas");
    canvas.width = w;
    canvas.height = h;
    canvas.className = "pixelgrid";
    const ctx = canvas.getContext("2d")!;
    ctx.putImageData(new ImageData(grayscaleToRgba(payload.pixels, [h, w]), w, h), 0, 0);
    el.appendChild(canvas);
    return;
  }
  const bars = document.createElement("div");
  bars.className = "bars";
  for (const height of featureBars(payload.features)) {
    const bar = document.createElement("div");
    bar.style.height = `${Math.round(height * 100)}%`;
    bars.appendChild(bar);
  }
  el.appendChild(bars);
  if (lastEmbedding) {
    el.appendChild(miniScatter(payload.pca));
  }
}

function miniScatter(highlight: [number, number]): HTMLCanvasElement {
  const canvas = document.createElement("canvas");
  canvas.width = 90;
  canvas.height = 90;
  canvas.className = "miniscatter";
  const ctx = canvas.getContext("2d")!;
  const emb = lastEmbedding!;
  const norm = normalizeScatter([...emb.points, highlight]);
  ctx.fillStyle = "#d8d8d8";
  for (let i = 0; i < emb.points.length; i++) {
    const [x, y] = norm[i];
    ctx.fillRect(x * 86 + 2, (1 - y) * 86 + 2, 2, 2);
  }
  const [hx, hy] = norm[norm.length - 1];
  ctx.fillStyle = "#c44e52";
  ctx.beginPath();
  ctx.arc(hx * 86 + 2, (1 - hy) * 86 + 2, 4, 0, 2 * Math.PI);
  ctx.fill();
  return canvas;
}

function renderCard(card: Card): HTMLElement {
  const el = document.createElement("div");
  el.className = "card";
  el.dataset.pairId = card.pair.pair_id;

  const head = document.createElement("div");
  head.className = "card-head";
  head.textContent = `pair ${card.pair.p} / ${card.pair.q} · loss ${card.pair.loss.toFixed(4)}`;
  el.appendChild(head);

  const points = document.createElement("div");
  points.className = "points";
  for (const payload of [card.pair.payload_p, card.pair.payload_q]) {
    const side = document.createElement("div");
    side.className = "point";
    renderPoint(payload, side);
    points.appendChild(side);
  }
  el.appendChild(points);

  const buttons = document.createElement("div");
  buttons.className = "buttons";
  for (const [label, action] of [
    ["must-link", "must"],
    ["cannot-link", "cannot"],
    ["skip", "skipped"],
  ] as const) {
    const btn = document.createElement("button");
    btn.textContent = label;
    btn.className = action;
    btn.addEventListener("click", () => decide(card, action));
    buttons.appendChild(btn);
  }
  el.appendChild(buttons);
  return el;
}

function decide(card: Card, decision: "must" | "cannot" | "skipped"): void {
  session.decide(card, decision);
  const el = cardsEl.querySelector(`[data-pair-id="${card.pair.pair_id}"]`);
  if (el) {
    // cannot-link pairs get the red frame, must-link the green one
    el.classList.add(`decided-${decision}`);
    (el.querySelectorAll("button") as NodeListOf<HTMLButtonElement>).forEach(
      (b) => (b.disabled = true),
    );
  }
  updatePendingBadge();
  void topUp();
}

async function topUp(): Promise<void> {
  if (session.openCards().length >= 3 || session.exhausted) {
    renderEmptyState();
    return;
  }
  const fresh = await session.fetchMore(6);
  for (const card of fresh) {
    cardsEl.appendChild(renderCard(card));
  }
  renderEmptyState();
}

function renderEmptyState(): void {
  const empty = session.openCards().length === 0 && session.exhausted;
  emptyEl.style.display = empty ? "block" : "none";
}

function updatePendingBadge(): void {
  const n = session.pendingCount();
  pendingEl.textContent = n > 0 ? `${n} label(s) pending` : "";
}

async function pollStatus(): Promise<void> {
  try {
    const status = await session.refreshStatus();
    const metrics = status.metrics
      ? ` · nmi ${status.metrics.nmi.toFixed(3)} acc ${status.metrics.acc.toFixed(3)}`
      : "";
    statusEl.textContent =
      `${status.state} · round ${status.round} · ` +
      `${status.must_count} must / ${status.cannot_count} cannot${metrics}` +
      (status.error ? ` · ${status.error}` : "");
    statusEl.className = `badge ${status.state}`;
    roundBtn.disabled = status.state === "training";
    if (status.state === "idle" && status.round !== lastEmbeddingRound) {
      await refreshEmbedding();
      if (status.round > 0) {
        await topUp(); // queue is refreshed after each round
      }
    }
    void session.flush(); // retry anything stuck from offline spells
    updatePendingBadge();
  } catch {
    statusEl.textContent = "service unreachable — retrying";
    statusEl.className = "badge error";
  }
}

async function refreshEmbedding(): Promise<void> {
  const emb = await api.getEmbedding();
  lastEmbedding = emb;
  lastEmbeddingRound = emb.round;
  embedRound.textContent = `round ${emb.round}`;
  const ctx = embedCanvas.getContext("2d")!;
  ctx.clearRect(0, 0, embedCanvas.width, embedCanvas.height);
  const norm = normalizeScatter(emb.points);
  const size = embedCanvas.width;
  for (let i = 0; i < norm.length; i++) {
    const [x, y] = norm[i];
    ctx.fillStyle = PALETTE[emb.labels[i] % PALETTE.length];
    ctx.fillRect(x * (size - 8) + 4, (1 - y) * (size - 8) + 4, 3, 3);
  }
}

document.addEventListener("keydown", (event) => {
  const key = event.key.toLowerCase();
  const mapping: Record<string, "must" | "cannot" | "skipped"> = {
    m: "must",
    c: "cannot",
    s: "skipped",
  };
  if (key in mapping) {
    const open = session.openCards();
    if (open.length > 0) decide(open[0], mapping[key]);
  }
});

roundBtn.addEventListener("click", () => {
  void session.startRound(parseInt(epochsEl.value || "10", 10)).then(pollStatus);
});

void (async () => {
  await pollStatus();
  await refreshEmbedding().catch(() => undefined);
  await topUp();
  setInterval(() => void pollStatus(), 1000);
})();
