/** Client-side session state: card lifecycle, label queue, round tracking.
 *
 * Pure logic, no DOM. Labels go through a single-in-flight sender with an
 * offline queue; a pair flushes at most once per (pair, kind) even across
 * reconnects, and displayed counts only ever come from /status.
 */

import { ApiClient, ApiError } from "./api.js";
import type { LabelKind, Pair, Status } from "./types.js";

export type CardState = "open" | "must" | "cannot" | "skipped";

export interface Card {
  pair: Pair;
  state: CardState;
  pending: boolean; // submitted but not yet acknowledged by the journal
}

interface QueuedLabel {
  pairId: string;
  kind: LabelKind;
}

export class LabelingSession {
  cards: Card[] = [];
  exhausted = false;
  status: Status | null = null;
  private seen = new Set<string>();
  private queue: QueuedLabel[] = [];
  private draining: Promise<void> | null = null;

  constructor(private readonly api: ApiClient) {}

  /** Fetch more pairs; a card is created at most once per pair. */
  async fetchMore(count: number): Promise<Card[]> {
    const resp = await this.api.getPairs(count);
    this.exhausted = resp.exhausted;
    const fresh: Card[] = [];
    for (const pair of resp.pairs) {
      if (this.seen.has(pair.pair_id)) continue;
      this.seen.add(pair.pair_id);
      const card: Card = { pair, state: "open", pending: false };
      this.cards.push(card);
      fresh.push(card);
    }
    return fresh;
  }

  openCards(): Card[] {
    return this.cards.filter((c) => c.state === "open");
  }

  /** Record a decision locally and queue the submission (skip stays local). */
  decide(card: Card, decision: CardState): void {
    if (card.state !== "open") return; // revisits must go through relabel()
    card.state = decision;
    if (decision === "must" || decision === "cannot") {
      this.enqueue(card, decision);
    }
  }

  /** Change an earlier decision; latest wins server-side too. */
  relabel(card: Card, decision: LabelKind): void {
    card.state = decision;
    this.enqueue(card, decision);
  }

  private enqueue(card: Card, kind: LabelKind): void {
    card.pending = true;
    // replace any queued-but-unsent label for the same pair: latest wins,
    // and a (pair, kind) never flushes twice
    this.queue = this.queue.filter((q) => q.pairId !== card.pair.pair_id);
    this.queue.push({ pairId: card.pair.pair_id, kind });
    void this.flush();
  }

  /** Drain the queue with one request in flight; callers during a drain
   * join it instead of starting a second one. */
  flush(): Promise<void> {
    if (!this.draining) {
      this.draining = this.drain().finally(() => {
        this.draining = null;
      });
    }
    return this.draining;
  }

  private async drain(): Promise<void> {
    while (this.queue.length > 0) {
      const next = this.queue[0];
      try {
        await this.api.postLabel(next.pairId, next.kind);
      } catch (err) {
        if (err instanceof ApiError && err.status >= 400 && err.status < 500 && err.status !== 409) {
          this.queue.shift(); // permanent rejection: drop, don't wedge the queue
          continue;
        }
        return; // offline or busy: keep queued, a later flush retries
      }
      this.queue.shift();
      const card = this.cards.find((c) => c.pair.pair_id === next.pairId);
      if (card) card.pending = this.queue.some((q) => q.pairId === next.pairId);
    }
  }

  pendingCount(): number {
    return this.queue.length;
  }

  async refreshStatus(): Promise<Status> {
    this.status = await this.api.getStatus();
    return this.status;
  }

  async startRound(epochs: number): Promise<void> {
    await this.flush();
    await this.api.startRound(epochs);
  }
}
