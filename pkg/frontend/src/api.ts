/** Thin client for the labeling service; fetch is injectable for tests. */

import type { Embedding, LabelKind, PairsResponse, Status } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private readonly base: string = "",
    private readonly fetchImpl: FetchLike = (u, i) => fetch(u, i),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchImpl(this.base + path, init);
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      throw new ApiError(resp.status, (body as { error?: string }).error ?? resp.statusText);
    }
    return body as T;
  }

  getPairs(count: number): Promise<PairsResponse> {
    return this.request<PairsResponse>(`/pairs?count=${count}`);
  }

  postLabel(pairId: string, kind: LabelKind): Promise<{ ok: boolean }> {
    return this.request(`/labels`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ pair_id: pairId, kind }),
    });
  }

  startRound(epochs: number): Promise<{ state: string; round: number }> {
    return this.request(`/round`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ epochs }),
    });
  }

  getStatus(): Promise<Status> {
    return this.request<Status>(`/status`);
  }

  getEmbedding(): Promise<Embedding> {
    return this.request<Embedding>(`/embedding`);
  }
}
