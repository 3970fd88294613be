/** JSON protocol of the labeling service, consumed verbatim. */

export interface PointPayload {
  features: number[];
  pca: [number, number];
  pixels: number[] | null;
  shape: [number, number] | null;
}

export interface Pair {
  pair_id: string;
  p: number;
  q: number;
  loss: number;
  payload_p: PointPayload;
  payload_q: PointPayload;
}

export interface PairsResponse {
  pairs: Pair[];
  exhausted: boolean;
}

export interface Status {
  state: "idle" | "training" | "error";
  round: number;
  must_count: number;
  cannot_count: number;
  metrics?: { nmi: number; acc: number } | null;
  error?: string;
}

export interface Embedding {
  round: number;
  points: [number, number][];
  labels: number[];
}

export type LabelKind = "must" | "cannot";
