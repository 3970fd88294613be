/** Pixel-exact rendering helpers for grayscale byte payloads. */

/**
 * Expand row-major grayscale bytes into an RGBA buffer suitable for
 * putImageData. Each byte v becomes the opaque gray (v, v, v, 255);
 * nothing is rescaled, so the canvas shows exactly the payload bytes.
 */
export function grayscaleToRgba(
  pixels: number[],
  shape: [number, number],
): Uint8ClampedArray<ArrayBuffer> {
  const [h, w] = shape;
  if (pixels.length !== h * w) {
    throw new Error(`payload has ${pixels.length} bytes, shape wants ${h * w}`);
  }
  const out = new Uint8ClampedArray(new ArrayBuffer(h * w * 4));
  for (let i = 0; i < pixels.length; i++) {
    const v = pixels[i];
    if (!Number.isInteger(v) || v < 0 || v > 255) {
      throw new Error(`pixel ${i} out of byte range: ${v}`);
    }
    out[4 * i] = v;
    out[4 * i + 1] = v;
    out[4 * i + 2] = v;
    out[4 * i + 3] = 255;
  }
  return out;
}

/** Normalized [0,1] bar heights for the feature view of non-image data. */
export function featureBars(features: number[]): number[] {
  const lo = Math.min(...features);
  const hi = Math.max(...features);
  const span = hi - lo;
  if (span === 0) return features.map(() => 0.5);
  return features.map((v) => (v - lo) / span);
}

/**
 * Map data-space scatter coordinates into a unit square, preserving the
 * aspect ratio; used for both the overview embedding and the per-card
 * highlight view.
 */
export function normalizeScatter(points: [number, number][]): [number, number][] {
  if (points.length === 0) return [];
  const xs = points.map((p) => p[0]);
  const ys = points.map((p) => p[1]);
  const cx = (Math.min(...xs) + Math.max(...xs)) / 2;
  const cy = (Math.min(...ys) + Math.max(...ys)) / 2;
  const span = Math.max(
    Math.max(...xs) - Math.min(...xs),
    Math.max(...ys) - Math.min(...ys),
    1e-12,
  );
  return points.map(([x, y]) => [0.5 + (x - cx) / span, 0.5 + (y - cy) / span]);
}
