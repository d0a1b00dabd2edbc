// Client-side stroke rasterization for live mask preview.
//
// The server's rasterization is authoritative (the client submits the
// StrokeSet, never pixels); this mirrors its semantics exactly so the
// preview is pixel-identical: a pixel is covered when its center lies
// within `radius` of the stroke polyline (point-to-segment distance,
// inclusive endpoints). Later strokes win; erase strokes clear.

import type { StrokeJson } from "./types";

export function rasterizeStrokes(
  strokes: StrokeJson[],
  width: number,
  height: number,
): Uint8Array {
  const canvas = new Uint8Array(width * height); // 0 | 1
  for (const stroke of strokes) {
    if (stroke.radius < 1) throw new Error(`brush radius ${stroke.radius} below 1`);
    if (stroke.points.length === 0) throw new Error("stroke has no points");
    for (const [x, y] of stroke.points) {
      if (x < 0 || x >= width || y < 0 || y >= height) {
        throw new Error(`point (${x}, ${y}) outside ${width}x${height}`);
      }
    }
    const pts = stroke.points;
    const segments: [[number, number], [number, number]][] =
      pts.length === 1
        ? [[pts[0], pts[0]]]
        : pts.slice(0, -1).map((p, i) => [p, pts[i + 1]] as [[number, number], [number, number]]);
    const value = stroke.mode === "erase" ? 0 : 1;
    for (const [[x0, y0], [x1, y1]] of segments) {
      stampSegment(canvas, width, height, x0, y0, x1, y1, stroke.radius, value);
    }
  }
  return canvas;
}

function stampSegment(
  canvas: Uint8Array,
  width: number,
  height: number,
  x0: number,
  y0: number,
  x1: number,
  y1: number,
  radius: number,
  value: 0 | 1,
): void {
  const loX = Math.max(0, Math.floor(Math.min(x0, x1) - radius));
  const hiX = Math.min(width - 1, Math.ceil(Math.max(x0, x1) + radius));
  const loY = Math.max(0, Math.floor(Math.min(y0, y1) - radius));
  const hiY = Math.min(height - 1, Math.ceil(Math.max(y0, y1) + radius));
  const dx = x1 - x0;
  const dy = y1 - y0;
  const len2 = dx * dx + dy * dy;
  const r2 = radius * radius;
  for (let y = loY; y <= hiY; y++) {
    for (let x = loX; x <= hiX; x++) {
      let ddx: number;
      let ddy: number;
      if (len2 === 0) {
        ddx = x - x0;
        ddy = y - y0;
      } else {
        let t = ((x - x0) * dx + (y - y0) * dy) / len2;
        t = Math.min(Math.max(t, 0), 1);
        ddx = x - (x0 + t * dx);
        ddy = y - (y0 + t * dy);
      }
      if (ddx * ddx + ddy * ddy <= r2) {
        canvas[y * width + x] = value;
      }
    }
  }
}

export function maskIsEmpty(mask: Uint8Array): boolean {
  return !mask.some((v) => v === 1);
}

// RGBA overlay for drawing the preview onto a canvas.
export function maskToOverlay(
  mask: Uint8Array,
  rgba: [number, number, number, number] = [255, 40, 40, 110],
): Uint8ClampedArray<ArrayBuffer> {
  const out = new Uint8ClampedArray(mask.length * 4);
  for (let i = 0; i < mask.length; i++) {
    if (mask[i]) {
      out[i * 4] = rgba[0];
      out[i * 4 + 1] = rgba[1];
      out[i * 4 + 2] = rgba[2];
      out[i * 4 + 3] = rgba[3];
    }
  }
  return out;
}
