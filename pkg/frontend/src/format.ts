/** Pure presentation helpers, kept free of DOM and network so they test flat. */

import type { RoundRecord } from "./api.js";

export interface RankedLabel {
  name: string;
  p: number;
}

/** Highest-probability labels first; ties break by name so order is stable. */
export function topProbabilities(
  probs: Record<string, number>,
  n: number = 3,
): RankedLabel[] {
  return Object.entries(probs)
    .map(([name, p]) => ({ name, p }))
    .sort((a, b) => b.p - a.p || a.name.localeCompare(b.name))
    .slice(0, n);
}

export function pct(x: number | null | undefined, digits: number = 1): string {
  if (x === null || x === undefined || Number.isNaN(x)) return "n/a";
  return `${(100 * x).toFixed(digits)}%`;
}

export type Shortcut = { kind: "label"; index: number } | { kind: "skip" };

/**
 * Keyboard mapping for the annotate screen: digits 1-9 pick labels 0-8,
 * 0 picks label 9, and S skips. Digits beyond the registry are ignored.
 */
export function shortcutFor(key: string, labelCount: number): Shortcut | null {
  if (key === "s" || key === "S") return { kind: "skip" };
  if (!/^[0-9]$/.test(key)) return null;
  const index = key === "0" ? 9 : Number(key) - 1;
  return index < labelCount ? { kind: "label", index } : null;
}

export interface ChartPoint {
  x: number;
  y: number;
  iteration: number;
  f1: number;
}

/**
 * Scale rounds with a defined validation F1 into an SVG viewport. The x axis
 * spans the full iteration range; y runs 0..1 bottom-up inside the padding.
 */
export function f1ChartPoints(
  rounds: RoundRecord[],
  width: number,
  height: number,
  pad: number = 16,
): ChartPoint[] {
  const defined = rounds.filter((r) => r.val_macro_f1 !== null);
  if (defined.length === 0) return [];
  const first = defined[0]!.iteration;
  const last = defined[defined.length - 1]!.iteration;
  const span = Math.max(last - first, 1);
  const innerW = width - 2 * pad;
  const innerH = height - 2 * pad;
  return defined.map((r) => ({
    x: pad + ((r.iteration - first) / span) * innerW,
    y: pad + (1 - (r.val_macro_f1 as number)) * innerH,
    iteration: r.iteration,
    f1: r.val_macro_f1 as number,
  }));
}

export function polylinePoints(points: ChartPoint[]): string {
  return points.map((p) => `${p.x.toFixed(1)},${p.y.toFixed(1)}`).join(" ");
}

/** Buckets a top-1 confidence for styling: the queue sorts least sure first. */
export function confidenceBucket(c: number): "low" | "mid" | "high" {
  if (c < 0.5) return "low";
  if (c < 0.8) return "mid";
  return "high";
}
