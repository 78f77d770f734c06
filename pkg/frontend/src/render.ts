// Pure view model: wire message in, numbers and strings out. No DOM here,
// which keeps the leakage rule testable without a browser.

import type { SeatEntry } from "./protocol.js";
import { HIST_BUCKETS } from "./protocol.js";

// histogram vertical axis; matches the band the estimator can produce
export const BAND_LO = 40;
export const BAND_HI = 200;

// no state frame for this long means the connection is stale
export const STALE_AFTER_MS = 2000;

export interface Bar {
  h: number; // 0..1 of the axis height
  empty: boolean;
}

export interface SeatVisual {
  seat: number;
  label: string;
  live: boolean; // vitals present in the wire message
  bpmText: string; // "" unless live
  heartScale: number; // 1 unless live; the pulse curve drives live hearts
  opacity: number; // confidence dimming, 1 unless live says otherwise
  bars: Bar[]; // always HIST_BUCKETS long, oldest first
}

/** Icon scale over one beat: sharp kick peaking at phase 0, then relaxed. */
export function pulseScale(phase: number): number {
  const p = ((phase % 1) + 1) % 1;
  const d = Math.min(p, 1 - p); // distance to the beat instant
  return 1 + 0.35 * Math.exp(-(d * d) / 0.028);
}

const EMPTY_BARS: Bar[] = Array.from({ length: HIST_BUCKETS }, () => ({
  h: 0,
  empty: true,
}));

function bar(bpm: number | null): Bar {
  if (bpm === null) return { h: 0, empty: true };
  const t = (bpm - BAND_LO) / (BAND_HI - BAND_LO);
  // floor at 6% so a 40 BPM bucket is still distinguishable from a gap
  return { h: Math.max(0.06, Math.min(1, t)), empty: false };
}

/**
 * One seat card. Seats without vitals (idle, or hidden by the condition)
 * render the idling look: no number, no bars, resting heart. Whatever the
 * reason for absence, nothing physiological leaves this function.
 */
export function renderSeat(view: SeatEntry): SeatVisual {
  const live =
    view.bpm !== undefined &&
    view.phase !== undefined &&
    view.confidence !== undefined &&
    view.hist !== undefined;
  if (!live) {
    return {
      seat: view.seat,
      label: view.label,
      live: false,
      bpmText: "",
      heartScale: 1,
      opacity: 1,
      bars: EMPTY_BARS,
    };
  }
  return {
    seat: view.seat,
    label: view.label,
    live: true,
    bpmText: String(Math.round(view.bpm!)),
    heartScale: pulseScale(view.phase!),
    opacity: 0.35 + 0.65 * view.confidence!,
    bars: view.hist!.map(bar),
  };
}

export type ConnectionBadge = "connecting" | "live" | "stale" | "degraded" | "closed";

/** Badge from the last-seen timestamps; degraded wins until a good frame. */
export function connectionBadge(
  nowMs: number,
  lastStateMs: number | null,
  degraded: boolean,
  open: boolean,
): ConnectionBadge {
  if (!open) return "closed";
  if (degraded) return "degraded";
  if (lastStateMs === null) return "connecting";
  return nowMs - lastStateMs > STALE_AFTER_MS ? "stale" : "live";
}
