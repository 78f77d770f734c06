import { describe, expect, it } from "vitest";
import type { SeatEntry } from "../src/protocol.js";
import {
  connectionBadge,
  pulseScale,
  renderSeat,
  STALE_AFTER_MS,
} from "../src/render.js";

const liveSeat: SeatEntry = {
  seat: 0, label: "ana", idle: false,
  bpm: 72.4, confidence: 0.8, phase: 0.0,
  hist: Array(20).fill(72.0),
};

describe("pulseScale", () => {
  it("peaks at the beat and is visibly distinct half a cycle later", () => {
    const atBeat = pulseScale(0);
    const between = pulseScale(0.5);
    expect(atBeat).toBeGreaterThan(1.3);
    expect(between).toBeLessThan(1.01);
    expect(atBeat - between).toBeGreaterThan(0.25); // not a subtle difference
  });

  it("is periodic and handles the wrapped 1.0 the server may emit", () => {
    expect(pulseScale(1.0)).toBeCloseTo(pulseScale(0.0), 10);
    expect(pulseScale(0.25)).toBeCloseTo(pulseScale(1.25), 10);
  });
});

describe("renderSeat", () => {
  it("renders vitals when they are present", () => {
    const v = renderSeat(liveSeat);
    expect(v.live).toBe(true);
    expect(v.bpmText).toBe("72");
    expect(v.heartScale).toBeGreaterThan(1.3);
    expect(v.bars.every((b) => !b.empty)).toBe(true);
  });

  it("idle seat: no number anywhere, resting heart", () => {
    const v = renderSeat({ seat: 2, label: "finn", idle: true });
    expect(v.live).toBe(false);
    expect(v.bpmText).toBe("");
    expect(v.heartScale).toBe(1);
    expect(v.bars).toHaveLength(20);
    expect(v.bars.every((b) => b.empty && b.h === 0)).toBe(true);
  });

  it("hidden seat (not idle, no vitals) renders exactly like idle", () => {
    const hidden = renderSeat({ seat: 1, label: "me", idle: false });
    const idle = renderSeat({ seat: 1, label: "me", idle: true });
    expect(hidden).toEqual(idle);
  });

  it("an all-null histogram still yields a full row of empty bars", () => {
    const v = renderSeat({ ...liveSeat, hist: Array(20).fill(null) });
    expect(v.live).toBe(true);
    expect(v.bars).toHaveLength(20);
    expect(v.bars.every((b) => b.empty)).toBe(true);
  });

  it("histogram gaps are empty, values scale with rate", () => {
    const hist = [null, 40, 120, 200, ...Array(16).fill(null)];
    const v = renderSeat({ ...liveSeat, hist });
    expect(v.bars[0].empty).toBe(true);
    expect(v.bars[1].h).toBeLessThan(v.bars[2].h);
    expect(v.bars[2].h).toBeLessThan(v.bars[3].h);
    expect(v.bars[3].h).toBe(1);
    expect(v.bars[1].empty).toBe(false); // a 40 BPM bucket is not a gap
    expect(v.bars[1].h).toBeGreaterThan(0);
  });

  it("confidence dims, never hides", () => {
    const dim = renderSeat({ ...liveSeat, confidence: 0.0 });
    const bright = renderSeat({ ...liveSeat, confidence: 1.0 });
    expect(dim.opacity).toBeGreaterThan(0.2);
    expect(bright.opacity).toBe(1);
    expect(dim.bpmText).toBe("72"); // low confidence still shows the estimate
  });
});

describe("render-model leakage walk", () => {
  // The wire rule: vitals are present iff the viewer may see that seat.
  // Whatever the condition, the model must show nothing for entries
  // without vitals and never invent a number.
  const visible = (cond: string, viewer: number, subject: number) =>
    cond === "hr_all" || (cond === "hr_others" && viewer !== subject);

  it("walks all conditions and viewers without leaking", () => {
    for (const cond of ["hr_all", "hr_others", "hr_none"]) {
      for (let viewer = 0; viewer < 3; viewer++) {
        for (let subject = 0; subject < 3; subject++) {
          const idle = subject === 2; // one idle seat in every frame
          const canSee = visible(cond, viewer, subject) && !idle;
          const entry: SeatEntry = canSee
            ? { seat: subject, label: "p", idle,
                bpm: 99.9, confidence: 0.9, phase: 0.1, hist: Array(20).fill(99.9) }
            : { seat: subject, label: "p", idle };
          const v = renderSeat(entry);
          expect(v.live).toBe(canSee);
          if (!canSee) {
            expect(v.bpmText).toBe("");
            expect(v.bars.every((b) => b.empty)).toBe(true);
            expect(JSON.stringify(v)).not.toContain("99.9");
          }
        }
      }
    }
  });
});

describe("connectionBadge", () => {
  it("walks connecting -> live -> stale", () => {
    expect(connectionBadge(0, null, false, true)).toBe("connecting");
    expect(connectionBadge(1000, 900, false, true)).toBe("live");
    expect(connectionBadge(900 + STALE_AFTER_MS + 1, 900, false, true)).toBe("stale");
  });

  it("degraded and closed override freshness", () => {
    expect(connectionBadge(1000, 999, true, true)).toBe("degraded");
    expect(connectionBadge(1000, 999, false, false)).toBe("closed");
  });
});
