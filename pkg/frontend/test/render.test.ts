import { describe, expect, it } from "vitest";

import {
  LOW_CONFIDENCE_BALLS,
  escapeHtml,
  formatProbability,
  renderGhost,
  renderHeader,
  renderPoint,
  renderStatus,
  renderTimeline,
} from "../src/render.js";
import { ConsoleState } from "../src/state.js";

function state(overrides: Partial<ConsoleState> = {}): ConsoleState {
  return {
    sessionId: "s1",
    checkpoint: null,
    context: {
      batting_team: "Team 01",
      bowling_team: "Team 00",
      target_score: 280,
    },
    timeline: [],
    ghost: null,
    pendingBuffered: false,
    status: "ready",
    lastError: null,
    sessionFull: false,
    ...overrides,
  };
}

const pt = (t: number, p = 0.5, wicket = false) => ({
  t, p_win: p, cum_runs: t, cum_wickets: wicket ? 1 : 0, wicket,
});

describe("renderPoint", () => {
  it("marks balls before the tenth over as low confidence", () => {
    expect(renderPoint(pt(LOW_CONFIDENCE_BALLS - 1))).toContain("low-confidence");
    expect(renderPoint(pt(LOW_CONFIDENCE_BALLS))).not.toContain("low-confidence");
  });

  it("annotates wicket balls", () => {
    expect(renderPoint(pt(10, 0.4, true))).toContain("wicket-icon");
    expect(renderPoint(pt(10, 0.4, false))).not.toContain("wicket-icon");
  });

  it("carries the exact server probability in data-p", () => {
    const p = 0.4983467201239;
    expect(renderPoint(pt(77, p))).toContain(`data-p="${String(p)}"`);
  });
});

describe("renderGhost", () => {
  it("is empty without a ghost", () => {
    expect(renderGhost(null)).toBe("");
  });

  it("is visually distinct from committed points", () => {
    const html = renderGhost({ t: 5, p_win: 0.7, cum_runs: 9, cum_wickets: 0 });
    expect(html).toContain("ghost");
    expect(renderPoint(pt(5, 0.7))).not.toContain("ghost");
  });
});

describe("renderTimeline", () => {
  it("renders one item per point plus the ghost", () => {
    const s = state({
      timeline: [pt(1), pt(2), pt(3)],
      ghost: { t: 4, p_win: 0.6, cum_runs: 4, cum_wickets: 0 },
    });
    const html = renderTimeline(s);
    expect(html.match(/<li/g)?.length).toBe(4);
    expect(html.match(/ghost/g)?.length).toBe(1);
  });
});

describe("renderHeader", () => {
  it("shows teams and target", () => {
    const html = renderHeader(state());
    expect(html).toContain("Team 01");
    expect(html).toContain("Team 00");
    expect(html).toContain("target 280");
  });

  it("escapes team names", () => {
    const s = state({
      context: { batting_team: "<x>", bowling_team: "&y", target_score: null },
    });
    const html = renderHeader(s);
    expect(html).toContain("&lt;x&gt;");
    expect(html).toContain("&amp;y");
    expect(html).not.toContain("target");
  });
});

describe("renderStatus", () => {
  it("shows the connection banner when disconnected", () => {
    expect(renderStatus(state({ status: "disconnected" }))).toContain("server unreachable");
  });

  it("shows the pending marker for buffered deliveries", () => {
    expect(renderStatus(state({ pendingBuffered: true }))).toContain("buffered");
  });

  it("is quiet when everything is fine", () => {
    expect(renderStatus(state())).toBe("");
  });
});

describe("helpers", () => {
  it("escapeHtml handles the four specials", () => {
    expect(escapeHtml(`<a href="x">&`)).toBe("&lt;a href=&quot;x&quot;&gt;&amp;");
  });

  it("formatProbability is the raw shortest round-trip form", () => {
    expect(formatProbability(0.5)).toBe("0.5");
    expect(formatProbability(0.1234567890123)).toBe("0.1234567890123");
  });
});
