/** Pure HTML renderers: state in, markup string out.  No probability math
 * happens here; every number is printed as the server sent it. */

import { ProbabilityPoint } from "./api.js";
import { ConsoleState, TimelinePoint } from "./state.js";

/** Balls before this count render with the low-confidence treatment
 * (predictions earlier than the 10th over are advisory only). */
export const LOW_CONFIDENCE_BALLS = 60;

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function formatProbability(p: number): string {
  return String(p);
}

function pointClasses(point: TimelinePoint): string {
  const classes = ["point"];
  if (point.t < LOW_CONFIDENCE_BALLS) classes.push("low-confidence");
  if (point.wicket) classes.push("wicket");
  return classes.join(" ");
}

export function renderPoint(point: TimelinePoint): string {
  const pct = Math.round(point.p_win * 1000) / 10;
  return (
    `<li class="${pointClasses(point)}" data-t="${point.t}" data-p="${formatProbability(point.p_win)}">` +
    `<span class="ball">ball ${point.t}</span>` +
    `<span class="bar"><span class="fill" style="width:${pct}%"></span></span>` +
    `<span class="prob">${pct.toFixed(1)}%</span>` +
    `<span class="score">${point.cum_runs}/${point.cum_wickets}</span>` +
    (point.wicket ? `<span class="wicket-icon" title="wicket">W</span>` : "") +
    `</li>`
  );
}

export function renderGhost(ghost: ProbabilityPoint | null): string {
  if (!ghost) return "";
  const pct = Math.round(ghost.p_win * 1000) / 10;
  return (
    `<li class="point ghost" data-t="${ghost.t}" data-p="${formatProbability(ghost.p_win)}">` +
    `<span class="ball">what-if</span>` +
    `<span class="bar"><span class="fill" style="width:${pct}%"></span></span>` +
    `<span class="prob">${pct.toFixed(1)}%</span>` +
    `</li>`
  );
}

export function renderTimeline(state: ConsoleState): string {
  const items = state.timeline.map(renderPoint).join("");
  return `<ul class="timeline">${items}${renderGhost(state.ghost)}</ul>`;
}

export function renderHeader(state: ConsoleState): string {
  if (!state.context) return `<div class="header">no active match</div>`;
  const c = state.context;
  const target = c.target_score != null ? ` &middot; target ${c.target_score}` : "";
  return (
    `<div class="header">` +
    `<strong>${escapeHtml(c.batting_team)}</strong> chasing vs ` +
    `<strong>${escapeHtml(c.bowling_team)}</strong>${target}` +
    `</div>`
  );
}

export function renderStatus(state: ConsoleState): string {
  const parts: string[] = [];
  if (state.status === "disconnected") {
    parts.push(`<div class="banner error">server unreachable &mdash; form preserved</div>`);
  } else if (state.lastError) {
    parts.push(`<div class="banner warning">${escapeHtml(state.lastError)}</div>`);
  }
  if (state.pendingBuffered) {
    parts.push(`<div class="banner pending">illegal delivery buffered; enter the re-bowled ball</div>`);
  }
  if (state.sessionFull) {
    parts.push(`<div class="banner">innings complete (300 legal balls)</div>`);
  }
  return parts.join("");
}
