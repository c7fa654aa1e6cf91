/** DOM wiring: the only module that touches `document`. */

import { ApiClient, BallEntry, CheckpointInfo } from "./api.js";
import { renderHeader, renderStatus, renderTimeline } from "./render.js";
import { ConsoleStore, StartForm } from "./state.js";

const API_BASE = (window as unknown as { CRICKWIN_API?: string }).CRICKWIN_API ?? "";

const client = new ApiClient(API_BASE);
const store = new ConsoleStore(client);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function num(id: string): number | null {
  const raw = el<HTMLInputElement>(id).value.trim();
  return raw === "" ? null : Number(raw);
}

function text(id: string): string {
  return el<HTMLInputElement>(id).value.trim();
}

let checkpoints: CheckpointInfo[] = [];

function redraw(): void {
  el("header").innerHTML = renderHeader(store.state);
  el("status").innerHTML = renderStatus(store.state);
  el("timeline").innerHTML = renderTimeline(store.state);
  const next = store.nextBallNumbers();
  el<HTMLInputElement>("ball-over").value = String(next.over);
  el<HTMLInputElement>("ball-number").value = String(next.ballInOver);
  el<HTMLButtonElement>("record").disabled = store.state.sessionFull || !store.state.sessionId;
  el<HTMLButtonElement>("what-if").disabled = store.state.sessionFull || !store.state.sessionId;
}

function readBallEntry(): BallEntry {
  const context = store.state.context;
  return {
    over: num("ball-over") ?? 0,
    ball_in_over: num("ball-number") ?? 1,
    batting_team: context?.batting_team ?? "",
    batsman: text("batsman"),
    non_striker: text("non-striker"),
    bowler: text("bowler"),
    runs_off_bat: num("runs") ?? 0,
    extras: num("extras") ?? 0,
    extras_kind: text("extras-kind") || "none",
    wicket: el<HTMLInputElement>("wicket").checked ? 1 : 0,
  };
}

async function onStart(event: Event): Promise<void> {
  event.preventDefault();
  const checkpointId = el<HTMLSelectElement>("checkpoint").value;
  const checkpoint = checkpoints.find((c) => c.id === checkpointId);
  if (!checkpoint) return;
  const form: StartForm = {
    checkpointId,
    battingTeam: text("batting-team"),
    bowlingTeam: text("bowling-team"),
    venue: text("venue"),
    targetScore: num("target"),
    fiWickets: num("fi-wickets"),
    tossWinner: text("toss-winner"),
    tossDecision: text("toss-decision") || "bat",
  };
  try {
    await store.startMatch(form, checkpoint);
  } catch {
    // the error is already in store.state.lastError; keep the form intact
  }
}

async function boot(): Promise<void> {
  store.subscribe(redraw);
  try {
    checkpoints = await client.listCheckpoints();
    const select = el<HTMLSelectElement>("checkpoint");
    select.innerHTML = checkpoints
      .map((c) => `<option value="${c.id}">${c.id} (${c.variant})</option>`)
      .join("");
  } catch {
    store.state.status = "disconnected";
  }
  el("start-form").addEventListener("submit", (e) => void onStart(e));
  el("record").addEventListener("click", () => void store.recordBall(readBallEntry()).catch(() => undefined));
  el("what-if").addEventListener("click", () => void store.whatIf(readBallEntry()).catch(() => undefined));
  el("undo").addEventListener("click", () => void store.undoBall().catch(() => undefined));
  redraw();
}

void boot();
