// DOM rendering. Every update is driven by a server message; the client
// keeps no session state of its own beyond "what did I last see".

import type {
  AckMessage,
  Command,
  Condition,
  ErrorMessage,
  NoticeMessage,
  StateMessage,
} from "./protocol.js";
import { CONDITIONS } from "./protocol.js";
import { connectionBadge, renderSeat, type ConnectionBadge } from "./render.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** The three seat cards. Used as-is by seat pages and inside the operator page. */
export class SeatBoard {
  private cards: {
    root: HTMLElement;
    label: HTMLElement;
    heart: HTMLElement;
    bpm: HTMLElement;
    bars: HTMLElement[];
  }[] = [];

  constructor(root: HTMLElement, nSeats = 3) {
    const grid = el("div", "seat-grid");
    for (let i = 0; i < nSeats; i++) {
      const card = el("div", "seat idle");
      card.dataset.seat = String(i);
      const label = el("div", "label", "");
      const heart = el("div", "heart", "♥");
      const bpm = el("div", "bpm", "");
      const hist = el("div", "hist");
      const bars: HTMLElement[] = [];
      for (let b = 0; b < 20; b++) {
        const bar = el("span", "bar empty");
        hist.appendChild(bar);
        bars.push(bar);
      }
      card.append(label, heart, bpm, hist);
      grid.appendChild(card);
      this.cards.push({ root: card, label, heart, bpm, bars });
    }
    root.appendChild(grid);
  }

  showState(msg: StateMessage) {
    for (const entry of msg.seats) {
      const card = this.cards[entry.seat];
      if (!card) continue;
      const v = renderSeat(entry);
      card.label.textContent = v.label;
      card.root.classList.toggle("idle", !v.live);
      card.heart.style.transform = `scale(${v.heartScale.toFixed(3)})`;
      card.heart.style.opacity = String(v.opacity);
      card.bpm.textContent = v.live ? `${v.bpmText} BPM` : "";
      for (let b = 0; b < card.bars.length; b++) {
        const bar = v.bars[b];
        card.bars[b].classList.toggle("empty", bar.empty);
        card.bars[b].style.height = `${Math.round(bar.h * 100)}%`;
      }
    }
  }
}

/** Connection badge in the page corner. */
export class StatusBadge {
  private node: HTMLElement;
  private lastStateMs: number | null = null;
  private degraded = false;
  private open = false;

  constructor(root: HTMLElement) {
    this.node = el("div", "status connecting", "connecting");
    root.appendChild(this.node);
  }

  stateSeen(nowMs: number) {
    this.lastStateMs = nowMs;
    this.degraded = false;
    this.refresh(nowMs);
  }

  markDegraded(nowMs: number) {
    this.degraded = true;
    this.refresh(nowMs);
  }

  socketOpen(open: boolean, nowMs: number) {
    this.open = open;
    if (!open) this.lastStateMs = null;
    this.refresh(nowMs);
  }

  refresh(nowMs: number): ConnectionBadge {
    const badge = connectionBadge(nowMs, this.lastStateMs, this.degraded, this.open);
    this.node.className = `status ${badge}`;
    this.node.textContent = badge;
    return badge;
  }
}

export interface OperatorHooks {
  send: (cmd: Command) => void;
}

/**
 * Operator panel: condition buttons, game start/stop, schedule advance.
 * No optimistic updates: highlights move only when a state frame says so.
 * A sequencing error parks the panel until the notice is dismissed.
 */
export class OperatorPanel {
  readonly board: SeatBoard;
  private conditionButtons = new Map<Condition, HTMLButtonElement>();
  private buttons: HTMLButtonElement[] = [];
  private startBtn: HTMLButtonElement;
  private endBtn: HTMLButtonElement;
  private advanceBtn: HTMLButtonElement;
  private game: HTMLElement;
  private schedule: HTMLElement;
  private noticeBox: HTMLElement;
  private noticeText: HTMLElement;
  private dismissBtn: HTMLButtonElement;
  private blocked = false;
  private gameRunning = false;

  constructor(root: HTMLElement, hooks: OperatorHooks) {
    const panel = el("div", "operator");
    const controls = el("div", "controls");

    const condRow = el("div", "row conditions");
    for (const c of CONDITIONS) {
      const b = el("button", "condition", c) as HTMLButtonElement;
      b.dataset.condition = c;
      b.onclick = () => hooks.send({ type: "cmd", cmd: "set_condition", condition: c });
      this.conditionButtons.set(c, b);
      this.buttons.push(b);
      condRow.appendChild(b);
    }

    const gameRow = el("div", "row game");
    this.startBtn = el("button", "start", "start game") as HTMLButtonElement;
    this.startBtn.onclick = () => hooks.send({ type: "cmd", cmd: "start_game" });
    this.endBtn = el("button", "end", "end game") as HTMLButtonElement;
    this.endBtn.onclick = () => hooks.send({ type: "cmd", cmd: "end_game" });
    this.advanceBtn = el("button", "advance", "advance schedule") as HTMLButtonElement;
    this.advanceBtn.onclick = () => hooks.send({ type: "cmd", cmd: "advance_schedule" });
    this.buttons.push(this.startBtn, this.endBtn, this.advanceBtn);
    gameRow.append(this.startBtn, this.endBtn, this.advanceBtn);

    this.game = el("div", "game-state", "");
    this.schedule = el("div", "schedule", "");

    this.noticeBox = el("div", "notice hidden");
    this.noticeText = el("span", "notice-text", "");
    this.dismissBtn = el("button", "dismiss", "ok") as HTMLButtonElement;
    this.dismissBtn.onclick = () => this.clearNotice();
    this.noticeBox.append(this.noticeText, this.dismissBtn);

    controls.append(condRow, gameRow, this.game, this.schedule, this.noticeBox);
    panel.appendChild(controls);
    root.appendChild(panel);
    this.board = new SeatBoard(panel);
    this.applyDisabled();
  }

  showState(msg: StateMessage) {
    this.board.showState(msg);
    for (const [c, b] of this.conditionButtons) {
      b.classList.toggle("active", msg.condition === c);
    }
    this.gameRunning = msg.game_running === true;
    this.game.textContent = this.gameRunning ? "game running" : "between games";
    const pos = msg.schedule_position ?? 0;
    const sched = msg.schedule ?? [];
    this.schedule.textContent =
      `schedule: ${sched.join(" > ")} (next: ` +
      `${pos < sched.length ? sched[pos] : "done"})`;
    this.applyDisabled();
  }

  /** Command replies. Errors block the panel until acknowledged. */
  showReply(msg: AckMessage | ErrorMessage | NoticeMessage) {
    if (msg.type === "error") {
      this.noticeText.textContent = msg.error;
      this.noticeBox.className = "notice error";
      this.blocked = true;
      this.applyDisabled();
    } else if (msg.type === "notice") {
      this.noticeText.textContent =
        msg.notice === "schedule_complete" ? "schedule complete" : msg.notice;
      this.noticeBox.className = "notice info";
    }
    // acks change nothing; the next state frame is the confirmation
  }

  clearNotice() {
    this.noticeBox.className = "notice hidden";
    this.noticeText.textContent = "";
    this.blocked = false;
    this.applyDisabled();
  }

  get noticeShown(): string {
    return this.noticeBox.className.includes("hidden")
      ? ""
      : this.noticeText.textContent || "";
  }

  get commandsDisabled(): boolean {
    return this.blocked;
  }

  private applyDisabled() {
    for (const b of this.buttons) b.disabled = this.blocked;
    if (!this.blocked) {
      // start/end also follow the reported game state
      this.startBtn.disabled = this.gameRunning;
      this.endBtn.disabled = !this.gameRunning;
    }
  }
}
