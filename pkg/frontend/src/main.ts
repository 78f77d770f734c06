// Entry point. One page per connection: /seat/0..2 or /operator.

import { LiveSocket } from "./client.js";
import type { ServerMessage } from "./protocol.js";
import { OperatorPanel, SeatBoard, StatusBadge } from "./view.js";

function wsUrl(path: string): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}${path}`;
}

function seatPage(root: HTMLElement, seat: number) {
  const badge = new StatusBadge(root);
  const board = new SeatBoard(root);
  const sock = new LiveSocket(wsUrl(`/ws/seat/${seat}`), {
    onMessage: (msg: ServerMessage) => {
      if (msg.type === "state") {
        board.showState(msg);
        badge.stateSeen(Date.now());
      }
    },
    onStatus: (open) => badge.socketOpen(open, Date.now()),
    onBadMessage: () => badge.markDegraded(Date.now()),
  });
  setInterval(() => badge.refresh(Date.now()), 500);
  return sock;
}

function operatorPage(root: HTMLElement) {
  const badge = new StatusBadge(root);
  const token = new URLSearchParams(location.search).get("token");
  const path = token ? `/ws/operator?token=${encodeURIComponent(token)}` : "/ws/operator";
  let panel: OperatorPanel;
  const sock = new LiveSocket(wsUrl(path), {
    onMessage: (msg: ServerMessage) => {
      if (msg.type === "state") {
        panel.showState(msg);
        badge.stateSeen(Date.now());
      } else {
        panel.showReply(msg);
      }
    },
    onStatus: (open) => badge.socketOpen(open, Date.now()),
    onBadMessage: () => badge.markDegraded(Date.now()),
  });
  panel = new OperatorPanel(root, { send: (cmd) => sock.send(cmd) });
  setInterval(() => badge.refresh(Date.now()), 500);
  return sock;
}

function indexPage(root: HTMLElement) {
  const list = document.createElement("div");
  list.className = "index";
  list.innerHTML =
    '<h1>pulseboard</h1><ul>' +
    '<li><a href="/seat/0">seat 0</a></li>' +
    '<li><a href="/seat/1">seat 1</a></li>' +
    '<li><a href="/seat/2">seat 2</a></li>' +
    '<li><a href="/operator">operator</a></li></ul>';
  root.appendChild(list);
}

function boot() {
  const root = document.getElementById("app");
  if (!root) return;
  const m = location.pathname.match(/^\/seat\/([0-2])$/);
  if (m) {
    seatPage(root, Number(m[1]));
  } else if (location.pathname === "/operator") {
    operatorPage(root);
  } else {
    indexPage(root);
  }
}

boot();
