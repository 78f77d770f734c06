// WebSocket wrapper: parse frames, survive disconnects with capped backoff.

import { parseMessage, type ServerMessage } from "./protocol.js";

export interface LiveHandlers {
  onMessage: (msg: ServerMessage) => void;
  onStatus?: (open: boolean) => void;
  onBadMessage?: (raw: string) => void;
}

type WsCtor = new (url: string) => WebSocket;

export class LiveSocket {
  private ws: WebSocket | null = null;
  private retryMs = 1000;
  private closed = false;

  constructor(
    private url: string,
    private handlers: LiveHandlers,
    private wsCtor: WsCtor = WebSocket,
  ) {
    this.open();
  }

  private open() {
    const ws = new this.wsCtor(this.url);
    this.ws = ws;

    ws.onopen = () => {
      this.retryMs = 1000;
      this.handlers.onStatus?.(true);
    };

    ws.onmessage = (ev) => {
      const raw = String(ev.data);
      let msg: ServerMessage;
      try {
        msg = parseMessage(raw);
      } catch {
        // keep the last good frame on screen, just flag the connection
        this.handlers.onBadMessage?.(raw);
        return;
      }
      this.handlers.onMessage(msg);
    };

    ws.onclose = () => {
      this.handlers.onStatus?.(false);
      if (!this.closed) {
        setTimeout(() => this.open(), this.retryMs);
        this.retryMs = Math.min(this.retryMs * 2, 10000);
      }
    };

    ws.onerror = () => {
      // onclose does the reconnect bookkeeping
    };
  }

  /** Serialize and send one command; false if the socket is not open. */
  send(cmd: object): boolean {
    if (this.ws && this.ws.readyState === 1 /* OPEN */) {
      this.ws.send(JSON.stringify(cmd));
      return true;
    }
    return false;
  }

  close() {
    this.closed = true;
    this.ws?.close();
  }
}
