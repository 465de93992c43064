// WebSocket wrapper: parses frames into the ViewState, assigns command
// sequence numbers, refuses sends while disconnected.

import { encodeCommand, parseFrame, type CommandKind } from "./protocol.js";
import type { AckResult, ViewState } from "./viewState.js";

export interface SocketHooks {
  onAck?: (ack: AckResult) => void;
  onFrame?: (kind: string) => void;
}

export class StationSocket {
  private ws: WebSocket | null = null;
  private url: string;

  constructor(
    private view: ViewState,
    host: string,
    token: string,
    private hooks: SocketHooks = {},
    private now: () => number = () => Date.now(),
  ) {
    const q = token ? `?token=${encodeURIComponent(token)}` : "";
    this.url = `${host}/ws${q}`;
  }

  connect(): void {
    this.view.connection = "connecting";
    const ws = new WebSocket(this.url);
    this.ws = ws;
    ws.onmessage = (ev: MessageEvent) => {
      const frame = parseFrame(String(ev.data));
      if (!frame) return;
      const ack = this.view.applyFrame(frame, this.now());
      this.hooks.onFrame?.(frame.kind);
      if (ack) this.hooks.onAck?.(ack);
    };
    ws.onclose = () => {
      this.view.markDisconnected();
      this.ws = null;
      setTimeout(() => this.connect(), 1000);
    };
    ws.onerror = () => {
      this.view.markStale();
    };
  }

  get open(): boolean {
    return this.ws !== null && this.ws.readyState === WebSocket.OPEN;
  }

  /** Send a command; returns its seq, or null when refused (disconnected). */
  send(
    kind: CommandKind,
    fields: Record<string, unknown>,
    marker?: { vehicle: number; u: number; v: number },
  ): number | null {
    if (!this.open) return null;
    const seq = this.view.register(kind, marker, this.now());
    try {
      this.ws!.send(encodeCommand(kind, seq, fields));
    } catch {
      this.view.unregister(seq);
      return null;
    }
    return seq;
  }

  close(): void {
    if (this.ws) {
      this.ws.onclose = null;
      this.ws.close();
      this.ws = null;
    }
    this.view.markDisconnected();
  }
}
