// Live mission session: fetch the state snapshot, subscribe to the event
// stream, and reconcile snapshot-then-delta into the view state. On
// disconnect the session keeps retrying with backoff and re-synchronizes
// from a fresh snapshot, so the view never invents state.

import { MissionApi, type FetchFn } from "./api.js";
import { applyEvent, applySnapshot, emptyView, type ViewState } from "./view.js";
import type { Snapshot, Vec3 } from "./types.js";

export interface WebSocketLike {
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
  close(): void;
}

export type WsFactory = (url: string) => WebSocketLike;

export interface TaskDraft {
  location: Vec3;
  kind: string;
  pending: boolean;
  accepted?: string; // task id on accept
  rejected?: string; // reason on reject
}

export interface SessionOptions {
  fetchFn?: FetchFn;
  wsFactory?: WsFactory;
  backoffMs?: number[];
  onChange?: (state: ViewState) => void;
  onToast?: (message: string) => void;
}

export class MissionSession {
  readonly api: MissionApi;
  readonly state: ViewState = emptyView();
  readonly drafts: TaskDraft[] = [];
  private ws: WebSocketLike | null = null;
  private retries = 0;
  private stopped = false;
  private readonly backoff: number[];
  private readonly wsFactory: WsFactory;
  private readonly onChange: (state: ViewState) => void;
  private readonly onToast: (message: string) => void;

  constructor(readonly baseUrl: string, opts: SessionOptions = {}) {
    this.api = new MissionApi(baseUrl, opts.fetchFn ?? fetch.bind(globalThis));
    this.wsFactory = opts.wsFactory ?? ((url) => new WebSocket(url) as unknown as WebSocketLike);
    this.backoff = opts.backoffMs ?? [500, 1000, 2000, 5000, 10000];
    this.onChange = opts.onChange ?? (() => {});
    this.onToast = opts.onToast ?? (() => {});
  }

  async connect(): Promise<void> {
    this.stopped = false;
    try {
      const snap = await this.api.state();
      applySnapshot(this.state, snap);
      this.openStream();
    } catch {
      this.state.connection = "disconnected";
      this.onChange(this.state);
      this.scheduleReconnect();
    }
  }

  close(): void {
    this.stopped = true;
    this.ws?.close();
    this.ws = null;
  }

  private wsUrl(): string {
    return this.baseUrl.replace(/^http/, "ws") + "/ws";
  }

  private openStream(): void {
    const ws = this.wsFactory(this.wsUrl());
    this.ws = ws;
    ws.onopen = () => {
      this.retries = 0;
    };
    ws.onmessage = (ev) => {
      let msg: { type?: string } & Record<string, unknown>;
      try {
        msg = JSON.parse(String(ev.data));
      } catch {
        this.state.droppedEvents += 1;
        this.onChange(this.state);
        return;
      }
      if (msg.type === "snapshot") {
        applySnapshot(this.state, msg as unknown as Snapshot);
        this.state.connection = "live";
      } else if (msg.type === "event") {
        applyEvent(this.state, msg as never);
      } else if (msg.type === "end") {
        this.state.status = "finished";
      } else {
        this.state.droppedEvents += 1;
      }
      this.onChange(this.state);
    };
    ws.onerror = () => {};
    ws.onclose = () => {
      if (this.stopped || this.state.status === "finished") return;
      this.state.connection = "disconnected";
      this.onChange(this.state);
      this.scheduleReconnect();
    };
  }

  private scheduleReconnect(): void {
    if (this.stopped) return;
    const wait = this.backoff[Math.min(this.retries, this.backoff.length - 1)];
    this.retries += 1;
    setTimeout(() => {
      if (!this.stopped) void this.connect();
    }, wait);
  }

  /** The click pathway: post a task draft at a world location; the marker is
   * rendered from server events only, never invented client-side. */
  async addTask(location: Vec3, kind = "inspect"): Promise<TaskDraft> {
    const draft: TaskDraft = { location, kind, pending: true };
    this.drafts.push(draft);
    this.onChange(this.state);
    try {
      draft.accepted = await this.api.addTask(location, kind);
    } catch (err) {
      draft.rejected = err instanceof Error ? err.message : String(err);
      this.onToast(`task rejected: ${draft.rejected}`);
    } finally {
      draft.pending = false;
      this.drafts.splice(this.drafts.indexOf(draft), 1);
      this.onChange(this.state);
    }
    if (draft.rejected) throw new Error(draft.rejected);
    return draft;
  }
}
