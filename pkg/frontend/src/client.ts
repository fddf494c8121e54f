import type {
  InputMessage, MorphAssets, MorphPayload, SessionReport, StreamMessage,
  TrialDescriptor, WeightTick,
} from "./types";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((ev?: unknown) => void) | null;
  onmessage: ((ev: { data: unknown }) => void) | null;
  onclose: ((ev?: unknown) => void) | null;
  onerror: ((ev?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface ClientMessage {
  channel: "http" | "ws";
  direction: "sent" | "received";
  text: string;
}

export class ServiceError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
  }
}

/**
 * Participant-facing client. Every byte sent to or received from the service
 * on this client's behalf is captured in `history`, so tests can assert
 * protocol-level invariants (for example that a passively presented weight
 * never reaches the participant).
 */
export class SessionClient {
  readonly history: ClientMessage[] = [];
  sessionId: string | null = null;
  trial: TrialDescriptor | null = null;
  /** Latest server-authoritative weight and the one before it. */
  authoritativeKg: number | null = null;
  previousKg: number | null = null;
  connected = false;

  private socket: SocketLike | null = null;
  private pendingTicks: Array<{
    resolve: (tick: WeightTick) => void;
    reject: (err: Error) => void;
  }> = [];

  constructor(
    private readonly baseUrl: string,
    private readonly socketFactory: SocketFactory =
      (url) => new WebSocket(url) as unknown as SocketLike,
  ) {}

  historyText(): string {
    return this.history.map((m) => m.text).join("\n");
  }

  // -- HTTP ----------------------------------------------------------------

  private async request(method: string, path: string, body?: unknown): Promise<unknown> {
    const init: RequestInit = { method };
    if (body !== undefined) {
      const text = JSON.stringify(body);
      init.body = text;
      init.headers = { "content-type": "application/json" };
      this.history.push({ channel: "http", direction: "sent", text });
    }
    const resp = await fetch(this.baseUrl + path, init);
    const text = await resp.text();
    this.history.push({ channel: "http", direction: "received", text });
    if (!resp.ok) {
      let message = text;
      try {
        message = (JSON.parse(text) as { error?: string }).error ?? text;
      } catch { /* non-JSON error body */ }
      throw new ServiceError(resp.status, message);
    }
    return text === "" ? null : JSON.parse(text);
  }

  async fetchAssets(modelId: string): Promise<MorphAssets> {
    return await this.request("GET", `/models/${modelId}/assets`) as MorphAssets;
  }

  async createSession(params: {
    participant: number; base_weight: number; model_id: string;
    protocol?: string; seed?: number;
  }): Promise<TrialDescriptor> {
    const data = await this.request("POST", "/sessions", params) as {
      session_id: string; trial: TrialDescriptor;
    };
    this.sessionId = data.session_id;
    this.trial = data.trial;
    return data.trial;
  }

  /** Attach to an existing session, e.g. after a crash or reload. */
  async resume(sessionId: string): Promise<TrialDescriptor> {
    this.sessionId = sessionId;
    return await this.refreshTrial();
  }

  async refreshTrial(): Promise<TrialDescriptor> {
    this.trial = await this.request(
      "GET", `/sessions/${this.requireSession()}`) as TrialDescriptor;
    return this.trial;
  }

  /**
   * A presentation forwarded to this participant's renderer. Recorded in the
   * client history because the payload crosses into client-visible traffic.
   */
  receiveMorph(payload: MorphPayload): MorphPayload {
    this.history.push({
      channel: "http", direction: "received", text: JSON.stringify(payload),
    });
    return payload;
  }

  async submitEstimate(t: number, kg: number): Promise<TrialDescriptor> {
    const data = await this.request(
      "POST", `/sessions/${this.requireSession()}/estimate`, { t, kg }) as {
        trial: TrialDescriptor;
      };
    this.trial = data.trial;
    return data.trial;
  }

  async fetchResultsText(): Promise<string> {
    const resp = await fetch(
      `${this.baseUrl}/sessions/${this.requireSession()}/results`);
    const text = await resp.text();
    this.history.push({ channel: "http", direction: "received", text });
    if (!resp.ok) throw new ServiceError(resp.status, text);
    return text;
  }

  async fetchResults(): Promise<SessionReport> {
    return JSON.parse(await this.fetchResultsText()) as SessionReport;
  }

  // -- WebSocket stream ----------------------------------------------------

  async connect(): Promise<void> {
    const wsBase = this.baseUrl.replace(/^http/, "ws");
    const socket = this.socketFactory(
      `${wsBase}/sessions/${this.requireSession()}/stream`);
    await new Promise<void>((resolve, reject) => {
      socket.onopen = () => resolve();
      socket.onerror = (ev) => reject(new Error(`socket failed: ${String(ev)}`));
    });
    socket.onerror = null;
    socket.onmessage = (ev) => this.onStreamMessage(String(ev.data));
    socket.onclose = () => {
      this.connected = false;
      this.failPending(new Error("socket closed"));
    };
    this.socket = socket;
    this.connected = true;
  }

  disconnect(): void {
    if (this.socket) {
      this.socket.onclose = null;
      this.socket.close();
      this.socket = null;
    }
    this.connected = false;
    this.failPending(new Error("disconnected"));
  }

  /** Send one input sample and wait for the server's reply to it. */
  sendInput(sample: InputMessage): Promise<WeightTick> {
    if (!this.socket || !this.connected) {
      return Promise.reject(new Error("not connected"));
    }
    const text = JSON.stringify(sample);
    this.history.push({ channel: "ws", direction: "sent", text });
    this.socket.send(text);
    return new Promise<WeightTick>((resolve, reject) => {
      this.pendingTicks.push({ resolve, reject });
    });
  }

  private onStreamMessage(text: string): void {
    this.history.push({ channel: "ws", direction: "received", text });
    const message = JSON.parse(text) as StreamMessage;
    const pending = this.pendingTicks.shift();
    if (message.type === "weight") {
      this.previousKg = this.authoritativeKg;
      this.authoritativeKg = message.kg;
      pending?.resolve(message);
    } else {
      pending?.reject(new Error(message.message));
    }
  }

  private failPending(err: Error): void {
    const pending = this.pendingTicks;
    this.pendingTicks = [];
    for (const p of pending) p.reject(err);
  }

  private requireSession(): string {
    if (!this.sessionId) throw new Error("no active session");
    return this.sessionId;
  }
}
