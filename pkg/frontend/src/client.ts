/**
 * Service client for the loopback translation API.
 *
 * The transport is injected so tests can substitute a scripted mock;
 * the client always composes full URLs from the configured origin, so a
 * request-recording transport can verify that every request targets the
 * loopback service and nothing else.
 */

import type {
  ApiError,
  HealthPayload,
  TranslateRequest,
  TranslateResponse,
} from "./types.js";

export interface Channel {
  send(payload: object): void;
  close(): void;
}

export interface Transport {
  /** GET a JSON document; rejects on network failure or non-2xx. */
  getJson(url: string): Promise<unknown>;
  /** Open a message channel (WebSocket in production). */
  connect(
    url: string,
    onEvent: (data: unknown) => void,
    onClose: () => void,
  ): Promise<Channel>;
}

export interface StreamHandlers {
  onToken(fragment: string): void;
  onDone(response: TranslateResponse): void;
  onError(error: ApiError): void;
}

export const CONNECTION_LOST: ApiError = {
  code: "CONNECTION_LOST",
  message: "the service connection closed before the turn finished",
};

function isErrorEvent(data: unknown): data is { error: ApiError } {
  return typeof data === "object" && data !== null && "error" in data;
}

function isDoneEvent(data: unknown): data is TranslateResponse & { done: true } {
  return typeof data === "object" && data !== null &&
    (data as { done?: unknown }).done === true;
}

function isTokenEvent(data: unknown): data is { token: string } {
  return typeof data === "object" && data !== null &&
    typeof (data as { token?: unknown }).token === "string";
}

export class ServiceClient {
  private channel: Channel | null = null;
  private pending: StreamHandlers | null = null;

  constructor(
    private readonly host: string,
    private readonly transport: Transport,
  ) {}

  httpOrigin(): string {
    return `http://${this.host}`;
  }

  wsOrigin(): string {
    return `ws://${this.host}`;
  }

  async health(): Promise<HealthPayload> {
    const body = await this.transport.getJson(`${this.httpOrigin()}/health`);
    return body as HealthPayload;
  }

  /**
   * Send one translate request over the stream socket. Events arrive in
   * order: zero or more tokens, then exactly one done or error. The
   * socket is opened lazily and reused across turns; a close while a
   * turn is pending surfaces as CONNECTION_LOST.
   */
  async translateStream(
    request: TranslateRequest,
    handlers: StreamHandlers,
  ): Promise<void> {
    if (this.pending) {
      throw new Error("a turn is already in flight");
    }
    const channel = await this.ensureChannel();
    this.pending = handlers;
    channel.send(request);
  }

  private async ensureChannel(): Promise<Channel> {
    if (this.channel) {
      return this.channel;
    }
    const channel = await this.transport.connect(
      `${this.wsOrigin()}/stream`,
      (data) => this.route(data),
      () => this.handleClose(),
    );
    this.channel = channel;
    return channel;
  }

  private route(data: unknown): void {
    const handlers = this.pending;
    if (!handlers) {
      return; // stray event outside a turn: nothing to apply it to
    }
    if (isErrorEvent(data)) {
      this.pending = null;
      handlers.onError(data.error);
    } else if (isDoneEvent(data)) {
      this.pending = null;
      handlers.onDone(data);
    } else if (isTokenEvent(data)) {
      handlers.onToken(data.token);
    }
  }

  private handleClose(): void {
    this.channel = null;
    const handlers = this.pending;
    if (handlers) {
      this.pending = null;
      handlers.onError(CONNECTION_LOST);
    }
  }
}

/** Production transport over fetch + WebSocket. */
export class BrowserTransport implements Transport {
  async getJson(url: string): Promise<unknown> {
    const response = await fetch(url);
    if (!response.ok) {
      throw new Error(`GET ${url} failed with ${response.status}`);
    }
    return response.json();
  }

  connect(
    url: string,
    onEvent: (data: unknown) => void,
    onClose: () => void,
  ): Promise<Channel> {
    return new Promise((resolve, reject) => {
      const socket = new WebSocket(url);
      socket.onopen = () =>
        resolve({
          send: (payload) => socket.send(JSON.stringify(payload)),
          close: () => socket.close(),
        });
      socket.onerror = () => reject(new Error(`cannot reach ${url}`));
      socket.onmessage = (event) => onEvent(JSON.parse(event.data as string));
      socket.onclose = () => onClose();
    });
  }
}
