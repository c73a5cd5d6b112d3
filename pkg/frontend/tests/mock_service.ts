/**
 * Request-recording, scripted stand-in for the loopback service.
 *
 * Every URL fetched, every socket opened, and every payload sent is
 * recorded so tests can assert the UI talks only to the configured
 * loopback origin. Replies are scripted per request: each send consumes
 * the next event sequence and delivers it asynchronously, mirroring the
 * real socket's ordering (tokens, then exactly one done or error).
 */

import type { Channel, Transport } from "../src/client.js";
import type { HealthPayload, TranslateResponse } from "../src/types.js";

export type WireEvent =
  | { token: string }
  | ({ done: true } & TranslateResponse)
  | { error: { code: string; message: string } }
  | { closeSocket: true };

export const HEALTHY: HealthPayload = {
  status: "ok",
  model: "tiny-vi-en",
  quant_type: "Q4_K",
  offline: true,
};

export class ScriptedTransport implements Transport {
  readonly getUrls: string[] = [];
  readonly connectUrls: string[] = [];
  readonly sent: object[] = [];
  closeCalls = 0;

  healthBody: HealthPayload = { ...HEALTHY };
  failHealth = false;
  failConnect = false;

  private scripts: WireEvent[][] = [];
  private onEvent: ((data: unknown) => void) | null = null;
  private onClose: (() => void) | null = null;
  private connected = false;
  private delivering: Promise<void> = Promise.resolve();

  /** Queue the reply sequence for the next request sent on the socket. */
  script(events: WireEvent[]): void {
    this.scripts.push(events);
  }

  /** Resolve once every scheduled event has been delivered. */
  settle(): Promise<void> {
    return this.delivering;
  }

  /** Simulate the service dropping the socket outside a scripted reply. */
  dropConnection(): void {
    if (this.connected) {
      this.connected = false;
      this.onClose?.();
    }
  }

  async getJson(url: string): Promise<unknown> {
    this.getUrls.push(url);
    if (this.failHealth) {
      throw new Error("connection refused");
    }
    return { ...this.healthBody };
  }

  async connect(
    url: string,
    onEvent: (data: unknown) => void,
    onClose: () => void,
  ): Promise<Channel> {
    this.connectUrls.push(url);
    if (this.failConnect) {
      throw new Error(`cannot reach ${url}`);
    }
    this.onEvent = onEvent;
    this.onClose = onClose;
    this.connected = true;
    return {
      send: (payload) => {
        this.sent.push(payload);
        const events = this.scripts.shift();
        if (!events) {
          throw new Error("no scripted reply for this request");
        }
        this.delivering = this.delivering.then(() => this.deliver(events));
      },
      close: () => {
        this.closeCalls += 1;
        this.dropConnection();
      },
    };
  }

  private async deliver(events: WireEvent[]): Promise<void> {
    for (const event of events) {
      await Promise.resolve(); // one microtask per event: arrival is async
      if (!this.connected) {
        return;
      }
      if ("closeSocket" in event) {
        this.dropConnection();
        return;
      }
      this.onEvent?.(event);
    }
  }
}

/** Script a normal turn: token fragments, then done with their concat. */
export function turnScript(
  fragments: string[],
  overrides: Partial<TranslateResponse> = {},
): WireEvent[] {
  const events: WireEvent[] = fragments.map((token) => ({ token }));
  events.push({
    done: true,
    translation: fragments.join(""),
    direction: "vi-en",
    timing_ms: 120.5,
    prompt_tokens: 9,
    generated_tokens: fragments.length,
    truncated: false,
    ...overrides,
  });
  return events;
}

export function errorScript(code: string, message: string): WireEvent[] {
  return [{ error: { code, message } }];
}
