import { describe, expect, it } from "vitest";

import { CONNECTION_LOST, ServiceClient } from "../src/client.js";
import type { ApiError, TranslateResponse } from "../src/types.js";
import { errorScript, ScriptedTransport, turnScript } from "./mock_service.js";

const HOST = "127.0.0.1:8237";

type Logged =
  | ["token", string]
  | ["done", TranslateResponse]
  | ["error", ApiError];

function collector() {
  const events: Logged[] = [];
  return {
    events,
    handlers: {
      onToken: (fragment: string) => events.push(["token", fragment]),
      onDone: (response: TranslateResponse) => events.push(["done", response]),
      onError: (error: ApiError) => events.push(["error", error]),
    },
  };
}

describe("health", () => {
  it("fetches and parses the health document", async () => {
    const transport = new ScriptedTransport();
    const client = new ServiceClient(HOST, transport);
    const health = await client.health();
    expect(health.status).toBe("ok");
    expect(health.offline).toBe(true);
    expect(health.quant_type).toBe("Q4_K");
    expect(transport.getUrls).toEqual(["http://127.0.0.1:8237/health"]);
  });

  it("rejects when the service is unreachable", async () => {
    const transport = new ScriptedTransport();
    transport.failHealth = true;
    const client = new ServiceClient(HOST, transport);
    await expect(client.health()).rejects.toThrow("connection refused");
  });
});

describe("translate stream", () => {
  it("delivers token fragments in order and then the done payload", async () => {
    const transport = new ScriptedTransport();
    const client = new ServiceClient(HOST, transport);
    transport.script(turnScript(["Hel", "lo", " there"]));
    const { events, handlers } = collector();

    await client.translateStream({ text: "xin chào", direction: "vi-en" }, handlers);
    await transport.settle();

    expect(events.map((e) => e[0])).toEqual(["token", "token", "token", "done"]);
    expect(events.slice(0, 3).map((e) => e[1])).toEqual(["Hel", "lo", " there"]);
    const done = events[3]![1] as TranslateResponse;
    expect(done.translation).toBe("Hello there");
    expect(transport.sent).toEqual([{ text: "xin chào", direction: "vi-en" }]);
  });

  it("reuses one socket across sequential turns", async () => {
    const transport = new ScriptedTransport();
    const client = new ServiceClient(HOST, transport);

    for (const text of ["một", "hai", "ba"]) {
      transport.script(turnScript([text, "!"]));
      const { handlers } = collector();
      await client.translateStream({ text, direction: "vi-en" }, handlers);
      await transport.settle();
    }

    expect(transport.connectUrls).toEqual(["ws://127.0.0.1:8237/stream"]);
    expect(transport.sent).toHaveLength(3);
  });

  it("routes a service error to onError and keeps the socket usable", async () => {
    const transport = new ScriptedTransport();
    const client = new ServiceClient(HOST, transport);
    transport.script(errorScript("EMPTY_INPUT", "text must not be empty"));
    const first = collector();
    await client.translateStream({ text: "   ", direction: "vi-en" }, first.handlers);
    await transport.settle();

    expect(first.events).toEqual([
      ["error", { code: "EMPTY_INPUT", message: "text must not be empty" }],
    ]);

    transport.script(turnScript(["ok"]));
    const second = collector();
    await client.translateStream({ text: "được", direction: "vi-en" }, second.handlers);
    await transport.settle();

    expect(second.events.at(-1)?.[0]).toBe("done");
    expect(transport.connectUrls).toHaveLength(1);
  });

  it("rejects a second turn while one is in flight", async () => {
    const transport = new ScriptedTransport();
    const client = new ServiceClient(HOST, transport);
    transport.script(turnScript(["a"]));
    const { handlers } = collector();
    await client.translateStream({ text: "x", direction: "vi-en" }, handlers);

    await expect(
      client.translateStream({ text: "y", direction: "vi-en" }, collector().handlers),
    ).rejects.toThrow("already in flight");
    await transport.settle();
  });

  it("surfaces CONNECTION_LOST when the socket drops mid-turn, then reconnects", async () => {
    const transport = new ScriptedTransport();
    const client = new ServiceClient(HOST, transport);
    transport.script([{ token: "Hel" }, { closeSocket: true }]);
    const first = collector();
    await client.translateStream({ text: "xin chào", direction: "vi-en" }, first.handlers);
    await transport.settle();

    expect(first.events).toEqual([
      ["token", "Hel"],
      ["error", CONNECTION_LOST],
    ]);

    transport.script(turnScript(["Hello"]));
    const second = collector();
    await client.translateStream({ text: "xin chào", direction: "vi-en" }, second.handlers);
    await transport.settle();

    expect(second.events.at(-1)?.[0]).toBe("done");
    expect(transport.connectUrls).toHaveLength(2);
  });

  it("ignores stray events that arrive outside a turn", async () => {
    const transport = new ScriptedTransport();
    const client = new ServiceClient(HOST, transport);
    transport.script([...turnScript(["done"]), { token: "stray" }]);
    const { events, handlers } = collector();
    await client.translateStream({ text: "x", direction: "vi-en" }, handlers);
    await transport.settle();
    expect(events.filter((e) => e[0] === "token")).toHaveLength(1);
  });
});

describe("loopback origin", () => {
  it("every request targets the configured loopback origin only", async () => {
    const transport = new ScriptedTransport();
    const client = new ServiceClient(HOST, transport);
    await client.health();
    transport.script(turnScript(["a"]));
    await client.translateStream({ text: "x", direction: "vi-en" }, collector().handlers);
    await transport.settle();

    const all = [...transport.getUrls, ...transport.connectUrls];
    expect(all.length).toBeGreaterThan(0);
    for (const url of all) {
      expect(url).toMatch(/^(http|ws):\/\/127\.0\.0\.1:8237\//);
    }
  });
});
