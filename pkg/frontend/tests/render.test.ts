import { describe, expect, it } from "vitest";

import {
  cardView,
  cardViews,
  connectionBanner,
  directionButtonLabel,
  statusBadge,
  submitDisabled,
} from "../src/render.js";
import type { ConversationCard, UiState } from "../src/types.js";
import { initialState } from "../src/types.js";
import { HEALTHY } from "./mock_service.js";

function connectedState(): UiState {
  const state = initialState();
  state.connection = "connected";
  state.health = { ...HEALTHY };
  return state;
}

function card(overrides: Partial<ConversationCard> = {}): ConversationCard {
  return {
    id: 1,
    direction: "vi-en",
    source_text: "xin chào",
    translation: "Hello",
    status: "done",
    timing_ms: 150,
    error: null,
    fragments: ["Hel", "lo"],
    ...overrides,
  };
}

describe("status badge", () => {
  it("advertises on-device offline operation from the health payload", () => {
    const state = connectedState();
    expect(statusBadge(state)).toBe("On-device · Offline (Q4_K)");
  });

  it("drops the offline claim when health does not assert it", () => {
    const state = connectedState();
    state.health = { ...HEALTHY, offline: false };
    expect(statusBadge(state)).toBe("Connected (Q4_K)");
  });

  it("reports unavailability when disconnected", () => {
    expect(statusBadge(initialState())).toBe("Service unavailable");
  });
});

describe("connection banner", () => {
  it("shows only while disconnected", () => {
    expect(connectionBanner(initialState())).toContain("local translation service");
    expect(connectionBanner(connectedState())).toBeNull();
  });
});

describe("submit control", () => {
  it("is disabled for blank drafts", () => {
    const state = connectedState();
    expect(submitDisabled(state, "")).toBe(true);
    expect(submitDisabled(state, "  \n ")).toBe(true);
    expect(submitDisabled(state, "xin chào")).toBe(false);
  });

  it("is disabled while disconnected", () => {
    expect(submitDisabled(initialState(), "xin chào")).toBe(true);
  });

  it("is disabled while a turn is in flight", () => {
    const state = connectedState();
    state.cards.push(card({ status: "translating" }));
    expect(submitDisabled(state, "tiếp theo")).toBe(true);
    state.cards[0]!.status = "done";
    expect(submitDisabled(state, "tiếp theo")).toBe(false);
  });
});

describe("card view", () => {
  it("shows timing for finished cards", () => {
    const view = cardView(card({ timing_ms: 412.7 }));
    expect(view.statusText).toBe("Done");
    expect(view.timingText).toBe("413 ms");
    expect(view.showRetry).toBe(false);
    expect(view.inProgress).toBe(false);
  });

  it("marks in-progress cards", () => {
    const view = cardView(card({ status: "translating", timing_ms: null }));
    expect(view.inProgress).toBe(true);
    expect(view.timingText).toBeNull();
    expect(view.statusText).toBe("Translating…");
  });

  it("offers retry with the stable error code on failed cards", () => {
    const view = cardView(
      card({
        status: "error",
        error: { code: "CONTEXT_OVERFLOW", message: "prompt too long" },
      }),
    );
    expect(view.showRetry).toBe(true);
    expect(view.errorText).toBe("CONTEXT_OVERFLOW: prompt too long");
  });

  it("labels the card with its own direction, not the current toggle", () => {
    expect(cardView(card({ direction: "en-vi" })).directionText).toBe(
      "English → Tiếng Việt",
    );
    const state = connectedState();
    expect(directionButtonLabel(state)).toBe("Tiếng Việt → English");
  });

  it("renders cards oldest first", () => {
    const state = connectedState();
    state.cards.push(card({ id: 1 }), card({ id: 2 }), card({ id: 3 }));
    expect(cardViews(state).map((v) => v.id)).toEqual([1, 2, 3]);
  });
});
