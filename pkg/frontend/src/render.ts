/**
 * Pure view-model functions: UiState in, display strings and flags out.
 * Keeping these free of DOM access lets the test suite assert rendering
 * decisions (offline badge, disconnected banner, retry affordance)
 * without a browser.
 */

import type { ConversationCard, UiState } from "./types.js";
import { directionLabel } from "./types.js";

/** Badge shown in the header; the offline claim comes from /health. */
export function statusBadge(state: UiState): string {
  const health = state.health;
  if (state.connection !== "connected" || health === null) {
    return "Service unavailable";
  }
  if (health.offline) {
    return `On-device · Offline (${health.quant_type})`;
  }
  return `Connected (${health.quant_type})`;
}

/** Banner text when the loopback service cannot be reached, else null. */
export function connectionBanner(state: UiState): string | null {
  if (state.connection === "disconnected") {
    return "Cannot reach the local translation service. Start it with: vien serve <model.gguf>";
  }
  return null;
}

export function directionButtonLabel(state: UiState): string {
  return directionLabel(state.direction);
}

/** The submit control is disabled for blank drafts, while a turn is in
 * flight, and while disconnected. Mirrors TranslatorApp.canSubmit. */
export function submitDisabled(state: UiState, draft: string): boolean {
  if (draft.trim().length === 0) {
    return true;
  }
  if (state.connection !== "connected") {
    return true;
  }
  return state.cards.some((c) => c.status === "translating");
}

export interface CardView {
  id: number;
  directionText: string;
  sourceText: string;
  translationText: string;
  statusText: string;
  timingText: string | null;
  errorText: string | null;
  showRetry: boolean;
  inProgress: boolean;
}

export function cardView(card: ConversationCard): CardView {
  let statusText: string;
  switch (card.status) {
    case "translating":
      statusText = "Translating…";
      break;
    case "done":
      statusText = "Done";
      break;
    case "error":
      statusText = "Failed";
      break;
    case "recording-stub":
      statusText = "Recording (stub)";
      break;
  }
  return {
    id: card.id,
    directionText: directionLabel(card.direction),
    sourceText: card.source_text,
    translationText: card.translation,
    statusText,
    timingText:
      card.timing_ms === null ? null : `${card.timing_ms.toFixed(0)} ms`,
    errorText:
      card.error === null ? null : `${card.error.code}: ${card.error.message}`,
    showRetry: card.status === "error",
    inProgress: card.status === "translating",
  };
}

/** Cards render in chronological order: oldest first. */
export function cardViews(state: UiState): CardView[] {
  return state.cards.map(cardView);
}
