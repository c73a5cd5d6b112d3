/**
 * Wire types mirroring the service contract in docs/api.md (field names
 * frozen there), plus the UI's own card/state domain types.
 */

export type Direction = "vi-en" | "en-vi";

export function toggled(direction: Direction): Direction {
  return direction === "vi-en" ? "en-vi" : "vi-en";
}

/** Human labels for the language pair; chrome stays En/Vi only. */
export function directionLabel(direction: Direction): string {
  return direction === "vi-en" ? "Tiếng Việt → English" : "English → Tiếng Việt";
}

export interface HealthPayload {
  status: string;
  model: string;
  quant_type: string;
  offline: boolean;
}

export interface TranslateRequest {
  text: string;
  direction: Direction;
}

export interface TranslateResponse {
  translation: string;
  direction: string;
  timing_ms: number;
  prompt_tokens: number;
  generated_tokens: number;
  truncated: boolean;
}

export interface ApiError {
  code: string;
  message: string;
}

export type CardStatus = "recording-stub" | "translating" | "done" | "error";

/**
 * One conversation turn. `translation` holds the concatenation of the
 * streamed fragments while translating and the service's final
 * translation once done; `fragments` keeps the raw stream for the
 * consistency invariant (concat(fragments) === final translation).
 */
export interface ConversationCard {
  id: number;
  direction: Direction;
  source_text: string;
  translation: string;
  status: CardStatus;
  timing_ms: number | null;
  error: ApiError | null;
  fragments: string[];
}

export type ConnectionState = "connected" | "disconnected";

export interface UiState {
  cards: ConversationCard[];
  direction: Direction;
  health: HealthPayload | null;
  connection: ConnectionState;
}

export function initialState(): UiState {
  return {
    cards: [],
    direction: "vi-en",
    health: null,
    connection: "disconnected",
  };
}

export function translatingCard(state: UiState): ConversationCard | null {
  return state.cards.find((c) => c.status === "translating") ?? null;
}
