/**
 * Application logic: owns UiState, talks to the ServiceClient, and
 * enforces the conversational invariants (single in-flight turn, card
 * lifecycle translating -> done | error, stream fragments applied in
 * arrival order). Pure of DOM concerns; the view layer subscribes to
 * change notifications and renders from state.
 */

import { ServiceClient } from "./client.js";
import type {
  ConversationCard,
  TranslateResponse,
  UiState,
} from "./types.js";
import { initialState, toggled, translatingCard } from "./types.js";

export class TranslatorApp {
  readonly state: UiState = initialState();
  private nextCardId = 1;
  private listeners: Array<() => void> = [];

  constructor(private readonly client: ServiceClient) {}

  onChange(listener: () => void): void {
    this.listeners.push(listener);
  }

  private notify(): void {
    for (const listener of this.listeners) {
      listener();
    }
  }

  /** Poll /health; failures flip the connection state to disconnected. */
  async refreshHealth(): Promise<void> {
    try {
      this.state.health = await this.client.health();
      this.state.connection = "connected";
    } catch {
      this.state.health = null;
      this.state.connection = "disconnected";
    }
    this.notify();
  }

  toggleDirection(): void {
    this.state.direction = toggled(this.state.direction);
    this.notify();
  }

  /** Submit is allowed only for non-blank text, connected, no turn in flight. */
  canSubmit(text: string): boolean {
    return (
      text.trim().length > 0 &&
      this.state.connection === "connected" &&
      translatingCard(this.state) === null
    );
  }

  /**
   * Start one turn: append a translating card and stream into it.
   * Returns the card, or null when submission is not allowed (no
   * request is sent in that case).
   */
  async submitTurn(text: string): Promise<ConversationCard | null> {
    if (!this.canSubmit(text)) {
      return null;
    }
    const card: ConversationCard = {
      id: this.nextCardId++,
      direction: this.state.direction,
      source_text: text,
      translation: "",
      status: "translating",
      timing_ms: null,
      error: null,
      fragments: [],
    };
    this.state.cards.push(card);
    this.notify();

    try {
      await this.client.translateStream(
        { text, direction: card.direction },
        {
          onToken: (fragment) => {
            card.fragments.push(fragment);
            card.translation = card.fragments.join("");
            this.notify();
          },
          onDone: (response: TranslateResponse) => {
            card.translation = response.translation;
            card.timing_ms = response.timing_ms;
            card.status = "done";
            this.notify();
          },
          onError: (error) => {
            card.status = "error";
            card.error = error;
            this.notify();
          },
        },
      );
    } catch (exc) {
      card.status = "error";
      card.error = {
        code: "CONNECTION_LOST",
        message: exc instanceof Error ? exc.message : String(exc),
      };
      this.notify();
    }
    return card;
  }

  /** Retry affordance for failed cards: resubmit the same source text. */
  async retry(cardId: number): Promise<ConversationCard | null> {
    const failed = this.state.cards.find(
      (c) => c.id === cardId && c.status === "error",
    );
    if (!failed) {
      return null;
    }
    const previous = this.state.direction;
    this.state.direction = failed.direction;
    try {
      return await this.submitTurn(failed.source_text);
    } finally {
      this.state.direction = previous;
    }
  }
}
