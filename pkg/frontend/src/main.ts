/**
 * Browser entry point: wires TranslatorApp to the page. All decisions
 * live in app.ts/render.ts; this file only moves strings into elements
 * and events back out.
 */

import { TranslatorApp } from "./app.js";
import { BrowserTransport, ServiceClient } from "./client.js";
import {
  cardViews,
  connectionBanner,
  directionButtonLabel,
  statusBadge,
  submitDisabled,
} from "./render.js";
import { probeCapabilities, speakTranslation } from "./speech.js";

const DEFAULT_HOST = "127.0.0.1:8237";
const HEALTH_POLL_MS = 5000;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) {
    throw new Error(`missing element #${id}`);
  }
  return node as T;
}

function start(): void {
  const host = new URLSearchParams(location.search).get("service") ?? DEFAULT_HOST;
  const app = new TranslatorApp(new ServiceClient(host, new BrowserTransport()));
  const capabilities = probeCapabilities();

  const badge = el<HTMLSpanElement>("badge");
  const banner = el<HTMLDivElement>("banner");
  const cardList = el<HTMLUListElement>("cards");
  const input = el<HTMLTextAreaElement>("draft");
  const submit = el<HTMLButtonElement>("submit");
  const toggle = el<HTMLButtonElement>("toggle");
  const record = el<HTMLButtonElement>("record");

  record.hidden = !capabilities.canRecord;

  function render(): void {
    badge.textContent = statusBadge(app.state);
    const bannerText = connectionBanner(app.state);
    banner.hidden = bannerText === null;
    banner.textContent = bannerText ?? "";
    toggle.textContent = directionButtonLabel(app.state);
    submit.disabled = submitDisabled(app.state, input.value);

    cardList.replaceChildren(
      ...cardViews(app.state).map((view) => {
        const item = document.createElement("li");
        item.className = view.inProgress ? "card in-progress" : "card";

        const source = document.createElement("p");
        source.className = "source";
        source.textContent = `${view.directionText} · ${view.sourceText}`;

        const output = document.createElement("p");
        output.className = "translation";
        output.textContent = view.translationText;

        const meta = document.createElement("p");
        meta.className = "meta";
        meta.textContent = view.errorText ?? view.timingText ?? view.statusText;

        item.append(source, output, meta);

        if (view.showRetry) {
          const retry = document.createElement("button");
          retry.textContent = "Retry";
          retry.onclick = () => void app.retry(view.id);
          item.append(retry);
        } else if (capabilities.canSpeak && view.translationText) {
          const speak = document.createElement("button");
          speak.textContent = "Speak";
          speak.onclick = () => {
            const card = app.state.cards.find((c) => c.id === view.id);
            if (card) {
              speakTranslation(card.direction, card.translation);
            }
          };
          item.append(speak);
        }
        return item;
      }),
    );
    cardList.lastElementChild?.scrollIntoView({ block: "end" });
  }

  app.onChange(render);
  input.addEventListener("input", render);
  toggle.addEventListener("click", () => app.toggleDirection());
  submit.addEventListener("click", () => {
    const text = input.value;
    if (app.canSubmit(text)) {
      input.value = "";
      void app.submitTurn(text);
    }
  });
  input.addEventListener("keydown", (event) => {
    if (event.key === "Enter" && !event.shiftKey) {
      event.preventDefault();
      submit.click();
    }
  });

  render();
  void app.refreshHealth();
  setInterval(() => void app.refreshHealth(), HEALTH_POLL_MS);
}

start();
