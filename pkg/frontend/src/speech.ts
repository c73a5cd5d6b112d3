/**
 * Local speech affordances. Synthesis uses the browser's built-in
 * speechSynthesis voices, which run on-device; nothing here ever
 * touches the network. Recording is a stub: the capability probe
 * decides whether the record button renders at all.
 */

export interface SpeechCapabilities {
  canSpeak: boolean;
  canRecord: boolean;
}

interface SpeechGlobals {
  speechSynthesis?: unknown;
  SpeechSynthesisUtterance?: unknown;
}

export function probeCapabilities(
  globals: SpeechGlobals = globalThis as SpeechGlobals,
): SpeechCapabilities {
  const canSpeak =
    typeof globals.speechSynthesis === "object" &&
    globals.speechSynthesis !== null &&
    typeof globals.SpeechSynthesisUtterance === "function";
  // Recording stays a stub until a local recognizer ships; the button
  // is hidden rather than wired to a cloud recognizer.
  return { canSpeak, canRecord: false };
}

const SPEECH_LANG: Record<string, string> = {
  "vi-en": "en-US",
  "en-vi": "vi-VN",
};

/** Speak a finished translation with a local voice, if available. */
export function speakTranslation(direction: string, text: string): boolean {
  const globals = globalThis as SpeechGlobals & {
    speechSynthesis?: { speak(utterance: unknown): void };
    SpeechSynthesisUtterance?: new (text: string) => { lang: string };
  };
  if (!probeCapabilities(globals).canSpeak || text.length === 0) {
    return false;
  }
  const utterance = new globals.SpeechSynthesisUtterance!(text);
  utterance.lang = SPEECH_LANG[direction] ?? "en-US";
  globals.speechSynthesis!.speak(utterance);
  return true;
}
