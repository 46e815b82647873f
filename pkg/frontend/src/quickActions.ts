// The four canonical instructions, exposed as one-click quick actions.
// The button labels double as the POSTed instruction text and must be
// sent verbatim — the scripted backend matches on the exact strings.

import type { SessionClient } from "./client.js";

export const CANONICAL_INSTRUCTIONS = [
  "Explore the dataset",
  "Process the dataset",
  "Select the model",
  "Fine tune the parameters",
] as const;

export type CanonicalInstruction = (typeof CANONICAL_INSTRUCTIONS)[number];

export type QuickAction = {
  label: CanonicalInstruction;
  run: () => Promise<number>;
};

export function quickActions(
  client: SessionClient,
  sessionId: string,
): QuickAction[] {
  return CANONICAL_INSTRUCTIONS.map((label) => ({
    label,
    run: () => client.sendInstruction(sessionId, label),
  }));
}
