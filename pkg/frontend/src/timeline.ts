// Session view reconstruction. The UI holds no authoritative state: this
// rebuilds the complete timeline from GET responses alone, so a hard page
// reload always converges to what the server has committed.

import type { ApiClient } from "./api";
import type { Phase, Session } from "./types";
import { PHASE_ORDER } from "./types";

export interface TimelineEntry {
  kind: "Refinement" | "Adaptation";
  outputArtifact: string;
  inputArtifacts: string[];
  promptText: string;
  createdAt: string;
}

export interface SessionView {
  sessionId: string;
  phase: Phase;
  phaseIndex: number; // 0..3, drives the i-iv indicator
  timeline: TimelineEntry[];
  artifactIds: string[]; // sorted, for integrity display
  terminal: boolean;
}

export function buildSessionView(session: Session): SessionView {
  return {
    sessionId: session.session_id,
    phase: session.phase,
    phaseIndex: PHASE_ORDER.indexOf(session.phase),
    timeline: session.iterations.map((rec) => ({
      kind: rec.kind,
      outputArtifact: rec.output_artifact,
      inputArtifacts: [...rec.input_artifacts],
      promptText: rec.prompt.text,
      createdAt: rec.created_at,
    })),
    artifactIds: session.artifacts.map((a) => a.artifact_id).sort(),
    terminal: session.phase === "Retrospective",
  };
}

export async function loadSessionView(api: ApiClient, sessionId: string): Promise<SessionView> {
  return buildSessionView(await api.getSession(sessionId));
}

// Before/after pair for the compare slider on any iteration.
export function comparePair(view: SessionView, index: number): { before: string | null; after: string } {
  const entry = view.timeline[index];
  return { before: entry.inputArtifacts[0] ?? null, after: entry.outputArtifact };
}
