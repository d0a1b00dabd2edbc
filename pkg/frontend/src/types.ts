// Wire types for the /v1 API.

export type Phase =
  | "InitialConversation"
  | "ArtisticWork"
  | "Adaptation"
  | "Retrospective";

export const PHASE_ORDER: Phase[] = [
  "InitialConversation",
  "ArtisticWork",
  "Adaptation",
  "Retrospective",
];

export interface ArtifactRef {
  artifact_id: string;
  role: "Draft" | "EdgeMap" | "Artwork" | "Mask" | "AdaptedArtwork";
  media_type: string;
  byte_length: number;
}

export interface IterationRecord {
  iteration_id: string;
  kind: "Refinement" | "Adaptation";
  input_artifacts: string[];
  prompt: { text: string; negative_text: string | null };
  params: Record<string, unknown>;
  output_artifact: string;
  backend_name: string;
  wall_time_ms: number;
  created_at: string;
}

export interface Session {
  session_id: string;
  participant_alias: string;
  phase: Phase;
  iterations: IterationRecord[];
  artifacts: ArtifactRef[];
  phase_audit: { from: string; to: string; at: string }[];
  created_at: string;
  updated_at: string;
}

export interface ApiError {
  code: string;
  message: string;
}

export interface StrokeJson {
  points: [number, number][];
  radius: number;
  mode: "add" | "erase";
}
