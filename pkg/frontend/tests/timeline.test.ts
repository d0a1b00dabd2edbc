// The studio keeps no authoritative state: everything the timeline shows
// must be reconstructible from GET /v1/sessions/{id} alone. These tests
// drive the client against a fake fetch and check that a cold "reload"
// (a fresh client with no memory) rebuilds the identical view.

import { describe, expect, it } from "vitest";
import { ApiClient, ApiFailure } from "../src/api";
import type { FetchLike } from "../src/api";
import { buildSessionView, comparePair, loadSessionView } from "../src/timeline";
import type { Session } from "../src/types";

const SESSION: Session = {
  session_id: "s-1",
  participant_alias: "P7",
  phase: "Adaptation",
  iterations: [
    {
      iteration_id: "it-1",
      kind: "Refinement",
      input_artifacts: ["a-draft", "a-edge"],
      prompt: { text: "a spiral in blue and black", negative_text: null },
      params: { seed: 101 },
      output_artifact: "a-art1",
      backend_name: "stub",
      wall_time_ms: 12,
      created_at: "2026-08-20T10:00:00+00:00",
    },
    {
      iteration_id: "it-2",
      kind: "Adaptation",
      input_artifacts: ["a-art1", "a-mask"],
      prompt: { text: "light spreading from the center", negative_text: null },
      params: { seed: 101 },
      output_artifact: "a-art2",
      backend_name: "stub",
      wall_time_ms: 15,
      created_at: "2026-08-20T10:05:00+00:00",
    },
  ],
  artifacts: [
    { artifact_id: "a-draft", role: "Draft", media_type: "image/png", byte_length: 10 },
    { artifact_id: "a-edge", role: "EdgeMap", media_type: "image/png", byte_length: 10 },
    { artifact_id: "a-art1", role: "Artwork", media_type: "image/png", byte_length: 10 },
    { artifact_id: "a-mask", role: "Mask", media_type: "image/png", byte_length: 10 },
    { artifact_id: "a-art2", role: "AdaptedArtwork", media_type: "image/png", byte_length: 10 },
  ],
  phase_audit: [],
  created_at: "2026-08-20T09:00:00+00:00",
  updated_at: "2026-08-20T10:05:00+00:00",
};

function fakeFetch(handler: (url: string, init?: RequestInit) => unknown): FetchLike {
  return async (url, init) => {
    const body = handler(url, init);
    if (body instanceof Response) return body;
    return new Response(JSON.stringify(body), {
      status: 200,
      headers: { "content-type": "application/json" },
    });
  };
}

describe("session view reconstruction", () => {
  it("rebuilds the full timeline from a single GET", async () => {
    let gets = 0;
    const api = new ApiClient(
      "",
      fakeFetch((url, init) => {
        expect(init?.method ?? "GET").toBe("GET");
        expect(url).toBe("/v1/sessions/s-1");
        gets += 1;
        return SESSION;
      }),
    );
    const view = await loadSessionView(api, "s-1");
    expect(gets).toBe(1);
    expect(view.phase).toBe("Adaptation");
    expect(view.phaseIndex).toBe(2);
    expect(view.terminal).toBe(false);
    expect(view.timeline.map((t) => t.kind)).toEqual(["Refinement", "Adaptation"]);
    expect(view.timeline[1].inputArtifacts).toEqual(["a-art1", "a-mask"]);
    expect(view.artifactIds).toEqual(["a-art1", "a-art2", "a-draft", "a-edge", "a-mask"]);
  });

  it("a cold reload with a fresh client converges to the same view", async () => {
    const transport = fakeFetch(() => SESSION);
    const first = await loadSessionView(new ApiClient("", transport), "s-1");
    const reloaded = await loadSessionView(new ApiClient("", transport), "s-1");
    expect(reloaded).toEqual(first);
  });

  it("derives the compare pair from recorded provenance", () => {
    const view = buildSessionView(SESSION);
    expect(comparePair(view, 0)).toEqual({ before: "a-draft", after: "a-art1" });
    expect(comparePair(view, 1)).toEqual({ before: "a-art1", after: "a-art2" });
  });

  it("marks the retrospective phase as terminal", () => {
    const view = buildSessionView({ ...SESSION, phase: "Retrospective" });
    expect(view.terminal).toBe(true);
    expect(view.phaseIndex).toBe(3);
  });

  it("surfaces API errors with their code and message", async () => {
    const api = new ApiClient(
      "",
      fakeFetch(
        () =>
          new Response(JSON.stringify({ code: "illegal_transition", message: "no going back" }), {
            status: 409,
          }),
      ),
    );
    await expect(api.getSession("s-1")).rejects.toSatisfy((err: unknown) => {
      expect(err).toBeInstanceOf(ApiFailure);
      const failure = err as ApiFailure;
      expect(failure.status).toBe(409);
      expect(failure.body).toEqual({ code: "illegal_transition", message: "no going back" });
      return true;
    });
  });
});
