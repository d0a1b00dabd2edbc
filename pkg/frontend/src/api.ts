// Thin typed client for the /v1 API. Fetch is injectable for tests.

import type { ApiError, ArtifactRef, IterationRecord, Phase, Session, StrokeJson } from "./types";

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiFailure extends Error {
  constructor(
    public status: number,
    public body: ApiError,
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(method: string, path: string, init: RequestInit = {}): Promise<T> {
    const resp = await this.fetchImpl(this.baseUrl + path, { method, ...init });
    if (!resp.ok) {
      let body: ApiError;
      try {
        body = (await resp.json()) as ApiError;
      } catch {
        body = { code: "unknown", message: resp.statusText };
      }
      throw new ApiFailure(resp.status, body);
    }
    return (await resp.json()) as T;
  }

  private json<T>(method: string, path: string, payload: unknown): Promise<T> {
    return this.request<T>(method, path, {
      headers: { "content-type": "application/json" },
      body: JSON.stringify(payload),
    });
  }

  createSession(participantAlias: string): Promise<Session> {
    return this.json("POST", "/v1/sessions", { participant_alias: participantAlias });
  }

  getSession(sessionId: string): Promise<Session> {
    return this.request("GET", `/v1/sessions/${sessionId}`);
  }

  advancePhase(sessionId: string, target: Phase): Promise<Session> {
    return this.json("POST", `/v1/sessions/${sessionId}/phase`, { target });
  }

  async uploadDraft(sessionId: string, png: Blob): Promise<ArtifactRef> {
    const form = new FormData();
    form.append("image", png, "draft.png");
    return this.request("POST", `/v1/sessions/${sessionId}/drafts`, { body: form });
  }

  makeEdges(sessionId: string, draftId: string, detector = "gradient"): Promise<ArtifactRef> {
    return this.json("POST", `/v1/sessions/${sessionId}/edges`, {
      draft_id: draftId,
      detector,
    });
  }

  generate(
    sessionId: string,
    edgeId: string,
    promptText: string,
    params?: Record<string, unknown>,
    backend?: string,
  ): Promise<IterationRecord> {
    return this.json("POST", `/v1/sessions/${sessionId}/generate`, {
      edge_id: edgeId,
      prompt: { text: promptText },
      params: params ?? null,
      backend: backend ?? null,
    });
  }

  submitMask(sessionId: string, targetId: string, strokes: StrokeJson[]): Promise<ArtifactRef> {
    return this.json("POST", `/v1/sessions/${sessionId}/masks`, {
      target_id: targetId,
      strokes,
    });
  }

  inpaint(
    sessionId: string,
    artworkId: string,
    maskId: string,
    promptText: string,
    params?: Record<string, unknown>,
    backend?: string,
  ): Promise<IterationRecord> {
    return this.json("POST", `/v1/sessions/${sessionId}/inpaint`, {
      artwork_id: artworkId,
      mask_id: maskId,
      prompt: { text: promptText },
      params: params ?? null,
      backend: backend ?? null,
    });
  }

  artifactUrl(artifactId: string): string {
    return `${this.baseUrl}/v1/artifacts/${artifactId}`;
  }

  listBackends(): Promise<{ backends: { name: string; capabilities: string[] }[] }> {
    return this.request("GET", "/v1/backends");
  }
}
