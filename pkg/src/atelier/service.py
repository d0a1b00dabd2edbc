"""Local HTTP service exposing the session workflow under /v1.

Handlers are stateless: all state lives in the file-backed session store,
so a restart loses no committed data. Per-session operations serialize on
a per-session lock; generation dispatch goes through the backend queue.
"""

from __future__ import annotations

import threading
import time

from fastapi import FastAPI, File, Request, UploadFile
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel

from . import imaging, pipeline
from .config import PrivacyGuard, ServiceConfig
from .errors import (
    AtelierError,
    BackendBusy,
    CapabilityMissing,
    ConfigError,
    CorruptImage,
    DetectorUnavailable,
    DimensionMismatch,
    EmptyMask,
    GuardViolation,
    HashMismatch,
    IllegalTransition,
    ImageTooSmall,
    InferenceFailure,
    InvalidAlias,
    InvalidParams,
    InvalidPrompt,
    ManifestError,
    MissingArtifact,
    NonLocalBackendRefused,
    OutOfBounds,
    PhaseMismatch,
    SafetyRejection,
    SessionClosed,
    SessionNotFound,
    StorageFailure,
    UnknownArtifact,
    UnknownBackend,
    UnsupportedFormat,
)
from .imaging import MaskImage, RasterImage, StrokeSet
from .pipeline import (
    BackendRegistry,
    GenerationParams,
    Prompt,
    SafetyHook,
    StubBackend,
)
from .session import ArtifactRef, Session, SessionPhase, SessionService

_STATUS_BY_ERROR: dict[type, int] = {
    InvalidAlias: 400,
    InvalidPrompt: 400,
    InvalidParams: 400,
    UnsupportedFormat: 400,
    CorruptImage: 400,
    ImageTooSmall: 400,
    OutOfBounds: 400,
    ManifestError: 400,
    ConfigError: 400,
    DetectorUnavailable: 400,
    SessionNotFound: 404,
    UnknownArtifact: 404,
    UnknownBackend: 404,
    IllegalTransition: 409,
    SessionClosed: 409,
    PhaseMismatch: 409,
    EmptyMask: 422,
    DimensionMismatch: 422,
    SafetyRejection: 422,
    CapabilityMissing: 422,
    NonLocalBackendRefused: 403,
    GuardViolation: 403,
    BackendBusy: 503,
    StorageFailure: 500,
    MissingArtifact: 500,
    HashMismatch: 500,
    InferenceFailure: 500,
}


def _status_for(exc: AtelierError) -> int:
    return _STATUS_BY_ERROR.get(type(exc), 500)


class CreateSessionBody(BaseModel):
    participant_alias: str


class PhaseBody(BaseModel):
    target: str


class EdgesBody(BaseModel):
    draft_id: str
    detector: str = "gradient"
    threshold: int | None = None


class PromptBody(BaseModel):
    text: str
    negative_text: str | None = None


class GenerateBody(BaseModel):
    edge_id: str
    prompt: PromptBody
    params: dict | None = None
    backend: str | None = None


class StrokesMaskBody(BaseModel):
    target_id: str
    strokes: list[dict]


class InpaintBody(BaseModel):
    artwork_id: str
    mask_id: str
    prompt: PromptBody
    params: dict | None = None
    backend: str | None = None


class ServiceState:
    def __init__(self, config: ServiceConfig):
        config.validate()
        self.config = config
        self.guard = PrivacyGuard(active=config.local_only)
        self.guard.check_bind(config.listen_host)
        self.sessions = SessionService(config.data_dir)
        self.registry = BackendRegistry(guard=self.guard)
        quarantine_dir = config.data_dir / "quarantine"

        def quarantine(image: RasterImage, reason: str) -> None:
            quarantine_dir.mkdir(parents=True, exist_ok=True)
            data = image.to_png_bytes()
            from .session import content_hash
            (quarantine_dir / f"{content_hash(data)}.png").write_bytes(data)

        self.safety = SafetyHook(policy=config.safety_policy, quarantine=quarantine)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()
        self.registry.register(StubBackend())

    def lock_for(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def resolve_params(self, overrides: dict | None) -> GenerationParams:
        resolved = self.config.default_params.to_dict()
        for key, value in (overrides or {}).items():
            if value is not None:
                resolved[key] = value
        return GenerationParams.from_dict(resolved)

    def resolve_backend(self, name: str | None, capability: str):
        allow = self.config.backend_allowlist
        if name is None:
            name = allow[0] if allow else "stub"
        elif allow and name not in allow:
            raise UnknownBackend(f"backend {name!r} not in allowlist")
        return self.registry.select(name, capability)


def _session_json(session: Session) -> dict:
    return session.to_dict()


def create_app(config: ServiceConfig | None = None,
               state: ServiceState | None = None) -> FastAPI:
    if state is None:
        state = ServiceState(config or ServiceConfig())
    app = FastAPI(title="atelier", version="1")
    app.state.atelier = state
    sessions = state.sessions

    @app.exception_handler(AtelierError)
    async def atelier_error_handler(request: Request, exc: AtelierError):
        status = _status_for(exc)
        headers = {"Retry-After": "1"} if status == 503 else None
        return JSONResponse(status_code=status, headers=headers,
                            content={"code": exc.code, "message": exc.message})

    @app.get("/v1/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/v1/backends")
    def backends():
        return {"backends": [
            {"name": d.name, "capabilities": sorted(d.capabilities),
             "local_only": d.local_only, "model_ids": list(d.model_ids)}
            for d in state.registry.descriptors()
        ]}

    @app.get("/v1/privacy/audit")
    def privacy_audit():
        return {"active": state.guard.active, "violations": state.guard.violations}

    @app.post("/v1/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        session = sessions.create_session(body.participant_alias,
                                          config_snapshot=state.config.to_snapshot())
        return _session_json(session)

    @app.get("/v1/sessions")
    def list_sessions():
        return {"sessions": sessions.list_ids()}

    @app.get("/v1/sessions/{session_id}")
    def get_session(session_id: str):
        return _session_json(sessions.load(session_id))

    @app.post("/v1/sessions/{session_id}/phase")
    def advance_phase(session_id: str, body: PhaseBody):
        with state.lock_for(session_id):
            session = sessions.load(session_id)
            sessions.advance_phase(session, SessionPhase.parse(body.target))
            return _session_json(session)

    @app.post("/v1/sessions/{session_id}/drafts", status_code=201)
    async def upload_draft(session_id: str, image: UploadFile = File(...)):
        data = await image.read()
        with state.lock_for(session_id):
            session = sessions.load(session_id)
            if session.phase not in (SessionPhase.InitialConversation,
                                     SessionPhase.ArtisticWork):
                raise PhaseMismatch("drafts can only be added in phases i or ii")
            raster = imaging.ingest_image(data, image.content_type)
            ref = sessions.artifacts.put(raster.to_png_bytes(), "Draft", "image/png")
            sessions.attach_artifact(session, ref)
            return ref.to_dict()

    @app.post("/v1/sessions/{session_id}/edges", status_code=201)
    def make_edges(session_id: str, body: EdgesBody):
        with state.lock_for(session_id):
            session = sessions.load(session_id)
            if body.draft_id not in session.artifacts:
                raise UnknownArtifact(f"draft {body.draft_id!r} unknown to this session")
            raster = imaging.ingest_image(sessions.artifacts.get(body.draft_id))
            edges = imaging.detect_edges(raster, body.detector, threshold=body.threshold)
            ref = sessions.artifacts.put(edges.to_png_bytes(), "EdgeMap", "image/png")
            sessions.attach_artifact(session, ref, parent_id=body.draft_id)
            return ref.to_dict()

    @app.post("/v1/sessions/{session_id}/generate", status_code=201)
    def generate(session_id: str, body: GenerateBody):
        with state.lock_for(session_id):
            session = sessions.load(session_id)
            if session.phase != SessionPhase.ArtisticWork:
                raise PhaseMismatch("generation requires the artistic-work phase")
            if body.edge_id not in session.artifacts:
                raise UnknownArtifact(f"edge map {body.edge_id!r} unknown to this session")
            edges = imaging.EdgeMap(
                intensities=imaging.decode_single_channel_png(
                    sessions.artifacts.get(body.edge_id)))
            prompt = Prompt(text=body.prompt.text, negative_text=body.prompt.negative_text)
            params = state.resolve_params(body.params)
            backend = state.resolve_backend(body.backend, "sketch_to_image")
            started = time.monotonic()
            artwork = pipeline.generate_from_sketch(
                edges, prompt, params, backend, safety=state.safety,
                registry=state.registry, dispatch_timeout=state.config.dispatch_timeout,
                guard=state.guard)
            wall_ms = int((time.monotonic() - started) * 1000)
            out_ref = sessions.artifacts.put(artwork.to_png_bytes(), "Artwork", "image/png")
            sessions.attach_artifact(session, out_ref, parent_id=body.edge_id)
            inputs = [body.edge_id]
            draft_id = session.lineage.get(body.edge_id)
            if draft_id is not None:
                inputs.insert(0, draft_id)
            record = sessions.record_iteration(
                session, "Refinement", inputs, prompt.text, prompt.negative_text,
                params.to_dict(), out_ref.artifact_id, backend.descriptor.name, wall_ms)
            return record.to_dict()

    @app.post("/v1/sessions/{session_id}/masks", status_code=201)
    async def make_mask(session_id: str, request: Request):
        content_type = request.headers.get("content-type", "")
        with state.lock_for(session_id):
            session = sessions.load(session_id)
            if content_type.startswith("multipart/"):
                form = await request.form()
                upload = form.get("mask")
                if upload is None:
                    raise InvalidParams("multipart mask upload requires a 'mask' part")
                values = imaging.decode_single_channel_png(await upload.read())
                target_id = form.get("target_id")
                mask = MaskImage(values=(values >= 128).astype("uint8") * 255)
            else:
                body = StrokesMaskBody(**(await request.json()))
                target_id = body.target_id
                if target_id not in session.artifacts:
                    raise UnknownArtifact(f"target {target_id!r} unknown to this session")
                target = imaging.ingest_image(sessions.artifacts.get(target_id))
                strokes = StrokeSet.from_json_obj(body.strokes)
                mask = imaging.rasterize_mask(strokes, target.width, target.height)
            ref = sessions.artifacts.put(mask.to_png_bytes(), "Mask", "image/png")
            sessions.attach_artifact(session, ref,
                                     parent_id=target_id if target_id else None)
            return ref.to_dict()

    @app.post("/v1/sessions/{session_id}/inpaint", status_code=201)
    def inpaint_endpoint(session_id: str, body: InpaintBody):
        with state.lock_for(session_id):
            session = sessions.load(session_id)
            if session.phase != SessionPhase.Adaptation:
                raise PhaseMismatch("inpainting requires the adaptation phase")
            for artifact_id in (body.artwork_id, body.mask_id):
                if artifact_id not in session.artifacts:
                    raise UnknownArtifact(f"artifact {artifact_id!r} unknown to this session")
            image = imaging.ingest_image(sessions.artifacts.get(body.artwork_id))
            mask_values = imaging.decode_single_channel_png(
                sessions.artifacts.get(body.mask_id))
            report = imaging.validate_mask(mask_values, image)
            if not report.binary:
                raise InvalidParams("stored mask is not strictly binary")
            if not report.dimension_match:
                raise DimensionMismatch("mask dimensions do not match the artwork")
            mask = MaskImage(values=mask_values)
            prompt = Prompt(text=body.prompt.text, negative_text=body.prompt.negative_text)
            params = state.resolve_params(body.params)
            backend = state.resolve_backend(body.backend, "inpaint")
            started = time.monotonic()
            adapted = pipeline.inpaint(
                image, mask, prompt, params, backend, safety=state.safety,
                registry=state.registry, dispatch_timeout=state.config.dispatch_timeout,
                guard=state.guard)
            wall_ms = int((time.monotonic() - started) * 1000)
            out_ref = sessions.artifacts.put(adapted.to_png_bytes(),
                                             "AdaptedArtwork", "image/png")
            sessions.attach_artifact(session, out_ref, parent_id=body.artwork_id)
            record = sessions.record_iteration(
                session, "Adaptation", [body.artwork_id, body.mask_id],
                prompt.text, prompt.negative_text, params.to_dict(),
                out_ref.artifact_id, backend.descriptor.name, wall_ms)
            return record.to_dict()

    @app.get("/v1/artifacts/{artifact_id}")
    def get_artifact(artifact_id: str):
        data = sessions.artifacts.get(artifact_id)
        return Response(content=data, media_type=sessions.artifacts.media_type(artifact_id))

    return app


def run(config: ServiceConfig) -> None:
    import uvicorn

    app = create_app(config)
    uvicorn.run(app, host=config.listen_host, port=config.listen_port)
