"""Therapeutic-process state machine, iteration provenance and persistence.

A session moves through four phases (initial conversation, artistic work,
adaptation, retrospective) strictly forward, one step at a time; self
transitions are legal no-ops recorded for audit. Every generative step is
an immutable IterationRecord pointing into a content-addressed artifact
store, so any iteration can be re-run from its recorded inputs.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import uuid
import zipfile
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import IntEnum
from pathlib import Path
from typing import Callable

from .errors import (
    HashMismatch,
    IllegalTransition,
    InvalidAlias,
    MissingArtifact,
    PhaseMismatch,
    SessionClosed,
    SessionNotFound,
    StorageFailure,
    UnknownArtifact,
)

HASH_ALGORITHM = "sha256"
ARCHIVE_VERSION = "atelier/1"
MAX_ALIAS_LENGTH = 64

_EXT_BY_MEDIA_TYPE = {"image/png": "png", "image/jpeg": "jpg"}
_MEDIA_TYPE_BY_EXT = {v: k for k, v in _EXT_BY_MEDIA_TYPE.items()}

ARTIFACT_ROLES = ("Draft", "EdgeMap", "Artwork", "Mask", "AdaptedArtwork")
ITERATION_KINDS = ("Refinement", "Adaptation")


class SessionPhase(IntEnum):
    InitialConversation = 1
    ArtisticWork = 2
    Adaptation = 3
    Retrospective = 4

    @classmethod
    def parse(cls, name: str) -> "SessionPhase":
        try:
            return cls[name]
        except KeyError:
            raise IllegalTransition(f"unknown phase {name!r}") from None


def legal_transition(current: SessionPhase, target: SessionPhase) -> bool:
    """Self-loops and single forward steps only; 7 of the 16 pairs are legal."""
    return target == current or target == current + 1


def content_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def _iso_ms(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat(timespec="milliseconds")


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except OSError as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise StorageFailure(str(exc)) from exc


@dataclass(frozen=True)
class ArtifactRef:
    artifact_id: str  # lowercase hex sha256 of the encoded bytes
    role: str
    media_type: str
    byte_length: int

    def __post_init__(self):
        if self.role not in ARTIFACT_ROLES:
            raise ValueError(f"unknown artifact role {self.role!r}")
        if self.byte_length <= 0:
            raise ValueError("byte_length must be positive")

    def to_dict(self) -> dict:
        return {
            "artifact_id": self.artifact_id,
            "role": self.role,
            "media_type": self.media_type,
            "byte_length": self.byte_length,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ArtifactRef":
        return cls(**obj)


@dataclass(frozen=True)
class IterationRecord:
    iteration_id: str
    kind: str  # Refinement | Adaptation
    input_artifacts: tuple[str, ...]
    prompt_text: str
    prompt_negative: str | None
    params: dict
    output_artifact: str
    backend_name: str
    wall_time_ms: int
    created_at: str  # ISO-8601 UTC, millisecond precision

    def __post_init__(self):
        if self.kind not in ITERATION_KINDS:
            raise ValueError(f"unknown iteration kind {self.kind!r}")
        if self.wall_time_ms < 0:
            raise ValueError("wall_time_ms must be nonnegative")
        if self.output_artifact in self.input_artifacts:
            raise ValueError("output artifact id collides with an input id")

    def to_dict(self) -> dict:
        return {
            "iteration_id": self.iteration_id,
            "kind": self.kind,
            "input_artifacts": list(self.input_artifacts),
            "prompt": {"text": self.prompt_text, "negative_text": self.prompt_negative},
            "params": self.params,
            "output_artifact": self.output_artifact,
            "backend_name": self.backend_name,
            "wall_time_ms": self.wall_time_ms,
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "IterationRecord":
        return cls(
            iteration_id=obj["iteration_id"],
            kind=obj["kind"],
            input_artifacts=tuple(obj["input_artifacts"]),
            prompt_text=obj["prompt"]["text"],
            prompt_negative=obj["prompt"].get("negative_text"),
            params=obj["params"],
            output_artifact=obj["output_artifact"],
            backend_name=obj["backend_name"],
            wall_time_ms=obj["wall_time_ms"],
            created_at=obj["created_at"],
        )


@dataclass
class Session:
    session_id: str
    participant_alias: str
    phase: SessionPhase
    iterations: list[IterationRecord] = field(default_factory=list)
    artifacts: dict[str, ArtifactRef] = field(default_factory=dict)
    phase_audit: list[dict] = field(default_factory=list)
    lineage: dict[str, str] = field(default_factory=dict)  # artifact -> parent artifact
    created_at: str = ""
    updated_at: str = ""
    config_snapshot: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "participant_alias": self.participant_alias,
            "phase": self.phase.name,
            "iterations": [r.to_dict() for r in self.iterations],
            "artifacts": [self.artifacts[k].to_dict() for k in sorted(self.artifacts)],
            "phase_audit": self.phase_audit,
            "lineage": {k: self.lineage[k] for k in sorted(self.lineage)},
            "created_at": self.created_at,
            "updated_at": self.updated_at,
            "config_snapshot": self.config_snapshot,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Session":
        return cls(
            session_id=obj["session_id"],
            participant_alias=obj["participant_alias"],
            phase=SessionPhase[obj["phase"]],
            iterations=[IterationRecord.from_dict(r) for r in obj["iterations"]],
            artifacts={a["artifact_id"]: ArtifactRef.from_dict(a) for a in obj["artifacts"]},
            phase_audit=list(obj.get("phase_audit", [])),
            lineage=dict(obj.get("lineage", {})),
            created_at=obj["created_at"],
            updated_at=obj["updated_at"],
            config_snapshot=obj.get("config_snapshot", {}),
        )


class ArtifactStore:
    """Flat directory of content-addressed artifact files.

    Writes are temp-then-rename so a crash never leaves a partial artifact
    under its final name.
    """

    def __init__(self, root: Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, artifact_id: str) -> Path | None:
        for ext in _MEDIA_TYPE_BY_EXT:
            p = self.root / f"{artifact_id}.{ext}"
            if p.exists():
                return p
        return None

    def put(self, data: bytes, role: str, media_type: str) -> ArtifactRef:
        ext = _EXT_BY_MEDIA_TYPE.get(media_type)
        if ext is None:
            raise StorageFailure(f"unsupported media type {media_type!r}")
        artifact_id = content_hash(data)
        path = self.root / f"{artifact_id}.{ext}"
        if not path.exists():
            _atomic_write(path, data)
        return ArtifactRef(artifact_id=artifact_id, role=role,
                           media_type=media_type, byte_length=len(data))

    def get(self, artifact_id: str) -> bytes:
        path = self._path(artifact_id)
        if path is None:
            raise UnknownArtifact(f"artifact {artifact_id!r} not in store")
        return path.read_bytes()

    def media_type(self, artifact_id: str) -> str:
        path = self._path(artifact_id)
        if path is None:
            raise UnknownArtifact(f"artifact {artifact_id!r} not in store")
        return _MEDIA_TYPE_BY_EXT[path.suffix.lstrip(".")]

    def exists(self, artifact_id: str) -> bool:
        return self._path(artifact_id) is not None


def validate_alias(alias: str) -> None:
    if not alias or len(alias) > MAX_ALIAS_LENGTH:
        raise InvalidAlias(f"alias must be 1..{MAX_ALIAS_LENGTH} chars")


class SessionService:
    """Session lifecycle over a data directory.

    Layout: <data_dir>/sessions/<id>.json + <data_dir>/artifacts/<hash>.<ext>.
    One JSON document per session, re-written atomically on every commit, so
    a restart recovers every committed step.
    """

    def __init__(self, data_dir: Path, clock: Callable[[], datetime] = utc_now):
        self.data_dir = Path(data_dir)
        self.sessions_dir = self.data_dir / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self.artifacts = ArtifactStore(self.data_dir / "artifacts")
        self.clock = clock

    # -- persistence --

    def _session_path(self, session_id: str) -> Path:
        return self.sessions_dir / f"{session_id}.json"

    def save(self, session: Session) -> None:
        payload = json.dumps(session.to_dict(), sort_keys=True, indent=2).encode("utf-8")
        _atomic_write(self._session_path(session.session_id), payload)

    def load(self, session_id: str) -> Session:
        path = self._session_path(session_id)
        if not path.exists():
            raise SessionNotFound(f"no session {session_id!r}")
        return Session.from_dict(json.loads(path.read_text("utf-8")))

    def list_ids(self) -> list[str]:
        return sorted(p.stem for p in self.sessions_dir.glob("*.json"))

    # -- operations --

    def create_session(self, participant_alias: str, config_snapshot: dict | None = None) -> Session:
        validate_alias(participant_alias)
        now = _iso_ms(self.clock())
        session = Session(
            session_id=uuid.uuid4().hex,
            participant_alias=participant_alias,
            phase=SessionPhase.InitialConversation,
            created_at=now,
            updated_at=now,
            config_snapshot=config_snapshot or {},
        )
        self.save(session)
        return session

    def advance_phase(self, session: Session, target: SessionPhase) -> Session:
        current = session.phase
        if current == SessionPhase.Retrospective and target != current:
            raise SessionClosed("retrospective is terminal")
        if not legal_transition(current, target):
            raise IllegalTransition(f"{current.name} -> {target.name}")
        now = _iso_ms(self.clock())
        session.phase_audit.append({"from": current.name, "to": target.name, "at": now})
        session.phase = target
        session.updated_at = now
        self.save(session)
        return session

    def record_iteration(self, session: Session, kind: str, input_ids: list[str],
                         prompt_text: str, prompt_negative: str | None,
                         params: dict, output_id: str, backend_name: str,
                         wall_time_ms: int) -> IterationRecord:
        required = {"Refinement": SessionPhase.ArtisticWork,
                    "Adaptation": SessionPhase.Adaptation}[kind]
        if session.phase != required:
            raise PhaseMismatch(
                f"{kind} requires phase {required.name}, session is in {session.phase.name}")
        for artifact_id in [*input_ids, output_id]:
            if artifact_id not in session.artifacts or not self.artifacts.exists(artifact_id):
                raise UnknownArtifact(f"artifact {artifact_id!r} unknown to this session")
        record = IterationRecord(
            iteration_id=uuid.uuid4().hex,
            kind=kind,
            input_artifacts=tuple(input_ids),
            prompt_text=prompt_text,
            prompt_negative=prompt_negative,
            params=params,
            output_artifact=output_id,
            backend_name=backend_name,
            wall_time_ms=wall_time_ms,
            created_at=_iso_ms(self.clock()),
        )
        session.iterations.append(record)
        session.updated_at = record.created_at
        self.save(session)
        return record

    def attach_artifact(self, session: Session, ref: ArtifactRef,
                        parent_id: str | None = None) -> None:
        session.artifacts[ref.artifact_id] = ref
        if parent_id is not None:
            session.lineage[ref.artifact_id] = parent_id
        session.updated_at = _iso_ms(self.clock())
        self.save(session)

    # -- archive --

    def export_session(self, session: Session, out_path: Path) -> Path:
        manifest = {
            "version": ARCHIVE_VERSION,
            "hash_algorithm": HASH_ALGORITHM,
            "session": session.to_dict(),
        }
        manifest_bytes = json.dumps(manifest, sort_keys=True, indent=2).encode("utf-8")
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        try:
            with zipfile.ZipFile(out_path, "w", zipfile.ZIP_DEFLATED) as zf:
                zf.writestr("manifest", manifest_bytes)
                for artifact_id in sorted(session.artifacts):
                    ref = session.artifacts[artifact_id]
                    if not self.artifacts.exists(artifact_id):
                        raise MissingArtifact(f"store is missing artifact {artifact_id!r}")
                    ext = _EXT_BY_MEDIA_TYPE[ref.media_type]
                    zf.writestr(f"artifacts/{artifact_id}.{ext}", self.artifacts.get(artifact_id))
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc
        return out_path

    def import_session(self, archive_path: Path) -> Session:
        manifest, artifact_bytes = read_archive(archive_path)
        session = Session.from_dict(manifest["session"])
        for artifact_id, ref in session.artifacts.items():
            data = artifact_bytes.get(artifact_id)
            if data is None:
                raise MissingArtifact(f"archive lacks artifact {artifact_id!r}")
            self.artifacts.put(data, ref.role, ref.media_type)
        self.save(session)
        return session


def read_archive(archive_path: Path) -> tuple[dict, dict[str, bytes]]:
    """Load and hash-verify an archive; returns (manifest, {artifact_id: bytes})."""
    try:
        with zipfile.ZipFile(archive_path) as zf:
            manifest = json.loads(zf.read("manifest").decode("utf-8"))
            artifact_bytes: dict[str, bytes] = {}
            for info in zf.infolist():
                if not info.filename.startswith("artifacts/"):
                    continue
                artifact_id = Path(info.filename).stem
                data = zf.read(info)
                actual = content_hash(data)
                if actual != artifact_id:
                    raise HashMismatch(
                        f"artifact {artifact_id!r} re-hashes to {actual!r}")
                artifact_bytes[artifact_id] = data
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError) as exc:
        raise StorageFailure(f"unreadable archive: {exc}") from exc
    if manifest.get("version") != ARCHIVE_VERSION:
        raise StorageFailure(f"unsupported archive version {manifest.get('version')!r}")
    return manifest, artifact_bytes
