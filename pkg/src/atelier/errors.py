"""Error hierarchy shared across the package.

Every error carries a stable ``code`` string so the HTTP layer and CLI can
map it to wire bodies / exit codes without string matching on messages.
"""


class AtelierError(Exception):
    code = "internal_error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


# --- session-core ---

class InvalidAlias(AtelierError):
    code = "invalid_alias"


class SessionNotFound(AtelierError):
    code = "session_not_found"


class IllegalTransition(AtelierError):
    code = "illegal_transition"


class SessionClosed(AtelierError):
    code = "session_closed"


class PhaseMismatch(AtelierError):
    code = "phase_mismatch"


class UnknownArtifact(AtelierError):
    code = "unknown_artifact"


class MissingArtifact(AtelierError):
    code = "missing_artifact"


class HashMismatch(AtelierError):
    code = "hash_mismatch"


class StorageFailure(AtelierError):
    code = "storage_failure"


class ImmutableRecord(AtelierError):
    code = "immutable_record"


# --- imaging ---

class UnsupportedFormat(AtelierError):
    code = "unsupported_format"


class CorruptImage(AtelierError):
    code = "corrupt_image"


class ImageTooSmall(AtelierError):
    code = "image_too_small"


class DetectorUnavailable(AtelierError):
    code = "detector_unavailable"


class EmptyMask(AtelierError):
    code = "empty_mask"


class OutOfBounds(AtelierError):
    code = "out_of_bounds"


class DimensionMismatch(AtelierError):
    code = "dimension_mismatch"


# --- genpipeline ---

class InvalidPrompt(AtelierError):
    code = "invalid_prompt"


class InvalidParams(AtelierError):
    code = "invalid_params"


class InferenceFailure(AtelierError):
    code = "inference_failure"


class CapabilityMissing(AtelierError):
    code = "capability_missing"


class SafetyRejection(AtelierError):
    code = "safety_rejection"


class DuplicateName(AtelierError):
    code = "duplicate_name"


class UnknownBackend(AtelierError):
    code = "unknown_backend"


class NonLocalBackendRefused(AtelierError):
    code = "non_local_backend_refused"


class BackendBusy(AtelierError):
    code = "backend_busy"


# --- service / config ---

class ConfigError(AtelierError):
    code = "config_error"


class GuardViolation(AtelierError):
    code = "guard_violation"


# --- cli ---

class ManifestError(AtelierError):
    code = "manifest_error"
