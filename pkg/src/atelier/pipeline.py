"""Generative pipeline: sketch-conditioned generation and mask-conditioned
inpainting over a pluggable backend contract.

The deterministic stub backend is specified bit-exactly and serves as the
test oracle; neural backends plug in behind the same contract. Regardless
of backend, inpainting enforces unmasked-pixel preservation by compositing:
latent-space models are never trusted to leave unmasked regions untouched.
"""

from __future__ import annotations

import hashlib
import threading
import unicodedata
from contextlib import nullcontext
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Protocol

import numpy as np
from PIL import Image

from .errors import (
    BackendBusy,
    CapabilityMissing,
    DimensionMismatch,
    DuplicateName,
    EmptyMask,
    InvalidParams,
    InvalidPrompt,
    NonLocalBackendRefused,
    SafetyRejection,
    UnknownBackend,
)
from .imaging import EdgeMap, MaskImage, RasterImage

MAX_PROMPT_CHARS = 2000

DEFAULT_STEPS = 30
DEFAULT_GUIDANCE = 7.5
DEFAULT_CONDITIONING = 0.8
DEFAULT_OUTPUT_SIZE = (512, 512)


@dataclass(frozen=True)
class Prompt:
    text: str
    negative_text: str | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise InvalidPrompt("prompt text is empty")
        if len(self.text) > MAX_PROMPT_CHARS:
            raise InvalidPrompt(f"prompt text exceeds {MAX_PROMPT_CHARS} chars")
        for candidate in (self.text, self.negative_text or ""):
            if any(unicodedata.category(ch) == "Cc" for ch in candidate):
                raise InvalidPrompt("control characters are not allowed in prompts")
        if self.negative_text is not None and len(self.negative_text) > MAX_PROMPT_CHARS:
            raise InvalidPrompt(f"negative prompt exceeds {MAX_PROMPT_CHARS} chars")


@dataclass(frozen=True)
class GenerationParams:
    """The reproducibility contract: everything needed to re-run a step."""

    seed: int = 0
    steps: int = DEFAULT_STEPS
    guidance_scale: float = DEFAULT_GUIDANCE
    conditioning_scale: float = DEFAULT_CONDITIONING
    output_size: tuple[int, int] = DEFAULT_OUTPUT_SIZE

    def __post_init__(self):
        if not (0 <= self.seed < 2 ** 64):
            raise InvalidParams("seed must be a 64-bit unsigned integer")
        if not (1 <= self.steps <= 200):
            raise InvalidParams("steps must be in 1..200")
        if not (0.0 <= self.guidance_scale <= 30.0):
            raise InvalidParams("guidance_scale must be in 0.0..30.0")
        if not (0.0 <= self.conditioning_scale <= 2.0):
            raise InvalidParams("conditioning_scale must be in 0.0..2.0")
        w, h = self.output_size
        for dim in (w, h):
            if dim % 64 != 0 or not (256 <= dim <= 1536):
                raise InvalidParams("output dimensions must be multiples of 64 in [256, 1536]")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "steps": self.steps,
            "guidance_scale": self.guidance_scale,
            "conditioning_scale": self.conditioning_scale,
            "output_size": list(self.output_size),
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "GenerationParams":
        kwargs = dict(obj)
        if "output_size" in kwargs:
            kwargs["output_size"] = tuple(kwargs["output_size"])
        return cls(**kwargs)


@dataclass(frozen=True)
class BackendDescriptor:
    name: str
    capabilities: frozenset[str]
    local_only: bool
    model_ids: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.capabilities:
            raise InvalidParams("backend must declare at least one capability")
        unknown = set(self.capabilities) - {"sketch_to_image", "inpaint"}
        if unknown:
            raise InvalidParams(f"unknown capabilities {sorted(unknown)}")


class GenerativeBackend(Protocol):
    descriptor: BackendDescriptor
    max_concurrency: int | None  # None = unbounded

    def sketch_to_image(self, edges: EdgeMap, prompt: Prompt,
                        params: GenerationParams) -> RasterImage: ...

    def inpaint(self, image: RasterImage, mask: MaskImage, prompt: Prompt,
                params: GenerationParams) -> RasterImage: ...


# --- deterministic stub backend ---

def stub_base_color(prompt_text: str, seed: int) -> tuple[int, int, int]:
    """First three bytes of sha256(utf8(prompt_text) || seed as 8 big-endian bytes)."""
    digest = hashlib.sha256(prompt_text.encode("utf-8") + seed.to_bytes(8, "big")).digest()
    return digest[0], digest[1], digest[2]


def resample_edges(edges: EdgeMap, size: tuple[int, int]) -> EdgeMap:
    """Bilinear resample to (width, height), then re-normalize to [0, 255]."""
    w, h = size
    if (edges.width, edges.height) == (w, h):
        return edges
    im = Image.fromarray(edges.intensities).resize((w, h), Image.Resampling.BILINEAR)
    arr = np.asarray(im, dtype=np.float64)
    peak = arr.max()
    if peak > 0.0:
        arr = np.rint(arr * (255.0 / peak))
    return EdgeMap(intensities=np.clip(arr, 0, 255).astype(np.uint8))


def stub_generate(edges: EdgeMap, prompt_text: str, seed: int,
                  output_size: tuple[int, int] = DEFAULT_OUTPUT_SIZE) -> RasterImage:
    """Bit-exact stub sketch_to_image.

    Edge map is resized to output_size first; each output pixel is the
    digest-derived base color at alpha = edge/255, composited over white.
    """
    resized = resample_edges(edges, output_size)
    base = np.array(stub_base_color(prompt_text, seed), dtype=np.float64)
    alpha = resized.intensities.astype(np.float64)[..., None] / 255.0
    out = np.rint(base * alpha + 255.0 * (1.0 - alpha))
    return RasterImage(pixels=np.clip(out, 0, 255).astype(np.uint8))


def stub_inpaint(image: RasterImage, mask: MaskImage, prompt_text: str,
                 seed: int) -> RasterImage:
    """Bit-exact stub inpaint: masked pixels take the digest-derived base
    color, unmasked pixels are copied."""
    base = np.array(stub_base_color(prompt_text, seed), dtype=np.uint8)
    out = image.pixels.copy()
    out[mask.values == 255] = base
    return RasterImage(pixels=out)


class StubBackend:
    """Deterministic in-process backend; outputs are pure functions of inputs."""

    descriptor = BackendDescriptor(
        name="stub",
        capabilities=frozenset({"sketch_to_image", "inpaint"}),
        local_only=True,
        model_ids=("stub/deterministic",),
    )
    max_concurrency = None

    def sketch_to_image(self, edges, prompt, params):
        return stub_generate(edges, prompt.text, params.seed, params.output_size)

    def inpaint(self, image, mask, prompt, params):
        return stub_inpaint(image, mask, prompt.text, params.seed)


# --- safety hook ---

class SafetyPolicy(str, Enum):
    OFF = "off"
    LOG = "log"
    BLOCK = "block"


@dataclass(frozen=True)
class SafetyVerdict:
    passed: bool
    reason: str | None = None

    @classmethod
    def ok(cls) -> "SafetyVerdict":
        return cls(passed=True)

    @classmethod
    def flagged(cls, reason: str) -> "SafetyVerdict":
        return cls(passed=False, reason=reason)


def always_pass(image: RasterImage) -> SafetyVerdict:
    """Default checker. The hook point and the audit trail are the deliverable;
    a real classifier plugs in here."""
    return SafetyVerdict.ok()


@dataclass
class SafetyHook:
    policy: SafetyPolicy = SafetyPolicy.LOG
    checker: Callable[[RasterImage], SafetyVerdict] = always_pass
    audit: list[dict] = field(default_factory=list)
    quarantine: Callable[[RasterImage, str], None] | None = None

    def check(self, image: RasterImage, context: str) -> SafetyVerdict:
        if self.policy is SafetyPolicy.OFF:
            return SafetyVerdict.ok()
        verdict = self.checker(image)
        if not verdict.passed:
            self.audit.append({"context": context, "reason": verdict.reason,
                               "policy": self.policy.value})
            if self.policy is SafetyPolicy.BLOCK:
                if self.quarantine is not None:
                    self.quarantine(image, verdict.reason or "flagged")
                raise SafetyRejection(verdict.reason or "image flagged by safety checker")
        return verdict


def safety_check(image: RasterImage, policy: SafetyPolicy,
                 checker: Callable[[RasterImage], SafetyVerdict] = always_pass) -> SafetyVerdict:
    if policy is SafetyPolicy.OFF:
        return SafetyVerdict.ok()
    return checker(image)


# --- backend registry and dispatch ---

class BackendRegistry:
    """Name-keyed backend registry. Read-mostly; guarded by a lock so
    registration and lookup are safe from any thread."""

    def __init__(self, guard=None):
        self._lock = threading.Lock()
        self._backends: dict[str, GenerativeBackend] = {}
        self._slots: dict[str, threading.BoundedSemaphore] = {}
        self.guard = guard

    def register(self, backend: GenerativeBackend) -> None:
        desc = backend.descriptor
        if self.guard is not None:
            self.guard.check_backend(desc)
        with self._lock:
            if desc.name in self._backends:
                raise DuplicateName(f"backend {desc.name!r} already registered")
            self._backends[desc.name] = backend
            if backend.max_concurrency is not None:
                self._slots[desc.name] = threading.BoundedSemaphore(backend.max_concurrency)

    def select(self, name: str, required_capability: str) -> GenerativeBackend:
        with self._lock:
            backend = self._backends.get(name)
        if backend is None:
            raise UnknownBackend(f"no backend named {name!r}")
        if required_capability not in backend.descriptor.capabilities:
            raise CapabilityMissing(
                f"backend {name!r} lacks capability {required_capability!r}")
        if self.guard is not None:
            self.guard.check_backend(backend.descriptor)
        return backend

    def descriptors(self) -> list[BackendDescriptor]:
        with self._lock:
            return [b.descriptor for b in self._backends.values()]

    def _slot(self, name: str, timeout: float):
        sem = self._slots.get(name)
        if sem is None:
            return nullcontext()
        return _SemaphoreSlot(sem, timeout, name)


class _SemaphoreSlot:
    def __init__(self, sem, timeout, name):
        self.sem = sem
        self.timeout = timeout
        self.name = name

    def __enter__(self):
        if not self.sem.acquire(timeout=self.timeout):
            raise BackendBusy(f"backend {self.name!r} queue full")
        return self

    def __exit__(self, *exc):
        self.sem.release()
        return False


def register_backend(registry: BackendRegistry, backend: GenerativeBackend) -> None:
    registry.register(backend)


def select_backend(registry: BackendRegistry, name: str,
                   required_capability: str) -> GenerativeBackend:
    return registry.select(name, required_capability)


def generate_from_sketch(edges: EdgeMap, prompt: Prompt, params: GenerationParams,
                         backend: GenerativeBackend,
                         safety: SafetyHook | None = None,
                         registry: BackendRegistry | None = None,
                         dispatch_timeout: float = 30.0,
                         guard=None) -> RasterImage:
    """Edge-conditioned generation. Output is exactly params.output_size."""
    if "sketch_to_image" not in backend.descriptor.capabilities:
        raise CapabilityMissing(f"backend {backend.descriptor.name!r} cannot sketch_to_image")
    resized = resample_edges(edges, params.output_size)
    slot = registry._slot(backend.descriptor.name, dispatch_timeout) if registry else nullcontext()
    guard_ctx = guard.guarded() if guard is not None else nullcontext()
    with slot, guard_ctx:
        out = backend.sketch_to_image(resized, prompt, params)
    if (out.width, out.height) != params.output_size:
        raise DimensionMismatch(
            f"backend returned {out.width}x{out.height}, expected {params.output_size}")
    if safety is not None:
        safety.check(out, context=f"generate:{backend.descriptor.name}")
    return out


def inpaint(image: RasterImage, mask: MaskImage, prompt: Prompt,
            params: GenerationParams, backend: GenerativeBackend,
            safety: SafetyHook | None = None,
            registry: BackendRegistry | None = None,
            dispatch_timeout: float = 30.0,
            guard=None) -> RasterImage:
    """Mask-conditioned regeneration.

    The compositing step after backend dispatch guarantees byte-exact
    preservation of every mask=0 pixel, whatever the backend did.
    """
    if "inpaint" not in backend.descriptor.capabilities:
        raise CapabilityMissing(f"backend {backend.descriptor.name!r} cannot inpaint")
    if (mask.width, mask.height) != (image.width, image.height):
        raise DimensionMismatch(
            f"mask {mask.width}x{mask.height} vs image {image.width}x{image.height}")
    if not (mask.values == 255).any():
        raise EmptyMask("mask selects no pixels")
    slot = registry._slot(backend.descriptor.name, dispatch_timeout) if registry else nullcontext()
    guard_ctx = guard.guarded() if guard is not None else nullcontext()
    with slot, guard_ctx:
        raw = backend.inpaint(image, mask, prompt, params)
    if (raw.width, raw.height) != (image.width, image.height):
        raise DimensionMismatch(
            f"backend returned {raw.width}x{raw.height}, expected input size")
    keep = (mask.values == 0)[..., None]
    composited = np.where(keep, image.pixels, raw.pixels).astype(np.uint8)
    out = RasterImage(pixels=composited)
    if safety is not None:
        safety.check(out, context=f"inpaint:{backend.descriptor.name}")
    return out
