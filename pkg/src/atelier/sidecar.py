"""Local-socket backend protocol, so a sidecar process in another runtime
can host the generative models.

Wire format (both directions): 8-byte big-endian length prefix followed by
a UTF-8 JSON document. Binary payloads travel base64-encoded inside the
JSON.

Request:
    {"op": "sketch_to_image" | "inpaint",
     "edges_png": <b64>,          # sketch_to_image only
     "image_png": <b64>,          # inpaint only
     "mask_png": <b64>,           # inpaint only
     "prompt": {"text": ..., "negative_text": ...},
     "params": {"seed": ..., "steps": ..., "guidance_scale": ...,
                "conditioning_scale": ..., "output_size": [w, h]}}

Response:
    {"ok": true, "image_png": <b64>}
    {"ok": false, "error": {"code": ..., "message": ...}}

Addresses are loopback TCP ("127.0.0.1:port") or unix socket paths; both
satisfy the privacy guard.
"""

from __future__ import annotations

import base64
import io
import json
import socket

import numpy as np
from PIL import Image

from .errors import InferenceFailure
from .imaging import EdgeMap, MaskImage, RasterImage
from .pipeline import BackendDescriptor, GenerationParams, Prompt


def _send_message(sock: socket.socket, obj: dict) -> None:
    payload = json.dumps(obj).encode("utf-8")
    sock.sendall(len(payload).to_bytes(8, "big") + payload)


def _recv_message(sock: socket.socket) -> dict:
    header = _recv_exact(sock, 8)
    return json.loads(_recv_exact(sock, int.from_bytes(header, "big")).decode("utf-8"))


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    while n > 0:
        chunk = sock.recv(n)
        if not chunk:
            raise InferenceFailure("sidecar connection closed mid-message")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def _b64_png(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _decode_image(b64: str) -> RasterImage:
    with Image.open(io.BytesIO(base64.b64decode(b64))) as im:
        return RasterImage(pixels=np.asarray(im.convert("RGB"), dtype=np.uint8))


class SidecarBackend:
    """Backend adapter dispatching over the local-socket protocol.

    One connection per request; the sidecar owns model lifetime and batching.
    """

    max_concurrency = 1

    def __init__(self, descriptor: BackendDescriptor, address: str,
                 timeout: float = 120.0):
        self.descriptor = descriptor
        self.address = address
        self.timeout = timeout

    def _connect(self) -> socket.socket:
        if ":" in self.address and not self.address.startswith("/"):
            host, port = self.address.rsplit(":", 1)
            sock = socket.create_connection((host, int(port)), timeout=self.timeout)
        else:
            sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
            sock.settimeout(self.timeout)
            sock.connect(self.address)
        return sock

    def _roundtrip(self, request: dict) -> RasterImage:
        try:
            with self._connect() as sock:
                _send_message(sock, request)
                response = _recv_message(sock)
        except OSError as exc:
            raise InferenceFailure(f"sidecar unreachable: {exc}") from exc
        if not response.get("ok"):
            err = response.get("error", {})
            raise InferenceFailure(
                f"sidecar error {err.get('code', '?')}: {err.get('message', '')}")
        return _decode_image(response["image_png"])

    def sketch_to_image(self, edges: EdgeMap, prompt: Prompt,
                        params: GenerationParams) -> RasterImage:
        return self._roundtrip({
            "op": "sketch_to_image",
            "edges_png": _b64_png(edges.to_png_bytes()),
            "prompt": {"text": prompt.text, "negative_text": prompt.negative_text},
            "params": params.to_dict(),
        })

    def inpaint(self, image: RasterImage, mask: MaskImage, prompt: Prompt,
                params: GenerationParams) -> RasterImage:
        return self._roundtrip({
            "op": "inpaint",
            "image_png": _b64_png(image.to_png_bytes()),
            "mask_png": _b64_png(mask.to_png_bytes()),
            "prompt": {"text": prompt.text, "negative_text": prompt.negative_text},
            "params": params.to_dict(),
        })


def serve_backend(backend, listen_sock: socket.socket, max_requests=None) -> None:
    """Host any in-process backend behind the socket protocol.

    Intended for sidecar processes; also used by tests to exercise the wire
    format with the stub backend.
    """
    served = 0
    while max_requests is None or served < max_requests:
        try:
            conn, _ = listen_sock.accept()
        except OSError:
            return  # listener closed; shut down quietly
        with conn:
            try:
                request = _recv_message(conn)
                op = request["op"]
                prompt = Prompt(text=request["prompt"]["text"],
                                negative_text=request["prompt"].get("negative_text"))
                params = GenerationParams.from_dict(request["params"])
                if op == "sketch_to_image":
                    edges = EdgeMap(intensities=np.asarray(Image.open(io.BytesIO(
                        base64.b64decode(request["edges_png"]))).convert("L")))
                    result = backend.sketch_to_image(edges, prompt, params)
                elif op == "inpaint":
                    image = _decode_image(request["image_png"])
                    mask = MaskImage(values=np.asarray(Image.open(io.BytesIO(
                        base64.b64decode(request["mask_png"]))).convert("L")))
                    result = backend.inpaint(image, mask, prompt, params)
                else:
                    raise InferenceFailure(f"unknown op {op!r}")
                _send_message(conn, {"ok": True,
                                     "image_png": _b64_png(result.to_png_bytes())})
            except Exception as exc:  # sidecar must answer, not die
                code = getattr(exc, "code", "internal_error")
                _send_message(conn, {"ok": False,
                                     "error": {"code": code, "message": str(exc)}})
        served += 1
