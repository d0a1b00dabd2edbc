"""Service configuration and the privacy guard.

The privacy posture is locality: loopback-only binding, local-only backends,
and zero third-party API calls from pipeline code paths. The guard turns
that posture into enforced checks with an auditable violation trail.
"""

from __future__ import annotations

import ipaddress
import json
import os
import socket
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, GuardViolation, NonLocalBackendRefused
from .pipeline import BackendDescriptor, GenerationParams, SafetyPolicy

ENV_DATA_DIR = "ATELIER_DATA_DIR"
ENV_LISTEN = "ATELIER_LISTEN"
ENV_LOCAL_ONLY = "ATELIER_LOCAL_ONLY"
ENV_SAFETY = "ATELIER_SAFETY"

DEFAULT_LISTEN = "127.0.0.1:8470"
DEFAULT_QUEUE_DEPTH = 4


def is_loopback_host(host: str) -> bool:
    if host in ("localhost", ""):
        return True
    try:
        return ipaddress.ip_address(host).is_loopback
    except ValueError:
        return False


@dataclass
class ServiceConfig:
    listen_address: str = DEFAULT_LISTEN
    data_dir: Path = Path("atelier-data")
    local_only: bool = True
    safety_policy: SafetyPolicy = SafetyPolicy.LOG
    default_params: GenerationParams = field(default_factory=GenerationParams)
    backend_allowlist: list[str] = field(default_factory=list)
    queue_depth: int = DEFAULT_QUEUE_DEPTH
    dispatch_timeout: float = 30.0

    @property
    def listen_host(self) -> str:
        return self.listen_address.rsplit(":", 1)[0]

    @property
    def listen_port(self) -> int:
        return int(self.listen_address.rsplit(":", 1)[1])

    def validate(self) -> None:
        try:
            self.listen_port
        except (ValueError, IndexError):
            raise ConfigError(f"listen_address {self.listen_address!r} is not host:port") from None
        if self.local_only and not is_loopback_host(self.listen_host):
            raise GuardViolation(
                f"local_only requires a loopback bind, got {self.listen_host!r}")
        self.data_dir.mkdir(parents=True, exist_ok=True)
        probe = self.data_dir / ".write-probe"
        try:
            probe.write_bytes(b"")
            probe.unlink()
        except OSError as exc:
            raise ConfigError(f"data_dir {self.data_dir} not writable: {exc}") from exc

    def to_snapshot(self) -> dict:
        return {
            "listen_address": self.listen_address,
            "data_dir": str(self.data_dir),
            "local_only": self.local_only,
            "safety_policy": self.safety_policy.value,
            "default_params": self.default_params.to_dict(),
            "backend_allowlist": list(self.backend_allowlist),
            "queue_depth": self.queue_depth,
        }

    @classmethod
    def load(cls, config_path: Path | None = None,
             env: dict | None = None) -> "ServiceConfig":
        """Config file (JSON) plus environment overrides."""
        env = os.environ if env is None else env
        obj: dict = {}
        if config_path is not None:
            try:
                obj = json.loads(Path(config_path).read_text("utf-8"))
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot load config {config_path}: {exc}") from exc
        cfg = cls(
            listen_address=obj.get("listen_address", DEFAULT_LISTEN),
            data_dir=Path(obj.get("data_dir", "atelier-data")),
            local_only=bool(obj.get("local_only", True)),
            safety_policy=SafetyPolicy(obj.get("safety_policy", "log")),
            default_params=GenerationParams.from_dict(obj.get("default_params", {})),
            backend_allowlist=list(obj.get("backend_allowlist", [])),
            queue_depth=int(obj.get("queue_depth", DEFAULT_QUEUE_DEPTH)),
        )
        if ENV_DATA_DIR in env:
            cfg.data_dir = Path(env[ENV_DATA_DIR])
        if ENV_LISTEN in env:
            cfg.listen_address = env[ENV_LISTEN]
        if ENV_LOCAL_ONLY in env:
            cfg.local_only = env[ENV_LOCAL_ONLY].lower() in ("1", "true", "yes")
        if ENV_SAFETY in env:
            try:
                cfg.safety_policy = SafetyPolicy(env[ENV_SAFETY])
            except ValueError:
                raise ConfigError(f"bad {ENV_SAFETY} value {env[ENV_SAFETY]!r}") from None
        return cfg


class PrivacyGuard:
    """Locality enforcement with an audit trail.

    When active: non-loopback binds are refused, backends not attesting
    local_only are refused, and any outbound non-loopback socket connect
    attempted inside a guarded pipeline section is recorded and aborted.
    """

    def __init__(self, active: bool = True):
        self.active = active
        self.violations: list[dict] = []
        self._lock = threading.Lock()

    def _record(self, kind: str, detail: str) -> None:
        with self._lock:
            self.violations.append({"kind": kind, "detail": detail})

    def check_bind(self, host: str) -> None:
        if self.active and not is_loopback_host(host):
            self._record("bind", host)
            raise GuardViolation(f"refusing non-loopback bind to {host!r}")

    def check_backend(self, descriptor: BackendDescriptor) -> None:
        if self.active and not descriptor.local_only:
            self._record("backend", descriptor.name)
            raise NonLocalBackendRefused(
                f"backend {descriptor.name!r} does not attest local_only")

    @contextmanager
    def guarded(self):
        """Abort and audit any outbound non-loopback connection attempted by
        code running inside this context."""
        if not self.active:
            yield
            return
        guard = self
        real_connect = socket.socket.connect

        def patched_connect(sock, address):
            # Unix sockets (non-tuple addresses) are local by construction.
            if isinstance(address, tuple):
                host = address[0]
                if isinstance(host, bytes):
                    host = host.decode()
                if not is_loopback_host(host):
                    guard._record("outbound_connection", str(address))
                    raise GuardViolation(f"outbound connection to {address!r} blocked")
            return real_connect(sock, address)

        socket.socket.connect = patched_connect
        try:
            yield
        finally:
            socket.socket.connect = real_connect
