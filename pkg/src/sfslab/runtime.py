"""Two-party session runtime: frames, transcripts, channels, sessions.

Every protocol in this package is written as a pair of functions

    client_fn(chan: ChannelEndpoint, rng: numpy Generator) -> result
    server_fn(chan: ChannelEndpoint, rng: numpy Generator) -> result

that exchange *frames*.  A frame is ``u32 BE payload length || type tag
|| payload`` with tags for classical bytes, serialized sparse states,
and control messages; a frame therefore costs ``5 + len(payload)``
bytes on the wire, and that is the number the transcript records.

Transcripts are the package's measurement instrument: one entry per
frame with direction, a protocol step label, the byte count, and the
tag — deliberately no timestamps, so equal executions produce
byte-identical transcript files.  The canonical transcript of a
session is the *client* endpoint's log.

Two interchangeable channels implement the endpoint interface: an
in-process pair backed by queues (used by experiments; deadlocks
surface as :class:`~sfslab.errors.ProtocolOrderError` via a receive
timeout) and a TCP channel with identical framing.  Seeding is split
so that an in-process session and a TCP session with the same seed
run the same protocol randomness on both sides.
"""

from __future__ import annotations

import json
import queue
import socket
import threading
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .errors import ChannelError, ConfigError, FrameError, ProtocolOrderError

__all__ = [
    "TAG_CLASSICAL",
    "TAG_STATE",
    "TAG_CONTROL",
    "FRAME_OVERHEAD",
    "encode_frame",
    "decode_frame",
    "TranscriptEntry",
    "Transcript",
    "ChannelEndpoint",
    "QueueEndpoint",
    "in_process_pair",
    "SessionResult",
    "run_session",
    "run_session_tcp",
    "TcpEndpoint",
    "tcp_connect",
    "tcp_listen_one",
    "client_rng_for_seed",
    "server_rng_for_seed",
    "parse_config",
    "load_config",
]

TAG_CLASSICAL = 0x01
TAG_STATE = 0x02
TAG_CONTROL = 0x03

_VALID_TAGS = (TAG_CLASSICAL, TAG_STATE, TAG_CONTROL)

FRAME_OVERHEAD = 5  # u32 length + tag byte
MAX_FRAME_PAYLOAD = 1 << 30

DEFAULT_TIMEOUT = 60.0


def encode_frame(tag: int, payload: bytes) -> bytes:
    """Encode one frame: u32 BE payload length, tag byte, payload."""
    if tag not in _VALID_TAGS:
        raise FrameError(f"unknown frame tag {tag:#x}")
    if len(payload) > MAX_FRAME_PAYLOAD:
        raise FrameError(f"payload of {len(payload)} bytes exceeds frame limit")
    return len(payload).to_bytes(4, "big") + bytes([tag]) + payload


def decode_frame(data: bytes) -> tuple[int, bytes]:
    """Decode one complete frame; the buffer must contain exactly one."""
    if len(data) < FRAME_OVERHEAD:
        raise FrameError("frame shorter than its header")
    length = int.from_bytes(data[:4], "big")
    tag = data[4]
    if tag not in _VALID_TAGS:
        raise FrameError(f"unknown frame tag {tag:#x}")
    if len(data) != FRAME_OVERHEAD + length:
        raise FrameError(
            f"frame length field says {length} payload bytes, buffer has "
            f"{len(data) - FRAME_OVERHEAD}"
        )
    return tag, data[FRAME_OVERHEAD:]


# ---------------------------------------------------------------------------
# Transcripts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TranscriptEntry:
    """One frame on the wire: direction, step label, total bytes, tag."""

    dir: str  # "C->S" or "S->C"
    step: str
    bytes: int
    tag: int


@dataclass
class Transcript:
    """Ordered log of frames as seen by one endpoint."""

    entries: list[TranscriptEntry] = field(default_factory=list)

    def add(self, direction: str, step: str, n_bytes: int, tag: int) -> None:
        self.entries.append(TranscriptEntry(direction, step, n_bytes, tag))

    def total_bytes(self) -> int:
        return sum(e.bytes for e in self.entries)

    def bytes_for_steps(self, predicate: Callable[[str], bool]) -> int:
        """Total bytes over entries whose step label satisfies the predicate."""
        return sum(e.bytes for e in self.entries if predicate(e.step))

    def count_steps(self, predicate: Callable[[str], bool]) -> int:
        return sum(1 for e in self.entries if predicate(e.step))

    def steps(self) -> list[str]:
        return [e.step for e in self.entries]

    def summary(self) -> dict[str, Any]:
        """Deterministic aggregate: frame count, total bytes, bytes per step."""
        by_step: dict[str, int] = {}
        for e in self.entries:
            by_step[e.step] = by_step.get(e.step, 0) + e.bytes
        return {
            "frames": len(self.entries),
            "total_bytes": self.total_bytes(),
            "by_step": dict(sorted(by_step.items())),
        }

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(
                {"dir": e.dir, "step": e.step, "bytes": e.bytes, "tag": e.tag},
                sort_keys=True,
            )
            for e in self.entries
        ]
        return "\n".join(lines) + ("\n" if lines else "")

    def write_jsonl(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, text: str) -> "Transcript":
        t = cls()
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                t.add(obj["dir"], obj["step"], int(obj["bytes"]), int(obj["tag"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise FrameError(f"bad transcript line {lineno}: {exc}") from exc
        return t


# ---------------------------------------------------------------------------
# Endpoints
# ---------------------------------------------------------------------------


class ChannelEndpoint:
    """One side of a two-party channel; logs every frame it sees.

    ``role`` is ``"client"`` or ``"server"`` and fixes the direction
    labels: a client's sends are ``C->S``, a server's are ``S->C``.
    """

    def __init__(self, role: str):
        if role not in ("client", "server"):
            raise ChannelError(f"role must be 'client' or 'server', got {role!r}")
        self.role = role
        self.transcript = Transcript()

    # concrete channels implement these two
    def _send_bytes(self, frame: bytes) -> None:
        raise NotImplementedError

    def _recv_bytes(self) -> bytes:
        raise NotImplementedError

    def close(self) -> None:  # pragma: no cover - overridden where meaningful
        pass

    @property
    def _out_dir(self) -> str:
        return "C->S" if self.role == "client" else "S->C"

    @property
    def _in_dir(self) -> str:
        return "S->C" if self.role == "client" else "C->S"

    def send(self, step: str, payload: bytes, tag: int = TAG_CLASSICAL) -> None:
        frame = encode_frame(tag, payload)
        self._send_bytes(frame)
        self.transcript.add(self._out_dir, step, len(frame), tag)

    def send_state(self, step: str, payload: bytes) -> None:
        self.send(step, payload, tag=TAG_STATE)

    def recv(self, step: str, expect_tag: int | None = None) -> bytes:
        frame = self._recv_bytes()
        tag, payload = decode_frame(frame)
        self.transcript.add(self._in_dir, step, len(frame), tag)
        if expect_tag is not None and tag != expect_tag:
            raise FrameError(
                f"step {step!r} expected frame tag {expect_tag:#x}, got {tag:#x}"
            )
        return payload

    def recv_any(self, step: str) -> tuple[int, bytes]:
        """Receive one frame and return (tag, payload) for tag-dispatched steps."""
        frame = self._recv_bytes()
        tag, payload = decode_frame(frame)
        self.transcript.add(self._in_dir, step, len(frame), tag)
        return tag, payload

    def recv_state(self, step: str) -> bytes:
        return self.recv(step, expect_tag=TAG_STATE)


_CLOSED = object()


class QueueEndpoint(ChannelEndpoint):
    """In-process endpoint over a pair of queues."""

    def __init__(
        self,
        role: str,
        inbox: "queue.Queue",
        outbox: "queue.Queue",
        timeout: float = DEFAULT_TIMEOUT,
    ):
        super().__init__(role)
        self._inbox = inbox
        self._outbox = outbox
        self._timeout = timeout

    def _send_bytes(self, frame: bytes) -> None:
        self._outbox.put(frame)

    def _recv_bytes(self) -> bytes:
        try:
            item = self._inbox.get(timeout=self._timeout)
        except queue.Empty:
            raise ProtocolOrderError(
                f"{self.role} timed out waiting for a frame after "
                f"{self._timeout}s; the parties are out of step"
            ) from None
        if item is _CLOSED:
            raise ChannelError(f"{self.role} channel closed by peer")
        return item

    def close(self) -> None:
        self._outbox.put(_CLOSED)


def in_process_pair(
    timeout: float = DEFAULT_TIMEOUT,
) -> tuple[QueueEndpoint, QueueEndpoint]:
    """A connected (client endpoint, server endpoint) pair."""
    c2s: "queue.Queue" = queue.Queue()
    s2c: "queue.Queue" = queue.Queue()
    client = QueueEndpoint("client", inbox=s2c, outbox=c2s, timeout=timeout)
    server = QueueEndpoint("server", inbox=c2s, outbox=s2c, timeout=timeout)
    return client, server


class TcpEndpoint(ChannelEndpoint):
    """Endpoint over a connected TCP socket, same framing as in-process."""

    def __init__(self, role: str, sock: socket.socket, timeout: float = DEFAULT_TIMEOUT):
        super().__init__(role)
        self._sock = sock
        self._sock.settimeout(timeout)

    def _send_bytes(self, frame: bytes) -> None:
        try:
            self._sock.sendall(frame)
        except OSError as exc:
            raise ChannelError(f"send failed: {exc}") from exc

    def _recv_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self._sock.recv(n - len(buf))
            except socket.timeout:
                raise ProtocolOrderError(
                    f"{self.role} timed out waiting for a frame; "
                    "the parties are out of step"
                ) from None
            except OSError as exc:
                raise ChannelError(f"recv failed: {exc}") from exc
            if not chunk:
                raise ChannelError("connection closed mid-frame")
            buf += chunk
        return bytes(buf)

    def _recv_bytes(self) -> bytes:
        header = self._recv_exact(FRAME_OVERHEAD)
        length = int.from_bytes(header[:4], "big")
        if length > MAX_FRAME_PAYLOAD:
            raise FrameError(f"frame announces {length} payload bytes, over the limit")
        payload = self._recv_exact(length) if length else b""
        return header + payload

    def close(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


def tcp_connect(host: str, port: int, timeout: float = DEFAULT_TIMEOUT) -> TcpEndpoint:
    """Connect to a listening peer; the connecting side is the client."""
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise ChannelError(f"connect to {host}:{port} failed: {exc}") from exc
    return TcpEndpoint("client", sock, timeout)


def tcp_listen_one(
    host: str, port: int, timeout: float = DEFAULT_TIMEOUT
) -> tuple[socket.socket, int]:
    """Bind and listen for a single connection; returns (socket, bound port)."""
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((host, port))
    except OSError as exc:
        sock.close()
        raise ChannelError(f"bind to {host}:{port} failed: {exc}") from exc
    sock.listen(1)
    sock.settimeout(timeout)
    return sock, sock.getsockname()[1]


def tcp_accept_one(listener: socket.socket, timeout: float = DEFAULT_TIMEOUT) -> TcpEndpoint:
    """Accept a single connection; the accepting side is the server."""
    try:
        conn, _addr = listener.accept()
    except socket.timeout:
        raise ChannelError("timed out waiting for a connection") from None
    finally:
        listener.close()
    return TcpEndpoint("server", conn, timeout)


# ---------------------------------------------------------------------------
# Sessions
# ---------------------------------------------------------------------------


def client_rng_for_seed(seed: int) -> np.random.Generator:
    """The client-side generator for a session seed (child stream 0)."""
    c, _s = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.PCG64(c))


def server_rng_for_seed(seed: int) -> np.random.Generator:
    """The server-side generator for a session seed (child stream 1)."""
    _c, s = np.random.SeedSequence(seed).spawn(2)
    return np.random.Generator(np.random.PCG64(s))


@dataclass
class SessionResult:
    """Both parties' return values plus the canonical (client) transcript."""

    client: Any
    server: Any
    transcript: Transcript


def run_session(
    client_fn: Callable[[ChannelEndpoint, np.random.Generator], Any],
    server_fn: Callable[[ChannelEndpoint, np.random.Generator], Any],
    seed: int,
    timeout: float = DEFAULT_TIMEOUT,
) -> SessionResult:
    """Run a two-party protocol in process and return both results.

    The server runs on a worker thread; exceptions on either side
    propagate to the caller (a server-side failure takes precedence
    over the client-side timeout it usually causes).
    """
    client_ep, server_ep = in_process_pair(timeout)
    rng_c = client_rng_for_seed(seed)
    rng_s = server_rng_for_seed(seed)

    server_box: dict[str, Any] = {}

    def server_main() -> None:
        try:
            server_box["result"] = server_fn(server_ep, rng_s)
        except BaseException as exc:  # noqa: BLE001 - re-raised on the main thread
            server_box["error"] = exc
        finally:
            server_ep.close()

    thread = threading.Thread(target=server_main, name="sfslab-server", daemon=True)
    thread.start()
    try:
        client_result = client_fn(client_ep, rng_c)
    except BaseException:
        client_ep.close()
        thread.join(timeout=timeout)
        server_exc = server_box.get("error")
        if server_exc is not None and not isinstance(server_exc, ChannelError):
            # the client's failure is usually a consequence of this one
            raise server_exc from None
        raise
    client_ep.close()
    thread.join(timeout=timeout)
    if thread.is_alive():
        raise ProtocolOrderError("server still running after the client finished")
    if "error" in server_box:
        raise server_box["error"]
    return SessionResult(client_result, server_box.get("result"), client_ep.transcript)


def run_session_tcp(
    client_fn: Callable[[ChannelEndpoint, np.random.Generator], Any],
    server_fn: Callable[[ChannelEndpoint, np.random.Generator], Any],
    seed: int,
    host: str = "127.0.0.1",
    timeout: float = DEFAULT_TIMEOUT,
) -> SessionResult:
    """Run the same session over a real TCP socket on an ephemeral port."""
    listener, port = tcp_listen_one(host, 0, timeout)
    rng_c = client_rng_for_seed(seed)
    rng_s = server_rng_for_seed(seed)

    server_box: dict[str, Any] = {}

    def server_main() -> None:
        ep = None
        try:
            ep = tcp_accept_one(listener, timeout)
            server_box["result"] = server_fn(ep, rng_s)
        except BaseException as exc:  # noqa: BLE001 - re-raised on the main thread
            server_box["error"] = exc
        finally:
            if ep is not None:
                ep.close()

    thread = threading.Thread(target=server_main, name="sfslab-tcp-server", daemon=True)
    thread.start()
    client_ep = tcp_connect(host, port, timeout)
    try:
        client_result = client_fn(client_ep, rng_c)
    except BaseException:
        client_ep.close()
        thread.join(timeout=timeout)
        server_exc = server_box.get("error")
        if server_exc is not None and not isinstance(server_exc, ChannelError):
            raise server_exc from None
        raise
    client_ep.close()
    thread.join(timeout=timeout)
    if "error" in server_box:
        raise server_box["error"]
    return SessionResult(client_result, server_box.get("result"), client_ep.transcript)


# ---------------------------------------------------------------------------
# Configuration files
# ---------------------------------------------------------------------------


def parse_config(text: str) -> dict[str, str]:
    """Parse a flat ``key = value`` configuration with ``#`` comments."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"config line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"config line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path: str) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())
