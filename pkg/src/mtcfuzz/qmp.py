"""QMP (QEMU Machine Protocol) client: trace control and snapshot jobs.

QMP is a line-delimited JSON command channel.  The server greets first;
the client must answer with qmp_capabilities before anything else.  On
top of that this module provides the two fuzzing-trace commands and the
snapshot save/load sequences (stop VM, run the snapshot job against the
dedicated snapshot drive, resume VM, disconnect).

Serialization is canonical - fixed key order (execute before arguments),
single space after colons, LF terminator - so recorded wire transcripts
are byte-stable.
"""

from __future__ import annotations

import json
import socket
import time
from dataclasses import dataclass
from typing import Callable

SNAPSHOT_TAG = "mtcfuzz-snapshot"
DEFAULT_DRIVE_ID = "snapshot0"

JOB_POLL_INTERVAL = 0.010
JOB_TIMEOUT = 30.0


class QmpError(RuntimeError):
    pass


class QmpProtocolError(QmpError):
    """The peer broke the protocol (bad greeting, unparseable line, EOF)."""


class QmpCommandError(QmpError):
    """The server answered a command with an error object."""


def serialize_command(execute: str, arguments: dict | None = None) -> bytes:
    """Canonical single-line encoding of one command, LF terminated."""
    command: dict = {"execute": execute}
    if arguments is not None:
        command["arguments"] = arguments
    return json.dumps(command).encode("utf-8") + b"\n"


def build_trace_start(filename: str) -> bytes:
    """Command that starts coverage tracing into the named file."""
    if not filename:
        raise ValueError("filename must be nonempty")
    return serialize_command("mtcfuzz-trace-start", {"filename": filename})


def build_trace_stop() -> bytes:
    """Command that stops coverage tracing."""
    return serialize_command("mtcfuzz-trace-stop")


class QmpSession:
    """One negotiated QMP connection over a stream socket."""

    def __init__(self, sock: socket.socket, timeout: float = JOB_TIMEOUT):
        self._sock = sock
        self._sock.settimeout(timeout)
        self._buffer = b""
        self.negotiated = False

    @classmethod
    def connect_unix(cls, path: str, timeout: float = JOB_TIMEOUT) -> "QmpSession":
        sock = socket.socket(socket.AF_UNIX, socket.SOCK_STREAM)
        sock.connect(path)
        return cls(sock, timeout)

    def negotiate(self) -> None:
        """Await the server greeting and unlock the command channel."""
        greeting = self._read_message()
        if "QMP" not in greeting:
            raise QmpProtocolError(f"expected QMP greeting, got {greeting!r}")
        self.negotiated = True
        self.command("qmp_capabilities")

    def command(self, execute: str, arguments: dict | None = None) -> object:
        """Send one command and return its 'return' payload."""
        if not self.negotiated:
            raise QmpProtocolError("command sent before capability negotiation")
        self._sock.sendall(serialize_command(execute, arguments))
        while True:
            message = self._read_message()
            if "return" in message:
                return message["return"]
            if "error" in message:
                error = message["error"]
                desc = error.get("desc", str(error)) if isinstance(error, dict) else str(error)
                raise QmpCommandError(desc)
            # asynchronous events are not interesting here
            if "event" in message:
                continue
            raise QmpProtocolError(f"unexpected message: {message!r}")

    def close(self) -> None:
        try:
            self._sock.close()
        except OSError:
            pass

    def _read_message(self) -> dict:
        while b"\n" not in self._buffer:
            chunk = self._sock.recv(4096)
            if not chunk:
                raise QmpProtocolError("connection closed by peer")
            self._buffer += chunk
        line, self._buffer = self._buffer.split(b"\n", 1)
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            raise QmpProtocolError(f"unparseable message {line!r}: {exc}") from None
        if not isinstance(message, dict):
            raise QmpProtocolError(f"expected JSON object, got {message!r}")
        return message


@dataclass
class SnapshotResult:
    ok: bool
    error: str | None = None


class QmpSnapshotController:
    """Drives snapshot save/load sequences; caches the block node name.

    Each operation opens a fresh session via the supplied factory,
    mirroring the one-connection-per-operation shape of the protocol
    flow.  The node name of the snapshot drive is resolved with
    query-block only when not already known.
    """

    def __init__(
        self,
        session_factory: Callable[[], QmpSession],
        *,
        drive_id: str = DEFAULT_DRIVE_ID,
        rootfs_device: str | None = None,
        poll_interval: float = JOB_POLL_INTERVAL,
        job_timeout: float = JOB_TIMEOUT,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self._session_factory = session_factory
        self._drive_id = drive_id
        self._rootfs_device = rootfs_device
        self._poll_interval = poll_interval
        self._job_timeout = job_timeout
        self._sleep = sleep
        self._job_counter = 0
        self.node_name: str | None = None

    def generate_job_id(self, prefix: str) -> str:
        self._job_counter += 1
        return f"{prefix}-{self._job_counter}"

    def _find_block_device(self, session: QmpSession) -> str | None:
        blocks = session.command("query-block")
        if not isinstance(blocks, list):
            return None
        for block in blocks:
            if isinstance(block, dict) and block.get("device") == self._drive_id:
                inserted = block.get("inserted") or {}
                node = inserted.get("node-name")
                if node:
                    return str(node)
        return None

    def _await_job(self, session: QmpSession, job_id: str) -> str | None:
        """Poll query-jobs until the job concludes; returns its error, if any."""
        deadline = time.monotonic() + self._job_timeout
        while True:
            jobs = session.command("query-jobs")
            job = None
            if isinstance(jobs, list):
                for entry in jobs:
                    if isinstance(entry, dict) and entry.get("id") == job_id:
                        job = entry
                        break
            if job is not None and job.get("status") == "concluded":
                return job.get("error")
            if time.monotonic() >= deadline:
                return f"timeout waiting for job {job_id}"
            self._sleep(self._poll_interval)

    def _snapshot_op(self, command: str, prefix: str, devices_extra: list[str]) -> SnapshotResult:
        try:
            session = self._session_factory()
        except OSError as exc:
            return SnapshotResult(ok=False, error=f"connect failed: {exc}")
        try:
            session.negotiate()
            if self.node_name is None:
                self.node_name = self._find_block_device(session)
            if self.node_name is None:
                return SnapshotResult(
                    ok=False, error=f"no block device with id {self._drive_id!r}"
                )
            session.command("stop")
            devices = [self.node_name] + devices_extra
            job_id = self.generate_job_id(prefix)
            job_error: str | None
            try:
                session.command(
                    command,
                    {
                        "job-id": job_id,
                        "tag": SNAPSHOT_TAG,
                        "vmstate": self.node_name,
                        "devices": devices,
                    },
                )
            except QmpCommandError as exc:
                job_error = str(exc)
            else:
                job_error = self._await_job(session, job_id)
            session.command("cont")
            if job_error:
                return SnapshotResult(ok=False, error=job_error)
            return SnapshotResult(ok=True)
        except QmpError as exc:
            return SnapshotResult(ok=False, error=str(exc))
        finally:
            session.close()

    def snapshot_save(self) -> SnapshotResult:
        """Stop the VM, save its state to the snapshot drive, resume it."""
        extra = [self._rootfs_device] if self._rootfs_device else []
        return self._snapshot_op("snapshot-save", "save", extra)

    def snapshot_load(self) -> SnapshotResult:
        """Stop the VM, restore the saved snapshot state, resume it."""
        return self._snapshot_op("snapshot-load", "load", [])
