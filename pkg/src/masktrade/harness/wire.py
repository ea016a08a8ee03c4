"""JSON-lines wire protocol for out-of-process agents.

One JSON object per line over a byte stream (subprocess pipes or a TCP
socket). Message types are documented in docs/WIRE_PROTOCOL.md:

  harness -> agent: user_message | tool_result | submission_demand | violation
  agent -> harness: tool_call | submit

The harness side lives in :func:`masktrade.harness.episode._drive_wire_step`;
this module provides the transport endpoints plus the client-side loop that
lets the built-in scripted agents run as external processes.
"""
from __future__ import annotations

import json
import logging
import queue
import socket
import subprocess
import sys
import threading

logger = logging.getLogger(__name__)


class WireProtocolError(RuntimeError):
    pass


def encode_line(msg: dict) -> str:
    return json.dumps(msg, ensure_ascii=False) + "\n"


def decode_line(line: str):
    """Parse one wire line; returns None for unparseable input."""
    try:
        return json.loads(line)
    except json.JSONDecodeError:
        return None


class WireEndpoint:
    """Harness-side connection to one external agent process or socket."""

    def start(self) -> None:
        raise NotImplementedError

    def send(self, msg: dict) -> None:
        raise NotImplementedError

    def recv(self, timeout: float):
        raise NotImplementedError

    def finish(self) -> None:
        raise NotImplementedError


class _ReaderThread:
    def __init__(self, stream):
        self._stream = stream
        self._queue: queue.Queue = queue.Queue()
        self._thread = threading.Thread(target=self._pump, daemon=True)
        self._thread.start()

    def _pump(self) -> None:
        try:
            for line in self._stream:
                self._queue.put(line)
        except Exception as e:  # noqa: BLE001 - stream teardown races are expected
            logger.debug("reader thread stopped: %r", e)
        self._queue.put(None)

    def get(self, timeout: float):
        try:
            line = self._queue.get(timeout=timeout)
        except queue.Empty:
            raise TimeoutError("no message from agent within the timeout") from None
        if line is None:
            raise EOFError("agent stream closed")
        return line


class SubprocessEndpoint(WireEndpoint):
    """Spawn the agent as a child process and talk over its stdio."""

    def __init__(self, argv: list[str], name: str | None = None):
        self.argv = list(argv)
        self.name = name or "subprocess-agent"
        self._proc: subprocess.Popen | None = None
        self._reader: _ReaderThread | None = None

    def start(self) -> None:
        self._proc = subprocess.Popen(
            self.argv,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL,
            text=True,
            encoding="utf-8",
            bufsize=1,
        )
        self._reader = _ReaderThread(self._proc.stdout)

    def send(self, msg: dict) -> None:
        if self._proc is None or self._proc.stdin is None:
            raise WireProtocolError("endpoint not started")
        try:
            self._proc.stdin.write(encode_line(msg))
            self._proc.stdin.flush()
        except (BrokenPipeError, ValueError) as e:
            raise WireProtocolError(f"agent pipe closed: {e}") from None

    def recv(self, timeout: float):
        if self._reader is None:
            raise WireProtocolError("endpoint not started")
        line = self._reader.get(timeout)
        return decode_line(line)

    def finish(self) -> None:
        if self._proc is None:
            return
        try:
            if self._proc.stdin:
                self._proc.stdin.close()
        except (BrokenPipeError, OSError):
            pass
        try:
            self._proc.wait(timeout=10)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()


class TcpEndpoint(WireEndpoint):
    """Connect to an agent listening on host:port."""

    def __init__(self, host: str, port: int, name: str | None = None):
        self.host = host
        self.port = port
        self.name = name or f"tcp-agent:{host}:{port}"
        self._sock: socket.socket | None = None
        self._reader: _ReaderThread | None = None
        self._wfile = None

    def start(self) -> None:
        self._sock = socket.create_connection((self.host, self.port), timeout=30)
        rfile = self._sock.makefile("r", encoding="utf-8", newline="\n")
        self._wfile = self._sock.makefile("w", encoding="utf-8", newline="\n")
        self._reader = _ReaderThread(rfile)

    def send(self, msg: dict) -> None:
        if self._wfile is None:
            raise WireProtocolError("endpoint not started")
        self._wfile.write(encode_line(msg))
        self._wfile.flush()

    def recv(self, timeout: float):
        if self._reader is None:
            raise WireProtocolError("endpoint not started")
        return decode_line(self._reader.get(timeout))

    def finish(self) -> None:
        if self._sock is not None:
            try:
                self._sock.close()
            except OSError:
                pass


class _ClientView:
    """StepView equivalent on the agent side of the wire.

    call_tool is synchronous: the harness answers each tool_call with its
    tool_result before anything else, so a blocking read is safe.
    """

    def __init__(self, client: "AgentClient", step_index: int, data: dict, user_text: str):
        self._client = client
        self.step_index = step_index
        self.data = data
        self.user_text = user_text
        self.mode = data.get("mode", "open_research")
        self.privileged_ctx = None
        self._call_counter = 0

    def call_tool(self, name: str, args: dict) -> dict:
        self._call_counter += 1
        call_id = f"s{self.step_index}c{self._call_counter}"
        self._client.write({"type": "tool_call", "call_id": call_id, "name": name, "args": args})
        msg = self._client.read_expected({"tool_result"})
        return msg.get("payload") or {}

    def submit(self, raw: str) -> dict | None:
        self._client.submitted_this_step = True
        self._client.write({"type": "submit", "action": json.loads(raw)})
        return None  # acceptance is implicit; a violation arrives as the next inbound message


class AgentClient:
    """Client-side message loop wrapping a scripted agent.

    Used by the `masktrade serve-agent-stdio` subcommand: the harness spawns
    this process, and the same in-process agent classes then run strategy
    logic on this side of the pipe. On a violation the client repairs by
    submitting an empty order list, which is always schema-valid.
    """

    def __init__(self, agent, rfile=None, wfile=None):
        self.agent = agent
        self._rfile = rfile if rfile is not None else sys.stdin
        self._wfile = wfile if wfile is not None else sys.stdout
        self.submitted_this_step = False

    def write(self, msg: dict) -> None:
        self._wfile.write(encode_line(msg))
        self._wfile.flush()

    def read_expected(self, types: set):
        while True:
            line = self._rfile.readline()
            if not line:
                raise EOFError("harness closed the stream")
            msg = decode_line(line)
            if isinstance(msg, dict) and msg.get("type") in types:
                return msg
            # anything else mid-call is a protocol surprise; skip defensively
            logger.debug("skipping unexpected message while waiting for %s: %r", types, msg)

    def repair_submission(self) -> None:
        self.submitted_this_step = True
        self.write({"type": "submit", "action": {
            "orders": [],
            "overall_reason": "repair after validation feedback: holding this step",
        }})

    def serve_forever(self) -> None:
        while True:
            line = self._rfile.readline()
            if not line:
                return
            msg = decode_line(line)
            if not isinstance(msg, dict):
                continue
            mtype = msg.get("type")
            if mtype == "user_message":
                self.submitted_this_step = False
                content = msg.get("content") or {}
                view = _ClientView(self, msg.get("step", 0), content.get("data") or {},
                                   content.get("text", ""))
                try:
                    self.agent.run_step(view)
                except Exception as e:  # noqa: BLE001 - keep serving; harness will fall back
                    logger.warning("strategy error on step %s: %r", msg.get("step"), e)
            elif mtype == "violation":
                self.repair_submission()
            elif mtype == "submission_demand":
                if not self.submitted_this_step:
                    self.repair_submission()
            else:
                continue
