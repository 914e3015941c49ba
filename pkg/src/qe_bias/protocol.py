"""Line-delimited wire protocol clients for out-of-process endpoints.

Scorer protocol, over the child's standard streams or a local TCP socket:

    handshake line (scorer -> harness):
        {"name": str, "scale_min": num, "scale_max": num, "higher_is_better": bool}
    request line (harness -> scorer):
        {"id": str, "source": str, "hypothesis": str[, "reference": str]}
    response line (scorer -> harness):
        {"id": str, "score": num}  or  {"id": str, "error": str}

Responses may arrive in any order; matching is by id. The client runs one
process (or connection) per batch: it writes every request, closes the
write side, and reads until all ids are matched. Endpoints that stream a
response per request and endpoints that buffer until end-of-input both
satisfy this contract.

Translator protocol is the same shape without a handshake:
    {"id": str, "text": str, "target_lang": str} -> {"id": str, "translation": str}
"""

from __future__ import annotations

import contextlib
import json
import queue
import shlex
import socket
import subprocess
import threading
import time

from .errors import EndpointError, ProtocolError, ScoreTimeoutError
from .scoring import ScaleDescriptor

_EOF = object()


def _reader(stream, out_queue):
    try:
        for line in stream:
            out_queue.put(line)
    except ValueError:
        pass  # stream closed under the reader
    finally:
        out_queue.put(_EOF)


def _shutdown(proc) -> None:
    proc.kill()
    proc.wait()
    for stream in (proc.stdin, proc.stdout):
        if stream is not None:
            with contextlib.suppress(OSError, ValueError):
                stream.close()


def _parse_handshake(line: str) -> tuple[str, ScaleDescriptor]:
    try:
        obj = json.loads(line)
        name = obj["name"]
        scale = ScaleDescriptor(
            float(obj["scale_min"]), float(obj["scale_max"]), bool(obj["higher_is_better"])
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"bad handshake line: {line!r}") from exc
    return name, scale


class _LineExchange:
    """Shared request/response plumbing for one batch over line streams."""

    def __init__(self, timeout_secs: float):
        self.timeout_secs = timeout_secs

    def exchange(self, write_stream, read_queue, lines: list[str], expected_ids, close_write):
        """Write all lines, then collect one response per expected id."""
        deadline = time.monotonic() + self.timeout_secs
        writer_error: list[Exception] = []

        def write_all():
            try:
                for line in lines:
                    write_stream.write(line)
                write_stream.flush()
                close_write()
            except (BrokenPipeError, OSError) as exc:
                writer_error.append(exc)

        writer = threading.Thread(target=write_all, daemon=True)
        writer.start()

        pending = set(expected_ids)
        responses: dict[str, dict] = {}
        while pending:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ScoreTimeoutError(pending)
            try:
                item = read_queue.get(timeout=remaining)
            except queue.Empty:
                raise ScoreTimeoutError(pending) from None
            if item is _EOF:
                raise ScoreTimeoutError(pending, message="endpoint closed with no response for ids: " + ", ".join(sorted(pending)))
            line = item.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                rid = obj["id"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ProtocolError(f"bad response line: {line!r}") from exc
            if rid not in expected_ids:
                raise ProtocolError(f"response for unknown id {rid!r}")
            if rid in responses:
                raise ProtocolError(f"duplicate response for id {rid!r}")
            responses[rid] = obj
            pending.discard(rid)
        writer.join(timeout=max(0.0, deadline - time.monotonic()))
        if writer_error:
            raise EndpointError(f"endpoint closed its input early: {writer_error[0]}")
        return responses


def _score_from_response(rid: str, obj: dict) -> float:
    if "error" in obj:
        raise EndpointError(f"scorer error for id {rid!r}: {obj['error']}")
    score = obj.get("score")
    if not isinstance(score, (int, float)) or isinstance(score, bool):
        raise ProtocolError(f"non-numeric score payload for id {rid!r}: {score!r}")
    return float(score)


class SubprocessScorer:
    """Scorer endpoint run as a child process, one process per batch."""

    def __init__(self, command, timeout_secs: float = 30.0, retries: int = 0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout_secs = timeout_secs
        self.retries = retries
        self._name: str | None = None
        self._scale: ScaleDescriptor | None = None

    def _spawn(self):
        try:
            return subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                encoding="utf-8",
            )
        except OSError as exc:
            raise EndpointError(f"cannot start scorer {self.command!r}: {exc}") from exc

    def _read_handshake(self, q) -> None:
        try:
            item = q.get(timeout=self.timeout_secs)
        except queue.Empty:
            raise ScoreTimeoutError([], message="no handshake from scorer") from None
        if item is _EOF:
            raise EndpointError("scorer exited before handshake")
        self._name, self._scale = _parse_handshake(item)

    def probe(self) -> None:
        """Run the handshake only, to learn the scorer's name and scale."""
        proc = self._spawn()
        try:
            q: queue.Queue = queue.Queue()
            threading.Thread(target=_reader, args=(proc.stdout, q), daemon=True).start()
            proc.stdin.close()
            self._read_handshake(q)
        finally:
            _shutdown(proc)

    @property
    def name(self) -> str:
        if self._name is None:
            self.probe()
        return self._name

    @property
    def declared_scale(self) -> ScaleDescriptor:
        if self._scale is None:
            self.probe()
        return self._scale

    def _score_once(self, requests):
        proc = self._spawn()
        try:
            q: queue.Queue = queue.Queue()
            threading.Thread(target=_reader, args=(proc.stdout, q), daemon=True).start()
            self._read_handshake(q)
            lines = [
                json.dumps(
                    {"id": r.id, "source": r.source_text, "hypothesis": r.hypothesis_text}
                    | ({"reference": r.reference_text} if r.reference_text is not None else {}),
                    ensure_ascii=False,
                )
                + "\n"
                for r in requests
            ]
            exchange = _LineExchange(self.timeout_secs)
            responses = exchange.exchange(
                proc.stdin, q, lines, {r.id for r in requests}, proc.stdin.close
            )
            return [(r.id, _score_from_response(r.id, responses[r.id])) for r in requests]
        finally:
            _shutdown(proc)

    def score_many(self, requests):
        attempts = 1 + max(0, self.retries)
        last: Exception | None = None
        for _ in range(attempts):
            try:
                return self._score_once(requests)
            except (ScoreTimeoutError, EndpointError) as exc:
                last = exc
        raise last


class TcpScorer:
    """Scorer endpoint behind a local TCP socket, one connection per batch."""

    def __init__(self, host: str, port: int, timeout_secs: float = 30.0, retries: int = 0):
        self.host = host
        self.port = port
        self.timeout_secs = timeout_secs
        self.retries = retries
        self._name: str | None = None
        self._scale: ScaleDescriptor | None = None

    def _connect(self):
        try:
            sock = socket.create_connection((self.host, self.port), timeout=self.timeout_secs)
        except OSError as exc:
            raise EndpointError(f"cannot connect to {self.host}:{self.port}: {exc}") from exc
        return sock

    def _score_once(self, requests):
        sock = self._connect()
        rfile = wfile = None
        try:
            rfile = sock.makefile("r", encoding="utf-8")
            wfile = sock.makefile("w", encoding="utf-8")
            q: queue.Queue = queue.Queue()
            threading.Thread(target=_reader, args=(rfile, q), daemon=True).start()
            try:
                item = q.get(timeout=self.timeout_secs)
            except queue.Empty:
                raise ScoreTimeoutError([], message="no handshake from scorer") from None
            if item is _EOF:
                raise EndpointError("scorer closed before handshake")
            self._name, self._scale = _parse_handshake(item)
            lines = [
                json.dumps(
                    {"id": r.id, "source": r.source_text, "hypothesis": r.hypothesis_text},
                    ensure_ascii=False,
                )
                + "\n"
                for r in requests
            ]

            def close_write():
                wfile.flush()
                sock.shutdown(socket.SHUT_WR)

            exchange = _LineExchange(self.timeout_secs)
            responses = exchange.exchange(wfile, q, lines, {r.id for r in requests}, close_write)
            return [(r.id, _score_from_response(r.id, responses[r.id])) for r in requests]
        finally:
            for stream in (rfile, wfile):
                if stream is not None:
                    with contextlib.suppress(OSError, ValueError):
                        stream.close()
            sock.close()

    @property
    def name(self) -> str:
        if self._name is None:
            self._handshake_probe()
        return self._name

    @property
    def declared_scale(self) -> ScaleDescriptor:
        if self._scale is None:
            self._handshake_probe()
        return self._scale

    def _handshake_probe(self):
        sock = self._connect()
        rfile = None
        try:
            rfile = sock.makefile("r", encoding="utf-8")
            sock.shutdown(socket.SHUT_WR)
            line = rfile.readline()
            if not line:
                raise EndpointError("scorer closed before handshake")
            self._name, self._scale = _parse_handshake(line)
        finally:
            if rfile is not None:
                with contextlib.suppress(OSError, ValueError):
                    rfile.close()
            sock.close()

    def score_many(self, requests):
        attempts = 1 + max(0, self.retries)
        last: Exception | None = None
        for _ in range(attempts):
            try:
                return self._score_once(requests)
            except (ScoreTimeoutError, EndpointError) as exc:
                last = exc
        raise last


class SubprocessTranslator:
    """Translator endpoint run as a child process, one process per batch."""

    name = "subprocess-translator"

    def __init__(self, command, timeout_secs: float = 30.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout_secs = timeout_secs
        self.name = "cmd:" + " ".join(self.command)

    def translate_many(self, texts, target_language):
        try:
            proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                text=True,
                encoding="utf-8",
            )
        except OSError as exc:
            raise EndpointError(f"cannot start translator {self.command!r}: {exc}") from exc
        ids = [f"t{i}" for i in range(len(texts))]
        try:
            q: queue.Queue = queue.Queue()
            threading.Thread(target=_reader, args=(proc.stdout, q), daemon=True).start()
            lines = [
                json.dumps(
                    {"id": rid, "text": text, "target_lang": target_language},
                    ensure_ascii=False,
                )
                + "\n"
                for rid, text in zip(ids, texts)
            ]
            exchange = _LineExchange(self.timeout_secs)
            responses = exchange.exchange(proc.stdin, q, lines, set(ids), proc.stdin.close)
        finally:
            _shutdown(proc)
        out = []
        for pos, rid in enumerate(ids):
            obj = responses[rid]
            if "error" in obj:
                raise EndpointError(f"translator error at position {pos}: {obj['error']}")
            translation = obj.get("translation")
            if not isinstance(translation, str) or not translation:
                raise EndpointError(f"missing or empty translation at position {pos}")
            out.append(translation)
        return out
