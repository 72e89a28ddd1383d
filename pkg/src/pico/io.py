"""Sources and sinks: text files, replay files and TCP sockets.

Record formats
    text file   one item per line; ``str`` collections take each line verbatim,
                other types expect one value literal per line
    replay      ``<timestamp>\\t<value literal>`` per line
    socket      like a text file, with an optional ``<timestamp>\\t`` prefix
"""

from __future__ import annotations

import hashlib
import re
import socket
import socketserver
import sys
import threading
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .values import STR, DataType, MalformedValue, conforms, format_value, parse_value, type_of


class SourceError(Exception):
    pass


def decode_item(text: str, dtype: DataType, where: str):
    """One line of input as a value of ``dtype``."""
    if dtype == STR:
        return text
    return parse_value_strict(text, dtype, where)


def _lines(path: Path) -> Iterator[tuple]:
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, line in enumerate(fh, 1):
            yield lineno, line.rstrip("\r\n")


def iter_text(path, dtype: DataType) -> Iterator[tuple]:
    """``(ordinal, value)`` pairs for each line; blank lines are skipped for non-str types."""
    path = Path(path)
    n = 0
    for lineno, line in _lines(path):
        if dtype != STR and not line.strip():
            continue
        yield n, decode_item(line, dtype, "%s:%d" % (path, lineno))
        n += 1


_REPLAY = re.compile(r"(\d+)\t(.*)\Z", re.S)


def iter_replay(path, dtype: DataType) -> Iterator[tuple]:
    path = Path(path)
    for lineno, line in _lines(path):
        if not line.strip():
            continue
        m = _REPLAY.match(line)
        where = "%s:%d" % (path, lineno)
        if m is None:
            raise SourceError("%s: expected '<timestamp>TAB<value>'" % where)
        v = parse_value_strict(m.group(2), dtype, where)
        yield int(m.group(1)), v


def parse_value_strict(text: str, dtype: DataType, where: str):
    try:
        v = parse_value(text)
    except MalformedValue as e:
        raise SourceError("%s: %s" % (where, e)) from None
    if not conforms(type_of(v), dtype):
        raise SourceError("%s: value %s has type %s, declared %s" % (where, text, type_of(v), dtype))
    return v


def split_address(addr: str) -> tuple:
    host, sep, port = addr.rpartition(":")
    if not sep or not port.isdigit():
        raise SourceError("bad socket address %r (expected HOST:PORT)" % addr)
    return host or "127.0.0.1", int(port)


def iter_socket(addr: str, dtype: DataType, timeout: float = 30.0) -> Iterator[tuple]:
    """Read line-delimited records until the peer closes the connection."""
    host, port = split_address(addr)
    with socket.create_connection((host, port), timeout=timeout) as sock:
        fh = sock.makefile("r", encoding="utf-8", newline="\n")
        n = 0
        for raw in fh:
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            where = "%s record %d" % (addr, n + 1)
            m = _REPLAY.match(line)
            if m is not None:
                t, body = int(m.group(1)), m.group(2)
            else:
                t, body = n, line
            yield t, decode_item(body, dtype, where)
            n += 1


# -- sinks -----------------------------------------------------------------------------------


class Sink:
    """Writes records and keeps a digest of the exact bytes written."""

    def __init__(self, sort: bool = False, timestamps: bool = False):
        self.sort = sort
        self.timestamps = timestamps
        self.count = 0
        self._hash = hashlib.sha256()
        self._buffer: list = []

    def _format(self, t: int, v) -> str:
        lit = format_value(v)
        return "%d\t%s" % (t, lit) if self.timestamps else lit

    def write(self, t: int, v) -> None:
        self.count += 1
        line = self._format(t, v)
        if self.sort:
            self._buffer.append(line)
        else:
            self._emit(line)

    def _emit(self, line: str) -> None:
        data = (line + "\n").encode("utf-8")
        self._hash.update(data)
        self._put(data)

    def close(self) -> str:
        if self.sort:
            for line in sorted(self._buffer):
                self._emit(line)
            self._buffer = []
        self._finish()
        return self._hash.hexdigest()

    def _put(self, data: bytes) -> None:
        raise NotImplementedError

    def _finish(self) -> None:
        pass


class FileSink(Sink):
    def __init__(self, path, **kw):
        super().__init__(**kw)
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "wb")

    def _put(self, data):
        self._fh.write(data)

    def _finish(self):
        self._fh.close()


class StreamSink(Sink):
    def __init__(self, stream=None, **kw):
        super().__init__(**kw)
        self.stream = stream

    def _put(self, data):
        out = self.stream or sys.stdout
        out.write(data.decode("utf-8"))

    def _finish(self):
        (self.stream or sys.stdout).flush()


class SocketSink(Sink):
    def __init__(self, addr: str, timeout: float = 30.0, **kw):
        super().__init__(**kw)
        self._sock = socket.create_connection(split_address(addr), timeout=timeout)

    def _put(self, data):
        self._sock.sendall(data)

    def _finish(self):
        try:
            self._sock.shutdown(socket.SHUT_WR)
        except OSError:
            pass
        self._sock.close()


# -- test and demo servers --------------------------------------------------------------------------


class _OneShotServer(socketserver.TCPServer):
    allow_reuse_address = True


class LineServer:
    """A local TCP server for one client.

    With ``lines`` it sends them and closes (a replayable socket source); with
    no lines it records everything the client sends (a socket sink target).
    """

    def __init__(self, lines: Optional[Iterable[str]] = None, host: str = "127.0.0.1", port: int = 0):
        self.lines = list(lines) if lines is not None else None
        self.received: list[str] = []
        outer = self

        class Handler(socketserver.StreamRequestHandler):
            def handle(self):
                if outer.lines is not None:
                    for line in outer.lines:
                        self.wfile.write((line + "\n").encode("utf-8"))
                else:
                    for raw in self.rfile:
                        outer.received.append(raw.decode("utf-8").rstrip("\r\n"))

        self._server = _OneShotServer((host, port), Handler)
        self.address = "%s:%d" % self._server.server_address[:2]
        self._thread = threading.Thread(target=self._server.handle_request, daemon=True)

    def __enter__(self):
        self._thread.start()
        return self

    def __exit__(self, *exc):
        self._thread.join(timeout=10)
        self._server.server_close()

    def wait(self, timeout: float = 10) -> None:
        self._thread.join(timeout=timeout)
