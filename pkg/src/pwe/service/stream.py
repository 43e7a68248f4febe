"""Newline-delimited JSON transports: a TCP server and a stdin/stdout pipe."""

from __future__ import annotations

import asyncio
import sys

from .core import PdpService

MAX_LINE = 1 << 20


async def _client(service: PdpService, reader: asyncio.StreamReader, writer: asyncio.StreamWriter) -> None:
    try:
        while True:
            line = await reader.readline()
            if not line:
                break
            if not line.strip():
                continue
            # requests on one connection are answered strictly in order
            out = await asyncio.to_thread(service.handle_line, line)
            writer.write(out.encode() + b"\n")
            await writer.drain()
    except (ConnectionResetError, asyncio.IncompleteReadError):
        pass
    finally:
        writer.close()
        try:
            await writer.wait_closed()
        except ConnectionResetError:
            pass


async def start_stream_server(service: PdpService, host: str = "127.0.0.1", port: int = 0) -> asyncio.Server:
    return await asyncio.start_server(lambda r, w: _client(service, r, w), host, port, limit=MAX_LINE,
                                      backlog=512)


async def serve_stream(service: PdpService, host: str, port: int, ready=None) -> None:
    server = await start_stream_server(service, host, port)
    if ready is not None:
        ready(server.sockets[0].getsockname())
    async with server:
        await server.serve_forever()


def serve_pipe(service: PdpService, stdin=None, stdout=None) -> int:
    """Answer each line of ``stdin`` on ``stdout`` until EOF; returns the number of records handled."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    n = 0
    for line in stdin:
        if not line.strip():
            continue
        stdout.write(service.handle_line(line) + "\n")
        stdout.flush()
        n += 1
    return n


async def request_stream(host: str, port: int, lines) -> list[str]:
    """Send request records over one connection and collect the replies in order."""
    reader, writer = await asyncio.open_connection(host, port, limit=MAX_LINE)
    out = []
    try:
        for line in lines:
            writer.write(line.encode() + b"\n")
            await writer.drain()
            out.append((await reader.readline()).decode().rstrip("\n"))
    finally:
        writer.close()
        await writer.wait_closed()
    return out
