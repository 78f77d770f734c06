"""Live session runtime: stream workers, a single-writer core, broadcasters.

Layout per the session module's concurrency contract: all mutation funnels
through one queue consumed by one task (SessionCore), every reader gets an
immutable snapshot. One worker per seat turns its sample source into rate
estimates; a ticker renders each active viewer at the broadcast cadence and
fans the encoded frame out to that viewer's connections.

Two transports speak the same newline-delimited JSON: WebSocket (what the
dashboard uses; also serves its static files) and raw TCP (handy for tests
and scripting, no handshake beyond a hello line).
"""
from __future__ import annotations

import asyncio
import json
import logging
import mimetypes
import signal
import time
import urllib.parse
from dataclasses import dataclass
from pathlib import Path

from websockets.asyncio.server import serve as ws_serve
from websockets.datastructures import Headers
from websockets.exceptions import ConnectionClosed
from websockets.http11 import Response

from .errors import ConfigError, PipelineError
from .estimator import EstimatorConfig, StreamingEstimator
from .session import (
    N_SEATS,
    Condition,
    SessionState,
    apply_operator_command,
    condition_from_str,
    encode_message,
    ingest_estimate,
    new_session,
    render_state,
    schedule_conditions,
)
from .synth import SynthSpec, noise_sigma_for_snr_db, synth_ppg
from .trace import Trace, read_trace_csv

log = logging.getLogger("pulseboard.server")

# outbound frames queued beyond this mark a client too slow to keep up;
# state frames are dropped for it (replies never are)
_SLOW_CLIENT_QUEUE = 100


@dataclass(frozen=True)
class SeatSource:
    kind: str  # "synthetic" | "replay"
    synth: SynthSpec | None = None
    path: str | None = None
    loop: bool = True
    fs: float | None = None  # replay only; None = the trace file's nominal rate


@dataclass(frozen=True)
class SeatConfig:
    seat: int
    name: str
    source: SeatSource


@dataclass(frozen=True)
class ServerConfig:
    seats: tuple[SeatConfig, ...]
    group_index: int = 0
    n_groups: int = 6
    listen: str = "127.0.0.1"
    tcp_port: int | None = None
    ws_port: int | None = None
    broadcast_hz: float = 20.0
    initial_condition: Condition = Condition.HR_NONE
    operator_token: str | None = None
    static_dir: str | None = None
    preroll_s: float = 20.0

    def __post_init__(self):
        if len(self.seats) != N_SEATS:
            raise ConfigError(
                f"exactly {N_SEATS} seats required, got {len(self.seats)}"
            )
        if sorted(s.seat for s in self.seats) != list(range(N_SEATS)):
            raise ConfigError("seat indices must be exactly 0, 1, 2")
        if self.tcp_port is None and self.ws_port is None:
            raise ConfigError("no transport: set tcp_port and/or ws_port")
        if not 0 <= self.group_index < self.n_groups:
            raise ConfigError(
                f"group_index {self.group_index} outside 0..{self.n_groups - 1}"
            )
        if self.broadcast_hz <= 0:
            raise ConfigError("broadcast_hz must be positive")
        if self.preroll_s < 0:
            raise ConfigError("preroll_s must be >= 0")


def _parse_source(obj, where: str) -> SeatSource:
    kind = obj.get("kind")
    if kind == "synthetic":
        if "snr_db" in obj and "noise_sigma" in obj:
            raise ConfigError(f"{where}: give snr_db or noise_sigma, not both")
        sigma = obj.get("noise_sigma", 0.0)
        if "snr_db" in obj:
            sigma = noise_sigma_for_snr_db(float(obj["snr_db"]))
        spec = SynthSpec(
            duration=float(obj.get("duration_s", 600.0)),
            fs=float(obj.get("fs", 30.0)),
            base_bpm=float(obj.get("base_bpm", 72.0)),
            modulation_bpm=float(obj.get("modulation_bpm", 0.0)),
            modulation_freq=float(obj.get("modulation_freq", 0.1)),
            noise_sigma=float(sigma),
            drift_amp=float(obj.get("drift_amp", 0.0)),
            drift_freq=float(obj.get("drift_freq", 0.05)),
            seed=int(obj.get("seed", 0)),
        )
        return SeatSource("synthetic", synth=spec, loop=bool(obj.get("loop", True)))
    if kind == "replay":
        path = obj.get("path")
        if not path:
            raise ConfigError(f"{where}: replay source needs a path")
        fs = obj.get("fs")
        return SeatSource("replay", path=str(path), loop=bool(obj.get("loop", True)),
                          fs=None if fs is None else float(fs))
    raise ConfigError(f"{where}: unknown source kind {kind!r}")


def load_server_config(path) -> ServerConfig:
    """Parse the session config JSON; see README for the schema."""
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    seats_raw = raw.get("seats")
    if not isinstance(seats_raw, list):
        raise ConfigError("config needs a seats array")
    seats = []
    for i, s in enumerate(seats_raw):
        where = f"seats[{i}]"
        if not isinstance(s, dict) or "source" not in s:
            raise ConfigError(f"{where}: need seat, name, source")
        seats.append(
            SeatConfig(
                seat=int(s.get("seat", i)),
                name=str(s.get("name", f"player {i}")),
                source=_parse_source(s["source"], where),
            )
        )
    cond = condition_from_str(str(raw.get("initial_condition", "hr_none")))
    tcp = raw.get("tcp_port")
    ws = raw.get("ws_port")
    return ServerConfig(
        seats=tuple(seats),
        group_index=int(raw.get("group_index", 0)),
        n_groups=int(raw.get("n_groups", 6)),
        listen=str(raw.get("listen", "127.0.0.1")),
        tcp_port=None if tcp is None else int(tcp),
        ws_port=None if ws is None else int(ws),
        broadcast_hz=float(raw.get("broadcast_hz", 20.0)),
        initial_condition=cond,
        operator_token=raw.get("operator_token"),
        static_dir=raw.get("static_dir"),
        preroll_s=float(raw.get("preroll_s", 20.0)),
    )


class SessionCore:
    """The single writer. Everything that changes state goes through apply()."""

    def __init__(self, state: SessionState):
        self._state = state
        self._queue: asyncio.Queue = asyncio.Queue()
        self._task: asyncio.Task | None = None

    @property
    def state(self) -> SessionState:
        return self._state

    def start(self):
        self._task = asyncio.get_running_loop().create_task(
            self._run(), name="session-core"
        )

    async def stop(self):
        if self._task is not None:
            self._task.cancel()
            try:
                await self._task
            except asyncio.CancelledError:
                pass

    async def _run(self):
        while True:
            fn, fut = await self._queue.get()
            try:
                self._state, result = fn(self._state)
            except PipelineError as e:
                if fut is not None and not fut.cancelled():
                    fut.set_exception(e)
                continue
            if fut is not None and not fut.cancelled():
                fut.set_result(result)

    def ingest(self, seat: int, t: float, bpm: float, conf: float):
        """Queue an estimator sample; errors are logged, not raised."""

        def apply(state: SessionState):
            return ingest_estimate(state, seat, t, bpm, conf), None

        fut = asyncio.get_running_loop().create_future()
        fut.add_done_callback(_log_ingest_failure)
        self._queue.put_nowait((apply, fut))

    async def command(self, cmd: dict) -> dict:
        """Apply an operator command; PipelineError comes back as the reply."""

        def apply(state: SessionState):
            return apply_operator_command(state, cmd)

        fut = asyncio.get_running_loop().create_future()
        self._queue.put_nowait((apply, fut))
        try:
            return await fut
        except PipelineError as e:
            return {"type": "error", "error": str(e)}


def _log_ingest_failure(fut: asyncio.Future):
    if not fut.cancelled() and fut.exception() is not None:
        log.warning("dropped estimate: %s", fut.exception())


class _Client:
    """One connection: a viewer key, an outbound queue, a writer pump."""

    def __init__(self, viewer):
        self.viewer = viewer  # 0..2 or "operator"
        self.queue: asyncio.Queue[bytes] = asyncio.Queue()

    def offer_state(self, frame: bytes):
        if self.queue.qsize() < _SLOW_CLIENT_QUEUE:
            self.queue.put_nowait(frame)

    def send_reply(self, frame: bytes):
        self.queue.put_nowait(frame)


def _trace_for_source(src: SeatSource) -> Trace:
    if src.kind == "synthetic":
        trace, _ = synth_ppg(src.synth)
        return trace
    return read_trace_csv(src.path)


class SessionServer:
    """Owns the core, the stream workers, the ticker, and both listeners."""

    def __init__(self, config: ServerConfig,
                 estimator_config: EstimatorConfig | None = None):
        self.config = config
        self._est_config = estimator_config
        schedule = schedule_conditions(config.n_groups)[config.group_index]
        names = [s.name for s in sorted(config.seats, key=lambda s: s.seat)]
        self.core = SessionCore(
            new_session(names, schedule, config.initial_condition)
        )
        self._clients: set[_Client] = set()
        self._tasks: list[asyncio.Task] = []
        self._tcp_server: asyncio.AbstractServer | None = None
        self._ws_server = None
        self.tcp_port: int | None = None
        self.ws_port: int | None = None

    # -- lifecycle ------------------------------------------------------------

    async def start(self):
        cfg = self.config
        # load every source up front so a bad path fails startup, not a worker
        traces = {
            s.seat: (_trace_for_source(s.source), s.source)
            for s in cfg.seats
        }
        self.core.start()
        if cfg.tcp_port is not None:
            try:
                self._tcp_server = await asyncio.start_server(
                    self._handle_tcp, cfg.listen, cfg.tcp_port
                )
            except OSError as e:
                raise ConfigError(f"cannot bind tcp {cfg.listen}:{cfg.tcp_port}: {e}")
            self.tcp_port = self._tcp_server.sockets[0].getsockname()[1]
        if cfg.ws_port is not None:
            try:
                self._ws_server = await ws_serve(
                    self._handle_ws, cfg.listen, cfg.ws_port,
                    process_request=self._process_request,
                )
            except OSError as e:
                await self._close_listeners()
                raise ConfigError(f"cannot bind ws {cfg.listen}:{cfg.ws_port}: {e}")
            self.ws_port = self._ws_server.sockets[0].getsockname()[1]
        loop = asyncio.get_running_loop()
        for seat, (trace, src) in sorted(traces.items()):
            self._tasks.append(loop.create_task(
                self._stream_worker(seat, trace, src), name=f"stream-{seat}"
            ))
        self._tasks.append(loop.create_task(self._ticker(), name="broadcast"))
        log.info(
            "serving: tcp=%s ws=%s seats=%s condition=%s",
            self.tcp_port, self.ws_port,
            [s.name for s in self.core.state.seats],
            self.core.state.condition.value,
        )

    async def stop(self):
        for t in self._tasks:
            t.cancel()
        for t in self._tasks:
            try:
                await t
            except (asyncio.CancelledError, Exception):
                pass
        self._tasks.clear()
        await self._close_listeners()
        await self.core.stop()
        snapshot = render_state(self.core.state, "operator", time.monotonic())
        log.info("final state: %s", encode_message(snapshot).decode().rstrip())

    async def _close_listeners(self):
        if self._tcp_server is not None:
            self._tcp_server.close()
            await self._tcp_server.wait_closed()
            self._tcp_server = None
        if self._ws_server is not None:
            self._ws_server.close()
            await self._ws_server.wait_closed()
            self._ws_server = None

    # -- streaming ------------------------------------------------------------

    async def _stream_worker(self, seat: int, trace: Trace, src: SeatSource):
        """Pace one source in wall time and feed its estimates to the core.

        The first preroll_s of samples are pushed as an immediate backlog so
        the seat shows a rate right after startup instead of idling through a
        full analysis window.
        """
        cfg = self._est_config or EstimatorConfig(fs=src.fs or trace.nominal_fs)
        est = StreamingEstimator(cfg)
        loop = asyncio.get_running_loop()
        start = loop.time()
        t0 = float(trace.t[0])
        # sample k of pass p is due at start + (t_k - t0) - preroll (+ pass span)
        pass_offset = 0.0
        span = float(trace.t[-1] - trace.t[0]) + 1.0 / cfg.fs
        lat_acc: list[float] = []
        next_log = start + 1.0
        while True:
            for k in range(len(trace.t)):
                rel = float(trace.t[k]) - t0 + pass_offset
                due = start + rel - self.config.preroll_s
                delay = due - loop.time()
                if delay > 0:
                    await asyncio.sleep(delay)
                elif k % 64 == 0:
                    await asyncio.sleep(0)  # stay responsive through the backlog
                t_push = time.perf_counter()
                estimates = est.push(rel, float(trace.v[k]))
                if estimates:
                    lat_acc.append(time.perf_counter() - t_push)
                for et, bpm, conf in estimates:
                    self.core.ingest(seat, start - self.config.preroll_s + et,
                                     bpm, conf)
                now = loop.time()
                if now >= next_log:
                    if lat_acc:
                        log.info(
                            "stream seat=%d windows=%d mean=%.1fms max=%.1fms",
                            seat, len(lat_acc),
                            1e3 * sum(lat_acc) / len(lat_acc),
                            1e3 * max(lat_acc),
                        )
                        lat_acc.clear()
                    next_log = now + 1.0
            if not src.loop:
                log.info("stream seat=%d: source exhausted", seat)
                return
            pass_offset += span

    # -- broadcast ------------------------------------------------------------

    async def _ticker(self):
        interval = 1.0 / self.config.broadcast_hz
        loop = asyncio.get_running_loop()
        while True:
            state = self.core.state
            now = loop.time()
            by_viewer: dict = {}
            for client in self._clients:
                frame = by_viewer.get(client.viewer)
                if frame is None:
                    frame = encode_message(render_state(state, client.viewer, now))
                    by_viewer[client.viewer] = frame
                client.offer_state(frame)
            await asyncio.sleep(interval)

    # -- shared connection plumbing --------------------------------------------

    def _check_operator_token(self, token) -> bool:
        want = self.config.operator_token
        return want is None or token == want

    async def _serve_client(self, client: _Client, send, recv):
        """Common read/write loop: `send` writes one frame, `recv` yields lines."""
        self._clients.add(client)
        try:
            writer = asyncio.get_running_loop().create_task(
                self._pump(client, send)
            )
            try:
                async for line in recv:
                    reply = await self._on_line(client, line)
                    client.send_reply(encode_message(reply))
            finally:
                writer.cancel()
                try:
                    await writer
                except asyncio.CancelledError:
                    pass
        finally:
            self._clients.discard(client)

    async def _pump(self, client: _Client, send):
        while True:
            frame = await client.queue.get()
            await send(frame)

    async def _on_line(self, client: _Client, line) -> dict:
        if isinstance(line, bytes):
            line = line.decode("utf-8", "replace")
        try:
            msg = json.loads(line)
            if not isinstance(msg, dict):
                raise ValueError("not an object")
        except ValueError as e:
            return {"type": "error", "error": f"bad message: {e}"}
        if msg.get("type") != "cmd":
            return {"type": "error", "error": f"unexpected type {msg.get('type')!r}"}
        if client.viewer != "operator":
            return {"type": "error", "error": "commands require the operator role"}
        return await self.core.command(msg)

    # -- raw TCP transport ----------------------------------------------------

    async def _handle_tcp(self, reader: asyncio.StreamReader,
                          writer: asyncio.StreamWriter):
        try:
            viewer = await self._tcp_hello(reader, writer)
            if viewer is None:
                return
            client = _Client(viewer)

            async def send(frame: bytes):
                writer.write(frame)
                await writer.drain()

            await self._serve_client(client, send, _tcp_lines(reader))
        except (ConnectionResetError, BrokenPipeError):
            pass
        finally:
            writer.close()
            try:
                await writer.wait_closed()
            except (ConnectionResetError, BrokenPipeError):
                pass

    async def _tcp_hello(self, reader, writer):
        """First line must be a hello naming the role; replies ack or error."""
        line = await reader.readline()
        if not line:
            return None
        try:
            msg = json.loads(line)
            role = msg.get("role")
        except (ValueError, AttributeError):
            msg, role = {}, None
        viewer = None
        if msg.get("type") == "hello" and role == "operator":
            if self._check_operator_token(msg.get("token")):
                viewer = "operator"
            else:
                writer.write(encode_message(
                    {"type": "error", "error": "bad operator token"}
                ))
                await writer.drain()
                return None
        elif msg.get("type") == "hello" and role == "seat":
            seat = msg.get("seat")
            if isinstance(seat, int) and 0 <= seat < N_SEATS:
                viewer = seat
        if viewer is None:
            writer.write(encode_message(
                {"type": "error",
                 "error": 'expected {"type":"hello","role":"seat"|"operator",...}'}
            ))
            await writer.drain()
            return None
        writer.write(encode_message({"type": "ack", "cmd": "hello"}))
        await writer.drain()
        return viewer

    # -- WebSocket transport ----------------------------------------------------

    async def _handle_ws(self, connection):
        viewer = self._ws_viewer(connection.request.path)
        if viewer is None:
            await connection.close(code=1008, reason="unknown endpoint")
            return
        if viewer == "operator":
            q = urllib.parse.urlparse(connection.request.path).query
            token = urllib.parse.parse_qs(q).get("token", [None])[0]
            if not self._check_operator_token(token):
                await connection.send(encode_message(
                    {"type": "error", "error": "bad operator token"}
                ).decode())
                await connection.close(code=1008, reason="bad token")
                return
        client = _Client(viewer)

        async def send(frame: bytes):
            await connection.send(frame.decode())

        try:
            await self._serve_client(client, send, connection)
        except ConnectionClosed:
            pass

    @staticmethod
    def _ws_viewer(path: str):
        path = urllib.parse.urlparse(path).path
        if path == "/ws/operator":
            return "operator"
        if path.startswith("/ws/seat/"):
            tail = path[len("/ws/seat/"):]
            if tail in ("0", "1", "2"):
                return int(tail)
        return None

    def _process_request(self, connection, request):
        """Serve the dashboard's static files on plain HTTP paths."""
        path = urllib.parse.urlparse(request.path).path
        if path.startswith("/ws/"):
            return None  # proceed with the WebSocket handshake
        if self.config.static_dir is None:
            return connection.respond(404, "no static content configured\n")
        root = Path(self.config.static_dir).resolve()
        # the SPA owns these routes; everything else is a plain file
        if path in ("/", "/operator") or path.startswith("/seat/"):
            target = root / "index.html"
        else:
            target = (root / path.lstrip("/")).resolve()
            if not target.is_relative_to(root):
                return connection.respond(403, "forbidden\n")
        if not target.is_file():
            return connection.respond(404, "not found\n")
        body = target.read_bytes()
        ctype = mimetypes.guess_type(target.name)[0] or "application/octet-stream"
        return Response(
            200, "OK",
            Headers([("Content-Type", ctype),
                     ("Content-Length", str(len(body)))]),
            body,
        )


async def _tcp_lines(reader: asyncio.StreamReader):
    while True:
        line = await reader.readline()
        if not line:
            return
        if line.strip():
            yield line


async def run_server(config: ServerConfig, *, ready=None, stop=None):
    """Start, optionally signal readiness, run until `stop` is set."""
    server = SessionServer(config)
    await server.start()
    if isinstance(ready, asyncio.Future):
        ready.set_result(server)
    elif ready is not None:
        ready.set()
    if stop is None:
        stop = asyncio.Event()
    try:
        await stop.wait()
    finally:
        await server.stop()


def serve_forever(config: ServerConfig):
    """Blocking entry point with clean SIGINT/SIGTERM shutdown."""

    async def main():
        stop = asyncio.Event()
        loop = asyncio.get_running_loop()
        for sig in (signal.SIGINT, signal.SIGTERM):
            try:
                loop.add_signal_handler(sig, stop.set)
            except NotImplementedError:
                pass
        await run_server(config, stop=stop)

    asyncio.run(main())
