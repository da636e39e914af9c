"""WebSocket session service.

Every session runs its scheduler loop on its own thread against a wall
clock and a thread-safe input queue; the asyncio side accepts clients,
routes JSON text frames, and fans finalized events (plus opt-in debug
frames) out to every client attached to the session. Frames:

client -> server
    {"type": "create_session", "config": {<SessionConfig overrides>}}
    {"type": "resume", "session_id": "..."}
    {"type": "user_message", "text": "...", "client_time_us": 0}
    {"type": "word", "index": 0, "text": "...", "final": false}
    {"type": "retcon", "event_id": 3, "text": "..."}
    {"type": "close"}

server -> client
    {"type": "session_created", "session_id": "...", "config": {...},
     "resumed": false}
    {"type": "event", "id": 3, "t_us": ..., "speaker": "A", "text": "...",
     "provenance": "model", "revision": 0, "retcon_of": null}
    {"type": "debug", ...}       {"type": "error", "message": "..."}
    {"type": "closed"}

User messages carry server-assigned timestamps (client clocks are display
only). A slow client's outbound queue overflowing disconnects that client
without touching the session.
"""

from __future__ import annotations

import asyncio
import dataclasses
import json
import logging
import os
import threading
import uuid

from ..codec import SPOKEN
from ..engine import (
    CloseInput,
    HistoryEntry,
    OutputSink,
    QueueInputSource,
    SessionConfig,
    UserInput,
    RetconInput,
    WALL,
    WordUpdate,
    run_session,
)
from ..engine.retcon import StreamingWordFeeder
from ..lm.factory import make_backend
from ..lm.tokenizers import make_tokenizer
from .transcript_log import TranscriptLog, entry_record

logger = logging.getLogger(__name__)

CLIENT_QUEUE_LIMIT = 256

_CONFIG_FIELDS = {f.name for f in dataclasses.fields(SessionConfig)}


class _BroadcastSink(OutputSink):
    def __init__(self, runtime: "SessionRuntime"):
        self.runtime = runtime

    def on_entry(self, entry: HistoryEntry) -> None:
        record = entry_record(entry)
        self.runtime.log.append(record)
        self.runtime.backlog.append(record)
        self.runtime.broadcast({"type": "event", **record})

    def on_debug(self, record: dict) -> None:
        self.runtime.broadcast({"type": "debug", **record})


class SessionRuntime:
    """One live session: scheduler thread + connected client set."""

    def __init__(self, server: "ChatServer", session_id: str,
                 config: SessionConfig, backend):
        self.server = server
        self.id = session_id
        self.config = config
        self.backend = backend
        self.inputs = QueueInputSource()
        self.clients: set = set()
        self.backlog: list[dict] = []
        self.feeder = StreamingWordFeeder()
        self.log = TranscriptLog(os.path.join(server.log_dir,
                                              f"{session_id}.jsonl"))
        self.state = None
        self.closed = False
        self.thread = threading.Thread(target=self._run, daemon=True,
                                       name=f"session-{session_id}")

    def start(self) -> None:
        self.thread.start()

    def _run(self) -> None:
        try:
            self.state = run_session(self.config, self.backend, self.inputs,
                                     _BroadcastSink(self))
        except Exception:
            logger.exception("session %s crashed", self.id)
        finally:
            self.closed = True
            self.log.close()
            self.broadcast({"type": "closed"})

    def submit(self, item) -> None:
        self.inputs.submit(item)

    def broadcast(self, frame: dict) -> None:
        loop = self.server.loop
        if loop is not None and loop.is_running():
            loop.call_soon_threadsafe(self.server.fanout, self, frame)


class ChatServer:
    def __init__(self, defaults: SessionConfig, *, backend_spec: str,
                 tokenizer_spec: str = "bytes", log_dir: str = "transcripts"):
        self.defaults = defaults
        self.backend_spec = backend_spec
        self.tokenizer_spec = tokenizer_spec
        self.log_dir = log_dir
        os.makedirs(log_dir, exist_ok=True)
        self.sessions: dict[str, SessionRuntime] = {}
        self.loop: asyncio.AbstractEventLoop | None = None
        self._queues: dict = {}   # websocket -> asyncio.Queue

    # -- frame fanout ---------------------------------------------------

    def fanout(self, runtime: SessionRuntime, frame: dict) -> None:
        for ws in list(runtime.clients):
            q = self._queues.get(ws)
            if q is None:
                continue
            if q.qsize() >= CLIENT_QUEUE_LIMIT:
                # backpressure: drop the slow client, not the session
                logger.warning("client on %s too slow; disconnecting",
                               runtime.id)
                runtime.clients.discard(ws)
                q.put_nowait(None)  # poison: writer task closes the socket
                continue
            q.put_nowait(frame)

    # -- session management ----------------------------------------------

    def create_session(self, overrides: dict) -> SessionRuntime:
        cfg = dataclasses.replace(self.defaults)
        for key, value in (overrides or {}).items():
            if key not in _CONFIG_FIELDS:
                raise ValueError(f"unknown config field {key!r}")
            setattr(cfg, key, value)
        cfg.clock_mode = WALL
        if cfg.fmt == SPOKEN:
            cfg.start_time_us = 0
        cfg.validate()
        tokenizer = make_tokenizer(self.tokenizer_spec)
        backend = make_backend(cfg.backend_spec or self.backend_spec,
                               tokenizer, cfg.fmt)
        session_id = uuid.uuid4().hex[:12]
        runtime = SessionRuntime(self, session_id, cfg, backend)
        self.sessions[session_id] = runtime
        runtime.start()
        return runtime

    # -- per-connection protocol ------------------------------------------

    async def handle(self, ws) -> None:
        queue: asyncio.Queue = asyncio.Queue()
        self._queues[ws] = queue
        runtime: SessionRuntime | None = None
        writer = asyncio.create_task(self._writer(ws, queue))
        try:
            async for raw in ws:
                try:
                    frame = json.loads(raw)
                    kind = frame["type"]
                except (json.JSONDecodeError, KeyError, TypeError):
                    await queue.put({"type": "error",
                                     "message": "malformed frame"})
                    continue
                try:
                    runtime = self._dispatch(ws, queue, runtime, kind, frame)
                except Exception as exc:
                    await queue.put({"type": "error", "message": str(exc)})
        finally:
            if runtime is not None:
                runtime.clients.discard(ws)
            self._queues.pop(ws, None)
            writer.cancel()

    def _dispatch(self, ws, queue, runtime, kind, frame):
        if kind == "create_session":
            runtime = self.create_session(frame.get("config") or {})
            runtime.clients.add(ws)
            queue.put_nowait(self._created_frame(runtime, resumed=False))
            return runtime
        if kind == "resume":
            runtime = self.sessions.get(frame.get("session_id", ""))
            if runtime is None:
                raise ValueError("no such session")
            runtime.clients.add(ws)
            queue.put_nowait(self._created_frame(runtime, resumed=True))
            for record in list(runtime.backlog):
                queue.put_nowait({"type": "event", **record})
            return runtime
        if runtime is None:
            raise ValueError("create or resume a session first")
        if kind == "user_message":
            runtime.submit(UserInput(str(frame["text"]),
                                     client_time_us=frame.get(
                                         "client_time_us")))
        elif kind == "word":
            upd = WordUpdate(int(frame["index"]), str(frame["text"]),
                             time_us=None, final=bool(frame.get("final")))
            for item in runtime.feeder.update(upd):
                runtime.submit(item)
        elif kind == "retcon":
            runtime.submit(RetconInput(str(frame["text"]),
                                       entry_id=int(frame["event_id"])))
        elif kind == "close":
            runtime.submit(CloseInput())
        else:
            raise ValueError(f"unknown frame type {kind!r}")
        return runtime

    def _created_frame(self, runtime: SessionRuntime, resumed: bool) -> dict:
        cfg = dataclasses.asdict(runtime.config)
        return {"type": "session_created", "session_id": runtime.id,
                "config": cfg, "resumed": resumed}

    async def _writer(self, ws, queue: asyncio.Queue) -> None:
        try:
            while True:
                frame = await queue.get()
                if frame is None:
                    await ws.close(code=1013, reason="backpressure")
                    return
                await ws.send(json.dumps(frame, ensure_ascii=False))
        except Exception:
            pass

    async def serve(self, host: str = "127.0.0.1", port: int = 8765):
        import websockets

        self.loop = asyncio.get_running_loop()
        return await websockets.serve(self.handle, host, port)

    def shutdown(self) -> None:
        for runtime in self.sessions.values():
            if not runtime.closed:
                runtime.submit(CloseInput())


def serve_forever(defaults: SessionConfig, *, backend_spec: str,
                  tokenizer_spec: str = "bytes", host: str = "127.0.0.1",
                  port: int = 8765, log_dir: str = "transcripts",
                  ready: threading.Event | None = None) -> None:
    """Blocking entry point used by the CLI."""

    async def _main():
        server = ChatServer(defaults, backend_spec=backend_spec,
                            tokenizer_spec=tokenizer_spec, log_dir=log_dir)
        ws_server = await server.serve(host, port)
        logger.info("listening on ws://%s:%d", host, port)
        if ready is not None:
            ready.set()
        try:
            await asyncio.Future()
        finally:
            server.shutdown()
            ws_server.close()

    asyncio.run(_main())
