"""Control server: one WebSocket endpoint speaking the wire protocol, plus
static hosting for the browser control panel.

All engine mutation funnels through the engine's inbox; event fan-out is
non-blocking with a bounded per-client queue that drops oldest on overflow,
so a stalled client can never stall the audio path.
"""

from __future__ import annotations

import asyncio
import logging
import threading

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .environment import Engine
from .protocol import (
    ProtocolError,
    error_event,
    hello_event,
    parse_control,
    prediction_event,
    serialize,
    state_event,
)

log = logging.getLogger(__name__)

CLIENT_QUEUE_SIZE = 256


class Broadcaster:
    """Fan-out from the engine thread to client queues on the asyncio loop."""

    def __init__(self):
        self._clients: dict[int, tuple[asyncio.AbstractEventLoop, asyncio.Queue]] = {}
        self._lock = threading.Lock()
        self._next_id = 0

    def register(self, loop: asyncio.AbstractEventLoop) -> tuple[int, asyncio.Queue]:
        q: asyncio.Queue = asyncio.Queue(maxsize=CLIENT_QUEUE_SIZE)
        with self._lock:
            cid = self._next_id
            self._next_id += 1
            self._clients[cid] = (loop, q)
        return cid, q

    def unregister(self, cid: int) -> None:
        with self._lock:
            self._clients.pop(cid, None)

    def publish(self, text: str) -> None:
        with self._lock:
            targets = list(self._clients.values())
        for loop, q in targets:
            loop.call_soon_threadsafe(self._offer, q, text)

    @staticmethod
    def _offer(q: asyncio.Queue, text: str) -> None:
        while True:
            try:
                q.put_nowait(text)
                return
            except asyncio.QueueFull:
                try:
                    q.get_nowait()  # drop oldest rather than stall
                except asyncio.QueueEmpty:
                    pass


def create_app(engine: Engine, frontend_dir=None) -> FastAPI:
    app = FastAPI(title="chaordic control")
    broadcaster = Broadcaster()
    app.state.engine = engine
    app.state.broadcaster = broadcaster

    def on_engine_event(kind: str, payload: dict) -> None:
        if kind == "prediction":
            broadcaster.publish(serialize(prediction_event(payload)))
        elif kind == "state":
            broadcaster.publish(serialize(state_event(payload)))
        elif kind == "error":
            broadcaster.publish(serialize(error_event(payload.get("code", "engine"),
                                                      payload.get("text", ""))))

    engine.subscribe(on_engine_event)

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        loop = asyncio.get_running_loop()
        cid, q = broadcaster.register(loop)
        from dataclasses import asdict

        await ws.send_text(serialize(hello_event()))
        await ws.send_text(serialize(state_event(asdict(engine.state()))))

        async def pump():
            while True:
                await ws.send_text(await q.get())

        sender = asyncio.create_task(pump())
        try:
            while True:
                text = await ws.receive_text()
                try:
                    msg = parse_control(text)
                except ProtocolError as exc:
                    await ws.send_text(serialize(error_event(exc.code, exc.text)))
                    continue
                engine.inbox.put(msg)
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            broadcaster.unregister(cid)

    if frontend_dir is not None:
        app.mount("/", StaticFiles(directory=frontend_dir, html=True), name="ui")
    return app


def serve(engine: Engine, port: int, host: str = "127.0.0.1",
          frontend_dir=None) -> None:
    """Run the engine in a background thread and the server until shutdown."""
    import uvicorn

    app = create_app(engine, frontend_dir=frontend_dir)
    worker = threading.Thread(target=engine.run, kwargs={"realtime": True}, daemon=True)
    worker.start()
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        engine.stop()
