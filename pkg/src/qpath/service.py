"""Live steering service: one mission session behind a WebSocket protocol.

A single simulation worker owns the session; command ingestion and state
streaming happen over JSON frames ``{"v": 1, "type": ..., "seq": n,
"payload": {...}}``. Commands are applied only between ticks, every event is
broadcast to all connected clients in simulation order, and a reconnecting
client can rebuild the full view from ``GET /snapshot`` alone. The frame
schema is documented in docs/wire_protocol.md and frozen by fixture tests.
"""

from __future__ import annotations

import asyncio
import logging
import socket
from contextlib import asynccontextmanager
from dataclasses import replace
from pathlib import Path
from typing import Any, Optional

from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.responses import HTMLResponse, PlainTextResponse
from fastapi.staticfiles import StaticFiles

from .errors import IoError
from .grid import Cell, MotionSchedule, Obstacle, ObstacleKind
from .planner import (
    Mission,
    MissionEngine,
    PlannerConfig,
    hybrid_plan_fn,
)
from .qrl import TrainConfig, train
from .qsim import CircuitParams
from .scenario import ScenarioSpec, build_world

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1

COMMAND_KINDS = {
    "Start",
    "Pause",
    "Resume",
    "Reset",
    "SetSpeed",
    "Step",
    "PlaceObstacle",
    "RemoveObstacle",
    "MoveDestination",
}


class SessionCore:
    """Synchronous session state machine; the ASGI layer is a thin shell.

    Every mutation returns the frames it produced, already stamped with
    monotonically increasing sequence numbers, so the network layer only has
    to fan them out.
    """

    def __init__(self, spec: ScenarioSpec):
        self.spec = spec
        self.seq = 0
        self.running = False
        self.ticks_per_sec = 1000.0 / spec.hyperparams.tick_ms
        self._placed = 0
        self._rebuild(spec.seed)

    def _rebuild(self, seed: int) -> None:
        spec = replace(self.spec, seed=seed)
        self.world = build_world(spec)
        hp = spec.hyperparams
        self.tables = train(
            self.world,
            spec.destination,
            TrainConfig.from_hyperparams(hp, seed),
            CircuitParams(layers=hp.layers, seed=hp.circuit_seed),
        )
        self.planner_config = PlannerConfig.from_hyperparams(hp)
        self.engine = MissionEngine(
            self.world,
            Mission.from_scenario(replace(spec, seed=seed)),
            hybrid_plan_fn(self.tables, self.planner_config),
        )
        self.running = False

    # -- frames ------------------------------------------------------------

    def _frame(self, kind: str, payload: dict[str, Any]) -> dict[str, Any]:
        self.seq += 1
        return {"v": PROTOCOL_VERSION, "type": kind, "seq": self.seq, "payload": payload}

    def _obstacle_doc(self, obs: Obstacle) -> dict[str, Any]:
        tick = self.engine.tick
        cells = sorted(obs.cells_at(tick), key=lambda c: (c.y, c.x))
        anchor_now = obs.schedule.position_at(tick) if obs.schedule else None
        anchor_next = obs.schedule.position_at(tick + 1) if obs.schedule else None
        return {
            "id": obs.id,
            "kind": obs.kind.value,
            "cells": [[c.x, c.y] for c in cells],
            "in_motion": anchor_now != anchor_next,
        }

    def _tick_payload(self) -> dict[str, Any]:
        eng = self.engine
        return {
            "tick": eng.tick,
            "agent": [eng.agent.x, eng.agent.y],
            "obstacles": [self._obstacle_doc(o) for o in eng.world.obstacles],
            "planned_path": [[c.x, c.y] for c in eng.path[eng.path_pos :]],
            "traversed_path": [[c.x, c.y] for c in eng.trajectory],
            "survivors_remaining": [[c.x, c.y] for c in eng.unvisited],
            "paused": eng.paused_since is not None,
            "replans": eng.replan_count,
            "outcome": eng.outcome,
        }

    def tick_state_frame(self) -> dict[str, Any]:
        return self._frame("TickState", self._tick_payload())

    def snapshot(self) -> dict[str, Any]:
        """Complete re-joinable state: grid plus the current tick payload."""
        world = self.engine.world
        return {
            "v": PROTOCOL_VERSION,
            "seq": self.seq,
            "grid": {
                "width": world.width,
                "height": world.height,
                "static": world.static_mask.astype(int).tolist(),
            },
            "source": [self.engine.mission.source.x, self.engine.mission.source.y],
            "destination": [
                self.engine.mission.destination.x,
                self.engine.mission.destination.y,
            ],
            "survivors": [[c.x, c.y] for c in self.engine.mission.survivors],
            "running": self.running,
            "ticks_per_sec": self.ticks_per_sec,
            "state": self._tick_payload(),
        }

    # -- stepping ------------------------------------------------------------

    def step_once(self) -> list[dict[str, Any]]:
        """Advance one tick; returns [engine events..., TickState, Terminal?]."""
        if self.engine.done:
            self.running = False
            return []
        events = self.engine.step()
        frames: list[dict[str, Any]] = []
        terminal: Optional[dict[str, Any]] = None
        for ev in events:
            if ev.kind == "pause":
                frames.append(self._frame("Paused", {"tick": ev.tick, "cause": "obstacle", **ev.info}))
            elif ev.kind == "resume":
                frames.append(self._frame("Resumed", {"tick": ev.tick}))
            elif ev.kind == "replan":
                frames.append(self._frame("Replan", {"tick": ev.tick}))
            elif ev.kind in ("success", "timeout", "collision"):
                terminal = {"tick": ev.tick, "outcome": ev.kind, **ev.info}
            # survivor arrivals surface through the TickState payload
        frames.append(self.tick_state_frame())
        if terminal is not None:
            frames.append(self._frame("Terminal", terminal))
            self.running = False
        return frames

    # -- commands ------------------------------------------------------------

    def handle_command(self, cmd: dict[str, Any]) -> list[dict[str, Any]]:
        cid = cmd.get("command_id", "")
        kind = cmd.get("kind")

        def ack() -> dict[str, Any]:
            return self._frame("Ack", {"command_id": cid})

        def error(reason: str) -> list[dict[str, Any]]:
            return [self._frame("Error", {"command_id": cid, "reason": reason})]

        if kind not in COMMAND_KINDS:
            return error(f"UnknownCommand:{kind}")

        if kind == "Start" or kind == "Resume":
            if self.engine.done:
                return error("SessionTerminal")
            self.running = True
            frames = [ack()]
            if kind == "Resume":
                frames.append(self._frame("Resumed", {"tick": self.engine.tick, "cause": "user"}))
            return frames

        if kind == "Pause":
            self.running = False
            return [ack(), self._frame("Paused", {"tick": self.engine.tick, "cause": "user"})]

        if kind == "Reset":
            seed = cmd.get("seed", self.spec.seed)
            if not isinstance(seed, int):
                return error("BadSeed")
            self._rebuild(seed)
            return [ack(), self.tick_state_frame()]

        if kind == "SetSpeed":
            rate = cmd.get("ticks_per_sec")
            if not isinstance(rate, (int, float)) or rate < 0:
                return error("BadRate")
            self.ticks_per_sec = float(rate)
            return [ack()]

        if kind == "Step":
            ticks = cmd.get("ticks", 1)
            if not isinstance(ticks, int) or ticks < 1:
                return error("BadTickCount")
            frames = [ack()]
            for _ in range(ticks):
                batch = self.step_once()
                if not batch:
                    break
                frames.extend(batch)
            return frames

        if kind == "PlaceObstacle":
            return self._place_obstacle(cmd, cid, ack)

        if kind == "RemoveObstacle":
            oid = cmd.get("id")
            world = self.engine.world
            kept = tuple(o for o in world.obstacles if o.id != oid)
            if len(kept) == len(world.obstacles):
                return error("UnknownObstacle")
            self.engine.world = replace(world, obstacles=kept)
            return [ack(), self.tick_state_frame()]

        if kind == "MoveDestination":
            return self._move_destination(cmd, cid, ack)

        return error("UnknownCommand")  # unreachable

    def _place_obstacle(self, cmd, cid, ack) -> list[dict[str, Any]]:
        def error(reason: str) -> list[dict[str, Any]]:
            return [self._frame("Error", {"command_id": cid, "reason": reason})]

        cell = cmd.get("cell")
        if not (isinstance(cell, list) and len(cell) == 2 and all(isinstance(v, int) for v in cell)):
            return error("BadCell")
        target = Cell(cell[0], cell[1])
        world = self.engine.world
        if not world.in_bounds(target):
            return error("OutOfBounds")
        if target == self.engine.agent:
            return error("AgentCell")
        kind_name = cmd.get("obstacle_kind", "static")
        if kind_name == "static":
            obs = Obstacle(
                id=f"user{self._placed}", kind=ObstacleKind.STATIC,
                footprint=frozenset([target]),
            )
        elif kind_name == "dynamic":
            obs = Obstacle(
                id=f"user{self._placed}", kind=ObstacleKind.DYNAMIC,
                footprint=frozenset([target]),
                schedule=MotionSchedule(waypoints=(target,)),
            )
        else:
            return error("UnsupportedKind")
        self._placed += 1
        self.engine.world = replace(world, obstacles=world.obstacles + (obs,))
        return [ack(), self.tick_state_frame()]

    def _move_destination(self, cmd, cid, ack) -> list[dict[str, Any]]:
        def error(reason: str) -> list[dict[str, Any]]:
            return [self._frame("Error", {"command_id": cid, "reason": reason})]

        cell = cmd.get("cell")
        if not (isinstance(cell, list) and len(cell) == 2 and all(isinstance(v, int) for v in cell)):
            return error("BadCell")
        target = Cell(cell[0], cell[1])
        world = self.engine.world
        if not world.in_bounds(target):
            return error("OutOfBounds")
        if world.occupied(target, self.engine.tick):
            return error("CellOccupied")
        hp = self.spec.hyperparams
        # Destination changes retrain the one-shot tables toward the new goal.
        self.tables = train(
            self.world,
            target,
            TrainConfig.from_hyperparams(hp, self.spec.seed),
            CircuitParams(layers=hp.layers, seed=hp.circuit_seed),
        )
        self.engine.move_destination(target, hybrid_plan_fn(self.tables, self.planner_config))
        return [ack(), self.tick_state_frame()]


# --------------------------------------------------------------------------
# ASGI layer


def create_app(spec: ScenarioSpec, static_dir: Optional[Path] = None) -> FastAPI:
    core = SessionCore(spec)
    clients: set[asyncio.Queue] = set()
    lock = asyncio.Lock()

    async def broadcast(frames: list[dict[str, Any]]) -> None:
        for frame in frames:
            for q in list(clients):
                q.put_nowait(frame)

    async def tick_loop() -> None:
        while True:
            rate = core.ticks_per_sec
            await asyncio.sleep(1.0 / rate if rate > 0 else 0.05)
            if rate <= 0 or not core.running:
                continue
            async with lock:
                frames = core.step_once()
            await broadcast(frames)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        ticker = asyncio.create_task(tick_loop())
        yield
        ticker.cancel()

    app = FastAPI(title="qpath live session", lifespan=lifespan)
    app.state.core = core

    @app.get("/health")
    async def health() -> dict[str, Any]:
        return {"ok": True, "protocol": PROTOCOL_VERSION}

    @app.get("/snapshot")
    async def snapshot() -> dict[str, Any]:
        async with lock:
            return core.snapshot()

    @app.get("/missionlog")
    async def missionlog() -> PlainTextResponse:
        async with lock:
            text = core.engine.log().to_jsonl()
        return PlainTextResponse(text, media_type="application/x-ndjson")

    @app.websocket("/session")
    async def session(ws: WebSocket) -> None:
        await ws.accept()
        inbox: asyncio.Queue = asyncio.Queue()
        clients.add(inbox)

        async def sender() -> None:
            while True:
                frame = await inbox.get()
                await ws.send_json(frame)

        send_task = asyncio.create_task(sender())
        try:
            while True:
                try:
                    frame = await ws.receive_json()
                except (ValueError, KeyError):
                    await ws.close(code=1003)  # malformed frame: drop this client only
                    break
                if (
                    not isinstance(frame, dict)
                    or frame.get("type") != "command"
                    or not isinstance(frame.get("payload"), dict)
                ):
                    await ws.close(code=1003)
                    break
                async with lock:
                    frames = core.handle_command(frame["payload"])
                await broadcast(frames)
        except WebSocketDisconnect:
            pass
        finally:
            send_task.cancel()
            clients.discard(inbox)

    if static_dir is not None and static_dir.is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")
    else:

        @app.get("/")
        async def index() -> HTMLResponse:
            return HTMLResponse(
                "<html><body><h3>qpath live session</h3>"
                "<p>No console build found. Endpoints: /health /snapshot "
                "/missionlog and WebSocket /session.</p></body></html>"
            )

    return app


def default_console_dir() -> Optional[Path]:
    """The built browser console, when the frontend has been compiled."""
    root = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    return root if root.is_dir() else None


def serve(spec: ScenarioSpec, host: str = "127.0.0.1", port: int = 8787) -> int:
    import uvicorn

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError as exc:
        probe.close()
        raise IoError(f"cannot bind {host}:{port}: {exc}")
    probe.close()

    app = create_app(spec, static_dir=default_console_dir())
    print(f"listening on http://{host}:{port} (WebSocket /session)")
    uvicorn.run(app, host=host, port=port, log_level="warning")
    return 0
