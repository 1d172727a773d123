"""HTTP + streaming API between the control center and user clients.

Endpoints:
    GET  /v1/state                         latest consistent snapshot
    GET  /v1/history?appliance=&from=&to=&res=
    GET  /v1/report?mode=                  weekly comparison report
    POST /v1/command {appliance, action}   queue an ON/OFF command
    GET  /v1/stream?cursor=&appliances=    server-sent events

Auth is bearer-token with two static scopes (read, control); the stream
also accepts ?token= because EventSource cannot set headers. Commands are
asynchronous: the POST acknowledges the queueing and the outcome arrives
as a command event on the stream.
"""

from __future__ import annotations

import asyncio
import json
import logging
from dataclasses import dataclass
from datetime import datetime, timezone

from fastapi import Depends, FastAPI, HTTPException, Query, Request
from fastapi.responses import StreamingResponse
from pydantic import BaseModel

from .domain import SwitchAction
from .engine import Simulation
from .errors import UnknownAppliance
from .profiles import Mode, run_experiment

logger = logging.getLogger(__name__)

SECONDS_PER_DAY = 86400
SECONDS_PER_WEEK = 7 * SECONDS_PER_DAY

_RES_SUFFIX = {"s": 1, "m": 60, "h": 3600, "d": 86400, "w": 7 * 86400}


class ReadScope:
    READ = "read"
    CONTROL = "control"


@dataclass(frozen=True)
class ApiSession:
    token: str
    issued: str
    scope: str  # "read" | "control"


class CommandBody(BaseModel):
    appliance: str
    action: str


def parse_resolution(text: str) -> int:
    """Resolution in seconds from '3600', '1h', '30m', '1d', '1w'."""
    text = text.strip().lower()
    if text and text[-1] in _RES_SUFFIX:
        return int(float(text[:-1]) * _RES_SUFFIX[text[-1]])
    return int(text)


def create_app(sim: Simulation, runner=None) -> FastAPI:
    """Wire the HTTP surface onto a (possibly live) simulation."""
    config = sim.config
    center = sim.center
    issued = datetime.now(timezone.utc).isoformat()
    sessions = {
        config.gateway.read_token: ApiSession(config.gateway.read_token, issued, ReadScope.READ),
        config.gateway.control_token: ApiSession(config.gateway.control_token, issued,
                                                 ReadScope.CONTROL),
    }

    app = FastAPI(title="hems gateway", version="1")
    app.state.sim = sim
    app.state.runner = runner
    app.state.audit = []
    app.state.report_cache = {}

    def _session_for(request: Request) -> ApiSession | None:
        header = request.headers.get("authorization", "")
        token = header[7:] if header.lower().startswith("bearer ") else None
        if token is None:
            token = request.query_params.get("token")
        return sessions.get(token) if token else None

    def _deny(request: Request, reason: str):
        app.state.audit.append({
            "path": request.url.path,
            "reason": reason,
            "client": request.client.host if request.client else None,
        })
        logger.warning("denied %s: %s", request.url.path, reason)
        raise HTTPException(status_code=401, detail=reason)

    def require_read(request: Request) -> ApiSession:
        session = _session_for(request)
        if session is None:
            _deny(request, "missing or unknown token")
        return session

    def require_control(request: Request) -> ApiSession:
        session = _session_for(request)
        if session is None:
            _deny(request, "missing or unknown token")
        if session.scope != ReadScope.CONTROL:
            _deny(request, "control scope required")
        return session

    def _window_kwh(name: str, from_tick: int, to_tick: int) -> float:
        if to_tick <= from_tick:
            return 0.0
        points = center.query_history(name, from_tick, to_tick, max(1, to_tick - from_tick))
        return sum(p["kwh"] for p in points)

    @app.get("/v1/state")
    def state(session: ApiSession = Depends(require_read)) -> dict:
        snap = center.snapshot()
        now_tick = sim.now_tick
        sec = int(now_tick * sim.tick_seconds)
        day_start = now_tick - int((sec % SECONDS_PER_DAY) / sim.tick_seconds)
        week_start = now_tick - int((sec % SECONDS_PER_WEEK) / sim.tick_seconds)
        for name, entry in snap["appliances"].items():
            entry["kwh_today"] = _window_kwh(name, day_start, now_tick)
            entry["kwh_week"] = _window_kwh(name, week_start, now_tick)
        snap["tick"] = now_tick
        snap["tick_seconds"] = sim.tick_seconds
        snap["time"] = center.wall_time(now_tick).isoformat()
        snap["report_interval_s"] = config.report_interval_s
        snap["finished"] = sim.now_tick >= sim.total_ticks
        return snap

    @app.get("/v1/history")
    def history(appliance: str, session: ApiSession = Depends(require_read),
                from_tick: int = Query(0, alias="from"),
                to_tick: int | None = Query(None, alias="to"),
                res: str = "1h") -> dict:
        if to_tick is None:
            to_tick = sim.now_tick
        try:
            resolution = parse_resolution(res)
        except ValueError:
            raise HTTPException(status_code=422, detail=f"bad resolution {res!r}") from None
        if resolution <= 0:
            raise HTTPException(status_code=422, detail="resolution must be positive")
        if to_tick < from_tick:
            raise HTTPException(status_code=422, detail="window end precedes start")
        try:
            points = center.query_history(appliance, from_tick, to_tick, resolution)
        except UnknownAppliance:
            raise HTTPException(status_code=404, detail=f"unknown appliance {appliance!r}") from None
        return {"appliance": appliance, "resolution_s": resolution, "points": points}

    @app.get("/v1/report")
    def report(mode: str = Mode.ONLINE_CALIBRATED.value,
               session: ApiSession = Depends(require_read)) -> dict:
        try:
            mode_enum = Mode(mode)
        except ValueError:
            raise HTTPException(status_code=422, detail=f"unknown mode {mode!r}") from None
        cache = app.state.report_cache
        if mode_enum.value not in cache:
            cache[mode_enum.value] = run_experiment(config, mode_enum).to_dict()
        return cache[mode_enum.value]

    @app.post("/v1/command", status_code=202)
    def command(body: CommandBody, session: ApiSession = Depends(require_control)) -> dict:
        try:
            action = SwitchAction(body.action.lower())
        except ValueError:
            raise HTTPException(status_code=422, detail=f"action must be on/off, got {body.action!r}") from None
        if body.appliance not in center.appliance_nodes:
            raise HTTPException(status_code=404, detail=f"unknown appliance {body.appliance!r}")
        sim.enqueue_user_command(body.appliance, action, session=f"token-{session.scope}")
        return {
            "status": "queued",
            "appliance": body.appliance,
            "action": action.value,
            "queued_at_tick": sim.now_tick,
            "watch": "/v1/stream",
        }

    @app.get("/v1/stream")
    async def stream(request: Request, session: ApiSession = Depends(require_read),
                     cursor: int = 0, appliances: str | None = None):
        last_id = request.headers.get("last-event-id")
        if last_id is not None:
            try:
                cursor = int(last_id) + 1
            except ValueError:
                pass
        name_filter = None
        if appliances:
            name_filter = {n.strip() for n in appliances.split(",") if n.strip()}

        async def event_source():
            position = cursor
            idle = 0.0
            while True:
                if await request.is_disconnected():
                    return
                with center.lock:
                    events = center.events[position:]
                    position = len(center.events)
                sent = False
                for event in events:
                    if name_filter is not None and event.get("appliance") not in name_filter:
                        continue
                    sent = True
                    yield f"id: {event['seq']}\ndata: {json.dumps(event, sort_keys=True)}\n\n"
                if sent:
                    idle = 0.0
                else:
                    idle += 0.05
                    if idle >= 15.0:
                        idle = 0.0
                        yield ": keep-alive\n\n"
                    await asyncio.sleep(0.05)

        return StreamingResponse(event_source(), media_type="text/event-stream",
                                 headers={"Cache-Control": "no-cache"})

    return app
