"""Interactive session service.

The protocol router is transport-agnostic: every message is a JSON
object {v, type, session_id?, payload}; replies mirror the request type
and state-changing commands fan a state_update broadcast out to every
client attached to the session. Two transports share the router: a
line-delimited JSON TCP listener and a WebSocket listener whose HTTP
side also serves the static resources (/maps, /maps/<id>, /checkpoints,
/health).
"""

from __future__ import annotations

import asyncio
import itertools
import json

import numpy as np

from .fileio import read_corpus
from .maps import map_to_dict, procedural_map
from .observe import FeatureProvider
from .policy import load_policy
from .sim import PolicyPlanner
from .sim.session import Session, replay_session

PROTOCOL_VERSION = 1

COMMANDS = (
    "create_session",
    "load_map",
    "step",
    "play",
    "pause",
    "set_light",
    "add_actor",
    "remove_actor",
    "modify_actor",
    "resample",
    "get_state",
    "list_maps",
)


class StationaryPlanner:
    """Fallback when no checkpoint is loaded: everything holds position."""

    model_id = "stationary"
    plan_horizon = 10

    def plan(self, view):
        pos = view.positions
        return np.repeat(pos[:, None, :], self.plan_horizon, axis=1)


class ProtocolError(ValueError):
    pass


class SimService:
    def __init__(self, maps=None, checkpoint_path=None):
        # maps: {map_id: (graph, default_control)}
        self.maps = dict(maps or {})
        if not self.maps:
            for template in ("straight", "intersection"):
                g, c = procedural_map(0, template)
                self.maps[g.map_id] = (g, c)
        self.checkpoint_path = checkpoint_path
        if checkpoint_path:
            policy, _ = load_policy(checkpoint_path)
            self._planner_for = lambda: PolicyPlanner(policy, FeatureProvider(policy.cfg, policy.backbone))
        else:
            self._planner_for = StationaryPlanner
        self.sessions: dict[str, Session] = {}
        self._ids = itertools.count(1)
        self.locks: dict[str, asyncio.Lock] = {}
        self.playing: dict[str, bool] = {}

    # ------------------------------------------------------------- commands

    def _session(self, msg) -> Session:
        sid = msg.get("session_id")
        if sid not in self.sessions:
            raise ProtocolError(f"unknown session {sid!r}")
        return self.sessions[sid]

    def handle(self, msg: dict):
        """-> (reply dict, [(session_id, broadcast dict), ...])"""
        if not isinstance(msg, dict) or "type" not in msg:
            raise ProtocolError("message must be an object with a 'type'")
        if msg.get("v", PROTOCOL_VERSION) != PROTOCOL_VERSION:
            raise ProtocolError(f"unsupported protocol version {msg.get('v')!r}")
        mtype = msg["type"]
        if mtype not in COMMANDS:
            raise ProtocolError(f"unknown message type {mtype!r}")
        payload = msg.get("payload") or {}
        broadcasts = []

        def state_update(session):
            broadcasts.append((session.session_id, {
                "v": PROTOCOL_VERSION,
                "type": "state_update",
                "session_id": session.session_id,
                "payload": session.snapshot(),
            }))

        if mtype == "list_maps":
            reply = {"maps": sorted(self.maps)}
        elif mtype == "create_session":
            map_id = payload.get("map") or sorted(self.maps)[0]
            if map_id not in self.maps:
                raise ProtocolError(f"unknown map {map_id!r}")
            graph, control = self.maps[map_id]
            sid = f"s{next(self._ids)}"
            session = Session(sid, graph, control.copy(), self._planner_for(), seed=int(payload.get("seed", 0)))
            self.sessions[sid] = session
            self.locks[sid] = asyncio.Lock()
            self.playing[sid] = False
            reply = {"session_id": sid, "tick": session.tick, "map": map_id}
        elif mtype == "load_map":
            session = self._session(msg)
            map_id = payload["map"]
            if map_id not in self.maps:
                raise ProtocolError(f"unknown map {map_id!r}")
            graph, control = self.maps[map_id]
            fresh = Session(session.session_id, graph, control.copy(), self._planner_for(),
                            seed=int(payload.get("seed", 0)))
            self.sessions[session.session_id] = fresh
            state_update(fresh)
            reply = {"session_id": fresh.session_id, "map": map_id, "tick": 0}
        elif mtype == "step":
            session = self._session(msg)
            snap = session.step()
            state_update(session)
            reply = {"tick": snap["tick"]}
        elif mtype == "play":
            session = self._session(msg)
            self.playing[session.session_id] = True
            reply = {"playing": True}
        elif mtype == "pause":
            session = self._session(msg)
            self.playing[session.session_id] = False
            reply = {"playing": False}
        elif mtype == "set_light":
            session = self._session(msg)
            session.set_light(int(payload["id"]), str(payload["state"]))
            state_update(session)
            reply = {"id": int(payload["id"]), "state": payload["state"]}
        elif mtype == "add_actor":
            session = self._session(msg)
            aid = session.add_actor(
                payload["x"], payload["y"], payload.get("theta", 0.0),
                payload.get("w", 4.6), payload.get("h", 2.0), payload.get("id"),
            )
            state_update(session)
            reply = {"id": aid}
        elif mtype == "remove_actor":
            session = self._session(msg)
            session.remove_actor(int(payload["id"]))
            state_update(session)
            reply = {"id": int(payload["id"])}
        elif mtype == "modify_actor":
            session = self._session(msg)
            session.modify_actor(
                int(payload["id"]), payload.get("x"), payload.get("y"),
                payload.get("theta"), payload.get("w"), payload.get("h"),
            )
            state_update(session)
            reply = {"id": int(payload["id"])}
        elif mtype == "resample":
            session = self._session(msg)
            session.resample(int(payload["seed"]))
            reply = {"seed": int(payload["seed"])}
        elif mtype == "get_state":
            session = self._session(msg)
            reply = dict(session.snapshot())
            if payload.get("drivable"):
                reply["drivable"] = session.drivable_summary()
        return (
            {"v": PROTOCOL_VERSION, "type": "reply", "request": mtype, "ok": True, "payload": reply},
            broadcasts,
        )

    def error_reply(self, message: str) -> dict:
        return {"v": PROTOCOL_VERSION, "type": "error", "ok": False, "message": message}

    def replay(self, session_id: str) -> Session:
        live = self.sessions[session_id]
        graph, control = self.maps[live.graph.map_id]
        return replay_session(graph, control.copy(), self._planner_for(), live.log)

    # -------------------------------------------------------------- statics

    def static_resource(self, path: str):
        if path == "/health":
            return {"status": "ok", "sessions": len(self.sessions)}
        if path == "/maps":
            return {"maps": sorted(self.maps)}
        if path.startswith("/maps/"):
            map_id = path[len("/maps/") :]
            if map_id in self.maps:
                g, c = self.maps[map_id]
                return map_to_dict(g, c)
            return None
        if path == "/checkpoints":
            return {"checkpoints": [str(self.checkpoint_path)] if self.checkpoint_path else []}
        return None


# ---------------------------------------------------------------- transports


class _Hub:
    """Tracks which live connections watch which session."""

    def __init__(self):
        self.watchers: dict[str, set] = {}

    def attach(self, session_id, send):
        self.watchers.setdefault(session_id, set()).add(send)

    def detach(self, send):
        for group in self.watchers.values():
            group.discard(send)

    async def broadcast(self, session_id, message):
        dead = []
        for send in self.watchers.get(session_id, ()):  # fan-out of one snapshot
            try:
                await send(message)
            except Exception:
                dead.append(send)
        for send in dead:
            self.detach(send)


async def _dispatch(service: SimService, hub: _Hub, raw: str, send):
    try:
        msg = json.loads(raw)
    except json.JSONDecodeError as e:
        await send(service.error_reply(f"malformed JSON: {e}"))
        return
    sid = msg.get("session_id") if isinstance(msg, dict) else None
    lock = service.locks.get(sid)
    try:
        if lock is not None:
            async with lock:
                reply, broadcasts = service.handle(msg)
        else:
            reply, broadcasts = service.handle(msg)
    except (ProtocolError, KeyError, ValueError) as e:
        await send(service.error_reply(str(e)))
        return
    if reply["request"] == "create_session":
        hub.attach(reply["payload"]["session_id"], send)
    elif sid is not None:
        hub.attach(sid, send)
    await send(reply)
    for session_id, message in broadcasts:
        await hub.broadcast(session_id, message)


async def _play_loop(service: SimService, hub: _Hub, interval=0.5):
    """Wall-clock ticking for sessions in play mode (one tick per 0.5 s)."""
    while True:
        await asyncio.sleep(interval)
        for sid, playing in list(service.playing.items()):
            if not playing or sid not in service.sessions:
                continue
            async with service.locks[sid]:
                session = service.sessions[sid]
                session.step()
                update = {
                    "v": PROTOCOL_VERSION,
                    "type": "state_update",
                    "session_id": sid,
                    "payload": session.snapshot(),
                }
            await hub.broadcast(sid, update)


async def serve_forever(service: SimService, host="127.0.0.1", ws_port=8700, tcp_port=8701, ready=None):
    import websockets
    from websockets.http11 import Response

    hub = _Hub()

    async def tcp_conn(reader, writer):
        async def send(obj):
            writer.write((json.dumps(obj) + "\n").encode())
            await writer.drain()

        try:
            while True:
                line = await reader.readline()
                if not line:
                    break
                if line.strip():
                    await _dispatch(service, hub, line.decode(), send)
        finally:
            hub.detach(send)
            writer.close()

    async def ws_conn(websocket):
        async def send(obj):
            await websocket.send(json.dumps(obj))

        try:
            async for raw in websocket:
                await _dispatch(service, hub, raw, send)
        finally:
            hub.detach(send)

    def process_request(connection, request):
        doc = service.static_resource(request.path)
        if doc is None and request.path.startswith("/ws"):
            return None  # proceed with the websocket handshake
        if doc is None:
            return connection.respond(404, "not found\n")
        response = connection.respond(200, json.dumps(doc, sort_keys=True) + "\n")
        response.headers["Content-Type"] = "application/json"
        return response

    tcp_server = await asyncio.start_server(tcp_conn, host, tcp_port)
    async with websockets.serve(ws_conn, host, ws_port, process_request=process_request):
        player = asyncio.create_task(_play_loop(service, hub))
        if ready is not None:
            ready.set()
        try:
            async with tcp_server:
                await tcp_server.serve_forever()
        finally:
            player.cancel()


def service_from_paths(corpus_path=None, checkpoint_path=None) -> SimService:
    maps = {}
    if corpus_path:
        corpus = read_corpus(corpus_path)
        maps = dict(corpus.maps)
    return SimService(maps=maps, checkpoint_path=checkpoint_path)


def run_service(host="127.0.0.1", ws_port=8700, tcp_port=8701, corpus_path=None, checkpoint_path=None):
    service = service_from_paths(corpus_path, checkpoint_path)
    print(f"session service: ws://{host}:{ws_port}/ws  tcp {host}:{tcp_port}  maps: {sorted(service.maps)}")
    asyncio.run(serve_forever(service, host, ws_port, tcp_port))
