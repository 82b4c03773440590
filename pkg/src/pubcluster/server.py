"""Web gateway: the only access path to the cluster.

All mutating calls funnel through one lock-serialized command queue, so
writes are totally ordered; reads serve snapshots. Persistence is an
append-only JSON-lines event log: a command's events are durably
appended before its response is sent, and a storage failure rolls the
world back so no state change exists without its event.

Routes live under /api/v1 and address nodes, blocks and jobs only as
managed objects; there is no route that proxies into a node itself.
"""

from __future__ import annotations

import copy
import json
import os
import queue
import threading
from typing import Optional

from fastapi import Depends, FastAPI, Header, Request
from fastapi.responses import JSONResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import errors
from .domain import ClusterConfig, NodeClass
from .events import EventLogWriter
from .world import ROLE_ADMIN, ROLE_ANONYMOUS, ROLES, World

_STATUS_BY_CODE = {
    "Unauthorized": 401,
    "NotOwner": 403,
    "UnknownNode": 404,
    "UnknownBlock": 404,
    "UnknownJob": 404,
    "UnknownRequestId": 404,
    "UnknownPlan": 404,
    "RefusedBusy": 409,
    "IllegalTransition": 409,
    "StalePlan": 409,
    "BlockNotActive": 409,
    "DuplicateNodeId": 409,
    "StorageFailure": 500,
    "InternalError": 500,
}


class ControlPlane:
    """World + command queue + persistence + telemetry fan-out."""

    def __init__(
        self,
        config: ClusterConfig,
        seed: int,
        data_dir: Optional[str] = None,
        admin_secret: Optional[str] = None,
        mode: str = "sim",
    ):
        self.config = config
        self.seed = seed
        self.mode = mode
        self.admin_secret = admin_secret
        self.lock = threading.Lock()
        self.log_writer: Optional[EventLogWriter] = None
        if data_dir:
            self.log_writer = EventLogWriter(os.path.join(data_dir, "events.log"))
        self.world = World(config, seed)
        self._persist_from = 0
        self._flush_events()
        self.telemetry_subscribers: list[queue.Queue] = []
        self._realtime_thread: Optional[threading.Thread] = None
        self._stop = threading.Event()

    # ------------------------------------------------------------- commands

    def execute(self, fn):
        """Run one command under the queue lock with atomic persistence."""
        with self.lock:
            snapshot = None
            if self.log_writer is not None:
                snapshot = copy.deepcopy(self.world)
            command_error = None
            try:
                result = fn(self.world)
            except errors.ClusterError as exc:
                command_error = exc
                result = None
            try:
                self._flush_events()
            except errors.StorageFailure:
                if snapshot is not None:
                    self.world = snapshot
                    self._persist_from = len(self.world.events)
                raise
            if command_error is not None:
                raise command_error
            return result

    def _flush_events(self):
        fresh = self.world.events[self._persist_from :]
        if fresh and self.log_writer is not None:
            self.log_writer.append(fresh)
        self._persist_from = len(self.world.events)

    def snapshot(self, fn):
        with self.lock:
            return fn(self.world)

    # ------------------------------------------------------------ telemetry

    def _telemetry_frame(self) -> dict:
        w = self.world
        return {
            "tick": w.tick,
            "nodes": [r.to_dict() for r in w.registry.ordered()],
            "alarms": [
                e.to_dict() for e in w.events if e.tick == w.tick and e.kind == "AlarmRaised"
            ],
        }

    def publish_telemetry(self):
        frame = self._telemetry_frame()
        for q in list(self.telemetry_subscribers):
            q.put(frame)

    def tick(self, n: int):
        # one telemetry frame per tick: the chart is append-only per tick
        evs = []
        for _ in range(n):
            evs.extend(self.execute(lambda w: w.advance_tick(1)))
            self.publish_telemetry()
        return evs

    def start_realtime(self):
        def loop():
            while not self._stop.wait(self.config.tick_seconds):
                self.tick(1)

        self._realtime_thread = threading.Thread(target=loop, daemon=True)
        self._realtime_thread.start()

    def shutdown(self):
        self._stop.set()
        if self.log_writer is not None:
            self.log_writer.close()


# ---------------------------------------------------------------- API bodies


class RequestBody(BaseModel):
    nodes: int
    min_class: int = 0
    duration_hours: int
    priority: int = 1


class JobBody(BaseModel):
    width: int
    duration_ticks: int


class TokenBody(BaseModel):
    role: str = ROLE_ANONYMOUS


class PowerBody(BaseModel):
    on: bool
    forced: bool = False


class FaultBody(BaseModel):
    node_id: int
    kind: str
    param: Optional[float] = None


class TickBody(BaseModel):
    n: int = 1


def create_app(
    config: ClusterConfig,
    seed: int,
    data_dir: Optional[str] = None,
    admin_secret: Optional[str] = None,
    mode: str = "sim",
    static_dir: Optional[str] = None,
) -> FastAPI:
    cp = ControlPlane(config, seed, data_dir=data_dir, admin_secret=admin_secret, mode=mode)
    app = FastAPI(title="pubcluster", openapi_url=None, docs_url=None, redoc_url=None)
    app.state.control_plane = cp

    if mode == "realtime":
        cp.start_realtime()

    @app.exception_handler(errors.ClusterError)
    async def _cluster_error(request: Request, exc: errors.ClusterError):
        status = _STATUS_BY_CODE.get(exc.code, 400)
        return JSONResponse(status_code=status, content=exc.envelope())

    def caller(x_auth_token: Optional[str] = Header(default=None)):
        return cp.snapshot(lambda w: w.get_token(x_auth_token))

    def admin_caller(
        x_auth_token: Optional[str] = Header(default=None),
        x_admin_secret: Optional[str] = Header(default=None),
    ):
        if admin_secret and x_admin_secret == admin_secret:
            return None  # bootstrap path: shared secret stands in for a token
        token = cp.snapshot(lambda w: w.tokens.get(x_auth_token or ""))
        if token is None or token.role != ROLE_ADMIN:
            raise errors.Unauthorized("admin token required")
        return token

    # ----------------------------------------------------------- user routes

    @app.post("/api/v1/tokens")
    def issue_anonymous_token():
        token = cp.execute(lambda w: w.issue_token(ROLE_ANONYMOUS))
        return token.to_dict()

    @app.get("/api/v1/limits")
    def limits():
        return cp.config.admission.to_dict()

    @app.post("/api/v1/requests")
    def submit_request(body: RequestBody, token=Depends(caller)):
        request_id = cp.execute(
            lambda w: w.submit_request(
                token.value,
                body.nodes,
                NodeClass(level=body.min_class),
                body.duration_hours,
                body.priority,
            )
        )
        return {"request_id": request_id, "status": "Pending"}

    @app.get("/api/v1/requests/{request_id}")
    def request_status(request_id: int, token=Depends(caller)):
        def view(w: World):
            entry = w.requests.get(request_id)
            if entry is None:
                raise errors.UnknownRequestId(f"no request {request_id}")
            if entry.request.user_token != token.value and token.role != ROLE_ADMIN:
                raise errors.NotOwner("request belongs to another user")
            return entry.to_dict()

        return cp.snapshot(view)

    def _owned_block(w: World, block_id: int, token):
        block = w.blocks.get(block_id)
        if block is None:
            raise errors.UnknownBlock(f"no block {block_id}")
        if block.owner != token.value and token.role != ROLE_ADMIN:
            raise errors.NotOwner(f"block {block_id} is not owned by this token")
        return block

    @app.get("/api/v1/blocks/{block_id}")
    def block_detail(block_id: int, token=Depends(caller)):
        return cp.snapshot(lambda w: _owned_block(w, block_id, token).to_dict())

    @app.post("/api/v1/blocks/{block_id}/jobs")
    def submit_job(block_id: int, body: JobBody, token=Depends(caller)):
        job_id = cp.execute(
            lambda w: w.submit_job(token.value, block_id, body.width, body.duration_ticks)
        )
        return {"job_id": job_id, "status": "Running"}

    @app.get("/api/v1/blocks/{block_id}/jobs/{job_id}")
    def job_status(block_id: int, job_id: int, token=Depends(caller)):
        def view(w: World):
            _owned_block(w, block_id, token)
            job = w.jobs.get(job_id)
            if job is None or job.block_id != block_id:
                raise errors.UnknownJob(f"no job {job_id} in block {block_id}")
            return job.to_dict()

        return cp.snapshot(view)

    @app.post("/api/v1/blocks/{block_id}/release")
    def release_block(block_id: int, token=Depends(caller)):
        cp.execute(lambda w: w.release_block(token.value, block_id))
        return {"block_id": block_id, "state": "Released"}

    # ---------------------------------------------------------- admin routes

    @app.post("/api/v1/admin/tokens")
    def issue_token(body: TokenBody, _admin=Depends(admin_caller)):
        if body.role not in ROLES:
            raise errors.InvalidParameter(f"unknown role {body.role!r}")
        token = cp.execute(lambda w: w.issue_token(body.role))
        return token.to_dict()

    @app.post("/api/v1/admin/allocate")
    def run_allocation(_admin=Depends(admin_caller)):
        plan_id, plan = cp.execute(lambda w: w.run_allocation(trigger="Admin"))
        out = plan.to_dict()
        out["plan_id"] = plan_id
        return out

    @app.post("/api/v1/admin/plans/{plan_id}/activate")
    def activate_plan(plan_id: int, _admin=Depends(admin_caller)):
        block_ids = cp.execute(lambda w: w.activate_plan(plan_id))
        return {"block_ids": block_ids}

    @app.post("/api/v1/admin/requests/{request_id}/deny")
    def deny_request(request_id: int, _admin=Depends(admin_caller)):
        cp.execute(lambda w: w.deny_request(request_id))
        return {"request_id": request_id, "status": "Rejected"}

    @app.get("/api/v1/admin/requests")
    def list_requests(_admin=Depends(admin_caller)):
        return cp.snapshot(
            lambda w: {"requests": [w.requests[r].to_dict() for r in sorted(w.requests)]}
        )

    @app.post("/api/v1/admin/nodes/{node_id}/power")
    def node_power(node_id: int, body: PowerBody, _admin=Depends(admin_caller)):
        state = cp.execute(lambda w: w.power_command(node_id, on=body.on, forced=body.forced))
        return {"node_id": node_id, "power": state.value}

    @app.post("/api/v1/admin/nodes/{node_id}/reset")
    def node_reset(node_id: int, _admin=Depends(admin_caller)):
        state = cp.execute(lambda w: w.reset_node(node_id))
        return {"node_id": node_id, "power": state.value}

    @app.get("/api/v1/admin/nodes")
    def list_nodes(_admin=Depends(admin_caller)):
        return cp.snapshot(lambda w: {"nodes": [r.to_dict() for r in w.registry.ordered()]})

    @app.post("/api/v1/admin/faults")
    def inject_fault(body: FaultBody, _admin=Depends(admin_caller)):
        fault = cp.execute(lambda w: w.inject_fault(body.node_id, body.kind, body.param))
        return fault.to_dict()

    @app.post("/api/v1/admin/tick")
    def advance(body: TickBody, _admin=Depends(admin_caller)):
        if cp.mode != "sim":
            raise errors.InvalidRequest("manual ticks are only available in sim mode")
        if body.n < 1:
            raise errors.InvalidParameter("n must be >= 1")
        evs = cp.tick(body.n)
        return {"tick": cp.snapshot(lambda w: w.tick), "events": [e.to_dict() for e in evs]}

    @app.get("/api/v1/admin/events")
    def events_since(since: int = 0, _admin=Depends(admin_caller)):
        return cp.snapshot(
            lambda w: {"events": [e.to_dict() for e in w.events if e.seq > since]}
        )

    @app.get("/api/v1/admin/telemetry")
    def telemetry(_admin=Depends(admin_caller)):
        q: queue.Queue = queue.Queue()
        cp.telemetry_subscribers.append(q)
        q.put(cp.snapshot(lambda w: cp._telemetry_frame()))

        def stream():
            try:
                while True:
                    try:
                        frame = q.get(timeout=0.5)
                    except queue.Empty:
                        # periodic comment keeps a yield point so disconnects
                        # can terminate the generator
                        yield ": keep-alive\n\n"
                        continue
                    if frame is None:
                        break
                    yield f"data: {json.dumps(frame, sort_keys=True)}\n\n"
            finally:
                if q in cp.telemetry_subscribers:
                    cp.telemetry_subscribers.remove(q)

        return StreamingResponse(stream(), media_type="text/event-stream")

    if static_dir and os.path.isdir(static_dir):
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app


def app_from_env() -> FastAPI:
    """Build the app from PUBCLUSTER_* environment variables."""
    config_path = os.environ.get("PUBCLUSTER_CONFIG")
    if not config_path:
        raise errors.InvalidParameter("PUBCLUSTER_CONFIG is not set")
    from .domain import parse_cluster_config

    with open(config_path, "rb") as fh:
        config = parse_cluster_config(fh.read())
    return create_app(
        config,
        seed=int(os.environ.get("PUBCLUSTER_SEED", "0")),
        data_dir=os.environ.get("PUBCLUSTER_DATA_DIR"),
        admin_secret=os.environ.get("PUBCLUSTER_ADMIN_SECRET"),
        mode=os.environ.get("PUBCLUSTER_MODE", "sim"),
        static_dir=os.environ.get("PUBCLUSTER_STATIC_DIR"),
    )
