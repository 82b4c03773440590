import pytest
from fastapi.testclient import TestClient

from pubcluster.server import create_app

from conftest import make_config

ADMIN_SECRET = "hunter2"


@pytest.fixture
def client(tmp_path):
    app = create_app(
        make_config(levels=(2, 1, 1)),
        seed=5,
        data_dir=str(tmp_path),
        admin_secret=ADMIN_SECRET,
        mode="sim",
    )
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c
    app.state.control_plane.shutdown()


def admin_headers():
    return {"X-Admin-Secret": ADMIN_SECRET}


def new_token(client, role="Anonymous"):
    if role == "Anonymous":
        r = client.post("/api/v1/tokens")
    else:
        r = client.post("/api/v1/admin/tokens", json={"role": role}, headers=admin_headers())
    assert r.status_code == 200, r.text
    return r.json()["value"]


def auth(token):
    return {"X-Auth-Token": token}


def tick(client, n=1):
    r = client.post("/api/v1/admin/tick", json={"n": n}, headers=admin_headers())
    assert r.status_code == 200, r.text
    return r.json()


def make_active_block(client, token, nodes=2, min_class=1):
    r = client.post(
        "/api/v1/requests",
        json={"nodes": nodes, "min_class": min_class, "duration_hours": 24},
        headers=auth(token),
    )
    assert r.status_code == 200, r.text
    plan = client.post("/api/v1/admin/allocate", headers=admin_headers()).json()
    r = client.post(f"/api/v1/admin/plans/{plan['plan_id']}/activate", headers=admin_headers())
    assert r.status_code == 200, r.text
    (block_id,) = r.json()["block_ids"]
    tick(client, 3)  # boot_ticks
    return block_id


class TestUserFlow:
    def test_token_request_block_job_release(self, client):
        token = new_token(client)
        block_id = make_active_block(client, token)
        detail = client.get(f"/api/v1/blocks/{block_id}", headers=auth(token)).json()
        assert detail["state"] == "Active"
        assert detail["head_node"] == min(detail["node_ids"])

        r = client.post(
            f"/api/v1/blocks/{block_id}/jobs",
            json={"width": 1, "duration_ticks": 2},
            headers=auth(token),
        )
        job_id = r.json()["job_id"]
        tick(client, 2)
        job = client.get(f"/api/v1/blocks/{block_id}/jobs/{job_id}", headers=auth(token)).json()
        assert job["state"] == "Done"

        r = client.post(f"/api/v1/blocks/{block_id}/release", headers=auth(token))
        assert r.status_code == 200
        assert client.get(f"/api/v1/blocks/{block_id}", headers=auth(token)).json()["state"] == "Released"

    def test_request_status_view(self, client):
        token = new_token(client)
        rid = client.post(
            "/api/v1/requests",
            json={"nodes": 1, "min_class": 0, "duration_hours": 2},
            headers=auth(token),
        ).json()["request_id"]
        r = client.get(f"/api/v1/requests/{rid}", headers=auth(token))
        assert r.json()["status"] == "Pending"

    def test_limits_endpoint_is_public(self, client):
        r = client.get("/api/v1/limits")
        assert r.status_code == 200
        body = r.json()
        assert body["max_nodes_anonymous"] == 3
        assert body["max_lease_hours_anonymous"] == 72


class TestErrorEnvelope:
    def test_admission_rejection(self, client):
        token = new_token(client)
        r = client.post(
            "/api/v1/requests",
            json={"nodes": 4, "min_class": 0, "duration_hours": 2},
            headers=auth(token),
        )
        assert r.status_code == 400
        body = r.json()
        assert set(body) == {"code", "message", "details"}
        assert body["code"] == "LimitNodes"

    def test_unknown_block_404(self, client):
        token = new_token(client)
        r = client.get("/api/v1/blocks/999", headers=auth(token))
        assert r.status_code == 404
        assert r.json()["code"] == "UnknownBlock"

    def test_missing_token_401(self, client):
        r = client.post("/api/v1/requests", json={"nodes": 1, "min_class": 0, "duration_hours": 1})
        assert r.status_code == 401
        assert r.json()["code"] == "Unauthorized"

    def test_foreign_block_403(self, client):
        owner, other = new_token(client), new_token(client)
        block_id = make_active_block(client, owner)
        r = client.get(f"/api/v1/blocks/{block_id}", headers=auth(other))
        assert r.status_code == 403
        assert r.json()["code"] == "NotOwner"
        r = client.post(f"/api/v1/blocks/{block_id}/release", headers=auth(other))
        assert r.status_code == 403


class TestAdminAuth:
    ADMIN_POSTS = [
        ("/api/v1/admin/tokens", {"role": "Anonymous"}),
        ("/api/v1/admin/allocate", None),
        ("/api/v1/admin/plans/1/activate", None),
        ("/api/v1/admin/requests/1/deny", None),
        ("/api/v1/admin/nodes/1/power", {"on": True}),
        ("/api/v1/admin/nodes/1/reset", None),
        ("/api/v1/admin/faults", {"node_id": 1, "kind": "NodeFailure"}),
        ("/api/v1/admin/tick", {"n": 1}),
    ]
    ADMIN_GETS = ["/api/v1/admin/nodes", "/api/v1/admin/requests", "/api/v1/admin/events"]

    def test_all_admin_routes_refuse_anonymous(self, client):
        token = new_token(client)
        for path, body in self.ADMIN_POSTS:
            r = client.post(path, json=body, headers=auth(token))
            assert r.status_code == 401, f"{path}: {r.status_code}"
        for path in self.ADMIN_GETS:
            assert client.get(path, headers=auth(token)).status_code == 401

    def test_admin_token_works_like_secret(self, client):
        admin = new_token(client, "Admin")
        r = client.get("/api/v1/admin/nodes", headers=auth(admin))
        assert r.status_code == 200
        assert len(r.json()["nodes"]) == 3

    def test_admin_deny_request(self, client):
        token = new_token(client)
        rid = client.post(
            "/api/v1/requests",
            json={"nodes": 1, "min_class": 0, "duration_hours": 1},
            headers=auth(token),
        ).json()["request_id"]
        r = client.post(f"/api/v1/admin/requests/{rid}/deny", headers=admin_headers())
        assert r.status_code == 200
        assert client.get(f"/api/v1/requests/{rid}", headers=auth(token)).json()["status"] == "Rejected"

    def test_power_and_fault_routes(self, client):
        r = client.post("/api/v1/admin/nodes/1/power", json={"on": True}, headers=admin_headers())
        assert r.json()["power"] == "Booting"
        r = client.post(
            "/api/v1/admin/faults",
            json={"node_id": 1, "kind": "NodeFailure"},
            headers=admin_headers(),
        )
        assert r.status_code == 200
        tick(client)
        nodes = client.get("/api/v1/admin/nodes", headers=admin_headers()).json()["nodes"]
        assert nodes[0]["power"]["state"] == "Failed"
        r = client.post("/api/v1/admin/nodes/1/reset", headers=admin_headers())
        assert r.json()["power"] == "Off"


class TestEventsFeed:
    def test_events_since_pagination(self, client):
        new_token(client)
        all_events = client.get("/api/v1/admin/events", headers=admin_headers()).json()["events"]
        assert all_events, "token issuance must be logged"
        last = all_events[-1]["seq"]
        later = client.get(
            f"/api/v1/admin/events?since={last}", headers=admin_headers()
        ).json()["events"]
        assert later == []
        new_token(client)
        later = client.get(
            f"/api/v1/admin/events?since={last}", headers=admin_headers()
        ).json()["events"]
        assert [e["kind"] for e in later] == ["TokenIssued"]

    def test_event_field_order_on_disk(self, client, tmp_path):
        new_token(client)
        lines = (tmp_path / "events.log").read_text().splitlines()
        assert lines[0].startswith('{"seq":1,"tick":0,"kind":')


class TestGatewayExclusivity:
    def test_no_per_node_service_routes(self, client):
        """All interaction flows through the one gateway API: every route sits
        under /api/v1 and none addresses a node by network identity."""
        paths = [r.path for r in client.app.router.routes if hasattr(r, "path")]
        api_paths = [p for p in paths if p.startswith("/api/")]
        assert api_paths, "gateway routes exist"
        for p in paths:
            assert not any(tok in p for tok in ("host", "address", "ssh", "proxy")), p
        # node-scoped routes exist only under the admin prefix and take
        # the registry node_id, never an address
        node_routes = [p for p in api_paths if "nodes/{node_id}" in p]
        assert node_routes and all(p.startswith("/api/v1/admin/") for p in node_routes)

    def test_tick_rejected_outside_sim_mode(self, tmp_path):
        app = create_app(make_config(levels=(1,)), seed=1, admin_secret=ADMIN_SECRET, mode="realtime")
        try:
            with TestClient(app) as c:
                r = c.post("/api/v1/admin/tick", json={"n": 1}, headers=admin_headers())
                assert r.status_code == 400
                assert r.json()["code"] == "InvalidRequest"
        finally:
            app.state.control_plane.shutdown()


class TestDeterminism:
    def script(self, client):
        token = new_token(client)
        client.post(
            "/api/v1/requests",
            json={"nodes": 2, "min_class": 0, "duration_hours": 12},
            headers=auth(token),
        )
        plan = client.post("/api/v1/admin/allocate", headers=admin_headers()).json()
        client.post(f"/api/v1/admin/plans/{plan['plan_id']}/activate", headers=admin_headers())
        tick(client, 6)

    def run_once(self, tmp_path, name):
        data_dir = tmp_path / name
        data_dir.mkdir()
        app = create_app(
            make_config(levels=(1, 1, 1)), seed=77, data_dir=str(data_dir),
            admin_secret=ADMIN_SECRET, mode="sim",
        )
        try:
            with TestClient(app) as c:
                self.script(c)
        finally:
            app.state.control_plane.shutdown()
        return (data_dir / "events.log").read_bytes()

    def test_same_seed_same_script_identical_logs(self, tmp_path):
        assert self.run_once(tmp_path, "a") == self.run_once(tmp_path, "b")

    def test_different_seed_changes_tokens(self, tmp_path):
        a = self.run_once(tmp_path, "a")
        data_dir = tmp_path / "c"
        data_dir.mkdir()
        app = create_app(
            make_config(levels=(1, 1, 1)), seed=78, data_dir=str(data_dir),
            admin_secret=ADMIN_SECRET, mode="sim",
        )
        try:
            with TestClient(app) as c:
                self.script(c)
        finally:
            app.state.control_plane.shutdown()
        assert (data_dir / "events.log").read_bytes() != a
