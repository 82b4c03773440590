"""Operator command line: a thin client over the HTTP API.

Every subcommand maps 1:1 to an API route; the CLI formats responses
and maps the error envelope to exit codes (0 success, 1 API/transport
error, 2 usage error) without holding any state of its own.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import requests

from . import errors
from .domain import parse_cluster_config

DEFAULT_ADDR = "127.0.0.1:8080"


def _endpoint(args) -> str:
    addr = args.endpoint or os.environ.get("PUBCLUSTER_ADDR", DEFAULT_ADDR)
    if not addr.startswith("http"):
        addr = "http://" + addr
    return addr.rstrip("/") + "/api/v1"


def _headers(args) -> dict:
    headers = {}
    token = args.token or os.environ.get("PUBCLUSTER_TOKEN")
    if token:
        headers["X-Auth-Token"] = token
    secret = getattr(args, "admin_secret", None) or os.environ.get("PUBCLUSTER_ADMIN_SECRET")
    if secret:
        headers["X-Admin-Secret"] = secret
    return headers


def _call(args, method: str, path: str, body=None):
    url = _endpoint(args) + path
    try:
        resp = requests.request(method, url, json=body, headers=_headers(args), timeout=30)
    except requests.RequestException as exc:
        print(f"transport error: {exc}", file=sys.stderr)
        raise SystemExit(1)
    if resp.status_code >= 400:
        try:
            envelope = resp.json()
        except ValueError:
            envelope = {"code": "InternalError", "message": resp.text}
        print(envelope.get("code", "InternalError"), file=sys.stderr)
        if envelope.get("message"):
            print(envelope["message"], file=sys.stderr)
        raise SystemExit(1)
    return resp.json()


def _print(args, payload, human: str = ""):
    if args.output == "json":
        print(json.dumps(payload, sort_keys=True))
    else:
        print(human or json.dumps(payload, indent=2, sort_keys=True))


def _print_events(args, events_list):
    if args.output == "json":
        for ev in events_list:
            print(json.dumps(ev, sort_keys=True))
    else:
        for ev in events_list:
            print(f"#{ev['seq']} t={ev['tick']} {ev['kind']} {json.dumps(ev['payload'], sort_keys=True)}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pubcluster", description="Public-cluster operator CLI")
    parser.add_argument("--endpoint", help="service address (default env PUBCLUSTER_ADDR)")
    parser.add_argument("--token", help="auth token (default env PUBCLUSTER_TOKEN)")
    parser.add_argument("--admin-secret", help="admin shared secret (default env PUBCLUSTER_ADMIN_SECRET)")
    parser.add_argument("--output", choices=["human", "json"], default="human")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the control-plane service")
    serve.add_argument("--config", default=os.environ.get("PUBCLUSTER_CONFIG"))
    serve.add_argument("--seed", type=int, default=int(os.environ.get("PUBCLUSTER_SEED", "0")))
    serve.add_argument("--mode", choices=["sim", "realtime"], default="sim")
    serve.add_argument("--addr", default=os.environ.get("PUBCLUSTER_ADDR", DEFAULT_ADDR))
    serve.add_argument("--data-dir", default=os.environ.get("PUBCLUSTER_DATA_DIR"))
    serve.add_argument("--static-dir", default=os.environ.get("PUBCLUSTER_STATIC_DIR"))

    node = sub.add_parser("node", help="node inspection and power control").add_subparsers(
        dest="node_command", required=True
    )
    node.add_parser("list")
    power = node.add_parser("power")
    power.add_argument("node_id", type=int)
    group = power.add_mutually_exclusive_group(required=True)
    group.add_argument("--on", action="store_true")
    group.add_argument("--off", action="store_true")
    power.add_argument("--forced", action="store_true")
    reset = node.add_parser("reset")
    reset.add_argument("node_id", type=int)

    req = sub.add_parser("request", help="pending-request queue").add_subparsers(
        dest="request_command", required=True
    )
    req.add_parser("list")
    deny = req.add_parser("deny")
    deny.add_argument("request_id", type=int)

    alloc = sub.add_parser("alloc", help="allocation planning").add_subparsers(
        dest="alloc_command", required=True
    )
    alloc.add_parser("run")
    activate = alloc.add_parser("activate")
    activate.add_argument("plan_id", type=int)

    fault = sub.add_parser("fault", help="fault injection").add_subparsers(
        dest="fault_command", required=True
    )
    inject = fault.add_parser("inject")
    inject.add_argument("node_id", type=int)
    inject.add_argument("kind", choices=["FanDegraded", "NodeFailure"])
    inject.add_argument("param", type=float, nargs="?")

    tick = sub.add_parser("tick", help="advance the simulation clock")
    tick.add_argument("n", type=int)

    ev = sub.add_parser("events", help="event log access").add_subparsers(
        dest="events_command", required=True
    )
    tail = ev.add_parser("tail")
    tail.add_argument("--since", type=int, default=0)

    token = sub.add_parser("token", help="token issuance").add_subparsers(
        dest="token_command", required=True
    )
    new = token.add_parser("new")
    new.add_argument("--role", default="Anonymous", choices=["Anonymous", "Privileged", "Admin"])

    return parser


def _serve(args):
    import uvicorn

    from .server import create_app

    if not args.config:
        print("serve requires --config or PUBCLUSTER_CONFIG", file=sys.stderr)
        raise SystemExit(2)
    with open(args.config, "rb") as fh:
        config = parse_cluster_config(fh.read())
    app = create_app(
        config,
        seed=args.seed,
        data_dir=args.data_dir,
        admin_secret=args.admin_secret or os.environ.get("PUBCLUSTER_ADMIN_SECRET"),
        mode=args.mode,
        static_dir=args.static_dir,
    )
    host, _, port = args.addr.partition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port or 8080), log_level="warning")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "serve":
            _serve(args)
        elif args.command == "node":
            if args.node_command == "list":
                data = _call(args, "GET", "/admin/nodes")
                human = "\n".join(
                    f"node {n['node_id']} {n['power']['state']} "
                    f"{n['temperature_c']:.1f}C block={n['block_id']}"
                    for n in data["nodes"]
                )
                _print(args, data, human)
            elif args.node_command == "power":
                data = _call(
                    args,
                    "POST",
                    f"/admin/nodes/{args.node_id}/power",
                    {"on": args.on, "forced": args.forced},
                )
                _print(args, data, f"node {args.node_id} -> {data['power']}")
            else:
                data = _call(args, "POST", f"/admin/nodes/{args.node_id}/reset")
                _print(args, data, f"node {args.node_id} -> {data['power']}")
        elif args.command == "request":
            if args.request_command == "list":
                data = _call(args, "GET", "/admin/requests")
                human = "\n".join(
                    f"request {r['request_id']} {r['status']} k={r['node_count']} "
                    f"min_class={r['min_class']['level']} {r['duration_hours']}h"
                    for r in data["requests"]
                )
                _print(args, data, human)
            else:
                data = _call(args, "POST", f"/admin/requests/{args.request_id}/deny")
                _print(args, data, f"request {args.request_id} denied")
        elif args.command == "alloc":
            if args.alloc_command == "run":
                data = _call(args, "POST", "/admin/allocate")
                if data.get("plan_id") is None:
                    _print(args, data, "no pending requests; empty plan")
                else:
                    _print(
                        args,
                        data,
                        f"plan {data['plan_id']} fitness={data['fitness']} "
                        f"satisfied={data['satisfied']}",
                    )
            else:
                data = _call(args, "POST", f"/admin/plans/{args.plan_id}/activate")
                _print(args, data, f"activated blocks {data['block_ids']}")
        elif args.command == "fault":
            data = _call(
                args,
                "POST",
                "/admin/faults",
                {"node_id": args.node_id, "kind": args.kind, "param": args.param},
            )
            _print(args, data, f"fault {args.kind} injected on node {args.node_id}")
        elif args.command == "tick":
            data = _call(args, "POST", "/admin/tick", {"n": args.n})
            if args.output == "json":
                _print_events(args, data["events"])
            else:
                print(f"tick -> {data['tick']} ({len(data['events'])} events)")
        elif args.command == "events":
            data = _call(args, "GET", f"/admin/events?since={args.since}")
            _print_events(args, data["events"])
        elif args.command == "token":
            if args.role == "Anonymous":
                data = _call(args, "POST", "/tokens")
            else:
                data = _call(args, "POST", "/admin/tokens", {"role": args.role})
            _print(args, data, f"{data['role']} token: {data['value']}")
        else:  # pragma: no cover - argparse enforces choices
            parser.error(f"unknown command {args.command}")
    except SystemExit:
        raise
    return 0


if __name__ == "__main__":
    sys.exit(main())
