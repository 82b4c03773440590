/** Typed client for the pubcluster HTTP API (/api/v1). */

export type Role = "Anonymous" | "Privileged" | "Admin";

export interface NodeClassInfo {
  level: number;
  label: string;
}

export interface PowerInfo {
  state: string;
  remaining?: number;
}

export interface NodeView {
  node_id: number;
  class: NodeClassInfo;
  controller_id: number;
  power: PowerInfo;
  temperature_c: number;
  humidity_pct: number;
  block_id: number | null;
}

export interface TokenInfo {
  value: string;
  role: Role;
}

export interface Limits {
  max_nodes_anonymous: number;
  max_lease_hours_anonymous: number;
  max_active_blocks_per_user: number;
}

export interface RequestView {
  request_id: number;
  user_token: string;
  node_count: number;
  min_class: NodeClassInfo;
  duration_hours: number;
  priority: number;
  status: "Pending" | "Rejected" | "Allocated";
  block_id: number | null;
}

export interface PlanView {
  plan_id: number | null;
  assignments: Record<string, number[]>;
  fitness: number;
  satisfied: number[];
  generations_run: number;
}

export interface BlockView {
  block_id: number;
  owner: string;
  node_ids: number[];
  head_node: number;
  expires_at_tick: number;
  state: "Provisioning" | "Active" | "Expired" | "Released";
  request_id: number;
}

export interface JobView {
  job_id: number;
  block_id: number;
  width: number;
  duration_ticks: number;
  remaining_ticks: number;
  node_ids: number[];
  state: "Running" | "Degraded" | "Done" | "Cancelled";
}

export interface EventView {
  seq: number;
  tick: number;
  kind: string;
  payload: Record<string, unknown>;
}

export interface TelemetryFrame {
  tick: number;
  nodes: NodeView[];
  alarms: EventView[];
}

export interface ErrorEnvelope {
  code: string;
  message: string;
  details: Record<string, unknown>;
}

/** An API failure carrying the service's stable error code. */
export class ApiError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status: number,
    readonly details: Record<string, unknown> = {},
  ) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export interface Session {
  token?: string;
  adminSecret?: string;
}

export class ApiClient {
  constructor(
    private readonly base: string,
    private readonly session: Session,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private headers(): Record<string, string> {
    const h: Record<string, string> = { "Content-Type": "application/json" };
    if (this.session.token) h["X-Auth-Token"] = this.session.token;
    if (this.session.adminSecret) h["X-Admin-Secret"] = this.session.adminSecret;
    return h;
  }

  private async call<T>(method: string, path: string, body?: unknown): Promise<T> {
    const resp = await this.fetchFn(`${this.base}/api/v1${path}`, {
      method,
      headers: this.headers(),
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) {
      let envelope: ErrorEnvelope;
      try {
        envelope = (await resp.json()) as ErrorEnvelope;
      } catch {
        envelope = { code: "InternalError", message: resp.statusText, details: {} };
      }
      throw new ApiError(envelope.code, envelope.message, resp.status, envelope.details);
    }
    return (await resp.json()) as T;
  }

  // ------------------------------------------------------------ user routes

  newToken(): Promise<TokenInfo> {
    return this.call("POST", "/tokens");
  }

  limits(): Promise<Limits> {
    return this.call("GET", "/limits");
  }

  submitRequest(nodes: number, minClass: number, durationHours: number, priority = 1) {
    return this.call<{ request_id: number; status: string }>("POST", "/requests", {
      nodes,
      min_class: minClass,
      duration_hours: durationHours,
      priority,
    });
  }

  requestStatus(requestId: number): Promise<RequestView> {
    return this.call("GET", `/requests/${requestId}`);
  }

  blockDetail(blockId: number): Promise<BlockView> {
    return this.call("GET", `/blocks/${blockId}`);
  }

  submitJob(blockId: number, width: number, durationTicks: number) {
    return this.call<{ job_id: number; status: string }>("POST", `/blocks/${blockId}/jobs`, {
      width,
      duration_ticks: durationTicks,
    });
  }

  jobStatus(blockId: number, jobId: number): Promise<JobView> {
    return this.call("GET", `/blocks/${blockId}/jobs/${jobId}`);
  }

  releaseBlock(blockId: number) {
    return this.call<{ block_id: number; state: string }>("POST", `/blocks/${blockId}/release`);
  }

  // ----------------------------------------------------------- admin routes

  issueToken(role: Role): Promise<TokenInfo> {
    return this.call("POST", "/admin/tokens", { role });
  }

  runAllocation(): Promise<PlanView> {
    return this.call("POST", "/admin/allocate");
  }

  activatePlan(planId: number) {
    return this.call<{ block_ids: number[] }>("POST", `/admin/plans/${planId}/activate`);
  }

  listRequests(): Promise<{ requests: RequestView[] }> {
    return this.call("GET", "/admin/requests");
  }

  denyRequest(requestId: number) {
    return this.call<{ request_id: number; status: string }>(
      "POST",
      `/admin/requests/${requestId}/deny`,
    );
  }

  listNodes(): Promise<{ nodes: NodeView[] }> {
    return this.call("GET", "/admin/nodes");
  }

  nodePower(nodeId: number, on: boolean, forced = false) {
    return this.call<{ node_id: number; power: string }>("POST", `/admin/nodes/${nodeId}/power`, {
      on,
      forced,
    });
  }

  nodeReset(nodeId: number) {
    return this.call<{ node_id: number; power: string }>("POST", `/admin/nodes/${nodeId}/reset`);
  }

  injectFault(nodeId: number, kind: "FanDegraded" | "NodeFailure", param?: number) {
    return this.call<Record<string, unknown>>("POST", "/admin/faults", {
      node_id: nodeId,
      kind,
      param: param ?? null,
    });
  }

  tick(n: number) {
    return this.call<{ tick: number; events: EventView[] }>("POST", "/admin/tick", { n });
  }

  eventsSince(since: number): Promise<{ events: EventView[] }> {
    return this.call("GET", `/admin/events?since=${since}`);
  }

  /** URL of the server-sent telemetry stream (admin only). */
  telemetryUrl(): string {
    return `${this.base}/api/v1/admin/telemetry`;
  }
}
