/** View model: the single source of truth the UI renders from.
 *
 * Every field is a verbatim copy of an API response or a telemetry
 * frame — the model never fabricates or extrapolates state. Each pane
 * remembers the tick at which its data was fetched so the UI can flag
 * anything older than the staleness budget. */

import type {
  BlockView,
  EventView,
  JobView,
  Limits,
  NodeView,
  PlanView,
  RequestView,
  Role,
  TelemetryFrame,
} from "./api.js";
import { DEFAULT_LIMITS } from "./validation.js";

export const STALE_AFTER_TICKS = 2;

export interface Pane<T> {
  data: T | null;
  fetchedAtTick: number;
}

export interface TemperaturePoint {
  tick: number;
  node_id: number;
  temperature_c: number;
}

export class ViewModel {
  token: string | null = null;
  role: Role | null = null;
  limits: Limits = DEFAULT_LIMITS;

  /** Latest tick observed from any response or frame. */
  clockTick = 0;

  nodes: Pane<NodeView[]> = { data: null, fetchedAtTick: 0 };
  queue: Pane<RequestView[]> = { data: null, fetchedAtTick: 0 };
  plan: Pane<PlanView> = { data: null, fetchedAtTick: 0 };
  block: Pane<BlockView> = { data: null, fetchedAtTick: 0 };
  job: Pane<JobView> = { data: null, fetchedAtTick: 0 };

  /** Append-only feeds, exactly as received. */
  alarms: EventView[] = [];
  temperatureSeries: TemperaturePoint[] = [];

  private listeners: Array<() => void> = [];

  onChange(fn: () => void): void {
    this.listeners.push(fn);
  }

  private notify(): void {
    for (const fn of this.listeners) fn();
  }

  /** Advance the observed clock; panes are never mutated by time alone. */
  observeTick(tick: number): void {
    if (tick > this.clockTick) {
      this.clockTick = tick;
      this.notify();
    }
  }

  isStale<T>(pane: Pane<T>): boolean {
    return pane.data !== null && this.clockTick - pane.fetchedAtTick > STALE_AFTER_TICKS;
  }

  setSession(token: string, role: Role): void {
    this.token = token;
    this.role = role;
    this.notify();
  }

  setLimits(limits: Limits): void {
    this.limits = limits;
    this.notify();
  }

  setNodes(nodes: NodeView[]): void {
    this.nodes = { data: nodes, fetchedAtTick: this.clockTick };
    this.notify();
  }

  setQueue(requests: RequestView[]): void {
    this.queue = { data: requests, fetchedAtTick: this.clockTick };
    this.notify();
  }

  setPlan(plan: PlanView): void {
    this.plan = { data: plan, fetchedAtTick: this.clockTick };
    this.notify();
  }

  setBlock(block: BlockView): void {
    this.block = { data: block, fetchedAtTick: this.clockTick };
    this.notify();
  }

  setJob(job: JobView): void {
    this.job = { data: job, fetchedAtTick: this.clockTick };
    this.notify();
  }

  /** Ingest one telemetry frame: refresh the grid, extend the alarm
   * feed and the per-node temperature series (append-only, no
   * smoothing). */
  ingestFrame(frame: TelemetryFrame): void {
    if (frame.tick > this.clockTick) this.clockTick = frame.tick;
    this.nodes = { data: frame.nodes, fetchedAtTick: frame.tick };
    for (const alarm of frame.alarms) {
      if (!this.alarms.some((a) => a.seq === alarm.seq)) this.alarms.push(alarm);
    }
    for (const node of frame.nodes) {
      this.temperatureSeries.push({
        tick: frame.tick,
        node_id: node.node_id,
        temperature_c: node.temperature_c,
      });
    }
    this.notify();
  }

  pendingRequests(): RequestView[] {
    return (this.queue.data ?? []).filter((r) => r.status === "Pending");
  }

  /** Series for one node, in tick order, exactly as received. */
  temperatureOf(nodeId: number): TemperaturePoint[] {
    return this.temperatureSeries.filter((p) => p.node_id === nodeId);
  }
}
