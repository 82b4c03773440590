/** Client-side admission validation mirroring the service's limits.
 * The server remains authoritative; this only blocks obviously
 * inadmissible requests before they are submitted. */

import type { Limits, Role } from "./api.js";

export interface RequestDraft {
  nodes: number;
  minClass: number;
  durationHours: number;
  priority: number;
}

export interface Violation {
  field: keyof RequestDraft;
  code: string;
  message: string;
}

export const DEFAULT_LIMITS: Limits = {
  max_nodes_anonymous: 3,
  max_lease_hours_anonymous: 72,
  max_active_blocks_per_user: 1,
};

export function validateRequest(
  draft: RequestDraft,
  role: Role,
  limits: Limits = DEFAULT_LIMITS,
): Violation[] {
  const out: Violation[] = [];
  if (!Number.isInteger(draft.nodes) || draft.nodes < 1) {
    out.push({ field: "nodes", code: "InvalidRequest", message: "at least one node" });
  }
  if (!Number.isInteger(draft.durationHours) || draft.durationHours < 1) {
    out.push({ field: "durationHours", code: "InvalidRequest", message: "duration must be ≥ 1 h" });
  }
  if (draft.minClass < 0 || draft.minClass > 9) {
    out.push({ field: "minClass", code: "InvalidRequest", message: "class level is 0–9" });
  }
  if (draft.priority < 1 || draft.priority > 10) {
    out.push({ field: "priority", code: "InvalidRequest", message: "priority is 1–10" });
  }
  if (role === "Anonymous") {
    if (draft.nodes > limits.max_nodes_anonymous) {
      out.push({
        field: "nodes",
        code: "LimitNodes",
        message: `anonymous users may lease at most ${limits.max_nodes_anonymous} nodes`,
      });
    }
    if (draft.durationHours > limits.max_lease_hours_anonymous) {
      out.push({
        field: "durationHours",
        code: "LimitDuration",
        message: `anonymous leases are capped at ${limits.max_lease_hours_anonymous} h`,
      });
    }
  }
  return out;
}
