/** DOM rendering and wiring. All state comes from the ViewModel; every
 * click handler calls the API and writes the confirmed response back
 * into the model (no optimistic updates). */

import { ApiClient, ApiError, type Role, type Session } from "./api.js";
import { STALE_AFTER_TICKS, ViewModel } from "./model.js";
import { streamTelemetry } from "./telemetry.js";
import { validateRequest, type RequestDraft } from "./validation.js";

const OVERHEAT_TRIP_C = 70;

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  if (text) node.textContent = text;
  return node;
}

export class Console {
  private api: ApiClient;
  private readonly session: Session = {};
  private stopStream: (() => void) | null = null;
  private watchedBlock: number | null = null;
  private watchedJob: number | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly model: ViewModel,
    private readonly base = "",
  ) {
    this.api = new ApiClient(base, this.session);
    model.onChange(() => this.render());
  }

  private status(msg: string, isError = false): void {
    const bar = this.root.querySelector("#status");
    if (bar) {
      bar.textContent = msg;
      bar.className = isError ? "status error" : "status";
    }
  }

  private async guard(action: () => Promise<void>): Promise<void> {
    try {
      await action();
      this.status("");
    } catch (err) {
      if (err instanceof ApiError) this.status(`${err.code}: ${err.message}`, true);
      else this.status(String(err), true);
    }
  }

  async start(): Promise<void> {
    this.model.setLimits(await this.api.limits());
    this.render();
  }

  private async signIn(role: Role, adminSecret?: string): Promise<void> {
    if (role === "Anonymous") {
      const token = await this.api.newToken();
      this.session.token = token.value;
      this.model.setSession(token.value, token.role);
    } else {
      this.session.adminSecret = adminSecret;
      const token = await new ApiClient(this.base, this.session).issueToken(role);
      this.session.token = token.value;
      this.model.setSession(token.value, token.role);
      this.openTelemetry();
      await this.refreshAdmin();
    }
  }

  private openTelemetry(): void {
    this.stopStream?.();
    this.stopStream = streamTelemetry(
      this.api.telemetryUrl(),
      this.headers(),
      (frame) => this.model.ingestFrame(frame),
    );
  }

  private headers(): Record<string, string> {
    const h: Record<string, string> = {};
    if (this.session.token) h["X-Auth-Token"] = this.session.token;
    if (this.session.adminSecret) h["X-Admin-Secret"] = this.session.adminSecret;
    return h;
  }

  private async refreshAdmin(): Promise<void> {
    const [nodes, queue] = await Promise.all([this.api.listNodes(), this.api.listRequests()]);
    this.model.setNodes(nodes.nodes);
    this.model.setQueue(queue.requests);
  }

  private async refreshWatched(): Promise<void> {
    if (this.watchedBlock !== null) {
      const block = await this.api.blockDetail(this.watchedBlock);
      this.model.setBlock(block);
      if (this.watchedJob !== null) {
        this.model.setJob(await this.api.jobStatus(this.watchedBlock, this.watchedJob));
      }
    }
  }

  // ------------------------------------------------------------- rendering

  render(): void {
    const m = this.model;
    this.root.replaceChildren();
    this.root.append(this.renderHeader());
    const main = el("main");
    if (m.role === null) {
      main.append(this.renderSignIn());
    } else {
      if (m.role === "Admin") main.append(this.renderAdmin());
      main.append(this.renderUser());
    }
    this.root.append(main, el("div", { id: "status", class: "status" }));
  }

  private staleBadge(fetchedAtTick: number): HTMLElement {
    const stale = this.model.clockTick - fetchedAtTick > STALE_AFTER_TICKS;
    return el(
      "span",
      { class: stale ? "badge stale" : "badge fresh" },
      stale ? `stale (t=${fetchedAtTick})` : "live",
    );
  }

  private renderHeader(): HTMLElement {
    const m = this.model;
    const header = el("header");
    header.append(
      el("h1", {}, "pubcluster console"),
      el("span", { class: "clock" }, `tick ${m.clockTick}`),
      el(
        "span",
        { class: "session" },
        m.role ? `${m.role} · ${m.token?.slice(0, 8)}…` : "not signed in",
      ),
    );
    return header;
  }

  private renderSignIn(): HTMLElement {
    const pane = el("section", { class: "pane", id: "signin" });
    pane.append(el("h2", {}, "Sign in"));
    const anon = el("button", { id: "signin-anon" }, "New anonymous token");
    anon.onclick = () => void this.guard(() => this.signIn("Anonymous"));
    const secret = el("input", { id: "admin-secret", placeholder: "admin secret", type: "password" });
    const admin = el("button", { id: "signin-admin" }, "Admin session");
    admin.onclick = () => void this.guard(() => this.signIn("Admin", secret.value));
    pane.append(anon, secret, admin);
    return pane;
  }

  // ---------------------------------------------------------- user panes

  private renderUser(): HTMLElement {
    const wrap = el("section", { class: "pane", id: "user" });
    wrap.append(el("h2", {}, "Lease"), this.renderRequestForm(), this.renderBlockPane());
    return wrap;
  }

  private draftFromForm(form: HTMLElement): RequestDraft {
    const num = (id: string) =>
      Number((form.querySelector(`#${id}`) as HTMLInputElement | null)?.value ?? "0");
    return {
      nodes: num("req-nodes"),
      minClass: num("req-class"),
      durationHours: num("req-hours"),
      priority: num("req-priority") || 1,
    };
  }

  private renderRequestForm(): HTMLElement {
    const m = this.model;
    const form = el("div", { class: "card", id: "request-form" });
    form.append(el("h3", {}, "Request a block"));
    const fields: Array<[string, string, string]> = [
      ["req-nodes", "nodes", "1"],
      ["req-class", "min class", "0"],
      ["req-hours", "hours", "24"],
      ["req-priority", "priority", "1"],
    ];
    for (const [id, label, value] of fields) {
      const row = el("label", {}, `${label} `);
      row.append(el("input", { id, type: "number", value }));
      form.append(row);
    }
    const errors = el("ul", { id: "request-errors", class: "errors" });
    const submit = el("button", { id: "request-submit" }, "Submit");
    submit.onclick = () => {
      const draft = this.draftFromForm(form);
      const violations = validateRequest(draft, m.role ?? "Anonymous", m.limits);
      errors.replaceChildren(
        ...violations.map((v) => el("li", { "data-code": v.code }, `${v.code}: ${v.message}`)),
      );
      if (violations.length > 0) return; // blocked client-side
      void this.guard(async () => {
        const res = await this.api.submitRequest(
          draft.nodes,
          draft.minClass,
          draft.durationHours,
          draft.priority,
        );
        this.status(`request ${res.request_id} submitted`);
        const entry = await this.api.requestStatus(res.request_id);
        if (entry.block_id !== null) this.watchedBlock = entry.block_id;
      });
    };
    form.append(errors, submit);
    return form;
  }

  private renderBlockPane(): HTMLElement {
    const m = this.model;
    const pane = el("div", { class: "card", id: "block-pane" });
    pane.append(el("h3", {}, "Block"));
    const block = m.block.data;
    if (!block) {
      pane.append(el("p", {}, "no block watched"));
      return pane;
    }
    pane.append(this.staleBadge(m.block.fetchedAtTick));
    pane.append(
      el(
        "p",
        { id: "block-summary" },
        `block ${block.block_id} · ${block.state} · nodes [${block.node_ids.join(", ")}] · ` +
          `head ${block.head_node} · expires t=${block.expires_at_tick}`,
      ),
    );
    if (block.state === "Active") {
      const width = el("input", { id: "job-width", type: "number", value: "1" });
      const dur = el("input", { id: "job-ticks", type: "number", value: "5" });
      const run = el("button", { id: "job-submit" }, "Run job");
      run.onclick = () =>
        void this.guard(async () => {
          const res = await this.api.submitJob(
            block.block_id,
            Number(width.value),
            Number(dur.value),
          );
          this.watchedJob = res.job_id;
          this.model.setJob(await this.api.jobStatus(block.block_id, res.job_id));
        });
      const release = el("button", { id: "block-release" }, "Release");
      release.onclick = () => {
        if (!window.confirm(`Release block ${block.block_id}?`)) return;
        void this.guard(async () => {
          await this.api.releaseBlock(block.block_id);
          this.model.setBlock(await this.api.blockDetail(block.block_id));
        });
      };
      pane.append(width, dur, run, release);
    }
    const job = m.job.data;
    if (job) {
      pane.append(
        el(
          "p",
          { id: "job-summary" },
          `job ${job.job_id} · ${job.state} · ${job.remaining_ticks} ticks left on ` +
            `[${job.node_ids.join(", ")}]`,
        ),
      );
    }
    return pane;
  }

  // --------------------------------------------------------- admin panes

  private renderAdmin(): HTMLElement {
    const wrap = el("section", { class: "pane", id: "admin" });
    wrap.append(
      el("h2", {}, "Operations"),
      this.renderQueue(),
      this.renderPlan(),
      this.renderGrid(),
      this.renderTelemetry(),
      this.renderAlarms(),
    );
    return wrap;
  }

  private renderQueue(): HTMLElement {
    const m = this.model;
    const card = el("div", { class: "card", id: "queue" });
    card.append(el("h3", {}, "Pending requests"), this.staleBadge(m.queue.fetchedAtTick));
    const list = el("ul");
    for (const r of m.pendingRequests()) {
      const item = el(
        "li",
        { "data-request": String(r.request_id) },
        `#${r.request_id} k=${r.node_count} class≥${r.min_class.level} ${r.duration_hours}h `,
      );
      const deny = el("button", { class: "deny" }, "deny");
      deny.onclick = () =>
        void this.guard(async () => {
          await this.api.denyRequest(r.request_id);
          await this.refreshAdmin();
        });
      item.append(deny);
      list.append(item);
    }
    const allocate = el("button", { id: "alloc-run" }, "Run allocation");
    allocate.onclick = () =>
      void this.guard(async () => {
        this.model.setPlan(await this.api.runAllocation());
      });
    card.append(list, allocate);
    return card;
  }

  private renderPlan(): HTMLElement {
    const m = this.model;
    const card = el("div", { class: "card", id: "plan" });
    card.append(el("h3", {}, "Plan preview"));
    const plan = m.plan.data;
    if (!plan || plan.plan_id === null) {
      card.append(el("p", {}, "no plan"));
      return card;
    }
    card.append(this.staleBadge(m.plan.fetchedAtTick));
    card.append(el("p", { id: "plan-fitness" }, `plan ${plan.plan_id} · fitness ${plan.fitness}`));
    const list = el("ul");
    for (const [req, nodes] of Object.entries(plan.assignments)) {
      list.append(el("li", {}, `request ${req} → nodes [${nodes.join(", ")}]`));
    }
    const activate = el("button", { id: "plan-activate" }, "Activate");
    activate.onclick = () =>
      void this.guard(async () => {
        await this.api.activatePlan(plan.plan_id as number);
        await this.refreshAdmin();
        await this.refreshWatched();
      });
    card.append(list, activate);
    return card;
  }

  private renderGrid(): HTMLElement {
    const m = this.model;
    const card = el("div", { class: "card", id: "grid" });
    card.append(el("h3", {}, "Nodes"), this.staleBadge(m.nodes.fetchedAtTick));
    const table = el("table");
    table.append(
      el("tr", {}, ""),
    );
    const head = table.rows[0];
    for (const h of ["id", "class", "power", "temp °C", "block", ""]) {
      head.append(el("th", {}, h));
    }
    for (const n of m.nodes.data ?? []) {
      const row = el("tr", {
        "data-node": String(n.node_id),
        class: n.block_id !== null ? `leased block-${n.block_id}` : "free",
      });
      row.append(
        el("td", {}, String(n.node_id)),
        el("td", {}, `${n.class.label}`),
        el("td", { class: `power ${n.power.state.toLowerCase()}` }, n.power.state),
        el("td", {}, n.temperature_c.toFixed(1)),
        el("td", {}, n.block_id === null ? "–" : String(n.block_id)),
      );
      const actions = el("td");
      const on = el("button", { class: "power-on" }, "on");
      on.onclick = () => void this.guard(() => this.api.nodePower(n.node_id, true).then(() => this.refreshAdmin()));
      const off = el("button", { class: "power-off" }, "off");
      off.onclick = () => void this.guard(() => this.api.nodePower(n.node_id, false, true).then(() => this.refreshAdmin()));
      const reset = el("button", { class: "reset" }, "reset");
      reset.onclick = () => void this.guard(() => this.api.nodeReset(n.node_id).then(() => this.refreshAdmin()));
      const fan = el("button", { class: "fault" }, "fan fault");
      fan.onclick = () =>
        void this.guard(() => this.api.injectFault(n.node_id, "FanDegraded", 0.02).then(() => undefined));
      actions.append(on, off, reset, fan);
      row.append(actions);
      table.append(row);
    }
    card.append(table);
    return card;
  }

  private renderTelemetry(): HTMLElement {
    const card = el("div", { class: "card", id: "telemetry" });
    card.append(el("h3", {}, "Temperature"));
    const canvas = el("canvas", { width: "640", height: "200" });
    card.append(canvas);
    this.drawChart(canvas);
    return card;
  }

  /** Append-only polyline per node plus the overheat threshold line. */
  private drawChart(canvas: HTMLCanvasElement): void {
    const ctx = canvas.getContext("2d");
    if (!ctx) return;
    const series = this.model.temperatureSeries;
    if (series.length === 0) return;
    const ticks = series.map((p) => p.tick);
    const tMin = Math.min(...ticks);
    const tMax = Math.max(...ticks, tMin + 1);
    const yMax = Math.max(OVERHEAT_TRIP_C + 10, ...series.map((p) => p.temperature_c));
    const x = (tick: number) => ((tick - tMin) / (tMax - tMin)) * (canvas.width - 20) + 10;
    const y = (temp: number) => canvas.height - (temp / yMax) * (canvas.height - 20) - 10;
    // threshold line
    ctx.strokeStyle = "#c0392b";
    ctx.setLineDash([4, 4]);
    ctx.beginPath();
    ctx.moveTo(0, y(OVERHEAT_TRIP_C));
    ctx.lineTo(canvas.width, y(OVERHEAT_TRIP_C));
    ctx.stroke();
    ctx.setLineDash([]);
    const byNode = new Map<number, typeof series>();
    for (const p of series) {
      const arr = byNode.get(p.node_id) ?? [];
      arr.push(p);
      byNode.set(p.node_id, arr);
    }
    const palette = ["#2980b9", "#27ae60", "#8e44ad", "#f39c12", "#16a085"];
    let i = 0;
    for (const [, points] of byNode) {
      ctx.strokeStyle = palette[i++ % palette.length];
      ctx.beginPath();
      points.forEach((p, j) => {
        if (j === 0) ctx.moveTo(x(p.tick), y(p.temperature_c));
        else ctx.lineTo(x(p.tick), y(p.temperature_c));
      });
      ctx.stroke();
    }
  }

  private renderAlarms(): HTMLElement {
    const card = el("div", { class: "card", id: "alarms" });
    card.append(el("h3", {}, "Alarms"));
    const list = el("ul");
    for (const a of this.model.alarms.slice(-20)) {
      list.append(
        el(
          "li",
          { "data-seq": String(a.seq) },
          `t=${a.tick} ${String(a.payload["kind"])} node ${String(a.payload["node_id"])}`,
        ),
      );
    }
    card.append(list);
    return card;
  }
}
