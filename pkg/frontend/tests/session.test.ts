/** Scripted end-to-end session against a live sim-mode control plane.
 *
 * Spawns the Python service, then drives the same api-client and
 * view-model the browser UI uses through the full user+admin flow:
 * token -> request -> allocate -> activate -> job -> telemetry -> release.
 * Every request the console issues is captured and checked against the
 * documented route list, and every UI-visible transition is confirmed
 * in GET /admin/events.
 */

import { type ChildProcess, spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, type EventView, type FetchLike } from "../src/api.js";
import { ViewModel } from "../src/model.js";
import { streamTelemetry } from "../src/telemetry.js";
import { validateRequest } from "../src/validation.js";

const ADMIN_SECRET = "console-e2e";
const PORT = 18731;
const BASE = `http://127.0.0.1:${PORT}`;

const DOCUMENTED_ROUTES = [
  /^\/api\/v1\/tokens$/,
  /^\/api\/v1\/limits$/,
  /^\/api\/v1\/requests$/,
  /^\/api\/v1\/requests\/\d+$/,
  /^\/api\/v1\/blocks\/\d+$/,
  /^\/api\/v1\/blocks\/\d+\/jobs$/,
  /^\/api\/v1\/blocks\/\d+\/jobs\/\d+$/,
  /^\/api\/v1\/blocks\/\d+\/release$/,
  /^\/api\/v1\/admin\/tokens$/,
  /^\/api\/v1\/admin\/allocate$/,
  /^\/api\/v1\/admin\/plans\/\d+\/activate$/,
  /^\/api\/v1\/admin\/requests$/,
  /^\/api\/v1\/admin\/requests\/\d+\/deny$/,
  /^\/api\/v1\/admin\/nodes$/,
  /^\/api\/v1\/admin\/nodes\/\d+\/power$/,
  /^\/api\/v1\/admin\/nodes\/\d+\/reset$/,
  /^\/api\/v1\/admin\/faults$/,
  /^\/api\/v1\/admin\/tick$/,
  /^\/api\/v1\/admin\/events$/,
  /^\/api\/v1\/admin\/telemetry$/,
];

let server: ChildProcess;
const capturedPaths: string[] = [];

const recordingFetch: FetchLike = (url, init) => {
  capturedPaths.push(new URL(url).pathname);
  return fetch(url, init);
};

async function waitForServer(): Promise<void> {
  for (let i = 0; i < 100; i++) {
    try {
      const resp = await fetch(`${BASE}/api/v1/limits`);
      if (resp.ok) return;
    } catch {
      /* not up yet */
    }
    await new Promise((r) => setTimeout(r, 100));
  }
  throw new Error("control plane did not come up");
}

beforeAll(async () => {
  const dir = mkdtempSync(join(tmpdir(), "console-e2e-"));
  const config = {
    nodes: [
      { node_id: 1, class: { level: 2 }, controller_id: 1 },
      { node_id: 2, class: { level: 1 }, controller_id: 1 },
      { node_id: 3, class: { level: 1 }, controller_id: 1 },
    ],
  };
  const configPath = join(dir, "cluster.json");
  writeFileSync(configPath, JSON.stringify(config));
  server = spawn(
    "python3",
    ["-m", "uvicorn", "--factory", "pubcluster.server:app_from_env",
     "--host", "127.0.0.1", "--port", String(PORT), "--log-level", "error"],
    {
      env: {
        ...process.env,
        PUBCLUSTER_CONFIG: configPath,
        PUBCLUSTER_SEED: "2026",
        PUBCLUSTER_ADMIN_SECRET: ADMIN_SECRET,
        PUBCLUSTER_DATA_DIR: dir,
      },
      stdio: "inherit",
    },
  );
  await waitForServer();
});

afterAll(() => {
  server?.kill();
});

describe("scripted console session", () => {
  it("drives the full user+admin flow against the live service", async () => {
    const model = new ViewModel();
    const admin = new ApiClient(BASE, { adminSecret: ADMIN_SECRET }, recordingFetch);
    model.setLimits(await admin.limits());

    // user signs in and requests a block (4 nodes is blocked client-side)
    const userToken = await new ApiClient(BASE, {}, recordingFetch).newToken();
    const user = new ApiClient(BASE, { token: userToken.value }, recordingFetch);
    model.setSession(userToken.value, userToken.role);
    expect(
      validateRequest(
        { nodes: 4, minClass: 0, durationHours: 24, priority: 1 },
        "Anonymous",
        model.limits,
      ).map((v) => v.code),
    ).toEqual(["LimitNodes"]);
    const submitted = await user.submitRequest(2, 1, 24);

    // admin reviews the queue, allocates, activates
    model.setQueue((await admin.listRequests()).requests);
    expect(model.pendingRequests().map((r) => r.request_id)).toContain(submitted.request_id);
    const plan = await admin.runAllocation();
    model.setPlan(plan);
    expect(plan.plan_id).not.toBeNull();
    expect(plan.fitness).toBeGreaterThan(0);
    const { block_ids } = await admin.activatePlan(plan.plan_id as number);
    expect(block_ids).toHaveLength(1);
    const blockId = block_ids[0];

    // telemetry stream is live while the simulation ticks
    const frames: number[] = [];
    const stop = streamTelemetry(
      admin.telemetryUrl(),
      { "X-Admin-Secret": ADMIN_SECRET },
      (frame) => {
        frames.push(frame.tick);
        model.ingestFrame(frame);
      },
      recordingFetch as typeof fetch,
    );
    await admin.tick(4); // boot completes
    await new Promise((r) => setTimeout(r, 300));

    model.setBlock(await user.blockDetail(blockId));
    expect(model.block.data?.state).toBe("Active");

    // job runs to completion
    const job = await user.submitJob(blockId, 1, 2);
    await admin.tick(2);
    await new Promise((r) => setTimeout(r, 300));
    model.setJob(await user.jobStatus(blockId, job.job_id));
    expect(model.job.data?.state).toBe("Done");

    // release
    await user.releaseBlock(blockId);
    model.setBlock(await user.blockDetail(blockId));
    expect(model.block.data?.state).toBe("Released");
    stop();

    // the telemetry pane really streamed per-tick frames
    expect(frames.length).toBeGreaterThanOrEqual(4);
    expect(model.temperatureSeries.length).toBeGreaterThan(0);

    // every UI-visible transition is present in the audit feed
    const { events } = await admin.eventsSince(0);
    const kinds = events.map((e: EventView) => e.kind);
    for (const kind of [
      "TokenIssued",
      "RequestSubmitted",
      "PlanProduced",
      "BlockActivated",
      "JobSubmitted",
      "JobCompleted",
      "BlockReleased",
    ]) {
      expect(kinds).toContain(kind);
    }
    const released = events.find((e) => e.kind === "BlockReleased");
    expect(released?.payload["block_id"]).toBe(blockId);

    // the console issued only documented routes
    expect(capturedPaths.length).toBeGreaterThan(0);
    for (const path of capturedPaths) {
      expect(
        DOCUMENTED_ROUTES.some((re) => re.test(path)),
        `undocumented request: ${path}`,
      ).toBe(true);
    }
  });

  it("renders API rejections with their stable codes", async () => {
    const userToken = await new ApiClient(BASE, {}, recordingFetch).newToken();
    const user = new ApiClient(BASE, { token: userToken.value }, recordingFetch);
    await expect(user.submitRequest(4, 0, 24)).rejects.toMatchObject({
      name: "ApiError",
      code: "LimitNodes",
      status: 400,
    });
    const anon = new ApiClient(BASE, { token: userToken.value }, recordingFetch);
    await expect(anon.listNodes()).rejects.toMatchObject({ code: "Unauthorized", status: 401 });
  });

  it("admin deny removes the request from the queue and the owner sees Rejected", async () => {
    const admin = new ApiClient(BASE, { adminSecret: ADMIN_SECRET }, recordingFetch);
    const userToken = await new ApiClient(BASE, {}, recordingFetch).newToken();
    const user = new ApiClient(BASE, { token: userToken.value }, recordingFetch);
    const { request_id } = await user.submitRequest(1, 0, 4);
    await admin.denyRequest(request_id);
    const model = new ViewModel();
    model.setQueue((await admin.listRequests()).requests);
    expect(model.pendingRequests().map((r) => r.request_id)).not.toContain(request_id);
    const mine = await user.requestStatus(request_id);
    expect(mine.status).toBe("Rejected");
  });
});
