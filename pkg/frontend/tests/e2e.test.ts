// Headless end-to-end flow against a live Runtime Manager: the dashboard is
// mounted in jsdom, a real service subprocess serves the API (and the built
// dashboard under /ui), and the full create -> build -> run -> download flow
// is driven through the rendered DOM.

import { ChildProcess, spawn, spawnSync } from "node:child_process";
import { mkdtempSync, rmSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import * as path from "node:path";
import { afterAll, beforeAll, describe, expect, it, vi } from "vitest";

import { ApiClient } from "../src/api.js";
import { mountApp, type App } from "../src/app.js";

const REPO_ROOT = path.resolve(__dirname, "..", "..");
const PYTHON = process.env.PYTHON ?? "python3";

let workDir: string;
let endpoint: string;
let server: ChildProcess;

async function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const probe = createServer();
    probe.once("error", reject);
    probe.listen(0, "127.0.0.1", () => {
      const address = probe.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port"));
        return;
      }
      probe.close(() => resolve(address.port));
    });
  });
}

async function waitReady(url: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    try {
      const response = await fetch(`${url}/v1/systems`);
      if (response.ok) return;
    } catch {
      // not up yet
    }
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  throw new Error(`service at ${url} did not become ready`);
}

beforeAll(async () => {
  workDir = mkdtempSync(path.join(tmpdir(), "sunrise-ui-e2e-"));
  const catalogDir = path.join(workDir, "catalog");
  const generated = spawnSync(
    PYTHON,
    [path.join(REPO_ROOT, "scripts", "make_toy_catalog.py"), catalogDir],
    { encoding: "utf-8" },
  );
  if (generated.status !== 0) {
    throw new Error(`catalog generation failed: ${generated.stderr}`);
  }
  const port = await freePort();
  endpoint = `http://127.0.0.1:${port}`;
  const configPath = path.join(workDir, "service.json");
  writeFileSync(
    configPath,
    JSON.stringify({
      listen: `127.0.0.1:${port}`,
      data_dir: path.join(workDir, "data"),
      catalog_dir: catalogDir,
      ui_dir: path.join(REPO_ROOT, "frontend", "dist"),
    }),
  );
  server = spawn(PYTHON, ["-m", "sunrise.server", "--config", configPath], {
    stdio: "ignore",
  });
  await waitReady(endpoint);
});

afterAll(() => {
  server?.kill("SIGKILL");
  rmSync(workDir, { recursive: true, force: true });
});

async function waitBadge(app: App, expected: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  while (Date.now() < deadline) {
    await app.currentConsole()?.refresh();
    const badge = document.querySelector("[data-testid=status-badge]");
    if (badge?.textContent === expected) return;
    await new Promise((resolve) => setTimeout(resolve, 100));
  }
  throw new Error(
    `badge never became ${expected}; last: ` +
      document.querySelector("[data-testid=status-badge]")?.textContent,
  );
}

describe("live Runtime Manager", () => {
  it("serves the dashboard as static files under /ui", async () => {
    const page = await fetch(`${endpoint}/ui/`);
    expect(page.status).toBe(200);
    expect(await page.text()).toContain('<div id="app">');
    const script = await fetch(`${endpoint}/ui/app.js`);
    expect(script.status).toBe(200);
  });

  it("drives the full build/run/download flow through the DOM", async () => {
    document.body.innerHTML = '<div id="root"></div>';
    const root = document.getElementById("root") as HTMLElement;
    const app = mountApp(root, new ApiClient(endpoint));

    // catalog renders from the live API
    await vi.waitFor(
      () => expect(document.querySelectorAll("[data-testid=system-card]").length).toBe(2),
      { timeout: 15_000 },
    );
    // the live service passes the openapi endpoint-discovery check
    expect(document.querySelector("[data-testid=compat-error]")).toBeNull();
    const toySim = [...document.querySelectorAll("[data-testid=system-card]")].find((card) =>
      card.textContent?.includes("toy-sim"),
    )!;
    toySim.querySelector<HTMLButtonElement>("[data-testid=new-experiment]")!.click();

    // the new-experiment form carries the SysDef defaults
    await vi.waitFor(
      () => expect(document.querySelector("[data-testid=param-run_time_ms] input")).toBeTruthy(),
      { timeout: 15_000 },
    );
    const runTime = document.querySelector<HTMLInputElement>(
      "[data-testid=param-run_time_ms] input",
    )!;
    expect(runTime.value).toBe("50");
    runTime.value = "150";
    document
      .querySelector<HTMLInputElement>("[data-testid=description-input]")!
      .value = "ui e2e";
    document.querySelector<HTMLButtonElement>("[data-testid=create-experiment]")!.click();

    // console opens in CREATED with run disabled, build enabled
    await vi.waitFor(
      () => expect(document.querySelector("[data-testid=console]")).toBeTruthy(),
      { timeout: 15_000 },
    );
    await waitBadge(app, "created");
    const button = (name: string) =>
      document.querySelector<HTMLButtonElement>(`[data-testid=action-${name}]`)!;
    expect(button("run").disabled).toBe(true);
    expect(button("build").disabled).toBe(false);

    button("build").click();
    await waitBadge(app, "built");
    expect(button("run").disabled).toBe(false);
    expect(button("build").disabled).toBe(true);

    button("run").click();
    await waitBadge(app, "completed");

    // download the declared results through the rendered links
    const metricsHref = document
      .querySelector<HTMLAnchorElement>("[data-testid=result-metrics]")!
      .getAttribute("href")!;
    const metrics = await fetch(metricsHref);
    expect(metrics.status).toBe(200);
    const metricsDoc = await metrics.json();
    expect(metricsDoc.run_time_ms).toBe(150);
    expect(metricsDoc.relative_speed).toBe(1.0);

    const traceHref = document
      .querySelector<HTMLAnchorElement>("[data-testid=result-signal_trace]")!
      .getAttribute("href")!;
    const trace = await fetch(traceHref);
    expect(trace.status).toBe(200);
    expect(await trace.text()).toContain("$date");

    // log tail shows the system's own output
    expect(document.querySelector("[data-testid=log-tail]")?.textContent).toContain("run ok");

    // archive and download the frozen bundle
    button("archive").click();
    await waitBadge(app, "archived");
    const bundleHref = document
      .querySelector<HTMLAnchorElement>("[data-testid=archive-download]")!
      .getAttribute("href")!;
    const bundle = await fetch(bundleHref);
    expect(bundle.status).toBe(200);
    const magic = new Uint8Array(await bundle.arrayBuffer()).slice(0, 2);
    expect([...magic]).toEqual([0x50, 0x4b]); // ZIP

    app.stop();
  }, 120_000);

  it("reloading reconstructs the console purely from API responses", async () => {
    const api = new ApiClient(endpoint);
    const sessions = await api.sessions();
    const archived = sessions.find((s) => s.meta.status === "archived")!;

    document.body.innerHTML = '<div id="root"></div>';
    window.location.hash = `#/exp/${archived.experiment_id}`;
    const app = mountApp(document.getElementById("root") as HTMLElement, api);
    await vi.waitFor(
      () =>
        expect(document.querySelector("[data-testid=status-badge]")?.textContent).toBe(
          "archived",
        ),
      { timeout: 15_000 },
    );
    // archived is absorbing: everything disabled, bundle link present
    const buttons = document.querySelectorAll<HTMLButtonElement>("[data-testid^=action-]");
    expect([...buttons].every((b) => b.disabled)).toBe(true);
    expect(document.querySelector("[data-testid=archive-download]")).toBeTruthy();
    app.stop();
  });
});
