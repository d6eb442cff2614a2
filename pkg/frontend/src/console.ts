// Experiment console: status badge with 1 s polling, SysDef-driven parameter
// editing, file uploads, build/run/archive/delete actions enabled exactly as
// the server's state machine allows, result downloads and a log tail.

import { ApiClient, SysDefDoc } from "./api.js";
import { controlInput, renderFailure } from "./catalog.js";
import { clear, h } from "./dom.js";
import {
  coerceInput,
  enabledActions,
  ExperimentState,
  paramControls,
  ParamControl,
} from "./model.js";

const POLL_INTERVAL_MS = 1000;
const LOG_TAIL_LINES = 60;

interface BoundControl {
  control: ParamControl;
  input: HTMLInputElement;
  applied: unknown;
}

export class ExperimentConsole {
  readonly element: HTMLElement;
  private sysdef: SysDefDoc | null = null;
  private controls = new Map<string, BoundControl>();
  private buttons = new Map<string, HTMLButtonElement>();
  private badge!: HTMLElement;
  private sinceLabel!: HTMLElement;
  private messageLabel!: HTMLElement;
  private notice!: HTMLElement;
  private resultsList!: HTMLElement;
  private archiveSlot!: HTMLElement;
  private logPre!: HTMLElement;
  private errorSlot!: HTMLElement;
  private timer: ReturnType<typeof setInterval> | null = null;
  private lastStatus: ExperimentState | null = null;

  constructor(
    private api: ApiClient,
    readonly experimentId: string,
    private onAuthRequired: () => void = () => undefined,
  ) {
    this.element = h("div", { class: "console", "data-testid": "console" });
  }

  async mount(): Promise<void> {
    clear(this.element);
    try {
      const sessions = await this.api.sessions();
      const mine = sessions.find((s) => s.experiment_id === this.experimentId);
      if (!mine) {
        this.element.append(
          h("div", { class: "banner error", "data-testid": "api-error" }, "unknown experiment"),
        );
        return;
      }
      this.sysdef = await this.api.system(mine.system.name, mine.system.version);
    } catch (err) {
      this.element.append(renderFailure(err, this.onAuthRequired));
      return;
    }
    this.buildSkeleton(this.sysdef);
    await this.refresh();
  }

  start(): void {
    if (this.timer === null) {
      this.timer = setInterval(() => void this.refresh(), POLL_INTERVAL_MS);
    }
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  private buildSkeleton(sysdef: SysDefDoc): void {
    this.badge = h("span", { class: "badge", "data-testid": "status-badge" }, "…");
    this.sinceLabel = h("span", { class: "muted", "data-testid": "status-since" });
    this.messageLabel = h("span", { class: "message", "data-testid": "status-message" });
    this.notice = h("div", { class: "banner notice hidden", "data-testid": "rebuild-notice" });
    this.errorSlot = h("div", {});
    this.resultsList = h("ul", { class: "results", "data-testid": "results-list" });
    this.archiveSlot = h("div", { "data-testid": "archive-slot" });
    this.logPre = h("pre", { class: "log", "data-testid": "log-tail" });

    const button = (
      name: string,
      label: string,
      onClick: () => Promise<void>,
    ): HTMLButtonElement => {
      const el = h(
        "button",
        { "data-testid": `action-${name}`, onclick: () => void this.guard(onClick) },
        label,
      );
      this.buttons.set(name, el);
      return el;
    };

    const paramSection = (phase: "build" | "run") => {
      const rows: HTMLElement[] = [];
      for (const control of paramControls(sysdef).filter((c) => c.phase === phase)) {
        if (control.kind === "file") {
          const file = h("input", { type: "file", "data-testid": `file-${control.name}` });
          const upload = button(`upload-${control.name}`, `Upload ${control.name}`, async () => {
            const chosen = file.files?.[0];
            if (!chosen) throw new Error(`choose a file for ${control.name} first`);
            await this.api.uploadParameter(this.experimentId, control.name, chosen, chosen.name);
            await this.refresh();
          });
          rows.push(
            h(
              "div",
              { class: "param-row", "data-testid": `param-${control.name}` },
              h("span", {}, `${control.name} (file)`),
              file,
              upload,
            ),
          );
        } else {
          const input = controlInput(control);
          input.setAttribute("data-testid", `input-${control.name}`);
          this.controls.set(control.name, { control, input, applied: control.defaultValue });
          rows.push(
            h(
              "label",
              { class: "param-row", "data-testid": `param-${control.name}` },
              h("span", {}, control.name),
              input,
            ),
          );
        }
      }
      return h(
        "fieldset",
        { class: `params-${phase}`, "data-testid": `params-${phase}` },
        h("legend", {}, `${phase} parameters`),
        ...rows,
      );
    };

    this.element.append(
      h(
        "div",
        { class: "console-header" },
        h("h2", {}, `Experiment ${this.experimentId.slice(0, 8)}`),
        this.badge,
        this.sinceLabel,
        this.messageLabel,
      ),
      this.notice,
      this.errorSlot,
      paramSection("build"),
      paramSection("run"),
      h(
        "div",
        { class: "actions" },
        button("apply", "Apply parameters", () => this.applyParameters()),
        button("build", "Build", async () => {
          await this.api.build(this.experimentId);
          await this.refresh();
        }),
        button("run", "Run", async () => {
          await this.api.run(this.experimentId);
          await this.refresh();
        }),
        button("archive", "Archive", async () => {
          await this.api.archive(this.experimentId);
          await this.refresh();
        }),
        button("delete", "Delete", async () => {
          await this.api.deleteSession(this.experimentId);
          this.stop();
          window.location.hash = "#/";
        }),
      ),
      h("h3", {}, "Results"),
      this.resultsList,
      this.archiveSlot,
      h("h3", {}, "Log"),
      this.logPre,
    );
  }

  private async guard(action: () => Promise<void>): Promise<void> {
    clear(this.errorSlot);
    try {
      await action();
    } catch (err) {
      this.errorSlot.append(renderFailure(err, this.onAuthRequired));
    }
  }

  private async applyParameters(): Promise<void> {
    const changes: Record<string, unknown> = {};
    let buildKeyChanged = false;
    for (const bound of this.controls.values()) {
      const raw = bound.control.kind === "flag" ? bound.input.checked : bound.input.value;
      const value = coerceInput(bound.control, raw);
      if (value !== bound.applied) {
        changes[bound.control.name] = value;
        if (bound.control.phase === "build") buildKeyChanged = true;
      }
    }
    if (Object.keys(changes).length === 0) return;
    const response = await this.api.setParameters(this.experimentId, changes);
    for (const bound of this.controls.values()) {
      if (bound.control.name in changes) {
        bound.applied = changes[bound.control.name];
      }
    }
    if (buildKeyChanged && response.status === "created") {
      this.notice.textContent =
        "Build parameters changed: re-build required before the next run.";
      this.notice.classList.remove("hidden");
    }
    await this.refresh();
  }

  async refresh(): Promise<void> {
    if (!this.sysdef) return;
    let status;
    try {
      status = await this.api.status(this.experimentId);
    } catch (err) {
      clear(this.errorSlot);
      this.errorSlot.append(renderFailure(err, this.onAuthRequired));
      return;
    }
    const state = status.status as ExperimentState;
    this.badge.textContent = state;
    this.badge.setAttribute("data-state", state);
    this.sinceLabel.textContent = `since ${status.since}`;
    this.messageLabel.textContent = status.message ?? "";
    if (state !== "created" && this.lastStatus === "created") {
      // the re-build happened (or the state moved on); retire the notice
      this.notice.classList.add("hidden");
    }
    this.lastStatus = state;

    const actions = enabledActions(state);
    this.setEnabled("build", actions.build);
    this.setEnabled("run", actions.run);
    this.setEnabled("archive", actions.archive);
    this.setEnabled("delete", actions.delete);
    this.setEnabled("apply", actions.editParams);
    for (const [name, el] of this.buttons) {
      if (name.startsWith("upload-")) {
        el.disabled = !actions.upload;
      }
    }

    clear(this.resultsList);
    if (actions.results) {
      for (const name of Object.keys(this.sysdef.results)) {
        this.resultsList.append(
          h(
            "li",
            {},
            h(
              "a",
              {
                href: this.api.resultUrl(this.experimentId, name),
                download: name,
                "data-testid": `result-${name}`,
              },
              `${name} (${this.sysdef.results[name].type})`,
            ),
          ),
        );
      }
    }

    clear(this.archiveSlot);
    if (state === "archived") {
      this.archiveSlot.append(
        h(
          "a",
          { href: this.api.archiveUrl(this.experimentId), "data-testid": "archive-download" },
          "Download archive bundle",
        ),
      );
    }

    try {
      const log = await this.api.log(this.experimentId);
      const lines = log.split("\n");
      this.logPre.textContent = lines.slice(-LOG_TAIL_LINES).join("\n");
    } catch {
      // log fetch is best-effort; the badge already reflects health
    }
  }

  private setEnabled(name: string, enabled: boolean): void {
    const el = this.buttons.get(name);
    if (el) el.disabled = !enabled;
  }
}
