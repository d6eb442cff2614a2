// Catalog browser: list systems, show their documentation, open the
// pre-populated parameter form, create a new experiment.

import { ApiClient, ApiError, SysDefDoc } from "./api.js";
import { clear, h } from "./dom.js";
import { coerceInput, paramControls, ParamControl } from "./model.js";

export class CatalogView {
  readonly element: HTMLElement;

  constructor(
    private api: ApiClient,
    private onCreated: (experimentId: string) => void,
    private onAuthRequired: () => void,
  ) {
    this.element = h("div", { class: "catalog", "data-testid": "catalog" });
  }

  async mount(): Promise<void> {
    clear(this.element);
    let systems;
    try {
      systems = await this.api.systems();
    } catch (err) {
      this.element.append(renderFailure(err, this.onAuthRequired));
      return;
    }
    this.element.append(h("h2", {}, "System catalog"));
    if (systems.length === 0) {
      this.element.append(
        h("p", { class: "empty", "data-testid": "catalog-empty" }, "The catalog is empty."),
      );
      return;
    }
    const cards = h("div", { class: "cards" });
    for (const system of systems) {
      cards.append(
        h(
          "div",
          { class: "card", "data-testid": "system-card" },
          h("h3", {}, `${system.name}`),
          h("p", { class: "muted" }, `version ${system.version}`),
          h("p", {}, system.summary),
          h(
            "button",
            {
              "data-testid": "new-experiment",
              onclick: () => void this.openForm(system.name, system.version),
            },
            "New experiment",
          ),
        ),
      );
    }
    this.element.append(cards, h("div", { class: "detail", "data-testid": "system-detail" }));
  }

  private async openForm(name: string, version: string): Promise<void> {
    const detail = this.element.querySelector<HTMLElement>("[data-testid=system-detail]");
    if (!detail) return;
    clear(detail);
    let sysdef: SysDefDoc;
    try {
      sysdef = await this.api.system(name, version);
    } catch (err) {
      detail.append(renderFailure(err, this.onAuthRequired));
      return;
    }
    const controls = paramControls(sysdef);
    const inputs = new Map<string, { control: ParamControl; input: HTMLInputElement }>();

    const section = (phase: "build" | "run") => {
      const rows = controls
        .filter((control) => control.phase === phase && control.kind !== "file")
        .map((control) => {
          const input = controlInput(control);
          inputs.set(control.name, { control, input });
          return h(
            "label",
            { class: "param-row", "data-testid": `param-${control.name}` },
            h("span", {}, control.name),
            input,
          );
        });
      const fileNotes = controls
        .filter((control) => control.phase === phase && control.kind === "file")
        .map((control) =>
          h(
            "p",
            { class: "muted", "data-testid": `param-${control.name}` },
            `${control.name}: file parameter, upload it from the experiment console ` +
              `(default: ${control.defaultValue})`,
          ),
        );
      return h(
        "fieldset",
        { class: `params-${phase}` },
        h("legend", {}, `${phase} parameters`),
        ...rows,
        ...fileNotes,
      );
    };

    const description = h("input", {
      type: "text",
      placeholder: "What is this experiment for?",
      "data-testid": "description-input",
    });
    const errorSlot = h("div", {});
    detail.append(
      h("h3", {}, `${sysdef.name} ${sysdef.version}`),
      h("p", {}, sysdef.documentation.description),
      h("p", { class: "muted" }, `contact: ${sysdef.documentation.contact}`),
      section("build"),
      section("run"),
      h("label", { class: "param-row" }, h("span", {}, "description"), description),
      h(
        "button",
        {
          "data-testid": "create-experiment",
          onclick: () => void submit(),
        },
        "Create experiment",
      ),
      errorSlot,
    );

    const api = this.api;
    const onCreated = this.onCreated;
    async function submit(): Promise<void> {
      const build: Record<string, unknown> = {};
      const run: Record<string, unknown> = {};
      try {
        for (const { control, input } of inputs.values()) {
          const raw = control.kind === "flag" ? input.checked : input.value;
          const value = coerceInput(control, raw);
          (control.phase === "build" ? build : run)[control.name] = value;
        }
        const id = await api.createSession(
          { name: sysdef.name, version: sysdef.version },
          build,
          run,
          description.value,
        );
        onCreated(id);
      } catch (err) {
        clear(errorSlot);
        errorSlot.append(renderFailure(err, () => undefined));
      }
    }
  }
}

export function controlInput(control: ParamControl): HTMLInputElement {
  if (control.kind === "flag") {
    const input = h("input", { type: "checkbox" });
    input.checked = Boolean(control.defaultValue);
    return input;
  }
  const input = h("input", {
    type: control.kind === "number" ? "number" : "text",
  });
  input.value = String(control.defaultValue);
  return input;
}

export function renderFailure(err: unknown, onAuthRequired: () => void): HTMLElement {
  if (err instanceof ApiError) {
    if (err.status === 401) {
      onAuthRequired();
      return h(
        "div",
        { class: "banner error", "data-testid": "auth-prompt" },
        "Authentication required: set the API token above.",
      );
    }
    return h("div", { class: "banner error", "data-testid": "api-error" }, err.render());
  }
  return h(
    "div",
    { class: "banner error", "data-testid": "connection-error" },
    "Cannot reach the Runtime Manager.",
  );
}
