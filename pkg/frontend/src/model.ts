// The dashboard's mirror of the experiment lifecycle rules plus the
// SysDef-driven parameter form model. Button enabling is derived from the
// same transition table the service enforces, so UI legality and server
// legality cannot drift apart.

import type { SysDefDoc } from "./api.js";

export const EXPERIMENT_STATES = [
  "created",
  "building",
  "built",
  "build_failed",
  "running",
  "completed",
  "run_failed",
  "archived",
] as const;

export type ExperimentState = (typeof EXPERIMENT_STATES)[number];

export type LifecycleEvent =
  | "build_requested"
  | "build_succeeded"
  | "build_failed"
  | "run_requested"
  | "run_succeeded"
  | "run_failed"
  | "build_params_changed"
  | "run_params_changed"
  | "archive_requested";

// (state, event) -> next state; pairs absent are illegal on the server.
export const TRANSITIONS: Record<string, ExperimentState> = {
  "created/build_requested": "building",
  "build_failed/build_requested": "building",
  "building/build_succeeded": "built",
  "building/build_failed": "build_failed",
  "built/run_requested": "running",
  "completed/run_requested": "running",
  "run_failed/run_requested": "running",
  "running/run_succeeded": "completed",
  "running/run_failed": "run_failed",
  "built/build_params_changed": "created",
  "completed/build_params_changed": "created",
  "run_failed/build_params_changed": "created",
  "created/run_params_changed": "created",
  "built/run_params_changed": "built",
  "completed/run_params_changed": "completed",
  "run_failed/run_params_changed": "run_failed",
  "created/archive_requested": "archived",
  "built/archive_requested": "archived",
  "build_failed/archive_requested": "archived",
  "completed/archive_requested": "archived",
  "run_failed/archive_requested": "archived",
};

export function eventLegal(state: ExperimentState, event: LifecycleEvent): boolean {
  return `${state}/${event}` in TRANSITIONS;
}

// No job in flight and not frozen: parameter edits, uploads and deletion are
// accepted by the server exactly in these states.
export const QUIESCENT_STATES: ReadonlySet<ExperimentState> = new Set([
  "created",
  "built",
  "build_failed",
  "completed",
  "run_failed",
]);

export const RESULT_STATES: ReadonlySet<ExperimentState> = new Set(["completed", "run_failed"]);

export interface EnabledActions {
  build: boolean;
  run: boolean;
  archive: boolean;
  editParams: boolean;
  upload: boolean;
  delete: boolean;
  results: boolean;
}

export function enabledActions(state: ExperimentState): EnabledActions {
  return {
    build: eventLegal(state, "build_requested"),
    run: eventLegal(state, "run_requested"),
    archive: eventLegal(state, "archive_requested"),
    editParams: QUIESCENT_STATES.has(state),
    upload: QUIESCENT_STATES.has(state),
    delete: QUIESCENT_STATES.has(state),
    results: RESULT_STATES.has(state),
  };
}

export type ParamKind = "text" | "number" | "flag" | "file";

export interface ParamControl {
  name: string;
  phase: "build" | "run";
  kind: ParamKind;
  defaultValue: string | number | boolean;
}

function controlFrom(name: string, phase: "build" | "run", raw: unknown): ParamControl {
  if (typeof raw === "boolean") {
    return { name, phase, kind: "flag", defaultValue: raw };
  }
  if (typeof raw === "number") {
    return { name, phase, kind: "number", defaultValue: raw };
  }
  if (typeof raw === "string") {
    return { name, phase, kind: "text", defaultValue: raw };
  }
  if (raw !== null && typeof raw === "object" && (raw as { is_file?: boolean }).is_file === true) {
    return { name, phase, kind: "file", defaultValue: String((raw as { value: unknown }).value) };
  }
  throw new Error(`parameter ${name}: unsupported default ${JSON.stringify(raw)}`);
}

// One form control per declared parameter, derived solely from the SysDef
// document; defaults pre-populate the form.
export function paramControls(sysdef: SysDefDoc): ParamControl[] {
  const controls: ParamControl[] = [];
  for (const [name, raw] of Object.entries(sysdef.build_parameters ?? {})) {
    controls.push(controlFrom(name, "build", raw));
  }
  for (const [name, raw] of Object.entries(sysdef.run_parameters ?? {})) {
    controls.push(controlFrom(name, "run", raw));
  }
  return controls;
}

export function coerceInput(control: ParamControl, raw: string | boolean): unknown {
  if (control.kind === "flag") {
    return Boolean(raw);
  }
  if (control.kind === "number") {
    const value = Number(raw);
    if (Number.isNaN(value)) {
      throw new Error(`parameter ${control.name} expects a number`);
    }
    return value;
  }
  return String(raw);
}
