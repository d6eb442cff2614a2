// Parameter form model: controls derive solely from the SysDef document.

import { describe, expect, it } from "vitest";

import type { SysDefDoc } from "../src/api.js";
import { coerceInput, paramControls } from "../src/model.js";

const SYSDEF: SysDefDoc = {
  name: "demo",
  version: "1.0",
  documentation: { contact: "c", summary: "s", description: "d" },
  docker_image: "registry.invalid/demo:1.0",
  build_command: "make",
  run_command: "run",
  build_parameters: { compile_args: "-O3 -Wall" },
  run_parameters: {
    run_time_ms: 1000,
    app: { value: "demo_sw/demo_app", is_file: true },
    verbose: false,
  },
  results: { trace: { path: "out/trace.vcd", type: "vcd" } },
};

describe("paramControls", () => {
  it("creates one control per declared parameter with its kind and default", () => {
    const controls = paramControls(SYSDEF);
    const byName = Object.fromEntries(controls.map((c) => [c.name, c]));
    expect(Object.keys(byName).sort()).toEqual(["app", "compile_args", "run_time_ms", "verbose"]);
    expect(byName.compile_args).toEqual({
      name: "compile_args",
      phase: "build",
      kind: "text",
      defaultValue: "-O3 -Wall",
    });
    expect(byName.run_time_ms.kind).toBe("number");
    expect(byName.run_time_ms.defaultValue).toBe(1000);
    expect(byName.verbose.kind).toBe("flag");
    expect(byName.app.kind).toBe("file");
    expect(byName.app.defaultValue).toBe("demo_sw/demo_app");
  });

  it("separates build and run phases", () => {
    const controls = paramControls(SYSDEF);
    expect(controls.filter((c) => c.phase === "build").map((c) => c.name)).toEqual([
      "compile_args",
    ]);
    expect(controls.filter((c) => c.phase === "run")).toHaveLength(3);
  });

  it("handles systems without parameters", () => {
    expect(
      paramControls({ ...SYSDEF, build_parameters: {}, run_parameters: {} }),
    ).toEqual([]);
  });

  it("rejects malformed defaults", () => {
    expect(() =>
      paramControls({ ...SYSDEF, run_parameters: { broken: [1, 2] as unknown } }),
    ).toThrow(/broken/);
  });
});

describe("coerceInput", () => {
  const controls = Object.fromEntries(paramControls(SYSDEF).map((c) => [c.name, c]));

  it("numbers", () => {
    expect(coerceInput(controls.run_time_ms, "250")).toBe(250);
    expect(() => coerceInput(controls.run_time_ms, "fast")).toThrow(/number/);
  });

  it("flags and text pass through", () => {
    expect(coerceInput(controls.verbose, true)).toBe(true);
    expect(coerceInput(controls.compile_args, "-O0")).toBe("-O0");
  });
});
