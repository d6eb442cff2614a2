// Enabled-action conformance: for each of the 8 states, the action set the
// UI would enable must match the lifecycle rules the service enforces. The
// expectations here are written out by hand, independent of the table in
// src/model.ts.

import { describe, expect, it } from "vitest";

import {
  EXPERIMENT_STATES,
  ExperimentState,
  TRANSITIONS,
  enabledActions,
  eventLegal,
} from "../src/model.js";

type Expectation = {
  build: boolean;
  run: boolean;
  archive: boolean;
  editParams: boolean;
  upload: boolean;
  delete: boolean;
  results: boolean;
};

const EXPECTED: Record<ExperimentState, Expectation> = {
  created: {
    build: true,
    run: false,
    archive: true,
    editParams: true,
    upload: true,
    delete: true,
    results: false,
  },
  building: {
    build: false,
    run: false,
    archive: false,
    editParams: false,
    upload: false,
    delete: false,
    results: false,
  },
  built: {
    build: false,
    run: true,
    archive: true,
    editParams: true,
    upload: true,
    delete: true,
    results: false,
  },
  build_failed: {
    build: true,
    run: false,
    archive: true,
    editParams: true,
    upload: true,
    delete: true,
    results: false,
  },
  running: {
    build: false,
    run: false,
    archive: false,
    editParams: false,
    upload: false,
    delete: false,
    results: false,
  },
  completed: {
    build: false,
    run: true,
    archive: true,
    editParams: true,
    upload: true,
    delete: true,
    results: true,
  },
  run_failed: {
    build: false,
    run: true,
    archive: true,
    editParams: true,
    upload: true,
    delete: true,
    results: true,
  },
  archived: {
    build: false,
    run: false,
    archive: false,
    editParams: false,
    upload: false,
    delete: false,
    results: false,
  },
};

describe("enabled actions per state", () => {
  it("covers all eight states", () => {
    expect(EXPERIMENT_STATES).toHaveLength(8);
    expect(Object.keys(EXPECTED).sort()).toEqual([...EXPERIMENT_STATES].sort());
  });

  for (const state of EXPERIMENT_STATES) {
    it(`matches the transition table in ${state}`, () => {
      expect(enabledActions(state)).toEqual(EXPECTED[state]);
    });
  }

  it("build/run/archive enabling equals event legality from the table", () => {
    for (const state of EXPERIMENT_STATES) {
      const actions = enabledActions(state);
      expect(actions.build).toBe(eventLegal(state, "build_requested"));
      expect(actions.run).toBe(eventLegal(state, "run_requested"));
      expect(actions.archive).toBe(eventLegal(state, "archive_requested"));
    }
  });

  it("archived is absorbing: no outgoing transitions at all", () => {
    const outgoing = Object.keys(TRANSITIONS).filter((key) => key.startsWith("archived/"));
    expect(outgoing).toEqual([]);
  });

  it("no action is ever enabled while a job is in flight", () => {
    for (const state of ["building", "running"] as const) {
      expect(Object.values(enabledActions(state)).every((enabled) => !enabled)).toBe(true);
    }
  });
});
