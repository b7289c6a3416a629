import { describe, expect, it } from "vitest";

import {
  STEP_COUNT,
  buildView,
  controlsEnabled,
  displayIteration,
  initialState,
  iterationsForStep,
  reduce,
} from "../src/state.js";
import type { SessionSummary, StepRecord, StepState } from "../src/types.js";

function summaryWith(
  states: StepState[],
  status: SessionSummary["status"] = "InProgress",
): SessionSummary {
  const cursor =
    states.lastIndexOf("accepted") === -1
      ? 1
      : states.lastIndexOf("accepted") + 2;
  return {
    id: "s1",
    created_at: "2026-01-01T00:00:00+00:00",
    status,
    cursor: Math.min(cursor, 17),
    source_hash: "a".repeat(64),
    config: {},
    steps: states.map((state, i) => ({
      index: i + 1,
      name: `step-${i + 1}`,
      stage: "VascularAnalysis",
      state,
      iterations: state === "untouched" ? 0 : 1,
    })),
  };
}

function record(
  step: number,
  iteration: number,
  state: StepRecord["state"],
): StepRecord {
  return {
    step_index: step,
    iteration,
    prompt_used: `prompt ${iteration}`,
    backend_id: "mock",
    input_hash: "b".repeat(64),
    output_hash: "c".repeat(64),
    started_at: "2026-01-01T00:00:00+00:00",
    finished_at: "2026-01-01T00:00:01+00:00",
    state,
  };
}

describe("buildView", () => {
  it("renders exactly 16 slots", () => {
    const states = Array<StepState>(16).fill("untouched");
    expect(buildView(summaryWith(states)).slots).toHaveLength(STEP_COUNT);
  });

  it("rejects a malformed server payload", () => {
    const summary = summaryWith(Array<StepState>(16).fill("untouched"));
    summary.steps = summary.steps.slice(0, 12);
    expect(() => buildView(summary)).toThrow(/expected 16/);
  });

  it("shows 5 of 16 with the first five green", () => {
    const states = Array<StepState>(16).fill("untouched");
    for (let i = 0; i < 5; i++) states[i] = "accepted";
    const view = buildView(summaryWith(states));
    expect(view.progressLabel).toBe("5 / 16");
    expect(view.slots.slice(0, 5).every((s) => s.badge === "accepted")).toBe(
      true,
    );
    expect(view.cursor).toBe(6);
  });

  it("marks only the cursor step actionable", () => {
    const states = Array<StepState>(16).fill("untouched");
    states[0] = "accepted";
    const view = buildView(summaryWith(states));
    const actionable = view.slots.filter((s) => s.actionable);
    expect(actionable).toHaveLength(1);
    expect(actionable[0].index).toBe(2);
  });

  it("has no actionable steps once complete", () => {
    const states = Array<StepState>(16).fill("accepted");
    const view = buildView(summaryWith(states, "Complete"));
    expect(view.complete).toBe(true);
    expect(view.slots.some((s) => s.actionable)).toBe(false);
    expect(view.slots.every((s) => s.viewable)).toBe(true);
  });
});

describe("iteration helpers", () => {
  const records = [
    record(3, 1, "Rejected"),
    record(3, 2, "Accepted"),
    record(4, 1, "Pending"),
  ];

  it("lists a step's iterations in order", () => {
    const iters = iterationsForStep(records, 3);
    expect(iters.map((r) => r.iteration)).toEqual([1, 2]);
  });

  it("prefers the accepted iteration for display", () => {
    expect(displayIteration(records, 3)?.iteration).toBe(2);
  });

  it("falls back to the newest attempt", () => {
    expect(displayIteration(records, 4)?.iteration).toBe(1);
  });

  it("returns null when the step was never run", () => {
    expect(displayIteration(records, 9)).toBeNull();
  });
});

describe("reducer", () => {
  const states = Array<StepState>(16).fill("untouched");
  states[0] = "accepted";
  const loaded = reduce(initialState, {
    type: "session-loaded",
    summary: summaryWith(states),
    records: [record(1, 1, "Accepted")],
  });

  it("selects the cursor step after load", () => {
    expect(loaded.selectedStep).toBe(2);
  });

  it("allows jumping to a completed step", () => {
    const jumped = reduce(loaded, { type: "select-step", step: 1 });
    expect(jumped.selectedStep).toBe(1);
  });

  it("ignores jumps to untouched steps", () => {
    const ignored = reduce(loaded, { type: "select-step", step: 9 });
    expect(ignored.selectedStep).toBe(2);
  });

  it("keeps state unchanged on failure but raises a banner", () => {
    const busy = reduce(loaded, { type: "request-started" });
    const failed = reduce(busy, {
      type: "request-failed",
      message: "HTTP 502: backend unavailable",
    });
    expect(failed.banner?.kind).toBe("error");
    expect(failed.busy).toBe(false);
    expect(failed.view).toBe(loaded.view); // nothing mutated locally
  });

  it("clears the banner on dismissal", () => {
    const failed = reduce(loaded, {
      type: "request-failed",
      message: "boom",
    });
    expect(reduce(failed, { type: "dismiss-banner" }).banner).toBeNull();
  });
});

describe("controlsEnabled", () => {
  const states = Array<StepState>(16).fill("untouched");
  const loaded = reduce(initialState, {
    type: "session-loaded",
    summary: summaryWith(states),
    records: [],
  });

  it("is true on the cursor step when idle", () => {
    expect(controlsEnabled(loaded)).toBe(true);
  });

  it("is false while a request is in flight", () => {
    expect(controlsEnabled(reduce(loaded, { type: "request-started" }))).toBe(
      false,
    );
  });

  it("is false for a completed session", () => {
    const done = reduce(initialState, {
      type: "session-loaded",
      summary: summaryWith(Array<StepState>(16).fill("accepted"), "Complete"),
      records: [],
    });
    expect(controlsEnabled(done)).toBe(false);
  });
});
