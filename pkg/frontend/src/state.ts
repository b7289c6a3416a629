/** Pure view-model logic: everything here derives from the last fetched
 * server state, never from local mutation (the service is the single
 * source of truth). */

import type {
  SessionSummary,
  StepRecord,
  StepState,
  StepSummary,
} from "./types.js";

export const STEP_COUNT = 16;

export interface StepSlot {
  index: number;
  name: string;
  stage: string;
  badge: StepState;
  iterations: number;
  isCursor: boolean;
  /** completed steps (and the cursor) can be opened in the review pane */
  viewable: boolean;
  /** only the cursor step offers advance/regenerate/accept/reject */
  actionable: boolean;
}

export interface UiSessionView {
  id: string;
  status: SessionSummary["status"];
  cursor: number;
  acceptedCount: number;
  progressLabel: string;
  complete: boolean;
  slots: StepSlot[];
}

export function buildView(summary: SessionSummary): UiSessionView {
  if (summary.steps.length !== STEP_COUNT) {
    throw new Error(
      `server reported ${summary.steps.length} steps; expected ${STEP_COUNT}`,
    );
  }
  const accepted = summary.steps.filter((s) => s.state === "accepted").length;
  const complete = summary.status === "Complete";
  const slots = summary.steps.map((s: StepSummary): StepSlot => {
    const isCursor = !complete && s.index === summary.cursor;
    return {
      index: s.index,
      name: s.name,
      stage: s.stage,
      badge: s.state,
      iterations: s.iterations,
      isCursor,
      viewable: s.state === "accepted" || s.iterations > 0,
      actionable: isCursor,
    };
  });
  return {
    id: summary.id,
    status: summary.status,
    cursor: summary.cursor,
    acceptedCount: accepted,
    progressLabel: `${accepted} / ${STEP_COUNT}`,
    complete,
    slots,
  };
}

/** Iterations of one step, newest last; rejected ones rendered dimmed but
 * still viewable in the timeline. */
export function iterationsForStep(
  records: StepRecord[],
  step: number,
): StepRecord[] {
  return records
    .filter((r) => r.step_index === step)
    .sort((a, b) => a.iteration - b.iteration);
}

/** The iteration the review pane shows by default: the accepted one if it
 * exists, otherwise the newest attempt. */
export function displayIteration(
  records: StepRecord[],
  step: number,
): StepRecord | null {
  const iters = iterationsForStep(records, step);
  if (iters.length === 0) return null;
  return iters.find((r) => r.state === "Accepted") ?? iters[iters.length - 1];
}

export interface Banner {
  kind: "error" | "info";
  text: string;
}

export interface UiState {
  view: UiSessionView | null;
  records: StepRecord[];
  selectedStep: number | null;
  busy: boolean;
  banner: Banner | null;
}

export const initialState: UiState = {
  view: null,
  records: [],
  selectedStep: null,
  busy: false,
  banner: null,
};

export type Action =
  | { type: "session-loaded"; summary: SessionSummary; records: StepRecord[] }
  | { type: "select-step"; step: number }
  | { type: "request-started" }
  | { type: "request-finished" }
  | { type: "request-failed"; message: string }
  | { type: "dismiss-banner" };

export function reduce(state: UiState, action: Action): UiState {
  switch (action.type) {
    case "session-loaded": {
      const view = buildView(action.summary);
      const selected =
        state.selectedStep !== null && state.selectedStep <= STEP_COUNT
          ? state.selectedStep
          : Math.min(view.cursor, STEP_COUNT);
      return {
        ...state,
        view,
        records: action.records,
        selectedStep: selected,
        banner: state.banner?.kind === "error" ? state.banner : null,
      };
    }
    case "select-step": {
      const slot = state.view?.slots[action.step - 1];
      if (!slot || !slot.viewable) return state;
      return { ...state, selectedStep: action.step };
    }
    case "request-started":
      return { ...state, busy: true, banner: null };
    case "request-finished":
      return { ...state, busy: false };
    case "request-failed":
      // non-blocking banner; the last known server state stays on screen
      return {
        ...state,
        busy: false,
        banner: { kind: "error", text: action.message },
      };
    case "dismiss-banner":
      return { ...state, banner: null };
  }
}

/** Controls are enabled only for the cursor step and only while no
 * request is in flight (client-side mirror of the server's 409 lock). */
export function controlsEnabled(state: UiState): boolean {
  if (state.busy || !state.view || state.view.complete) return false;
  return state.selectedStep === state.view.cursor;
}
