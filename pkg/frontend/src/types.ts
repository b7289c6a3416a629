/** Payload shapes returned by the angioforge service. */

export type StepState = "untouched" | "pending" | "accepted" | "rejected";

export interface StepSummary {
  index: number;
  name: string;
  stage: string;
  state: StepState;
  iterations: number;
}

export interface SessionSummary {
  id: string;
  created_at: string;
  status: "InProgress" | "Complete" | "Aborted";
  cursor: number;
  source_hash: string;
  config: Record<string, unknown>;
  steps: StepSummary[];
}

export interface StepRecord {
  step_index: number;
  iteration: number;
  prompt_used: string;
  backend_id: string;
  input_hash: string;
  output_hash: string;
  started_at: string;
  finished_at: string;
  state: "Pending" | "Accepted" | "Rejected";
}

export interface HistoryResponse {
  records: StepRecord[];
}

export interface HealthResponse {
  backend: string;
  status: string;
}

export const OUTPUT_NAMES = [
  "projection.png",
  "flow.png",
  "report.json",
  "model.stl",
] as const;

export type OutputName = (typeof OUTPUT_NAMES)[number];
