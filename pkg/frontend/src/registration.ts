/** Project registration form: client-side validation (the server
 * re-validates everything) and rendering of the placement decision,
 * score trace included. */

import type { PlacementDecisionDto, ProjectDto } from "./types.js";

export interface RegistrationForm {
  name: string;
  members: string[];
  gpus: number;
  cpu: number;
  mem: number;
  pin?: string;
}

export function validateForm(form: RegistrationForm): string[] {
  const errors: string[] = [];
  if (!form.name.trim()) errors.push("project name is required");
  const members = form.members.map((m) => m.trim()).filter((m) => m.length > 0);
  if (members.length === 0) errors.push("at least one member is required");
  for (const [label, value] of [
    ["gpus", form.gpus],
    ["cpu", form.cpu],
    ["mem", form.mem],
  ] as const) {
    if (!Number.isInteger(value) || value < 0) errors.push(`${label} must be a non-negative integer`);
  }
  return errors;
}

export interface DecisionPanel {
  outcome: "Placed" | "Infeasible";
  headline: string;
  rows: Array<{ cluster: string; feasible: boolean; leftover: string }>;
}

export function decisionPanel(decision: PlacementDecisionDto): DecisionPanel {
  const rows = decision.score_trace.map((entry) => ({
    cluster: entry.cluster,
    feasible: entry.feasible,
    leftover: `${entry.leftover.gpus} GPUs / ${entry.leftover.cpu_cores} cores / ${entry.leftover.memory_gib} GiB left`,
  }));
  if (decision.outcome === "Placed") {
    return { outcome: "Placed", headline: `placed on ${decision.cluster}`, rows };
  }
  return { outcome: "Infeasible", headline: `insufficient ${decision.reason}`, rows };
}

export function registrationResult(project: ProjectDto): DecisionPanel | null {
  return project.decision === null ? null : decisionPanel(project.decision);
}
