/** Wire types for the gateway HTTP/JSON API. Field names and shapes
 * mirror the server payloads exactly; views render them verbatim. */

export interface ResourceVectorDto {
  gpus: number;
  cpu_cores: number;
  memory_gib: number;
}

export interface ClusterStatusDto {
  id: string;
  display_name: string;
  availability: "Available" | "Unavailable";
  capacity: ResourceVectorDto;
  committed: ResourceVectorDto;
  free: ResourceVectorDto;
  bookable_gpus: number;
  bookable_utilization: number;
  staleness: number | null;
  installed: Record<string, string>;
}

export interface AppSlotDto {
  name: string;
  version: string;
  state: "Deploying" | "Ready";
}

export interface ProjectStatusDto {
  id: string;
  name: string;
  state: "Pending" | "Placed" | "Rejected";
  placement: string | null;
  request: ResourceVectorDto;
  apps: Record<string, AppSlotDto>;
}

export interface FederationStatusDto {
  at: number;
  state_version: number;
  clusters: ClusterStatusDto[];
  projects: ProjectStatusDto[];
}

export interface BookingDto {
  id: string;
  user: string;
  project: string;
  cluster: string;
  gpu_count: number;
  start: number;
  end: number;
  status: "Granted" | "Active" | "Expired" | "Cancelled";
}

export interface CalendarDto {
  cluster: string;
  bookable_capacity: number;
  entries: BookingDto[];
}

export interface DriftEntryDto {
  installed: string;
  latest: string;
  behind_by: number;
}

export type DriftDto = Record<string, DriftEntryDto>;

export interface ScoreEntryDto {
  cluster: string;
  feasible: boolean;
  leftover: ResourceVectorDto;
}

export interface PlacementDecisionDto {
  project: string;
  outcome: "Placed" | "Infeasible";
  cluster: string | null;
  reason: string;
  score_trace: ScoreEntryDto[];
  state_version: number;
}

export interface ProjectDto {
  id: string;
  name: string;
  members: string[];
  request: ResourceVectorDto;
  placement: string | null;
  state: string;
  decision: PlacementDecisionDto | null;
}

export interface GpuGrantDto {
  booking: string;
  gpus: number;
}

export interface PodDto {
  id: string;
  user: string;
  project: string;
  cluster: string;
  gpu_grant: GpuGrantDto | null;
  phase: "Running" | "Terminating" | "Respawned";
}

export interface ConflictDto {
  start: number;
  end: number;
  capacity: number;
  requested: number;
}

export interface ApiErrorDto {
  error: string;
  detail: string;
  violations?: string[];
  conflict?: ConflictDto;
}
