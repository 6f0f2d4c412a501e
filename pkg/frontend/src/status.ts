/** Federation status view models.
 *
 * Numbers shown on cards come verbatim from the gateway payloads; the
 * client never recomputes free or committed capacity. */

import type {
  ClusterStatusDto,
  DriftDto,
  FederationStatusDto,
  PodDto,
  ProjectStatusDto,
} from "./types.js";

export interface ClusterCard {
  id: string;
  displayName: string;
  availability: "Available" | "Unavailable";
  capacity: { gpus: number; cpu_cores: number; memory_gib: number };
  committed: { gpus: number; cpu_cores: number; memory_gib: number };
  free: { gpus: number; cpu_cores: number; memory_gib: number };
  bookableGpus: number;
  utilizationPercent: number;
  stalenessText: string;
}

export function clusterCard(dto: ClusterStatusDto): ClusterCard {
  return {
    id: dto.id,
    displayName: dto.display_name,
    availability: dto.availability,
    capacity: dto.capacity,
    committed: dto.committed,
    free: dto.free,
    bookableGpus: dto.bookable_gpus,
    utilizationPercent: Math.round(dto.bookable_utilization * 100),
    stalenessText:
      dto.staleness === null ? "never heard from" : `last heartbeat ${dto.staleness}s ago`,
  };
}

export interface ProjectRow {
  id: string;
  name: string;
  state: string;
  placement: string;
  apps: Array<{ slot: string; version: string; state: string }>;
}

export function projectRow(dto: ProjectStatusDto): ProjectRow {
  return {
    id: dto.id,
    name: dto.name,
    state: dto.state,
    placement: dto.placement ?? "-",
    apps: Object.entries(dto.apps)
      .sort(([a], [b]) => a.localeCompare(b))
      .map(([slot, app]) => ({ slot, version: app.version, state: app.state })),
  };
}

export interface StatusViewModel {
  at: number;
  stateVersion: number;
  clusters: ClusterCard[];
  projects: ProjectRow[];
}

export function statusView(dto: FederationStatusDto): StatusViewModel {
  return {
    at: dto.at,
    stateVersion: dto.state_version,
    clusters: dto.clusters.map(clusterCard),
    projects: dto.projects.map(projectRow),
  };
}

export interface DriftBadge {
  app: string;
  installed: string;
  latest: string;
  behindBy: number;
}

/** One badge per hosted app, verbatim from GET /clusters/{id}/drift;
 * only drifted apps (behind_by > 0) render highlighted. */
export function driftBadges(drift: DriftDto): DriftBadge[] {
  return Object.entries(drift)
    .sort(([a], [b]) => a.localeCompare(b))
    .map(([app, entry]) => ({
      app,
      installed: entry.installed,
      latest: entry.latest,
      behindBy: entry.behind_by,
    }));
}

export interface WorkspaceRow {
  id: string;
  user: string;
  phase: string;
  gpuChip: string | null;
}

export function workspaceRow(pod: PodDto): WorkspaceRow {
  return {
    id: pod.id,
    user: pod.user,
    phase: pod.phase,
    gpuChip: pod.gpu_grant === null ? null : `${pod.gpu_grant.gpus} GPU`,
  };
}
