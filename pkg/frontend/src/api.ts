/** Thin fetch client for the gateway. 4xx responses are returned as
 * values (views render the server's verdict); only transport failures
 * throw, so callers can show a retry affordance. */

import type {
  ApiErrorDto,
  BookingDto,
  CalendarDto,
  DriftDto,
  FederationStatusDto,
  PodDto,
  ProjectDto,
  ResourceVectorDto,
} from "./types.js";

export interface ApiResponse<T> {
  status: number;
  body: T | ApiErrorDto;
}

export class GatewayUnreachable extends Error {
  constructor(cause: unknown) {
    super(`gateway unreachable: ${cause}`);
  }
}

export function isError<T>(response: ApiResponse<T>): boolean {
  return response.status >= 400;
}

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private token: string,
  ) {}

  setToken(token: string): void {
    this.token = token;
  }

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
    params?: Record<string, string>,
  ): Promise<ApiResponse<T>> {
    const url = new URL(path, this.baseUrl);
    for (const [key, value] of Object.entries(params ?? {})) {
      url.searchParams.set(key, value);
    }
    let response: Response;
    try {
      response = await fetch(url, {
        method,
        headers: {
          Authorization: `Bearer ${this.token}`,
          ...(body !== undefined ? { "Content-Type": "application/json" } : {}),
        },
        body: body !== undefined ? JSON.stringify(body) : undefined,
      });
    } catch (cause) {
      throw new GatewayUnreachable(cause);
    }
    return { status: response.status, body: await response.json() };
  }

  federationStatus(): Promise<ApiResponse<FederationStatusDto>> {
    return this.request("GET", "/federation/status");
  }

  calendar(cluster: string): Promise<ApiResponse<CalendarDto>> {
    return this.request("GET", `/clusters/${cluster}/calendar`);
  }

  drift(cluster: string): Promise<ApiResponse<{ cluster: string; drift: DriftDto }>> {
    return this.request("GET", `/clusters/${cluster}/drift`);
  }

  createBooking(
    project: string,
    gpus: number,
    start: number,
    end: number,
  ): Promise<ApiResponse<BookingDto>> {
    return this.request("POST", "/bookings", { project, gpu_count: gpus, start, end });
  }

  cancelBooking(id: string): Promise<ApiResponse<BookingDto>> {
    return this.request("DELETE", `/bookings/${id}`);
  }

  bookings(params: Record<string, string>): Promise<ApiResponse<{ bookings: BookingDto[] }>> {
    return this.request("GET", "/bookings", undefined, params);
  }

  registerProject(form: {
    name: string;
    members: string[];
    request: Partial<ResourceVectorDto>;
    pin?: string | null;
  }): Promise<ApiResponse<ProjectDto>> {
    return this.request("POST", "/projects", form);
  }

  workspaces(project: string): Promise<ApiResponse<{ workspaces: PodDto[] }>> {
    return this.request("GET", "/workspaces", undefined, { project });
  }

  spawnWorkspace(project: string, wantsGpu: boolean): Promise<ApiResponse<PodDto>> {
    return this.request("POST", "/workspaces", { project, wants_gpu: wantsGpu });
  }

  // Admin and harness controls, used by the e2e suite and demo setup.
  addCluster(spec: {
    id: string;
    capacity: Partial<ResourceVectorDto>;
    bookable_gpus?: number;
    installed?: Record<string, string>;
  }): Promise<ApiResponse<unknown>> {
    return this.request("POST", "/clusters", spec);
  }

  publishRelease(app: string, version: string): Promise<ApiResponse<unknown>> {
    return this.request("POST", "/releases", { app, version });
  }

  simAdvance(to: number): Promise<ApiResponse<{ now: number; fired: number }>> {
    return this.request("POST", "/sim/advance", { to });
  }

  simPartition(cluster: string, from: number, to: number): Promise<ApiResponse<unknown>> {
    return this.request("POST", "/sim/partition", { cluster, from, to });
  }
}
