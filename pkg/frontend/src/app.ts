/** Browser entry point: mounts the status dashboard, booking timeline,
 * and project registration views onto the page and wires them to the
 * gateway API. All rendering logic lives in the view-model modules;
 * this file only touches the DOM. */

import { ApiClient, GatewayUnreachable, isError } from "./api.js";
import { conflictsAgree, liveEntries, previewBooking } from "./overlap.js";
import { Poller } from "./poller.js";
import { decisionPanel, validateForm } from "./registration.js";
import { driftBadges, statusView, workspaceRow } from "./status.js";
import { buildTimeline, snapToGrid } from "./timeline.js";
import type {
  ApiErrorDto,
  CalendarDto,
  DriftDto,
  FederationStatusDto,
  PodDto,
  ProjectDto,
} from "./types.js";

function el(tag: string, className: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function readSettings(): { baseUrl: string; token: string } {
  return {
    baseUrl: localStorage.getItem("fedplane.baseUrl") ?? "http://127.0.0.1:8080",
    token: localStorage.getItem("fedplane.token") ?? "",
  };
}

class Dashboard {
  private api: ApiClient;
  private status: FederationStatusDto | null = null;
  private calendars = new Map<string, CalendarDto>();
  private readonly poller: Poller;

  constructor(private readonly root: HTMLElement) {
    const settings = readSettings();
    this.api = new ApiClient(settings.baseUrl, settings.token);
    this.poller = new Poller(() => this.refresh());
  }

  start(): void {
    this.renderSettings();
    this.poller.start();
  }

  private async refresh(): Promise<void> {
    const response = await this.api.federationStatus();
    if (isError(response)) throw new GatewayUnreachable((response.body as ApiErrorDto).detail);
    this.status = response.body as FederationStatusDto;
    this.calendars.clear();
    for (const cluster of this.status.clusters) {
      const calendar = await this.api.calendar(cluster.id);
      if (!isError(calendar)) this.calendars.set(cluster.id, calendar.body as CalendarDto);
    }
    this.render();
  }

  private renderSettings(): void {
    const bar = el("div", "settings");
    const url = document.createElement("input");
    url.value = readSettings().baseUrl;
    url.placeholder = "gateway base URL";
    const token = document.createElement("input");
    token.value = readSettings().token;
    token.placeholder = "bearer token";
    token.type = "password";
    const apply = el("button", "", "connect");
    apply.onclick = () => {
      localStorage.setItem("fedplane.baseUrl", url.value);
      localStorage.setItem("fedplane.token", token.value);
      this.api = new ApiClient(url.value, token.value);
      void this.poller.tick();
    };
    bar.append(url, token, apply);
    document.getElementById("settings")!.replaceChildren(bar);
  }

  private render(): void {
    this.root.replaceChildren();
    const banner = this.poller.banner();
    if (banner !== null) this.root.append(el("div", "banner error", banner));
    if (this.status === null) return;
    this.root.append(this.renderStatus(), this.renderBooking(), this.renderRegistration());
  }

  private renderStatus(): HTMLElement {
    const section = el("section", "status");
    section.append(el("h2", "", "Federation"));
    const view = statusView(this.status!);
    const cards = el("div", "cards");
    for (const card of view.clusters) {
      const node = el("div", `card ${card.availability.toLowerCase()}`);
      node.append(el("h3", "", `${card.displayName} (${card.id})`));
      node.append(el("div", "availability", card.availability));
      node.append(el("div", "staleness", card.stalenessText));
      node.append(
        el(
          "div",
          "capacity",
          `free ${card.free.gpus}/${card.capacity.gpus} GPUs, ` +
            `${card.free.cpu_cores}/${card.capacity.cpu_cores} cores, ` +
            `${card.free.memory_gib}/${card.capacity.memory_gib} GiB`,
        ),
      );
      node.append(el("div", "utilization", `bookable pool in use: ${card.utilizationPercent}%`));
      void this.api.drift(card.id).then((response) => {
        if (isError(response)) return;
        const { drift } = response.body as { cluster: string; drift: DriftDto };
        const badges = el("div", "badges");
        for (const badge of driftBadges(drift)) {
          const chip = el(
            "span",
            badge.behindBy > 0 ? "badge behind" : "badge current",
            badge.behindBy > 0
              ? `${badge.app} ${badge.installed} → ${badge.latest} (behind ${badge.behindBy})`
              : `${badge.app} ${badge.installed}`,
          );
          badges.append(chip);
        }
        node.append(badges);
      });
      cards.append(node);
    }
    section.append(cards);
    const projects = el("table", "projects");
    for (const row of this.status!.projects.map((p) => p)) {
      const tr = el("tr", "");
      tr.append(el("td", "", row.id), el("td", "", row.name), el("td", "", row.state));
      tr.append(el("td", "", row.placement ?? "-"));
      projects.append(tr);
    }
    section.append(projects);
    return section;
  }

  private renderBooking(): HTMLElement {
    const section = el("section", "booking");
    section.append(el("h2", "", "Book GPUs"));
    const clusterIds = [...this.calendars.keys()];
    if (clusterIds.length === 0) {
      section.append(el("p", "", "no clusters"));
      return section;
    }
    const form = el("div", "booking-form");
    const clusterSelect = document.createElement("select");
    for (const id of clusterIds) clusterSelect.append(new Option(id, id));
    const project = document.createElement("input");
    project.placeholder = "project id";
    const gpus = document.createElement("input");
    gpus.type = "number";
    gpus.value = "1";
    const start = document.createElement("input");
    start.type = "number";
    start.placeholder = "start (s)";
    const end = document.createElement("input");
    end.type = "number";
    end.placeholder = "end (s)";
    const preview = el("div", "preview", "");
    const lanes = el("div", "lanes");
    const refreshPreview = () => {
      const calendar = this.calendars.get(clusterSelect.value);
      if (!calendar) return;
      const proposal = {
        start: snapToGrid(Number(start.value)),
        end: snapToGrid(Number(end.value)),
        gpus: Number(gpus.value),
      };
      const view = buildTimeline(
        { ...calendar, entries: liveEntries(calendar.entries) },
        proposal,
      );
      preview.textContent = view.proposed!.verdict.ok
        ? "available"
        : `conflict on [${(view.proposed!.verdict as { conflict: { start: number; end: number } }).conflict.start}, ` +
          `${(view.proposed!.verdict as { conflict: { start: number; end: number } }).conflict.end})`;
      preview.className = view.proposed!.verdict.ok ? "preview ok" : "preview conflict";
      lanes.replaceChildren();
      for (const lane of view.lanes) {
        const laneNode = el("div", "lane");
        for (const booking of lane.bookings) {
          laneNode.append(
            el(
              "span",
              "slot",
              `${booking.id}: ${booking.gpu_count}×GPU [${booking.start}, ${booking.end}) ${booking.user}`,
            ),
          );
        }
        lanes.append(laneNode);
      }
    };
    for (const input of [clusterSelect, gpus, start, end]) {
      input.addEventListener("input", refreshPreview);
      input.addEventListener("change", refreshPreview);
    }
    const submit = el("button", "", "book");
    submit.onclick = async () => {
      const calendar = this.calendars.get(clusterSelect.value);
      if (!calendar) return;
      const proposal = {
        gpus: Number(gpus.value),
        start: snapToGrid(Number(start.value)),
        end: snapToGrid(Number(end.value)),
      };
      const clientVerdict = previewBooking(
        { ...calendar, entries: liveEntries(calendar.entries) },
        proposal.gpus,
        proposal.start,
        proposal.end,
      );
      const response = await this.api.createBooking(
        project.value,
        proposal.gpus,
        proposal.start,
        proposal.end,
      );
      if (response.status === 409) {
        const error = response.body as ApiErrorDto;
        const agreed = conflictsAgree(clientVerdict, error.conflict);
        preview.textContent = error.conflict
          ? `rejected: conflict on [${error.conflict.start}, ${error.conflict.end})` +
            (agreed ? "" : " (calendar was stale, refreshing)")
          : `rejected: ${error.detail}`;
        preview.className = "preview conflict";
      } else if (isError(response)) {
        preview.textContent = `error: ${(response.body as ApiErrorDto).detail}`;
        preview.className = "preview conflict";
      } else {
        preview.textContent = "booked";
        preview.className = "preview ok";
      }
      await this.poller.tick(); // refetch calendars and re-render lanes
    };
    const pods = el("div", "workspaces");
    const showWorkspaces = el("button", "", "workspaces");
    showWorkspaces.onclick = async () => {
      const response = await this.api.workspaces(project.value);
      pods.replaceChildren(el("h3", "", "Workspaces"));
      if (isError(response)) {
        pods.append(el("div", "error", (response.body as ApiErrorDto).detail));
        return;
      }
      const { workspaces } = response.body as { workspaces: PodDto[] };
      for (const pod of workspaces) {
        const row = workspaceRow(pod);
        const line = el("div", "workspace-row", `${row.id} (${row.user}) ${row.phase}`);
        if (row.gpuChip !== null) line.append(el("span", "badge", row.gpuChip));
        pods.append(line);
      }
    };
    form.append(clusterSelect, project, gpus, start, end, submit, showWorkspaces, preview);
    section.append(form, lanes, pods);
    refreshPreview();
    return section;
  }

  private renderRegistration(): HTMLElement {
    const section = el("section", "register");
    section.append(el("h2", "", "Register project"));
    const name = document.createElement("input");
    name.placeholder = "name";
    const members = document.createElement("input");
    members.placeholder = "members (comma separated)";
    const gpus = document.createElement("input");
    gpus.type = "number";
    gpus.value = "0";
    const cpu = document.createElement("input");
    cpu.type = "number";
    cpu.value = "0";
    const mem = document.createElement("input");
    mem.type = "number";
    mem.value = "0";
    const result = el("div", "decision");
    const submit = el("button", "", "register");
    submit.onclick = async () => {
      const form = {
        name: name.value,
        members: members.value.split(","),
        gpus: Number(gpus.value),
        cpu: Number(cpu.value),
        mem: Number(mem.value),
      };
      const errors = validateForm(form);
      if (errors.length > 0) {
        result.replaceChildren(el("div", "error", errors.join("; ")));
        return; // client-side stop: no request sent
      }
      const response = await this.api.registerProject({
        name: form.name,
        members: form.members.map((m) => m.trim()).filter((m) => m.length > 0),
        request: { gpus: form.gpus, cpu_cores: form.cpu, memory_gib: form.mem },
      });
      if (isError(response)) {
        result.replaceChildren(
          el("div", "error", (response.body as ApiErrorDto).detail),
        );
        return;
      }
      const project = response.body as ProjectDto;
      const panel = project.decision ? decisionPanel(project.decision) : null;
      result.replaceChildren();
      if (panel !== null) {
        result.append(el("div", `headline ${panel.outcome.toLowerCase()}`, panel.headline));
        for (const row of panel.rows) {
          result.append(
            el(
              "div",
              row.feasible ? "trace feasible" : "trace infeasible",
              `${row.cluster}: ${row.feasible ? "fits" : "does not fit"} (${row.leftover})`,
            ),
          );
        }
      }
      await this.poller.tick();
    };
    section.append(name, members, gpus, cpu, mem, submit, result);
    return section;
  }
}

const root = document.getElementById("app");
if (root !== null) {
  new Dashboard(root).start();
}
