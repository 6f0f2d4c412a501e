"""Admin command-line interface.

Talks to a running gateway over HTTP, or operates directly on a data
directory with --offline (same endpoints, served in-process). Exit
codes: 2 validation, 3 authorization, 4 conflict, 1 anything else.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .errors import ControlPlaneError, LogCorruptionError, ScenarioError
from .scenario import parse_scenario, run_scenario

EXIT_VALIDATION = 2
EXIT_AUTHORIZATION = 3
EXIT_CONFLICT = 4

_STATUS_EXIT = {400: EXIT_VALIDATION, 401: EXIT_AUTHORIZATION, 403: EXIT_AUTHORIZATION, 409: EXIT_CONFLICT}


class ApiClient:
    """Uniform request interface over HTTP or an in-process gateway."""

    def __init__(self, base_url: str | None, token: str | None, offline_dir: str | None, as_user: str):
        if offline_dir is not None:
            from fastapi.testclient import TestClient

            from .gateway.auth import Identity, TokenTable
            from .gateway.config import GatewayConfig
            from .gateway.server import build_gateway, create_app

            config = GatewayConfig(data_dir=offline_dir, clock="live")
            gateway = build_gateway(config)
            gateway.tokens = TokenTable({"offline": Identity(as_user, admin=True)})
            self._client = TestClient(create_app(gateway))
            self._token = "offline"
            self._base = ""
        else:
            import httpx

            self._client = httpx.Client(base_url=base_url, timeout=10.0)
            self._token = token or ""
            self._base = base_url

    def request(self, method: str, path: str, body=None, params=None):
        response = self._client.request(
            method,
            path,
            json=body,
            params=params,
            headers={"Authorization": f"Bearer {self._token}"},
        )
        try:
            payload = response.json()
        except json.JSONDecodeError:
            payload = {"detail": response.text}
        return response.status_code, payload


class Context:
    def __init__(self, client: ApiClient, as_json: bool):
        self.client = client
        self.as_json = as_json

    def call(self, method: str, path: str, body=None, params=None, expect=(200, 201)):
        status, payload = self.client.request(method, path, body, params)
        if status not in expect:
            detail = payload.get("detail", payload)
            click.echo(f"error ({status}): {detail}", err=True)
            sys.exit(_STATUS_EXIT.get(status, 1))
        return payload

    def emit(self, payload, human: str | None = None):
        if self.as_json:
            click.echo(json.dumps(payload, indent=2, sort_keys=True))
        elif human is not None:
            click.echo(human)


pass_context = click.make_pass_decorator(Context)


@click.group()
@click.option("--api", envvar="FEDPLANE_API", default="http://127.0.0.1:8080", show_default=True, help="Gateway base URL.")
@click.option("--token", envvar="FEDPLANE_TOKEN", default=None, help="Bearer token.")
@click.option("--offline", is_flag=True, help="Operate directly on a data directory, no gateway needed.")
@click.option("--data-dir", envvar="FEDPLANE_DATA_DIR", default="./data", show_default=True, help="Data directory for --offline.")
@click.option("--as-user", "as_user", default="admin", show_default=True, help="Acting identity for --offline.")
@click.option("--json", "as_json", is_flag=True, help="Machine-readable output.")
@click.pass_context
def main(ctx, api, token, offline, data_dir, as_user, as_json):
    """fedplane: federation control-plane administration."""
    if ctx.invoked_subcommand in ("scenario", "serve"):
        ctx.obj = Context(None, as_json)
        return
    try:
        client = ApiClient(api, token, data_dir if offline else None, as_user)
    except LogCorruptionError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    ctx.obj = Context(client, as_json)


# ---------------------------------------------------------------- cluster

@main.group()
def cluster():
    """Manage federation clusters."""


@cluster.command("add")
@click.option("--id", "cluster_id", required=True)
@click.option("--name", default=None, help="Display name.")
@click.option("--gpus", type=int, default=0, show_default=True)
@click.option("--cpu", type=int, default=0, show_default=True)
@click.option("--mem", type=int, default=0, show_default=True, help="Memory in GiB.")
@click.option("--bookable", type=int, default=None, help="Bookable GPUs (defaults to all).")
@click.option("--app", "apps", multiple=True, help="Installed app as name:version; repeatable.")
@pass_context
def cluster_add(ctx, cluster_id, name, gpus, cpu, mem, bookable, apps):
    installed = {}
    for entry in apps:
        if ":" not in entry:
            click.echo(f"error: --app expects name:version, got {entry!r}", err=True)
            sys.exit(EXIT_VALIDATION)
        app_name, version = entry.split(":", 1)
        installed[app_name] = version
    body = ctx.call(
        "POST",
        "/clusters",
        body={
            "id": cluster_id,
            "display_name": name,
            "capacity": {"gpus": gpus, "cpu_cores": cpu, "memory_gib": mem},
            "bookable_gpus": bookable if bookable is not None else gpus,
            "installed": installed,
        },
    )
    ctx.emit(body, f"cluster {body['id']} added ({gpus} GPUs, {cpu} cores, {mem} GiB)")


@cluster.command("list")
@pass_context
def cluster_list(ctx):
    body = ctx.call("GET", "/clusters")
    lines = [
        f"{c['id']}: {c['capacity']['gpus']} GPUs, {c['capacity']['cpu_cores']} cores, "
        f"{c['capacity']['memory_gib']} GiB (bookable {c['bookable_gpus']})"
        for c in body["clusters"]
    ]
    ctx.emit(body, "\n".join(lines) if lines else "no clusters")


# ---------------------------------------------------------------- project

@main.group()
def project():
    """Register and inspect projects."""


@project.command("register")
@click.option("--name", required=True)
@click.option("--member", "members", multiple=True, required=True, help="Member user id; repeatable.")
@click.option("--gpus", type=int, default=0, show_default=True)
@click.option("--cpu", type=int, default=0, show_default=True)
@click.option("--mem", type=int, default=0, show_default=True)
@click.option("--pin", default=None, help="Pin to a specific cluster (feasibility still applies).")
@pass_context
def project_register(ctx, name, members, gpus, cpu, mem, pin):
    body = ctx.call(
        "POST",
        "/projects",
        body={
            "name": name,
            "members": list(members),
            "request": {"gpus": gpus, "cpu_cores": cpu, "memory_gib": mem},
            "pin": pin,
        },
    )
    if body["state"] == "Placed":
        human = f"project {body['id']} ({name}) placed on {body['placement']}"
    else:
        human = f"project {body['id']} ({name}) rejected: {body['decision']['reason']}"
    ctx.emit(body, human)


@project.command("list")
@pass_context
def project_list(ctx):
    body = ctx.call("GET", "/projects")
    lines = [
        f"{p['id']} {p['name']}: {p['state']}"
        + (f" on {p['placement']}" if p["placement"] else "")
        for p in body["projects"]
    ]
    ctx.emit(body, "\n".join(lines) if lines else "no projects")


# ---------------------------------------------------------------- booking

@main.group()
def booking():
    """Reserve and release GPU time."""


@booking.command("create")
@click.option("--project", required=True, help="Project id.")
@click.option("--gpus", type=int, required=True)
@click.option("--start", type=int, required=True)
@click.option("--end", type=int, required=True)
@pass_context
def booking_create(ctx, project, gpus, start, end):
    body = ctx.call(
        "POST",
        "/bookings",
        body={"project": project, "gpu_count": gpus, "start": start, "end": end},
    )
    ctx.emit(body, f"booking {body['id']}: {gpus} GPU(s) on {body['cluster']} [{start},{end})")


@booking.command("list")
@click.option("--user", default=None)
@click.option("--project", default=None)
@pass_context
def booking_list(ctx, user, project):
    params = {}
    if user:
        params["user"] = user
    if project:
        params["project"] = project
    body = ctx.call("GET", "/bookings", params=params)
    lines = [
        f"{b['id']}: {b['gpu_count']} GPU(s) on {b['cluster']} [{b['start']},{b['end']}) "
        f"{b['status']} ({b['user']})"
        for b in body["bookings"]
    ]
    ctx.emit(body, "\n".join(lines) if lines else "no bookings")


@booking.command("cancel")
@click.argument("booking_id")
@pass_context
def booking_cancel(ctx, booking_id):
    body = ctx.call("DELETE", f"/bookings/{booking_id}")
    ctx.emit(body, f"booking {booking_id} cancelled")


# ---------------------------------------------------------------- release

@main.group()
def release():
    """Publish releases and inspect drift."""


@release.command("publish")
@click.option("--app", "app_name", required=True)
@click.option("--version", required=True)
@click.option("--digest", default=None)
@pass_context
def release_publish(ctx, app_name, version, digest):
    body = ctx.call(
        "POST", "/releases", body={"app": app_name, "version": version, "digest": digest}
    )
    ctx.emit(body, f"published {app_name} {version}")


@release.command("drift")
@click.argument("cluster_id")
@pass_context
def release_drift(ctx, cluster_id):
    body = ctx.call("GET", f"/clusters/{cluster_id}/drift")
    lines = [
        f"{app}: installed {entry['installed']}, latest {entry['latest']}"
        + (f" (behind by {entry['behind_by']})" if entry["behind_by"] else "")
        for app, entry in sorted(body["drift"].items())
    ]
    ctx.emit(body, "\n".join(lines) if lines else "no hosted applications")


# ---------------------------------------------------------------- status

@main.command()
@pass_context
def status(ctx):
    """Federation overview: clusters, projects, availability."""
    body = ctx.call("GET", "/federation/status")
    clusters = body["clusters"]
    projects = body["projects"]
    lines = [f"{len(clusters)} clusters, {len(projects)} projects"]
    for entry in clusters:
        free = entry["free"]
        lines.append(
            f"  {entry['id']}: {entry['availability']}, free {free['gpus']} GPUs / "
            f"{free['cpu_cores']} cores / {free['memory_gib']} GiB"
        )
    for entry in projects:
        placement = entry["placement"] or "-"
        lines.append(f"  {entry['id']} {entry['name']}: {entry['state']} on {placement}")
    ctx.emit(body, "\n".join(lines))


# ---------------------------------------------------------------- scenario

@main.group()
def scenario():
    """Run deterministic simulator scenarios."""


@scenario.command("run")
@click.argument("scenario_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option("--trace", "trace_out", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Write the full trace to a file.")
@pass_context
def scenario_run(ctx, scenario_file, trace_out):
    try:
        spec = parse_scenario(scenario_file.read_text())
    except ScenarioError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)
    trace = run_scenario(spec)
    if trace_out is not None:
        trace_out.write_text(trace.render())
    digest_records = [r for r in trace.records if r.kind == "digest"]
    final_digest = dict(digest_records[-1].fields)["state"] if digest_records else ""
    summary = {
        "ok": trace.ok,
        "records": len(trace.records),
        "failure": trace.failure,
        "final_digest": final_digest,
    }
    if ctx.as_json:
        click.echo(json.dumps(summary, indent=2, sort_keys=True))
    else:
        counts = {}
        for record in trace.records:
            counts[record.kind] = counts.get(record.kind, 0) + 1
        click.echo(f"scenario {'ok' if trace.ok else 'FAILED'}: {len(trace.records)} records")
        for kind in sorted(counts):
            click.echo(f"  {kind}: {counts[kind]}")
        if final_digest:
            click.echo(f"final state digest: {final_digest}")
        if trace.failure:
            click.echo(trace.failure, err=True)
    sys.exit(0 if trace.ok else 1)


# ---------------------------------------------------------------- serve

@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), default=None)
def serve(config_path):
    """Start the gateway (recovers state from the data directory)."""
    from .gateway.config import load_config
    from .gateway.server import serve as serve_gateway

    try:
        config = load_config(config_path)
        serve_gateway(config)
    except LogCorruptionError as exc:
        click.echo(f"refusing to start: {exc}", err=True)
        sys.exit(1)
    except ControlPlaneError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_VALIDATION)


if __name__ == "__main__":
    main()
