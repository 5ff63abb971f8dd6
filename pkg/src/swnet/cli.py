"""Command line front end.

Every command runs in process by default. With --server URL the same
request is POSTed to a running service instead, so scripts can switch
between local and remote execution without changing anything else.
"""

import json
import os
import sys
from typing import List, Optional

import click
import httpx
import yaml

from .experiment import StageError
from .weightgen.types import BudgetError, TilingError

_CLIENT_ERRORS = (ValueError, KeyError, FileNotFoundError, BudgetError, TilingError)


def _verbose() -> bool:
    return os.environ.get("SWNET_VERBOSE", "") not in ("", "0")


def _load_raw_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise click.ClickException(
            f"{path} must hold a mapping, got {type(raw).__name__}"
        )
    return raw


def _emit(payload) -> None:
    click.echo(json.dumps(payload, indent=2, sort_keys=True))


def _post(server: str, route: str, body: dict) -> dict:
    url = server.rstrip("/") + route
    resp = httpx.post(url, json=body, timeout=None)
    if resp.status_code != 200:
        try:
            detail = resp.json().get("detail", resp.text)
        except ValueError:
            detail = resp.text
        raise click.ClickException(f"server returned {resp.status_code}: {detail}")
    return resp.json()


def _run_local(fn, *args):
    try:
        return fn(*args)
    except StageError as err:
        raise click.ClickException(str(err))
    except _CLIENT_ERRORS as err:
        raise click.ClickException(str(err))


_config_opt = click.option(
    "-c",
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="YAML config; omitted fields take their defaults.",
)
_override_opt = click.option(
    "-o",
    "--override",
    "overrides",
    multiple=True,
    metavar="KEY=VALUE",
    help="Dotted-path config override, e.g. -o train.epochs=12.",
)
_out_root_opt = click.option(
    "--out-root",
    default="runs",
    show_default=True,
    help="Directory that receives run artifacts.",
)
_server_opt = click.option(
    "--server",
    default=None,
    metavar="URL",
    help="POST to a running service instead of executing in process.",
)


@click.group()
def main() -> None:
    """Budgeted shared-template ensembles: train, search, and inspect."""


@main.command("run")
@_config_opt
@_override_opt
@_out_root_opt
@_server_opt
def run_cmd(config_path, overrides, out_root, server) -> None:
    """Full pipeline: search, train, refine, evaluate, write artifacts."""
    raw = _load_raw_config(config_path)
    if server:
        body = {"config": raw, "overrides": list(overrides), "out_root": out_root}
        payload = _post(server, "/run", body)
        report, run_dir = payload["report"], payload["run_dir"]
    else:
        from .service.handlers import handle_run

        report, run_dir = _run_local(handle_run, raw, list(overrides), out_root)
    if _verbose():
        _emit(report)
    else:
        _emit(
            {
                "run_dir": run_dir,
                "mode": report["mode"],
                "seed": report["seed"],
                "test": report["eval"]["ensemble"],
            }
        )


@main.command("search-only")
@_config_opt
@_override_opt
@_out_root_opt
@_server_opt
def search_cmd(config_path, overrides, out_root, server) -> None:
    """Warmup training and grouping only; writes the proposed plan."""
    raw = _load_raw_config(config_path)
    if server:
        body = {"config": raw, "overrides": list(overrides), "out_root": out_root}
        payload = _post(server, "/search-only", body)
        summary, run_dir = payload["summary"], payload["run_dir"]
    else:
        from .service.handlers import handle_search

        summary, run_dir = _run_local(handle_search, raw, list(overrides), out_root)
    _emit({"run_dir": run_dir, **summary})


@main.command("eval")
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False))
@click.option("--split", default="test", show_default=True)
@_server_opt
def eval_cmd(checkpoint, split, server) -> None:
    """Evaluate a saved checkpoint on one dataset split."""
    if server:
        payload = _post(server, "/eval", {"checkpoint": checkpoint, "split": split})
        result = payload["result"]
    else:
        from .service.handlers import handle_eval

        result = _run_local(handle_eval, checkpoint, split)
    _emit(result)


@main.command("anytime")
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--budget",
    type=int,
    default=None,
    help="Compute budget in MACs; picks the best subset that fits.",
)
@_server_opt
def anytime_cmd(checkpoint, budget, server) -> None:
    """List every member subset with its cost and validation accuracy."""
    if server:
        payload = _post(
            server, "/anytime", {"checkpoint": checkpoint, "budget": budget}
        )
        entries, selected = payload["entries"], payload.get("selected")
    else:
        from .service.handlers import handle_anytime

        entries, selected = _run_local(handle_anytime, checkpoint, budget)
    out = {"entries": entries}
    if selected is not None:
        out["selected"] = selected
    _emit(out)


@main.command("interpolate")
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False))
@click.option("--member-a", type=int, default=0, show_default=True)
@click.option("--member-b", type=int, default=1, show_default=True)
@click.option("--steps", type=int, default=5, show_default=True)
@_server_opt
def interpolate_cmd(checkpoint, member_a, member_b, steps, server) -> None:
    """Evaluate weight-space blends between two members on the test split."""
    if server:
        body = {
            "checkpoint": checkpoint,
            "member_a": member_a,
            "member_b": member_b,
            "steps": steps,
        }
        payload = _post(server, "/interpolate", body)
        rows = payload["rows"]
    else:
        from .service.handlers import handle_interpolate

        rows = _run_local(handle_interpolate, checkpoint, member_a, member_b, steps)
    _emit({"rows": rows})


@main.command("predict")
@click.argument("checkpoint", type=click.Path(exists=True, dir_okay=False))
@click.option(
    "--inputs",
    "inputs_json",
    required=True,
    metavar="JSON",
    help='Feature rows as JSON, e.g. "[[0.1, -0.2]]".',
)
@click.option(
    "--members",
    "members_json",
    default=None,
    metavar="JSON",
    help="Member id list as JSON; all members when omitted.",
)
@_server_opt
def predict_cmd(checkpoint, inputs_json, members_json, server) -> None:
    """Averaged class probabilities for raw feature rows."""
    try:
        inputs = json.loads(inputs_json)
        member_ids = None if members_json is None else json.loads(members_json)
    except json.JSONDecodeError as err:
        raise click.ClickException(f"bad JSON argument: {err}")
    if server:
        body = {"checkpoint": checkpoint, "inputs": inputs, "member_ids": member_ids}
        payload = _post(server, "/predict", body)
        probs, classes = payload["probs"], payload["classes"]
    else:
        from .service.handlers import handle_predict

        probs, classes = _run_local(handle_predict, checkpoint, inputs, member_ids)
    _emit({"probs": probs, "classes": classes})


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8787, show_default=True)
def serve_cmd(host, port) -> None:
    """Start the HTTP service."""
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=host, port=port)


if __name__ == "__main__":
    main()
