"""Command line entry points for the site collector."""

from __future__ import annotations

import json

import click

from ..vault import VaultSecrets
from .service import Collector, CollectorConfig, SelectionCriteria


def _collector(config_path: str) -> Collector:
    config = CollectorConfig.from_file(config_path)
    return Collector(config, VaultSecrets.from_env())


@click.group()
def main():
    """Site-side collection: identify, retrieve, de-identify, stage, transfer."""


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--criteria", "criteria_path", type=click.Path(exists=True))
def run(config_path, criteria_path):
    """Run one collection cycle."""
    collector = _collector(config_path)
    criteria = SelectionCriteria.from_file(criteria_path) if criteria_path else SelectionCriteria()
    with collector:
        report = collector.run_collection_cycle(criteria)
    click.echo(json.dumps(report.as_dict(), indent=1))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--force", is_flag=True, help="ignore the configured transfer window")
def transfer(config_path, force):
    """Push staged studies to the trial endpoint and clear local staging."""
    collector = _collector(config_path)
    report = collector.transfer_nightly(force=force)
    click.echo(json.dumps(report.as_dict(), indent=1))


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def refresh(config_path):
    """Re-query outcomes, apply revisions, and collect new imaging for known clients."""
    collector = _collector(config_path)
    with collector:
        report = collector.refresh_ground_truth()
    click.echo(json.dumps(report.as_dict(), indent=1))


@main.command("import")
@click.argument("directory", type=click.Path(exists=True, file_okay=False))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
def import_(directory, config_path, manifest_path):
    """Import a directory of files using a per-file manifest."""
    collector = _collector(config_path)
    report = collector.import_directory(directory, manifest_path)
    click.echo(json.dumps(report.as_dict(), indent=1))


@main.command()
@click.argument("national_id")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--source", default="local-request", type=click.Choice(["local-request", "national-list"]))
def optout(national_id, config_path, source):
    """Opt a client out and cascade-delete anything already collected."""
    collector = _collector(config_path)
    entry = collector.opt_out(national_id, source=source)
    result = entry.cascade_report.as_dict() if entry.cascade_report else {"cascade": "nothing collected"}
    click.echo(json.dumps(result, indent=1))


@main.command("load-optout-list")
@click.argument("list_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def load_optout_list(list_file, config_path):
    """Ingest a newline-delimited national opt-out list."""
    collector = _collector(config_path)
    added = collector.vault.load_opt_out_list(list_file, source="national-list")
    click.echo(json.dumps({"added": added}))


if __name__ == "__main__":
    main()
