"""Command line entry points for the central curation pipeline."""

from __future__ import annotations

import json

import click

from ..vault import VaultSecrets
from .pipeline import CurationPipeline, ExportCriteria


@click.group()
def main():
    """Central-side curation: second pseudonymisation, publication, export."""


@main.command()
@click.argument("batch", type=click.Path(exists=True, file_okay=False))
@click.option("--root", required=True, type=click.Path())
def run(batch, root):
    """Run the curation pipeline over a transferred batch directory."""
    pipeline = CurationPipeline(root, VaultSecrets.from_env())
    manifest = pipeline.run_pipeline(batch)
    click.echo(json.dumps(manifest.as_dict(), indent=1))


@main.command()
@click.option("--root", required=True, type=click.Path())
@click.option("--criteria", "criteria_path", required=True, type=click.Path(exists=True))
@click.option("--dest", required=True, type=click.Path())
@click.option("--licensee", required=True)
def export(root, criteria_path, dest, licensee):
    """Export a licensed subset of the published store."""
    pipeline = CurationPipeline(root, VaultSecrets.from_env())
    report = pipeline.export_subset(ExportCriteria.from_file(criteria_path), dest, licensee)
    click.echo(json.dumps(report.as_dict(), indent=1))


@main.command("add-licensee")
@click.argument("licensee_id")
@click.option("--root", required=True, type=click.Path())
@click.option("--name", default="")
def add_licensee(licensee_id, root, name):
    """Register a licensee so exports can be attributed to it."""
    pipeline = CurationPipeline(root, VaultSecrets.from_env())
    pipeline.register_licensee(licensee_id, name)
    click.echo(json.dumps({"registered": licensee_id}))


@main.command()
@click.option("--root", required=True, type=click.Path())
def scan(root):
    """Scan the published store for residual identifier patterns."""
    pipeline = CurationPipeline(root, VaultSecrets.from_env())
    click.echo(json.dumps(pipeline.scan_published(), indent=1))


if __name__ == "__main__":
    main()
