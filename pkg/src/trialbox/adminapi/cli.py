"""Run the admin portal API under uvicorn."""

from __future__ import annotations

import os

import click
import uvicorn

from ..collector.service import Collector, CollectorConfig
from ..curation.pipeline import CurationPipeline
from ..vault import VaultSecrets
from .app import create_app
from .auth import UserStore


@click.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--port", default=8080, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--curation-root", type=click.Path(), default=None,
              help="enable central-side cascade by pointing at a curation root")
@click.option("--static-dir", type=click.Path(exists=True), default=None,
              help="serve the portal frontend from this directory")
def main(config_path, port, host, curation_root, static_dir):
    """Serve the operator portal API (and optionally the portal itself)."""
    secrets = VaultSecrets.from_env()
    collector = Collector(CollectorConfig.from_file(config_path), secrets)
    users = UserStore(collector.work_dir / "users.json")
    admin_password = os.environ.get("TRIALBOX_ADMIN_PASSWORD")
    if admin_password:
        users.ensure_user("admin", admin_password, role="admin")
    curation = CurationPipeline(curation_root, secrets) if curation_root else None
    app = create_app(collector, users, curation=curation, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
