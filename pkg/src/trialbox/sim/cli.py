"""Run the hospital simulator standalone."""

from __future__ import annotations

import json
import signal

import click

from .corpus import CorpusSpec
from .server import HospitalSim


@click.command()
@click.option("--pacs-port", default=11112, show_default=True)
@click.option("--clinical-port", default=11113, show_default=True)
@click.option("--receiver", default=None, help="host:port the archive pushes studies to")
@click.option("--spec", "spec_path", type=click.Path(exists=True), default=None,
              help="corpus spec JSON; defaults to a small demo corpus")
def main(pacs_port, clinical_port, receiver, spec_path):
    """Seed a synthetic corpus and serve it over the frame protocol."""
    if spec_path:
        spec = CorpusSpec(**json.loads(open(spec_path).read()))
    else:
        spec = CorpusSpec(n_clients=10, studies_per_client=1)
    receiver_addr = None
    if receiver:
        host, _, port = receiver.partition(":")
        receiver_addr = (host, int(port))
    sim = HospitalSim(spec, pacs_port=pacs_port, clinical_port=clinical_port, receiver=receiver_addr)
    sim.start()
    click.echo(
        json.dumps(
            {
                "pacs": list(sim.pacs_address),
                "clinical": list(sim.clinical_address),
                "studies": len(sim.corpus.studies),
                "episodes": len(sim.corpus.episodes),
            }
        )
    )
    signal.sigwait({signal.SIGINT, signal.SIGTERM})
    sim.stop()


if __name__ == "__main__":
    main()
