import pytest

from trialbox.collector import Collector, CollectorConfig, SelectionCriteria
from trialbox.deid import Rect
from trialbox.sim import CorpusSpec, HospitalSim
from trialbox.sim.corpus import BURN_IN_STATION
from trialbox.vault import VaultSecrets


@pytest.fixture
def secrets():
    return VaultSecrets(
        vault_key="test-vault-key",
        aes_key="test-aes-key",
        hash_salt="test-hash-salt",
        trial_salt="test-trial-salt",
        audit_key="test-audit-key",
    )


class Stack:
    """A running sim + collector pair wired together on ephemeral ports."""

    def __init__(self, tmp_path, secrets, spec, fault_hook=None):
        self.tmp_path = tmp_path
        self.secrets = secrets
        self.spec = spec
        self.sim = HospitalSim(spec, pacs_port=0, clinical_port=0)
        self.sim.start()
        self.config = CollectorConfig(
            work_dir=tmp_path / "box",
            endpoint_dir=tmp_path / "endpoint",
            pacs_address=self.sim.pacs_address,
            clinical_address=self.sim.clinical_address,
            burn_in_regions={BURN_IN_STATION: [Rect(0, 0, 32, 8)]},
            burn_in_prone_stations={BURN_IN_STATION},
        )
        self.collector = Collector(self.config, secrets, fault_hook=fault_hook)
        self.collector.start()
        self.sim.set_receiver(self.collector.receiver_address)

    def restart_collector(self, fault_hook=None):
        """Simulates a process restart: fresh collector over the same dirs."""
        self.collector.stop()
        self.collector = Collector(self.config, self.secrets, fault_hook=fault_hook)
        self.collector.start()
        self.sim.set_receiver(self.collector.receiver_address)
        return self.collector

    def close(self):
        self.collector.stop()
        self.sim.stop()


@pytest.fixture
def make_stack(tmp_path, secrets):
    stacks = []

    def factory(spec=None, fault_hook=None, name=None, **kwargs):
        spec = spec or CorpusSpec(n_clients=6, studies_per_client=1, pct_positive=50, seed=11)
        root = tmp_path / (name or f"stack{len(stacks)}")
        root.mkdir(parents=True, exist_ok=True)
        stack = Stack(root, secrets, spec, fault_hook=fault_hook, **kwargs)
        stacks.append(stack)
        return stack

    yield factory
    for stack in stacks:
        stack.close()


@pytest.fixture
def default_criteria():
    return SelectionCriteria()
