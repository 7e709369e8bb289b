from .corpus import (
    BURN_IN_STATION,
    ClinicalEpisode,
    Corpus,
    CorpusSpec,
    DIGITISER_STATION,
    SimStudy,
    seed,
)
from .protocol import ProtocolError
from .server import HospitalSim
from .client import ClinicalClient, PacsClient, PacsUnreachable, UnknownStudy

__all__ = [
    "BURN_IN_STATION",
    "ClinicalClient",
    "ClinicalEpisode",
    "Corpus",
    "CorpusSpec",
    "DIGITISER_STATION",
    "HospitalSim",
    "PacsClient",
    "PacsUnreachable",
    "ProtocolError",
    "SimStudy",
    "UnknownStudy",
    "seed",
]
