"""Per-group GSVD precoding for MIMO wiretap channels with finite-alphabet inputs."""
from .channel import KroneckerModel, WiretapInstance
from .constellation import make_constellation
from .estimators import GSVDPrecoder, PGGSVDPrecoder, StatisticalPGGSVDPrecoder
from .matcore import GsvdFactorization, gsvd_pair
from .miengine import MonteCarlo, mutual_info

__version__ = "0.1.0"

__all__ = [
    "GSVDPrecoder",
    "PGGSVDPrecoder",
    "StatisticalPGGSVDPrecoder",
    "GsvdFactorization",
    "KroneckerModel",
    "MonteCarlo",
    "WiretapInstance",
    "gsvd_pair",
    "make_constellation",
    "mutual_info",
]
