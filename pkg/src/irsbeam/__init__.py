"""Joint BS/IRS beamforming with phase-shift-dependent diode power."""

from .baselines import run_ao, run_ignore_psdpc, run_proposed
from .channel import ChannelGeometry, ChannelRealization, draw
from .gbd import run_gbd
from .jpabf import run_jpabf
from .model import PowerBreakdown, Solution, SystemConfig, dbm_to_watts, watts_to_dbm
from .scsi import run_scsi

__all__ = [
    "ChannelGeometry",
    "ChannelRealization",
    "PowerBreakdown",
    "Solution",
    "SystemConfig",
    "dbm_to_watts",
    "draw",
    "run_ao",
    "run_gbd",
    "run_ignore_psdpc",
    "run_jpabf",
    "run_proposed",
    "run_scsi",
    "watts_to_dbm",
]
