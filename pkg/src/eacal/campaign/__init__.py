"""End-to-end campaigns: configuration, simulation, calibration, export."""

from .config import CampaignConfig, build_config, load_config, preset_config
from .io import (
    export_report,
    export_snapshots,
    import_snapshots,
    load_report,
    read_truth,
    write_truth,
)
from .report import CampaignReport, attach_reference, run_calibration
from .simulate import GroundTruth, noise_variance_for_snr, run_simulation

__all__ = [
    "CampaignConfig",
    "CampaignReport",
    "GroundTruth",
    "attach_reference",
    "build_config",
    "export_report",
    "export_snapshots",
    "import_snapshots",
    "load_config",
    "load_report",
    "noise_variance_for_snr",
    "preset_config",
    "read_truth",
    "run_calibration",
    "run_simulation",
    "write_truth",
]
