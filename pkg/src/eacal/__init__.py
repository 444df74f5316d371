"""Extended-antenna modelling of an agent antenna and the nearby human body.

Simulates UWB snapshots of a LOS path plus a marked point process of
scattering points, and calibrates that model from snapshots with a greedy
maximum-likelihood search.
"""

from .ea_model import (
    ExtendedAntennaModel,
    GainSpec,
    MarkSpec,
    generate_marks,
    los_gain,
    sample_mppp,
    shape_estimate,
)
from .estimator import (
    CalibrationResult,
    GridSpec,
    SnapshotSet,
    StoppingRule,
    calibrate,
    joint_loglik,
    ls_amplitude,
    ls_mark,
    residual,
    score_candidate,
)
from .geometry import (
    AnchorSet,
    FrameSpec,
    Point2,
    aoa,
    los_delay,
    scatter_delay,
    synthetic_circle_anchors,
)
from .metrics import MagnitudeSeries, SectorStats, amr, avg_magnitude, par, sector_average
from .waveform import NoiseSpec, PulseSpec, baseband_pulse, los_vector, scatter_vector, synthesize

__version__ = "0.1.0"
