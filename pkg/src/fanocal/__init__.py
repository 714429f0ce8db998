"""Self-calibration of linear photodetectors from Fano-factor lines, and
photon-statistics reconstruction from no-click probabilities."""

from .calibration import (CalibrationFit, FanoPoint, distribution_fidelity, fit_fano_line,
                          photoelectron_bins, rebin_to_photoelectrons, shot_statistics)
from .config import ExperimentConfig, load_config, parse_config
from .detection import (DetectorConfig, ShotSeries, convolve_loss, simulate_dark,
                        simulate_photoelectrons, simulate_shots)
from .errors import (ConfigError, FanocalError, FitError, NumericalError, ReconstructionError,
                     SeriesNotConverged, ShotFileError, TruncationError)
from .probdist import ProbDist
from .reconstruction import (OnOffDataset, ReconstructionResult, assign_etas, ml_reconstruct,
                             no_click_probability)
from .states import (Coherent, DisplacedThermal1, DisplacedThermalMulti,
                     PhaseAvgDisplacedCoherent, Thermal1, ThermalMulti, auto_nmax, make_state,
                     moments, pmf, predicted_slope, sample)

__version__ = "0.1.0"
