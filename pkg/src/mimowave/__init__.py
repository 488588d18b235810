"""MIMO phase-code synthesis with transmit beampattern control."""

from .array import AngleGrid, ArrayGeometry, beampattern, empirical_correlation, steering_vector
from .beamspec import (BeamClassCatalog, BeamSpec, default_catalog, notched_beam, omni_beam, rect_beam,
                       sample_on_grid)
from .cao import CaoTrace, CyclicCodeSynthesizer, ca_synthesize
from .covfit import CorrelationFitter, FitResult, fit_correlation, fit_objective, hermitian_sqrt, optimal_alpha
from .dataset import (DatasetManifest, WaveformSample, build_conditioning_vector, generate_dataset,
                      load_dataset, save_dataset)

__version__ = "0.1.0"
