"""Simulation of a programmable dephasing channel for polarization-entangled photon pairs."""
from .channel import (AngularSpectrum, ChannelGeometry, DecoherenceFactor, GratingMask, SlmPhaseProfile,
                      decoherence_curve, decoherence_factor, intensity, revival_parameter, sweep_visibility,
                      visibility)
from .config import ExperimentConfig
from .errors import (ChannelError, ConfigurationError, DegenerateDataError, NumericalError,
                     ParameterDomainError)
from .photon import (CoincidenceScan, CountRecord, NoiseModel, coincidence_scan, factorization_chi2,
                     measure_visibility, simulate_chsh, simulate_counts, tomographic_set)
from .qstate import (ChshSettings, DensityMatrix4, PolarizerPair, channel_state, chsh, chsh_max,
                     concurrence_wootters, correlation, fidelity, projector_probability,
                     visibility_from_state)
from .tomography import (ReconstructionResult, linear_inversion, loglik_and_gradient, mle_reconstruct,
                         params_to_state)

__version__ = "0.1.0"
