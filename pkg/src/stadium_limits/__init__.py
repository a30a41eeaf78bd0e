"""Exact Bunimovich stadium billiard simulator with a Monte Carlo harness
for its anomalous (sqrt(n log n)) and standard central limit theorems."""

__version__ = "0.1.0"

from .billiard import (CollisionStep, MacroKind, MacroStep, backward,
                       forward, macro_forward, tangent_map)
from .errors import (CapExceeded, DomainTooSmall, GeometryDegenerate,
                     InsufficientSamples, InsufficientSignal, StadiumError,
                     Unreachable, ZeroI)
from .geometry import (BoundaryComponent, PhasePoint, StadiumGeometry,
                       classify, mu0_density, mu0_of_X, to_cartesian)
from .induced import (ExcursionKind, ExcursionRecord, expansion_check,
                      in_X, induced_backward, induced_forward)
from .kernel import backend
from .limits import (CltReport, TailModel, birkhoff_samples, correlation,
                     flow_birkhoff, flow_pullback, mu0X_check, tail_report,
                     theoretical_c, variance_growth, y_const)
from .observables import (Observable, ObservableProfile, PerpClass,
                          centered_free_path, classify_observable,
                          compute_I, critical_ell, flow_J,
                          free_path_observable, induced_observable,
                          mean_mu0, mean_tau, segment_bump,
                          tabulated_observable)
from .cascades import (CascadeRecord, cascade_mean, moment_bound_check,
                       run_cascade, standard_stop_level,
                       transition_histogram)
from .sampling import SeedSpec, sample_mu, sample_mu0, sample_stripe

__all__ = [name for name in dir() if not name.startswith("_")]
