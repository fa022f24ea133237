"""Simulation and verification toolkit for a coherently driven two-mode cascade laser.

Three independent routes to the same physics:

* closed-form steady-state expressions (:mod:`.observables`, :mod:`.moments`),
* the closed moment ODE system, integrated or solved directly (:mod:`.moments`),
* a brute-force truncated Fock-space master-equation oracle (:mod:`.fock`).
"""

from .errors import (
    CascadeLaserError,
    EmptySweepError,
    IntegrationError,
    InvalidParameterError,
    LeakageError,
    SingularSystemError,
    TruncationError,
    UnphysicalStateError,
    ValidityError,
)
from .params import (
    AtomicPrep,
    DecayRates,
    MicroscopicParams,
    StabilityReport,
    SystemParams,
    check_stability,
    decay_rates,
    derive_atomic_prep,
    linear_gain,
    load_params,
)
from .moments import (
    MomentState,
    SteadyStateMoments,
    Trajectory,
    compare_steady_states,
    drift,
    evolve,
    residual,
    steady_state_closed_form,
    steady_state_linear_solve,
)
from .observables import (
    DuanWitness,
    ObservablesReport,
    QuadratureVariances,
    duan_sum,
    mean_photon_closed_form,
    mean_photon_from_moments,
    observables_closed_form,
    observables_from_moments,
    variances_closed_form,
    variances_from_moments,
)
from .fock import (
    TruncatedDensityMatrix,
    TruncationSpec,
    build_liouvillian,
    extract_moments,
    oracle_evolve,
    oracle_steady_state,
    truncation_check,
)
from .experiments import FigureJob, SweepSpec, figure_job, run_figure, run_sweep
from .validation import validate

__version__ = "0.1.0"
