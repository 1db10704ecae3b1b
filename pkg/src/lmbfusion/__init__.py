"""Distributed multi-object tracking for connected vehicles.

Per-node SMC labeled multi-Bernoulli filters whose posteriors are
complementarily fused over a fixed number of consensus rounds, with
node-extended labels and Bernoulli-component merging to remove label
collisions and double counting.
"""

from .backend import active_backend
from .core import (
    BernoulliComponent,
    Label,
    LmbDensity,
    ParticleSet,
    RESERVED_ORIGIN,
    eap_estimate,
    extract_estimates,
    odds,
    prune,
    resample,
)
from .dynamics import (
    CtModelParams,
    KinematicState,
    Measurement,
    SensorModel,
    ct_matrix,
    ct_transition,
    detection_probability,
    measurement_likelihood,
)
from .filtering import BirthModel, FilterConfig, enumerate_associations, predict, update
from .fusion import (
    FusionConfig,
    complementary_fuse,
    consensus_round,
    detect_duplicates,
    fuse_density,
    fuse_existence,
    merge_all,
    merge_pair,
    run_consensus,
)
from .metrics import MetricsConfig, cardinality_report, optimal_assignment, ospa, ospa2
from .network import (
    NetworkGraph,
    PosteriorMessage,
    build_graph,
    deserialize,
    serialize,
)
from .scenario import ScenarioConfig, generate_truth, load_scenario, simulate_scan

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "active_backend",
    "BernoulliComponent",
    "Label",
    "LmbDensity",
    "ParticleSet",
    "RESERVED_ORIGIN",
    "eap_estimate",
    "extract_estimates",
    "odds",
    "prune",
    "resample",
    "CtModelParams",
    "KinematicState",
    "Measurement",
    "SensorModel",
    "ct_matrix",
    "ct_transition",
    "detection_probability",
    "measurement_likelihood",
    "BirthModel",
    "FilterConfig",
    "enumerate_associations",
    "predict",
    "update",
    "FusionConfig",
    "complementary_fuse",
    "consensus_round",
    "detect_duplicates",
    "fuse_density",
    "fuse_existence",
    "merge_all",
    "merge_pair",
    "run_consensus",
    "NetworkGraph",
    "PosteriorMessage",
    "build_graph",
    "deserialize",
    "serialize",
    "MetricsConfig",
    "cardinality_report",
    "optimal_assignment",
    "ospa",
    "ospa2",
    "ScenarioConfig",
    "generate_truth",
    "load_scenario",
    "simulate_scan",
]
