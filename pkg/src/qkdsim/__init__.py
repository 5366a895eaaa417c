"""Monte Carlo link-budget simulator for entanglement-based (E91) QKD."""
from .bitgen import (
    BitGenResult,
    Classification,
    PumpEventRecord,
    estimate_correlation,
    estimate_s,
    povm_no_click,
    povm_single_click,
    run_bit_generation,
    same_bit_probability,
    simulate_pump_event,
)
from .cascade import CascadeResult, run_cascade
from .config import ConfigError, ScenarioConfig, load_config, load_preset
from .core import (
    EKERT_BASES,
    TSIRELSON_BOUND,
    BasisSet,
    DetectorParams,
    MeasurementBasis,
    QKDSimError,
    RunConfig,
    SourceParams,
    make_stream,
    unit_vector,
)
from .parityhash import SecretKeyResult, parity_hash, run_privacy_amplification
from .pipeline import EnsembleSummary, LinkBudget, run_ensemble, run_trial, run_trial_detailed

__version__ = "0.1.0"
