"""Max-choice preferential-attachment tree: simulation and verification toolkit.

A new vertex arrives at each step, samples d existing vertices independently
with probability proportional to degree, and attaches to the sampled vertex
of largest degree (ties broken uniformly among the tied samples).  The
package simulates this process at scale, tracks the k highest degrees and
hub-persistence times, and checks the predicted growth exponents against
closed-form theory values.
"""

__version__ = "0.1.0"

from .rng import RNG_ALGORITHM_ID, SplitMix64, mix_seed
from .sampler import PrefixSumTree, RepeatedEntryList
from .process import ModelConfig, TreeState, AttachmentRecord, init_state, step, run
from .stats import TopKTracker, HubTimeline, CheckpointSeries
from .theory import TheoryParams, solve_fixed_point, exponent
from .harness import ExperimentConfig, run_ensemble, exact_distribution, fit_slope

__all__ = [
    "RNG_ALGORITHM_ID",
    "SplitMix64",
    "mix_seed",
    "RepeatedEntryList",
    "PrefixSumTree",
    "ModelConfig",
    "TreeState",
    "AttachmentRecord",
    "init_state",
    "step",
    "run",
    "TopKTracker",
    "HubTimeline",
    "CheckpointSeries",
    "TheoryParams",
    "solve_fixed_point",
    "exponent",
    "ExperimentConfig",
    "run_ensemble",
    "exact_distribution",
    "fit_slope",
]
