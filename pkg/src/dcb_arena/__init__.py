"""Multi-agent spectrum-allocation benchmark for dynamic channel bonding WLANs.

The package bundles a CSMA/CA bonding simulator, an exhaustive
configuration-to-throughput dataset oracle, bandit and Q-learning agents,
and a reproducible experiment harness with a CLI (``dcb-arena``).
"""

__version__ = "0.1.0"

from .agents import (
    Hyperparameters,
    context_binary,
    context_combined,
    egreedy_select,
    egreedy_update,
    epsilon,
    make_agent,
    reward,
)
from .dataset import (
    Dataset,
    config_from_id,
    config_id,
    find_optima,
    generate,
    load,
    lookup,
    save,
)
from .deployment import (
    Bss,
    Deployment,
    MacParams,
    build_deployment,
    deployment_digest,
    load_deployment,
)
from .errors import (
    NotFoundError,
    PersistenceError,
    UnsupportedOperationError,
    ValidationError,
)
from .harness import (
    EnvSpec,
    MetricsSummary,
    RunConfig,
    RunLog,
    aggregate,
    normalized_gain,
    run_episode,
    run_sweep,
    tau,
)
from .sim import SimResult, occupancy_observation, simulate
from .spectrum import (
    Action,
    InterferenceMatrix,
    RadioParams,
    action_from_index,
    action_index,
    allowed_block,
    dcb_select,
    derive_interference_matrix,
    enumerate_actions,
    overlaps,
)
