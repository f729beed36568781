"""Root and community inference for networks formed by noisy sequential growth.

A network is modeled as a latent recursive attachment tree or forest plus
noise edges.  Given one snapshot of the final graph, Gibbs samplers over the
latent arrival ordering and spanning forest yield posterior root
distributions, credible sets with frequentist coverage, and tree-based
community structure.
"""

from .estimation import (EmConfig, degree_tail_weights, em_estimate_alpha,
                         estimate_attachment, estimate_theta, sample_alpha0,
                         seq_param_update)
from .gibbs import (ChainConfig, ChainState, RunResult, init_chain_state,
                    run_chains, sweep)
from .graph import (DisconnectedGraphError, EdgeListParseError, Forest,
                    LabeledGraph, Ordering, load_edge_list,
                    load_edge_list_file, subtree_sizes, uniform_spanning_forest)
from .history import (HistoryCounts, count_histories, reroot_to_ordering,
                      root_membership_probabilities, root_probabilities,
                      sample_history)
from .inference import (ClusterSummary, CredibleSet, FixedKClusterMatcher,
                        RandomKClusterTracker, aggregate_root_distribution,
                        credible_set, degree_baseline_set, hellinger,
                        per_tree_root_distributions, posterior_over_k,
                        total_variation)
from .models import (InvalidParamsError, ModelParams, SimOutput, Variant,
                     generate_fixed_k, generate_random_k, generate_seq,
                     generate_single_root, generate_tree,
                     log_likelihood_forest, relabel_randomly)
from .oracle import (ExactPosterior, OracleCapError, enumerate_spanning_forests,
                     exact_root_posterior, forest_from_edges)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
