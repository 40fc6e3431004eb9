"""Post-correction of annealer outputs on Chimera spin glasses.

Library surface: Chimera graph construction, Ising instances and energy
bookkeeping, simulated annealing, a graph-network flip policy trained with
n-step Q-learning, the SAwR hybrid solver, and an experiment harness.
"""

from .topology import ChimeraTopology, Edge, build_chimera
from .ising import (IsingInstance, ParseError, SpinConfiguration, apply_flip,
                    brute_force_ground_state, energy, flip_delta,
                    random_configuration, random_instance, read_configuration,
                    read_instance, write_configuration, write_instance)
from .annealing import (AnnealResult, AnnealSchedule, default_schedule,
                        geometric_schedule, metropolis_accept,
                        simulated_annealing)
from .gnn import (EmbeddingSet, QNetworkParams, backward, encode, forward_q,
                  init_params, load_checkpoint, node_features, q_values,
                  save_checkpoint)
from .agent import (EpisodeTrace, NStepTransition, ReplayBuffer, TrainConfig,
                    TrainResult, episode, greedy_action, make_transitions,
                    td_target, train)
from .hybrid import SawrConfig, default_beta_switch, sawr
from .harness import (EvalConfig, ExperimentReport, ProxyConfig, TrialSpec,
                      annealer_proxy_start, emit_report, evaluate,
                      generate_benchmark, load_benchmark, report_from_json,
                      report_to_json)

__version__ = "0.1.0"
