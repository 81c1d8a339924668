"""Body-schema estimation from tactile information.

Pipeline: simulate a multilink agent's coordinated random movements, quantize
the tactile pressures, compute the pairwise information metric, embed sensors
into a body map with classical MDS, then infer body parts and their kinematic
tree with a latent-joint Gaussian mixture Gibbs sampler.
"""

from .agent import (AgentModel, BodyPart, Joint, MotionConfig, SensorPlacement,
                    StructureError, build_agent, save_agent_spec,
                    star_agent_spec)
from .baselines import (EvaluationReport, adjusted_rand_index, aggregate,
                        clustering_report, euclidean_prim_baseline,
                        euclidean_prim_tree, gmm_em, kmeans, tree_success,
                        ward, write_report_csvs)
from .bodymap import (BodyMap, DistanceMatrix, JointHistogram,
                      conditional_entropy, information_metric, joint_histogram,
                      mds_embed, pair_distance)
from .inference import (ChainSample, Hyperparameters, MixtureState,
                        NumericError, StateError, TreeStructure,
                        active_components, init_state, log_joint,
                        nw_log_evidence, prim_mst, run_chain,
                        sample_assignments, sample_component_params,
                        sample_joint_points, sample_weights, split_merge_move,
                        tree_cost, update_tree)
from .pipeline import ExperimentConfig, preset, run_group, run_pipeline
from .simulate import MotionTrace, TactileLog, quantize, simulate

__version__ = "0.1.0"

__all__ = [
    "AgentModel", "BodyPart", "Joint", "MotionConfig", "SensorPlacement",
    "StructureError", "build_agent", "save_agent_spec", "star_agent_spec",
    "EvaluationReport", "adjusted_rand_index", "aggregate", "clustering_report",
    "euclidean_prim_baseline", "euclidean_prim_tree", "gmm_em", "kmeans",
    "tree_success", "ward", "write_report_csvs",
    "BodyMap", "DistanceMatrix", "JointHistogram", "conditional_entropy",
    "information_metric", "joint_histogram", "mds_embed", "pair_distance",
    "ChainSample", "Hyperparameters", "MixtureState", "NumericError",
    "StateError", "TreeStructure", "active_components", "init_state",
    "log_joint", "nw_log_evidence", "prim_mst", "run_chain",
    "sample_assignments", "sample_component_params", "sample_joint_points",
    "sample_weights", "split_merge_move", "tree_cost", "update_tree",
    "ExperimentConfig", "preset", "run_group", "run_pipeline",
    "MotionTrace", "TactileLog", "quantize", "simulate",
]
