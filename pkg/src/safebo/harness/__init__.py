"""Experiment orchestration: instances, campaigns, benchmarks and the CLI."""
from .benchmarks import BENCHMARKS, Benchmark, benchmark, gaussian10_level_radius, get_benchmark
from .campaign import CampaignResult, RunRecord, run_campaign, summarize
from .config import CampaignConfig, ConfigError, load_config
from .problem import (
    NoiseSpec,
    ProblemInstance,
    compute_threshold,
    estimate_lipschitz,
    normalized_metric,
    pick_initial_safe_set,
    prepare_instance,
)
