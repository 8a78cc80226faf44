"""
Configuration file for Pair Scout - CNN/Accelerator Co-design Search
"""

import os
from dotenv import load_dotenv

load_dotenv()

PROJECT_ROOT = os.path.dirname(os.path.abspath(__file__))
DATA_DIR = os.path.join(PROJECT_ROOT, "data")

# CNN design space - desk-scale defaults, larger spaces stay expressible
CNN_SPACE_CONFIG = {
    "conv_kernels": [1, 3, 5],
    "conv_channels": [8, 16, 32, 64],
    "activations": ["relu", "silu"],
    "dwconv_kernels": [3, 5],
    "conv3d_kernels": [3],
    "transposed_kernels": [3],
    "pool_kernels": [3, 5],
    "pool_strides": [1, 2],
    "shuffle_groups": [2, 4],
    "dropout_percents": [10, 20, 50],
    "upsample_sizes": [64],
    "dense_units": [84, 120, 1024],
    "num_classes": 10,
    "max_module_vertices": 5,
    "max_module_edges": 8,
    "max_head_vertices": 8,
    "depth_cap": 12,  # body modules, head excluded
    "stack_schedule": [4, 2, 1],
    "module_vocabulary": 6,
    "head_vocabulary": 2,
    "level_size_cap": 200,
    "input_shape": (3, 32, 32),  # CIFAR-10 like
}

# Graph edit distance costs
GED_CONFIG = {
    "edge_cost": 1e-9,
    "exact_node_limit": 6,
    "approx_iterations": 8,  # anytime improvements kept above the exact limit
}

# CNN2vec embedding training
EMBEDDING_CONFIG = {
    "dimension": 16,
    "epochs": 2000,
    "learning_rate": 1e-2,
    "momentum": 0.9,
    "init_scale": 0.1,
    "neighbors_k": 100,
}

# Accelerator design space (permissible values per hyperparameter)
ACCEL_SPACE_CONFIG = {
    "p_ib": [1, 2, 4],
    "p_if": [1, 16],
    "p_ix": [1, 2, 3, 4, 5, 6, 7, 8],
    "p_iy": [1, 2, 3, 4, 5, 6, 7, 8],
    "p_of": [1, 2, 4, 8],
    "p_k": [1, 3, 5, 7],  # P_kx = P_ky
    "batch": [1, 64, 128, 256, 512],
    "act_buf_mb": [1, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24],
    "wgt_buf_mb": [1, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 22, 24],
    "mask_buf_mb": [1, 2, 3, 4],
    "mem_types": ["RRAM", "DRAM", "HBM"],
    # (banks, ranks, channels)
    "mem_configs": {
        "RRAM": [(16, 2, 2), (8, 2, 4), (4, 2, 8), (2, 2, 16), (32, 2, 1), (1, 2, 32)],
        "DRAM": [(16, 2, 2), (8, 2, 4), (32, 2, 1), (16, 4, 1)],
        "HBM": [(32, 1, 4)],
    },
    "exhaustive_limit": 200_000,
    "snap_pool_size": 2048,
    "presets_path": os.getenv("PAIRSCOUT_PRESETS", os.path.join(DATA_DIR, "accel_presets.json")),
}

# Fixed-point format used by every processing module
FIXED_POINT_CONFIG = {
    "integer_bits": 4,
    "fraction_bits": 16,
}

# Accelerator simulator
SIMULATOR_CONFIG = {
    "constants_path": os.getenv("PAIRSCOUT_CONSTANTS", os.path.join(DATA_DIR, "cost_constants.json")),
    "sparsity_act": 0.4,
    "sparsity_wgt": 0.5,
    "binary_mask": True,
}

# Surrogate stack (NPN f, teacher g, student h)
SURROGATE_CONFIG = {
    "branch_widths": [64, 64],
    "head_widths": [64, 64],
    "dropout": 0.1,
    "mc_samples": 10,
    "epochs": 200,
    "learning_rate": 1e-2,
    "variance_floor": 1e-6,
    "k1": 0.5,
    "k2": 0.5,
}

# Gradient-based optimization to the input
GOBI_CONFIG = {
    "max_steps": 200,
    "step_size": 0.1,
    "hessian_samples": 1,
    "beta1": 0.9,
    "beta2": 0.999,
    "eps": 1e-8,
    "tol": 1e-8,
    "restarts": 8,
    "second_order": True,
    "workers": 1,
}

# Active-learning policy
SEARCH_POLICY = {
    "alpha_p": 0.1,  # uncertainty sampling
    "beta_p": 0.1,  # diversity sampling
    "tau_wt": 0.8,  # biased-overlap threshold for weight transfer
    "convergence_tol": 1e-4,
    "convergence_patience": 5,
    "stack_schedule": [4, 2, 1],
    "workers": int(os.getenv("PAIRSCOUT_WORKERS", "1")),
    "initial_corpus": 16,
    "candidate_pool": 512,
    "budget": 200,
    "crossover_parents": 3,
    "crossover_children": 64,
    "validation_repeats": 3,
}

# Performance measure weights (alpha, beta, gamma, delta, epsilon)
PERFORMANCE_WEIGHTS = {
    "latency": 0.2,
    "area": 0.1,
    "dynamic_energy": 0.2,
    "leakage_energy": 0.2,
    "accuracy": 0.3,
}

# Accuracy oracles
EVALUATOR_CONFIG = {
    "kind": "synthetic",
    "benchmark_dir": os.getenv("PAIRSCOUT_BENCHMARK_DIR", os.path.join(DATA_DIR, "benchmarks")),
    "noise_scale": 0.01,
    "bumps": 4,
    "base_cost": 1.0,
    "transfer_discount": 0.68,  # 32% cheaper with weight transfer
    "early_stop_discount": 0.5,
    "early_stop_quantile": 0.25,
    "recipe_lr_range": (1e-5, 1e-2),
    "recipe_beta1_range": (0.8, 0.95),
    "recipe_beta2_range": (0.9, 0.999),
    "recipe_decay_range": (1e-5, 1e-3),
}

# Output Configuration
OUTPUT_CONFIG = {
    "output_dir": os.getenv("PAIRSCOUT_OUTPUT_DIR", "runs"),
    "trace_csv": "trace.csv",
    "summary_json": "summary.json",
    "manifest_json": "manifest.json",
    "trace_xlsx": "trace.xlsx",
}

LOGGING_CONFIG = {
    "level": os.getenv("PAIRSCOUT_LOG_LEVEL", "INFO"),
    "log_dir": os.getenv("PAIRSCOUT_LOG_DIR"),
    "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
}
