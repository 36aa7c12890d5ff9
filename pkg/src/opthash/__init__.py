"""Streaming frequency estimation with learned hashing schemes."""

from .bench import (
    ExperimentConfig,
    avg_abs_error,
    budget_to_buckets,
    expected_magnitude_error,
    run_experiment,
    split_budget,
)
from .classify import (
    Classifier,
    DecisionTree,
    FeaturePipeline,
    NearestCentroid,
    fit_pipeline,
    predict_bucket,
    train_bucket_classifier,
)
from .core import (
    BucketStats,
    Element,
    HashScheme,
    StreamPrefix,
    ingest_prefix,
    validate_scheme,
)
from .objective import (
    ObjectiveValue,
    bucket_delta_add,
    bucket_delta_remove,
    evaluate,
)
from .sketches import (
    BloomFilter,
    CountMinSketch,
    LearnedCMS,
    OptHashSketch,
    load_sketch,
    save_sketch,
)
from .solvers import BcdConfig, bcd_optimize, brute_force, dp_optimize, export_milp
from .synthgen import (
    SynthConfig,
    gen_stream,
    gen_universe,
    gen_zipf_stream,
    load_query_log,
)

__version__ = "0.1.0"
