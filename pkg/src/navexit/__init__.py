"""Navigation-guided early-exit inference for layered classifiers.

Set ``NAVEXIT_NUM_THREADS`` to force the thread count (BLAS threads and the
default profiling parallelism). It must be set before the package is imported.
"""

import os

_threads = os.environ.get("NAVEXIT_NUM_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ[_var] = _threads

from .executor import (  # noqa: E402
    ConfidenceThreshold,
    FixedExit,
    FixedFraction,
    Full,
    StablePrediction,
    batch_run,
    parse_strategy,
    run,
)
from .model import (  # noqa: E402
    ParamModel,
    PredictionTable,
    Sample,
    SyntheticSpec,
    SyntheticTransformer,
    activated_params,
    embed,
    forward_to,
    head_confidence,
    predict_at,
)
from .profiler import layerwise_accuracy, profile_tasks, select_exit_layer  # noqa: E402
from .router import ExitConfigTable, NavEvent, NavRouter, apply_event, load_config, resolve  # noqa: E402
from .simulator import (  # noqa: E402
    FrameArrival,
    LatencyModel,
    compare_strategies,
    latency,
    over_inference_analysis,
    reduction_pct,
    simulate,
)

__version__ = "0.1.0"


def num_threads() -> int:
    try:
        return max(1, int(os.environ.get("NAVEXIT_NUM_THREADS", "1")))
    except ValueError:
        return 1
