"""Spline-edge (Kolmogorov-Arnold) networks for binary intrusion detection.

Subpackages cover the full pipeline: B-spline machinery (:mod:`.splines`),
the spline-edge network itself (:mod:`.kan`), symbolic formula extraction
(:mod:`.symbolic`), trees and forests (:mod:`.trees`), classical baselines
(:mod:`.baselines`), data handling (:mod:`.data`), metrics and reports
(:mod:`.metrics`), persistence (:mod:`.modelio`), and the command-line
front end (:mod:`.cli`).
"""

__version__ = "0.1.0"

from .kan import (  # noqa: F401
    GridConfig,
    KanNetwork,
    TrainConfig,
    build_network,
    forward,
    iteration_count,
    predict,
    train,
)
from .data import (  # noqa: F401
    Dataset,
    LabelMap,
    ScalerParams,
    SplitSpec,
    SynthSpec,
    apply_scaler,
    fit_scaler,
    load_csv,
    split,
    synth_generate,
)
from .metrics import ModelReport, per_class_metrics, render_report, timed  # noqa: F401
from .modelio import ModelBundle, load_model, save_model  # noqa: F401
