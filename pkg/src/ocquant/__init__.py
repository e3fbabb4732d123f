"""One-class quantification and positive-unlabeled prior estimation."""
from .core import CsvSchema, Dataset, Sample, SampleSpec, draw_sample, kfold_split, load_csv, mae
from .mixture import OdinModel, build_histogram, odin_quantify, odin_scale_search, overflow, train_odin
from .persist import load_model, save_model
from .region import (
    PriorEstimate,
    TiceParams,
    c_to_p,
    correction_delta,
    en_estimate,
    ensemble_min,
    extice_estimate,
    ranfoce_estimate,
    tice_estimate,
)
from .scorer import cv_scores, fit_calibrated, fit_mahalanobis, predict_proba, score
from .threshold import (
    PatModel,
    RateEstimates,
    adjusted_cc,
    bft_oracle,
    classify_count,
    pat_adjust,
    pat_quantify,
    train_pat,
)

__version__ = "0.1.0"
