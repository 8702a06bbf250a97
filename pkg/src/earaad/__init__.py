"""Auditory attention decoding from ear-EEG: preprocessing, forward TRFs,
backward stimulus reconstruction and a synthetic ground-truth generator."""

from .decoder import (CHANCE_LEVEL, DEFAULT_WINDOWS_S, AccuracyRow, AccuracyTable, Decoder,
                      Trial, binomial_significance, classify_window, evaluate, pearson,
                      reconstruct, train_decoder)
from .errors import (AADError, ConfigError, DataError, FormatError, LayoutError,
                     RankDeficientError, SchemaError, UndefinedCorrelationError)
from .layouts import BUILTIN_LAYOUTS, Layout, get_layout, load_layout_file, select_layout
from .linmodel import (DEFAULT_LAMBDA_GRID, LagConfig, build_lag_matrix, lag_matrix,
                       ridge_solve, select_lambda)
from .signals import (DEFAULT_BAND, BandpassSpec, MonoSeries, MultiSeries, baseline_correct,
                      common_average_reference, design_bandpass, filtfilt, hilbert_envelope,
                      preprocess_chain, preprocess_envelope, resample)
from .synth import SynthConfig, generate_dataset, generate_envelope, generate_trial
from .trf import Trf, TrfContrast, contrast_trfs, estimate_trf, predict_response

__version__ = "0.1.0"
