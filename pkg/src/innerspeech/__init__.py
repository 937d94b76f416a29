"""Inner-speech EEG classification toolkit.

Preprocessing and Welch band-power features, feature selection (PCA, tree
gain, channel subsetting), SVM / gradient-boosted-tree / LSTM / BiLSTM
classifiers, and a k-fold / nested cross-validation harness with a synthetic
EEG oracle for desk-scale verification.
"""

from .core import (
    ChannelInfo,
    Epoch,
    EpochSet,
    Interval,
    Recording,
    Trial,
    left_hemisphere,
    load_epochset,
    make_channels,
    save_epochset,
    select_channels,
    split_rest_action,
)
from .dsp import (
    ALPHA,
    BETA,
    DEFAULT_BANDS,
    GAMMA,
    GAMMA_NARROW,
    PROFILES,
    BandDef,
    PreprocessProfile,
    PsdEstimate,
    bandpass_filter,
    notch_filter,
    preprocess_epochset,
    relative_band_power,
    resample,
    sliding_windows,
    welch_psd,
)
from .evaluate import (
    EvalReport,
    FoldPlan,
    Metrics,
    chance_level,
    compute_metrics,
    emit_report,
    kfold,
    kfold_evaluate,
    mean_metrics,
    nested_cv,
)
from .features import (
    BandPowerExtractor,
    FeatureMatrix,
    ImportanceReport,
    PcaModel,
    PcaReducer,
    build_feature_matrix,
    columns_to_channels,
    intersect_selected,
    pca_fit,
    pca_transform,
    select_by_gain,
)
from .gbt import GbtClassifier
from .nets import (
    BilstmClassifier,
    LstmClassifier,
    NetworkSpec,
    TrainConfig,
    backward,
    bilstm_forward,
    forward,
    init_params,
    loss,
    lstm_forward,
    shape_input,
    train,
)
from .pipeline import PipelineConfig, run
from .svm import SvmClassifier
from .synth import SynthSpec, default_4class, generate

__version__ = "0.1.0"
