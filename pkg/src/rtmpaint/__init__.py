"""Physics-based preprocessing toolkit for distributed multichannel
acoustic sensing: scene simulation, back-projection imaging, channel
inpainting, features, baselines, and an experiment harness.
"""

from .analysis import (
    CentroidModel,
    PatchGrid,
    SpatialWeights,
    TokenSet,
    correlation_report,
    embed_patches,
    evaluate,
    extract_patches,
    make_embedding,
    pearson,
    reference_classifier_predict,
    reference_classifier_train,
    spatial_weights,
)
from .baselines import ChannelWeights, channel_swap, delay_and_sum, max_snr_select, scaling_sparsemax, sparsemax
from .dsp import (
    ComplexSpectrogram,
    LogMelFeature,
    MelFilterbank,
    StftParams,
    istft,
    log_mel,
    measure_snr,
    mel_filterbank,
    mix_at_snr,
    stft,
)
from .errors import ConfigError, ConstantInputError, DataError, MemoryBudgetError
from .geometry import (
    DistanceMatrix,
    ImagingGrid,
    Position,
    SensorLayout,
    default_anchor,
    distance_matrix,
    make_layout,
    sample_source,
    source_distances,
)
from .harness import (
    ClipManifest,
    ExperimentConfig,
    emit_plots,
    make_synthetic_corpus,
    run_pipeline,
    synthesize_dataset,
)
from .propagation import (
    PropagationOperator,
    SceneMetadata,
    build_operator,
    degrade,
    greens,
    load_operator,
    save_operator,
    simulate_scene,
    wavenumber,
)
from .rtm import (
    GramFilter,
    RtmImage,
    back_project,
    forward_project,
    gram_filter,
    image_energy_map,
    inpaint,
)

__version__ = "0.1.0"
