"""partcrop: membership inference against black-box visual encoders.

The toolkit probes an encoder with randomly cropped image parts, turns the
query/feature-map similarity distributions into KL response energies, and
trains a small MLP to separate members from non-members. Three baseline
attacks, a partial/shadow evaluation harness, and a crop-scale-range defense
search round out the package.
"""

__version__ = "0.1.0"

from .attacker import (
    AttackerModel,
    TrainConfig,
    forward,
    init_attacker,
    load_model,
    predict,
    predict_batch,
    save_model,
    train_attacker,
    train_step,
)
from .core import (
    avgpool_spatial,
    bilinear_resize,
    cosine_sim,
    kl_energy,
    query_similarities,
    softmax,
    sort_desc,
)
from .cropper import CropBox, PartCropConfig, crop_area_fraction, sample_crops
from .encoders import (
    EncoderBinding,
    FeatureMap,
    RemoteEncoder,
    SyntheticEncoder,
    SyntheticEncoderConfig,
    build_encoder,
    encode_map,
    encode_patch_batch,
    synthetic_encode,
)
from .errors import (
    ContractViolationError,
    DegenerateInputError,
    InvalidInputError,
    PartCropError,
    ProtocolError,
    ShapeMismatchError,
    TransportError,
)
from .features import (
    AugmentConfig,
    MembershipFeature,
    encodermi_features,
    gaussian_benchmark,
    partcrop_features,
    read_features,
    supervised_features,
    variance_features,
    write_features,
)
from .harness import (
    AttackConfig,
    AttackReport,
    DatasetManifest,
    ManifestEntry,
    ScsrResult,
    ScsrSearchConfig,
    SplitPlan,
    compute_metrics,
    generate_synthetic_dataset,
    knowledge_sweep,
    load_manifest,
    make_scsr_evaluator,
    part_response_curve,
    run_attack_experiment,
    run_shadow_experiment,
    save_manifest,
    scsr_search,
    split_dataset,
)
from .server import SyntheticEncoderServer
