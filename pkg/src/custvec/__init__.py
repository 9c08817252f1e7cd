"""Goal-based customer embedding and segmentation.

Tabular customer features are standardized, fed through a small fully
connected classifier (input -> 3 -> 10 -> 1), and the activations of the
3-unit hidden layer are used as a per-customer vector.  Those vectors are
then clustered (modified k-means, SOM, Gaussian mixture, mean-shift) and
queried for similar customers.
"""

from custvec.dataset import (
    CustomerRecord,
    Dataset,
    FeatureSchema,
    Scaler,
    SplitSet,
    apply_scaler,
    impute_missing,
    join_on_keys,
    load_csv,
    make_synthetic,
    smote_augment,
    split,
    standardize,
    write_csv,
)
from custvec.network import (
    Activation,
    AdamConfig,
    LayerSpec,
    NetworkParams,
    TrainConfig,
    TrainReport,
    classify,
    forward,
    init_params,
    predict_proba,
    train,
)
from custvec.embedding import (
    CustomerVector,
    EmbeddingSet,
    compress_30_to_3,
    cosine_similarity,
    embed,
    embed_all,
    euclidean_distance,
    similar_to_defaulters,
    top_k_similar,
)
from custvec.clustering import (
    ClusterConfig,
    ClusterModel,
    fit_clusters,
    gmm_em,
    kmeans_modified,
    mean_shift,
    som_cluster,
)
from custvec.evaluation import (
    evaluate_classifier,
    evaluate_clustering,
    knee_select_k,
)

__version__ = "0.1.0"

__all__ = [
    "Activation",
    "AdamConfig",
    "ClusterConfig",
    "ClusterModel",
    "CustomerRecord",
    "CustomerVector",
    "Dataset",
    "EmbeddingSet",
    "FeatureSchema",
    "LayerSpec",
    "NetworkParams",
    "Scaler",
    "SplitSet",
    "TrainConfig",
    "TrainReport",
    "apply_scaler",
    "classify",
    "compress_30_to_3",
    "cosine_similarity",
    "embed",
    "embed_all",
    "euclidean_distance",
    "evaluate_classifier",
    "evaluate_clustering",
    "fit_clusters",
    "forward",
    "gmm_em",
    "impute_missing",
    "init_params",
    "join_on_keys",
    "kmeans_modified",
    "knee_select_k",
    "load_csv",
    "make_synthetic",
    "mean_shift",
    "predict_proba",
    "similar_to_defaulters",
    "smote_augment",
    "som_cluster",
    "split",
    "standardize",
    "top_k_similar",
    "train",
    "write_csv",
]
