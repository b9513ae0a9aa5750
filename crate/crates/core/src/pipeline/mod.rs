//! End-to-end training and evaluation: synthetic image data, encoder
//! pretraining, behavior cloning on the integrated representation,
//! evaluation suites, ablations and embedding analysis.

mod ablation;
mod dataset;
mod demos;
mod embedding;
mod encoder;
mod evaluate;
mod policy;
mod repr;

pub use dataset::{
    env_input_image, gen_food_dataset, push_input, shuffle_frames, DatasetSpec, FoodImageDataset, Split, INPUT_DIM,
    INPUT_SIDE,
};
pub use encoder::{
    encode, encode_embedded, geometric_input, EncodeOptions, Encoder, EncoderConfig, IntegratedRepresentation,
    ObservationWindow,
};
pub use repr::{
    clips_from_demos, fullness_mae, order_accuracy, train_repr, type_accuracy, Clip, LossParts, ReprHistory,
    ReprTrainConfig,
};
pub use embedding::{
    dataset_embeddings, embedding_metrics, intra_inter_ratio, silhouette, tsne_2d, EmbeddingMetrics, TsneResult,
    TSNE_MAX_POINTS,
};
pub use demos::{episode_env, gen_demos, FILL_RANGE};
pub use policy::{
    history_indices, policy_input, train_bc, BcConfig, BcHistory, PolicyController, PolicyParams, ACTION_DIM,
};
pub use evaluate::{evaluate, suite_mean, EnvMetrics, EvalConfig};
pub use ablation::{
    ablation_suite, compare_variants, evaluate_variant, train_variant, AblationData, TrainedVariant, Variant,
};
