//! Dataset ingestion, augmentation, and per-epoch sample plans.

mod augment;
mod dataset;
mod plan;
mod synthetic;

pub use augment::{
    augment_sample, hflip, rotate, shift, AugmentPolicy, CropConfig, FlipConfig, Geometry,
    RotationConfig, TranslationConfig, MAX_CROP_PADDING, MAX_ROTATION_DEGREES,
    MAX_TRANSLATION_FRACTION,
};
pub use dataset::{load_csv, load_dataset, load_idx, DataFormat, Dataset, IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC};
pub use plan::{epoch_size, materialize_batches, plan_epoch, round_half_away, BatchStream, EpochDataPlan, OwnedBatch};
pub use synthetic::SyntheticSpec;
