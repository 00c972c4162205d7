//! Dataset ingestion, the builtin task catalogue, and the synthetic
//! domain-shift generator.

mod features;
mod protocol;
mod synthetic;

pub use features::{
    load_features, load_features_from_path, parse_features, render_features, save_features,
    DataError, FORMAT_HEADER,
};
pub use protocol::{
    builtin_protocol, builtin_sample_constitution, dataset_display_name,
    multiscale_grid_block_count, validate_tasks, ClassCount, DatasetManifest, TaskSpec, TaskType,
};
pub use synthetic::{generate_synthetic, SyntheticData, SyntheticShiftConfig};
