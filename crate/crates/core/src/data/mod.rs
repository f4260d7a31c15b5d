//! Synthetic spiked-covariance data, file loading, and standardization.

mod io;
mod spiked;
mod standardize;

pub use io::{
    load_dataset, metadata_path, parse_csv, parse_libsvm, read_metadata, save_dataset, write_csv, DataFormat,
    DatasetMetadata, LabelColumn, LabelMapping, LoadOptions,
};
pub use spiked::{default_spikes, generate_spiked, random_orthogonal, SpikedModelSpec, SpikedSample};
pub use standardize::{column_moments, standardize, Standardization, Standardized};
