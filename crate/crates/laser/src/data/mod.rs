//! Dataset model, CSV I/O, the semi-synthetic generative process, and the
//! overlap diagnostic.

pub mod dataset;
pub mod generate;
pub mod io;
pub mod overlap;

pub use dataset::{true_ate, Dataset};
pub use generate::{
    generate_world, generate_world_with_weights, CovariateSource, DgpWeights, GenConfig,
    GeneratedWorld, GraphVariant, ObsTreatment,
};
pub use io::{load_dataset, save_dataset};
pub use overlap::{check_overlap, OverlapReport};
