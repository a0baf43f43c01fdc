//! Concrete objective families and data ingestion.

pub mod data;
pub mod logistic;
pub mod quadratic;

pub use data::{load_libsvm, parse_libsvm, save_libsvm, synthesize_classification, write_libsvm, Dataset, Sample};
pub use logistic::{build_logistic_problem, LogisticSmooth, LogisticSpec};
pub use quadratic::{
    build_quadratic_components, build_quadratic_problem, least_squares_components, synthesize_regression,
    QuadraticSmooth,
};
