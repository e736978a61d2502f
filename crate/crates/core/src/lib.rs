//! Bacteria clone classification and explainability from microscopy images.
//!
//! The pipeline tiles images into foreground patches ([`tiling`]), embeds
//! them and classifies each image as a bag of patches ([`mil`]), then
//! explains the decision through cell segmentation and morphometry
//! ([`segmentation`]) and the H0 persistence of cell centers ([`tda`]).
//! [`stats`] holds the tests used to compare clones and methods, and
//! [`synth`] generates labelled images with planted clone differences.
//!
//! Pooling, training and persistence are generic over [`Real`]; the aliases
//! below fix the scalar to `f64`.

pub mod error;
pub mod manifest;
pub mod mil;
pub mod raster;
pub mod scalar;
pub mod segmentation;
pub mod stats;
pub mod synth;
pub mod tda;
pub mod tiling;

pub use error::{Error, ErrorKind, Result};
pub use scalar::Real;

pub type Bag = mil::Bag<f64>;
pub type MilModel = mil::MilModel<f64>;
pub type MilModel32 = mil::MilModel<f32>;
pub type FeatureScaler = mil::FeatureScaler<f64>;
pub type PointCloud = tda::PointCloud<f64>;
pub type PersistenceDiagram = tda::PersistenceDiagram<f64>;
