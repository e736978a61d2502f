//! Spatial arrangement of cells: dimension-0 persistence of centroid point
//! clouds, persistence bag-of-words histograms, clone profiles and
//! representative patch selection.

mod pbow;
mod persistence;
mod profile;
mod representative;

pub use pbow::{pbow, pbow_with_bins, write_pbow_csv, PBoWVector, PBOW_BINS};
pub use persistence::{centers_point_cloud, h0_persistence, write_diagram_csv, PersistenceDiagram, PointCloud};
pub use profile::{average_pbow, bin_significance, BinSignificance, ClonePBoWProfile};
pub use representative::{representative_patches, representative_score, PatchPBoW, Representatives, ScoredPatch};
