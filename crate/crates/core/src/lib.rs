//! Boundary-aware evaluation toolkit for binary stroke segmentation under
//! extreme class imbalance.
//!
//! - [`imgcore`]: raster types, PNG/PNM codecs, grayscale, binarization, resizing
//! - [`morphology`]: dilation/erosion, contours, exact EDT, thinning
//! - [`region_metrics`] and [`boundary_metrics`]: F1, IoU, BF1, B-IoU
//! - [`baselines`]: Otsu, adaptive Gaussian and Sauvola binarizers
//! - [`losses`]: CE, focal, Dice, Dice+focal and Tversky values with gradients
//! - [`stats`]: Wilcoxon signed-rank, Bonferroni, effect sizes, robustness profiles
//! - [`protocol`]: per-image evaluation, stroke characterization, report assembly
//! - [`augment`]: seeded offline/online augmentation
//! - [`cli`]: the `strokebench` command-line front end

pub mod imgcore;
pub mod morphology;
pub mod region_metrics;
pub mod boundary_metrics;
pub mod baselines;
pub mod losses;
pub mod stats;
pub mod protocol;
pub mod augment;
pub mod cli;
