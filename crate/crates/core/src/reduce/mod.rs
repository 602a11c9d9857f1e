//! Linear dimensionality reduction and the volume proxy.

mod pca;
mod scaler;
mod volume;

pub use pca::{fit_pca, fit_pca_scaled, intrinsic_dimension, project, Fitting, PcaModel};
pub use scaler::{fit_scaler, ScalerModel};
pub use volume::{
    volume_proxy, volume_proxy_of_trajectory, TrendVerdict, VolumeReport, DEFAULT_TOTAL_STEPS,
    DEFAULT_WINDOW,
};
