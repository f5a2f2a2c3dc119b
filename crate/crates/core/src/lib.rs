//! Riemannian classification of multichannel signals through their spatial
//! covariance matrices.

pub mod augment;
pub mod class;
pub mod classify;
pub mod eval;
pub mod features;
pub mod nested;
pub mod pipeline;
pub mod rng;
pub mod scalar;
pub mod signal;
pub mod spd;

pub use class::ClassId;
pub use scalar::Scalar;
pub use spd::{BasePoint, SpdError, SpdMatrix, SpdSample, TangentVector};

pub type SpdMatrix64 = SpdMatrix<f64>;
pub type SpdMatrix32 = SpdMatrix<f32>;
pub type SpdSample64 = SpdSample<f64>;
pub type SpdSample32 = SpdSample<f32>;
pub type TangentVector64 = TangentVector<f64>;
pub type TangentVector32 = TangentVector<f32>;
pub type BasePoint64 = BasePoint<f64>;
pub type Recording64 = signal::MultiChannelRecording<f64>;
pub type TangentSpaceModel64 = features::TangentSpaceModel<f64>;
pub type MdmModel64 = classify::MdmModel<f64>;
pub type MlpModel64 = classify::MlpModel<f64>;
pub type LinearSvmModel64 = classify::LinearSvmModel<f64>;
