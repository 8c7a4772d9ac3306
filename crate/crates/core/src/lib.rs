//! Action recognition from motion history templates.
//!
//! The pipeline turns a grayscale frame sequence into a temporal template
//! (motion-history image plus motion-energy image), describes both images
//! with rotation/translation/scale invariant moments, and classifies the
//! resulting 16-dimensional feature vector with KNN or a small MLP.
//!
//! * [`imgio`]: PGM frames, frame directories and sequence manifests
//! * [`imgproc`]: smoothing, frame differencing, binary opening
//! * [`temporal`]: MHI/MEI accumulation
//! * [`moments`]: moments, Hu and Flusser invariants, feature vectors
//! * [`classify`]: splitting, standardization, KNN, MLP, confusion matrices
//! * [`dataset`], [`model_file`]: on-disk feature dumps and models

pub mod classify;
pub mod dataset;
pub mod imgio;
pub mod imgproc;
pub mod model_file;
pub mod moments;
pub mod temporal;

pub use classify::{Classifier, LabeledSample};
pub use imgio::{FrameSequence, GrayFrame, SequenceRecord};
pub use imgproc::BinaryMask;
pub use model_file::{ModelFile, TrainedModel};
pub use moments::FeatureVector;
pub use temporal::{MotionHistory, TemporalTemplate};

/// Default frame-difference threshold.
pub const DEFAULT_THETA: u8 = 25;
