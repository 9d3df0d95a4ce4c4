//! Amplitude encoding, the QCNN template and the ε-threshold policy.

mod encode;
mod model;
mod policy;
mod qcnn;

pub use encode::{amplitude_encode, EncodedSample};
pub use model::{Model, ModelFile, MODEL_FORMAT_VERSION};
pub use policy::{
    classify, ClassificationPolicy, Label, BOUNDARY_TOLERANCE, PROBABILITY_TOLERANCE,
};
pub use qcnn::{
    build_qcnn, build_qcnn_with_block, forward, shot_estimate, Ansatz, Classifier, ConvBlock,
    CustomAnsatz, ParamGate, QcnnArchitecture, Stage, POOL_PARAMS,
};

pub(crate) use policy::check_probabilities;
