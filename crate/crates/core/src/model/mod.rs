//! Multi-view fusion into a Gaussian latent, the class discriminator, the
//! variational objective, training and prediction.

mod classifier;
mod config;
mod gaussian;
mod gradcheck;
mod network;

pub use classifier::{
    argmax, fit, macro_f1, train, EncodedArticle, EpochRecord, Forward, LossNodes, LossValue, Model, PredictionRecord,
    Stochastic, TrainingLog,
};
pub use config::{Architecture, LatentMode, Preset, Profile, TrainingConfig, ViewMask};
pub use gaussian::{
    kl_diag_gauss, kl_to_standard, sample_latent, GaussianDiag, LOGVAR_BIAS_INIT, LOGVAR_MAX, LOGVAR_MIN,
};
pub use gradcheck::{gradcheck_suite, GradCheckCase, GRADCHECK_STEP, GRADCHECK_TOLERANCE};
pub use network::{
    concat_views, discriminate, discriminator_logits, infer_posterior, init_discriminator, init_inference_net,
    posterior_nodes, ViewVectors, NUM_CLASSES,
};
