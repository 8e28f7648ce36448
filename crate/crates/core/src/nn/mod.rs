//! Small differentiable-network toolkit: matrices, a reverse-mode tape,
//! dense and graph-convolution layers, a diagonal Gaussian policy head and
//! the actor-critic network built from them.

mod gradcheck;
mod layers;
mod matrix;
mod model;
mod params;
mod policy;
mod tape;

pub use gradcheck::{grad_check, GradCheckReport, DEFAULT_EPS, REL_ERROR_FLOOR};
pub use layers::{gcn_forward, Activation, GcnLayer, GraphEncoder, Linear, Mlp};
pub use matrix::Matrix;
pub use model::{
    flat_features, graph_adjacency, prepare_input, prepare_input_cached, ActorCritic, BatchOutput, EncodedInput,
    EncoderMode, NetworkConfig, CHECKPOINT_VERSION,
};
pub use params::{ParamBlock, ParamId, ParamStore};
pub use policy::{entropy_on_tape, log_prob_on_tape, DiagGaussian, HALF_LOG_TWO_PI};
pub use tape::{Tape, Var};
