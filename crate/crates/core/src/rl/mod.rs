//! Proximal policy optimization with separate actor and critic MLPs.

mod checkpoint;
mod dist;
mod mlp;
mod optim;
mod ppo;

pub use checkpoint::{
    load_checkpoint, network_digest, read_checkpoint, save_checkpoint, write_checkpoint,
    CHECKPOINT_MAGIC,
};
pub use dist::{argmax, log_softmax, sample_action, softmax};
pub use mlp::{ActorCritic, ForwardCache, Mlp};
pub use optim::{Optimizer, OptimizerKind};
pub use ppo::{
    advantage, clipped_surrogate, discounted_returns, ppo_update, surrogate_objective,
    surrogate_with_grad, value_loss, value_loss_with_grad, PolicySample, PpoAgent, PpoHyperparams,
    RolloutBuffer, Transition, UpdateStats, ValueSample,
};
