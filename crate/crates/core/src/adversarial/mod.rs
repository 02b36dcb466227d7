//! Adversarial training of implicit generators with proximal penalties.

mod loss;
mod nets;
mod train;

pub use loss::{
    direct_w1_loss, direct_w1_loss_to_target, disc_loss, disc_loss_tape, fit_potential,
    gen_loss_nonsaturating, gen_loss_tape, potential_objective_tape,
};
pub use nets::{DiscriminatorSpec, PotentialKind, PotentialSpec, OUTPUT_CLAMP};
pub use train::{
    train_algorithm1, train_algorithm2, train_direct_w1, Discriminator, EvalSet, LossMode,
    Potential, TrainConfig, TrainLog, TrainResult, TrainRow,
};
