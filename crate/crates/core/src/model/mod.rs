//! Affordance model: head, optimizer, training loops and checkpoints.

pub mod checkpoint;
pub mod head;
pub mod optim;
pub mod train;

pub use checkpoint::Checkpoint;
pub use head::{default_hidden, AffordanceHead};
pub use train::{finetune, loss, train, Example, FinetuneMode, Network, TrainConfig, TrainingData};
