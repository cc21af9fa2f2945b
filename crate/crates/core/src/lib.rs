pub mod engine;
pub mod error;
pub mod encoding;
pub mod net;
pub mod env;
pub mod rng;
pub mod metrics;
pub mod ppo;
pub mod arena;
pub mod pretrain;
pub mod selfplay;
pub mod config;
