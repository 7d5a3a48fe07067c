//! Coordinate networks: hash-grid encoding, MLP, reverse mode and Adam.

pub mod adam;
pub mod hashgrid;
pub mod mlp;
pub mod network;

pub use adam::{AdamConfig, AdamState};
pub use hashgrid::{hash_encode, hash_slot, scatter_gradient, Encoding, HashGridConfig, TableGrad, HASH_PRIMES};
pub use mlp::{Activation, Mlp, MlpCache};
pub use network::{complex_to_real_pairs, real_pairs_to_complex, CoordinateNetwork, ForwardCache, NetworkGrads, Tensor, HIDDEN_WIDTH};
