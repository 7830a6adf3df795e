pub mod cli;
pub mod crypto;
pub mod node;
pub mod proofs;
pub mod simnet;
