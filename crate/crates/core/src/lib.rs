//! Density evolution, belief-propagation simulation and GF(2) ensemble audits
//! for LDPC codes over asymmetric binary-input memoryless channels.

pub mod bpsim;
pub mod channels;
pub mod cli;
pub mod de;
pub mod density;
pub mod ensemble;
pub mod gf2;
pub mod optimize;
pub mod rankstats;
