//! Stark-dressed rotational states of ¹Σ⁺ polar diatomic molecules, their
//! dynamic polarizability tensors, and state-insensitive ("magic") trapping
//! conditions in combined DC and optical fields.

pub mod angular;
pub mod stark;
pub mod units;
pub mod polarizability;
pub mod magic;
pub mod lattice;
