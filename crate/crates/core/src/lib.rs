//! Exact verification engine for Kac-type identities of measure-preserving
//! Z^d-actions, with Monte-Carlo harnesses for the continuous cases.

pub mod action;
pub mod chain;
pub mod circle;
pub mod equidecomp;
pub mod lp;
pub mod mc;
pub mod odometer;
pub mod poset;
pub mod rational;
pub mod renewal;
pub mod returns;
pub mod sweep;

pub use action::{FiniteSystem, GroupElement, PointSet};
pub use rational::Rational;
