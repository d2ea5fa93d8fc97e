//! Generalized Bartholdi zeta functions of finite simple graphs.
//!
//! The crate computes the rooted Bartholdi zeta function `Z_X(u, t, x0, x)`
//! by four independent routes (path enumeration, the operator recursion for
//! `C_m(t)`, the determinant-type product formula and, on regular graphs, the
//! local spectrum of the Laplacian) together with the modified-Bessel series
//! for the heat kernel of a regular graph. All symbolic identities are checked
//! coefficient by coefficient in exact rational arithmetic.

pub mod graph;
pub mod paths;
pub mod series;
pub mod operator;
pub mod report;
pub mod zeta;
pub mod heat;
pub mod cli;
