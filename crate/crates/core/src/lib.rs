//! Norm derivatives and orthogonality in finite-dimensional real normed spaces.
//!
//! Norms are written in a small combinator language ([`normparse`]) and
//! evaluated on [`Vector`]s ([`normcore`]). On top of the exact one-sided
//! norm derivatives `rho±` ([`derivatives`]) the crate decides orthogonality
//! relations, solves the closed-form orthogonalization problems
//! ([`orthogonality`]), measures `rho_{alpha,beta}`-angles and probes
//! smoothness, strict convexity and the characterization identities
//! ([`geometry`]), and searches for relation counterexamples and
//! violations of the orthogonality-preserver conditions ([`explorer`]).

pub mod derivatives;
pub mod error;
pub mod explorer;
pub mod geometry;
pub mod normcore;
pub mod normparse;
pub mod orthogonality;
mod search;

pub use derivatives::{
    dir_deriv_exact, rho, rho_ab, rho_lambda, rho_pair, rho_pm, rho_pm_numeric, sip, AlphaBeta,
    DerivResult, Lambda, Method, Side,
};
pub use error::{Error, Result};
pub use normcore::{eval_norm, parse_vector, sphere_sample, SampleConfig, Vector};
pub use normparse::{parse_norm, print_norm, Exponent, NormAst, NormNode, ParseError};
pub use orthogonality::{is_orthogonal, OrthoVerdict, Relation};
