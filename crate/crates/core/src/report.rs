//! Pass/fail records emitted by identity checks.

use serde::Serialize;
use thiserror::Error;

use crate::series::{OperatorSeries, USeries};

/// Where two sides of an identity first disagree.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Mismatch {
    /// Power of `u` (or index `m`) of the failing coefficient.
    pub coefficient: usize,
    /// Matrix entry, for operator identities.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub entry: Option<(usize, usize)>,
    pub lhs: String,
    pub rhs: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IdentityReport {
    pub identity: String,
    pub graph: String,
    pub root: Option<usize>,
    pub order: usize,
    pub pass: bool,
    pub first_failure: Option<Mismatch>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("identity {identity} fails on {graph} at u^{}", .failure.coefficient)]
pub struct IdentityViolation {
    pub identity: String,
    pub graph: String,
    pub failure: Mismatch,
}

impl IdentityReport {
    pub fn new(
        identity: impl Into<String>,
        graph: impl Into<String>,
        root: Option<usize>,
        order: usize,
        first_failure: Option<Mismatch>,
    ) -> Self {
        IdentityReport {
            identity: identity.into(),
            graph: graph.into(),
            root,
            order,
            pass: first_failure.is_none(),
            first_failure,
        }
    }

    pub fn into_result(self) -> Result<Self, IdentityViolation> {
        match self.first_failure.clone() {
            None => Ok(self),
            Some(failure) => Err(IdentityViolation {
                identity: self.identity,
                graph: self.graph,
                failure,
            }),
        }
    }
}

/// First coefficient where two scalar series differ.
pub fn compare_series(lhs: &USeries, rhs: &USeries) -> Option<Mismatch> {
    let top = lhs.order().min(rhs.order());
    (0..=top)
        .find(|&k| lhs.coeff(k) != rhs.coeff(k))
        .map(|k| Mismatch {
            coefficient: k,
            entry: None,
            lhs: lhs.coeff(k).to_string(),
            rhs: rhs.coeff(k).to_string(),
        })
}

/// First coefficient and entry where two operator series differ.
pub fn compare_operator_series(lhs: &OperatorSeries, rhs: &OperatorSeries) -> Option<Mismatch> {
    let top = lhs.order().min(rhs.order());
    for k in 0..=top {
        let (a, b) = (lhs.coeff(k), rhs.coeff(k));
        if a.rows() != b.rows() || a.cols() != b.cols() {
            return Some(Mismatch {
                coefficient: k,
                entry: None,
                lhs: format!("{}x{}", a.rows(), a.cols()),
                rhs: format!("{}x{}", b.rows(), b.cols()),
            });
        }
        for i in 0..a.rows() {
            for j in 0..a.cols() {
                if a.get(i, j) != b.get(i, j) {
                    return Some(Mismatch {
                        coefficient: k,
                        entry: Some((i, j)),
                        lhs: a.get(i, j).to_string(),
                        rhs: b.get(i, j).to_string(),
                    });
                }
            }
        }
    }
    None
}
