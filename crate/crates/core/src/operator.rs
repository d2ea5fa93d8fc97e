//! Operator calculus for bump-weighted walks.
//!
//! `C_m(t)` is the matrix whose `(x, y)` entry sums `t^bc(C)` over walks of
//! length `m` from `x` to `y`. It obeys the three-term recursion
//!
//! ```text
//! C_2 = C_1^2 - (1-t)(Q + I)
//! C_m = C_{m-1} C_1 - (1-t) C_{m-2} Q(t)      (m >= 3)
//! ```
//!
//! with `C_1 = A`, `Q = D - I` and `Q(t) = D - (1-t)I`. From the sequence we
//! derive the correction vector `R_m(t)`, the cyclic-bump operator
//! `C_m^cbc(t)`, and checks of every generating-function identity relating
//! them to the enumeration oracle.

use nalgebra::{DMatrix, SymmetricEigen};
use thiserror::Error;

use crate::graph::{Graph, VertexId};
use crate::paths::{self, Filter, PathError, Weight};
use crate::report::{compare_operator_series, compare_series, IdentityReport, Mismatch};
use crate::series::{int, OperatorSeries, PolyMatrix, SeriesError, TPoly, USeries};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("order {got} is below the minimum {min} for this check")]
    InvalidOrder { got: usize, min: usize },
    #[error(transparent)]
    Oracle(#[from] PathError),
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// `(1-t)^k`.
fn one_minus_t_pow(k: usize) -> TPoly {
    TPoly::one_minus_t().pow(k)
}

/// `1 - t^2`.
fn one_minus_t_sq() -> TPoly {
    TPoly::from_ints(&[1, 0, -1])
}

fn degree_poly(g: &Graph, x: VertexId) -> TPoly {
    TPoly::from_int(g.degree(x) as i64)
}

/// `[C_0(t), ..., C_M(t)]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CmSequence {
    matrices: Vec<PolyMatrix>,
}

impl CmSequence {
    pub fn get(&self, m: usize) -> &PolyMatrix {
        &self.matrices[m]
    }

    pub fn order(&self) -> usize {
        self.matrices.len() - 1
    }

    pub fn matrices(&self) -> &[PolyMatrix] {
        &self.matrices
    }

    /// `Σ_{m=0}^{M} C_m u^m` as an operator series of order `M`.
    pub fn generating_series(&self) -> OperatorSeries {
        OperatorSeries::from_coeffs(self.matrices.clone(), self.order())
            .expect("square matrices of one size")
    }
}

/// Runs the recursion up to `C_order`.
pub fn cm_sequence(g: &Graph, order: usize) -> CmSequence {
    let n = g.vertex_count();
    let omt = TPoly::one_minus_t();
    let ops = g.operators();
    let mut matrices = vec![PolyMatrix::identity(n)];
    if order >= 1 {
        matrices.push(ops.adjacency.clone());
    }
    if order >= 2 {
        // A^2 - (1-t)(Q + I) = A^2 - (1-t) D
        let mut c2 = &ops.adjacency * &ops.adjacency;
        for x in 0..n {
            *c2.get_mut(x, x) -= &(&degree_poly(g, x) * &omt);
        }
        matrices.push(c2);
    }
    // (1-t) Q(t)(y) = (1-t)(deg(y) - 1 + t)
    let damping: Vec<TPoly> = (0..n)
        .map(|y| &omt * &TPoly::from_ints(&[g.degree(y) as i64 - 1, 1]))
        .collect();
    for m in 3..=order {
        let prev = &matrices[m - 1];
        let prev2 = &matrices[m - 2];
        let next = PolyMatrix::from_fn(n, n, |x, y| {
            let mut acc = TPoly::zero();
            for z in g.neighbors(y) {
                acc += prev.get(x, z);
            }
            let back = prev2.get(x, y);
            if !back.is_zero() {
                acc -= &(back * &damping[y]);
            }
            acc
        });
        matrices.push(next);
    }
    CmSequence { matrices }
}

/// Numeric `C_m(t)` for `m = 0..=order` by the same recursion in `f64`.
pub fn cm_sequence_numeric(g: &Graph, t: f64, order: usize) -> Vec<DMatrix<f64>> {
    let n = g.vertex_count();
    let a = g.adjacency_f64();
    let mut out = vec![DMatrix::identity(n, n)];
    if order >= 1 {
        out.push(a.clone());
    }
    if order >= 2 {
        let mut c2 = &a * &a;
        for x in 0..n {
            c2[(x, x)] -= (1.0 - t) * g.degree(x) as f64;
        }
        out.push(c2);
    }
    let damping = DMatrix::from_diagonal(&nalgebra::DVector::from_fn(n, |y, _| {
        (1.0 - t) * (g.degree(y) as f64 - 1.0 + t)
    }));
    for m in 3..=order {
        let next = &out[m - 1] * &a - &out[m - 2] * &damping;
        out.push(next);
    }
    out
}

/// How `[Δ_X C](x, x)` is read inside `R_m(t)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DeltaReading {
    /// The Laplacian applied to the diagonal function `y ↦ C(y, y)`.
    #[default]
    Diagonal,
    /// The `(x, x)` entry of the matrix product `Δ_X · C`.
    OperatorProduct,
}

/// `deg(x) C(x, x) − Σ_{e ∈ E_x} C(t(e), t(e))` for every vertex `x`.
pub fn delta_diag(g: &Graph, c: &PolyMatrix) -> Vec<TPoly> {
    delta_with(g, c, DeltaReading::Diagonal)
}

pub fn delta_with(g: &Graph, c: &PolyMatrix, reading: DeltaReading) -> Vec<TPoly> {
    (0..g.vertex_count())
        .map(|x| {
            let mut acc = c.get(x, x).scale(&int(g.degree(x) as i64));
            for y in g.neighbors(x) {
                match reading {
                    DeltaReading::Diagonal => acc -= c.get(y, y),
                    DeltaReading::OperatorProduct => acc -= c.get(y, x),
                }
            }
            acc
        })
        .collect()
}

/// `Σ_{i=1}^{j} (1-t)^{2(j-i)} (1-t^2)^{i-1}`.
fn r_weight(j: usize) -> TPoly {
    let mut acc = TPoly::zero();
    for i in 1..=j {
        acc += &(&one_minus_t_pow(2 * (j - i)) * &one_minus_t_sq().pow(i - 1));
    }
    acc
}

/// `R_m(t)(x)` for every vertex; needs `seq` up to order `m - 2`.
pub fn r_m(g: &Graph, seq: &CmSequence, m: usize) -> Vec<TPoly> {
    r_m_with(g, seq, m, DeltaReading::Diagonal)
}

pub fn r_m_with(g: &Graph, seq: &CmSequence, m: usize, reading: DeltaReading) -> Vec<TPoly> {
    let n = g.vertex_count();
    let mut out = vec![TPoly::zero(); n];
    let top = m.div_ceil(2).saturating_sub(1);
    for j in 1..=top {
        let w = r_weight(j);
        for (x, d) in delta_with(g, seq.get(m - 2 * j), reading).into_iter().enumerate() {
            if !d.is_zero() {
                out[x] += &(&w * &d);
            }
        }
    }
    out
}

/// `C_m^cbc(t)(x0, x) = [C_m^cbc(t) δ_{x0}](x)`, given `R_m(t)` per vertex.
///
/// Entries follow the operator convention `B(x0, x) = Bδ_{x0}(x)`, i.e. row
/// `x`, column `x0`, so the left diagonal factor is taken at `x`. The division
/// by `1 - t` in `(Q(t) - I(t))/(1-t)` is absorbed into the sum, which
/// therefore carries `(1-t)^{2j-1}` and stays polynomial.
fn cm_cbc_entry(
    g: &Graph,
    seq: &CmSequence,
    r: &[TPoly],
    m: usize,
    x0: VertexId,
    x: VertexId,
) -> TPoly {
    let c = seq.get(m).get(x, x0).clone();
    match m {
        0 | 1 => c,
        2 => &c * &TPoly::t(),
        _ => {
            let mut sum = TPoly::zero();
            for j in 1..m.div_ceil(2) {
                let entry = seq.get(m - 2 * j).get(x, x0);
                if !entry.is_zero() {
                    sum += &(entry * &one_minus_t_pow(2 * j - 1));
                }
            }
            let left = TPoly::from_ints(&[g.degree(x) as i64 - 2, 2]);
            let mut out = &c - &(&left * &sum);
            if x == x0 {
                out += &(&TPoly::one_minus_t() * &r[x0]);
                if m.is_multiple_of(2) {
                    let corr = &(&one_minus_t_pow(m - 1) * &TPoly::t()) * &degree_poly(g, x0);
                    out -= &corr;
                }
            }
            out
        }
    }
}

/// The cyclic-bump operator `C_m^cbc(t)`; needs `seq` up to order `m`.
pub fn cm_cbc(g: &Graph, seq: &CmSequence, m: usize) -> PolyMatrix {
    let r = r_m(g, seq, m);
    let n = g.vertex_count();
    PolyMatrix::from_fn(n, n, |row, col| cm_cbc_entry(g, seq, &r, m, col, row))
}

/// `[C_0^cbc(x0,x), ..., C_M^cbc(x0,x)]` without materializing full matrices.
pub fn cm_cbc_entries(g: &Graph, seq: &CmSequence, x0: VertexId, x: VertexId) -> Vec<TPoly> {
    cm_cbc_entries_with(g, seq, x0, x, DeltaReading::Diagonal)
}

fn cm_cbc_entries_with(
    g: &Graph,
    seq: &CmSequence,
    x0: VertexId,
    x: VertexId,
    reading: DeltaReading,
) -> Vec<TPoly> {
    (0..=seq.order())
        .map(|m| {
            let r = if x == x0 && m >= 3 {
                r_m_with(g, seq, m, reading)
            } else {
                vec![TPoly::zero(); g.vertex_count()]
            };
            cm_cbc_entry(g, seq, &r, m, x0, x)
        })
        .collect()
}

/// `(M + sqrt(M^2 + 4(|t|+1)M)) / 2` with `M` the maximum degree.
pub fn alpha(g: &Graph, t_abs: f64) -> f64 {
    alpha_for_degree(g.max_degree(), t_abs)
}

pub fn alpha_for_degree(max_degree: usize, t_abs: f64) -> f64 {
    let m = max_degree as f64;
    (m + (m * m + 4.0 * (t_abs.abs() + 1.0) * m).sqrt()) / 2.0
}

/// Largest absolute eigenvalue of a symmetric matrix.
pub fn spectral_norm_symmetric(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn diagonal_series(seq: &CmSequence, x0: VertexId, order: usize) -> USeries {
    USeries::from_coeffs(
        (0..=order)
            .map(|m| {
                if m == 0 {
                    TPoly::zero()
                } else {
                    seq.get(m).get(x0, x0).clone()
                }
            })
            .collect(),
        order,
    )
}

fn delta_series(g: &Graph, seq: &CmSequence, x0: VertexId, order: usize) -> USeries {
    USeries::from_coeffs(
        (0..=order)
            .map(|m| {
                if m == 0 {
                    TPoly::zero()
                } else {
                    delta_diag(g, seq.get(m)).swap_remove(x0)
                }
            })
            .collect(),
        order,
    )
}

/// `c_0 + c_2 u^2 + c_4 u^4` with the given polynomial coefficients.
fn even_poly(order: usize, c0: TPoly, c2: TPoly, c4: TPoly) -> USeries {
    USeries::from_coeffs(vec![c0, TPoly::zero(), c2, TPoly::zero(), c4], order)
}

fn oracle_series(
    g: &Graph,
    x0: VertexId,
    order: usize,
    weight: Weight,
    filter: Filter,
) -> Result<USeries, EngineError> {
    let mut coeffs = vec![TPoly::zero()];
    for m in 1..=order {
        coeffs.push(paths::enumerate_closed_weighted(g, x0, m, weight, filter)?);
    }
    Ok(USeries::from_coeffs(coeffs, order))
}

fn require_order(order: usize, min: usize) -> Result<(), EngineError> {
    if order < min {
        Err(EngineError::InvalidOrder { got: order, min })
    } else {
        Ok(())
    }
}

fn first_coefficient_mismatch(pairs: impl Iterator<Item = (usize, TPoly, TPoly)>) -> Option<Mismatch> {
    for (m, lhs, rhs) in pairs {
        if lhs != rhs {
            return Some(Mismatch {
                coefficient: m,
                entry: None,
                lhs: lhs.to_string(),
                rhs: rhs.to_string(),
            });
        }
    }
    None
}

/// Tail-free path identities relating `N(t, x0 : u)` to `C(t, x0 : u)`:
/// the generating-function form and the per-coefficient form for `m >= 3`.
pub fn check_fnc(g: &Graph, x0: VertexId, order: usize) -> Result<Vec<IdentityReport>, EngineError> {
    require_order(order, 4)?;
    let seq = cm_sequence(g, order);
    let n_series = oracle_series(g, x0, order, Weight::Cbc, Filter::NoTail)?;
    let c_series = diagonal_series(&seq, x0, order);
    let dc_series = delta_series(g, &seq, x0, order);
    let deg = degree_poly(g, x0);

    let lhs = &even_poly(order, TPoly::one(), -one_minus_t_pow(2), TPoly::zero()) * &n_series;
    let left_factor = even_poly(order, TPoly::one(), &one_minus_t_sq() - &deg, TPoly::zero());
    let const_term = USeries::monomial(-(&deg * &TPoly::t()), 2, order);
    let resolvent = even_poly(order, TPoly::one(), -one_minus_t_sq(), TPoly::zero()).inverse()?;
    let rhs = &(&(&left_factor * &c_series) + &const_term) + &(&dc_series.shift(2) * &resolvent);
    let series_report = IdentityReport::new(
        "fNC/series",
        g.name(),
        Some(x0),
        order,
        compare_series(&lhs, &rhs),
    );

    let coeff_pairs = (3..=order).map(|m| {
        let c = |k: usize| seq.get(k).get(x0, x0).clone();
        let mut sum = TPoly::zero();
        for j in 1..m.div_ceil(2) {
            sum += &(&one_minus_t_pow(2 * (j - 1)) * &c(m - 2 * j));
        }
        let factor = TPoly::from_ints(&[g.degree(x0) as i64 - 2, 2]);
        let mut rhs = &c(m) - &(&factor * &sum);
        rhs += &r_m(g, &seq, m)[x0];
        if m % 2 == 0 {
            rhs -= &(&(&one_minus_t_pow(m - 2) * &TPoly::t()) * &deg);
        }
        (m, n_series.coeff(m).clone(), rhs)
    });
    let coeff_report = IdentityReport::new(
        "fNC/coefficients",
        g.name(),
        Some(x0),
        order,
        first_coefficient_mismatch(coeff_pairs),
    );
    Ok(vec![series_report, coeff_report])
}

/// Cyclic-bump identities: the generating-function form relating
/// `C^cbc(t, x0 : u)` to `C(t, x0 : u)` and the per-coefficient form.
pub fn check_cbc(g: &Graph, x0: VertexId, order: usize) -> Result<Vec<IdentityReport>, EngineError> {
    check_cbc_with(g, x0, order, DeltaReading::Diagonal)
}

pub fn check_cbc_with(
    g: &Graph,
    x0: VertexId,
    order: usize,
    reading: DeltaReading,
) -> Result<Vec<IdentityReport>, EngineError> {
    require_order(order, 4)?;
    let seq = cm_sequence(g, order);
    let cbc_series = oracle_series(g, x0, order, Weight::Cbc, Filter::All)?;
    let c_series = diagonal_series(&seq, x0, order);
    let dc_series = USeries::from_coeffs(
        (0..=order)
            .map(|m| {
                if m == 0 {
                    TPoly::zero()
                } else {
                    delta_with(g, seq.get(m), reading).swap_remove(x0)
                }
            })
            .collect(),
        order,
    );
    let deg = degree_poly(g, x0);
    let omt = TPoly::one_minus_t();

    let q1 = even_poly(order, TPoly::one(), -one_minus_t_sq(), TPoly::zero());
    let q2 = even_poly(order, TPoly::one(), -one_minus_t_pow(2), TPoly::zero());
    let lhs = &(&q1 * &q2) * &cbc_series;

    // 1 - (1-t)(deg + 2t)u^2 + (1-t^2)(1-t)(deg - (1-t))u^4, acting on C
    let c2 = -(&omt * &(&deg + &TPoly::from_ints(&[0, 2])));
    let c4 = &(&one_minus_t_sq() * &omt) * &(&deg - &omt);
    let poly = even_poly(order, TPoly::one(), c2, c4);
    // the -Δ part of the bracket contributes +(1-t) u^2 ΔC
    let delta_part = dc_series.shift(2).scale(&omt);
    let const_part = q1
        .shift(2)
        .scale(&(&(&TPoly::t() * &deg) * &omt))
        .scale(&TPoly::from_int(-1));
    let rhs = &(&(&poly * &c_series) + &delta_part) + &const_part;
    let series_report = IdentityReport::new(
        "cbc/series",
        g.name(),
        Some(x0),
        order,
        compare_series(&lhs, &rhs),
    );

    let entries = cm_cbc_entries_with(g, &seq, x0, x0, reading);
    let coeff_report = IdentityReport::new(
        "cbc/coefficients",
        g.name(),
        Some(x0),
        order,
        first_coefficient_mismatch(
            (3..=order).map(|m| (m, cbc_series.coeff(m).clone(), entries[m].clone())),
        ),
    );
    Ok(vec![series_report, coeff_report])
}

/// `I - uA + (1-t) Q(t) u^2`.
pub fn resolvent_factor(g: &Graph, order: usize) -> OperatorSeries {
    let n = g.vertex_count();
    let ops = g.operators();
    let omt = TPoly::one_minus_t();
    let quad = PolyMatrix::diagonal(
        (0..n)
            .map(|x| &omt * &TPoly::from_ints(&[g.degree(x) as i64 - 1, 1]))
            .collect(),
    );
    OperatorSeries::from_coeffs(
        vec![
            PolyMatrix::identity(n),
            ops.adjacency.scale(&TPoly::from_int(-1)),
            quad,
        ],
        order,
    )
    .expect("square matrices of one size")
}

/// The two operator-series inverses of `I - uA + (1-t)Q(t)u^2`.
pub fn check_fc(g: &Graph, order: usize) -> Result<Vec<IdentityReport>, EngineError> {
    require_order(order, 2)?;
    let n = g.vertex_count();
    let seq = cm_sequence(g, order);
    let factor = resolvent_factor(g, order);

    let lhs1 = seq.generating_series().checked_mul(&factor)?;
    let scalar = even_poly(order, TPoly::one(), -one_minus_t_pow(2), TPoly::zero());
    let rhs1 = OperatorSeries::identity(n, order).scale_series(&scalar)?;
    let r1 = IdentityReport::new("fC/first", g.name(), None, order, compare_operator_series(&lhs1, &rhs1));

    let mut partial = Vec::with_capacity(order + 1);
    for m in 0..=order {
        let mut acc = PolyMatrix::zeros(n, n);
        for j in 0..=m / 2 {
            acc = &acc + &seq.get(m - 2 * j).scale(&one_minus_t_pow(2 * j));
        }
        partial.push(acc);
    }
    let lhs2 = OperatorSeries::from_coeffs(partial, order)?.checked_mul(&factor)?;
    let rhs2 = OperatorSeries::identity(n, order);
    let r2 = IdentityReport::new("fC/second", g.name(), None, order, compare_operator_series(&lhs2, &rhs2));
    Ok(vec![r1, r2])
}

/// `Σ R_m u^m = u^2 ΔC(t,·:u)(x0) / ((1-(1-t)^2 u^2)(1-(1-t^2)u^2))`.
pub fn check_r_generating(g: &Graph, x0: VertexId, order: usize) -> Result<IdentityReport, EngineError> {
    require_order(order, 3)?;
    let seq = cm_sequence(g, order);
    let lhs = USeries::from_coeffs(
        (0..=order)
            .map(|m| if m == 0 { TPoly::zero() } else { r_m(g, &seq, m).swap_remove(x0) })
            .collect(),
        order,
    );
    let denom = &even_poly(order, TPoly::one(), -one_minus_t_pow(2), TPoly::zero())
        * &even_poly(order, TPoly::one(), -one_minus_t_sq(), TPoly::zero());
    let rhs = delta_series(g, &seq, x0, order).shift(2).checked_div(&denom)?;
    Ok(IdentityReport::new(
        "R-generating",
        g.name(),
        Some(x0),
        order,
        compare_series(&lhs, &rhs),
    ))
}
