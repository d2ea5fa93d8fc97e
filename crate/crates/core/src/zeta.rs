//! The rooted Bartholdi zeta function `Z_X(u, t, x0, x)` by four routes.
//!
//! * the defining log-series `exp(Σ C_m^cbc(t)(x0, x) u^m / m)`,
//! * the determinant-type product with the commutator correction,
//! * the local spectrum of `Δ_X` on a finite regular graph (numeric),
//! * the Euler product over primitive rooted closed paths.
//!
//! Operator entries follow `B(x0, x) = Bδ_{x0}(x)`, i.e. row `x`, column `x0`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use thiserror::Error;

use crate::graph::{Graph, VertexId};
use crate::operator::{alpha, cm_cbc_entries, cm_sequence, cm_sequence_numeric, r_m};
use crate::paths::{self, PathError};
use crate::series::{int, rat, OperatorSeries, PolyMatrix, SeriesError, TPoly, USeries};

/// Order used for the numeric `R_m` correction in [`zeta_spectral`].
pub const SPECTRAL_R_ORDER: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ZetaError {
    #[error("vertex {0} is not in the graph")]
    InvalidVertex(VertexId),
    #[error("the graph is not regular")]
    NotRegular,
    #[error("(u, t) = ({u}, {t}) is outside the admissible region: {reason}")]
    Domain { u: f64, t: f64, reason: String },
    #[error("symmetric eigensolver did not converge")]
    EigensolverFailure,
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Oracle(#[from] PathError),
}

fn check_vertex(g: &Graph, v: VertexId) -> Result<(), ZetaError> {
    if v < g.vertex_count() {
        Ok(())
    } else {
        Err(ZetaError::InvalidVertex(v))
    }
}

/// `Σ_{m=1}^{M} C_m^cbc(t)(x0, x) u^m / m`.
pub fn log_zeta_series(g: &Graph, x0: VertexId, x: VertexId, order: usize) -> Result<USeries, ZetaError> {
    check_vertex(g, x0)?;
    check_vertex(g, x)?;
    let seq = cm_sequence(g, order);
    let entries = cm_cbc_entries(g, &seq, x0, x);
    let coeffs = entries
        .into_iter()
        .enumerate()
        .map(|(m, c)| if m == 0 { TPoly::zero() } else { c.scale(&rat(1, m as i64)) })
        .collect();
    Ok(USeries::from_coeffs(coeffs, order))
}

/// `Z_X(u, t, x0, x)` from its defining log-series, mod `u^{M+1}`.
pub fn zeta_log_series(g: &Graph, x0: VertexId, x: VertexId, order: usize) -> Result<USeries, ZetaError> {
    Ok(log_zeta_series(g, x0, x, order)?.exp()?)
}

/// `f(u) = uA - u^2 (1-t) Q(t)` as an operator series.
fn f_series(g: &Graph, order: usize) -> OperatorSeries {
    let n = g.vertex_count();
    let omt = TPoly::one_minus_t();
    let quad = PolyMatrix::diagonal(
        (0..n)
            .map(|y| -(&omt * &TPoly::from_ints(&[g.degree(y) as i64 - 1, 1])))
            .collect(),
    );
    OperatorSeries::from_coeffs(vec![PolyMatrix::zeros(n, n), g.operators().adjacency, quad], order)
        .expect("square matrices of one size")
}

/// `[e_v^T f^k]` for `k = 0..=order`, each a `1 × n` series.
fn row_powers(f: &OperatorSeries, v: VertexId) -> Result<Vec<OperatorSeries>, SeriesError> {
    let order = f.order();
    let mut rows = vec![OperatorSeries::identity(f.rows(), order).row(v)];
    for k in 1..=order {
        let next = rows[k - 1].checked_mul(f)?;
        rows.push(next);
    }
    Ok(rows)
}

fn dot(a: &OperatorSeries, b: &OperatorSeries) -> USeries {
    let mut acc = USeries::zero(a.order());
    for y in 0..a.cols() {
        let (ay, by) = (a.entry(0, y), b.entry(0, y));
        if !ay.is_zero() && !by.is_zero() {
            acc = &acc + &(&ay * &by);
        }
    }
    acc
}

/// The four factors of the product formula, kept apart for inspection.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RhsFactors {
    pub prefactor: USeries,
    pub determinant: USeries,
    pub commutator: USeries,
    pub correction: USeries,
}

impl RhsFactors {
    pub fn product(&self) -> USeries {
        &(&(&self.prefactor * &self.determinant) * &self.commutator) * &self.correction
    }
}

pub fn zeta_rhs_factors(g: &Graph, x0: VertexId, x: VertexId, order: usize) -> Result<RhsFactors, ZetaError> {
    check_vertex(g, x0)?;
    check_vertex(g, x)?;
    let omt = TPoly::one_minus_t();
    let diagonal = x == x0;
    let deg0 = g.degree(x0) as i64;

    let prefactor = if diagonal {
        let base = USeries::from_coeffs(
            vec![TPoly::one(), TPoly::zero(), -TPoly::one_minus_t().pow(2)],
            order,
        );
        base.pow_rational(&rat(-(deg0 - 2), 2))?
    } else {
        USeries::one(order)
    };

    // -log(I - f) = Σ_k f^k / k
    let f = f_series(g, order);
    let from_x = row_powers(&f, x)?;
    let mut neg_log = USeries::zero(order);
    for (k, row) in from_x.iter().enumerate().skip(1) {
        neg_log = &neg_log + &row.entry(0, x0).scale_rational(&rat(1, k as i64));
    }
    let determinant = neg_log.exp()?;

    // ∫_0^u (1-t) z^2 Σ_n (1/n) Σ_j j [f^{n-1-j} B f^{j-1}](x0, x) dz, B = AD - DA
    let ops = g.operators();
    let bracket = &(&ops.adjacency * &ops.valency) - &(&ops.valency * &ops.adjacency);
    let commutator = if bracket.is_zero() || order < 3 {
        USeries::one(order)
    } else {
        let b = OperatorSeries::constant(bracket, order);
        let from_x_b = from_x
            .iter()
            .map(|r| r.checked_mul(&b))
            .collect::<Result<Vec<_>, _>>()?;
        let from_x0 = if diagonal { from_x.clone() } else { row_powers(&f, x0)? };
        let mut sum = USeries::zero(order);
        // the n-th term starts at u^{n+1} after integration
        for m in 2..order {
            let mut inner = USeries::zero(order);
            for j in 1..m {
                let term = dot(&from_x_b[m - 1 - j], &from_x0[j - 1]);
                inner = &inner + &term.scale_rational(&int(j as i64));
            }
            sum = &sum + &inner.scale_rational(&rat(1, m as i64));
        }
        sum.shift(2).scale(&omt).integrate().exp()?
    };

    // ((tD - C_2)(x0, x)/2)(1-t)u^2 + Σ_{m≥3} (1-t) R_m(x0, x) u^m / m
    let seq = cm_sequence(g, order.max(2));
    let mut c2_term = -seq.get(2).get(x, x0).clone();
    if diagonal {
        c2_term += &TPoly::from_ints(&[0, deg0]);
    }
    let mut exponent = USeries::monomial((&c2_term * &omt).scale(&rat(1, 2)), 2, order);
    if diagonal {
        for m in 3..=order {
            let r = r_m(g, &seq, m).swap_remove(x0);
            if !r.is_zero() {
                exponent.set_coeff(m, (&r * &omt).scale(&rat(1, m as i64)));
            }
        }
    }
    let correction = exponent.exp()?;

    Ok(RhsFactors {
        prefactor,
        determinant,
        commutator,
        correction,
    })
}

/// `Z_X(u, t, x0, x)` from the product formula, mod `u^{M+1}`.
pub fn zeta_rhs_series(g: &Graph, x0: VertexId, x: VertexId, order: usize) -> Result<USeries, ZetaError> {
    Ok(zeta_rhs_factors(g, x0, x, order)?.product())
}

/// `Π (1 - t^{cbc(C)} u^{ℓ(C)})^{-1/ℓ(C)}` over primitive rooted closed paths.
pub fn euler_product_series(g: &Graph, x0: VertexId, order: usize) -> Result<USeries, ZetaError> {
    check_vertex(g, x0)?;
    // identical factors are merged: k copies of (ℓ, c) give exponent -k/ℓ
    let mut groups: BTreeMap<(usize, usize), i64> = BTreeMap::new();
    for p in paths::primitive_rooted_closed_paths(g, x0, order)? {
        *groups.entry((p.length, p.cbc)).or_default() += 1;
    }
    let mut out = USeries::one(order);
    for ((len, cbc), k) in groups {
        let base = &USeries::one(order) - &USeries::monomial(TPoly::monomial(int(1), cbc), len, order);
        out = &out * &base.pow_rational(&rat(-k, len as i64))?;
    }
    Ok(out)
}

/// Eigenvalues of `Δ_X` with the weights `⟨E_i δ_{x0}, δ_x⟩`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralData {
    /// Ascending, with repetition.
    pub eigenvalues: Vec<f64>,
    /// `v_i(x0) v_i(x)` for the orthonormal eigenvector of `eigenvalues[i]`.
    pub weights: Vec<f64>,
    /// Distinct eigenvalues (merged within `1e-9`) with summed weights.
    pub local: Vec<(f64, f64)>,
}

const EIGEN_MERGE: f64 = 1e-9;

/// Orthonormal eigendecomposition of a symmetric matrix, ascending.
pub fn symmetric_eigen(m: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>), ZetaError> {
    let n = m.nrows();
    let eig = SymmetricEigen::try_new(m, f64::EPSILON, 10_000).ok_or(ZetaError::EigensolverFailure)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, idx[c])]);
    Ok((values, vectors))
}

pub fn local_spectrum(g: &Graph, x0: VertexId, x: VertexId) -> Result<SpectralData, ZetaError> {
    check_vertex(g, x0)?;
    check_vertex(g, x)?;
    let (eigenvalues, vectors) = symmetric_eigen(g.laplacian_f64())?;
    let weights: Vec<f64> = (0..eigenvalues.len())
        .map(|i| vectors[(x0, i)] * vectors[(x, i)])
        .collect();
    let mut local: Vec<(f64, f64)> = Vec::new();
    for (&l, &w) in eigenvalues.iter().zip(&weights) {
        match local.last_mut() {
            Some((prev, acc)) if (l - *prev).abs() < EIGEN_MERGE => *acc += w,
            _ => local.push((l, w)),
        }
    }
    Ok(SpectralData {
        eigenvalues,
        weights,
        local,
    })
}

/// Numeric value of the spectral route with its truncation record.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectralZeta {
    pub value: f64,
    /// Highest `m` of the `R_m` correction that was summed.
    pub r_order: usize,
    /// Bound on `|log Z - log Z_truncated|` from the omitted `R_m` terms.
    pub tail_bound: f64,
}

/// Checks `|t| < 1` and `0 < u < 1/alpha(|t|)`.
pub fn check_admissible(g: &Graph, u: f64, t: f64) -> Result<(), ZetaError> {
    let domain = |reason: &str| ZetaError::Domain {
        u,
        t,
        reason: reason.to_string(),
    };
    if !(t.is_finite() && t.abs() < 1.0) {
        return Err(domain("|t| < 1 is required"));
    }
    let a = alpha(g, t.abs());
    if !(u.is_finite() && u > 0.0 && u < 1.0 / a) {
        return Err(domain(&format!("0 < u < 1/alpha = {} is required", 1.0 / a)));
    }
    Ok(())
}

/// `Z_X(u, t, x0, x)` on a finite regular graph from the local spectrum.
pub fn zeta_spectral(g: &Graph, x0: VertexId, x: VertexId, u: f64, t: f64) -> Result<SpectralZeta, ZetaError> {
    let q = g.regular_q().ok_or(ZetaError::NotRegular)? as f64;
    check_admissible(g, u, t)?;
    let spectrum = local_spectrum(g, x0, x)?;
    let diagonal = x == x0;
    let omt = 1.0 - t;

    let mut log_z = 0.0;
    if diagonal {
        log_z -= (q - 1.0) / 2.0 * (1.0 - omt * omt * u * u).ln();
    }
    for (&l, &w) in spectrum.eigenvalues.iter().zip(&spectrum.weights) {
        let arg = 1.0 - (q + 1.0 - l) * u + omt * (q + t) * u * u;
        log_z -= arg.ln() * w;
    }

    let cs = cm_sequence_numeric(g, t, SPECTRAL_R_ORDER);
    let mut c2_term = -cs[2][(x, x0)];
    if diagonal {
        c2_term += t * (q + 1.0);
    }
    log_z += c2_term / 2.0 * omt * u * u;

    let mut tail_bound = 0.0;
    if diagonal {
        let deg = q + 1.0;
        let delta = |c: &DMatrix<f64>| deg * c[(x0, x0)] - g.neighbors(x0).map(|y| c[(y, y)]).sum::<f64>();
        for m in 3..=SPECTRAL_R_ORDER {
            let mut r = 0.0;
            for j in 1..m.div_ceil(2) {
                r += r_weight_numeric(t, j) * delta(&cs[m - 2 * j]);
            }
            log_z += omt * r / m as f64 * u.powi(m as i32);
        }
        tail_bound = r_tail_bound(g, u, t, SPECTRAL_R_ORDER);
    }
    Ok(SpectralZeta {
        value: log_z.exp(),
        r_order: SPECTRAL_R_ORDER,
        tail_bound,
    })
}

fn r_weight_numeric(t: f64, j: usize) -> f64 {
    let a = (1.0 - t) * (1.0 - t);
    let b = 1.0 - t * t;
    (1..=j).map(|i| a.powi((j - i) as i32) * b.powi(i as i32 - 1)).sum()
}

/// Bound on `Σ_{m>top} |(1-t) R_m(x) u^m / m|`.
///
/// With `|ΔC_k(x)| ≤ 2M alpha^k`, `|w_j| ≤ j ρ^{j-1}` where
/// `ρ = max((1-t)^2, |1-t^2|) < alpha^2`, one gets
/// `|R_m| ≤ 2M alpha^{m-2} / (1 - ρ/alpha^2)^2`.
pub fn r_tail_bound(g: &Graph, u: f64, t: f64, top: usize) -> f64 {
    let a = alpha(g, t.abs());
    let m_deg = g.max_degree() as f64;
    let rho = ((1.0 - t) * (1.0 - t)).max((1.0 - t * t).abs());
    let ratio = rho / (a * a);
    if ratio >= 1.0 || a * u >= 1.0 {
        return f64::INFINITY;
    }
    let k = (1.0 - t).abs() * 2.0 * m_deg / (a * a * (1.0 - ratio).powi(2));
    let next = (top + 1) as f64;
    k * (a * u).powf(next) / (next * (1.0 - a * u))
}

/// `exp` of the log-series evaluated at numeric `(t, u)`.
pub fn evaluate_log_zeta(log_series: &USeries, t: f64, u: f64) -> f64 {
    log_series.evaluate(t, u).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, Family};
    use crate::report::compare_series;

    fn g(f: Family) -> Graph {
        generate(f).unwrap()
    }

    fn at_zero(s: &USeries) -> USeries {
        s.substitute_t(&int(0))
    }

    #[test]
    fn triangle_geodesic_coefficient() {
        let tri = g(Family::Cycle(3));
        let log = at_zero(&log_zeta_series(&tri, 0, 0, 10).unwrap());
        assert_eq!(*log.coeff(3), TPoly::constant(rat(2, 3)));
        assert!(log.coeff(1).is_zero());
    }

    #[test]
    fn cycle4_at_t_zero_is_binomial() {
        let c4 = g(Family::Cycle(4));
        let z = at_zero(&zeta_log_series(&c4, 0, 0, 10).unwrap());
        let base = &USeries::one(10) - &USeries::monomial(TPoly::one(), 4, 10);
        assert_eq!(z, base.pow_rational(&rat(-1, 2)).unwrap());
    }

    #[test]
    fn no_loops_means_no_linear_term() {
        for graph in crate::graph::corpus() {
            let z = zeta_log_series(&graph, 0, 0, 4).unwrap();
            assert!(z.coeff(1).is_zero(), "{graph}");
        }
    }

    #[test]
    fn product_formula_matches_log_series() {
        for graph in [g(Family::Cycle(3)), g(Family::Complete(4)), g(Family::Path(4)), g(Family::Star(4))] {
            for (x0, x) in [(0, 0), (1, 1), (0, 1), (1, 2)] {
                let lhs = zeta_log_series(&graph, x0, x, 8).unwrap();
                let rhs = zeta_rhs_series(&graph, x0, x, 8).unwrap();
                assert_eq!(compare_series(&lhs, &rhs), None, "{graph} ({x0}, {x})");
            }
        }
    }

    #[test]
    fn commutator_factor_is_trivial_on_regular_graphs() {
        let pet = g(Family::Petersen);
        let f = zeta_rhs_factors(&pet, 0, 3, 6).unwrap();
        assert_eq!(f.commutator, USeries::one(6));
        let star = g(Family::Star(4));
        let f = zeta_rhs_factors(&star, 0, 0, 6).unwrap();
        assert_ne!(f.commutator, USeries::one(6));
    }

    #[test]
    fn t_zero_substitution_is_consistent() {
        let k4 = g(Family::Complete(4));
        let z = zeta_rhs_series(&k4, 0, 0, 8).unwrap();
        let direct = zeta_log_series(&k4, 0, 0, 8).unwrap();
        assert_eq!(at_zero(&z), at_zero(&direct));
    }

    #[test]
    fn euler_product_matches_on_small_regular_graphs() {
        for graph in [g(Family::Cycle(3)), g(Family::Cycle(4))] {
            let euler = euler_product_series(&graph, 0, 10).unwrap();
            let log = zeta_log_series(&graph, 0, 0, 10).unwrap();
            assert_eq!(compare_series(&euler, &log), None, "{graph}");
        }
    }

    #[test]
    fn single_euler_factor() {
        // one primitive path with length 2 and cbc 2: (1 - t^2 u^2)^{-1/2}
        let base = &USeries::one(4) - &USeries::monomial(TPoly::monomial(int(1), 2), 2, 4);
        let f = base.pow_rational(&rat(-1, 2)).unwrap();
        assert_eq!(*f.coeff(2), TPoly::monomial(rat(1, 2), 2));
        assert_eq!(*f.coeff(4), TPoly::monomial(rat(3, 8), 4));
    }

    #[test]
    fn local_spectra() {
        let k4 = local_spectrum(&g(Family::Complete(4)), 0, 0).unwrap();
        assert_eq!(k4.local.len(), 2);
        assert!((k4.local[0].0).abs() < 1e-12 && (k4.local[0].1 - 0.25).abs() < 1e-12);
        assert!((k4.local[1].0 - 4.0).abs() < 1e-12 && (k4.local[1].1 - 0.75).abs() < 1e-12);
        let c4 = local_spectrum(&g(Family::Cycle(4)), 0, 0).unwrap();
        for (got, want) in c4.eigenvalues.iter().zip([0.0, 2.0, 2.0, 4.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!((c4.weights[0] - 0.25).abs() < 1e-12);
        for graph in crate::graph::corpus() {
            for x0 in 0..graph.vertex_count() {
                let s = local_spectrum(&graph, x0, x0).unwrap();
                let total: f64 = s.weights.iter().sum();
                let first: f64 = s.eigenvalues.iter().zip(&s.weights).map(|(l, w)| l * w).sum();
                assert!((total - 1.0).abs() < 1e-12);
                assert!((first - graph.degree(x0) as f64).abs() < 1e-10);
                assert!(s.weights.iter().all(|&w| w > -1e-12));
            }
        }
    }

    #[test]
    fn spectral_route_examples() {
        let k4 = g(Family::Complete(4));
        let log = log_zeta_series(&k4, 0, 0, 40).unwrap();
        let z = zeta_spectral(&k4, 0, 0, 0.1, 0.25).unwrap();
        let want = evaluate_log_zeta(&log, 0.25, 0.1);
        assert!((z.value - want).abs() < 1e-9 * want, "{} vs {}", z.value, want);
        let small = zeta_spectral(&k4, 0, 0, 1e-9, 0.25).unwrap();
        assert!((small.value - 1.0).abs() < 1e-8);

        let pet = g(Family::Petersen);
        let log = log_zeta_series(&pet, 0, 0, 20).unwrap();
        let z = zeta_spectral(&pet, 0, 0, 0.05, 0.0).unwrap();
        let want = evaluate_log_zeta(&log, 0.0, 0.05);
        assert!((z.value - want).abs() < 1e-9 * want);
    }

    #[test]
    fn spectral_route_rejects_bad_input() {
        let k4 = g(Family::Complete(4));
        assert!(matches!(zeta_spectral(&k4, 0, 0, 0.5, 0.0), Err(ZetaError::Domain { .. })));
        assert!(matches!(zeta_spectral(&k4, 0, 0, 0.1, 1.0), Err(ZetaError::Domain { .. })));
        assert!(matches!(zeta_spectral(&k4, 0, 0, -0.1, 0.0), Err(ZetaError::Domain { .. })));
        let p4 = g(Family::Path(4));
        assert_eq!(zeta_spectral(&p4, 0, 0, 0.1, 0.0), Err(ZetaError::NotRegular));
        assert_eq!(zeta_log_series(&k4, 9, 0, 4), Err(ZetaError::InvalidVertex(9)));
    }

    #[test]
    fn finite_product_law() {
        for graph in [g(Family::Cycle(3)), g(Family::Complete(4))] {
            let order = 8;
            let mut product = USeries::one(order);
            let mut trace = USeries::zero(order);
            for x0 in 0..graph.vertex_count() {
                product = &product * &zeta_log_series(&graph, x0, x0, order).unwrap();
                for m in 1..=order {
                    let c = paths::enumerate_closed_weighted(&graph, x0, m, paths::Weight::Cbc, paths::Filter::All)
                        .unwrap()
                        .scale(&rat(1, m as i64));
                    let prev = trace.coeff(m).clone();
                    trace.set_coeff(m, &prev + &c);
                }
            }
            assert_eq!(product, trace.exp().unwrap());
        }
    }
}
