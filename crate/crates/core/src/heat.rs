//! Heat kernels of finite regular graphs and the G(t)-transform.
//!
//! On a `(q+1)`-regular graph, with `s = sqrt((1-t)(q+t))`,
//!
//! ```text
//! K(τ, x0, x) = e^{-(q+1)τ} Σ_n C_n(t)(x0, x) Σ_j d_j(t) (1-t)^{2j} s^{-(n+2j)} I_{n+2j}(2sτ)
//! ```
//!
//! for every admissible `t`, although the left side does not depend on `t`.
//! Terms are grouped by `k = n + 2j` and truncated by a majorant built from
//! `|C_n(t)| ≤ alpha^n` and `I_k(z) ≤ (z/2)^k e^z / k!`.

use nalgebra::DVector;
use serde::Serialize;
use thiserror::Error;

use crate::graph::{Graph, VertexId};
use crate::operator::alpha;
use crate::zeta::{local_spectrum, SpectralData, ZetaError};

/// Largest `|t|` accepted by the Bessel route.
pub const MAX_ABS_T: f64 = 0.9;

/// Hard cap on the total index `k = n + 2j` of the Bessel route.
const MAX_TOTAL_INDEX: usize = 4000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HeatError {
    #[error("vertex {0} is not in the graph")]
    InvalidVertex(VertexId),
    #[error("the graph is not regular")]
    NotRegular,
    #[error("parameter outside the supported domain: {0}")]
    ParameterDomain(String),
    #[error("(u, t) outside the admissible region: {0}")]
    Domain(String),
    #[error("growth rate {growth} of the integrand is not below the decay rate {decay}")]
    NonconvergentTail { growth: f64, decay: f64 },
    #[error("series did not reach the requested tolerance within {0} terms")]
    TruncationLimit(usize),
    #[error("symmetric eigensolver did not converge")]
    EigensolverFailure,
}

impl From<ZetaError> for HeatError {
    fn from(e: ZetaError) -> Self {
        match e {
            ZetaError::InvalidVertex(v) => HeatError::InvalidVertex(v),
            ZetaError::NotRegular => HeatError::NotRegular,
            _ => HeatError::EigensolverFailure,
        }
    }
}

/// A value of `I_n(τ)` with its truncation record.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BesselEval {
    pub order: i64,
    pub tau: f64,
    pub value: f64,
    pub terms_used: usize,
    /// Upper bound on the omitted part of the series.
    pub tail_bound: f64,
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|k| (k as f64).ln()).sum()
}

/// `I_n(τ) = Σ_m (τ/2)^{n+2m} / (m! (m+n)!)`, with `I_{-n} = I_n`.
///
/// Summation stops once the ratio bound on the remaining terms is below `tol`
/// or below `1e-17` times the partial sum.
pub fn bessel_i(n: i64, tau: f64, tol: f64) -> BesselEval {
    let order = n;
    let n = n.unsigned_abs() as usize;
    let half = tau / 2.0;
    if tau == 0.0 {
        return BesselEval {
            order,
            tau,
            value: if n == 0 { 1.0 } else { 0.0 },
            terms_used: 1,
            tail_bound: 0.0,
        };
    }
    let mut term = (n as f64 * half.ln() - ln_factorial(n)).exp();
    let mut sum = term;
    let q = half * half;
    let mut m = 0usize;
    loop {
        // terms after index m are bounded by a geometric series with ratio
        // q/((m+2)(m+2+n)), which only decreases in m
        let next = term * q / ((m + 1) as f64 * (m + 1 + n) as f64);
        let ratio = q / ((m + 2) as f64 * (m + 2 + n) as f64);
        let tail = if ratio < 1.0 { next / (1.0 - ratio) } else { f64::INFINITY };
        if tail < tol || tail <= 1e-17 * sum {
            return BesselEval {
                order,
                tau,
                value: sum,
                terms_used: m + 1,
                tail_bound: tail,
            };
        }
        sum += next;
        term = next;
        m += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum HeatRoute {
    Bessel,
    Spectral,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeatKernelValue {
    pub tau: f64,
    pub x0: VertexId,
    pub x: VertexId,
    pub value: f64,
    pub route: HeatRoute,
    /// `(n_max, j_max)` of the Bessel double series.
    pub truncation: Option<(usize, usize)>,
    pub tail_bound: f64,
}

/// `d_j(t)`: `1` for `j = 0`, `-(q-1+2t)/(1-t)` otherwise.
pub fn d_coefficient(q: f64, t: f64, j: usize) -> f64 {
    if j == 0 {
        1.0
    } else {
        -(q - 1.0 + 2.0 * t) / (1.0 - t)
    }
}

fn regular_q(g: &Graph) -> Result<f64, HeatError> {
    Ok(g.regular_q().ok_or(HeatError::NotRegular)? as f64)
}

fn check_vertex(g: &Graph, v: VertexId) -> Result<(), HeatError> {
    if v < g.vertex_count() {
        Ok(())
    } else {
        Err(HeatError::InvalidVertex(v))
    }
}

fn check_t(q: f64, t: f64) -> Result<(), HeatError> {
    if !(t.is_finite() && t.abs() <= MAX_ABS_T) {
        return Err(HeatError::ParameterDomain(format!("|t| <= {MAX_ABS_T} is required, got t = {t}")));
    }
    if (1.0 - t) * (q + t) <= 0.0 {
        return Err(HeatError::ParameterDomain(format!("(1-t)(q+t) > 0 fails at t = {t}")));
    }
    Ok(())
}

/// Row `x` of `C_k(t)`, `k = 0, 1, ...`, by the numeric recursion.
struct RowRecursion<'a> {
    g: &'a Graph,
    damping: Vec<f64>,
    prev2: DVector<f64>,
    prev: DVector<f64>,
    k: usize,
}

impl<'a> RowRecursion<'a> {
    fn new(g: &'a Graph, x: VertexId, t: f64) -> Self {
        let n = g.vertex_count();
        RowRecursion {
            g,
            damping: (0..n).map(|y| (1.0 - t) * (g.degree(y) as f64 - 1.0 + t)).collect(),
            prev2: DVector::zeros(n),
            prev: DVector::from_fn(n, |y, _| if y == x { 1.0 } else { 0.0 }),
            k: 0,
        }
    }

    /// Returns row `k` and advances.
    fn next(&mut self, t: f64) -> DVector<f64> {
        let current = self.prev.clone();
        let n = self.g.vertex_count();
        let mut out = DVector::zeros(n);
        for z in 0..n {
            for y in self.g.neighbors(z) {
                out[y] += current[z];
            }
        }
        if self.k == 1 {
            // C_2 = A^2 - (1-t) D
            for y in 0..n {
                out[y] -= (1.0 - t) * self.g.degree(y) as f64 * self.prev2[y];
            }
        } else if self.k >= 2 {
            for y in 0..n {
                out[y] -= self.damping[y] * self.prev2[y];
            }
        }
        self.prev2 = current.clone();
        self.prev = out;
        self.k += 1;
        current
    }
}

/// `K(τ, x0, x)` from the Bessel double series, tail bound below `tol`.
pub fn heat_kernel_bessel(
    g: &Graph,
    x0: VertexId,
    x: VertexId,
    tau: f64,
    t: f64,
    tol: f64,
) -> Result<HeatKernelValue, HeatError> {
    let q = regular_q(g)?;
    check_vertex(g, x0)?;
    check_vertex(g, x)?;
    check_t(q, t)?;
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(HeatError::ParameterDomain(format!("τ >= 0 is required, got {tau}")));
    }
    if !(tol > 0.0) {
        return Err(HeatError::ParameterDomain("tol > 0 is required".into()));
    }
    let s = ((1.0 - t) * (q + t)).sqrt();
    let a = alpha(g, t.abs());
    let d = d_coefficient(q, t, 1);
    let d_max = d.abs().max(1.0);
    let omt2 = (1.0 - t) * (1.0 - t);
    let envelope = (-(q + 1.0) * tau).exp();
    let log_decay = (2.0 * s - (q + 1.0)) * tau;

    // rows[n][x0] = C_n(t)[x][x0]
    let mut rows = RowRecursion::new(g, x, t);
    let mut entries: Vec<f64> = Vec::new();
    let mut value = 0.0;
    let mut bessel_err = 0.0;
    let start = (4.0 * a * tau).ceil() as usize;
    for k in 0..=MAX_TOTAL_INDEX {
        entries.push(rows.next(t)[x0]);
        // P_k = Σ_{n+2j=k} d_j (1-t)^{2j} C_n
        let mut p = 0.0;
        let mut w = 1.0;
        for j in 0..=k / 2 {
            p += d_coefficient(q, t, j) * w * entries[k - 2 * j];
            w *= omt2;
        }
        if p != 0.0 {
            let b = bessel_i(k as i64, 2.0 * s * tau, 1e-300);
            let scale = envelope * s.powi(-(k as i32));
            value += p * b.value * scale;
            bessel_err += (p * b.tail_bound * scale).abs();
        }
        if k >= start {
            // majorant of term k+1; ratios are ≤ 1/2 from here on
            let kk = (k + 1) as f64;
            let ln_next = d_max.ln() + (kk / 2.0 + 1.0).ln() + kk * (a * tau).ln() - ln_factorial(k + 1) + log_decay;
            let tail = if tau == 0.0 { 0.0 } else { 2.0 * ln_next.exp() } + bessel_err;
            if tail < tol {
                return Ok(HeatKernelValue {
                    tau,
                    x0,
                    x,
                    value,
                    route: HeatRoute::Bessel,
                    truncation: Some((k, k / 2)),
                    tail_bound: tail,
                });
            }
        }
    }
    Err(HeatError::TruncationLimit(MAX_TOTAL_INDEX))
}

/// `K(τ, x0, x) = Σ_i e^{-τλ_i} μ_{x0,x}(λ_i)`.
pub fn heat_kernel_spectral(g: &Graph, x0: VertexId, x: VertexId, tau: f64) -> Result<HeatKernelValue, HeatError> {
    let spectrum = local_spectrum(g, x0, x)?;
    Ok(HeatKernelValue {
        tau,
        x0,
        x,
        value: spectral_heat_value(&spectrum, tau),
        route: HeatRoute::Spectral,
        truncation: None,
        tail_bound: 0.0,
    })
}

fn spectral_heat_value(spectrum: &SpectralData, tau: f64) -> f64 {
    spectrum
        .eigenvalues
        .iter()
        .zip(&spectrum.weights)
        .map(|(l, w)| (-tau * l).exp() * w)
        .sum()
}

/// `max_x |∂_τ K + ΔK|` with `∂_τ` by central differences of the Bessel route at `t`.
pub fn heat_residual(g: &Graph, x0: VertexId, tau: f64, h: f64, t: f64) -> Result<f64, HeatError> {
    if !(h > 0.0 && tau > h) {
        return Err(HeatError::ParameterDomain("τ > h > 0 is required".into()));
    }
    let n = g.vertex_count();
    let tol = 1e-13;
    let eval = |s: f64| -> Result<Vec<f64>, HeatError> {
        (0..n)
            .map(|x| heat_kernel_bessel(g, x0, x, s, t, tol).map(|v| v.value))
            .collect()
    };
    let (lo, mid, hi) = (eval(tau - h)?, eval(tau)?, eval(tau + h)?);
    Ok(residual_max(g, &lo, &mid, &hi, h))
}

/// The same residual with the exact eigen-expansion derivative.
pub fn heat_residual_spectral(g: &Graph, x0: VertexId, tau: f64) -> Result<f64, HeatError> {
    let n = g.vertex_count();
    let mut k = vec![0.0; n];
    let mut dk = vec![0.0; n];
    for x in 0..n {
        let s = local_spectrum(g, x0, x)?;
        for (l, w) in s.eigenvalues.iter().zip(&s.weights) {
            let e = (-tau * l).exp() * w;
            k[x] += e;
            dk[x] -= l * e;
        }
    }
    Ok((0..n)
        .map(|x| (dk[x] + laplacian_at(g, &k, x)).abs())
        .fold(0.0, f64::max))
}

fn laplacian_at(g: &Graph, f: &[f64], x: VertexId) -> f64 {
    g.degree(x) as f64 * f[x] - g.neighbors(x).map(|y| f[y]).sum::<f64>()
}

fn residual_max(g: &Graph, lo: &[f64], mid: &[f64], hi: &[f64], h: f64) -> f64 {
    (0..mid.len())
        .map(|x| ((hi[x] - lo[x]) / (2.0 * h) + laplacian_at(g, mid, x)).abs())
        .fold(0.0, f64::max)
}

/// `|f(τ)| ≤ scale · τ^power · e^{rate τ}` for all `τ ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GrowthBound {
    pub scale: f64,
    pub power: u32,
    pub rate: f64,
}

impl GrowthBound {
    pub fn bounded(scale: f64) -> Self {
        GrowthBound {
            scale,
            power: 0,
            rate: 0.0,
        }
    }

    /// `∫_L^∞ scale τ^d e^{-βτ} dτ` with `β = decay - rate > 0`.
    fn tail(&self, decay: f64, cutoff: f64) -> f64 {
        let beta = decay - self.rate;
        let d = self.power as usize;
        // Γ(d+1, βL) = d! e^{-βL} Σ_{i≤d} (βL)^i / i!
        let x = beta * cutoff;
        let mut term = 1.0;
        let mut sum = 1.0;
        for i in 1..=d {
            term *= x / i as f64;
            sum += term;
        }
        self.scale * (ln_factorial(d) - x - (d as f64 + 1.0) * beta.ln()).exp() * sum
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct QuadratureConfig {
    pub step: f64,
    /// Fixed upper limit; `None` chooses it from the growth bound.
    pub cutoff: Option<f64>,
    /// Target for tail / |integral| when the cutoff is automatic.
    pub rel_tol: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            step: 1e-3,
            cutoff: None,
            rel_tol: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GTransformValue {
    pub value: f64,
    pub cutoff: f64,
    /// Bound on the discarded `[cutoff, ∞)` part, already multiplied by the prefactor.
    pub tail_bound: f64,
}

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, step: f64) -> f64 {
    let mut n = ((b - a) / step).ceil() as usize;
    n += n % 2;
    let n = n.max(2);
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + i as f64 * h);
    }
    acc * h / 3.0
}

/// `G(t)f(u) = (u^{-2} - (q+t)(1-t)) ∫_0^∞ e^{-((q+t)(1-t)u + 1/u - (q+1))τ} f(τ) dτ`.
pub fn g_transform(
    f: &dyn Fn(f64) -> f64,
    growth: GrowthBound,
    u: f64,
    t: f64,
    q: u32,
    config: QuadratureConfig,
) -> Result<GTransformValue, HeatError> {
    let q = q as f64;
    let kappa = (q + t) * (1.0 - t);
    if !(t.is_finite() && t.abs() < 1.0 && kappa > 0.0) {
        return Err(HeatError::Domain(format!("|t| < 1 and (q+t)(1-t) > 0 are required, got t = {t}")));
    }
    if !(u > 0.0 && u < 1.0 / kappa.sqrt()) {
        return Err(HeatError::Domain(format!(
            "0 < u < 1/sqrt((q+t)(1-t)) = {} is required, got u = {u}",
            1.0 / kappa.sqrt()
        )));
    }
    let decay = kappa * u + 1.0 / u - (q + 1.0);
    if growth.rate >= decay {
        return Err(HeatError::NonconvergentTail {
            growth: growth.rate,
            decay,
        });
    }
    let prefactor = 1.0 / (u * u) - kappa;
    let integrand = |tau: f64| (-decay * tau).exp() * f(tau);
    let beta = decay - growth.rate;
    let (cutoff, integral) = match config.cutoff {
        Some(c) => (c, simpson(&integrand, 0.0, c, config.step)),
        None => {
            let mut cutoff = 40.0 / beta;
            let mut integral = simpson(&integrand, 0.0, cutoff, config.step);
            while growth.tail(decay, cutoff) > config.rel_tol * integral.abs() {
                let next = cutoff * 1.5;
                integral += simpson(&integrand, cutoff, next, config.step);
                cutoff = next;
                if cutoff * beta > 1e4 {
                    break;
                }
            }
            (cutoff, integral)
        }
    };
    Ok(GTransformValue {
        value: prefactor * integral,
        cutoff,
        tail_bound: prefactor * growth.tail(decay, cutoff),
    })
}

/// `e^{-(q+1)τ} s^{-k} I_k(2sτ)` with `s = sqrt((q+t)(1-t))`, whose transform is `u^{k-1}`.
pub fn bessel_package(k: usize, q: u32, t: f64) -> (impl Fn(f64) -> f64, GrowthBound) {
    let qf = q as f64;
    let s = ((qf + t) * (1.0 - t)).sqrt();
    let f = move |tau: f64| {
        (-(qf + 1.0) * tau).exp() * s.powi(-(k as i32)) * bessel_i(k as i64, 2.0 * s * tau, 1e-300).value
    };
    let growth = GrowthBound {
        scale: (-ln_factorial(k)).exp(),
        power: k as u32,
        rate: 2.0 * s - (qf + 1.0),
    };
    (f, growth)
}

/// Three evaluations of `G(t)(K(·, x0, x))(u)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThreeWayReport {
    pub graph: String,
    pub x0: VertexId,
    pub x: VertexId,
    pub u: f64,
    pub t: f64,
    /// Quadrature of the spectral heat kernel.
    pub quadrature: f64,
    /// `Σ_n C_n(t)(x0, x) Σ_j d_j (1-t)^{2j} u^{n+2j-1}`, truncated.
    pub series: f64,
    /// `Σ_i (u^{-2} - κ) / (κu + 1/u - (q+1-λ_i)) μ_i`.
    pub spectral: f64,
    pub max_deviation: f64,
}

pub fn three_way_check(g: &Graph, x0: VertexId, x: VertexId, u: f64, t: f64) -> Result<ThreeWayReport, HeatError> {
    let q = regular_q(g)?;
    check_vertex(g, x0)?;
    check_vertex(g, x)?;
    let a = alpha(g, t.abs());
    if !(t.abs() < 1.0 && u > 0.0 && u < 1.0 / a) {
        return Err(HeatError::Domain(format!("|t| < 1 and 0 < u < 1/alpha = {} are required", 1.0 / a)));
    }
    let kappa = (q + t) * (1.0 - t);
    let spectrum = local_spectrum(g, x0, x)?;

    let mass: f64 = spectrum.weights.iter().map(|w| w.abs()).sum();
    let kernel = |tau: f64| spectral_heat_value(&spectrum, tau);
    let quadrature = g_transform(&kernel, GrowthBound::bounded(mass), u, t, q as u32, QuadratureConfig::default())?.value;

    let d = d_coefficient(q, t, 1);
    let d_max = d.abs().max(1.0);
    let omt2 = (1.0 - t) * (1.0 - t);
    let mut rows = RowRecursion::new(g, x, t);
    let mut entries = Vec::new();
    let mut series = 0.0;
    let mut k = 0usize;
    loop {
        entries.push(rows.next(t)[x0]);
        let mut p = 0.0;
        let mut w = 1.0;
        for j in 0..=k / 2 {
            p += d_coefficient(q, t, j) * w * entries[k - 2 * j];
            w *= omt2;
        }
        series += p * u.powi(k as i32 - 1);
        // |P_k| u^k ≤ d_max (k/2+1) (alpha u)^k, geometric from here on
        let next = (k + 1) as f64;
        let bound = d_max * (next / 2.0 + 1.0) * (a * u).powf(next) / u;
        if bound / (1.0 - a * u) < 1e-15 * series.abs().max(1.0) {
            break;
        }
        k += 1;
        if k > MAX_TOTAL_INDEX {
            return Err(HeatError::TruncationLimit(MAX_TOTAL_INDEX));
        }
    }

    let spectral: f64 = spectrum
        .eigenvalues
        .iter()
        .zip(&spectrum.weights)
        .map(|(l, w)| (1.0 / (u * u) - kappa) / (kappa * u + 1.0 / u - (q + 1.0 - l)) * w)
        .sum();

    let max_deviation = (quadrature - series)
        .abs()
        .max((quadrature - spectral).abs())
        .max((series - spectral).abs());
    Ok(ThreeWayReport {
        graph: g.name().to_string(),
        x0,
        x,
        u,
        t,
        quadrature,
        series,
        spectral,
        max_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, Family};

    fn g(f: Family) -> Graph {
        generate(f).unwrap()
    }

    fn k4_diagonal(tau: f64) -> f64 {
        0.25 + 0.75 * (-4.0 * tau).exp()
    }

    #[test]
    fn bessel_at_zero() {
        assert_eq!(bessel_i(0, 0.0, 1e-15).value, 1.0);
        for n in 1..5 {
            assert_eq!(bessel_i(n, 0.0, 1e-15).value, 0.0);
        }
    }

    #[test]
    fn bessel_reference_values() {
        // I_0(1), I_1(1), I_2(2.5)
        assert!((bessel_i(0, 1.0, 1e-16).value - 1.266_065_877_752_008_4).abs() < 1e-15);
        assert!((bessel_i(1, 1.0, 1e-16).value - 0.565_159_103_992_485).abs() < 1e-15);
        assert!((bessel_i(2, 2.5, 1e-16).value - 1.276_466_147_819_164_4).abs() < 1e-14);
        assert_eq!(bessel_i(-3, 1.7, 1e-16).value, bessel_i(3, 1.7, 1e-16).value);
    }

    #[test]
    fn bessel_recurrence_for_the_derivative() {
        let h = 1e-5;
        for n in 0..=6i64 {
            for tau in [0.5, 1.0, 2.0] {
                let i = |m: i64, x: f64| bessel_i(m, x, 1e-18).value;
                let deriv = (i(n, tau + h) - i(n, tau - h)) / (2.0 * h);
                assert!((2.0 * deriv - i(n - 1, tau) - i(n + 1, tau)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn bessel_trivial_bound() {
        for n in 0..=10usize {
            for step in 0..=50 {
                let tau = step as f64 * 0.1;
                let v = bessel_i(n as i64, tau, 1e-18).value;
                let bound = (tau / 2.0).powi(n as i32) * tau.exp() / (ln_factorial(n)).exp();
                assert!(v <= bound * (1.0 + 1e-14), "n={n} τ={tau}");
                assert!(v >= 0.0);
            }
        }
    }

    #[test]
    fn bessel_tail_is_reported() {
        let b = bessel_i(0, 3.0, 1e-6);
        assert!(b.tail_bound < 1e-6);
        assert!((b.value - bessel_i(0, 3.0, 1e-18).value).abs() <= b.tail_bound);
    }

    #[test]
    fn kernel_at_time_zero_is_a_delta() {
        let k4 = g(Family::Complete(4));
        for t in [-0.5, 0.0, 0.5] {
            assert_eq!(heat_kernel_bessel(&k4, 0, 0, 0.0, t, 1e-10).unwrap().value, 1.0);
            assert_eq!(heat_kernel_bessel(&k4, 0, 2, 0.0, t, 1e-10).unwrap().value, 0.0);
        }
        assert!(heat_kernel_spectral(&k4, 0, 1, 0.0).unwrap().value.abs() < 1e-15);
    }

    #[test]
    fn complete_graph_closed_form() {
        let k4 = g(Family::Complete(4));
        for tau in [0.1, 0.5, 1.0, 2.0, 5.0] {
            let b = heat_kernel_bessel(&k4, 0, 0, tau, 0.0, 1e-8).unwrap();
            assert!((b.value - k4_diagonal(tau)).abs() < 1e-8, "τ={tau}: {}", b.value);
            assert!(b.tail_bound < 1e-8);
            let s = heat_kernel_spectral(&k4, 0, 0, tau).unwrap();
            assert!((s.value - k4_diagonal(tau)).abs() < 1e-13);
        }
    }

    #[test]
    fn bessel_route_is_independent_of_t() {
        for graph in [g(Family::Complete(4)), g(Family::Cycle(6)), g(Family::Petersen), g(Family::Hypercube(3))] {
            for tau in [0.5, 2.0, 5.0] {
                let vals: Vec<f64> = [-0.5, 0.0, 0.5]
                    .iter()
                    .map(|&t| heat_kernel_bessel(&graph, 0, 1, tau, t, 1e-10).unwrap().value)
                    .collect();
                let spread = vals.iter().cloned().fold(f64::MIN, f64::max) - vals.iter().cloned().fold(f64::MAX, f64::min);
                assert!(spread < 2e-8, "{graph} τ={tau} {vals:?}");
            }
        }
    }

    #[test]
    fn heat_is_conserved_and_symmetric() {
        let pet = g(Family::Petersen);
        for tau in [0.0, 0.7, 2.0, 5.0] {
            let total: f64 = (0..10).map(|x| heat_kernel_spectral(&pet, 0, x, tau).unwrap().value).sum();
            assert!((total - 1.0).abs() < 1e-12);
            let a = heat_kernel_bessel(&pet, 0, 4, tau, 0.3, 1e-10).unwrap().value;
            let b = heat_kernel_bessel(&pet, 4, 0, tau, 0.3, 1e-10).unwrap().value;
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn residuals() {
        let k4 = g(Family::Complete(4));
        assert!(heat_residual(&k4, 0, 1.0, 1e-4, 0.0).unwrap() < 1e-6);
        let c6 = g(Family::Cycle(6));
        assert!(heat_residual(&c6, 0, 0.5, 1e-4, 0.0).unwrap() < 1e-6);
        assert!(heat_residual_spectral(&c6, 0, 0.5).unwrap() < 1e-12);
        assert!(heat_residual(&k4, 0, 1e-5, 1e-4, 0.0).is_err());
    }

    #[test]
    fn bessel_route_domain() {
        let k4 = g(Family::Complete(4));
        assert!(matches!(heat_kernel_bessel(&k4, 0, 0, 1.0, 1.0, 1e-8), Err(HeatError::ParameterDomain(_))));
        assert!(matches!(heat_kernel_bessel(&k4, 0, 0, 1.0, 0.95, 1e-8), Err(HeatError::ParameterDomain(_))));
        assert!(matches!(heat_kernel_bessel(&k4, 0, 0, -1.0, 0.0, 1e-8), Err(HeatError::ParameterDomain(_))));
        let star = g(Family::Star(4));
        assert_eq!(heat_kernel_bessel(&star, 0, 0, 1.0, 0.0, 1e-8), Err(HeatError::NotRegular));
    }

    #[test]
    fn g_transform_of_bessel_packages() {
        for (k, u, t) in [(0usize, 0.1, 0.0), (1, 0.1, 0.0), (5, 0.1, 0.3)] {
            let (f, growth) = bessel_package(k, 2, t);
            let v = g_transform(&f, growth, u, t, 2, QuadratureConfig::default()).unwrap();
            let want = u.powi(k as i32 - 1);
            assert!(((v.value - want) / want).abs() < 1e-6, "k={k}: {} vs {want}", v.value);
        }
    }

    #[test]
    fn g_transform_errors() {
        let (f, growth) = bessel_package(0, 2, 0.0);
        assert!(matches!(
            g_transform(&f, growth, 0.9, 0.0, 2, QuadratureConfig::default()),
            Err(HeatError::Domain(_))
        ));
        let grow = GrowthBound {
            scale: 1.0,
            power: 0,
            rate: 50.0,
        };
        assert!(matches!(
            g_transform(&|x: f64| (50.0 * x).exp(), grow, 0.1, 0.0, 2, QuadratureConfig::default()),
            Err(HeatError::NonconvergentTail { .. })
        ));
    }

    #[test]
    fn three_way_examples() {
        let k4 = g(Family::Complete(4));
        let r = three_way_check(&k4, 0, 0, 0.08, 0.25).unwrap();
        assert!(r.max_deviation < 1e-6, "{r:?}");
        let c6 = g(Family::Cycle(6));
        assert!(three_way_check(&c6, 0, 0, 0.1, 0.0).unwrap().max_deviation < 1e-6);
        let q3 = g(Family::Hypercube(3));
        assert!(three_way_check(&q3, 0, 3, 0.1, 0.2).unwrap().max_deviation < 1e-6);
    }
}
