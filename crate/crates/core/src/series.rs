//! Exact arithmetic kernel.
//!
//! Every generating function in this crate lives in one of four types:
//!
//! * [`TPoly`]: a polynomial in the bump-counting variable `t` with
//!   arbitrary-precision rational coefficients,
//! * [`USeries`]: a power series in `u` truncated at a fixed order, whose
//!   coefficients are `TPoly` values,
//! * [`PolyMatrix`]: a dense matrix of `TPoly` entries,
//! * [`OperatorSeries`]: a truncated power series in `u` with `PolyMatrix`
//!   coefficients (equivalently a matrix of `USeries` entries).
//!
//! Arithmetic is exact modulo `u^(M+1)` where `M` is the truncation order.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

/// Arbitrary-precision rational in canonical form.
pub type Rational = BigRational;

/// Default truncation order used by the identity checks.
pub const DEFAULT_ORDER: usize = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SeriesError {
    #[error("truncation orders differ ({0} vs {1})")]
    OrderMismatch(usize, usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("constant term must be {0}")]
    BadConstantTerm(&'static str),
    #[error("cannot parse rational {0:?}")]
    Parse(String),
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

pub fn rat(p: i64, q: i64) -> Rational {
    Rational::new(BigInt::from(p), BigInt::from(q))
}

/// Formats a rational as `p/q`, always with an explicit denominator.
pub fn format_rational(r: &Rational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `p/q` or a bare integer `p`.
pub fn parse_rational(s: &str) -> Result<Rational, SeriesError> {
    let s = s.trim();
    let bad = || SeriesError::Parse(s.to_string());
    match s.split_once('/') {
        Some((p, q)) => {
            let p: BigInt = p.trim().parse().map_err(|_| bad())?;
            let q: BigInt = q.trim().parse().map_err(|_| bad())?;
            if q.is_zero() {
                return Err(bad());
            }
            Ok(Rational::new(p, q))
        }
        None => Ok(Rational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_negative() {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        }
    })
}

// ---------------------------------------------------------------------------
// TPoly
// ---------------------------------------------------------------------------

/// Polynomial in `t` over the rationals. Coefficients are stored in ascending
/// degree with no trailing zeros, so the zero polynomial is the empty vector.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct TPoly {
    coeffs: Vec<Rational>,
}

impl TPoly {
    pub fn zero() -> Self {
        TPoly { coeffs: Vec::new() }
    }

    pub fn one() -> Self {
        Self::constant(Rational::one())
    }

    pub fn constant(c: Rational) -> Self {
        Self::from_coeffs(vec![c])
    }

    pub fn from_int(n: i64) -> Self {
        Self::constant(int(n))
    }

    /// The variable `t`.
    pub fn t() -> Self {
        Self::monomial(Rational::one(), 1)
    }

    /// `1 - t`.
    pub fn one_minus_t() -> Self {
        Self::from_coeffs(vec![int(1), int(-1)])
    }

    pub fn monomial(c: Rational, k: usize) -> Self {
        let mut coeffs = vec![Rational::zero(); k + 1];
        coeffs[k] = c;
        Self::from_coeffs(coeffs)
    }

    pub fn from_coeffs(mut coeffs: Vec<Rational>) -> Self {
        while coeffs.last().is_some_and(Zero::is_zero) {
            coeffs.pop();
        }
        TPoly { coeffs }
    }

    pub fn from_ints(coeffs: &[i64]) -> Self {
        Self::from_coeffs(coeffs.iter().map(|&c| int(c)).collect())
    }

    pub fn coeffs(&self) -> &[Rational] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> Rational {
        self.coeffs.get(k).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn is_one(&self) -> bool {
        self.coeffs.len() == 1 && self.coeffs[0].is_one()
    }

    /// Degree, or `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Returns the constant value if the polynomial has degree ≤ 0.
    pub fn as_constant(&self) -> Option<Rational> {
        match self.coeffs.len() {
            0 => Some(Rational::zero()),
            1 => Some(self.coeffs[0].clone()),
            _ => None,
        }
    }

    pub fn scale(&self, c: &Rational) -> Self {
        if c.is_zero() {
            return Self::zero();
        }
        TPoly {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    pub fn pow(&self, k: usize) -> Self {
        let mut acc = Self::one();
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Horner evaluation in double precision.
    pub fn evaluate(&self, t: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * t + rational_to_f64(c))
    }

    /// Exact evaluation at a rational point.
    pub fn evaluate_exact(&self, t: &Rational) -> Rational {
        self.coeffs
            .iter()
            .rev()
            .fold(Rational::zero(), |acc, c| acc * t + c)
    }
}

impl fmt::Display for TPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let neg = c.is_negative();
            let mag = c.abs();
            if first {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { "-" } else { "+" })?;
            }
            first = false;
            let mag_str = if mag.is_integer() {
                mag.numer().to_string()
            } else {
                format!("{}/{}", mag.numer(), mag.denom())
            };
            match k {
                0 => write!(f, "{mag_str}")?,
                _ => {
                    if !mag.is_one() {
                        write!(f, "{mag_str}*")?;
                    }
                    if k == 1 {
                        write!(f, "t")?;
                    } else {
                        write!(f, "t^{k}")?;
                    }
                }
            }
        }
        Ok(())
    }
}

impl Serialize for TPoly {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let v: Vec<String> = self.coeffs.iter().map(format_rational).collect();
        v.serialize(s)
    }
}

impl<'de> Deserialize<'de> for TPoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v: Vec<String> = Vec::deserialize(d)?;
        let coeffs = v
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>, _>>()
            .map_err(D::Error::custom)?;
        Ok(TPoly::from_coeffs(coeffs))
    }
}

impl<'a> Add<&'a TPoly> for &'a TPoly {
    type Output = TPoly;
    fn add(self, rhs: &TPoly) -> TPoly {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Add for TPoly {
    type Output = TPoly;
    fn add(mut self, rhs: TPoly) -> TPoly {
        self += &rhs;
        self
    }
}

impl AddAssign<&TPoly> for TPoly {
    fn add_assign(&mut self, rhs: &TPoly) {
        if self.coeffs.len() < rhs.coeffs.len() {
            self.coeffs.resize(rhs.coeffs.len(), Rational::zero());
        }
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a += b;
        }
        while self.coeffs.last().is_some_and(Zero::is_zero) {
            self.coeffs.pop();
        }
    }
}

impl SubAssign<&TPoly> for TPoly {
    fn sub_assign(&mut self, rhs: &TPoly) {
        if self.coeffs.len() < rhs.coeffs.len() {
            self.coeffs.resize(rhs.coeffs.len(), Rational::zero());
        }
        for (a, b) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *a -= b;
        }
        while self.coeffs.last().is_some_and(Zero::is_zero) {
            self.coeffs.pop();
        }
    }
}

impl<'a> Sub<&'a TPoly> for &'a TPoly {
    type Output = TPoly;
    fn sub(self, rhs: &TPoly) -> TPoly {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl Sub for TPoly {
    type Output = TPoly;
    fn sub(mut self, rhs: TPoly) -> TPoly {
        self -= &rhs;
        self
    }
}

impl<'a> Mul<&'a TPoly> for &'a TPoly {
    type Output = TPoly;
    fn mul(self, rhs: &TPoly) -> TPoly {
        if self.is_zero() || rhs.is_zero() {
            return TPoly::zero();
        }
        let mut coeffs = vec![Rational::zero(); self.coeffs.len() + rhs.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in rhs.coeffs.iter().enumerate() {
                if !b.is_zero() {
                    coeffs[i + j] += a * b;
                }
            }
        }
        TPoly::from_coeffs(coeffs)
    }
}

impl Mul for TPoly {
    type Output = TPoly;
    fn mul(self, rhs: TPoly) -> TPoly {
        &self * &rhs
    }
}

impl Neg for TPoly {
    type Output = TPoly;
    fn neg(self) -> TPoly {
        TPoly {
            coeffs: self.coeffs.into_iter().map(|c| -c).collect(),
        }
    }
}

impl Neg for &TPoly {
    type Output = TPoly;
    fn neg(self) -> TPoly {
        -self.clone()
    }
}

// ---------------------------------------------------------------------------
// USeries
// ---------------------------------------------------------------------------

/// Power series `c_0 + c_1 u + ... + c_M u^M` with `TPoly` coefficients,
/// exact modulo `u^(M+1)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct USeries {
    coeffs: Vec<TPoly>,
}

impl USeries {
    pub fn zero(order: usize) -> Self {
        USeries {
            coeffs: vec![TPoly::zero(); order + 1],
        }
    }

    pub fn one(order: usize) -> Self {
        Self::constant(TPoly::one(), order)
    }

    pub fn constant(c: TPoly, order: usize) -> Self {
        Self::monomial(c, 0, order)
    }

    /// `c · u^k`, or zero if `k` exceeds the order.
    pub fn monomial(c: TPoly, k: usize, order: usize) -> Self {
        let mut s = Self::zero(order);
        if k <= order {
            s.coeffs[k] = c;
        }
        s
    }

    /// Builds a series from coefficients, padding with zeros or dropping
    /// anything above `order`.
    pub fn from_coeffs(mut coeffs: Vec<TPoly>, order: usize) -> Self {
        coeffs.resize(order + 1, TPoly::zero());
        USeries { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeff(&self, k: usize) -> &TPoly {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[TPoly] {
        &self.coeffs
    }

    pub fn set_coeff(&mut self, k: usize, c: TPoly) {
        if k <= self.order() {
            self.coeffs[k] = c;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(TPoly::is_zero)
    }

    /// Drops to a lower order, or pads with zeros to a higher one.
    pub fn truncate(&self, order: usize) -> Self {
        Self::from_coeffs(self.coeffs.clone(), order)
    }

    fn check_order(&self, other: &Self) -> Result<(), SeriesError> {
        if self.order() == other.order() {
            Ok(())
        } else {
            Err(SeriesError::OrderMismatch(self.order(), other.order()))
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_order(other)?;
        Ok(USeries {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + b)
                .collect(),
        })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_order(other)?;
        Ok(USeries {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a - b)
                .collect(),
        })
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_order(other)?;
        let m = self.order();
        let mut out = Self::zero(m);
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.coeffs[..=m - i].iter().enumerate() {
                if !b.is_zero() {
                    out.coeffs[i + j] += &(a * b);
                }
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &TPoly) -> Self {
        USeries {
            coeffs: self.coeffs.iter().map(|a| a * c).collect(),
        }
    }

    pub fn scale_rational(&self, c: &Rational) -> Self {
        USeries {
            coeffs: self.coeffs.iter().map(|a| a.scale(c)).collect(),
        }
    }

    /// Multiplies by `u^k`, discarding what falls above the order.
    pub fn shift(&self, k: usize) -> Self {
        let m = self.order();
        let mut out = Self::zero(m);
        for i in 0..=m {
            if i + k <= m {
                out.coeffs[i + k] = self.coeffs[i].clone();
            }
        }
        out
    }

    /// Term-wise integral from 0 to `u`: coefficient of `u^(k+1)` is `c_k/(k+1)`.
    pub fn integrate(&self) -> Self {
        let m = self.order();
        let mut out = Self::zero(m);
        for k in 0..m {
            out.coeffs[k + 1] = self.coeffs[k].scale(&rat(1, k as i64 + 1));
        }
        out
    }

    /// Formal derivative in `u`. The top coefficient becomes zero.
    pub fn derivative(&self) -> Self {
        let m = self.order();
        let mut out = Self::zero(m);
        for k in 1..=m {
            out.coeffs[k - 1] = self.coeffs[k].scale(&int(k as i64));
        }
        out
    }

    /// Multiplicative inverse. The constant term must be a nonzero rational.
    pub fn inverse(&self) -> Result<Self, SeriesError> {
        let c0 = self.coeffs[0]
            .as_constant()
            .filter(|c| !c.is_zero())
            .ok_or(SeriesError::BadConstantTerm("a nonzero rational constant"))?;
        let inv0 = c0.recip();
        let m = self.order();
        let mut out = Self::zero(m);
        out.coeffs[0] = TPoly::constant(inv0.clone());
        for n in 1..=m {
            let mut acc = TPoly::zero();
            for k in 1..=n {
                if !self.coeffs[k].is_zero() {
                    acc += &(&self.coeffs[k] * &out.coeffs[n - k]);
                }
            }
            out.coeffs[n] = acc.scale(&(-&inv0));
        }
        Ok(out)
    }

    pub fn checked_div(&self, other: &Self) -> Result<Self, SeriesError> {
        self.checked_mul(&other.inverse()?)
    }

    /// `log(s)` for a series with constant term 1.
    pub fn log(&self) -> Result<Self, SeriesError> {
        if !self.coeffs[0].is_one() {
            return Err(SeriesError::BadConstantTerm("1"));
        }
        let m = self.order();
        let mut out = Self::zero(m);
        // n L_n = n S_n - sum_{k=1}^{n-1} k L_k S_{n-k}
        for n in 1..=m {
            let mut acc = self.coeffs[n].scale(&int(n as i64));
            for k in 1..n {
                if out.coeffs[k].is_zero() || self.coeffs[n - k].is_zero() {
                    continue;
                }
                acc -= &(&out.coeffs[k] * &self.coeffs[n - k]).scale(&int(k as i64));
            }
            out.coeffs[n] = acc.scale(&rat(1, n as i64));
        }
        Ok(out)
    }

    /// `exp(s)` for a series with constant term 0.
    pub fn exp(&self) -> Result<Self, SeriesError> {
        if !self.coeffs[0].is_zero() {
            return Err(SeriesError::BadConstantTerm("0"));
        }
        let m = self.order();
        let mut out = Self::zero(m);
        out.coeffs[0] = TPoly::one();
        // n E_n = sum_{k=1}^{n} k S_k E_{n-k}
        for n in 1..=m {
            let mut acc = TPoly::zero();
            for k in 1..=n {
                if self.coeffs[k].is_zero() || out.coeffs[n - k].is_zero() {
                    continue;
                }
                acc += &(&self.coeffs[k] * &out.coeffs[n - k]).scale(&int(k as i64));
            }
            out.coeffs[n] = acc.scale(&rat(1, n as i64));
        }
        Ok(out)
    }

    /// `s^a = exp(a · log s)` for rational `a`; constant term must be 1.
    pub fn pow_rational(&self, exponent: &Rational) -> Result<Self, SeriesError> {
        self.log()?.scale_rational(exponent).exp()
    }

    /// Substitutes a rational value for `t`, leaving constant coefficients.
    pub fn substitute_t(&self, t: &Rational) -> Self {
        USeries {
            coeffs: self
                .coeffs
                .iter()
                .map(|c| TPoly::constant(c.evaluate_exact(t)))
                .collect(),
        }
    }

    /// Evaluates each coefficient at `t`, returning the numeric u-coefficients.
    pub fn coefficients_at(&self, t: f64) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.evaluate(t)).collect()
    }

    /// Horner evaluation at numeric `(t, u)`.
    pub fn evaluate(&self, t: f64, u: f64) -> f64 {
        self.coeffs
            .iter()
            .rev()
            .fold(0.0, |acc, c| acc * u + c.evaluate(t))
    }
}

impl Serialize for USeries {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.coeffs.serialize(s)
    }
}

impl<'de> Deserialize<'de> for USeries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let coeffs: Vec<TPoly> = Vec::deserialize(d)?;
        if coeffs.is_empty() {
            return Err(D::Error::custom("series needs at least one coefficient"));
        }
        let order = coeffs.len() - 1;
        Ok(USeries::from_coeffs(coeffs, order))
    }
}

impl Add for &USeries {
    type Output = USeries;
    fn add(self, rhs: &USeries) -> USeries {
        self.checked_add(rhs).expect("series order mismatch")
    }
}

impl Sub for &USeries {
    type Output = USeries;
    fn sub(self, rhs: &USeries) -> USeries {
        self.checked_sub(rhs).expect("series order mismatch")
    }
}

impl Mul for &USeries {
    type Output = USeries;
    fn mul(self, rhs: &USeries) -> USeries {
        self.checked_mul(rhs).expect("series order mismatch")
    }
}

impl Neg for &USeries {
    type Output = USeries;
    fn neg(self) -> USeries {
        USeries {
            coeffs: self.coeffs.iter().map(|c| -c).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// PolyMatrix
// ---------------------------------------------------------------------------

/// Dense row-major matrix of `TPoly` entries.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PolyMatrix {
    rows: usize,
    cols: usize,
    data: Vec<TPoly>,
}

impl PolyMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        PolyMatrix {
            rows,
            cols,
            data: vec![TPoly::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(vec![TPoly::one(); n])
    }

    pub fn diagonal(diag: Vec<TPoly>) -> Self {
        let n = diag.len();
        let mut m = Self::zeros(n, n);
        for (i, d) in diag.into_iter().enumerate() {
            m.data[i * n + i] = d;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> TPoly) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        PolyMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> &TPoly {
        &self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: TPoly) {
        self.data[i * self.cols + j] = v;
    }

    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut TPoly {
        &mut self.data[i * self.cols + j]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(TPoly::is_zero)
    }

    pub fn diagonal_entries(&self) -> Vec<TPoly> {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i).clone())
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).clone())
    }

    pub fn row(&self, i: usize) -> Self {
        Self::from_fn(1, self.cols, |_, j| self.get(i, j).clone())
    }

    pub fn column(&self, j: usize) -> Self {
        Self::from_fn(self.rows, 1, |i, _| self.get(i, j).clone())
    }

    pub fn scale(&self, c: &TPoly) -> Self {
        PolyMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a * c).collect(),
        }
    }

    pub fn scale_rational(&self, c: &Rational) -> Self {
        PolyMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|a| a.scale(c)).collect(),
        }
    }

    fn same_shape(&self, other: &Self) -> Result<(), SeriesError> {
        if self.rows == other.rows && self.cols == other.cols {
            Ok(())
        } else {
            Err(SeriesError::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )))
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.same_shape(other)?;
        let mut out = self.clone();
        out.add_assign_matrix(other);
        Ok(out)
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.same_shape(other)?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        Ok(out)
    }

    fn add_assign_matrix(&mut self, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            if !b.is_zero() {
                *a += b;
            }
        }
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, SeriesError> {
        if self.cols != other.rows {
            return Err(SeriesError::DimensionMismatch(format!(
                "{}x{} times {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Self::zeros(self.rows, other.cols);
        self.mul_acc_into(other, &mut out);
        Ok(out)
    }

    /// `out += self * other`, skipping zero entries.
    fn mul_acc_into(&self, other: &Self, out: &mut Self) {
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        let prod = a * b;
                        *out.get_mut(i, j) += &prod;
                    }
                }
            }
        }
    }

    /// Numeric matrix with every entry evaluated at `t`.
    pub fn evaluate(&self, t: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows, self.cols, |i, j| self.get(i, j).evaluate(t))
    }
}

impl Add for &PolyMatrix {
    type Output = PolyMatrix;
    fn add(self, rhs: &PolyMatrix) -> PolyMatrix {
        self.checked_add(rhs).expect("matrix dimension mismatch")
    }
}

impl Sub for &PolyMatrix {
    type Output = PolyMatrix;
    fn sub(self, rhs: &PolyMatrix) -> PolyMatrix {
        self.checked_sub(rhs).expect("matrix dimension mismatch")
    }
}

impl Mul for &PolyMatrix {
    type Output = PolyMatrix;
    fn mul(self, rhs: &PolyMatrix) -> PolyMatrix {
        self.checked_mul(rhs).expect("matrix dimension mismatch")
    }
}

// ---------------------------------------------------------------------------
// OperatorSeries
// ---------------------------------------------------------------------------

/// Truncated power series in `u` with matrix coefficients.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OperatorSeries {
    rows: usize,
    cols: usize,
    coeffs: Vec<PolyMatrix>,
}

impl OperatorSeries {
    pub fn zero(rows: usize, cols: usize, order: usize) -> Self {
        OperatorSeries {
            rows,
            cols,
            coeffs: vec![PolyMatrix::zeros(rows, cols); order + 1],
        }
    }

    pub fn identity(n: usize, order: usize) -> Self {
        Self::constant(PolyMatrix::identity(n), order)
    }

    pub fn constant(m: PolyMatrix, order: usize) -> Self {
        Self::from_coeffs(vec![m], order).expect("single coefficient")
    }

    /// Builds from matrix coefficients `[M_0, M_1, ...]`, padding with zeros
    /// up to `order` and dropping anything beyond.
    pub fn from_coeffs(coeffs: Vec<PolyMatrix>, order: usize) -> Result<Self, SeriesError> {
        let first = coeffs
            .first()
            .ok_or_else(|| SeriesError::DimensionMismatch("no coefficients".into()))?;
        let (rows, cols) = (first.rows, first.cols);
        if let Some(bad) = coeffs.iter().find(|c| c.rows != rows || c.cols != cols) {
            return Err(SeriesError::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                rows, cols, bad.rows, bad.cols
            )));
        }
        let mut coeffs = coeffs;
        coeffs.resize(order + 1, PolyMatrix::zeros(rows, cols));
        Ok(OperatorSeries { rows, cols, coeffs })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn coeff(&self, k: usize) -> &PolyMatrix {
        &self.coeffs[k]
    }

    pub fn coeffs(&self) -> &[PolyMatrix] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(PolyMatrix::is_zero)
    }

    /// The `(i, j)` entry as a scalar series.
    pub fn entry(&self, i: usize, j: usize) -> USeries {
        USeries::from_coeffs(
            self.coeffs.iter().map(|c| c.get(i, j).clone()).collect(),
            self.order(),
        )
    }

    pub fn row(&self, i: usize) -> Self {
        OperatorSeries {
            rows: 1,
            cols: self.cols,
            coeffs: self.coeffs.iter().map(|c| c.row(i)).collect(),
        }
    }

    pub fn column(&self, j: usize) -> Self {
        OperatorSeries {
            rows: self.rows,
            cols: 1,
            coeffs: self.coeffs.iter().map(|c| c.column(j)).collect(),
        }
    }

    fn check_compatible(&self, other: &Self, for_mul: bool) -> Result<(), SeriesError> {
        if self.order() != other.order() {
            return Err(SeriesError::OrderMismatch(self.order(), other.order()));
        }
        let ok = if for_mul {
            self.cols == other.rows
        } else {
            self.rows == other.rows && self.cols == other.cols
        };
        if ok {
            Ok(())
        } else {
            Err(SeriesError::DimensionMismatch(format!(
                "{}x{} vs {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )))
        }
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_compatible(other, false)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(OperatorSeries {
            rows: self.rows,
            cols: self.cols,
            coeffs,
        })
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_compatible(other, false)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(OperatorSeries {
            rows: self.rows,
            cols: self.cols,
            coeffs,
        })
    }

    pub fn checked_mul(&self, other: &Self) -> Result<Self, SeriesError> {
        self.check_compatible(other, true)?;
        let m = self.order();
        let mut out = Self::zero(self.rows, other.cols, m);
        for i in 0..=m {
            if self.coeffs[i].is_zero() {
                continue;
            }
            for j in 0..=m - i {
                if other.coeffs[j].is_zero() {
                    continue;
                }
                self.coeffs[i].mul_acc_into(&other.coeffs[j], &mut out.coeffs[i + j]);
            }
        }
        Ok(out)
    }

    pub fn scale(&self, c: &TPoly) -> Self {
        OperatorSeries {
            rows: self.rows,
            cols: self.cols,
            coeffs: self.coeffs.iter().map(|m| m.scale(c)).collect(),
        }
    }

    pub fn scale_rational(&self, c: &Rational) -> Self {
        OperatorSeries {
            rows: self.rows,
            cols: self.cols,
            coeffs: self.coeffs.iter().map(|m| m.scale_rational(c)).collect(),
        }
    }

    /// Scales every coefficient by a scalar series (a central element).
    pub fn scale_series(&self, s: &USeries) -> Result<Self, SeriesError> {
        if s.order() != self.order() {
            return Err(SeriesError::OrderMismatch(self.order(), s.order()));
        }
        let m = self.order();
        let mut out = Self::zero(self.rows, self.cols, m);
        for (i, c) in s.coeffs().iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            for j in 0..=m - i {
                if !self.coeffs[j].is_zero() {
                    out.coeffs[i + j].add_assign_matrix(&self.coeffs[j].scale(c));
                }
            }
        }
        Ok(out)
    }

    fn require_square(&self) -> Result<(), SeriesError> {
        if self.rows == self.cols {
            Ok(())
        } else {
            Err(SeriesError::DimensionMismatch(format!(
                "{}x{} is not square",
                self.rows, self.cols
            )))
        }
    }

    /// `log(I + H) = Σ_{k≥1} (-1)^{k+1} H^k / k`; constant term must be `I`.
    pub fn log(&self) -> Result<Self, SeriesError> {
        self.require_square()?;
        if self.coeffs[0] != PolyMatrix::identity(self.rows) {
            return Err(SeriesError::BadConstantTerm("the identity"));
        }
        let mut h = self.clone();
        h.coeffs[0] = PolyMatrix::zeros(self.rows, self.cols);
        let mut out = Self::zero(self.rows, self.cols, self.order());
        let mut power = h.clone();
        for k in 1..=self.order() {
            let sign = if k % 2 == 1 { 1 } else { -1 };
            out = out.checked_add(&power.scale_rational(&rat(sign, k as i64)))?;
            power = power.checked_mul(&h)?;
        }
        Ok(out)
    }

    /// `exp(H) = Σ_{k≥0} H^k / k!`; constant term must be zero.
    pub fn exp(&self) -> Result<Self, SeriesError> {
        self.require_square()?;
        if !self.coeffs[0].is_zero() {
            return Err(SeriesError::BadConstantTerm("zero"));
        }
        let mut out = Self::identity(self.rows, self.order());
        let mut term = out.clone();
        for k in 1..=self.order() {
            term = term.checked_mul(self)?.scale_rational(&rat(1, k as i64));
            out = out.checked_add(&term)?;
        }
        Ok(out)
    }
}

impl Mul for &OperatorSeries {
    type Output = OperatorSeries;
    fn mul(self, rhs: &OperatorSeries) -> OperatorSeries {
        self.checked_mul(rhs).expect("operator series mismatch")
    }
}

impl Add for &OperatorSeries {
    type Output = OperatorSeries;
    fn add(self, rhs: &OperatorSeries) -> OperatorSeries {
        self.checked_add(rhs).expect("operator series mismatch")
    }
}

impl Sub for &OperatorSeries {
    type Output = OperatorSeries;
    fn sub(self, rhs: &OperatorSeries) -> OperatorSeries {
        self.checked_sub(rhs).expect("operator series mismatch")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u_poly(order: usize, coeffs: &[i64]) -> USeries {
        USeries::from_coeffs(coeffs.iter().map(|&c| TPoly::from_int(c)).collect(), order)
    }

    #[test]
    fn one_plus_u_times_one_minus_u() {
        let a = u_poly(3, &[1, 1]);
        let b = u_poly(3, &[1, -1]);
        assert_eq!(&a * &b, u_poly(3, &[1, 0, -1]));
    }

    #[test]
    fn square_of_one_minus_t_times_u() {
        let s = USeries::monomial(TPoly::one_minus_t(), 1, 4);
        let sq = &s * &s;
        assert_eq!(*sq.coeff(2), TPoly::from_ints(&[1, -2, 1]));
        assert!(sq.coeff(1).is_zero() && sq.coeff(3).is_zero());
    }

    #[test]
    fn order_mismatch_is_reported() {
        let a = USeries::one(3);
        let b = USeries::one(4);
        assert_eq!(a.checked_mul(&b), Err(SeriesError::OrderMismatch(3, 4)));
    }

    #[test]
    fn log_of_one_minus_u() {
        let l = u_poly(3, &[1, -1]).log().unwrap();
        let expected = USeries::from_coeffs(
            vec![
                TPoly::zero(),
                TPoly::from_int(-1),
                TPoly::constant(rat(-1, 2)),
                TPoly::constant(rat(-1, 3)),
            ],
            3,
        );
        assert_eq!(l, expected);
    }

    #[test]
    fn log_requires_unit_constant_term() {
        assert!(matches!(
            u_poly(3, &[2, 1]).log(),
            Err(SeriesError::BadConstantTerm(_))
        ));
        assert!(matches!(
            u_poly(3, &[1, 1]).exp(),
            Err(SeriesError::BadConstantTerm(_))
        ));
    }

    #[test]
    fn exp_of_u_and_zero() {
        let e = u_poly(2, &[0, 1]).exp().unwrap();
        assert_eq!(*e.coeff(2), TPoly::constant(rat(1, 2)));
        assert_eq!(USeries::zero(5).exp().unwrap(), USeries::one(5));
    }

    #[test]
    fn exp_two_log_is_square() {
        let s = u_poly(6, &[1, -1]);
        let sq = s.log().unwrap().scale_rational(&int(2)).exp().unwrap();
        assert_eq!(sq, u_poly(6, &[1, -2, 1]));
    }

    #[test]
    fn inverse_square_root_binomial() {
        let s = u_poly(4, &[1, 0, -1]);
        let p = s.pow_rational(&rat(-1, 2)).unwrap();
        assert_eq!(*p.coeff(2), TPoly::constant(rat(1, 2)));
        assert_eq!(*p.coeff(4), TPoly::constant(rat(3, 8)));
        assert_eq!(s.pow_rational(&int(0)).unwrap(), USeries::one(4));
    }

    #[test]
    fn integrate_and_derivative() {
        assert_eq!(USeries::one(3).integrate(), u_poly(3, &[0, 1]));
        assert_eq!(u_poly(4, &[0, 0, 3]).integrate(), u_poly(4, &[0, 0, 0, 1]));
        let s = u_poly(5, &[4, 1, 7, -2, 3, 9]);
        let back = s.derivative().integrate();
        // constant term lost; everything else up to order M-1 restored
        for k in 1..5 {
            assert_eq!(back.coeff(k), s.coeff(k));
        }
        let s2 = u_poly(5, &[1, 2, 3, 4, 5, 6]);
        assert_eq!(s2.integrate().derivative().truncate(4), s2.truncate(4));
    }

    #[test]
    fn evaluate_examples() {
        let p = TPoly::monomial(int(2), 2);
        assert_eq!(p.evaluate(0.5), 0.5);
        assert_eq!(u_poly(2, &[1, 0, -1]).evaluate(0.0, 0.25), 0.9375);
    }

    #[test]
    fn inverse_round_trip() {
        let s = USeries::from_coeffs(
            vec![TPoly::one(), TPoly::from_ints(&[0, 1]), TPoly::from_ints(&[2, -1, 3])],
            6,
        );
        assert_eq!(&s * &s.inverse().unwrap(), USeries::one(6));
    }

    #[test]
    fn identity_operator_series_is_neutral() {
        let a = PolyMatrix::from_fn(2, 2, |i, j| TPoly::from_ints(&[i as i64, j as i64 + 1]));
        let s = OperatorSeries::from_coeffs(vec![PolyMatrix::identity(2), a.clone(), a], 3).unwrap();
        let id = OperatorSeries::identity(2, 3);
        assert_eq!(&id * &s, s);
        assert_eq!(&s * &id, s);
    }

    #[test]
    fn log_of_identity_is_zero() {
        assert!(OperatorSeries::identity(3, 5).log().unwrap().is_zero());
    }

    #[test]
    fn display_polynomials() {
        assert_eq!(TPoly::from_ints(&[1, -2, 1]).to_string(), "1 - 2*t + t^2");
        assert_eq!(TPoly::constant(rat(-3, 2)).to_string(), "-3/2");
        assert_eq!(TPoly::zero().to_string(), "0");
    }

    #[test]
    fn rational_text_round_trip() {
        assert_eq!(parse_rational("3/6").unwrap(), rat(1, 2));
        assert_eq!(parse_rational("-4").unwrap(), int(-4));
        assert_eq!(format_rational(&int(5)), "5/1");
        assert!(parse_rational("1/0").is_err());
    }

    #[test]
    fn series_json_layout() {
        let s = USeries::from_coeffs(vec![TPoly::one(), TPoly::from_ints(&[0, 2])], 1);
        let json = serde_json::to_string(&s).unwrap();
        assert_eq!(json, r#"[["1/1"],["0/1","2/1"]]"#);
        let back: USeries = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }
}
