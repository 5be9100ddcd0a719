//! Linear state-space models and their Laplace-domain transfer functions.
//!
//! Polynomials are stored with ascending powers of `s`, so `[a0, a1, a2]`
//! means `a0 + a1 s + a2 s²`. Transfer functions are extracted from a
//! state-space model with the Faddeev–LeVerrier recursion, which yields the
//! characteristic polynomial and the adjugate of `(sI - A)` as a matrix
//! polynomial without any symbolic algebra.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{arg, Error, Result};

/// Constant-coefficient linear system `x' = A x + B u`, `y = C x + D u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
}

impl StateSpaceModel {
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        if n == 0 || a.ncols() != n {
            return Err(Error::InvalidModel(format!(
                "A must be square and non-empty, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        if b.nrows() != n || b.ncols() == 0 {
            return Err(Error::InvalidModel(format!(
                "B must have {n} rows and at least one column, got {}x{}",
                b.nrows(),
                b.ncols()
            )));
        }
        if c.ncols() != n || c.nrows() == 0 {
            return Err(Error::InvalidModel(format!(
                "C must have {n} columns and at least one row, got {}x{}",
                c.nrows(),
                c.ncols()
            )));
        }
        if d.nrows() != c.nrows() || d.ncols() != b.ncols() {
            return Err(Error::InvalidModel(format!(
                "D must be {}x{}, got {}x{}",
                c.nrows(),
                b.ncols(),
                d.nrows(),
                d.ncols()
            )));
        }
        Ok(Self { a, b, c, d })
    }

    /// Builds a model from row-major slices; handy for the small systems used
    /// throughout the crate.
    pub fn from_rows(
        a: &[&[f64]],
        b: &[&[f64]],
        c: &[&[f64]],
        d: &[&[f64]],
    ) -> Result<Self> {
        Self::new(rows(a)?, rows(b)?, rows(c)?, rows(d)?)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn states(&self) -> usize {
        self.a.nrows()
    }

    pub fn inputs(&self) -> usize {
        self.b.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.a.shape() == other.a.shape()
            && self.b.shape() == other.b.shape()
            && self.c.shape() == other.c.shape()
            && self.d.shape() == other.d.shape()
    }
}

fn rows(data: &[&[f64]]) -> Result<DMatrix<f64>> {
    let nrows = data.len();
    let ncols = data.first().map_or(0, |r| r.len());
    if data.iter().any(|r| r.len() != ncols) {
        return Err(Error::InvalidModel("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| data[i][j]))
}

/// Ratio of two real polynomials in `s`, coefficients in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalTransferFunction {
    num: Vec<f64>,
    den: Vec<f64>,
}

impl RationalTransferFunction {
    /// Trailing (highest-order) zero coefficients are dropped. The stored
    /// scaling is kept as given; use [`monic`](Self::monic) for a canonical form.
    pub fn new(num: Vec<f64>, den: Vec<f64>) -> Result<Self> {
        if num.iter().chain(den.iter()).any(|x| !x.is_finite()) {
            return arg("transfer function coefficients must be finite");
        }
        let den = trim(den);
        if den.is_empty() {
            return arg("denominator has no nonzero coefficient");
        }
        let mut num = trim(num);
        if num.is_empty() {
            num.push(0.0);
        }
        Ok(Self { num, den })
    }

    pub fn constant(k: f64) -> Self {
        Self {
            num: vec![k],
            den: vec![1.0],
        }
    }

    pub fn num(&self) -> &[f64] {
        &self.num
    }

    pub fn den(&self) -> &[f64] {
        &self.den
    }

    pub fn num_degree(&self) -> usize {
        self.num.len() - 1
    }

    pub fn den_degree(&self) -> usize {
        self.den.len() - 1
    }

    /// Same function with the highest-order denominator coefficient scaled to 1.
    pub fn monic(&self) -> Self {
        let lead = *self.den.last().expect("non-empty denominator");
        Self {
            num: self.num.iter().map(|x| x / lead).collect(),
            den: self.den.iter().map(|x| x / lead).collect(),
        }
    }

    /// Polynomial product of two transfer functions (series connection).
    pub fn series(&self, other: &Self) -> Self {
        Self {
            num: poly_mul(&self.num, &other.num),
            den: poly_mul(&self.den, &other.den),
        }
    }

    /// Compares monic forms coefficient by coefficient, relative to the largest
    /// coefficient magnitude of each polynomial.
    pub fn approx_eq(&self, other: &Self, rel_tol: f64) -> bool {
        let a = self.monic();
        let b = other.monic();
        poly_close(&a.num, &b.num, rel_tol) && poly_close(&a.den, &b.den, rel_tol)
    }

    pub fn evaluate(&self, s: Complex64) -> Result<Complex64> {
        evaluate_tf(self, s)
    }

    pub fn dc_gain(&self) -> Result<f64> {
        dc_gain(self)
    }
}

fn trim(mut p: Vec<f64>) -> Vec<f64> {
    while p.last() == Some(&0.0) {
        p.pop();
    }
    p
}

fn poly_close(a: &[f64], b: &[f64], rel_tol: f64) -> bool {
    let scale = a
        .iter()
        .chain(b.iter())
        .fold(0.0_f64, |m, x| m.max(x.abs()))
        .max(f64::MIN_POSITIVE);
    (0..a.len().max(b.len())).all(|i| {
        let x = a.get(i).copied().unwrap_or(0.0);
        let y = b.get(i).copied().unwrap_or(0.0);
        (x - y).abs() <= rel_tol * scale
    })
}

/// Product of two ascending-order polynomials.
pub fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Horner evaluation of an ascending-order polynomial at a complex point.
pub fn poly_eval(p: &[f64], s: Complex64) -> Complex64 {
    p.iter()
        .rev()
        .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * s + c)
}

fn poly_abs_scale(p: &[f64], s: Complex64) -> f64 {
    let r = s.norm();
    p.iter().rev().fold(0.0, |acc, &c| acc * r + c.abs())
}

/// Exact rational form of `C (sI - A)^-1 B + D` for one input/output pair.
///
/// The characteristic polynomial `det(sI - A)` and the adjugate matrix
/// polynomial come from the Faddeev–LeVerrier recursion
///
/// ```text
/// M_1 = I
/// c_{n-k} = -tr(A M_k) / k
/// M_{k+1} = A M_k + c_{n-k} I
/// adj(sI - A) = sum_k M_k s^(n-k)
/// ```
///
/// The returned denominator is monic.
pub fn tf_from_state_space(
    ss: &StateSpaceModel,
    input_index: usize,
    output_index: usize,
) -> Result<RationalTransferFunction> {
    if input_index >= ss.inputs() {
        return arg(format!(
            "input index {input_index} out of range for {} inputs",
            ss.inputs()
        ));
    }
    if output_index >= ss.outputs() {
        return arg(format!(
            "output index {output_index} out of range for {} outputs",
            ss.outputs()
        ));
    }

    let n = ss.states();
    let a = ss.a();
    let b_col = ss.b().column(input_index).into_owned();
    let c_row = ss.c().row(output_index).into_owned();
    let d = ss.d()[(output_index, input_index)];

    let mut den = vec![0.0; n + 1];
    den[n] = 1.0;
    let mut adj_terms = vec![0.0; n];

    let identity = DMatrix::<f64>::identity(n, n);
    let mut m = identity.clone();
    for k in 1..=n {
        adj_terms[n - k] = (&c_row * &m * &b_col)[(0, 0)];
        let am = a * &m;
        let coeff = -am.trace() / k as f64;
        den[n - k] = coeff;
        m = am + &identity * coeff;
    }

    let mut num: Vec<f64> = den.iter().map(|&c| d * c).collect();
    for (p, t) in adj_terms.iter().enumerate() {
        num[p] += t;
    }
    let scale = num.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    while num.len() > 1 && num.last().map_or(false, |x| x.abs() <= 1e-13 * scale) {
        num.pop();
    }
    RationalTransferFunction::new(num, den)
}

/// `num(s) / den(s)` by Horner evaluation.
pub fn evaluate_tf(tf: &RationalTransferFunction, s: Complex64) -> Result<Complex64> {
    let den = poly_eval(&tf.den, s);
    if den.norm() <= 1e-13 * poly_abs_scale(&tf.den, s) {
        return Err(Error::Pole { re: s.re, im: s.im });
    }
    Ok(poly_eval(&tf.num, s) / den)
}

/// Value of the transfer function at `s = 0`.
pub fn dc_gain(tf: &RationalTransferFunction) -> Result<f64> {
    if tf.den[0] == 0.0 {
        return Err(Error::Pole { re: 0.0, im: 0.0 });
    }
    Ok(tf.num[0] / tf.den[0])
}

/// Magnitude and phase (radians) of `tf(j 2π f)` for each frequency.
pub fn frequency_response(
    tf: &RationalTransferFunction,
    freqs_hz: &[f64],
) -> Result<Vec<(f64, f64)>> {
    freqs_hz
        .iter()
        .map(|&f| {
            let s = Complex64::new(0.0, 2.0 * std::f64::consts::PI * f);
            match evaluate_tf(tf, s) {
                Ok(h) => Ok((h.norm(), h.arg())),
                Err(Error::Pole { .. }) => Err(Error::PoleAtFrequency { freq_hz: f }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// Weighted sum of dimension-identical models: `A = Σ w_k A_k`, likewise for
/// `B`, `C` and `D`.
pub fn average_models(entries: &[(StateSpaceModel, f64)]) -> Result<StateSpaceModel> {
    let (first, _) = entries
        .first()
        .ok_or_else(|| Error::Argument("no models to average".into()))?;
    if let Some((_, w)) = entries.iter().find(|(_, w)| !(*w >= 0.0)) {
        return arg(format!("averaging weight {w} is negative"));
    }
    if entries.iter().any(|(m, _)| !m.same_shape(first)) {
        return Err(Error::InvalidModel(
            "averaged models must have identical dimensions".into(),
        ));
    }
    let zero = |m: &DMatrix<f64>| DMatrix::<f64>::zeros(m.nrows(), m.ncols());
    let mut a = zero(first.a());
    let mut b = zero(first.b());
    let mut c = zero(first.c());
    let mut d = zero(first.d());
    for (m, w) in entries {
        a += m.a() * *w;
        b += m.b() * *w;
        c += m.c() * *w;
        d += m.d() * *w;
    }
    StateSpaceModel::new(a, b, c, d)
}
