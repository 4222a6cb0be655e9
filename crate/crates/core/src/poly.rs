//! Dense multivariate polynomials over the graded monomial basis.
//!
//! Monomials of degree at most `d` in `n` variables are listed by total degree,
//! and within a degree in lexicographic order with `x1 > x2 > ... > xn`:
//!
//! ```text
//! 1, x1, ..., xn, x1^2, x1*x2, ..., x1*xn, x2^2, ..., xn^2, x1^3, ...
//! ```
//!
//! The position of a monomial depends only on its exponents, never on the degree
//! bound, so the basis of degree `d` is a prefix of the basis of degree `d + 1`.
//! Coefficient vectors of different degree bounds can therefore be compared and
//! paired index by index.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex};

use once_cell::sync::Lazy;
use thiserror::Error;

/// Largest number of variables accepted by [`MonomialBasis::new`].
pub const MAX_VARS: usize = 8;
/// Largest total degree accepted by [`MonomialBasis::new`].
pub const MAX_DEGREE: u32 = 10;
/// Coefficients with smaller magnitude are omitted when printing.
pub const PRINT_ZERO_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("basis size for n = {n}, d = {d} overflows")]
    SizeLimit { n: usize, d: u32 },
    #[error("{n} variables exceed the limit of {max}")]
    TooManyVariables { n: usize, max: usize },
    #[error("degree {d} exceeds the limit of {max}")]
    DegreeCap { d: u32, max: u32 },
    #[error("expected {expected} variables, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("coefficient vector has length {got}, basis has {expected} monomials")]
    LengthMismatch { expected: usize, got: usize },
    #[error("polynomials need at least one variable")]
    NoVariables,
}

/// Exponent vector `(i_1, ..., i_n)` of a monomial.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    pub fn zeros(n: usize) -> Self {
        MultiIndex(vec![0; n])
    }

    /// The exponent vector of the variable `x_{k+1}`.
    pub fn unit(n: usize, k: usize) -> Self {
        let mut e = vec![0; n];
        e[k] = 1;
        MultiIndex(e)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn num_vars(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Exponents of the product monomial.
    pub fn combine(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.0.len(), other.0.len());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Position of this monomial in the graded basis (0-based).
    pub fn position(&self) -> usize {
        monomial_rank(&self.0)
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex(v)
    }
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) at every step
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// Number of monomials of degree at most `d` in `n` variables, `C(n + d, d)`.
pub fn basis_size(n: usize, d: u32) -> Result<usize, PolyError> {
    if n == 0 {
        return Err(PolyError::NoVariables);
    }
    let total = n
        .checked_add(d as usize)
        .ok_or(PolyError::SizeLimit { n, d })?;
    binomial(total, d as usize).ok_or(PolyError::SizeLimit { n, d })
}

// number of exponent vectors with `parts` entries summing to `total`
fn compositions(total: u32, parts: usize) -> usize {
    if parts == 0 {
        return usize::from(total == 0);
    }
    binomial(total as usize + parts - 1, parts - 1).expect("composition count overflow")
}

fn monomial_rank(e: &[u32]) -> usize {
    let n = e.len();
    let k: u32 = e.iter().sum();
    let mut rank = if k == 0 {
        0
    } else {
        binomial(n + k as usize - 1, (k - 1) as usize).expect("rank overflow")
    };
    let mut remaining = k;
    for (i, &ei) in e.iter().enumerate().take(n.saturating_sub(1)) {
        let rest = n - i - 1;
        for v in (ei + 1)..=remaining {
            rank += compositions(remaining - v, rest);
        }
        remaining -= ei;
    }
    rank
}

fn push_degree(n: usize, k: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
    if prefix.len() + 1 == n {
        prefix.push(k);
        out.push(MultiIndex(prefix.clone()));
        prefix.pop();
        return;
    }
    for v in (0..=k).rev() {
        prefix.push(v);
        push_degree(n, k - v, prefix, out);
        prefix.pop();
    }
}

/// All exponent vectors with `|i| <= d` in graded order.
pub fn enumerate_basis(n: usize, d: u32) -> Result<Vec<MultiIndex>, PolyError> {
    let size = basis_size(n, d)?;
    let mut out = Vec::with_capacity(size);
    let mut prefix = Vec::with_capacity(n);
    for k in 0..=d {
        push_degree(n, k, &mut prefix, &mut out);
    }
    debug_assert_eq!(out.len(), size);
    Ok(out)
}

static BASIS_CACHE: Lazy<Mutex<HashMap<(usize, u32), Arc<[MultiIndex]>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// The graded monomial basis `x^(d)` of polynomials of degree at most `d` in `n` variables.
#[derive(Clone)]
pub struct MonomialBasis {
    n: usize,
    d: u32,
    monomials: Arc<[MultiIndex]>,
}

impl MonomialBasis {
    pub fn new(n: usize, d: u32) -> Result<Self, PolyError> {
        if n == 0 {
            return Err(PolyError::NoVariables);
        }
        if n > MAX_VARS {
            return Err(PolyError::TooManyVariables { n, max: MAX_VARS });
        }
        if d > MAX_DEGREE {
            return Err(PolyError::DegreeCap { d, max: MAX_DEGREE });
        }
        let mut cache = BASIS_CACHE.lock().expect("basis cache poisoned");
        let monomials = match cache.get(&(n, d)) {
            Some(m) => m.clone(),
            None => {
                let m: Arc<[MultiIndex]> = enumerate_basis(n, d)?.into();
                cache.insert((n, d), m.clone());
                m
            }
        };
        Ok(MonomialBasis { n, d, monomials })
    }

    pub fn num_vars(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> u32 {
        self.d
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    pub fn monomials(&self) -> &[MultiIndex] {
        &self.monomials
    }

    pub fn monomial(&self, alpha: usize) -> &MultiIndex {
        &self.monomials[alpha]
    }

    /// Position of `e` in this basis, `None` if it has the wrong arity or is too high in degree.
    pub fn position(&self, e: &MultiIndex) -> Option<usize> {
        if e.num_vars() != self.n || e.degree() > self.d {
            return None;
        }
        Some(e.position())
    }

    /// Values of all basis monomials at `x`, i.e. the vector `x^(d)`.
    pub fn evaluate_monomials(&self, x: &[f64]) -> Result<Vec<f64>, PolyError> {
        if x.len() != self.n {
            return Err(PolyError::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let powers = power_table(x, self.d);
        Ok(self
            .monomials
            .iter()
            .map(|m| {
                m.exponents()
                    .iter()
                    .enumerate()
                    .map(|(k, &e)| powers[k][e as usize])
                    .product()
            })
            .collect())
    }
}

impl PartialEq for MonomialBasis {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.d == other.d
    }
}

impl fmt::Debug for MonomialBasis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MonomialBasis")
            .field("n", &self.n)
            .field("d", &self.d)
            .field("len", &self.len())
            .finish()
    }
}

fn power_table(x: &[f64], d: u32) -> Vec<Vec<f64>> {
    x.iter()
        .map(|&xi| {
            let mut row = Vec::with_capacity(d as usize + 1);
            let mut p = 1.0;
            for _ in 0..=d {
                row.push(p);
                p *= xi;
            }
            row
        })
        .collect()
}

/// Which half of the doubled variable space `(x, y)` a lifted polynomial lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    X,
    Y,
}

/// A real polynomial stored densely over a [`MonomialBasis`].
#[derive(Clone, PartialEq)]
pub struct Polynomial {
    basis: MonomialBasis,
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn zero(n: usize) -> Result<Self, PolyError> {
        Polynomial::constant(n, 0.0)
    }

    pub fn constant(n: usize, c: f64) -> Result<Self, PolyError> {
        let basis = MonomialBasis::new(n, 0)?;
        Ok(Polynomial {
            basis,
            coeffs: vec![c],
        })
    }

    /// The coordinate polynomial `x_{k+1}`.
    pub fn variable(n: usize, k: usize) -> Result<Self, PolyError> {
        if k >= n {
            return Err(PolyError::DimensionMismatch {
                expected: n,
                got: k + 1,
            });
        }
        let basis = MonomialBasis::new(n, 1)?;
        let mut coeffs = vec![0.0; n + 1];
        coeffs[k + 1] = 1.0;
        Ok(Polynomial { basis, coeffs })
    }

    pub fn from_coeffs(basis: MonomialBasis, coeffs: Vec<f64>) -> Result<Self, PolyError> {
        if coeffs.len() != basis.len() {
            return Err(PolyError::LengthMismatch {
                expected: basis.len(),
                got: coeffs.len(),
            });
        }
        Ok(Polynomial { basis, coeffs })
    }

    /// Builds a polynomial from sparse `(exponents, coefficient)` pairs; repeated
    /// exponent vectors are summed.
    pub fn from_terms<I, E>(n: usize, terms: I) -> Result<Self, PolyError>
    where
        I: IntoIterator<Item = (E, f64)>,
        E: Into<MultiIndex>,
    {
        let terms: Vec<(MultiIndex, f64)> =
            terms.into_iter().map(|(e, c)| (e.into(), c)).collect();
        let mut d = 0;
        for (e, _) in &terms {
            if e.num_vars() != n {
                return Err(PolyError::DimensionMismatch {
                    expected: n,
                    got: e.num_vars(),
                });
            }
            d = d.max(e.degree());
        }
        let basis = MonomialBasis::new(n, d)?;
        let mut coeffs = vec![0.0; basis.len()];
        for (e, c) in terms {
            coeffs[e.position()] += c;
        }
        Ok(Polynomial { basis, coeffs })
    }

    pub fn num_vars(&self) -> usize {
        self.basis.num_vars()
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient at basis position `alpha`; zero beyond the stored basis.
    pub fn coeff_at(&self, alpha: usize) -> f64 {
        self.coeffs.get(alpha).copied().unwrap_or(0.0)
    }

    pub fn coeff(&self, e: &MultiIndex) -> f64 {
        match self.basis.position(e) {
            Some(a) => self.coeffs[a],
            None => 0.0,
        }
    }

    /// Largest total degree carrying a nonzero coefficient.
    pub fn degree(&self) -> u32 {
        self.coeffs
            .iter()
            .enumerate()
            .rev()
            .find(|(_, c)| **c != 0.0)
            .map(|(a, _)| self.basis.monomial(a).degree())
            .unwrap_or(0)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == 0.0)
    }

    /// Euclidean norm of the coefficient vector.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Nonzero terms in basis order.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, f64)> + '_ {
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(move |(a, c)| (self.basis.monomial(a), *c))
    }

    /// Same polynomial stored over the basis of degree `d` (which must cover its degree).
    pub fn with_degree_bound(&self, d: u32) -> Result<Self, PolyError> {
        let deg = self.degree();
        if deg > d {
            return Err(PolyError::DegreeCap { d: deg, max: d });
        }
        let basis = MonomialBasis::new(self.num_vars(), d)?;
        let mut coeffs = vec![0.0; basis.len()];
        let keep = coeffs.len().min(self.coeffs.len());
        coeffs[..keep].copy_from_slice(&self.coeffs[..keep]);
        Ok(Polynomial { basis, coeffs })
    }

    /// Drops trailing zero coefficients so the basis degree equals the actual degree.
    pub fn trimmed(&self) -> Self {
        self.with_degree_bound(self.degree())
            .expect("trimming never raises the degree")
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64, PolyError> {
        if x.len() != self.num_vars() {
            return Err(PolyError::DimensionMismatch {
                expected: self.num_vars(),
                got: x.len(),
            });
        }
        let powers = power_table(x, self.basis.degree());
        Ok(self
            .terms()
            .map(|(m, c)| {
                c * m
                    .exponents()
                    .iter()
                    .enumerate()
                    .map(|(k, &e)| powers[k][e as usize])
                    .product::<f64>()
            })
            .sum())
    }

    /// Partial derivative with respect to `x_{k+1}`.
    pub fn partial(&self, k: usize) -> Result<Self, PolyError> {
        let n = self.num_vars();
        if k >= n {
            return Err(PolyError::DimensionMismatch {
                expected: n,
                got: k + 1,
            });
        }
        let d = self.basis.degree().saturating_sub(1);
        let basis = MonomialBasis::new(n, d)?;
        let mut coeffs = vec![0.0; basis.len()];
        for (m, c) in self.terms() {
            let e = m.exponents()[k];
            if e == 0 {
                continue;
            }
            let mut lowered = m.exponents().to_vec();
            lowered[k] -= 1;
            coeffs[monomial_rank(&lowered)] += c * e as f64;
        }
        Ok(Polynomial { basis, coeffs })
    }

    pub fn gradient(&self) -> Vec<Polynomial> {
        (0..self.num_vars())
            .map(|k| self.partial(k).expect("index within range"))
            .collect()
    }

    fn check_same_vars(&self, other: &Polynomial) -> Result<(), PolyError> {
        if self.num_vars() != other.num_vars() {
            return Err(PolyError::DimensionMismatch {
                expected: self.num_vars(),
                got: other.num_vars(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Polynomial) -> Result<Self, PolyError> {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &Polynomial) -> Result<Self, PolyError> {
        self.axpy(-1.0, other)
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Polynomial) -> Result<Self, PolyError> {
        self.check_same_vars(other)?;
        let (mut out, short) = if self.coeffs.len() >= other.coeffs.len() {
            (self.clone(), other)
        } else {
            let mut o = other.scale(a);
            for (c, s) in o.coeffs.iter_mut().zip(&self.coeffs) {
                *c += s;
            }
            return Ok(o);
        };
        for (c, s) in out.coeffs.iter_mut().zip(&short.coeffs) {
            *c += a * s;
        }
        Ok(out)
    }

    pub fn scale(&self, a: f64) -> Self {
        Polynomial {
            basis: self.basis.clone(),
            coeffs: self.coeffs.iter().map(|c| a * c).collect(),
        }
    }

    pub fn add_constant(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coeffs[0] += c;
        out
    }

    pub fn mul(&self, other: &Polynomial) -> Result<Self, PolyError> {
        self.check_same_vars(other)?;
        let n = self.num_vars();
        let d = self.degree() + other.degree();
        let basis = MonomialBasis::new(n, d)?;
        let mut coeffs = vec![0.0; basis.len()];
        let rhs: Vec<(&MultiIndex, f64)> = other.terms().collect();
        for (a, ca) in self.terms() {
            for (b, cb) in &rhs {
                coeffs[a.combine(b).position()] += ca * cb;
            }
        }
        Ok(Polynomial { basis, coeffs })
    }

    pub fn square(&self) -> Result<Self, PolyError> {
        self.mul(self)
    }

    pub fn pow(&self, k: u32) -> Result<Self, PolyError> {
        let mut acc = Polynomial::constant(self.num_vars(), 1.0)?;
        for _ in 0..k {
            acc = acc.mul(self)?;
        }
        Ok(acc)
    }

    /// Re-expresses the polynomial in `total` variables, placing its own variables
    /// at positions `offset..offset + n`.
    pub fn embed(&self, total: usize, offset: usize) -> Result<Self, PolyError> {
        let n = self.num_vars();
        if offset + n > total {
            return Err(PolyError::DimensionMismatch {
                expected: total,
                got: offset + n,
            });
        }
        let basis = MonomialBasis::new(total, self.basis.degree())?;
        let mut coeffs = vec![0.0; basis.len()];
        let mut e = vec![0u32; total];
        for (m, c) in self.terms() {
            e.iter_mut().for_each(|v| *v = 0);
            e[offset..offset + n].copy_from_slice(m.exponents());
            coeffs[monomial_rank(&e)] += c;
        }
        Ok(Polynomial { basis, coeffs })
    }

    /// Substitutes `x_k -> images[k]`; all images share one variable count.
    pub fn substitute(&self, images: &[Polynomial]) -> Result<Self, PolyError> {
        let n = self.num_vars();
        if images.len() != n {
            return Err(PolyError::DimensionMismatch {
                expected: n,
                got: images.len(),
            });
        }
        let target_vars = images[0].num_vars();
        let d = self.basis.degree();
        // powers[k][e] = images[k]^e
        let mut powers: Vec<Vec<Polynomial>> = Vec::with_capacity(n);
        for img in images {
            img.check_same_vars(&images[0])?;
            let mut row = vec![Polynomial::constant(target_vars, 1.0)?];
            for e in 1..=d as usize {
                let next = row[e - 1].mul(img)?;
                row.push(next);
            }
            powers.push(row);
        }
        let mut acc = Polynomial::zero(target_vars)?;
        for (m, c) in self.terms() {
            let mut term = Polynomial::constant(target_vars, c)?;
            for (k, &e) in m.exponents().iter().enumerate() {
                if e > 0 {
                    term = term.mul(&powers[k][e as usize])?;
                }
            }
            acc = acc.add(&term)?;
        }
        Ok(acc)
    }

    /// Views `f(x)` as a polynomial on `(x, y)` in `2n` variables, reading its
    /// arguments from the chosen block.
    pub fn lift_to_xy(&self, block: Block) -> Result<Self, PolyError> {
        let n = self.num_vars();
        match block {
            Block::X => self.embed(2 * n, 0),
            Block::Y => self.embed(2 * n, n),
        }
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Polynomial(n={}, {})", self.num_vars(), self)
    }
}

impl fmt::Display for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (m, c) in self.terms() {
            if c.abs() < PRINT_ZERO_TOL {
                continue;
            }
            let mut factors = Vec::new();
            for (k, &e) in m.exponents().iter().enumerate() {
                match e {
                    0 => {}
                    1 => factors.push(format!("x{}", k + 1)),
                    _ => factors.push(format!("x{}^{}", k + 1, e)),
                }
            }
            let mag = c.abs();
            let body = if factors.is_empty() {
                format!("{mag}")
            } else if mag == 1.0 {
                factors.join("*")
            } else {
                format!("{mag}*{}", factors.join("*"))
            };
            if first {
                if c < 0.0 {
                    write!(f, "-")?;
                }
                write!(f, "{body}")?;
                first = false;
            } else {
                write!(f, " {} {body}", if c < 0.0 { '-' } else { '+' })?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// For each monomial `alpha` of degree `<= 2r`, the pairs `(beta, gamma)` of
/// half-degree monomials with `i(beta) + i(gamma) = i(alpha)`.
///
/// This is the single index behind Gram matrix equations, moment matrices and
/// both relaxations, so the primal and dual assemblies are exact transposes.
#[derive(Debug)]
pub struct GramPairing {
    half: MonomialBasis,
    full: MonomialBasis,
    // unordered pairs with beta <= gamma
    pairs: Vec<Vec<(usize, usize)>>,
    // alpha for each (beta, gamma), row-major over the half basis
    alpha: Vec<usize>,
}

static PAIRING_CACHE: Lazy<Mutex<HashMap<(usize, u32), Arc<GramPairing>>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

impl GramPairing {
    /// Shared pairing index for `n` variables and half degree `r`.
    pub fn shared(n: usize, r: u32) -> Result<Arc<GramPairing>, PolyError> {
        if let Some(p) = PAIRING_CACHE
            .lock()
            .expect("pairing cache poisoned")
            .get(&(n, r))
        {
            return Ok(p.clone());
        }
        let p = Arc::new(GramPairing::build(n, r)?);
        PAIRING_CACHE
            .lock()
            .expect("pairing cache poisoned")
            .insert((n, r), p.clone());
        Ok(p)
    }

    fn build(n: usize, r: u32) -> Result<Self, PolyError> {
        let full_degree = 2 * r;
        if full_degree > MAX_DEGREE {
            return Err(PolyError::DegreeCap {
                d: full_degree,
                max: MAX_DEGREE,
            });
        }
        let half = MonomialBasis::new(n, r)?;
        let full = MonomialBasis::new(n, full_degree)?;
        let t = half.len();
        let mut pairs = vec![Vec::new(); full.len()];
        let mut alpha = vec![0; t * t];
        for b in 0..t {
            for g in b..t {
                let a = half.monomial(b).combine(half.monomial(g)).position();
                pairs[a].push((b, g));
                alpha[b * t + g] = a;
                alpha[g * t + b] = a;
            }
        }
        Ok(GramPairing {
            half,
            full,
            pairs,
            alpha,
        })
    }

    pub fn half_basis(&self) -> &MonomialBasis {
        &self.half
    }

    pub fn full_basis(&self) -> &MonomialBasis {
        &self.full
    }

    /// Size of the Gram (or moment) matrix, `s(r, n)`.
    pub fn gram_dim(&self) -> usize {
        self.half.len()
    }

    /// Number of coefficient equations, `s(2r, n)`.
    pub fn num_monomials(&self) -> usize {
        self.full.len()
    }

    /// Unordered pairs `beta <= gamma` contributing to `alpha`.
    pub fn pairs(&self, alpha: usize) -> &[(usize, usize)] {
        &self.pairs[alpha]
    }

    /// All ordered pairs contributing to `alpha`.
    pub fn ordered_pairs(&self, alpha: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.pairs[alpha].iter().flat_map(|&(b, g)| {
            let swapped = (b != g).then_some((g, b));
            std::iter::once((b, g)).chain(swapped)
        })
    }

    /// The monomial `alpha` with `i(alpha) = i(beta) + i(gamma)`.
    pub fn alpha_of(&self, beta: usize, gamma: usize) -> usize {
        self.alpha[beta * self.half.len() + gamma]
    }

    /// Coefficients of `(x^(r))^T W x^(r)` for a symmetric `W` given entrywise.
    pub fn gram_coefficients(&self, w: impl Fn(usize, usize) -> f64) -> Vec<f64> {
        self.pairs
            .iter()
            .map(|ps| {
                ps.iter()
                    .map(|&(b, g)| if b == g { w(b, b) } else { 2.0 * w(b, g) })
                    .sum()
            })
            .collect()
    }
}
