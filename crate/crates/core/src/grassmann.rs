//! Finite complex Grassmann algebras with two or four generators.
//!
//! Elements are stored densely: one complex coefficient per subset of
//! generators, the subset encoded as a bitmask. Monomials are kept in
//! increasing generator order, so every sign comes from counting the
//! transpositions needed to sort a product back into that order.
//!
//! The four-generator algebra orders its generators θ⁺ < θ⁻ < η¹ < η²; the
//! two-generator algebra has only η¹ < η².

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::worldsheet::{ConformalFactor, Measure, TorusGrid};

pub const MAX_GENERATORS: usize = 4;
const MAX_MONOMIALS: usize = 1 << MAX_GENERATORS;

/// Generator indices of the four-generator (superspace) algebra.
pub mod super_gens {
    pub const THETA_PLUS: usize = 0;
    pub const THETA_MINUS: usize = 1;
    pub const ETA1: usize = 2;
    pub const ETA2: usize = 3;
}

/// Generator indices of the two-generator (flesh) algebra.
pub mod flesh_gens {
    pub const ETA1: usize = 0;
    pub const ETA2: usize = 1;
}

/// Bitmask of a generator subset.
pub fn mask_of(gens: &[usize]) -> usize {
    gens.iter().fold(0, |m, &g| m | (1 << g))
}

fn gens_of(mask: usize) -> Vec<usize> {
    (0..MAX_GENERATORS).filter(|g| mask & (1 << g) != 0).collect()
}

/// Sign of `η^a · η^b` relative to the sorted monomial `η^{a ∪ b}`.
/// Caller guarantees `a & b == 0`.
fn product_sign(a: usize, b: usize) -> f64 {
    let mut swaps = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        // generators of `a` sitting above j must hop over it
        swaps += (a >> (j + 1)).count_ones();
        rest &= rest - 1;
    }
    if swaps.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
    Mixed,
}

#[derive(Clone, Copy, PartialEq)]
pub struct GrassmannElement {
    n_gens: u8,
    coeffs: [Complex64; MAX_MONOMIALS],
}

impl GrassmannElement {
    fn check_gens(n_gens: usize) {
        assert!(
            n_gens == 2 || n_gens == 4,
            "grassmann algebras with {n_gens} generators are not supported"
        );
    }

    pub fn zero(n_gens: usize) -> Self {
        Self::check_gens(n_gens);
        Self {
            n_gens: n_gens as u8,
            coeffs: [Complex64::new(0.0, 0.0); MAX_MONOMIALS],
        }
    }

    pub fn scalar(n_gens: usize, c: impl Into<Complex64>) -> Self {
        let mut e = Self::zero(n_gens);
        e.coeffs[0] = c.into();
        e
    }

    pub fn one(n_gens: usize) -> Self {
        Self::scalar(n_gens, 1.0)
    }

    pub fn generator(n_gens: usize, k: usize) -> Self {
        Self::monomial(n_gens, 1 << k, 1.0)
    }

    pub fn monomial(n_gens: usize, mask: usize, c: impl Into<Complex64>) -> Self {
        let mut e = Self::zero(n_gens);
        assert!(mask < (1 << n_gens), "monomial {mask:#b} outside algebra");
        e.coeffs[mask] = c.into();
        e
    }

    pub fn n_gens(&self) -> usize {
        self.n_gens as usize
    }

    fn n_monomials(&self) -> usize {
        1 << self.n_gens
    }

    /// Coefficient of the monomial `mask`; `extract(0)` is the body.
    pub fn extract(&self, mask: usize) -> Complex64 {
        if mask >= self.n_monomials() {
            return Complex64::new(0.0, 0.0);
        }
        self.coeffs[mask]
    }

    pub fn body(&self) -> Complex64 {
        self.coeffs[0]
    }

    pub fn set(&mut self, mask: usize, c: Complex64) {
        assert!(mask < self.n_monomials(), "monomial {mask:#b} outside algebra");
        self.coeffs[mask] = c;
    }

    pub fn add_to(&mut self, mask: usize, c: Complex64) {
        assert!(mask < self.n_monomials(), "monomial {mask:#b} outside algebra");
        self.coeffs[mask] += c;
    }

    /// Nonzero monomials as (mask, coefficient), in mask order.
    pub fn terms(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.coeffs[..self.n_monomials()]
            .iter()
            .enumerate()
            .filter(|(_, c)| c.re != 0.0 || c.im != 0.0)
            .map(|(m, c)| (m, *c))
    }

    pub fn parity(&self) -> Parity {
        let mut even = false;
        let mut odd = false;
        for (m, _) in self.terms() {
            if m.count_ones() % 2 == 0 {
                even = true;
            } else {
                odd = true;
            }
        }
        match (even, odd) {
            (_, false) => Parity::Even,
            (false, true) => Parity::Odd,
            (true, true) => Parity::Mixed,
        }
    }

    pub fn try_mul(&self, rhs: &Self) -> Result<Self> {
        if self.n_gens != rhs.n_gens {
            return Err(Error::GrassmannDomain(format!(
                "cannot multiply elements over {} and {} generators",
                self.n_gens, rhs.n_gens
            )));
        }
        let n = self.n_monomials();
        let mut out = Self::zero(self.n_gens());
        for a in 0..n {
            let ca = self.coeffs[a];
            if ca.re == 0.0 && ca.im == 0.0 {
                continue;
            }
            for b in 0..n {
                if a & b != 0 {
                    continue;
                }
                let cb = rhs.coeffs[b];
                if cb.re == 0.0 && cb.im == 0.0 {
                    continue;
                }
                out.coeffs[a | b] += ca * cb * product_sign(a, b);
            }
        }
        Ok(out)
    }

    /// Left derivative with respect to generator `k`.
    pub fn left_derivative(&self, k: usize) -> Self {
        assert!(k < self.n_gens(), "generator {k} outside algebra");
        let mut out = Self::zero(self.n_gens());
        let bit = 1 << k;
        for (m, c) in self.terms() {
            if m & bit == 0 {
                continue;
            }
            let below = (m & (bit - 1)).count_ones();
            let sign = if below.is_multiple_of(2) { 1.0 } else { -1.0 };
            out.coeffs[m & !bit] += c * sign;
        }
        out
    }

    pub fn scale(&self, c: impl Into<Complex64>) -> Self {
        let c = c.into();
        let mut out = *self;
        for x in out.coeffs.iter_mut() {
            *x *= c;
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs[..self.n_monomials()]
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max)
    }

    /// Element-wise distance, max-norm over coefficients.
    pub fn distance(&self, other: &Self) -> f64 {
        (*self - *other).max_abs()
    }

    /// Reinterpret an element of the two-generator algebra (η¹, η²) inside the
    /// four-generator algebra, where η¹, η² are generators 2 and 3.
    pub fn embed_flesh(&self) -> Self {
        assert_eq!(self.n_gens, 2, "embed_flesh expects a two-generator element");
        let mut out = Self::zero(4);
        for (m, c) in self.terms() {
            out.coeffs[m << 2] = c;
        }
        out
    }

    /// Inverse of [`embed_flesh`](Self::embed_flesh): keep only monomials free of θ±.
    pub fn restrict_flesh(&self) -> Self {
        assert_eq!(self.n_gens, 4, "restrict_flesh expects a four-generator element");
        let mut out = Self::zero(2);
        for m in 0..4usize {
            out.coeffs[m] = self.coeffs[m << 2];
        }
        out
    }
}

impl fmt::Debug for GrassmannElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (m, c) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.6e}{:+.6e}i)", c.re, c.im)?;
            for g in gens_of(m) {
                write!(f, "·e{g}")?;
            }
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

impl Add for GrassmannElement {
    type Output = Self;
    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for GrassmannElement {
    fn add_assign(&mut self, rhs: Self) {
        assert_eq!(self.n_gens, rhs.n_gens, "generator count mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *a += *b;
        }
    }
}

impl Sub for GrassmannElement {
    type Output = Self;
    fn sub(mut self, rhs: Self) -> Self {
        self -= rhs;
        self
    }
}

impl SubAssign for GrassmannElement {
    fn sub_assign(&mut self, rhs: Self) {
        assert_eq!(self.n_gens, rhs.n_gens, "generator count mismatch");
        for (a, b) in self.coeffs.iter_mut().zip(rhs.coeffs.iter()) {
            *a -= *b;
        }
    }
}

impl Neg for GrassmannElement {
    type Output = Self;
    fn neg(self) -> Self {
        self.scale(-1.0)
    }
}

impl Mul for GrassmannElement {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        self.try_mul(&rhs).expect("grassmann product")
    }
}

impl Mul<Complex64> for GrassmannElement {
    type Output = Self;
    fn mul(self, rhs: Complex64) -> Self {
        self.scale(rhs)
    }
}

impl Mul<f64> for GrassmannElement {
    type Output = Self;
    fn mul(self, rhs: f64) -> Self {
        self.scale(rhs)
    }
}

/// Product `η^I · c` for a Grassmann element and a scalar, written in the
/// other order for readability at call sites.
impl Mul<GrassmannElement> for Complex64 {
    type Output = GrassmannElement;
    fn mul(self, rhs: GrassmannElement) -> GrassmannElement {
        rhs.scale(self)
    }
}

#[derive(Serialize, Deserialize)]
struct MonomialRepr {
    gens: Vec<usize>,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct ElementRepr {
    generators: usize,
    monomials: Vec<MonomialRepr>,
}

impl Serialize for GrassmannElement {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let repr = ElementRepr {
            generators: self.n_gens(),
            monomials: self
                .terms()
                .map(|(m, c)| MonomialRepr {
                    gens: gens_of(m),
                    re: c.re,
                    im: c.im,
                })
                .collect(),
        };
        repr.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for GrassmannElement {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let repr = ElementRepr::deserialize(deserializer)?;
        if repr.generators != 2 && repr.generators != 4 {
            return Err(D::Error::custom("generators must be 2 or 4"));
        }
        let mut out = GrassmannElement::zero(repr.generators);
        for m in repr.monomials {
            if m.gens.windows(2).any(|w| w[0] >= w[1]) {
                return Err(D::Error::custom("monomial generators must be strictly increasing"));
            }
            if m.gens.iter().any(|&g| g >= repr.generators) {
                return Err(D::Error::custom("generator index out of range"));
            }
            out.coeffs[mask_of(&m.gens)] += Complex64::new(m.re, m.im);
        }
        Ok(out)
    }
}

/// A V-valued Grassmann element, stored component-wise: `x = Σ_i x^i e_i`
/// with each `x^i` a Grassmann element.
pub type GrassmannVector = Vec<GrassmannElement>;

/// Extends a complex bilinear form on V to V ⊗ ΛC^N by
/// `B(η^I v, η^J w) = η^I η^J B(v, w)`.
pub fn bilinear_extend<B>(form: B, x: &[GrassmannElement], y: &[GrassmannElement]) -> Result<GrassmannElement>
where
    B: Fn(&[Complex64], &[Complex64]) -> Complex64,
{
    let n_gens = match (x.first(), y.first()) {
        (Some(a), Some(b)) if a.n_gens == b.n_gens => a.n_gens(),
        (Some(_), Some(_)) => {
            return Err(Error::GrassmannDomain(
                "bilinear_extend: generator count mismatch".into(),
            ))
        }
        _ => return Err(Error::Shape("bilinear_extend: empty vector".into())),
    };
    if x.iter().chain(y.iter()).any(|e| e.n_gens() != n_gens) {
        return Err(Error::GrassmannDomain(
            "bilinear_extend: generator count mismatch".into(),
        ));
    }
    let n_mono = 1 << n_gens;
    let slice = |v: &[GrassmannElement], m: usize| -> Vec<Complex64> { v.iter().map(|e| e.coeffs[m]).collect() };
    let mut out = GrassmannElement::zero(n_gens);
    for a in 0..n_mono {
        let va = slice(x, a);
        if va.iter().all(|c| c.norm() == 0.0) {
            continue;
        }
        for b in 0..n_mono {
            if a & b != 0 {
                continue;
            }
            let wb = slice(y, b);
            if wb.iter().all(|c| c.norm() == 0.0) {
                continue;
            }
            out.coeffs[a | b] += form(&va, &wb) * product_sign(a, b);
        }
    }
    Ok(out)
}

/// `Σ_ij m[i][j] x^i y^j`: the extension of a bilinear form given by its
/// matrix, evaluated by Grassmann products.
pub fn bilinear_matrix(m: &[Vec<Complex64>], x: &[GrassmannElement], y: &[GrassmannElement]) -> GrassmannElement {
    let n_gens = x[0].n_gens();
    let mut out = GrassmannElement::zero(n_gens);
    for (i, xi) in x.iter().enumerate() {
        for (j, yj) in y.iter().enumerate() {
            let c = m[i][j];
            if c.norm() == 0.0 {
                continue;
            }
            out += (*xi * *yj).scale(c);
        }
    }
    out
}

/// Coefficient-wise integral of a Grassmann-valued grid function.
pub fn integrate(
    grid: &TorusGrid,
    values: &[GrassmannElement],
    measure: Measure,
    lambda: &ConformalFactor,
) -> Result<GrassmannElement> {
    let first = values
        .first()
        .ok_or_else(|| Error::Shape("integrate: empty field".into()))?;
    let n_gens = first.n_gens();
    if values.iter().any(|v| v.n_gens() != n_gens) {
        return Err(Error::GrassmannDomain("integrate: mixed generator counts".into()));
    }
    if values.len() != grid.len() {
        return Err(Error::Shape(format!(
            "integrate: {} values on a grid of {} points",
            values.len(),
            grid.len()
        )));
    }
    let mut out = GrassmannElement::zero(n_gens);
    for m in 0..(1usize << n_gens) {
        let column: Vec<Complex64> = values.iter().map(|v| v.coeffs[m]).collect();
        if column.iter().all(|c| c.norm() == 0.0) {
            continue;
        }
        out.coeffs[m] = grid.integrate_complex(&column, measure, lambda);
    }
    Ok(out)
}
