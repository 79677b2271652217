//! The discretized worldsheet: a flat torus `C / (Z P_s + i Z P_t)` sampled on
//! a uniform grid, with periodic derivatives, quadrature, the conformal factor
//! and the trivialized spinor frames.
//!
//! Grid functions are flat slices in s-major order: `idx = i_s * n_t + i_t`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

type C64 = Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Spectral,
    Central2,
    Central4,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Spectral, Scheme::Central2, Scheme::Central4];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Spectral => "spectral",
            Scheme::Central2 => "central2",
            Scheme::Central4 => "central4",
        }
    }

    /// Formal order of accuracy, `None` for spectral.
    pub fn order(self) -> Option<u32> {
        match self {
            Scheme::Spectral => None,
            Scheme::Central2 => Some(2),
            Scheme::Central4 => Some(4),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spectral" => Ok(Scheme::Spectral),
            "central2" => Ok(Scheme::Central2),
            "central4" => Ok(Scheme::Central4),
            other => Err(Error::Config(format!("unknown scheme `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    S,
    T,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    S,
    T,
    Z,
    Zbar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Measure {
    /// `λ ds dt`
    Dvol,
    DsDt,
}

/// Serializable grid description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_s: usize,
    pub n_t: usize,
    #[serde(rename = "P_s")]
    pub p_s: f64,
    #[serde(rename = "P_t")]
    pub p_t: f64,
    #[serde(default)]
    pub scheme: Scheme,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_s: 64,
            n_t: 64,
            p_s: 1.0,
            p_t: 1.0,
            scheme: Scheme::Spectral,
        }
    }
}

struct Plans {
    fwd_s: Arc<dyn Fft<f64>>,
    inv_s: Arc<dyn Fft<f64>>,
    fwd_t: Arc<dyn Fft<f64>>,
    inv_t: Arc<dyn Fft<f64>>,
}

#[derive(Clone)]
pub struct TorusGrid {
    spec: GridSpec,
    plans: Option<Arc<Plans>>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid").field("spec", &self.spec).finish()
    }
}

impl PartialEq for TorusGrid {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec
    }
}

impl TorusGrid {
    pub fn new(n_s: usize, n_t: usize, p_s: f64, p_t: f64, scheme: Scheme) -> Result<Self> {
        Self::from_spec(GridSpec {
            n_s,
            n_t,
            p_s,
            p_t,
            scheme,
        })
    }

    /// Unit square with `n × n` points.
    pub fn square(n: usize, scheme: Scheme) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0, scheme)
    }

    pub fn from_spec(spec: GridSpec) -> Result<Self> {
        if spec.n_s < 8 || spec.n_t < 8 {
            return Err(Error::InvalidGrid(format!(
                "grid {}x{} is smaller than 8x8",
                spec.n_s, spec.n_t
            )));
        }
        if spec.scheme == Scheme::Spectral && (!spec.n_s.is_multiple_of(2) || !spec.n_t.is_multiple_of(2)) {
            return Err(Error::InvalidGrid(format!(
                "spectral scheme needs even grid sizes, got {}x{}",
                spec.n_s, spec.n_t
            )));
        }
        if !(spec.p_s > 0.0 && spec.p_t > 0.0 && spec.p_s.is_finite() && spec.p_t.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "periods must be positive, got P_s={} P_t={}",
                spec.p_s, spec.p_t
            )));
        }
        let plans = if spec.scheme == Scheme::Spectral {
            let mut planner = FftPlanner::new();
            Some(Arc::new(Plans {
                fwd_s: planner.plan_fft_forward(spec.n_s),
                inv_s: planner.plan_fft_inverse(spec.n_s),
                fwd_t: planner.plan_fft_forward(spec.n_t),
                inv_t: planner.plan_fft_inverse(spec.n_t),
            }))
        } else {
            None
        };
        Ok(Self { spec, plans })
    }

    /// Same torus and resolution, different derivative scheme.
    pub fn with_scheme(&self, scheme: Scheme) -> Result<Self> {
        Self::from_spec(GridSpec { scheme, ..self.spec })
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }
    pub fn n_s(&self) -> usize {
        self.spec.n_s
    }
    pub fn n_t(&self) -> usize {
        self.spec.n_t
    }
    pub fn p_s(&self) -> f64 {
        self.spec.p_s
    }
    pub fn p_t(&self) -> f64 {
        self.spec.p_t
    }
    pub fn scheme(&self) -> Scheme {
        self.spec.scheme
    }
    pub fn h_s(&self) -> f64 {
        self.spec.p_s / self.spec.n_s as f64
    }
    pub fn h_t(&self) -> f64 {
        self.spec.p_t / self.spec.n_t as f64
    }
    pub fn area(&self) -> f64 {
        self.spec.p_s * self.spec.p_t
    }
    pub fn len(&self) -> usize {
        self.spec.n_s * self.spec.n_t
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index with periodic wrap-around.
    pub fn index(&self, i_s: isize, i_t: isize) -> usize {
        let is = i_s.rem_euclid(self.spec.n_s as isize) as usize;
        let it = i_t.rem_euclid(self.spec.n_t as isize) as usize;
        is * self.spec.n_t + it
    }

    /// `(s, t)` coordinates of a flat index.
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let is = idx / self.spec.n_t;
        let it = idx % self.spec.n_t;
        (is as f64 * self.h_s(), it as f64 * self.h_t())
    }

    pub fn sample<F: Fn(f64, f64) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.len())
            .map(|i| {
                let (s, t) = self.coords(i);
                f(s, t)
            })
            .collect()
    }

    pub fn sample_complex<F: Fn(f64, f64) -> C64>(&self, f: F) -> Vec<C64> {
        (0..self.len())
            .map(|i| {
                let (s, t) = self.coords(i);
                f(s, t)
            })
            .collect()
    }

    fn check_len(&self, n: usize) {
        assert_eq!(n, self.len(), "grid field has {n} samples, grid has {}", self.len());
    }

    fn axis_layout(&self, axis: Axis) -> (usize, usize, usize, f64) {
        // (line length, number of lines, stride inside a line, period)
        match axis {
            Axis::S => (self.spec.n_s, self.spec.n_t, self.spec.n_t, self.spec.p_s),
            Axis::T => (self.spec.n_t, self.spec.n_s, 1, self.spec.p_t),
        }
    }

    fn line_start(&self, axis: Axis, line: usize) -> usize {
        match axis {
            Axis::S => line,
            Axis::T => line * self.spec.n_t,
        }
    }

    /// Partial derivative along one grid axis of a complex field.
    pub fn d_axis(&self, f: &[C64], axis: Axis) -> Vec<C64> {
        self.check_len(f.len());
        let (n, lines, stride, period) = self.axis_layout(axis);
        let h = period / n as f64;
        let mut out = vec![C64::new(0.0, 0.0); f.len()];
        match self.spec.scheme {
            Scheme::Spectral => {
                let plans = self.plans.as_ref().expect("spectral grid has plans");
                let (fwd, inv) = match axis {
                    Axis::S => (&plans.fwd_s, &plans.inv_s),
                    Axis::T => (&plans.fwd_t, &plans.inv_t),
                };
                let mult: Vec<C64> = (0..n)
                    .map(|m| {
                        let k = if m < n / 2 {
                            m as f64
                        } else if m == n / 2 {
                            0.0
                        } else {
                            m as f64 - n as f64
                        };
                        C64::new(0.0, 2.0 * PI * k / period / n as f64)
                    })
                    .collect();
                let mut buf = vec![C64::new(0.0, 0.0); n];
                let mut scratch = vec![C64::new(0.0, 0.0); fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len())];
                for line in 0..lines {
                    let start = self.line_start(axis, line);
                    for (j, b) in buf.iter_mut().enumerate() {
                        *b = f[start + j * stride];
                    }
                    fwd.process_with_scratch(&mut buf, &mut scratch);
                    for (b, m) in buf.iter_mut().zip(mult.iter()) {
                        *b *= m;
                    }
                    inv.process_with_scratch(&mut buf, &mut scratch);
                    for (j, b) in buf.iter().enumerate() {
                        out[start + j * stride] = *b;
                    }
                }
            }
            Scheme::Central2 | Scheme::Central4 => {
                let wide = self.spec.scheme == Scheme::Central4;
                for line in 0..lines {
                    let start = self.line_start(axis, line);
                    let at = |j: isize| f[start + (j.rem_euclid(n as isize) as usize) * stride];
                    for j in 0..n as isize {
                        let d = if wide {
                            (-at(j + 2) + at(j + 1) * 8.0 - at(j - 1) * 8.0 + at(j - 2)) / (12.0 * h)
                        } else {
                            (at(j + 1) - at(j - 1)) / (2.0 * h)
                        };
                        out[start + j as usize * stride] = d;
                    }
                }
            }
        }
        out
    }

    pub fn d_axis_real(&self, f: &[f64], axis: Axis) -> Vec<f64> {
        let c: Vec<C64> = f.iter().map(|&x| C64::new(x, 0.0)).collect();
        self.d_axis(&c, axis).into_iter().map(|z| z.re).collect()
    }

    /// `∂_s`, `∂_t`, `∂_z = ½(∂_s − i∂_t)` or `∂_z̄ = ½(∂_s + i∂_t)`.
    pub fn deriv(&self, f: &[C64], dir: Direction) -> Vec<C64> {
        match dir {
            Direction::S => self.d_axis(f, Axis::S),
            Direction::T => self.d_axis(f, Axis::T),
            Direction::Z | Direction::Zbar => {
                let ds = self.d_axis(f, Axis::S);
                let dt = self.d_axis(f, Axis::T);
                let sign = if dir == Direction::Z { -0.5 } else { 0.5 };
                ds.iter()
                    .zip(dt.iter())
                    .map(|(a, b)| a * 0.5 + C64::new(0.0, sign) * b)
                    .collect()
            }
        }
    }

    pub fn integrate(&self, density: &[f64], measure: Measure, lambda: &ConformalFactor) -> f64 {
        self.check_len(density.len());
        let w = self.h_s() * self.h_t();
        let sum: f64 = match measure {
            Measure::DsDt => density.iter().sum(),
            Measure::Dvol => density.iter().zip(lambda.values()).map(|(d, l)| d * l).sum(),
        };
        sum * w
    }

    pub fn integrate_complex(&self, density: &[C64], measure: Measure, lambda: &ConformalFactor) -> C64 {
        self.check_len(density.len());
        let w = self.h_s() * self.h_t();
        let sum: C64 = match measure {
            Measure::DsDt => density.iter().sum(),
            Measure::Dvol => density.iter().zip(lambda.values()).map(|(d, l)| d * l).sum(),
        };
        sum * w
    }
}

/// How to build `λ`; part of run configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LambdaSpec {
    Constant { value: f64 },
    /// `λ = 1 + amplitude · sin(2π frequency s / P_s)`
    Sinusoidal { amplitude: f64, frequency: u32 },
}

impl Default for LambdaSpec {
    fn default() -> Self {
        LambdaSpec::Constant { value: 1.0 }
    }
}

impl LambdaSpec {
    pub fn build(&self, grid: &TorusGrid) -> Result<ConformalFactor> {
        match *self {
            LambdaSpec::Constant { value } => ConformalFactor::constant(grid, value),
            LambdaSpec::Sinusoidal { amplitude, frequency } => {
                ConformalFactor::sinusoidal(grid, amplitude, frequency)
            }
        }
    }
}

/// Conformal factor `λ` of the worldsheet metric `λ(ds² + dt²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConformalFactor {
    values: Vec<f64>,
    constant: bool,
}

impl ConformalFactor {
    pub fn constant(grid: &TorusGrid, value: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::Config(format!("conformal factor must be positive, got {value}")));
        }
        Ok(Self {
            values: vec![value; grid.len()],
            constant: true,
        })
    }

    pub fn unit(grid: &TorusGrid) -> Self {
        Self::constant(grid, 1.0).expect("1 is positive")
    }

    pub fn sinusoidal(grid: &TorusGrid, amplitude: f64, frequency: u32) -> Result<Self> {
        if amplitude.abs() >= 1.0 {
            return Err(Error::Config(format!(
                "sinusoidal conformal factor needs |amplitude| < 1, got {amplitude}"
            )));
        }
        let p_s = grid.p_s();
        let values = grid.sample(|s, _| 1.0 + amplitude * (2.0 * PI * frequency as f64 * s / p_s).sin());
        Ok(Self {
            values,
            constant: amplitude == 0.0 || frequency == 0,
        })
    }

    pub fn from_values(grid: &TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Shape(format!(
                "conformal factor has {} samples, grid has {}",
                values.len(),
                grid.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("conformal factor must be positive, found {bad}")));
        }
        let constant = values.iter().all(|v| *v == values[0]);
        Ok(Self { values, constant })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    pub fn is_constant(&self) -> bool {
        self.constant
    }

    pub fn powf(&self, p: f64) -> Vec<f64> {
        self.values.iter().map(|l| l.powf(p)).collect()
    }

    /// `c λ`
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|l| l * c).collect(),
            constant: self.constant,
        }
    }
}

/// Conversions between the constant frames `θ±` of the trivialized spinor
/// bundles and the square-root frames `e⁺ = λ^{1/4}θ⁺`, `e⁻ = λ^{-1/4}θ⁻`.
///
/// A spinor `ψ = ψ₊θ⁺ + ψ₋θ⁻ = ψ_{e⁺}e⁺ + ψ_{e⁻}e⁻` therefore has
/// `ψ_{e⁺} = λ^{-1/4}ψ₊` and `ψ_{e⁻} = λ^{1/4}ψ₋`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SpinFrame;

impl SpinFrame {
    pub fn e_plus_from_theta(lambda: f64, psi_plus: C64) -> C64 {
        psi_plus * lambda.powf(-0.25)
    }
    pub fn theta_from_e_plus(lambda: f64, psi_e_plus: C64) -> C64 {
        psi_e_plus * lambda.powf(0.25)
    }
    pub fn e_minus_from_theta(lambda: f64, psi_minus: C64) -> C64 {
        psi_minus * lambda.powf(0.25)
    }
    pub fn theta_from_e_minus(lambda: f64, psi_e_minus: C64) -> C64 {
        psi_e_minus * lambda.powf(-0.25)
    }
}

pub type Mat2 = [[C64; 2]; 2];

fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut out = [[C64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    out
}

fn mat2_dist(a: &Mat2, b: &Mat2) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            d = d.max((a[i][j] - b[i][j]).norm());
        }
    }
    d
}

/// Gamma matrices of the worldsheet Clifford module in the `(e⁺, e⁻)` basis.
#[derive(Debug, Clone, Copy, Default)]
pub struct GammaConvention;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CliffordReport {
    pub e1_squared_defect: f64,
    pub e2_squared_defect: f64,
    pub anticommutator_defect: f64,
    pub product_defect: f64,
    pub pass: bool,
}

impl GammaConvention {
    pub const E1: Mat2 = [
        [C64::new(0.0, 0.0), C64::new(-1.0, 0.0)],
        [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
    ];
    pub const E2: Mat2 = [
        [C64::new(0.0, 0.0), C64::new(0.0, 1.0)],
        [C64::new(0.0, 1.0), C64::new(0.0, 0.0)],
    ];

    pub fn clifford_check() -> CliffordReport {
        let minus_id = [
            [C64::new(-1.0, 0.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(-1.0, 0.0)],
        ];
        let zero = [[C64::new(0.0, 0.0); 2]; 2];
        let expected_product = [
            [C64::new(0.0, -1.0), C64::new(0.0, 0.0)],
            [C64::new(0.0, 0.0), C64::new(0.0, 1.0)],
        ];
        let e12 = mat2_mul(&Self::E1, &Self::E2);
        let e21 = mat2_mul(&Self::E2, &Self::E1);
        let mut anti = zero;
        for i in 0..2 {
            for j in 0..2 {
                anti[i][j] = e12[i][j] + e21[i][j];
            }
        }
        let e1_squared_defect = mat2_dist(&mat2_mul(&Self::E1, &Self::E1), &minus_id);
        let e2_squared_defect = mat2_dist(&mat2_mul(&Self::E2, &Self::E2), &minus_id);
        let anticommutator_defect = mat2_dist(&anti, &zero);
        let product_defect = mat2_dist(&e12, &expected_product);
        let pass = [e1_squared_defect, e2_squared_defect, anticommutator_defect, product_defect]
            .iter()
            .all(|d| *d == 0.0);
        CliffordReport {
            e1_squared_defect,
            e2_squared_defect,
            anticommutator_defect,
            product_defect,
            pass,
        }
    }
}
