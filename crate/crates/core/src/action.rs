//! Action functionals, the superfield Lagrangian and the identities tying
//! them together.
//!
//! Grassmann-valued functionals carry two numbers: the body and the
//! coefficient of `η¹η²`. Every identity is reported as separately computed
//! quantities; nothing here rearranges one computation into a defect.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conventions::{lagrangian_prefactor, DIRAC_MEASURE_PHASE};
use crate::error::{Error, Result};
use crate::fields::{cadd, cscale, csub, cvec, CVec, MapField, Pullback, SuperField, VectorField};
use crate::grassmann::{bilinear_extend, flesh_gens, mask_of, super_gens, GrassmannElement};
use crate::target::{LocalGeometry, Mat, Target, MAX_DIM};
use crate::worldsheet::{Axis, ConformalFactor, Direction, Measure, TorusGrid};

type C64 = Complex64;
type GE = GrassmannElement;

const ZERO: C64 = C64::new(0.0, 0.0);

/// Value of a functional in the even part of the two-generator algebra.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrassmannAction {
    pub body: f64,
    pub soul: C64,
}

impl GrassmannAction {
    pub const ZERO: Self = Self { body: 0.0, soul: ZERO };

    pub fn new(body: f64, soul: C64) -> Self {
        Self { body, soul }
    }

    /// Read off body and `η¹η²` from an element of either algebra, dropping
    /// the (roundoff-level) imaginary part of the body.
    fn from_element(e: &GE) -> Self {
        let top = match e.n_gens() {
            2 => mask_of(&[flesh_gens::ETA1, flesh_gens::ETA2]),
            _ => mask_of(&[super_gens::ETA1, super_gens::ETA2]),
        };
        Self {
            body: e.extract(0).re,
            soul: e.extract(top),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::new(self.body - other.body, self.soul - other.soul)
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::new(self.body + other.body, self.soul + other.soul)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(self.body * c, self.soul * c)
    }

    pub fn max_abs(&self) -> f64 {
        self.body.abs().max(self.soul.norm())
    }
}

/// The pairings on spinor-valued vectors, given by their `e±` components.
pub struct PairingForms;

impl PairingForms {
    /// `B(ψ, ψ′) = g(ψ_{e⁺}, ψ′_{e⁻}) + g(ψ_{e⁻}, ψ′_{e⁺})`, complex bilinear.
    pub fn b(geo: &LocalGeometry, psi: (&CVec, &CVec), other: (&CVec, &CVec)) -> C64 {
        geo.metric(psi.0, other.1) + geo.metric(psi.1, other.0)
    }

    /// Hermitian pairing with `e⁺`, `e⁻` orthonormal.
    pub fn h(geo: &LocalGeometry, psi: (&CVec, &CVec), other: (&CVec, &CVec)) -> C64 {
        let conj = |v: &CVec| v.map(|c| c.conj());
        geo.metric(&conj(psi.0), other.0) + geo.metric(&conj(psi.1), other.1)
    }
}

fn check_phi(pb: &Pullback, sf: &SuperField) -> Result<()> {
    if sf.phi != *pb.phi() {
        return Err(Error::Shape("super field map differs from the pullback's map".into()));
    }
    sf.check(pb.grid())
}

/// `½∫(|φ_s|² + |φ_t|²) ds dt`
pub fn harmonic_action(pb: &Pullback) -> f64 {
    let dens: Vec<f64> = (0..pb.grid().len())
        .map(|i| {
            let g = pb.geometry(i);
            0.5 * (g.metric(&pb.phi_s()[i], &pb.phi_s()[i]) + g.metric(&pb.phi_t()[i], &pb.phi_t()[i]))
        })
        .collect();
    pb.grid().integrate(&dens, Measure::DsDt, pb.lambda())
}

/// `∫ ω(φ_s, φ_t) ds dt` on the grid.
pub fn pullback_omega_integral(pb: &Pullback) -> f64 {
    let dens: Vec<f64> = (0..pb.grid().len())
        .map(|i| pb.geometry(i).omega_form(&pb.phi_s()[i], &pb.phi_t()[i]))
        .collect();
    pb.grid().integrate(&dens, Measure::DsDt, pb.lambda())
}

/// `∫ |∂̄_J φ|² dvol = ∫ (|∂̄(∂_s)|² + |∂̄(∂_t)|²) ds dt`
pub fn dbar_energy(pb: &Pullback) -> f64 {
    let db = pb.dbar();
    let dens: Vec<f64> = (0..pb.grid().len())
        .map(|i| {
            let g = pb.geometry(i);
            g.metric(&db.s[i], &db.s[i]) + g.metric(&db.t[i], &db.t[i])
        })
        .collect();
    pb.grid().integrate(&dens, Measure::DsDt, pb.lambda())
}

/// The literal Dirac term `½∫dvol (−2i) B(ψ, D̸ψ)` (its `η¹η²` coefficient),
/// before the measure phase is applied. `ψ = η¹ψ₁ + η²ψ₂` lies in `S⁺`.
pub fn dirac_term_literal(pb: &Pullback, sf: &SuperField) -> Result<C64> {
    check_phi(pb, sf)?;
    let grid = pb.grid();
    let d = pb.dim();
    let zero = VectorField::zeros(grid, d);
    let e1 = pb.e_plus(&sf.psi1.theta);
    let e2 = pb.e_plus(&sf.psi2.theta);
    // S⁺ input: only the e⁻ slot of D̸ψ is populated
    let (_, d1) = pb.dirac(&e1, &zero);
    let (_, d2) = pb.dirac(&e2, &zero);
    let eta = |k| GE::generator(2, k);
    let top = mask_of(&[flesh_gens::ETA1, flesh_gens::ETA2]);
    let dens = (0..grid.len())
        .map(|i| {
            let geo = pb.geometry(i);
            let grass = |a: &CVec, b: &CVec| -> Vec<GE> {
                (0..d)
                    .map(|k| eta(flesh_gens::ETA1).scale(a[k]) + eta(flesh_gens::ETA2).scale(b[k]))
                    .collect()
            };
            let psi_plus = grass(&e1.at(i), &e2.at(i));
            let dpsi_minus = grass(&d1.at(i), &d2.at(i));
            let form = |u: &[C64], v: &[C64]| {
                let mut a = [ZERO; MAX_DIM];
                let mut b = [ZERO; MAX_DIM];
                a[..d].copy_from_slice(u);
                b[..d].copy_from_slice(v);
                // B pairs the e⁺ part of ψ with the e⁻ part of D̸ψ
                PairingForms::b(geo, (&a, &[ZERO; MAX_DIM]), (&[ZERO; MAX_DIM], &b))
            };
            Ok(bilinear_extend(form, &psi_plus, &dpsi_minus)?.extract(top))
        })
        .collect::<Result<Vec<C64>>>()?;
    let integral = grid.integrate_complex(&dens, Measure::Dvol, pb.lambda());
    Ok(0.5 * C64::new(0.0, -2.0) * integral)
}

/// `𝒜₁ = ½∫dvol(|dφ|² − 2η¹η²⟨ξ, τ⟩ − 2i B(ψ, D̸ψ))`, Dirac term scaled by
/// the measure phase.
pub fn action_a1(pb: &Pullback, sf: &SuperField) -> Result<GrassmannAction> {
    check_phi(pb, sf)?;
    let tau = pb.tension();
    let dens: Vec<C64> = (0..pb.grid().len())
        .map(|i| pb.geometry(i).metric(&sf.xi.at(i), &cvec(&tau[i])))
        .collect();
    let xi_term = -pb.grid().integrate_complex(&dens, Measure::Dvol, pb.lambda());
    let dirac = DIRAC_MEASURE_PHASE * dirac_term_literal(pb, sf)?;
    Ok(GrassmannAction::new(harmonic_action(pb), xi_term + dirac))
}

/// `𝒜₂ = ∫dvol(|dφ|² + (ψ, D̸ψ))` for a full spinor given by its `e±`
/// components; the Dirac term is the real part of the Hermitian pairing.
pub fn action_a2(pb: &Pullback, psi_e_plus: &VectorField, psi_e_minus: &VectorField) -> Result<f64> {
    let d = pb.dim();
    for v in [psi_e_plus, psi_e_minus] {
        if v.dim() != d || v.len() != pb.grid().len() {
            return Err(Error::Shape("spinor field does not match the map".into()));
        }
    }
    let (dp, dm) = pb.dirac(psi_e_plus, psi_e_minus);
    let dens: Vec<f64> = (0..pb.grid().len())
        .map(|i| {
            PairingForms::h(
                pb.geometry(i),
                (&psi_e_plus.at(i), &psi_e_minus.at(i)),
                (&dp.at(i), &dm.at(i)),
            )
            .re
        })
        .collect();
    let dirac = pb.grid().integrate(&dens, Measure::Dvol, pb.lambda());
    Ok(2.0 * harmonic_action(pb) + dirac)
}

/// Derivatives of the flesh fields used by the superfield expansion.
struct FleshDerivs {
    xi: [VectorField; 2],
    psi1: [VectorField; 2],
    psi2: [VectorField; 2],
}

impl FleshDerivs {
    fn new(grid: &TorusGrid, sf: &SuperField) -> Self {
        let both = |v: &VectorField| [v.deriv(grid, Direction::Z), v.deriv(grid, Direction::Zbar)];
        Self {
            xi: both(&sf.xi),
            psi1: both(&sf.psi1.theta),
            psi2: both(&sf.psi2.theta),
        }
    }
}

/// `φ^♯ = φ + ν` at one point, with `ν = η¹η²ξ + θ⁺(η¹ψ₁ + η²ψ₂)`, and the
/// images `a = D₊φ^♯`, `b = D₋φ^♯`.
pub struct PointExpansion {
    pub dim: usize,
    pub nu: [GE; MAX_DIM],
    pub a: [GE; MAX_DIM],
    pub b: [GE; MAX_DIM],
}

fn flesh_element(xi: C64, p1: C64, p2: C64) -> GE {
    use super_gens::*;
    let mut e = GE::zero(4);
    e.set(mask_of(&[ETA1, ETA2]), xi);
    e.set(mask_of(&[THETA_PLUS, ETA1]), p1);
    e.set(mask_of(&[THETA_PLUS, ETA2]), p2);
    e
}

impl PointExpansion {
    fn build(pb: &Pullback, sf: &SuperField, fd: &FleshDerivs, idx: usize) -> Self {
        use super_gens::*;
        let d = pb.dim();
        let (xi, p1, p2) = (sf.xi.at(idx), sf.psi1.theta.at(idx), sf.psi2.theta.at(idx));
        let phi_z = pb.phi_z(idx);
        let phi_zb = pb.phi_zbar(idx);
        let theta_p = GE::generator(4, THETA_PLUS);
        let theta_m = GE::generator(4, THETA_MINUS);
        let mut nu = [GE::zero(4); MAX_DIM];
        let mut a = [GE::zero(4); MAX_DIM];
        let mut b = [GE::zero(4); MAX_DIM];
        for k in 0..d {
            nu[k] = flesh_element(xi[k], p1[k], p2[k]);
            let dz = GE::scalar(4, phi_z[k])
                + flesh_element(fd.xi[0].at(idx)[k], fd.psi1[0].at(idx)[k], fd.psi2[0].at(idx)[k]);
            let dzb = GE::scalar(4, phi_zb[k])
                + flesh_element(fd.xi[1].at(idx)[k], fd.psi1[1].at(idx)[k], fd.psi2[1].at(idx)[k]);
            // D₊ = ∂_{θ⁺} + θ⁺∂_z, D₋ = ∂_{θ⁻} + θ⁻∂_z̄; the body φ is θ-free
            a[k] = nu[k].left_derivative(THETA_PLUS) + theta_p * dz;
            b[k] = nu[k].left_derivative(THETA_MINUS) + theta_m * dzb;
        }
        Self { dim: d, nu, a, b }
    }

    /// `T(φ^♯)_ij = T_ij(φ) + ∂_k T_ij(φ) ν^k`, exact since `ν^k ν^l = 0`.
    fn compose(&self, t: &Mat, dt: &[Mat; MAX_DIM]) -> [[GE; MAX_DIM]; MAX_DIM] {
        let d = self.dim;
        let mut out = [[GE::zero(4); MAX_DIM]; MAX_DIM];
        for i in 0..d {
            for j in 0..d {
                let mut e = GE::scalar(4, t[i][j]);
                for k in 0..d {
                    if dt[k][i][j] != 0.0 {
                        e += self.nu[k].scale(dt[k][i][j]);
                    }
                }
                out[i][j] = e;
            }
        }
        out
    }
}

fn pair(m: &[[GE; MAX_DIM]; MAX_DIM], x: &[GE; MAX_DIM], y: &[GE; MAX_DIM], d: usize) -> GE {
    let mut out = GE::zero(4);
    for i in 0..d {
        for j in 0..d {
            out += m[i][j] * x[i] * y[j];
        }
    }
    out
}

fn apply(m: &[[GE; MAX_DIM]; MAX_DIM], x: &[GE; MAX_DIM], d: usize) -> [GE; MAX_DIM] {
    let mut out = [GE::zero(4); MAX_DIM];
    for i in 0..d {
        for k in 0..d {
            out[i] += m[i][k] * x[k];
        }
    }
    out
}

/// `∂_{θ⁺}∂_{θ⁻}` reduced to the flesh algebra.
fn berezin(e: &GE) -> GE {
    e.left_derivative(super_gens::THETA_MINUS)
        .left_derivative(super_gens::THETA_PLUS)
        .restrict_flesh()
}

/// `dω_k = −(∂_k g J + g ∂_k J)`, from `ω = −gJ`.
fn d_omega(geo: &LocalGeometry) -> [Mat; MAX_DIM] {
    let d = geo.dim;
    let mut out = [[[0.0; MAX_DIM]; MAX_DIM]; MAX_DIM];
    for (k, o) in out.iter_mut().enumerate().take(d) {
        for i in 0..d {
            for j in 0..d {
                o[i][j] = -(0..d)
                    .map(|m| geo.dg[k][i][m] * geo.j[m][j] + geo.g[i][m] * geo.dj[k][m][j])
                    .sum::<f64>();
            }
        }
    }
    out
}

#[derive(Clone, Copy)]
enum Density {
    Full,
    Dbar,
    Omega,
}

fn lagrangian_integral(pb: &Pullback, sf: &SuperField, which: Density) -> Result<GrassmannAction> {
    check_phi(pb, sf)?;
    let fd = FleshDerivs::new(pb.grid(), sf);
    let d = pb.dim();
    let half = C64::new(0.5, 0.0);
    let i_unit = C64::new(0.0, 1.0);
    let dens: Vec<GE> = (0..pb.grid().len())
        .into_par_iter()
        .map(|idx| {
            let geo = pb.geometry(idx);
            let ex = PointExpansion::build(pb, sf, &fd, idx);
            let l = match which {
                Density::Full => pair(&ex.compose(&geo.g, &geo.dg), &ex.a, &ex.b, d),
                Density::Dbar => {
                    let g = ex.compose(&geo.g, &geo.dg);
                    let j = ex.compose(&geo.j, &geo.dj);
                    let (ja, jb) = (apply(&j, &ex.a, d), apply(&j, &ex.b, d));
                    let mut pa = [GE::zero(4); MAX_DIM];
                    let mut pbar = [GE::zero(4); MAX_DIM];
                    for k in 0..d {
                        pa[k] = (ex.a[k] + ja[k].scale(i_unit)).scale(half);
                        pbar[k] = (ex.b[k] - jb[k].scale(i_unit)).scale(half);
                    }
                    pair(&g, &pa, &pbar, d).scale(2.0)
                }
                Density::Omega => pair(&ex.compose(&geo.omega, &d_omega(geo)), &ex.a, &ex.b, d).scale(-i_unit),
            };
            berezin(&l)
        })
        .collect();
    let total = crate::grassmann::integrate(pb.grid(), &dens, Measure::DsDt, pb.lambda())?;
    Ok(GrassmannAction::from_element(&total.scale(lagrangian_prefactor())))
}

/// `∫ℒ(Φ)`, with `ℒ = −i dz∧dz̄ ∂_{θ⁺}∂_{θ⁻} g_Φ(dΦ(D₊), dΦ(D₋))` evaluated by
/// Grassmann arithmetic on the superfield expansion.
pub fn super_lagrangian(pb: &Pullback, sf: &SuperField) -> Result<GrassmannAction> {
    lagrangian_integral(pb, sf, Density::Full)
}

/// `(∫ℒ_∂̄, ∫ℒ_ω)`: the same Berezin integral with `g(a, b)` replaced by
/// `2g(∂̄a, ∂̄b)` and by `−iω(a, b)` respectively.
pub fn lagrangian_decompose(pb: &Pullback, sf: &SuperField) -> Result<(GrassmannAction, GrassmannAction)> {
    Ok((
        lagrangian_integral(pb, sf, Density::Dbar)?,
        lagrangian_integral(pb, sf, Density::Omega)?,
    ))
}

/// The three sides of the classical identity
/// `½∫|dφ|² = ∫φ*ω + ∫|∂̄_Jφ|²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalIdentity {
    pub energy: f64,
    /// `∫φ*ω` integrated on the grid
    pub omega: f64,
    /// `∫φ*ω` from the windings, when the target knows its class
    pub omega_topological: Option<f64>,
    pub dbar: f64,
}

impl ClassicalIdentity {
    /// The `∫φ*ω` value used on the right-hand side: topological when
    /// available, otherwise the grid integral.
    pub fn omega_rhs(&self) -> f64 {
        self.omega_topological.unwrap_or(self.omega)
    }

    pub fn defect(&self) -> f64 {
        (self.energy - self.omega_rhs() - self.dbar).abs()
    }

    pub fn relative_defect(&self) -> f64 {
        self.defect() / self.energy.abs().max(f64::MIN_POSITIVE)
    }
}

pub fn verify_classical_identity(pb: &Pullback) -> ClassicalIdentity {
    let phi = pb.phi();
    ClassicalIdentity {
        energy: harmonic_action(pb),
        omega: pullback_omega_integral(pb),
        omega_topological: pb
            .target()
            .topological_pullback(phi.slope_s(), phi.slope_t(), pb.grid().area()),
        dbar: dbar_energy(pb),
    }
}

/// Separately computed quantities of the super action identity
/// `∫ℒ = ∫φ*ω + ∫ℒ_∂̄`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuperIdentity {
    pub lagrangian: GrassmannAction,
    pub omega: f64,
    pub l_dbar: GrassmannAction,
    pub l_omega: GrassmannAction,
}

impl SuperIdentity {
    /// `(body, soul)` defect of `∫ℒ − ∫φ*ω − ∫ℒ_∂̄`.
    pub fn defect(&self) -> (f64, f64) {
        let r = self.lagrangian.sub(&self.l_dbar);
        ((r.body - self.omega).abs(), r.soul.norm())
    }

    /// Defects relative to `max(|∫ℒ|, |∫φ*ω|, |∫ℒ_∂̄|, 1)` per component.
    pub fn relative_defect(&self) -> (f64, f64) {
        let (b, s) = self.defect();
        let sb = self.lagrangian.body.abs().max(self.omega.abs()).max(self.l_dbar.body.abs()).max(1.0);
        let ss = self.lagrangian.soul.norm().max(self.l_dbar.soul.norm()).max(1.0);
        (b / sb, s / ss)
    }
}

pub fn verify_super_identity(pb: &Pullback, sf: &SuperField) -> Result<SuperIdentity> {
    let lagrangian = super_lagrangian(pb, sf)?;
    let (l_dbar, l_omega) = lagrangian_decompose(pb, sf)?;
    let phi = pb.phi();
    let omega = pb
        .target()
        .topological_pullback(phi.slope_s(), phi.slope_t(), pb.grid().area())
        .unwrap_or_else(|| pullback_omega_integral(pb));
    Ok(SuperIdentity {
        lagrangian,
        omega,
        l_dbar,
        l_omega,
    })
}

/// The Euler–Lagrange expressions of `𝒜₁`.
///
/// `e4 = λ⁻¹[Σ_a(∇_a∇_aξ + R(ξ, φ_a)φ_a) + 4R(ψ₁, ψ₂)φ_z̄]` with the curvature
/// convention of [`LocalGeometry::riemann_apply`]; the factor and sign are the
/// ones for which the first variation pairs as in [`el_pairing`].
pub struct ElFields {
    pub e1: VectorField,
    pub e2: VectorField,
    pub e3: VectorField,
    pub e4: VectorField,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ElResiduals {
    pub tension: f64,
    pub psi1: f64,
    pub psi2: f64,
    pub xi: f64,
}

impl ElResiduals {
    pub fn max(&self) -> f64 {
        self.tension.max(self.psi1).max(self.psi2).max(self.xi)
    }
}

pub fn el_fields(pb: &Pullback, sf: &SuperField) -> Result<ElFields> {
    check_phi(pb, sf)?;
    let d = pb.dim();
    let e1 = VectorField::from_real_points(d, &pb.tension());
    let e2 = pb.nabla_dir(&sf.psi1.theta, Direction::Zbar);
    let e3 = pb.nabla_dir(&sf.psi2.theta, Direction::Zbar);
    let lap = pb
        .nabla(&pb.nabla(&sf.xi, Axis::S), Axis::S)
        .add_scaled(&pb.nabla(&pb.nabla(&sf.xi, Axis::T), Axis::T), C64::new(1.0, 0.0));
    let e4 = lap.map_points(|i, l| {
        let geo = pb.geometry(i);
        let xi = sf.xi.at(i);
        let (ps, pt) = (cvec(&pb.phi_s()[i]), cvec(&pb.phi_t()[i]));
        let curv = cadd(&geo.riemann_apply(&xi, &ps, &ps), &geo.riemann_apply(&xi, &pt, &pt));
        let psi = geo.riemann_apply(&sf.psi1.theta.at(i), &sf.psi2.theta.at(i), &pb.phi_zbar(i));
        let total = cadd(&cadd(l, &curv), &cscale(&psi, C64::new(4.0, 0.0)));
        cscale(&total, C64::new(1.0 / pb.lambda().at(i), 0.0))
    });
    Ok(ElFields { e1, e2, e3, e4 })
}

pub fn el_residuals(pb: &Pullback, sf: &SuperField) -> Result<ElResiduals> {
    let f = el_fields(pb, sf)?;
    Ok(ElResiduals {
        tension: f.e1.max_abs(),
        psi1: f.e2.max_abs(),
        psi2: f.e3.max_abs(),
        xi: f.e4.max_abs(),
    })
}

/// A tangent vector to the space of super fields. Only the real part of
/// `zeta` moves the map.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    pub zeta: VectorField,
    pub gamma1: VectorField,
    pub gamma2: VectorField,
    pub chi: VectorField,
}

impl Tangent {
    pub fn zeros(grid: &TorusGrid, dim: usize) -> Self {
        let z = VectorField::zeros(grid, dim);
        Self {
            zeta: z.clone(),
            gamma1: z.clone(),
            gamma2: z.clone(),
            chi: z,
        }
    }
}

/// First variation predicted by the Euler–Lagrange expressions:
/// body `−∫dvol g(E1, ζ)`, soul
/// `−∫dvol[g(χ, E1) + g(ζ, E4)] − 4∫g(γ₁, E3) + 4∫g(γ₂, E2)`.
pub fn el_pairing(pb: &Pullback, sf: &SuperField, v: &Tangent) -> Result<GrassmannAction> {
    let f = el_fields(pb, sf)?;
    let grid = pb.grid();
    let d = pb.dim();
    let re = |x: &CVec| {
        let mut o = *x;
        for c in o.iter_mut().take(d) {
            *c = C64::new(c.re, 0.0);
        }
        o
    };
    let g = |i: usize, a: &CVec, b: &CVec| pb.geometry(i).metric(a, b);
    let body: Vec<C64> = (0..grid.len()).map(|i| g(i, &f.e1.at(i), &re(&v.zeta.at(i)))).collect();
    let dvol: Vec<C64> = (0..grid.len())
        .map(|i| g(i, &v.chi.at(i), &f.e1.at(i)) + g(i, &re(&v.zeta.at(i)), &f.e4.at(i)))
        .collect();
    let dsdt: Vec<C64> = (0..grid.len())
        .map(|i| -4.0 * g(i, &v.gamma1.at(i), &f.e3.at(i)) + 4.0 * g(i, &v.gamma2.at(i), &f.e2.at(i)))
        .collect();
    let lam = pb.lambda();
    Ok(GrassmannAction::new(
        -grid.integrate_complex(&body, Measure::Dvol, lam).re,
        -grid.integrate_complex(&dvol, Measure::Dvol, lam) + grid.integrate_complex(&dsdt, Measure::DsDt, lam),
    ))
}

/// Functionals available to [`directional_derivative`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Functional {
    /// harmonic action
    A,
    A1,
    /// `𝒜₂` with `ψ₁` as an `S⁺` spinor
    A2,
}

fn evaluate(f: Functional, pb: &Pullback, sf: &SuperField) -> Result<GrassmannAction> {
    match f {
        Functional::A => Ok(GrassmannAction::new(harmonic_action(pb), ZERO)),
        Functional::A1 => action_a1(pb, sf),
        Functional::A2 => {
            let zero = VectorField::zeros(pb.grid(), pb.dim());
            Ok(GrassmannAction::new(action_a2(pb, &pb.e_plus(&sf.psi1.theta), &zero)?, ZERO))
        }
    }
}

const TRANSPORT_STEPS: usize = 2;

/// Parallel transport of `fields` along `τ ↦ φ + τζ`, `τ ∈ [0, ε]`, by RK4
/// on `dV/dτ = −Γ(ζ, V)`.
fn transport(
    grid: &TorusGrid,
    target: &dyn Target,
    phi: &MapField,
    zeta: &VectorField,
    eps: f64,
    fields: &[&VectorField],
) -> Result<Vec<VectorField>> {
    let d = phi.dim();
    let h = eps / TRANSPORT_STEPS as f64;
    let pts: Vec<Vec<CVec>> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let base = phi.value(grid, idx);
            let z = zeta.at(idx);
            let zr: [f64; MAX_DIM] = z.map(|c| c.re);
            let gamma_at = |tau: f64| -> Result<LocalGeometry> {
                let mut x = base;
                for k in 0..d {
                    x[k] += tau * zr[k];
                }
                target.geometry(&x)
            };
            let zc = cvec(&zr);
            let mut vs: Vec<CVec> = fields.iter().map(|f| f.at(idx)).collect();
            for step in 0..TRANSPORT_STEPS {
                let t0 = step as f64 * h;
                let (g0, g1, g2) = (gamma_at(t0)?, gamma_at(t0 + 0.5 * h)?, gamma_at(t0 + h)?);
                for v in vs.iter_mut() {
                    let rhs = |g: &LocalGeometry, w: &CVec| cscale(&g.gamma_apply(&zc, w), C64::new(-1.0, 0.0));
                    let k1 = rhs(&g0, v);
                    let k2 = rhs(&g1, &cadd(v, &cscale(&k1, C64::new(0.5 * h, 0.0))));
                    let k3 = rhs(&g1, &cadd(v, &cscale(&k2, C64::new(0.5 * h, 0.0))));
                    let k4 = rhs(&g2, &cadd(v, &cscale(&k3, C64::new(h, 0.0))));
                    let incr = cadd(&cadd(&k1, &k4), &cscale(&cadd(&k2, &k3), C64::new(2.0, 0.0)));
                    *v = cadd(v, &cscale(&incr, C64::new(h / 6.0, 0.0)));
                }
            }
            Ok(vs)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..fields.len())
        .map(|f| {
            let col: Vec<CVec> = pts.iter().map(|p| p[f]).collect();
            VectorField::from_points(d, &col)
        })
        .collect())
}

/// `Φ_ε`: the map moves by chart addition, flesh fields are parallel
/// transported along it and then shifted by `ε` times their variation.
pub fn perturb(
    grid: &TorusGrid,
    target: &dyn Target,
    sf: &SuperField,
    v: &Tangent,
    eps: f64,
) -> Result<SuperField> {
    let moved = transport(
        grid,
        target,
        &sf.phi,
        &v.zeta,
        eps,
        &[&sf.psi1.theta, &sf.psi2.theta, &sf.xi],
    )?;
    let e = C64::new(eps, 0.0);
    let mut out = sf.clone();
    out.phi = sf.phi.shifted(&v.zeta, eps);
    out.psi1.theta = moved[0].add_scaled(&v.gamma1, e);
    out.psi2.theta = moved[1].add_scaled(&v.gamma2, e);
    out.xi = moved[2].add_scaled(&v.chi, e);
    out.psi1.claims_10 = false;
    out.psi2.claims_10 = false;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionalDerivative {
    pub value: GrassmannAction,
    pub eps: f64,
    pub warning: Option<String>,
}

/// Below this step the central difference loses more to cancellation than
/// it gains in truncation.
pub const MIN_STEP: f64 = 1e-6;

/// Central difference `(F(Φ_ε) − F(Φ_{−ε}))/2ε`.
pub fn directional_derivative(
    functional: Functional,
    grid: &TorusGrid,
    target: &dyn Target,
    lambda: &ConformalFactor,
    sf: &SuperField,
    v: &Tangent,
    eps: f64,
) -> Result<DirectionalDerivative> {
    if !(eps > 0.0) {
        return Err(Error::Config(format!("finite-difference step must be positive, got {eps}")));
    }
    let at = |e: f64| -> Result<GrassmannAction> {
        let p = perturb(grid, target, sf, v, e)?;
        let pb = Pullback::new(grid, target, lambda, &p.phi)?;
        evaluate(functional, &pb, &p)
    };
    let (plus, minus) = (at(eps)?, at(-eps)?);
    let value = plus.sub(&minus).scale(0.5 / eps);
    let warning = (eps < MIN_STEP).then(|| {
        let scale = plus.max_abs().max(minus.max_abs());
        format!(
            "step {eps:e} is below {MIN_STEP:e}; roundoff in F ({scale:.3e}) is amplified by {:.1e}",
            0.5 / eps
        )
    });
    Ok(DirectionalDerivative { value, eps, warning })
}

/// The two spinor conditions for `ψ₂ = ξ = 0` and the product-rule relation
/// `∇_z̄ψ_{1θ} = λ^{1/4}∇_z̄ψ_{1e⁺} + ∂_z̄(λ^{1/4})ψ_{1e⁺}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct A1A2Comparison {
    /// `max|∇_z̄ψ_{1θ}|`, the `𝒜₁` condition
    pub a1_condition: f64,
    /// `max|∇_z̄ψ_{1e⁺}|`, the `𝒜₂` condition
    pub a2_condition: f64,
    /// `max|∇_z̄ψ_{1θ} − λ^{1/4}∇_z̄ψ_{1e⁺}|`
    pub divergence: f64,
    /// residual of the product-rule relation
    pub relation_defect: f64,
    pub lambda_constant: bool,
}

/// `∇_z̄ψ_{1θ} − λ^{1/4}∇_z̄ψ_{1e⁺}`: zero for constant `λ`, and equal to
/// `∂_z̄(λ^{1/4})ψ_{1e⁺}` otherwise.
pub fn a1_a2_defect_field(pb: &Pullback, psi_theta: &VectorField) -> VectorField {
    let e = pb.e_plus(psi_theta);
    let a = pb.nabla_dir(psi_theta, Direction::Zbar);
    let b = pb.nabla_dir(&e, Direction::Zbar);
    a.map_points(|i, x| csub(x, &cscale(&b.at(i), C64::new(pb.lambda().at(i).powf(0.25), 0.0))))
}

pub fn compare_a1_a2(pb: &Pullback, sf: &SuperField) -> Result<A1A2Comparison> {
    check_phi(pb, sf)?;
    if sf.psi2.theta.max_abs() != 0.0 || sf.xi.max_abs() != 0.0 {
        return Err(Error::Config("the A1/A2 comparison needs ψ₂ = 0 and ξ = 0".into()));
    }
    let grid = pb.grid();
    let psi = &sf.psi1.theta;
    let e = pb.e_plus(psi);
    let quarter: Vec<C64> = pb.lambda().powf(0.25).into_iter().map(|v| C64::new(v, 0.0)).collect();
    let dq = grid.deriv(&quarter, Direction::Zbar);
    let defect = a1_a2_defect_field(pb, psi);
    let relation = defect.map_points(|i, x| csub(x, &cscale(&e.at(i), dq[i])));
    Ok(A1A2Comparison {
        a1_condition: pb.nabla_dir(psi, Direction::Zbar).max_abs(),
        a2_condition: pb.nabla_dir(&e, Direction::Zbar).max_abs(),
        divergence: defect.max_abs(),
        relation_defect: relation.max_abs(),
        lambda_constant: pb.lambda().is_constant(),
    })
}

/// `∫ ∂_z̄ g(σ, τ) ds dt`, which vanishes on a closed surface; on the grid it
/// measures how far summation by parts holds.
pub fn boundary_term(pb: &Pullback, sigma: &VectorField, tau: &VectorField) -> C64 {
    let f: Vec<C64> = (0..pb.grid().len())
        .map(|i| pb.geometry(i).metric(&sigma.at(i), &tau.at(i)))
        .collect();
    let df = pb.grid().deriv(&f, Direction::Zbar);
    pb.grid().integrate_complex(&df, Measure::DsDt, pb.lambda())
}
