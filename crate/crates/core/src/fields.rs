//! Fields along a map `φ: Σ → X` and the first-order operators acting on them.
//!
//! [`Pullback`] fixes `(grid, target, λ, φ)`, caches `dφ` and the target
//! geometry at every grid point, and exposes the operators: `∂̄_J`, `∂_J`, the
//! pullback connection, the tension field, both forms of `D_φ`, the twisted
//! Dirac operator and the residuals defining holomorphic supercurves.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grassmann::{flesh_gens, mask_of, GrassmannElement};
use crate::target::{mat_apply, LocalGeometry, Target, MAX_DIM};
use crate::worldsheet::{Axis, ConformalFactor, Direction, TorusGrid};

type C64 = Complex64;
pub type RVec = [f64; MAX_DIM];
pub type CVec = [C64; MAX_DIM];

const I: C64 = C64::new(0.0, 1.0);

pub(crate) fn cvec(v: &RVec) -> CVec {
    v.map(|x| C64::new(x, 0.0))
}

pub(crate) fn cadd(a: &CVec, b: &CVec) -> CVec {
    let mut o = *a;
    for (x, y) in o.iter_mut().zip(b) {
        *x += y;
    }
    o
}

pub(crate) fn csub(a: &CVec, b: &CVec) -> CVec {
    let mut o = *a;
    for (x, y) in o.iter_mut().zip(b) {
        *x -= y;
    }
    o
}

pub(crate) fn cscale(a: &CVec, c: C64) -> CVec {
    a.map(|x| x * c)
}

pub(crate) fn cmax(v: &CVec) -> f64 {
    v.iter().map(|c| c.norm()).fold(0.0, f64::max)
}

/// A map into a chart, `φ^i(s,t) = slope_s^i s + slope_t^i t + p^i(s,t)` with
/// `p` periodic. Nonzero slopes encode windings for torus targets, so linear
/// maps are represented exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct MapField {
    dim: usize,
    slope_s: RVec,
    slope_t: RVec,
    periodic: Vec<Vec<f64>>,
}

impl MapField {
    pub fn new(grid: &TorusGrid, slope_s: &[f64], slope_t: &[f64], periodic: Vec<Vec<f64>>) -> Result<Self> {
        let dim = periodic.len();
        if dim != 2 && dim != 4 {
            return Err(Error::Shape(format!("map has {dim} components, expected 2 or 4")));
        }
        if slope_s.len() != dim || slope_t.len() != dim {
            return Err(Error::Shape("slope length differs from map dimension".into()));
        }
        if let Some(c) = periodic.iter().find(|c| c.len() != grid.len()) {
            return Err(Error::Shape(format!("map component has {} samples, grid has {}", c.len(), grid.len())));
        }
        let mut ss = [0.0; MAX_DIM];
        let mut st = [0.0; MAX_DIM];
        ss[..dim].copy_from_slice(slope_s);
        st[..dim].copy_from_slice(slope_t);
        Ok(Self {
            dim,
            slope_s: ss,
            slope_t: st,
            periodic,
        })
    }

    /// `φ(s,t) = offset + slope_s s + slope_t t`
    pub fn linear(grid: &TorusGrid, slope_s: &[f64], slope_t: &[f64], offset: &[f64]) -> Result<Self> {
        let periodic = offset.iter().map(|&c| vec![c; grid.len()]).collect();
        Self::new(grid, slope_s, slope_t, periodic)
    }

    /// Periodic map sampled from a closure.
    pub fn from_fn<F: Fn(f64, f64) -> RVec>(grid: &TorusGrid, dim: usize, f: F) -> Result<Self> {
        let mut periodic = vec![vec![0.0; grid.len()]; dim];
        for idx in 0..grid.len() {
            let (s, t) = grid.coords(idx);
            let v = f(s, t);
            for k in 0..dim {
                periodic[k][idx] = v[k];
            }
        }
        Self::new(grid, &vec![0.0; dim], &vec![0.0; dim], periodic)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn slope_s(&self) -> &[f64] {
        &self.slope_s[..self.dim]
    }
    pub fn slope_t(&self) -> &[f64] {
        &self.slope_t[..self.dim]
    }
    pub fn periodic(&self) -> &[Vec<f64>] {
        &self.periodic
    }
    pub fn is_periodic(&self) -> bool {
        self.slope_s.iter().chain(self.slope_t.iter()).all(|v| *v == 0.0)
    }

    pub fn value(&self, grid: &TorusGrid, idx: usize) -> RVec {
        let (s, t) = grid.coords(idx);
        let mut out = [0.0; MAX_DIM];
        for k in 0..self.dim {
            out[k] = self.slope_s[k] * s + self.slope_t[k] * t + self.periodic[k][idx];
        }
        out
    }

    /// `(∂_s φ, ∂_t φ)` at every grid point.
    pub fn differentials(&self, grid: &TorusGrid) -> (Vec<RVec>, Vec<RVec>) {
        let mut ds = vec![[0.0; MAX_DIM]; grid.len()];
        let mut dt = vec![[0.0; MAX_DIM]; grid.len()];
        for k in 0..self.dim {
            let a = grid.d_axis_real(&self.periodic[k], Axis::S);
            let b = grid.d_axis_real(&self.periodic[k], Axis::T);
            for idx in 0..grid.len() {
                ds[idx][k] = self.slope_s[k] + a[idx];
                dt[idx][k] = self.slope_t[k] + b[idx];
            }
        }
        (ds, dt)
    }

    /// `φ + ε ζ` (chart addition).
    pub fn shifted(&self, zeta: &VectorField, eps: f64) -> Self {
        let mut out = self.clone();
        for k in 0..self.dim {
            for (p, z) in out.periodic[k].iter_mut().zip(&zeta.comps[k]) {
                *p += eps * z.re;
            }
        }
        out
    }
}

/// A complex vector field along the grid, stored component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    dim: usize,
    comps: Vec<Vec<C64>>,
}

impl VectorField {
    pub fn zeros(grid: &TorusGrid, dim: usize) -> Self {
        Self {
            dim,
            comps: vec![vec![C64::new(0.0, 0.0); grid.len()]; dim],
        }
    }

    pub fn constant(grid: &TorusGrid, v: &[C64]) -> Self {
        Self {
            dim: v.len(),
            comps: v.iter().map(|&c| vec![c; grid.len()]).collect(),
        }
    }

    pub fn from_components(comps: Vec<Vec<C64>>) -> Result<Self> {
        let dim = comps.len();
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::Shape(format!("vector field with {dim} components")));
        }
        let n = comps[0].len();
        if comps.iter().any(|c| c.len() != n) {
            return Err(Error::Shape("vector field components differ in length".into()));
        }
        Ok(Self { dim, comps })
    }

    pub fn from_points(dim: usize, pts: &[CVec]) -> Self {
        let mut comps = vec![vec![C64::new(0.0, 0.0); pts.len()]; dim];
        for (idx, p) in pts.iter().enumerate() {
            for k in 0..dim {
                comps[k][idx] = p[k];
            }
        }
        Self { dim, comps }
    }

    pub fn from_real_points(dim: usize, pts: &[RVec]) -> Self {
        let c: Vec<CVec> = pts.iter().map(cvec).collect();
        Self::from_points(dim, &c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.comps.first().map_or(0, |c| c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn components(&self) -> &[Vec<C64>] {
        &self.comps
    }

    pub fn at(&self, idx: usize) -> CVec {
        let mut out = [C64::new(0.0, 0.0); MAX_DIM];
        for k in 0..self.dim {
            out[k] = self.comps[k][idx];
        }
        out
    }

    pub fn points(&self) -> Vec<CVec> {
        (0..self.len()).map(|i| self.at(i)).collect()
    }

    pub fn map_points<F: Fn(usize, &CVec) -> CVec>(&self, f: F) -> Self {
        let pts: Vec<CVec> = (0..self.len()).map(|i| f(i, &self.at(i))).collect();
        Self::from_points(self.dim, &pts)
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self {
            dim: self.dim,
            comps: self.comps.iter().map(|v| v.iter().map(|x| x * c).collect()).collect(),
        }
    }

    pub fn add_scaled(&self, other: &Self, c: C64) -> Self {
        Self {
            dim: self.dim,
            comps: self
                .comps
                .iter()
                .zip(&other.comps)
                .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y * c).collect())
                .collect(),
        }
    }

    /// Componentwise grid derivative (no connection).
    pub fn deriv(&self, grid: &TorusGrid, dir: Direction) -> Self {
        Self {
            dim: self.dim,
            comps: self.comps.iter().map(|c| grid.deriv(c, dir)).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flatten().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn real_parts(&self) -> Vec<RVec> {
        (0..self.len())
            .map(|i| {
                let mut r = [0.0; MAX_DIM];
                for k in 0..self.dim {
                    r[k] = self.comps[k][i].re;
                }
                r
            })
            .collect()
    }
}

/// `ψ_{jθ}`: the `θ⁺`-component of an odd spinor-valued field, stored as a
/// complex vector along `φ`. The `(1,0)` condition `ψ + iJψ = 0` is not
/// imposed by the type; `claims_10` records whether the constructor promised it.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorVectorField {
    pub theta: VectorField,
    pub claims_10: bool,
}

impl SpinorVectorField {
    pub fn new(theta: VectorField) -> Self {
        Self { theta, claims_10: false }
    }

    pub fn zeros(grid: &TorusGrid, dim: usize) -> Self {
        Self {
            theta: VectorField::zeros(grid, dim),
            claims_10: true,
        }
    }
}

/// Component fields `(φ, ψ₁, ψ₂, ξ)` of a map with flesh.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperField {
    pub phi: MapField,
    pub psi1: SpinorVectorField,
    pub psi2: SpinorVectorField,
    pub xi: VectorField,
}

impl SuperField {
    pub fn bosonic(grid: &TorusGrid, phi: MapField) -> Self {
        let d = phi.dim();
        Self {
            phi,
            psi1: SpinorVectorField::zeros(grid, d),
            psi2: SpinorVectorField::zeros(grid, d),
            xi: VectorField::zeros(grid, d),
        }
    }

    pub fn check(&self, grid: &TorusGrid) -> Result<()> {
        let d = self.phi.dim();
        for (name, f) in [("psi1", &self.psi1.theta), ("psi2", &self.psi2.theta), ("xi", &self.xi)] {
            if f.dim() != d {
                return Err(Error::Shape(format!("{name} has {} components, map has {d}", f.dim())));
            }
            if f.len() != grid.len() {
                return Err(Error::Shape(format!("{name} has {} samples, grid has {}", f.len(), grid.len())));
            }
        }
        Ok(())
    }
}

/// A one-form along the map, by its values on `∂_s` and `∂_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct OneForm<T> {
    pub s: Vec<T>,
    pub t: Vec<T>,
}

impl OneForm<RVec> {
    pub fn max_abs(&self) -> f64 {
        self.s.iter().chain(&self.t).flatten().map(|v| v.abs()).fold(0.0, f64::max)
    }
}

impl OneForm<CVec> {
    pub fn max_abs(&self) -> f64 {
        self.s.iter().chain(&self.t).map(cmax).fold(0.0, f64::max)
    }

    pub fn max_dist(&self, other: &Self) -> f64 {
        let ds = self.s.iter().zip(&other.s).map(|(a, b)| cmax(&csub(a, b)));
        let dt = self.t.iter().zip(&other.t).map(|(a, b)| cmax(&csub(a, b)));
        ds.chain(dt).fold(0.0, f64::max)
    }
}

/// The five defining residuals of a holomorphic supercurve (max-norms), plus
/// the `(1,0)` type condition on the spinor fields.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupercurveResiduals {
    pub nijenhuis: f64,
    pub dbar: f64,
    pub d_xi: f64,
    pub d_psi1: f64,
    pub d_psi2: f64,
    pub type_10: f64,
}

impl SupercurveResiduals {
    pub fn max(&self) -> f64 {
        [self.nijenhuis, self.dbar, self.d_xi, self.d_psi1, self.d_psi2, self.type_10]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Residuals of the five local coordinate equations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalResiduals {
    pub cauchy_riemann: f64,
    pub type_10: f64,
    pub contraction: f64,
    pub psi_transport: f64,
    pub xi_transport: f64,
}

impl LocalResiduals {
    pub fn max(&self) -> f64 {
        [self.cauchy_riemann, self.type_10, self.contraction, self.psi_transport, self.xi_transport]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Field-by-field comparison of the local equations with the defining ones:
/// `φ_s + Jφ_t = 2∂̄_Jφ(∂_s)`, contraction `= −(i/2)N(ψ₁, ψ₂)` and
/// transport `= 2D_φσ(∂_s) + K(σ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceDefects {
    pub cauchy_riemann: f64,
    /// only meaningful when both spinors are of type `(1,0)`
    pub contraction: f64,
    /// worst of `σ = ψ₁, ψ₂, ξ`
    pub transport: f64,
    /// largest magnitude among the compared fields
    pub scale: f64,
}

impl EquivalenceDefects {
    pub fn relative(&self) -> f64 {
        self.cauchy_riemann.max(self.contraction).max(self.transport) / self.scale.max(1.0)
    }
}

/// A map together with everything derived from it that the operators reuse.
pub struct Pullback<'a> {
    grid: &'a TorusGrid,
    target: &'a dyn Target,
    lambda: &'a ConformalFactor,
    phi: &'a MapField,
    phi_s: Vec<RVec>,
    phi_t: Vec<RVec>,
    geo: Vec<LocalGeometry>,
}

impl<'a> Pullback<'a> {
    pub fn new(grid: &'a TorusGrid, target: &'a dyn Target, lambda: &'a ConformalFactor, phi: &'a MapField) -> Result<Self> {
        if phi.dim() != target.dim() {
            return Err(Error::Shape(format!(
                "map has {} components, target `{}` has dimension {}",
                phi.dim(),
                target.name(),
                target.dim()
            )));
        }
        if phi.periodic.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::Shape("map sampled on a different grid".into()));
        }
        if lambda.values().len() != grid.len() {
            return Err(Error::Shape("conformal factor sampled on a different grid".into()));
        }
        if !phi.is_periodic() && target.lattice_period().is_none() {
            return Err(Error::Config(format!(
                "map winds but target `{}` is not periodic",
                target.name()
            )));
        }
        let geo = (0..grid.len())
            .into_par_iter()
            .map(|idx| {
                let x = phi.value(grid, idx);
                if !target.contains(&x) {
                    return Err(Error::DegenerateInput(format!(
                        "map leaves the chart domain of `{}` at {x:?}",
                        target.name()
                    )));
                }
                target.geometry(&x)
            })
            .collect::<Result<Vec<_>>>()?;
        let (phi_s, phi_t) = phi.differentials(grid);
        Ok(Self {
            grid,
            target,
            lambda,
            phi,
            phi_s,
            phi_t,
            geo,
        })
    }

    pub fn grid(&self) -> &TorusGrid {
        self.grid
    }
    pub fn target(&self) -> &dyn Target {
        self.target
    }
    pub fn lambda(&self) -> &ConformalFactor {
        self.lambda
    }
    pub fn phi(&self) -> &MapField {
        self.phi
    }
    pub fn dim(&self) -> usize {
        self.phi.dim()
    }
    pub fn geometry(&self, idx: usize) -> &LocalGeometry {
        &self.geo[idx]
    }
    pub fn phi_s(&self) -> &[RVec] {
        &self.phi_s
    }
    pub fn phi_t(&self) -> &[RVec] {
        &self.phi_t
    }

    fn phi_a(&self, axis: Axis, idx: usize) -> &RVec {
        match axis {
            Axis::S => &self.phi_s[idx],
            Axis::T => &self.phi_t[idx],
        }
    }

    /// `∂_z φ = ½(φ_s − iφ_t)`
    pub fn phi_z(&self, idx: usize) -> CVec {
        let mut out = [C64::new(0.0, 0.0); MAX_DIM];
        for k in 0..self.dim() {
            out[k] = C64::new(0.5 * self.phi_s[idx][k], -0.5 * self.phi_t[idx][k]);
        }
        out
    }

    /// `∂_z̄ φ = ½(φ_s + iφ_t)`
    pub fn phi_zbar(&self, idx: usize) -> CVec {
        let mut out = [C64::new(0.0, 0.0); MAX_DIM];
        for k in 0..self.dim() {
            out[k] = C64::new(0.5 * self.phi_s[idx][k], 0.5 * self.phi_t[idx][k]);
        }
        out
    }

    /// `∂̄_J φ = ½(dφ + J dφ j)`: `s ↦ ½(φ_s + Jφ_t)`, `t ↦ ½(φ_t − Jφ_s)`.
    pub fn dbar(&self) -> OneForm<RVec> {
        self.projected(1.0)
    }

    /// `∂_J φ = ½(dφ − J dφ j)`: `s ↦ ½(φ_s − Jφ_t)`, `t ↦ ½(φ_t + Jφ_s)`.
    pub fn partial(&self) -> OneForm<RVec> {
        self.projected(-1.0)
    }

    fn projected(&self, sign: f64) -> OneForm<RVec> {
        let d = self.dim();
        let mut s = Vec::with_capacity(self.grid.len());
        let mut t = Vec::with_capacity(self.grid.len());
        for idx in 0..self.grid.len() {
            let geo = &self.geo[idx];
            let jt = geo.j_apply(&self.phi_t[idx]);
            let js = geo.j_apply(&self.phi_s[idx]);
            let mut a = [0.0; MAX_DIM];
            let mut b = [0.0; MAX_DIM];
            for k in 0..d {
                a[k] = 0.5 * (self.phi_s[idx][k] + sign * jt[k]);
                b[k] = 0.5 * (self.phi_t[idx][k] - sign * js[k]);
            }
            s.push(a);
            t.push(b);
        }
        OneForm { s, t }
    }

    /// Pullback connection `(∇_a σ)^k = ∂_a σ^k + Γ^k_lm ∂_aφ^l σ^m`.
    pub fn nabla(&self, sigma: &VectorField, axis: Axis) -> VectorField {
        let dir = match axis {
            Axis::S => Direction::S,
            Axis::T => Direction::T,
        };
        let d = sigma.deriv(self.grid, dir);
        d.map_points(|idx, v| {
            let g = self.geo[idx].gamma_apply(&cvec(self.phi_a(axis, idx)), &sigma.at(idx));
            cadd(v, &g)
        })
    }

    /// `∇_{∂_z}` or `∇_{∂_z̄}` as the corresponding combination of `∇_s`, `∇_t`.
    pub fn nabla_dir(&self, sigma: &VectorField, dir: Direction) -> VectorField {
        match dir {
            Direction::S => self.nabla(sigma, Axis::S),
            Direction::T => self.nabla(sigma, Axis::T),
            Direction::Z | Direction::Zbar => {
                let ns = self.nabla(sigma, Axis::S);
                let nt = self.nabla(sigma, Axis::T);
                let c = if dir == Direction::Z { C64::new(0.0, -0.5) } else { C64::new(0.0, 0.5) };
                ns.scaled(C64::new(0.5, 0.0)).add_scaled(&nt, c)
            }
        }
    }

    /// Tension field by the local formula `τ = (4/λ)(∂_z∂_z̄φ + Γ(∂_zφ, ∂_z̄φ))`.
    pub fn tension(&self) -> Vec<RVec> {
        let d = self.dim();
        let n = self.grid.len();
        let mut dzdzbar = vec![[C64::new(0.0, 0.0); MAX_DIM]; n];
        for k in 0..d {
            let zbar: Vec<C64> = (0..n).map(|i| C64::new(0.5 * self.phi_s[i][k], 0.5 * self.phi_t[i][k])).collect();
            let dz = self.grid.deriv(&zbar, Direction::Z);
            for i in 0..n {
                dzdzbar[i][k] = dz[i];
            }
        }
        (0..n)
            .map(|i| {
                let gam = self.geo[i].gamma_apply(&self.phi_z(i), &self.phi_zbar(i));
                let f = 4.0 / self.lambda.at(i);
                let mut out = [0.0; MAX_DIM];
                for k in 0..d {
                    out[k] = f * (dzdzbar[i][k] + gam[k]).re;
                }
                out
            })
            .collect()
    }

    /// Tension as the trace `λ⁻¹(∇_s φ_s + ∇_t φ_t)` of the second fundamental form.
    pub fn tension_trace(&self) -> Vec<RVec> {
        let d = self.dim();
        let vs = VectorField::from_real_points(d, &self.phi_s);
        let vt = VectorField::from_real_points(d, &self.phi_t);
        let a = self.nabla(&vs, Axis::S);
        let b = self.nabla(&vt, Axis::T);
        (0..self.grid.len())
            .map(|i| {
                let mut out = [0.0; MAX_DIM];
                let (x, y) = (a.at(i), b.at(i));
                for k in 0..d {
                    out[k] = (x[k] + y[k]).re / self.lambda.at(i);
                }
                out
            })
            .collect()
    }

    /// `D_φ ξ = ½(∇ξ + J∇ξ∘j) − ½J(∇_ξ J)∂_J φ`, complex-linearly extended.
    pub fn d_phi(&self, xi: &VectorField) -> OneForm<CVec> {
        let ns = self.nabla(xi, Axis::S);
        let nt = self.nabla(xi, Axis::T);
        let part = self.partial();
        let d = self.dim();
        let mut s = Vec::with_capacity(self.grid.len());
        let mut t = Vec::with_capacity(self.grid.len());
        for idx in 0..self.grid.len() {
            let geo = &self.geo[idx];
            let (a, b) = (ns.at(idx), nt.at(idx));
            let ja = geo.j_apply(&a);
            let jb = geo.j_apply(&b);
            let nj = geo.nabla_j(&xi.at(idx));
            let corr_s = geo.j_apply(&mat_apply(&nj, &cvec(&part.s[idx]), d));
            let corr_t = geo.j_apply(&mat_apply(&nj, &cvec(&part.t[idx]), d));
            let mut os = [C64::new(0.0, 0.0); MAX_DIM];
            let mut ot = [C64::new(0.0, 0.0); MAX_DIM];
            for k in 0..d {
                // j∂_s = ∂_t, j∂_t = −∂_s
                os[k] = 0.5 * (a[k] + jb[k]) - 0.5 * corr_s[k];
                ot[k] = 0.5 * (b[k] - ja[k]) - 0.5 * corr_t[k];
            }
            s.push(os);
            t.push(ot);
        }
        OneForm { s, t }
    }

    /// `D_φ ξ = (∇^J ξ)^{0,1} + ¼ N_J(ξ, ∂_J φ)` with `∇^J_v ξ = ∇_v ξ − ½J(∇_v J)ξ`.
    pub fn d_phi_alt(&self, xi: &VectorField) -> OneForm<CVec> {
        let ns = self.nabla(xi, Axis::S);
        let nt = self.nabla(xi, Axis::T);
        let part = self.partial();
        let d = self.dim();
        let mut s = Vec::with_capacity(self.grid.len());
        let mut t = Vec::with_capacity(self.grid.len());
        for idx in 0..self.grid.len() {
            let geo = &self.geo[idx];
            let x = xi.at(idx);
            let complexified = |nabla: CVec, v: &RVec| {
                let dj = geo.nabla_j(&cvec(v));
                let c = geo.j_apply(&mat_apply(&dj, &x, d));
                csub(&nabla, &cscale(&c, C64::new(0.5, 0.0)))
            };
            let a = complexified(ns.at(idx), &self.phi_s[idx]);
            let b = complexified(nt.at(idx), &self.phi_t[idx]);
            let ja = geo.j_apply(&a);
            let jb = geo.j_apply(&b);
            let n_s = geo.nijenhuis(&x, &cvec(&part.s[idx]));
            let n_t = geo.nijenhuis(&x, &cvec(&part.t[idx]));
            let mut os = [C64::new(0.0, 0.0); MAX_DIM];
            let mut ot = [C64::new(0.0, 0.0); MAX_DIM];
            for k in 0..d {
                os[k] = 0.5 * (a[k] + jb[k]) + 0.25 * n_s[k];
                ot[k] = 0.5 * (b[k] - ja[k]) + 0.25 * n_t[k];
            }
            s.push(os);
            t.push(ot);
        }
        OneForm { s, t }
    }

    /// `ψ_{e⁺} = λ^{-1/4} ψ_θ`
    pub fn e_plus(&self, psi_theta: &VectorField) -> VectorField {
        psi_theta.map_points(|i, v| cscale(v, C64::new(self.lambda.at(i).powf(-0.25), 0.0)))
    }

    /// `ψ_θ = λ^{1/4} ψ_{e⁺}`
    pub fn theta_from_e_plus(&self, psi_e: &VectorField) -> VectorField {
        psi_e.map_points(|i, v| cscale(v, C64::new(self.lambda.at(i).powf(0.25), 0.0)))
    }

    /// Twisted Dirac operator in the square-root frames:
    /// `D̸ψ = 2λ^{-1/2}(−∇_z ψ_{e⁻}, ∇_z̄ ψ_{e⁺})`, returned as `(e⁺ slot, e⁻ slot)`.
    pub fn dirac(&self, psi_e_plus: &VectorField, psi_e_minus: &VectorField) -> (VectorField, VectorField) {
        let plus = self
            .nabla_dir(psi_e_minus, Direction::Z)
            .map_points(|i, v| cscale(v, C64::new(-2.0 / self.lambda.at(i).sqrt(), 0.0)));
        let minus = self
            .nabla_dir(psi_e_plus, Direction::Zbar)
            .map_points(|i, v| cscale(v, C64::new(2.0 / self.lambda.at(i).sqrt(), 0.0)));
        (plus, minus)
    }

    /// `ψ^{φ,ζ}_θ = ζ_− ∂_z φ`
    pub fn induced_psi(&self, zeta_minus: &[C64]) -> Result<SpinorVectorField> {
        if zeta_minus.len() != self.grid.len() {
            return Err(Error::Shape("ζ sampled on a different grid".into()));
        }
        let pts: Vec<CVec> = (0..self.grid.len()).map(|i| cscale(&self.phi_z(i), zeta_minus[i])).collect();
        Ok(SpinorVectorField {
            theta: VectorField::from_points(self.dim(), &pts),
            claims_10: self.dbar().max_abs() == 0.0,
        })
    }

    /// `(1,0)` projection `½(v − iJv)`.
    pub fn project_10(&self, v: &VectorField) -> VectorField {
        v.map_points(|i, x| {
            let jx = self.geo[i].j_apply(x);
            cscale(&csub(x, &cscale(&jx, I)), C64::new(0.5, 0.0))
        })
    }

    /// `max |v + iJv|`
    pub fn type_10_residual(&self, v: &VectorField) -> f64 {
        (0..self.grid.len())
            .map(|i| {
                let x = v.at(i);
                cmax(&cadd(&x, &cscale(&self.geo[i].j_apply(&x), I)))
            })
            .fold(0.0, f64::max)
    }

    /// `N_J^C(ψ₁, ψ₂)` pointwise.
    pub fn nijenhuis_field(&self, a: &VectorField, b: &VectorField) -> Vec<CVec> {
        (0..self.grid.len()).map(|i| self.geo[i].nijenhuis(&a.at(i), &b.at(i))).collect()
    }

    /// The `η¹η²` coefficient of `ψ^l ψ^k ∂_l J^i_k` for the Grassmann-valued
    /// `ψ = η¹ψ₁ + η²ψ₂`, evaluated by Grassmann arithmetic.
    pub fn nijenhuis_contraction(&self, psi1: &VectorField, psi2: &VectorField) -> Vec<CVec> {
        let d = self.dim();
        let top = mask_of(&[flesh_gens::ETA1, flesh_gens::ETA2]);
        (0..self.grid.len())
            .map(|idx| {
                let geo = &self.geo[idx];
                let (a, b) = (psi1.at(idx), psi2.at(idx));
                let psi: Vec<GrassmannElement> = (0..d)
                    .map(|k| {
                        GrassmannElement::generator(2, flesh_gens::ETA1).scale(a[k])
                            + GrassmannElement::generator(2, flesh_gens::ETA2).scale(b[k])
                    })
                    .collect();
                let mut out = [C64::new(0.0, 0.0); MAX_DIM];
                for (i, o) in out.iter_mut().enumerate().take(d) {
                    let mut acc = GrassmannElement::zero(2);
                    for l in 0..d {
                        for k in 0..d {
                            let c = geo.dj[l][i][k];
                            if c != 0.0 {
                                acc += (psi[l] * psi[k]).scale(c);
                            }
                        }
                    }
                    *o = acc.extract(top);
                }
                out
            })
            .collect()
    }

    /// Residuals of the defining equations of a holomorphic supercurve.
    pub fn supercurve_residuals(&self, sf: &SuperField) -> Result<SupercurveResiduals> {
        sf.check(self.grid)?;
        let n = self.nijenhuis_field(&sf.psi1.theta, &sf.psi2.theta);
        Ok(SupercurveResiduals {
            nijenhuis: n.iter().map(cmax).fold(0.0, f64::max),
            dbar: self.dbar().max_abs(),
            d_xi: self.d_phi(&sf.xi).max_abs(),
            d_psi1: self.d_phi(&sf.psi1.theta).max_abs(),
            d_psi2: self.d_phi(&sf.psi2.theta).max_abs(),
            type_10: self.type_10_residual(&sf.psi1.theta).max(self.type_10_residual(&sf.psi2.theta)),
        })
    }

    /// `σ_s + Jσ_t + (σ^m ∂_m J) φ_t` with chart derivatives.
    pub fn transport_equation(&self, sigma: &VectorField) -> Vec<CVec> {
        let ds = sigma.deriv(self.grid, Direction::S);
        let dt = sigma.deriv(self.grid, Direction::T);
        let d = self.dim();
        (0..self.grid.len())
            .map(|i| {
                let geo = &self.geo[i];
                let jt = geo.j_apply(&dt.at(i));
                let dj = geo.dj_along(&sigma.at(i));
                let c = mat_apply(&dj, &cvec(&self.phi_t[i]), d);
                cadd(&cadd(&ds.at(i), &jt), &c)
            })
            .collect()
    }

    /// `K(σ) = J(∂_σJ)∂̄_s + JΓ(σ, J∂̄_s) − Γ(σ, ∂̄_s)`, the amount by which the
    /// transport equation exceeds `2(D_φσ)(∂_s)` off holomorphic maps.
    pub fn transport_correction(&self, sigma: &VectorField) -> Vec<CVec> {
        let db = self.dbar();
        let d = self.dim();
        (0..self.grid.len())
            .map(|i| {
                let geo = &self.geo[i];
                let x = sigma.at(i);
                let v = cvec(&db.s[i]);
                let a = geo.j_apply(&mat_apply(&geo.dj_along(&x), &v, d));
                let b = geo.j_apply(&geo.gamma_apply(&x, &geo.j_apply(&v)));
                let c = geo.gamma_apply(&x, &v);
                csub(&cadd(&a, &b), &c)
            })
            .collect()
    }

    /// `φ_s + Jφ_t`
    pub fn cauchy_riemann(&self) -> Vec<RVec> {
        (0..self.grid.len())
            .map(|i| {
                let jt = self.geo[i].j_apply(&self.phi_t[i]);
                let mut out = self.phi_s[i];
                for k in 0..self.dim() {
                    out[k] += jt[k];
                }
                out
            })
            .collect()
    }

    /// Residuals of the local coordinate form of the supercurve equations.
    pub fn holo_local_residuals(&self, sf: &SuperField) -> Result<LocalResiduals> {
        sf.check(self.grid)?;
        let max_c = |v: &[CVec]| v.iter().map(cmax).fold(0.0, f64::max);
        let cr = self
            .cauchy_riemann()
            .iter()
            .flatten()
            .map(|v| v.abs())
            .fold(0.0, f64::max);
        Ok(LocalResiduals {
            cauchy_riemann: cr,
            type_10: self.type_10_residual(&sf.psi1.theta).max(self.type_10_residual(&sf.psi2.theta)),
            contraction: max_c(&self.nijenhuis_contraction(&sf.psi1.theta, &sf.psi2.theta)),
            psi_transport: max_c(&self.transport_equation(&sf.psi1.theta))
                .max(max_c(&self.transport_equation(&sf.psi2.theta))),
            xi_transport: max_c(&self.transport_equation(&sf.xi)),
        })
    }

    pub fn equivalence_defects(&self, sf: &SuperField) -> Result<EquivalenceDefects> {
        sf.check(self.grid)?;
        let n = self.grid.len();
        let d = self.dim();
        let db = self.dbar();
        let cr = self.cauchy_riemann();
        let mut scale = 0.0f64;
        let mut cr_def = 0.0f64;
        for i in 0..n {
            for k in 0..d {
                cr_def = cr_def.max((cr[i][k] - 2.0 * db.s[i][k]).abs());
                scale = scale.max(cr[i][k].abs());
            }
        }
        let (p1, p2) = (&sf.psi1.theta, &sf.psi2.theta);
        let contraction = self.nijenhuis_contraction(p1, p2);
        let nij = self.nijenhuis_field(p1, p2);
        let mut c_def = 0.0f64;
        for i in 0..n {
            let want = cscale(&nij[i], C64::new(0.0, -0.5));
            c_def = c_def.max(cmax(&csub(&contraction[i], &want)));
            scale = scale.max(cmax(&contraction[i]));
        }
        let mut t_def = 0.0f64;
        for sigma in [p1, p2, &sf.xi] {
            let lhs = self.transport_equation(sigma);
            let dphi = self.d_phi(sigma);
            let k = self.transport_correction(sigma);
            for i in 0..n {
                let rhs = cadd(&cscale(&dphi.s[i], C64::new(2.0, 0.0)), &k[i]);
                t_def = t_def.max(cmax(&csub(&lhs[i], &rhs)));
                scale = scale.max(cmax(&lhs[i]));
            }
        }
        Ok(EquivalenceDefects {
            cauchy_riemann: cr_def,
            contraction: c_def,
            transport: t_def,
            scale,
        })
    }
}
