//! Holomorphic supercurves on flat tori built from linear holomorphic maps.
//!
//! A map `φ(s, t) = s·a + t·b + c` into `R^{2n}/Z^{2n}` is holomorphic iff
//! `a = −J₀b`, and descends to the worldsheet torus iff `a·P_s` and `b·P_t`
//! are lattice vectors. The spinor fields are induced sections
//! `ψ_{jθ} = ζ_j ∂_zφ` with constant `ζ_j`, and `ξ` is constant.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{MapField, Pullback, SuperField};
use crate::target::{standard_j, TargetSpec};
use crate::worldsheet::{ConformalFactor, TorusGrid};

/// Inputs of the construction. `winding_t` is the lattice vector `b·P_t`;
/// the `s`-winding follows from holomorphy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConstructionParams {
    pub winding_t: Vec<i64>,
    pub offset: Vec<f64>,
    pub zeta1: C64,
    pub zeta2: C64,
    pub xi: Vec<C64>,
    /// multiplies both `ζ_j`
    pub psi_scale: f64,
}

impl Default for ConstructionParams {
    fn default() -> Self {
        Self {
            winding_t: vec![0, 1],
            offset: vec![0.25, -0.125],
            zeta1: C64::new(0.5, 0.25),
            zeta2: C64::new(-0.3, 0.7),
            xi: vec![C64::new(0.2, -0.1), C64::new(-0.4, 0.3)],
            psi_scale: 1.0,
        }
    }
}

impl ConstructionParams {
    /// Default parameters resized to a target of dimension `dim`: the
    /// two-dimensional pattern is repeated on every complex line.
    pub fn for_dim(dim: usize) -> Self {
        let base = Self::default();
        let rep = |v: &[i64]| v.iter().cycle().take(dim).copied().collect::<Vec<_>>();
        Self {
            winding_t: rep(&base.winding_t),
            offset: base.offset.iter().cycle().take(dim).copied().collect(),
            xi: base.xi.iter().cycle().take(dim).copied().collect(),
            ..base
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    pub field: SuperField,
    /// zero winding: the map is constant and every induced field vanishes
    pub degenerate: bool,
    /// `½∫|dφ|²` of the linear map, in closed form
    pub analytic_energy: f64,
}

pub fn construct(grid: &TorusGrid, target: &TargetSpec, params: &ConstructionParams) -> Result<Construction> {
    if !target.is_flat() {
        return Err(Error::Unsupported(format!(
            "explicit supercurves are only constructed on flat tori, not on {:?}",
            target.kind
        )));
    }
    let built = target.build()?;
    let d = built.dim();
    for (name, len) in [
        ("winding_t", params.winding_t.len()),
        ("offset", params.offset.len()),
        ("xi", params.xi.len()),
    ] {
        if len != d {
            return Err(Error::Config(format!("{name} has {len} entries, target has dimension {d}")));
        }
    }
    if !params.psi_scale.is_finite() {
        return Err(Error::Config("psi_scale must be finite".into()));
    }
    let period = built
        .lattice_period()
        .ok_or_else(|| Error::Unsupported("flat target without a lattice".into()))?;
    let b: Vec<f64> = params.winding_t.iter().map(|&m| m as f64 * period / grid.p_t()).collect();
    let j = standard_j(d);
    let a: Vec<f64> = (0..d).map(|r| -(0..d).map(|c| j[r][c] * b[c]).sum::<f64>()).collect();
    for (k, ak) in a.iter().enumerate() {
        let w = ak * grid.p_s() / period;
        if (w - w.round()).abs() > 1e-12 * w.abs().max(1.0) {
            return Err(Error::Unsupported(format!(
                "winding {:?} forces a non-lattice s-period {w} in component {k}; choose P_s/P_t accordingly",
                params.winding_t
            )));
        }
    }
    let phi = MapField::linear(grid, &a, &b, &params.offset)?;
    let unit = ConformalFactor::unit(grid);
    let pb = Pullback::new(grid, built.as_ref(), &unit, &phi)?;
    let zeta = |z: C64| vec![z * params.psi_scale; grid.len()];
    let psi1 = pb.induced_psi(&zeta(params.zeta1))?;
    let psi2 = pb.induced_psi(&zeta(params.zeta2))?;
    let xi = crate::fields::VectorField::constant(grid, &params.xi);
    let energy = 0.5 * grid.area() * a.iter().chain(&b).map(|v| v * v).sum::<f64>();
    Ok(Construction {
        field: SuperField { phi, psi1, psi2, xi },
        degenerate: params.winding_t.iter().all(|&m| m == 0),
        analytic_energy: energy,
    })
}
