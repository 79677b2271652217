//! Seeded band-limited random fields.
//!
//! Every field is a trigonometric polynomial with frequencies `|k_s|, |k_t| ≤ K`
//! and `K ≤ min(n_s, n_t)/4`, so the spectral scheme resolves it exactly and
//! the finite-difference schemes see a smooth function.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::action::Tangent;
use crate::error::{Error, Result};
use crate::fields::{MapField, SpinorVectorField, SuperField, VectorField};
use crate::target::Target;
use crate::worldsheet::TorusGrid;

/// Maps into non-periodic charts are rescaled to stay within this radius.
pub const CHART_CONFINE: f64 = 2.5;

#[derive(Debug, Clone)]
pub struct FieldRng {
    rng: ChaCha8Rng,
    k_max: usize,
}

impl FieldRng {
    pub fn new(seed: u64, k_max: usize) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            k_max,
        }
    }

    /// Largest admissible frequency bound for `grid`.
    pub fn max_band(grid: &TorusGrid) -> usize {
        grid.n_s().min(grid.n_t()) / 4
    }

    fn check(&self, grid: &TorusGrid) -> Result<()> {
        if self.k_max == 0 || self.k_max > Self::max_band(grid) {
            return Err(Error::Config(format!(
                "band limit {} outside 1..={} for a {}x{} grid",
                self.k_max,
                Self::max_band(grid),
                grid.n_s(),
                grid.n_t()
            )));
        }
        Ok(())
    }

    /// Real periodic field with mode amplitudes decaying like `1/(1 + |k|²)`.
    pub fn scalar(&mut self, grid: &TorusGrid, amplitude: f64) -> Result<Vec<f64>> {
        self.check(grid)?;
        let k = self.k_max as i64;
        let mut out = vec![0.0; grid.len()];
        for ks in -k..=k {
            for kt in 0..=k {
                if kt == 0 && ks < 0 {
                    continue;
                }
                let w = amplitude / (1.0 + (ks * ks + kt * kt) as f64);
                let a = self.rng.gen_range(-1.0..1.0) * w;
                let b = self.rng.gen_range(-1.0..1.0) * w;
                for (idx, o) in out.iter_mut().enumerate() {
                    let (s, t) = grid.coords(idx);
                    let arg = 2.0 * PI * (ks as f64 * s / grid.p_s() + kt as f64 * t / grid.p_t());
                    *o += a * arg.cos() + b * arg.sin();
                }
            }
        }
        Ok(out)
    }

    pub fn section(&mut self, grid: &TorusGrid, dim: usize, amplitude: f64) -> Result<VectorField> {
        let mut comps = Vec::with_capacity(dim);
        for _ in 0..dim {
            let re = self.scalar(grid, amplitude)?;
            let im = self.scalar(grid, amplitude)?;
            comps.push(re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect());
        }
        VectorField::from_components(comps)
    }

    pub fn real_section(&mut self, grid: &TorusGrid, dim: usize, amplitude: f64) -> Result<VectorField> {
        let comps = (0..dim)
            .map(|_| Ok(self.scalar(grid, amplitude)?.into_iter().map(|v| Complex64::new(v, 0.0)).collect()))
            .collect::<Result<Vec<_>>>()?;
        VectorField::from_components(comps)
    }

    /// Random map: integer windings in `{-1, 0, 1}` plus a periodic part on
    /// periodic targets; a periodic map confined to `|x| ≤ CHART_CONFINE`
    /// otherwise.
    pub fn map(&mut self, grid: &TorusGrid, target: &dyn Target, amplitude: f64) -> Result<MapField> {
        let dim = target.dim();
        let periodic = (0..dim).map(|_| self.scalar(grid, amplitude)).collect::<Result<Vec<_>>>()?;
        match target.lattice_period() {
            Some(l) => {
                let mut ss = vec![0.0; dim];
                let mut st = vec![0.0; dim];
                for k in 0..dim {
                    ss[k] = self.rng.gen_range(-1i32..=1) as f64 * l / grid.p_s();
                    st[k] = self.rng.gen_range(-1i32..=1) as f64 * l / grid.p_t();
                }
                MapField::new(grid, &ss, &st, periodic)
            }
            None => {
                let r = (0..grid.len())
                    .map(|i| periodic.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
                    .fold(0.0, f64::max);
                let f = if r > CHART_CONFINE { CHART_CONFINE / r } else { 1.0 };
                let periodic = periodic.into_iter().map(|c| c.into_iter().map(|v| v * f).collect()).collect();
                MapField::new(grid, &vec![0.0; dim], &vec![0.0; dim], periodic)
            }
        }
    }

    /// Off-shell super field: random map and random complex flesh fields.
    pub fn super_field(&mut self, grid: &TorusGrid, target: &dyn Target, amplitude: f64) -> Result<SuperField> {
        let phi = self.map(grid, target, amplitude)?;
        let d = target.dim();
        Ok(SuperField {
            phi,
            psi1: SpinorVectorField::new(self.section(grid, d, amplitude)?),
            psi2: SpinorVectorField::new(self.section(grid, d, amplitude)?),
            xi: self.section(grid, d, amplitude)?,
        })
    }

    /// Random variation; the map direction is real.
    pub fn tangent(&mut self, grid: &TorusGrid, dim: usize, amplitude: f64) -> Result<Tangent> {
        Ok(Tangent {
            zeta: self.real_section(grid, dim, amplitude)?,
            gamma1: self.section(grid, dim, amplitude)?,
            gamma2: self.section(grid, dim, amplitude)?,
            chi: self.section(grid, dim, amplitude)?,
        })
    }
}
