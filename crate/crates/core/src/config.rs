//! Run configuration shared by the suite and the command-line front end.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::construct::ConstructionParams;
use crate::error::{Error, Result};
use crate::random::FieldRng;
use crate::report::Check;
use crate::target::{TargetKind, TargetSpec};
use crate::worldsheet::{GridSpec, LambdaSpec, Scheme, TorusGrid};

/// Tolerance key for the directional-derivative-versus-pairing comparison,
/// which runs as part of `el_extremality`.
pub const EL_PAIRING_KEY: &str = "el_pairing";

/// How many seeded random fields each check draws, and their shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Sampling {
    pub count: usize,
    pub amplitude: f64,
    /// frequency bound of the random trigonometric polynomials
    pub band: usize,
    /// random variations per directional-derivative check
    pub variations: usize,
    pub fd_step: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Self {
            count: 4,
            amplitude: 0.3,
            band: 3,
            variations: 10,
            fd_step: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub target: TargetSpec,
    #[serde(default)]
    pub lambda: LambdaSpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub sampling: Sampling,
    /// per-check overrides of the default tolerances
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
    /// parameters of the constructed example; sized to the target when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub construction: Option<ConstructionParams>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_seed() -> u64 {
    7
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            target: TargetSpec::default(),
            lambda: LambdaSpec::default(),
            seed: default_seed(),
            sampling: Sampling::default(),
            tolerances: BTreeMap::new(),
            construction: None,
            output_dir: default_output(),
        }
    }
}

impl RunConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        let c: RunConfig = serde_json::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::Malformed {
                path: path.to_path_buf(),
                msg: j.to_string(),
            },
            other => other,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn validate(&self) -> Result<()> {
        let grid = TorusGrid::from_spec(self.grid)?;
        self.target.build()?;
        if self.target.kind == TargetKind::PerturbedR4 && !(self.target.eps_j >= 0.0) {
            return Err(Error::Config(format!("eps_j must be non-negative, got {}", self.target.eps_j)));
        }
        self.lambda.build(&grid)?;
        let s = &self.sampling;
        if s.count == 0 || s.variations == 0 {
            return Err(Error::Config("sampling counts must be positive".into()));
        }
        if !(s.amplitude > 0.0 && s.amplitude.is_finite()) {
            return Err(Error::Config(format!("sampling amplitude must be positive, got {}", s.amplitude)));
        }
        if !(s.fd_step > 0.0 && s.fd_step.is_finite()) {
            return Err(Error::Config(format!("fd_step must be positive, got {}", s.fd_step)));
        }
        if s.band == 0 || s.band > FieldRng::max_band(&grid) {
            return Err(Error::Config(format!(
                "band {} outside 1..={} for this grid",
                s.band,
                FieldRng::max_band(&grid)
            )));
        }
        for (key, tol) in &self.tolerances {
            if key != EL_PAIRING_KEY {
                key.parse::<Check>()?;
            }
            if !(*tol > 0.0 && tol.is_finite()) {
                return Err(Error::Config(format!("tolerance for {key} must be positive, got {tol}")));
            }
        }
        if let Some(p) = &self.construction {
            if p.winding_t.len() != self.target.dim {
                return Err(Error::Config(format!(
                    "construction winding has {} entries, target has dimension {}",
                    p.winding_t.len(),
                    self.target.dim
                )));
            }
        }
        Ok(())
    }

    pub fn build_grid(&self) -> Result<TorusGrid> {
        TorusGrid::from_spec(self.grid)
    }

    pub fn construction_params(&self) -> ConstructionParams {
        self.construction
            .clone()
            .unwrap_or_else(|| ConstructionParams::for_dim(self.target.dim))
    }

    /// Relative tolerance for identities evaluated on spectral grids with a
    /// flat target, and for everything else.
    pub fn base_tolerance(&self) -> f64 {
        if self.grid.scheme == Scheme::Spectral && self.target.is_flat() {
            1e-9
        } else {
            1e-6
        }
    }

    pub fn tolerance(&self, check: Check) -> f64 {
        if let Some(t) = self.tolerances.get(check.name()) {
            return *t;
        }
        match check {
            Check::ClassicalIdentity
            | Check::LagrangianA1
            | Check::SuperIdentity
            | Check::Equivalence
            | Check::A1A2 => self.base_tolerance(),
            Check::Construction => 1e-10,
            Check::ElExtremality => 1e-6,
            Check::NijenhuisContraction | Check::OperatorEquivalence => 1e-8,
        }
    }

    /// Relative tolerance between a finite-difference derivative and the
    /// Euler–Lagrange pairing; dominated by the `O(ε²)` truncation.
    pub fn pairing_tolerance(&self) -> f64 {
        self.tolerances.get(EL_PAIRING_KEY).copied().unwrap_or(1e-4)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn empty_object_is_default() {
        let c = RunConfig::from_json("{}").unwrap();
        assert_eq!(c, RunConfig::default());
    }

    #[test]
    fn documented_target_syntax() {
        let c = RunConfig::from_json(r#"{"target": {"kind": "perturbed_r4", "dim": 4, "eps_j": 0.05}}"#).unwrap();
        assert_eq!(c.target, TargetSpec::perturbed(0.05));
        let c = RunConfig::from_json(r#"{"target": {"kind": "sphere"}}"#).unwrap();
        assert_eq!(c.target.kind, TargetKind::Sphere);
        let c = RunConfig::from_json(r#"{"lambda": {"kind": "sinusoidal", "amplitude": 0.5, "frequency": 2}}"#).unwrap();
        assert_eq!(c.lambda, LambdaSpec::Sinusoidal { amplitude: 0.5, frequency: 2 });
    }

    #[test]
    fn invalid_configs_rejected() {
        for bad in [
            r#"{"grid": {"n_s": 4, "n_t": 64, "P_s": 1, "P_t": 1}}"#,
            r#"{"grid": {"n_s": 64, "n_t": 64, "P_s": -1, "P_t": 1}}"#,
            r#"{"grid": {"n_s": 64, "n_t": 64, "P_s": 1, "P_t": 1, "scheme": "upwind"}}"#,
            r#"{"target": {"kind": "sphere", "dim": 4}}"#,
            r#"{"lambda": {"kind": "constant", "value": 0}}"#,
            r#"{"sampling": {"count": 0}}"#,
            r#"{"sampling": {"band": 40}}"#,
            r#"{"tolerances": {"equivalence": -1}}"#,
            r#"{"tolerances": {"no_such_check": 1e-3}}"#,
            r#"{"unknown_key": 1}"#,
        ] {
            assert!(RunConfig::from_json(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn tolerance_defaults_and_overrides() {
        let mut c = RunConfig::default();
        assert_eq!(c.tolerance(Check::ClassicalIdentity), 1e-9);
        c.target = TargetSpec::sphere();
        assert_eq!(c.tolerance(Check::ClassicalIdentity), 1e-6);
        c.target = TargetSpec::flat(2);
        c.grid.scheme = Scheme::Central2;
        assert_eq!(c.tolerance(Check::SuperIdentity), 1e-6);
        c.tolerances.insert("super_identity".into(), 3e-3);
        assert_eq!(c.tolerance(Check::SuperIdentity), 3e-3);
        assert_eq!(c.tolerance(Check::Construction), 1e-10);
    }

    #[test]
    fn load_reports_path() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, "{not json").unwrap();
        match RunConfig::load(&p) {
            Err(Error::Malformed { path, .. }) => assert_eq!(path, p),
            other => panic!("{other:?}"),
        }
        assert!(matches!(RunConfig::load(&dir.path().join("missing.json")), Err(Error::Io { .. })));
        RunConfig::default().save(&p).unwrap();
        assert_eq!(RunConfig::load(&p).unwrap(), RunConfig::default());
    }

    fn config() -> impl Strategy<Value = RunConfig> {
        (
            (4usize..20, 4usize..20, 0.1f64..10.0, 0.1f64..10.0, 0usize..3),
            (0usize..3, 0.0f64..0.3),
            (any::<bool>(), 0.01f64..0.99, 0u32..4, 0.1f64..5.0),
            any::<u64>(),
            (1usize..10, 1e-3f64..2.0, 1usize..3, 1e-6f64..1e-2),
            prop::collection::btree_map(prop::sample::select(vec!["equivalence", "a1_a2", "el_pairing"]), 1e-14f64..1.0, 0..3),
        )
            .prop_map(|(g, t, l, seed, s, tol)| {
                let target = match t.0 {
                    0 => TargetSpec::flat(2),
                    1 => TargetSpec::sphere(),
                    _ => TargetSpec::perturbed(t.1),
                };
                RunConfig {
                    grid: GridSpec {
                        n_s: 2 * g.0,
                        n_t: 2 * g.1,
                        p_s: g.2,
                        p_t: g.3,
                        scheme: Scheme::ALL[g.4],
                    },
                    target,
                    lambda: if l.0 {
                        LambdaSpec::Sinusoidal { amplitude: l.1, frequency: l.2 }
                    } else {
                        LambdaSpec::Constant { value: l.3 }
                    },
                    seed,
                    sampling: Sampling {
                        count: s.0,
                        amplitude: s.1,
                        band: s.2,
                        variations: s.0,
                        fd_step: s.3,
                    },
                    tolerances: tol.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
                    construction: None,
                    output_dir: PathBuf::from(format!("run-{seed}")),
                }
            })
    }

    proptest! {
        #[test]
        fn round_trip_is_lossless(c in config()) {
            c.validate().unwrap();
            let back = RunConfig::from_json(&c.to_json().unwrap()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
