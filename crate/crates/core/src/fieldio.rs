//! On-disk field bundles.
//!
//! Every real component is a flat little-endian `f64` file in s-major order
//! (`idx = i_s·n_t + i_t`). A JSON sidecar per field records the grid and the
//! component files; complex fields store real and imaginary parts as separate
//! components. A `manifest.json` maps the roles `phi`, `psi1`, `psi2`, `xi`
//! to their sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{MapField, SpinorVectorField, SuperField, VectorField};
use crate::worldsheet::{GridSpec, Scheme, TorusGrid};

pub const MANIFEST: &str = "manifest.json";
const LAYOUT: &str = "s-major";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub n_s: usize,
    pub n_t: usize,
    #[serde(rename = "P_s")]
    pub p_s: f64,
    #[serde(rename = "P_t")]
    pub p_t: f64,
    /// component files, relative to the sidecar
    pub components: Vec<String>,
    pub layout: String,
    #[serde(default)]
    pub complex: bool,
    /// winding part of a map field: `φ = s·slope_s + t·slope_t + periodic`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_s: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_t: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub phi: String,
    pub psi1: String,
    pub psi2: String,
    pub xi: String,
}

fn write_component(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let bytes: Vec<u8> = values.flat_map(f64::to_le_bytes).collect();
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_component(path: &Path, len: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() != 8 * len {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            msg: format!("expected {} bytes for {len} samples, found {}", 8 * len, bytes.len()),
        });
    }
    let out: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            msg: "non-finite sample".into(),
        });
    }
    Ok(out)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(v)?).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Malformed {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })
}

fn sidecar(grid: &TorusGrid, components: Vec<String>, complex: bool) -> Sidecar {
    Sidecar {
        n_s: grid.n_s(),
        n_t: grid.n_t(),
        p_s: grid.p_s(),
        p_t: grid.p_t(),
        components,
        layout: LAYOUT.into(),
        complex,
        slope_s: None,
        slope_t: None,
    }
}

fn write_map(dir: &Path, role: &str, grid: &TorusGrid, phi: &MapField) -> Result<String> {
    let mut names = Vec::new();
    for (k, comp) in phi.periodic().iter().enumerate() {
        let name = format!("{role}_{k}.f64");
        let (ss, st) = (phi.slope_s()[k], phi.slope_t()[k]);
        write_component(
            &dir.join(&name),
            comp.iter().enumerate().map(|(i, p)| {
                let (s, t) = grid.coords(i);
                p + ss * s + st * t
            }),
        )?;
        names.push(name);
    }
    let mut sc = sidecar(grid, names, false);
    sc.slope_s = Some(phi.slope_s().to_vec());
    sc.slope_t = Some(phi.slope_t().to_vec());
    let name = format!("{role}.json");
    write_json(&dir.join(&name), &sc)?;
    Ok(name)
}

fn write_vector(dir: &Path, role: &str, grid: &TorusGrid, v: &VectorField) -> Result<String> {
    let mut names = Vec::new();
    for (k, comp) in v.components().iter().enumerate() {
        for (part, f) in [("re", (|c: &C64| c.re) as fn(&C64) -> f64), ("im", |c: &C64| c.im)] {
            let name = format!("{role}_{k}_{part}.f64");
            write_component(&dir.join(&name), comp.iter().map(f))?;
            names.push(name);
        }
    }
    let name = format!("{role}.json");
    write_json(&dir.join(&name), &sidecar(grid, names, true))?;
    Ok(name)
}

/// Writes `sf` into `dir` (created if needed) and returns the manifest.
pub fn write_super_field(dir: &Path, grid: &TorusGrid, sf: &SuperField) -> Result<Manifest> {
    sf.check(grid)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let manifest = Manifest {
        phi: write_map(dir, "phi", grid, &sf.phi)?,
        psi1: write_vector(dir, "psi1", grid, &sf.psi1.theta)?,
        psi2: write_vector(dir, "psi2", grid, &sf.psi2.theta)?,
        xi: write_vector(dir, "xi", grid, &sf.xi)?,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

fn load_sidecar(path: &Path) -> Result<Sidecar> {
    let sc: Sidecar = read_json(path)?;
    if sc.layout != LAYOUT {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            msg: format!("layout `{}` is not `{LAYOUT}`", sc.layout),
        });
    }
    Ok(sc)
}

fn same_grid(a: &Sidecar, b: &Sidecar) -> bool {
    a.n_s == b.n_s && a.n_t == b.n_t && a.p_s == b.p_s && a.p_t == b.p_t
}

fn read_vector(dir: &Path, sc: &Sidecar, path: &Path, dim: usize) -> Result<VectorField> {
    if !sc.complex || sc.components.len() != 2 * dim {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            msg: format!("expected {} complex components, found {}", dim, sc.components.len()),
        });
    }
    let n = sc.n_s * sc.n_t;
    let mut comps = Vec::with_capacity(dim);
    for pair in sc.components.chunks_exact(2) {
        let re = read_component(&dir.join(&pair[0]), n)?;
        let im = read_component(&dir.join(&pair[1]), n)?;
        comps.push(re.into_iter().zip(im).map(|(a, b)| C64::new(a, b)).collect());
    }
    VectorField::from_components(comps)
}

/// Reads a bundle written by [`write_super_field`]. The returned grid uses
/// `scheme`, which the files do not record.
pub fn read_super_field(dir: &Path, scheme: Scheme) -> Result<(TorusGrid, SuperField)> {
    let manifest: Manifest = read_json(&dir.join(MANIFEST))?;
    let phi_path = dir.join(&manifest.phi);
    let phi_sc = load_sidecar(&phi_path)?;
    let grid = TorusGrid::from_spec(GridSpec {
        n_s: phi_sc.n_s,
        n_t: phi_sc.n_t,
        p_s: phi_sc.p_s,
        p_t: phi_sc.p_t,
        scheme,
    })
    .map_err(|e| Error::Malformed {
        path: phi_path.clone(),
        msg: e.to_string(),
    })?;
    let dim = phi_sc.components.len();
    let zeros = vec![0.0; dim];
    let slope_s = phi_sc.slope_s.clone().unwrap_or_else(|| zeros.clone());
    let slope_t = phi_sc.slope_t.clone().unwrap_or(zeros);
    if slope_s.len() != dim || slope_t.len() != dim {
        return Err(Error::Malformed {
            path: phi_path,
            msg: "slope length differs from component count".into(),
        });
    }
    let mut periodic = Vec::with_capacity(dim);
    for (k, name) in phi_sc.components.iter().enumerate() {
        let mut v = read_component(&dir.join(name), grid.len())?;
        for (i, x) in v.iter_mut().enumerate() {
            let (s, t) = grid.coords(i);
            *x -= slope_s[k] * s + slope_t[k] * t;
        }
        periodic.push(v);
    }
    let phi = MapField::new(&grid, &slope_s, &slope_t, periodic).map_err(|e| Error::Malformed {
        path: phi_path.clone(),
        msg: e.to_string(),
    })?;
    let mut rest = Vec::with_capacity(3);
    for name in [&manifest.psi1, &manifest.psi2, &manifest.xi] {
        let path: PathBuf = dir.join(name);
        let sc = load_sidecar(&path)?;
        if !same_grid(&sc, &phi_sc) {
            return Err(Error::Malformed {
                path,
                msg: "grid differs from the map's grid".into(),
            });
        }
        rest.push(read_vector(dir, &sc, &path, dim)?);
    }
    let xi = rest.pop().expect("three fields");
    let psi2 = rest.pop().expect("three fields");
    let psi1 = rest.pop().expect("three fields");
    Ok((
        grid,
        SuperField {
            phi,
            psi1: SpinorVectorField::new(psi1),
            psi2: SpinorVectorField::new(psi2),
            xi,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::FieldRng;
    use crate::target::{FlatTorus, SphereChart};

    fn random_bundle(n_s: usize, n_t: usize) -> (TorusGrid, SuperField) {
        let grid = TorusGrid::new(n_s, n_t, 1.0, 2.0, Scheme::Spectral).unwrap();
        let flat = FlatTorus::new(4).unwrap();
        let sf = FieldRng::new(3, 2).super_field(&grid, &flat, 0.5).unwrap();
        (grid, sf)
    }

    #[test]
    fn round_trip_preserves_fields() {
        let (grid, sf) = random_bundle(8, 12);
        let dir = tempfile::tempdir().unwrap();
        write_super_field(dir.path(), &grid, &sf).unwrap();
        let (g2, back) = read_super_field(dir.path(), Scheme::Spectral).unwrap();
        assert_eq!(g2, grid);
        assert_eq!(back.psi1.theta, sf.psi1.theta);
        assert_eq!(back.psi2.theta, sf.psi2.theta);
        assert_eq!(back.xi, sf.xi);
        assert_eq!(back.phi.slope_s(), sf.phi.slope_s());
        for i in 0..grid.len() {
            let (a, b) = (back.phi.value(&grid, i), sf.phi.value(&grid, i));
            for k in 0..4 {
                assert!((a[k] - b[k]).abs() <= 1e-15 * (1.0 + b[k].abs()));
            }
        }
    }

    #[test]
    fn layout_is_s_major_little_endian() {
        let grid = TorusGrid::new(8, 10, 1.0, 1.0, Scheme::Spectral).unwrap();
        let phi = MapField::from_fn(&grid, 2, |s, t| {
            let mut x = [0.0; 4];
            x[0] = s;
            x[1] = t;
            x
        })
        .unwrap();
        let sf = SuperField::bosonic(&grid, phi);
        let dir = tempfile::tempdir().unwrap();
        let m = write_super_field(dir.path(), &grid, &sf).unwrap();
        let bytes = fs::read(dir.path().join("phi_1.f64")).unwrap();
        assert_eq!(bytes.len(), 8 * 80);
        // second sample is (i_s, i_t) = (0, 1)
        let v = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
        assert_eq!(v, 0.1);
        let sc: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join(&m.phi)).unwrap()).unwrap();
        assert_eq!(sc["layout"], "s-major");
        assert_eq!(sc["n_t"], 10);
        assert_eq!(sc["P_s"], 1.0);
        let man: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join(MANIFEST)).unwrap()).unwrap();
        assert_eq!(man["xi"], "xi.json");
    }

    #[test]
    fn truncated_component_names_the_file() {
        let (grid, sf) = random_bundle(8, 8);
        let dir = tempfile::tempdir().unwrap();
        write_super_field(dir.path(), &grid, &sf).unwrap();
        let bad = dir.path().join("psi2_1_im.f64");
        fs::write(&bad, [0u8; 12]).unwrap();
        match read_super_field(dir.path(), Scheme::Spectral) {
            Err(Error::Malformed { path, .. }) => assert_eq!(path, bad),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_files_are_io_errors() {
        let (grid, sf) = random_bundle(8, 8);
        let dir = tempfile::tempdir().unwrap();
        write_super_field(dir.path(), &grid, &sf).unwrap();
        let gone = dir.path().join("xi_0_re.f64");
        fs::remove_file(&gone).unwrap();
        match read_super_field(dir.path(), Scheme::Spectral) {
            Err(Error::Io { path, .. }) => assert_eq!(path, gone),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            read_super_field(&dir.path().join("nowhere"), Scheme::Spectral),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn mismatched_sidecars_rejected() {
        let (grid, sf) = random_bundle(8, 8);
        let dir = tempfile::tempdir().unwrap();
        write_super_field(dir.path(), &grid, &sf).unwrap();
        let p = dir.path().join("psi1.json");
        let mut sc: Sidecar = read_json(&p).unwrap();
        sc.n_t = 16;
        write_json(&p, &sc).unwrap();
        assert!(matches!(read_super_field(dir.path(), Scheme::Spectral), Err(Error::Malformed { .. })));
        sc.n_t = 8;
        sc.layout = "t-major".into();
        write_json(&p, &sc).unwrap();
        assert!(matches!(read_super_field(dir.path(), Scheme::Spectral), Err(Error::Malformed { .. })));
    }

    #[test]
    fn chart_maps_without_winding() {
        let grid = TorusGrid::square(8, Scheme::Central2).unwrap();
        let sphere = SphereChart::new();
        let sf = FieldRng::new(1, 2).super_field(&grid, &sphere, 0.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_super_field(dir.path(), &grid, &sf).unwrap();
        let (g2, back) = read_super_field(dir.path(), Scheme::Central2).unwrap();
        assert_eq!(g2.scheme(), Scheme::Central2);
        assert!(back.phi.is_periodic());
        assert_eq!(back.phi.periodic(), sf.phi.periodic());
    }
}
