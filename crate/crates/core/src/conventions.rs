//! Global sign and measure constants.
//!
//! Every place that turns a 2-form on the worldsheet into a `ds dt` density
//! goes through these values, so a change of convention touches one file.

use num_complex::Complex64;

/// `dz ∧ dz̄ = DZ_WEDGE_DZBAR · ds ∧ dt`.
pub const DZ_WEDGE_DZBAR: Complex64 = Complex64::new(0.0, -2.0);

/// Phase multiplying the literal Dirac term `-2i B(ψ, D̸ψ)` of the first
/// super action.
///
/// The literal term, integrated against `dvol`, differs from the Berezin
/// integral of the superfield Lagrangian by a constant phase. The value below
/// is the one that makes the two agree for a flat target with `λ ≡ 1` and a
/// single plane-wave spinor, where both sides are available in closed form
/// (see `calibration` tests in `action`). It is frozen here and used for every
/// target and every `λ`.
pub const DIRAC_MEASURE_PHASE: Complex64 = Complex64::new(0.0, -1.0);

/// `-i · dz∧dz̄` reduced to `ds dt`: the prefactor of the Berezin density in
/// the superfield Lagrangian.
pub fn lagrangian_prefactor() -> Complex64 {
    Complex64::new(0.0, -1.0) * DZ_WEDGE_DZBAR
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn i_dz_dzbar_is_twice_dsdt() {
        let v = Complex64::new(0.0, 1.0) * DZ_WEDGE_DZBAR;
        assert_eq!(v, Complex64::new(2.0, 0.0));
    }

    #[test]
    fn lagrangian_prefactor_is_minus_two() {
        assert_eq!(lagrangian_prefactor(), Complex64::new(-2.0, 0.0));
    }
}
