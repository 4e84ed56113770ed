//! Quantum statistics of a Werner state measured in the chained bases.
//!
//! Alice measures in `{|0> +- e^{i phi_A(x)} |1>}`, Bob in
//! `{|0> +- e^{-i phi_B(y)} |1>}`. Outcome 0 is the `+` vector. On the
//! state `p |phi+><phi+| + (1 - p) I/4` this yields the correlator
//! `p cos(phi_A - phi_B)`.

use std::f64::consts::PI;

use nalgebra::{Complex, Matrix2, Matrix4, Vector2, Vector4};

use crate::error::{check_range, Error, Result};
use crate::nsbox::ConditionalBox;

/// Weight of the maximally entangled component of a Werner state.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct WernerParameter(f64);

impl WernerParameter {
    pub fn new(p: f64) -> Result<Self> {
        check_range("p", p, 0.0, 1.0, "[0, 1]")?;
        Ok(Self(p))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Chained measurement layout with `n` test settings.
///
/// Alice has settings `0..=n` (0 is the key setting), Bob has `0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MeasurementScheme {
    n: usize,
}

impl MeasurementScheme {
    pub fn chained(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::OutOfRange {
                name: "N",
                value: n as f64,
                expected: "N >= 2",
            });
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn alice_settings(&self) -> usize {
        self.n + 1
    }

    pub fn bob_settings(&self) -> usize {
        self.n
    }

    /// `pi/(2N)` for the key setting, `pi x / N` otherwise.
    pub fn alice_phase(&self, x: usize) -> f64 {
        assert!(x <= self.n, "Alice setting {x} out of range");
        if x == 0 {
            PI / (2.0 * self.n as f64)
        } else {
            PI * x as f64 / self.n as f64
        }
    }

    pub fn bob_phase(&self, y: usize) -> f64 {
        assert!(y < self.n, "Bob setting {y} out of range");
        PI * (y as f64 + 0.5) / self.n as f64
    }
}

/// Expected product of the `+-1` outcomes.
pub fn correlator(w: WernerParameter, phi_a: f64, phi_b: f64) -> f64 {
    w.0 * (phi_a - phi_b).cos()
}

/// `P(ab|xy) = (1 + (-1)^(a xor b) E(x, y)) / 4`.
pub fn quantum_box(w: WernerParameter, scheme: &MeasurementScheme) -> ConditionalBox {
    let n_a = scheme.alice_settings();
    let n_b = scheme.bob_settings();
    let mut e = vec![0.0; n_a * n_b];
    for x in 0..n_a {
        for y in 0..n_b {
            e[x * n_b + y] = correlator(w, scheme.alice_phase(x), scheme.bob_phase(y));
        }
    }
    ConditionalBox::from_fn(n_a, n_b, |a, b, x, y| {
        let sign = if a == b { 1.0 } else { -1.0 };
        0.25 * (1.0 + sign * e[x * n_b + y])
    })
}

/// Quantum box for Werner weight `p` on the chained scheme of length `n`.
pub fn werner_box(p: f64, n: usize) -> Result<ConditionalBox> {
    Ok(quantum_box(WernerParameter::new(p)?, &MeasurementScheme::chained(n)?))
}

fn basis_projector(phase: Complex<f64>, outcome: usize) -> Matrix2<Complex<f64>> {
    let s = if outcome == 0 { 1.0 } else { -1.0 };
    let norm = std::f64::consts::FRAC_1_SQRT_2;
    let ket = Vector2::new(Complex::new(norm, 0.0), phase * s * norm);
    ket * ket.adjoint()
}

/// Born-rule probabilities `[a][b]` computed from the explicit 4x4 density
/// matrix. Independent of [`correlator`]; used to cross-check it.
pub fn density_matrix_oracle(w: WernerParameter, phi_a: f64, phi_b: f64) -> [[f64; 2]; 2] {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let zero = Complex::new(0.0, 0.0);
    // |phi+> in the |00>, |01>, |10>, |11> basis, Alice's qubit first.
    let bell = Vector4::new(Complex::new(h, 0.0), zero, zero, Complex::new(h, 0.0));
    let p = w.0;
    let rho: Matrix4<Complex<f64>> =
        bell * bell.adjoint() * Complex::new(p, 0.0) + Matrix4::identity() * Complex::new((1.0 - p) / 4.0, 0.0);

    let alice_phase = Complex::from_polar(1.0, phi_a);
    let bob_phase = Complex::from_polar(1.0, -phi_b);
    let mut out = [[0.0; 2]; 2];
    for (a, row) in out.iter_mut().enumerate() {
        for (b, entry) in row.iter_mut().enumerate() {
            let joint: Matrix4<Complex<f64>> =
                basis_projector(alice_phase, a).kronecker(&basis_projector(bob_phase, b));
            *entry = (rho * joint).trace().re;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(p: f64) -> WernerParameter {
        WernerParameter::new(p).unwrap()
    }

    #[test]
    fn rejects_invalid_parameters() {
        assert!(WernerParameter::new(1.2).is_err());
        assert!(WernerParameter::new(f64::NAN).is_err());
        assert!(MeasurementScheme::chained(1).is_err());
    }

    #[test]
    fn scheme_phases() {
        let s = MeasurementScheme::chained(4).unwrap();
        assert_eq!(s.alice_phase(0), PI / 8.0);
        assert_eq!(s.alice_phase(3), 3.0 * PI / 4.0);
        assert_eq!(s.bob_phase(0), PI / 8.0);
        assert_eq!(s.bob_phase(2), 2.5 * PI / 4.0);
    }

    #[test]
    fn correlator_examples() {
        assert_eq!(correlator(w(1.0), 0.3, 0.3), 1.0);
        assert_eq!(correlator(w(0.0), 0.1, 2.0), 0.0);
        for n in 2..8 {
            let s = MeasurementScheme::chained(n).unwrap();
            let e = correlator(w(0.73), s.alice_phase(0), s.bob_phase(0));
            assert!((e - 0.73).abs() < 1e-15);
        }
    }

    #[test]
    fn maximally_mixed_box_is_uniform() {
        let bx = werner_box(0.0, 2).unwrap();
        assert_eq!(bx.table().len(), 24);
        assert!(bx.table().iter().all(|&p| p == 0.25));
    }

    #[test]
    fn oracle_same_basis_is_perfectly_correlated() {
        let probs = density_matrix_oracle(w(1.0), 0.0, 0.0);
        assert!((probs[0][0] + probs[1][1] - 1.0).abs() < 1e-15);
        assert!((probs[0][1] + probs[1][0]).abs() < 1e-15);
    }

    #[test]
    fn oracle_n2_clause_disagreement() {
        // Frozen from the 4x4 trace: setting pair (x=1, y=0) of the N=2 scheme.
        let s = MeasurementScheme::chained(2).unwrap();
        let probs = density_matrix_oracle(w(1.0), s.alice_phase(1), s.bob_phase(0));
        let differ = probs[0][1] + probs[1][0];
        assert!((differ - (1.0 - (PI / 4.0).cos()) / 2.0).abs() < 1e-12);
        assert!((differ - 0.146_446_609_406_726_2).abs() < 1e-12);
    }

    #[test]
    fn half_mixed_outcomes_are_bounded() {
        for &(pa, pb) in &[(0.0, 0.0), (0.4, 2.1), (PI, -1.0), (1.3, 1.3)] {
            let probs = density_matrix_oracle(w(0.5), pa, pb);
            for row in probs {
                for v in row {
                    assert!((0.125 - 1e-15..=0.375 + 1e-15).contains(&v), "{v}");
                }
            }
        }
    }
}
