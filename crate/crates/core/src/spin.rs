//! Angular-momentum operators for spin `L = N` in the (2N+1)-dimensional
//! representation, basis ordered |m = N⟩, |N-1⟩, …, |-N⟩.

use nalgebra::DMatrix;

use crate::linalg::{c, Operator, StateVector, C64, ZERO};

#[derive(Clone, Debug)]
pub struct SpinOps {
    pub n: usize,
    pub lx: Operator,
    pub ly: Operator,
    pub lz: Operator,
    pub raise: Operator,
    pub lower: Operator,
}

impl SpinOps {
    pub fn new(n: usize) -> Self {
        let dim = 2 * n + 1;
        let j = n as f64;
        let m_of = |k: usize| j - k as f64;
        let mut raise = DMatrix::<C64>::zeros(dim, dim);
        for k in 1..dim {
            let m = m_of(k);
            raise[(k - 1, k)] = c((j * (j + 1.0) - m * (m + 1.0)).sqrt(), 0.0);
        }
        let lower = raise.adjoint();
        let lx = (&raise + &lower) * c(0.5, 0.0);
        let ly = (&raise - &lower) * c(0.0, -0.5);
        let lz = DMatrix::from_fn(dim, dim, |r, s| if r == s { c(m_of(r), 0.0) } else { ZERO });
        Self {
            n,
            lx: Operator::from_matrix_unchecked(lx),
            ly: Operator::from_matrix_unchecked(ly),
            lz: Operator::from_matrix_unchecked(lz),
            raise: Operator::from_matrix_unchecked(raise),
            lower: Operator::from_matrix_unchecked(lower),
        }
    }

    pub fn dim(&self) -> usize {
        2 * self.n + 1
    }

    /// |L_z = N⟩
    pub fn top_z(&self) -> StateVector {
        StateVector::basis(self.dim(), 0).expect("dim >= 1")
    }

    /// |L_x = +N⟩ or |L_x = -N⟩
    pub fn extremal_x(&self, positive: bool) -> StateVector {
        let phi = if positive { 0.0 } else { std::f64::consts::PI };
        coherent_state(self.n, std::f64::consts::FRAC_PI_2, phi)
    }

    /// |L_y = N⟩
    pub fn top_y(&self) -> StateVector {
        coherent_state(
            self.n,
            std::f64::consts::FRAC_PI_2,
            std::f64::consts::FRAC_PI_2,
        )
    }
}

fn ln_binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k)
        .map(|i| ((n - i) as f64).ln() - ((i + 1) as f64).ln())
        .sum()
}

/// Spin coherent state |L·n̂ = N⟩ for polar angle `theta`, azimuth `phi`,
/// built from binomial amplitudes rather than an eigensolver so the
/// exponentially small tail components keep full relative precision.
pub fn coherent_state(n: usize, theta: f64, phi: f64) -> StateVector {
    let dim = 2 * n + 1;
    let (cos_h, sin_h) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let amps: Vec<C64> = (0..dim)
        .map(|k| {
            // k = N - m
            let up = (dim - 1 - k) as i32;
            let down = k as i32;
            let mag = if (up > 0 && cos_h == 0.0) || (down > 0 && sin_h == 0.0) {
                0.0
            } else {
                let mut ln = 0.5 * ln_binomial(2 * n, k);
                if up > 0 {
                    ln += up as f64 * cos_h.abs().ln();
                }
                if down > 0 {
                    ln += down as f64 * sin_h.abs().ln();
                }
                ln.exp() * cos_h.signum().powi(up) * sin_h.signum().powi(down)
            };
            C64::from_polar(mag, k as f64 * phi)
        })
        .collect();
    StateVector::new(amps)
        .expect("finite")
        .normalized()
        .expect("nonzero")
        .with_fixed_phase()
}
