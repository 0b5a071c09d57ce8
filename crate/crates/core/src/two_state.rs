//! Two-states: operators carrying both the pre-selected and the
//! post-selected condition of a system.
//!
//! A generic two-state is |ψ₁⟩⟨ψ₂| normalized to unit trace. General
//! two-states are linear combinations of these; only those with nonzero
//! trace describe physically realizable conditions.

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{c, check_dim, Operator, StateVector, ALGEBRAIC_TOL, C64, EIGEN_TOL};

/// Operational cutoff for the non-orthogonality restriction.
pub const EPS_PHYS: f64 = 1e-10;
/// Traces below this (before normalization) trigger a conditioning warning.
pub const CONDITIONING_WARN: f64 = 1e-6;

const RANK_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct TwoState {
    op: Operator,
    trace: C64,
}

impl TwoState {
    pub fn new(op: Operator) -> Self {
        let trace = op.trace();
        Self { op, trace }
    }

    pub fn operator(&self) -> &Operator {
        &self.op
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        self.op.matrix()
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn trace(&self) -> C64 {
        self.trace
    }

    /// Membership in the physical subspace (nonzero trace).
    pub fn is_physical(&self) -> bool {
        self.trace.norm() > EPS_PHYS
    }

    pub fn is_normalized(&self) -> bool {
        (self.trace - c(1.0, 0.0)).norm() <= ALGEBRAIC_TOL
    }

    /// Rescales to unit trace.
    pub fn normalized(&self) -> Result<TwoState> {
        let t = self.trace.norm();
        if t == 0.0 {
            return Err(Error::NearOrthogonal { trace: t });
        }
        if t < CONDITIONING_WARN {
            warn!("normalizing a two-state with |tr| = {t:.3e}; entries will be large");
        }
        Ok(TwoState::new(self.op.scale(self.trace.inv())))
    }

    /// The time-reversed two-state ϱ̂†.
    pub fn adjoint(&self) -> TwoState {
        TwoState::new(self.op.adjoint())
    }

    pub fn scale(&self, z: C64) -> TwoState {
        TwoState::new(self.op.scale(z))
    }

    pub fn add(&self, other: &TwoState) -> Result<TwoState> {
        Ok(TwoState::new(self.op.plus(&other.op)?))
    }

    pub fn tensor(&self, other: &TwoState) -> Result<TwoState> {
        Ok(TwoState::new(self.op.tensor(&other.op)?))
    }

    /// Linear combination Σ_k w_k ϱ̂_k.
    pub fn combination(terms: &[(C64, TwoState)]) -> Result<TwoState> {
        let (w0, first) = terms
            .first()
            .ok_or_else(|| Error::Invalid("empty combination".into()))?;
        let mut acc = first.op.scale(*w0);
        for (w, r) in &terms[1..] {
            acc = acc.plus(&r.op.scale(*w))?;
        }
        Ok(TwoState::new(acc))
    }
}

/// Normalized generic two-state |ψ₁⟩⟨ψ₂| / ⟨ψ₂|ψ₁⟩.
pub fn make_generic(psi1: &StateVector, psi2: &StateVector) -> Result<TwoState> {
    make_generic_with_cutoff(psi1, psi2, EPS_PHYS)
}

/// As [`make_generic`] with an explicit non-orthogonality cutoff, applied
/// to the overlap of the normalized conditions.
pub fn make_generic_with_cutoff(
    psi1: &StateVector,
    psi2: &StateVector,
    eps: f64,
) -> Result<TwoState> {
    check_dim(psi1.dim(), psi2.dim())?;
    let overlap = psi2.inner(psi1)?;
    let scale = psi1.norm() * psi2.norm();
    if scale == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let rel = overlap.norm() / scale;
    if rel <= eps || overlap.norm() == 0.0 {
        return Err(Error::Unphysical { overlap: rel });
    }
    // callers lowering the cutoff have opted into small overlaps
    if rel < CONDITIONING_WARN && eps >= EPS_PHYS {
        warn!("nearly orthogonal conditions: |<psi2|psi1>| = {rel:.3e}");
    }
    Ok(TwoState::new(psi1.outer(psi2).scale(overlap.inv())))
}

/// ⟨ϱ̂₁, ϱ̂₂⟩ = tr(ϱ̂₁† ϱ̂₂)
pub fn inner(r1: &TwoState, r2: &TwoState) -> Result<C64> {
    check_dim(r1.dim(), r2.dim())?;
    Ok(r1.matrix().dotc(r2.matrix()))
}

/// A pair of orthonormal bases S₁ = {|α⟩}, S₂ = {|β⟩} with no orthogonal
/// cross pairs, spanning the normalized two-states ϱ̂_αβ.
#[derive(Clone, Debug)]
pub struct TwoStateBasis {
    s1: Vec<StateVector>,
    s2: Vec<StateVector>,
    /// overlaps[(α, β)] = ⟨β|α⟩
    overlaps: DMatrix<C64>,
}

impl TwoStateBasis {
    pub fn new(s1: Vec<StateVector>, s2: Vec<StateVector>) -> Result<Self> {
        let dim = s1
            .first()
            .map(|v| v.dim())
            .ok_or_else(|| Error::InvalidBasis("empty basis".into()))?;
        for (name, set) in [("S1", &s1), ("S2", &s2)] {
            if set.len() != dim {
                return Err(Error::InvalidBasis(format!(
                    "{name} has {} vectors for dimension {dim}",
                    set.len()
                )));
            }
            for (i, u) in set.iter().enumerate() {
                check_dim(dim, u.dim())?;
                for (j, v) in set.iter().enumerate().skip(i) {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    if (u.inner(v)? - c(expect, 0.0)).norm() > EIGEN_TOL {
                        return Err(Error::InvalidBasis(format!("{name} is not orthonormal")));
                    }
                }
            }
        }
        let mut overlaps = DMatrix::zeros(dim, dim);
        for (a, alpha) in s1.iter().enumerate() {
            for (b, beta) in s2.iter().enumerate() {
                let ov = beta.inner(alpha)?;
                if ov.norm() <= EPS_PHYS {
                    return Err(Error::InvalidBasis(format!(
                        "<beta_{b}|alpha_{a}> = 0: cross elements must be non-orthogonal"
                    )));
                }
                overlaps[(a, b)] = ov;
            }
        }
        Ok(Self { s1, s2, overlaps })
    }

    pub fn dim(&self) -> usize {
        self.s1.len()
    }

    pub fn first(&self) -> &[StateVector] {
        &self.s1
    }

    pub fn second(&self) -> &[StateVector] {
        &self.s2
    }

    /// ⟨β_b|α_a⟩
    pub fn overlap(&self, a: usize, b: usize) -> Result<C64> {
        self.check_labels(a, b)?;
        Ok(self.overlaps[(a, b)])
    }

    fn check_labels(&self, a: usize, b: usize) -> Result<()> {
        for label in [a, b] {
            if label >= self.dim() {
                return Err(Error::InvalidLabel {
                    label,
                    dim: self.dim(),
                });
            }
        }
        Ok(())
    }

    /// Normalized basis element ϱ̂_ab = |a⟩⟨b| / ⟨b|a⟩.
    pub fn element(&self, a: usize, b: usize) -> Result<TwoState> {
        self.check_labels(a, b)?;
        let op = self.s1[a]
            .outer(&self.s2[b])
            .scale(self.overlaps[(a, b)].inv());
        Ok(TwoState::new(op))
    }

    /// ⟨ϱ̂_ab, ϱ̂_ab⟩ = 1 / |⟨a|b⟩|²
    pub fn element_norm_sqr(&self, a: usize, b: usize) -> Result<f64> {
        Ok(1.0 / self.overlap(a, b)?.norm_sqr())
    }

    /// Σ_ab ϱ(a,b) ϱ̂_ab
    pub fn resum(&self, amplitudes: &[TwoAmplitude]) -> Result<TwoState> {
        let terms = amplitudes
            .iter()
            .map(|t| Ok((t.value, self.element(t.a_index, t.b_index)?)))
            .collect::<Result<Vec<_>>>()?;
        TwoState::combination(&terms)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoAmplitude {
    pub a_index: usize,
    pub b_index: usize,
    pub value: C64,
}

/// ϱ(a,b) = ⟨ϱ̂_ab, ϱ̂⟩ / ⟨ϱ̂_ab, ϱ̂_ab⟩ = ⟨a|ϱ̂|b⟩⟨b|a⟩
pub fn two_amplitude(r: &TwoState, basis: &TwoStateBasis, a: usize, b: usize) -> Result<C64> {
    check_dim(basis.dim(), r.dim())?;
    let ov = basis.overlap(a, b)?;
    let elem = r.operator().sandwich(&basis.s1[a], &basis.s2[b])?;
    Ok(elem * ov)
}

/// All two-amplitudes of `r` in `basis`.
pub fn expansion(r: &TwoState, basis: &TwoStateBasis) -> Result<Vec<TwoAmplitude>> {
    let mut out = Vec::with_capacity(basis.dim() * basis.dim());
    for a in 0..basis.dim() {
        for b in 0..basis.dim() {
            out.push(TwoAmplitude {
                a_index: a,
                b_index: b,
                value: two_amplitude(r, basis, a, b)?,
            });
        }
    }
    Ok(out)
}

fn norm_sqr(r: &TwoState) -> Result<f64> {
    let n = r.matrix().norm_squared();
    if n == 0.0 {
        return Err(Error::ZeroNorm);
    }
    Ok(n)
}

/// ρ_in = ϱ̂ϱ̂† / ⟨ϱ̂,ϱ̂⟩
pub fn rho_in(r: &TwoState) -> Result<Operator> {
    let n = norm_sqr(r)?;
    Ok((r.operator() * &r.operator().adjoint()).scale(c(1.0 / n, 0.0)))
}

/// ρ_out = ϱ̂†ϱ̂ / ⟨ϱ̂,ϱ̂⟩
pub fn rho_out(r: &TwoState) -> Result<Operator> {
    let n = norm_sqr(r)?;
    Ok((&r.operator().adjoint() * r.operator()).scale(c(1.0 / n, 0.0)))
}

/// Singular values in descending order.
pub(crate) fn singular_values(op: &Operator) -> Vec<f64> {
    let mut s: Vec<f64> = op
        .matrix()
        .clone()
        .svd(false, false)
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub(crate) fn is_rank_one(op: &Operator) -> bool {
    let s = singular_values(op);
    match s.as_slice() {
        [] => false,
        [s0] => *s0 > 0.0,
        [s0, s1, ..] => *s0 > 0.0 && *s1 <= RANK_TOL * s0,
    }
}

/// Generic (ket-bra) two-states satisfy tr(ϱ̂²) = (tr ϱ̂)²; the rank-one
/// requirement excludes traceless nilpotent cases that satisfy it trivially.
pub fn is_generic(r: &TwoState) -> bool {
    let sq = (r.operator() * r.operator()).trace();
    let t = r.trace();
    let scale = r.matrix().norm_squared().max(1.0);
    (sq - t * t).norm() <= 1e-10 * scale && is_rank_one(r.operator())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Keep {
    First,
    Second,
}

/// Reduced effective two-state: partial trace over the discarded factor
/// of a two-state on C^{d_a} ⊗ C^{d_b}.
pub fn reduce(r_total: &TwoState, dims: (usize, usize), keep: Keep) -> Result<TwoState> {
    let (d_a, d_b) = dims;
    if d_a.checked_mul(d_b) != Some(r_total.dim()) {
        return Err(Error::DimensionMismatch {
            expected: r_total.dim(),
            found: d_a.saturating_mul(d_b),
        });
    }
    let op = r_total
        .operator()
        .partial_trace(d_a, d_b, keep == Keep::First)?;
    Ok(TwoState::new(op))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eig_hermitian, random_basis, random_state, sigma_x, sigma_z, ONE, ZERO};
    use std::f64::consts::FRAC_1_SQRT_2 as S;

    fn up_x() -> StateVector {
        StateVector::from_real(&[S, S]).unwrap()
    }
    fn up_y() -> StateVector {
        StateVector::new(vec![c(S, 0.0), c(0.0, S)]).unwrap()
    }
    fn ket(k: usize) -> StateVector {
        StateVector::basis(2, k).unwrap()
    }
    fn z_basis() -> Vec<StateVector> {
        vec![ket(0), ket(1)]
    }
    fn x_basis() -> Vec<StateVector> {
        vec![up_x(), StateVector::from_real(&[S, -S]).unwrap()]
    }

    #[test]
    fn projector_case() {
        let r = make_generic(&ket(0), &ket(0)).unwrap();
        assert_eq!(r.operator(), &Operator::projector(&ket(0)));
    }

    #[test]
    fn up_x_up_z() {
        // |+x><0| / <0|+x> = [[1, 0], [1, 0]]
        let r = make_generic(&up_x(), &ket(0)).unwrap();
        let expect = Operator::from_real_rows(&[&[1.0, 0.0], &[1.0, 0.0]]).unwrap();
        assert!(r.operator().distance(&expect).unwrap() < 1e-15);
        assert!(r.is_normalized());
    }

    #[test]
    fn orthogonal_conditions_rejected() {
        match make_generic(&ket(0), &ket(1)) {
            Err(Error::Unphysical { overlap }) => assert_eq!(overlap, 0.0),
            other => panic!("expected unphysical, got {other:?}"),
        }
    }

    #[test]
    fn inner_matrix_units() {
        let r = make_generic(&ket(0), &ket(0)).unwrap();
        assert_eq!(inner(&r, &r).unwrap(), ONE);
        let e01 = TwoState::new(ket(0).outer(&ket(1)));
        let e10 = TwoState::new(ket(1).outer(&ket(0)));
        assert_eq!(inner(&e01, &e01).unwrap(), ONE);
        assert_eq!(inner(&e01, &e10).unwrap(), ZERO);
        assert!(inner(&e01, &TwoState::new(Operator::identity(3))).is_err());
    }

    #[test]
    fn normalized_basis_orthogonality() {
        for (dim, seed) in [(2, 1), (3, 2)] {
            let basis =
                TwoStateBasis::new(random_basis(dim, seed), random_basis(dim, seed + 100)).unwrap();
            for a in 0..dim {
                for b in 0..dim {
                    for a2 in 0..dim {
                        for b2 in 0..dim {
                            let got = inner(
                                &basis.element(a, b).unwrap(),
                                &basis.element(a2, b2).unwrap(),
                            )
                            .unwrap();
                            let expect = if a == a2 && b == b2 {
                                basis.element_norm_sqr(a, b).unwrap()
                            } else {
                                0.0
                            };
                            assert!((got - c(expect, 0.0)).norm() < 1e-10 * expect.max(1.0));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn computational_basis_pair_is_invalid() {
        assert!(matches!(
            TwoStateBasis::new(z_basis(), z_basis()),
            Err(Error::InvalidBasis(_))
        ));
    }

    #[test]
    fn reconstruction_x_y() {
        let r = make_generic(&up_x(), &up_y()).unwrap();
        let basis = TwoStateBasis::new(z_basis(), x_basis()).unwrap();
        let amps = expansion(&r, &basis).unwrap();
        let back = basis.resum(&amps).unwrap();
        assert!(back.operator().distance(r.operator()).unwrap() < 1e-12);
    }

    #[test]
    fn generic_amplitude_closed_form() {
        for seed in 0..10 {
            let psi1 = random_state(3, seed);
            let psi2 = random_state(3, seed + 50);
            let r = make_generic(&psi1, &psi2).unwrap();
            let basis =
                TwoStateBasis::new(random_basis(3, seed), random_basis(3, seed + 7)).unwrap();
            let norm = psi2.inner(&psi1).unwrap();
            for a in 0..3 {
                for b in 0..3 {
                    let (ka, kb) = (&basis.first()[a], &basis.second()[b]);
                    // psi2*(b) <b|a> psi1(a) / <psi2|psi1>
                    let closed =
                        psi2.inner(kb).unwrap() * kb.inner(ka).unwrap() * ka.inner(&psi1).unwrap()
                            / norm;
                    let got = two_amplitude(&r, &basis, a, b).unwrap();
                    assert!((got - closed).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn invalid_label() {
        let basis = TwoStateBasis::new(z_basis(), x_basis()).unwrap();
        let r = make_generic(&up_x(), &up_y()).unwrap();
        assert!(matches!(
            two_amplitude(&r, &basis, 2, 0),
            Err(Error::InvalidLabel { label: 2, dim: 2 })
        ));
    }

    #[test]
    fn rho_in_out_generic() {
        let r = make_generic(&up_x(), &ket(0)).unwrap();
        let pin = rho_in(&r).unwrap();
        let pout = rho_out(&r).unwrap();
        assert!(pin.distance(&Operator::projector(&up_x())).unwrap() < 1e-12);
        assert!(pout.distance(&Operator::projector(&ket(0))).unwrap() < 1e-12);
    }

    #[test]
    fn rho_in_out_hermitian_projector() {
        let p = Operator::projector(&up_x());
        let r = TwoState::new(p.clone());
        assert!(rho_in(&r).unwrap().distance(&p).unwrap() < 1e-12);
        assert!(rho_out(&r).unwrap().distance(&p).unwrap() < 1e-12);
    }

    #[test]
    fn non_generic_gives_mixed_conditions() {
        // (|0><+x| + |1><1|) / tr
        let op = ket(0).outer(&up_x()).plus(&ket(1).outer(&ket(1))).unwrap();
        let r = TwoState::new(op).normalized().unwrap();
        for rho in [rho_in(&r).unwrap(), rho_out(&r).unwrap()] {
            let e = eig_hermitian(&rho).unwrap();
            assert!((rho.trace().re - 1.0).abs() < 1e-12);
            assert!(e.values.iter().all(|&v| v > 1e-3 && v < 1.0));
        }
        assert!(!is_generic(&r));
    }

    #[test]
    fn rho_of_zero_is_error() {
        let r = TwoState::new(Operator::zeros(2));
        assert_eq!(rho_in(&r), Err(Error::ZeroNorm));
        assert_eq!(rho_out(&r), Err(Error::ZeroNorm));
    }

    #[test]
    fn genericity() {
        let r = make_generic(&up_x(), &up_y()).unwrap();
        assert!(is_generic(&r));
        for dim in 2..5 {
            let mixed = TwoState::new(Operator::identity(dim).scale(c(1.0 / dim as f64, 0.0)));
            assert!(!is_generic(&mixed));
        }
        // traceless nilpotent |0><1| satisfies the trace relation but is a
        // ket-bra; it is rank one, so it is generic (just not physical)
        let nil = TwoState::new(ket(0).outer(&ket(1)));
        assert!(is_generic(&nil) && !nil.is_physical());
        // traceless rank-2 operator with tr(r^2) = 0 = (tr r)^2
        let sx = TwoState::new(sigma_x().matmul(&sigma_z()).unwrap());
        assert!(!is_generic(&sx));
    }

    #[test]
    fn reduce_product_state() {
        let ra = make_generic(&random_state(2, 1), &random_state(2, 2)).unwrap();
        let rb = TwoState::new(crate::linalg::random_hermitian(3, 4));
        let total = ra.tensor(&rb).unwrap();
        let kept = reduce(&total, (2, 3), Keep::First).unwrap();
        let expect = ra.scale(rb.trace());
        assert!(kept.operator().distance(expect.operator()).unwrap() < 1e-12);
        assert!(reduce(&total, (2, 2), Keep::First).is_err());
    }
}
