//! Strong (ABL) probabilities and weak values of two-states and
//! multiple-states.

use crate::error::{Error, Result};
use crate::linalg::{check_dim, eig_hermitian, Operator, StateVector, C64, EIGEN_TOL, ZERO};
use crate::multistate::MultipleState;
use crate::two_state::{self, rho_in, rho_out, TwoState, TwoStateBasis, EPS_PHYS};

/// Discrete distribution over outcome labels.
#[derive(Clone, Debug, PartialEq)]
pub struct ProbDist<L> {
    labels: Vec<L>,
    probs: Vec<f64>,
}

impl<L: Clone + PartialEq> ProbDist<L> {
    /// Normalizes non-negative weights.
    pub fn from_weights(labels: Vec<L>, weights: Vec<f64>) -> Result<Self> {
        check_dim(labels.len(), weights.len())?;
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::NonFinite("probability weights"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::PostSelectionIncompatible);
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Ok(Self { labels, probs })
    }

    pub fn labels(&self) -> &[L] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&L, f64)> {
        self.labels.iter().zip(self.probs.iter().copied())
    }

    /// Probability of `label` (0 when absent).
    pub fn prob(&self, label: &L) -> f64 {
        self.labels
            .iter()
            .position(|l| l == label)
            .map_or(0.0, |k| self.probs[k])
    }

    /// Largest absolute difference over labels present in either.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let a = self
            .labels
            .iter()
            .map(|l| (self.prob(l) - other.prob(l)).abs());
        let b = other
            .labels
            .iter()
            .map(|l| (self.prob(l) - other.prob(l)).abs());
        a.chain(b).fold(0.0, f64::max)
    }

    /// Like `max_abs_diff`, with labels matched by `same` instead of `==`.
    pub fn max_abs_diff_by(&self, other: &Self, same: impl Fn(&L, &L) -> bool) -> f64 {
        let lookup = |d: &Self, l: &L| {
            d.iter()
                .filter(|(m, _)| same(l, m))
                .map(|(_, p)| p)
                .sum::<f64>()
        };
        let a = self
            .labels
            .iter()
            .map(|l| (lookup(self, l) - lookup(other, l)).abs());
        let b = other
            .labels
            .iter()
            .map(|l| (lookup(self, l) - lookup(other, l)).abs());
        a.chain(b).fold(0.0, f64::max)
    }
}

/// True when two outcome tuples agree entrywise within `tol`.
pub fn labels_close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

impl ProbDist<Vec<f64>> {
    /// Total probability of outcome tuples within `tol` of `label`.
    pub fn prob_near(&self, label: &[f64], tol: f64) -> f64 {
        self.iter()
            .filter(|(l, _)| labels_close(l, label, tol))
            .map(|(_, p)| p)
            .sum()
    }
}

impl ProbDist<f64> {
    pub fn mean(&self) -> f64 {
        self.iter().map(|(a, p)| a * p).sum()
    }

    /// Probability of the eigenvalue nearest to `value`.
    pub fn prob_near(&self, value: f64, tol: f64) -> f64 {
        self.iter()
            .filter(|(a, _)| (*a - value).abs() <= tol)
            .map(|(_, p)| p)
            .sum()
    }
}

/// Distinct eigenvalues of a Hermitian operator with their eigenspace
/// projectors, ascending.
pub fn spectral_projectors(a: &Operator) -> Result<Vec<(f64, Operator)>> {
    let eig = eig_hermitian(a)?;
    let scale = eig.values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    Ok(eig
        .eigenspaces(EIGEN_TOL * scale)
        .into_iter()
        .map(|(value, members)| {
            let mut p = Operator::zeros(a.dim());
            for k in members {
                p = &p + &Operator::projector(&eig.vectors[k]);
            }
            (value, p)
        })
        .collect())
}

fn check_op(r: &TwoState, a: &Operator) -> Result<()> {
    check_dim(r.dim(), a.dim())
}

fn weights_to_dist<L: Clone + PartialEq>(
    labels: Vec<L>,
    amps: Vec<C64>,
    scale: f64,
) -> Result<ProbDist<L>> {
    let weights: Vec<f64> = amps.iter().map(|z| z.norm_sqr()).collect();
    let total: f64 = weights.iter().sum();
    // amplitudes of a nonzero two-state are bounded by its Frobenius norm
    if total <= 1e-24 * scale * scale {
        return Err(Error::PostSelectionIncompatible);
    }
    ProbDist::from_weights(labels, weights)
}

/// ABL probabilities 𝒫rob(a) ∝ |tr(P_a ϱ̂)|² over the distinct eigenvalues
/// of `a`; degenerate eigenspaces enter through their projector.
pub fn abl_prob(r: &TwoState, a: &Operator) -> Result<ProbDist<f64>> {
    check_op(r, a)?;
    let proj = spectral_projectors(a)?;
    let (labels, amps): (Vec<f64>, Vec<C64>) = proj
        .iter()
        .map(|(v, p)| (*v, (p * r.operator()).trace()))
        .unzip();
    weights_to_dist(labels, amps, r.matrix().norm())
}

/// Σ_a a·𝒫rob(a)
pub fn strong_expectation(r: &TwoState, a: &Operator) -> Result<f64> {
    Ok(abl_prob(r, a)?.mean())
}

/// 𝒫rob(a, b) ∝ |tr(P_b P_a ϱ̂)|² for A measured just before B.
pub fn joint_prob(r: &TwoState, a: &Operator, b: &Operator) -> Result<ProbDist<(f64, f64)>> {
    check_op(r, a)?;
    check_op(r, b)?;
    let pa = spectral_projectors(a)?;
    let pb = spectral_projectors(b)?;
    let mut labels = Vec::with_capacity(pa.len() * pb.len());
    let mut amps = Vec::with_capacity(pa.len() * pb.len());
    for (va, qa) in &pa {
        let after_a = qa * r.operator();
        for (vb, qb) in &pb {
            labels.push((*va, *vb));
            amps.push((qb * &after_a).trace());
        }
    }
    weights_to_dist(labels, amps, r.matrix().norm())
}

/// Operators measured within one interval of a multiple-state.
#[derive(Clone, Debug)]
pub enum IntervalOps {
    One(Operator),
    /// First operator measured just before the second.
    Two(Operator, Operator),
}

impl IntervalOps {
    fn outcomes(&self) -> Result<Vec<(Vec<f64>, Operator)>> {
        match self {
            IntervalOps::One(a) => Ok(spectral_projectors(a)?
                .into_iter()
                .map(|(v, p)| (vec![v], p))
                .collect()),
            IntervalOps::Two(a, b) => {
                let pa = spectral_projectors(a)?;
                let pb = spectral_projectors(b)?;
                let mut out = Vec::with_capacity(pa.len() * pb.len());
                for (va, qa) in &pa {
                    for (vb, qb) in &pb {
                        out.push((vec![*va, *vb], qb * qa));
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Joint distribution of measurements in every interval; labels list the
/// outcomes in time order.
pub fn multi_prob(m: &MultipleState, ops: &[IntervalOps]) -> Result<ProbDist<Vec<f64>>> {
    if ops.is_empty() {
        return Err(Error::Invalid("no operators given".into()));
    }
    check_dim(m.intervals(), ops.len())?;
    let per_interval = ops
        .iter()
        .zip(m.dims())
        .map(|(o, &d)| {
            let outs = o.outcomes()?;
            check_dim(d, outs[0].1.dim())?;
            Ok(outs)
        })
        .collect::<Result<Vec<_>>>()?;
    // per term and interval: amplitude of every outcome
    let term_amps: Vec<Vec<Vec<C64>>> = m
        .terms()
        .iter()
        .map(|t| {
            t.factors
                .iter()
                .zip(&per_interval)
                .map(|(f, outs)| {
                    outs.iter()
                        .map(|(_, p)| (p * f.operator()).trace())
                        .collect()
                })
                .collect()
        })
        .collect();
    let mut labels = Vec::new();
    let mut amps = Vec::new();
    let mut idx = vec![0usize; per_interval.len()];
    'outer: loop {
        let label: Vec<f64> = idx
            .iter()
            .zip(&per_interval)
            .flat_map(|(&k, outs)| outs[k].0.iter().copied())
            .collect();
        let amp: C64 = m
            .terms()
            .iter()
            .zip(&term_amps)
            .map(|(t, ta)| t.coeff * idx.iter().zip(ta).map(|(&k, a)| a[k]).product::<C64>())
            .sum();
        labels.push(label);
        amps.push(amp);
        for k in 0..idx.len() {
            idx[k] += 1;
            if idx[k] < per_interval[k].len() {
                continue 'outer;
            }
            idx[k] = 0;
        }
        break;
    }
    let scale = m
        .terms()
        .iter()
        .map(|t| t.coeff.norm() * t.factors.iter().map(|f| f.matrix().norm()).product::<f64>())
        .sum();
    weights_to_dist(labels, amps, scale)
}

/// Which boundary condition a one-condition query keeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Condition {
    Initial,
    Final,
}

/// Born-rule distribution 𝒫rob_I(a) = ⟨ϱ̂_aa, ρ⟩ for ρ = ρ_in or ρ_out.
pub fn prob_one_condition(r: &TwoState, a: &Operator, which: Condition) -> Result<ProbDist<f64>> {
    check_op(r, a)?;
    let rho = match which {
        Condition::Initial => rho_in(r)?,
        Condition::Final => rho_out(r)?,
    };
    let (labels, weights): (Vec<f64>, Vec<f64>) = spectral_projectors(a)?
        .iter()
        .map(|(v, p)| (*v, (p * &rho).trace().re.max(0.0)))
        .unzip();
    ProbDist::from_weights(labels, weights)
}

/// 𝒫rob_I(ψ₁ → ψ₂) = ⟨ρ_out, ρ_in⟩
pub fn transition_prob(r: &TwoState) -> Result<f64> {
    let pin = rho_in(r)?;
    let pout = rho_out(r)?;
    Ok((&pout * &pin).trace().re)
}

/// Born distribution of `a` in `psi` reassembled from ABL probabilities of
/// the two-states |ψ⟩⟨ψ_k| over a complete final basis, each weighted by
/// the probability Σ_a |⟨ψ_k|P_a|ψ⟩|² of reaching ψ_k after measuring A.
pub fn sum_rule_prob(
    psi: &StateVector,
    a: &Operator,
    final_basis: &[StateVector],
) -> Result<ProbDist<f64>> {
    check_dim(psi.dim(), a.dim())?;
    check_dim(psi.dim(), final_basis.len())?;
    let proj = spectral_projectors(a)?;
    let mut acc = vec![0.0; proj.len()];
    for k in final_basis {
        let amps = proj
            .iter()
            .map(|(_, p)| p.sandwich(k, psi))
            .collect::<Result<Vec<C64>>>()?;
        let prob_k: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
        if prob_k == 0.0 {
            continue;
        }
        for (slot, z) in acc.iter_mut().zip(&amps) {
            let abl = z.norm_sqr() / prob_k;
            *slot += abl * prob_k;
        }
    }
    ProbDist::from_weights(proj.iter().map(|(v, _)| *v).collect(), acc)
}

/// A weak value with the conditioning number 1/|tr ϱ̂|.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeakValue {
    pub value: C64,
    pub conditioning: f64,
}

fn require_trace(r: &TwoState) -> Result<C64> {
    let t = r.trace();
    if t.norm() <= EPS_PHYS {
        return Err(Error::NearOrthogonal { trace: t.norm() });
    }
    Ok(t)
}

/// A_w = tr(Aϱ̂) / tr ϱ̂; `a` need not be Hermitian.
pub fn weak_value(r: &TwoState, a: &Operator) -> Result<WeakValue> {
    check_op(r, a)?;
    let t = require_trace(r)?;
    Ok(WeakValue {
        value: (a * r.operator()).trace() / t,
        conditioning: 1.0 / t.norm(),
    })
}

/// (ϱ̂_ab)_w / ⟨ϱ̂_ab, ϱ̂_ab⟩ with (ϱ̂_ab)_w = ⟨ϱ̂_ab, ϱ̂⟩ / ⟨1, ϱ̂⟩.
pub fn weak_value_offdiag(r: &TwoState, basis: &TwoStateBasis, a: usize, b: usize) -> Result<C64> {
    check_dim(basis.dim(), r.dim())?;
    let t = require_trace(r)?;
    let elem = basis.element(a, b)?;
    let w = two_state::inner(&elem, r)? / t;
    Ok(w / basis.element_norm_sqr(a, b)?)
}

/// ΔA_wⁿ = (Aⁿ)_w − (A_w)ⁿ
pub fn weak_moment(r: &TwoState, a: &Operator, n: u32) -> Result<C64> {
    if n == 0 {
        return Err(Error::Invalid(
            "weak moment order must be at least 1".into(),
        ));
    }
    let aw = weak_value(r, a)?.value;
    let an = weak_value(r, &a.powi(n))?.value;
    Ok(an - aw.powu(n))
}

/// Σ_ab ϱ(a,b)·A_w(ϱ̂_ab)
pub fn weak_value_by_transformation(
    r: &TwoState,
    basis: &TwoStateBasis,
    a: &Operator,
) -> Result<C64> {
    let mut sum = ZERO;
    for t in two_state::expansion(r, basis)? {
        let elem = basis.element(t.a_index, t.b_index)?;
        sum += t.value * weak_value(&elem, a)?.value;
    }
    Ok(sum / require_trace(r)?)
}
