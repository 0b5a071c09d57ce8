//! Multiple-states: N+1 sequential conditions as sums of products of
//! per-interval two-states.

use crate::error::{Error, Result};
use crate::linalg::{check_dim, Operator, StateVector, C64, DEFAULT_TENSOR_CAP, ONE, ZERO};
use crate::two_state::{self, is_rank_one, make_generic, TwoState, TwoStateBasis, EPS_PHYS};

#[derive(Clone, Debug, PartialEq)]
pub struct MultiTerm {
    pub coeff: C64,
    pub factors: Vec<TwoState>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MultipleState {
    terms: Vec<MultiTerm>,
    dims: Vec<usize>,
}

impl MultipleState {
    pub fn new(terms: Vec<MultiTerm>) -> Result<Self> {
        let first = terms
            .first()
            .ok_or_else(|| Error::Invalid("multiple-state needs at least one term".into()))?;
        if first.factors.is_empty() {
            return Err(Error::Invalid(
                "multiple-state needs at least one interval".into(),
            ));
        }
        let dims: Vec<usize> = first.factors.iter().map(TwoState::dim).collect();
        for t in &terms[1..] {
            check_dim(dims.len(), t.factors.len())?;
            for (d, f) in dims.iter().zip(&t.factors) {
                check_dim(*d, f.dim())?;
            }
        }
        Ok(Self { terms, dims })
    }

    /// Single product term with unit coefficient.
    pub fn product(factors: Vec<TwoState>) -> Result<Self> {
        Self::new(vec![MultiTerm {
            coeff: ONE,
            factors,
        }])
    }

    pub fn intervals(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn terms(&self) -> &[MultiTerm] {
        &self.terms
    }

    /// Σ_k c_k Π_i tr ϱ̂_k⁽ⁱ⁾
    pub fn total_trace(&self) -> C64 {
        self.terms
            .iter()
            .map(|t| t.coeff * t.factors.iter().map(TwoState::trace).product::<C64>())
            .sum()
    }

    pub fn scale(&self, z: C64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| MultiTerm {
                coeff: t.coeff * z,
                factors: t.factors.clone(),
            })
            .collect();
        Self {
            terms,
            dims: self.dims.clone(),
        }
    }

    /// Superposition (term lists concatenated).
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dims != other.dims {
            return Err(Error::Invalid(format!(
                "shape mismatch: {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Self::new(terms)
    }

    /// Flattened operator on the product of all interval spaces.
    pub fn flatten(&self) -> Result<Operator> {
        self.flatten_with_cap(DEFAULT_TENSOR_CAP)
    }

    pub fn flatten_with_cap(&self, cap: usize) -> Result<Operator> {
        let mut acc: Option<Operator> = None;
        for t in &self.terms {
            let mut prod = t.factors[0].operator().clone();
            for f in &t.factors[1..] {
                prod = prod.tensor_with_cap(f.operator(), cap)?;
            }
            let prod = prod.scale(t.coeff);
            acc = Some(match acc {
                None => prod,
                Some(a) => a.plus(&prod)?,
            });
        }
        Ok(acc.expect("at least one term"))
    }
}

/// Generic multiple-state ϱ̂_ab ⊗ ϱ̂_bc ⊗ … from N+1 conditions, already
/// evolved to their interval boundaries by the caller.
pub fn make_generic_multi(conditions: &[StateVector]) -> Result<MultipleState> {
    if conditions.len() < 2 {
        return Err(Error::Invalid("need at least two conditions".into()));
    }
    let factors = conditions
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            make_generic(&w[0], &w[1]).map_err(|e| match e {
                Error::Unphysical { overlap } => Error::UnphysicalInterval {
                    interval: i + 1,
                    overlap,
                },
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MultipleState::product(factors)
}

fn check_shapes(m1: &MultipleState, m2: &MultipleState) -> Result<()> {
    if m1.dims != m2.dims {
        return Err(Error::Invalid(format!(
            "shape mismatch: {:?} vs {:?}",
            m1.dims, m2.dims
        )));
    }
    Ok(())
}

/// Sesquilinear extension of the per-interval inner product.
pub fn multi_inner(m1: &MultipleState, m2: &MultipleState) -> Result<C64> {
    check_shapes(m1, m2)?;
    let mut sum = ZERO;
    for t1 in &m1.terms {
        for t2 in &m2.terms {
            let mut prod = t1.coeff.conj() * t2.coeff;
            for (f1, f2) in t1.factors.iter().zip(&t2.factors) {
                prod *= two_state::inner(f1, f2)?;
            }
            sum += prod;
        }
    }
    Ok(sum)
}

/// ϱ(a,b,…;…) for one label pair per interval.
pub fn multi_amplitude(
    m: &MultipleState,
    bases: &[TwoStateBasis],
    labels: &[(usize, usize)],
) -> Result<C64> {
    check_dim(m.intervals(), bases.len())?;
    check_dim(m.intervals(), labels.len())?;
    let mut sum = ZERO;
    for t in &m.terms {
        let mut prod = t.coeff;
        for ((f, basis), &(a, b)) in t.factors.iter().zip(bases).zip(labels) {
            prod *= two_state::two_amplitude(f, basis, a, b)?;
        }
        sum += prod;
    }
    Ok(sum)
}

/// One (a, b) index pair per interval.
pub type LabelTuple = Vec<(usize, usize)>;

/// Full expansion over all label tuples, as (labels, amplitude).
pub fn multi_expansion(
    m: &MultipleState,
    bases: &[TwoStateBasis],
) -> Result<Vec<(LabelTuple, C64)>> {
    check_dim(m.intervals(), bases.len())?;
    let per_interval: Vec<Vec<(usize, usize)>> = bases
        .iter()
        .map(|b| {
            let d = b.dim();
            (0..d * d).map(|k| (k / d, k % d)).collect()
        })
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; bases.len()];
    loop {
        let labels: Vec<(usize, usize)> =
            idx.iter().zip(&per_interval).map(|(&i, p)| p[i]).collect();
        let amp = multi_amplitude(m, bases, &labels)?;
        out.push((labels, amp));
        let mut k = 0;
        loop {
            if k == idx.len() {
                return Ok(out);
            }
            idx[k] += 1;
            if idx[k] < per_interval[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// Resums an expansion into a multiple-state with one term per label tuple.
pub fn multi_resum(
    bases: &[TwoStateBasis],
    expansion: &[(Vec<(usize, usize)>, C64)],
) -> Result<MultipleState> {
    let terms = expansion
        .iter()
        .map(|(labels, amp)| {
            let factors = bases
                .iter()
                .zip(labels)
                .map(|(b, &(a, bb))| b.element(a, bb))
                .collect::<Result<Vec<_>>>()?;
            Ok(MultiTerm {
                coeff: *amp,
                factors,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    MultipleState::new(terms)
}

/// Realigns a flattened operator across the cut after `left` so that
/// product operators X ⊗ Y map to rank-one matrices vec(X) vec(Y)ᵀ.
fn realign(op: &Operator, d_left: usize, d_right: usize) -> Operator {
    let m = op.matrix();
    let rows = d_left * d_left;
    let cols = d_right * d_right;
    let mut r = nalgebra::DMatrix::<C64>::zeros(rows.max(cols), rows.max(cols));
    for i1 in 0..d_left {
        for j1 in 0..d_left {
            for i2 in 0..d_right {
                for j2 in 0..d_right {
                    r[(i1 * d_left + j1, i2 * d_right + j2)] =
                        m[(i1 * d_right + i2, j1 * d_right + j2)];
                }
            }
        }
    }
    Operator::from_matrix_unchecked(r)
}

/// Generic multiple-states are single products of generic factors: the
/// flattened operator is rank one, satisfies the trace relation, and has
/// operator-Schmidt rank one across every interval cut.
pub fn is_generic_multi(m: &MultipleState) -> Result<bool> {
    let flat = m.flatten()?;
    if !two_state::is_generic(&TwoState::new(flat.clone())) {
        return Ok(false);
    }
    let total: usize = m.dims.iter().product();
    let mut left = 1;
    for &d in &m.dims[..m.dims.len() - 1] {
        left *= d;
        if !is_rank_one(&realign(&flat, left, total / left)) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Physical-subspace membership: nonzero total trace.
pub fn is_physical_multi(m: &MultipleState) -> bool {
    m.total_trace().norm() > EPS_PHYS
}
