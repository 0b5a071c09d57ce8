//! Brute-force reference for pre- and post-selected measurement sequences.
//!
//! Projectors are built here from the eigenvalues alone, by Lagrange
//! interpolation in the operator, and amplitudes are propagated as plain
//! state vectors. Nothing in this module calls into `observables` or
//! `measurement`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{Operator, StateVector, C64};
use crate::observables::ProbDist;

const CLUSTER_TOL: f64 = 1e-8;
const MIN_ACCEPTANCE: f64 = 1e-6;

/// One step of a chain.
#[derive(Clone, Debug)]
pub enum Step {
    /// Projective measurement of a Hermitian operator. Unrecorded
    /// measurements still disturb the system but leave no label.
    Measure { op: Operator, record: bool },
    /// Free evolution between measurements.
    Unitary(Operator),
    /// Intermediate selection of a state; runs that fail it are discarded.
    Select(StateVector),
}

/// Pre-selection, a sequence of steps and an optional post-selection.
#[derive(Clone, Debug)]
pub struct MeasurementChain {
    pre: StateVector,
    post: Option<StateVector>,
    steps: Vec<Step>,
}

struct Spectrum {
    values: Vec<f64>,
    projectors: Vec<DMatrix<C64>>,
}

fn spectrum(op: &Operator) -> Spectrum {
    let m = op.matrix();
    let herm = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut raw: Vec<f64> = SymmetricEigen::new(herm.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    raw.sort_by(f64::total_cmp);
    let scale = raw.iter().fold(1.0_f64, |s, v| s.max(v.abs()));
    let mut groups: Vec<Vec<f64>> = Vec::new();
    for v in raw {
        match groups.last_mut() {
            Some(g) if (v - g[0]).abs() <= CLUSTER_TOL * scale => g.push(v),
            _ => groups.push(vec![v]),
        }
    }
    let values: Vec<f64> = groups
        .iter()
        .map(|g| g.iter().sum::<f64>() / g.len() as f64)
        .collect();
    let n = herm.nrows();
    let projectors = values
        .iter()
        .enumerate()
        .map(|(i, &li)| {
            let mut p = DMatrix::<C64>::identity(n, n);
            for (j, &lj) in values.iter().enumerate() {
                if i != j {
                    let shifted = &herm - DMatrix::<C64>::identity(n, n) * C64::new(lj, 0.0);
                    p = p * shifted / C64::new(li - lj, 0.0);
                }
            }
            p
        })
        .collect();
    Spectrum { values, projectors }
}

enum Compiled {
    Measure { spec: Spectrum, record: bool },
    Unitary(DMatrix<C64>),
    Select(DVector<C64>),
}

impl MeasurementChain {
    pub fn new(pre: StateVector, post: StateVector, steps: Vec<Step>) -> Result<Self> {
        Self::build(pre, Some(post), steps)
    }

    /// Chain without post-selection: every run is kept.
    pub fn preselected(pre: StateVector, steps: Vec<Step>) -> Result<Self> {
        Self::build(pre, None, steps)
    }

    fn build(pre: StateVector, post: Option<StateVector>, steps: Vec<Step>) -> Result<Self> {
        let d = pre.dim();
        if let Some(p) = &post {
            if p.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: p.dim(),
                });
            }
        }
        for s in &steps {
            let found = match s {
                Step::Measure { op, .. } => {
                    op.require_hermitian(1e-10)?;
                    op.dim()
                }
                Step::Unitary(u) => u.dim(),
                Step::Select(v) => v.dim(),
            };
            if found != d {
                return Err(Error::DimensionMismatch { expected: d, found });
            }
        }
        Ok(Self { pre, post, steps })
    }

    /// Chain of recorded measurements with no evolution between them.
    pub fn recorded(pre: StateVector, post: StateVector, ops: &[Operator]) -> Result<Self> {
        let steps = ops
            .iter()
            .map(|op| Step::Measure {
                op: op.clone(),
                record: true,
            })
            .collect();
        Self::new(pre, post, steps)
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    fn compile(&self) -> Vec<Compiled> {
        self.steps
            .iter()
            .map(|s| match s {
                Step::Measure { op, record } => Compiled::Measure {
                    spec: spectrum(op),
                    record: *record,
                },
                Step::Unitary(u) => Compiled::Unitary(u.matrix().clone()),
                Step::Select(v) => {
                    let v = vec_of(v);
                    let n = v.norm();
                    Compiled::Select(v / C64::new(n, 0.0))
                }
            })
            .collect()
    }
}

fn vec_of(s: &StateVector) -> DVector<C64> {
    DVector::from_iterator(s.dim(), s.amps().iter().copied())
}

fn recorded_labels(compiled: &[Compiled]) -> Vec<Vec<f64>> {
    let mut labels = vec![Vec::new()];
    for c in compiled {
        if let Compiled::Measure { spec, record: true } = c {
            labels = labels
                .into_iter()
                .flat_map(|l| {
                    spec.values.iter().map(move |&v| {
                        let mut next = l.clone();
                        next.push(v);
                        next
                    })
                })
                .collect();
        }
    }
    labels
}

fn label_index(compiled: &[Compiled], outcomes: &[usize]) -> usize {
    let mut idx = 0;
    let mut k = 0;
    for c in compiled {
        if let Compiled::Measure { spec, record } = c {
            if *record {
                idx = idx * spec.values.len() + outcomes[k];
            }
            k += 1;
        }
    }
    idx
}

/// Exact conditional distribution of the recorded outcomes given that the
/// post-selection succeeds. Labels list recorded eigenvalues in time order.
pub fn enumerate_conditional(chain: &MeasurementChain) -> Result<ProbDist<Vec<f64>>> {
    let compiled = chain.compile();
    let labels = recorded_labels(&compiled);
    let mut weights = vec![0.0; labels.len()];
    let post = chain.post.as_ref().map(vec_of);
    // depth-first over outcome paths
    let mut stack: Vec<(usize, DVector<C64>, Vec<usize>)> =
        vec![(0, vec_of(&chain.pre), Vec::new())];
    while let Some((pos, psi, outcomes)) = stack.pop() {
        if pos == compiled.len() {
            let w = match &post {
                Some(p) => p.dotc(&psi).norm_sqr(),
                None => psi.norm_squared(),
            };
            weights[label_index(&compiled, &outcomes)] += w;
            continue;
        }
        match &compiled[pos] {
            Compiled::Unitary(u) => stack.push((pos + 1, u * psi, outcomes)),
            Compiled::Select(v) => {
                let amp = v.dotc(&psi);
                stack.push((pos + 1, v * amp, outcomes));
            }
            Compiled::Measure { spec, .. } => {
                for (k, p) in spec.projectors.iter().enumerate() {
                    let mut next = outcomes.clone();
                    next.push(k);
                    stack.push((pos + 1, p * &psi, next));
                }
            }
        }
    }
    let total: f64 = weights.iter().sum();
    let scale = chain.pre.norm() * chain.post.as_ref().map_or(1.0, |p| p.norm());
    if total <= 1e-24 * scale * scale {
        return Err(Error::Oracle("post-selection has zero probability".into()));
    }
    ProbDist::from_weights(labels, weights)
}

fn run_trial(
    compiled: &[Compiled],
    pre: &DVector<C64>,
    post: Option<&DVector<C64>>,
    rng: &mut ChaCha8Rng,
) -> Option<usize> {
    let mut psi = pre.clone();
    let mut outcomes = Vec::new();
    for c in compiled {
        match c {
            Compiled::Unitary(u) => psi = u * psi,
            Compiled::Select(v) => {
                let p = v.dotc(&psi).norm_sqr() / psi.norm_squared();
                if rng.random::<f64>() >= p {
                    return None;
                }
                psi = v.clone();
            }
            Compiled::Measure { spec, .. } => {
                let branches: Vec<DVector<C64>> =
                    spec.projectors.iter().map(|p| p * &psi).collect();
                let probs: Vec<f64> = branches.iter().map(|b| b.norm_squared()).collect();
                let total: f64 = probs.iter().sum();
                let mut u = rng.random::<f64>() * total;
                let mut pick = probs.len() - 1;
                for (k, w) in probs.iter().enumerate() {
                    if u < *w {
                        pick = k;
                        break;
                    }
                    u -= w;
                }
                let norm = probs[pick].sqrt();
                psi = &branches[pick] / C64::new(norm, 0.0);
                outcomes.push(pick);
            }
        }
    }
    let accept = post.map_or(1.0, |p| p.dotc(&psi).norm_sqr() / p.norm_squared());
    (accept >= 1.0 || rng.random::<f64>() < accept).then(|| label_index(compiled, &outcomes))
}

/// Rejection-sampled conditional distribution: each trial runs the chain
/// with sequential collapse and is kept only if the post-selection
/// succeeds. Trial `k` draws from stream `k` of a ChaCha8 generator seeded
/// with `seed`.
pub fn sample_conditional(
    chain: &MeasurementChain,
    trials: usize,
    seed: u64,
) -> Result<ProbDist<Vec<f64>>> {
    if trials == 0 {
        return Err(Error::Invalid("trials must be positive".into()));
    }
    let compiled = chain.compile();
    let labels = recorded_labels(&compiled);
    let pre = vec_of(&chain.pre) / C64::new(chain.pre.norm(), 0.0);
    let post = chain.post.as_ref().map(vec_of);
    let results: Vec<Option<usize>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(t as u64);
            run_trial(&compiled, &pre, post.as_ref(), &mut rng)
        })
        .collect();
    let mut counts = vec![0.0; labels.len()];
    let mut accepted = 0usize;
    for k in results.into_iter().flatten() {
        counts[k] += 1.0;
        accepted += 1;
    }
    let rate = accepted as f64 / trials as f64;
    if accepted == 0 || rate < MIN_ACCEPTANCE {
        return Err(Error::Oracle(format!(
            "acceptance rate {rate:e} below {MIN_ACCEPTANCE:e}"
        )));
    }
    ProbDist::from_weights(labels, counts)
}
