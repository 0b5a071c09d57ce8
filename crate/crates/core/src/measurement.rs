//! Von Neumann pointer model with impulsive coupling g₀δ(t)·q·A.
//!
//! The pointer variable is π with conjugate q = −i d/dπ. For pre- and
//! post-selected system states the final (renormalized) pointer is
//! Φ_f(π) ∝ Σ_a ⟨ψ₂|P_a|ψ₁⟩ Φ₀(π − g₀a), evaluated analytically on a grid.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::{
    c, check_dim, eig_hermitian, Operator, StateVector, ALGEBRAIC_TOL, C64, EIGEN_TOL, ZERO,
};
use crate::observables::{weak_moment, weak_value, ProbDist};
use crate::spin::SpinOps;
use crate::two_state::{make_generic_with_cutoff, TwoState};

/// Grid points per pointer width.
pub const POINTS_PER_WIDTH: f64 = 20.0;
/// Half-span of pointer grids and strong-readout windows, in widths.
pub const SPAN_WIDTHS: f64 = 10.0;
/// Edge amplitude bound checked on every constructed pointer grid.
pub const EDGE_TOL: f64 = 1e-8;
/// Weak-readout criterion threshold (g₀²|ΔA_w²|Δq²).
pub const WEAK_READOUT_LIMIT: f64 = 1e-3;

/// Regime thresholds on G = g₀²|ΔA_w²|Δq² and per-branch B_k.
pub const WEAK_G: f64 = 0.05;
pub const INTERMEDIATE_G: f64 = 0.75;
pub const BRANCH_B: f64 = 0.1;
/// Strong regime: Δπ/g₀ below this fraction of the smallest eigenvalue gap.
pub const STRONG_FRACTION: f64 = 0.1;

const INCOMPATIBLE_NORM: f64 = 1e-14;

/// Independent random stream for one Monte Carlo trial.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Pointer wavefunction on a uniform π grid, prepared from a real
/// Gaussian Φ₀(π) = (2πΔπ²)^(−1/4) exp(−(π − center)²/(4Δπ²)).
#[derive(Clone, Debug, PartialEq)]
pub struct PointerState {
    start: f64,
    dpi: f64,
    amps: Vec<C64>,
    width: f64,
    center: f64,
}

impl PointerState {
    /// Gaussian on the default grid: ±10 widths at 20 points per width.
    pub fn gaussian(center: f64, width: f64) -> Result<Self> {
        if !(width.is_finite() && width > 0.0) || !center.is_finite() {
            return Err(Error::Invalid(format!(
                "bad pointer width {width} or center {center}"
            )));
        }
        Self::gaussian_on_grid(center, width, width / POINTS_PER_WIDTH, SPAN_WIDTHS * width)
    }

    pub fn gaussian_on_grid(center: f64, width: f64, dpi: f64, half_span: f64) -> Result<Self> {
        if !(dpi.is_finite() && dpi > 0.0) || !(half_span.is_finite() && half_span > 0.0) {
            return Err(Error::Invalid(
                "pointer grid spacing and span must be positive".into(),
            ));
        }
        let n = (2.0 * half_span / dpi).ceil() as usize + 1;
        let start = center - half_span;
        let mut s = Self {
            start,
            dpi,
            amps: Vec::new(),
            width,
            center,
        };
        s.amps = (0..n)
            .map(|k| c(s.profile(start + k as f64 * dpi), 0.0))
            .collect();
        s.check_edges()?;
        s.renormalize()?;
        Ok(s)
    }

    /// Analytic initial profile Φ₀(π).
    pub fn profile(&self, pi: f64) -> f64 {
        let w2 = self.width * self.width;
        (2.0 * std::f64::consts::PI * w2).powf(-0.25)
            * (-(pi - self.center).powi(2) / (4.0 * w2)).exp()
    }

    fn check_edges(&self) -> Result<()> {
        let peak = self.amps.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        let edge = self.amps[0]
            .norm()
            .max(self.amps[self.amps.len() - 1].norm());
        if edge > EDGE_TOL * peak.max(f64::MIN_POSITIVE) {
            return Err(Error::Invalid(format!(
                "pointer grid too narrow: edge amplitude {edge:.2e} relative to peak {peak:.2e}"
            )));
        }
        Ok(())
    }

    fn renormalize(&mut self) -> Result<()> {
        let n2: f64 = self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dpi;
        if n2 == 0.0 || !n2.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let s = n2.sqrt();
        for z in &mut self.amps {
            *z /= s;
        }
        Ok(())
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn dpi(&self) -> f64 {
        self.dpi
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn pi(&self, k: usize) -> f64 {
        self.start + k as f64 * self.dpi
    }

    pub fn end(&self) -> f64 {
        self.pi(self.amps.len() - 1)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dpi
    }

    /// (⟨π⟩, Var π)
    pub fn pi_stats(&self) -> (f64, f64) {
        let w: Vec<f64> = self.amps.iter().map(|z| z.norm_sqr()).collect();
        let total: f64 = w.iter().sum();
        let mean = w
            .iter()
            .enumerate()
            .map(|(k, p)| p * self.pi(k))
            .sum::<f64>()
            / total;
        let var = w
            .iter()
            .enumerate()
            .map(|(k, p)| p * (self.pi(k) - mean).powi(2))
            .sum::<f64>()
            / total;
        (mean, var)
    }

    /// (⟨q⟩, Var q) from the discrete Fourier transform of the amplitudes.
    pub fn q_stats(&self) -> (f64, f64) {
        let m = self.amps.len();
        let mut buf = self.amps.clone();
        FftPlanner::<f64>::new()
            .plan_fft_forward(m)
            .process(&mut buf);
        let scale = 2.0 * std::f64::consts::PI / (m as f64 * self.dpi);
        let q = |j: usize| -> f64 {
            let f = if j < m.div_ceil(2) {
                j as f64
            } else {
                j as f64 - m as f64
            };
            f * scale
        };
        let w: Vec<f64> = buf.iter().map(|z| z.norm_sqr()).collect();
        let total: f64 = w.iter().sum();
        let mean = w.iter().enumerate().map(|(j, p)| p * q(j)).sum::<f64>() / total;
        let var = w
            .iter()
            .enumerate()
            .map(|(j, p)| p * (q(j) - mean).powi(2))
            .sum::<f64>()
            / total;
        (mean, var)
    }
}

/// Impulsive coupling g₀ q A.
#[derive(Clone, Debug)]
pub struct CouplingSpec {
    g0: f64,
    op: Operator,
}

impl CouplingSpec {
    pub fn new(g0: f64, op: Operator) -> Result<Self> {
        if !g0.is_finite() {
            return Err(Error::NonFinite("coupling strength"));
        }
        op.require_hermitian(ALGEBRAIC_TOL * op.frobenius_norm().max(1.0))?;
        Ok(Self { g0, op })
    }

    pub fn g0(&self) -> f64 {
        self.g0
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }
}

/// Distinct eigenvalues of `op` with post-selected amplitudes ⟨ψ₂|P_a|ψ₁⟩.
fn branch_amplitudes(
    op: &Operator,
    psi1: &StateVector,
    psi2: &StateVector,
) -> Result<Vec<(f64, C64)>> {
    check_dim(op.dim(), psi1.dim())?;
    check_dim(op.dim(), psi2.dim())?;
    let eig = eig_hermitian(op)?;
    let scale = eig.values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    eig.eigenspaces(EIGEN_TOL * scale)
        .into_iter()
        .map(|(value, members)| {
            let mut amp = ZERO;
            for k in members {
                let v = &eig.vectors[k];
                amp += psi2.inner(v)? * v.inner(psi1)?;
            }
            Ok((value, amp))
        })
        .collect()
}

fn superpose(p0: &PointerState, g0: f64, branches: &[(f64, C64)], pi: f64) -> C64 {
    branches
        .iter()
        .map(|(a, amp)| amp * p0.profile(pi - g0 * a))
        .sum()
}

/// Rejects pointers whose norm vanishes relative to the branch amplitudes.
fn check_compatible(branches: &[(f64, C64)], raw_norm: f64) -> Result<()> {
    let bound: f64 = branches.iter().map(|(_, z)| z.norm()).sum::<f64>();
    if bound == 0.0 || raw_norm <= INCOMPATIBLE_NORM * bound {
        return Err(Error::PostSelectionIncompatible);
    }
    Ok(())
}

/// Exact post-selected final pointer on a grid with p0's spacing that
/// covers every shifted copy of Φ₀.
pub fn pointer_final(
    psi1: &StateVector,
    psi2: &StateVector,
    c: &CouplingSpec,
    p0: &PointerState,
) -> Result<PointerState> {
    let branches = branch_amplitudes(&c.op, psi1, psi2)?;
    pointer_from_branches(&branches, c.g0, p0)
}

fn pointer_from_branches(
    branches: &[(f64, C64)],
    g0: f64,
    p0: &PointerState,
) -> Result<PointerState> {
    let shifts = branches.iter().map(|(a, _)| g0 * a);
    let lo = shifts.clone().fold(0.0_f64, f64::min);
    let hi = shifts.fold(0.0_f64, f64::max);
    let start = p0.start + lo;
    let n = ((p0.end() + hi - start) / p0.dpi).ceil() as usize + 1;
    let amps: Vec<C64> = (0..n)
        .map(|k| superpose(p0, g0, branches, start + k as f64 * p0.dpi))
        .collect();
    let raw_norm = (amps.iter().map(|z| z.norm_sqr()).sum::<f64>() * p0.dpi).sqrt();
    check_compatible(branches, raw_norm)?;
    let mut out = PointerState {
        start,
        dpi: p0.dpi,
        amps,
        width: p0.width,
        center: p0.center,
    };
    out.renormalize()?;
    Ok(out)
}

/// Inverse-CDF sampler over equal-width cells.
struct CellSampler {
    lefts: Vec<f64>,
    width: f64,
    cdf: Vec<f64>,
}

impl CellSampler {
    fn new(lefts: Vec<f64>, width: f64, weights: &[f64]) -> Result<Self> {
        let mut cdf = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for w in weights {
            acc += w;
            cdf.push(acc);
        }
        if !(acc > 0.0 && acc.is_finite()) {
            return Err(Error::PostSelectionIncompatible);
        }
        for v in &mut cdf {
            *v /= acc;
        }
        Ok(Self { lefts, width, cdf })
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let k = self.cdf.partition_point(|&c| c < u).min(self.cdf.len() - 1);
        self.lefts[k] + self.width * rng.random::<f64>()
    }
}

fn min_gap(values: &[f64]) -> f64 {
    values
        .windows(2)
        .map(|w| (w[1] - w[0]).abs())
        .fold(f64::INFINITY, f64::min)
}

/// Index of the nearest shifted eigenvalue; near-midpoint ties go to the
/// lower eigenvalue.
fn nearest_bin(reading: f64, values: &[f64]) -> usize {
    let mut best = 0;
    for k in 1..values.len() {
        let mid = 0.5 * (values[k - 1] + values[k]);
        if reading > mid + 1e-9 * (1.0 + mid.abs()) {
            best = k;
        }
    }
    best
}

/// Samples π from |Φ_f|² `trials` times and bins each reading to the
/// nearest eigenvalue; reproducible for a fixed seed regardless of
/// thread count.
pub fn strong_readout(
    psi1: &StateVector,
    psi2: &StateVector,
    c: &CouplingSpec,
    p0: &PointerState,
    trials: usize,
    seed: u64,
) -> Result<ProbDist<f64>> {
    if trials == 0 {
        return Err(Error::Invalid("need at least one trial".into()));
    }
    let branches = branch_amplitudes(&c.op, psi1, psi2)?;
    let values: Vec<f64> = branches.iter().map(|(a, _)| *a).collect();
    let gap = min_gap(&values);
    if c.g0 == 0.0 || p0.width / c.g0.abs() >= STRONG_FRACTION * gap {
        warn!(
            "strong readout outside the strong regime: dpi/g0 = {:.3e}, min gap = {gap:.3e}",
            p0.width / c.g0.abs()
        );
    }
    // merged windows of ±SPAN_WIDTHS around every shifted copy
    let half = SPAN_WIDTHS * p0.width;
    let mut windows: Vec<(f64, f64)> = values
        .iter()
        .map(|a| (p0.center + c.g0 * a - half, p0.center + c.g0 * a + half))
        .collect();
    windows.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for w in windows {
        match merged.last_mut() {
            Some(last) if w.0 <= last.1 => last.1 = last.1.max(w.1),
            _ => merged.push(w),
        }
    }
    let dpi = p0.dpi;
    let mut lefts = Vec::new();
    let mut weights = Vec::new();
    for (lo, hi) in merged {
        let n = ((hi - lo) / dpi).ceil() as usize;
        for k in 0..n {
            let left = lo + k as f64 * dpi;
            lefts.push(left);
            weights.push(superpose(p0, c.g0, &branches, left + 0.5 * dpi).norm_sqr() * dpi);
        }
    }
    check_compatible(&branches, weights.iter().sum::<f64>().sqrt())?;
    let sampler = CellSampler::new(lefts, dpi, &weights)?;
    let shifted: Vec<f64> = values.iter().map(|a| p0.center + c.g0 * a).collect();
    let ordered_up = c.g0 >= 0.0;
    let mut bins = vec![0usize; trials];
    bins.par_iter_mut().enumerate().for_each(|(t, slot)| {
        let mut rng = trial_rng(seed, t as u64);
        let reading = sampler.sample(&mut rng);
        *slot = if ordered_up {
            nearest_bin(reading, &shifted)
        } else {
            let rev: Vec<f64> = shifted.iter().rev().copied().collect();
            values.len() - 1 - nearest_bin(reading, &rev)
        };
    });
    let mut counts = vec![0.0; values.len()];
    for b in bins {
        counts[b] += 1.0;
    }
    ProbDist::from_weights(values, counts)
}

/// κ = 2 Var(q) of the pointer after an identity coupling.
pub fn calibrate_kappa(p0: &PointerState, g0: f64) -> Result<f64> {
    let one = StateVector::basis(1, 0)?;
    let id = CouplingSpec::new(g0, Operator::identity(1))?;
    let shifted = pointer_final(&one, &one, &id, p0)?;
    Ok(2.0 * shifted.q_stats().1)
}

/// Two-quadrature readout (Δ⟨π⟩ + i Δ⟨q⟩/κ)/g₀ of a final pointer.
pub fn pointer_readout(fin: &PointerState, p0: &PointerState, g0: f64, kappa: f64) -> C64 {
    let (pi_f, _) = fin.pi_stats();
    let (pi_0, _) = p0.pi_stats();
    let (q_f, _) = fin.q_stats();
    let (q_0, _) = p0.q_stats();
    c((pi_f - pi_0) / g0, (q_f - q_0) / (g0 * kappa))
}

/// Weak measurement estimate of A_w from pointer means.
pub fn weak_readout(
    psi1: &StateVector,
    psi2: &StateVector,
    c: &CouplingSpec,
    p0: &PointerState,
) -> Result<C64> {
    if c.g0 == 0.0 {
        return Err(Error::Invalid("weak readout needs g0 != 0".into()));
    }
    let (_, var_q) = p0.q_stats();
    if let Ok(r) = make_generic_with_cutoff(psi1, psi2, 0.0) {
        if let Ok(d2) = weak_moment(&r, &c.op, 2) {
            let crit = c.g0 * c.g0 * d2.norm() * var_q;
            if crit >= WEAK_READOUT_LIMIT {
                warn!("weak readout outside the weak regime: g0^2 |dA_w^2| dq^2 = {crit:.3e}");
            }
        }
    }
    let fin = pointer_final(psi1, psi2, c, p0)?;
    let kappa = calibrate_kappa(p0, c.g0)?;
    Ok(pointer_readout(&fin, p0, c.g0, kappa))
}

/// (L₋)_w/(√2N) for the auxiliary spin pre-selected in L_z = N and
/// post-selected in L_x = N.
pub fn aux_factor(n_aux: usize) -> Result<C64> {
    let s = SpinOps::new(n_aux);
    let (pre, post) = (s.top_z(), s.extremal_x(true));
    let ov = post.inner(&pre)?;
    if ov.norm() == 0.0 {
        return Err(Error::PostSelectionIncompatible);
    }
    Ok(s.lower.sandwich(&post, &pre)? / ov / (2.0_f64.sqrt() * n_aux as f64))
}

/// System ⊗ auxiliary coupling operator (X†L₊ + XL₋)/(√2N) with
/// X = ⟨b|a⟩|b⟩⟨a|, whose weak value is the two-amplitude ϱ(a,b).
pub fn offdiag_coupling(a: &StateVector, b: &StateVector, n_aux: usize) -> Result<Operator> {
    check_dim(a.dim(), b.dim())?;
    let s = SpinOps::new(n_aux);
    let x = b.outer(a).scale(b.inner(a)?);
    let o = &x.adjoint().tensor(&s.raise)? + &x.tensor(&s.lower)?;
    Ok(o.scale(c(1.0 / (2.0_f64.sqrt() * n_aux as f64), 0.0)))
}

/// Estimate of ϱ(a,b) from a pointer coupled to the system through a
/// spin-N_aux auxiliary.
pub fn offdiag_readout(
    psi1: &StateVector,
    psi2: &StateVector,
    a: &StateVector,
    b: &StateVector,
    n_aux: usize,
    g0: f64,
    p0: &PointerState,
) -> Result<C64> {
    if n_aux < 2 {
        return Err(Error::Invalid(format!(
            "auxiliary spin must be at least 2, got {n_aux}"
        )));
    }
    let s = SpinOps::new(n_aux);
    let big1 = psi1.tensor(&s.top_z())?;
    let big2 = psi2.tensor(&s.extremal_x(true))?;
    let c = CouplingSpec::new(g0, offdiag_coupling(a, b, n_aux)?)?;
    let fin = pointer_final(&big1, &big2, &c, p0)?;
    let kappa = calibrate_kappa(p0, g0)?;
    Ok(pointer_readout(&fin, p0, g0, kappa) / aux_factor(n_aux)?)
}

/// Reduced system state after coupling, before any post-selection.
pub fn reduced_after_coupling(
    psi1: &StateVector,
    coupling: &CouplingSpec,
    p0: &PointerState,
) -> Result<Operator> {
    check_dim(coupling.op.dim(), psi1.dim())?;
    let eig = eig_hermitian(&coupling.op)?;
    let d = psi1.dim();
    let comps: Vec<(f64, StateVector)> = eig
        .values
        .iter()
        .zip(&eig.vectors)
        .map(|(&v, e)| Ok((v, e.scale(e.inner(psi1)?))))
        .collect::<Result<_>>()?;
    let w2 = p0.width * p0.width;
    let mut out = Operator::zeros(d);
    for (a, u) in &comps {
        for (a2, v) in &comps {
            // ⟨Φ₀(· − g a')|Φ₀(· − g a)⟩ for the Gaussian profile
            let ov = (-(coupling.g0 * (a - a2)).powi(2) / (8.0 * w2)).exp();
            out = &out + &u.outer(v).scale(c(ov, 0.0));
        }
    }
    Ok(out)
}

/// Branch decomposition ϱ̂ = Σ_k w_k ϱ̂_k of the system two-state.
#[derive(Clone, Debug)]
pub struct Decomposition {
    pub weights: Vec<C64>,
    pub branches: Vec<TwoState>,
}

impl Decomposition {
    pub fn new(weights: Vec<C64>, branches: Vec<TwoState>) -> Result<Self> {
        check_dim(weights.len(), branches.len())?;
        if weights.is_empty() {
            return Err(Error::Invalid("empty decomposition".into()));
        }
        Ok(Self { weights, branches })
    }

    fn check_reconstructs(&self, r: &TwoState) -> Result<()> {
        let terms: Vec<(C64, TwoState)> = self
            .weights
            .iter()
            .copied()
            .zip(self.branches.iter().cloned())
            .collect();
        let sum = TwoState::combination(&terms)?;
        let err = sum.operator().distance(r.operator())?;
        if err > 1e-8 * r.matrix().norm().max(1.0) {
            return Err(Error::Invalid(format!(
                "decomposition does not reconstruct the two-state (error {err:.2e})"
            )));
        }
        Ok(())
    }

    /// Σ|w_k|² Re(A_w)_k / Σ|w_k|²
    pub fn averaged_weak_value(&self, a: &Operator) -> Result<f64> {
        let mut num = 0.0;
        let mut den = 0.0;
        for (w, b) in self.weights.iter().zip(&self.branches) {
            num += w.norm_sqr() * weak_value(b, a)?.value.re;
            den += w.norm_sqr();
        }
        Ok(num / den)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Regime {
    Strong,
    Weak,
    Intermediate,
    Unresolved,
}

impl Regime {
    pub fn as_str(&self) -> &'static str {
        match self {
            Regime::Strong => "strong",
            Regime::Weak => "weak",
            Regime::Intermediate => "intermediate",
            Regime::Unresolved => "unresolved",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RegimeReport {
    pub regime: Regime,
    /// Δπ/g₀
    pub resolution: f64,
    pub min_gap: f64,
    /// g₀²|ΔA_w²|Δq²
    pub global: f64,
    /// g₀²|Δ(A_w²)_k|Δq² per branch
    pub branches: Vec<f64>,
}

/// Classifies the coupling as strong, weak, intermediate or unresolved.
/// Weak is tested first so that vanishing weak moments report "weak".
pub fn classify_regime(
    psi1: &StateVector,
    psi2: &StateVector,
    c: &CouplingSpec,
    p0: &PointerState,
    decomposition: Option<&Decomposition>,
) -> Result<RegimeReport> {
    let r = make_generic_with_cutoff(psi1, psi2, 0.0)?;
    let (_, var_q) = p0.q_stats();
    let g2 = c.g0 * c.g0 * var_q;
    let global = g2 * weak_moment(&r, &c.op, 2)?.norm();
    let branches = match decomposition {
        Some(d) => {
            d.check_reconstructs(&r)?;
            d.branches
                .iter()
                .map(|b| Ok(g2 * weak_moment(b, &c.op, 2)?.norm()))
                .collect::<Result<Vec<_>>>()?
        }
        None => Vec::new(),
    };
    let values = eig_hermitian(&c.op)?.values;
    let scale = values.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let mut distinct: Vec<f64> = Vec::new();
    for v in values {
        if distinct
            .last()
            .is_none_or(|l| (v - l).abs() > EIGEN_TOL * scale)
        {
            distinct.push(v);
        }
    }
    let gap = min_gap(&distinct);
    let resolution = if c.g0 == 0.0 {
        f64::INFINITY
    } else {
        p0.width / c.g0.abs()
    };
    let regime = if global < WEAK_G {
        Regime::Weak
    } else if resolution < STRONG_FRACTION * gap {
        Regime::Strong
    } else if global > INTERMEDIATE_G
        && !branches.is_empty()
        && branches.iter().all(|b| *b < BRANCH_B)
    {
        Regime::Intermediate
    } else {
        Regime::Unresolved
    };
    Ok(RegimeReport {
        regime,
        resolution,
        min_gap: gap,
        global,
        branches,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct IntermediateReadout {
    /// Mean of (π − ⟨π⟩₀)/g₀ over sampled readings.
    pub mc_mean: f64,
    pub mc_stderr: f64,
    /// Σ|w_k|² Re(A_w)_k / Σ|w_k|²
    pub closed_form: f64,
    pub regime: RegimeReport,
}

/// Samples single pointer readings from the exact post-selected pointer
/// and compares their mean with the branch-averaged weak value.
#[allow(clippy::too_many_arguments)]
pub fn intermediate_readout(
    psi1: &StateVector,
    psi2: &StateVector,
    c: &CouplingSpec,
    p0: &PointerState,
    decomposition: &Decomposition,
    trials: usize,
    seed: u64,
) -> Result<IntermediateReadout> {
    if trials < 2 {
        return Err(Error::Invalid("need at least two trials".into()));
    }
    let report = classify_regime(psi1, psi2, c, p0, Some(decomposition))?;
    if report.regime != Regime::Intermediate {
        warn!(
            "intermediate readout in the {} regime",
            report.regime.as_str()
        );
    }
    let closed_form = decomposition.averaged_weak_value(&c.op)?;
    let fin = pointer_final(psi1, psi2, c, p0)?;
    let (pi_0, _) = p0.pi_stats();
    let lefts: Vec<f64> = (0..fin.len()).map(|k| fin.pi(k) - 0.5 * fin.dpi).collect();
    let weights: Vec<f64> = fin.amps.iter().map(|z| z.norm_sqr()).collect();
    let sampler = CellSampler::new(lefts, fin.dpi, &weights)?;
    let mut readings = vec![0.0; trials];
    readings.par_iter_mut().enumerate().for_each(|(t, slot)| {
        let mut rng = trial_rng(seed, t as u64);
        *slot = (sampler.sample(&mut rng) - pi_0) / c.g0;
    });
    let n = trials as f64;
    let mean = readings.iter().sum::<f64>() / n;
    let var = readings.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(IntermediateReadout {
        mc_mean: mean,
        mc_stderr: (var / n).sqrt(),
        closed_form,
        regime: report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_hermitian, random_state, sigma_z, I, ONE};
    use crate::observables::abl_prob;
    use crate::two_state::make_generic;
    use std::f64::consts::FRAC_1_SQRT_2 as S;

    fn up_x() -> StateVector {
        StateVector::from_real(&[S, S]).unwrap()
    }
    fn up_y() -> StateVector {
        StateVector::new(vec![c(S, 0.0), c(0.0, S)]).unwrap()
    }

    #[test]
    fn gaussian_moments() {
        let p = PointerState::gaussian(0.7, 1.3).unwrap();
        assert!((p.norm_sqr() - 1.0).abs() < 1e-10);
        let (m, v) = p.pi_stats();
        assert!((m - 0.7).abs() < 1e-10);
        assert!((v / (1.3 * 1.3) - 1.0).abs() < 0.02);
        let (qm, qv) = p.q_stats();
        assert!(qm.abs() < 1e-10);
        assert!((qv * 4.0 * 1.3 * 1.3 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn narrow_grid_rejected() {
        assert!(PointerState::gaussian_on_grid(0.0, 1.0, 0.05, 3.0).is_err());
    }

    #[test]
    fn eigenstate_gives_rigid_shift() {
        let p0 = PointerState::gaussian(0.0, 1.0).unwrap();
        let e = StateVector::basis(2, 0).unwrap();
        let c = CouplingSpec::new(2.5, sigma_z()).unwrap();
        let fin = pointer_final(&e, &up_x(), &c, &p0).unwrap();
        for k in 0..fin.len() {
            let expect = p0.profile(fin.pi(k) - 2.5);
            assert!((fin.amps()[k].norm() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_coupling_keeps_pointer() {
        let p0 = PointerState::gaussian(0.0, 1.0).unwrap();
        let c = CouplingSpec::new(0.0, random_hermitian(3, 1)).unwrap();
        let fin = pointer_final(&random_state(3, 2), &random_state(3, 3), &c, &p0).unwrap();
        assert_eq!(fin.len(), p0.len());
        for (a, b) in fin.amps().iter().zip(p0.amps()) {
            assert!((a.norm() - b.norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn incompatible_post_selection() {
        let p0 = PointerState::gaussian(0.0, 1.0).unwrap();
        let c = CouplingSpec::new(1.0, sigma_z()).unwrap();
        let (e0, e1) = (
            StateVector::basis(2, 0).unwrap(),
            StateVector::basis(2, 1).unwrap(),
        );
        assert_eq!(
            pointer_final(&e0, &e1, &c, &p0),
            Err(Error::PostSelectionIncompatible)
        );
    }

    #[test]
    fn identity_readout_is_one() {
        let p0 = PointerState::gaussian(0.0, 1.0).unwrap();
        let c = CouplingSpec::new(1e-3, Operator::identity(2)).unwrap();
        let w = weak_readout(&up_x(), &up_y(), &c, &p0).unwrap();
        assert!((w - ONE).norm() < 1e-9, "{w}");
    }

    #[test]
    fn weak_readout_sigma_z_is_i() {
        let p0 = PointerState::gaussian(0.0, 1.0).unwrap();
        let c = CouplingSpec::new(1e-3, sigma_z()).unwrap();
        let w = weak_readout(&up_x(), &up_y(), &c, &p0).unwrap();
        assert!((w - I).norm() < 0.01, "{w}");
    }

    #[test]
    fn strong_eigenstate_single_bin() {
        let p0 = PointerState::gaussian(0.0, 0.01).unwrap();
        let c = CouplingSpec::new(1e3, sigma_z()).unwrap();
        let e = StateVector::basis(2, 1).unwrap();
        let d = strong_readout(&e, &up_x(), &c, &p0, 1000, 7).unwrap();
        assert_eq!(d.prob(&-1.0), 1.0);
    }

    #[test]
    fn strong_readout_deterministic_for_seed() {
        let p0 = PointerState::gaussian(0.0, 0.01).unwrap();
        let c = CouplingSpec::new(1e3, random_hermitian(3, 2)).unwrap();
        let (p1, p2) = (random_state(3, 4), random_state(3, 5));
        let a = strong_readout(&p1, &p2, &c, &p0, 5000, 11).unwrap();
        let b = strong_readout(&p1, &p2, &c, &p0, 5000, 11).unwrap();
        assert_eq!(a, b);
        let abl = abl_prob(&make_generic(&p1, &p2).unwrap(), c.op()).unwrap();
        for (v, p) in abl.iter() {
            let sigma = (p * (1.0 - p) / 5000.0).sqrt().max(1e-4);
            assert!((a.prob(v) - p).abs() < 4.0 * sigma);
        }
    }

    #[test]
    fn nearest_bin_ties_go_low() {
        let v = [-1.0, 1.0, 3.0];
        assert_eq!(nearest_bin(0.0, &v), 0);
        assert_eq!(nearest_bin(0.1, &v), 1);
        assert_eq!(nearest_bin(2.0, &v), 1);
        assert_eq!(nearest_bin(9.0, &v), 2);
    }

    #[test]
    fn aux_factor_is_sqrt2() {
        for n in [2, 5, 30] {
            assert!((aux_factor(n).unwrap() - c(2.0_f64.sqrt(), 0.0)).norm() < 1e-10);
        }
    }

    #[test]
    fn classify_trivial_cases() {
        let p0 = PointerState::gaussian(0.0, 0.01).unwrap();
        let e = StateVector::basis(2, 0).unwrap();
        let c = CouplingSpec::new(1e3, sigma_z()).unwrap();
        let rep = classify_regime(&e, &e, &c, &p0, None).unwrap();
        assert_eq!(rep.regime, Regime::Weak);
        let rep = classify_regime(&up_x(), &up_y(), &c, &p0, None).unwrap();
        assert_eq!(rep.regime, Regime::Strong);
        assert!((rep.resolution - 1e-5).abs() < 1e-12 && (rep.min_gap - 2.0).abs() < 1e-12);
    }

    #[test]
    fn single_branch_intermediate_is_weak_value() {
        let r = make_generic(&up_x(), &up_y()).unwrap();
        let d = Decomposition::new(vec![ONE], vec![r]).unwrap();
        let w = d.averaged_weak_value(&sigma_z()).unwrap();
        assert!(w.abs() < 1e-12);
        let bad = Decomposition::new(
            vec![c(2.0, 0.0)],
            vec![make_generic(&up_x(), &up_y()).unwrap()],
        )
        .unwrap();
        let p0 = PointerState::gaussian(0.0, 1.0).unwrap();
        let cs = CouplingSpec::new(0.1, sigma_z()).unwrap();
        assert!(classify_regime(&up_x(), &up_y(), &cs, &p0, Some(&bad)).is_err());
    }

    #[test]
    fn reduced_state_weak_coupling_is_undisturbed() {
        let p0 = PointerState::gaussian(0.0, 1.0).unwrap();
        let psi = random_state(3, 8);
        let rho = Operator::projector(&psi);
        let a = random_hermitian(3, 9);
        let mut prev = f64::INFINITY;
        for g in [0.4, 0.2, 0.1, 0.05] {
            let c = CouplingSpec::new(g, a.clone()).unwrap();
            let d = reduced_after_coupling(&psi, &c, &p0)
                .unwrap()
                .distance(&rho)
                .unwrap();
            assert!(d < prev);
            prev = d;
        }
    }
}
