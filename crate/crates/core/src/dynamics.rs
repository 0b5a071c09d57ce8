//! Time evolution of two-states and multiple-states, and a 1D lattice
//! integrator for two-amplitudes ϱ(x′, x″).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{c, check_dim, Operator, ALGEBRAIC_TOL, C64, I, ZERO};
use crate::multistate::{MultiTerm, MultipleState};
use crate::two_state::TwoState;

/// Piecewise-constant Hamiltonian over [t0, t1] (ħ = 1).
#[derive(Clone, Debug)]
pub struct EvolutionSpec {
    h: Operator,
    t0: f64,
    t1: f64,
}

impl EvolutionSpec {
    pub fn new(h: Operator, t0: f64, t1: f64) -> Result<Self> {
        h.require_hermitian(ALGEBRAIC_TOL)?;
        if !t0.is_finite() || !t1.is_finite() {
            return Err(Error::NonFinite("evolution times"));
        }
        Ok(Self { h, t0, t1 })
    }

    pub fn free(dim: usize, t0: f64, t1: f64) -> Self {
        Self {
            h: Operator::zeros(dim),
            t0,
            t1,
        }
    }

    pub fn hamiltonian(&self) -> &Operator {
        &self.h
    }

    pub fn duration(&self) -> f64 {
        self.t1 - self.t0
    }

    /// Same Hamiltonian, interval traversed backwards.
    pub fn reversed(&self) -> Self {
        Self {
            h: self.h.clone(),
            t0: self.t1,
            t1: self.t0,
        }
    }

    pub fn propagator(&self) -> Result<Operator> {
        self.h.unitary_evolution(self.duration())
    }
}

/// ϱ̂(t₁) = U ϱ̂(t₀) U†
pub fn evolve(r: &TwoState, spec: &EvolutionSpec) -> Result<TwoState> {
    check_dim(spec.h.dim(), r.dim())?;
    let u = spec.propagator()?;
    Ok(TwoState::new(&(&u * r.operator()) * &u.adjoint()))
}

/// Factor-wise conjugation, one spec per interval.
pub fn evolve_multi(m: &MultipleState, specs: &[EvolutionSpec]) -> Result<MultipleState> {
    check_dim(m.intervals(), specs.len())?;
    let us = specs
        .iter()
        .zip(m.dims())
        .map(|(s, &d)| {
            check_dim(d, s.h.dim())?;
            let u = s.propagator()?;
            let ud = u.adjoint();
            Ok((u, ud))
        })
        .collect::<Result<Vec<_>>>()?;
    let terms = m
        .terms()
        .iter()
        .map(|t| MultiTerm {
            coeff: t.coeff,
            factors: t
                .factors
                .iter()
                .zip(&us)
                .map(|(f, (u, ud))| TwoState::new(&(u * f.operator()) * ud))
                .collect(),
        })
        .collect();
    MultipleState::new(terms)
}

/// Uniform 1D grid x_k = x0 + k·dx with hard walls beyond both ends.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    points: usize,
    dx: f64,
    x0: f64,
    mass: f64,
    potential: Vec<f64>,
}

pub const MIN_LATTICE_POINTS: usize = 8;
/// Cells excluded at each edge when evaluating the continuity residual.
pub const BOUNDARY_CELLS: usize = 3;

impl Lattice {
    pub fn new(points: usize, dx: f64, x0: f64, mass: f64, potential: Vec<f64>) -> Result<Self> {
        if points < MIN_LATTICE_POINTS {
            return Err(Error::Lattice(format!(
                "need at least {MIN_LATTICE_POINTS} points, got {points}"
            )));
        }
        if potential.len() != points {
            return Err(Error::DimensionMismatch {
                expected: points,
                found: potential.len(),
            });
        }
        if !(dx.is_finite() && dx > 0.0) || !(mass.is_finite() && mass > 0.0) || !x0.is_finite() {
            return Err(Error::Lattice(
                "dx and mass must be positive and finite".into(),
            ));
        }
        if potential.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("potential"));
        }
        Ok(Self {
            points,
            dx,
            x0,
            mass,
            potential,
        })
    }

    pub fn free(points: usize, dx: f64, x0: f64, mass: f64) -> Result<Self> {
        Self::new(points, dx, x0, mass, vec![0.0; points])
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn x(&self, k: usize) -> f64 {
        self.x0 + k as f64 * self.dx
    }

    pub fn grid(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.x(k)).collect()
    }

    /// Tridiagonal H = −∂²/(2m) + V as (diagonal, off-diagonal).
    pub fn hamiltonian_bands(&self) -> (Vec<f64>, f64) {
        let a = 1.0 / (2.0 * self.mass * self.dx * self.dx);
        let diag = self.potential.iter().map(|v| 2.0 * a + v).collect();
        (diag, -a)
    }

    /// Dense single-particle Hamiltonian.
    pub fn hamiltonian(&self) -> Operator {
        let (diag, off) = self.hamiltonian_bands();
        let n = self.points;
        let m = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                c(diag[i], 0.0)
            } else if i.abs_diff(j) == 1 {
                c(off, 0.0)
            } else {
                ZERO
            }
        });
        Operator::from_matrix_unchecked(m)
    }
}

/// ϱ(x′, x″) on a lattice; rows index x′, columns x″.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeTwoAmplitude {
    lattice: Lattice,
    values: DMatrix<C64>,
}

impl LatticeTwoAmplitude {
    pub fn new(lattice: Lattice, values: DMatrix<C64>) -> Result<Self> {
        let m = lattice.points;
        if values.nrows() != m || values.ncols() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: values.nrows().max(values.ncols()),
            });
        }
        if values
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::NonFinite("lattice two-amplitude"));
        }
        Ok(Self { lattice, values })
    }

    /// ψ₁(x′) ψ₂*(x″)
    pub fn separable(lattice: Lattice, psi1: &[C64], psi2: &[C64]) -> Result<Self> {
        check_dim(lattice.points, psi1.len())?;
        check_dim(lattice.points, psi2.len())?;
        let values = DMatrix::from_fn(lattice.points, lattice.points, |i, j| {
            psi1[i] * psi2[j].conj()
        });
        Self::new(lattice, values)
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &DMatrix<C64> {
        &self.values
    }

    /// Σ |ϱ|² dx²
    pub fn norm_sqr(&self) -> f64 {
        self.values.norm_squared() * self.lattice.dx * self.lattice.dx
    }

    /// Marginal Σ_{x″} |ϱ(x′, x″)|² dx.
    pub fn marginal_first(&self) -> Vec<f64> {
        let dx = self.lattice.dx;
        self.values
            .row_iter()
            .map(|row| row.iter().map(|z| z.norm_sqr()).sum::<f64>() * dx)
            .collect()
    }
}

/// Precomputed Thomas elimination for (1 + zH) y = (1 − zH) x with
/// tridiagonal H.
struct Cayley {
    h_diag: Vec<f64>,
    h_off: f64,
    z: C64,
    b: C64,
    c_prime: Vec<C64>,
    denom: Vec<C64>,
}

impl Cayley {
    fn new(h_diag: &[f64], h_off: f64, z: C64) -> Self {
        let n = h_diag.len();
        let b = z * h_off;
        let mut c_prime = vec![ZERO; n];
        let mut denom = vec![ZERO; n];
        for j in 0..n {
            let a = c(1.0, 0.0) + z * h_diag[j];
            let d = if j == 0 { a } else { a - b * c_prime[j - 1] };
            denom[j] = d;
            c_prime[j] = b / d;
        }
        Self {
            h_diag: h_diag.to_vec(),
            h_off,
            z,
            b,
            c_prime,
            denom,
        }
    }

    fn apply(&self, x: &mut [C64], rhs: &mut [C64]) {
        let n = x.len();
        for j in 0..n {
            let mut hx = self.h_diag[j] * x[j];
            if j > 0 {
                hx += self.h_off * x[j - 1];
            }
            if j + 1 < n {
                hx += self.h_off * x[j + 1];
            }
            rhs[j] = x[j] - self.z * hx;
        }
        // forward elimination into rhs, back substitution into x
        rhs[0] /= self.denom[0];
        for j in 1..n {
            rhs[j] = (rhs[j] - self.b * rhs[j - 1]) / self.denom[j];
        }
        x[n - 1] = rhs[n - 1];
        for j in (0..n - 1).rev() {
            x[j] = rhs[j] - self.c_prime[j] * x[j + 1];
        }
    }
}

fn check_step(dt: f64) -> Result<()> {
    if !dt.is_finite() || dt < 0.0 {
        return Err(Error::Lattice(format!(
            "time step must be finite and non-negative, got {dt}"
        )));
    }
    Ok(())
}

/// Advances i∂ₜϱ = (H′ − H″)ϱ by `steps` Crank–Nicolson steps, applied as
/// commuting Cayley sweeps along x′ and x″. Each sweep is exactly unitary,
/// so the scheme is unconditionally stable and keeps separable inputs
/// separable.
pub fn evolve_lattice(
    rho: &LatticeTwoAmplitude,
    dt: f64,
    steps: usize,
) -> Result<LatticeTwoAmplitude> {
    check_step(dt)?;
    let mut out = rho.clone();
    if dt == 0.0 || steps == 0 {
        return Ok(out);
    }
    let n = rho.lattice.points;
    let (diag, off) = rho.lattice.hamiltonian_bands();
    let forward = Cayley::new(&diag, off, I * (dt / 2.0));
    let backward = Cayley::new(&diag, off, -I * (dt / 2.0));
    let mut buf = vec![ZERO; n];
    let mut scratch = vec![ZERO; n];
    for _ in 0..steps {
        for mut col in out.values.column_iter_mut() {
            forward.apply(col.as_mut_slice(), &mut scratch);
        }
        for i in 0..n {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = out.values[(i, j)];
            }
            backward.apply(&mut buf, &mut scratch);
            for (j, b) in buf.iter().enumerate() {
                out.values[(i, j)] = *b;
            }
        }
    }
    Ok(out)
}

/// Currents 𝒥′ and 𝒥″ of the pair, centered differences on the interior.
fn currents(
    r1: &DMatrix<C64>,
    r2: &DMatrix<C64>,
    dx: f64,
    mass: f64,
) -> (DMatrix<C64>, DMatrix<C64>) {
    let n = r1.nrows();
    let k = c(0.0, 2.0 * mass).inv();
    let mut jp = DMatrix::zeros(n, n);
    let mut jpp = DMatrix::zeros(n, n);
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let a = r1[(i, j)].conj();
            let b = r2[(i, j)];
            let da = (r1[(i + 1, j)].conj() - r1[(i - 1, j)].conj()) / (2.0 * dx);
            let db = (r2[(i + 1, j)] - r2[(i - 1, j)]) / (2.0 * dx);
            jp[(i, j)] = k * (a * db - b * da);
            let da = (r1[(i, j + 1)].conj() - r1[(i, j - 1)].conj()) / (2.0 * dx);
            let db = (r2[(i, j + 1)] - r2[(i, j - 1)]) / (2.0 * dx);
            jpp[(i, j)] = k * (a * db - b * da);
        }
    }
    (jp, jpp)
}

/// Max-norm over the interior of ∂ₜ(ϱ₁*ϱ₂) + ∂′𝒥′ − ∂″𝒥″, with both
/// fields advanced by one step of `dt` and fluxes taken at the midpoint.
pub fn continuity_residual(
    r1: &LatticeTwoAmplitude,
    r2: &LatticeTwoAmplitude,
    dt: f64,
) -> Result<f64> {
    if r1.lattice != r2.lattice {
        return Err(Error::Lattice("grid mismatch".into()));
    }
    check_step(dt)?;
    if dt == 0.0 {
        return Err(Error::Lattice("continuity residual needs dt > 0".into()));
    }
    let lat = &r1.lattice;
    let (n, dx) = (lat.points, lat.dx);
    if n <= 2 * BOUNDARY_CELLS {
        return Ok(0.0);
    }
    let r1n = evolve_lattice(r1, dt, 1)?;
    let r2n = evolve_lattice(r2, dt, 1)?;
    let (jp0, jpp0) = currents(&r1.values, &r2.values, dx, lat.mass);
    let (jp1, jpp1) = currents(&r1n.values, &r2n.values, dx, lat.mass);
    let jp = (jp0 + jp1) * c(0.5, 0.0);
    let jpp = (jpp0 + jpp1) * c(0.5, 0.0);
    let mut worst: f64 = 0.0;
    for i in BOUNDARY_CELLS..n - BOUNDARY_CELLS {
        for j in BOUNDARY_CELLS..n - BOUNDARY_CELLS {
            let p0 = r1.values[(i, j)].conj() * r2.values[(i, j)];
            let p1 = r1n.values[(i, j)].conj() * r2n.values[(i, j)];
            let dt_p = (p1 - p0) / dt;
            let div_p = (jp[(i + 1, j)] - jp[(i - 1, j)]) / (2.0 * dx);
            let div_pp = (jpp[(i, j + 1)] - jpp[(i, j - 1)]) / (2.0 * dx);
            worst = worst.max((dt_p + div_p - div_pp).norm());
        }
    }
    Ok(worst)
}
