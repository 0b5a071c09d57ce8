use num_complex::Complex64 as C64;
use twostate::dynamics::{continuity_residual, evolve_lattice, Lattice, LatticeTwoAmplitude};

fn gaussian(lat: &Lattice, center: f64, sigma: f64, k0: f64) -> Vec<C64> {
    let v: Vec<C64> = lat
        .grid()
        .iter()
        .map(|&x| {
            C64::from_polar(
                (-(x - center).powi(2) / (4.0 * sigma * sigma)).exp(),
                k0 * x,
            )
        })
        .collect();
    let norm = (v.iter().map(|z| z.norm_sqr()).sum::<f64>() * lat.dx()).sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

fn lattice(half_width: f64, dx: f64) -> Lattice {
    let points = (2.0 * half_width / dx).round() as usize + 1;
    Lattice::free(points, dx, -half_width, 1.0).unwrap()
}

#[test]
fn free_gaussian_width_law() {
    let (sigma0, mass, t) = (1.0, 1.0, 1.0);
    let lat = lattice(8.0, 0.05);
    let psi = gaussian(&lat, 0.0, sigma0, 0.0);
    let phi = gaussian(&lat, 0.0, 1.5, 0.0);
    let rho = LatticeTwoAmplitude::separable(lat.clone(), &psi, &phi).unwrap();
    let out = evolve_lattice(&rho, 0.01, 100).unwrap();
    let p = out.marginal_first();
    let total: f64 = p.iter().sum();
    let x = lat.grid();
    let mean: f64 = p.iter().zip(&x).map(|(w, x)| w * x).sum::<f64>() / total;
    let var: f64 = p
        .iter()
        .zip(&x)
        .map(|(w, x)| w * (x - mean).powi(2))
        .sum::<f64>()
        / total;
    let expect = sigma0 * (1.0 + (t / (2.0 * mass * sigma0 * sigma0)).powi(2)).sqrt();
    let rel = (var.sqrt() / expect - 1.0).abs();
    assert!(rel < 1e-4, "relative width error {rel:e}");
}

fn residual_at(dx: f64, dt: f64) -> f64 {
    let lat = lattice(6.0, dx);
    let a = gaussian(&lat, -0.4, 0.8, 1.2);
    let b = gaussian(&lat, 0.3, 1.0, -0.7);
    let c = gaussian(&lat, 0.1, 0.9, 0.5);
    let d = gaussian(&lat, -0.2, 1.1, 0.2);
    let r1 = LatticeTwoAmplitude::separable(lat.clone(), &a, &b).unwrap();
    let r2 = LatticeTwoAmplitude::separable(lat, &c, &d).unwrap();
    continuity_residual(&r1, &r2, dt).unwrap()
}

#[test]
fn continuity_residual_is_second_order() {
    let coarse = residual_at(0.2, 0.02);
    let fine = residual_at(0.1, 0.01);
    let finer = residual_at(0.05, 0.005);
    let order1 = (coarse / fine).log2();
    let order2 = (fine / finer).log2();
    assert!(
        order1 >= 1.8 && order2 >= 1.8,
        "orders {order1:.3} {order2:.3}"
    );
}
