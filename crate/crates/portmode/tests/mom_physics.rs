//! Physics validation of the generated thin-wire dipole systems against
//! classical closed-form results and internal consistency checks.

use ndarray::{array, Array1};
use num_complex::Complex64 as C;
use portmode::mom::{first_resonance_length, DipoleArraySpec, DipoleElement};
use portmode::*;

const C0: f64 = 299_792_458.0;

fn single_dipole(length: f64, radius: f64, freq: f64, segs: usize, sigma: f64) -> FullWaveSystem {
    build_dipole_array(&DipoleArraySpec {
        dipoles: vec![DipoleElement {
            length,
            radius,
            center: [0.0; 3],
            axis: [0.0, 0.0, 1.0],
        }],
        segments_per_dipole: segs,
        frequency: freq,
        conductivity: sigma,
    })
    .unwrap()
}

#[test]
fn resonant_input_resistance_near_71_ohm() {
    let freq = 1e9;
    let len = first_resonance_length(freq, 0.01, 31, f64::INFINITY).unwrap();
    let lam = C0 / freq;
    assert!(
        len / lam > 0.44 && len / lam < 0.50,
        "first resonance at {} lambda",
        len / lam
    );
    let radius = portmode::mom::strip_equivalent_radius(0.01 * len);
    let sys = single_dipole(len, radius, freq, 31, f64::INFINITY);
    let c = sys.center_basis(0).unwrap();
    let z = 1.0 / sys.input_admittance(c).unwrap();
    assert!(
        z.im.abs() < 0.05 * z.re,
        "resonance residual reactance {}",
        z.im
    );
    assert!(
        (z.re - 71.2).abs() <= 0.15 * 71.2,
        "input resistance {} outside 71.2 +/- 15 %",
        z.re
    );
}

#[test]
fn resonant_broadside_directivity_near_2_15_dbi() {
    let freq = 1e9;
    let len = first_resonance_length(freq, 0.01, 31, f64::INFINITY).unwrap();
    let radius = portmode::mom::strip_equivalent_radius(0.01 * len);
    let sys = single_dipole(len, radius, freq, 31, f64::INFINITY);
    let c = sys.center_basis(0).unwrap();
    let cfg = PortConfig::shared(vec![c], 50.0, 0.0);
    let dir = Direction {
        label: "broadside".into(),
        e_hat: [0.0, 0.0, 1.0],
        r_hat: [1.0, 0.0, 0.0],
    };
    let ops = PortOperators::reduce(&sys, &cfg, &[dir]).unwrap();
    let v = array![C::new(1.0, 0.0)];
    let d = directivity(&ops, &v, 0).unwrap();
    let dbi = 10.0 * d.log10();
    assert!(
        (dbi - 2.15).abs() <= 0.15,
        "broadside directivity {dbi} dBi"
    );
}

#[test]
fn far_separated_dipoles_decouple() {
    let freq = 1e9;
    let lam = C0 / freq;
    let len = 0.476 * lam;
    let sys = build_dipole_array(&DipoleArraySpec {
        dipoles: vec![
            DipoleElement {
                length: len,
                radius: 1e-3 * lam,
                center: [0.0; 3],
                axis: [0.0, 0.0, 1.0],
            },
            DipoleElement {
                length: len,
                radius: 1e-3 * lam,
                center: [10.0 * lam, 0.0, 0.0],
                axis: [0.0, 0.0, 1.0],
            },
        ],
        segments_per_dipole: 15,
        frequency: freq,
        conductivity: f64::INFINITY,
    })
    .unwrap();
    let ports: Vec<usize> = (0..2).map(|i| sys.center_basis(i).unwrap()).collect();
    let (y, _) = reduce_admittance(&sys, &ports).unwrap();
    let z = solve_linear(&y, &ndarray::Array2::eye(2)).unwrap();
    // Induced-EMF estimate of the mutual impedance of far side-by-side
    // near-half-wave dipoles: |Z12| ~ 60 lambda / (pi d), here 1.91 Ohm.
    let emf = 60.0 * lam / (std::f64::consts::PI * 10.0 * lam);
    let z12 = z[[0, 1]].norm();
    assert!(
        (z12 - emf).abs() < 0.3 * emf,
        "mutual impedance {z12} vs induced-EMF estimate {emf}"
    );
    let ratio = z12 / z[[0, 0]].re;
    assert!(ratio < 0.03, "coupling at 10 lambda is {ratio}");
}

#[test]
fn radiated_power_matches_independent_sphere_integration() {
    // Cross-check the radiation Gram against a 16 x 32 spherical grid that
    // differs from the assembly grid.
    let freq = 1e9;
    let lam = C0 / freq;
    let sys = build_dipole_array(&DipoleArraySpec {
        dipoles: vec![
            DipoleElement {
                length: 0.45 * lam,
                radius: 1e-3 * lam,
                center: [0.0; 3],
                axis: [0.0, 0.0, 1.0],
            },
            DipoleElement {
                length: 0.45 * lam,
                radius: 1e-3 * lam,
                center: [0.4 * lam, 0.0, 0.0],
                axis: [0.0, 0.0, 1.0],
            },
        ],
        segments_per_dipole: 11,
        frequency: freq,
        conductivity: f64::INFINITY,
    })
    .unwrap();
    let n = sys.n;
    // A fixed, structured current vector.
    let i_vec = Array1::from_shape_fn(n, |m| C::new(1.0 + 0.1 * m as f64, 0.05 * m as f64));
    let mut p_gram = 0.0;
    for a in 0..n {
        for b in 0..n {
            p_gram += (i_vec[a].conj() * sys.r_rad[[a, b]] * i_vec[b]).re;
        }
    }
    p_gram *= 0.5;

    // Independent quadrature: 16-point Gauss-Legendre in cos(theta),
    // 32 uniform points in phi, both E-field polarizations.
    let (nodes, weights) = gauss_legendre_16();
    let nphi = 32;
    let mut p_int = 0.0;
    for (ct, w) in nodes.iter().zip(weights.iter()) {
        let st = (1.0 - ct * ct).sqrt();
        for ip in 0..nphi {
            let phi = 2.0 * std::f64::consts::PI * ip as f64 / nphi as f64;
            let r_hat = [st * phi.cos(), st * phi.sin(), *ct];
            let e_theta = [ct * phi.cos(), ct * phi.sin(), -st];
            let e_phi = [-phi.sin(), phi.cos(), 0.0];
            let mut intensity = 0.0;
            for e_hat in [e_theta, e_phi] {
                let row = sys.farfield_row(e_hat, r_hat).unwrap();
                let field: C = row.iter().zip(i_vec.iter()).map(|(f, i)| f * i).sum();
                intensity += field.norm_sqr();
            }
            p_int += w * 2.0 * std::f64::consts::PI / nphi as f64 * intensity;
        }
    }
    p_int *= 0.5 / portmode::consts::Z0;
    let rel = (p_int - p_gram).abs() / p_gram;
    assert!(rel < 0.02, "sphere integration off by {rel}");
}

#[test]
fn input_impedance_converges_with_mesh() {
    // Doubling the segment count at the resonant length moves the input
    // impedance by less than 3 %.
    let freq = 1e9;
    let len = first_resonance_length(freq, 0.01, 21, f64::INFINITY).unwrap();
    let radius = portmode::mom::strip_equivalent_radius(0.01 * len);
    let zin = |segs: usize| {
        let sys = single_dipole(len, radius, freq, segs, f64::INFINITY);
        let c = sys.center_basis(0).unwrap();
        1.0 / sys.input_admittance(c).unwrap()
    };
    let z_coarse = zin(21);
    let z_fine = zin(41);
    let rel = (z_fine - z_coarse).norm() / z_fine.norm();
    assert!(rel < 0.03, "mesh refinement moved Zin by {rel}");
}

#[test]
fn ohmic_loss_lowers_radiation_efficiency() {
    let freq = 1e9;
    let lam = C0 / freq;
    let len = 0.476 * lam;
    let radius = 2e-4 * lam;
    // Copper.
    let sys = single_dipole(len, radius, freq, 21, 5.96e7);
    let c = sys.center_basis(0).unwrap();
    let cfg = PortConfig::shared(vec![c], 50.0, 0.0);
    let ops = PortOperators::reduce(&sys, &cfg, &[]).unwrap();
    let sol = evaluate(&ops, &array![C::new(1.0, 0.0)]).unwrap();
    assert!(sol.eta_rad < 1.0);
    assert!(
        sol.eta_rad > 0.9,
        "a copper resonant dipole radiates efficiently, got {}",
        sol.eta_rad
    );
    assert!(sol.p_lost > 0.0);
}

/// 16-point Gauss-Legendre nodes/weights on [-1, 1], computed by Newton
/// iteration so the test carries its own quadrature.
fn gauss_legendre_16() -> (Vec<f64>, Vec<f64>) {
    let n = 16;
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0f64, 0.0f64);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * x * p1 - j as f64 * p2) / (j as f64 + 1.0);
            }
            let dp = n as f64 * (x * p0 - p1) / (x * x - 1.0);
            let dx = p0 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (mut p0, mut p1) = (1.0f64, 0.0f64);
        for j in 0..n {
            let p2 = p1;
            p1 = p0;
            p0 = ((2 * j + 1) as f64 * x * p1 - j as f64 * p2) / (j as f64 + 1.0);
        }
        let dp = n as f64 * (x * p0 - p1) / (x * x - 1.0);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}
