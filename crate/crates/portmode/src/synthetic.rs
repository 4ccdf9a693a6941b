//! Seeded generators of random passive systems and port operators.
//!
//! Test support: every generated instance is passive by construction
//! (radiation and loss quadratic forms are Gram matrices), so analytic
//! invariants such as 0 <= TARC <= 1 must hold exactly and any violation
//! points at the code, not the data.

use ndarray::Array1;
use rand::Rng;

use crate::mom::{FarField, FullWaveSystem, StoredRow};
use crate::ports::{build_wave_matrices, Direction, PortOperators};
use crate::{CMatrix, CVector, RMatrix, C64};

fn random_real<R: Rng>(rng: &mut R, n: usize) -> RMatrix {
    RMatrix::from_shape_fn((n, n), |_| rng.gen::<f64>() - 0.5)
}

fn random_complex<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_shape_fn((rows, cols), |_| {
        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    })
}

/// Random real symmetric PSD matrix `A^T A`, scaled to ohm-like magnitude.
pub fn random_psd<R: Rng>(rng: &mut R, n: usize, scale: f64) -> RMatrix {
    let a = random_real(rng, n);
    let mut m = RMatrix::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut s = 0.0;
            for k in 0..n {
                s += a[[k, i]] * a[[k, j]];
            }
            m[[i, j]] = scale * s;
        }
    }
    m
}

/// Random complex Hermitian PSD matrix `A^H A`.
pub fn random_hpsd<R: Rng>(rng: &mut R, n: usize, scale: f64) -> CMatrix {
    let a = random_complex(rng, n, n);
    let m = crate::linalg::conj_t(&a).dot(&a);
    crate::linalg::symmetrize(&m).mapv(|z| z * scale)
}

/// Random passive full-wave system of dimension `n` with mild ohmic loss
/// and one stored far-field row.
pub fn random_system<R: Rng>(rng: &mut R, n: usize) -> FullWaveSystem {
    let r_rad = random_psd(rng, n, 10.0);
    let r_loss = random_psd(rng, n, 0.3);
    let mut x = random_real(rng, n) * 40.0;
    x = 0.5 * (&x + &x.t());
    let xi = Array1::from_shape_fn(n, |_| 0.5 + rng.gen::<f64>());
    let row = CVector::from_shape_fn(n, |_| {
        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    FullWaveSystem {
        n,
        frequency: 1e9,
        k: 2.0 * std::f64::consts::PI * 1e9 / crate::consts::C0,
        z0: crate::consts::Z0,
        r_rad,
        r_loss,
        x,
        xi,
        farfield: FarField::Table(vec![StoredRow {
            label: "main".into(),
            e_hat: [0.0, 0.0, 1.0],
            r_hat: [1.0, 0.0, 0.0],
            row,
        }]),
    }
}

/// Random lossless passive system (`R_loss = 0`).
pub fn random_lossless_system<R: Rng>(rng: &mut R, n: usize) -> FullWaveSystem {
    let mut sys = random_system(rng, n);
    sys.r_loss = RMatrix::zeros((n, n));
    sys
}

/// Random passive port operators of dimension `p`, consistent by
/// construction: the Hermitian part of `y` equals `g + l`.
pub fn random_port_operators<R: Rng>(rng: &mut R, p: usize) -> PortOperators {
    random_port_operators_with(rng, p, 0.05, 50.0, 0.0)
}

/// Same as [`random_port_operators`] with explicit loss scale and shared
/// circuit values.
pub fn random_port_operators_with<R: Rng>(
    rng: &mut R,
    p: usize,
    loss_scale: f64,
    r0: f64,
    bl: f64,
) -> PortOperators {
    let g = random_hpsd(rng, p, 0.02);
    let l = random_hpsd(rng, p, 0.02 * loss_scale);
    // y = (g + l) + j H with Hermitian H, so Herm(y) = g + l exactly. The
    // reactive part is kept on the conductance scale so the default
    // instance is in a sanely matched regime rather than a reflective one.
    let h = crate::linalg::symmetrize(&random_complex(rng, p, p)).mapv(|z| z * 0.03);
    let mut y = &g + &l;
    for i in 0..p {
        for j in 0..p {
            y[[i, j]] += C64::new(0.0, 1.0) * h[[i, j]];
        }
    }
    let (k_mat, l_mat) = build_wave_matrices(&y, &vec![r0; p], &vec![bl; p]);
    let f = CVector::from_shape_fn(p, |_| {
        C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
    });
    PortOperators {
        y,
        g,
        l,
        k_mat,
        l_mat,
        f_rows: vec![(
            Direction {
                label: "main".into(),
                e_hat: [0.0, 0.0, 1.0],
                r_hat: [1.0, 0.0, 0.0],
            },
            f,
        )],
        port_modes: CMatrix::zeros((p, p)),
        z0: crate::consts::Z0,
    }
}

/// One standard-normal sample (Box-Muller), so normalized excitation
/// vectors are uniform on the complex sphere.
fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        let v: f64 = rng.gen();
        if u > f64::MIN_POSITIVE {
            return (-2.0 * u.ln()).sqrt() * (2.0 * std::f64::consts::PI * v).cos();
        }
    }
}

/// Random unit-norm complex excitation vector, uniform on the sphere.
pub fn random_excitation<R: Rng>(rng: &mut R, p: usize) -> CVector {
    loop {
        let v = CVector::from_shape_fn(p, |_| C64::new(gaussian(rng), gaussian(rng)));
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.mapv(|z| z / norm);
        }
    }
}
