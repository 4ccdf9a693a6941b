//! Scalar figures of merit of one excitation: TARC, efficiencies,
//! directivity and realized gain, plus the single-port placement scan.

use serde::Serialize;
use thiserror::Error;

use crate::ports::PortOperators;
use crate::{CMatrix, CVector, C64};

/// Radicands of square roots may round slightly negative at a perfect
/// match; anything below this is a genuine passivity violation of the
/// input operators.
pub const PASSIVITY_TOL: f64 = -1e-8;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("excitation vector is zero")]
    ZeroExcitation,
    #[error("incident power is zero (v in null space of K)")]
    ZeroIncidentPower,
    #[error("radiated power is zero for this excitation")]
    ZeroRadiatedPower,
    #[error("passivity violation: normalized radicand {0} below tolerance")]
    PassivityViolation(f64),
    #[error("direction index {0} out of range ({1} stored)")]
    NoSuchDirection(usize, usize),
}

/// Everything derived from one port excitation.
#[derive(Debug, Clone, Serialize)]
pub struct ExcitationSolution {
    /// Port voltages (V).
    pub v: Vec<C64>,
    /// Incident power waves `a = K v` (W^1/2).
    pub a: Vec<C64>,
    /// Reflected power waves `b = L v` (W^1/2).
    pub b: Vec<C64>,
    /// Radiated power (W).
    pub p_rad: f64,
    /// Dissipated power (W).
    pub p_lost: f64,
    /// Available (incident) power (W).
    pub p_tot: f64,
    /// Total active reflection coefficient, in [0, 1].
    pub tarc: f64,
    /// Radiated over accepted power.
    pub eta_rad: f64,
    /// Accepted over available power.
    pub eta_match: f64,
    /// `eta_rad * eta_match = 1 - tarc^2`.
    pub eta_tot: f64,
    /// Directivity per stored direction (linear).
    pub directivity: Vec<f64>,
    /// Realized gain per stored direction (linear).
    pub realized_gain: Vec<f64>,
}

/// Real quadratic form `v^H M v` of a Hermitian matrix.
pub fn quad_form(m: &CMatrix, v: &CVector) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..v.len() {
        for j in 0..v.len() {
            acc += v[i].conj() * m[[i, j]] * v[j];
        }
    }
    acc.re
}

fn norm_sqr(v: &CVector) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Clamped square root with the passivity guard: radicands in
/// [`PASSIVITY_TOL`], 0) clamp to zero; lower is an error.
fn guarded_sqrt(radicand: f64) -> Result<f64, MetricsError> {
    if radicand < PASSIVITY_TOL {
        return Err(MetricsError::PassivityViolation(radicand));
    }
    Ok(radicand.max(0.0).sqrt())
}

/// Evaluate all figures of merit for one excitation.
pub fn evaluate(ops: &PortOperators, v: &CVector) -> Result<ExcitationSolution, MetricsError> {
    if v.len() != ops.y.nrows() {
        return Err(MetricsError::ZeroExcitation);
    }
    if norm_sqr(v) == 0.0 {
        return Err(MetricsError::ZeroExcitation);
    }
    let a = ops.k_mat.dot(v);
    let b = ops.l_mat.dot(v);
    let p_tot = 0.5 * norm_sqr(&a);
    let p_rad = 0.5 * quad_form(&ops.g, v);
    let p_lost = 0.5 * quad_form(&ops.l, v);
    if p_tot <= 0.0 {
        return Err(MetricsError::ZeroIncidentPower);
    }
    let tarc = guarded_sqrt(1.0 - p_rad / p_tot)?;
    let eta_tot = 1.0 - tarc * tarc;
    let accepted = p_rad + p_lost;
    let eta_match = accepted / p_tot;
    let eta_rad = if accepted > 0.0 { p_rad / accepted } else { 0.0 };
    let mut directivity = Vec::with_capacity(ops.f_rows.len());
    let mut gain = Vec::with_capacity(ops.f_rows.len());
    let pref = 4.0 * std::f64::consts::PI / ops.z0;
    // Directivity normalizes the direction intensity by the radiated power,
    // realized gain by the available power; the powers above carry a 1/2
    // that the quadratic-form quotients must see twice.
    for (_, f) in &ops.f_rows {
        let fv: C64 = f.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        let u = pref * fv.norm_sqr();
        directivity.push(if p_rad > 0.0 { u / (2.0 * p_rad) } else { 0.0 });
        gain.push(u / (2.0 * p_tot));
    }
    Ok(ExcitationSolution {
        v: v.to_vec(),
        a: a.to_vec(),
        b: b.to_vec(),
        p_rad,
        p_lost,
        p_tot,
        tarc,
        eta_rad,
        eta_match,
        eta_tot,
        directivity,
        realized_gain: gain,
    })
}

/// Directivity in the stored direction `idx`.
pub fn directivity(ops: &PortOperators, v: &CVector, idx: usize) -> Result<f64, MetricsError> {
    if idx >= ops.f_rows.len() {
        return Err(MetricsError::NoSuchDirection(idx, ops.f_rows.len()));
    }
    let prad2 = quad_form(&ops.g, v);
    if prad2 <= 0.0 {
        return Err(MetricsError::ZeroRadiatedPower);
    }
    let f = &ops.f_rows[idx].1;
    let fv: C64 = f.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    Ok(4.0 * std::f64::consts::PI / ops.z0 * fv.norm_sqr() / prad2)
}

/// Realized gain in the stored direction `idx`.
pub fn realized_gain(ops: &PortOperators, v: &CVector, idx: usize) -> Result<f64, MetricsError> {
    if idx >= ops.f_rows.len() {
        return Err(MetricsError::NoSuchDirection(idx, ops.f_rows.len()));
    }
    let a = ops.k_mat.dot(v);
    let asq = norm_sqr(&a);
    if asq <= 0.0 {
        return Err(MetricsError::ZeroIncidentPower);
    }
    let f = &ops.f_rows[idx].1;
    let fv: C64 = f.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
    Ok(4.0 * std::f64::consts::PI / ops.z0 * fv.norm_sqr() / asq)
}

/// Single-port placement scan over candidate basis positions using the
/// dense precomputed operators: the best feed maximizes
/// `G_hat_nn / |K_hat_nn|^2`; the scan reports `Gamma_n = sqrt(1 - ratio)`
/// per candidate.
///
/// Returns the winning basis index (first on ties) and the TARC curve
/// aligned with `candidates`.
pub fn scan_single_port(
    g_hat: &CMatrix,
    k_hat: &CMatrix,
    candidates: &[usize],
) -> Result<(usize, Vec<f64>), MetricsError> {
    if candidates.is_empty() {
        return Err(MetricsError::ZeroExcitation);
    }
    let mut best = candidates[0];
    let mut best_ratio = f64::NEG_INFINITY;
    let mut curve = Vec::with_capacity(candidates.len());
    for &n in candidates {
        let ratio = g_hat[[n, n]].re / k_hat[[n, n]].norm_sqr();
        let gamma = guarded_sqrt(1.0 - ratio)?;
        curve.push(gamma);
        if ratio > best_ratio {
            best_ratio = ratio;
            best = n;
        }
    }
    Ok((best, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ports::{build_wave_matrices, Direction};
    use crate::CVector;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn matched_lossless_1port() -> PortOperators {
        // y = 1/50 S, matched line R0 = 50, no tuning.
        let y = array![[c(0.02, 0.0)]];
        let g = y.clone();
        let l = CMatrix::zeros((1, 1));
        let (k_mat, l_mat) = build_wave_matrices(&y, &[50.0], &[0.0]);
        PortOperators {
            y,
            g,
            l,
            k_mat,
            l_mat,
            f_rows: vec![(
                Direction {
                    label: "z".into(),
                    e_hat: [0.0, 0.0, 1.0],
                    r_hat: [1.0, 0.0, 0.0],
                },
                CVector::from_elem(1, c(3.0, -1.0)),
            )],
            port_modes: CMatrix::zeros((1, 1)),
            z0: crate::consts::Z0,
        }
    }

    #[test]
    fn matched_lossless_port_has_zero_tarc() {
        let ops = matched_lossless_1port();
        let sol = evaluate(&ops, &array![c(1.0, 0.0)]).unwrap();
        assert!(sol.tarc <= 1e-12);
        assert!((sol.eta_tot - 1.0).abs() <= 1e-12);
        assert!((sol.eta_match - 1.0).abs() <= 1e-12);
        assert!((sol.eta_rad - 1.0).abs() <= 1e-12);
        assert!(sol.b[0].norm() <= 1e-15);
    }

    #[test]
    fn tarc_point_two_for_96_percent_efficiency() {
        // A perfectly matched port radiating 96 % of the available power.
        let y = array![[c(0.02, 0.0)]];
        let g = y.mapv(|z| z * 0.96);
        let l = y.mapv(|z| z * 0.04);
        let (k_mat, l_mat) = build_wave_matrices(&y, &[50.0], &[0.0]);
        let ops = PortOperators {
            y,
            g,
            l,
            k_mat,
            l_mat,
            f_rows: vec![],
            port_modes: CMatrix::zeros((1, 1)),
            z0: crate::consts::Z0,
        };
        let sol = evaluate(&ops, &array![c(1.0, 0.0)]).unwrap();
        assert!((sol.tarc - 0.2).abs() < 1e-12, "tarc {}", sol.tarc);
        // Rounded to three digits this is the 0.199-ish regime.
        assert!((sol.tarc - 0.199).abs() < 1.5e-3);
        assert!((sol.eta_tot - 0.96).abs() < 1e-12);
    }

    #[test]
    fn zero_excitation_rejected() {
        let ops = matched_lossless_1port();
        assert!(matches!(
            evaluate(&ops, &CVector::zeros(1)),
            Err(MetricsError::ZeroExcitation)
        ));
    }

    #[test]
    fn wave_identity_on_random_passive_ops() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in 1..=5 {
            let ops = crate::synthetic::random_port_operators(&mut rng, p);
            for _ in 0..20 {
                let v = crate::synthetic::random_excitation(&mut rng, p);
                let sol = evaluate(&ops, &v).unwrap();
                // Gamma from the wave identity: (b^H b + v^H l v)/a^H a.
                let bb = sol.b.iter().map(|z| z.norm_sqr()).sum::<f64>();
                let oracle = ((0.5 * bb + sol.p_lost) / sol.p_tot).sqrt();
                assert!((sol.tarc - oracle).abs() <= 1e-10, "p={p}");
                assert!(sol.tarc >= 0.0 && sol.tarc <= 1.0 + 1e-12);
                assert!((sol.eta_tot - sol.eta_rad * sol.eta_match).abs() <= 1e-10);
                assert!((sol.tarc * sol.tarc + sol.eta_tot - 1.0).abs() <= 1e-10);
                assert!(sol.eta_match <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn tarc_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ops = crate::synthetic::random_port_operators(&mut rng, 3);
        let v = crate::synthetic::random_excitation(&mut rng, 3);
        let base = evaluate(&ops, &v).unwrap();
        let scaled = evaluate(&ops, &v.mapv(|z| z * c(-2.5, 1.5))).unwrap();
        assert!((base.tarc - scaled.tarc).abs() <= 1e-12);
        for i in 0..base.directivity.len() {
            assert!(
                (base.directivity[i] - scaled.directivity[i]).abs()
                    <= 1e-12 * base.directivity[i].max(1.0)
            );
        }
    }

    #[test]
    fn gain_is_discounted_directivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ops = crate::synthetic::random_port_operators(&mut rng, 4);
        for _ in 0..50 {
            let v = crate::synthetic::random_excitation(&mut rng, 4);
            let sol = evaluate(&ops, &v).unwrap();
            let d = directivity(&ops, &v, 0).unwrap();
            let gt = realized_gain(&ops, &v, 0).unwrap();
            assert!((sol.directivity[0] - d).abs() <= 1e-10 * d.max(1.0));
            assert!((sol.realized_gain[0] - gt).abs() <= 1e-10 * gt.max(1.0));
            assert!((gt - sol.eta_tot * d).abs() <= 1e-10 * d.max(1.0));
            assert!(gt <= d + 1e-10 * d.max(1.0));
        }
    }

    #[test]
    fn zero_farfield_gives_zero_directivity() {
        let mut ops = matched_lossless_1port();
        ops.f_rows[0].1 = CVector::zeros(1);
        let d = directivity(&ops, &array![c(1.0, 0.0)], 0).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn scan_hand_arithmetic() {
        let g_hat = CMatrix::from_diag(&array![c(0.2, 0.0), c(0.9, 0.0), c(0.5, 0.0)]);
        let k_hat = CMatrix::eye(3);
        let (best, curve) = scan_single_port(&g_hat, &k_hat, &[0, 1, 2]).unwrap();
        assert_eq!(best, 1);
        let expect = [0.8f64.sqrt(), 0.1f64.sqrt(), 0.5f64.sqrt()];
        for (got, want) in curve.iter().zip(expect) {
            assert!((got - want).abs() < 5e-4, "{got} vs {want}");
        }
    }

    #[test]
    fn scan_stable_tie_break() {
        let g_hat = CMatrix::from_diag(&array![c(0.5, 0.0), c(0.5, 0.0), c(0.5, 0.0)]);
        let k_hat = CMatrix::eye(3);
        let (best, _) = scan_single_port(&g_hat, &k_hat, &[2, 0, 1]).unwrap();
        assert_eq!(best, 2, "first candidate wins ties");
    }
}
