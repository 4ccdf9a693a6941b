//! The four optimization problems on port operators: optimal excitation,
//! perfect matching, maximal realized gain and the radiation-efficiency
//! upper bound, plus derivative-free refinement of the shared feeding
//! circuit.

use serde::Serialize;
use thiserror::Error;

use crate::linalg::{
    conj_t, eig_general, eig_hpd_pencil, eigh_ascending, normalize_phase, solve_vector,
    symmetrize, EigenPair, LinalgError,
};
use crate::metrics::{evaluate, ExcitationSolution, MetricsError};
use crate::ports::PortOperators;
use crate::{CMatrix, CVector, C64};

/// Relative real-part threshold below which a matching eigenvalue is
/// infeasible (would need a non-positive characteristic resistance).
pub const MATCH_FEASIBILITY_TOL: f64 = 1e-12;

/// Relative eigenvalue cutoff delimiting the numerical range of the
/// radiation operator in [`efficiency_bound`].
pub const RANGE_CUTOFF: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum OptimError {
    #[error("admittance matrix is not reciprocal (asymmetry {0})")]
    NotReciprocal(f64),
    #[error("no matching solution has a positive characteristic resistance")]
    AllInfeasible,
    #[error("radiation operator has numerical rank zero")]
    DegenerateRadiationOperator,
    #[error("iteration cap exceeded after {0} objective evaluations")]
    IterationCapExceeded(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

/// Result of the excitation-optimality eigenproblem.
#[derive(Debug, Clone)]
pub struct ExcitationOptimum {
    /// Maximal total efficiency.
    pub eta1: f64,
    /// Optimal port voltages (unit norm, phase-fixed).
    pub v1: CVector,
    /// Incident waves of the optimum, `a1 = K v1`.
    pub a1: CVector,
    /// Full generalized spectrum for diagnostics, descending.
    pub spectrum: Vec<EigenPair>,
}

/// One perfect-matching circuit realization.
#[derive(Debug, Clone, Serialize)]
pub struct MatchSolution {
    /// Shared characteristic resistance (Ohm, > 0).
    pub r0: f64,
    /// Shared tuning susceptance (S).
    pub bl: f64,
    /// The eigenvector excitation the circuit matches perfectly.
    pub v: Vec<C64>,
}

/// Radiation-efficiency upper bound of a lossy structure.
#[derive(Debug, Clone, Serialize)]
pub struct BoundResult {
    /// Minimal dissipation factor (lost over radiated power).
    pub delta: f64,
    /// Upper bound on radiation efficiency, `1/(1 + delta)`.
    pub eta_ub: f64,
    /// The excitation achieving the bound.
    pub v: Vec<C64>,
}

fn frobenius(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Maximize total efficiency over excitations: the dominant pair of the
/// generalized eigenproblem `g v = eta K^H K v`.
pub fn optimal_excitation(g: &CMatrix, k: &CMatrix) -> Result<ExcitationOptimum, OptimError> {
    let khk = symmetrize(&conj_t(k).dot(k));
    let spectrum = eig_hpd_pencil(g, &khk)?;
    let top = &spectrum[0];
    let v1 = top.vector.clone();
    let a1 = k.dot(&v1);
    Ok(ExcitationOptimum {
        eta1: top.value.re,
        v1,
        a1,
        spectrum,
    })
}

/// Solve the perfect-matching eigenproblem of the port admittance: each
/// eigenpair `(lambda_i, v_i)` with `Re(lambda_i) > 0` yields the shared
/// circuit `R0 = 1/Re(lambda_i)`, `B_L = -Im(lambda_i)` that annihilates
/// the reflected waves of excitation `v_i`.
pub fn perfect_match(y: &CMatrix) -> Result<Vec<MatchSolution>, OptimError> {
    let ynorm = frobenius(y);
    // Reciprocity: y must be complex symmetric.
    let asym = {
        let mut worst = 0.0f64;
        for i in 0..y.nrows() {
            for j in 0..y.ncols() {
                worst = worst.max((y[[i, j]] - y[[j, i]]).norm());
            }
        }
        worst
    };
    if asym > 1e-8 * ynorm.max(f64::MIN_POSITIVE) {
        return Err(OptimError::NotReciprocal(asym / ynorm));
    }
    let pairs = eig_general(y)?;
    let mut out = Vec::new();
    for p in pairs {
        if p.value.re > MATCH_FEASIBILITY_TOL * ynorm {
            out.push(MatchSolution {
                r0: 1.0 / p.value.re,
                bl: -p.value.im,
                v: p.vector.to_vec(),
            });
        }
    }
    if out.is_empty() {
        return Err(OptimError::AllInfeasible);
    }
    Ok(out)
}

/// Close every matching solution through the metrics path and return the
/// index ordering by ascending TARC (ties by index).
pub fn rank_match_solutions(
    ops: &PortOperators,
    solutions: &[MatchSolution],
) -> Result<Vec<(usize, ExcitationSolution)>, OptimError> {
    let mut scored = Vec::with_capacity(solutions.len());
    for (i, s) in solutions.iter().enumerate() {
        let closed = ops.with_circuit(s.r0, s.bl);
        let v = CVector::from(s.v.clone());
        scored.push((i, evaluate(&closed, &v)?));
    }
    scored.sort_by(|a, b| {
        a.1.tarc
            .partial_cmp(&b.1.tarc)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    Ok(scored)
}

/// Maximal realized gain in the direction of far-field row `f`, with the
/// analytic optimum of the rank-1 problem: `v1` solves `K^H K v = f^H` and
/// `gamma1 = (4 pi / Z0) f (K^H K)^-1 f^H`, both via factorized solves.
pub fn max_realized_gain(
    f: &CVector,
    k: &CMatrix,
    z0: f64,
) -> Result<(f64, CVector), OptimError> {
    let khk = symmetrize(&conj_t(k).dot(k));
    let fh = f.mapv(|z| z.conj());
    let x = solve_vector(&khk, &fh)?;
    let quad: C64 = f.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let gamma1 = 4.0 * std::f64::consts::PI / z0 * quad.re;
    let mut v1 = x;
    normalize_phase(&mut v1);
    Ok((gamma1, v1))
}

/// Upper bound on radiation efficiency: the smallest generalized
/// eigenvalue of `l v = delta g v` restricted to the numerical range of
/// `g` (relative cutoff [`RANGE_CUTOFF`]).
pub fn efficiency_bound(g: &CMatrix, l: &CMatrix) -> Result<BoundResult, OptimError> {
    let p = g.nrows();
    let (vals, vecs) = eigh_ascending(g)?;
    let lmax = vals.iter().cloned().fold(0.0f64, f64::max);
    let keep: Vec<usize> = (0..p)
        .filter(|&i| vals[i] > RANGE_CUTOFF * lmax && vals[i] > 0.0)
        .collect();
    if keep.is_empty() {
        return Err(OptimError::DegenerateRadiationOperator);
    }
    let r = keep.len();
    let u = CMatrix::from_shape_fn((p, r), |(i, j)| vecs[[i, keep[j]]]);
    let uh = conj_t(&u);
    let g_r = symmetrize(&uh.dot(&g.dot(&u)));
    let l_r = symmetrize(&uh.dot(&l.dot(&u)));
    let pairs = eig_hpd_pencil(&l_r, &g_r)?;
    let last = pairs.last().expect("non-empty spectrum");
    let delta = last.value.re.max(0.0);
    let mut v = u.dot(&last.vector);
    normalize_phase(&mut v);
    Ok(BoundResult {
        delta,
        eta_ub: 1.0 / (1.0 + delta),
        v: v.to_vec(),
    })
}

/// Objective for [`refine_circuit`]: maps a shared circuit to a score to
/// maximize.
pub type CircuitObjective<'a> = dyn Fn(f64, f64) -> f64 + 'a;

/// Outcome of a simplex refinement.
#[derive(Debug, Clone, Serialize)]
pub struct RefineResult {
    pub r0: f64,
    pub bl: f64,
    pub score: f64,
    /// False when the iteration cap stopped the search early.
    pub converged: bool,
    pub evaluations: usize,
}

/// Nelder-Mead maximization of `objective(R0, BL)` over `(ln R0, BL)`.
///
/// Coefficients (1, 2, 0.5, 0.5); initial simplex edge 10 % of
/// `|parameter| + eps`; converges when the simplex diameter is below 1e-6
/// relative and the objective spread below 1e-10; evaluation cap 2000,
/// after which the best vertex so far is returned with `converged = false`.
pub fn refine_circuit(
    r0_init: f64,
    bl_init: f64,
    objective: &CircuitObjective,
) -> Result<RefineResult, OptimError> {
    assert!(r0_init > 0.0, "initial characteristic resistance must be positive");
    const ALPHA: f64 = 1.0;
    const GAMMA: f64 = 2.0;
    const RHO: f64 = 0.5;
    const SIGMA: f64 = 0.5;
    const CAP: usize = 2000;
    let evals = std::cell::Cell::new(0usize);
    let eval = |x: [f64; 2]| -> f64 {
        evals.set(evals.get() + 1);
        objective(x[0].exp(), x[1])
    };
    let x0 = [r0_init.ln(), bl_init];
    let step = |v: f64| 0.1 * (v.abs() + 1e-3);
    let mut simplex: Vec<([f64; 2], f64)> = Vec::with_capacity(3);
    {
        let f0 = eval(x0);
        simplex.push((x0, f0));
        for d in 0..2 {
            let mut x = x0;
            x[d] += step(x0[d]);
            let f = eval(x);
            simplex.push((x, f));
        }
    }
    let ordering = |a: &([f64; 2], f64), b: &([f64; 2], f64)| {
        b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal)
    };
    simplex.sort_by(ordering);
    let mut converged = false;
    while evals.get() < CAP {
        // Convergence: relative simplex diameter and objective spread.
        let scale = simplex
            .iter()
            .map(|(x, _)| x[0].abs().max(x[1].abs()))
            .fold(1.0f64, f64::max);
        let diam = simplex
            .iter()
            .flat_map(|(x, _)| {
                simplex
                    .iter()
                    .map(move |(y, _)| (x[0] - y[0]).hypot(x[1] - y[1]))
            })
            .fold(0.0f64, f64::max);
        let spread = simplex[0].1 - simplex[2].1;
        if diam < 1e-6 * scale && spread.abs() < 1e-10 {
            converged = true;
            break;
        }
        let centroid = [
            0.5 * (simplex[0].0[0] + simplex[1].0[0]),
            0.5 * (simplex[0].0[1] + simplex[1].0[1]),
        ];
        let worst = simplex[2];
        let shifted = |coef: f64| {
            [
                centroid[0] + coef * (centroid[0] - worst.0[0]),
                centroid[1] + coef * (centroid[1] - worst.0[1]),
            ]
        };
        let xr = shifted(ALPHA);
        let fr = eval(xr);
        if fr > simplex[0].1 {
            // Try to expand past the reflection.
            let xe = shifted(GAMMA);
            let fe = eval(xe);
            simplex[2] = if fe > fr { (xe, fe) } else { (xr, fr) };
        } else if fr > simplex[1].1 {
            simplex[2] = (xr, fr);
        } else {
            let xc = shifted(if fr > worst.1 { RHO } else { -RHO });
            let fc = eval(xc);
            let floor = if fr > worst.1 { fr } else { worst.1 };
            if fc > floor {
                simplex[2] = (xc, fc);
            } else {
                // Shrink toward the best vertex.
                for i in 1..3 {
                    let x = [
                        simplex[0].0[0] + SIGMA * (simplex[i].0[0] - simplex[0].0[0]),
                        simplex[0].0[1] + SIGMA * (simplex[i].0[1] - simplex[0].0[1]),
                    ];
                    let f = eval(x);
                    simplex[i] = (x, f);
                }
            }
        }
        simplex.sort_by(ordering);
    }
    let best = simplex[0];
    Ok(RefineResult {
        r0: best.0[0].exp(),
        bl: best.0[1],
        score: best.1,
        converged,
        evaluations: evals.get(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::quad_form;
    use ndarray::array;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn scalar_excitation_optimum() {
        let g = array![[c(0.012, 0.0)]];
        let k = array![[c(0.15, 0.05)]];
        let opt = optimal_excitation(&g, &k).unwrap();
        let expect = 0.012 / k[[0, 0]].norm_sqr();
        assert!((opt.eta1 - expect).abs() < 1e-14);
        assert!((opt.v1[0].norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn matched_g_gives_unit_efficiency() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let k = crate::synthetic::random_hpsd(&mut rng, 3, 1.0) + &(CMatrix::eye(3) * c(1.0, 0.0));
        let g = crate::linalg::symmetrize(&conj_t(&k).dot(&k));
        let opt = optimal_excitation(&g, &k).unwrap();
        assert!((opt.eta1 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn optimum_dominates_random_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ops = crate::synthetic::random_port_operators(&mut rng, 3);
        let opt = optimal_excitation(&ops.g, &ops.k_mat).unwrap();
        let khk = symmetrize(&conj_t(&ops.k_mat).dot(&ops.k_mat));
        let mut best = 0.0f64;
        for _ in 0..100_000 {
            let v = crate::synthetic::random_excitation(&mut rng, 3);
            let eta = quad_form(&ops.g, &v) / quad_form(&khk, &v);
            assert!(eta <= opt.eta1 + 1e-10);
            best = best.max(eta);
        }
        assert!(
            best > 0.9 * opt.eta1,
            "sampling should approach the optimum: {best} vs {}",
            opt.eta1
        );
        // The optimizer's own vector attains its eigenvalue.
        let eta_v1 = quad_form(&ops.g, &opt.v1) / quad_form(&khk, &opt.v1);
        assert!((eta_v1 - opt.eta1).abs() < 1e-10);
    }

    #[test]
    fn single_port_match_formula() {
        let y = array![[c(0.013, -0.004)]];
        let sols = perfect_match(&y).unwrap();
        assert_eq!(sols.len(), 1);
        assert!((sols[0].r0 - 1.0 / 0.013).abs() < 1e-12 / 0.013);
        assert!((sols[0].bl - 0.004).abs() < 1e-15);
    }

    #[test]
    fn diagonal_match() {
        let y = array![[c(0.02, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.05, 0.0)]];
        let mut sols = perfect_match(&y).unwrap();
        sols.sort_by(|a, b| a.r0.partial_cmp(&b.r0).unwrap());
        assert!((sols[0].r0 - 20.0).abs() < 1e-9);
        assert!((sols[1].r0 - 50.0).abs() < 1e-9);
        assert!(sols[0].bl.abs() < 1e-12 && sols[1].bl.abs() < 1e-12);
    }

    #[test]
    fn negative_conductance_infeasible() {
        let y = array![[c(-0.02, 0.3)]];
        assert!(matches!(perfect_match(&y), Err(OptimError::AllInfeasible)));
    }

    #[test]
    fn match_residual_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let ops = crate::synthetic::random_port_operators(&mut rng, 4);
        // Symmetrize to a reciprocal y (the synthetic y is Hermitian+skew,
        // not symmetric); build a complex-symmetric passive admittance.
        let mut y = ops.y.clone();
        for i in 0..4 {
            for j in 0..4 {
                let s = 0.5 * (ops.y[[i, j]] + ops.y[[j, i]]);
                y[[i, j]] = s;
            }
        }
        let ynorm = y.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let sols = perfect_match(&y).unwrap();
        for s in &sols {
            let v = CVector::from(s.v.clone());
            let lam = C64::new(1.0 / s.r0, -s.bl);
            let resid = (y.dot(&v) - v.mapv(|z| z * lam))
                .iter()
                .map(|z| z.norm_sqr())
                .sum::<f64>()
                .sqrt();
            assert!(resid <= 1e-9 * ynorm, "resid {resid} vs {ynorm}");
        }
    }

    #[test]
    fn matched_circuit_zeroes_reflection_lossless() {
        // Lossless reciprocal 2-port: Herm(y) = g, l = 0.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let ops = crate::synthetic::random_port_operators_with(&mut rng, 2, 0.0, 50.0, 0.0);
        let mut y = ops.y.clone();
        for i in 0..2 {
            for j in 0..2 {
                y[[i, j]] = 0.5 * (ops.y[[i, j]] + ops.y[[j, i]]);
            }
        }
        let mut ops = ops;
        ops.y = y.clone();
        ops.g = crate::linalg::symmetrize(&y);
        ops.l = CMatrix::zeros((2, 2));
        let sols = perfect_match(&y).unwrap();
        for s in &sols {
            let closed = ops.with_circuit(s.r0, s.bl);
            let sol = evaluate(&closed, &CVector::from(s.v.clone())).unwrap();
            assert!(sol.tarc <= 1e-6, "tarc {}", sol.tarc);
        }
        let ranked = rank_match_solutions(&ops, &sols).unwrap();
        assert!(ranked[0].1.tarc <= ranked[ranked.len() - 1].1.tarc);
    }

    #[test]
    fn scalar_gain_formula() {
        let f = array![c(3.0, 1.0)];
        let k = array![[c(0.2, -0.1)]];
        let (gamma, _) = max_realized_gain(&f, &k, crate::consts::Z0).unwrap();
        let expect =
            4.0 * std::f64::consts::PI / crate::consts::Z0 * f[0].norm_sqr() / k[[0, 0]].norm_sqr();
        assert!((gamma - expect).abs() < 1e-12 * expect);
    }

    #[test]
    fn gain_matches_pencil_solver_and_is_rank_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        for p in 2..=5 {
            let ops = crate::synthetic::random_port_operators(&mut rng, p);
            let f = ops.f_rows[0].1.clone();
            let (gamma, v1) = max_realized_gain(&f, &ops.k_mat, ops.z0).unwrap();
            // Cross-check: dominant eigenvalue of (4pi/Z0) f^H f v = gamma K^H K v.
            let pref = 4.0 * std::f64::consts::PI / ops.z0;
            let ffh = CMatrix::from_shape_fn((p, p), |(i, j)| {
                C64::new(pref, 0.0) * f[i].conj() * f[j]
            });
            let khk = symmetrize(&conj_t(&ops.k_mat).dot(&ops.k_mat));
            let pairs = eig_hpd_pencil(&ffh, &khk).unwrap();
            assert!((pairs[0].value.re - gamma).abs() <= 1e-10 * gamma);
            assert!(pairs[1].value.re.abs() <= 1e-12 * gamma, "rank-1 tail");
            // v1 attains the optimum through the metrics quotient.
            let num = pref
                * f.iter()
                    .zip(v1.iter())
                    .map(|(a, b)| a * b)
                    .sum::<C64>()
                    .norm_sqr();
            let den = quad_form(&khk, &v1);
            assert!((num / den - gamma).abs() <= 1e-10 * gamma);
        }
    }

    #[test]
    fn lossless_bound_is_unity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = crate::synthetic::random_hpsd(&mut rng, 3, 1.0);
        let l = CMatrix::zeros((3, 3));
        let b = efficiency_bound(&g, &l).unwrap();
        assert!(b.delta.abs() < 1e-12);
        assert!((b.eta_ub - 1.0).abs() < 1e-12);
    }

    #[test]
    fn proportional_loss_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = crate::synthetic::random_hpsd(&mut rng, 4, 1.0);
        let l = g.mapv(|z| z * 0.25);
        let b = efficiency_bound(&g, &l).unwrap();
        assert!((b.delta - 0.25).abs() < 1e-10);
        assert!((b.eta_ub - 0.8).abs() < 1e-10);
    }

    #[test]
    fn bound_dominates_sampling_and_is_achieved() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let g = crate::synthetic::random_hpsd(&mut rng, 3, 1.0);
        let l = crate::synthetic::random_hpsd(&mut rng, 3, 0.2);
        let b = efficiency_bound(&g, &l).unwrap();
        for _ in 0..20_000 {
            let v = crate::synthetic::random_excitation(&mut rng, 3);
            let eta = quad_form(&g, &v) / (quad_form(&g, &v) + quad_form(&l, &v));
            assert!(eta <= b.eta_ub + 1e-9);
        }
        let v = CVector::from(b.v.clone());
        let eta = quad_form(&g, &v) / (quad_form(&g, &v) + quad_form(&l, &v));
        assert!((eta - b.eta_ub).abs() <= 1e-10);
    }

    #[test]
    fn degenerate_radiation_rejected() {
        let g = CMatrix::zeros((2, 2));
        let l = CMatrix::eye(2);
        assert!(matches!(
            efficiency_bound(&g, &l),
            Err(OptimError::DegenerateRadiationOperator)
        ));
    }

    #[test]
    fn simplex_finds_known_quadratic_optimum() {
        let objective = |r0: f64, bl: f64| {
            -(r0.ln() - 30.0f64.ln()).powi(2) - (bl - 0.002).powi(2)
        };
        let res = refine_circuit(55.0, -0.01, &objective).unwrap();
        assert!(res.converged);
        assert!((res.r0 - 30.0).abs() < 1e-4 * 30.0, "r0 {}", res.r0);
        assert!((res.bl - 0.002).abs() < 1e-4, "bl {}", res.bl);
    }

    #[test]
    fn simplex_never_regresses() {
        let objective = |r0: f64, bl: f64| -((r0 - 42.0).powi(2) + (bl + 0.5).powi(2));
        let init = objective(50.0, 0.0);
        let res = refine_circuit(50.0, 0.0, &objective).unwrap();
        assert!(res.score >= init - 1e-12);
        assert!(res.evaluations <= 2000);
    }

    #[test]
    fn simplex_stays_put_at_optimum() {
        let objective = |r0: f64, bl: f64| -((r0.ln() - 50.0f64.ln()).powi(2) + bl.powi(2));
        let res = refine_circuit(50.0, 0.0, &objective).unwrap();
        assert!(res.converged);
        assert!((res.r0 - 50.0).abs() < 1e-3 * 50.0);
        assert!(res.bl.abs() < 1e-4);
    }
}
