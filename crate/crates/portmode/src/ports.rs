//! Reduction of N-dimensional full-wave operators to P-dimensional port
//! operators.
//!
//! A port configuration selects P basis functions through a 0/1 indexing
//! matrix `C` (here a list of positions) and the diagonal normalization
//! `D = diag(xi)`. The port admittance is `y = C^H D^H Y D C`, computed with
//! factorized solves against `Z` rather than by forming `Y = Z^-1`. Any
//! quadratic-form operator reduces as `n = W^H M W` with the port-mode
//! matrix `W = Y D C`.

#[cfg(test)]
use ndarray::Array1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{conj_t, solve_linear, LinalgError};
use crate::mom::{FullWaveSystem, MomError};
use crate::{CMatrix, CVector, RMatrix, C64};

/// Dense N x N precomputation refuses anything bigger than this.
pub const MAX_PRECOMPUTE_N: usize = 8192;

#[derive(Debug, Error)]
pub enum PortError {
    #[error("invalid port configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("system too large for dense precomputation: N = {0} > {MAX_PRECOMPUTE_N}")]
    SystemTooLarge(usize),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Mom(#[from] MomError),
}

/// Port positions plus per-port circuit parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PortConfig {
    /// Basis-function indices hosting the delta-gap ports (distinct).
    pub positions: Vec<usize>,
    /// Characteristic resistances of the feeding lines (Ohm, > 0).
    pub r0: Vec<f64>,
    /// Tuning susceptances shunted at the ports (S).
    pub bl: Vec<f64>,
}

impl PortConfig {
    /// Shared circuit values on every port.
    pub fn shared(positions: Vec<usize>, r0: f64, bl: f64) -> Self {
        let p = positions.len();
        Self {
            positions,
            r0: vec![r0; p],
            bl: vec![bl; p],
        }
    }

    pub fn validate(&self, n: usize) -> Result<(), PortError> {
        if self.positions.is_empty() {
            return Err(PortError::InvalidConfig("no ports".into()));
        }
        let p = self.positions.len();
        if self.r0.len() != p || self.bl.len() != p {
            return Err(PortError::InvalidConfig(format!(
                "{} positions but {} resistances / {} susceptances",
                p,
                self.r0.len(),
                self.bl.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for &pos in &self.positions {
            if pos >= n {
                return Err(PortError::InvalidConfig(format!(
                    "position {pos} out of range 0..{n}"
                )));
            }
            if !seen.insert(pos) {
                return Err(PortError::InvalidConfig(format!(
                    "position {pos} repeated"
                )));
            }
        }
        if self.r0.iter().any(|&r| !(r > 0.0)) {
            return Err(PortError::InvalidConfig(
                "characteristic resistances must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// A labeled far-field direction.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Direction {
    pub label: String,
    pub e_hat: [f64; 3],
    pub r_hat: [f64; 3],
}

/// The P-dimensional operators of one port configuration.
#[derive(Debug, Clone)]
pub struct PortOperators {
    /// Port admittance matrix (S).
    pub y: CMatrix,
    /// Radiated-power quadratic form (S), Hermitian PSD.
    pub g: CMatrix,
    /// Lost-power quadratic form (S), Hermitian PSD.
    pub l: CMatrix,
    /// Incident power-wave map `a = K v`.
    pub k_mat: CMatrix,
    /// Reflected power-wave map `b = L v`.
    pub l_mat: CMatrix,
    /// Far-field rows per stored direction (each 1 x P).
    pub f_rows: Vec<(Direction, CVector)>,
    /// Port-mode matrix `W = Y D C` (N x P).
    pub port_modes: CMatrix,
    /// Free-space impedance used in gain quotients (Ohm).
    pub z0: f64,
}

impl PortOperators {
    /// Reduce a full-wave system to port operators for one configuration.
    pub fn reduce(
        system: &FullWaveSystem,
        config: &PortConfig,
        directions: &[Direction],
    ) -> Result<Self, PortError> {
        config.validate(system.n)?;
        let (y, w) = reduce_admittance(system, &config.positions)?;
        let g = reduce_quadratic(&system.r_rad, &w)?;
        let l = reduce_quadratic(&system.r_loss, &w)?;
        let (k_mat, l_mat) = build_wave_matrices(&y, &config.r0, &config.bl);
        let mut f_rows = Vec::with_capacity(directions.len());
        for d in directions {
            let row = reduce_farfield(system, &w, d.e_hat, d.r_hat)?;
            f_rows.push((d.clone(), row));
        }
        Ok(Self {
            y,
            g,
            l,
            k_mat,
            l_mat,
            f_rows,
            port_modes: w,
            z0: system.z0,
        })
    }

    /// Rebuild the wave matrices for a different shared circuit without
    /// re-reducing the full-wave operators.
    pub fn with_circuit(&self, r0: f64, bl: f64) -> Self {
        let p = self.y.nrows();
        let (k_mat, l_mat) = build_wave_matrices(&self.y, &vec![r0; p], &vec![bl; p]);
        Self {
            k_mat,
            l_mat,
            ..self.clone()
        }
    }
}

fn check_positions(n: usize, positions: &[usize]) -> Result<(), PortError> {
    if positions.is_empty() {
        return Err(PortError::InvalidConfig("no positions".into()));
    }
    let mut seen = std::collections::HashSet::new();
    for &p in positions {
        if p >= n {
            return Err(PortError::InvalidConfig(format!(
                "position {p} out of range 0..{n}"
            )));
        }
        if !seen.insert(p) {
            return Err(PortError::InvalidConfig(format!("position {p} repeated")));
        }
    }
    Ok(())
}

/// Build the selection `D C` (N x P) for the given positions.
fn selection(system: &FullWaveSystem, positions: &[usize]) -> CMatrix {
    let mut dc = CMatrix::zeros((system.n, positions.len()));
    for (p, &pos) in positions.iter().enumerate() {
        dc[[pos, p]] = C64::new(system.xi[pos], 0.0);
    }
    dc
}

/// Port admittance `y = C^H D^H Y D C` and the port-mode matrix `W = Y D C`,
/// via P column solves against `Z`.
pub fn reduce_admittance(
    system: &FullWaveSystem,
    positions: &[usize],
) -> Result<(CMatrix, CMatrix), PortError> {
    check_positions(system.n, positions)?;
    let dc = selection(system, positions);
    let z = system.impedance();
    let w = solve_linear(&z, &dc)?;
    let y = conj_t(&dc).dot(&w);
    Ok((y, w))
}

/// Reduce the quadratic form of a real symmetric N x N operator `M` to
/// `n = W^H M W`.
pub fn reduce_quadratic(m: &RMatrix, w: &CMatrix) -> Result<CMatrix, PortError> {
    if m.nrows() != m.ncols() || m.nrows() != w.nrows() {
        return Err(PortError::DimensionMismatch(format!(
            "operator {}x{} vs port modes {}x{}",
            m.nrows(),
            m.ncols(),
            w.nrows(),
            w.ncols()
        )));
    }
    let mc = m.mapv(|v| C64::new(v, 0.0));
    let mw = mc.dot(w);
    let mut n = conj_t(w).dot(&mw);
    // The result is Hermitian by construction; symmetrize rounding noise so
    // downstream Cholesky/eigh preconditions hold sharply.
    n = crate::linalg::symmetrize(&n);
    Ok(n)
}

/// Far-field port row `f = F W` for one direction.
pub fn reduce_farfield(
    system: &FullWaveSystem,
    w: &CMatrix,
    e_hat: [f64; 3],
    r_hat: [f64; 3],
) -> Result<CVector, PortError> {
    let row = system.farfield_row(e_hat, r_hat)?;
    if row.len() != w.nrows() {
        return Err(PortError::DimensionMismatch(format!(
            "far-field row length {} vs port modes {} rows",
            row.len(),
            w.nrows()
        )));
    }
    let p = w.ncols();
    let mut f = CVector::zeros(p);
    for j in 0..p {
        f[j] = row
            .iter()
            .zip(w.column(j).iter())
            .map(|(a, b)| a * b)
            .sum();
    }
    Ok(f)
}

/// Power-wave matrices `K`, `L` for per-port characteristic resistances and
/// tuning susceptances: `a = K v`, `b = L v`.
pub fn build_wave_matrices(y: &CMatrix, r0: &[f64], bl: &[f64]) -> (CMatrix, CMatrix) {
    let p = y.nrows();
    assert_eq!(r0.len(), p);
    assert_eq!(bl.len(), p);
    let lam: Vec<f64> = r0.iter().map(|&r| r.sqrt()).collect();
    let mut k = CMatrix::zeros((p, p));
    let mut l = CMatrix::zeros((p, p));
    for i in 0..p {
        for j in 0..p {
            let mut yy = y[[i, j]];
            if i == j {
                yy += C64::new(0.0, bl[i]);
            }
            // (Lambda (y + jB_L) Lambda) Lambda^-1 = Lambda y' by columns.
            let coupled = lam[i] * yy * lam[j] / lam[j];
            let ident = if i == j { 1.0 / lam[j] } else { 0.0 };
            k[[i, j]] = 0.5 * (ident + coupled);
            l[[i, j]] = 0.5 * (ident - coupled);
        }
    }
    (k, l)
}

/// Port currents `i = (y + j diag(B_L)) v`.
pub fn port_currents(y: &CMatrix, bl: &[f64], v: &CVector) -> CVector {
    assert_eq!(y.nrows(), v.len());
    assert_eq!(bl.len(), v.len());
    let mut i = y.dot(v);
    for (p, &b) in bl.iter().enumerate() {
        i[p] += C64::new(0.0, b) * v[p];
    }
    i
}

/// Dense N x N operators precomputed once per structure, reducing every
/// per-configuration evaluation to indexing.
#[derive(Debug, Clone)]
pub struct BigOperators {
    /// `G_hat = D^H Y^H R_rad Y D`.
    pub g_hat: CMatrix,
    /// `K_hat = 1/(2 sqrt(R0)) (1 + R0 D^H Y D)`, shared `R0`, `B_L = 0`.
    pub k_hat: CMatrix,
    /// `L_hat = D^H Y^H R_loss Y D`; companion operator so radiation
    /// efficiency is available through the same indexing path.
    pub l_hat: CMatrix,
    /// Shared characteristic resistance baked into `K_hat` (Ohm).
    pub r0: f64,
}

impl BigOperators {
    /// Index the small operators of one configuration: `g = C^H G_hat C`,
    /// `K = C^H K_hat C`, `l = C^H L_hat C`.
    pub fn index(&self, positions: &[usize]) -> (CMatrix, CMatrix, CMatrix) {
        let p = positions.len();
        let pick = |m: &CMatrix| {
            CMatrix::from_shape_fn((p, p), |(i, j)| m[[positions[i], positions[j]]])
        };
        (pick(&self.g_hat), pick(&self.k_hat), pick(&self.l_hat))
    }

    /// Recover the reduced admittance from the indexed `K` block
    /// (`K = (1 + R0 y) / (2 sqrt(R0))`).
    pub fn indexed_admittance(&self, positions: &[usize]) -> CMatrix {
        let (_, k, _) = self.index(positions);
        let p = positions.len();
        let mut y = k.mapv(|z| z * 2.0 * self.r0.sqrt());
        for i in 0..p {
            y[[i, i]] -= 1.0;
        }
        y.mapv(|z| z / self.r0)
    }
}

/// Precompute the dense operators for a shared characteristic resistance
/// and no tuning susceptance.
pub fn precompute_big(system: &FullWaveSystem, r0: f64) -> Result<BigOperators, PortError> {
    if system.n > MAX_PRECOMPUTE_N {
        return Err(PortError::SystemTooLarge(system.n));
    }
    if !(r0 > 0.0) {
        return Err(PortError::InvalidConfig(
            "characteristic resistance must be positive".into(),
        ));
    }
    let n = system.n;
    let z = system.impedance();
    // W = Y D via N right-hand-side solves.
    let d = CMatrix::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            C64::new(system.xi[i], 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let w = solve_linear(&z, &d)?;
    let rad = system.r_rad.mapv(|v| C64::new(v, 0.0));
    let loss = system.r_loss.mapv(|v| C64::new(v, 0.0));
    let g_hat = crate::linalg::symmetrize(&conj_t(&w).dot(&rad.dot(&w)));
    let l_hat = crate::linalg::symmetrize(&conj_t(&w).dot(&loss.dot(&w)));
    // y_D = D^H Y D = D^H W.
    let yd = conj_t(&d).dot(&w);
    let mut k_hat = yd.mapv(|z| z * r0);
    for i in 0..n {
        k_hat[[i, i]] += 1.0;
    }
    let k_hat = k_hat.mapv(|z| z / (2.0 * r0.sqrt()));
    Ok(BigOperators {
        g_hat,
        k_hat,
        l_hat,
        r0,
    })
}

/// Current expansion `I = W v` of a port excitation in the full basis.
pub fn expand_currents(w: &CMatrix, v: &CVector) -> CVector {
    w.dot(v)
}
