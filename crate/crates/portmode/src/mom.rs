//! Desk-scale full-wave generator for arrays of thin-wire (strip-equivalent)
//! dipoles with delta-gap ports.
//!
//! A Galerkin method-of-moments solution of the thin-wire EFIE with the
//! reduced kernel over overlapping triangular basis functions. Each dipole of
//! length `L` with `S` basis functions (`S` odd, so a basis sits exactly at
//! the feed gap in the wire center) is split into `S + 1` equal intervals of
//! length `delta = L / (S + 1)`; basis `i` spans two adjacent intervals with
//! its peak at the interior node. The basis normalization `xi_n = delta`
//! gives port quantities circuit units, mirroring the edge-length
//! normalization used with RWG bases.
//!
//! The radiation matrix is assembled as a far-field Gram operator on a
//! high-order spherical quadrature grid, which makes it positive
//! semi-definite by construction and exactly consistent with the far-field
//! rows used for directivity. The reactance matrix comes from the EFIE
//! kernel with analytic extraction of the `1/R` part on self and adjacent
//! interval pairs. Ohmic loss uses a uniform surface-impedance sheet wrapped
//! around the equivalent cylinder.

use ndarray::Array1;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::consts::{C0, EPS0, MU0, Z0};
use crate::linalg::{solve_vector, LinalgError};
use crate::{CMatrix, CVector, RMatrix, C64};

#[derive(Debug, Error)]
pub enum MomError {
    #[error("invalid dipole array spec: {0}")]
    InvalidSpec(String),
    #[error("dipoles overlap: {0}")]
    GeometryOverlap(String),
    #[error("wire electrically too thick: {0}")]
    ElectricallyTooThick(String),
    #[error("polarization not transverse to the requested direction")]
    PolarizationNotTransverse,
    #[error("no far-field data stored for the requested direction")]
    NoFarFieldData,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// One straight dipole element.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DipoleElement {
    /// Total length (m).
    pub length: f64,
    /// Wire-equivalent radius (m). For a thin strip of width `w` use
    /// [`strip_equivalent_radius`].
    pub radius: f64,
    /// Center position (m).
    pub center: [f64; 3],
    /// Axis direction (normalized internally).
    pub axis: [f64; 3],
}

/// Geometry and material description of a parallel dipole array.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DipoleArraySpec {
    pub dipoles: Vec<DipoleElement>,
    /// Number of triangular basis functions per dipole; odd and >= 3 so a
    /// basis function sits at the center feed gap.
    pub segments_per_dipole: usize,
    /// Operating frequency (Hz).
    pub frequency: f64,
    /// Conductivity (S/m); `f64::INFINITY` for a lossless metal.
    pub conductivity: f64,
}

/// Standard strip-to-wire equivalence `a = w / 4`.
pub fn strip_equivalent_radius(width: f64) -> f64 {
    width / 4.0
}

/// Surface resistance of a good conductor, `R_s = sqrt(pi f mu0 / sigma)`
/// (Ohm per square). Infinite conductivity gives exactly zero.
pub fn surface_resistance(sigma: f64, f: f64) -> f64 {
    assert!(sigma > 0.0, "conductivity must be positive");
    assert!(f > 0.0, "frequency must be positive");
    if sigma.is_infinite() {
        0.0
    } else {
        (std::f64::consts::PI * f * MU0 / sigma).sqrt()
    }
}

/// Metadata of one triangular basis function.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BasisFunction {
    /// Position of the triangle peak (m).
    pub peak: [f64; 3],
    /// Wire axis direction (unit).
    pub axis: [f64; 3],
    /// Half-support length = interval length `delta` (m).
    pub half_len: f64,
    /// Wire-equivalent radius (m).
    pub radius: f64,
    /// Index of the owning dipole.
    pub dipole: usize,
}

/// A far-field row stored for one labeled direction.
#[derive(Debug, Clone)]
pub struct StoredRow {
    pub label: String,
    pub e_hat: [f64; 3],
    pub r_hat: [f64; 3],
    pub row: CVector,
}

/// Source of far-field rows: either analytic (generated dipole arrays) or a
/// table of rows shipped with an external operator bundle.
#[derive(Debug, Clone)]
pub enum FarField {
    Dipoles(Vec<BasisFunction>),
    Table(Vec<StoredRow>),
}

/// The N-dimensional full-wave operator data of one structure at one
/// frequency.
#[derive(Debug, Clone)]
pub struct FullWaveSystem {
    pub n: usize,
    pub frequency: f64,
    /// Free-space wavenumber (1/m).
    pub k: f64,
    /// Free-space impedance (Ohm).
    pub z0: f64,
    /// Radiation part of the impedance matrix (Ohm), symmetric PSD.
    pub r_rad: RMatrix,
    /// Ohmic-loss part (Ohm), symmetric PSD.
    pub r_loss: RMatrix,
    /// Reactance part (Ohm), symmetric.
    pub x: RMatrix,
    /// Basis normalization values (m).
    pub xi: Array1<f64>,
    pub farfield: FarField,
}

impl FullWaveSystem {
    /// Full impedance matrix `Z = R_rad + R_loss + jX`.
    pub fn impedance(&self) -> CMatrix {
        let n = self.n;
        CMatrix::from_shape_fn((n, n), |(i, j)| {
            C64::new(self.r_rad[[i, j]] + self.r_loss[[i, j]], self.x[[i, j]])
        })
    }

    /// Far-field row `F(e_hat, r_hat)` (1 x N), `e^{+jk r_hat . r_n}` phase
    /// convention. For bundle-backed systems only stored directions are
    /// available.
    pub fn farfield_row(&self, e_hat: [f64; 3], r_hat: [f64; 3]) -> Result<CVector, MomError> {
        let e = normalize3(e_hat)
            .ok_or_else(|| MomError::InvalidSpec("zero polarization vector".into()))?;
        let r = normalize3(r_hat)
            .ok_or_else(|| MomError::InvalidSpec("zero direction vector".into()))?;
        if dot3(e, r).abs() > 1e-9 {
            return Err(MomError::PolarizationNotTransverse);
        }
        match &self.farfield {
            FarField::Dipoles(basis) => {
                let mut row = CVector::zeros(self.n);
                for (n, b) in basis.iter().enumerate() {
                    row[n] = farfield_entry(b, self.k, e, r) * self.xi[n];
                }
                Ok(row)
            }
            FarField::Table(rows) => rows
                .iter()
                .find(|s| {
                    dist3(s.e_hat, e) < 1e-9 && dist3(s.r_hat, r) < 1e-9
                })
                .map(|s| s.row.clone())
                .ok_or(MomError::NoFarFieldData),
        }
    }

    /// Index of the basis function at the center of `dipole` (the delta-gap
    /// feed position).
    pub fn center_basis(&self, dipole: usize) -> Option<usize> {
        match &self.farfield {
            FarField::Dipoles(basis) => {
                let on: Vec<usize> = basis
                    .iter()
                    .enumerate()
                    .filter(|(_, b)| b.dipole == dipole)
                    .map(|(i, _)| i)
                    .collect();
                if on.is_empty() {
                    None
                } else {
                    Some(on[on.len() / 2])
                }
            }
            FarField::Table(_) => None,
        }
    }

    /// Input admittance seen by a delta-gap port at basis `index`.
    pub fn input_admittance(&self, index: usize) -> Result<C64, MomError> {
        let z = self.impedance();
        let mut rhs = CVector::zeros(self.n);
        rhs[index] = C64::new(self.xi[index], 0.0);
        let w = solve_vector(&z, &rhs)?;
        Ok(w[index] * self.xi[index])
    }
}

// ---------------------------------------------------------------------------
// vector helpers

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn add3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn scale3(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

fn dist3(a: [f64; 3], b: [f64; 3]) -> f64 {
    norm3(sub3(a, b))
}

fn normalize3(a: [f64; 3]) -> Option<[f64; 3]> {
    let n = norm3(a);
    if n > 0.0 {
        Some(scale3(a, 1.0 / n))
    } else {
        None
    }
}

/// Minimum distance between two finite segments [p0,p1] and [q0,q1].
fn segment_distance(p0: [f64; 3], p1: [f64; 3], q0: [f64; 3], q1: [f64; 3]) -> f64 {
    let u = sub3(p1, p0);
    let v = sub3(q1, q0);
    let w = sub3(p0, q0);
    let a = dot3(u, u);
    let b = dot3(u, v);
    let c = dot3(v, v);
    let d = dot3(u, w);
    let e = dot3(v, w);
    let denom = a * c - b * b;
    let mut s = if denom > 1e-14 * a * c {
        ((b * e - c * d) / denom).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let t = if c > 0.0 {
        ((b * s + e) / c).clamp(0.0, 1.0)
    } else {
        0.0
    };
    s = if a > 0.0 {
        ((b * t - d) / a).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let pc = add3(p0, scale3(u, s));
    let qc = add3(q0, scale3(v, t));
    dist3(pc, qc)
}

// ---------------------------------------------------------------------------
// quadrature

/// Gauss-Legendre nodes and weights on [-1, 1] via Newton iteration.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        loop {
            // Legendre polynomial and derivative by recurrence.
            let mut p0 = 1.0;
            let mut p1 = x;
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let mut p0 = 1.0;
        let mut p1 = x;
        for k in 2..=n {
            let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
            p0 = p1;
            p1 = p2;
        }
        let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

// ---------------------------------------------------------------------------
// assembly

/// One straight interval carrying a linear shape function `a + b*t`,
/// `t in [0, len]` measured from `start` along `axis`.
#[derive(Clone, Copy)]
struct ShapePiece {
    start: [f64; 3],
    axis: [f64; 3],
    len: f64,
    a: f64,
    b: f64,
    /// Derivative of the owning triangle on this interval (1/m).
    dshape: f64,
    /// Axial coordinate of `start`: projection onto the (shared) wire axis,
    /// comparable between pieces of the same dipole.
    s0: f64,
}

fn basis_pieces(b: &BasisFunction) -> [ShapePiece; 2] {
    let d = b.half_len;
    let lo = sub3(b.peak, scale3(b.axis, d));
    let rising = ShapePiece {
        start: lo,
        axis: b.axis,
        len: d,
        a: 0.0,
        b: 1.0 / d,
        dshape: 1.0 / d,
        s0: dot3(lo, b.axis),
    };
    let falling = ShapePiece {
        start: b.peak,
        axis: b.axis,
        len: d,
        a: 1.0,
        b: -1.0 / d,
        dshape: -1.0 / d,
        s0: dot3(b.peak, b.axis),
    };
    [rising, falling]
}

/// `int_0^len (a + b t) / sqrt((t-u)^2 + rad^2) dt`, closed form.
fn line_potential(a: f64, b: f64, len: f64, u: f64, rad: f64) -> f64 {
    let f = |t: f64| -> f64 {
        let s = t - u;
        let r = (s * s + rad * rad).sqrt();
        a * (s / rad).asinh() + b * (r + u * (s / rad).asinh())
    };
    f(len) - f(0.0)
}

struct EfieKernel {
    k: f64,
    nq: usize,
    qx: Vec<f64>,
    qw: Vec<f64>,
}

impl EfieKernel {
    fn new(k: f64, nq: usize) -> Self {
        let (qx, qw) = gauss_legendre(nq);
        Self { k, nq, qx, qw }
    }

    /// Integrals (A, B) over one interval pair:
    /// A = int int Tm Tn G, B = int int Tm' Tn' G, with the reduced-kernel
    /// Green function G = exp(-jkR)/(4 pi R).
    fn interval_pair(
        &self,
        pm: &ShapePiece,
        pn: &ShapePiece,
        same_wire: bool,
        rad: f64,
    ) -> (C64, C64) {
        let mut acc_a = C64::new(0.0, 0.0);
        let mut acc_b = C64::new(0.0, 0.0);
        let near = same_wire && (pm.s0 - pn.s0).abs() < 1.5 * pm.len.max(pn.len);
        for i in 0..self.nq {
            let s = 0.5 * pm.len * (self.qx[i] + 1.0);
            let ws = 0.5 * pm.len * self.qw[i];
            let tm = pm.a + pm.b * s;
            let obs = add3(pm.start, scale3(pm.axis, s));
            if near {
                // Outer numeric, inner split into a smooth remainder and the
                // analytically integrated 1/R part.
                let u = pm.s0 + s - pn.s0; // axial offset on the shared wire
                let mut smooth_a = C64::new(0.0, 0.0);
                let mut smooth_b = C64::new(0.0, 0.0);
                for j in 0..self.nq {
                    let t = 0.5 * pn.len * (self.qx[j] + 1.0);
                    let wt = 0.5 * pn.len * self.qw[j];
                    let tn = pn.a + pn.b * t;
                    let dz = t - u;
                    let r = (dz * dz + rad * rad).sqrt();
                    let g = (C64::new(0.0, -self.k * r).exp() - 1.0) / r;
                    smooth_a += g * (tn * wt);
                    smooth_b += g * wt;
                }
                let stat_a = line_potential(pn.a, pn.b, pn.len, u, rad);
                let stat_b = line_potential(1.0, 0.0, pn.len, u, rad);
                let inner_a = (smooth_a + stat_a) / (4.0 * std::f64::consts::PI);
                let inner_b = (smooth_b + stat_b) / (4.0 * std::f64::consts::PI);
                acc_a += inner_a * (tm * ws);
                acc_b += inner_b * (pm.dshape * pn.dshape * ws);
            } else {
                for j in 0..self.nq {
                    let t = 0.5 * pn.len * (self.qx[j] + 1.0);
                    let wt = 0.5 * pn.len * self.qw[j];
                    let tn = pn.a + pn.b * t;
                    let src = add3(pn.start, scale3(pn.axis, t));
                    let mut rr = dist3(obs, src);
                    if same_wire {
                        rr = (rr * rr + rad * rad).sqrt();
                    }
                    let g = C64::new(0.0, -self.k * rr).exp()
                        / (4.0 * std::f64::consts::PI * rr);
                    acc_a += g * (tm * tn * ws * wt);
                    acc_b += g * (pm.dshape * pn.dshape * ws * wt);
                }
            }
        }
        (acc_a, acc_b)
    }
}

fn farfield_scalar(b: &BasisFunction, k: f64, r_hat: [f64; 3]) -> C64 {
    let beta = k * dot3(b.axis, r_hat);
    let half = 0.5 * beta * b.half_len;
    let sinc = if half.abs() < 1e-8 {
        1.0 - half * half / 6.0
    } else {
        half.sin() / half
    };
    let lam = b.half_len * sinc * sinc;
    let phase = C64::new(0.0, k * dot3(r_hat, b.peak)).exp();
    C64::new(0.0, k * Z0 / (4.0 * std::f64::consts::PI)) * lam * phase
}

/// Far-field entry for a unit-coefficient basis function, `F_n(e,r)` such
/// that `E(r) = F I e^{-jkr} / r`.
fn farfield_entry(b: &BasisFunction, k: f64, e_hat: [f64; 3], r_hat: [f64; 3]) -> C64 {
    farfield_scalar(b, k, r_hat) * dot3(e_hat, b.axis)
}

/// Effective transverse projection for the spherical Gram accumulation.
fn projected_axis(b: &BasisFunction, r_hat: [f64; 3]) -> [f64; 3] {
    let ar = dot3(b.axis, r_hat);
    sub3(b.axis, scale3(r_hat, ar))
}

fn validate(spec: &DipoleArraySpec) -> Result<(f64, Vec<BasisFunction>), MomError> {
    if spec.dipoles.is_empty() {
        return Err(MomError::InvalidSpec("no dipoles".into()));
    }
    if spec.segments_per_dipole < 3 || spec.segments_per_dipole % 2 == 0 {
        return Err(MomError::InvalidSpec(format!(
            "segments_per_dipole must be odd and >= 3, got {}",
            spec.segments_per_dipole
        )));
    }
    if !(spec.frequency > 0.0) {
        return Err(MomError::InvalidSpec("frequency must be positive".into()));
    }
    if !(spec.conductivity > 0.0) {
        return Err(MomError::InvalidSpec(
            "conductivity must be positive (may be +inf)".into(),
        ));
    }
    let k = 2.0 * std::f64::consts::PI * spec.frequency / C0;
    let mut ends = Vec::new();
    for (i, d) in spec.dipoles.iter().enumerate() {
        if !(d.length > 0.0 && d.radius > 0.0) {
            return Err(MomError::InvalidSpec(format!(
                "dipole {i}: length and radius must be positive"
            )));
        }
        if d.radius > d.length / 50.0 {
            return Err(MomError::ElectricallyTooThick(format!(
                "dipole {i}: radius {} exceeds length/50",
                d.radius
            )));
        }
        if d.radius * k > 0.05 {
            return Err(MomError::ElectricallyTooThick(format!(
                "dipole {i}: k*radius = {} > 0.05",
                d.radius * k
            )));
        }
        let axis = normalize3(d.axis)
            .ok_or_else(|| MomError::InvalidSpec(format!("dipole {i}: zero axis")))?;
        let half = scale3(axis, d.length / 2.0);
        ends.push((sub3(d.center, half), add3(d.center, half), d.radius));
    }
    for i in 0..ends.len() {
        for j in (i + 1)..ends.len() {
            let dist = segment_distance(ends[i].0, ends[i].1, ends[j].0, ends[j].1);
            if dist < ends[i].2 + ends[j].2 {
                return Err(MomError::GeometryOverlap(format!(
                    "dipoles {i} and {j} are {dist} m apart"
                )));
            }
        }
    }
    let s = spec.segments_per_dipole;
    let mut basis = Vec::with_capacity(s * spec.dipoles.len());
    for (di, d) in spec.dipoles.iter().enumerate() {
        let axis = normalize3(d.axis).unwrap();
        let delta = d.length / (s + 1) as f64;
        let start = sub3(d.center, scale3(axis, d.length / 2.0));
        for n in 1..=s {
            basis.push(BasisFunction {
                peak: add3(start, scale3(axis, delta * n as f64)),
                axis,
                half_len: delta,
                radius: d.radius,
                dipole: di,
            });
        }
    }
    Ok((k, basis))
}

/// Build the full-wave operator data for a dipole array.
pub fn build_dipole_array(spec: &DipoleArraySpec) -> Result<FullWaveSystem, MomError> {
    let (k, basis) = validate(spec)?;
    let n = basis.len();
    let omega = 2.0 * std::f64::consts::PI * spec.frequency;

    // EFIE reactance.
    let kernel = EfieKernel::new(k, 8);
    let mut x = RMatrix::zeros((n, n));
    for m in 0..n {
        for nn in m..n {
            let bm = &basis[m];
            let bn = &basis[nn];
            let same = bm.dipole == bn.dipole;
            let udot = dot3(bm.axis, bn.axis);
            let mut a_int = C64::new(0.0, 0.0);
            let mut b_int = C64::new(0.0, 0.0);
            for pm in &basis_pieces(bm) {
                for pn in &basis_pieces(bn) {
                    let (ai, bi) = kernel.interval_pair(pm, pn, same, bn.radius);
                    a_int += ai;
                    b_int += bi;
                }
            }
            let z = C64::new(0.0, omega * MU0) * (udot * a_int)
                + b_int / C64::new(0.0, omega * EPS0);
            x[[m, nn]] = z.im;
            x[[nn, m]] = z.im;
        }
    }

    // Radiation matrix as a spherical far-field Gram operator.
    let extent = {
        let mut e = 0.0f64;
        for a in &basis {
            for b in &basis {
                e = e.max(dist3(a.peak, b.peak));
            }
        }
        e + 2.0 * basis.iter().map(|b| b.half_len).fold(0.0, f64::max)
    };
    let ntheta = ((k * extent).ceil() as usize + 24).max(24);
    let nphi = 2 * ntheta;
    let (tn, tw) = gauss_legendre(ntheta);
    let mut r_rad = RMatrix::zeros((n, n));
    for (it, &ct) in tn.iter().enumerate() {
        let st = (1.0 - ct * ct).sqrt();
        for ip in 0..nphi {
            let phi = 2.0 * std::f64::consts::PI * ip as f64 / nphi as f64;
            let r_hat = [st * phi.cos(), st * phi.sin(), ct];
            let w = tw[it] * 2.0 * std::f64::consts::PI / nphi as f64;
            // Per-basis transverse pattern at this direction.
            let amps: Vec<(C64, [f64; 3])> = basis
                .iter()
                .map(|b| {
                    let lam = farfield_scalar(b, k, r_hat);
                    (lam, projected_axis(b, r_hat))
                })
                .collect();
            for m in 0..n {
                for nn in m..n {
                    let pol = dot3(amps[m].1, amps[nn].1);
                    let val = (amps[m].0.conj() * amps[nn].0).re * pol;
                    r_rad[[m, nn]] += w * val / Z0;
                    if nn != m {
                        r_rad[[nn, m]] += w * val / Z0;
                    }
                }
            }
        }
    }

    // Ohmic loss: surface-impedance sheet, Gram matrix of the triangles.
    let rs = surface_resistance(spec.conductivity, spec.frequency);
    let mut r_loss = RMatrix::zeros((n, n));
    if rs > 0.0 {
        for m in 0..n {
            let bm = &basis[m];
            let coef = rs / (2.0 * std::f64::consts::PI * bm.radius);
            r_loss[[m, m]] = coef * 2.0 * bm.half_len / 3.0;
            for nn in (m + 1)..n {
                let bn = &basis[nn];
                if bn.dipole == bm.dipole && dist3(bm.peak, bn.peak) < 1.5 * bm.half_len {
                    let v = coef * bm.half_len / 6.0;
                    r_loss[[m, nn]] = v;
                    r_loss[[nn, m]] = v;
                }
            }
        }
    }

    // Dimension scaling: xi_n = interval length, matrices in the
    // edge-length-normalized convention.
    let xi = Array1::from_iter(basis.iter().map(|b| b.half_len));
    for m in 0..n {
        for nn in 0..n {
            let s = xi[m] * xi[nn];
            x[[m, nn]] *= s;
            r_rad[[m, nn]] *= s;
            r_loss[[m, nn]] *= s;
        }
    }

    Ok(FullWaveSystem {
        n,
        frequency: spec.frequency,
        k,
        z0: Z0,
        r_rad,
        r_loss,
        x,
        xi,
        farfield: FarField::Dipoles(basis),
    })
}

/// Find the first-resonance length of a single center-fed strip dipole by
/// bisection on the imaginary part of the input admittance. Tolerance is
/// `1e-6` of the wavelength.
pub fn first_resonance_length(
    frequency: f64,
    width_over_length: f64,
    segments: usize,
    conductivity: f64,
) -> Result<f64, MomError> {
    let lambda = C0 / frequency;
    let build = |len: f64| -> Result<FullWaveSystem, MomError> {
        build_dipole_array(&DipoleArraySpec {
            dipoles: vec![DipoleElement {
                length: len,
                radius: strip_equivalent_radius(width_over_length * len),
                center: [0.0; 3],
                axis: [0.0, 0.0, 1.0],
            }],
            segments_per_dipole: segments,
            frequency,
            conductivity,
        })
    };
    let susceptance = |len: f64| -> Result<f64, MomError> {
        let sys = build(len)?;
        let c = sys.center_basis(0).unwrap();
        Ok(sys.input_admittance(c)?.im)
    };
    let mut lo = 0.30 * lambda;
    let mut hi = 0.60 * lambda;
    let mut blo = susceptance(lo)?;
    let bhi = susceptance(hi)?;
    if !(blo > 0.0 && bhi < 0.0) {
        return Err(MomError::InvalidSpec(format!(
            "no admittance sign change in bracket: B({lo}) = {blo}, B({hi}) = {bhi}"
        )));
    }
    while hi - lo > 1e-6 * lambda {
        let mid = 0.5 * (lo + hi);
        let bm = susceptance(mid)?;
        if bm > 0.0 {
            lo = mid;
            blo = bm;
        } else {
            hi = mid;
        }
    }
    let _ = blo;
    Ok(0.5 * (lo + hi))
}
