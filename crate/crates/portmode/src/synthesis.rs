//! Combinatorial feeding synthesis: enumerate port placements under region
//! constraints, deduplicate by symmetry, score every surviving
//! configuration under one of four strategies and rank the results.

use num_bigint::BigUint;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{conj_t, symmetrize};
use crate::metrics::quad_form;
use crate::mom::FullWaveSystem;
use crate::optim::{optimal_excitation, perfect_match, refine_circuit, OptimError};
use crate::ports::{
    build_wave_matrices, precompute_big, reduce_admittance, reduce_quadratic, BigOperators,
    PortError,
};
use crate::{CMatrix, CVector, C64};

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error("invalid region specification: {0}")]
    InvalidRegions(String),
    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),
    #[error(transparent)]
    Port(#[from] PortError),
}

/// Disjoint candidate regions; at most one port per region and empty
/// regions allowed, so a spec with regions of sizes k_1..k_m yields
/// `(k_1+1)...(k_m+1) - 1` configurations.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegionSpec {
    pub regions: Vec<Vec<usize>>,
}

impl RegionSpec {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if self.regions.is_empty() {
            return Err(SynthesisError::InvalidRegions("no regions".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for (r, region) in self.regions.iter().enumerate() {
            for &idx in region {
                if !seen.insert(idx) {
                    return Err(SynthesisError::InvalidRegions(format!(
                        "candidate {idx} appears twice (second time in region {r})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// All candidate indices across regions.
    pub fn candidates(&self) -> Vec<usize> {
        self.regions.iter().flatten().copied().collect()
    }
}

/// A finite permutation group on candidate indices, given by its elements.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SymmetryGroup {
    /// Each permutation maps index `i` to `perm[i]`; all of length `n`.
    pub perms: Vec<Vec<usize>>,
}

impl SymmetryGroup {
    /// The trivial group on `n` indices.
    pub fn identity(n: usize) -> Self {
        Self {
            perms: vec![(0..n).collect()],
        }
    }

    /// Check that every element is a bijection of the same length, the
    /// identity is present and the set is closed under composition.
    pub fn validate(&self) -> Result<(), SynthesisError> {
        if self.perms.is_empty() {
            return Err(SynthesisError::InvalidPermutation("empty group".into()));
        }
        let n = self.perms[0].len();
        let mut set = std::collections::HashSet::new();
        for p in &self.perms {
            if p.len() != n {
                return Err(SynthesisError::InvalidPermutation(
                    "permutations of mixed lengths".into(),
                ));
            }
            let mut hit = vec![false; n];
            for &t in p {
                if t >= n || hit[t] {
                    return Err(SynthesisError::InvalidPermutation(format!(
                        "{p:?} is not a bijection"
                    )));
                }
                hit[t] = true;
            }
            set.insert(p.clone());
        }
        let id: Vec<usize> = (0..n).collect();
        if !set.contains(&id) {
            return Err(SynthesisError::InvalidPermutation(
                "identity missing".into(),
            ));
        }
        for p in &self.perms {
            for q in &self.perms {
                let composed: Vec<usize> = (0..n).map(|i| p[q[i]]).collect();
                if !set.contains(&composed) {
                    return Err(SynthesisError::InvalidPermutation(format!(
                        "not closed: {p:?} after {q:?}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Apply one group element to a sorted position set.
    fn image(&self, which: usize, positions: &[usize]) -> Vec<usize> {
        let mut img: Vec<usize> = positions.iter().map(|&i| self.perms[which][i]).collect();
        img.sort_unstable();
        img
    }

    /// Lexicographically smallest image over the whole group.
    pub fn canonical(&self, positions: &[usize]) -> Vec<usize> {
        let mut best = self.image(0, positions);
        for w in 1..self.perms.len() {
            let img = self.image(w, positions);
            if img < best {
                best = img;
            }
        }
        best
    }
}

/// Exact binomial coefficient `C(n, p)`.
pub fn count_combinations(n: u64, p: u64) -> BigUint {
    assert!(p <= n, "C({n}, {p}) undefined");
    let mut acc = BigUint::from(1u32);
    let p = p.min(n - p);
    for i in 0..p {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Exact number of non-empty region-constrained configurations:
/// `prod(|region| + 1) - 1`.
pub fn count_region_configs(spec: &RegionSpec) -> BigUint {
    let mut acc = BigUint::from(1u32);
    for region in &spec.regions {
        acc *= BigUint::from(region.len() as u64 + 1);
    }
    acc - BigUint::from(1u32)
}

/// Enumerate every non-empty selection of at most one candidate per
/// region, as sorted position sets in lexicographic order.
pub fn enumerate_configs(spec: &RegionSpec) -> Result<Vec<Vec<usize>>, SynthesisError> {
    spec.validate()?;
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = Vec::new();
    fn recurse(
        regions: &[Vec<usize>],
        current: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        match regions.split_first() {
            None => {
                if !current.is_empty() {
                    let mut cfg = current.clone();
                    cfg.sort_unstable();
                    out.push(cfg);
                }
            }
            Some((head, rest)) => {
                recurse(rest, current, out);
                for &idx in head {
                    current.push(idx);
                    recurse(rest, current, out);
                    current.pop();
                }
            }
        }
    }
    recurse(&spec.regions, &mut current, &mut out);
    out.sort();
    Ok(out)
}

/// Keep one representative per symmetry orbit: the lexicographically
/// smallest image, in order of first appearance.
pub fn dedup_symmetry(
    configs: &[Vec<usize>],
    group: &SymmetryGroup,
) -> Result<Vec<Vec<usize>>, SynthesisError> {
    group.validate()?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for cfg in configs {
        let canon = group.canonical(cfg);
        if seen.insert(canon.clone()) {
            out.push(canon);
        }
    }
    Ok(out)
}

/// The four scoring strategies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    /// (a) uniform unit voltages, fixed circuit.
    Uniform,
    /// (b) optimal excitation, fixed circuit.
    OptimalExcitation,
    /// (c) perfect-match circuit candidates, eigenvector excitations.
    PerfectMatch,
    /// (d) perfect-match seeds plus simplex refinement of the shared
    /// circuit under the optimal excitation objective.
    MatchedRefined,
}

impl Strategy {
    pub fn letter(self) -> char {
        match self {
            Strategy::Uniform => 'a',
            Strategy::OptimalExcitation => 'b',
            Strategy::PerfectMatch => 'c',
            Strategy::MatchedRefined => 'd',
        }
    }
}

/// Which evaluation path feeds the per-configuration operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoringPath {
    /// Precompute dense operators once, index per configuration.
    Indexed,
    /// Re-reduce the full-wave operators per configuration.
    Direct,
}

/// Shared feeding-circuit policy for strategies (a) and (b) and the
/// starting point validation of (c)/(d).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CircuitPolicy {
    pub r0: f64,
    pub bl: f64,
}

impl Default for CircuitPolicy {
    fn default() -> Self {
        Self { r0: 50.0, bl: 0.0 }
    }
}

/// Scored result of one configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigScore {
    pub positions: Vec<usize>,
    /// TARC of the strategy's best excitation/circuit, in [0, 1].
    pub tarc: f64,
    /// Radiation efficiency of that excitation.
    pub eta_rad: f64,
    /// Circuit actually used.
    pub r0: f64,
    pub bl: f64,
    /// Optimal port voltages of the strategy.
    pub v: Vec<C64>,
    /// Scoring failure, if any; failed entries rank last.
    pub error: Option<String>,
}

/// Full synthesis output.
#[derive(Debug, Clone, Serialize)]
pub struct SynthesisReport {
    pub strategy: Strategy,
    pub entries: Vec<ConfigScore>,
    /// Indices into `entries`, best (lowest TARC) first; ties break toward
    /// fewer ports, then lexicographic positions.
    pub ranking: Vec<usize>,
    /// Unconstrained count over all candidates and port counts.
    pub raw_count: BigUint,
    /// Region-constrained count.
    pub constrained_count: BigUint,
    /// Count surviving symmetry deduplication.
    pub dedup_count: usize,
}

/// Small per-configuration operators, from either scoring path.
struct SmallOps {
    y: CMatrix,
    g: CMatrix,
    l: CMatrix,
}

impl SmallOps {
    fn wave(&self, r0: f64, bl: f64) -> CMatrix {
        let p = self.y.nrows();
        let (k, _) = build_wave_matrices(&self.y, &vec![r0; p], &vec![bl; p]);
        k
    }
}

fn gamma_from(g: &CMatrix, k: &CMatrix, v: &CVector) -> f64 {
    let khk = symmetrize(&conj_t(k).dot(k));
    let ratio = quad_form(g, v) / quad_form(&khk, v);
    (1.0 - ratio).max(0.0).sqrt()
}

fn eta_rad_from(g: &CMatrix, l: &CMatrix, v: &CVector) -> f64 {
    let pg = quad_form(g, v);
    let pl = quad_form(l, v);
    if pg + pl > 0.0 {
        pg / (pg + pl)
    } else {
        0.0
    }
}

fn score_config(
    ops: &SmallOps,
    positions: &[usize],
    strategy: Strategy,
    circuit: CircuitPolicy,
) -> Result<ConfigScore, OptimError> {
    let p = positions.len();
    let entry = |tarc: f64, r0: f64, bl: f64, v: CVector| ConfigScore {
        positions: positions.to_vec(),
        tarc,
        eta_rad: eta_rad_from(&ops.g, &ops.l, &v),
        r0,
        bl,
        v: v.to_vec(),
        error: None,
    };
    match strategy {
        Strategy::Uniform => {
            let v = CVector::from_elem(p, C64::new(1.0, 0.0));
            let k = ops.wave(circuit.r0, circuit.bl);
            Ok(entry(gamma_from(&ops.g, &k, &v), circuit.r0, circuit.bl, v))
        }
        Strategy::OptimalExcitation => {
            let k = ops.wave(circuit.r0, circuit.bl);
            let opt = optimal_excitation(&ops.g, &k)?;
            let tarc = (1.0 - opt.eta1).max(0.0).sqrt();
            Ok(entry(tarc, circuit.r0, circuit.bl, opt.v1))
        }
        Strategy::PerfectMatch => {
            let sols = perfect_match(&ops.y)?;
            let mut best: Option<ConfigScore> = None;
            for s in &sols {
                let k = ops.wave(s.r0, s.bl);
                let v = CVector::from(s.v.clone());
                let tarc = gamma_from(&ops.g, &k, &v);
                let cand = entry(tarc, s.r0, s.bl, v);
                if best.as_ref().map_or(true, |b| cand.tarc < b.tarc) {
                    best = Some(cand);
                }
            }
            Ok(best.expect("perfect_match returns at least one solution"))
        }
        Strategy::MatchedRefined => {
            let sols = perfect_match(&ops.y)?;
            let mut best: Option<(f64, f64, f64)> = None; // (eta1, r0, bl)
            for s in &sols {
                let objective = |r0: f64, bl: f64| {
                    let k = ops.wave(r0, bl);
                    optimal_excitation(&ops.g, &k).map_or(f64::NEG_INFINITY, |o| o.eta1)
                };
                let res = refine_circuit(s.r0, s.bl, &objective)?;
                if best.map_or(true, |(e, _, _)| res.score > e) {
                    best = Some((res.score, res.r0, res.bl));
                }
            }
            let (_, r0, bl) = best.expect("at least one refinement seed");
            let k = ops.wave(r0, bl);
            let opt = optimal_excitation(&ops.g, &k)?;
            let tarc = (1.0 - opt.eta1).max(0.0).sqrt();
            Ok(entry(tarc, r0, bl, opt.v1))
        }
    }
}

fn failed_entry(positions: &[usize], err: &dyn std::fmt::Display) -> ConfigScore {
    ConfigScore {
        positions: positions.to_vec(),
        tarc: f64::INFINITY,
        eta_rad: 0.0,
        r0: f64::NAN,
        bl: f64::NAN,
        v: Vec::new(),
        error: Some(err.to_string()),
    }
}

/// Run the full synthesis sweep. Per-configuration failures are recorded
/// as failed entries and never abort the sweep; the report is
/// deterministic regardless of the rayon worker count.
pub fn synthesize(
    system: &FullWaveSystem,
    spec: &RegionSpec,
    group: &SymmetryGroup,
    strategy: Strategy,
    circuit: CircuitPolicy,
    path: ScoringPath,
) -> Result<SynthesisReport, SynthesisError> {
    spec.validate()?;
    let candidates = spec.candidates();
    for &c in &candidates {
        if c >= system.n {
            return Err(SynthesisError::InvalidRegions(format!(
                "candidate {c} out of range 0..{}",
                system.n
            )));
        }
    }
    let configs = enumerate_configs(spec)?;
    let constrained_count = count_region_configs(spec);
    let raw_count: BigUint = (1..=candidates.len() as u64)
        .map(|p| count_combinations(candidates.len() as u64, p))
        .sum();
    let configs = dedup_symmetry(&configs, group)?;
    let dedup_count = configs.len();

    let big: Option<BigOperators> = match path {
        ScoringPath::Indexed => Some(precompute_big(system, circuit.r0)?),
        ScoringPath::Direct => None,
    };
    let small_ops = |positions: &[usize]| -> Result<SmallOps, PortError> {
        match &big {
            Some(big) => {
                let (g, _, l) = big.index(positions);
                let y = big.indexed_admittance(positions);
                Ok(SmallOps { y, g, l })
            }
            None => {
                let (y, w) = reduce_admittance(system, positions)?;
                let g = reduce_quadratic(&system.r_rad, &w)?;
                let l = reduce_quadratic(&system.r_loss, &w)?;
                Ok(SmallOps { y, g, l })
            }
        }
    };

    let mut entries: Vec<(usize, ConfigScore)> = configs
        .par_iter()
        .enumerate()
        .map(|(i, positions)| {
            let score = match small_ops(positions) {
                Ok(ops) => score_config(&ops, positions, strategy, circuit)
                    .unwrap_or_else(|e| failed_entry(positions, &e)),
                Err(e) => failed_entry(positions, &e),
            };
            (i, score)
        })
        .collect();
    entries.sort_by_key(|(i, _)| *i);
    let entries: Vec<ConfigScore> = entries.into_iter().map(|(_, s)| s).collect();

    let mut ranking: Vec<usize> = (0..entries.len()).collect();
    ranking.sort_by(|&a, &b| {
        let ea = &entries[a];
        let eb = &entries[b];
        ea.tarc
            .partial_cmp(&eb.tarc)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(ea.positions.len().cmp(&eb.positions.len()))
            .then(ea.positions.cmp(&eb.positions))
    });

    Ok(SynthesisReport {
        strategy,
        entries,
        ranking,
        raw_count,
        constrained_count,
        dedup_count,
    })
}
