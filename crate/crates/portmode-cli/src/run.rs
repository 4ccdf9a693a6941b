//! Command implementations: each subcommand turns the configured systems
//! into a CSV table (deterministic cell formatting, assembled in sweep
//! order regardless of the worker count) and a JSON summary.

use std::io::Write;
use std::path::PathBuf;

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use portmode::mom::{DipoleArraySpec, DipoleElement};
use portmode::synthesis::{ScoringPath, Strategy};
use portmode::*;

use crate::config::{DipoleConfig, RunConfig, StrictnessConfig};
use crate::{CliError, Command, CommonArgs};

/// One CSV cell; the formatting rules live in one place so every number
/// is emitted with 17 significant digits and a '.' separator.
#[derive(Debug, Clone)]
enum Cell {
    F(f64),
    I(u64),
    S(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::F(x) => format!("{x:.16e}"),
            Cell::I(n) => n.to_string(),
            Cell::S(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            Cell::F(x) => serde_json::Number::from_f64(*x)
                .map(serde_json::Value::Number)
                .unwrap_or(serde_json::Value::Null),
            Cell::I(n) => serde_json::Value::from(*n),
            Cell::S(s) => serde_json::Value::from(s.as_str()),
            Cell::Empty => serde_json::Value::Null,
        }
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    fn to_json_rows(&self) -> serde_json::Value {
        let rows: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let map: serde_json::Map<String, serde_json::Value> = self
                    .header
                    .iter()
                    .cloned()
                    .zip(row.iter().map(Cell::json))
                    .collect();
                serde_json::Value::Object(map)
            })
            .collect();
        serde_json::Value::Array(rows)
    }
}

struct Output {
    table: Table,
    /// Command-specific extras merged into the JSON summary.
    extra: serde_json::Map<String, serde_json::Value>,
    /// Informational stdout lines (suppressed by --quiet).
    notes: Vec<String>,
}

impl Output {
    fn new(table: Table) -> Self {
        Self {
            table,
            extra: serde_json::Map::new(),
            notes: Vec::new(),
        }
    }
}

pub fn dispatch(command: &Command) -> Result<(), CliError> {
    let args = command.args();
    let cfg = RunConfig::load(&args.config)?;
    let systems = load_systems(&cfg)?;
    let output = match command {
        Command::Generate(_) => cmd_generate(&cfg, args, &systems)?,
        Command::Tarc(_) => cmd_tarc(&cfg, &systems)?,
        Command::OptimizeExcitation(_) => cmd_optimize_excitation(&cfg, &systems)?,
        Command::Match(_) => cmd_match(&cfg, &systems)?,
        Command::Refine(_) => cmd_refine(&cfg, &systems)?,
        Command::Gain(_) => cmd_gain(&cfg, &systems)?,
        Command::Bound(_) => cmd_bound(&cfg, &systems)?,
        Command::Synthesize(_) => cmd_synthesize(&cfg, &systems)?,
        Command::ScanPort(_) => cmd_scan_port(&cfg, &systems)?,
    };
    emit(command, args, &cfg, output)
}

fn emit(
    command: &Command,
    args: &CommonArgs,
    cfg: &RunConfig,
    output: Output,
) -> Result<(), CliError> {
    if !args.quiet {
        for note in &output.notes {
            println!("{note}");
        }
    }
    let csv = output.table.to_csv();
    match args.csv.as_ref().or(cfg.output.csv.as_ref()) {
        Some(path) => std::fs::write(path, csv.as_bytes()).map_err(CliError::io)?,
        None => {
            std::io::stdout()
                .write_all(csv.as_bytes())
                .map_err(CliError::io)?;
        }
    }
    if let Some(path) = args.json.as_ref().or(cfg.output.json.as_ref()) {
        let mut summary = serde_json::Map::new();
        summary.insert(
            "command".into(),
            serde_json::Value::from(command_name(command)),
        );
        summary.insert("rows".into(), output.table.to_json_rows());
        for (k, v) in output.extra {
            summary.insert(k, v);
        }
        let text = serde_json::to_string_pretty(&serde_json::Value::Object(summary))
            .expect("summary serializes");
        std::fs::write(path, text.as_bytes()).map_err(CliError::io)?;
    }
    Ok(())
}

fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Generate(_) => "generate",
        Command::Tarc(_) => "tarc",
        Command::OptimizeExcitation(_) => "optimize-excitation",
        Command::Match(_) => "match",
        Command::Refine(_) => "refine",
        Command::Gain(_) => "gain",
        Command::Bound(_) => "bound",
        Command::Synthesize(_) => "synthesize",
        Command::ScanPort(_) => "scan-port",
    }
}

/// Build or read the per-frequency systems in sweep order.
fn load_systems(cfg: &RunConfig) -> Result<Vec<(f64, FullWaveSystem)>, CliError> {
    match (&cfg.input.bundle, &cfg.input.dipole) {
        (Some(path), None) => {
            let strictness = match cfg.input.strictness {
                StrictnessConfig::Strict => Strictness::Strict,
                StrictnessConfig::Lenient => Strictness::Lenient,
            };
            let sys = read_bundle_with(path, strictness)?;
            Ok(vec![(sys.frequency, sys)])
        }
        (None, Some(dipole)) => {
            let freqs = cfg.frequencies(None);
            freqs
                .par_iter()
                .map(|&f| Ok((f, build_system(dipole, f)?)))
                .collect()
        }
        _ => unreachable!("validated on load"),
    }
}

fn build_system(d: &DipoleConfig, frequency: f64) -> Result<FullWaveSystem, CliError> {
    let spec = DipoleArraySpec {
        dipoles: d
            .element
            .iter()
            .map(|e| DipoleElement {
                length: e.length,
                radius: e.radius,
                center: e.center,
                axis: e.axis,
            })
            .collect(),
        segments_per_dipole: d.segments_per_dipole,
        frequency,
        conductivity: d.conductivity.unwrap_or(f64::INFINITY),
    };
    Ok(build_dipole_array(&spec)?)
}

/// Resolve the configured port positions against one system.
fn resolve_ports(cfg: &RunConfig, sys: &FullWaveSystem) -> Result<Vec<usize>, CliError> {
    if let Some(p) = &cfg.ports.positions {
        if cfg.ports.dipole_centers {
            return Err(CliError::config(
                "ports: give either positions or dipole_centers, not both",
            ));
        }
        return Ok(p.clone());
    }
    if cfg.ports.dipole_centers {
        let mut out = Vec::new();
        while let Some(idx) = sys.center_basis(out.len()) {
            out.push(idx);
        }
        if out.is_empty() {
            return Err(CliError::config(
                "ports.dipole_centers needs basis geometry (generated systems)",
            ));
        }
        return Ok(out);
    }
    Err(CliError::config(
        "ports: positions or dipole_centers = true required",
    ))
}

fn directions(cfg: &RunConfig) -> Vec<Direction> {
    cfg.direction
        .iter()
        .map(|d| Direction {
            label: d.label.clone(),
            e_hat: d.e_hat,
            r_hat: d.r_hat,
        })
        .collect()
}

fn reduce_ports(
    cfg: &RunConfig,
    sys: &FullWaveSystem,
    dirs: &[Direction],
) -> Result<PortOperators, CliError> {
    let positions = resolve_ports(cfg, sys)?;
    let p = positions.len();
    let pc = PortConfig {
        positions,
        r0: cfg.circuit.r0.resolve(p, "circuit.r0")?,
        bl: cfg.circuit.bl.resolve(p, "circuit.bl")?,
    };
    Ok(PortOperators::reduce(sys, &pc, dirs)?)
}

fn excitation(cfg: &RunConfig, p: usize) -> Result<CVector, CliError> {
    let e = cfg
        .excitation
        .as_ref()
        .ok_or_else(|| CliError::config("this command needs an [excitation] section"))?;
    if e.uniform {
        return Ok(CVector::from_elem(p, C64::new(1.0, 0.0)));
    }
    let v = e.v.as_ref().expect("validated: uniform xor v");
    if v.len() != p {
        return Err(CliError::config(format!(
            "excitation.v has {} entries for {p} ports",
            v.len()
        )));
    }
    Ok(v.iter().map(|[re, im]| C64::new(*re, *im)).collect())
}

fn cmd_generate(
    cfg: &RunConfig,
    args: &CommonArgs,
    systems: &[(f64, FullWaveSystem)],
) -> Result<Output, CliError> {
    if cfg.input.dipole.is_none() {
        return Err(CliError::config("generate needs a dipole input"));
    }
    let base: &PathBuf = args
        .out
        .as_ref()
        .or(cfg.output.bundle.as_ref())
        .ok_or_else(|| CliError::config("generate needs --out or output.bundle"))?;
    let mut table = Table::new(["frequency", "dimension"]);
    let mut paths = Vec::new();
    for (i, (f, sys)) in systems.iter().enumerate() {
        let path = if systems.len() == 1 {
            base.clone()
        } else {
            PathBuf::from(format!("{}_{i}", base.display()))
        };
        write_bundle(sys, &path)?;
        table.push(vec![Cell::F(*f), Cell::I(sys.n as u64)]);
        paths.push(serde_json::Value::from(path.display().to_string()));
    }
    let mut out = Output::new(table);
    out.extra
        .insert("bundles".into(), serde_json::Value::Array(paths));
    out.notes
        .push(format!("wrote {} bundle(s) under {}", systems.len(), base.display()));
    Ok(out)
}

fn cmd_tarc(cfg: &RunConfig, systems: &[(f64, FullWaveSystem)]) -> Result<Output, CliError> {
    let dirs = directions(cfg);
    let mut table = Table::new([
        "frequency",
        "direction",
        "tarc",
        "eta_rad",
        "eta_match",
        "eta_tot",
        "p_rad",
        "p_lost",
        "p_tot",
        "directivity",
        "realized_gain",
    ]);
    for (f, sys) in systems {
        let ops = reduce_ports(cfg, sys, &dirs)?;
        let v = excitation(cfg, ops.y.nrows())?;
        let sol = evaluate(&ops, &v)?;
        let base = |dir: Cell, d: Cell, g: Cell| {
            vec![
                Cell::F(*f),
                dir,
                Cell::F(sol.tarc),
                Cell::F(sol.eta_rad),
                Cell::F(sol.eta_match),
                Cell::F(sol.eta_tot),
                Cell::F(sol.p_rad),
                Cell::F(sol.p_lost),
                Cell::F(sol.p_tot),
                d,
                g,
            ]
        };
        if dirs.is_empty() {
            table.push(base(Cell::Empty, Cell::Empty, Cell::Empty));
        } else {
            for (i, d) in dirs.iter().enumerate() {
                table.push(base(
                    Cell::S(d.label.clone()),
                    Cell::F(sol.directivity[i]),
                    Cell::F(sol.realized_gain[i]),
                ));
            }
        }
    }
    Ok(Output::new(table))
}

fn excitation_header(p: usize) -> Vec<String> {
    let mut h = vec!["frequency".to_string(), "eta1".into(), "tarc".into()];
    for i in 0..p {
        h.push(format!("v{i}_re"));
        h.push(format!("v{i}_im"));
    }
    h
}

fn cmd_optimize_excitation(
    cfg: &RunConfig,
    systems: &[(f64, FullWaveSystem)],
) -> Result<Output, CliError> {
    let mut table: Option<Table> = None;
    for (f, sys) in systems {
        let ops = reduce_ports(cfg, sys, &[])?;
        let opt = optimal_excitation(&ops.g, &ops.k_mat)?;
        let table = table.get_or_insert_with(|| Table::new(excitation_header(opt.v1.len())));
        let mut row = vec![
            Cell::F(*f),
            Cell::F(opt.eta1),
            Cell::F((1.0 - opt.eta1).max(0.0).sqrt()),
        ];
        for z in opt.v1.iter() {
            row.push(Cell::F(z.re));
            row.push(Cell::F(z.im));
        }
        table.push(row);
    }
    Ok(Output::new(table.expect("at least one sweep point")))
}

fn cmd_match(cfg: &RunConfig, systems: &[(f64, FullWaveSystem)]) -> Result<Output, CliError> {
    let mut table = Table::new([
        "frequency", "rank", "r0", "bl", "tarc", "eta_rad", "eta_tot",
    ]);
    for (f, sys) in systems {
        let ops = reduce_ports(cfg, sys, &[])?;
        let sols = perfect_match(&ops.y)?;
        let ranked = rank_match_solutions(&ops, &sols)?;
        for (rank, (i, sol)) in ranked.iter().enumerate() {
            table.push(vec![
                Cell::F(*f),
                Cell::I(rank as u64 + 1),
                Cell::F(sols[*i].r0),
                Cell::F(sols[*i].bl),
                Cell::F(sol.tarc),
                Cell::F(sol.eta_rad),
                Cell::F(sol.eta_tot),
            ]);
        }
    }
    Ok(Output::new(table))
}

fn cmd_refine(cfg: &RunConfig, systems: &[(f64, FullWaveSystem)]) -> Result<Output, CliError> {
    let mut table = Table::new([
        "frequency",
        "r0",
        "bl",
        "eta1",
        "tarc",
        "converged",
        "evaluations",
    ]);
    for (f, sys) in systems {
        let ops = reduce_ports(cfg, sys, &[])?;
        let seeds = perfect_match(&ops.y)?;
        let objective = |r0: f64, bl: f64| {
            let closed = ops.with_circuit(r0, bl);
            optimal_excitation(&closed.g, &closed.k_mat).map_or(f64::NEG_INFINITY, |o| o.eta1)
        };
        let mut best: Option<RefineResult> = None;
        for s in &seeds {
            let res = refine_circuit(s.r0, s.bl, &objective)?;
            if best.as_ref().map_or(true, |b| res.score > b.score) {
                best = Some(res);
            }
        }
        let best = best.expect("perfect_match returns at least one seed");
        table.push(vec![
            Cell::F(*f),
            Cell::F(best.r0),
            Cell::F(best.bl),
            Cell::F(best.score),
            Cell::F((1.0 - best.score).max(0.0).sqrt()),
            Cell::I(best.converged as u64),
            Cell::I(best.evaluations as u64),
        ]);
    }
    Ok(Output::new(table))
}

fn cmd_gain(cfg: &RunConfig, systems: &[(f64, FullWaveSystem)]) -> Result<Output, CliError> {
    let dirs = directions(cfg);
    if dirs.is_empty() {
        return Err(CliError::config("gain needs at least one [[direction]]"));
    }
    let mut table = Table::new([
        "frequency",
        "direction",
        "realized_gain_optimal",
        "realized_gain_uniform",
    ]);
    for (f, sys) in systems {
        let ops = reduce_ports(cfg, sys, &dirs)?;
        let p = ops.y.nrows();
        let uniform = CVector::from_elem(p, C64::new(1.0, 0.0));
        for (i, (dir, row)) in ops.f_rows.iter().enumerate() {
            let (gamma1, _) = max_realized_gain(row, &ops.k_mat, ops.z0)?;
            let g_uni = realized_gain(&ops, &uniform, i)?;
            table.push(vec![
                Cell::F(*f),
                Cell::S(dir.label.clone()),
                Cell::F(gamma1),
                Cell::F(g_uni),
            ]);
        }
    }
    Ok(Output::new(table))
}

fn cmd_bound(cfg: &RunConfig, systems: &[(f64, FullWaveSystem)]) -> Result<Output, CliError> {
    let mut table = Table::new(["frequency", "delta", "eta_ub"]);
    for (f, sys) in systems {
        let ops = reduce_ports(cfg, sys, &[])?;
        let bound = efficiency_bound(&ops.g, &ops.l)?;
        table.push(vec![
            Cell::F(*f),
            Cell::F(bound.delta),
            Cell::F(bound.eta_ub),
        ]);
    }
    Ok(Output::new(table))
}

fn parse_strategy(s: &str) -> Result<Strategy, CliError> {
    match s {
        "a" | "uniform" => Ok(Strategy::Uniform),
        "b" | "optimal-excitation" => Ok(Strategy::OptimalExcitation),
        "c" | "perfect-match" => Ok(Strategy::PerfectMatch),
        "d" | "matched-refined" => Ok(Strategy::MatchedRefined),
        other => Err(CliError::config(format!(
            "unknown strategy {other:?}; use a/b/c/d"
        ))),
    }
}

fn cmd_synthesize(cfg: &RunConfig, systems: &[(f64, FullWaveSystem)]) -> Result<Output, CliError> {
    let syn = cfg
        .synthesis
        .as_ref()
        .ok_or_else(|| CliError::config("synthesize needs a [synthesis] section"))?;
    let regions = cfg
        .ports
        .regions
        .as_ref()
        .ok_or_else(|| CliError::config("synthesize needs ports.regions"))?;
    let spec = RegionSpec {
        regions: regions.clone(),
    };
    let strategy = parse_strategy(&syn.strategy)?;
    let path = match syn.scoring.as_deref() {
        None | Some("indexed") => ScoringPath::Indexed,
        Some("direct") => ScoringPath::Direct,
        Some(other) => {
            return Err(CliError::config(format!(
                "unknown scoring path {other:?}; use indexed or direct"
            )))
        }
    };
    let circuit = CircuitPolicy {
        r0: cfg.circuit.r0.shared("circuit.r0")?,
        bl: cfg.circuit.bl.shared("circuit.bl")?,
    };
    let mut table = Table::new([
        "frequency",
        "rank",
        "positions",
        "tarc",
        "eta_rad",
        "r0",
        "bl",
    ]);
    let mut notes = Vec::new();
    for (f, sys) in systems {
        let group = if syn.symmetry.is_empty() {
            SymmetryGroup::identity(sys.n)
        } else {
            let mut perms = syn.symmetry.clone();
            let id: Vec<usize> = (0..sys.n).collect();
            if !perms.contains(&id) {
                perms.push(id);
            }
            SymmetryGroup { perms }
        };
        let report = synthesize(sys, &spec, &group, strategy, circuit, path)?;
        notes.push(format!(
            "frequency {f:.6e}: {} region-constrained configurations ({} raw, {} after symmetry)",
            report.constrained_count, report.raw_count, report.dedup_count
        ));
        for (rank, &idx) in report.ranking.iter().enumerate() {
            let e = &report.entries[idx];
            let positions: Vec<String> = e.positions.iter().map(|p| p.to_string()).collect();
            table.push(vec![
                Cell::F(*f),
                Cell::I(rank as u64 + 1),
                Cell::S(positions.join(";")),
                Cell::F(e.tarc),
                Cell::F(e.eta_rad),
                Cell::F(e.r0),
                Cell::F(e.bl),
            ]);
        }
    }
    let mut out = Output::new(table);
    out.notes = notes;
    Ok(out)
}

fn cmd_scan_port(cfg: &RunConfig, systems: &[(f64, FullWaveSystem)]) -> Result<Output, CliError> {
    let r0 = cfg.circuit.r0.shared("circuit.r0")?;
    let mut table = Table::new(["frequency", "position", "tarc", "best"]);
    for (f, sys) in systems {
        let candidates: Vec<usize> = match &cfg.ports.candidates {
            Some(c) => c.clone(),
            None => (0..sys.n).collect(),
        };
        let big = precompute_big(sys, r0)?;
        let (best, curve) = scan_single_port(&big.g_hat, &big.k_hat, &candidates)?;
        for (i, &pos) in candidates.iter().enumerate() {
            table.push(vec![
                Cell::F(*f),
                Cell::I(pos as u64),
                Cell::F(curve[i]),
                Cell::I((pos == best) as u64),
            ]);
        }
    }
    Ok(Output::new(table))
}
