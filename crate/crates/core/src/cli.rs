//! `hsx` command-line frontend.
//!
//! Exit codes: 0 on success, 1 when input validation fails, 2 when a
//! numerical guard trips. Failures print one JSON line on stderr.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::circle_calculus::{l2_norm_sq, PeriodicGridFn};
use crate::datum::{DatumFile, InitialDatum};
use crate::error::{Error, Result};
use crate::geodesic_validator::{
    geodesic_residual, oracle_run, residual_threshold, weak_solution_audit, AuditOptions,
    AuditReport,
};
use crate::lagrangian::breakdown_set;
use crate::weak_flow::{
    energy_report, eulerian_fields, tangent_membership, weak_flow_state, EnergyReport,
    EulerianFields, DEFAULT_STEPS,
};

#[derive(Debug, Parser)]
#[command(name = "hsx", version, about = "Periodic two-component Hunter-Saxton solver and validator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Dump u, u_x, rho on the grid at each time.
    Simulate(RunArgs),
    /// Print the breakdown time, the breakdown set there, and the defect times.
    Breakdown(RunArgs),
    /// Compare measured energy with the defect-law prediction.
    EnergyAudit(RunArgs),
    /// Weak residuals of the geodesic equation.
    ValidateGeodesic(RunArgs),
    /// L2 distance between the explicit solution and the method-of-lines oracle.
    OracleCompare(RunArgs),
    /// Check the weak-solution conditions over a time sweep.
    AuditWeak(RunArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Simulate(_) => "simulate",
            Command::Breakdown(_) => "breakdown",
            Command::EnergyAudit(_) => "energy-audit",
            Command::ValidateGeodesic(_) => "validate-geodesic",
            Command::OracleCompare(_) => "oracle-compare",
            Command::AuditWeak(_) => "audit-weak",
        }
    }

    pub fn args(&self) -> &RunArgs {
        match self {
            Command::Simulate(a)
            | Command::Breakdown(a)
            | Command::EnergyAudit(a)
            | Command::ValidateGeodesic(a)
            | Command::OracleCompare(a)
            | Command::AuditWeak(a) => a,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Args)]
pub struct RunArgs {
    /// Datum file (JSON, samples or structured).
    #[arg(long)]
    pub datum: PathBuf,
    /// Grid size. Sampled files must agree; structured files default to 256.
    #[arg(long)]
    pub n: Option<usize>,
    /// `T0:T1:COUNT` (inclusive, evenly spaced) or a comma-separated list.
    #[arg(long)]
    pub times: Option<String>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Rescale the datum into the energy-4 gauge instead of rejecting it.
    #[arg(long)]
    pub auto_normalize: bool,
    /// Zero band for level sets; exact matching for structured data by default.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Finite-difference step in time for residuals.
    #[arg(long, default_value_t = 1e-4)]
    pub h: f64,
    /// Oracle time step.
    #[arg(long, default_value_t = 1e-4)]
    pub dt: f64,
    /// Simpson steps for the varrho time integral.
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
}

/// Fully resolved run configuration, echoed in JSON reports.
#[derive(Clone, Debug, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub datum_path: String,
    pub n: usize,
    pub times: Vec<f64>,
    pub output_path: Option<String>,
    pub format: Format,
    pub auto_normalize: bool,
    pub alpha: f64,
    pub eps: f64,
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
}

/// Parses `T0:T1:COUNT` or `a,b,c`. Returns sorted, deduplicated times.
pub fn parse_times(text: &str) -> Result<Vec<f64>> {
    let bad = |detail: String| Error::param("times", detail);
    let mut times = if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [a, b, c] = parts[..] else {
            return Err(bad(format!("range '{text}' must be T0:T1:COUNT")));
        };
        let t0: f64 = a.trim().parse().map_err(|_| bad(format!("bad start '{a}'")))?;
        let t1: f64 = b.trim().parse().map_err(|_| bad(format!("bad end '{b}'")))?;
        let count: usize = c.trim().parse().map_err(|_| bad(format!("bad count '{c}'")))?;
        match count {
            0 => return Err(bad("count must be positive".into())),
            1 => vec![t0],
            _ => (0..count)
                .map(|i| t0 + (t1 - t0) * i as f64 / (count - 1) as f64)
                .collect(),
        }
    } else {
        text.split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| bad(format!("bad time '{s}'"))))
            .collect::<Result<Vec<f64>>>()?
    };
    if let Some(t) = times.iter().find(|t| !t.is_finite()) {
        return Err(bad(format!("time {t} is not finite")));
    }
    if times.is_empty() {
        return Err(bad("no times given".into()));
    }
    times.sort_by(f64::total_cmp);
    times.dedup();
    Ok(times)
}

/// Shortest round-trip decimal, switching to exponent form for very small
/// or very large magnitudes.
fn num(v: f64) -> String {
    format!("{v:?}")
}

struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
    json: Vec<Value>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
            json: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>, json: Value) {
        self.rows.push(row);
        self.json.push(json);
    }
}

/// Loads the datum and resolves defaults.
pub fn resolve(command: &Command) -> Result<(RunConfig, InitialDatum)> {
    let args = command.args();
    let (datum, alpha) = DatumFile::load(&args.datum)?.into_datum(args.n, args.auto_normalize)?;
    let needs_times = !matches!(command, Command::Breakdown(_));
    let times = match (&args.times, needs_times) {
        (Some(text), _) => parse_times(text)?,
        (None, false) => Vec::new(),
        (None, true) => return Err(Error::param("times", "--times is required")),
    };
    if let Command::AuditWeak(_) = command {
        if let Some(t) = times.iter().find(|t| **t < 0.0) {
            return Err(Error::param("times", format!("{t} is negative")));
        }
    }
    let eps = args.eps.unwrap_or_else(|| datum.default_zero_eps());
    if eps.is_nan() || eps < 0.0 {
        return Err(Error::param("eps", format!("{eps} must be nonnegative")));
    }
    Ok((
        RunConfig {
            command: command.name(),
            datum_path: args.datum.display().to_string(),
            n: datum.grid().n(),
            times,
            output_path: args.out.as_ref().map(|p| p.display().to_string()),
            format: args.format,
            auto_normalize: args.auto_normalize,
            alpha,
            eps,
            h: args.h,
            dt: args.dt,
            steps: args.steps,
        },
        datum,
    ))
}

fn simulate(cfg: &RunConfig, datum: &InitialDatum) -> Result<Table> {
    let fields: Vec<EulerianFields> = cfg
        .times
        .par_iter()
        .map(|&t| eulerian_fields(datum, t))
        .collect();
    let mut table = Table::new(&["t", "x", "u", "ux", "rho", "mask"]);
    for f in &fields {
        let grid = f.grid();
        for j in 0..grid.n() {
            let x = grid.node(j);
            table.push(
                vec![
                    num(f.t),
                    num(x),
                    num(f.u[j]),
                    num(f.u_x[j]),
                    num(f.rho[j]),
                    f.mask[j].to_string(),
                ],
                json!({"t": f.t, "x": x, "u": f.u[j], "ux": f.u_x[j], "rho": f.rho[j], "mask": f.mask[j]}),
            );
        }
    }
    Ok(table)
}

fn breakdown(cfg: &RunConfig, datum: &InitialDatum) -> Result<Table> {
    let t_star = datum.breakdown_time_with(cfg.eps);
    let set = if t_star.is_finite() {
        breakdown_set(datum, t_star, cfg.eps)
    } else {
        Vec::new()
    };
    let defects = datum.defect_times(cfg.eps);
    let mut table = Table::new(&["t_star", "set_start", "set_end"]);
    let json = json!({
        "t_star": t_star.is_finite().then_some(t_star),
        "finite": t_star.is_finite(),
        "breakdown_set": set.iter().map(|i| [i.start, i.end]).collect::<Vec<_>>(),
        "defect_times": defects,
    });
    if set.is_empty() {
        table.push(vec![num(t_star), String::new(), String::new()], json);
    } else {
        for (k, i) in set.iter().enumerate() {
            let j = if k == 0 { json.clone() } else { Value::Null };
            table.push(vec![num(t_star), num(i.start), num(i.end)], j);
        }
        table.json.retain(|v| !v.is_null());
    }
    Ok(table)
}

fn energy_audit(cfg: &RunConfig, datum: &InitialDatum) -> Result<Table> {
    let reports: Vec<EnergyReport> = cfg
        .times
        .par_iter()
        .map(|&t| energy_report(datum, t, cfg.eps))
        .collect();
    let mut table = Table::new(&["t", "measured_E", "predicted_E", "defect_measure", "is_defect"]);
    for r in reports {
        table.push(
            vec![
                num(r.t),
                num(r.measured_e),
                num(r.predicted_e),
                num(r.defect_measure),
                r.is_defect_time.to_string(),
            ],
            json!({
                "t": r.t,
                "measured_E": r.measured_e,
                "predicted_E": r.predicted_e,
                "defect_measure": r.defect_measure,
                "is_defect": r.is_defect_time,
            }),
        );
    }
    Ok(table)
}

fn validate_geodesic(cfg: &RunConfig, datum: &InitialDatum) -> Result<Table> {
    let bound = residual_threshold(cfg.h);
    let results: Vec<Result<Option<_>>> = cfg
        .times
        .par_iter()
        .map(|&t| match geodesic_residual(datum, t, cfg.h) {
            Ok(r) => Ok(Some(r)),
            Err(Error::DefectTime { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect();
    let mut table = Table::new(&[
        "t",
        "status",
        "max_r1_weak",
        "max_r2_weak",
        "r1_linf_unmasked",
        "mask_fraction",
        "bound",
    ]);
    for (&t, res) in cfg.times.iter().zip(results) {
        match res? {
            Some(r) => {
                let m1 = r.r1_weak.iter().copied().fold(0.0, f64::max);
                let m2 = r.r2_weak.iter().copied().fold(0.0, f64::max);
                let status = if r.max_weak() <= bound { "pass" } else { "fail" };
                table.push(
                    vec![
                        num(t),
                        status.into(),
                        num(m1),
                        num(m2),
                        num(r.r1_linf_unmasked),
                        num(r.mask_fraction),
                        num(bound),
                    ],
                    json!({
                        "t": t,
                        "status": status,
                        "r1_weak": r.r1_weak,
                        "r2_weak": r.r2_weak,
                        "r1_linf_unmasked": r.r1_linf_unmasked,
                        "mask_fraction": r.mask_fraction,
                        "bound": bound,
                    }),
                );
            }
            None => table.push(
                vec![
                    num(t),
                    "defect".into(),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                    num(bound),
                ],
                json!({"t": t, "status": "defect", "bound": bound}),
            ),
        }
    }
    Ok(table)
}

fn l2_distance(a: &PeriodicGridFn, b: &PeriodicGridFn) -> f64 {
    l2_norm_sq(&a.zip_with(b, |p, q| p - q)).sqrt()
}

fn oracle_compare(cfg: &RunConfig, datum: &InitialDatum) -> Result<Table> {
    let t_star = datum.breakdown_time_with(cfg.eps);
    if let Some(&t_end) = cfg.times.iter().find(|&&t| t >= t_star) {
        return Err(Error::PastBreakdown { t_end, t_star });
    }
    let runs: Vec<Result<_>> = cfg
        .times
        .par_iter()
        .map(|&t| {
            let run = oracle_run(datum, t, cfg.n, cfg.dt)?;
            let explicit = eulerian_fields(datum, t);
            Ok((t, run, explicit))
        })
        .collect();
    let mut table = Table::new(&["t", "n", "dt", "l2_u", "l2_rho", "max_energy_drift"]);
    for r in runs {
        let (t, run, explicit) = r?;
        let l2_u = l2_distance(&run.fields.u, &explicit.u);
        let l2_rho = l2_distance(&run.fields.rho, &explicit.rho);
        table.push(
            vec![
                num(t),
                cfg.n.to_string(),
                num(run.dt),
                num(l2_u),
                num(l2_rho),
                num(run.max_energy_drift),
            ],
            json!({
                "t": t,
                "n": cfg.n,
                "dt": run.dt,
                "l2_u": l2_u,
                "l2_rho": l2_rho,
                "max_energy_drift": run.max_energy_drift,
            }),
        );
    }
    Ok(table)
}

fn audit_weak(cfg: &RunConfig, datum: &InitialDatum) -> Result<Table> {
    let opts = AuditOptions {
        h: cfg.h,
        ..AuditOptions::default()
    };
    let report: AuditReport = weak_solution_audit(datum, &cfg.times, opts)?;
    // inner product of (phi_t, varrho_t) at base (phi, 0), a quarter of the energy
    let membership: Vec<Result<f64>> = cfg
        .times
        .par_iter()
        .map(|&t| {
            let ws = weak_flow_state(datum, t, cfg.steps)?;
            let zero = PeriodicGridFn::zeros(datum.grid());
            Ok(tangent_membership(&ws.lag.phi_t, &ws.varrho_t, &ws.lag.phi, &zero, 1e-9).inner_product)
        })
        .collect();
    let membership = membership.into_iter().collect::<Result<Vec<f64>>>()?;

    let mut table = Table::new(&["condition", "pass", "value", "detail"]);
    for (name, c) in [
        ("a", &report.a_h1_finite),
        ("b", &report.b_initial_data),
        ("c", &report.c_bounded),
        ("d", &report.d_geodesic),
    ] {
        table.push(
            vec![name.into(), c.pass.to_string(), num(c.value), c.detail.clone()],
            json!({"condition": name, "pass": c.pass, "value": c.value, "detail": c.detail}),
        );
    }
    table.json.push(json!({
        "times": report.times.iter().zip(&membership).map(|(a, ip)| json!({
            "t": a.t,
            "ux_norm_sq": a.ux_norm_sq,
            "rho_norm_sq": a.rho_norm_sq,
            "measured_E": a.measured_energy,
            "is_defect": a.is_defect_time,
            "max_weak_residual": a.residual.as_ref().map(|r| r.max_weak()),
            "inner_product": ip,
        })).collect::<Vec<_>>(),
    }));
    Ok(table)
}

fn render(cfg: &RunConfig, table: Table) -> Result<Vec<u8>> {
    match cfg.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
            w.write_record(&table.header).map_err(io)?;
            for row in &table.rows {
                w.write_record(row).map_err(io)?;
            }
            w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
        }
        Format::Json => {
            let doc = json!({"command": cfg.command, "config": cfg, "results": table.json});
            let mut out = serde_json::to_vec_pretty(&doc)?;
            out.push(b'\n');
            Ok(out)
        }
    }
}

/// Executes one command and writes its output.
pub fn run(command: &Command) -> Result<()> {
    let (cfg, datum) = resolve(command)?;
    let table = match command {
        Command::Simulate(_) => simulate(&cfg, &datum)?,
        Command::Breakdown(_) => breakdown(&cfg, &datum)?,
        Command::EnergyAudit(_) => energy_audit(&cfg, &datum)?,
        Command::ValidateGeodesic(_) => validate_geodesic(&cfg, &datum)?,
        Command::OracleCompare(_) => oracle_compare(&cfg, &datum)?,
        Command::AuditWeak(_) => audit_weak(&cfg, &datum)?,
    };
    let bytes = render(&cfg, table)?;
    match &command.args().out {
        Some(path) => std::fs::write(path, bytes)?,
        None => std::io::stdout().lock().write_all(&bytes)?,
    }
    Ok(())
}

/// Exit code for an error: 2 for numerical guards, 1 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Guard { .. } => 2,
        _ => 1,
    }
}

/// One-line JSON diagnostic for stderr.
pub fn error_line(err: &Error) -> String {
    let mut v = json!({"error": err.kind(), "message": err.to_string()});
    match err {
        Error::PastBreakdown { t_end, t_star } => {
            v["t_end"] = json!(t_end);
            v["t_star"] = json!(t_star);
        }
        Error::InvalidDatum { invariant, .. } => v["invariant"] = json!(invariant),
        Error::Guard { t, .. } => v["t"] = json!(t),
        _ => {}
    }
    v.to_string()
}

/// Parses arguments, runs, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return 0;
            }
            eprintln!("{}", json!({"error": "usage", "message": e.to_string().trim()}));
            return 1;
        }
    };
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_line(&e));
            exit_code(&e)
        }
    }
}
