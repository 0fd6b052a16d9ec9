use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use isac_aoi::bound::{optimize_alpha, optimize_theta_model, pavp_bound, BoundResult, Divergence};
use isac_aoi::sim::{write_trace, SimConfig, Simulator};
use isac_aoi::{Error as CoreError, GainMode, MgfConstraint, SystemModel, SystemParams};

use crate::sweep::{run_sweep, SweepSpec, DEFAULT_PACKETS, DEFAULT_SEED};
use crate::table::{csv, num, render};
use crate::{io_err, Cli, CliError, Loaded};

/// Bound for the configured parameters. Divergent configurations come back
/// as sentinels so they can still be reported; other errors propagate.
pub fn bound_or_sentinel(p: &SystemParams) -> Result<BoundResult, CliError> {
    let model = match SystemModel::from_params(p) {
        Ok(m) => m,
        Err(CoreError::AllPowerToComm) | Err(CoreError::OutOfRange { field: "P_s(d)", .. }) => {
            return Ok(BoundResult::sentinel(p.alpha, p.theta.unwrap_or(0.0), Divergence::Numerator));
        }
        Err(e) => return Err(e.into()),
    };
    let result = match p.theta {
        None => optimize_theta_model(&model, p.alpha),
        Some(theta) => pavp_bound(theta, p),
    };
    match result {
        Ok(r) => Ok(r),
        Err(CoreError::MgfDiverges { constraint, theta, .. }) => {
            let reason = match constraint {
                MgfConstraint::Arrival => Divergence::Numerator,
                _ => Divergence::Denominator,
            };
            Ok(BoundResult::sentinel(p.alpha, theta, reason))
        }
        Err(e) => Err(e.into()),
    }
}

fn emit<W: Write>(cli: &Cli, stdout: &mut W, human: &str, csv_text: &str) -> Result<(), CliError> {
    let text = if cli.csv { csv_text } else { human };
    stdout
        .write_all(text.as_bytes())
        .map_err(io_err(Path::new("<stdout>")))?;
    if let Some(path) = &cli.out {
        fs::write(path, csv_text).map_err(io_err(path))?;
    }
    Ok(())
}

fn divergence(r: &BoundResult) -> &'static str {
    r.divergence.map_or("", Divergence::as_str)
}

fn unstable(r: &BoundResult) -> CliError {
    CliError::Unstable(format!(
        "no finite bound at alpha = {}: {}",
        r.alpha,
        r.divergence.map_or("unstable", Divergence::as_str)
    ))
}

const BOUND_HEADER: [&str; 13] = [
    "alpha",
    "theta_star",
    "bound",
    "reported",
    "ln_bound",
    "stable",
    "divergence",
    "arrival_mgf_pos",
    "arrival_mgf_neg",
    "service_mgf",
    "stability_product",
    "sdp",
    "mean_service",
];

/// Report the bound at the configured α with its stability diagnostics.
pub fn cmd_bound<W: Write>(cli: &Cli, loaded: &Loaded, stdout: &mut W) -> Result<(), CliError> {
    let start = Instant::now();
    let p = &loaded.params;
    let r = bound_or_sentinel(p)?;
    let model = SystemModel::from_params(p).ok();
    let d = r.diagnostics;
    let mut row = vec![
        num(r.alpha),
        num(r.theta_star),
        num(r.pavp_bound),
        num(r.reported()),
        num(r.ln_bound()),
        r.stable.to_string(),
        divergence(&r).to_string(),
        num(d.arrival_mgf_pos),
        num(d.arrival_mgf_neg),
        num(d.service_mgf),
        num(d.stability_product),
        model.map(|m| num(m.arrival.detect_prob)).unwrap_or_default(),
        model.and_then(|m| m.service.mean().ok()).map(num).unwrap_or_default(),
    ];
    let mut header = BOUND_HEADER.to_vec();
    if cli.timing {
        header.push("runtime_s");
        row.push(format!("{:.3}", start.elapsed().as_secs_f64()));
    }
    let human: Vec<Vec<String>> = header.iter().zip(&row).map(|(k, v)| vec![k.to_string(), v.clone()]).collect();
    emit(cli, stdout, &render(&["quantity", "value"], &human), &csv(&header, &[row]))?;
    if r.stable {
        Ok(())
    } else {
        Err(unstable(&r))
    }
}

/// Minimize over α; CSV carries the whole Υ(α) grid and the refined optimum.
pub fn cmd_optimize<W: Write>(cli: &Cli, loaded: &Loaded, stdout: &mut W) -> Result<(), CliError> {
    let start = Instant::now();
    let opt = optimize_alpha(&loaded.params)?;
    let line = |kind: &str, r: &BoundResult| {
        vec![
            kind.to_string(),
            num(r.alpha),
            num(r.theta_star),
            num(r.pavp_bound),
            num(r.ln_bound()),
            r.stable.to_string(),
            divergence(r).to_string(),
        ]
    };
    let mut rows: Vec<Vec<String>> = opt.grid.iter().map(|r| line("grid", r)).collect();
    rows.push(line("optimum", &opt.best));
    let mut header = vec!["kind", "alpha", "theta_star", "bound", "ln_bound", "stable", "divergence"];
    if cli.timing {
        header.push("runtime_s");
        let t = format!("{:.3}", start.elapsed().as_secs_f64());
        rows.iter_mut().for_each(|r| r.push(t.clone()));
    }
    let b = &opt.best;
    let feasible = opt.grid.iter().filter(|r| r.is_finite()).count();
    let human = render(
        &["quantity", "value"],
        &[
            vec!["alpha_star".into(), num(b.alpha)],
            vec!["theta_star".into(), num(b.theta_star)],
            vec!["bound".into(), num(b.pavp_bound)],
            vec!["reported".into(), num(b.reported())],
            vec!["grid_points".into(), opt.grid.len().to_string()],
            vec!["finite_grid_points".into(), feasible.to_string()],
        ],
    );
    emit(cli, stdout, &human, &csv(&header, &rows))
}

pub fn cmd_sweep<W: Write>(cli: &Cli, loaded: &Loaded, stdout: &mut W) -> Result<(), CliError> {
    let spec = SweepSpec::from_loaded(loaded, cli.packets, cli.replications, cli.seed)?;
    let rows = run_sweep(&spec, loaded)?;
    let header = spec.header(cli.timing);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let cells: Vec<Vec<String>> = rows.iter().map(|r| r.cells(spec.quantity, cli.timing)).collect();
    emit(cli, stdout, &render(&header, &cells), &csv(&header, &cells))
}

pub fn cmd_simulate<W: Write>(
    cli: &Cli,
    loaded: &Loaded,
    gain_mode: GainMode,
    trace: Option<&Path>,
    stdout: &mut W,
) -> Result<(), CliError> {
    let start = Instant::now();
    let p = &loaded.params;
    let sim = Simulator::from_params(p)?;
    let cfg = SimConfig {
        n_packets: cli.packets.unwrap_or(DEFAULT_PACKETS),
        seed: cli.seed.unwrap_or(DEFAULT_SEED),
        gain_mode,
        keep_trace: false,
    };
    let replications = cli.replications.unwrap_or(1);
    if let Some(path) = trace {
        let run = sim.run(&SimConfig { keep_trace: true, ..cfg })?;
        let file = fs::File::create(path).map_err(io_err(path))?;
        write_trace(run.trace.as_deref().unwrap_or_default(), std::io::BufWriter::new(file)).map_err(io_err(path))?;
    }
    let s = sim.run_replications(&cfg, replications)?;
    let bound = bound_or_sentinel(p)?;
    let mut header = vec![
        "seed",
        "packets",
        "replications",
        "gain_mode",
        "zeta",
        "pavp_hat",
        "ci_low",
        "ci_high",
        "std_err",
        "exceed",
        "samples",
        "sdp_hat",
        "mean_attempts",
        "mean_deferrals",
        "mean_paoi",
        "bound",
    ];
    let mode = match gain_mode {
        GainMode::PerPacket => "per-packet",
        GainMode::PerAttempt => "per-attempt",
    };
    let mut row = vec![
        cfg.seed.to_string(),
        cfg.n_packets.to_string(),
        replications.to_string(),
        mode.to_string(),
        num(s.zeta),
        num(s.pavp_hat),
        num(s.ci_low),
        num(s.ci_high),
        num(s.std_err),
        s.exceed.to_string(),
        s.n_packets.to_string(),
        num(s.sdp_hat),
        num(s.mean_attempts),
        num(s.mean_deferrals),
        num(s.mean_paoi()),
        num(bound.pavp_bound),
    ];
    if cli.timing {
        header.push("runtime_s");
        row.push(format!("{:.3}", start.elapsed().as_secs_f64()));
    }
    let human: Vec<Vec<String>> = header.iter().zip(&row).map(|(k, v)| vec![k.to_string(), v.clone()]).collect();
    emit(cli, stdout, &render(&["quantity", "value"], &human), &csv(&header, &[row]))
}
