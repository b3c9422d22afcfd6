//! CSV artifacts. Floats are written with `Display`, which round-trips.

use std::io::Write;

use rlbeam::sim_engine::{MonteCarloReport, Scenario};

pub const BEAMPATTERN: &str = "beampattern.csv";
pub const CONVERGENCE: &str = "convergence.csv";
pub const PD_SUMMARY: &str = "pd_summary.csv";
pub const TRACE: &str = "trace.csv";
pub const CONFIG_RESOLVED: &str = "config_resolved.toml";

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(w)
}

/// One row per step: `k` and the run-averaged `D(theta_l)` in dB per bin.
pub fn write_beampattern<W: Write>(w: W, report: &MonteCarloReport) -> csv::Result<()> {
    let mut out = writer(w);
    let n_bins = report.mean_beampattern_db.first().map_or(0, Vec::len);
    let mut header = vec!["k".to_string()];
    header.extend((0..n_bins).map(|l| format!("bin_{l}")));
    out.write_record(&header)?;
    for (k, row) in report.mean_beampattern_db.iter().enumerate() {
        let mut record = vec![(k + 1).to_string()];
        record.extend(row.iter().map(f64::to_string));
        out.write_record(&record)?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_convergence<W: Write>(w: W, report: &MonteCarloReport) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(["k", "mean_xi"])?;
    for (k, xi) in report.mean_xi.iter().enumerate() {
        out.write_record([(k + 1).to_string(), xi.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Per-target detection probability of both modes side by side.
pub fn write_pd_summary<W: Write>(
    w: W,
    scenario: &Scenario,
    rl: &MonteCarloReport,
    omni: &MonteCarloReport,
) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record([
        "target",
        "bin",
        "angle_deg",
        "snr_db",
        "from",
        "to",
        "rl",
        "omni",
        "rl_after_burn_in",
        "omni_after_burn_in",
    ])?;
    for (t, spec) in scenario.targets.iter().enumerate() {
        out.write_record([
            (t + 1).to_string(),
            spec.angle_bin.to_string(),
            scenario.grid.angle(spec.angle_bin).to_degrees().to_string(),
            spec.snr_db.to_string(),
            spec.active_from.to_string(),
            spec.active_to.to_string(),
            rl.targets[t].pd().to_string(),
            omni.targets[t].pd().to_string(),
            rl.targets[t].pd_after_burn_in().to_string(),
            omni.targets[t].pd_after_burn_in().to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// State, action, reward and convergence index of the first run.
pub fn write_trace<W: Write>(w: W, report: &MonteCarloReport) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(["k", "state", "action", "reward", "xi"])?;
    if let Some(run) = report.runs.first() {
        for k in 0..run.n_steps() {
            out.write_record([
                (k + 1).to_string(),
                run.states[k].to_string(),
                run.actions[k].to_string(),
                run.rewards[k].to_string(),
                run.xi[k].to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}
