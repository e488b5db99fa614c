//! Run-directory artifacts.
//!
//! | file | contents |
//! |---|---|
//! | `config.toml` | resolved configuration |
//! | `iterations.csv` | `iteration,residual_rms,min_singular_value,pe_ratio,weight_change` |
//! | `weights.csv` | `iteration,kind,term,weight` (kind is `value` or `policy`) |
//! | `trajectory_learning.csv` | learning phase: `time,x1..,[z],w1..,u,x_channel,[z_channel]` |
//! | `trajectory_phase_two.csv` | cascade plants only, same layout |
//! | `trajectory_post.csv` | final policy, exploration off |
//! | `gain_report.txt` | small-gain ladder table and level certificate |
//! | `value_surface.csv` | `x1,[x2],v_initial,v_final` on a 51-point-per-axis grid |
//! | `speed_profile.csv` | `time,speed` of the post-learning run (two or more states) |
//! | `roa_boundary.csv` | `set,c1,..` points on the boundary of the certified region |
//! | `policy.toml` | final policy |
//! | `run_log.txt` | diagnostics, one line per event |
//! | `error.txt` | failure category and message |

use std::path::Path;

use serde::Serialize;

use super::{FinalPolicy, LearningRun};
use crate::basis::Approximant;
use crate::dynsys::SimulationRecord;
use crate::error::{Error, Result};
use crate::sampling::BoxRegion;

pub const CONFIG_FILE: &str = "config.toml";
pub const LOG_FILE: &str = "run_log.txt";
pub const ERROR_FILE: &str = "error.txt";

/// Points per axis of the value-surface grid.
pub const SURFACE_POINTS: usize = 51;

fn csv_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn f(v: f64) -> String {
    format!("{v}")
}

pub fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut text = lines.join("\n");
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Grid over the first two axes of `region` (the rest held at zero).
pub fn surface_grid(region: &BoxRegion) -> Vec<Vec<f64>> {
    let d = region.dim();
    let k = d.min(2);
    let plane = BoxRegion {
        lo: region.lo[..k].to_vec(),
        hi: region.hi[..k].to_vec(),
    };
    plane
        .grid(SURFACE_POINTS)
        .into_iter()
        .map(|mut p| {
            p.resize(d, 0.0);
            p
        })
        .collect()
}

pub fn write_trajectory(path: &Path, rec: &SimulationRecord) -> Result<()> {
    let tr = &rec.trajectory;
    let n = tr.x.first().map_or(0, Vec::len);
    let p = rec.w.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    let mut header = vec!["time".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    if tr.z.is_some() {
        header.push("z".into());
    }
    header.extend((1..=p).map(|i| format!("w{i}")));
    header.push("u".into());
    header.push("x_channel".into());
    if tr.z_channel.is_some() {
        header.push("z_channel".into());
    }
    w.write_record(&header).map_err(csv_err)?;
    for k in 0..tr.len() {
        let mut row = vec![f(tr.time[k])];
        row.extend(tr.x[k].iter().map(|v| f(*v)));
        if let Some(z) = &tr.z {
            row.push(f(z[k]));
        }
        if let Some(wk) = rec.w.get(k) {
            row.extend(wk.iter().map(|v| f(*v)));
        }
        row.push(f(tr.input[k]));
        row.push(f(tr.x_channel[k]));
        if let Some(c) = &tr.z_channel {
            row.push(f(c[k]));
        }
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct ApproxOut {
    terms: Vec<Vec<u32>>,
    weights: Vec<f64>,
}

impl From<&Approximant> for ApproxOut {
    fn from(a: &Approximant) -> Self {
        ApproxOut {
            terms: a.basis().terms().iter().map(|t| t.0.clone()).collect(),
            weights: a.weights().to_vec(),
        }
    }
}

#[derive(Serialize)]
struct PolicyOut {
    kind: &'static str,
    control_weight: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    rho: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    /// `û` (or the base of `ξ` on cascade plants).
    policy: ApproxOut,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<ApproxOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f1: Option<ApproxOut>,
    #[serde(skip_serializing_if = "Option::is_none")]
    g1: Option<ApproxOut>,
}

fn policy_toml(run: &LearningRun) -> String {
    let r = run.config_control_weight();
    let eps = run.certification.as_ref().map(|c| c.epsilon);
    let out = match &run.final_policy {
        FinalPolicy::Learned(a) => PolicyOut {
            kind: "learned",
            control_weight: r,
            rho: None,
            epsilon: None,
            policy: a.into(),
            value: Some(run.final_value().into()),
            f1: None,
            g1: None,
        },
        FinalPolicy::Robust(p) => PolicyOut {
            kind: "robust",
            control_weight: p.control_weight(),
            rho: Some(p.rho().label().to_string()),
            epsilon: eps,
            policy: p.base().into(),
            value: Some(run.final_value().into()),
            f1: None,
            g1: None,
        },
        FinalPolicy::Backstepped(c) => PolicyOut {
            kind: "backstepped",
            control_weight: c.state().xi().control_weight(),
            rho: Some(c.rho().label().to_string()),
            epsilon: eps,
            policy: c.state().xi().base().into(),
            value: Some(c.state().value().into()),
            f1: Some(c.f1().into()),
            g1: Some(c.g1().into()),
        },
    };
    toml::to_string(&out).expect("policy serializes")
}

impl LearningRun {
    fn config_control_weight(&self) -> f64 {
        self.config.benchmark().map(|b| b.cost.control_weight).unwrap_or(1.0)
    }
}

fn write_iterations(dir: &Path, run: &LearningRun) -> Result<()> {
    let mut w = csv::Writer::from_path(dir.join("iterations.csv")).map_err(csv_err)?;
    w.write_record(["iteration", "residual_rms", "min_singular_value", "pe_ratio", "weight_change"])
        .map_err(csv_err)?;
    for it in &run.iterations {
        w.write_record([
            it.iteration.to_string(),
            f(it.residual_rms),
            f(it.min_singular_value),
            f(it.pe_ratio),
            f(it.weight_change),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("weights.csv")).map_err(csv_err)?;
    w.write_record(["iteration", "kind", "term", "weight"]).map_err(csv_err)?;
    for it in &run.iterations {
        for (kind, a) in [("value", &it.value), ("policy", &it.next_policy)] {
            for (t, wt) in a.basis().terms().iter().zip(a.weights()) {
                w.write_record([it.iteration.to_string(), kind.to_string(), t.to_string(), f(*wt)])
                    .map_err(csv_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn write_surface(dir: &Path, run: &LearningRun) -> Result<()> {
    let grid = surface_grid(&run.region);
    let k = run.region.dim().min(2);
    let v0 = &run.iterations[0].value;
    let vf = run.final_value();
    let mut w = csv::Writer::from_path(dir.join("value_surface.csv")).map_err(csv_err)?;
    let mut header: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
    header.push("v_initial".into());
    header.push("v_final".into());
    w.write_record(&header).map_err(csv_err)?;
    for x in &grid {
        let mut row: Vec<String> = x[..k].iter().map(|v| f(*v)).collect();
        row.push(f(v0.eval_unchecked(x)));
        row.push(f(vf.eval_unchecked(x)));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn write_roa(dir: &Path, run: &LearningRun) -> Result<()> {
    let Some(cert) = &run.certification else {
        return Ok(());
    };
    let dim = cert.region.dim();
    let x_pts = cert.roa.x_boundary(dim, 128, 2.0 * cert.region.max_norm());
    let p = run.learning.w.first().map_or(0, Vec::len);
    let w_pts = if p > 0 {
        cert.roa.w_boundary(p, 128, 1e3)
    } else {
        Vec::new()
    };
    let width = dim.max(p);
    let mut w = csv::Writer::from_path(dir.join("roa_boundary.csv")).map_err(csv_err)?;
    let mut header = vec!["set".to_string()];
    header.extend((1..=width).map(|i| format!("c{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for (set, pts) in [("x", &x_pts), ("w", &w_pts)] {
        for pt in pts.iter() {
            let mut row = vec![set.to_string()];
            row.extend(pt.iter().map(|v| f(*v)));
            row.resize(width + 1, String::new());
            w.write_record(&row).map_err(csv_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn gain_report(run: &LearningRun) -> String {
    let Some(c) = &run.certification else {
        return "no uncertainty declared; nothing to certify\n".into();
    };
    let mut s = format!("# rho = {}\n# epsilon = {}\n", c.rho.label(), c.epsilon);
    s.push_str(&format!("# alpha_lo = {} alpha_hi = {}\n", c.alpha.0, c.alpha.1));
    s.push_str(&format!(
        "# d = {} d_cap = {} d_violation = {} samples = {} worst_ratio = {}\n# sigma(d) = {}\n",
        c.level.d,
        c.level.d_cap,
        c.level.d_violation,
        c.level.samples_checked,
        c.level.worst_ratio,
        c.roa.level()
    ));
    s.push_str(&c.report.to_table());
    s
}

/// Write every artifact of a finished run.
pub fn write_run(dir: &Path, run: &LearningRun) -> Result<()> {
    write_iterations(dir, run)?;
    write_trajectory(&dir.join("trajectory_learning.csv"), &run.learning)?;
    if let Some(rec) = &run.phase_two_record {
        write_trajectory(&dir.join("trajectory_phase_two.csv"), rec)?;
    }
    write_trajectory(&dir.join("trajectory_post.csv"), &run.post)?;
    std::fs::write(dir.join("gain_report.txt"), gain_report(run))?;
    write_surface(dir, run)?;
    if run.speed_profile.is_some() {
        let mut w = csv::Writer::from_path(dir.join("speed_profile.csv")).map_err(csv_err)?;
        w.write_record(["time", "speed"]).map_err(csv_err)?;
        for (t, x) in run.post.trajectory.time.iter().zip(&run.post.trajectory.x) {
            w.write_record([f(*t), f(x[1].abs())]).map_err(csv_err)?;
        }
        w.flush()?;
    }
    write_roa(dir, run)?;
    std::fs::write(dir.join("policy.toml"), policy_toml(run))?;
    write_lines(&dir.join(LOG_FILE), &run.log)?;
    Ok(())
}
