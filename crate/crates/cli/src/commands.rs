use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context};
use rayon::prelude::*;

use diqkd_core::entropy::{build_entropy_program, certificate_text, entropy_lower_bound};
use diqkd_core::functionals::{make_chsh, make_i234, make_i4422};
use diqkd_core::npa::{efficiency_constrained_relaxation, tsirelson_relaxation, Level, RelaxationOptions};
use diqkd_core::optimize::{maximize_violation, optimize_key_measurement, Family};
use diqkd_core::quantum::{build_q234, build_q4422};
use diqkd_core::rates::{Protocol, RatePipeline};
use diqkd_core::scenario::degrade;
use diqkd_core::sdp::{compile, export_sdpa, solve_relaxation, SolverOptions, Status};
use diqkd_core::textio::fmt_sig;
use diqkd_core::{BellFunctional, NoiseParams, QuantumRealization};

use crate::config::{usage, JobConfig, ProtocolChoice};

fn sig(x: f64) -> String {
    fmt_sig(x, 12)
}

fn csv_row(values: &[f64]) -> String {
    values.iter().map(|&x| sig(x)).collect::<Vec<_>>().join(",")
}

fn write_out(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn read_text(path: &Path, what: &str) -> anyhow::Result<String> {
    std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {what} {}: {e}", path.display())))
}

/// `i4422`, `i234`, `chsh` or a functional file.
pub fn load_functional(spec: &str) -> anyhow::Result<BellFunctional> {
    Ok(match spec {
        "i4422" => make_i4422(),
        "i234" => make_i234(),
        "chsh" => make_chsh(),
        path => BellFunctional::from_text(&read_text(Path::new(path), "functional")?)?,
    })
}

pub fn protocol(cfg: &JobConfig) -> anyhow::Result<Protocol> {
    Ok(match cfg.protocol {
        ProtocolChoice::Q4422 => Protocol::Q4422,
        ProtocolChoice::Q234 => Protocol::Q234,
        ProtocolChoice::Q4422Partial => Protocol::Q4422Partial(cfg.search()),
        ProtocolChoice::Custom => {
            let (Some(r), Some(f)) = (&cfg.realization, &cfg.functional) else {
                bail!(usage("protocol custom needs --realization and --functional files"));
            };
            Protocol::Custom {
                realization: QuantumRealization::from_text(&read_text(r, "realization")?)?,
                functional: load_functional(f)?,
            }
        }
    })
}

/// Functional named by `--functional`, else the protocol's.
fn functional(cfg: &JobConfig) -> anyhow::Result<BellFunctional> {
    match &cfg.functional {
        Some(f) => load_functional(f),
        None => Ok(protocol(cfg)?.functional()),
    }
}

fn pool(cfg: &JobConfig) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs).build()?)
}

/// Runs `f` over `items` on the job pool; results stay in item order.
fn par_map<I: Sync, R: Send>(
    cfg: &JobConfig,
    items: &[I],
    f: impl Fn(&I) -> anyhow::Result<R> + Sync,
) -> anyhow::Result<Vec<R>> {
    pool(cfg)?.install(|| items.par_iter().map(&f).collect())
}

pub fn eval(cfg: &JobConfig) -> anyhow::Result<String> {
    let out = cfg.out()?;
    let proto = protocol(cfg)?;
    let rows = par_map(cfg, &cfg.noise_grid(), |&(eta, v)| {
        let p = degrade(&proto.realization(eta)?, NoiseParams::new(eta, v)?)?;
        Ok(csv_row(&[eta, v, proto.bell_value(&p)?]))
    })?;
    let csv = format!("eta,v,value\n{}\n", rows.join("\n"));
    write_out(out, &csv)?;
    Ok(csv)
}

pub fn local_bound(cfg: &JobConfig) -> anyhow::Result<String> {
    let f = functional(cfg)?;
    let text = format!("{}\n", sig(f.local_bound()?));
    if let Some(out) = &cfg.out {
        write_out(out, &text)?;
    }
    Ok(text)
}

fn level_or(cfg: &JobConfig, default: Level) -> Level {
    cfg.level.clone().unwrap_or(default)
}

pub fn npa_bound(cfg: &JobConfig) -> anyhow::Result<String> {
    let out = cfg.out()?;
    let f = functional(cfg)?;
    let opts = RelaxationOptions::new(level_or(cfg, Level::one_plus_ab()));
    let rows = par_map(cfg, &cfg.eta, |&eta| {
        let r = efficiency_constrained_relaxation(&f, eta, &opts)?;
        let sol = solve_relaxation(&r, &SolverOptions::default())?;
        if sol.status != Status::Optimal {
            bail!("relaxation at eta {eta}: {}", sol.status.name());
        }
        Ok(csv_row(&[eta, sol.upper_bound]))
    })?;
    let csv = format!("eta,bound\n{}\n", rows.join("\n"));
    write_out(out, &csv)?;
    Ok(csv)
}

pub fn entropy_bound(cfg: &JobConfig) -> anyhow::Result<String> {
    let out = cfg.out()?;
    let pipeline = RatePipeline::new(protocol(cfg)?, cfg.entropy(0));
    let grid = cfg.noise_grid();
    if cfg.certificate.is_some() && grid.len() != 1 {
        bail!(usage("--certificate needs a single grid point"));
    }
    let rows = par_map(cfg, &grid, |&(eta, v)| {
        let p = pipeline.behavior(NoiseParams::new(eta, v)?)?;
        let prog = build_entropy_program(&p, &pipeline.entropy)?;
        let bound = entropy_lower_bound(&prog, &pipeline.entropy.solver)?;
        if let Some(path) = &cfg.certificate {
            write_out(path, &certificate_text(&prog, &bound))?;
        }
        Ok(csv_row(&[eta, v, bound.q_upper, bound.bits]))
    })?;
    let csv = format!("eta,v,q,hae\n{}\n", rows.join("\n"));
    write_out(out, &csv)?;
    Ok(csv)
}

pub fn keyrate(cfg: &JobConfig) -> anyhow::Result<String> {
    let out = cfg.out()?;
    let pipeline = RatePipeline::new(protocol(cfg)?, cfg.entropy(0));
    let (grid, fixed) = cfg.sweep_grid()?;
    let curve = pool(cfg)?.install(|| pipeline.curve(cfg.sweep, &grid, fixed))?;
    let csv = curve.to_csv();
    write_out(out, &csv)?;
    Ok(csv)
}

pub fn scan_threshold(cfg: &JobConfig) -> anyhow::Result<String> {
    let pipeline = RatePipeline::new(protocol(cfg)?, cfg.entropy(0));
    let (grid, fixed) = cfg.sweep_grid()?;
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    if !(lo < hi) {
        bail!(usage("scan-threshold needs a range lo:hi:step for the swept parameter"));
    }
    let t = pool(cfg)?.install(|| pipeline.threshold(cfg.sweep, fixed, lo, hi, cfg.tol))?;
    let csv = format!("sweep,threshold\n{},{}\n", cfg.sweep.name(), sig(t));
    if let Some(out) = &cfg.out {
        write_out(out, &csv)?;
    }
    Ok(csv)
}

pub fn optimize(cfg: &JobConfig) -> anyhow::Result<String> {
    let out = cfg.out()?;
    let opts = cfg.search();
    let mut log = String::new();
    let mut rows = Vec::new();
    let run = || -> anyhow::Result<()> {
        match cfg.target.as_str() {
            "violation" => {
                let (family, reference) = match cfg.family.as_str() {
                    "4422" => (Family::F4422, build_q4422::<f64>()),
                    "234" => (Family::F234(cfg.ansatz), build_q234::<f64>()),
                    other => bail!(usage(format!("unknown family `{other}` (4422, 234)"))),
                };
                let f = match &cfg.functional {
                    Some(spec) => load_functional(spec)?,
                    None if cfg.family == "4422" => make_i4422(),
                    None => make_i234(),
                };
                rows.push("eta,value,reference".to_string());
                for &eta in &cfg.eta {
                    let best = maximize_violation(&family, &f, eta, &opts)?;
                    let base = f.eval(&degrade(&reference, NoiseParams::new(eta, 1.0)?)?)?;
                    rows.push(csv_row(&[eta, best.value, base]));
                    let _ = writeln!(log, "eta {}\n{}{}", sig(eta), best.search.log(), best.params.to_text());
                }
            }
            "key" => {
                let proto = protocol(cfg)?;
                rows.push("eta,hab,default_hab".to_string());
                for &eta in &cfg.eta {
                    let q = proto.realization(eta)?;
                    let n = q.bob().len() - 1;
                    let q = q.with_bob(q.bob()[..n].to_vec())?;
                    let r = optimize_key_measurement(&q, 0, &opts)?;
                    rows.push(csv_row(&[eta, r.h_ab, r.default_h_ab]));
                    let _ = writeln!(log, "eta {}\n{}", sig(eta), r.search.log());
                }
            }
            other => bail!(usage(format!("unknown target `{other}` (violation, key)"))),
        }
        Ok(())
    };
    pool(cfg)?.install(run)?;
    let csv = format!("{}\n", rows.join("\n"));
    write_out(out, &csv)?;
    if let Some(path) = &cfg.log {
        write_out(path, &log)?;
    }
    Ok(csv)
}

pub fn export_sdpa_file(cfg: &JobConfig) -> anyhow::Result<String> {
    let out = cfg.out()?;
    let eta = match cfg.eta[..] {
        [eta] => eta,
        _ => bail!(usage("export-sdpa takes a single eta")),
    };
    let text = match cfg.problem.as_str() {
        "tsirelson" => {
            let f = functional(cfg)?;
            let opts = RelaxationOptions::new(level_or(cfg, Level::new(1)));
            let r = if eta == 1.0 {
                tsirelson_relaxation(&f, &opts)?
            } else {
                efficiency_constrained_relaxation(&f, eta, &opts)?
            };
            export_sdpa(&compile(&r)?.sdp, &r.name)
        }
        "entropy" => {
            let v = match cfg.v[..] {
                [v] => v,
                _ => bail!(usage("export-sdpa takes a single v")),
            };
            let pipeline = RatePipeline::new(protocol(cfg)?, cfg.entropy(0));
            let p = pipeline.behavior(NoiseParams::new(eta, v)?)?;
            let prog = build_entropy_program(&p, &pipeline.entropy)?;
            let compiled = diqkd_core::sdp::compile_with_margin(&prog.relaxation, prog.psd_margin)?;
            export_sdpa(&compiled.sdp, &prog.relaxation.name)
        }
        other => bail!(usage(format!("unknown problem `{other}` (tsirelson, entropy)"))),
    };
    write_out(out, &text)?;
    Ok(format!("wrote {}\n", out.display()))
}
