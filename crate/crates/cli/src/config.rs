//! Job configuration: flat `key = value` files merged with command-line
//! flags, flags winning.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use diqkd_core::entropy::EntropyOptions;
use diqkd_core::npa::{Extra, Level};
use diqkd_core::optimize::{Ansatz, SearchOptions};
use diqkd_core::rates::Sweep;

/// Invalid flags, config keys or values; reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Keys accepted in config files and as `--key` flags.
pub const KEYS: &[&str] = &[
    "protocol",
    "realization",
    "functional",
    "eta",
    "v",
    "grid",
    "sweep",
    "level",
    "k",
    "extras",
    "seed",
    "jobs",
    "out",
    "tol",
    "starts",
    "iterations",
    "problem",
    "target",
    "family",
    "ansatz",
    "log",
    "certificate",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> anyhow::Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("config line {}: expected `key = value`", i + 1)))?;
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            return Err(usage(format!("config line {}: unknown key `{key}`", i + 1)));
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

pub fn read_config(path: &Path) -> anyhow::Result<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    parse_config(&text)
}

/// A single value `x` or an inclusive range `lo:hi:step`, all within [0, 1].
pub fn parse_grid(s: &str) -> anyhow::Result<Vec<f64>> {
    let nums = s
        .split(':')
        .map(|t| t.trim().parse::<f64>().map_err(|_| usage(format!("bad number `{t}` in `{s}`"))))
        .collect::<anyhow::Result<Vec<f64>>>()?;
    let grid = match nums[..] {
        [x] => vec![x],
        [lo, hi, step] => {
            if !(step > 0.0) || !(hi >= lo) {
                return Err(usage(format!("range `{s}` needs lo <= hi and step > 0")));
            }
            let n = ((hi - lo) / step + 1e-9).floor() as usize;
            (0..=n).map(|i| lo + step * i as f64).collect()
        }
        _ => return Err(usage(format!("`{s}` is neither a value nor lo:hi:step"))),
    };
    if grid.iter().any(|x| !(0.0..=1.0).contains(x)) {
        return Err(usage(format!("`{s}` leaves [0, 1]")));
    }
    Ok(grid)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ProtocolChoice {
    Q4422,
    Q234,
    Q4422Partial,
    Custom,
}

impl FromStr for ProtocolChoice {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> anyhow::Result<Self> {
        match s {
            "q4422" => Ok(ProtocolChoice::Q4422),
            "q234" => Ok(ProtocolChoice::Q234),
            "q4422-partial" => Ok(ProtocolChoice::Q4422Partial),
            "custom" => Ok(ProtocolChoice::Custom),
            _ => Err(usage(format!("unknown protocol `{s}` (q4422, q234, q4422-partial, custom)"))),
        }
    }
}

/// Fully resolved job settings.
#[derive(Clone, Debug)]
pub struct JobConfig {
    pub protocol: ProtocolChoice,
    pub realization: Option<PathBuf>,
    pub functional: Option<String>,
    pub eta: Vec<f64>,
    pub v: Vec<f64>,
    pub sweep: Sweep,
    pub level: Option<Level>,
    pub k: usize,
    pub seed: u64,
    pub jobs: usize,
    pub out: Option<PathBuf>,
    pub tol: f64,
    pub starts: usize,
    pub iterations: u64,
    pub problem: String,
    pub target: String,
    pub family: String,
    pub ansatz: Ansatz,
    pub log: Option<PathBuf>,
    pub certificate: Option<PathBuf>,
}

fn parse_value<T: FromStr>(map: &BTreeMap<String, String>, key: &str) -> anyhow::Result<Option<T>>
where
    T::Err: fmt::Display,
{
    map.get(key)
        .map(|s| s.parse::<T>().map_err(|e| usage(format!("bad value `{s}` for `{key}`: {e}"))))
        .transpose()
}

impl JobConfig {
    pub fn from_map(map: &BTreeMap<String, String>) -> anyhow::Result<Self> {
        let sweep: Sweep = parse_value(map, "sweep")?.unwrap_or(Sweep::Eta);
        let mut eta = parse_grid(map.get("eta").map_or("1", String::as_str))?;
        let mut v = parse_grid(map.get("v").map_or("1", String::as_str))?;
        if let Some(g) = map.get("grid") {
            let grid = parse_grid(g)?;
            match sweep {
                Sweep::Eta => eta = grid,
                Sweep::Visibility => v = grid,
            }
        }
        let mut level: Option<Level> = parse_value(map, "level")?;
        if let Some(extras) = map.get("extras") {
            let base = level.get_or_insert_with(Level::one_plus_ab);
            for e in extras.split(',').map(str::trim).filter(|e| !e.is_empty()) {
                base.extras.insert(e.parse::<Extra>().map_err(|e| usage(e.to_string()))?);
            }
        }
        let k: usize = parse_value(map, "k")?.unwrap_or(1);
        if k == 0 {
            return Err(usage("k must be at least 1"));
        }
        let jobs: usize = parse_value(map, "jobs")?.unwrap_or(1);
        if jobs == 0 {
            return Err(usage("jobs must be at least 1"));
        }
        let search = SearchOptions::default();
        let cfg = JobConfig {
            protocol: parse_value(map, "protocol")?.unwrap_or(ProtocolChoice::Q234),
            realization: map.get("realization").map(PathBuf::from),
            functional: map.get("functional").cloned(),
            eta,
            v,
            sweep,
            level,
            k,
            seed: parse_value(map, "seed")?.unwrap_or(search.seed),
            jobs,
            out: map.get("out").map(PathBuf::from),
            tol: parse_value(map, "tol")?.unwrap_or(1e-3),
            starts: parse_value(map, "starts")?.unwrap_or(search.starts),
            iterations: parse_value(map, "iterations")?.unwrap_or(search.max_iterations),
            problem: map.get("problem").cloned().unwrap_or_else(|| "tsirelson".into()),
            target: map.get("target").cloned().unwrap_or_else(|| "violation".into()),
            family: map.get("family").cloned().unwrap_or_else(|| "4422".into()),
            ansatz: parse_value(map, "ansatz")?.unwrap_or(Ansatz::CommutingPair),
            log: map.get("log").map(PathBuf::from),
            certificate: map.get("certificate").map(PathBuf::from),
        };
        if !(cfg.tol > 0.0) {
            return Err(usage("tol must be positive"));
        }
        if cfg.starts == 0 {
            return Err(usage("starts must be at least 1"));
        }
        Ok(cfg)
    }

    pub fn search(&self) -> SearchOptions {
        SearchOptions {
            starts: self.starts,
            seed: self.seed,
            max_iterations: self.iterations,
            ..SearchOptions::default()
        }
    }

    pub fn entropy(&self, key_input: usize) -> EntropyOptions {
        let mut opts = EntropyOptions::desk(key_input);
        opts.k = self.k;
        if let Some(level) = &self.level {
            opts.level = level.clone();
        }
        opts
    }

    pub fn out(&self) -> anyhow::Result<&Path> {
        self.out.as_deref().ok_or_else(|| usage("missing output path (--out)"))
    }

    /// `(eta, v)` pairs, eta-major.
    pub fn noise_grid(&self) -> Vec<(f64, f64)> {
        self.eta.iter().flat_map(|&e| self.v.iter().map(move |&v| (e, v))).collect()
    }

    /// The swept values and the fixed other parameter.
    pub fn sweep_grid(&self) -> anyhow::Result<(Vec<f64>, f64)> {
        let (swept, fixed) = match self.sweep {
            Sweep::Eta => (&self.eta, &self.v),
            Sweep::Visibility => (&self.v, &self.eta),
        };
        if fixed.len() != 1 {
            return Err(usage(format!(
                "only the swept parameter ({}) may be a range",
                self.sweep.name()
            )));
        }
        Ok((swept.clone(), fixed[0]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_forms() {
        assert_eq!(parse_grid("0.5").unwrap(), vec![0.5]);
        let g = parse_grid("0.6:1.0:0.1").unwrap();
        assert_eq!(g.len(), 5);
        assert!((g[4] - 1.0).abs() < 1e-12);
        assert!(parse_grid("0.9:1.1:0.1").is_err());
        assert!(parse_grid("1:0:0.1").is_err());
        assert!(parse_grid("a").is_err());
    }

    #[test]
    fn config_lines() {
        let m = parse_config("# job\nprotocol = q4422\neta=0.8 # fixed\n\nlevel = 1+AB\n").unwrap();
        assert_eq!(m["protocol"], "q4422");
        assert_eq!(m["eta"], "0.8");
        assert!(parse_config("bogus = 1").is_err());
        assert!(parse_config("no equals sign").is_err());
    }

    #[test]
    fn extras_extend_the_level() {
        let mut m = BTreeMap::new();
        m.insert("extras".to_string(), "AV,BV".to_string());
        let cfg = JobConfig::from_map(&m).unwrap();
        assert_eq!(cfg.level.unwrap().to_string(), "1+AB+AV+BV");
    }
}
