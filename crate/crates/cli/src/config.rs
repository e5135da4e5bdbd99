//! `key = value` run configuration shared by the config file and the flags.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Arg, ArgMatches, Command};

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl From<smslab::Error> for CliError {
    fn from(e: smslab::Error) -> Self {
        match e {
            smslab::Error::InvalidConfig(m) => CliError::Config(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub struct Key {
    pub name: &'static str,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

const fn key(name: &'static str, default: Option<&'static str>, help: &'static str) -> Key {
    Key { name, default, help }
}

const OUT: Key = key("out", None, "output directory");
const SEED: Key = key("seed", Some("0"), "random seed");
const SOURCE_SEED: Key = key("seed", None, "seed to record; defaults to the first input's seed");

pub const SUBCOMMANDS: &[(&str, &str)] = &[
    ("phantom", "generate a dynamic phantom"),
    ("mask", "generate a sampling mask"),
    ("synth", "synthesize multi-coil SMS k-space from magnitudes"),
    ("recon", "reconstruct multi-coil images from SMS k-space"),
    ("eval", "score reconstructions against references"),
    ("gridsearch", "select proximal-gradient weights on validation data"),
];

pub fn keys(sub: &str) -> Vec<Key> {
    let mut k = match sub {
        "phantom" => vec![
            key("mode", Some("cine"), "cine | fpp"),
            key("slices", Some("2"), "number of slices"),
            key("rows", Some("32"), "rows per frame"),
            key("cols", Some("32"), "columns per frame"),
            key("frames", Some("12"), "number of frames"),
            key("motion_amplitude", Some("0.25"), "cine blood-pool radius change"),
            key("period", Some("8"), "cine frames per cycle"),
            key("myo_delay", None, "fpp myocardial onset after the left ventricle, frames"),
        ],
        "mask" => vec![
            key("pattern", Some("helical"), "helical | full"),
            key("r_inplane", Some("2"), "in-plane acceleration"),
            key("sms", Some("2"), "simultaneously excited slices"),
            key("rows", Some("32"), "rows"),
            key("cols", Some("32"), "columns"),
            key("frames", Some("12"), "frames"),
            key("interleave_step", Some("1"), "row offset per frame"),
            key("acs_rows", Some("0"), "fully sampled rows around DC"),
        ],
        "synth" => vec![
            key("input", None, "magnitude volume"),
            key("pattern", Some("helical"), "helical | full"),
            key("r_inplane", Some("2"), "in-plane acceleration"),
            key("interleave_step", Some("1"), "row offset per frame"),
            key("acs_rows", Some("0"), "fully sampled rows around DC"),
            key("coils", Some("4"), "number of coils"),
            key("k_clusters", Some("8"), "intensity clusters"),
            key("sigma_phase", Some("1.0471975511965976"), "cluster phase standard deviation"),
            key("csm", Some("circular"), "circular | gaussian"),
            key("ring_radius", None, "circular coil ring radius in pixels"),
            key("d_min", Some("2"), "circular coil distance floor in pixels"),
            key("grating_amplitude", Some("0.7853981633974483,1.5707963267948966"), "grating amplitude range"),
            key("grating_frequency", Some("0.5,3"), "grating frequency range, cycles per FOV"),
        ],
        "recon" => vec![
            key("kspace", None, "undersampled multi-coil k-space volume"),
            key("mask", None, "sampling mask volume"),
            key("reference", None, "magnitude reference for PNG windows and error maps"),
            key("method", Some("cascade"), "zero_filled | cascade | proxgrad"),
            key("n_iter", Some("5"), "cascade iterations"),
            key("lambda", Some("1"), "fidelity weight"),
            key("step", Some("1"), "denoiser step"),
            key("denoiser", Some("tv_temporal"), "identity | tv_temporal | tv_spatiotemporal"),
            key("w_s", Some("0.05"), "spatial TV weight"),
            key("w_t", Some("0.05"), "temporal TV weight"),
            key("mode", Some("shared_per_slice"), "shared_per_slice | joint_3d | independent_no_dc"),
            key("n_outer", Some("50"), "proximal-gradient iterations"),
            key("png", Some("true"), "write PNG dumps"),
            key("error_scale", Some("5"), "error-map gain"),
        ],
        "eval" => vec![
            key("reference", None, "comma-separated magnitude references"),
            key("recon", None, "comma-separated reconstructions"),
            key("baseline", None, "comma-separated baseline reconstructions"),
            key("ids", None, "comma-separated sequence ids"),
            key("label", Some("method"), "label of the reconstructions"),
            key("baseline_label", Some("baseline"), "label of the baseline"),
        ],
        "gridsearch" => vec![
            key("reference", None, "comma-separated magnitude references"),
            key("r_inplane", Some("2"), "in-plane acceleration"),
            key("interleave_step", Some("1"), "row offset per frame"),
            key("acs_rows", Some("0"), "fully sampled rows around DC"),
            key("lambdas", Some("0.5,1,2"), "candidate fidelity weights"),
            key("w_ts", Some("0.01,0.05,0.1"), "candidate temporal TV weights"),
            key("n_outer", Some("20"), "proximal-gradient iterations"),
            key("w_mse", Some("1"), "loss MSE weight"),
            key("w_ssim", Some("0"), "loss SSIM weight"),
            key("w_tv", Some("0"), "loss temporal TV weight"),
        ],
        _ => Vec::new(),
    };
    k.push(if matches!(sub, "phantom" | "mask" | "synth") { SEED } else { SOURCE_SEED });
    k.push(OUT);
    k
}

pub fn command() -> Command {
    let mut cmd = Command::new("smslab")
        .about("Simultaneous multi-slice dynamic MRI simulation and reconstruction")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for (name, about) in SUBCOMMANDS {
        let mut sub = Command::new(*name)
            .about(*about)
            .arg(Arg::new("config").long("config").value_name("FILE").help("key = value configuration file"));
        for k in keys(name) {
            let mut help = k.help.to_string();
            if let Some(d) = k.default {
                help += &format!(" [default: {d}]");
            }
            sub = sub.arg(
                Arg::new(k.name)
                    .long(k.name.replace('_', "-"))
                    .value_name("VALUE")
                    .allow_hyphen_values(true)
                    .help(help),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

/// Fully resolved configuration of one subcommand.
#[derive(Clone, Debug)]
pub struct Resolved {
    pub subcommand: String,
    values: BTreeMap<String, String>,
}

fn parse_file(path: &Path) -> CliResult<BTreeMap<String, String>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Runtime(format!("cannot read config file {}: {e}", path.display())))?;
    smslab::io::parse_metadata(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

impl Resolved {
    /// Defaults, then the config file, then flags.
    pub fn from_matches(subcommand: &str, m: &ArgMatches) -> CliResult<Resolved> {
        let keys = keys(subcommand);
        let mut values: BTreeMap<String, String> =
            keys.iter().filter_map(|k| k.default.map(|d| (k.name.to_string(), d.to_string()))).collect();
        if let Some(path) = m.get_one::<String>("config") {
            for (k, v) in parse_file(Path::new(path))? {
                if k == "subcommand" {
                    if v != subcommand {
                        return Err(CliError::Config(format!("config file is for subcommand {v}, not {subcommand}")));
                    }
                    continue;
                }
                if !keys.iter().any(|key| key.name == k) {
                    return Err(CliError::Config(format!("unknown key {k} for subcommand {subcommand}")));
                }
                values.insert(k, v);
            }
        }
        for k in &keys {
            if let Some(v) = m.get_one::<String>(k.name) {
                values.insert(k.name.to_string(), v.clone());
            }
        }
        Ok(Resolved { subcommand: subcommand.to_string(), values })
    }

    pub fn entries(&self) -> BTreeMap<String, String> {
        let mut e = self.values.clone();
        e.insert("subcommand".into(), self.subcommand.clone());
        e
    }

    /// Fills `key` when neither the file nor a flag set it.
    pub fn with_default(&self, key: &str, value: Option<String>) -> Resolved {
        let mut r = self.clone();
        if let Some(v) = value {
            r.values.entry(key.to_string()).or_insert(v);
        }
        r
    }

    pub fn is_set(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn string(&self, key: &str) -> CliResult<String> {
        self.values.get(key).cloned().ok_or_else(|| CliError::Config(format!("missing required key {key}")))
    }

    fn parsed<T: std::str::FromStr>(&self, key: &str, what: &str) -> CliResult<T> {
        let v = self.string(key)?;
        v.parse().map_err(|_| CliError::Config(format!("invalid value for {key}: expected {what}, got {v:?}")))
    }

    pub fn usize(&self, key: &str) -> CliResult<usize> {
        self.parsed(key, "a non-negative integer")
    }

    pub fn u64(&self, key: &str) -> CliResult<u64> {
        self.parsed(key, "a non-negative integer")
    }

    pub fn f64(&self, key: &str) -> CliResult<f64> {
        let v: f64 = self.parsed(key, "a number")?;
        if !v.is_finite() {
            return Err(CliError::Config(format!("invalid value for {key}: must be finite")));
        }
        Ok(v)
    }

    pub fn opt_f64(&self, key: &str) -> CliResult<Option<f64>> {
        if self.is_set(key) {
            self.f64(key).map(Some)
        } else {
            Ok(None)
        }
    }

    pub fn bool(&self, key: &str) -> CliResult<bool> {
        self.parsed(key, "true or false")
    }

    pub fn choice(&self, key: &str, allowed: &[&str]) -> CliResult<String> {
        let v = self.string(key)?;
        if !allowed.contains(&v.as_str()) {
            return Err(CliError::Config(format!(
                "invalid value for {key}: expected one of {}, got {v:?}",
                allowed.join(" | ")
            )));
        }
        Ok(v)
    }

    pub fn f64_list(&self, key: &str) -> CliResult<Vec<f64>> {
        let v = self.string(key)?;
        v.split(',')
            .map(|s| {
                s.trim().parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                    CliError::Config(format!("invalid value for {key}: expected comma-separated numbers, got {v:?}"))
                })
            })
            .collect()
    }

    pub fn range(&self, key: &str) -> CliResult<(f64, f64)> {
        match self.f64_list(key)?[..] {
            [lo, hi] => Ok((lo, hi)),
            _ => Err(CliError::Config(format!("invalid value for {key}: expected lo,hi"))),
        }
    }

    pub fn list(&self, key: &str) -> CliResult<Vec<String>> {
        Ok(self.string(key)?.split(',').map(|s| s.trim().to_string()).collect())
    }

    /// An input file that must exist.
    pub fn input(&self, key: &str) -> CliResult<PathBuf> {
        existing(self.string(key)?)
    }

    pub fn inputs(&self, key: &str) -> CliResult<Vec<PathBuf>> {
        self.list(key)?.into_iter().map(existing).collect()
    }
}

fn existing(p: String) -> CliResult<PathBuf> {
    let path = PathBuf::from(p);
    if !path.is_file() {
        return Err(CliError::Runtime(format!("input file not found: {}", path.display())));
    }
    Ok(path)
}
