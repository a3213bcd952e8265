//! Experiment configuration and its `key=value` text form.
//!
//! Keys match the command line flags without the leading dashes. Lists are
//! comma separated; blank lines and lines starting with `#` are ignored.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::offspring::OffspringDist;
use crate::sampling::SamplingPolicy;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Cover,
    Hit,
    Freeze,
    Census,
    GwDiag,
    Pakes,
    Scales,
    Lower,
    Upper,
}

impl Command {
    pub const ALL: [Command; 9] = [
        Command::Cover,
        Command::Hit,
        Command::Freeze,
        Command::Census,
        Command::GwDiag,
        Command::Pakes,
        Command::Scales,
        Command::Lower,
        Command::Upper,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Cover => "cover",
            Command::Hit => "hit",
            Command::Freeze => "freeze",
            Command::Census => "census",
            Command::GwDiag => "gw-diag",
            Command::Pakes => "pakes",
            Command::Scales => "scales",
            Command::Lower => "lower",
            Command::Upper => "upper",
        }
    }
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown command {s:?}")))
    }
}

/// How the freeze subcommand simulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FreezeMode {
    Tree,
    Projected,
}

impl FromStr for FreezeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree" => Ok(FreezeMode::Tree),
            "1d" | "projected" => Ok(FreezeMode::Projected),
            _ => Err(Error::Parse(format!("unknown freeze mode {s:?}"))),
        }
    }
}

impl fmt::Display for FreezeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FreezeMode::Tree => "tree",
            FreezeMode::Projected => "1d",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub d: u32,
    /// Offspring spec; `det:<d>` when absent.
    pub dist: Option<String>,
    pub seed: u64,
    pub replicas: u64,
    pub threads: usize,
    pub out: String,
    pub r: Vec<u32>,
    pub k: u32,
    #[serde(rename = "L")]
    pub l: u32,
    pub gamma: Vec<f64>,
    pub strict_exact: bool,
    pub slack: u32,
    /// Initial particles at the root; command-specific default when absent.
    pub n0: Option<u64>,
    /// Generations for Galton-Watson diagnostics.
    pub n: u32,
    pub a: f64,
    /// Scale parameter; command-specific default when absent.
    pub delta: Option<f64>,
    #[serde(rename = "M")]
    pub m: f64,
    pub mode: FreezeMode,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            command: Command::Cover,
            d: 3,
            dist: None,
            seed: 1,
            replicas: 1000,
            threads: 1,
            out: "out".into(),
            r: vec![4, 8, 12, 16],
            k: 1,
            l: 3,
            gamma: vec![0.5, 1.0, 2.0],
            strict_exact: false,
            slack: crate::field::DEFAULT_SLACK,
            n0: None,
            n: 1000,
            a: 0.1,
            delta: None,
            m: 2.0,
            mode: FreezeMode::Projected,
        }
    }
}

fn join<T: fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("bad value {v:?} for {key}")))
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| parse_num(key, x)).collect()
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Parse(format!("bad value {v:?} for {key}"))),
    }
}

impl ExperimentConfig {
    /// Set one key from its text value.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "command" => self.command = value.trim().parse()?,
            "d" => self.d = parse_num(key, value)?,
            "dist" => self.dist = Some(value.trim().to_string()),
            "seed" => self.seed = parse_num(key, value)?,
            "replicas" => self.replicas = parse_num(key, value)?,
            "threads" => self.threads = parse_num(key, value)?,
            "out" => self.out = value.trim().to_string(),
            "r" => self.r = parse_list(key, value)?,
            "k" => self.k = parse_num(key, value)?,
            "L" => self.l = parse_num(key, value)?,
            "gamma" => self.gamma = parse_list(key, value)?,
            "strict-exact" => self.strict_exact = parse_bool(key, value)?,
            "slack" => self.slack = parse_num(key, value)?,
            "n0" => self.n0 = Some(parse_num(key, value)?),
            "n" => self.n = parse_num(key, value)?,
            "a" => self.a = parse_num(key, value)?,
            "delta" => self.delta = Some(parse_num(key, value)?),
            "M" => self.m = parse_num(key, value)?,
            "mode" => self.mode = value.trim().parse()?,
            _ => return Err(Error::Parse(format!("unknown key {key:?}"))),
        }
        Ok(())
    }

    /// Apply every `key=value` line of `text` on top of `self`.
    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (no, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key=value", no + 1)))?;
            self.apply(k.trim(), v)?;
        }
        Ok(())
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        c.merge_text(text)?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let mut lines = vec![
            format!("command={}", self.command),
            format!("d={}", self.d),
        ];
        if let Some(dist) = &self.dist {
            lines.push(format!("dist={dist}"));
        }
        lines.extend([
            format!("seed={}", self.seed),
            format!("replicas={}", self.replicas),
            format!("threads={}", self.threads),
            format!("out={}", self.out),
            format!("r={}", join(&self.r)),
            format!("k={}", self.k),
            format!("L={}", self.l),
            format!("gamma={}", join(&self.gamma)),
            format!("strict-exact={}", self.strict_exact),
            format!("slack={}", self.slack),
        ]);
        if let Some(n0) = self.n0 {
            lines.push(format!("n0={n0}"));
        }
        lines.push(format!("n={}", self.n));
        lines.push(format!("a={}", self.a));
        if let Some(delta) = self.delta {
            lines.push(format!("delta={delta}"));
        }
        lines.push(format!("M={}", self.m));
        lines.push(format!("mode={}", self.mode));
        let mut s = lines.join("\n");
        s.push('\n');
        s
    }

    pub fn dist_spec(&self) -> String {
        self.dist.clone().unwrap_or_else(|| format!("det:{}", self.d))
    }

    pub fn offspring(&self) -> Result<OffspringDist> {
        OffspringDist::from_spec(&self.dist_spec(), self.d)
    }

    pub fn policy(&self) -> SamplingPolicy {
        if self.strict_exact {
            SamplingPolicy::strict()
        } else {
            SamplingPolicy::default()
        }
    }

    /// `delta` with the lower-bound default 0.1 or the upper-bound default 1.
    pub fn delta_or_default(&self) -> f64 {
        self.delta
            .unwrap_or(if self.command == Command::Upper { 1.0 } else { 0.1 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_round_trip() {
        let c = ExperimentConfig::default();
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn comments_and_overrides() {
        let text = "# pilot\ncommand=hit\n\nL = 7\nr=1,2\ndist=poisson:3\nstrict-exact=yes\n";
        let mut c = ExperimentConfig::parse(text).unwrap();
        assert_eq!(c.command, Command::Hit);
        assert_eq!(c.l, 7);
        assert_eq!(c.r, vec![1, 2]);
        assert!(c.strict_exact);
        c.apply("L", "2").unwrap();
        assert_eq!(c.l, 2);
        assert_eq!(c.offspring().unwrap().mean(), 3.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(ExperimentConfig::parse("bogus=1").is_err());
        assert!(ExperimentConfig::parse("d=three").is_err());
        assert!(ExperimentConfig::parse("justtext").is_err());
        assert!(ExperimentConfig::parse("command=paint").is_err());
    }

    #[test]
    fn default_dist_follows_degree() {
        let c = ExperimentConfig::parse("d=4").unwrap();
        assert_eq!(c.dist_spec(), "det:4");
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6..1e6f64, 1e-12..1e-3f64, Just(0.1), Just(2.0)]
    }

    prop_compose! {
        fn arb_config()(
            cmd in 0..9usize,
            d in 2..10u32,
            dist in proptest::option::of(prop_oneof![
                Just("det:3".to_string()),
                Just("poisson:4".to_string()),
                Just("table:0=0.5,6=0.5".to_string()),
            ]),
            seed in any::<u64>(),
            replicas in any::<u64>(),
            threads in 1..64usize,
            out in "[a-z/_.]{1,12}",
            r in proptest::collection::vec(0..40u32, 0..5),
            k in 0..6u32,
            l in 0..200u32,
            gamma in proptest::collection::vec(finite(), 0..4),
            strict in any::<bool>(),
            slack in 0..500u32,
            n0 in proptest::option::of(any::<u64>()),
            n in 0..100_000u32,
            a in finite(),
            delta in proptest::option::of(finite()),
            m in finite(),
            tree in any::<bool>(),
        ) -> ExperimentConfig {
            ExperimentConfig {
                command: Command::ALL[cmd],
                d, dist, seed, replicas, threads, out, r, k, l, gamma,
                strict_exact: strict, slack, n0, n, a, delta, m,
                mode: if tree { FreezeMode::Tree } else { FreezeMode::Projected },
            }
        }
    }

    proptest! {
        #[test]
        fn text_round_trip(c in arb_config()) {
            let back = ExperimentConfig::parse(&c.to_text()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
