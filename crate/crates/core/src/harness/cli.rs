//! The `brwld` command line.
//!
//! Every command emits one record
//! `{command, config, estimate, diagnostics, seed, config_digest, tool_version, timing}`.
//! Only `timing` depends on the machine; everything else is a function of
//! the configuration.

use std::io::Write;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::{json, Value};

use super::aggregate::EstimateRecord;
use super::config::{Format, RunConfig};
use super::report::{format_f64, to_csv_row, to_json_string};
use super::stream::{derive_stream_in, domain};
use super::validate::{run_validate_with, Tier, ValidateOptions};
use crate::decoration::{
    atom_count_profile, conditioned_overshoot_with, decoration_csv, default_window, sample_decoration_with,
};
use crate::error::{Error, Result};
use crate::estimators::{
    c_theta_with, gw_survival, ldp_rate_with, llt_check, log_asymptotic_tail, spinal_tail_with, tail_level,
    theta_sweep, CVariant, GKind,
};
use crate::reproduction::{load_law, parse_rational, ReproductionLaw};
use crate::spine::{AuxOptions, DEFAULT_PRUNE_DELTA};
use crate::tree_sim::{big_ratio_f64, enumerate_tail, naive_tail, run_forward, DEFAULT_CAP};

const DEFAULT_REPLICAS: u64 = 10_000;

#[derive(Debug, Parser)]
#[command(name = "brwld", version, about = "Upper large deviations of the branching random walk maximum")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Tilted cumulants, Legendre transform and critical speed.
    Cumulants(Flags),
    /// Which standing assumptions hold at theta.
    Check(Flags),
    /// One forward run of the branching random walk.
    Simulate(Flags),
    /// P(M_n >= a) by naive simulation, spinal sampling, enumeration or the asymptotic formula.
    Tail(Flags),
    /// The constant C(theta).
    Ctheta(Flags),
    /// Samples of the decoration process seen from the maximum.
    Decoration(Flags),
    /// Conditioned overshoot M_n - n psi'(theta) against Exp(theta).
    Overshoot(Flags),
    /// Survival of the underlying Galton-Watson process.
    Gw(Flags),
    /// Local limit check for the tilted walk.
    Llt(Flags),
    /// Decay rate of P(M_n >= n x) over a grid of n.
    Rate(Flags),
    /// C(theta) over a grid of theta.
    Sweep(Flags),
    /// Total atom count of the auxiliary process over a grid of n.
    Profile(Flags),
    /// Runs the acceptance suite.
    Validate(Flags),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Naive,
    Spinal,
    Enumerate,
    Asymptotic,
}

impl Method {
    fn as_str(self) -> &'static str {
        match self {
            Method::Naive => "naive",
            Method::Spinal => "spinal",
            Method::Enumerate => "enumerate",
            Method::Asymptotic => "asymptotic",
        }
    }
}

#[derive(Debug, Clone, Args)]
struct Flags {
    /// Law file path, or inline text such as "kind=fixed_gaussian b=2 mean=0 sd=1".
    #[arg(long)]
    law: Option<String>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    /// Deviation from n psi'(theta).
    #[arg(long, allow_hyphen_values = true)]
    y: Option<f64>,
    /// Absolute level; overrides --y.
    #[arg(long, allow_hyphen_values = true)]
    a: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    x: Option<f64>,
    #[arg(long)]
    replicas: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    window: Option<f64>,
    #[arg(long)]
    prune_delta: Option<f64>,
    #[arg(long)]
    cap: Option<u64>,
    /// Comma-separated list.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    #[arg(long, value_enum)]
    method: Option<Method>,
    #[arg(long)]
    variant: Option<CVariant>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long, default_value = "json")]
    format: Format,
    #[arg(long)]
    tier: Option<Tier>,
    /// Accepted samples wanted (decoration).
    #[arg(long)]
    target: Option<usize>,
    /// Interval width for the local limit check; the exponential kernel otherwise.
    #[arg(long)]
    h: Option<f64>,
    /// Value of C(theta) for the asymptotic formula; estimated when absent.
    #[arg(long)]
    c: Option<f64>,
    /// Criteria to run (validate), comma-separated.
    #[arg(long, value_delimiter = ',')]
    only: Vec<u8>,
    #[arg(long, hide = true, allow_hyphen_values = true)]
    psi_prime_offset: Option<f64>,
}

/// What a command produced, before the record is assembled.
struct Outcome {
    estimate: Option<EstimateRecord>,
    diagnostics: Value,
    /// Replaces the generic CSV rendering.
    csv: Option<String>,
    /// Wall-clock figures beyond the total.
    timing: Value,
    exit_code: i32,
}

impl Outcome {
    fn new(estimate: Option<EstimateRecord>, diagnostics: Value) -> Outcome {
        Outcome { estimate, diagnostics, csv: None, timing: json!({}), exit_code: 0 }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn need<T: Copy>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::InvalidArgument(format!("--{flag} is required")))
}

struct Run {
    name: &'static str,
    flags: Flags,
    config: RunConfig,
}

impl Run {
    fn law(&self) -> Result<ReproductionLaw> {
        load_law(self.flags.law.as_deref().ok_or_else(|| Error::InvalidArgument("--law is required".into()))?)
    }

    fn theta(&self) -> Result<f64> {
        need(self.config.theta, "theta")
    }

    fn n(&self) -> Result<usize> {
        need(self.config.n, "n")
    }

    fn replicas(&mut self) -> u64 {
        *self.config.replicas.get_or_insert(DEFAULT_REPLICAS)
    }

    fn aux_options(&mut self, window: f64) -> AuxOptions {
        let prune_delta = *self.config.prune_delta.get_or_insert(DEFAULT_PRUNE_DELTA);
        let cap = *self.config.cap.get_or_insert(DEFAULT_CAP);
        AuxOptions { window, prune_delta, cap, ..AuxOptions::estimator() }
    }

    fn n_grid(&mut self, default: &[usize]) -> Result<Vec<usize>> {
        if self.config.grid.is_empty() {
            self.config.grid = default.iter().map(|&n| n as f64).collect();
        }
        self.config
            .grid
            .iter()
            .map(|&g| {
                if g >= 0.0 && g.fract() == 0.0 {
                    Ok(g as usize)
                } else {
                    Err(Error::InvalidArgument(format!("grid entry {g} is not a generation count")))
                }
            })
            .collect()
    }

    fn seed(&self) -> u64 {
        self.config.seed
    }

    fn cumulants(&mut self) -> Result<Outcome> {
        let law = self.law()?;
        let theta = self.theta()?;
        let cum = law.tilted_cumulants(theta)?;
        let speed = law.critical_speed().map(|s| to_value(&s)).unwrap_or_else(|e| json!({"error": e.to_string()}));
        let mut diag = json!({"cumulants": cum, "sigma": cum.sigma(), "critical_speed": speed});
        if let Some(x) = self.config.x {
            diag["legendre"] = to_value(&law.legendre(x)?);
        }
        Ok(Outcome::new(None, diag))
    }

    fn check(&mut self) -> Result<Outcome> {
        let law = self.law()?;
        let rep = law.check_assumptions(self.theta()?);
        Ok(Outcome::new(None, json!({"assumptions": rep, "all_hold": rep.all_hold()})))
    }

    fn simulate(&mut self) -> Result<Outcome> {
        let law = self.law()?;
        let n = self.n()?;
        let cap = *self.config.cap.get_or_insert(DEFAULT_CAP);
        let mut rng = derive_stream_in(self.seed(), domain::FORWARD, 0);
        let gens = run_forward(&law, n, cap, &mut rng);
        let summary: Vec<Value> = gens
            .iter()
            .map(|g| json!({"n": g.n, "population": g.population, "max": g.max.value(), "capped": g.capped}))
            .collect();
        let last = gens.last().expect("generation 0 is always present");
        let mut out = Outcome::new(None, json!({"generations": summary, "final": last.positions.atoms()}));
        let mut csv = String::from("location,multiplicity\n");
        for atom in last.positions.atoms() {
            csv.push_str(&format!("{},{}\n", format_f64(atom.location), atom.multiplicity));
        }
        out.csv = Some(csv);
        Ok(out)
    }

    /// Level from `--a`, or `n psi'(theta) + y`.
    fn level(&mut self, law: &ReproductionLaw, n: usize) -> Result<f64> {
        if let Some(a) = &self.flags.a {
            return match a.parse::<f64>() {
                Ok(v) => Ok(v),
                Err(_) => parse_rational(a)?.to_f64().ok_or_else(|| Error::InvalidArgument(format!("--a: {a:?}"))),
            };
        }
        let y = *self.config.y.get_or_insert(0.0);
        Ok(tail_level(&law.tilted_cumulants(self.theta()?)?, n, y))
    }

    fn tail(&mut self) -> Result<Outcome> {
        let law = self.law()?;
        let n = self.n()?;
        let method = self.flags.method.unwrap_or(Method::Spinal);
        self.config.method = Some(method.as_str().into());
        let seed = self.seed();
        match method {
            Method::Enumerate => {
                let a = self.flags.a.clone().ok_or_else(|| Error::InvalidArgument("--a is required".into()))?;
                let exact = enumerate_tail(&law, n, parse_rational(&a)?)?;
                Ok(Outcome::new(None, json!({"exact": exact.to_string(), "value": big_ratio_f64(&exact)})))
            }
            Method::Naive => {
                let a = self.level(&law, n)?;
                self.config.a = Some(a);
                let replicas = self.replicas();
                let cap = *self.config.cap.get_or_insert(DEFAULT_CAP);
                let est = naive_tail(&law, n, a, replicas, cap, seed)?;
                Ok(Outcome::new(Some(est), json!({"level": a})))
            }
            Method::Spinal => {
                let theta = self.theta()?;
                let a = self.level(&law, n)?;
                self.config.a = Some(a);
                let replicas = self.replicas();
                let opts = self.aux_options(0.0);
                let est = spinal_tail_with(&law, theta, n, a, replicas, seed, opts)?;
                Ok(Outcome::new(Some(est), json!({"level": a})))
            }
            Method::Asymptotic => {
                let theta = self.theta()?;
                let cum = law.tilted_cumulants(theta)?;
                let y = *self.config.y.get_or_insert(0.0);
                let (c, c_estimate) = match self.flags.c {
                    Some(c) => (c, None),
                    None => {
                        let replicas = self.replicas();
                        let opts = self.aux_options(0.0);
                        let rep = c_theta_with(&law, theta, None, replicas, CVariant::Weighted, seed, opts)?;
                        (rep.estimate.mean, Some(rep))
                    }
                };
                if let Some(c) = self.flags.c {
                    self.config.extra = Some(json!({"c": c}));
                }
                let log_tail = log_asymptotic_tail(&cum, c, n, y);
                Ok(Outcome::new(
                    None,
                    json!({"level": tail_level(&cum, n, y), "log_tail": log_tail, "tail": log_tail.exp(), "c": c, "c_estimate": c_estimate}),
                ))
            }
        }
    }

    fn ctheta(&mut self) -> Result<Outcome> {
        let law = self.law()?;
        let theta = self.theta()?;
        let variant = *self.flags.variant.get_or_insert(CVariant::Weighted);
        self.config.variant = Some(variant.as_str().into());
        let replicas = self.replicas();
        let opts = self.aux_options(0.0);
        let rep = c_theta_with(&law, theta, self.config.n, replicas, variant, self.seed(), opts)?;
        let mut diag = to_value(&rep);
        let est = rep.estimate.clone();
        diag.as_object_mut().expect("object").remove("estimate");
        Ok(Outcome::new(Some(est), diag))
    }

    fn decoration(&mut self) -> Result<Outcome> {
        let law = self.law()?;
        let theta = self.theta()?;
        let n = self.n()?;
        let window = *self.config.window.get_or_insert(default_window(theta));
        let target = self.flags.target.unwrap_or(1000);
        self.config.extra = Some(json!({"target": target}));
        let opts = self.aux_options(window);
        let rep = sample_decoration_with(&law, theta, n, target, self.seed(), opts)?;
        let samples: Vec<Value> = rep
            .samples
            .iter()
            .map(|s| json!({"index": s.index, "s_n": s.s_n, "atoms": s.atoms.atoms(), "prune_bias_bound": s.prune_bias_bound}))
            .collect();
        let mut out = Outcome::new(
            None,
            json!({
                "theta": rep.theta, "n_max": rep.n_max, "window": rep.window, "attempts": rep.attempts,
                "capped": rep.capped, "acceptance_rate": rep.acceptance_rate, "acceptance_stderr": rep.acceptance_stderr,
                "window_too_small": rep.window_too_small, "samples": samples,
            }),
        );
        out.csv = Some(decoration_csv(&rep.samples));
        Ok(out)
    }

    fn overshoot(&mut self) -> Result<Outcome> {
        let law = self.law()?;
        let theta = self.theta()?;
        let n = self.n()?;
        let replicas = self.replicas();
        let opts = self.aux_options(0.0);
        let rep = conditioned_overshoot_with(&law, theta, n, replicas, self.seed(), opts)?;
        let mut csv = String::from("value,weight\n");
        for s in &rep.samples {
            csv.push_str(&format!("{},{}\n", format_f64(s.value), format_f64(s.weight)));
        }
        let mut diag = to_value(&rep);
        diag.as_object_mut().expect("object").remove("samples");
        let mut out = Outcome::new(None, diag);
        out.csv = Some(csv);
        Ok(out)
    }

    fn gw(&mut self) -> Result<Outcome> {
        let law = self.law()?;
        let n = self.n()?;
        let offspring = law
            .offspring_distribution()
            .ok_or_else(|| Error::InvalidArgument("offspring law has infinite support; gw needs a finite one".into()))?;
        let rep = gw_survival(&offspring, n)?;
        Ok(Outcome::new(None, to_value(&rep)))
    }

    fn llt(&mut self) -> Result<Outcome> {
        let law = self.law()?;
        let theta = self.theta()?;
        let n = self.n()?;
        let y = *self.config.y.get_or_insert(0.0);
        let g = match self.flags.h {
            Some(h) => {
                self.config.extra = Some(json!({"h": h}));
                GKind::Interval { h }
            }
            None => GKind::ExpTail,
        };
        let replicas = self.replicas();
        let rep = llt_check(&law, theta, n, g, y, replicas, self.seed())?;
        let mut diag = to_value(&rep);
        diag.as_object_mut().expect("object").remove("estimate");
        Ok(Outcome::new(Some(rep.estimate), diag))
    }

    fn rate(&mut self) -> Result<Outcome> {
        let law = self.law()?;
        let x = need(self.config.x, "x")?;
        let grid = self.n_grid(&[25, 50, 100, 200])?;
        let replicas = self.replicas();
        let opts = self.aux_options(0.0);
        let rep = ldp_rate_with(&law, x, &grid, replicas, self.seed(), opts)?;
        Ok(Outcome::new(None, to_value(&rep)))
    }

    fn sweep(&mut self) -> Result<Outcome> {
        let law = self.law()?;
        if self.config.grid.len() < 2 {
            return Err(Error::InvalidArgument("--grid needs at least two theta values".into()));
        }
        let thetas = self.config.grid.clone();
        let n_max = *self.config.n.get_or_insert(60);
        let variant = *self.flags.variant.get_or_insert(CVariant::Weighted);
        self.config.variant = Some(variant.as_str().into());
        let replicas = self.replicas();
        let opts = self.aux_options(0.0);
        let rep = theta_sweep(&law, &thetas, n_max, replicas, variant, self.seed(), opts)?;
        Ok(Outcome::new(None, to_value(&rep)))
    }

    fn profile(&mut self) -> Result<Outcome> {
        let law = self.law()?;
        let theta = self.theta()?;
        let grid = self.n_grid(&[50, 100, 200, 400])?;
        let replicas = self.replicas();
        let rep = atom_count_profile(&law, theta, &grid, replicas, self.seed())?;
        Ok(Outcome::new(None, to_value(&rep)))
    }

    fn validate(&mut self) -> Result<Outcome> {
        let tier = *self.flags.tier.get_or_insert(Tier::Fast);
        self.config.tier = Some(to_value(&tier).as_str().expect("tier name").to_string());
        let mut opts = ValidateOptions::new(tier, self.seed());
        opts.psi_prime_offset = self.flags.psi_prime_offset.unwrap_or(0.0);
        opts.only = self.flags.only.clone();
        if opts.psi_prime_offset != 0.0 || !opts.only.is_empty() {
            self.config.extra = Some(json!({"psi_prime_offset": opts.psi_prime_offset, "only": opts.only}));
        }
        let rep = run_validate_with(&opts, |c| eprintln!("{}", c.line()))?;
        let mut diag = to_value(&rep);
        diag.as_object_mut().expect("object").remove("timing");
        let mut out = Outcome::new(None, diag);
        out.timing = to_value(&rep.timing);
        out.exit_code = if rep.all_passed { 0 } else { 1 };
        Ok(out)
    }
}

/// Finished output of one invocation.
pub struct Rendered {
    /// Record without its `timing` member.
    pub record: Value,
    pub timing: Value,
    pub csv: Option<String>,
    pub format: Format,
    pub out: Option<String>,
    pub exit_code: i32,
}

impl Rendered {
    /// The text written to the output: JSON with timing, or CSV.
    pub fn text(&self) -> String {
        match self.format {
            Format::Json => {
                let mut full = self.record.clone();
                full["timing"] = self.timing.clone();
                to_json_string(&full)
            }
            Format::Csv => match &self.csv {
                Some(csv) => csv.clone(),
                None => to_csv_row(&json!({
                    "command": self.record["command"],
                    "seed": self.record["seed"],
                    "config_digest": self.record["config_digest"],
                    "estimate": self.record["estimate"],
                })),
            },
        }
    }
}

fn flags_of(command: Command) -> (&'static str, Flags) {
    match command {
        Command::Cumulants(f) => ("cumulants", f),
        Command::Check(f) => ("check", f),
        Command::Simulate(f) => ("simulate", f),
        Command::Tail(f) => ("tail", f),
        Command::Ctheta(f) => ("ctheta", f),
        Command::Decoration(f) => ("decoration", f),
        Command::Overshoot(f) => ("overshoot", f),
        Command::Gw(f) => ("gw", f),
        Command::Llt(f) => ("llt", f),
        Command::Rate(f) => ("rate", f),
        Command::Sweep(f) => ("sweep", f),
        Command::Profile(f) => ("profile", f),
        Command::Validate(f) => ("validate", f),
    }
}

fn execute(cli: Cli) -> Result<Rendered> {
    let start = Instant::now();
    let (name, flags) = flags_of(cli.command);
    let law_text = match &flags.law {
        Some(arg) => Some(load_law(arg)?.to_string()),
        None => None,
    };
    let config = RunConfig {
        command: name.into(),
        law: law_text,
        theta: flags.theta,
        n: flags.n,
        y: flags.y,
        a: None,
        x: flags.x,
        replicas: flags.replicas,
        window: flags.window,
        prune_delta: flags.prune_delta,
        cap: flags.cap,
        grid: flags.grid.clone(),
        method: None,
        variant: None,
        tier: None,
        extra: None,
        seed: flags.seed,
        format: flags.format,
        out: flags.out.clone(),
    };
    let mut run = Run { name, flags, config };
    let outcome = match run.name {
        "cumulants" => run.cumulants(),
        "check" => run.check(),
        "simulate" => run.simulate(),
        "tail" => run.tail(),
        "ctheta" => run.ctheta(),
        "decoration" => run.decoration(),
        "overshoot" => run.overshoot(),
        "gw" => run.gw(),
        "llt" => run.llt(),
        "rate" => run.rate(),
        "sweep" => run.sweep(),
        "profile" => run.profile(),
        _ => run.validate(),
    }?;
    let digest = run.config.digest();
    let estimate = outcome.estimate.map(|e| to_value(&e.with_digest(digest.clone()))).unwrap_or(Value::Null);
    let record = json!({
        "command": name,
        "config": run.config.canonical(),
        "estimate": estimate,
        "diagnostics": outcome.diagnostics,
        "seed": run.config.seed,
        "config_digest": digest,
        "tool_version": env!("CARGO_PKG_VERSION"),
    });
    let mut timing = outcome.timing;
    timing["wall_seconds"] = json!(start.elapsed().as_secs_f64());
    Ok(Rendered {
        record,
        timing,
        csv: outcome.csv,
        format: run.config.format,
        out: run.config.out.clone(),
        exit_code: outcome.exit_code,
    })
}

/// Parses `argv` (including the program name) and runs the command.
pub fn render(argv: &[String]) -> Result<Rendered> {
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    execute(cli)
}

/// The JSON record of a run with its `timing` member removed.
pub fn render_without_timing(argv: &[String]) -> Result<String> {
    Ok(to_json_string(&render(argv)?.record))
}

/// Entry point for the binary; returns the process exit code.
pub fn main_with(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let rendered = match execute(cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    let text = rendered.text();
    let written = match &rendered.out {
        Some(path) => std::fs::write(path, &text),
        None => std::io::stdout().lock().write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return 2;
    }
    rendered.exit_code
}

#[cfg(test)]
mod tests {
    use super::*;

    fn argv(s: &str) -> Vec<String> {
        let mut v = vec!["brwld".to_string()];
        v.extend(s.split(' ').map(String::from));
        v
    }

    #[test]
    fn gw_record() {
        let r = render(&argv("gw --law kind=mixed_gaussian;offspring=0:3/5;offspring=2:2/5;mean=0;sd=1 --n 2")).unwrap();
        assert_eq!(r.record["diagnostics"]["exact"], "32/125");
        assert!(r.record["estimate"].is_null());
        assert_eq!(r.record["config"]["command"], "gw");
        assert_eq!(r.record["config_digest"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn enumerate_matches_exact() {
        let law = "kind=tabulated;row=1/4:1 1;row=1/2:1 -1;row=1/4:-1 -1";
        let mut args = argv("tail --n 1 --a 1 --method enumerate --law");
        args.push(law.into());
        let r = render(&args).unwrap();
        assert_eq!(r.record["diagnostics"]["exact"], "3/4");
    }

    #[test]
    fn csv_flattens_estimate() {
        let r = render(&argv("tail --law kind=fixed_gaussian;b=2;mean=0;sd=1 --theta 1.5 --n 10 --replicas 200 --format csv")).unwrap();
        let text = r.text();
        let mut lines = text.lines();
        assert!(lines.next().unwrap().contains("estimate.mean"));
        assert_eq!(lines.count(), 1);
    }

    #[test]
    fn missing_flags_are_errors() {
        assert!(render(&argv("tail --n 3")).is_err());
        assert!(render(&argv("nonsense")).is_err());
    }
}
