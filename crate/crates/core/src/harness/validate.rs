//! The acceptance suite behind `brwld validate`.
//!
//! Each criterion returns a [`CriterionResult`] with its measured values, the
//! tolerance it was held to and a verdict. The `full` tier uses the stated
//! replica counts; `fast` shrinks the Monte Carlo budgets.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use serde::Serialize;
use serde_json::{json, Value};

use super::aggregate::{aggregate, run_replicas, Moments, Partial, Replica};
use super::stream::{child_seed, derive_stream, domain};
use crate::decoration::{
    atom_count_profile, conditioned_extremal, conditioned_overshoot_with, laplace_compare, sample_decoration_with, Bump,
};
use crate::error::{Error, Result};
use crate::estimators::{
    c_theta_with, gw_survival, ldp_rate_with, llt_check, log_asymptotic_tail, mean_count, spinal_tail_with,
    CThetaReport, CVariant, GKind,
};
use crate::reproduction::{CumulantReport, Rational, ReproductionLaw};
use crate::spine::{AuxOptions, SpineSampler};
use crate::tree_sim::{additive_martingale, big_ratio_f64, enumerate_tail, run_forward, DEFAULT_CAP};

/// Pruning threshold used throughout the suite. Its bias bound is reported
/// with every estimate and stays orders of magnitude below the standard
/// errors.
pub const SUITE_PRUNE_DELTA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Fast,
    Full,
}

impl std::str::FromStr for Tier {
    type Err = Error;
    fn from_str(s: &str) -> Result<Tier> {
        match s {
            "fast" => Ok(Tier::Fast),
            "full" => Ok(Tier::Full),
            other => Err(Error::InvalidArgument(format!("unknown tier `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidateOptions {
    pub tier: Tier,
    pub seed: u64,
    /// Added to every `psi'(theta)` the suite computes itself. Nonzero only
    /// for mutation testing.
    pub psi_prime_offset: f64,
    /// Criteria to run; empty runs all of them.
    pub only: Vec<u8>,
}

impl ValidateOptions {
    pub fn new(tier: Tier, seed: u64) -> ValidateOptions {
        ValidateOptions { tier, seed, psi_prime_offset: 0.0, only: Vec::new() }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub tolerance: String,
    pub measured: Value,
    /// One-line human summary.
    pub summary: String,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "criterion {:>2} {} {:<34} {}",
            self.id,
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.summary
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidateReport {
    pub tier: Tier,
    pub seed: u64,
    pub psi_prime_offset: f64,
    pub all_passed: bool,
    pub criteria: Vec<CriterionResult>,
    /// Wall-clock seconds per criterion; excluded from determinism checks.
    pub timing: BTreeMap<String, f64>,
}

struct Suite {
    opts: ValidateOptions,
    c_cache: Option<CThetaReport>,
}

fn pick(tier: Tier, fast: u64, full: u64) -> u64 {
    match tier {
        Tier::Fast => fast,
        Tier::Full => full,
    }
}

fn suite_opts() -> AuxOptions {
    AuxOptions { prune_delta: SUITE_PRUNE_DELTA, ..AuxOptions::estimator() }
}

fn binary_gaussian() -> ReproductionLaw {
    ReproductionLaw::fixed_gaussian(2, 0.0, 1.0).expect("valid law")
}

fn mixed(p0: (i64, i64), p2: (i64, i64)) -> ReproductionLaw {
    ReproductionLaw::mixed_gaussian(vec![(0, Rational::new(p0.0, p0.1)), (2, Rational::new(p2.0, p2.1))], 0.0, 1.0)
        .expect("valid law")
}

fn c2pm1() -> ReproductionLaw {
    let r = |n, d| Rational::new(n, d);
    ReproductionLaw::tabulated(vec![
        (r(1, 4), vec![r(1, 1), r(1, 1)]),
        (r(1, 2), vec![r(1, 1), r(-1, 1)]),
        (r(1, 4), vec![r(-1, 1), r(-1, 1)]),
    ])
    .expect("valid law")
}

fn combined(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}

impl Suite {
    fn cumulants(&self, law: &ReproductionLaw, theta: f64) -> Result<CumulantReport> {
        let mut c = law.tilted_cumulants(theta)?;
        c.psi_prime += self.opts.psi_prime_offset;
        Ok(c)
    }

    /// Weighted `C(1.5)` for the binary Gaussian law, shared by two criteria.
    fn c_hat(&mut self) -> Result<CThetaReport> {
        if let Some(c) = &self.c_cache {
            return Ok(c.clone());
        }
        let replicas = pick(self.opts.tier, 20_000, 100_000);
        let c = c_theta_with(&binary_gaussian(), 1.5, Some(60), replicas, CVariant::Weighted, child_seed(self.opts.seed, 40), suite_opts())?;
        self.c_cache = Some(c.clone());
        Ok(c)
    }

    fn unbiasedness(&mut self) -> Result<CriterionResult> {
        let law = c2pm1();
        let theta = 1.0;
        let truth = law.tilted_cumulants(theta)?.psi_prime;
        let cum = self.cumulants(&law, theta)?;
        let replicas = pick(self.opts.tier, 100_000, 100_000);
        let mut rows = Vec::new();
        let mut passed = true;
        for (k, (n, a)) in [(1usize, 1i64), (2, 2), (2, 0)].into_iter().enumerate() {
            let exact = big_ratio_f64(&enumerate_tail(&law, n, Rational::from_integer(a))?);
            // the estimator is addressed by deviation y from n psi'
            let y = a as f64 - n as f64 * truth;
            let level = n as f64 * cum.psi_prime + y;
            let est = spinal_tail_with(&law, theta, n, level, replicas, child_seed(self.opts.seed, 10 + k as u64), suite_opts())?;
            let z = (est.mean - exact) / est.stderr;
            let ok = (est.mean - exact).abs() <= 3.0 * est.stderr;
            passed &= ok;
            rows.push(json!({"n": n, "a": a, "exact": exact, "mean": est.mean, "stderr": est.stderr, "z": z}));
        }
        let worst = rows.iter().map(|r| r["z"].as_f64().unwrap_or(f64::INFINITY).abs()).fold(0.0, f64::max);
        Ok(CriterionResult {
            id: 1,
            name: "spinal estimator unbiasedness",
            passed,
            tolerance: "|mean - exact| <= 3 stderr".into(),
            summary: format!("max |z| = {worst:.2} over 3 cases"),
            measured: Value::Array(rows),
        })
    }

    fn gw(&mut self) -> Result<CriterionResult> {
        let law = vec![(0, Rational::new(3, 5)), (2, Rational::new(2, 5))];
        let one = gw_survival(&law, 1)?;
        let two = gw_survival(&law, 2)?;
        let long = gw_survival(&law, 200)?;
        let rate = long.log_survival / 200.0;
        let target = 0.8f64.ln();
        let rel = (rate / target - 1.0).abs();
        let exact_ok = one.exact.as_deref() == Some("2/5") && two.exact.as_deref() == Some("32/125");
        Ok(CriterionResult {
            id: 2,
            name: "Galton-Watson survival",
            passed: exact_ok && rel <= 0.02,
            tolerance: "t_1 = 2/5, t_2 = 32/125 exactly; |(1/200) log t_200 / log 0.8 - 1| <= 0.02".into(),
            summary: format!(
                "t_1 = {}, t_2 = {}, (1/200) log t_200 = {rate:.6} ({:.2}% from log 0.8)",
                one.exact.as_deref().unwrap_or("?"),
                two.exact.as_deref().unwrap_or("?"),
                100.0 * rel
            ),
            measured: json!({"t1": one.exact, "t2": two.exact, "rate_200": rate, "log_mean": target, "relative_error": rel}),
        })
    }

    fn llt(&mut self) -> Result<CriterionResult> {
        let law = binary_gaussian();
        let theta = 1.5;
        let n = 1000;
        let replicas = 1_000_000;
        let sigma = law.tilted_cumulants(theta)?.sigma();
        let mut rows = Vec::new();
        let mut passed = true;
        for (k, y) in [0.0, sigma * (n as f64).sqrt()].into_iter().enumerate() {
            let r = llt_check(&law, theta, n, GKind::ExpTail, y, replicas, child_seed(self.opts.seed, 20 + k as u64))?;
            passed &= r.relative_error.abs() <= 0.05;
            rows.push(json!({"y": y, "estimate": r.estimate.mean, "stderr": r.estimate.stderr, "limit": r.limit, "relative_error": r.relative_error}));
        }
        let errs: Vec<String> = rows.iter().map(|r| format!("{:+.2}%", 100.0 * r["relative_error"].as_f64().unwrap_or(f64::NAN))).collect();
        Ok(CriterionResult {
            id: 3,
            name: "local limit scaling",
            passed,
            tolerance: "relative error <= 5% at y = 0 and y = sigma sqrt(n)".into(),
            summary: format!("relative errors {}", errs.join(", ")),
            measured: Value::Array(rows),
        })
    }

    fn consistency(&mut self) -> Result<CriterionResult> {
        let law = binary_gaussian();
        let theta = 1.5;
        let cum = self.cumulants(&law, theta)?;
        let c = self.c_hat()?;
        let c_rel = c.estimate.relative_stderr();
        // the n = 200 band leaves no room for a smaller tail budget
        let replicas = 100_000;
        let mut rows = Vec::new();
        let mut ratios: Vec<(f64, f64)> = Vec::new();
        for (k, n) in [25usize, 50, 100, 200].into_iter().enumerate() {
            let level = n as f64 * cum.psi_prime;
            let est = spinal_tail_with(&law, theta, n, level, replicas, child_seed(self.opts.seed, 30 + k as u64), suite_opts())?;
            let log_asym = log_asymptotic_tail(&cum, c.estimate.mean, n, 0.0);
            let ratio = (est.log_mean - log_asym).exp();
            let se = ratio * combined(est.relative_stderr(), c_rel);
            ratios.push((ratio, se));
            rows.push(json!({"n": n, "tail": est.mean, "tail_stderr": est.stderr, "log_tail": est.log_mean, "log_asymptotic": log_asym, "ratio": ratio, "ratio_stderr": se, "bias_bound": est.bias_bound}));
        }
        let (last, last_se) = ratios[ratios.len() - 1];
        let in_band = last - 2.0 * last_se >= 0.9 && last + 2.0 * last_se <= 1.1;
        let monotone = ratios
            .windows(2)
            .all(|w| (w[1].0 - 1.0).abs() <= (w[0].0 - 1.0).abs() + 2.0 * combined(w[0].1, w[1].1));
        let shown: Vec<String> = ratios.iter().map(|(r, s)| format!("{r:.3}±{s:.3}")).collect();
        Ok(CriterionResult {
            id: 4,
            name: "precise asymptotics consistency",
            passed: in_band && monotone,
            tolerance: "ratio(200) ± 2 se inside [0.9, 1.1]; |ratio - 1| non-increasing up to 2 combined se".into(),
            summary: format!("C = {:.4}±{:.4}; ratios n=25,50,100,200: {}", c.estimate.mean, c.estimate.stderr, shown.join(" ")),
            measured: json!({"c_hat": c.estimate.mean, "c_stderr": c.estimate.stderr, "points": rows, "in_band": in_band, "monotone": monotone}),
        })
    }

    fn c_bounds(&mut self) -> Result<CriterionResult> {
        let w = self.c_hat()?;
        let replicas = pick(self.opts.tier, 20_000, 100_000);
        let ind = c_theta_with(&binary_gaussian(), 1.5, Some(60), replicas, CVariant::Indicator, child_seed(self.opts.seed, 41), suite_opts())?;
        let single = ReproductionLaw::fixed_gaussian(1, 0.0, 1.0)?;
        let s_w = c_theta_with(&single, 1.5, Some(60), 1000, CVariant::Weighted, child_seed(self.opts.seed, 42), suite_opts())?;
        let s_i = c_theta_with(&single, 1.5, Some(60), 1000, CVariant::Indicator, child_seed(self.opts.seed, 43), suite_opts())?;
        let (cw, sw) = (w.estimate.mean, w.estimate.stderr);
        let (ci, si) = (ind.estimate.mean, ind.estimate.stderr);
        let bounds = cw - 3.0 * sw > 0.0 && cw + 3.0 * sw < 1.0;
        let degenerate = s_w.estimate.mean == 1.0 && s_i.estimate.mean == 1.0;
        let agree = (cw - ci).abs() <= 3.0 * combined(sw, si);
        Ok(CriterionResult {
            id: 5,
            name: "C(theta) bounds and degeneracy",
            passed: bounds && degenerate && agree,
            tolerance: "C ± 3 se inside (0, 1); single child exactly 1; variants within 3 combined se".into(),
            summary: format!(
                "weighted {cw:.4}±{sw:.4}, indicator {ci:.4}±{si:.4}, single child {} / {}",
                s_w.estimate.mean, s_i.estimate.mean
            ),
            measured: json!({
                "weighted": cw, "weighted_stderr": sw, "indicator": ci, "indicator_stderr": si,
                "single_child_weighted": s_w.estimate.mean, "single_child_indicator": s_i.estimate.mean,
                "bias_bound_weighted": w.estimate.bias_bound, "bias_bound_indicator": ind.estimate.bias_bound,
            }),
        })
    }

    fn ldp(&mut self) -> Result<CriterionResult> {
        let replicas = pick(self.opts.tier, 4000, 10_000);
        let grid = [25usize, 50, 100, 200];
        let cases = [(binary_gaussian(), 1.5, 0.431853), (mixed((3, 5), (2, 5)), 0.5, 0.348144)];
        let mut rows = Vec::new();
        let mut passed = true;
        let mut shown = Vec::new();
        for (k, (law, x, expected)) in cases.into_iter().enumerate() {
            let rep = ldp_rate_with(&law, x, &grid, replicas, child_seed(self.opts.seed, 50 + k as u64), suite_opts())?;
            let rel = rep.slope / rep.psi_star - 1.0;
            passed &= rel.abs() <= 0.10 && (rep.psi_star - expected).abs() < 1e-5;
            shown.push(format!("{:.4} vs {:.4} ({:+.1}%)", rep.slope, rep.psi_star, 100.0 * rel));
            rows.push(json!({"law": law.kind().as_str(), "x": x, "slope": rep.slope, "psi_star": rep.psi_star, "relative_error": rel}));
        }
        Ok(CriterionResult {
            id: 6,
            name: "large deviation rate",
            passed,
            tolerance: "|slope / psi*(x) - 1| <= 0.10".into(),
            summary: format!("slopes {}", shown.join(", ")),
            measured: Value::Array(rows),
        })
    }

    fn overshoot(&mut self) -> Result<CriterionResult> {
        let replicas = pick(self.opts.tier, 20_000, 100_000);
        let r = conditioned_overshoot_with(&binary_gaussian(), 1.5, 100, replicas, child_seed(self.opts.seed, 60), suite_opts())?;
        let target = 1.0 / 1.5;
        let mean_ok = (r.mean - target).abs() <= 3.0 * r.mean_stderr;
        Ok(CriterionResult {
            id: 7,
            name: "conditioned overshoot",
            passed: mean_ok && !r.ks_reject,
            tolerance: "weighted KS below bootstrap 99% point; |mean - 1/theta| <= 3 se".into(),
            summary: format!(
                "KS {:.4} < {:.4}, mean {:.4}±{:.4} vs {target:.4}, ESS {:.0}",
                r.ks_distance, r.ks_critical_99, r.mean, r.mean_stderr, r.effective_size
            ),
            measured: json!({"ks": r.ks_distance, "ks_critical_99": r.ks_critical_99, "mean": r.mean, "mean_stderr": r.mean_stderr, "effective_size": r.effective_size}),
        })
    }

    fn decoration(&mut self) -> Result<CriterionResult> {
        // mean offspring 3/2 with N(0,1) steps: rate at 1.1 is about 0.2 nats
        let law = ReproductionLaw::mixed_gaussian(vec![(1, Rational::new(1, 2)), (2, Rational::new(1, 2))], 0.0, 1.0)?;
        let theta = 1.1;
        let n = 12;
        let window = 10.0 / theta;
        let target = pick(self.opts.tier, 1000, 3000) as usize;
        let naive = conditioned_extremal(&law, theta, n, target, window, DEFAULT_CAP, child_seed(self.opts.seed, 70))?;
        let opts = AuxOptions { window, keep_atoms: true, ..suite_opts() };
        let dec = sample_decoration_with(&law, theta, n, target, child_seed(self.opts.seed, 71), opts)?;
        let a: Vec<_> = dec.samples.iter().map(|s| s.atoms.clone()).collect();
        let b: Vec<_> = naive.samples.iter().map(|s| s.atoms.clone()).collect();
        let bumps = [
            Bump::triangle(-0.5, 0.5, 1.0)?,
            Bump::triangle(-1.5, 1.0, 1.0)?,
            Bump::new(vec![(-4.0, 0.0), (-3.5, 0.5), (-2.5, 0.5), (-2.0, 0.0)])?,
        ];
        let mut rows = Vec::new();
        let mut passed = true;
        let mut ps = Vec::new();
        for (k, phi) in bumps.iter().enumerate() {
            let r = laplace_compare(&a, &b, phi, 999, child_seed(self.opts.seed, 72 + k as u64))?;
            passed &= r.p_value >= 0.01;
            ps.push(format!("{:.3}", r.p_value));
            rows.push(json!({"phi": phi.points(), "decoration": r.mean_a, "decoration_stderr": r.stderr_a, "naive": r.mean_b, "naive_stderr": r.stderr_b, "p_value": r.p_value}));
        }
        Ok(CriterionResult {
            id: 8,
            name: "decoration vs conditioned forward",
            passed,
            tolerance: "permutation p-value >= 0.01 for each of 3 bumps".into(),
            summary: format!("p-values {}; acceptance {:.4} (spinal) {:.4} (naive)", ps.join(", "), dec.acceptance_rate, naive.acceptance_rate),
            measured: json!({"bumps": rows, "spinal_acceptance": dec.acceptance_rate, "naive_acceptance": naive.acceptance_rate, "samples": target}),
        })
    }

    fn finiteness(&mut self) -> Result<CriterionResult> {
        let sub = atom_count_profile(&mixed((3, 5), (2, 5)), 1.0, &[200, 400], pick(self.opts.tier, 5000, 20_000), child_seed(self.opts.seed, 80))?;
        let crit = atom_count_profile(&mixed((1, 2), (1, 2)), 1.0, &[200, 400], pick(self.opts.tier, 500, 2000), child_seed(self.opts.seed, 81))?;
        let diff = |r: &crate::decoration::ProfileReport| {
            let (a, b) = (&r.points[0], &r.points[1]);
            (b.mean - a.mean, combined(a.stderr, b.stderr))
        };
        let (ds, ss) = diff(&sub);
        let (dc, sc) = diff(&crit);
        let plateau = ds.abs() < 3.0 * ss;
        let growth = dc > 3.0 * sc;
        Ok(CriterionResult {
            id: 9,
            name: "finiteness of the auxiliary process",
            passed: plateau && growth,
            tolerance: "subcritical |m400 - m200| < 3 se; critical m400 - m200 > 3 se".into(),
            summary: format!(
                "subcritical {:.3} -> {:.3} (diff {ds:+.3}±{ss:.3}); critical {:.1} -> {:.1} (diff {dc:+.1}±{sc:.1})",
                sub.points[0].mean, sub.points[1].mean, crit.points[0].mean, crit.points[1].mean
            ),
            measured: json!({"subcritical": sub.points, "critical": crit.points}),
        })
    }

    fn many_to_one(&mut self) -> Result<CriterionResult> {
        let law = binary_gaussian();
        let seed = self.opts.seed;
        // additive martingale at theta = 1, where its variance stays small
        let psi1 = law.log_laplace(1.0)?;
        let agg = run_replicas(child_seed(seed, 90), domain::FORWARD, 10_000, |_, rng| {
            let gens = run_forward(&law, 5, DEFAULT_CAP, rng);
            match additive_martingale(&gens[5], 1.0, psi1) {
                Ok(w) => Replica::exact(w),
                Err(_) => Replica::Invalid,
            }
        })?;
        let w_mean = agg.moments.mean;
        let w_se = agg.moments.stderr();
        let w_ok = (w_mean - 1.0).abs() <= 3.0 * w_se;

        // E Z_10([12, inf)) through two different tilts
        let m1 = mean_count(&law, 1.0, 10, 12.0, 100_000, child_seed(seed, 91))?;
        let m2 = mean_count(&law, 1.5, 10, 12.0, 100_000, child_seed(seed, 92))?;
        let tilt_ok = (m1.mean - m2.mean).abs() <= 3.0 * combined(m1.stderr, m2.stderr);

        // first spine step
        let theta = 1.5;
        let cum = self.cumulants(&law, theta)?;
        let sampler = SpineSampler::new(&law, theta)?;
        let steps: Vec<f64> = (0..100_000u64)
            .map(|i| sampler.sample_step(&law, &mut derive_stream(child_seed(seed, 93), i)))
            .collect();
        let m = Moments::from_slice(&steps);
        let var = m.variance();
        let m4 = steps.iter().map(|s| (s - m.mean).powi(4)).sum::<f64>() / steps.len() as f64;
        let var_se = ((m4 - var * var) / steps.len() as f64).sqrt();
        let mean_ok = (m.mean - cum.psi_prime).abs() <= 3.0 * m.stderr();
        let var_ok = (var - cum.sigma2).abs() <= 3.0 * var_se;

        // Legendre duality at x = psi'(theta)
        let dual = law.legendre(cum.psi_prime)?;
        let dual_theta = dual.maximizer.interior().unwrap_or(f64::NAN);
        let dual_ok = (dual_theta - theta).abs() < 1e-6 && (dual.value - (theta * cum.psi_prime - cum.psi)).abs() < 1e-9;

        Ok(CriterionResult {
            id: 10,
            name: "martingale and many-to-one",
            passed: w_ok && tilt_ok && mean_ok && var_ok && dual_ok,
            tolerance: "each identity within 3 se; Legendre maximizer at psi'(theta) equals theta to 1e-6".into(),
            summary: format!(
                "E W_5 = {w_mean:.4}±{w_se:.4}; counts {:.4e} / {:.4e}; E S_1 = {:.4} vs {:.4}; Var S_1 = {var:.4} vs {:.4}; dual theta {dual_theta:.7}",
                m1.mean, m2.mean, m.mean, cum.psi_prime, cum.sigma2
            ),
            measured: json!({
                "martingale_mean": w_mean, "martingale_stderr": w_se,
                "count_theta_1": m1.mean, "count_theta_1_stderr": m1.stderr,
                "count_theta_1_5": m2.mean, "count_theta_1_5_stderr": m2.stderr,
                "step_mean": m.mean, "psi_prime": cum.psi_prime, "step_variance": var, "sigma2": cum.sigma2,
                "dual_theta": dual_theta, "dual_value": dual.value,
            }),
        })
    }

    fn determinism(&mut self) -> Result<CriterionResult> {
        let seed = self.opts.seed;
        let args = |cmd: &str| -> Vec<String> {
            let mut v: Vec<String> = vec!["brwld".into(), cmd.into(), "--law".into(), "kind=fixed_gaussian b=2 mean=0 sd=1".into()];
            v.extend(["--theta", "1.5", "--n", "20", "--replicas", "2000", "--seed"].map(String::from));
            v.push(seed.to_string());
            v
        };
        let mut same = true;
        for cmd in ["tail", "ctheta", "overshoot"] {
            let a = super::cli::render_without_timing(&args(cmd))?;
            let b = super::cli::render_without_timing(&args(cmd))?;
            same &= a == b;
        }
        // block partials of a real run, merged in shuffled order
        let law = binary_gaussian();
        let partials: Vec<Partial> = (0..16u64)
            .map(|b| {
                let mut p = Partial { index: b, ..Partial::default() };
                for i in 0..200 {
                    let mut rng = derive_stream(child_seed(seed, 100), b * 200 + i);
                    p.moments.push(sampler_step(&law, &mut rng));
                }
                p
            })
            .collect();
        let reference = aggregate(&partials)?;
        let mut rng = derive_stream(child_seed(seed, 101), 0);
        let mut permutation_ok = true;
        for _ in 0..20 {
            let mut shuffled = partials.clone();
            for i in (1..shuffled.len()).rev() {
                shuffled.swap(i, rng.random_range(0..=i));
            }
            let agg = aggregate(&shuffled)?;
            permutation_ok &= agg.moments.mean.to_bits() == reference.moments.mean.to_bits()
                && agg.moments.m2.to_bits() == reference.moments.m2.to_bits();
        }
        // lane count must not matter
        let on_threads = |threads: usize| -> Result<String> {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
            let est = pool.install(|| spinal_tail_with(&law, 1.5, 30, 45.0, 3000, child_seed(seed, 102), suite_opts()))?;
            Ok(super::report::to_json_string(&serde_json::to_value(&est).expect("serializable")))
        };
        let threads_ok = on_threads(1)? == on_threads(3)?;
        Ok(CriterionResult {
            id: 11,
            name: "determinism",
            passed: same && permutation_ok && threads_ok,
            tolerance: "byte-identical output on rerun and across thread counts; bit-identical aggregate under permutation".into(),
            summary: format!("reruns identical: {same}; 1 vs 3 threads identical: {threads_ok}; permuted aggregates identical: {permutation_ok}"),
            measured: json!({"reruns_identical": same, "thread_count_invariant": threads_ok, "permutation_invariant": permutation_ok}),
        })
    }
}

fn sampler_step(law: &ReproductionLaw, rng: &mut super::Stream) -> f64 {
    let mut brood = Vec::new();
    law.sample_brood(rng, &mut brood);
    brood.iter().sum()
}

/// Runs the selected criteria in order.
pub fn run_validate(opts: &ValidateOptions) -> Result<ValidateReport> {
    run_validate_with(opts, |_| {})
}

/// As [`run_validate`], calling `on_result` as each criterion finishes.
pub fn run_validate_with(opts: &ValidateOptions, mut on_result: impl FnMut(&CriterionResult)) -> Result<ValidateReport> {
    type Check = fn(&mut Suite) -> Result<CriterionResult>;
    let checks: [(u8, Check); 11] = [
        (1, Suite::unbiasedness),
        (2, Suite::gw),
        (3, Suite::llt),
        (4, Suite::consistency),
        (5, Suite::c_bounds),
        (6, Suite::ldp),
        (7, Suite::overshoot),
        (8, Suite::decoration),
        (9, Suite::finiteness),
        (10, Suite::many_to_one),
        (11, Suite::determinism),
    ];
    let mut suite = Suite { opts: opts.clone(), c_cache: None };
    let mut criteria = Vec::new();
    let mut timing = BTreeMap::new();
    for (id, check) in checks {
        if !opts.only.is_empty() && !opts.only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let result = check(&mut suite)?;
        timing.insert(format!("criterion_{id:02}"), start.elapsed().as_secs_f64());
        on_result(&result);
        criteria.push(result);
    }
    Ok(ValidateReport {
        tier: opts.tier,
        seed: opts.seed,
        psi_prime_offset: opts.psi_prime_offset,
        all_passed: criteria.iter().all(|c| c.passed),
        criteria,
        timing,
    })
}
