use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::catastrophe::{full_resolvent_direct, phi_direct, CatastropheRows, MIN_REAL_FREQUENCY};
use crate::error::Error;
use crate::first_catastrophe::{
    cdf, delta_transforms, density, density_horizon, density_quadrature, density_raw, limit_values, moments,
    moments_single_type, FirstCatastropheReport, SingleType,
};
use crate::model::{CatastropheRates, RateSchedule, TruncationPolicy};
use crate::resolvent::{hat_resolvent_derivative, hat_resolvent_row_at_level, hat_resolvent_rows, Frequency};
use crate::simulate::{estimate_first_catastrophe, sample_first_catastrophes, Estimate, SimulationSummary};
use crate::transient::{transition_row_direct, transition_row_formula, TransientRow};

use super::config::{RunConfig, TransitionMethod};
use super::output::{write_json, write_rows, Format};
use super::Failure;

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::InvalidFrequency { .. } | Error::RequiresCatastrophe => {
                Failure::Constraint(e.to_string())
            }
            _ => Failure::Numeric(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

struct Context<'a> {
    config: &'a RunConfig,
    schedule: &'a RateSchedule,
    cat: CatastropheRates,
    policy: TruncationPolicy,
    format: Format,
}

impl<'a> Context<'a> {
    fn new(config: &'a RunConfig, default_format: Format) -> Result<Self, Failure> {
        let report = config.model.validate();
        if !report.is_ok() {
            let list: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
            return Err(Failure::Constraint(list.join("; ")));
        }
        let policy = config.numerics.truncation;
        policy.validate()?;
        Ok(Context {
            config,
            schedule: &config.model.rates,
            cat: config.model.catastrophes(),
            policy,
            format: config.output.format.unwrap_or(default_format),
        })
    }

    fn rows<T: Serialize>(&self, rows: &[T], headers: &[&str]) -> Result<(), Failure> {
        Ok(write_rows(rows, headers, self.format, self.config.output.path.as_deref())?)
    }
}

#[derive(Serialize)]
struct ValidationOutput {
    ok: bool,
    violations: Vec<String>,
}

pub fn validate(config: &RunConfig) -> Result<(), Failure> {
    let report = config.model.validate();
    let mut violations: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
    if let Err(e) = config.numerics.truncation.validate() {
        violations.push(e.to_string());
    }
    let out = ValidationOutput {
        ok: violations.is_empty(),
        violations: violations.clone(),
    };
    let path = config.output.path.as_deref();
    match config.output.format.unwrap_or(Format::Json) {
        Format::Json => write_json(&out, path)?,
        Format::Csv => {
            let rows: Vec<(&str,)> = violations.iter().map(|v| (v.as_str(),)).collect();
            write_rows(&rows, &["violation"], Format::Csv, path)?
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(Failure::Constraint(violations.join("; ")))
    }
}

#[derive(Serialize)]
struct TransitionOutputRow {
    t: f64,
    n: usize,
    p_formula: Option<f64>,
    p_direct: Option<f64>,
    abs_diff: Option<f64>,
}

pub fn transition(config: &RunConfig) -> Result<(), Failure> {
    let cx = Context::new(config, Format::Csv)?;
    let j = config.task.start();
    let method = config.task.method();
    let quad = config.numerics.quadrature;
    let levels = config.task.levels();
    let per_time: Vec<(f64, Option<TransientRow>, Option<TransientRow>)> = config
        .task
        .times()
        .par_iter()
        .map(|&t| -> Result<_, Error> {
            let formula = matches!(method, TransitionMethod::Formula | TransitionMethod::Both)
                .then(|| transition_row_formula(cx.schedule, &cx.cat, j, t, &cx.policy, &quad))
                .transpose()?;
            let direct = matches!(method, TransitionMethod::Direct | TransitionMethod::Both)
                .then(|| transition_row_direct(cx.schedule, &cx.cat, j, t, &cx.policy))
                .transpose()?;
            Ok((t, formula, direct))
        })
        .collect::<Result<_, _>>()?;

    let mut rows = Vec::new();
    for (t, formula, direct) in &per_time {
        for &n in &levels {
            let p_formula = formula.as_ref().map(|r| r.get(n));
            let p_direct = direct.as_ref().map(|r| r.get(n));
            let abs_diff = p_formula.zip(p_direct).map(|(a, b)| (a - b).abs());
            rows.push(TransitionOutputRow {
                t: *t,
                n,
                p_formula,
                p_direct,
                abs_diff,
            });
        }
    }
    cx.rows(&rows, &["t", "n", "p_formula", "p_direct", "abs_diff"])
}

#[derive(Serialize)]
struct ResolventOutputRow {
    n: usize,
    hat_re: f64,
    hat_im: f64,
    full_re: f64,
    full_im: f64,
    absorbed_re: f64,
    absorbed_im: f64,
}

pub fn resolvent(config: &RunConfig) -> Result<(), Failure> {
    let cx = Context::new(config, Format::Csv)?;
    let j = config.task.start();
    let f = config.task.frequency();
    let s = Frequency::new(Complex64::new(f.re, f.im))?;
    if s.is_real() && f.re < MIN_REAL_FREQUENCY {
        return Err(Failure::Constraint(format!(
            "real frequency {} is below {MIN_REAL_FREQUENCY}; use the catastrophe command for s -> 0",
            f.re
        )));
    }
    let levels = config.task.levels();
    let top = levels.iter().copied().max().unwrap_or(0);
    let hat = hat_resolvent_rows(cx.schedule, &[j], s, &cx.policy, false, top + 1)?.require_converged("hat resolvent row")?;
    let rows = CatastropheRows::new(cx.schedule, &cx.cat, j, s.value(), &cx.policy, false, top + 1)?;
    let out = levels
        .iter()
        .map(|&n| -> Result<_, Error> {
            let (h, p, a) = (hat.value(j, n), rows.pi(j, n), rows.phi(n)?);
            Ok(ResolventOutputRow {
                n,
                hat_re: h.re,
                hat_im: h.im,
                full_re: p.re,
                full_im: p.im,
                absorbed_re: a.re,
                absorbed_im: a.im,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    cx.rows(&out, &["n", "hat_re", "hat_im", "full_re", "full_im", "absorbed_re", "absorbed_im"])
}

#[derive(Serialize)]
struct CatastropheOutputRow {
    j: usize,
    mean: f64,
    second_moment: f64,
    variance: f64,
    p_alpha_first: f64,
    p_beta_first: f64,
}

impl From<&FirstCatastropheReport> for CatastropheOutputRow {
    fn from(r: &FirstCatastropheReport) -> Self {
        CatastropheOutputRow {
            j: r.start,
            mean: r.mean,
            second_moment: r.second_moment,
            variance: r.variance,
            p_alpha_first: r.p_alpha_first,
            p_beta_first: r.p_beta_first,
        }
    }
}

fn require_gamma(cat: &CatastropheRates) -> Result<(), Failure> {
    if cat.has_catastrophe() {
        Ok(())
    } else {
        Err(Error::RequiresCatastrophe.into())
    }
}

pub fn catastrophe(config: &RunConfig) -> Result<(), Failure> {
    let cx = Context::new(config, Format::Csv)?;
    require_gamma(&cx.cat)?;
    let single = if config.task.single_type.unwrap_or(false) {
        Some(config.single_type().ok_or_else(|| {
            Failure::Constraint("the single-type forms need exactly one of alpha, beta to be zero".into())
        })?)
    } else {
        None
    };
    let reports: Vec<FirstCatastropheReport> = config
        .task
        .starts()
        .par_iter()
        .map(|&j| match single {
            Some((which, rate)) => moments_single_type(cx.schedule, rate, which, j, &cx.policy),
            None => moments(cx.schedule, &cx.cat, j, &cx.policy),
        })
        .collect::<Result<_, _>>()?;
    let rows: Vec<CatastropheOutputRow> = reports.iter().map(Into::into).collect();
    cx.rows(&rows, &["j", "mean", "second_moment", "variance", "p_alpha_first", "p_beta_first"])
}

#[derive(Serialize)]
struct DensityOutputRow {
    t: f64,
    density: f64,
    cdf: f64,
}

pub fn density_cmd(config: &RunConfig) -> Result<(), Failure> {
    let cx = Context::new(config, Format::Csv)?;
    require_gamma(&cx.cat)?;
    let j = config.task.start();
    let inv = config.numerics.inversion;
    let quad = config.numerics.quadrature;
    let rows: Vec<DensityOutputRow> = config
        .task
        .times()
        .par_iter()
        .map(|&t| -> Result<_, Error> {
            Ok(DensityOutputRow {
                t,
                density: density(cx.schedule, &cx.cat, j, t, &cx.policy, &inv)?,
                cdf: cdf(cx.schedule, &cx.cat, j, t, &cx.policy, &inv, &quad)?,
            })
        })
        .collect::<Result<_, _>>()?;
    cx.rows(&rows, &["t", "density", "cdf"])
}

#[derive(Serialize)]
struct Comparison {
    mean: f64,
    second_moment: f64,
    variance: f64,
    p_alpha_first: f64,
    p_beta_first: f64,
    z_mean: f64,
    z_second_moment: f64,
    z_variance: f64,
    z_p_alpha_first: f64,
    z_p_beta_first: f64,
}

impl Comparison {
    fn new(a: &FirstCatastropheReport, s: &SimulationSummary) -> Self {
        Comparison {
            mean: a.mean,
            second_moment: a.second_moment,
            variance: a.variance,
            p_alpha_first: a.p_alpha_first,
            p_beta_first: a.p_beta_first,
            z_mean: s.mean_c.z_score(a.mean),
            z_second_moment: s.second_moment_c.z_score(a.second_moment),
            z_variance: s.variance_c.z_score(a.variance),
            z_p_alpha_first: z_or_zero(&s.p_alpha_first, a.p_alpha_first),
            z_p_beta_first: z_or_zero(&s.p_beta_first, a.p_beta_first),
        }
    }

    fn max_abs_z(&self) -> f64 {
        [self.z_mean, self.z_second_moment, self.z_variance, self.z_p_alpha_first, self.z_p_beta_first]
            .iter()
            .map(|z| z.abs())
            .fold(0.0, f64::max)
    }
}

/// Degenerate proportions (all one type) have zero standard error.
fn z_or_zero(e: &Estimate, reference: f64) -> f64 {
    if e.se == 0.0 && (e.value - reference).abs() < 1e-9 {
        0.0
    } else {
        e.z_score(reference)
    }
}

#[derive(Serialize)]
struct SimulateOutput {
    summary: SimulationSummary,
    analytic: Option<Comparison>,
}

#[derive(Serialize)]
struct SimulateRow<'a> {
    quantity: &'a str,
    estimate: f64,
    se: f64,
    analytic: Option<f64>,
    z_score: Option<f64>,
}

/// Abandoned replications above this fraction fail the command.
const MAX_CAP_FRACTION: f64 = 0.01;

pub fn simulate(config: &RunConfig) -> Result<(), Failure> {
    let cx = Context::new(config, Format::Json)?;
    require_gamma(&cx.cat)?;
    let j = config.task.start();
    let summary = estimate_first_catastrophe(cx.schedule, &cx.cat, j, config.task.replications(), config.task.seed())?;
    if summary.cap_exceeded_fraction() > MAX_CAP_FRACTION {
        return Err(Failure::Numeric(format!(
            "{} of {} replications hit the event cap",
            summary.cap_exceeded, summary.replications
        )));
    }
    let analytic = moments(cx.schedule, &cx.cat, j, &cx.policy)?;
    let out = SimulateOutput {
        analytic: Some(Comparison::new(&analytic, &summary)),
        summary,
    };
    let path = config.output.path.as_deref();
    match cx.format {
        Format::Json => write_json(&out, path)?,
        Format::Csv => {
            let s = &out.summary;
            let c = out.analytic.as_ref().expect("analytic values present");
            let row = |quantity, e: &Estimate, a: f64, z: f64| SimulateRow {
                quantity,
                estimate: e.value,
                se: e.se,
                analytic: Some(a),
                z_score: Some(z),
            };
            let rows = [
                row("mean", &s.mean_c, c.mean, c.z_mean),
                row("second_moment", &s.second_moment_c, c.second_moment, c.z_second_moment),
                row("variance", &s.variance_c, c.variance, c.z_variance),
                row("p_alpha_first", &s.p_alpha_first, c.p_alpha_first, c.z_p_alpha_first),
                row("p_beta_first", &s.p_beta_first, c.p_beta_first, c.z_p_beta_first),
            ];
            write_rows(&rows, &["quantity", "estimate", "se", "analytic", "z_score"], Format::Csv, path)?
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
enum Status {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Serialize)]
struct CheckResult {
    name: &'static str,
    status: Status,
    measured: Option<f64>,
    tolerance: f64,
    detail: String,
}

#[derive(Serialize)]
struct CrosscheckOutput {
    passed: bool,
    checks: Vec<CheckResult>,
}

const RESOLVENT_STARTS: [usize; 4] = [0, 1, 2, 5];
const RESOLVENT_FREQUENCIES: [f64; 3] = [0.5, 1.0, 3.0];
const TRANSIENT_STARTS: [usize; 3] = [0, 1, 5];
const TRANSIENT_TIMES: [f64; 3] = [0.5, 2.0, 10.0];
const CDF_TIMES: [f64; 3] = [0.5, 2.0, 5.0];
/// Hard statistical failure threshold in standard errors.
const Z_LIMIT: f64 = 4.0;

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / (b.norm() + 1e-30)
}

fn check(name: &'static str, tolerance: f64, run: impl FnOnce() -> Result<(f64, String), Error>) -> CheckResult {
    match run() {
        Ok((measured, detail)) => CheckResult {
            name,
            status: if measured <= tolerance { Status::Pass } else { Status::Fail },
            measured: Some(measured),
            tolerance,
            detail,
        },
        Err(e) => CheckResult {
            name,
            status: Status::Fail,
            measured: None,
            tolerance,
            detail: e.to_string(),
        },
    }
}

fn skipped(name: &'static str, tolerance: f64) -> CheckResult {
    CheckResult {
        name,
        status: Status::Skipped,
        measured: None,
        tolerance,
        detail: "skipped (gamma = 0)".into(),
    }
}

fn resolvent_checks(cx: &Context) -> Vec<CheckResult> {
    let (sched, cat, policy) = (cx.schedule, &cx.cat, &cx.policy);
    let grid: Vec<(usize, f64)> = RESOLVENT_STARTS
        .iter()
        .flat_map(|&j| RESOLVENT_FREQUENCIES.iter().map(move |&s| (j, s)))
        .collect();
    let mut out = Vec::new();

    out.push(check("full-resolvent-vs-direct-solve", 1e-9, || {
        let mut worst: f64 = 0.0;
        for &(j, s) in &grid {
            let freq = Frequency::real(s)?;
            let direct = full_resolvent_direct(sched, cat, j, freq, policy)?.require_converged("full resolvent row")?;
            let rows = CatastropheRows::new(sched, cat, j, freq.value(), policy, false, 11)?;
            for n in 0..=10 {
                worst = worst.max(rel(rows.pi(j, n), direct.entry(n)));
            }
        }
        Ok((worst, "max relative error over j in {0,1,2,5}, n <= 10, s in {0.5,1,3}".into()))
    }));

    out.push(check("absorbed-resolvent-three-routes", 1e-9, || {
        let mut worst: f64 = 0.0;
        for &(j, s) in &grid {
            let freq = Frequency::real(s)?;
            let direct = phi_direct(sched, cat, j, freq, policy)?;
            direct.block.clone().require_converged("absorbed resolvent row")?;
            let rows = CatastropheRows::new(sched, cat, j, freq.value(), policy, false, 11)?;
            for n in 0..=10 {
                let a = rows.phi(n)?;
                worst = worst.max(rel(a, direct.block.entry(n)));
                worst = worst.max(rel(rows.phi_via_fg(n, true)?, a));
            }
        }
        Ok((worst, "max relative disagreement among the three routes".into()))
    }));

    out.push(check("absorbed-resolvent-honesty", 1e-8, || {
        let mut worst: f64 = 0.0;
        for &(j, s) in &grid {
            let v = phi_direct(sched, cat, j, Frequency::real(s)?, policy)?;
            v.block.clone().require_converged("absorbed resolvent row")?;
            worst = worst.max((v.total_mass() - 1.0).norm());
        }
        Ok((worst, "max |s * total mass - 1|".into()))
    }));

    let factors = || -> Result<Vec<_>, Error> {
        grid.iter()
            .map(|&(j, s)| crate::catastrophe::factors(sched, cat, j, Frequency::real(s)?, policy))
            .collect()
    };
    out.push(check("h-two-forms", 1e-10, || {
        let worst = factors()?
            .iter()
            .map(|f| rel(f.h_from_hat, f.h_from_full))
            .fold(0.0, f64::max);
        Ok((worst, "max relative difference of the two H forms".into()))
    }));
    out.push(check("u-v-identities", 1e-9, || {
        let worst = factors()?
            .iter()
            .map(|f| {
                let (ru, rv) = f.identity_residuals(cat);
                let s = f.frequency;
                let scale_u = (s * f.u).norm().max(1e-300);
                let scale_v = (s * f.v).norm().max(1e-300);
                if cat.has_catastrophe() {
                    (ru.norm() / scale_u).max(rv.norm() / scale_v)
                } else {
                    ru.norm().max(rv.norm())
                }
            })
            .fold(0.0, f64::max);
        Ok((worst, "max relative residual of the U/V identities".into()))
    }));

    out.push(check("hat-derivative-vs-differences", 1e-6, || {
        let mut worst: f64 = 0.0;
        let level = policy.initial_level.max(32);
        for k in 0..20 {
            let s = 0.25 + 0.25 * k as f64;
            let (j, n) = (k % 4, (3 * k) % 7);
            let h = 1e-5 * s;
            let plus = hat_resolvent_row_at_level(sched, j, Frequency::real(s + h)?, level)?.entry(n);
            let minus = hat_resolvent_row_at_level(sched, j, Frequency::real(s - h)?, level)?.entry(n);
            let fd = (plus - minus) / (2.0 * h);
            let exact = {
                let set = crate::resolvent::hat_resolvent_rows_at_level(sched, &[j], Frequency::real(s)?, level, true)?;
                set.derivative(j, n)
            };
            worst = worst.max(rel(fd, exact));
        }
        // the converged entry point must agree with the fixed-level one
        let a = hat_resolvent_derivative(sched, 0, 0, Frequency::real(1.0)?, policy)?;
        let b = crate::resolvent::hat_resolvent_rows_at_level(sched, &[0], Frequency::real(1.0)?, level, true)?
            .derivative(0, 0);
        worst = worst.max(rel(a, b));
        Ok((worst, "max relative error on 20 probe points".into()))
    }));
    out
}

fn transition_checks(cx: &Context) -> Vec<CheckResult> {
    let quad = cx.config.numerics.quadrature;
    let results: Vec<Result<(f64, f64), Error>> = TRANSIENT_STARTS
        .iter()
        .flat_map(|&j| TRANSIENT_TIMES.iter().map(move |&t| (j, t)))
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&(j, t)| {
            let a = transition_row_formula(cx.schedule, &cx.cat, j, t, &cx.policy, &quad)?;
            let b = transition_row_direct(cx.schedule, &cx.cat, j, t, &cx.policy)?;
            let n = a.probabilities.len().max(b.probabilities.len());
            let sup = (0..n).map(|k| (a.get(k) - b.get(k)).abs()).fold(0.0, f64::max);
            let sums = (a.sum() - 1.0).abs().max((b.sum() - 1.0).abs());
            Ok((sup, sums))
        })
        .collect();
    let first_error = results.iter().find_map(|r| r.as_ref().err().cloned());
    let collect = |pick: fn(&(f64, f64)) -> f64| -> Result<(f64, String), Error> {
        if let Some(e) = &first_error {
            return Err(e.clone());
        }
        let worst = results.iter().flatten().map(pick).fold(0.0, f64::max);
        Ok((worst, "j in {0,1,5}, t in {0.5,2,10}".into()))
    };
    vec![
        check("transition-formula-vs-direct", 1e-6, || collect(|r| r.0)),
        check("transition-row-sums", 1e-6, || collect(|r| r.1)),
    ]
}

fn catastrophe_checks(cx: &Context) -> Vec<CheckResult> {
    let names = [
        ("delta-sum-identity", 1e-12),
        ("delta-near-zero", 1e-4),
        ("type-probabilities-sum", 1e-9),
        ("phi-derivative-at-zero", 1e-5),
        ("single-type-reduction", 1e-8),
        ("moments-vs-simulation", Z_LIMIT),
        ("density-nonnegative", 1e-6),
        ("density-mass", 2e-3),
        ("cdf-vs-simulation", Z_LIMIT),
    ];
    if !cx.cat.has_catastrophe() {
        return names.iter().map(|&(n, t)| skipped(n, t)).collect();
    }
    let (sched, cat, policy) = (cx.schedule, &cx.cat, &cx.policy);
    let mut out = Vec::new();

    out.push(check("delta-sum-identity", 1e-12, || {
        let mut worst: f64 = 0.0;
        for &j in &RESOLVENT_STARTS {
            for s in [Complex64::new(0.5, 0.0), Complex64::new(1.0, 0.0), Complex64::new(3.0, 0.0), Complex64::new(0.4, 2.5)] {
                worst = worst.max(delta_transforms(sched, cat, j, Frequency::new(s)?, policy)?.sum_defect());
            }
        }
        Ok((worst, "max |delta_alpha + delta_beta - delta|".into()))
    }));
    out.push(check("delta-near-zero", 1e-4, || {
        let mut worst: f64 = 0.0;
        for &j in &RESOLVENT_STARTS {
            let t = delta_transforms(sched, cat, j, Frequency::real(1e-6)?, policy)?;
            worst = worst.max((t.delta - 1.0).norm());
        }
        Ok((worst, "max |delta(1e-6) - 1|".into()))
    }));

    let reports: Vec<Result<FirstCatastropheReport, Error>> =
        TRANSIENT_STARTS.par_iter().map(|&j| moments(sched, cat, j, policy)).collect();
    out.push(check("type-probabilities-sum", 1e-9, || {
        let mut worst: f64 = 0.0;
        for r in &reports {
            let r = r.as_ref().map_err(Clone::clone)?;
            worst = worst.max((r.p_alpha_first + r.p_beta_first - 1.0).abs());
        }
        Ok((worst, "max |p_alpha + p_beta - 1|".into()))
    }));
    out.push(check("phi-derivative-at-zero", 1e-5, || {
        let mut worst: f64 = 0.0;
        for &j in &TRANSIENT_STARTS {
            worst = worst.max(limit_values(sched, cat, j, policy)?.derivative_mismatch());
        }
        Ok((worst, "chain rule vs central differences, relative".into()))
    }));
    out.push(check("single-type-reduction", 1e-8, || {
        let rate = cat.gamma();
        let mut worst: f64 = 0.0;
        for (which, reduced) in [
            (SingleType::AlphaOnly, CatastropheRates::new(rate, 0.0)),
            (SingleType::BetaOnly, CatastropheRates::new(0.0, rate)),
        ] {
            for &j in &TRANSIENT_STARTS {
                let a = moments(sched, &reduced, j, policy)?;
                let b = moments_single_type(sched, rate, which, j, policy)?;
                worst = worst
                    .max((a.mean - b.mean).abs() / b.mean)
                    .max((a.second_moment - b.second_moment).abs() / b.second_moment);
            }
        }
        Ok((worst, format!("single rate {rate}, relative")))
    }));

    let reps = cx.config.task.replications();
    let seed = cx.config.task.seed();
    out.push(check("moments-vs-simulation", Z_LIMIT, || {
        let mut worst: f64 = 0.0;
        for (r, &j) in reports.iter().zip(&TRANSIENT_STARTS) {
            let r = r.as_ref().map_err(Clone::clone)?;
            let s = estimate_first_catastrophe(sched, cat, j, reps, seed)?;
            worst = worst.max(Comparison::new(r, &s).max_abs_z());
        }
        Ok((worst, format!("max |z| over mean, moments and type probabilities, {reps} replications")))
    }));

    let j = cx.config.task.start();
    let inv = cx.config.numerics.inversion;
    out.push(check("density-nonnegative", 1e-6, || {
        let values: Vec<f64> = (1..=200)
            .into_par_iter()
            .map(|k| density_raw(sched, cat, j, 0.1 * k as f64, policy, &inv).map(|r| r.value))
            .collect::<Result<_, _>>()?;
        let worst = values.iter().fold(0.0f64, |m, &v| m.max(-v));
        Ok((worst, "largest negative excursion on t in (0, 20]".into()))
    }));
    out.push(check("density-mass", 2e-3, || {
        let report = moments(sched, cat, j, policy)?;
        let horizon = density_horizon(&report);
        let mass = cdf(sched, cat, j, horizon, policy, &inv, &density_quadrature())?;
        Ok(((mass - 1.0).abs(), format!("integral over [0, {horizon:.1}]")))
    }));
    out.push(check("cdf-vs-simulation", Z_LIMIT, || {
        let samples = sample_first_catastrophes(sched, cat, j, reps, seed);
        let n = samples.iter().flatten().count() as f64;
        let mut worst: f64 = 0.0;
        for t in CDF_TIMES {
            let p = samples.iter().flatten().filter(|(c, _)| *c <= t).count() as f64 / n;
            let se = (p * (1.0 - p) / n).sqrt();
            let analytic = cdf(sched, cat, j, t, policy, &inv, &density_quadrature())?;
            worst = worst.max((analytic - p).abs() / se);
        }
        Ok((worst, "max |z| at t in {0.5, 2, 5}".into()))
    }));
    out
}

pub fn crosscheck(config: &RunConfig) -> Result<(), Failure> {
    let cx = Context::new(config, Format::Json)?;
    let mut checks = resolvent_checks(&cx);
    checks.extend(transition_checks(&cx));
    checks.extend(catastrophe_checks(&cx));
    let failed: Vec<&str> = checks.iter().filter(|c| c.status == Status::Fail).map(|c| c.name).collect();
    let out = CrosscheckOutput {
        passed: failed.is_empty(),
        checks,
    };
    let path = config.output.path.as_deref();
    match cx.format {
        Format::Json => write_json(&out, path)?,
        Format::Csv => write_rows(&out.checks, &["name", "status", "measured", "tolerance", "detail"], Format::Csv, path)?,
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Crosscheck(format!("failed checks: {}", failed.join(", "))))
    }
}
