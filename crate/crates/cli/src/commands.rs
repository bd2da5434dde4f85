//! The subcommands. Each returns whether its verdict was positive.

use anyhow::{Context, Result};
use clap::ValueEnum;
use lindcycle::cycle::{
    find_limit_cycle, fixed_point_power, hypothesis_windows, relaxation_probe, relaxing_certificate, spectrum_with,
    Classification,
};
use lindcycle::lindblad::rate_profile;
use lindcycle::models::{self, verify_expectations, ModelSpec};
use lindcycle::operator::entropy::relative_entropy;
use lindcycle::operator::{hs_inner, trace_distance, DensityMatrix, HermitianOp};
use lindcycle::propagation::{monodromy_with, stroboscopic, PeriodSampler};
use lindcycle::sample_rng;

use crate::config::{usage, Settings, StateSpec};
use crate::output::{ensure_dir, num, write_csv, Report};

/// Power-iteration budget when no unique cycle exists.
const REFERENCE_ITERATION_CAP: usize = 100_000;
/// Rate grid for the convergent-schedule integral in the quasi-periodic demo.
const INTEGRAL_SAMPLES: usize = 40_001;
/// Distance below which two states count as relaxed onto each other.
const RELAXED_DISTANCE: f64 = 1e-6;
/// Minimum trace-norm separation of the two counterexample cycles.
const SEPARATION: f64 = 1e-3;

fn require_periodic(spec: &ModelSpec, command: &str) -> Result<()> {
    if spec.protocol.is_periodic() {
        Ok(())
    } else {
        Err(usage(format!("'{command}' needs a periodic protocol; '{}' is a one-shot schedule", spec.name)))
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

pub fn check(s: &Settings) -> Result<bool> {
    let p = &s.model.protocol;
    ensure_dir(&s.out)?;
    let meta = s.metadata("check");
    let windows = hypothesis_windows(p, s.samples)?;
    let rows: Vec<Vec<String>> = windows
        .iter()
        .map(|w| vec![num(w.start), num(w.end), num(w.length()), num(w.min_rate)])
        .collect();
    write_csv(&s.out.join("windows.csv"), &meta, &["start", "end", "length", "min_rate"], &rows)?;

    let mut r = Report::new(&meta);
    r.line(format!("period: {}", p.period()));
    if windows.is_empty() {
        r.line("no window with a self-adjoint, irreducible span and positive rate");
    }
    let longest = windows.iter().copied().max_by(|a, b| a.length().total_cmp(&b.length()));
    for w in &windows {
        let tag = if Some(*w) == longest { " (largest)" } else { "" };
        r.line(format!("window [{}, {}]: tau = {}, Lambda = {}{tag}", w.start, w.end, w.length(), w.min_rate));
    }
    let satisfied = longest.is_some();
    if let Some(w) = longest {
        r.line(format!("tau = {}", w.length()));
        r.line(format!("Lambda = {}", w.min_rate));
    }
    r.line(format!("THEOREM2: {}", if satisfied { "SATISFIED" } else { "NOT-SATISFIED" }));
    r.finish(&s.out)?;
    Ok(satisfied)
}

pub fn rates(s: &Settings) -> Result<bool> {
    let p = &s.model.protocol;
    ensure_dir(&s.out)?;
    let meta = s.metadata("rates");
    let profile = rate_profile(p, 0.0, p.period(), s.samples)?;
    let rows: Vec<Vec<String>> = profile
        .iter()
        .map(|x| {
            vec![num(x.t), num(x.lambda), x.span_dim.to_string(), yes_no(x.self_adjoint).into(), yes_no(x.irreducible).into()]
        })
        .collect();
    write_csv(&s.out.join("rates.csv"), &meta, &["t", "lambda", "span_dim", "self_adjoint", "irreducible"], &rows)?;

    let mut r = Report::new(&meta);
    let lambda_min = profile.iter().map(|x| x.lambda).fold(f64::INFINITY, f64::min);
    let lambda_max = profile.iter().map(|x| x.lambda).fold(0.0, f64::max);
    r.line(format!("Lambda over [0, {}] = {}", p.period(), lambda_min));
    r.line(format!("largest lambda = {lambda_max}"));
    if let Some(h) = s.horizon {
        let cert = relaxing_certificate(p, h, s.samples)?;
        r.line(format!("integral of lambda over [0, {h}] = {}", cert.integral));
        r.line(format!("divergence statistic = {:e}", cert.divergence_statistic));
        r.line(format!(
            "relaxing: {}",
            if cert.relaxing_certified { "certified (integral diverges)" } else { "not certified (integral finite so far)" }
        ));
    }
    r.finish(&s.out)?;
    Ok(true)
}

pub fn cycle(s: &Settings) -> Result<bool> {
    require_periodic(&s.model, "cycle")?;
    let p = &s.model.protocol;
    ensure_dir(&s.out)?;
    let meta = s.metadata("cycle");
    let m = monodromy_with(p, &s.propagation)?;
    let report = spectrum_with(m.superop(), &s.tolerances.spectral())?;
    let rows: Vec<Vec<String>> = report
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, z)| vec![k.to_string(), num(z.re), num(z.im), num(z.norm()), num(z.arg())])
        .collect();
    write_csv(&s.out.join("spectrum.csv"), &meta, &["index", "re", "im", "modulus", "phase"], &rows)?;

    let mut r = Report::new(&meta);
    r.line(format!("classification: {}", report.classification));
    r.line(format!("unit eigenvalues: {}", report.unit_eigenvalue_count));
    r.line(format!("peripheral eigenvalues: {}", report.peripheral_count));
    r.line(format!("second modulus: {}", report.second_modulus));
    r.line(format!("gap: {}", report.gap));
    let mut ok = report.classification == Classification::UniqueCycle;
    if ok {
        let lc = find_limit_cycle(p, &s.propagation, s.points_per_period)?;
        let d = p.dim();
        let mut header: Vec<String> = vec!["t".into()];
        header.extend((0..d).map(|i| format!("p{i}")));
        for i in 0..d {
            for j in i + 1..d {
                header.push(format!("re{i}{j}"));
                header.push(format!("im{i}{j}"));
            }
        }
        let mut samples = lc.samples.clone();
        samples.push((p.period(), lc.anchor.clone()));
        let rows: Vec<Vec<String>> = samples
            .iter()
            .map(|(t, rho)| {
                let m = rho.op().matrix();
                let mut row = vec![num(*t)];
                row.extend((0..d).map(|i| num(m[(i, i)].re)));
                for i in 0..d {
                    for j in i + 1..d {
                        row.push(num(m[(i, j)].re));
                        row.push(num(m[(i, j)].im));
                    }
                }
                row
            })
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        write_csv(&s.out.join("cycle.csv"), &meta, &header, &rows)?;
        r.line(format!("periodicity residual: {:e}", lc.periodicity_residual));
        r.line(format!("dual-method discrepancy: {:e} ({} power iterations)", lc.dual_method_discrepancy, lc.power_iterations));
        ok = lc.periodicity_residual <= s.tolerances.periodicity_residual
            && lc.dual_method_discrepancy <= s.tolerances.dual_method;
    } else {
        r.line("no unique limit cycle; cycle.csv not written");
    }
    r.line(format!("verdict: {}", if ok { "UNIQUE LIMIT CYCLE" } else { "NO UNIQUE LIMIT CYCLE" }));
    r.finish(&s.out)?;
    Ok(ok)
}

fn initial_state(spec: &StateSpec, d: usize, seed: u64, anchor: &HermitianOp) -> Result<DensityMatrix> {
    Ok(match spec {
        StateSpec::MaximallyMixed => DensityMatrix::maximally_mixed(d),
        StateSpec::Random => DensityMatrix::random(d, &mut sample_rng(seed, 0)),
        StateSpec::BasisState(k) if *k < d => DensityMatrix::basis_state(d, *k),
        StateSpec::BasisState(k) => return Err(usage(format!("rho0: basis state {k} out of range for dimension {d}"))),
        StateSpec::Matrix(repr) => {
            let op: HermitianOp = repr.clone().try_into().map_err(|e| usage(format!("rho0: {e}")))?;
            DensityMatrix::new(op).map_err(|e| usage(format!("rho0: {e}")))?
        }
        StateSpec::Anchor => DensityMatrix::clip(anchor, 1e-9)?,
    })
}

pub fn evolve(s: &Settings) -> Result<bool> {
    require_periodic(&s.model, "evolve")?;
    let p = &s.model.protocol;
    let d = p.dim();
    ensure_dir(&s.out)?;
    let meta = s.metadata("evolve");
    let sampler = PeriodSampler::new(p, s.points_per_period, &s.propagation)?;
    let m = sampler.monodromy().superop();
    let spectrum = spectrum_with(m, &s.tolerances.spectral())?;
    // the unique cycle when there is one, otherwise the fixed point reached from 𝟙/d
    let (anchor, reference) = if spectrum.classification == Classification::UniqueCycle {
        let lc = find_limit_cycle(p, &s.propagation, s.points_per_period)?;
        (lc.anchor.op().clone(), "limit cycle")
    } else {
        let start = DensityMatrix::maximally_mixed(d);
        let (x, _) = fixed_point_power(m, start.op(), lindcycle::cycle::POWER_ITERATION_TOLERANCE, REFERENCE_ITERATION_CAP)?;
        (x, "fixed point reached from the maximally mixed state")
    };
    let rho0 = initial_state(&s.rho0, d, s.seed, &anchor)?;
    let traj = sampler.trajectory(rho0.op(), s.periods)?;
    let cyc = sampler.trajectory(&anchor, s.periods)?;
    let mut rows = Vec::with_capacity(traj.len());
    let mut strobe = Vec::with_capacity(s.periods + 1);
    let per = sampler.times().len();
    for (k, ((t, x), (_, y))) in traj.iter().zip(&cyc).enumerate() {
        let rho = DensityMatrix::clip(x, 1e-8)?;
        let sigma = DensityMatrix::clip(y, 1e-8)?;
        let dist = trace_distance(&rho, &sigma)?;
        let entropy = relative_entropy(&rho, &sigma)?;
        if k % per == 0 {
            strobe.push(dist);
        }
        rows.push(vec![num(*t), num(dist), num(entropy)]);
    }
    write_csv(&s.out.join("evolve.csv"), &meta, &["t", "trace_distance", "relative_entropy"], &rows)?;

    let monotone = strobe.windows(2).all(|w| w[1] <= w[0] + s.tolerances.monotone_slack);
    let last = *strobe.last().expect("at least one stroboscopic point");
    let mut r = Report::new(&meta);
    r.line(format!("classification: {}", spectrum.classification));
    r.line(format!("reference: {reference}"));
    r.line(format!("initial trace distance: {}", strobe[0]));
    r.line(format!("final trace distance after {} periods: {last:e}", s.periods));
    r.line(format!("stroboscopic distance non-increasing: {}", yes_no(monotone)));
    let ok = monotone && last <= s.tolerances.distance_threshold;
    r.line(format!(
        "verdict: {}",
        if ok { "CONVERGED" } else { "NOT CONVERGED" }
    ));
    r.finish(&s.out)?;
    Ok(ok)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Demo {
    Counterexample,
    Repaired,
    Quasiperiodic,
}

struct Tally<'a> {
    report: &'a mut Report,
    failures: Vec<String>,
}

impl Tally<'_> {
    fn record(&mut self, what: &str, pass: bool, detail: &str) {
        self.report.line(format!("{}: {what} ({detail})", if pass { "PASS" } else { "FAIL" }));
        if !pass {
            self.failures.push(what.to_string());
        }
    }

    fn expectations(&mut self, spec: &ModelSpec, s: &Settings) -> Result<()> {
        for c in verify_expectations(spec, &s.propagation, s.samples, s.seed)? {
            self.record(&format!("{} {}", spec.name, c.name), c.pass, &c.detail);
        }
        Ok(())
    }
}

pub fn demo(which: Demo, s: &Settings) -> Result<bool> {
    ensure_dir(&s.out)?;
    let name = format!("{which:?}").to_lowercase();
    let meta = s.metadata(&format!("demo {name}"));
    let mut report = Report::new(&meta);
    let mut tally = Tally { report: &mut report, failures: Vec::new() };
    match which {
        Demo::Counterexample => {
            for spec in [models::builtin("counterexample")?, models::builtin("counterexample_asymmetric")?] {
                tally.expectations(&spec, s)?;
                // populations of |1⟩ and |2⟩ differ in tr(Qρ), so their cycles must differ
                let m = monodromy_with(&spec.protocol, &s.propagation)?;
                let ends: Vec<HermitianOp> = [0, 1]
                    .iter()
                    .map(|&k| {
                        let rho = DensityMatrix::basis_state(4, k);
                        stroboscopic(m.superop(), rho.op(), s.periods).map(|v| v.last().cloned().expect("non-empty"))
                    })
                    .collect::<lindcycle::Result<_>>()?;
                let q = models::counterexample_conserved();
                let gap = lindcycle::operator::trace_norm(&(&ends[0] - &ends[1]))?;
                let detail = format!(
                    "tr(Q rho) = {:.6} vs {:.6}, separation {gap:.6} after {} periods",
                    hs_inner(&q, &ends[0])?,
                    hs_inner(&q, &ends[1])?,
                    s.periods
                );
                tally.record(&format!("{} distinct cycles", spec.name), gap >= SEPARATION, &detail);
            }
        }
        Demo::Repaired => {
            let spec = models::builtin("repaired")?;
            tally.expectations(&spec, s)?;
            let lc = find_limit_cycle(&spec.protocol, &s.propagation, s.points_per_period)?;
            tally.record(
                "repaired periodicity residual",
                lc.periodicity_residual <= s.tolerances.periodicity_residual,
                &format!("{:e}", lc.periodicity_residual),
            );
        }
        Demo::Quasiperiodic => {
            let div = models::builtin("quasiperiodic_divergent")?;
            let conv = models::builtin("quasiperiodic_convergent")?;
            tally.expectations(&div, s)?;
            tally.expectations(&conv, s)?;
            let horizon = div.protocol.period();
            let (d0, d1) = relaxation_probe(&div.protocol, horizon, s.seed, &s.propagation)?;
            tally.record(
                "quasiperiodic_divergent relaxation",
                d1 <= RELAXED_DISTANCE,
                &format!("trace distance {d0:.4} -> {d1:.3e} by t = {horizon}"),
            );
            let h = conv.protocol.period();
            let cert = relaxing_certificate(&conv.protocol, h, INTEGRAL_SAMPLES)?;
            let exact = models::convergent_rate_integral(h);
            tally.record(
                "quasiperiodic_convergent integral",
                (cert.integral - exact).abs() <= 1e-6,
                &format!("{:.9} vs closed form {exact:.9}", cert.integral),
            );
        }
    }
    let failures = std::mem::take(&mut tally.failures);
    let ok = failures.is_empty();
    if ok {
        report.line(format!("demo {name}: PASS"));
    } else {
        report.line(format!("demo {name}: FAIL ({})", failures.join("; ")));
    }
    report.finish(&s.out).context("writing demo report")?;
    Ok(ok)
}
