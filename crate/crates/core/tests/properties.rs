//! Randomized invariants across the crate.

mod common;

use lindcycle::cycle::{find_limit_cycle, monodromy_spectrum, Classification};
use lindcycle::lindblad::{analyze_span, diagonal_part, lambda_at, DissipationChannel, LindbladGenerator};
use lindcycle::models::{self, builtin, random_protocol, ModelSpec, BUILTIN_NAMES};
use lindcycle::operator::entropy::relative_entropy;
use lindcycle::operator::expm::matrix_exp;
use lindcycle::operator::{hs_inner, subspace_inf_norm, trace_norm, DensityMatrix, Domain, HermitianOp};
use lindcycle::propagation::{
    cptp_check_map, monodromy_with, propagate_interval, propagate_interval_with, propagate_with_snapshots,
    PeriodSampler, PropagationOptions,
};
use lindcycle::{sample_rng, Protocol, SliceRule, SuperOp};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::Rng;

fn builtins() -> Vec<ModelSpec> {
    BUILTIN_NAMES.iter().map(|n| builtin(n).unwrap()).collect()
}

fn generator_superop(p: &Protocol, t: f64) -> DMatrix<f64> {
    p.generator_at(t).unwrap().to_superop(false).into_matrix()
}

fn random_hermitian_channels(d: usize, k: usize, rng: &mut impl Rng) -> LindbladGenerator {
    let chans = (0..k)
        .map(|_| DissipationChannel::new(HermitianOp::random(d, rng).into_matrix(), rng.random_range(0.2..2.0)).unwrap())
        .collect();
    LindbladGenerator::new(HermitianOp::random(d, rng), chans).unwrap()
}

fn random_general_channels(d: usize, k: usize, rng: &mut impl Rng) -> LindbladGenerator {
    let chans = (0..k)
        .map(|_| DissipationChannel::new(common::gaussian(d, d, rng), rng.random_range(0.2..2.0)).unwrap())
        .collect();
    LindbladGenerator::new(HermitianOp::random(d, rng), chans).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn holder_pair(seed in any::<u64>(), d in 2usize..=4) {
        let mut rng = sample_rng(seed, 0);
        let x = HermitianOp::random(d, &mut rng);
        let y = HermitianOp::random(d, &mut rng);
        let lhs = hs_inner(&x, &y).unwrap().abs();
        let rhs = trace_norm(&x).unwrap() * subspace_inf_norm(&y, Domain::Full).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-14, "{lhs} > {rhs}");
    }

    #[test]
    fn traceless_norm_is_a_norm(seed in any::<u64>(), d in 2usize..=4, s in -5.0f64..5.0) {
        let mut rng = sample_rng(seed, 0);
        let x = HermitianOp::random_traceless(d, &mut rng);
        let y = HermitianOp::random_traceless(d, &mut rng);
        let n = |a: &HermitianOp| subspace_inf_norm(a, Domain::Traceless).unwrap();
        let sum = &x + &y;
        prop_assert!(n(&sum) <= n(&x) + n(&y) + 1e-12);
        prop_assert!((n(&x.scale(s)) - s.abs() * n(&x)).abs() <= 1e-12 * (1.0 + n(&x)));
        prop_assert!(n(&x) > 0.0);
    }

    #[test]
    fn density_spectrum_sums_to_one(seed in any::<u64>(), d in 2usize..=4, pure in any::<bool>()) {
        let mut rng = sample_rng(seed, 0);
        let rho = if pure { DensityMatrix::random_pure(d, &mut rng) } else { DensityMatrix::random(d, &mut rng) };
        let sum: f64 = rho.op().eig().unwrap().values.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn relative_entropy_vanishes_only_on_equal_states(seed in any::<u64>(), d in 2usize..=4, eps in 0.0f64..1e-3) {
        let mut rng = sample_rng(seed, 0);
        let rho = DensityMatrix::random(d, &mut rng);
        prop_assert!(relative_entropy(&rho, &rho).unwrap().abs() <= 1e-10);
        // a nearby state, then an unrelated one
        let mix = DensityMatrix::new(
            &rho.op().scale(1.0 - eps) + &DensityMatrix::random(d, &mut rng).op().scale(eps),
        ).unwrap();
        for sigma in [mix, DensityMatrix::random(d, &mut rng)] {
            let dist = trace_norm(&(rho.op() - sigma.op())).unwrap();
            let s = relative_entropy(&rho, &sigma).unwrap();
            // Pinsker: S ≥ ½‖ρ − σ‖₁²
            prop_assert!(s >= 0.5 * dist * dist - 1e-12, "S = {s}, distance {dist}");
            if dist > 1e-8 {
                prop_assert!(s > 0.0);
            }
        }
    }

    #[test]
    fn exponential_semigroup(seed in any::<u64>(), n in 2usize..=9, s in 0.0f64..1.0, t in 0.0f64..1.0) {
        let mut rng = sample_rng(seed, 0);
        let raw = common::gaussian(n, n, &mut rng);
        let norm = rng.random_range(0.0..10.0);
        let m = &raw * Complex64::new(norm / raw.norm(), 0.0);
        let lhs = matrix_exp(&m, s).unwrap() * matrix_exp(&m, t).unwrap();
        let rhs = matrix_exp(&m, s + t).unwrap();
        let scale = rhs.iter().map(|z| z.norm()).fold(1.0, f64::max);
        prop_assert!((lhs - &rhs).camax() <= 1e-9 * scale);
    }

    #[test]
    fn span_verdicts_survive_recombination(seed in any::<u64>(), d in 2usize..=3, hermitian in any::<bool>()) {
        let mut rng = sample_rng(seed, 0);
        let gen = if hermitian {
            random_hermitian_channels(d, 3, &mut rng)
        } else {
            random_general_channels(d, 3, &mut rng)
        };
        let ch = gen.channels();
        let scaled = |k: usize| ch[k].operator() * Complex64::new(ch[k].rate().sqrt(), 0.0);
        let (a, b) = (scaled(0), scaled(1));
        // rates folded into the operators; the ±-combinations at rate ½ give the same generator
        let recombined = vec![
            DissipationChannel::new(&a + &b, 0.5).unwrap(),
            DissipationChannel::new(&a - &b, 0.5).unwrap(),
            ch[2].clone(),
        ];
        let other = LindbladGenerator::new(gen.hamiltonian().clone(), recombined).unwrap();
        let (x, y) = (analyze_span(&gen), analyze_span(&other));
        prop_assert_eq!(x.span_dim, y.span_dim);
        prop_assert_eq!(x.self_adjoint, y.self_adjoint);
        prop_assert_eq!(x.irreducible, y.irreducible);
        prop_assert!((gen.to_superop(false).matrix() - other.to_superop(false).matrix()).amax() < 1e-12);
    }

    #[test]
    fn random_protocols_are_periodic(seed in any::<u64>(), d in 2usize..=3, t in 0.0f64..1.0) {
        let p = random_protocol(d, &mut sample_rng(seed, 0)).unwrap();
        let t = t * p.period();
        let diff = (generator_superop(&p, t) - generator_superop(&p, t + p.period())).amax();
        prop_assert!(diff <= 1e-12, "{diff}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn adjoint_propagator_is_transpose(seed in any::<u64>(), d in 2usize..=3, a in 0.0f64..0.5, b in 0.5f64..1.5) {
        let p = random_protocol(d, &mut sample_rng(seed, 0)).unwrap();
        let (t0, t1) = (a * p.period(), b * p.period());
        let fwd = propagate_interval(&p, t0, t1, 64, false).unwrap();
        let adj = propagate_interval(&p, t0, t1, 64, true).unwrap();
        prop_assert!((fwd.matrix().transpose() - adj.matrix()).amax() <= 1e-10);
    }

    #[test]
    fn propagators_compose_and_shift(seed in any::<u64>(), d in 2usize..=3, frac in 0.05f64..0.95) {
        let p = random_protocol(d, &mut sample_rng(seed, 0)).unwrap();
        let opts = PropagationOptions::with_slices(64);
        let period = p.period();
        // split at a segment boundary so both sides use the same slice grid
        let (_, mid) = p.segment_bounds(0);
        let whole = propagate_interval_with(&p, 0.0, period, &opts, false).unwrap();
        let left = propagate_interval_with(&p, 0.0, mid, &opts, false).unwrap();
        let right = propagate_interval_with(&p, mid, period, &opts, false).unwrap();
        let composed = right.matrix() * left.matrix();
        prop_assert!((whole.matrix() - composed).amax() <= 1e-9);

        let t = frac * period;
        let base = propagate_interval_with(&p, 0.0, t, &opts, false).unwrap();
        let shifted = propagate_interval_with(&p, period, period + t, &opts, false).unwrap();
        prop_assert!((base.matrix() - shifted.matrix()).amax() <= 1e-9);
    }

    #[test]
    fn remainder_generates_a_semigroup(seed in any::<u64>(), d in 2usize..=3) {
        let gen = random_hermitian_channels(d, 2, &mut sample_rng(seed, 0));
        check_remainder(&gen)?;
    }
}

fn check_remainder(gen: &LindbladGenerator) -> Result<(), TestCaseError> {
    let analysis = analyze_span(gen);
    if !analysis.self_adjoint || !(analysis.b_min > 0.0) {
        return Ok(());
    }
    let full = gen.to_superop(false);
    let diag = diagonal_part(gen, &analysis).unwrap();
    let remainder = full.matrix() - diag.matrix();
    prop_assert!((diag.matrix() + &remainder - full.matrix()).amax() <= 1e-14);
    let step = matrix_exp(&remainder, 1e-3).unwrap();
    let report = cptp_check_map(&SuperOp::from_matrix(gen.dim(), step, Domain::Full).unwrap()).unwrap();
    prop_assert!(report.trace_defect <= 1e-10, "trace defect {}", report.trace_defect);
    prop_assert!(report.choi_min_eigenvalue >= -1e-8, "Choi min {}", report.choi_min_eigenvalue);
    Ok(())
}

#[test]
fn remainder_of_builtin_generators() {
    for spec in builtins() {
        let p = &spec.protocol;
        for k in 0..16 {
            let t = p.period() * (k as f64 + 0.5) / 16.0;
            check_remainder(&p.generator_at(t).unwrap()).unwrap();
        }
    }
}

#[test]
fn positive_rate_implies_irreducible() {
    let mut gens: Vec<LindbladGenerator> = Vec::new();
    for spec in builtins() {
        let p = &spec.protocol;
        gens.extend((0..16).map(|k| p.generator_at(p.period() * (k as f64 + 0.5) / 16.0).unwrap()));
    }
    let mut rng = sample_rng(11, 0);
    for _ in 0..50 {
        gens.push(random_hermitian_channels(3, 1, &mut rng));
        gens.push(random_general_channels(3, 2, &mut rng));
    }
    let mut positives = 0;
    for gen in &gens {
        let lambda = lambda_at(gen).unwrap();
        if lambda > 0.0 {
            positives += 1;
            assert!(analyze_span(gen).irreducible);
        }
    }
    assert!(positives > 0);
}

#[test]
fn shipped_protocols_are_periodic() {
    for spec in builtins().into_iter().filter(|s| s.protocol.is_periodic()) {
        let p = &spec.protocol;
        for k in 0..32 {
            let t = p.period() * (k as f64 + 0.37) / 32.0;
            assert!((generator_superop(p, t) - generator_superop(p, t + p.period())).amax() <= 1e-12, "{}", spec.name);
        }
    }
}

#[test]
fn evolution_keeps_states_physical() {
    let opts = PropagationOptions::default();
    for spec in builtins() {
        let p = &spec.protocol;
        let d = p.dim();
        let states: Vec<DensityMatrix> = (0..50).map(|k| DensityMatrix::random(d, &mut sample_rng(5, k))).collect();
        let maps: Vec<SuperOp> = if p.is_periodic() {
            let sampler = PeriodSampler::new(p, 16, &opts).unwrap();
            let m = sampler.monodromy().superop().clone();
            let mut out = Vec::new();
            let mut lead = SuperOp::identity(d);
            for _ in 0..3 {
                for j in 0..sampler.times().len() {
                    out.push(sampler.within(j).compose(&lead).unwrap());
                }
                lead = m.compose(&lead).unwrap();
            }
            out
        } else {
            let times: Vec<f64> = (0..=24).map(|k| p.period() * k as f64 / 24.0).collect();
            propagate_with_snapshots(p, 0.0, p.period(), &times, &opts).unwrap().1
        };
        for map in &maps {
            for rho in &states {
                let out = map.apply(rho.op()).unwrap();
                let ev = out.eig().unwrap().values;
                assert!(ev[0] >= -1e-8, "{}: min eigenvalue {}", spec.name, ev[0]);
                assert!((out.trace() - 1.0).abs() <= 1e-9, "{}: trace {}", spec.name, out.trace());
            }
        }
    }
}

fn monodromy_change(p: &Protocol, n: usize, rule: SliceRule) -> f64 {
    let at = |spu| {
        let opts = PropagationOptions { slices_per_unit: spu, rule };
        monodromy_with(p, &opts).unwrap().into_superop().into_matrix()
    };
    common::max_entry_diff(&at(n), &at(2 * n))
}

#[test]
fn right_endpoint_slicing_is_first_order() {
    let p = builtin("driven_qubit").unwrap().protocol;
    let pts: Vec<(f64, f64)> =
        [64, 128, 256, 512].iter().map(|&n| (n as f64, monodromy_change(&p, n, SliceRule::RightEndpoint))).collect();
    let slope = -common::log_log_slope(&pts);
    assert!((0.8..=1.2).contains(&slope), "slope {slope}, {pts:?}");
}

#[test]
fn midpoint_slicing_is_second_order() {
    let p = builtin("driven_qubit").unwrap().protocol;
    let pts: Vec<(f64, f64)> =
        [64, 128, 256, 512].iter().map(|&n| (n as f64, monodromy_change(&p, n, SliceRule::Midpoint))).collect();
    let slope = -common::log_log_slope(&pts);
    assert!((1.8..=2.2).contains(&slope), "slope {slope}, {pts:?}");
}

#[test]
fn monodromy_spectra_lie_in_the_unit_disk() {
    let opts = PropagationOptions::default();
    for spec in builtins().into_iter().filter(|s| s.protocol.is_periodic()) {
        let report = monodromy_spectrum(&spec.protocol, &opts).unwrap();
        assert!(report.max_modulus() <= 1.0 + 1e-8, "{}", spec.name);
        assert!(report.unit_eigenvalue_count >= 1, "{}", spec.name);
    }
    let mut rng = sample_rng(3, 0);
    for _ in 0..10 {
        let p = random_protocol(3, &mut rng).unwrap();
        assert!(monodromy_spectrum(&p, &opts).unwrap().max_modulus() <= 1.0 + 1e-8);
    }
}

#[test]
fn limit_cycle_anchor_is_a_fixed_point() {
    let opts = PropagationOptions::default();
    let mut protocols: Vec<Protocol> = ["driven_qubit", "repaired"].iter().map(|n| builtin(n).unwrap().protocol).collect();
    protocols.push(models::build_driven_qubit(1.0, 0.4, 1.3, 1.0).unwrap().protocol);
    for p in protocols {
        let cycle = find_limit_cycle(&p, &opts, 8).unwrap();
        assert_eq!(cycle.spectrum.classification, Classification::UniqueCycle);
        let m = monodromy_with(&p, &opts).unwrap();
        let image = m.apply(cycle.anchor.op()).unwrap();
        assert!(trace_norm(&(&image - cycle.anchor.op())).unwrap() <= 1e-9);
        assert!(cycle.periodicity_residual <= 1e-8);
    }
}

#[test]
fn models_round_trip_through_json() {
    let mut specs = builtins();
    let mut rng = sample_rng(17, 0);
    for k in 0..10 {
        specs.push(ModelSpec {
            name: format!("random_{k}"),
            protocol: random_protocol(2 + k % 3, &mut rng).unwrap(),
            expected: None,
        });
    }
    for spec in specs {
        let first = serde_json::to_string(&spec).unwrap();
        let parsed: ModelSpec = serde_json::from_str(&first).unwrap();
        assert_eq!(parsed, spec, "{}", spec.name);
        assert_eq!(serde_json::to_string(&parsed).unwrap(), first, "{}", spec.name);
    }
}
