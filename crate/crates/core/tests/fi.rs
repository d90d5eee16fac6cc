mod support;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use resil_core::fi::Bindings;
use resil_core::fi::{
    inject_and_execute, parse_bindings, run_campaign, sample_injection, Campaign, CampaignConfig,
    InjectionPoint, Manifestation, Verifier,
};
use resil_core::ir::{parse_program, Opcode, Program};
use resil_core::par::Schedule;
use resil_core::trace::Trace;

fn sample(name: &str) -> (Program, Bindings) {
    let p = parse_program(&support::read_corpus(&format!("samples/{name}.ir"))).unwrap();
    let b = parse_bindings(&support::read_corpus(&format!("samples/{name}.inputs"))).unwrap();
    (p, b)
}

fn golden_trace(name: &str) -> Trace {
    let (p, b) = sample(name);
    Campaign::new(&p, &b, None, Verifier::Exact)
        .unwrap()
        .golden_trace()
        .clone()
}

#[test]
fn fixed_seed_gives_fixed_point() {
    let t = golden_trace("euclid");
    let a = sample_injection(&t, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
    let b = sample_injection(&t, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn instance_choice_is_uniform() {
    // two instances with very different bit counts: one add, one fadd
    let p = parse_program(
        ".input %a i32\n.input %x f64\n.output %r i32\n.output %y f64\n\
         entry: %r = add %a, 1\n%y = fadd %x, 1.0\noutput %r\noutput %y\nhalt\n",
    )
    .unwrap();
    let b = parse_bindings("%a = 1\n%x = 1.0\n").unwrap();
    let t = Campaign::new(&p, &b, None, Verifier::Exact)
        .unwrap()
        .golden_trace()
        .clone();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let draws = 100_000;
    let mut first = 0usize;
    for _ in 0..draws {
        if sample_injection(&t, &mut rng).unwrap().dyn_index == 0 {
            first += 1;
        }
    }
    let sigma = (draws as f64 * 0.25).sqrt();
    let dev = (first as f64 - draws as f64 / 2.0).abs();
    assert!(dev < 3.0 * sigma, "{first} of {draws}");
    // chi-square with one degree of freedom at the 3-sigma level
    let second = draws - first;
    let e = draws as f64 / 2.0;
    let chi2 = ((first as f64 - e).powi(2) + (second as f64 - e).powi(2)) / e;
    assert!(chi2 < 9.0, "chi2 = {chi2}");
}

#[test]
fn pointer_sign_flip_on_load_interrupts() {
    let (p, b) = sample("array_sum");
    let t = golden_trace("array_sum");
    let dyn_index = t.records().position(|r| r.opcode == Opcode::Load).unwrap();
    let point = InjectionPoint {
        dyn_index,
        operand_slot: 0,
        bit_index: 31,
    };
    let m = inject_and_execute(&p, &b, point, None, Verifier::Exact).unwrap();
    assert_eq!(m, Manifestation::Interruption);
}

#[test]
fn low_mantissa_flip_on_output_float() {
    let (p, b) = sample("euclid");
    let t = golden_trace("euclid");
    let dyn_index = t.records().position(|r| r.opcode == Opcode::Call).unwrap();
    let point = InjectionPoint {
        dyn_index,
        operand_slot: 1,
        bit_index: 0,
    };
    assert_eq!(
        inject_and_execute(&p, &b, point, None, Verifier::Exact).unwrap(),
        Manifestation::Sdc
    );
    // the same flip is well inside a 1e-6 relative tolerance
    assert_eq!(
        inject_and_execute(&p, &b, point, None, Verifier::RelativeTolerance(1e-6)).unwrap(),
        Manifestation::Success
    );
}

#[test]
fn dead_value_flip_is_success() {
    let (p, b) = sample("toy");
    let t = golden_trace("toy");
    // %z = fadd %y, 1.0 is never read
    let dyn_index = t.records().position(|r| r.opcode == Opcode::Fadd).unwrap();
    for bit in 0..64 {
        let point = InjectionPoint {
            dyn_index,
            operand_slot: 2,
            bit_index: bit,
        };
        assert_eq!(
            inject_and_execute(&p, &b, point, None, Verifier::Exact).unwrap(),
            Manifestation::Success
        );
    }
}

#[test]
fn campaigns_are_schedule_independent() {
    let (p, b) = sample("array_sum");
    let mut cfg = CampaignConfig {
        n: 400,
        seed: 9,
        ..CampaignConfig::default()
    };
    cfg.schedule = Schedule::Sequential;
    let seq = run_campaign(&p, &b, &cfg).unwrap();
    cfg.schedule = Schedule::Parallel;
    let par = run_campaign(&p, &b, &cfg).unwrap();
    assert_eq!(seq, par);
    assert_eq!(seq.counts.iter().sum::<u64>(), 400);
    assert!((seq.success + seq.sdc + seq.interruption - 1.0).abs() < 1e-12);
    let other = run_campaign(&p, &b, &CampaignConfig { seed: 10, ..cfg }).unwrap();
    assert_ne!(seq.counts, other.counts);
}

#[test]
fn sampled_rates_approach_exhaustive_rates() {
    let (p, b) = sample("toy");
    let (exact, points) = support::exhaustive_rates(&p, &b, Verifier::default());
    assert!(points <= 2000);
    assert!((exact.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let n = 20_000;
    let got = run_campaign(
        &p,
        &b,
        &CampaignConfig {
            n,
            seed: 3,
            ..CampaignConfig::default()
        },
    )
    .unwrap();
    for (g, e) in [got.success, got.sdc, got.interruption].iter().zip(exact) {
        let sigma = (e * (1.0 - e) / n as f64).sqrt();
        assert!(
            (g - e).abs() <= 3.0 * sigma + 1e-9,
            "sampled {g} vs exact {e}"
        );
    }
}
