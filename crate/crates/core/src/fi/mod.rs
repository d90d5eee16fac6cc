//! Fault-free execution and single-bit fault-injection campaigns.
//!
//! A campaign runs the program once fault-free to obtain the golden outputs
//! and trace, then repeatedly picks an injection point (instruction instance
//! first, then one of its operands, then a bit), re-executes with that bit
//! flipped and classifies the run as success, SDC or interruption.

mod machine;

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use machine::{
    execute, format_bindings, parse_bindings, Bindings, ExecError, ExecutionOutcome, Machine,
    Status, MEMORY_CELLS,
};

use crate::ir::{Program, Value};
use crate::par::{derive_seed, map_indexed, Schedule};
use crate::trace::Trace;

/// Default hang budget, as a multiple of the golden run's step count.
pub const DEFAULT_BUDGET_FACTOR: u64 = 100;
/// Default campaign size.
pub const DEFAULT_CAMPAIGN_SIZE: usize = 3000;
/// Default relative tolerance used to verify float outputs.
pub const DEFAULT_TOLERANCE: f64 = 1e-6;
/// Step limit for golden runs when no explicit budget is given.
pub const GOLDEN_STEP_LIMIT: u64 = 50_000_000;

static INJECTIONS: AtomicU64 = AtomicU64::new(0);

/// Number of faulty executions performed by this process so far.
pub fn injections_performed() -> u64 {
    INJECTIONS.load(Ordering::Relaxed)
}

/// A single-bit fault target: operand `operand_slot` (inputs first, then the
/// output) of dynamic instruction `dyn_index`, bit `bit_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct InjectionPoint {
    pub dyn_index: usize,
    pub operand_slot: usize,
    pub bit_index: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Manifestation {
    Success,
    Sdc,
    Interruption,
}

impl fmt::Display for Manifestation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Manifestation::Success => "success",
            Manifestation::Sdc => "sdc",
            Manifestation::Interruption => "interruption",
        })
    }
}

/// Result-verification rule applied to completed runs whose outputs differ
/// from the golden outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verifier {
    /// Bit-exact comparison only.
    Exact,
    /// Floats may differ from golden by at most this relative amount;
    /// integers and pointers must match exactly.
    RelativeTolerance(f64),
    AcceptAll,
}

impl Default for Verifier {
    fn default() -> Self {
        Verifier::RelativeTolerance(DEFAULT_TOLERANCE)
    }
}

impl Verifier {
    pub fn accepts(&self, outputs: &[Value], golden: &[Value]) -> bool {
        match *self {
            Verifier::AcceptAll => true,
            Verifier::Exact => outputs == golden,
            Verifier::RelativeTolerance(tol) => {
                outputs.len() == golden.len()
                    && outputs.iter().zip(golden).all(|(o, g)| match (o, g) {
                        _ if o == g => true,
                        (Value::F64(_), Value::F64(_)) => {
                            let (o, g) = (o.as_f64().unwrap(), g.as_f64().unwrap());
                            o.is_finite()
                                && g.is_finite()
                                && (o - g).abs() <= tol * g.abs().max(f64::MIN_POSITIVE)
                                || (g == 0.0 && o.abs() <= tol)
                        }
                        _ => false,
                    })
            }
        }
    }
}

/// Classifies a run against the golden run.
pub fn classify(
    outcome: &ExecutionOutcome,
    golden: &ExecutionOutcome,
    verifier: Verifier,
) -> Manifestation {
    if outcome.status != Status::Completed {
        return Manifestation::Interruption;
    }
    if outcome.outputs == golden.outputs || verifier.accepts(&outcome.outputs, &golden.outputs) {
        Manifestation::Success
    } else {
        Manifestation::Sdc
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CampaignError {
    #[error(transparent)]
    Exec(#[from] ExecError),
    #[error("golden run did not complete: {0:?}")]
    GoldenFailed(Status),
    #[error("trace has no injectable operand bits")]
    EmptyTrace,
    #[error("injection point {0:?} is out of range for this execution")]
    PointOutOfRange(InjectionPoint),
    #[error("campaign size must be at least 1")]
    ZeroRuns,
}

/// The injectable instruction instances of a golden trace.
#[derive(Debug, Clone)]
pub struct InjectionSpace {
    /// (dynamic index, operand widths) of every instance with at least one
    /// injectable operand.
    sites: Vec<(usize, Vec<u32>)>,
}

impl InjectionSpace {
    pub fn new(trace: &Trace) -> InjectionSpace {
        let sites = trace
            .records()
            .enumerate()
            .filter(|(_, r)| r.opcode.is_injectable() && !r.operands.is_empty())
            .map(|(i, r)| (i, r.operands.iter().map(|o| o.width).collect()))
            .collect();
        InjectionSpace { sites }
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn instance_count(&self) -> usize {
        self.sites.len()
    }

    pub fn total_bits(&self) -> u64 {
        self.sites
            .iter()
            .flat_map(|(_, w)| w)
            .map(|&w| w as u64)
            .sum()
    }

    /// Every point with its probability under instruction-first sampling.
    pub fn enumerate(&self) -> impl Iterator<Item = (InjectionPoint, f64)> + '_ {
        let p_site = 1.0 / self.sites.len() as f64;
        self.sites.iter().flat_map(move |(dyn_index, widths)| {
            let p_slot = p_site / widths.len() as f64;
            widths.iter().enumerate().flat_map(move |(slot, &w)| {
                (0..w).map(move |bit| {
                    (
                        InjectionPoint {
                            dyn_index: *dyn_index,
                            operand_slot: slot,
                            bit_index: bit,
                        },
                        p_slot / w as f64,
                    )
                })
            })
        })
    }

    /// Instance uniformly, then operand uniformly, then bit uniformly.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> InjectionPoint {
        let (dyn_index, widths) = &self.sites[rng.random_range(0..self.sites.len())];
        let operand_slot = rng.random_range(0..widths.len());
        let bit_index = rng.random_range(0..widths[operand_slot]);
        InjectionPoint {
            dyn_index: *dyn_index,
            operand_slot,
            bit_index,
        }
    }

    fn contains(&self, p: &InjectionPoint) -> bool {
        self.sites
            .binary_search_by_key(&p.dyn_index, |(i, _)| *i)
            .ok()
            .and_then(|k| self.sites[k].1.get(p.operand_slot))
            .is_some_and(|&w| p.bit_index < w)
    }
}

/// Draws one injection point from a trace.
pub fn sample_injection<R: Rng + ?Sized>(
    trace: &Trace,
    rng: &mut R,
) -> Result<InjectionPoint, CampaignError> {
    let space = InjectionSpace::new(trace);
    if space.is_empty() {
        return Err(CampaignError::EmptyTrace);
    }
    Ok(space.sample(rng))
}

/// Per-class outcome fractions of a campaign.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifestationRates {
    pub success: f64,
    pub sdc: f64,
    pub interruption: f64,
    pub n: u64,
    pub counts: [u64; 3],
}

impl ManifestationRates {
    pub fn from_counts(counts: [u64; 3]) -> ManifestationRates {
        let n: u64 = counts.iter().sum();
        let rate = |c: u64| if n == 0 { 0.0 } else { c as f64 / n as f64 };
        ManifestationRates {
            success: rate(counts[0]),
            sdc: rate(counts[1]),
            interruption: rate(counts[2]),
            n,
            counts,
        }
    }

    pub fn from_outcomes(outcomes: &[Manifestation]) -> ManifestationRates {
        let mut counts = [0u64; 3];
        for m in outcomes {
            counts[*m as usize] += 1;
        }
        Self::from_counts(counts)
    }
}

impl fmt::Display for ManifestationRates {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "n={} success={} sdc={} interruption={}",
            self.n, self.success, self.sdc, self.interruption
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CampaignConfig {
    pub n: usize,
    pub seed: u64,
    /// Hang threshold in dynamic instructions; `None` means
    /// [`DEFAULT_BUDGET_FACTOR`] times the golden step count.
    pub step_budget: Option<u64>,
    pub verifier: Verifier,
    pub schedule: Schedule,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            n: DEFAULT_CAMPAIGN_SIZE,
            seed: 0,
            step_budget: None,
            verifier: Verifier::default(),
            schedule: Schedule::default(),
        }
    }
}

/// A program prepared for injection: lowered once, golden run cached.
#[derive(Debug, Clone)]
pub struct Campaign {
    machine: Machine,
    inputs: Bindings,
    golden: ExecutionOutcome,
    space: InjectionSpace,
    budget: u64,
    verifier: Verifier,
}

impl Campaign {
    pub fn new(
        program: &Program,
        inputs: &Bindings,
        step_budget: Option<u64>,
        verifier: Verifier,
    ) -> Result<Campaign, CampaignError> {
        let machine = Machine::new(program)?;
        machine.check_bindings(inputs)?;
        let golden_budget = step_budget.unwrap_or(GOLDEN_STEP_LIMIT);
        let golden = machine.run(inputs, golden_budget, None, true);
        if golden.status != Status::Completed {
            return Err(CampaignError::GoldenFailed(golden.status));
        }
        let space = InjectionSpace::new(golden.trace.as_ref().expect("traced"));
        let budget = step_budget.unwrap_or(golden.steps.saturating_mul(DEFAULT_BUDGET_FACTOR));
        Ok(Campaign {
            machine,
            inputs: inputs.clone(),
            golden,
            space,
            budget,
            verifier,
        })
    }

    pub fn golden(&self) -> &ExecutionOutcome {
        &self.golden
    }

    pub fn golden_trace(&self) -> &Trace {
        self.golden.trace.as_ref().expect("golden run is traced")
    }

    pub fn space(&self) -> &InjectionSpace {
        &self.space
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    /// Executes with one bit flipped and returns the full outcome.
    pub fn run_point(
        &self,
        point: InjectionPoint,
        record_trace: bool,
    ) -> Result<ExecutionOutcome, CampaignError> {
        if !self.space.contains(&point) {
            return Err(CampaignError::PointOutOfRange(point));
        }
        INJECTIONS.fetch_add(1, Ordering::Relaxed);
        Ok(self
            .machine
            .run(&self.inputs, self.budget, Some(point), record_trace))
    }

    pub fn inject(&self, point: InjectionPoint) -> Result<Manifestation, CampaignError> {
        let outcome = self.run_point(point, false)?;
        Ok(classify(&outcome, &self.golden, self.verifier))
    }

    /// Manifestation of run `index` of a campaign seeded with `seed`.
    pub fn run_index(&self, seed: u64, index: u64) -> Manifestation {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, index));
        let point = self.space.sample(&mut rng);
        self.inject(point).expect("sampled points are in range")
    }

    pub fn run(
        &self,
        n: usize,
        seed: u64,
        schedule: Schedule,
    ) -> Result<ManifestationRates, CampaignError> {
        if n == 0 {
            return Err(CampaignError::ZeroRuns);
        }
        if self.space.is_empty() {
            return Err(CampaignError::EmptyTrace);
        }
        let outcomes = map_indexed(n, schedule, |i| self.run_index(seed, i as u64));
        Ok(ManifestationRates::from_outcomes(&outcomes))
    }
}

/// Re-executes with a single bit flipped at `point` and classifies the run.
pub fn inject_and_execute(
    program: &Program,
    inputs: &Bindings,
    point: InjectionPoint,
    step_budget: Option<u64>,
    verifier: Verifier,
) -> Result<Manifestation, CampaignError> {
    Campaign::new(program, inputs, step_budget, verifier)?.inject(point)
}

/// Runs a full campaign of `config.n` injections.
pub fn run_campaign(
    program: &Program,
    inputs: &Bindings,
    config: &CampaignConfig,
) -> Result<ManifestationRates, CampaignError> {
    Campaign::new(program, inputs, config.step_budget, config.verifier)?.run(
        config.n,
        config.seed,
        config.schedule,
    )
}

/// Statistical campaign size for estimating a proportion at the given
/// confidence and margin of error (worst case p = 0.5), with optional
/// finite-population correction.
pub fn required_sample_size(confidence: f64, margin: f64, population: Option<u64>) -> u64 {
    use statrs::distribution::{ContinuousCDF, Normal};
    assert!(
        confidence > 0.0 && confidence < 1.0,
        "confidence must be in (0, 1)"
    );
    assert!(margin > 0.0 && margin < 1.0, "margin must be in (0, 1)");
    let z = Normal::standard().inverse_cdf(1.0 - (1.0 - confidence) / 2.0);
    let mut n = z * z * 0.25 / (margin * margin);
    if let Some(pop) = population {
        n /= 1.0 + (n - 1.0) / pop as f64;
    }
    // guard against 16587.000000001-style float noise
    (n - 1e-9).ceil().max(1.0) as u64
}
