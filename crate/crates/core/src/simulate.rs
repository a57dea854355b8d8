//! Event-driven (Gillespie) simulation of the catastrophe process.
//!
//! Replication `i` draws from `ChaCha8Rng` seeded with the master seed and
//! switched to stream `i`, so results do not depend on how replications are
//! spread over threads. Aggregation runs in replication order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CatastropheRates, RateSchedule};

pub const STREAM_PROTOCOL: &str = "chacha8-stream-per-replication-v1";
/// Events after which a replication is abandoned.
pub const EVENT_CAP: usize = 1_000_000;
pub const MIN_REPLICATIONS: usize = 1_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    Birth,
    Death,
    AlphaCatastrophe,
    BetaCatastrophe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathEvent {
    pub time: f64,
    pub kind: EventKind,
    pub state_before: usize,
    pub state_after: usize,
    /// Whether the event changed the state in a way the absorbed chain sees
    /// as a catastrophe.
    pub effective: bool,
}

/// RNG for replication `index` under `master` seed.
pub fn replication_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// One competing-exponential step from `state`.
fn step<R: Rng>(schedule: &RateSchedule, cat: &CatastropheRates, state: usize, rng: &mut R) -> (f64, PathEvent) {
    let birth = schedule.birth(state);
    let death = schedule.death(state);
    let total = birth + death + cat.alpha + cat.beta;
    let dt = -(1.0 - rng.random::<f64>()).ln() / total;
    let u = rng.random::<f64>() * total;
    let (kind, state_after, effective) = if u < birth {
        (EventKind::Birth, state + 1, false)
    } else if u < birth + death {
        (EventKind::Death, state - 1, false)
    } else if u < birth + death + cat.alpha {
        (EventKind::AlphaCatastrophe, 0, state >= 1)
    } else {
        (EventKind::BetaCatastrophe, 1, state != 1)
    };
    let event = PathEvent {
        time: dt,
        kind,
        state_before: state,
        state_after,
        effective,
    };
    (dt, event)
}

/// All events on `(0, horizon]` of a path started at `j`, catastrophes
/// included whether or not they are effective.
pub fn simulate_path<R: Rng>(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    horizon: f64,
    rng: &mut R,
) -> Result<Vec<PathEvent>> {
    if !(horizon > 0.0) {
        return Err(Error::InvalidInput(format!("horizon must be > 0 (got {horizon})")));
    }
    let mut events = Vec::new();
    let (mut t, mut state) = (0.0, j);
    loop {
        let (dt, mut event) = step(schedule, cat, state, rng);
        t += dt;
        if t > horizon {
            return Ok(events);
        }
        event.time = t;
        state = event.state_after;
        events.push(event);
    }
}

/// `(C_j, α-type?)` for one path, or `None` past the event cap.
fn first_effective<R: Rng>(schedule: &RateSchedule, cat: &CatastropheRates, j: usize, rng: &mut R) -> Option<(f64, bool)> {
    let (mut t, mut state) = (0.0, j);
    for _ in 0..EVENT_CAP {
        let (dt, event) = step(schedule, cat, state, rng);
        t += dt;
        if event.effective {
            return Some((t, event.kind == EventKind::AlphaCatastrophe));
        }
        state = event.state_after;
    }
    None
}

fn state_at<R: Rng>(schedule: &RateSchedule, cat: &CatastropheRates, j: usize, t_end: f64, rng: &mut R) -> usize {
    let (mut t, mut state) = (0.0, j);
    loop {
        let (dt, event) = step(schedule, cat, state, rng);
        t += dt;
        if t > t_end {
            return state;
        }
        state = event.state_after;
    }
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Default, Clone, Copy)]
struct Accumulator {
    sum: f64,
    compensation: f64,
}

impl Accumulator {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    /// Standard error.
    pub se: f64,
}

impl Estimate {
    /// `(reference − value) / se`.
    pub fn z_score(&self, reference: f64) -> f64 {
        (reference - self.value) / self.se
    }

    fn proportion(count: u64, n: u64) -> Self {
        let p = count as f64 / n as f64;
        Estimate {
            value: p,
            se: (p * (1.0 - p) / n as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SeedRecord {
    pub master_seed: u64,
    pub protocol: String,
}

impl SeedRecord {
    fn new(master_seed: u64) -> Self {
        SeedRecord {
            master_seed,
            protocol: STREAM_PROTOCOL.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub start: usize,
    pub replications: usize,
    /// Replications abandoned at the event cap (excluded from the estimates).
    pub cap_exceeded: usize,
    pub mean_c: Estimate,
    pub second_moment_c: Estimate,
    pub variance_c: Estimate,
    pub p_alpha_first: Estimate,
    pub p_beta_first: Estimate,
    pub alpha_first_count: u64,
    pub beta_first_count: u64,
    pub seed: SeedRecord,
}

impl SimulationSummary {
    pub fn cap_exceeded_fraction(&self) -> f64 {
        self.cap_exceeded as f64 / self.replications as f64
    }
}

fn check_replications(replications: usize) -> Result<()> {
    if replications < MIN_REPLICATIONS {
        return Err(Error::InvalidInput(format!(
            "replications must be >= {MIN_REPLICATIONS} (got {replications})"
        )));
    }
    Ok(())
}

/// Samples of `C_j` and its type, in replication order.
pub fn sample_first_catastrophes(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    replications: usize,
    seed: u64,
) -> Vec<Option<(f64, bool)>> {
    (0..replications as u64)
        .into_par_iter()
        .map(|i| first_effective(schedule, cat, j, &mut replication_rng(seed, i)))
        .collect()
}

pub fn estimate_first_catastrophe(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    replications: usize,
    seed: u64,
) -> Result<SimulationSummary> {
    if !cat.has_catastrophe() {
        return Err(Error::RequiresCatastrophe);
    }
    check_replications(replications)?;
    let samples = sample_first_catastrophes(schedule, cat, j, replications, seed);

    let mut sums = [Accumulator::default(); 4];
    let (mut n, mut alpha_first) = (0u64, 0u64);
    for &(c, is_alpha) in samples.iter().flatten() {
        let c2 = c * c;
        for (acc, x) in sums.iter_mut().zip([c, c2, c2 * c, c2 * c2]) {
            acc.add(x);
        }
        n += 1;
        alpha_first += u64::from(is_alpha);
    }
    let cap_exceeded = replications - n as usize;
    if n < 2 {
        return Err(Error::InvalidInput("too few replications finished below the event cap".into()));
    }
    let nf = n as f64;
    let [m1, m2, m3, m4] = sums.map(|a| a.total() / nf);
    let var = (m2 - m1 * m1).max(0.0);
    let var_of_square = (m4 - m2 * m2).max(0.0);
    // fourth central moment of C for the variance standard error
    let central4 = m4 - 4.0 * m1 * m3 + 6.0 * m1 * m1 * m2 - 3.0 * m1.powi(4);
    let unbiased = var * nf / (nf - 1.0);
    Ok(SimulationSummary {
        start: j,
        replications,
        cap_exceeded,
        mean_c: Estimate {
            value: m1,
            se: (unbiased / nf).sqrt(),
        },
        second_moment_c: Estimate {
            value: m2,
            se: (var_of_square / nf).sqrt(),
        },
        variance_c: Estimate {
            value: unbiased,
            se: ((central4 - var * var).max(0.0) / nf).sqrt(),
        },
        p_alpha_first: Estimate::proportion(alpha_first, n),
        p_beta_first: Estimate::proportion(n - alpha_first, n),
        alpha_first_count: alpha_first,
        beta_first_count: n - alpha_first,
        seed: SeedRecord::new(seed),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransitionEstimate {
    pub start: usize,
    pub time: f64,
    pub replications: usize,
    /// `counts[n]`: paths at level `n` at the given time.
    pub counts: Vec<u64>,
    pub probabilities: Vec<Estimate>,
    pub seed: SeedRecord,
}

impl TransitionEstimate {
    pub fn get(&self, n: usize) -> Estimate {
        self.probabilities.get(n).copied().unwrap_or(Estimate { value: 0.0, se: 0.0 })
    }
}

/// Empirical distribution of the level at time `t`.
pub fn estimate_transition(
    schedule: &RateSchedule,
    cat: &CatastropheRates,
    j: usize,
    t: f64,
    replications: usize,
    seed: u64,
) -> Result<TransitionEstimate> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::InvalidInput(format!("time must be > 0 (got {t})")));
    }
    if replications == 0 {
        return Err(Error::InvalidInput("replications must be >= 1".into()));
    }
    let levels: Vec<usize> = (0..replications as u64)
        .into_par_iter()
        .map(|i| state_at(schedule, cat, j, t, &mut replication_rng(seed, i)))
        .collect();
    let top = levels.iter().copied().max().unwrap_or(0);
    let mut counts = vec![0u64; top + 1];
    for &n in &levels {
        counts[n] += 1;
    }
    let n = replications as u64;
    Ok(TransitionEstimate {
        start: j,
        time: t,
        replications,
        probabilities: counts.iter().map(|&c| Estimate::proportion(c, n)).collect(),
        counts,
        seed: SeedRecord::new(seed),
    })
}
