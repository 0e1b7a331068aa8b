//! Seeded synthetic execution logs for demos, tests and benchmarks.

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::{Season, TaskRecord};

/// One (sequence, operator, season) cell of a synthetic log.
///
/// Nominal durations are log-uniform on `nominal_range`; observed durations
/// are `bias * nominal + N(0, (noise_frac * nominal)^2)`.
#[derive(Clone, Debug)]
pub struct SyntheticGroup {
    pub sequence_id: String,
    pub operator_id: String,
    pub season: Season,
    pub count: usize,
    pub bias: f64,
    pub noise_frac: f64,
    pub nominal_range: (f64, f64),
}

impl SyntheticGroup {
    pub fn new(sequence_id: &str, operator_id: &str, season: Season, count: usize) -> Self {
        SyntheticGroup {
            sequence_id: sequence_id.into(),
            operator_id: operator_id.into(),
            season,
            count,
            bias: 1.0,
            noise_frac: 0.0,
            nominal_range: (50.0, 1000.0),
        }
    }

    pub fn bias(mut self, bias: f64) -> Self {
        self.bias = bias;
        self
    }

    pub fn noise(mut self, noise_frac: f64) -> Self {
        self.noise_frac = noise_frac;
        self
    }

    pub fn nominal_range(mut self, lo: f64, hi: f64) -> Self {
        self.nominal_range = (lo, hi);
        self
    }
}

fn season_start(season: Season) -> DateTime<Utc> {
    let month = match season {
        Season::Winter => 1,
        Season::Spring => 3,
        Season::Summer => 6,
        Season::Autumn => 9,
    };
    Utc.with_ymd_and_hms(2019, month, 1, 6, 0, 0).unwrap()
}

pub fn generate(groups: &[SyntheticGroup], seed: u64) -> Vec<TaskRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for g in groups {
        let (lo, hi) = (g.nominal_range.0.ln(), g.nominal_range.1.ln());
        for i in 0..g.count {
            let predicted: f64 = rng.random_range(lo..=hi).exp();
            let z: f64 = Normal::new(0.0, 1.0).unwrap().sample(&mut rng);
            let observed = (g.bias * predicted + z * g.noise_frac * predicted).max(1e-3);
            out.push(TaskRecord {
                record_id: format!("syn-{:06}", out.len() + 1),
                sequence_id: g.sequence_id.clone(),
                operator_id: g.operator_id.clone(),
                season: g.season,
                skill: Some((i % 11) as u8),
                predicted_s: predicted,
                observed_s: observed,
                // Hourly within a season; every group stays inside its season.
                timestamp: season_start(g.season) + Duration::hours(i as i64),
            });
        }
    }
    out
}

/// 200 records over four groups of 50, observed = 1.2 x predicted with 2%
/// multiplicative noise.
pub fn biased_fixture(seed: u64) -> Vec<TaskRecord> {
    let groups: Vec<SyntheticGroup> = [("786", "op-a"), ("786", "op-b"), ("787", "op-a"), ("787", "op-c")]
        .into_iter()
        .map(|(seq, op)| {
            SyntheticGroup::new(seq, op, Season::Summer, 50)
                .bias(1.2)
                .noise(0.02)
        })
        .collect();
    generate(&groups, seed)
}

/// Records whose observed duration equals the predicted one.
pub fn zero_error_fixture(seed: u64) -> Vec<TaskRecord> {
    let groups = [
        SyntheticGroup::new("786", "op-a", Season::Summer, 30),
        SyntheticGroup::new("786", "op-b", Season::Summer, 9),
        SyntheticGroup::new("787", "op-a", Season::Winter, 4),
    ];
    generate(&groups, seed)
}

/// Two operators on sequence 786 in summer, 36 records each at a nominal
/// 200 s. `tight` repeats the errors -1, 0, 1 in every block; `wide` adds a
/// shift of 10 s per 12 records.
pub fn tight_wide_fixture() -> Vec<TaskRecord> {
    let mut out = Vec::new();
    for (op, drift) in [("tight", 0.0), ("wide", 10.0)] {
        for i in 0..36 {
            let error = (i % 3) as f64 - 1.0 + drift * (i / 12) as f64;
            out.push(TaskRecord {
                record_id: format!("tw-{:06}", out.len() + 1),
                sequence_id: "786".into(),
                operator_id: op.into(),
                season: Season::Summer,
                skill: None,
                predicted_s: 200.0,
                observed_s: 200.0 + error,
                timestamp: season_start(Season::Summer) + Duration::hours(i as i64),
            });
        }
    }
    out
}
