//! Per-run sweep records.

use serde::{Deserialize, Serialize};

use crate::anneal::{GroupingMode, ScheduleKind};

/// Column order of the CSV form.
pub const CSV_COLUMNS: [&str; 15] = [
    "L",
    "U",
    "t_H",
    "schedule",
    "grouping",
    "T_A",
    "tau",
    "steps",
    "final_energy",
    "E0",
    "delta_E",
    "gates_1q",
    "gates_2q",
    "wall_seconds",
    "seed",
];

/// One annealing run. Gate counts cover the whole executed circuit
/// (preparation included).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "U")]
    pub u: f64,
    #[serde(rename = "t_H")]
    pub t: f64,
    pub schedule: ScheduleKind,
    pub grouping: GroupingMode,
    #[serde(rename = "T_A")]
    pub t_a: f64,
    pub tau: f64,
    pub steps: usize,
    pub final_energy: f64,
    #[serde(rename = "E0")]
    pub e0: f64,
    #[serde(rename = "delta_E")]
    pub delta_e: f64,
    pub gates_1q: usize,
    pub gates_2q: usize,
    pub wall_seconds: f64,
    pub seed: u64,
}

/// Identity of a run for resuming sweeps. Floats are compared by bit pattern
/// after rounding to 12 significant digits.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RecordKey {
    pub l: usize,
    pub u: String,
    pub t: String,
    pub schedule: &'static str,
    pub grouping: &'static str,
    pub t_a: String,
    pub tau: String,
}

fn canon(x: f64) -> String {
    format!("{x:.11e}")
}

impl RecordKey {
    pub fn new(
        l: usize,
        u: f64,
        t: f64,
        schedule: ScheduleKind,
        grouping: GroupingMode,
        t_a: f64,
        tau: f64,
    ) -> Self {
        RecordKey {
            l,
            u: canon(u),
            t: canon(t),
            schedule: schedule.as_str(),
            grouping: grouping.as_str(),
            t_a: canon(t_a),
            tau: canon(tau),
        }
    }
}

impl SweepRecord {
    pub fn key(&self) -> RecordKey {
        RecordKey::new(
            self.l,
            self.u,
            self.t,
            self.schedule,
            self.grouping,
            self.t_a,
            self.tau,
        )
    }
}
