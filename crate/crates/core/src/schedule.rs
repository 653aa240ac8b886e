//! Parameter schedules for the pipeline: the constant hierarchy
//! `p ≫ p′ ≫ d₁ ≫ b₁ ≫ c₁ ≫ a₁ ≫ d₂ ≫ … ≫ ε⁻¹ ≫ h, r, s` realised as
//! strict inequalities with user-chosen gaps, plus the disconnectedness
//! arithmetic `cᵢ − 2aᵢ ≥ cᵢ₊₁`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScheduleError {
    #[error("hierarchy violated: {0}")]
    Hierarchy(String),
    #[error("level arrays must have length h = {0}")]
    BadArrays(usize),
    #[error("{0}")]
    BadField(String),
}

/// The full constant hierarchy for one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSchedule {
    pub r: usize,
    pub s: u16,
    pub h: usize,
    pub n: u32,
    pub p: u32,
    pub p_prime: u32,
    pub epsilon: f64,
    pub a: Vec<u32>,
    pub b: Vec<u32>,
    pub c: Vec<u32>,
    pub d: Vec<u32>,
}

impl ParamSchedule {
    /// Strict validation: every inequality in the §5 chain, the
    /// disconnectedness arithmetic, and basic sanity. Returns the first
    /// failed inequality by name.
    pub fn validate(&self) -> Result<(), ScheduleError> {
        if self.r < 3 {
            return Err(ScheduleError::BadField("r must be at least 3".into()));
        }
        if self.s < 1 {
            return Err(ScheduleError::BadField("s must be at least 1".into()));
        }
        if self.h < 1 {
            return Err(ScheduleError::BadField("h must be at least 1".into()));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(ScheduleError::BadField("epsilon must be in (0,1)".into()));
        }
        for (name, arr) in [("a", &self.a), ("b", &self.b), ("c", &self.c), ("d", &self.d)] {
            if arr.len() != self.h {
                return Err(ScheduleError::BadArrays(self.h))
                    .map_err(|_| ScheduleError::Hierarchy(format!("array {name} has wrong length")));
            }
        }
        // The chain, in order.
        let mut chain: Vec<(String, f64)> = vec![
            ("p".into(), self.p as f64),
            ("p'".into(), self.p_prime as f64),
        ];
        for i in 0..self.h {
            chain.push((format!("d{}", i + 1), self.d[i] as f64));
            chain.push((format!("b{}", i + 1), self.b[i] as f64));
            chain.push((format!("c{}", i + 1), self.c[i] as f64));
            chain.push((format!("a{}", i + 1), self.a[i] as f64));
        }
        chain.push(("1/ε".into(), 1.0 / self.epsilon));
        chain.push((
            "max(h,r,s)".into(),
            self.h.max(self.r).max(self.s as usize) as f64,
        ));
        for w in chain.windows(2) {
            if !(w[0].1 > w[1].1) {
                return Err(ScheduleError::Hierarchy(format!(
                    "{} = {} must exceed {} = {}",
                    w[0].0, w[0].1, w[1].0, w[1].1
                )));
            }
        }
        for i in 0..self.h - 1 {
            if self.c[i] < 2 * self.a[i] + self.c[i + 1] {
                return Err(ScheduleError::Hierarchy(format!(
                    "c{} − 2a{} = {} must be at least c{} = {}",
                    i + 1,
                    i + 1,
                    self.c[i] as i64 - 2 * self.a[i] as i64,
                    i + 2,
                    self.c[i + 1]
                )));
            }
        }
        Ok(())
    }

    /// Warnings for loose schedules: the inequalities that fail, without
    /// rejecting. Loose schedules are how the engine is exercised at desk
    /// scale; every downstream guarantee is certified rather than assumed.
    pub fn validation_warnings(&self) -> Vec<String> {
        match self.validate() {
            Ok(()) => Vec::new(),
            Err(e) => vec![e.to_string()],
        }
    }

    /// Δ = ε⁻², the degree bound of the generated expander.
    pub fn delta(&self) -> u32 {
        (1.0 / (self.epsilon * self.epsilon)).ceil() as u32
    }

    /// The documented strict desk schedule: the minimal integer chain that
    /// satisfies every inequality at r=3, s=2, h=3. Runs against it report
    /// honestly (separation at these arities needs astronomically many
    /// ground vertices), which is the expected desk-scale outcome.
    pub fn desk_strict(n: u32) -> Self {
        ParamSchedule {
            r: 3,
            s: 2,
            h: 3,
            n,
            p: 100,
            p_prime: 82,
            epsilon: 0.25,
            d: vec![80, 26, 8],
            b: vec![79, 25, 7],
            c: vec![78, 24, 6],
            a: vec![27, 9, 5],
        }
    }

    /// A loose schedule sized so that height-1 pipeline states actually fit
    /// a few hundred ground vertices. Violates the strict hierarchy (by
    /// design) and is accepted only in loose mode.
    pub fn desk_loose(n: u32, s: u16) -> Self {
        ParamSchedule {
            r: 3,
            s,
            h: 2,
            n,
            p: 64,
            p_prime: 50,
            epsilon: 0.25,
            d: vec![12, 1],
            b: vec![2, 1],
            c: vec![2, 1],
            a: vec![1, 1],
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ScheduleError> {
        serde_json::from_str(text).map_err(|e| ScheduleError::BadField(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("schedule serialises")
    }

    /// Stable content hash for certificates.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(self.to_json().as_bytes());
        hex_string(&h.finalize())
    }
}

pub fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strict_desk_schedule_validates() {
        let s = ParamSchedule::desk_strict(300);
        assert_eq!(s.validate(), Ok(()));
        // c_i − 2a_i ≥ c_{i+1} holds with equality at the chosen values.
        assert_eq!(s.c[0] - 2 * s.a[0], s.c[1]);
        assert_eq!(s.c[1] - 2 * s.a[1], s.c[2]);
    }

    #[test]
    fn violations_name_the_failed_inequality() {
        let mut s = ParamSchedule::desk_strict(300);
        s.b[0] = s.d[0] + 5;
        let err = s.validate().unwrap_err();
        assert!(err.to_string().contains("d1"), "{err}");
        let loose = ParamSchedule::desk_loose(64, 2);
        assert!(loose.validate().is_err());
        assert!(!loose.validation_warnings().is_empty());
    }

    #[test]
    fn json_round_trip_and_hash_stability() {
        let s = ParamSchedule::desk_strict(300);
        let t = ParamSchedule::from_json(&s.to_json()).unwrap();
        assert_eq!(s, t);
        assert_eq!(s.hash(), t.hash());
    }
}
