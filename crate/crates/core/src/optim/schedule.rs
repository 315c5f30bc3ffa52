use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-size and radius schedules, evaluated at 1-based step `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Schedule {
    /// `base / √t`
    InvSqrt,
    /// `base · ½(1 + cos(π t / total))`
    Cosine { total: u64 },
    Constant,
}

impl Schedule {
    pub fn value(&self, base: f64, t: u64) -> Result<f64> {
        schedule_value(*self, base, t)
    }
}

pub fn schedule_value(kind: Schedule, base: f64, t: u64) -> Result<f64> {
    if t < 1 {
        return Err(Error::invalid("schedules are evaluated at t >= 1"));
    }
    Ok(match kind {
        Schedule::InvSqrt => base / (t as f64).sqrt(),
        Schedule::Cosine { total } => {
            if total < t {
                return Err(Error::invalid(format!(
                    "cosine schedule evaluated at t = {t} beyond total {total}"
                )));
            }
            base * 0.5 * (1.0 + (std::f64::consts::PI * t as f64 / total as f64).cos())
        }
        Schedule::Constant => base,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(schedule_value(Schedule::InvSqrt, 0.1, 4).unwrap(), 0.05);
        let c = schedule_value(Schedule::Cosine { total: 100 }, 0.1, 50).unwrap();
        assert!((c - 0.05).abs() < 1e-17);
        assert_eq!(schedule_value(Schedule::Constant, 0.1, 12345).unwrap(), 0.1);
    }

    #[test]
    fn domain_errors() {
        assert!(schedule_value(Schedule::InvSqrt, 0.1, 0).is_err());
        assert!(schedule_value(Schedule::Cosine { total: 10 }, 0.1, 11).is_err());
    }

    proptest! {
        #[test]
        fn decaying_schedules_never_increase(t in 1u64..5000, base in 1e-4f64..10.0) {
            for kind in [Schedule::InvSqrt, Schedule::Cosine { total: 5000 }] {
                let now = schedule_value(kind, base, t).unwrap();
                let next = schedule_value(kind, base, t + 1).unwrap();
                prop_assert!(next <= now);
            }
        }
    }
}
