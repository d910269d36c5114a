use serde::{Deserialize, Serialize};

/// Step decay: `initial * drop_factor ^ floor(epoch / drop_period_epochs)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LrSchedule {
    pub initial: f64,
    pub drop_factor: f64,
    pub drop_period_epochs: usize,
}

impl Default for LrSchedule {
    fn default() -> Self {
        Self { initial: 0.01, drop_factor: 0.1, drop_period_epochs: 20 }
    }
}

impl LrSchedule {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        lr_at(epoch, self)
    }
}

pub fn lr_at(epoch: usize, schedule: &LrSchedule) -> f64 {
    let drops = epoch / schedule.drop_period_epochs.max(1);
    schedule.initial * schedule.drop_factor.powi(drops as i32)
}
