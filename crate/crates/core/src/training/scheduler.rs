//! Plateau-driven learning-rate reduction and early stopping.
//!
//! One counter tracks epochs without strict improvement of the validation
//! metric (higher is better). It resets only on improvement, so the LR
//! reduction at `patience_lr` does not postpone the stop at `patience_stop`.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerAction {
    Continue,
    ReduceLr,
    Stop,
}

impl fmt::Display for SchedulerAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SchedulerAction::Continue => "",
            SchedulerAction::ReduceLr => "lr_reduced",
            SchedulerAction::Stop => "stopped",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerState {
    pub best_metric: f64,
    pub epochs_since_improve: usize,
    pub current_lr: f64,
    pub lr_factor: f64,
    pub patience_lr: usize,
    pub patience_stop: usize,
    stopped: bool,
}

impl SchedulerState {
    pub fn new(lr: f64, lr_factor: f64, patience_lr: usize, patience_stop: usize) -> Self {
        Self {
            best_metric: f64::NEG_INFINITY,
            epochs_since_improve: 0,
            current_lr: lr,
            lr_factor,
            patience_lr,
            patience_stop,
            stopped: false,
        }
    }

    pub fn is_stopped(&self) -> bool {
        self.stopped
    }

    pub fn update(&mut self, epoch_metric: f64) -> SchedulerAction {
        if self.stopped {
            return SchedulerAction::Stop;
        }
        if epoch_metric > self.best_metric {
            self.best_metric = epoch_metric;
            self.epochs_since_improve = 0;
            return SchedulerAction::Continue;
        }
        self.epochs_since_improve += 1;
        if self.epochs_since_improve == self.patience_stop {
            self.stopped = true;
            SchedulerAction::Stop
        } else if self.epochs_since_improve == self.patience_lr {
            self.current_lr *= self.lr_factor;
            SchedulerAction::ReduceLr
        } else {
            SchedulerAction::Continue
        }
    }
}
