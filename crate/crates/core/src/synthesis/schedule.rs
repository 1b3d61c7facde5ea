use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-constant broadcast control: interval i spans
/// [breakpoints[i], breakpoints[i+1]) with control vector controls[i].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSchedule {
    pub channels: usize,
    pub breakpoints: Vec<f64>,
    pub controls: Vec<Vec<f64>>,
}

/// One unit-duration interval on a single channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pulse {
    pub channel: usize,
    pub amount: f64,
}

impl ControlSchedule {
    pub fn new(channels: usize) -> Self {
        ControlSchedule { channels, breakpoints: vec![0.0], controls: Vec::new() }
    }

    pub fn push(&mut self, dt: f64, u: Vec<f64>) {
        debug_assert_eq!(u.len(), self.channels);
        let t = *self.breakpoints.last().expect("breakpoints start at t_0");
        self.breakpoints.push(t + dt);
        self.controls.push(u);
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.breakpoints.last().copied().unwrap_or(0.0) - self.breakpoints.first().copied().unwrap_or(0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.breakpoints.len() != self.controls.len() + 1 {
            return Err(Error::Spec("schedule needs one more breakpoint than intervals".into()));
        }
        if self.breakpoints.iter().any(|t| !t.is_finite()) {
            return Err(Error::Spec("non-finite breakpoint".into()));
        }
        if self.breakpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Spec("breakpoints must be strictly increasing".into()));
        }
        for u in &self.controls {
            if u.len() != self.channels {
                return Err(Error::Spec(format!("control vector has {} entries, need {}", u.len(), self.channels)));
            }
            if u.iter().any(|x| !x.is_finite()) {
                return Err(Error::Spec("non-finite control value".into()));
            }
        }
        Ok(())
    }

    /// Unit intervals, one per pulse, after merging neighbours on the same
    /// channel and dropping zero pulses.
    pub fn from_pulses(channels: usize, pulses: &[Pulse]) -> Self {
        let mut s = ControlSchedule::new(channels);
        for p in merge_pulses(pulses) {
            let mut u = vec![0.0; channels];
            u[p.channel] = p.amount;
            s.push(1.0, u);
        }
        s
    }

    /// Appends `other`, shifting its breakpoints to start where `self` ends.
    pub fn concat(&self, other: &ControlSchedule) -> Result<ControlSchedule> {
        if self.channels != other.channels {
            return Err(Error::Spec("cannot concatenate schedules with different channel counts".into()));
        }
        let mut s = self.clone();
        for (i, u) in other.controls.iter().enumerate() {
            s.push(other.breakpoints[i + 1] - other.breakpoints[i], u.clone());
        }
        Ok(s)
    }
}

pub fn merge_pulses(pulses: &[Pulse]) -> Vec<Pulse> {
    let mut out: Vec<Pulse> = Vec::with_capacity(pulses.len());
    for p in pulses {
        if p.amount == 0.0 {
            continue;
        }
        match out.last_mut() {
            Some(last) if last.channel == p.channel => {
                last.amount += p.amount;
                if last.amount == 0.0 {
                    out.pop();
                }
            }
            _ => out.push(*p),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pulses_merge_and_cancel() {
        let p = |channel, amount| Pulse { channel, amount };
        let m = merge_pulses(&[p(0, 1.0), p(0, 0.5), p(1, 0.0), p(1, 2.0), p(1, -2.0), p(0, 1.0)]);
        assert_eq!(m, vec![p(0, 2.5)]);
        let s = ControlSchedule::from_pulses(2, &[p(0, 1.0), p(1, -1.0)]);
        assert_eq!(s.breakpoints, vec![0.0, 1.0, 2.0]);
        assert_eq!(s.controls, vec![vec![1.0, 0.0], vec![0.0, -1.0]]);
        s.validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_schedules() {
        let mut s = ControlSchedule::new(1);
        s.push(1.0, vec![1.0]);
        s.breakpoints[1] = 0.0;
        assert!(s.validate().is_err());
        let mut s = ControlSchedule::new(1);
        s.push(1.0, vec![f64::NAN]);
        assert!(s.validate().is_err());
    }

    #[test]
    fn concat_shifts_time() {
        let mut a = ControlSchedule::new(1);
        a.push(0.5, vec![1.0]);
        let mut b = ControlSchedule::new(1);
        b.push(2.0, vec![3.0]);
        let c = a.concat(&b).unwrap();
        assert_eq!(c.breakpoints, vec![0.0, 0.5, 2.5]);
        assert_eq!(c.duration(), 2.5);
    }
}
