use crate::error::{Error, Result};

/// Strictly decreasing time grid from exactly 1 to exactly 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    times: Vec<f32>,
}

impl Schedule {
    /// `steps` equal intervals.
    pub fn uniform(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidSchedule("at least one step is required".into()));
        }
        let n = steps as f32;
        Self::from_times((0..=steps).map(|k| (steps - k) as f32 / n).collect())
    }

    pub fn from_times(times: Vec<f32>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::InvalidSchedule("need at least two time points".into()));
        }
        if times[0] != 1.0 || *times.last().unwrap() != 0.0 {
            return Err(Error::InvalidSchedule(format!(
                "grid must start at 1 and end at 0, got {} .. {}",
                times[0],
                times.last().unwrap()
            )));
        }
        if let Some(k) = times.windows(2).position(|p| p[1] >= p[0]) {
            return Err(Error::InvalidSchedule(format!(
                "not strictly decreasing at {k}: {} then {}",
                times[k],
                times[k + 1]
            )));
        }
        Ok(Self { times })
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn times(&self) -> &[f32] {
        &self.times
    }

    /// `(t_k, t_{k+1})` pairs in sampling order.
    pub fn intervals(&self) -> impl Iterator<Item = (f32, f32)> + '_ {
        self.times.windows(2).map(|p| (p[0], p[1]))
    }
}
