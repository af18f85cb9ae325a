use rand::Rng;
use serde::{Deserialize, Serialize};

use super::DqnError;

/// Linear ε annealing from `eps_max` at episode 0 down to `eps_min` at
/// episode `decay_fraction * horizon_episodes`, flat afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSchedule {
    pub eps_max: f64,
    pub eps_min: f64,
    pub decay_fraction: f64,
    pub horizon_episodes: u64,
}

impl EpsilonSchedule {
    pub fn validate(&self) -> Result<(), DqnError> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.eps_max)
            || !unit.contains(&self.eps_min)
            || self.eps_min > self.eps_max
            || !(self.decay_fraction > 0.0 && self.decay_fraction <= 1.0)
            || self.horizon_episodes == 0
        {
            return Err(DqnError::InvalidSchedule(*self));
        }
        Ok(())
    }

    pub fn epsilon_at(&self, episode: u64) -> f64 {
        let decay_end = self.decay_fraction * self.horizon_episodes as f64;
        let e = episode as f64;
        if e >= decay_end {
            return self.eps_min;
        }
        let eps = self.eps_max - (self.eps_max - self.eps_min) * e / decay_end;
        eps.clamp(self.eps_min, self.eps_max)
    }
}

/// Index of the largest value; ties go to the lowest index. Entries for
/// which `allowed` returns false are skipped.
fn argmax_where(q: &[f64], allowed: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in q.iter().enumerate() {
        if !allowed(i) {
            continue;
        }
        match best {
            Some(b) if q[b] >= v => {}
            _ => best = Some(i),
        }
    }
    best
}

/// ε-greedy choice over `qvalues`.
pub fn select_action<R: Rng + ?Sized>(qvalues: &[f64], epsilon: f64, rng: &mut R) -> Result<usize, DqnError> {
    select_action_masked(qvalues, epsilon, None, rng)
}

/// ε-greedy choice that never returns `excluded`, neither greedily nor
/// through exploration.
pub fn select_action_masked<R: Rng + ?Sized>(
    qvalues: &[f64],
    epsilon: f64,
    excluded: Option<usize>,
    rng: &mut R,
) -> Result<usize, DqnError> {
    let n = qvalues.len();
    let live = n - usize::from(excluded.is_some_and(|x| x < n));
    if live == 0 {
        return Err(DqnError::EmptyInput);
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(DqnError::InvalidEpsilon(epsilon));
    }
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        let mut pick = rng.gen_range(0..live);
        if let Some(x) = excluded {
            if pick >= x {
                pick += 1;
            }
        }
        return Ok(pick);
    }
    Ok(argmax_where(qvalues, |i| Some(i) != excluded).expect("at least one live index"))
}
