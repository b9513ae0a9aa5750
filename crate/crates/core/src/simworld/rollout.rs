use super::catalog::{BowlSpec, FoodSpec};
use super::expert::expert_action;
use super::render::{render, Observation};
use super::state::{AttemptOutcome, Pose, SimState, StepOutcome};
use crate::error::{ImrlError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryStep {
    /// Observation the action was chosen from.
    pub obs: Observation,
    pub action: Pose,
    pub outcome: StepOutcome,
}

/// One episode of consecutive scooping attempts.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub bowl: BowlSpec,
    pub food: FoodSpec,
    pub initial_fill: f64,
    pub seed: u64,
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn attempts(&self) -> Vec<AttemptOutcome> {
        self.steps.iter().filter_map(|s| s.outcome.attempt).collect()
    }
}

/// Runs `attempts` attempts, asking `controller` for every action. A
/// `NoFeasiblePoint` from the controller ends the episode early (the bowl
/// is effectively empty); other errors propagate.
pub fn rollout<F>(mut state: SimState, attempts: usize, mut controller: F) -> Result<(Trajectory, SimState)>
where
    F: FnMut(&SimState, &Observation) -> Result<Pose>,
{
    let mut traj = Trajectory {
        bowl: state.bowl.clone(),
        food: state.food.clone(),
        initial_fill: state.initial_fill(),
        seed: state.seed(),
        steps: Vec::new(),
    };
    while state.attempts_done() < attempts {
        let obs = render(&state);
        let action = match controller(&state, &obs) {
            Ok(a) => a,
            Err(ImrlError::NoFeasiblePoint { .. }) => break,
            Err(e) => return Err(e),
        };
        let (next, outcome) = state.step(&action)?;
        traj.steps.push(TrajectoryStep { obs, action, outcome });
        state = next;
    }
    Ok((traj, state))
}

pub fn rollout_expert(state: SimState, attempts: usize) -> Result<(Trajectory, SimState)> {
    rollout(state, attempts, |s, _| expert_action(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::metrics::episode_metrics;
    use crate::simworld::state::make_env;

    #[test]
    fn expert_succeeds_on_training_foods() {
        for food in ["cereals", "jello", "water", "apple", "soup"] {
            let env = make_env(BowlSpec::white_circular(), FoodSpec::by_name(food).unwrap(), 0.8, 9).unwrap();
            let (traj, end) = rollout_expert(env, 10).unwrap();
            let m = episode_metrics(&traj.attempts()).unwrap();
            assert!(m.sur >= 0.9, "{food}: {m:?}");
            assert!((end.scooped_total() + end.fill() - 0.8).abs() < 1e-12);
            assert!(traj.steps.iter().all(|s| !s.outcome.collided_with_bowl));
        }
    }
}
