//! Classic mountain-car dynamics (gym `MountainCar-v0` constants).

use rand::Rng;

use crate::error::{Error, Result};

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;
pub const FORCE: f64 = 0.001;
pub const GRAVITY: f64 = 0.0025;
pub const MAX_EPISODE_STEPS: u32 = 200;
pub const N_ACTIONS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McState {
    pub position: f64,
    pub velocity: f64,
}

impl McState {
    pub fn new(position: f64, velocity: f64) -> Result<Self> {
        let s = Self { position, velocity };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        check_range("position", self.position, MIN_POSITION, MAX_POSITION)?;
        check_range("velocity", self.velocity, -MAX_SPEED, MAX_SPEED)
    }
}

pub(crate) fn check_range(what: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value >= lo && value <= hi {
        Ok(())
    } else {
        Err(Error::OutOfRange { what, value, lo, hi })
    }
}

/// How the 200-step time limit is presented to the learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeoutMode {
    /// The timeout ends the episode like the goal does: bootstrap target 0.
    #[default]
    Terminate,
    /// The episode ends but the learner still bootstraps from V(S_T).
    Truncate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub next_state: McState,
    pub reward: f64,
    /// The episode is over (goal reached or time limit hit).
    pub terminal: bool,
    /// The goal was reached on this step.
    pub reached_goal: bool,
    pub steps_elapsed: u32,
}

impl StepOutcome {
    /// Whether the learner should treat V(S_{t+1}) as zero.
    pub fn bootstrap_zero(&self, mode: TimeoutMode) -> bool {
        match mode {
            TimeoutMode::Terminate => self.terminal,
            TimeoutMode::Truncate => self.reached_goal,
        }
    }
}

/// Uniform start position in [-0.6, -0.4] at rest.
pub fn mc_reset<R: Rng + ?Sized>(rng: &mut R) -> McState {
    McState {
        position: rng.gen_range(-0.6..=-0.4),
        velocity: 0.0,
    }
}

/// One application of the dynamics, ignoring the time limit.
pub fn mc_dynamics(state: McState, action: usize) -> Result<McState> {
    if action >= N_ACTIONS {
        return Err(Error::InvalidAction(action));
    }
    let mut velocity = state.velocity + (action as f64 - 1.0) * FORCE - GRAVITY * (3.0 * state.position).cos();
    velocity = velocity.clamp(-MAX_SPEED, MAX_SPEED);
    let mut position = (state.position + velocity).clamp(MIN_POSITION, MAX_POSITION);
    if position <= MIN_POSITION {
        position = MIN_POSITION;
        velocity = 0.0;
    }
    Ok(McState { position, velocity })
}

/// Stateful episode wrapper tracking the step count.
#[derive(Debug, Clone)]
pub struct MountainCar {
    state: McState,
    steps: u32,
    max_steps: u32,
}

impl Default for MountainCar {
    fn default() -> Self {
        Self::new()
    }
}

impl MountainCar {
    pub fn new() -> Self {
        Self {
            state: McState {
                position: -0.5,
                velocity: 0.0,
            },
            steps: 0,
            max_steps: MAX_EPISODE_STEPS,
        }
    }

    pub fn reset<R: Rng + ?Sized>(&mut self, rng: &mut R) -> McState {
        self.state = mc_reset(rng);
        self.steps = 0;
        self.state
    }

    /// Start an episode from a given state (used by tests and replays).
    pub fn reset_to(&mut self, state: McState) -> Result<McState> {
        state.validate()?;
        self.state = state;
        self.steps = 0;
        Ok(state)
    }

    pub fn state(&self) -> McState {
        self.state
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn step(&mut self, action: usize) -> Result<StepOutcome> {
        let next = mc_dynamics(self.state, action)?;
        self.state = next;
        self.steps += 1;
        let reached_goal = next.position >= GOAL_POSITION;
        Ok(StepOutcome {
            next_state: next,
            reward: -1.0,
            terminal: reached_goal || self.steps >= self.max_steps,
            reached_goal,
            steps_elapsed: self.steps,
        })
    }
}
