use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ActionSpec, Cell, EnvError, Environment, GridLayout, Step};
use crate::dsl::ObjectRegistry;
use crate::state::StateSchema;

/// Transition probabilities are integer multiples of `1 / DENOM`.
pub const DENOM: u32 = 6000;

/// Grid cell as `(x, y)`.
pub type Coord = (usize, usize);

const INTENDED: u32 = 5100;
const SLIP: u32 = DENOM - INTENDED;

pub const LEFT: usize = 0;
pub const RIGHT: usize = 1;
pub const UP: usize = 2;
pub const DOWN: usize = 3;
pub const STAY: usize = 4;

const MOVES: [(i64, i64); 5] = [(-1, 0), (1, 0), (0, 1), (0, -1), (0, 0)];

/// Reward structure of the grid. The default is sparse: +1 on reaching a
/// target, -1 on entering an unsafe cell, both terminal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridRewards {
    pub target: f64,
    pub unsafe_cell: f64,
    /// Added on every step (before target/unsafe rewards).
    pub step: f64,
    pub unsafe_terminal: bool,
    pub max_steps: usize,
}

impl Default for GridRewards {
    fn default() -> Self {
        Self {
            target: 1.0,
            unsafe_cell: -1.0,
            step: 0.0,
            unsafe_terminal: true,
            max_steps: 400,
        }
    }
}

/// Slippery grid world: the chosen move happens with probability 0.85,
/// otherwise the agent slips uniformly to the current cell or one of its
/// in-grid von Neumann neighbours.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridWorld {
    layout: GridLayout,
    rewards: GridRewards,
    rng: ChaCha8Rng,
    pos: (usize, usize),
    steps: usize,
    done: bool,
    #[serde(skip, default = "grid_schema")]
    schema: StateSchema,
    #[serde(skip, default = "grid_actions")]
    actions: ActionSpec,
}

fn grid_schema() -> StateSchema {
    StateSchema::new(&[("x", "cell"), ("y", "cell")], &[("pos", &[0, 1])])
}

fn grid_actions() -> ActionSpec {
    ActionSpec::new(&["left", "right", "up", "down", "stay"])
}

impl GridWorld {
    pub fn new(layout: GridLayout, rewards: GridRewards, seed: u64) -> Self {
        let pos = layout.start();
        Self {
            layout,
            rewards,
            rng: ChaCha8Rng::seed_from_u64(seed),
            pos,
            steps: 0,
            done: false,
            schema: grid_schema(),
            actions: grid_actions(),
        }
    }

    pub fn layout(&self) -> &GridLayout {
        &self.layout
    }

    pub fn rewards(&self) -> &GridRewards {
        &self.rewards
    }

    pub fn position(&self) -> (usize, usize) {
        self.pos
    }

    /// Exact next-cell distribution as `(cell, numerator)` pairs over
    /// [`DENOM`], in a fixed order with no repeated cells.
    pub fn transition_weights(&self, cell: (usize, usize), action: usize) -> Result<Vec<(Coord, u32)>, EnvError> {
        self.check_action(action)?;
        let (x, y) = (cell.0 as i64, cell.1 as i64);
        if !self.layout.in_bounds(x, y) {
            return Err(EnvError::InvalidState(format!("cell ({x}, {y}) is off the grid")));
        }
        let (dx, dy) = MOVES[action];
        let intended = if self.layout.in_bounds(x + dx, y + dy) {
            ((x + dx) as usize, (y + dy) as usize)
        } else {
            cell
        };
        let support: Vec<(usize, usize)> = [(0, 0), (-1, 0), (1, 0), (0, 1), (0, -1)]
            .iter()
            .filter(|(dx, dy)| self.layout.in_bounds(x + dx, y + dy))
            .map(|(dx, dy)| ((x + dx) as usize, (y + dy) as usize))
            .collect();
        let share = SLIP / support.len() as u32;
        Ok(support
            .into_iter()
            .map(|c| (c, if c == intended { share + INTENDED } else { share }))
            .collect())
    }

    /// Next-state distribution as states and probabilities.
    pub fn transition_distribution(&self, cell: (usize, usize), action: usize) -> Result<Vec<([f64; 2], f64)>, EnvError> {
        Ok(self
            .transition_weights(cell, action)?
            .into_iter()
            .map(|((x, y), w)| ([x as f64, y as f64], w as f64 / DENOM as f64))
            .collect())
    }

    /// Expected next state under the slip dynamics.
    pub fn mean_next(&self, cell: (usize, usize), action: usize) -> Result<[f64; 2], EnvError> {
        let mut m = [0.0; 2];
        for (s, p) in self.transition_distribution(cell, action)? {
            m[0] += p * s[0];
            m[1] += p * s[1];
        }
        Ok(m)
    }

    /// Draws a next cell from `cell` without touching the episode.
    pub fn sample_next(&mut self, cell: (usize, usize), action: usize) -> Result<(usize, usize), EnvError> {
        let weights = self.transition_weights(cell, action)?;
        let mut u = self.rng.gen_range(0..DENOM);
        for (c, w) in &weights {
            if u < *w {
                return Ok(*c);
            }
            u -= w;
        }
        unreachable!("weights sum to DENOM")
    }

    /// Moves the agent to `cell` and marks the episode active.
    pub fn set_position(&mut self, cell: (usize, usize)) -> Result<(), EnvError> {
        if !self.layout.in_bounds(cell.0 as i64, cell.1 as i64) {
            return Err(EnvError::InvalidState(format!("cell {cell:?} is off the grid")));
        }
        self.pos = cell;
        self.done = false;
        Ok(())
    }

    fn check_action(&self, action: usize) -> Result<(), EnvError> {
        if action >= MOVES.len() {
            return Err(EnvError::InvalidAction {
                action,
                count: MOVES.len(),
            });
        }
        Ok(())
    }

    fn state(&self) -> Vec<f64> {
        vec![self.pos.0 as f64, self.pos.1 as f64]
    }
}

impl Environment for GridWorld {
    fn schema(&self) -> &StateSchema {
        &self.schema
    }

    fn action_spec(&self) -> &ActionSpec {
        &self.actions
    }

    fn seed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn reset(&mut self) -> Vec<f64> {
        self.pos = self.layout.start();
        self.steps = 0;
        self.done = false;
        self.state()
    }

    fn observe(&self) -> Vec<f64> {
        self.state()
    }

    fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeDone);
        }
        self.pos = self.sample_next(self.pos, action)?;
        self.steps += 1;
        let mut reward = self.rewards.step;
        let mut terminal = false;
        match self.layout.cell(self.pos.0, self.pos.1) {
            Cell::Target => {
                reward += self.rewards.target;
                terminal = true;
            }
            Cell::Unsafe => {
                reward += self.rewards.unsafe_cell;
                terminal = self.rewards.unsafe_terminal;
            }
            Cell::Safe | Cell::Initial => {}
        }
        self.done = terminal || self.steps >= self.rewards.max_steps;
        Ok(Step {
            next_state: self.state(),
            reward,
            done: self.done,
        })
    }

    fn registry(&self) -> ObjectRegistry {
        let points = |label| {
            self.layout
                .cells_with(label)
                .into_iter()
                .map(|(x, y)| vec![x as f64, y as f64])
                .collect()
        };
        let mut r = ObjectRegistry::new();
        r.insert("unsafe", Some("pos"), points(Cell::Unsafe)).expect("fresh registry");
        r.insert("target", Some("pos"), points(Cell::Target)).expect("fresh registry");
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn world() -> GridWorld {
        GridWorld::new(GridLayout::bridge(), GridRewards::default(), 1)
    }

    fn prob_of(d: &[([f64; 2], f64)], cell: [f64; 2]) -> f64 {
        d.iter().filter(|(s, _)| *s == cell).map(|(_, p)| p).sum()
    }

    #[test]
    fn interior_up() {
        let d = world().transition_distribution((5, 5), UP).unwrap();
        assert_eq!(d.len(), 5);
        assert!((prob_of(&d, [5.0, 6.0]) - 0.88).abs() < 1e-15);
        for c in [[5.0, 5.0], [4.0, 5.0], [6.0, 5.0], [5.0, 4.0]] {
            assert!((prob_of(&d, c) - 0.03).abs() < 1e-15);
        }
    }

    #[test]
    fn interior_stay() {
        let w = world().transition_weights((7, 3), STAY).unwrap();
        assert_eq!(w[0], ((7, 3), 5280));
        assert!(w[1..].iter().all(|(_, n)| *n == 180));
    }

    #[test]
    fn corner_clamps() {
        let w = world().transition_weights((0, 0), LEFT).unwrap();
        assert_eq!(w, vec![((0, 0), 5400), ((1, 0), 300), ((0, 1), 300)]);
        let w = world().transition_weights((19, 7), RIGHT).unwrap();
        assert_eq!(w.iter().map(|(_, n)| n).sum::<u32>(), DENOM);
        assert_eq!(w[0], ((19, 7), INTENDED + 225));
    }

    #[test]
    fn invalid_inputs() {
        let w = world();
        assert!(matches!(w.transition_weights((0, 0), 5), Err(EnvError::InvalidAction { action: 5, count: 5 })));
        assert!(w.transition_weights((20, 0), 0).is_err());
    }

    #[test]
    fn reset_starts_bottom_left() {
        let mut w = world();
        w.seed(1);
        assert_eq!(w.reset(), vec![0.0, 0.0]);
    }

    #[test]
    fn intended_frequency() {
        let mut w = world();
        w.seed(42);
        let hits = (0..10_000).filter(|_| w.sample_next((5, 5), UP).unwrap() == (5, 6)).count();
        assert!((hits as f64 / 10_000.0 - 0.88).abs() < 0.01);
    }

    #[test]
    fn terminal_rewards() {
        let mut w = world();
        w.set_position((19, 18)).unwrap();
        let mut reached = false;
        for seed in 0..50 {
            w.seed(seed);
            w.set_position((19, 18)).unwrap();
            let s = w.step(UP).unwrap();
            if s.next_state == vec![19.0, 19.0] {
                assert_eq!(s.reward, 1.0);
                assert!(s.done);
                assert!(matches!(w.step(UP), Err(EnvError::EpisodeDone)));
                reached = true;
            } else {
                assert_eq!(s.reward, 0.0);
                assert!(!s.done);
            }
        }
        assert!(reached);
        let mut fell = false;
        for seed in 0..50 {
            w.seed(seed);
            w.set_position((3, 8)).unwrap();
            let s = w.step(UP).unwrap();
            if s.next_state == vec![3.0, 9.0] {
                assert_eq!(s.reward, -1.0);
                assert!(s.done);
                fell = true;
            }
        }
        assert!(fell);
    }

    #[test]
    fn hazard_mode_continues() {
        let rewards = GridRewards {
            unsafe_cell: 0.0,
            step: -0.05,
            unsafe_terminal: false,
            ..GridRewards::default()
        };
        let mut w = GridWorld::new(GridLayout::bridge(), rewards, 3);
        w.reset();
        w.set_position((3, 9)).unwrap();
        let s = w.step(STAY).unwrap();
        assert_eq!(s.reward, -0.05);
        assert!(!s.done);
    }

    #[test]
    fn episode_cap() {
        let mut w = world();
        w.reset();
        let mut n = 0;
        loop {
            // bounce in the bottom-left corner, away from the band
            let s = w.step(if n % 2 == 0 { LEFT } else { DOWN }).unwrap();
            n += 1;
            if s.done {
                break;
            }
        }
        assert_eq!(n, 400);
    }

    #[test]
    fn registry_sets() {
        let r = world().registry();
        assert_eq!(r.get("unsafe").unwrap().points.len(), 36);
        assert_eq!(r.get("unsafe").unwrap().slice.as_deref(), Some("pos"));
        assert_eq!(r.get("target").unwrap().points, vec![vec![19.0, 19.0]]);
    }
}
