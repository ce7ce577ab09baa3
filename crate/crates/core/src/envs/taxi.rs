//! Taxi with a passenger, landmarks and a destination.
//!
//! A state is (taxi cell, passenger status, destination). The taxi wanders
//! uniformly over its grid neighbours; on a landmark cell the extra
//! outcome depends on the passenger:
//!
//! * waiting at landmark `l`, taxi on `l`: pickup, passenger now in the taxi;
//! * waiting at `l`, taxi on another landmark `m`: failed pickup, terminal `fail_m`;
//! * in the taxi, on the destination: success terminal;
//! * in the taxi, on another landmark `m`: dropped off, passenger now waits at `m`.
//!
//! Partitions are keyed by (passenger status, destination), so all
//! `L * L` waiting partitions share one class and the `L` in-taxi
//! partitions share another. Failed pickups get one terminal per landmark
//! so that slot images stay distinct.

use crate::error::{Error, Result};
use crate::hierarchy::PartitionInput;
use crate::lmdp::Lmdp;
use crate::scalar::Scalar;

use super::{uniform_rows, Decomposition};

#[derive(Debug, Clone, PartialEq)]
pub struct TaxiConfig {
    pub grid_w: usize,
    pub grid_h: usize,
    /// Landmark cells `(x, y)`; defaults to the four corners.
    pub landmarks: Option<Vec<(usize, usize)>>,
    pub interior_reward: f64,
    pub success_reward: f64,
    pub failure_reward: f64,
}

impl Default for TaxiConfig {
    fn default() -> Self {
        TaxiConfig {
            grid_w: 5,
            grid_h: 5,
            landmarks: None,
            interior_reward: -1.0,
            success_reward: 0.0,
            failure_reward: -10.0,
        }
    }
}

/// Decoded taxi state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TaxiState {
    pub x: usize,
    pub y: usize,
    /// Landmark where the passenger waits, `None` while riding.
    pub waiting_at: Option<usize>,
    pub destination: usize,
}

impl TaxiConfig {
    pub fn landmarks(&self) -> Vec<(usize, usize)> {
        match &self.landmarks {
            Some(l) => l.clone(),
            None => {
                let (w, h) = (self.grid_w.saturating_sub(1), self.grid_h.saturating_sub(1));
                vec![(0, 0), (w, 0), (0, h), (w, h)]
            }
        }
    }

    pub fn n_landmarks(&self) -> usize {
        self.landmarks.as_ref().map_or(4, Vec::len)
    }

    pub fn n_cells(&self) -> usize {
        self.grid_w * self.grid_h
    }

    pub fn n_partitions(&self) -> usize {
        let l = self.n_landmarks();
        l * l + l
    }

    pub fn n_states(&self) -> usize {
        self.n_partitions() * self.n_cells()
    }

    /// Partition id: `loc * L + dest` while waiting, `L * L + dest` riding.
    pub fn partition(&self, waiting_at: Option<usize>, destination: usize) -> usize {
        let l = self.n_landmarks();
        match waiting_at {
            Some(loc) => loc * l + destination,
            None => l * l + destination,
        }
    }

    pub fn state_index(&self, st: TaxiState) -> usize {
        self.partition(st.waiting_at, st.destination) * self.n_cells() + st.y * self.grid_w + st.x
    }

    pub fn decode(&self, s: usize) -> TaxiState {
        let l = self.n_landmarks();
        let (p, c) = (s / self.n_cells(), s % self.n_cells());
        let (waiting_at, destination) = if p < l * l { (Some(p / l), p % l) } else { (None, p - l * l) };
        TaxiState {
            x: c % self.grid_w,
            y: c / self.grid_w,
            waiting_at,
            destination,
        }
    }

    pub fn success_terminal(&self) -> usize {
        self.n_states()
    }

    pub fn failure_terminal(&self, landmark: usize) -> usize {
        self.n_states() + 1 + landmark
    }

    fn check(&self) -> Result<()> {
        let geo = |m: String| Err(Error::Geometry(m));
        if self.grid_w == 0 || self.grid_h == 0 {
            return geo("grid dimensions must be at least 1".into());
        }
        let marks = self.landmarks();
        if marks.is_empty() {
            return geo("at least one landmark is required".into());
        }
        for (i, &(x, y)) in marks.iter().enumerate() {
            if x >= self.grid_w || y >= self.grid_h {
                return geo(format!("landmark {i} at ({x}, {y}) outside the grid"));
            }
            if marks[..i].contains(&(x, y)) {
                return geo(format!("landmark {i} at ({x}, {y}) duplicates another"));
            }
        }
        if self.grid_w * self.grid_h == 1 {
            return geo("a single-cell grid has no moves".into());
        }
        if !(self.interior_reward < 0.0) {
            return geo("interior reward must be negative".into());
        }
        Ok(())
    }
}

pub fn build_taxi<T: Scalar>(cfg: &TaxiConfig) -> Result<Decomposition<T>> {
    cfg.check()?;
    let (w, h) = (cfg.grid_w, cfg.grid_h);
    let marks = cfg.landmarks();
    let l = marks.len();
    let cells = cfg.n_cells();
    let n = cfg.n_states();

    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut labels = vec![0; n];
    let mut to_template = vec![0; n];
    let mut slots = vec![Vec::with_capacity(l); cfg.n_partitions()];
    for p in 0..cfg.n_partitions() {
        let base = p * cells;
        for y in 0..h {
            for x in 0..w {
                let c = y * w + x;
                let next = &mut succ[base + c];
                if x > 0 {
                    next.push(base + c - 1);
                }
                if x + 1 < w {
                    next.push(base + c + 1);
                }
                if y > 0 {
                    next.push(base + c - w);
                }
                if y + 1 < h {
                    next.push(base + c + w);
                }
                labels[base + c] = p;
                to_template[base + c] = c;
            }
        }
        let first = cfg.decode(base);
        for (m, &(x, y)) in marks.iter().enumerate() {
            let target = match first.waiting_at {
                Some(loc) if loc == m => cfg.state_index(TaxiState {
                    x,
                    y,
                    waiting_at: None,
                    destination: first.destination,
                }),
                Some(_) => cfg.failure_terminal(m),
                None if first.destination == m => cfg.success_terminal(),
                None => cfg.state_index(TaxiState {
                    x,
                    y,
                    waiting_at: Some(m),
                    destination: first.destination,
                }),
            };
            succ[base + y * w + x].push(target);
            slots[p].push(Some(target));
        }
    }
    let class_of = (0..cfg.n_partitions()).map(|p| usize::from(p >= l * l)).collect();

    let mut terminal_reward = vec![T::lit(cfg.success_reward)];
    terminal_reward.extend(std::iter::repeat(T::lit(cfg.failure_reward)).take(l));
    let lmdp = Lmdp::new(n, 1 + l, uniform_rows(succ), vec![T::lit(cfg.interior_reward); n], terminal_reward)?;
    Decomposition::new(
        lmdp,
        &PartitionInput {
            labels,
            class_of,
            to_template,
            slots,
        },
    )
}
