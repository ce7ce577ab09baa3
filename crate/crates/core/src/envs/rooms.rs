//! Grids of rooms joined by doorways.
//!
//! Cells are indexed row-major over the whole grid (row 0 on top). Every
//! room is one partition with local index `row * room_w + col`. Walls
//! between rooms are thin: a doorway joins the two cells facing each other
//! across the wall, so doorways add no states. The goal terminal `G` is an
//! extra successor of one cell in the goal room.
//!
//! With `padded_equivalence` every room has the same five slots `G, L, R,
//! T, B` (minus kinds no room has, e.g. `T, B` in a single row); a room
//! whose slot has no real counterpart routes it to its own blocked terminal
//! (`J = -inf`), so all rooms share one class. Without
//! padding, rooms are grouped by which slots they actually have.

use crate::error::{Error, Result};
use crate::hierarchy::PartitionInput;
use crate::lmdp::Lmdp;
use crate::scalar::Scalar;

use super::{uniform_rows, Decomposition};

/// Terminal slot kinds of a room, in template order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Goal,
    Left,
    Right,
    Top,
    Bottom,
}

impl Slot {
    pub const ALL: [Slot; 5] = [Slot::Goal, Slot::Left, Slot::Right, Slot::Top, Slot::Bottom];

    pub fn label(self) -> &'static str {
        match self {
            Slot::Goal => "G",
            Slot::Left => "L",
            Slot::Right => "R",
            Slot::Top => "T",
            Slot::Bottom => "B",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoomsConfig {
    pub rooms_x: usize,
    pub rooms_y: usize,
    pub room_w: usize,
    pub room_h: usize,
    /// Local row of the doorways in vertical walls; defaults to `room_h / 2`.
    pub door_row: Option<usize>,
    /// Local column of the doorways in horizontal walls; defaults to `room_w / 2`.
    pub door_col: Option<usize>,
    /// Room holding the goal; defaults to the top-right room.
    pub goal_room: Option<(usize, usize)>,
    /// Local `(col, row)` of the goal-adjacent cell; defaults to the room's top-right corner.
    pub goal_cell: Option<(usize, usize)>,
    pub interior_reward: f64,
    pub goal_reward: f64,
    pub padded_equivalence: bool,
}

impl Default for RoomsConfig {
    fn default() -> Self {
        RoomsConfig {
            rooms_x: 2,
            rooms_y: 2,
            room_w: 5,
            room_h: 5,
            door_row: None,
            door_col: None,
            goal_room: None,
            goal_cell: None,
            interior_reward: -1.0,
            goal_reward: 0.0,
            padded_equivalence: true,
        }
    }
}

impl RoomsConfig {
    pub fn new(rooms_x: usize, rooms_y: usize, room_w: usize, room_h: usize) -> Self {
        RoomsConfig {
            rooms_x,
            rooms_y,
            room_w,
            room_h,
            ..Self::default()
        }
    }

    pub fn grid_width(&self) -> usize {
        self.rooms_x * self.room_w
    }

    pub fn grid_height(&self) -> usize {
        self.rooms_y * self.room_h
    }

    pub fn n_cells(&self) -> usize {
        self.grid_width() * self.grid_height()
    }

    pub fn door_row(&self) -> usize {
        self.door_row.unwrap_or(self.room_h / 2)
    }

    pub fn door_col(&self) -> usize {
        self.door_col.unwrap_or(self.room_w / 2)
    }

    pub fn goal_room(&self) -> (usize, usize) {
        self.goal_room.unwrap_or((self.rooms_x.saturating_sub(1), 0))
    }

    pub fn goal_cell(&self) -> (usize, usize) {
        self.goal_cell.unwrap_or((self.room_w.saturating_sub(1), 0))
    }

    /// State index of global cell `(x, y)`.
    pub fn state_index(&self, x: usize, y: usize) -> usize {
        y * self.grid_width() + x
    }

    /// State index of the goal-adjacent cell.
    pub fn goal_state(&self) -> usize {
        let (rx, ry) = self.goal_room();
        let (cx, cy) = self.goal_cell();
        self.state_index(rx * self.room_w + cx, ry * self.room_h + cy)
    }

    /// Index of the goal terminal.
    pub fn goal_terminal(&self) -> usize {
        self.n_cells()
    }

    fn check(&self) -> Result<()> {
        let geo = |m: String| Err(Error::Geometry(m));
        if self.rooms_x == 0 || self.rooms_y == 0 || self.room_w == 0 || self.room_h == 0 {
            return geo("dimensions must be at least 1".into());
        }
        if self.door_row() >= self.room_h || self.door_col() >= self.room_w {
            return geo("doorway offset outside the wall".into());
        }
        let (rx, ry) = self.goal_room();
        if rx >= self.rooms_x || ry >= self.rooms_y {
            return geo(format!("goal room ({rx}, {ry}) outside the room grid"));
        }
        let (cx, cy) = self.goal_cell();
        if cx >= self.room_w || cy >= self.room_h {
            return geo(format!("goal cell ({cx}, {cy}) outside the room"));
        }
        if !(self.interior_reward < 0.0) {
            return geo("interior reward must be negative".into());
        }
        Ok(())
    }

    /// Local `(col, row)` whose transition feeds `slot`.
    pub fn slot_source(&self, slot: Slot) -> (usize, usize) {
        match slot {
            Slot::Goal => self.goal_cell(),
            Slot::Left => (0, self.door_row()),
            Slot::Right => (self.room_w - 1, self.door_row()),
            Slot::Top => (self.door_col(), 0),
            Slot::Bottom => (self.door_col(), self.room_h - 1),
        }
    }

    /// Global target of `slot` for room `(rx, ry)`, if the room really has it.
    fn slot_target(&self, slot: Slot, rx: usize, ry: usize) -> Option<usize> {
        let (w, h) = (self.room_w, self.room_h);
        let (lx, ly) = self.slot_source(slot);
        let (x, y) = (rx * w + lx, ry * h + ly);
        match slot {
            Slot::Goal => (self.goal_room() == (rx, ry)).then(|| self.goal_terminal()),
            Slot::Left => (rx > 0).then(|| self.state_index(x - 1, y)),
            Slot::Right => (rx + 1 < self.rooms_x).then(|| self.state_index(x + 1, y)),
            Slot::Top => (ry > 0).then(|| self.state_index(x, y - 1)),
            Slot::Bottom => (ry + 1 < self.rooms_y).then(|| self.state_index(x, y + 1)),
        }
    }

    /// Thin-wall ASCII map of the layout (see [`super::parse_map`]).
    pub fn to_map_text(&self) -> String {
        let (gw, gh) = (self.grid_width(), self.grid_height());
        let (w, h) = (self.room_w, self.room_h);
        let goal = self.goal_state();
        let mut out = format!("goal {}\nreward {}\n", self.goal_reward, self.interior_reward);
        for row in 0..=2 * gh {
            let mut line = String::with_capacity(2 * gw + 1);
            for col in 0..=2 * gw {
                let c = match (row % 2, col % 2) {
                    (1, 1) => {
                        if self.state_index(col / 2, row / 2) == goal {
                            'G'
                        } else {
                            '.'
                        }
                    }
                    (1, 0) if col > 0 && col < 2 * gw => {
                        let (x, y) = (col / 2, row / 2);
                        if x % w != 0 || y % h == self.door_row() {
                            '.'
                        } else {
                            '#'
                        }
                    }
                    (0, 1) if row > 0 && row < 2 * gh => {
                        let (x, y) = (col / 2, row / 2);
                        if y % h != 0 || x % w == self.door_col() {
                            '.'
                        } else {
                            '#'
                        }
                    }
                    _ => '#',
                };
                line.push(c);
            }
            out.push_str(&line);
            out.push('\n');
        }
        out
    }
}

pub fn build_rooms<T: Scalar>(cfg: &RoomsConfig) -> Result<Decomposition<T>> {
    cfg.check()?;
    let (w, h) = (cfg.room_w, cfg.room_h);
    let (gw, gh) = (cfg.grid_width(), cfg.grid_height());
    let n = cfg.n_cells();
    let n_rooms = cfg.rooms_x * cfg.rooms_y;

    let mut succ: Vec<Vec<usize>> = vec![Vec::new(); n];
    for y in 0..gh {
        for x in 0..gw {
            let s = cfg.state_index(x, y);
            if x % w > 0 {
                succ[s].push(s - 1);
            }
            if x % w + 1 < w {
                succ[s].push(s + 1);
            }
            if y % h > 0 {
                succ[s].push(s - gw);
            }
            if y % h + 1 < h {
                succ[s].push(s + gw);
            }
        }
    }

    let mut labels = vec![0; n];
    let mut to_template = vec![0; n];
    for y in 0..gh {
        for x in 0..gw {
            let s = cfg.state_index(x, y);
            labels[s] = (y / h) * cfg.rooms_x + x / w;
            to_template[s] = (y % h) * w + x % w;
        }
    }

    // Slot images per room; padding adds one blocked terminal per missing
    // slot, but only for slot kinds some room really has.
    let realized: Vec<Slot> = Slot::ALL
        .into_iter()
        .filter(|&k| (0..n_rooms).any(|r| cfg.slot_target(k, r % cfg.rooms_x, r / cfg.rooms_x).is_some()))
        .collect();
    let mut terminal_reward = vec![T::lit(cfg.goal_reward)];
    let mut slot_maps: Vec<Vec<(Slot, usize)>> = Vec::with_capacity(n_rooms);
    for room in 0..n_rooms {
        let (rx, ry) = (room % cfg.rooms_x, room / cfg.rooms_x);
        let mut map = Vec::new();
        for &slot in &realized {
            let target = match cfg.slot_target(slot, rx, ry) {
                Some(t) => t,
                None if cfg.padded_equivalence => {
                    terminal_reward.push(T::neg_infinity());
                    n + terminal_reward.len() - 1
                }
                None => continue,
            };
            let (lx, ly) = cfg.slot_source(slot);
            succ[cfg.state_index(rx * w + lx, ry * h + ly)].push(target);
            map.push((slot, target));
        }
        slot_maps.push(map);
    }

    // Rooms with the same slot kinds have the same dynamics.
    let mut signatures: Vec<Vec<Slot>> = Vec::new();
    let mut class_of = Vec::with_capacity(n_rooms);
    for map in &slot_maps {
        let sig: Vec<Slot> = map.iter().map(|&(k, _)| k).collect();
        let j = match signatures.iter().position(|s| *s == sig) {
            Some(j) => j,
            None => {
                signatures.push(sig);
                signatures.len() - 1
            }
        };
        class_of.push(j);
    }
    let slots = slot_maps
        .iter()
        .map(|map| map.iter().map(|&(_, t)| Some(t)).collect())
        .collect();

    let n_terminal = terminal_reward.len();
    let lmdp = Lmdp::new(n, n_terminal, uniform_rows(succ), vec![T::lit(cfg.interior_reward); n], terminal_reward)?;
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

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::decomposition_size;

    #[test]
    fn four_rooms_counts() {
        let d = build_rooms::<f64>(&RoomsConfig::default()).unwrap();
        assert_eq!(d.lmdp.n_states(), 100);
        assert!(d.lmdp.validate().is_empty());
        assert_eq!(d.spec.n_exits(), 9);
        assert_eq!(d.templates.len(), 1);
        assert_eq!((d.templates[0].n_local, d.templates[0].n_slots), (25, 5));
        let size = decomposition_size(&d.spec, &d.templates, &d.lmdp);
        assert_eq!(size.support, 4);
        assert_eq!(size.classes * size.max_local * size.max_slots, 125);
        // 8 doorway cells and G
        let pinned = (0..9).filter(|&e| d.spec.is_pinned_exit(e)).count();
        assert_eq!(pinned, 1);
        for i in 0..4 {
            assert_eq!(d.spec.partition_exits(i).len(), 2);
        }
    }

    #[test]
    fn top_left_room_slots() {
        let cfg = RoomsConfig::default();
        let d = build_rooms::<f64>(&cfg).unwrap();
        // Top-left room: only R and B lead anywhere.
        let exits = d.spec.slot_exits(0);
        assert_eq!(exits[0], None);
        assert_eq!(exits[1], None);
        assert!(exits[2].is_some());
        assert_eq!(exits[3], None);
        assert!(exits[4].is_some());
        // R of the top-left room is the doorway cell of the top-right room.
        let right = d.spec.exits()[exits[2].unwrap()];
        assert_eq!(right, cfg.state_index(5, 2));
    }

    #[test]
    fn strict_mode_groups_by_doorways() {
        let cfg = RoomsConfig {
            padded_equivalence: false,
            ..RoomsConfig::new(3, 3, 3, 3)
        };
        let d = build_rooms::<f64>(&cfg).unwrap();
        assert!(d.lmdp.validate().is_empty());
        // corners (4 patterns), edges (4), centre, and the goal corner differs from the plain corner
        assert_eq!(d.spec.n_classes(), 9);
        assert_eq!(d.lmdp.n_terminal(), 1);
        assert_eq!(d.spec.n_exits(), 5 * 5);
    }

    #[test]
    fn large_grid_counts() {
        let d = build_rooms::<f64>(&RoomsConfig::new(10, 10, 5, 5)).unwrap();
        assert_eq!(d.lmdp.n_states(), 2500);
        assert_eq!(d.spec.n_exits(), 361);
        assert_eq!(d.templates.len(), 1);
    }

    #[test]
    fn single_room() {
        let d = build_rooms::<f64>(&RoomsConfig::new(1, 1, 5, 5)).unwrap();
        assert_eq!(d.spec.exits(), &[25]);
        assert!(d.spec.is_pinned_exit(0));
        assert_eq!(d.lmdp.n_terminal(), 1);
        assert_eq!(d.templates[0].n_slots, 1);
    }

    #[test]
    fn bad_geometry() {
        assert!(matches!(build_rooms::<f64>(&RoomsConfig::new(0, 1, 5, 5)), Err(Error::Geometry(_))));
        let cfg = RoomsConfig {
            door_row: Some(7),
            ..RoomsConfig::default()
        };
        assert!(matches!(build_rooms::<f64>(&cfg), Err(Error::Geometry(_))));
    }

    #[test]
    fn map_text_shape() {
        let text = RoomsConfig::default().to_map_text();
        let grid: Vec<&str> = text.lines().skip(2).collect();
        assert_eq!(grid.len(), 21);
        assert!(grid.iter().all(|l| l.len() == 21));
        assert_eq!(text.matches('G').count(), 1);
    }
}
