//! Manhattan-grid mobility.
//!
//! Streets run along both axes every `spacing` metres, including the area
//! border. Vehicles travel at constant speed along street centre lines and
//! pick a direction at each intersection: straight with probability 1/2,
//! left or right with 1/4 each, renormalized over the directions that stay
//! inside the area. A receiver replays its transmitter's trajectory a fixed
//! number of slots late, so the along-street gap survives turns.

use std::collections::VecDeque;

use rand::Rng;

use crate::error::{Error, Result};
use crate::params::SimParams;

const SNAP: f64 = 1e-6;

pub type Point = [f64; 2];

pub fn distance(a: Point, b: Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoadGrid {
    side: f64,
    spacing: f64,
    streets: usize,
}

impl RoadGrid {
    pub fn new(side: f64, spacing: f64) -> Result<RoadGrid> {
        if !(side > 0.0 && spacing > 0.0 && spacing <= side) {
            return Err(Error::param("street_spacing", "need 0 < spacing <= side"));
        }
        let n = side / spacing;
        if (n - n.round()).abs() > 1e-9 {
            return Err(Error::param("street_spacing", "spacing must divide the side length"));
        }
        Ok(RoadGrid {
            side,
            spacing,
            streets: n.round() as usize + 1,
        })
    }

    pub fn from_params(p: &SimParams) -> Result<RoadGrid> {
        RoadGrid::new(p.area_side, p.street_spacing)
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Streets per direction.
    pub fn streets(&self) -> usize {
        self.streets
    }

    pub fn street_coord(&self, i: usize) -> f64 {
        i as f64 * self.spacing
    }

    /// Index of the street at coordinate `c`, if `c` lies on one.
    pub fn street_at(&self, c: f64) -> Option<usize> {
        let i = (c / self.spacing).round();
        if i >= 0.0 && (i as usize) < self.streets && (c - i * self.spacing).abs() < SNAP {
            Some(i as usize)
        } else {
            None
        }
    }

    /// `(horizontal street, vertical street)` indices containing `p`. A point
    /// at an intersection lies on both.
    pub fn lanes_of(&self, p: Point) -> (Option<usize>, Option<usize>) {
        (self.street_at(p[1]), self.street_at(p[0]))
    }

    pub fn contains(&self, p: Point) -> bool {
        (-SNAP..=self.side + SNAP).contains(&p[0]) && (-SNAP..=self.side + SNAP).contains(&p[1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Heading {
    East,
    North,
    West,
    South,
}

impl Heading {
    pub fn unit(self) -> Point {
        match self {
            Heading::East => [1.0, 0.0],
            Heading::North => [0.0, 1.0],
            Heading::West => [-1.0, 0.0],
            Heading::South => [0.0, -1.0],
        }
    }

    pub fn left(self) -> Heading {
        match self {
            Heading::East => Heading::North,
            Heading::North => Heading::West,
            Heading::West => Heading::South,
            Heading::South => Heading::East,
        }
    }

    pub fn right(self) -> Heading {
        self.left().left().left()
    }

    fn axis(self) -> usize {
        match self {
            Heading::East | Heading::West => 0,
            Heading::North | Heading::South => 1,
        }
    }

    fn sign(self) -> f64 {
        match self {
            Heading::East | Heading::North => 1.0,
            Heading::West | Heading::South => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vehicle {
    pub pos: Point,
    pub heading: Heading,
}

impl Vehicle {
    /// Moves `dist` metres along the street network, turning at intersections.
    pub fn advance<R: Rng + ?Sized>(&mut self, mut dist: f64, grid: &RoadGrid, rng: &mut R) {
        while dist > 0.0 {
            let axis = self.heading.axis();
            let sign = self.heading.sign();
            let c = self.pos[axis];
            let next = if sign > 0.0 {
                (((c + SNAP) / grid.spacing).floor() + 1.0) * grid.spacing
            } else {
                (((c - SNAP) / grid.spacing).ceil() - 1.0) * grid.spacing
            };
            let gap = (next - c).abs();
            if dist < gap {
                self.pos[axis] = c + sign * dist;
                return;
            }
            self.pos[axis] = next;
            dist -= gap;
            self.heading = choose_turn(self.heading, self.pos, grid, rng);
        }
    }
}

fn leaves_area(h: Heading, p: Point, grid: &RoadGrid) -> bool {
    match h {
        Heading::East => p[0] >= grid.side - SNAP,
        Heading::West => p[0] <= SNAP,
        Heading::North => p[1] >= grid.side - SNAP,
        Heading::South => p[1] <= SNAP,
    }
}

fn choose_turn<R: Rng + ?Sized>(h: Heading, at: Point, grid: &RoadGrid, rng: &mut R) -> Heading {
    let options = [(h, 0.5), (h.left(), 0.25), (h.right(), 0.25)];
    let u: f64 = rng.random();
    let total: f64 = options
        .iter()
        .filter(|(o, _)| !leaves_area(*o, at, grid))
        .map(|(_, w)| w)
        .sum();
    let mut acc = 0.0;
    let mut last = h;
    for (o, w) in options {
        if leaves_area(o, at, grid) {
            continue;
        }
        acc += w / total;
        last = o;
        if u < acc {
            return o;
        }
    }
    last
}

/// One transmitter-receiver pair. The receiver is the transmitter's
/// position `lag` slots ago.
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    pub tx: Vehicle,
    pub rx: Vehicle,
    history: VecDeque<Vehicle>,
}

impl PairState {
    pub fn midpoint(&self) -> Point {
        [
            0.5 * (self.tx.pos[0] + self.rx.pos[0]),
            0.5 * (self.tx.pos[1] + self.rx.pos[1]),
        ]
    }

    pub fn lag(&self) -> usize {
        self.history.len()
    }
}

/// Replay lag in slots: `ceil(gap / step)`, exact when the ratio is integral.
pub fn replay_lag(gap: f64, step: f64) -> usize {
    let r = gap / step;
    if (r - r.round()).abs() < 1e-9 * r.max(1.0) {
        r.round().max(1.0) as usize
    } else {
        r.ceil() as usize
    }
}

/// Places `count` pairs uniformly on random street segments, receiver
/// trailing the transmitter on the same segment.
pub fn init_pairs<R: Rng + ?Sized>(
    grid: &RoadGrid,
    count: usize,
    gap: f64,
    step: f64,
    rng: &mut R,
) -> Result<Vec<PairState>> {
    if count == 0 {
        return Err(Error::param("K", "need at least one pair"));
    }
    let lag = replay_lag(gap, step);
    let span = lag as f64 * step;
    if span >= grid.spacing {
        return Err(Error::param(
            "pair_gap",
            "replay span must fit within one street segment",
        ));
    }
    let segments = grid.streets - 1;
    let mut pairs = Vec::with_capacity(count);
    for _ in 0..count {
        let horizontal: bool = rng.random();
        let street = grid.street_coord(rng.random_range(0..grid.streets));
        let seg_start = grid.street_coord(rng.random_range(0..segments));
        let forward: bool = rng.random();
        let offset = rng.random::<f64>() * (grid.spacing - span);
        let heading = match (horizontal, forward) {
            (true, true) => Heading::East,
            (true, false) => Heading::West,
            (false, true) => Heading::North,
            (false, false) => Heading::South,
        };
        let along = if forward {
            seg_start + offset
        } else {
            seg_start + grid.spacing - offset
        };
        let at = |j: usize| -> Point {
            let a = along + heading.sign() * j as f64 * step;
            if horizontal {
                [a, street]
            } else {
                [street, a]
            }
        };
        let history: VecDeque<Vehicle> = (0..lag).map(|j| Vehicle { pos: at(j), heading }).collect();
        pairs.push(PairState {
            tx: Vehicle { pos: at(lag), heading },
            rx: history[0],
            history,
        });
    }
    Ok(pairs)
}

/// Advances every pair by one slot, in pair-index order.
pub fn step<R: Rng + ?Sized>(pairs: &mut [PairState], grid: &RoadGrid, step_len: f64, rng: &mut R) {
    for pair in pairs {
        pair.history.push_back(pair.tx);
        pair.history.pop_front();
        pair.rx = pair.history[0];
        pair.tx.advance(step_len, grid, rng);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn grid() -> RoadGrid {
        RoadGrid::new(250.0, 62.5).unwrap()
    }

    #[test]
    fn grid_streets() {
        let g = grid();
        assert_eq!(g.streets(), 5);
        assert_eq!(g.street_at(125.0), Some(2));
        assert_eq!(g.street_at(124.0), None);
        assert_eq!(g.lanes_of([62.5, 125.0]), (Some(2), Some(1)));
        assert!(RoadGrid::new(250.0, 60.0).is_err());
    }

    #[test]
    fn single_pair_gap_on_common_lane() {
        let g = grid();
        let mut rng = stream(3, Stream::Mobility);
        let p = &init_pairs(&g, 1, 15.0, 0.05, &mut rng).unwrap()[0];
        assert!((distance(p.tx.pos, p.rx.pos) - 15.0).abs() < 1e-9);
        let (h1, v1) = g.lanes_of(p.tx.pos);
        let (h2, v2) = g.lanes_of(p.rx.pos);
        assert!((h1.is_some() && h1 == h2) || (v1.is_some() && v1 == v2));
        assert_eq!(p.lag(), 300);
    }

    #[test]
    fn placements_are_seeded() {
        let g = grid();
        let a = init_pairs(&g, 10, 15.0, 0.05, &mut stream(9, Stream::Mobility)).unwrap();
        let b = init_pairs(&g, 10, 15.0, 0.05, &mut stream(9, Stream::Mobility)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn eighty_pairs_inside_area() {
        let g = grid();
        let pairs = init_pairs(&g, 80, 15.0, 0.05, &mut stream(1, Stream::Mobility)).unwrap();
        assert_eq!(pairs.len(), 80);
        for p in &pairs {
            assert!(g.contains(p.tx.pos) && g.contains(p.rx.pos));
        }
    }

    #[test]
    fn displacement_per_slot() {
        let step_len: f64 = 60.0 / 3.6 * 3e-3;
        assert!((step_len - 0.05).abs() < 1e-12);
        let g = grid();
        let mut v = Vehicle {
            pos: [10.0, 62.5],
            heading: Heading::East,
        };
        v.advance(step_len, &g, &mut stream(0, Stream::Mobility));
        assert!((v.pos[0] - 10.05).abs() < 1e-12);
        assert_eq!(v.pos[1], 62.5);
        assert_eq!(v.heading, Heading::East);
    }

    #[test]
    fn boundary_forces_turn_inward() {
        let g = grid();
        let mut rng = stream(5, Stream::Mobility);
        for _ in 0..200 {
            // heading into the north-east corner: only a right turn remains
            let mut v = Vehicle {
                pos: [249.99, 250.0],
                heading: Heading::East,
            };
            v.advance(0.05, &g, &mut rng);
            assert_eq!(v.heading, Heading::South);
            assert!(g.contains(v.pos));
        }
    }

    #[test]
    fn turn_frequencies() {
        let g = grid();
        let mut rng = stream(11, Stream::Mobility);
        let mut counts = [0usize; 3];
        let n = 40_000;
        for _ in 0..n {
            let mut v = Vehicle {
                pos: [125.0 - 0.01, 125.0],
                heading: Heading::East,
            };
            v.advance(0.02, &g, &mut rng);
            match v.heading {
                Heading::East => counts[0] += 1,
                Heading::North => counts[1] += 1,
                Heading::South => counts[2] += 1,
                Heading::West => panic!("u-turn"),
            }
        }
        let f: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
        assert!(
            (f[0] - 0.5).abs() < 0.015 && (f[1] - 0.25).abs() < 0.015 && (f[2] - 0.25).abs() < 0.015,
            "{f:?}"
        );
    }

    #[test]
    fn long_run_containment_and_replay() {
        let g = grid();
        let mut rng = stream(2, Stream::Mobility);
        let mut pairs = init_pairs(&g, 20, 15.0, 0.05, &mut rng).unwrap();
        let lag = pairs[0].lag();
        let mut tx_trace: Vec<Vec<Point>> = vec![Vec::new(); pairs.len()];
        for t in 0..30_000 {
            step(&mut pairs, &g, 0.05, &mut rng);
            for (k, p) in pairs.iter().enumerate() {
                assert!(g.contains(p.tx.pos) && g.contains(p.rx.pos), "slot {t}");
                let (h, v) = g.lanes_of(p.tx.pos);
                assert!(h.is_some() || v.is_some(), "tx off-lane at slot {t}");
                tx_trace[k].push(p.tx.pos);
                if t >= lag {
                    assert_eq!(p.rx.pos, tx_trace[k][t - lag]);
                }
            }
        }
    }
}
