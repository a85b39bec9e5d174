//! Random-walk Metropolis on a finite lattice with an enumerable proposal
//! neighborhood, for which every one-step expectation is a finite sum.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{coordinate_id, Kernel};
use crate::error::{Error, Result};
use crate::panel::{BasisFunction, BasisSet, Functional};
use crate::rng::RngStream;

/// Unnormalized density on a `height x width` grid with a uniform proposal
/// over a fixed-size neighborhood. Neighborhood slots that fall off the
/// grid are `None`; proposing one of them is a rejection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LatticeSpec", into = "LatticeSpec")]
pub struct DiscreteTarget {
    width: usize,
    height: usize,
    weights: Vec<f64>,
    neighbors: Vec<Vec<Option<usize>>>,
    radius: Option<usize>,
}

/// JSON form: row-major `weights` of length `width * height`; proposals move
/// horizontally or vertically by `1..=radius` cells (`4 * radius` slots).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub width: usize,
    pub height: usize,
    pub radius: usize,
    pub weights: Vec<f64>,
}

impl TryFrom<LatticeSpec> for DiscreteTarget {
    type Error = Error;

    fn try_from(s: LatticeSpec) -> Result<Self> {
        DiscreteTarget::lattice(s.width, s.height, s.radius, s.weights)
    }
}

impl From<DiscreteTarget> for LatticeSpec {
    fn from(t: DiscreteTarget) -> Self {
        LatticeSpec {
            width: t.width,
            height: t.height,
            radius: t.radius.unwrap_or(0),
            weights: t.weights,
        }
    }
}

impl DiscreteTarget {
    /// Axis-aligned moves of size up to `radius`.
    pub fn lattice(width: usize, height: usize, radius: usize, weights: Vec<f64>) -> Result<Self> {
        if radius == 0 {
            return Err(Error::Invalid("lattice radius must be positive".into()));
        }
        let mut neighbors = Vec::with_capacity(width * height);
        for r in 0..height as i64 {
            for c in 0..width as i64 {
                let mut slots = Vec::with_capacity(4 * radius);
                for step in 1..=radius as i64 {
                    for (dr, dc) in [(-step, 0), (step, 0), (0, -step), (0, step)] {
                        let (nr, nc) = (r + dr, c + dc);
                        let inside = (0..height as i64).contains(&nr) && (0..width as i64).contains(&nc);
                        slots.push(inside.then(|| (nr * width as i64 + nc) as usize));
                    }
                }
                neighbors.push(slots);
            }
        }
        let mut t = Self::with_neighbors(width, height, weights, neighbors)?;
        t.radius = Some(radius);
        Ok(t)
    }

    /// Arbitrary neighborhoods; every point needs the same number of slots
    /// and `y in N(x)` must imply `x in N(y)`.
    pub fn with_neighbors(
        width: usize,
        height: usize,
        weights: Vec<f64>,
        neighbors: Vec<Vec<Option<usize>>>,
    ) -> Result<Self> {
        let size = width * height;
        if size == 0 {
            return Err(Error::Empty("lattice"));
        }
        if weights.len() != size {
            return Err(Error::Dimension {
                expected: size,
                got: weights.len(),
            });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Invalid("lattice weights must be finite and positive".into()));
        }
        if neighbors.len() != size {
            return Err(Error::Dimension {
                expected: size,
                got: neighbors.len(),
            });
        }
        let m = neighbors[0].len();
        if m == 0 {
            return Err(Error::Invalid("empty proposal neighborhood".into()));
        }
        for (x, slots) in neighbors.iter().enumerate() {
            if slots.len() != m {
                return Err(Error::Invalid(format!(
                    "point {x} has {} proposal slots, expected {m}",
                    slots.len()
                )));
            }
            for y in slots.iter().flatten() {
                if *y >= size || !neighbors[*y].contains(&Some(x)) {
                    return Err(Error::AsymmetricNeighborhood(x));
                }
            }
        }
        Ok(Self {
            width,
            height,
            weights,
            neighbors,
            radius: None,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn size(&self) -> usize {
        self.weights.len()
    }

    /// Proposal slots per point.
    pub fn slots(&self) -> usize {
        self.neighbors[0].len()
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn neighbors(&self, i: usize) -> &[Option<usize>] {
        &self.neighbors[i]
    }

    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn coords(&self, i: usize) -> [f64; 2] {
        [(i / self.width) as f64, (i % self.width) as f64]
    }

    /// Lattice index of a recorded state `(row, col)`.
    pub fn index_of(&self, x: &[f64]) -> Option<usize> {
        let (r, c) = (x[0], x[1]);
        let ok = r >= 0.0 && c >= 0.0 && r.fract() == 0.0 && c.fract() == 0.0;
        let (r, c) = (r as usize, c as usize);
        (ok && r < self.height && c < self.width).then(|| self.index(r, c))
    }

    /// Metropolis acceptance probability of a move `from -> to`.
    pub fn acceptance(&self, from: usize, to: usize) -> f64 {
        (self.weights[to] / self.weights[from]).min(1.0)
    }

    /// Points sorted by decreasing weight (ties by index).
    pub fn modes(&self, count: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.size()).collect();
        order.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
        order.truncate(count);
        order
    }

    /// A bimodal test density on a 10x10 grid with moves of size up to 3.
    pub fn toy() -> Self {
        let mut w = Vec::with_capacity(100);
        for r in 0..10 {
            for c in 0..10 {
                let (r, c) = (r as f64, c as f64);
                let a = (-((r - 2.0).powi(2) + (c - 3.0).powi(2)) / 4.0).exp();
                let b = 0.6 * (-((r - 7.0).powi(2) + (c - 6.0).powi(2)) / 3.0).exp();
                w.push(a + b + 0.01);
            }
        }
        Self::lattice(10, 10, 3, w).expect("valid toy lattice")
    }
}

/// One Metropolis step from lattice index `x`.
pub fn discrete_mh_step(target: &DiscreteTarget, x: usize, rng: &mut RngStream) -> usize {
    let slot = rng.index(target.slots());
    match target.neighbors(x)[slot] {
        Some(y) => {
            let a = target.acceptance(x, y);
            if a >= 1.0 || rng.gen::<f64>() < a {
                y
            } else {
                x
            }
        }
        None => x,
    }
}

/// Exact `PG(x) = G(x) (1 - (1/m) sum a(x,y)) + (1/m) sum a(x,y) G(y)` over the
/// proposal slots `y` of `x`; off-grid slots have `a = 0`.
pub fn discrete_mh_expectation(target: &DiscreteTarget, g: &dyn Fn(&[f64]) -> f64, x: usize) -> f64 {
    let m = target.slots() as f64;
    let gx = g(&target.coords(x));
    let mut stay = 1.0;
    let mut moved = 0.0;
    for y in target.neighbors(x).iter().flatten() {
        let a = target.acceptance(x, *y);
        stay -= a / m;
        moved += a / m * g(&target.coords(*y));
    }
    gx * stay + moved
}

#[derive(Clone, Debug)]
pub struct DiscreteMhSampler {
    target: DiscreteTarget,
    start: usize,
}

impl DiscreteMhSampler {
    pub fn new(target: DiscreteTarget, start: [usize; 2]) -> Result<Self> {
        if start[0] >= target.height() || start[1] >= target.width() {
            return Err(Error::Invalid(format!("start {start:?} is outside the lattice")));
        }
        Ok(Self {
            start: target.index(start[0], start[1]),
            target,
        })
    }

    pub fn target(&self) -> &DiscreteTarget {
        &self.target
    }

    fn indicator(&self, point: usize) -> impl Fn(&[f64]) -> f64 + Send + Sync + Clone + 'static {
        let [r, c] = self.target.coords(point);
        move |x: &[f64]| if x[0] == r && x[1] == c { 1.0 } else { 0.0 }
    }

    /// `mode1` (indicator of the heaviest point) and coordinates `x1`, `x2`.
    pub fn functional(&self, id: &str) -> Option<Functional> {
        if id == "mode1" {
            let top = self.target.modes(1)[0];
            return Some(Functional::new("mode1", self.indicator(top)));
        }
        coordinate_id(id, 2).map(Functional::coordinate)
    }

    /// `modes`: indicators of the three heaviest points.
    pub fn basis(self: &Arc<Self>, id: &str) -> Option<BasisSet> {
        (id == "modes").then(|| {
            self.target
                .modes(3)
                .into_iter()
                .enumerate()
                .map(|(j, point)| {
                    let g = self.indicator(point);
                    let s = Arc::clone(self);
                    let gi = g.clone();
                    BasisFunction::new(format!("mode{}", j + 1), g, move |x| match s.target.index_of(x) {
                        Some(i) => discrete_mh_expectation(&s.target, &gi, i),
                        None => f64::NAN,
                    })
                })
                .collect()
        })
    }
}

impl Kernel for DiscreteMhSampler {
    type State = usize;

    fn dim(&self) -> usize {
        2
    }

    fn initial_state(&self) -> usize {
        self.start
    }

    fn step(&self, state: &mut usize, rng: &mut RngStream) -> Result<()> {
        *state = discrete_mh_step(&self.target, *state, rng);
        Ok(())
    }

    fn observe(&self, state: &usize, out: &mut [f64]) {
        out.copy_from_slice(&self.target.coords(*state));
    }
}
