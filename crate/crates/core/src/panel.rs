//! Chain output, functionals, basis functions and the evaluated
//! control-variate panel.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A pure map from a chain state to a real number.
pub type EvalFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// One chain state: a finite, non-empty coordinate vector.
#[derive(Clone, Debug, PartialEq)]
pub struct State(Vec<f64>);

impl State {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::Empty("state coordinates"));
        }
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::Invalid(format!("state coordinate {i} is not finite")));
        }
        Ok(Self(coords))
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for State {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Post-burn-in chain output, stored row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    data: Vec<f64>,
    dim: usize,
    pub sampler_id: String,
    pub seed: u64,
    pub burn_in: usize,
}

impl Trajectory {
    /// Builds a trajectory from row-major data of `n * dim` values.
    pub fn from_rows(
        data: Vec<f64>,
        dim: usize,
        sampler_id: impl Into<String>,
        seed: u64,
        burn_in: usize,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("trajectory dimension must be at least 1".into()));
        }
        if !data.len().is_multiple_of(dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: data.len() % dim,
            });
        }
        if data.len() / dim < 2 {
            return Err(Error::Invalid("trajectory needs at least 2 states".into()));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: i / dim,
                function: format!("x{}", i % dim + 1),
            });
        }
        Ok(Self {
            data,
            dim,
            sampler_id: sampler_id.into(),
            seed,
            burn_in,
        })
    }

    pub fn from_states(states: &[State], sampler_id: impl Into<String>, seed: u64, burn_in: usize) -> Result<Self> {
        let dim = states.first().map(State::dim).unwrap_or(0);
        let mut data = Vec::with_capacity(states.len() * dim);
        for s in states {
            if s.dim() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: s.dim(),
                });
            }
            data.extend_from_slice(s.coords());
        }
        Self::from_rows(data, dim, sampler_id, seed, burn_in)
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn state(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn states(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }
}

/// The function whose mean under the target is estimated.
#[derive(Clone)]
pub struct Functional {
    name: String,
    eval: EvalFn,
}

impl Functional {
    pub fn new(name: impl Into<String>, eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    /// The coordinate functional `x -> x[i]` (zero-based).
    pub fn coordinate(i: usize) -> Self {
        Self::new(format!("x{}", i + 1), move |x| x[i])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Functional").field("name", &self.name).finish()
    }
}

/// A basis function `G` paired with its exact one-step expectation `PG`.
#[derive(Clone)]
pub struct BasisFunction {
    name: String,
    g: EvalFn,
    pg: EvalFn,
}

impl BasisFunction {
    pub fn new(
        name: impl Into<String>,
        g: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        pg: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            name: name.into(),
            g: Arc::new(g),
            pg: Arc::new(pg),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn g(&self, x: &[f64]) -> f64 {
        (self.g)(x)
    }

    pub fn pg(&self, x: &[f64]) -> f64 {
        (self.pg)(x)
    }
}

impl fmt::Debug for BasisFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BasisFunction").field("name", &self.name).finish()
    }
}

/// Basis functions `G_1..G_k` used to build control variates `U_j = G_j - PG_j`.
#[derive(Clone, Debug, Default)]
pub struct BasisSet {
    functions: Vec<BasisFunction>,
}

impl BasisSet {
    pub fn new(functions: Vec<BasisFunction>) -> Self {
        Self { functions }
    }

    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    pub fn functions(&self) -> &[BasisFunction] {
        &self.functions
    }

    pub fn push(&mut self, b: BasisFunction) {
        self.functions.push(b);
    }
}

impl FromIterator<BasisFunction> for BasisSet {
    fn from_iter<I: IntoIterator<Item = BasisFunction>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

/// Evaluates `F`, `G_j` and `PG_j` at one state, writing `g` and `pg`
/// into the provided buffers. Returns `F(x)`.
pub fn evaluate_row(
    x: &[f64],
    step: usize,
    f: &Functional,
    basis: &BasisSet,
    g: &mut [f64],
    pg: &mut [f64],
) -> Result<f64> {
    let fv = f.eval(x);
    if !fv.is_finite() {
        return Err(Error::NonFinite {
            step,
            function: format!("F ({})", f.name()),
        });
    }
    for (j, b) in basis.functions().iter().enumerate() {
        let gv = b.g(x);
        let pv = b.pg(x);
        if !gv.is_finite() {
            return Err(Error::NonFinite {
                step,
                function: format!("G{} ({})", j + 1, b.name()),
            });
        }
        if !pv.is_finite() {
            return Err(Error::NonFinite {
                step,
                function: format!("PG{} ({})", j + 1, b.name()),
            });
        }
        g[j] = gv;
        pg[j] = pv;
    }
    Ok(fv)
}

/// Per-step evaluations `f`, `G`, `PG` and `U = G - PG` over a trajectory.
/// Matrices are stored row-major with `k` columns.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlVariatePanel {
    k: usize,
    f: Vec<f64>,
    g: Vec<f64>,
    pg: Vec<f64>,
    u: Vec<f64>,
}

impl ControlVariatePanel {
    /// Builds a panel from row-major `g` and `pg` matrices with `k` columns.
    pub fn new(f: Vec<f64>, g: Vec<f64>, pg: Vec<f64>, k: usize) -> Result<Self> {
        let n = f.len();
        if n == 0 {
            return Err(Error::Empty("panel"));
        }
        if g.len() != n * k {
            return Err(Error::Dimension {
                expected: n * k,
                got: g.len(),
            });
        }
        if pg.len() != n * k {
            return Err(Error::Dimension {
                expected: n * k,
                got: pg.len(),
            });
        }
        let u = g.iter().zip(&pg).map(|(a, b)| a - b).collect();
        Ok(Self { k, f, g, pg, u })
    }

    /// Builds a single-basis-function panel from columns.
    pub fn scalar(f: Vec<f64>, g: Vec<f64>, pg: Vec<f64>) -> Result<Self> {
        Self::new(f, g, pg, 1)
    }

    pub(crate) fn with_capacity(n: usize, k: usize) -> Self {
        Self {
            k,
            f: Vec::with_capacity(n),
            g: Vec::with_capacity(n * k),
            pg: Vec::with_capacity(n * k),
            u: Vec::with_capacity(n * k),
        }
    }

    pub(crate) fn push_row(&mut self, f: f64, g: &[f64], pg: &[f64]) {
        self.f.push(f);
        self.g.extend_from_slice(g);
        self.pg.extend_from_slice(pg);
        self.u.extend(g.iter().zip(pg).map(|(a, b)| a - b));
    }

    pub fn rows(&self) -> usize {
        self.f.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn g_row(&self, i: usize) -> &[f64] {
        &self.g[i * self.k..(i + 1) * self.k]
    }

    pub fn pg_row(&self, i: usize) -> &[f64] {
        &self.pg[i * self.k..(i + 1) * self.k]
    }

    pub fn u_row(&self, i: usize) -> &[f64] {
        &self.u[i * self.k..(i + 1) * self.k]
    }

    pub fn g(&self, i: usize, j: usize) -> f64 {
        self.g[i * self.k + j]
    }

    pub fn pg(&self, i: usize, j: usize) -> f64 {
        self.pg[i * self.k + j]
    }

    pub fn u(&self, i: usize, j: usize) -> f64 {
        self.u[i * self.k + j]
    }

    /// The first `n` rows as a new panel.
    pub fn prefix(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.rows() {
            return Err(Error::Invalid(format!("prefix length {n} outside 1..={}", self.rows())));
        }
        let m = n * self.k;
        Ok(Self {
            k: self.k,
            f: self.f[..n].to_vec(),
            g: self.g[..m].to_vec(),
            pg: self.pg[..m].to_vec(),
            u: self.u[..m].to_vec(),
        })
    }

    /// Column means of `u`.
    pub fn u_means(&self) -> Vec<f64> {
        column_means(&self.u, self.k)
    }
}

pub(crate) fn column_means(data: &[f64], k: usize) -> Vec<f64> {
    let n = data.len() / k.max(1);
    let mut out = vec![0.0; k];
    for row in data.chunks_exact(k) {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= n as f64);
    out
}

/// Evaluates `F`, every `G_j` and every `PG_j` at each trajectory state.
pub fn evaluate_panel(traj: &Trajectory, f: &Functional, basis: &BasisSet) -> Result<ControlVariatePanel> {
    let k = basis.len();
    let mut panel = ControlVariatePanel::with_capacity(traj.len(), k);
    let mut g = vec![0.0; k];
    let mut pg = vec![0.0; k];
    for (i, x) in traj.states().enumerate() {
        let fv = evaluate_row(x, i, f, basis, &mut g, &mut pg)?;
        panel.push_row(fv, &g, &pg);
    }
    Ok(panel)
}

/// Plain ergodic average `(1/n) sum values_i`.
///
/// Values are summed in sorted order with compensation, so any permutation
/// of the input gives a bit-identical result.
pub fn ergodic_average(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Empty("ergodic average"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in sorted {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    Ok((sum + comp) / values.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hand_traj() -> Trajectory {
        Trajectory::from_rows(vec![1.0, 0.5, 2.0, -1.0, 4.0, 3.0], 2, "hand", 0, 0).unwrap()
    }

    #[test]
    fn constant_basis_gives_zero_u() {
        let basis = BasisSet::new(vec![BasisFunction::new("c", |_| 3.5, |_| 3.5)]);
        let p = evaluate_panel(&hand_traj(), &Functional::coordinate(0), &basis).unwrap();
        assert_eq!(p.rows(), 3);
        assert!((0..3).all(|i| p.u(i, 0) == 0.0));
    }

    #[test]
    fn identity_pg_gives_zero_u() {
        let basis = BasisSet::new(vec![BasisFunction::new("x1", |x| x[0], |x| x[0])]);
        let p = evaluate_panel(&hand_traj(), &Functional::coordinate(0), &basis).unwrap();
        assert!((0..3).all(|i| p.u(i, 0) == 0.0));
        assert_eq!(p.f(), &[1.0, 2.0, 4.0]);
    }

    #[test]
    fn panel_shape_and_u() {
        let basis = BasisSet::new(vec![
            BasisFunction::new("x1", |x| x[0], |x| 0.5 * x[0]),
            BasisFunction::new("x2", |x| x[1], |x| x[0] + x[1]),
        ]);
        let p = evaluate_panel(&hand_traj(), &Functional::coordinate(1), &basis).unwrap();
        assert_eq!((p.rows(), p.k()), (3, 2));
        for i in 0..3 {
            for j in 0..2 {
                assert_eq!(p.u(i, j), p.g(i, j) - p.pg(i, j));
            }
        }
        assert_eq!(p.f(), &[0.5, -1.0, 3.0]);
    }

    #[test]
    fn non_finite_names_step_and_function() {
        let basis = BasisSet::new(vec![
            BasisFunction::new("ok", |x| x[0], |x| x[0]),
            BasisFunction::new("bad", |x| x[0], |x| if x[0] > 3.0 { f64::NAN } else { 0.0 }),
        ]);
        let err = evaluate_panel(&hand_traj(), &Functional::coordinate(0), &basis).unwrap_err();
        match err {
            Error::NonFinite { step, function } => {
                assert_eq!(step, 2);
                assert!(function.starts_with("PG2"), "{function}");
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn evaluation_is_deterministic() {
        let basis = BasisSet::new(vec![BasisFunction::new("sin", |x| x[0].sin(), |x| x[1].cos())]);
        let t = hand_traj();
        let f = Functional::new("exp", |x| x[0].exp());
        assert_eq!(
            evaluate_panel(&t, &f, &basis).unwrap(),
            evaluate_panel(&t, &f, &basis).unwrap()
        );
    }

    #[test]
    fn ergodic_average_examples() {
        assert_eq!(ergodic_average(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(ergodic_average(&[0.0, 1.0, 2.0, 3.0]).unwrap(), 1.5);
        assert!(matches!(ergodic_average(&[]), Err(Error::Empty(_))));
    }

    #[test]
    fn trajectory_rejects_short_or_ragged() {
        assert!(Trajectory::from_rows(vec![1.0, 2.0], 2, "s", 0, 0).is_err());
        assert!(Trajectory::from_rows(vec![1.0, 2.0, 3.0], 2, "s", 0, 0).is_err());
        let a = State::new(vec![1.0]).unwrap();
        let b = State::new(vec![1.0, 2.0]).unwrap();
        assert!(Trajectory::from_states(&[a, b], "s", 0, 0).is_err());
        assert!(State::new(vec![f64::INFINITY]).is_err());
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn average_is_permutation_invariant(mut v in proptest::collection::vec(-1e3f64..1e3, 1..50), seed in any::<u64>()) {
                let a = ergodic_average(&v).unwrap();
                // deterministic shuffle
                let n = v.len();
                let mut s = seed;
                for i in (1..n).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    v.swap(i, (s >> 33) as usize % (i + 1));
                }
                let b = ergodic_average(&v).unwrap();
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
