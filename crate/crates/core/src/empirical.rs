//! One-dimensional empirical measures with uniform weights.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::stream_rng;
use crate::{Error, Result};

/// Sorted atoms of an empirical measure, each carrying mass `1/n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDist {
    atoms: Vec<f64>,
}

impl EmpiricalDist {
    pub fn new(mut atoms: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::Empty("empirical distribution needs at least one atom"));
        }
        if let Some(bad) = atoms.iter().find(|a| !a.is_finite()) {
            return Err(Error::NonFinite(format!("atom {bad}")));
        }
        atoms.sort_unstable_by(f64::total_cmp);
        Ok(EmpiricalDist { atoms })
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn into_atoms(self) -> Vec<f64> {
        self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.atoms[0]
    }

    pub fn max(&self) -> f64 {
        self.atoms[self.atoms.len() - 1]
    }

    /// `#{atoms <= x} / n`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms.partition_point(|&a| a <= x) as f64 / self.len() as f64
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().sum::<f64>() / self.len() as f64
    }

    /// Sample standard deviation (divisor `n - 1`); zero for a single atom.
    pub fn sd(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        let m = self.mean();
        let ss: f64 = self.atoms.iter().map(|a| (a - m) * (a - m)).sum();
        (ss / (n - 1) as f64).sqrt()
    }

    /// Order statistic of 1-based rank `k`, clamped to `1..=n`.
    pub fn order_stat(&self, rank: usize) -> f64 {
        self.atoms[rank.clamp(1, self.len()) - 1]
    }

    /// Empirical quantile `inf{x : F(x) >= p}`, i.e. the order statistic at rank `⌈np⌉`.
    pub fn quantile(&self, p: f64) -> f64 {
        self.order_stat(ceil_rank(p, self.len()))
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.atoms[rng.random_range(0..self.len())]
    }

    pub fn scaled(&self, a: f64) -> Result<Self> {
        EmpiricalDist::new(self.atoms.iter().map(|x| a * x).collect())
    }

    pub fn shifted(&self, c: f64) -> Result<Self> {
        EmpiricalDist::new(self.atoms.iter().map(|x| x + c).collect())
    }
}

/// `⌈n p⌉` guarded against representation error in `n p` (e.g. `0.99 * 500`).
pub(crate) fn ceil_rank(p: f64, n: usize) -> usize {
    let x = p * n as f64;
    let r = x.round();
    let k = if (x - r).abs() <= 1e-9 * x.abs().max(1.0) { r } else { x.ceil() };
    (k as usize).clamp(1, n)
}

/// Uniform draw from the atoms, i.e. one realisation of the plug-in `Ẑₙ = β̂ᵀX*`.
pub fn draw_plugin(dist: &EmpiricalDist, seed: u64) -> f64 {
    dist.draw(&mut stream_rng(seed, 0))
}
