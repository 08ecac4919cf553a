//! Posterior on a one-dimensional parameter grid by direct normalisation.

use serde::{Deserialize, Serialize};

use super::forward::{ForwardCache, ForwardModel, Scenario};
use super::observation::ObservationSet;
use super::potential::{PosteriorPotential, Potential};
use super::prior::PriorSpec;
use crate::error::{Error, Result};
use crate::exec::Exec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub masses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub samples: Vec<f64>,
    pub acceptance_rate: f64,
    pub histogram: Histogram,
    pub map_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraturePosterior {
    pub grid: Vec<f64>,
    pub potentials: Vec<f64>,
    /// Trapezoid-weighted masses, summing to 1.
    pub masses: Vec<f64>,
    /// Normalised density values at the nodes.
    pub density: Vec<f64>,
    pub map_estimate: f64,
    pub mean: f64,
}

impl QuadraturePosterior {
    pub fn histogram(&self) -> Histogram {
        Histogram {
            edges: bin_edges(&self.grid),
            masses: self.masses.clone(),
        }
    }

    pub fn summary(&self) -> PosteriorSummary {
        PosteriorSummary {
            samples: Vec::new(),
            acceptance_rate: 1.0,
            histogram: self.histogram(),
            map_estimate: self.map_estimate,
        }
    }

    /// Mass of each bin under the piecewise-linear interpolant of the density.
    /// Bins outside the grid get zero; with edges spanning the grid the masses sum to 1.
    pub fn bin_masses(&self, edges: &[f64]) -> Result<Vec<f64>> {
        check_grid(edges)?;
        let rho = |i: usize, x: f64| {
            let (x0, x1) = (self.grid[i], self.grid[i + 1]);
            let s = (x - x0) / (x1 - x0);
            self.density[i] * (1.0 - s) + self.density[i + 1] * s
        };
        Ok(edges
            .windows(2)
            .map(|e| {
                let mut m = 0.0;
                for i in 0..self.grid.len() - 1 {
                    let l = e[0].max(self.grid[i]);
                    let r = e[1].min(self.grid[i + 1]);
                    if r > l {
                        m += 0.5 * (r - l) * (rho(i, l) + rho(i, r));
                    }
                }
                m
            })
            .collect())
    }
}

/// `n` equally spaced points on `[lo, hi]`.
pub fn gamma_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::input("parameter grid needs >= 2 strictly increasing nodes"));
    }
    Ok(())
}

fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { grid[i] - grid[i - 1] } else { 0.0 };
            let right = if i + 1 < n { grid[i + 1] - grid[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Bin edges at the midpoints between nodes; the outer edges are the end nodes.
pub fn bin_edges(grid: &[f64]) -> Vec<f64> {
    let mut edges = Vec::with_capacity(grid.len() + 1);
    edges.push(grid[0]);
    edges.extend(grid.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    edges.push(grid[grid.len() - 1]);
    edges
}

/// Normalises `exp(-V)` on the grid with trapezoid weights.
pub fn posterior_from_potentials(grid: &[f64], potentials: Vec<f64>) -> Result<QuadraturePosterior> {
    check_grid(grid)?;
    if potentials.len() != grid.len() {
        return Err(Error::input("one potential value per grid node required"));
    }
    if potentials.iter().any(|v| v.is_nan()) {
        return Err(Error::DegeneratePosterior("potential is NaN on the grid".into()));
    }
    let vmin = potentials.iter().copied().fold(f64::INFINITY, f64::min);
    if !vmin.is_finite() {
        return Err(Error::DegeneratePosterior("likelihood vanishes on the whole grid".into()));
    }
    let w = trapezoid_weights(grid);
    let unnorm: Vec<f64> = potentials.iter().map(|v| (vmin - v).exp()).collect();
    let z: f64 = unnorm.iter().zip(&w).map(|(p, w)| p * w).sum();
    if !(z > 0.0) {
        return Err(Error::DegeneratePosterior("zero normalising constant".into()));
    }
    let masses: Vec<f64> = unnorm.iter().zip(&w).map(|(p, w)| p * w / z).collect();
    let density: Vec<f64> = unnorm.iter().map(|p| p / z).collect();
    let (imax, _) = potentials
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty grid");
    let mean = grid.iter().zip(&masses).map(|(g, m)| g * m).sum();
    Ok(QuadraturePosterior {
        grid: grid.to_vec(),
        potentials,
        masses,
        density,
        map_estimate: grid[imax],
        mean,
    })
}

/// Evaluates `V` at every node (concurrently when allowed) and normalises.
pub fn quadrature_posterior(pot: &dyn Potential, grid: &[f64], exec: Exec) -> Result<QuadraturePosterior> {
    check_grid(grid)?;
    let v = exec.try_map(grid, |g| pot.value(*g))?;
    posterior_from_potentials(grid, v)
}

/// Fraction of samples in each bin centred on a grid node.
pub fn histogram_on_grid(samples: &[f64], grid: &[f64]) -> Result<Histogram> {
    check_grid(grid)?;
    histogram_with_edges(samples, bin_edges(grid))
}

/// Fraction of samples per bin; samples outside the edges count toward the end bins.
pub fn histogram_with_edges(samples: &[f64], edges: Vec<f64>) -> Result<Histogram> {
    check_grid(&edges)?;
    let nb = edges.len() - 1;
    let mut counts = vec![0usize; nb];
    for s in samples {
        let i = edges[1..nb].partition_point(|e| e <= s);
        counts[i] += 1;
    }
    let n = samples.len().max(1) as f64;
    Ok(Histogram {
        edges,
        masses: counts.iter().map(|c| *c as f64 / n).collect(),
    })
}

/// Half the L1 distance between two mass vectors on a shared grid.
pub fn tv_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::input("distributions live on different grids"));
    }
    Ok(0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>())
}

/// For each `n`, the TV distance between the quadrature posteriors built on
/// `n`- and `2n`-step forward solves.
pub fn posterior_tv_convergence(
    scenario: &Scenario,
    obs: &ObservationSet,
    prior: &PriorSpec,
    grid: &[f64],
    n_list: &[usize],
    data_weight: f64,
    exec: Exec,
) -> Result<Vec<(usize, f64)>> {
    if n_list.is_empty() || n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::input("n_list must be nonempty and increasing"));
    }
    let mut ns: Vec<usize> = n_list.iter().flat_map(|n| [*n, 2 * n]).collect();
    ns.sort_unstable();
    ns.dedup();
    let cache = std::sync::Arc::new(ForwardCache::new());
    let mut posts = Vec::with_capacity(ns.len());
    for n in &ns {
        let fm = ForwardModel::with_cache(
            scenario.with_steps(*n),
            obs.windows().to_vec(),
            obs.times().to_vec(),
            cache.clone(),
        )?;
        let mut pot = PosteriorPotential::new(fm, obs.clone(), *prior)?;
        pot.data_weight = data_weight;
        posts.push(quadrature_posterior(&pot, grid, exec)?);
    }
    let post = |n: usize| &posts[ns.binary_search(&n).expect("computed")];
    n_list
        .iter()
        .map(|n| Ok((*n, tv_distance(&post(*n).masses, &post(2 * n).masses)?)))
        .collect()
}
