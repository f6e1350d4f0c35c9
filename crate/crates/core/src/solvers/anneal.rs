use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{GroundResult, LocalTerms, SolverId, SolverStats};
use crate::model::{IsingModel, SpinConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealParams {
    pub sweeps: usize,
    pub restarts: usize,
    pub beta_start: f64,
    pub beta_end: f64,
    pub seed: u64,
}

impl Default for AnnealParams {
    fn default() -> Self {
        AnnealParams { sweeps: 1000, restarts: 8, beta_start: 0.1, beta_end: 10.0, seed: 0 }
    }
}

fn geometric_schedule(b0: f64, b1: f64, steps: usize) -> Vec<f64> {
    if steps <= 1 {
        return vec![b1; steps];
    }
    let ratio = (b1 / b0).ln() / (steps - 1) as f64;
    (0..steps).map(|i| b0 * (ratio * i as f64).exp()).collect()
}

/// Single-spin Metropolis annealing on a geometric inverse-temperature
/// schedule. Heuristic: the result is an upper bound on the ground energy.
pub fn solve_anneal(m: &IsingModel, params: &AnnealParams) -> GroundResult {
    let start = Instant::now();
    let terms = LocalTerms::new(m);
    let n = terms.len();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let schedule = geometric_schedule(params.beta_start, params.beta_end, params.sweeps);

    let mut best_spins = vec![1i8; n];
    let mut best_energy = m.energy_unchecked(&best_spins);
    let mut work = 0u64;
    for _ in 0..params.restarts.max(1) {
        let mut spins: Vec<i8> = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let mut local: Vec<f64> = (0..n).map(|v| terms.local_field(v, &spins)).collect();
        let mut energy = m.energy_unchecked(&spins);
        for &beta in &schedule {
            for v in 0..n {
                let old = f64::from(spins[v]);
                let delta = -2.0 * old * local[v];
                if delta <= 0.0 || rng.random::<f64>() < (-beta * delta).exp() {
                    spins[v] = -spins[v];
                    energy += delta;
                    for &(u, j) in &terms.nbrs[v] {
                        local[u] -= 2.0 * j * old;
                    }
                    if energy < best_energy {
                        best_energy = energy;
                        best_spins.copy_from_slice(&spins);
                    }
                }
            }
            work += n as u64;
        }
    }
    let config = SpinConfig::new(best_spins).expect("±1 spins");
    let value = m.energy_unchecked(config.spins());
    GroundResult {
        config,
        value,
        degeneracy: None,
        second_value: None,
        solver_id: SolverId::Anneal,
        exact: false,
        stats: SolverStats { work, wall_time: start.elapsed() },
    }
}
