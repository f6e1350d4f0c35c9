use std::time::Instant;

use super::{GroundResult, LocalTerms, SolverId, SolverStats, ENERGY_TOL};
use crate::error::{Error, Result};
use crate::model::{IsingModel, SpinConfig};

/// Largest vertex count the enumerator accepts.
pub const BRUTE_LIMIT: usize = 24;

/// Exact energies are recomputed this often to stop incremental drift.
const RESYNC_PERIOD: u64 = 1 << 12;

/// Exhaustive Gray-code enumeration with incremental energy updates.
///
/// Without fields the model is flip-symmetric, so the last spin is pinned to
/// +1 and the optimum count doubled.
pub fn solve_brute(m: &IsingModel) -> Result<GroundResult> {
    let n = m.vertex_count();
    if n > BRUTE_LIMIT {
        return Err(Error::TooLarge { vertices: n, limit: BRUTE_LIMIT });
    }
    let start = Instant::now();
    let terms = LocalTerms::new(m);
    let symmetric = !m.has_fields() && n > 0;
    let free = if symmetric { n - 1 } else { n };

    let mut spins = vec![1i8; n];
    let mut local: Vec<f64> = (0..n).map(|v| terms.local_field(v, &spins)).collect();
    let mut energy = m.energy_unchecked(&spins);

    let mut best = energy;
    let mut best_gray = 0u64;
    let mut second = f64::INFINITY;
    let mut count = 1u64;

    let total = 1u64 << free;
    for t in 1..total {
        let v = t.trailing_zeros() as usize;
        let old = f64::from(spins[v]);
        energy -= 2.0 * old * local[v];
        spins[v] = -spins[v];
        for &(u, j) in &terms.nbrs[v] {
            local[u] -= 2.0 * j * old;
        }
        if t % RESYNC_PERIOD == 0 {
            energy = m.energy_unchecked(&spins);
            for (u, l) in local.iter_mut().enumerate() {
                *l = terms.local_field(u, &spins);
            }
        }

        if energy < best - ENERGY_TOL {
            second = best;
            best = energy;
            best_gray = t ^ (t >> 1);
            count = 1;
        } else if energy <= best + ENERGY_TOL {
            count += 1;
            if energy < best {
                second = best;
                best = energy;
                best_gray = t ^ (t >> 1);
            } else {
                second = second.min(energy);
            }
        } else {
            second = second.min(energy);
        }
    }

    let config = SpinConfig::from_bits(best_gray, n);
    let value = m.energy_unchecked(config.spins());
    Ok(GroundResult {
        config,
        value,
        degeneracy: Some(if symmetric { 2 * count } else { count }),
        second_value: (total > 1).then_some(second),
        solver_id: SolverId::Brute,
        exact: true,
        stats: SolverStats { work: total, wall_time: start.elapsed() },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{self, Edge};
    use crate::model::make_ladder_instance;
    use std::sync::Arc;

    #[test]
    fn single_vertex_positive_field() {
        let g = Arc::new(graph::build_path(1));
        let m = IsingModel::new(g, [], [(0, 1.0)], 1.0).unwrap();
        let r = solve_brute(&m).unwrap();
        assert_eq!(r.config.spins(), &[-1]);
        assert_eq!(r.value, -1.0);
        assert_eq!(r.degeneracy, Some(1));
    }

    #[test]
    fn frustrated_triangle() {
        let g = Arc::new(graph::build_complete(3));
        let couplings: Vec<(Edge, f64)> = g.edges().iter().map(|e| (*e, 1.0)).collect();
        let m = IsingModel::new(g, couplings, [], 1.0).unwrap();
        let r = solve_brute(&m).unwrap();
        assert_eq!(r.value, -1.0);
        assert_eq!(r.degeneracy, Some(6));
        assert!(r.near_degenerate(1e-9));
    }

    #[test]
    fn ladder4() {
        let m = make_ladder_instance(4, 0).unwrap();
        let r = solve_brute(&m).unwrap();
        assert_eq!(r.value, -7.0);
        assert_eq!(r.degeneracy, Some(2));
        // Breaking one chain bond is the cheapest excitation.
        assert_eq!(r.second_value, Some(-5.0));
    }

    #[test]
    fn refuses_large() {
        let m = make_ladder_instance(13, 0).unwrap();
        assert!(matches!(solve_brute(&m), Err(Error::TooLarge { vertices: 26, .. })));
    }
}
