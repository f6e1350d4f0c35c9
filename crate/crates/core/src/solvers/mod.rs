//! Exact ground-state solvers.
//!
//! Three independent exact routes are provided (exhaustive enumeration,
//! frontier dynamic programming, and weighted MAX-2-SAT branch and bound),
//! plus a simulated-annealing heuristic used only as a sanity bound.

mod anneal;
mod brute;
mod frontier;
pub mod maxsat;
pub mod wcnf;

use std::time::Duration;

use serde::{Deserialize, Serialize};

pub use anneal::{solve_anneal, AnnealParams};
pub use brute::{solve_brute, BRUTE_LIMIT};
pub use frontier::{
    bfs_order, default_order, frontier_width, solve_frontier, solve_frontier_with, FrontierOptions,
    DEFAULT_MAX_WIDTH,
};
pub use maxsat::{qubo_to_max2sat, solve_bnb, BnbOptions, MaxSatInstance, MaxSatSolution, DEFAULT_SCALE};

use crate::error::{Error, Result};
use crate::model::{IsingModel, SpinConfig};

/// Energies closer than this are treated as equal.
pub const ENERGY_TOL: f64 = 1e-9;

/// Vertex count up to which [`auto_solve`] enumerates.
pub const AUTO_BRUTE_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverId {
    Brute,
    Frontier,
    Bnb,
    Anneal,
}

impl SolverId {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolverId::Brute => "brute",
            SolverId::Frontier => "frontier",
            SolverId::Bnb => "bnb",
            SolverId::Anneal => "anneal",
        }
    }
}

impl std::str::FromStr for SolverId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brute" => Ok(SolverId::Brute),
            "frontier" => Ok(SolverId::Frontier),
            "bnb" => Ok(SolverId::Bnb),
            "anneal" => Ok(SolverId::Anneal),
            other => Err(Error::Config(format!("unknown solver '{other}'"))),
        }
    }
}

impl std::fmt::Display for SolverId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    /// Configurations enumerated, DP table entries touched, or search nodes.
    pub work: u64,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundResult {
    pub config: SpinConfig,
    pub value: f64,
    /// Number of optimal configurations; only enumeration counts them.
    pub degeneracy: Option<u64>,
    /// Lowest energy of any configuration other than `config` (and, when the
    /// model has no fields, other than its global flip).
    pub second_value: Option<f64>,
    pub solver_id: SolverId,
    /// False for heuristic results and budget-limited searches.
    pub exact: bool,
    pub stats: SolverStats,
}

impl GroundResult {
    /// Second-best level within `tol` of the optimum.
    pub fn near_degenerate(&self, tol: f64) -> bool {
        self.second_value.is_some_and(|s| s - self.value <= tol)
    }
}

/// Neighbor lists over nonzero couplings only.
#[derive(Debug, Clone)]
pub(crate) struct LocalTerms {
    pub nbrs: Vec<Vec<(usize, f64)>>,
    pub fields: Vec<f64>,
}

impl LocalTerms {
    pub fn new(m: &IsingModel) -> Self {
        let mut nbrs = vec![Vec::new(); m.vertex_count()];
        for (e, j) in m.couplings() {
            nbrs[e.lo].push((e.hi, j));
            nbrs[e.hi].push((e.lo, j));
        }
        LocalTerms { nbrs, fields: m.dense_fields() }
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    /// `h_v + Σ_u J_uv s_u`.
    pub fn local_field(&self, v: usize, s: &[i8]) -> f64 {
        self.fields[v] + self.nbrs[v].iter().map(|&(u, j)| j * f64::from(s[u])).sum::<f64>()
    }
}

/// Which solver [`auto_solve`] would pick, with the frontier order if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverPlan {
    Brute,
    Frontier { order: Vec<usize>, width: usize },
    Bnb,
}

impl SolverPlan {
    pub fn solver_id(&self) -> SolverId {
        match self {
            SolverPlan::Brute => SolverId::Brute,
            SolverPlan::Frontier { .. } => SolverId::Frontier,
            SolverPlan::Bnb => SolverId::Bnb,
        }
    }
}

pub fn plan_solver(m: &IsingModel) -> SolverPlan {
    if m.vertex_count() <= AUTO_BRUTE_LIMIT {
        return SolverPlan::Brute;
    }
    let order = default_order(m);
    let width = frontier_width(m, &order).expect("default order is a permutation");
    if width <= DEFAULT_MAX_WIDTH {
        SolverPlan::Frontier { order, width }
    } else {
        SolverPlan::Bnb
    }
}

/// Brute force for small models, frontier DP when a narrow order exists,
/// otherwise branch and bound through the MAX-2-SAT reduction.
pub fn auto_solve(m: &IsingModel) -> Result<GroundResult> {
    match plan_solver(m) {
        SolverPlan::Brute => solve_brute(m),
        SolverPlan::Frontier { order, .. } => solve_frontier(m, Some(&order)),
        SolverPlan::Bnb => solve_via_maxsat(m, DEFAULT_SCALE, &BnbOptions::default()),
    }
}

/// Runs one named solver. Annealing uses [`AnnealParams::default`].
pub fn solve_with(m: &IsingModel, solver: SolverId) -> Result<GroundResult> {
    match solver {
        SolverId::Brute => solve_brute(m),
        SolverId::Frontier => solve_frontier(m, None),
        SolverId::Bnb => solve_via_maxsat(m, DEFAULT_SCALE, &BnbOptions::default()),
        SolverId::Anneal => Ok(solve_anneal(m, &AnnealParams::default())),
    }
}

/// Reduces to weighted MAX-2-SAT, solves by branch and bound, and maps the
/// optimal assignment back. The returned value is the exact energy of that
/// configuration under `m`.
pub fn solve_via_maxsat(m: &IsingModel, scale: u64, opts: &BnbOptions) -> Result<GroundResult> {
    let start = std::time::Instant::now();
    let inst = qubo_to_max2sat(m, scale);
    let sol = solve_bnb(&inst, opts);
    let config = maxsat::assignment_to_spins(&sol.assignment);
    let value = m.energy(&config)?;
    Ok(GroundResult {
        config,
        value,
        degeneracy: None,
        second_value: None,
        solver_id: SolverId::Bnb,
        exact: sol.exact,
        stats: SolverStats { work: sol.nodes, wall_time: start.elapsed() },
    })
}

pub(crate) mod duration_secs {
    use serde::{Deserialize, Deserializer, Serializer};
    use std::time::Duration;

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        Ok(Duration::from_secs_f64(f64::deserialize(d)?))
    }
}
