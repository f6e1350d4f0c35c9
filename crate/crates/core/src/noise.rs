//! Random control-error Hamiltonians.
//!
//! Every error term is drawn from its own counter-derived stream keyed by
//! `(master_seed, trial_index, site)`, so a trial's noise does not depend on
//! thread count, scheduling, or the order in which sites are visited.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};

use crate::graph::{Edge, Graph};
use crate::model::IsingModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseDistribution {
    /// Uniform on `[-eps_max, eps_max]`.
    #[default]
    Uniform,
    /// Zero-mean normal with standard deviation `eps_max`.
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub eps_max: f64,
    #[serde(default)]
    pub perturb_fields: bool,
    #[serde(default = "default_true")]
    pub perturb_penalty_links: bool,
    #[serde(default)]
    pub distribution: NoiseDistribution,
}

fn default_true() -> bool {
    true
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec::uniform(0.0)
    }
}

impl NoiseSpec {
    /// Uniform coupling noise, no field noise, penalty links perturbed.
    pub fn uniform(eps_max: f64) -> Self {
        NoiseSpec {
            eps_max,
            perturb_fields: false,
            perturb_penalty_links: true,
            distribution: NoiseDistribution::Uniform,
        }
    }

    pub fn with_eps(self, eps_max: f64) -> Self {
        NoiseSpec { eps_max, ..self }
    }

    /// Analytic root-mean-square of a single error term.
    pub fn eps_rms(&self) -> f64 {
        match self.distribution {
            NoiseDistribution::Uniform => self.eps_max / 3f64.sqrt(),
            NoiseDistribution::Gaussian => self.eps_max,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.eps_max.is_finite() && self.eps_max >= 0.0) {
            return Err(format!("eps_max must be finite and >= 0, got {}", self.eps_max));
        }
        Ok(())
    }

    fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.eps_max == 0.0 {
            return 0.0;
        }
        match self.distribution {
            NoiseDistribution::Uniform => Uniform::new_inclusive(-self.eps_max, self.eps_max)
                .expect("valid bounds")
                .sample(rng),
            NoiseDistribution::Gaussian => Normal::new(0.0, self.eps_max).expect("valid sigma").sample(rng),
        }
    }
}

/// Identifies the random stream of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TrialSeed {
    pub master_seed: u64,
    pub trial_index: u64,
}

impl TrialSeed {
    pub fn new(master_seed: u64, trial_index: u64) -> Self {
        TrialSeed { master_seed, trial_index }
    }
}

/// Logical address of an error term. Replica `r` of a problem coupling or
/// field shares its stream with the unencoded term when `r == 0`, so an
/// encoded instance sees the same draw as its unencoded parent on replica 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Site {
    Coupling { rank: usize, replica: usize },
    Field { vertex: usize, replica: usize },
    Penalty { block: usize, link: usize },
}

impl Site {
    fn key(self) -> [u64; 3] {
        match self {
            Site::Coupling { rank, replica } => [1, rank as u64, replica as u64],
            Site::Field { vertex, replica } => [2, vertex as u64, replica as u64],
            Site::Penalty { block, link } => [3, block as u64, link as u64],
        }
    }
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive hash of a word sequence.
pub fn derive_seed(words: &[u64]) -> u64 {
    words.iter().fold(0x6A09_E667_F3BC_C908, |acc, &w| mix64(acc ^ mix64(w)))
}

fn site_rng(seed: TrialSeed, site: Site) -> ChaCha8Rng {
    let [a, b, c] = site.key();
    ChaCha8Rng::seed_from_u64(derive_seed(&[seed.master_seed, seed.trial_index, a, b, c]))
}

/// One error value for `site` in trial `seed`.
pub fn draw_site(spec: &NoiseSpec, seed: TrialSeed, site: Site) -> f64 {
    spec.sample(&mut site_rng(seed, site))
}

/// Error Hamiltonian on `m`'s hardware graph: an independent error on every
/// edge (including edges with `J = 0`) and, if enabled, on every vertex.
pub fn draw_error_model(m: &IsingModel, spec: &NoiseSpec, seed: TrialSeed) -> IsingModel {
    let graph = m.graph();
    draw_error_model_with(
        m,
        spec,
        seed,
        |e| Site::Coupling { rank: graph.edge_rank(e).expect("edge of graph"), replica: 0 },
        |v| Site::Field { vertex: v, replica: 0 },
    )
}

/// Like [`draw_error_model`] with caller-chosen site addressing. Sites that
/// map to [`Site::Penalty`] are skipped unless `perturb_penalty_links`.
pub fn draw_error_model_with(
    m: &IsingModel,
    spec: &NoiseSpec,
    seed: TrialSeed,
    edge_site: impl Fn(Edge) -> Site,
    vertex_site: impl Fn(usize) -> Site,
) -> IsingModel {
    let graph: &Graph = m.graph();
    if spec.eps_max == 0.0 {
        return IsingModel::zero(m.shared_graph().clone());
    }
    let couplings: Vec<(Edge, f64)> = graph
        .edges()
        .iter()
        .filter_map(|&e| {
            let site = edge_site(e);
            if matches!(site, Site::Penalty { .. }) && !spec.perturb_penalty_links {
                None
            } else {
                Some((e, draw_site(spec, seed, site)))
            }
        })
        .collect();
    let fields: Vec<(usize, f64)> = if spec.perturb_fields {
        (0..graph.vertex_count()).map(|v| (v, draw_site(spec, seed, vertex_site(v)))).collect()
    } else {
        Vec::new()
    };
    IsingModel::with_attained_bound(m.shared_graph().clone(), couplings, fields).expect("noise on graph edges")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_ladder_instance;

    #[test]
    fn eps_rms_values() {
        assert_eq!(NoiseSpec::uniform(0.0).eps_rms(), 0.0);
        assert!((NoiseSpec::uniform(0.3).eps_rms() - 0.173_205_080_756_887_7).abs() < 1e-12);
        let g = NoiseSpec { distribution: NoiseDistribution::Gaussian, ..NoiseSpec::uniform(0.2) };
        assert_eq!(g.eps_rms(), 0.2);
    }

    #[test]
    fn zero_eps_gives_zero_model() {
        let m = make_ladder_instance(5, 0).unwrap();
        let dh = draw_error_model(&m, &NoiseSpec::uniform(0.0), TrialSeed::new(1, 2));
        assert_eq!(dh.nonzero_coupling_count(), 0);
        assert!(!dh.has_fields());
    }

    #[test]
    fn every_hardware_edge_is_perturbed() {
        let m = make_ladder_instance(8, 0).unwrap();
        let spec = NoiseSpec::uniform(0.3);
        let dh = draw_error_model(&m, &spec, TrialSeed::new(7, 0));
        assert_eq!(dh.nonzero_coupling_count(), m.graph().edge_count());
        assert!(!dh.has_fields());
        assert!(dh.couplings().all(|(_, e)| e.abs() <= 0.3));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let m = make_ladder_instance(6, 0).unwrap();
        let spec = NoiseSpec { perturb_fields: true, ..NoiseSpec::uniform(0.3) };
        let a = draw_error_model(&m, &spec, TrialSeed::new(42, 3)).to_file();
        let b = draw_error_model(&m, &spec, TrialSeed::new(42, 3)).to_file();
        let c = draw_error_model(&m, &spec, TrialSeed::new(42, 4)).to_file();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.fields.len(), 12);
    }

    #[test]
    fn empirical_rms_within_one_percent() {
        let spec = NoiseSpec::uniform(0.3);
        let n = 1_000_000u64;
        let sum_sq: f64 = (0..n)
            .map(|t| draw_site(&spec, TrialSeed::new(9, t), Site::Coupling { rank: 0, replica: 0 }).powi(2))
            .sum();
        let rms = (sum_sq / n as f64).sqrt();
        assert!((rms / spec.eps_rms() - 1.0).abs() < 0.01, "rms {rms}");
    }

    #[test]
    fn empirical_mean_is_zero() {
        let spec = NoiseSpec::uniform(0.3);
        let n = 100_000u64;
        let mean: f64 =
            (0..n).map(|t| draw_site(&spec, TrialSeed::new(5, t), Site::Coupling { rank: 3, replica: 0 })).sum::<f64>()
                / n as f64;
        assert!(mean.abs() < 4.0 * spec.eps_rms() / (n as f64).sqrt(), "mean {mean}");
    }

    #[test]
    fn distinct_edges_uncorrelated() {
        let spec = NoiseSpec::uniform(0.3);
        let n = 10_000u64;
        let pairs: Vec<(f64, f64)> = (0..n)
            .map(|t| {
                let s = TrialSeed::new(11, t);
                (
                    draw_site(&spec, s, Site::Coupling { rank: 0, replica: 0 }),
                    draw_site(&spec, s, Site::Coupling { rank: 1, replica: 0 }),
                )
            })
            .collect();
        let (mx, my) = pairs.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (mx / n as f64, my / n as f64);
        let cov: f64 = pairs.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
        let vx: f64 = pairs.iter().map(|(x, _)| (x - mx).powi(2)).sum();
        let vy: f64 = pairs.iter().map(|(_, y)| (y - my).powi(2)).sum();
        let corr = cov / (vx * vy).sqrt();
        assert!(corr.abs() < 0.05, "corr {corr}");
    }

    #[test]
    fn penalty_sites_can_be_skipped() {
        let m = make_ladder_instance(3, 0).unwrap();
        let spec = NoiseSpec { perturb_penalty_links: false, ..NoiseSpec::uniform(0.3) };
        let dh = draw_error_model_with(
            &m,
            &spec,
            TrialSeed::new(1, 1),
            |e| Site::Penalty { block: e.lo, link: 0 },
            |v| Site::Field { vertex: v, replica: 0 },
        );
        assert_eq!(dh.nonzero_coupling_count(), 0);
    }
}
