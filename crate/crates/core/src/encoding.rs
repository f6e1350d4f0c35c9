//! Repetition encoding: every logical spin becomes a block of `K` physical
//! spins tied together by ferromagnetic links along a code graph `F`, and the
//! problem couplings are replicated once per block member. The physical
//! interaction graph is `G □ F`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, Edge, Graph};
use crate::model::{IsingModel, SpinConfig};
use crate::noise::{self, NoiseSpec, Site, TrialSeed};

#[derive(Debug, Clone)]
pub struct RepetitionEncoding {
    code_graph: Arc<Graph>,
    j_ferro: f64,
}

impl RepetitionEncoding {
    pub fn new(code_graph: Graph, j_ferro: f64) -> Result<Self> {
        if !(j_ferro.is_finite() && j_ferro > 0.0) {
            return Err(Error::InvalidEncoding(format!("j_ferro must be positive, got {j_ferro}")));
        }
        if !code_graph.is_connected() {
            return Err(Error::InvalidEncoding("code graph must be connected".into()));
        }
        Ok(RepetitionEncoding { code_graph: Arc::new(code_graph), j_ferro })
    }

    /// The trivial `K = 1` encoding.
    pub fn identity() -> Self {
        RepetitionEncoding { code_graph: Arc::new(graph::build_path(1)), j_ferro: 1.0 }
    }

    pub fn code_graph(&self) -> &Graph {
        &self.code_graph
    }

    pub fn j_ferro(&self) -> f64 {
        self.j_ferro
    }

    /// Block size `K = |V_F|`.
    pub fn k(&self) -> usize {
        self.code_graph.vertex_count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeShape {
    Path,
    Grid,
    Complete,
}

/// Serializable description of an encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncodingDescriptor {
    pub code_graph: CodeShape,
    /// `[K]` for path and complete, `[rows, cols]` for grid.
    pub dims: Vec<usize>,
    #[serde(default = "default_j_ferro")]
    pub j_ferro: f64,
}

fn default_j_ferro() -> f64 {
    1.0
}

impl EncodingDescriptor {
    pub fn path(k: usize) -> Self {
        EncodingDescriptor { code_graph: CodeShape::Path, dims: vec![k], j_ferro: 1.0 }
    }

    pub fn grid(rows: usize, cols: usize) -> Self {
        EncodingDescriptor { code_graph: CodeShape::Grid, dims: vec![rows, cols], j_ferro: 1.0 }
    }

    pub fn complete(k: usize) -> Self {
        EncodingDescriptor { code_graph: CodeShape::Complete, dims: vec![k], j_ferro: 1.0 }
    }

    pub fn k(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn label(&self) -> String {
        let dims: Vec<String> = self.dims.iter().map(ToString::to_string).collect();
        let shape = match self.code_graph {
            CodeShape::Path => "path",
            CodeShape::Grid => "grid",
            CodeShape::Complete => "complete",
        };
        format!("{shape}{}", dims.join("x"))
    }

    pub fn build(&self) -> Result<RepetitionEncoding> {
        if self.dims.contains(&0) {
            return Err(Error::InvalidEncoding("dimensions must be positive".into()));
        }
        let graph = match (self.code_graph, self.dims.as_slice()) {
            (CodeShape::Path, &[k]) => graph::build_path(k),
            (CodeShape::Complete, &[k]) => graph::build_complete(k),
            (CodeShape::Grid, &[r, c]) => graph::build_grid(r, c),
            (shape, dims) => {
                return Err(Error::InvalidEncoding(format!("{shape:?} code cannot take dims {dims:?}")));
            }
        };
        RepetitionEncoding::new(graph, self.j_ferro)
    }
}

/// A physical model on `G □ F` together with the layout needed to address
/// blocks and route noise to the right sites.
#[derive(Debug, Clone)]
pub struct EncodedModel {
    pub physical: IsingModel,
    logical_graph: Arc<Graph>,
    code_graph: Arc<Graph>,
    j_ferro: f64,
}

impl EncodedModel {
    pub fn k(&self) -> usize {
        self.code_graph.vertex_count()
    }

    pub fn logical_vertices(&self) -> usize {
        self.logical_graph.vertex_count()
    }

    pub fn logical_graph(&self) -> &Graph {
        &self.logical_graph
    }

    pub fn code_graph(&self) -> &Graph {
        &self.code_graph
    }

    pub fn is_penalty_edge(&self, e: Edge) -> bool {
        e.lo / self.k() == e.hi / self.k()
    }

    /// Noise address of a physical edge.
    pub fn edge_site(&self, e: Edge) -> Site {
        let k = self.k();
        let (i, a) = (e.lo / k, e.lo % k);
        let (j, b) = (e.hi / k, e.hi % k);
        if i == j {
            let link = self.code_graph.edge_rank(Edge::new(a, b)).expect("code edge");
            Site::Penalty { block: i, link }
        } else {
            debug_assert_eq!(a, b);
            let rank = self.logical_graph.edge_rank(Edge::new(i, j)).expect("logical edge");
            Site::Coupling { rank, replica: a }
        }
    }

    pub fn vertex_site(&self, v: usize) -> Site {
        Site::Field { vertex: v / self.k(), replica: v % self.k() }
    }

    /// Error Hamiltonian on the physical graph. Replica 0 of every problem
    /// term sees the same draw as the unencoded model under the same seed.
    pub fn draw_error(&self, spec: &NoiseSpec, seed: TrialSeed) -> IsingModel {
        noise::draw_error_model_with(&self.physical, spec, seed, |e| self.edge_site(e), |v| self.vertex_site(v))
    }

    /// Physical codeword whose blocks all copy the logical spin.
    pub fn codeword(&self, logical: &SpinConfig) -> SpinConfig {
        embed_codeword(logical, self.k())
    }

    /// Energy of the ferromagnetic penalty links alone.
    pub fn penalty_energy(&self, s: &SpinConfig) -> f64 {
        let k = self.k();
        let mut e = 0.0;
        for i in 0..self.logical_vertices() {
            for link in self.code_graph.edges() {
                let (a, b) = (i * k + link.lo, i * k + link.hi);
                e -= self.j_ferro * f64::from(s.get(a) * s.get(b));
            }
        }
        e
    }
}

/// Builds the physical model: problem couplings and fields replicated on every
/// block member, `-J_F` on every code link. No noise is added here.
pub fn encode(m: &IsingModel, enc: &RepetitionEncoding) -> EncodedModel {
    let product = graph::cartesian_product(m.graph(), enc.code_graph());
    let k = enc.k();
    let mut couplings = Vec::with_capacity(m.nonzero_coupling_count() * k + m.vertex_count() * enc.code_graph().edge_count());
    for (e, j) in m.couplings() {
        for r in 0..k {
            couplings.push((Edge::new(product.vertex(e.lo, r), product.vertex(e.hi, r)), j));
        }
    }
    for i in 0..m.vertex_count() {
        for link in enc.code_graph().edges() {
            couplings.push((Edge::new(product.vertex(i, link.lo), product.vertex(i, link.hi)), -enc.j_ferro()));
        }
    }
    let fields: Vec<(usize, f64)> =
        m.fields().flat_map(|(v, h)| (0..k).map(move |r| (graph::product_index(v, r, k), h))).collect();
    let e_max = m.e_max().max(enc.j_ferro());
    let physical =
        IsingModel::new(Arc::new(product.graph), couplings, fields, e_max).expect("encoded model within bounds");
    EncodedModel {
        physical,
        logical_graph: m.shared_graph().clone(),
        code_graph: enc.code_graph.clone(),
        j_ferro: enc.j_ferro(),
    }
}

pub fn embed_codeword(logical: &SpinConfig, k: usize) -> SpinConfig {
    SpinConfig::new(logical.spins().iter().flat_map(|&s| std::iter::repeat_n(s, k)).collect())
        .expect("spins copied from a valid config")
}

fn check_len(s: &SpinConfig, n_logical: usize, k: usize) -> Result<()> {
    if s.len() != n_logical * k {
        return Err(Error::LengthMismatch { expected: n_logical * k, got: s.len() });
    }
    Ok(())
}

/// True iff every block of `k` consecutive spins is unanimous.
pub fn is_codeword(s: &SpinConfig, n_logical: usize, k: usize) -> Result<bool> {
    check_len(s, n_logical, k)?;
    Ok(s.spins().chunks(k).all(|b| b.iter().all(|&x| x == b[0])))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedState {
    pub logical: SpinConfig,
    pub in_code_space: bool,
    /// `|block sum|` per block: `K` for a unanimous block, 0 for a tie.
    pub block_margins: Vec<u32>,
}

impl DecodedState {
    pub fn tie_count(&self) -> usize {
        self.block_margins.iter().filter(|&&m| m == 0).count()
    }
}

/// Majority-vote decoding; ties go to +1 and show up as margin 0.
pub fn decode(s: &SpinConfig, n_logical: usize, k: usize) -> Result<DecodedState> {
    check_len(s, n_logical, k)?;
    let mut logical = Vec::with_capacity(n_logical);
    let mut block_margins = Vec::with_capacity(n_logical);
    for block in s.spins().chunks(k) {
        let sum: i32 = block.iter().map(|&x| i32::from(x)).sum();
        logical.push(if sum >= 0 { 1 } else { -1 });
        block_margins.push(sum.unsigned_abs());
    }
    let in_code_space = block_margins.iter().all(|&m| m as usize == k);
    Ok(DecodedState { logical: SpinConfig::new(logical)?, in_code_space, block_margins })
}

/// Code-space prediction for the encoded noisy model.
#[derive(Debug, Clone)]
pub struct EffectiveModel {
    /// Logical model with couplings `K J_ij` and fields `K h_i`.
    pub model: IsingModel,
    /// RMS of the summed replica noise on each logical coupling.
    pub coupling_noise_rms: f64,
    /// RMS of the summed replica noise on each logical field.
    pub field_noise_rms: f64,
    /// Energy offset contributed by the penalty links inside the code space.
    pub constant: f64,
    pub k: usize,
}

impl EffectiveModel {
    /// Noise scale relative to the logical energy scale, `sqrt(K) eps_rms / (K E_max)`.
    pub fn relative_noise_strength(&self) -> f64 {
        if self.model.e_max() == 0.0 {
            return f64::INFINITY;
        }
        self.coupling_noise_rms / self.model.e_max()
    }
}

pub fn effective_logical_model(m: &IsingModel, enc: &RepetitionEncoding, spec: &NoiseSpec) -> EffectiveModel {
    let k = enc.k() as f64;
    let rms = spec.eps_rms();
    let links = (m.vertex_count() * enc.code_graph().edge_count()) as f64;
    let penalty_noise = if spec.perturb_penalty_links { links.sqrt() * rms } else { 0.0 };
    EffectiveModel {
        model: m.scaled(k),
        coupling_noise_rms: k.sqrt() * rms,
        field_noise_rms: if spec.perturb_fields { k.sqrt() * rms } else { 0.0 },
        constant: -enc.j_ferro() * links + penalty_noise,
        k: enc.k(),
    }
}

/// A two-spin `Z Z` parity check between physical spins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParityCheck {
    pub a: usize,
    pub b: usize,
}

impl ParityCheck {
    pub fn parity(&self, s: &SpinConfig) -> i8 {
        s.get(self.a) * s.get(self.b)
    }
}

/// Generators `Z_{i,1} Z_{i,k}` for `k = 2..K`, per block.
pub fn stabilizer_generators(n_logical: usize, k: usize) -> Vec<ParityCheck> {
    (0..n_logical)
        .flat_map(|i| (1..k).map(move |r| ParityCheck { a: i * k, b: i * k + r }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub max_problem_degree: usize,
    pub min_code_degree: usize,
    pub satisfied: bool,
}

/// Checks that the code graph is at least as connected as the problem graph.
pub fn degree_heuristic(problem_graph: &Graph, enc: &RepetitionEncoding) -> DegreeReport {
    let max_problem_degree = problem_graph.max_degree();
    let min_code_degree = enc.code_graph().min_degree();
    DegreeReport { max_problem_degree, min_code_degree, satisfied: min_code_degree >= max_problem_degree }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::make_ladder_instance;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_config(rng: &mut impl Rng, n: usize) -> SpinConfig {
        SpinConfig::new((0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect()).unwrap()
    }

    #[test]
    fn single_edge_path2_construction() {
        let g = Arc::new(graph::build_path(2));
        let m = IsingModel::new(g, [(Edge::new(0, 1), -1.0)], [], 1.0).unwrap();
        let enc = RepetitionEncoding::new(graph::build_path(2), 1.0).unwrap();
        let em = encode(&m, &enc);
        let c: Vec<f64> = em.physical.couplings().map(|(_, j)| j).collect();
        assert_eq!(c, vec![-1.0; 4]);
        let replicas = em.physical.couplings().filter(|(e, _)| !em.is_penalty_edge(*e)).count();
        assert_eq!(replicas, 2);
    }

    #[test]
    fn identity_encoding_is_identity() {
        let m = make_ladder_instance(4, 1).unwrap();
        let em = encode(&m, &RepetitionEncoding::identity());
        assert_eq!(em.physical.to_file(), m.to_file());
    }

    #[test]
    fn encoded_graph_edge_count() {
        let m = make_ladder_instance(5, 0).unwrap();
        let enc = EncodingDescriptor::grid(2, 3).build().unwrap();
        let em = encode(&m, &enc);
        assert_eq!(em.physical.graph().edge_count(), 13 * 6 + 10 * 7);
    }

    #[test]
    fn rejects_bad_encodings() {
        assert!(RepetitionEncoding::new(graph::build_path(3), 0.0).is_err());
        let disconnected = Graph::new(3, [(0, 1)]).unwrap();
        assert!(RepetitionEncoding::new(disconnected, 1.0).is_err());
        let bad = EncodingDescriptor { code_graph: CodeShape::Grid, dims: vec![3], j_ferro: 1.0 };
        assert!(bad.build().is_err());
    }

    #[test]
    fn codeword_checks() {
        assert!(is_codeword(&SpinConfig::all_up(6), 2, 3).unwrap());
        let mut s = SpinConfig::all_up(6);
        s.flip(4);
        assert!(!is_codeword(&s, 2, 3).unwrap());
        assert!(is_codeword(&s, 2, 4).is_err());
    }

    #[test]
    fn codeword_fraction_matches_counting() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let trials = 40_000;
        let hits = (0..trials).filter(|_| is_codeword(&random_config(&mut rng, 6), 2, 3).unwrap()).count();
        let p = 1.0 / 16.0;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((hits as f64 / trials as f64 - p).abs() < 3.0 * sigma);
    }

    #[test]
    fn decode_cases() {
        let d = decode(&SpinConfig::new(vec![-1; 6]).unwrap(), 2, 3).unwrap();
        assert_eq!(d.logical.spins(), &[-1, -1]);
        assert!(d.in_code_space);

        let d = decode(&SpinConfig::new(vec![1, 1, -1]).unwrap(), 1, 3).unwrap();
        assert_eq!(d.logical.spins(), &[1]);
        assert!(!d.in_code_space);
        assert_eq!(d.block_margins, vec![1]);

        let d = decode(&SpinConfig::new(vec![1, -1, -1, -1]).unwrap(), 2, 2).unwrap();
        assert_eq!(d.logical.spins(), &[1, -1]);
        assert_eq!(d.tie_count(), 1);
    }

    #[test]
    fn decode_inverts_embedding() {
        for n in 1..=6 {
            for k in 1..=4 {
                for bits in 0..1u64 << n {
                    let s = SpinConfig::from_bits(bits, n);
                    let d = decode(&embed_codeword(&s, k), n, k).unwrap();
                    assert_eq!(d.logical, s);
                    assert!(d.in_code_space);
                }
            }
        }
    }

    #[test]
    fn stabilizers_agree_with_codeword_test() {
        assert!(stabilizer_generators(3, 1).is_empty());
        assert_eq!(stabilizer_generators(2, 3).len(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let checks = stabilizer_generators(3, 3);
        for i in 0..500 {
            // Bias half the samples toward codewords so both outcomes occur.
            let s = if i % 2 == 0 {
                embed_codeword(&random_config(&mut rng, 3), 3)
            } else {
                random_config(&mut rng, 9)
            };
            let all_even = checks.iter().all(|c| c.parity(&s) == 1);
            assert_eq!(all_even, is_codeword(&s, 3, 3).unwrap());
        }
    }

    #[test]
    fn penalty_gap_for_single_flip() {
        let m = make_ladder_instance(3, 0).unwrap();
        for desc in [EncodingDescriptor::path(4), EncodingDescriptor::grid(2, 3), EncodingDescriptor::complete(5)] {
            let enc = desc.build().unwrap();
            let em = encode(&m, &enc);
            let base = em.codeword(&SpinConfig::new(vec![1, -1, 1, 1, -1, -1]).unwrap());
            let e0 = em.penalty_energy(&base);
            for v in 0..em.physical.vertex_count() {
                let mut s = base.clone();
                s.flip(v);
                let gap = em.penalty_energy(&s) - e0;
                let expect = 2.0 * enc.j_ferro() * enc.code_graph().degree(v % enc.k()) as f64;
                assert!((gap - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn effective_model_noiseless_and_scaling() {
        let m = make_ladder_instance(4, 0).unwrap();
        let enc = EncodingDescriptor::grid(3, 3).build().unwrap();
        let eff = effective_logical_model(&m, &enc, &NoiseSpec::uniform(0.0));
        for (e, j) in m.couplings() {
            assert_eq!(eff.model.coupling(e), 9.0 * j);
        }
        // 8 logical spins, 12 grid links, J_F = 1.
        assert_eq!(eff.constant, -96.0);
        assert_eq!(eff.coupling_noise_rms, 0.0);

        let spec = NoiseSpec::uniform(0.3);
        let eff = effective_logical_model(&m, &enc, &spec);
        let unencoded_relative = spec.eps_rms() / m.e_max();
        assert!((unencoded_relative / eff.relative_noise_strength() - 3.0).abs() < 1e-12);
        let expected_constant = -96.0 + 96f64.sqrt() * spec.eps_rms();
        assert!((eff.constant - expected_constant).abs() < 1e-12);
    }

    #[test]
    fn degree_heuristic_cases() {
        let ladder = graph::build_ladder(8);
        let path = EncodingDescriptor::path(9).build().unwrap();
        let grid = EncodingDescriptor::grid(3, 3).build().unwrap();
        let complete = EncodingDescriptor::complete(9).build().unwrap();
        let r = degree_heuristic(&ladder, &path);
        assert_eq!((r.max_problem_degree, r.min_code_degree, r.satisfied), (3, 1, false));
        let r = degree_heuristic(&ladder, &grid);
        assert_eq!((r.min_code_degree, r.satisfied), (2, false));
        assert!(degree_heuristic(&ladder, &complete).satisfied);
    }

    #[test]
    fn replica_zero_shares_unencoded_noise() {
        let m = make_ladder_instance(4, 0).unwrap();
        let em = encode(&m, &EncodingDescriptor::grid(2, 2).build().unwrap());
        let spec = NoiseSpec::uniform(0.3);
        let seed = TrialSeed::new(99, 5);
        let plain = noise::draw_error_model(&m, &spec, seed);
        let coded = em.draw_error(&spec, seed);
        for e in m.graph().edges() {
            let phys = Edge::new(e.lo * 4, e.hi * 4);
            assert_eq!(plain.coupling(*e), coded.coupling(phys));
        }
        let penalty_free = em.draw_error(&NoiseSpec { perturb_penalty_links: false, ..spec }, seed);
        assert!(penalty_free.couplings().all(|(e, _)| !em.is_penalty_edge(e)));
    }
}
