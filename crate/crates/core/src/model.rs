//! Classical Ising problem Hamiltonians `H = Σ J_ij s_i s_j + Σ h_i s_i` on a
//! fixed hardware graph, plus the JSON instance format.
//!
//! Sign convention: ferromagnetic couplings are negative.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, Edge, Graph};

/// Slack allowed on the `|J|, |h| <= e_max` bound, to absorb round-off.
const BOUND_SLACK: f64 = 1e-12;

/// A ±1 assignment to every vertex.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<i8>", into = "Vec<i8>")]
pub struct SpinConfig(Vec<i8>);

impl SpinConfig {
    pub fn new(spins: Vec<i8>) -> Result<Self> {
        if let Some(&bad) = spins.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::InvalidSpin(bad));
        }
        Ok(SpinConfig(spins))
    }

    pub fn all_up(n: usize) -> Self {
        SpinConfig(vec![1; n])
    }

    /// Spin `i` is -1 when bit `i` of `bits` is set.
    pub fn from_bits(bits: u64, n: usize) -> Self {
        debug_assert!(n <= 64);
        SpinConfig((0..n).map(|i| if bits >> i & 1 == 1 { -1 } else { 1 }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn spins(&self) -> &[i8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> i8 {
        self.0[i]
    }

    pub fn flipped(&self) -> Self {
        SpinConfig(self.0.iter().map(|s| -s).collect())
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i] = -self.0[i];
    }
}

impl TryFrom<Vec<i8>> for SpinConfig {
    type Error = Error;
    fn try_from(v: Vec<i8>) -> Result<Self> {
        SpinConfig::new(v)
    }
}

impl From<SpinConfig> for Vec<i8> {
    fn from(s: SpinConfig) -> Self {
        s.0
    }
}

impl std::fmt::Display for SpinConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for s in &self.0 {
            f.write_str(if *s > 0 { "+" } else { "-" })?;
        }
        Ok(())
    }
}

/// Ising model on a hardware graph. Couplings and fields are sparse: absent
/// entries are exactly zero. The graph is shared, so cloning is cheap.
#[derive(Debug, Clone)]
pub struct IsingModel {
    graph: Arc<Graph>,
    couplings: BTreeMap<Edge, f64>,
    fields: BTreeMap<usize, f64>,
    e_max: f64,
}

impl IsingModel {
    pub fn new(
        graph: Arc<Graph>,
        couplings: impl IntoIterator<Item = (Edge, f64)>,
        fields: impl IntoIterator<Item = (usize, f64)>,
        e_max: f64,
    ) -> Result<Self> {
        if !(e_max.is_finite() && e_max >= 0.0) {
            return Err(Error::InvalidModel(format!("e_max must be finite and >= 0, got {e_max}")));
        }
        let mut cmap = BTreeMap::new();
        for (e, j) in couplings {
            if graph.edge_rank(e).is_none() {
                return Err(Error::InvalidModel(format!("coupling on non-edge ({}, {})", e.lo, e.hi)));
            }
            check_magnitude(j, e_max, "coupling")?;
            if j != 0.0 && cmap.insert(e, j).is_some() {
                return Err(Error::InvalidModel(format!("duplicate coupling ({}, {})", e.lo, e.hi)));
            }
        }
        let mut fmap = BTreeMap::new();
        for (v, h) in fields {
            if v >= graph.vertex_count() {
                return Err(Error::IndexOutOfRange { index: v, limit: graph.vertex_count() });
            }
            check_magnitude(h, e_max, "field")?;
            if h != 0.0 && fmap.insert(v, h).is_some() {
                return Err(Error::InvalidModel(format!("duplicate field on vertex {v}")));
            }
        }
        Ok(IsingModel { graph, couplings: cmap, fields: fmap, e_max })
    }

    /// All-zero model on `graph`.
    pub fn zero(graph: Arc<Graph>) -> Self {
        IsingModel { graph, couplings: BTreeMap::new(), fields: BTreeMap::new(), e_max: 0.0 }
    }

    /// Builds a model whose `e_max` is the largest magnitude present.
    pub fn with_attained_bound(
        graph: Arc<Graph>,
        couplings: impl IntoIterator<Item = (Edge, f64)>,
        fields: impl IntoIterator<Item = (usize, f64)>,
    ) -> Result<Self> {
        let couplings: Vec<_> = couplings.into_iter().collect();
        let fields: Vec<_> = fields.into_iter().collect();
        let e_max = couplings
            .iter()
            .map(|(_, j)| j.abs())
            .chain(fields.iter().map(|(_, h)| h.abs()))
            .fold(0.0, f64::max);
        Self::new(graph, couplings, fields, e_max)
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn shared_graph(&self) -> &Arc<Graph> {
        &self.graph
    }

    pub fn vertex_count(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn e_max(&self) -> f64 {
        self.e_max
    }

    pub fn coupling(&self, e: Edge) -> f64 {
        self.couplings.get(&e).copied().unwrap_or(0.0)
    }

    pub fn field(&self, v: usize) -> f64 {
        self.fields.get(&v).copied().unwrap_or(0.0)
    }

    /// Nonzero couplings in canonical edge order.
    pub fn couplings(&self) -> impl Iterator<Item = (Edge, f64)> + '_ {
        self.couplings.iter().map(|(e, j)| (*e, *j))
    }

    /// Nonzero fields in vertex order.
    pub fn fields(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.fields.iter().map(|(v, h)| (*v, *h))
    }

    pub fn has_fields(&self) -> bool {
        !self.fields.is_empty()
    }

    pub fn nonzero_coupling_count(&self) -> usize {
        self.couplings.len()
    }

    /// Coupling per graph edge, aligned with `graph().edges()`.
    pub fn dense_couplings(&self) -> Vec<f64> {
        self.graph.edges().iter().map(|e| self.coupling(*e)).collect()
    }

    pub fn dense_fields(&self) -> Vec<f64> {
        (0..self.vertex_count()).map(|v| self.field(v)).collect()
    }

    /// Sum of all coefficient magnitudes; no configuration goes below its negation.
    pub fn total_magnitude(&self) -> f64 {
        self.couplings.values().map(|j| j.abs()).sum::<f64>() + self.fields.values().map(|h| h.abs()).sum::<f64>()
    }

    pub fn energy(&self, s: &SpinConfig) -> Result<f64> {
        if s.len() != self.vertex_count() {
            return Err(Error::LengthMismatch { expected: self.vertex_count(), got: s.len() });
        }
        Ok(self.energy_unchecked(s.spins()))
    }

    pub(crate) fn energy_unchecked(&self, s: &[i8]) -> f64 {
        let mut e = 0.0;
        for (edge, j) in &self.couplings {
            e += j * f64::from(s[edge.lo] * s[edge.hi]);
        }
        for (v, h) in &self.fields {
            e += h * f64::from(s[*v]);
        }
        e
    }

    /// Termwise sum of two models on the same graph.
    pub fn add(&self, other: &IsingModel) -> Result<IsingModel> {
        if !Arc::ptr_eq(&self.graph, &other.graph) && *self.graph != *other.graph {
            return Err(Error::GraphMismatch);
        }
        let mut couplings = self.couplings.clone();
        for (e, j) in &other.couplings {
            *couplings.entry(*e).or_insert(0.0) += j;
        }
        let mut fields = self.fields.clone();
        for (v, h) in &other.fields {
            *fields.entry(*v).or_insert(0.0) += h;
        }
        IsingModel::with_attained_bound(self.graph.clone(), couplings, fields)
    }

    /// Every coupling and field multiplied by `alpha`.
    pub fn scaled(&self, alpha: f64) -> IsingModel {
        IsingModel {
            graph: self.graph.clone(),
            couplings: self.couplings.iter().map(|(e, j)| (*e, j * alpha)).filter(|(_, j)| *j != 0.0).collect(),
            fields: self.fields.iter().map(|(v, h)| (*v, h * alpha)).filter(|(_, h)| *h != 0.0).collect(),
            e_max: self.e_max * alpha.abs(),
        }
    }

    pub fn to_file(&self) -> ModelFile {
        ModelFile {
            vertices: self.vertex_count(),
            edges: self.graph.edges().iter().map(|e| (e.lo, e.hi, self.coupling(*e))).collect(),
            fields: self.fields().collect(),
            e_max: self.e_max,
        }
    }

    pub fn from_file(file: &ModelFile) -> Result<Self> {
        let graph = Graph::new(file.vertices, file.edges.iter().map(|&(u, v, _)| (u, v)))?;
        let couplings: Vec<_> = file.edges.iter().map(|&(u, v, j)| (Edge::new(u, v), j)).collect();
        IsingModel::new(Arc::new(graph), couplings, file.fields.iter().copied(), file.e_max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }
}

fn check_magnitude(x: f64, e_max: f64, what: &str) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::InvalidModel(format!("{what} is not finite")));
    }
    if x.abs() > e_max * (1.0 + BOUND_SLACK) + BOUND_SLACK {
        return Err(Error::InvalidModel(format!("{what} {x} exceeds e_max {e_max}")));
    }
    Ok(())
}

/// On-disk instance: every hardware edge is listed, with `J = 0` where no
/// coupling is programmed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub vertices: usize,
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(default)]
    pub fields: Vec<(usize, f64)>,
    pub e_max: f64,
}

/// Two ferromagnetic chains of `columns` spins joined by a single
/// antiferromagnetic rung at `antiferro_rung`; the other rungs exist in
/// hardware but carry no coupling.
pub fn make_ladder_instance(columns: usize, antiferro_rung: usize) -> Result<IsingModel> {
    if columns == 0 {
        return Err(Error::InvalidModel("ladder needs at least one column".into()));
    }
    if antiferro_rung >= columns {
        return Err(Error::IndexOutOfRange { index: antiferro_rung, limit: columns });
    }
    let graph = Arc::new(graph::build_ladder(columns));
    let mut couplings = Vec::with_capacity(2 * columns - 1);
    for c in 1..columns {
        couplings.push((Edge::new(graph::ladder_top(c - 1), graph::ladder_top(c)), -1.0));
        couplings.push((Edge::new(graph::ladder_bottom(c - 1), graph::ladder_bottom(c)), -1.0));
    }
    couplings.push((
        Edge::new(graph::ladder_top(antiferro_rung), graph::ladder_bottom(antiferro_rung)),
        1.0,
    ));
    IsingModel::new(graph, couplings, [], 1.0)
}
