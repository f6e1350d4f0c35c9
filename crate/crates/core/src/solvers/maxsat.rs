//! Weighted MAX-2-SAT: the reduction from Ising models and an exact
//! branch-and-bound solver.
//!
//! With `s_i = 1 - 2 x_i` and `x_i ∨ x_j = x_i + x_j - x_i x_j`,
//!
//! ```text
//! J s_i s_j = J + 2J x_i + 2J x_j - 4J (x_i ∨ x_j)
//! h s_i     = h - 2h x_i
//! ```
//!
//! so `E(s) = C - [Σ 4J_ij (x_i ∨ x_j) + Σ_i (2h_i - 2 Σ_j J_ij) x_i]` with
//! `C = Σ J + Σ h`. Negative-weight terms are rewritten with positive weights
//! (`w (a ∨ b) = |w| (¬a ∨ b) + |w| ¬b - 2|w|` and `c x = |c| ¬x + c` for
//! negative `w`, `c`), and the constants are folded into the offset.
//!
//! Coefficients are quantized once, `J -> round(J * scale)`, after which every
//! step is exact integer arithmetic:
//! `E_quantized(s) * scale = offset_num - objective(x(s))` holds exactly.

use std::collections::BTreeMap;

use crate::model::{IsingModel, SpinConfig};

/// Fixed-point denominator used when none is given.
pub const DEFAULT_SCALE: u64 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Lit {
    pub var: usize,
    pub positive: bool,
}

impl Lit {
    pub fn pos(var: usize) -> Self {
        Lit { var, positive: true }
    }

    pub fn neg(var: usize) -> Self {
        Lit { var, positive: false }
    }

    pub fn holds(&self, assignment: &[bool]) -> bool {
        assignment[self.var] == self.positive
    }

    /// DIMACS form: 1-based, negative when negated.
    pub fn to_dimacs(&self) -> i64 {
        let v = self.var as i64 + 1;
        if self.positive {
            v
        } else {
            -v
        }
    }

    pub fn from_dimacs(x: i64) -> Option<Self> {
        if x == 0 {
            return None;
        }
        Some(Lit { var: (x.unsigned_abs() - 1) as usize, positive: x > 0 })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub weight: u64,
    pub lits: Vec<Lit>,
}

impl Clause {
    pub fn satisfied(&self, assignment: &[bool]) -> bool {
        self.lits.iter().any(|l| l.holds(assignment))
    }
}

/// Weighted MAX-2-SAT instance with the affine map back to Ising energies:
/// `E(s) ≈ (offset_num - objective(x(s))) / scale`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaxSatInstance {
    pub var_count: usize,
    pub clauses: Vec<Clause>,
    pub offset_num: i128,
    pub scale: u64,
}

impl MaxSatInstance {
    pub fn new(var_count: usize, clauses: Vec<Clause>, offset_num: i128, scale: u64) -> Result<Self, String> {
        if scale == 0 {
            return Err("scale must be positive".into());
        }
        for (i, c) in clauses.iter().enumerate() {
            if c.weight == 0 {
                return Err(format!("clause {i} has zero weight"));
            }
            if c.lits.is_empty() || c.lits.len() > 2 {
                return Err(format!("clause {i} has {} literals", c.lits.len()));
            }
            if c.lits.iter().any(|l| l.var >= var_count) {
                return Err(format!("clause {i} references a variable beyond {var_count}"));
            }
            if c.lits.len() == 2 && c.lits[0].var == c.lits[1].var {
                return Err(format!("clause {i} repeats variable {}", c.lits[0].var + 1));
            }
        }
        Ok(MaxSatInstance { var_count, clauses, offset_num, scale })
    }

    pub fn total_weight(&self) -> u64 {
        self.clauses.iter().map(|c| c.weight).sum()
    }

    pub fn objective(&self, assignment: &[bool]) -> u64 {
        self.clauses.iter().filter(|c| c.satisfied(assignment)).map(|c| c.weight).sum()
    }

    pub fn offset(&self) -> f64 {
        self.offset_num as f64 / self.scale as f64
    }

    /// Ising energy implied by the affine map.
    pub fn energy_of(&self, assignment: &[bool]) -> f64 {
        (self.offset_num - i128::from(self.objective(assignment))) as f64 / self.scale as f64
    }
}

pub fn spins_to_assignment(s: &SpinConfig) -> Vec<bool> {
    s.spins().iter().map(|&x| x < 0).collect()
}

pub fn assignment_to_spins(x: &[bool]) -> SpinConfig {
    SpinConfig::new(x.iter().map(|&b| if b { -1 } else { 1 }).collect()).expect("±1 by construction")
}

fn quantize(x: f64, scale: u64) -> i64 {
    (x * scale as f64).round() as i64
}

/// Builds the MAX-2-SAT instance for `m` at fixed-point resolution `1/scale`.
pub fn qubo_to_max2sat(m: &IsingModel, scale: u64) -> MaxSatInstance {
    assert!(scale >= 1, "scale must be positive");
    let n = m.vertex_count();
    let couplings: Vec<(usize, usize, i64)> =
        m.couplings().map(|(e, j)| (e.lo, e.hi, quantize(j, scale))).filter(|c| c.2 != 0).collect();
    let fields: Vec<i64> = (0..n).map(|v| quantize(m.field(v), scale)).collect();

    // Affine form: E_int = constant - (Σ or_w (x_i ∨ x_j) + Σ linear_i x_i).
    let mut constant: i128 = fields.iter().map(|&h| i128::from(h)).sum();
    let mut linear: Vec<i128> = fields.iter().map(|&h| 2 * i128::from(h)).collect();
    for &(i, j, q) in &couplings {
        constant += i128::from(q);
        linear[i] -= 2 * i128::from(q);
        linear[j] -= 2 * i128::from(q);
    }

    // Objective = Σ clauses + objective_const, all weights positive.
    let mut objective_const: i128 = 0;
    let mut pairs: BTreeMap<(Lit, Lit), i128> = BTreeMap::new();
    let mut unit_pos = vec![0i128; n];
    let mut unit_neg = vec![0i128; n];
    for &(i, j, q) in &couplings {
        let w = 4 * i128::from(q);
        if w > 0 {
            *pairs.entry((Lit::pos(i), Lit::pos(j))).or_default() += w;
        } else {
            *pairs.entry((Lit::neg(i), Lit::pos(j))).or_default() += -w;
            unit_neg[j] += -w;
            objective_const += 2 * w;
        }
    }
    for (v, &c) in linear.iter().enumerate() {
        if c > 0 {
            unit_pos[v] += c;
        } else if c < 0 {
            unit_neg[v] += -c;
            objective_const += c;
        }
    }

    let mut clauses = Vec::new();
    for v in 0..n {
        // p x + q ¬x = min(p, q) + (p - min) x + (q - min) ¬x
        let common = unit_pos[v].min(unit_neg[v]);
        objective_const += common;
        for (w, lit) in [(unit_pos[v] - common, Lit::pos(v)), (unit_neg[v] - common, Lit::neg(v))] {
            if w > 0 {
                clauses.push(Clause { weight: w as u64, lits: vec![lit] });
            }
        }
    }
    for ((a, b), w) in pairs {
        if w > 0 {
            clauses.push(Clause { weight: w as u64, lits: vec![a, b] });
        }
    }
    MaxSatInstance { var_count: n, clauses, offset_num: constant - objective_const, scale }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BnbOptions {
    /// Stop after this many search nodes and return the incumbent.
    pub node_budget: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaxSatSolution {
    pub assignment: Vec<bool>,
    pub objective: u64,
    /// False when the node budget ran out before the search finished.
    pub exact: bool,
    pub nodes: u64,
}

struct Search<'a> {
    inst: &'a MaxSatInstance,
    occurs: Vec<Vec<usize>>,
    static_weight: Vec<u64>,
    value: Vec<i8>,
    n_true: Vec<u8>,
    n_false: Vec<u8>,
    falsified: u64,
    total: u64,
    best: u64,
    best_assignment: Vec<bool>,
    nodes: u64,
    budget: u64,
    exhausted: bool,
    unit_pos: Vec<u64>,
    unit_neg: Vec<u64>,
}

impl Search<'_> {
    fn assign(&mut self, var: usize, val: bool) {
        self.value[var] = i8::from(val);
        for &c in &self.occurs[var] {
            let clause = &self.inst.clauses[c];
            let lit = clause.lits.iter().find(|l| l.var == var).expect("occurrence");
            if lit.positive == val {
                self.n_true[c] += 1;
            } else {
                self.n_false[c] += 1;
                if self.n_true[c] == 0 && usize::from(self.n_false[c]) == clause.lits.len() {
                    self.falsified += clause.weight;
                }
            }
        }
    }

    fn unassign(&mut self, var: usize, val: bool) {
        for &c in &self.occurs[var] {
            let clause = &self.inst.clauses[c];
            let lit = clause.lits.iter().find(|l| l.var == var).expect("occurrence");
            if lit.positive == val {
                self.n_true[c] -= 1;
            } else {
                if self.n_true[c] == 0 && usize::from(self.n_false[c]) == clause.lits.len() {
                    self.falsified -= clause.weight;
                }
                self.n_false[c] -= 1;
            }
        }
        self.value[var] = -1;
    }

    /// Accumulates the weight of undecided clauses with one free literal per
    /// variable polarity; returns the weight that must be lost to conflicts.
    fn unit_conflicts(&mut self) -> u64 {
        self.unit_pos.iter_mut().for_each(|x| *x = 0);
        self.unit_neg.iter_mut().for_each(|x| *x = 0);
        for (c, clause) in self.inst.clauses.iter().enumerate() {
            if self.n_true[c] > 0 || usize::from(self.n_false[c]) + 1 != clause.lits.len() {
                continue;
            }
            let lit = clause.lits.iter().find(|l| self.value[l.var] < 0).expect("one free literal");
            if lit.positive {
                self.unit_pos[lit.var] += clause.weight;
            } else {
                self.unit_neg[lit.var] += clause.weight;
            }
        }
        self.unit_pos.iter().zip(&self.unit_neg).map(|(&p, &q)| p.min(q)).sum()
    }

    fn dfs(&mut self) {
        if self.exhausted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.exhausted = true;
            return;
        }
        let bound = self.total - self.falsified;
        if bound <= self.best {
            return;
        }
        let lost = self.unit_conflicts();
        if bound - lost <= self.best {
            return;
        }
        let pick = (0..self.inst.var_count)
            .filter(|&v| self.value[v] < 0)
            .max_by_key(|&v| (self.unit_pos[v] + self.unit_neg[v], self.static_weight[v], std::cmp::Reverse(v)));
        let Some(var) = pick else {
            self.best = bound;
            self.best_assignment = self.value.iter().map(|&x| x == 1).collect();
            return;
        };
        let first = self.unit_pos[var] >= self.unit_neg[var];
        for val in [first, !first] {
            self.assign(var, val);
            self.dfs();
            self.unassign(var, val);
        }
    }
}

/// Greedy single-flip ascent from all-false; seeds the incumbent.
fn local_search(inst: &MaxSatInstance) -> (Vec<bool>, u64) {
    let mut x = vec![false; inst.var_count];
    let mut obj = inst.objective(&x);
    loop {
        let mut improved = false;
        for v in 0..inst.var_count {
            x[v] = !x[v];
            let o = inst.objective(&x);
            if o > obj {
                obj = o;
                improved = true;
            } else {
                x[v] = !x[v];
            }
        }
        if !improved {
            return (x, obj);
        }
    }
}

/// Depth-first branch and bound. The bound is the weight of clauses not yet
/// falsified, tightened by conflicting unit clauses; branching follows the
/// heaviest pending unit clauses.
pub fn solve_bnb(inst: &MaxSatInstance, opts: &BnbOptions) -> MaxSatSolution {
    let n = inst.var_count;
    let mut occurs = vec![Vec::new(); n];
    let mut static_weight = vec![0u64; n];
    for (c, clause) in inst.clauses.iter().enumerate() {
        for l in &clause.lits {
            occurs[l.var].push(c);
            static_weight[l.var] += clause.weight;
        }
    }
    let (seed_assignment, seed_objective) = if n <= 64 { local_search(inst) } else { (vec![false; n], inst.objective(&vec![false; n])) };
    let mut search = Search {
        inst,
        occurs,
        static_weight,
        value: vec![-1; n],
        n_true: vec![0; inst.clauses.len()],
        n_false: vec![0; inst.clauses.len()],
        falsified: 0,
        total: inst.total_weight(),
        best: seed_objective,
        best_assignment: seed_assignment,
        nodes: 0,
        budget: opts.node_budget.unwrap_or(u64::MAX),
        exhausted: false,
        unit_pos: vec![0; n],
        unit_neg: vec![0; n],
    };
    search.dfs();
    MaxSatSolution {
        objective: search.best,
        assignment: search.best_assignment,
        exact: !search.exhausted,
        nodes: search.nodes,
    }
}
