//! Exact minimization by dynamic programming over a vertex order.
//!
//! Vertices are introduced one at a time. The table is indexed by the spins of
//! the current frontier (introduced vertices that still have an unintroduced
//! neighbor) and holds the best energy of all terms among introduced
//! vertices. A vertex leaves the frontier once its last neighbor is in,
//! minimizing over its two values; the winning value is recorded as one bit
//! per remaining frontier state so the optimum can be rebuilt backwards.

use std::time::Instant;

use super::{GroundResult, LocalTerms, SolverId, SolverStats};
use crate::error::{Error, Result};
use crate::model::{IsingModel, SpinConfig};

/// Largest frontier the solver accepts by default; the working table holds
/// `2^(width + 1)` entries.
pub const DEFAULT_MAX_WIDTH: usize = 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrontierOptions {
    pub max_width: usize,
    /// Also carry the second-best value per frontier state.
    pub track_second: bool,
}

impl Default for FrontierOptions {
    fn default() -> Self {
        FrontierOptions { max_width: DEFAULT_MAX_WIDTH, track_second: true }
    }
}

struct Schedule {
    /// `retire[t]`: vertices leaving the frontier right after step `t`.
    retire: Vec<Vec<usize>>,
    width: usize,
}

fn schedule(terms: &LocalTerms, order: &[usize]) -> Result<Schedule> {
    let n = terms.len();
    if order.len() != n {
        return Err(Error::InvalidOrder(format!("order has {} entries for {n} vertices", order.len())));
    }
    let mut pos = vec![usize::MAX; n];
    for (t, &v) in order.iter().enumerate() {
        if v >= n || pos[v] != usize::MAX {
            return Err(Error::InvalidOrder(format!("vertex {v} repeated or out of range")));
        }
        pos[v] = t;
    }
    let mut retire = vec![Vec::new(); n];
    for v in 0..n {
        let last = terms.nbrs[v].iter().map(|&(u, _)| pos[u]).fold(pos[v], usize::max);
        retire[last].push(v);
    }
    let mut size = 0usize;
    let mut width = 0usize;
    for step in &retire {
        size += 1;
        size -= step.len();
        width = width.max(size);
    }
    Ok(Schedule { retire, width })
}

/// Largest frontier reached when introducing vertices in `order`, counting
/// only nonzero couplings.
pub fn frontier_width(m: &IsingModel, order: &[usize]) -> Result<usize> {
    Ok(schedule(&LocalTerms::new(m), order)?.width)
}

/// Breadth-first order from a minimum-degree vertex, restarting in each
/// component.
pub fn bfs_order(m: &IsingModel) -> Vec<usize> {
    let terms = LocalTerms::new(m);
    let n = terms.len();
    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (terms.nbrs[v].len(), v));
    for &root in &by_degree {
        if seen[root] {
            continue;
        }
        seen[root] = true;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = terms.nbrs[v].iter().map(|&(u, _)| u).filter(|&u| !seen[u]).collect();
            next.sort_unstable();
            for u in next {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    order
}

/// The narrower of index order and [`bfs_order`]. Index order is block-major
/// for product graphs, which gives width about `2K` on encoded ladders.
pub fn default_order(m: &IsingModel) -> Vec<usize> {
    let natural: Vec<usize> = (0..m.vertex_count()).collect();
    let bfs = bfs_order(m);
    let terms = LocalTerms::new(m);
    let wn = schedule(&terms, &natural).expect("permutation").width;
    let wb = schedule(&terms, &bfs).expect("permutation").width;
    if wb < wn {
        bfs
    } else {
        natural
    }
}

pub fn solve_frontier(m: &IsingModel, order: Option<&[usize]>) -> Result<GroundResult> {
    solve_frontier_with(m, order, &FrontierOptions::default())
}

struct Retired {
    vertex: usize,
    /// Frontier after removal, in bit order.
    rest: Vec<usize>,
    /// One bit per `rest` state: set when the vertex takes -1.
    choice: Vec<u64>,
}

/// Doubles the table for a new top-bit spin: `+lf` where it is up, `-lf`
/// where it is down.
fn split_by_spin(table: &mut Vec<f64>, lf: &[f64]) {
    let len = table.len();
    table.resize(2 * len, 0.0);
    let (lo, hi) = table.split_at_mut(len);
    for ((x, y), &f) in lo.iter_mut().zip(hi.iter_mut()).zip(lf) {
        let b0 = *x;
        *x = b0 + f;
        *y = b0 - f;
    }
}

/// Visits `(table[i0], table[i1])` for every index pair differing only in bit
/// `p`, in increasing order of the index with bit `p` removed.
fn for_pairs(table: &[f64], p: usize, mut f: impl FnMut(f64, f64)) {
    if p == 0 {
        for pair in table.chunks_exact(2) {
            f(pair[0], pair[1]);
        }
        return;
    }
    let step = 1usize << p;
    for chunk in table.chunks_exact(2 * step) {
        let (a, b) = chunk.split_at(step);
        for (&x, &y) in a.iter().zip(b) {
            f(x, y);
        }
    }
}

pub fn solve_frontier_with(m: &IsingModel, order: Option<&[usize]>, opts: &FrontierOptions) -> Result<GroundResult> {
    let start = Instant::now();
    let terms = LocalTerms::new(m);
    let n = terms.len();
    let order: Vec<usize> = match order {
        Some(o) => o.to_vec(),
        None => default_order(m),
    };
    let sched = schedule(&terms, &order)?;
    if sched.width > opts.max_width {
        return Err(Error::FrontierTooWide { width: sched.width, limit: opts.max_width });
    }
    // Flip-symmetric models: pin the first vertex to +1.
    let pin = !m.has_fields();

    let mut in_frontier = vec![usize::MAX; n];
    let mut frontier: Vec<usize> = Vec::with_capacity(sched.width + 1);
    let mut best: Vec<f64> = vec![0.0];
    let mut second: Vec<f64> = if opts.track_second { vec![f64::INFINITY] } else { Vec::new() };
    let mut retired: Vec<Retired> = Vec::with_capacity(n);
    let mut work = 0u64;
    let mut lf: Vec<f64> = Vec::new();
    let mut scratch: Vec<f64> = Vec::new();
    let mut flags: Vec<bool> = Vec::new();

    for (t, &v) in order.iter().enumerate() {
        // Introduce v as the new top bit. lf[idx] is v's local field for
        // frontier state idx.
        let bit = frontier.len();
        let len = best.len();
        let links: Vec<(usize, f64)> = terms.nbrs[v]
            .iter()
            .filter(|&&(u, _)| in_frontier[u] != usize::MAX)
            .map(|&(u, j)| (in_frontier[u], j))
            .collect();
        lf.clear();
        lf.resize(len, terms.fields[v] + links.iter().map(|&(_, j)| j).sum::<f64>());
        for &(b, j) in &links {
            let step = 1usize << b;
            for chunk in lf.chunks_mut(2 * step) {
                chunk[step..].iter_mut().for_each(|x| *x -= 2.0 * j);
            }
        }
        split_by_spin(&mut best, &lf);
        if opts.track_second {
            split_by_spin(&mut second, &lf);
        }
        if pin && t == 0 {
            best[len..].fill(f64::INFINITY);
            if opts.track_second {
                second[len..].fill(f64::INFINITY);
            }
        }
        work += 2 * len as u64;
        frontier.push(v);
        in_frontier[v] = bit;

        for &u in &sched.retire[t] {
            let p = in_frontier[u];
            let half = best.len() / 2;
            if opts.track_second {
                // Runner-up of {a, sa} and {b, sb} given a <= sa, b <= sb.
                scratch.clear();
                for_pairs(&best, p, |a, b| scratch.push(a.max(b)));
                let mut i = 0;
                for_pairs(&second, p, |sa, sb| {
                    scratch[i] = scratch[i].min(sa.min(sb));
                    i += 1;
                });
                std::mem::swap(&mut second, &mut scratch);
            }
            scratch.clear();
            flags.clear();
            for_pairs(&best, p, |a, b| {
                flags.push(b < a);
                scratch.push(a.min(b));
            });
            std::mem::swap(&mut best, &mut scratch);
            let choice = flags
                .chunks(64)
                .map(|c| c.iter().enumerate().fold(0u64, |w, (i, &f)| w | u64::from(f) << i))
                .collect();
            work += half as u64;
            frontier.remove(p);
            in_frontier[u] = usize::MAX;
            for (b, &w) in frontier.iter().enumerate().skip(p) {
                in_frontier[w] = b;
            }
            retired.push(Retired { vertex: u, rest: frontier.clone(), choice });
        }
    }
    debug_assert!(frontier.is_empty() && best.len() == 1);

    let mut spins = vec![0i8; n];
    for rec in retired.iter().rev() {
        let r = rec
            .rest
            .iter()
            .enumerate()
            .fold(0usize, |acc, (b, &w)| if spins[w] < 0 { acc | 1 << b } else { acc });
        spins[rec.vertex] = if rec.choice[r / 64] >> (r % 64) & 1 == 1 { -1 } else { 1 };
    }
    let config = SpinConfig::new(spins)?;
    let value = m.energy_unchecked(config.spins());
    debug_assert!((value - best[0]).abs() < 1e-6 * (1.0 + value.abs()));
    Ok(GroundResult {
        config,
        value,
        degeneracy: None,
        second_value: if opts.track_second && second[0].is_finite() { Some(second[0]) } else { None },
        solver_id: SolverId::Frontier,
        exact: true,
        stats: SolverStats { work, wall_time: start.elapsed() },
    })
}
