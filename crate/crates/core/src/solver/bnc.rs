//! Best-bound branch-and-cut over the binaries of a [`Model`].

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::lp::LpStatus;
use super::relax::{is_integral, Branching, NodeOrder, Relaxation, SolveConfig};
use super::simplex::Basis;
use crate::formulation::{Formulation, Model, VarKind};

/// Maps a node LP point to a feasible point of the original problem:
/// `(original variable values, objective in the model's orientation)`.
pub type PrimalHook<'a> = &'a dyn Fn(&Model, &[f64]) -> Option<(Vec<f64>, f64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    TimeLimit,
    NodeLimit,
    Infeasible,
    NumericalFailure,
}

impl SolveStatus {
    pub fn label(self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::TimeLimit => "time_limit",
            Self::NodeLimit => "node_limit",
            Self::Infeasible => "infeasible",
            Self::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub formulation: String,
    pub root_bound: f64,
    pub root_cuts: usize,
    pub root_rounds: usize,
    pub root_converged: bool,
    pub root_time: f64,
    pub incumbent: Option<f64>,
    pub final_bound: f64,
    pub gap_percent: Option<f64>,
    pub total_cuts: usize,
    pub total_time: f64,
    pub nodes: usize,
    pub status: SolveStatus,
    /// Values of the problem's own variables at the incumbent.
    #[serde(skip)]
    pub incumbent_point: Option<Vec<f64>>,
}

/// `100 |incumbent - bound| / (1e-10 + |incumbent|)`.
pub fn gap_percent(incumbent: f64, bound: f64) -> f64 {
    100.0 * (incumbent - bound).abs() / (1e-10 + incumbent.abs())
}

impl SolveReport {
    /// Root gap against an externally supplied reference incumbent.
    pub fn root_gap(&self, reference: f64) -> f64 {
        gap_percent(reference, self.root_bound)
    }

    /// Report fields that do not depend on wall-clock time.
    pub fn without_timings(&self) -> Self {
        Self {
            root_time: 0.0,
            total_time: 0.0,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    id: usize,
    depth: usize,
    /// Lower bound in minimization orientation.
    bound: f64,
    fixes: Vec<(usize, f64, f64)>,
    basis: Option<Basis>,
    branch: Option<(usize, bool, f64)>,
}

struct Queued(Node, NodeOrder);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // max-heap: the greatest element is processed first
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (&self.0, &other.0);
        match self.1 {
            NodeOrder::BestBound => b.bound.total_cmp(&a.bound).then(b.id.cmp(&a.id)),
            NodeOrder::DepthFirst => a.depth.cmp(&b.depth).then(a.id.cmp(&b.id)),
        }
    }
}

/// Incremental-model ordering: per block, the segment binaries in order.
fn im_chains(m: &Model) -> Vec<Vec<(usize, usize, f64)>> {
    if m.formulation != Formulation::Im {
        return Vec::new();
    }
    m.blocks
        .iter()
        .map(|b| {
            b.segments
                .iter()
                .enumerate()
                .map(|(s, sv)| {
                    let (lo, hi) = b.decomposition.segment(s);
                    (sv.y, sv.x, hi - lo)
                })
                .collect()
        })
        .collect()
}

/// Node bounds after applying `fixes` and the incremental ordering
/// (`y^s = 1` forces every earlier segment full, `y^s = 0` every later one
/// empty). `None` if the bounds conflict.
fn node_bounds(
    rel: &Relaxation,
    chains: &[Vec<(usize, usize, f64)>],
    fixes: &[(usize, f64, f64)],
) -> Option<HashMap<usize, (f64, f64)>> {
    let mut b: HashMap<usize, (f64, f64)> = HashMap::new();
    let get = |b: &HashMap<usize, (f64, f64)>, j: usize| b.get(&j).copied().unwrap_or_else(|| rel.root_bounds(j));
    let tighten = |b: &mut HashMap<usize, (f64, f64)>, j: usize, lo: f64, hi: f64| {
        let (l0, h0) = get(b, j);
        b.insert(j, (l0.max(lo), h0.min(hi)));
    };
    for &(j, lo, hi) in fixes {
        tighten(&mut b, j, lo, hi);
    }
    for chain in chains {
        let last_one = chain.iter().rposition(|&(y, _, _)| get(&b, y).0 >= 0.5);
        let first_zero = chain.iter().position(|&(y, _, _)| get(&b, y).1 <= 0.5);
        if let Some(s) = last_one {
            for &(y, x, len) in &chain[..s] {
                tighten(&mut b, y, 1.0, 1.0);
                tighten(&mut b, x, len, len);
            }
        }
        if let Some(s) = first_zero {
            for &(y, x, _) in &chain[s..] {
                tighten(&mut b, y, 0.0, 0.0);
                tighten(&mut b, x, 0.0, 0.0);
            }
        }
    }
    if b.values().any(|&(lo, hi)| lo > hi + 1e-12) {
        return None;
    }
    Some(b)
}

#[derive(Debug, Default, Clone)]
struct PseudoCosts {
    up: HashMap<usize, (f64, usize)>,
    down: HashMap<usize, (f64, usize)>,
}

impl PseudoCosts {
    fn record(&mut self, var: usize, up: bool, frac: f64, gain: f64) {
        if frac <= 1e-9 || !gain.is_finite() {
            return;
        }
        let e = if up { &mut self.up } else { &mut self.down }.entry(var).or_insert((0.0, 0));
        e.0 += gain.max(0.0) / frac;
        e.1 += 1;
    }

    fn estimate(map: &HashMap<usize, (f64, usize)>, var: usize) -> f64 {
        match map.get(&var) {
            Some(&(s, n)) if n > 0 => s / n as f64,
            _ => 1.0,
        }
    }

    fn score(&self, var: usize, f: f64) -> f64 {
        let d = (Self::estimate(&self.down, var) * f).max(1e-6);
        let u = (Self::estimate(&self.up, var) * (1.0 - f)).max(1e-6);
        d * u
    }
}

fn choose_branch(m: &Model, values: &[f64], rule: Branching, pc: &PseudoCosts) -> Option<usize> {
    let mut best = None;
    let mut best_score = 0.0;
    for (j, v) in m.variables.iter().enumerate() {
        if v.kind == VarKind::Continuous || v.fixed {
            continue;
        }
        let f = values[j] - values[j].floor();
        let dist = f.min(1.0 - f);
        if dist <= 1e-6 {
            continue;
        }
        let score = match rule {
            Branching::MostFractional => dist,
            Branching::PseudoCost => pc.score(j, f),
        };
        if score > best_score {
            best_score = score;
            best = Some(j);
        }
    }
    best
}

/// Branch-and-cut with perspective-cut separation at every node.
pub fn branch_and_cut(m: &Model, cfg: &SolveConfig, hook: Option<PrimalHook>) -> SolveReport {
    let start = Instant::now();
    let deadline = cfg.deadline(start);
    let mut rel = Relaxation::new(m, cfg);
    let sign = rel.sign();
    let chains = im_chains(m);
    let root = rel.run(cfg.max_root_rounds, 0, Some(deadline));
    let root_time = start.elapsed().as_secs_f64();
    let mut report = SolveReport {
        formulation: m.formulation.label().to_string(),
        root_bound: sign * root.value,
        root_cuts: rel.pool.len(),
        root_rounds: root.rounds,
        root_converged: root.converged,
        root_time,
        incumbent: None,
        final_bound: sign * root.value,
        gap_percent: None,
        total_cuts: rel.pool.len(),
        total_time: root_time,
        nodes: 1,
        status: SolveStatus::Optimal,
        incumbent_point: None,
    };
    match root.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => {
            report.status = SolveStatus::Infeasible;
            report.final_bound = sign * f64::INFINITY;
            return report;
        }
        _ => {
            report.status = SolveStatus::NumericalFailure;
            return report;
        }
    }

    // incumbent in minimization orientation
    let mut best: Option<(f64, Vec<f64>)> = None;
    let offer = |best: &mut Option<(f64, Vec<f64>)>, value: f64, point: Vec<f64>| {
        if best.as_ref().map_or(true, |b| value < b.0) {
            *best = Some((value, point));
        }
    };
    let cutoff = |best: &Option<(f64, Vec<f64>)>| match best {
        Some((v, _)) => v - (cfg.mip_gap * v.abs()).max(1e-9),
        None => f64::INFINITY,
    };

    let mut heap = BinaryHeap::new();
    let mut next_id = 1;
    let mut closed_bound = f64::INFINITY;
    let mut pc = PseudoCosts::default();
    let mut processed = 0usize;
    let mut status = SolveStatus::Optimal;
    let mut pending_root = Some(root);
    heap.push(Queued(
        Node {
            id: 0,
            depth: 0,
            bound: report.root_bound * sign,
            fixes: Vec::new(),
            basis: None,
            branch: None,
        },
        cfg.node_order,
    ));

    while let Some(Queued(node, _)) = heap.pop() {
        if node.bound >= cutoff(&best) {
            closed_bound = closed_bound.min(node.bound);
            continue;
        }
        if Instant::now() >= deadline {
            status = SolveStatus::TimeLimit;
            heap.push(Queued(node, cfg.node_order));
            break;
        }
        if processed >= cfg.node_limit {
            status = SolveStatus::NodeLimit;
            heap.push(Queued(node, cfg.node_order));
            break;
        }
        processed += 1;
        let r = match pending_root.take() {
            Some(r) => r,
            None => {
                let Some(bounds) = node_bounds(&rel, &chains, &node.fixes) else {
                    continue;
                };
                rel.reset_bounds();
                let mut keys: Vec<_> = bounds.into_iter().collect();
                keys.sort_by_key(|&(j, _)| j);
                for (j, (lo, hi)) in keys {
                    rel.set_bounds(j, lo, hi.max(lo));
                }
                if let Some(b) = &node.basis {
                    rel.set_basis(b);
                }
                rel.run(cfg.max_node_rounds, node.id, Some(deadline))
            }
        };
        match r.status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => continue,
            _ => {
                // keep the parent bound so the reported bound stays valid
                closed_bound = closed_bound.min(node.bound);
                continue;
            }
        }
        let value = r.value.max(node.bound);
        if let Some((var, up, frac)) = node.branch {
            pc.record(var, up, frac, value - node.bound);
        }
        if let Some(h) = hook {
            if let Some((point, obj)) = h(m, &r.values) {
                offer(&mut best, sign * obj, point);
            }
        }
        if is_integral(m, &r.values, 1e-6) {
            offer(&mut best, r.value, r.values[..m.n_original].to_vec());
            closed_bound = closed_bound.min(value);
            continue;
        }
        if value >= cutoff(&best) {
            closed_bound = closed_bound.min(value);
            continue;
        }
        let Some(j) = choose_branch(m, &r.values, cfg.branching, &pc) else {
            closed_bound = closed_bound.min(value);
            continue;
        };
        let v = r.values[j];
        let f = v - v.floor();
        let basis = rel.basis();
        for up in [false, true] {
            let mut fixes = node.fixes.clone();
            let (lo, hi) = rel.bounds(j);
            if up {
                fixes.push((j, v.ceil(), hi));
            } else {
                fixes.push((j, lo, v.floor()));
            }
            heap.push(Queued(
                Node {
                    id: next_id,
                    depth: node.depth + 1,
                    bound: value,
                    fixes,
                    basis: Some(basis.clone()),
                    branch: Some((j, up, if up { 1.0 - f } else { f })),
                },
                cfg.node_order,
            ));
            next_id += 1;
        }
    }

    let open = heap.iter().map(|q| q.0.bound).fold(f64::INFINITY, f64::min);
    let mut bound = closed_bound.min(open);
    if let Some((v, _)) = &best {
        bound = bound.min(*v);
    }
    if best.is_none() && heap.is_empty() && status == SolveStatus::Optimal {
        status = SolveStatus::Infeasible;
    }
    report.nodes = processed.max(1);
    report.total_cuts = rel.pool.len();
    report.total_time = start.elapsed().as_secs_f64();
    report.status = status;
    report.final_bound = sign * bound;
    if let Some((v, point)) = best {
        report.incumbent = Some(sign * v);
        report.gap_percent = Some(gap_percent(sign * v, sign * bound));
        report.incumbent_point = Some(point);
    }
    report
}
