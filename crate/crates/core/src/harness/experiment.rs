//! Batch runs over generated instances, aggregated into table rows.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::formulation::{build, Formulation, SeparableProblem, Strengthening};
use crate::problems::{primal_hook, Family, Instance};
use crate::solver::{branch_and_cut, gap_percent, solve_root_relaxation, LpStatus, SolveConfig, SolveReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub family: Family,
    /// NCK sizes use `(n, 0)`, UFL sizes `(K, T)`.
    pub sizes: Vec<(usize, usize)>,
    pub seeds: Vec<u64>,
    pub formulations: Vec<Formulation>,
    pub strengthening: Strengthening,
    pub config: SolveConfig,
    /// Skip branch-and-cut; only root relaxations are reported.
    pub relax_only: bool,
}

impl ExperimentSpec {
    pub fn new(family: Family, sizes: Vec<(usize, usize)>, seeds: Vec<u64>) -> Self {
        Self {
            family,
            sizes,
            seeds,
            formulations: vec![Formulation::Im, Formulation::Mcm],
            strengthening: Strengthening::Perspective,
            config: SolveConfig::default(),
            relax_only: false,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.sizes.is_empty() {
            return Err("no sizes given".into());
        }
        if self.seeds.is_empty() {
            return Err("no seeds given".into());
        }
        if self.formulations.is_empty() {
            return Err("no formulations given".into());
        }
        self.config.validate()
    }
}

pub fn size_label(family: Family, size: (usize, usize)) -> String {
    if family.is_nck() {
        size.0.to_string()
    } else {
        format!("{}x{}", size.0, size.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulationRun {
    pub formulation: Formulation,
    pub root_bound: f64,
    pub root_cuts: usize,
    pub root_time: f64,
    pub root_converged: bool,
    pub report: Option<SolveReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub family: Family,
    pub size: (usize, usize),
    pub seed: u64,
    pub runs: Vec<FormulationRun>,
    /// Best objective known for the instance's piecewise-convex relaxation.
    pub reference: Option<f64>,
    /// Incumbents of formulations solved to optimality disagree.
    pub flagged: bool,
    pub error: Option<String>,
}

impl InstanceResult {
    pub fn run(&self, f: Formulation) -> Option<&FormulationRun> {
        self.runs.iter().find(|r| r.formulation == f)
    }

    /// Root gap of `f` against the common reference incumbent.
    pub fn root_gap(&self, f: Formulation) -> Option<f64> {
        Some(gap_percent(self.reference?, self.run(f)?.root_bound))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulationStats {
    pub formulation: Formulation,
    pub time: f64,
    pub cuts: f64,
    pub optimal: usize,
    pub gap: f64,
    pub relax_gap: f64,
    pub relax_time: f64,
    pub relax_cuts: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub family: Family,
    pub size: String,
    pub instances: usize,
    pub stats: Vec<FormulationStats>,
    pub flagged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub spec: ExperimentSpec,
    pub rows: Vec<TableRow>,
    pub instances: Vec<InstanceResult>,
}

/// Shipping-cost function of a UFL instance under its relaxation.
fn relaxed_shipping(p: &SeparableProblem) -> impl Fn(f64) -> f64 + '_ {
    let t = &p.constraints[0].terms[0];
    move |w| match &t.decomposition {
        Some(d) => d.relaxed_eval(&t.func, w).unwrap_or_else(|_| t.func.value(w)),
        None => t.func.value(w),
    }
}

/// Runs every requested formulation on one instance.
pub fn run_instance(spec: &ExperimentSpec, inst: &Instance, size: (usize, usize)) -> InstanceResult {
    let mut res = InstanceResult {
        family: spec.family,
        size,
        seed: inst.seed(),
        runs: Vec::new(),
        reference: None,
        flagged: false,
        error: None,
    };
    let p = match inst.to_separable() {
        Ok(p) => p,
        Err(e) => {
            res.error = Some(e.to_string());
            return res;
        }
    };
    let mut candidates: Vec<f64> = Vec::new();
    if matches!(inst, Instance::Ufl(_)) {
        if let Some((_, v)) = inst.construct(&relaxed_shipping(&p)) {
            candidates.push(v);
        }
    }
    let hook = primal_hook(inst, &p);
    for &f in &spec.formulations {
        let m = match build(&p, f, spec.strengthening) {
            Ok(m) => m,
            Err(e) => {
                res.error = Some(format!("{}: {e}", f.label()));
                return res;
            }
        };
        let run = if spec.relax_only {
            let start = Instant::now();
            let r = solve_root_relaxation(&m, &spec.config);
            if r.status != LpStatus::Optimal {
                res.error = Some(format!("{} root relaxation: {:?}", f.label(), r.status));
                return res;
            }
            if let Ok((_, v)) = inst.relaxed_repair(&p, &r.assignment.values[..m.n_original]) {
                candidates.push(v);
            }
            FormulationRun {
                formulation: f,
                root_bound: r.bound,
                root_cuts: r.cuts_used,
                root_time: start.elapsed().as_secs_f64(),
                root_converged: r.converged,
                report: None,
            }
        } else {
            let rep = branch_and_cut(&m, &spec.config, Some(&hook));
            if let Some(v) = rep.incumbent {
                candidates.push(v);
            }
            FormulationRun {
                formulation: f,
                root_bound: rep.root_bound,
                root_cuts: rep.root_cuts,
                root_time: rep.root_time,
                root_converged: rep.root_converged,
                report: Some(rep),
            }
        };
        res.runs.push(run);
    }
    res.reference = candidates.into_iter().reduce(f64::min);
    let solved: Vec<f64> = res
        .runs
        .iter()
        .filter_map(|r| r.report.as_ref())
        .filter(|r| r.status == crate::solver::SolveStatus::Optimal)
        .filter_map(|r| r.incumbent)
        .collect();
    res.flagged = solved
        .iter()
        .any(|a| solved.iter().any(|b| (a - b).abs() > 1e-5 * (1.0 + a.abs())));
    res
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut n) = (0.0, 0usize);
    for v in values {
        s += v;
        n += 1;
    }
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Averages one size's instances (those that ran without error).
pub fn aggregate(spec: &ExperimentSpec, size: (usize, usize), instances: &[&InstanceResult]) -> TableRow {
    let ok: Vec<&InstanceResult> = instances.iter().copied().filter(|r| r.error.is_none()).collect();
    let stats = spec
        .formulations
        .iter()
        .map(|&f| {
            let runs: Vec<(&InstanceResult, &FormulationRun)> =
                ok.iter().filter_map(|r| r.run(f).map(|x| (*r, x))).collect();
            let reports: Vec<&SolveReport> = runs.iter().filter_map(|(_, r)| r.report.as_ref()).collect();
            FormulationStats {
                formulation: f,
                time: mean(reports.iter().map(|r| r.total_time)),
                cuts: mean(reports.iter().map(|r| r.total_cuts as f64)),
                optimal: reports
                    .iter()
                    .filter(|r| r.status == crate::solver::SolveStatus::Optimal)
                    .count(),
                gap: mean(reports.iter().filter_map(|r| r.gap_percent)),
                relax_gap: mean(runs.iter().filter_map(|(i, _)| i.root_gap(f))),
                relax_time: mean(runs.iter().map(|(_, r)| r.root_time)),
                relax_cuts: mean(runs.iter().map(|(_, r)| r.root_cuts as f64)),
            }
        })
        .collect();
    TableRow {
        family: spec.family,
        size: size_label(spec.family, size),
        instances: ok.len(),
        stats,
        flagged: ok.iter().filter(|r| r.flagged).count(),
    }
}

/// Runs the batch in size-then-seed order; `progress` sees every instance
/// as it finishes.
pub fn run_experiment_with(
    spec: &ExperimentSpec,
    progress: &mut dyn FnMut(&InstanceResult),
) -> Result<Experiment, String> {
    spec.validate()?;
    let mut instances = Vec::new();
    for &size in &spec.sizes {
        for &seed in &spec.seeds {
            let r = match spec.family.generate(size, seed) {
                Ok(inst) => run_instance(spec, &inst, size),
                Err(e) => InstanceResult {
                    family: spec.family,
                    size,
                    seed,
                    runs: Vec::new(),
                    reference: None,
                    flagged: false,
                    error: Some(e.to_string()),
                },
            };
            progress(&r);
            instances.push(r);
        }
    }
    let rows = spec
        .sizes
        .iter()
        .map(|&size| {
            let group: Vec<&InstanceResult> = instances.iter().filter(|r| r.size == size).collect();
            aggregate(spec, size, &group)
        })
        .collect();
    Ok(Experiment {
        spec: spec.clone(),
        rows,
        instances,
    })
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Experiment, String> {
    run_experiment_with(spec, &mut |_| {})
}

fn num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), num)
}

impl Experiment {
    /// One line per size: per formulation the branch-and-cut columns
    /// (time, cuts, #O, gap) and the relaxation columns (gap, time, cuts).
    pub fn table_csv(&self) -> String {
        let mut s = String::from("family,size,instances");
        for f in &self.spec.formulations {
            let l = f.label();
            write!(s, ",{l}_time,{l}_cuts,{l}_opt,{l}_gap,{l}_relax_gap,{l}_relax_time,{l}_relax_cuts").unwrap();
        }
        s.push_str(",flagged\n");
        for r in &self.rows {
            write!(s, "{},{},{}", r.family.label(), r.size, r.instances).unwrap();
            for st in &r.stats {
                let bnc = !self.spec.relax_only;
                write!(
                    s,
                    ",{},{},{},{},{},{},{}",
                    if bnc { num(st.time) } else { String::new() },
                    if bnc { num(st.cuts) } else { String::new() },
                    if bnc { st.optimal.to_string() } else { String::new() },
                    if bnc { num(st.gap) } else { String::new() },
                    num(st.relax_gap),
                    num(st.relax_time),
                    num(st.relax_cuts)
                )
                .unwrap();
            }
            writeln!(s, ",{}", r.flagged).unwrap();
        }
        s
    }

    /// One line per instance and formulation.
    pub fn instances_csv(&self) -> String {
        let mut s = String::from(
            "family,size,seed,formulation,root_bound,root_cuts,root_time,relax_gap,reference,incumbent,final_bound,gap,nodes,status,total_time,total_cuts,flagged,error\n",
        );
        for i in &self.instances {
            let size = size_label(i.family, i.size);
            if i.runs.is_empty() {
                writeln!(
                    s,
                    "{},{},{},,,,,,,,,,,,,,{},{}",
                    i.family.label(),
                    size,
                    i.seed,
                    i.flagged,
                    i.error.as_deref().unwrap_or("").replace(',', ";")
                )
                .unwrap();
            }
            for r in &i.runs {
                let rep = r.report.as_ref();
                writeln!(
                    s,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    i.family.label(),
                    size,
                    i.seed,
                    r.formulation.label(),
                    num(r.root_bound),
                    r.root_cuts,
                    num(r.root_time),
                    opt(i.root_gap(r.formulation)),
                    opt(i.reference),
                    opt(rep.and_then(|x| x.incumbent)),
                    opt(rep.map(|x| x.final_bound)),
                    opt(rep.and_then(|x| x.gap_percent)),
                    rep.map_or(String::new(), |x| x.nodes.to_string()),
                    rep.map_or("", |x| x.status.label()),
                    opt(rep.map(|x| x.total_time)),
                    rep.map_or(String::new(), |x| x.total_cuts.to_string()),
                    i.flagged,
                    i.error.as_deref().unwrap_or("").replace(',', ";")
                )
                .unwrap();
            }
        }
        s
    }
}
