//! The acceptance suite: twelve criteria, each a pass/fail check with a
//! tolerance and (for most) a wall-clock budget.

use std::f64::consts::PI;
use std::fmt;
use std::time::Instant;

use super::experiment::{run_experiment, ExperimentSpec, InstanceResult};
use crate::cuts::make_cut;
use crate::formulation::{build, map_im_to_mcm, Formulation, Model, Strengthening};
use crate::oracles::{
    brute_force_minlp, envelope, grid, profile_config, profile_model, profile_series, tangency, BruteForceOptions,
    DEFAULT_SAMPLES, PROFILE_POINTS,
};
use crate::problems::{gen_nck, gen_ufl, primal_hook, ufl_type_params, Family, Instance, NckFamily, SplitMix64};
use crate::solver::{branch_and_cut, solve_root_relaxation, LpStatus, SolveConfig, SolveStatus};
use crate::univariate::{decompose, PiecewiseDecomposition, SegmentKind, UnivariateFunction};

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub seconds: f64,
    pub budget: Option<f64>,
    pub detail: String,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let budget = self.budget.map_or(String::new(), |b| format!(" / {b:.0}s"));
        write!(
            f,
            "[{}] {:>2} {:<28} {:>7.1}s{budget}  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

pub const CRITERIA: [(&str, Option<f64>); 12] = [
    ("envelope certification", Some(30.0)),
    ("separation on -sin", Some(10.0)),
    ("IM/MCM equivalence", Some(60.0)),
    ("IM to MCM mapping", None),
    ("MCM/CCM equivalence", None),
    ("bound dominance", None),
    ("NCK logistic bounds", Some(300.0)),
    ("NCK trig gaps", Some(900.0)),
    ("UFL gaps", Some(1200.0)),
    ("branch-and-cut vs brute force", None),
    ("cut validity", None),
    ("perspective has no effect", None),
];

type Check = Result<String, String>;

/// Runs criterion `id` (1-based).
pub fn run_criterion(id: usize) -> CriterionResult {
    let (name, budget) = CRITERIA[id - 1];
    let start = Instant::now();
    let outcome = match id {
        1 => envelope_certification(),
        2 => separation(),
        3 => equivalence(),
        4 => mapping(),
        5 => mcm_ccm(),
        6 => dominance(),
        7 => nck_logistic(),
        8 => nck_trig(),
        9 => ufl(),
        10 => bnc_vs_brute_force(),
        11 => cut_validity(),
        12 => perspective_no_effect(),
        _ => Err(format!("unknown criterion {id}")),
    };
    let seconds = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match outcome {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    if let Some(b) = budget {
        if seconds > b {
            passed = false;
            detail = format!("over budget; {detail}");
        }
    }
    CriterionResult {
        id,
        name,
        passed,
        seconds,
        budget,
        detail,
    }
}

/// Runs the selected criteria (all when `ids` is empty), reporting each as it
/// finishes.
pub fn run_all(ids: &[usize], report: &mut dyn FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    let ids: Vec<usize> = if ids.is_empty() { (1..=12).collect() } else { ids.to_vec() };
    ids.into_iter()
        .map(|id| {
            let r = run_criterion(id);
            report(&r);
            r
        })
        .collect()
}

fn decomposed(f: &UnivariateFunction, l: f64, u: f64) -> Result<PiecewiseDecomposition, String> {
    decompose(f, l, u).map_err(|e| e.to_string())
}

fn profile(f: &UnivariateFunction, d: &PiecewiseDecomposition, form: Formulation, s: Strengthening) -> Result<Vec<f64>, String> {
    let m = profile_model(f, d, form, s).map_err(|e| e.to_string())?;
    profile_series(&m, &grid(d.lower(), d.upper(), PROFILE_POINTS), &profile_config()).map_err(|e| e.to_string())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn check(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Tight configuration for bound comparisons.
fn bound_config() -> SolveConfig {
    SolveConfig {
        cut_eps: 1e-9,
        max_root_rounds: 5000,
        ..SolveConfig::default()
    }
}

fn logistic_draws(count: usize, seed: u64) -> Vec<UnivariateFunction> {
    let inst = gen_nck(count, NckFamily::Logistic, seed).expect("valid size");
    (0..count).map(|j| inst.function(j)).collect()
}

fn envelope_certification() -> Check {
    let mut fs: Vec<(String, UnivariateFunction, f64, f64)> = vec![
        ("-sin".into(), UnivariateFunction::sine(-1.0, 1.0, 0.0), 0.0, 2.0 * PI),
        ("sin".into(), UnivariateFunction::sine(1.0, 1.0, 0.0), 0.0, 2.0 * PI),
    ];
    for (j, f) in logistic_draws(3, 1).into_iter().enumerate() {
        fs.push((format!("logistic#{j}"), f, 0.0, 100.0));
    }
    for ty in 1..=3 {
        let (a, b, c) = ufl_type_params(ty).expect("known type");
        fs.push((format!("ufl-{ty}"), UnivariateFunction::squared_composite(a, b, c), 0.0, 1.0));
    }
    fs.push(("trig".into(), crate::problems::trig_function(), 0.0, 100.0));
    let mut worst = (0.0f64, String::new());
    for (name, f, l, u) in &fs {
        let d = decomposed(f, *l, *u)?;
        let env = envelope(f, &d, DEFAULT_SAMPLES).map_err(|e| e.to_string())?;
        let mcm = profile(f, &d, Formulation::Mcm, Strengthening::Perspective)?;
        let err = grid(*l, *u, PROFILE_POINTS)
            .iter()
            .zip(&mcm)
            .map(|(&x, v)| (env.eval(x) - v).abs())
            .fold(0.0, f64::max);
        if err > worst.0 {
            worst = (err, name.clone());
        }
    }
    check(
        worst.0 <= 1e-4,
        format!("{} functions, max |MCM - envelope| = {:.2e} ({})", fs.len(), worst.0, worst.1),
    )
}

/// Largest gap between the convex envelope of `-sin` on `[0, 2pi]` and the
/// IM relaxation profile, in closed form. The IM profile is `-sin x` up to
/// `pi/2`, `-1` up to `pi` and `-sin(x/2)` beyond; the envelope leaves
/// `-sin` at the tangency point `t*` towards `(2pi, 0)`.
pub fn neg_sin_exact_gap() -> f64 {
    let f = UnivariateFunction::sine(-1.0, 1.0, 0.0);
    let t = tangency(&f, 2.0 * PI, 0.0, PI / 2.0, PI, 1e-12).expect("bracketed tangency");
    let slope = -t.cos();
    let x = 2.0 * (2.0 * t.cos()).acos();
    -t.sin() + slope * (x - t) + (x / 2.0).sin()
}

fn separation() -> Check {
    let f = UnivariateFunction::sine(-1.0, 1.0, 0.0);
    let d = decomposed(&f, 0.0, 2.0 * PI)?;
    let im = profile(&f, &d, Formulation::Im, Strengthening::Perspective)?;
    let mcm = profile(&f, &d, Formulation::Mcm, Strengthening::Perspective)?;
    let above = im.iter().zip(&mcm).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    let gap = mcm.iter().zip(&im).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    let exact = neg_sin_exact_gap();
    check(
        above <= 1e-7 && gap > 0.05 && gap >= 0.5 * exact,
        format!("max(IM - MCM) = {above:.2e}, max(MCM - IM) = {gap:.5} (exact {exact:.5})"),
    )
}

/// Concave quadratic on `[0, c]` spliced continuously to a convex quadratic
/// on `[c, 4]`, with its two-segment decomposition. The slope can only jump
/// upwards at `c`, so the kink belongs to the convex side.
pub fn random_spliced(rng: &mut SplitMix64) -> (UnivariateFunction, PiecewiseDecomposition) {
    let split = rng.uniform(1.0, 3.0);
    let value = rng.uniform(-1.0, 1.0);
    let slope = rng.uniform(-2.0, 2.0);
    let left = [slope, rng.uniform(-3.0, -0.5)];
    let right = [slope + rng.uniform(0.0, 2.0), rng.uniform(0.5, 3.0)];
    let f = UnivariateFunction::spliced_quadratic(split, value, left, right);
    let d = PiecewiseDecomposition::from_parts(&f, vec![0.0, split, 4.0], vec![SegmentKind::Concave, SegmentKind::Convex]);
    (f, d)
}

fn equivalence() -> Check {
    let sin = UnivariateFunction::sine(1.0, 1.0, 0.0);
    let sin_d = decomposed(&sin, 0.0, 2.0 * PI)?;
    if sin_d.segment_count() != 2 || sin_d.kinds[0].is_convex() {
        return Err(format!("sin is not concave-then-convex: {:?}", sin_d.kinds));
    }
    let mut fs = vec![(sin, sin_d)];
    let mut rng = SplitMix64::new(3);
    for _ in 0..20 {
        fs.push(random_spliced(&mut rng));
    }
    let mut worst = 0.0f64;
    for (f, d) in &fs {
        let d = d.clone();
        let im = profile(f, &d, Formulation::Im, Strengthening::Perspective)?;
        let mcm = profile(f, &d, Formulation::Mcm, Strengthening::Perspective)?;
        worst = worst.max(max_abs_diff(&im, &mcm));
    }
    check(
        worst <= 1e-5,
        format!("{} functions, max |IM - MCM| = {worst:.2e}", fs.len()),
    )
}

/// Random point of the continuous IM relaxation of an epigraph model.
fn random_im_point(im: &Model, rng: &mut SplitMix64) -> Vec<f64> {
    let mut v: Vec<f64> = im.variables.iter().map(|x| x.lower.max(0.0)).collect();
    let slack = rng.next_f64() < 0.5;
    for b in &im.blocks {
        let n = b.segments.len();
        let mut ys = vec![1.0; n];
        for s in 1..n {
            ys[s] = ys[s - 1] * rng.next_f64();
        }
        let mut total = b.decomposition.lower();
        for (s, sv) in b.segments.iter().enumerate() {
            let (lo, hi) = b.decomposition.segment(s);
            let len = hi - lo;
            let next = if s + 1 < n { ys[s + 1] } else { 0.0 };
            let x = len * (next + (ys[s] - next) * rng.next_f64());
            v[sv.y] = ys[s];
            v[sv.x] = x;
            total += x;
        }
        v[b.var] = total;
    }
    for t in &im.terms {
        let value = t.value(v[t.x], v[t.y]);
        let extra = if slack { rng.next_f64() * 0.5 } else { 0.0 };
        v[t.z] = (value + extra).min(im.variables[t.z].upper).max(value);
    }
    // epigraph variable of the one-dimensional model
    let extra = if slack { rng.next_f64() } else { 0.0 };
    v[1] = im.block_contribution(0, &v) + extra;
    v
}

fn mapping() -> Check {
    let mut rng = SplitMix64::new(4);
    let mut worst_viol = 0.0f64;
    let mut worst_obj = f64::NEG_INFINITY;
    let mut points = 0;
    for _ in 0..20 {
        let (f, d) = random_spliced(&mut rng);
        let im = profile_model(&f, &d, Formulation::Im, Strengthening::Perspective).map_err(|e| e.to_string())?;
        let mcm = profile_model(&f, &d, Formulation::Mcm, Strengthening::Perspective).map_err(|e| e.to_string())?;
        for _ in 0..10 {
            let v = random_im_point(&im, &mut rng);
            let iv = im.max_violation(&v, false);
            if iv > 1e-9 {
                return Err(format!("generated IM point violates by {iv:.2e}"));
            }
            let a = im.assignment(v);
            let mapped = map_im_to_mcm(&a, &im, &mcm).map_err(|e| e.to_string())?;
            worst_viol = worst_viol.max(mcm.max_violation(&mapped.values, false));
            worst_obj = worst_obj.max(mapped.objective - a.objective);
            points += 1;
        }
    }
    check(
        worst_viol <= 1e-8 && worst_obj <= 1e-9,
        format!("{points} points, max MCM violation {worst_viol:.2e}, max objective increase {worst_obj:.2e}"),
    )
}

/// Small instance number `i` of a batch cycling through `families`.
pub fn desk_instance(families: &[Family], i: usize) -> Instance {
    let family = families[i % families.len()];
    let round = i / families.len();
    let size = if family.is_nck() {
        (2 + round % 4, 0)
    } else {
        [(2, 3), (3, 3), (2, 4), (3, 4)][round % 4]
    };
    family.generate(size, 1000 + i as u64).expect("valid desk size")
}

fn root_bound(p: &crate::formulation::SeparableProblem, f: Formulation, cfg: &SolveConfig) -> Result<f64, String> {
    let m = build(p, f, Strengthening::Perspective).map_err(|e| e.to_string())?;
    let r = solve_root_relaxation(&m, cfg);
    if r.status != LpStatus::Optimal || !r.converged {
        return Err(format!("{} root relaxation: {:?}, converged {}", f.label(), r.status, r.converged));
    }
    Ok(r.bound)
}

fn mcm_ccm() -> Check {
    let cfg = bound_config();
    let families = [Family::NckLogistic, Family::NckTrig, Family::Ufl1, Family::Ufl2, Family::Ufl3];
    let mut worst = 0.0f64;
    for i in 0..30 {
        let p = desk_instance(&families, i).to_separable().map_err(|e| e.to_string())?;
        let a = root_bound(&p, Formulation::Mcm, &cfg)?;
        let b = root_bound(&p, Formulation::Ccm, &cfg)?;
        worst = worst.max((a - b).abs() / (1.0 + a.abs()));
    }
    check(worst <= 1e-6, format!("30 instances, max |MCM - CCM| / (1 + |MCM|) = {worst:.2e}"))
}

fn dominance() -> Check {
    let cfg = SolveConfig {
        feas_tol: 1e-12,
        opt_tol: 1e-12,
        ..bound_config()
    };
    let mut worst = f64::NEG_INFINITY;
    let mut strict = 0;
    for i in 0..100 {
        let p = desk_instance(&Family::ALL, i).to_separable().map_err(|e| e.to_string())?;
        let im = root_bound(&p, Formulation::Im, &cfg)?;
        let mcm = root_bound(&p, Formulation::Mcm, &cfg)?;
        worst = worst.max(im - mcm);
        if mcm > im + 1e-6 * (1.0 + im.abs()) {
            strict += 1;
        }
    }
    check(
        worst <= 1e-9,
        format!("100 instances, max (IM - MCM) = {worst:.2e}, MCM strictly tighter on {strict}"),
    )
}

fn nck_logistic() -> Check {
    let cfg = bound_config();
    let mut worst = 0.0f64;
    for n in [10, 20, 50] {
        for seed in 1..=10 {
            let p = Instance::Nck(gen_nck(n, NckFamily::Logistic, seed).map_err(|e| e.to_string())?)
                .to_separable()
                .map_err(|e| e.to_string())?;
            let im = root_bound(&p, Formulation::Im, &cfg)?;
            let mcm = root_bound(&p, Formulation::Mcm, &cfg)?;
            worst = worst.max((im - mcm).abs() / mcm.abs().max(1.0));
        }
    }
    check(worst <= 1e-6, format!("30 instances, max relative |IM - MCM| = {worst:.2e}"))
}

fn mean_gap(group: &[&InstanceResult], f: Formulation) -> f64 {
    let gaps: Vec<f64> = group.iter().filter_map(|r| r.root_gap(f)).collect();
    gaps.iter().sum::<f64>() / gaps.len().max(1) as f64
}

fn nck_trig() -> Check {
    let mut spec = ExperimentSpec::new(Family::NckTrig, vec![(10, 0), (20, 0), (50, 0)], (1..=10).collect());
    spec.config.time_limit_seconds = 60.0;
    let exp = run_experiment(&spec)?;
    let mut lines = Vec::new();
    let mut ok = true;
    let mut compared = 0;
    for &size in &spec.sizes {
        let group: Vec<&InstanceResult> = exp.instances.iter().filter(|r| r.size == size).collect();
        if let Some(e) = group.iter().find_map(|r| r.error.clone()) {
            return Err(e);
        }
        let (im, mcm) = (mean_gap(&group, Formulation::Im), mean_gap(&group, Formulation::Mcm));
        ok &= mcm < im;
        lines.push(format!("n={}: IM {im:.3}% MCM {mcm:.3}%", size.0));
        for r in &group {
            let inc = |f| {
                r.run(f)
                    .and_then(|x| x.report.as_ref())
                    .filter(|x| x.status == SolveStatus::Optimal)
                    .and_then(|x| x.incumbent)
            };
            if let (Some(a), Some(b)) = (inc(Formulation::Im), inc(Formulation::Mcm)) {
                compared += 1;
                if (a - b).abs() > 1e-5 * a.abs().max(1.0) {
                    ok = false;
                    lines.push(format!("seed {}: incumbents {a} vs {b}", r.seed));
                }
            }
        }
    }
    lines.push(format!("{compared} instances solved by both"));
    check(ok, lines.join("; "))
}

fn ufl() -> Check {
    let mut lines = Vec::new();
    let mut ok = true;
    for (ty, family) in [(1, Family::Ufl1), (2, Family::Ufl2), (3, Family::Ufl3)] {
        let mut spec = ExperimentSpec::new(family, vec![(3, 6), (6, 12)], (1..=10).collect());
        spec.relax_only = true;
        let exp = run_experiment(&spec)?;
        for &size in &spec.sizes {
            let group: Vec<&InstanceResult> = exp.instances.iter().filter(|r| r.size == size).collect();
            if let Some(e) = group.iter().find_map(|r| r.error.clone()) {
                return Err(e);
            }
            let (im, mcm) = (mean_gap(&group, Formulation::Im), mean_gap(&group, Formulation::Mcm));
            let mut row = format!("{}x{}x{ty}: IM {im:.2}% MCM {mcm:.2}%", size.0, size.1);
            if mcm > im {
                ok = false;
                row.push_str(" (MCM above IM)");
            }
            if ty == 3 && im < 2.0 * mcm {
                ok = false;
                row.push_str(&format!(" (ratio {:.2} < 2)", im / mcm));
            }
            lines.push(row);
        }
    }
    check(ok, lines.join("; "))
}

fn bnc_vs_brute_force() -> Check {
    let mut instances = Vec::new();
    for i in 0..15u64 {
        let n = 1 + (i as usize % 3);
        let fam = if i % 2 == 0 { NckFamily::Trig } else { NckFamily::Logistic };
        instances.push(Instance::Nck(gen_nck(n, fam, 500 + i).map_err(|e| e.to_string())?));
    }
    for i in 0..10u64 {
        instances.push(Instance::Ufl(gen_ufl(2, 3, 1 + (i % 3) as u8, 600 + i).map_err(|e| e.to_string())?));
    }
    let cfg = SolveConfig::default();
    let mut worst = 0.0f64;
    for inst in &instances {
        let p = inst.to_separable().map_err(|e| e.to_string())?;
        let bf = brute_force_minlp(&p, &BruteForceOptions::default()).map_err(|e| e.to_string())?;
        let truth = bf.objective.ok_or("brute force found no feasible point")?;
        let hook = primal_hook(inst, &p);
        for f in [Formulation::Im, Formulation::Mcm] {
            let m = build(&p, f, Strengthening::Perspective).map_err(|e| e.to_string())?;
            let rep = branch_and_cut(&m, &cfg, Some(&hook));
            let inc = rep
                .incumbent
                .filter(|_| rep.status == SolveStatus::Optimal)
                .ok_or_else(|| format!("{} ended {:?}", f.label(), rep.status))?;
            worst = worst.max((inc - truth).abs() / truth.abs().max(1.0));
        }
    }
    check(
        worst <= 1e-3,
        format!("{} instances, max relative |B&C - brute force| = {worst:.2e}", instances.len()),
    )
}

fn cut_validity() -> Check {
    let mut families: Vec<(String, UnivariateFunction, f64, f64)> = vec![
        ("sin".into(), UnivariateFunction::sine(1.0, 1.0, 0.0), 0.0, 2.0 * PI),
        ("-sin".into(), UnivariateFunction::sine(-1.0, 1.0, 0.0), 0.0, 2.0 * PI),
        ("trig".into(), crate::problems::trig_function(), 0.0, 100.0),
        ("logistic".into(), logistic_draws(1, 9).remove(0), 0.0, 100.0),
    ];
    for ty in 1..=3 {
        let (a, b, c) = ufl_type_params(ty).expect("known type");
        families.push((format!("ufl-{ty}"), UnivariateFunction::squared_composite(a, b, c), 0.0, 1.0));
    }
    let mut rng = SplitMix64::new(11);
    let mut worst = (f64::NEG_INFINITY, String::new());
    let checks = 100_000;
    for (name, f, l, u) in &families {
        let d = decomposed(f, *l, *u)?;
        let mut terms = Vec::new();
        for form in [Formulation::Im, Formulation::Mcm] {
            let m = profile_model(f, &d, form, Strengthening::Perspective).map_err(|e| e.to_string())?;
            terms.extend(m.terms);
        }
        if terms.is_empty() {
            continue;
        }
        for k in 0..checks {
            let t = &terms[k % terms.len()];
            let q = rng.uniform(t.q_lo, t.q_hi);
            let cut = make_cut(t, 0, q).map_err(|e| e.to_string())?;
            let y = 1.0 - rng.next_f64();
            let point = rng.uniform(t.q_lo, t.q_hi);
            let (x, z) = if t.perspective {
                (y * (point - t.anchor), y * (f.value(point) - t.offset))
            } else {
                (point - t.anchor, f.value(point) - t.offset)
            };
            let v = cut.rhs(x, y) - z;
            if v > worst.0 {
                worst = (v, name.clone());
            }
        }
    }
    check(
        worst.0 <= 1e-9,
        format!(
            "{} families x {checks} checks, max violation {:.2e} ({})",
            families.len(),
            worst.0.max(0.0),
            worst.1
        ),
    )
}

fn perspective_no_effect() -> Check {
    let f = UnivariateFunction::sine(-1.0, 1.0, 0.0);
    let d = decomposed(&f, 0.0, 2.0 * PI)?;
    let pr = profile(&f, &d, Formulation::Im, Strengthening::Perspective)?;
    let plain = profile(&f, &d, Formulation::Im, Strengthening::Plain)?;
    let diff = max_abs_diff(&pr, &plain);
    check(diff <= 1e-6, format!("max |IM(PR) - IM(plain)| = {diff:.2e}"))
}
