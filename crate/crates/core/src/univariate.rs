//! Closed-form univariate functions and their convex/concave decomposition.
//!
//! A [`UnivariateFunction`] is a sum of primitive terms, each with exact
//! first and second derivatives. [`find_breakpoints`] splits a bounded
//! domain into maximal intervals of constant curvature sign, which is the
//! input every formulation builder consumes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// |f''| at or below this value is treated as zero curvature.
pub const CURVATURE_TOL: f64 = 1e-9;
/// Segments shorter than this are merged into a neighbour.
pub const MIN_SEGMENT_LEN: f64 = 1e-8;
pub const DEFAULT_GRID_N: usize = 512;
pub const DEFAULT_ROOT_TOL: f64 = 1e-10;

/// A primitive term. The JSON form is `{"kind": "...", ...params}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Term {
    /// `amplitude * sin(frequency * x + phase)`
    Sine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `amplitude * cos(frequency * x + phase)`
    Cosine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// `c / (1 + b * exp(-a * (x + d)))`
    Logistic { a: f64, b: f64, c: f64, d: f64 },
    /// `sum_k coefficients[k] * x^k`
    Polynomial { coefficients: Vec<f64> },
    /// `a * (sin(b * x) + c * x)^2`
    SquaredComposite { a: f64, b: f64, c: f64 },
    /// `value + s d + q d^2` with `d = x - split`, using `left = [s, q]` for
    /// `x < split` and `right` otherwise. Continuous, with a kink at `split`
    /// unless the slopes agree.
    SplicedQuadratic {
        split: f64,
        value: f64,
        left: [f64; 2],
        right: [f64; 2],
    },
}

impl Term {
    fn eval(&self, x: f64, order: u8) -> f64 {
        match *self {
            Term::Sine {
                amplitude,
                frequency,
                phase,
            } => {
                let t = frequency * x + phase;
                match order {
                    0 => amplitude * t.sin(),
                    1 => amplitude * frequency * t.cos(),
                    _ => -amplitude * frequency * frequency * t.sin(),
                }
            }
            Term::Cosine {
                amplitude,
                frequency,
                phase,
            } => {
                let t = frequency * x + phase;
                match order {
                    0 => amplitude * t.cos(),
                    1 => -amplitude * frequency * t.sin(),
                    _ => -amplitude * frequency * frequency * t.cos(),
                }
            }
            Term::Logistic { a, b, c, d } => {
                // r = e / (1 + e) with e = b * exp(-a (x + d)); written through
                // the sigmoid so large exponents never overflow.
                let r = if b <= 0.0 {
                    0.0
                } else {
                    let t = b.ln() - a * (x + d);
                    sigmoid(t)
                };
                let s = 1.0 - r;
                match order {
                    0 => c * s,
                    1 => c * a * r * s,
                    _ => c * a * a * r * s * (2.0 * r - 1.0),
                }
            }
            Term::Polynomial { ref coefficients } => poly_eval(coefficients, x, order),
            Term::SquaredComposite { a, b, c } => {
                let h = (b * x).sin() + c * x;
                let h1 = b * (b * x).cos() + c;
                match order {
                    0 => a * h * h,
                    1 => 2.0 * a * h * h1,
                    _ => {
                        let h2 = -b * b * (b * x).sin();
                        2.0 * a * (h1 * h1 + h * h2)
                    }
                }
            }
            Term::SplicedQuadratic {
                split,
                value,
                left,
                right,
            } => {
                let d = x - split;
                let [s, q] = if d < 0.0 { left } else { right };
                match order {
                    0 => value + s * d + q * d * d,
                    1 => s + 2.0 * q * d,
                    _ => 2.0 * q,
                }
            }
        }
    }

    fn scaled(&self, k: f64) -> Term {
        match self.clone() {
            Term::Sine {
                amplitude,
                frequency,
                phase,
            } => Term::Sine {
                amplitude: amplitude * k,
                frequency,
                phase,
            },
            Term::Cosine {
                amplitude,
                frequency,
                phase,
            } => Term::Cosine {
                amplitude: amplitude * k,
                frequency,
                phase,
            },
            Term::Logistic { a, b, c, d } => Term::Logistic { a, b, c: c * k, d },
            Term::Polynomial { coefficients } => Term::Polynomial {
                coefficients: coefficients.into_iter().map(|v| v * k).collect(),
            },
            Term::SquaredComposite { a, b, c } => Term::SquaredComposite { a: a * k, b, c },
            Term::SplicedQuadratic {
                split,
                value,
                left,
                right,
            } => Term::SplicedQuadratic {
                split,
                value: value * k,
                left: left.map(|v| v * k),
                right: right.map(|v| v * k),
            },
        }
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

fn poly_eval(coefficients: &[f64], x: f64, order: u8) -> f64 {
    let mut acc = 0.0;
    for (k, &c) in coefficients.iter().enumerate().rev() {
        let k = k as i32;
        let factor = match order {
            0 => 1.0,
            1 => k as f64,
            _ => (k * (k - 1)) as f64,
        };
        let power = k - order as i32;
        if power < 0 {
            continue;
        }
        acc += c * factor * x.powi(power);
    }
    acc
}

/// Sum of primitive terms. Serialises as a plain JSON list of term records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(transparent)]
pub struct UnivariateFunction {
    pub terms: Vec<Term>,
}

impl UnivariateFunction {
    pub fn new(terms: Vec<Term>) -> Self {
        Self { terms }
    }

    pub fn sine(amplitude: f64, frequency: f64, phase: f64) -> Self {
        Self::new(vec![Term::Sine {
            amplitude,
            frequency,
            phase,
        }])
    }

    pub fn cosine(amplitude: f64, frequency: f64, phase: f64) -> Self {
        Self::new(vec![Term::Cosine {
            amplitude,
            frequency,
            phase,
        }])
    }

    pub fn logistic(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self::new(vec![Term::Logistic { a, b, c, d }])
    }

    pub fn polynomial(coefficients: Vec<f64>) -> Self {
        Self::new(vec![Term::Polynomial { coefficients }])
    }

    pub fn spliced_quadratic(split: f64, value: f64, left: [f64; 2], right: [f64; 2]) -> Self {
        Self::new(vec![Term::SplicedQuadratic {
            split,
            value,
            left,
            right,
        }])
    }

    pub fn squared_composite(a: f64, b: f64, c: f64) -> Self {
        Self::new(vec![Term::SquaredComposite { a, b, c }])
    }

    /// `f(x)` for order 0, `f'(x)` for 1, `f''(x)` for 2 (orders above 2 are
    /// treated as 2).
    pub fn eval(&self, x: f64, order: u8) -> f64 {
        self.terms.iter().map(|t| t.eval(x, order)).sum()
    }

    pub fn value(&self, x: f64) -> f64 {
        self.eval(x, 0)
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.eval(x, 1)
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.eval(x, 2)
    }

    /// `k * f`.
    pub fn scaled(&self, k: f64) -> Self {
        Self::new(self.terms.iter().map(|t| t.scaled(k)).collect())
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    /// `self + other`.
    pub fn plus(&self, other: &Self) -> Self {
        Self::new(self.terms.iter().chain(&other.terms).cloned().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentKind {
    Convex,
    Concave,
}

impl SegmentKind {
    pub fn is_convex(self) -> bool {
        matches!(self, SegmentKind::Convex)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecomposeError {
    #[error("empty domain: lower bound {lower} is not below upper bound {upper}")]
    EmptyDomain { lower: f64, upper: f64 },
    #[error("grid of {0} cells is too coarse (need at least 8)")]
    GridTooCoarse(usize),
    #[error("second derivative vanishes on the whole domain (function is linear)")]
    Linear,
    #[error("point {x} lies outside the decomposed domain [{lower}, {upper}]")]
    OutOfDomain { x: f64, lower: f64, upper: f64 },
    #[error("{0}")]
    Refine(String),
}

/// Breakpoints `l^1 < ... < l^{s+1}` with the curvature kind and secant slope
/// of every segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseDecomposition {
    pub breakpoints: Vec<f64>,
    pub kinds: Vec<SegmentKind>,
    pub secant_slopes: Vec<f64>,
}

impl PiecewiseDecomposition {
    /// Builds a decomposition from explicit breakpoints and kinds, computing
    /// the secant slopes from `f`.
    pub fn from_parts(f: &UnivariateFunction, breakpoints: Vec<f64>, kinds: Vec<SegmentKind>) -> Self {
        assert_eq!(breakpoints.len(), kinds.len() + 1, "one kind per segment");
        let secant_slopes = breakpoints
            .windows(2)
            .map(|w| (f.value(w[1]) - f.value(w[0])) / (w[1] - w[0]))
            .collect();
        Self {
            breakpoints,
            kinds,
            secant_slopes,
        }
    }

    /// Single segment of the given kind over `[l, u]`.
    pub fn single(f: &UnivariateFunction, l: f64, u: f64, kind: SegmentKind) -> Self {
        Self::from_parts(f, vec![l, u], vec![kind])
    }

    pub fn segment_count(&self) -> usize {
        self.kinds.len()
    }

    pub fn lower(&self) -> f64 {
        self.breakpoints[0]
    }

    pub fn upper(&self) -> f64 {
        *self.breakpoints.last().unwrap()
    }

    pub fn segment(&self, s: usize) -> (f64, f64) {
        (self.breakpoints[s], self.breakpoints[s + 1])
    }

    pub fn convex_segments(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.kinds.len()).filter(|&s| self.kinds[s].is_convex())
    }

    pub fn concave_segments(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.kinds.len()).filter(|&s| !self.kinds[s].is_convex())
    }

    /// Index of the segment containing `x`; breakpoints belong to the segment
    /// on their left except the domain's lower end.
    pub fn segment_of(&self, x: f64) -> Option<usize> {
        if !(self.lower()..=self.upper()).contains(&x) {
            return None;
        }
        let s = self.breakpoints[1..].partition_point(|&b| b < x);
        Some(s.min(self.segment_count() - 1))
    }

    /// Value of the piecewise-convex relaxation at `x`: `f` on convex
    /// segments, the secant on concave ones.
    pub fn relaxed_eval(&self, f: &UnivariateFunction, x: f64) -> Result<f64, DecomposeError> {
        let s = self.segment_of(x).ok_or(DecomposeError::OutOfDomain {
            x,
            lower: self.lower(),
            upper: self.upper(),
        })?;
        Ok(self.relaxed_eval_in(f, s, x))
    }

    /// Relaxed value using segment `s`'s rule, without a domain check.
    pub fn relaxed_eval_in(&self, f: &UnivariateFunction, s: usize, x: f64) -> f64 {
        if self.kinds[s].is_convex() {
            f.value(x)
        } else {
            let l = self.breakpoints[s];
            f.value(l) + self.secant_slopes[s] * (x - l)
        }
    }

    /// Splits the concave segment containing `x_star` at `x_star`.
    ///
    /// Returns the decomposition unchanged when `x_star` coincides with an
    /// existing breakpoint; errors when it lies outside the domain or inside a
    /// convex segment.
    pub fn refine_at(&self, f: &UnivariateFunction, x_star: f64) -> Result<Self, DecomposeError> {
        if self
            .breakpoints
            .iter()
            .any(|&b| (b - x_star).abs() <= MIN_SEGMENT_LEN)
        {
            return Ok(self.clone());
        }
        let s = self.segment_of(x_star).ok_or(DecomposeError::OutOfDomain {
            x: x_star,
            lower: self.lower(),
            upper: self.upper(),
        })?;
        if self.kinds[s].is_convex() {
            return Err(DecomposeError::Refine(format!(
                "point {x_star} lies in convex segment {s}; only concave segments are refined"
            )));
        }
        let mut breakpoints = self.breakpoints.clone();
        breakpoints.insert(s + 1, x_star);
        let mut kinds = self.kinds.clone();
        kinds.insert(s, SegmentKind::Concave);
        Ok(Self::from_parts(f, breakpoints, kinds))
    }
}

fn curvature_sign(v: f64) -> i8 {
    if v > CURVATURE_TOL {
        1
    } else if v < -CURVATURE_TOL {
        -1
    } else {
        0
    }
}

fn bisect_inflection(f: &UnivariateFunction, mut lo: f64, mut hi: f64, lo_sign: i8, root_tol: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= root_tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let v = f.second_derivative(mid);
        let same = if lo_sign > 0 { v > 0.0 } else { v < 0.0 };
        if same {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Scans `f''` on `grid_n + 1` uniform points over `[l, u]`, refines every
/// sign change by bisection and returns the merged decomposition.
pub fn find_breakpoints(
    f: &UnivariateFunction,
    l: f64,
    u: f64,
    grid_n: usize,
    root_tol: f64,
) -> Result<PiecewiseDecomposition, DecomposeError> {
    if !(l < u) {
        return Err(DecomposeError::EmptyDomain { lower: l, upper: u });
    }
    if grid_n < 8 {
        return Err(DecomposeError::GridTooCoarse(grid_n));
    }
    let h = (u - l) / grid_n as f64;
    let xs: Vec<f64> = (0..=grid_n)
        .map(|i| if i == grid_n { u } else { l + i as f64 * h })
        .collect();
    let signs: Vec<i8> = xs.iter().map(|&x| curvature_sign(f.second_derivative(x))).collect();
    if signs.iter().all(|&s| s == 0) {
        return Err(DecomposeError::Linear);
    }

    let mut roots = Vec::new();
    let mut last: Option<(usize, i8)> = None;
    for (i, &s) in signs.iter().enumerate() {
        if s == 0 {
            continue;
        }
        if let Some((j, sj)) = last {
            if sj != s {
                let root = if i - j == 2 {
                    // inflection sits on a grid point
                    xs[j + 1]
                } else {
                    bisect_inflection(f, xs[j], xs[i], sj, root_tol)
                };
                roots.push(root);
            }
        }
        last = Some((i, s));
    }

    let mut breakpoints = vec![l];
    for r in roots {
        if r - breakpoints.last().unwrap() >= MIN_SEGMENT_LEN && u - r >= MIN_SEGMENT_LEN {
            breakpoints.push(r);
        }
    }
    breakpoints.push(u);

    let kinds: Vec<SegmentKind> = breakpoints
        .windows(2)
        .map(|w| classify_segment(f, w[0], w[1], &xs, &signs))
        .collect();

    // merge neighbours of equal kind
    let mut merged_bp = vec![breakpoints[0]];
    let mut merged_kinds: Vec<SegmentKind> = Vec::new();
    for (s, &kind) in kinds.iter().enumerate() {
        if merged_kinds.last() == Some(&kind) {
            *merged_bp.last_mut().unwrap() = breakpoints[s + 1];
        } else {
            merged_kinds.push(kind);
            merged_bp.push(breakpoints[s + 1]);
        }
    }
    Ok(PiecewiseDecomposition::from_parts(f, merged_bp, merged_kinds))
}

fn classify_segment(f: &UnivariateFunction, a: f64, b: f64, xs: &[f64], signs: &[i8]) -> SegmentKind {
    match curvature_sign(f.second_derivative(0.5 * (a + b))) {
        1 => return SegmentKind::Convex,
        -1 => return SegmentKind::Concave,
        _ => {}
    }
    let balance: i32 = xs
        .iter()
        .zip(signs)
        .filter(|(&x, _)| x > a && x < b)
        .map(|(_, &s)| s as i32)
        .sum();
    if balance < 0 {
        SegmentKind::Concave
    } else {
        SegmentKind::Convex
    }
}

/// [`find_breakpoints`] with default resolution; a function with vanishing
/// curvature becomes a single convex segment.
pub fn decompose(f: &UnivariateFunction, l: f64, u: f64) -> Result<PiecewiseDecomposition, DecomposeError> {
    match find_breakpoints(f, l, u, DEFAULT_GRID_N, DEFAULT_ROOT_TOL) {
        Err(DecomposeError::Linear) => Ok(PiecewiseDecomposition::single(f, l, u, SegmentKind::Convex)),
        other => other,
    }
}
