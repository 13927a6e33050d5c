//! Relaxation profile figures as standalone SVG.

use std::fmt::Write as _;
use std::path::Path;

use crate::formulation::{Formulation, Strengthening};
use crate::oracles::{grid, profile_config, profile_model, profile_series, write_series_csv, OracleError, PROFILE_POINTS};
use crate::univariate::{PiecewiseDecomposition, UnivariateFunction};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 48.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSeries {
    pub xs: Vec<f64>,
    pub original: Vec<f64>,
    pub relaxed: Vec<f64>,
    pub im: Vec<f64>,
    pub mcm: Vec<f64>,
}

/// Original function, piecewise-convex relaxation and the IM/MCM relaxation
/// profiles on the default grid.
pub fn profile_data(
    f: &UnivariateFunction,
    d: &PiecewiseDecomposition,
    strengthening: Strengthening,
) -> Result<ProfileSeries, OracleError> {
    let xs = grid(d.lower(), d.upper(), PROFILE_POINTS);
    let cfg = profile_config();
    let im = profile_series(&profile_model(f, d, Formulation::Im, strengthening)?, &xs, &cfg)?;
    let mcm = profile_series(&profile_model(f, d, Formulation::Mcm, strengthening)?, &xs, &cfg)?;
    Ok(ProfileSeries {
        original: xs.iter().map(|&x| f.value(x)).collect(),
        relaxed: xs
            .iter()
            .map(|&x| d.relaxed_eval(f, x).unwrap_or_else(|_| f.value(x)))
            .collect(),
        xs,
        im,
        mcm,
    })
}

impl ProfileSeries {
    pub fn csv(&self) -> String {
        let mut out = Vec::new();
        write_series_csv(
            &mut out,
            &self.xs,
            &[
                ("g", &self.original),
                ("relaxed", &self.relaxed),
                ("im", &self.im),
                ("mcm", &self.mcm),
            ],
        )
        .expect("writing to memory");
        String::from_utf8(out).expect("ascii")
    }

    pub fn svg(&self, title: &str) -> String {
        let all = self.original.iter().chain(&self.relaxed).chain(&self.im).chain(&self.mcm);
        let (mut lo, mut hi) = all.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if hi - lo < 1e-12 {
            lo -= 1.0;
            hi += 1.0;
        }
        let pad = 0.05 * (hi - lo);
        let (lo, hi) = (lo - pad, hi + pad);
        let (x0, x1) = (self.xs[0], self.xs[self.xs.len() - 1]);
        let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let py = |y: f64| HEIGHT - MARGIN - (y - lo) / (hi - lo) * (HEIGHT - 2.0 * MARGIN);
        let path = |ys: &[f64]| -> String {
            let mut s = String::new();
            for (i, (&x, &y)) in self.xs.iter().zip(ys).enumerate() {
                write!(s, "{}{:.2},{:.2}", if i == 0 { "M" } else { " L" }, px(x), py(y)).unwrap();
            }
            s
        };
        let mut s = String::new();
        writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
        )
        .unwrap();
        writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#).unwrap();
        writeln!(s, "<title>{}</title>", escape(title)).unwrap();
        // epigraph of the relaxation
        let mut region = path(&self.relaxed);
        write!(region, " L{:.2},{:.2} L{:.2},{:.2} Z", px(x1), py(hi), px(x0), py(hi)).unwrap();
        writeln!(s, r##"<path d="{region}" fill="#d9d9d9" fill-opacity="0.5" stroke="none"/>"##).unwrap();
        writeln!(
            s,
            r##"<rect x="{MARGIN}" y="{MARGIN}" width="{:.2}" height="{:.2}" fill="none" stroke="#000000"/>"##,
            WIDTH - 2.0 * MARGIN,
            HEIGHT - 2.0 * MARGIN
        )
        .unwrap();
        let curves = [
            (&self.original, "#000000", r#" stroke-dasharray="2,3""#, "g"),
            (&self.relaxed, "#555555", "", "relaxed g"),
            (&self.im, "#1f4fd1", "", "IM"),
            (&self.mcm, "#d11f1f", r#" stroke-dasharray="8,4""#, "MCM"),
        ];
        for (ys, color, dash, _) in &curves {
            writeln!(
                s,
                r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.6"{dash}/>"#,
                path(ys)
            )
            .unwrap();
        }
        for (i, (_, color, dash, label)) in curves.iter().enumerate() {
            let y = MARGIN + 14.0 + 16.0 * i as f64;
            let x = WIDTH - MARGIN - 110.0;
            writeln!(
                s,
                r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="1.6"{dash}/>"#,
                x + 24.0
            )
            .unwrap();
            writeln!(
                s,
                r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">{label}</text>"#,
                x + 30.0,
                y + 4.0
            )
            .unwrap();
        }
        let labels = [
            (MARGIN, HEIGHT - MARGIN + 16.0, "start", fmt_tick(x0)),
            (WIDTH - MARGIN, HEIGHT - MARGIN + 16.0, "end", fmt_tick(x1)),
            (MARGIN - 6.0, HEIGHT - MARGIN, "end", fmt_tick(lo)),
            (MARGIN - 6.0, MARGIN + 4.0, "end", fmt_tick(hi)),
        ];
        for (x, y, anchor, text) in labels {
            writeln!(
                s,
                r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}" font-family="sans-serif" font-size="11">{text}</text>"#
            )
            .unwrap();
        }
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="13">{}</text>"#,
            WIDTH / 2.0,
            MARGIN - 16.0,
            escape(title)
        )
        .unwrap();
        s.push_str("</svg>\n");
        s
    }
}

fn fmt_tick(v: f64) -> String {
    format!("{v:.3}")
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes the profile figure of `f` to `out`.
pub fn plot_profiles(
    f: &UnivariateFunction,
    d: &PiecewiseDecomposition,
    title: &str,
    out: &Path,
) -> Result<ProfileSeries, Box<dyn std::error::Error>> {
    let series = profile_data(f, d, Strengthening::Perspective)?;
    std::fs::write(out, series.svg(title))?;
    Ok(series)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::univariate::decompose;

    #[test]
    fn svg_is_deterministic() {
        let f = UnivariateFunction::sine(-1.0, 1.0, 0.0);
        let d = decompose(&f, 0.0, 2.0 * std::f64::consts::PI).unwrap();
        let a = profile_data(&f, &d, Strengthening::Perspective).unwrap();
        let b = profile_data(&f, &d, Strengthening::Perspective).unwrap();
        assert_eq!(a.svg("-sin"), b.svg("-sin"));
        let svg = a.svg("a < b");
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b"));
        assert_eq!(a.csv().lines().count(), PROFILE_POINTS + 1);
    }
}
