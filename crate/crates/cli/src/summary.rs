//! Summary tables and SVG plots for a results directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use gridbo::metrics::{sublinearity_diagnostic, SublinearityReport};
use serde::Serialize;

use crate::results::{read_rows, ResultRow};

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    quantile(&v, 0.5)
}

/// Statistics of one experiment across its replicates.
#[derive(Debug, Clone, Serialize)]
pub struct GroupSummary {
    pub experiment: String,
    pub function: String,
    pub algorithm: String,
    pub solver: String,
    pub runs: usize,
    pub horizon: usize,
    /// Median, lower and upper quartile of `R_t` at `t = 1..=horizon`.
    pub median: Vec<f64>,
    pub q1: Vec<f64>,
    pub q3: Vec<f64>,
    pub final_median: f64,
    pub final_iqr: f64,
    /// Median over runs of `min_t r_t`.
    pub simple_regret_median: f64,
    /// Median over runs of the summed solve time.
    pub solve_ms_median: f64,
    /// Diagnostic of the median curve; `None` for horizons below 10.
    pub sublinearity: Option<SublinearityReport>,
    /// Runs whose own curve is flagged sublinear.
    pub runs_sublinear: usize,
    /// Median over runs of `Σ (1 − η̂_t)` when accuracy was measured.
    pub m_hat_median: Option<f64>,
}

impl GroupSummary {
    /// `experiment (solver)` style legend label.
    pub fn label(&self) -> String {
        if self.algorithm == "ucb" {
            self.solver.clone()
        } else {
            format!("{} {}", self.algorithm, self.solver)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub groups: Vec<GroupSummary>,
}

impl Summary {
    pub fn group(&self, experiment: &str) -> Option<&GroupSummary> {
        self.groups.iter().find(|g| g.experiment == experiment)
    }

    /// Functions in order of first appearance.
    pub fn functions(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for g in &self.groups {
            if !out.contains(&g.function.as_str()) {
                out.push(&g.function);
            }
        }
        out
    }

    pub fn for_function<'a>(&'a self, function: &'a str) -> impl Iterator<Item = &'a GroupSummary> + 'a {
        self.groups.iter().filter(move |g| g.function == function)
    }
}

/// Groups rows by experiment (in order of first appearance) and seed.
pub fn summarize_rows(rows: &[ResultRow]) -> Result<Summary> {
    let mut order: Vec<&str> = Vec::new();
    let mut runs: BTreeMap<&str, BTreeMap<u64, Vec<&ResultRow>>> = BTreeMap::new();
    for r in rows {
        if !runs.contains_key(r.experiment.as_str()) {
            order.push(&r.experiment);
        }
        runs.entry(&r.experiment).or_default().entry(r.seed).or_default().push(r);
    }
    let mut groups = Vec::new();
    for exp in order {
        let by_seed = &runs[exp];
        let first = by_seed.values().next().expect("nonempty group")[0];
        let mut curves = Vec::new();
        let mut simple = Vec::new();
        let mut solve = Vec::new();
        let mut m_hat = Vec::new();
        let mut runs_sublinear = 0;
        for (seed, run) in by_seed {
            let mut run = run.clone();
            run.sort_by_key(|r| r.t);
            for (i, r) in run.iter().enumerate() {
                if r.t != i + 1 {
                    bail!("experiment '{exp}' seed {seed}: iterations are not 1..T");
                }
            }
            let curve: Vec<f64> = run.iter().map(|r| r.cum_regret).collect();
            if curve.len() >= 10 && sublinearity_diagnostic(&curve)?.sublinear {
                runs_sublinear += 1;
            }
            simple.push(run.iter().map(|r| r.r_t).fold(f64::INFINITY, f64::min));
            solve.push(run.iter().map(|r| r.solve_ms).sum::<f64>());
            if run.iter().all(|r| r.eta_hat.is_some()) {
                m_hat.push(run.iter().map(|r| 1.0 - r.eta_hat.unwrap_or(1.0)).sum::<f64>());
            }
            curves.push(curve);
        }
        let horizon = curves.iter().map(Vec::len).min().unwrap_or(0);
        if curves.iter().any(|c| c.len() != horizon) {
            bail!("experiment '{exp}': runs have different horizons");
        }
        let (mut med, mut q1, mut q3) = (Vec::new(), Vec::new(), Vec::new());
        for t in 0..horizon {
            let mut v: Vec<f64> = curves.iter().map(|c| c[t]).collect();
            v.sort_by(f64::total_cmp);
            med.push(quantile(&v, 0.5));
            q1.push(quantile(&v, 0.25));
            q3.push(quantile(&v, 0.75));
        }
        let sublinearity = if horizon >= 10 {
            Some(sublinearity_diagnostic(&med)?)
        } else {
            None
        };
        groups.push(GroupSummary {
            experiment: exp.to_string(),
            function: first.function.clone(),
            algorithm: first.algorithm.clone(),
            solver: first.solver.clone(),
            runs: curves.len(),
            horizon,
            final_median: med.last().copied().unwrap_or(0.0),
            final_iqr: match (q3.last(), q1.last()) {
                (Some(a), Some(b)) => a - b,
                _ => 0.0,
            },
            median: med,
            q1,
            q3,
            simple_regret_median: median(&simple),
            solve_ms_median: median(&solve),
            sublinearity,
            runs_sublinear,
            m_hat_median: (m_hat.len() == curves.len()).then(|| median(&m_hat)),
        });
    }
    Ok(Summary { groups })
}

fn g(v: f64) -> String {
    format!("{v:.6e}")
}

/// CSV table with one line per experiment.
pub fn summary_table(s: &Summary) -> String {
    let mut out = String::from(
        "experiment,function,algorithm,solver,runs,T,median_R_T,iqr_R_T,median_simple_regret,\
         median_solve_ms,median_curve_slope,median_curve_sublinear,runs_sublinear,median_m_hat\n",
    );
    for gs in &s.groups {
        let (slope, flag) = gs
            .sublinearity
            .as_ref()
            .map_or((String::new(), String::new()), |r| (g(r.slope), r.sublinear.to_string()));
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            gs.experiment,
            gs.function,
            gs.algorithm,
            gs.solver,
            gs.runs,
            gs.horizon,
            g(gs.final_median),
            g(gs.final_iqr),
            g(gs.simple_regret_median),
            g(gs.solve_ms_median),
            slope,
            flag,
            gs.runs_sublinear,
            gs.m_hat_median.map(g).unwrap_or_default(),
        );
    }
    out
}

/// Markdown version of [`summary_table`], grouped by function.
pub fn summary_markdown(s: &Summary) -> String {
    let mut out = String::from("# Results summary\n");
    for f in s.functions() {
        let _ = write!(
            out,
            "\n## {f}\n\n| solver | runs | median R_T | IQR | simple regret | solve ms | sublinear |\n\
             |---|---:|---:|---:|---:|---:|---|\n"
        );
        for gs in s.for_function(f) {
            let _ = writeln!(
                out,
                "| {} | {} | {:.4} | {:.4} | {:.3e} | {:.1} | {} |",
                gs.label(),
                gs.runs,
                gs.final_median,
                gs.final_iqr,
                gs.simple_regret_median,
                gs.solve_ms_median,
                gs.sublinearity.as_ref().map_or("n/a".to_string(), |r| r.sublinear.to_string()),
            );
        }
    }
    out
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];
const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 60.0;

/// Maps data coordinates to pixels: `px = x0 + sx·x`, `py = y0 − sy·y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, serde::Deserialize)]
pub struct Affine {
    pub x0: f64,
    pub sx: f64,
    pub y0: f64,
    pub sy: f64,
}

impl Affine {
    fn fit(x_max: f64, y_max: f64) -> Self {
        let x_max = if x_max > 0.0 { x_max } else { 1.0 };
        let y_max = if y_max > 0.0 { y_max } else { 1.0 };
        Self {
            x0: MARGIN,
            sx: (WIDTH - 2.0 * MARGIN) / x_max,
            y0: HEIGHT - MARGIN,
            sy: (HEIGHT - 2.0 * MARGIN) / y_max,
        }
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (self.x0 + self.sx * x, self.y0 - self.sy * y)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn svg_open(out: &mut String, title: &str, transform: &Affine) {
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">"
    );
    let _ = writeln!(
        out,
        "<!-- transform {} -->",
        serde_json::to_string(transform).expect("serializable")
    );
    let _ = writeln!(out, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>",
        WIDTH / 2.0,
        escape(title)
    );
    let (x_end, y_top) = (WIDTH - MARGIN, MARGIN);
    let _ = writeln!(
        out,
        "<path d=\"M{m} {y_top} L{m} {b} L{x_end} {b}\" stroke=\"black\" fill=\"none\"/>",
        m = MARGIN,
        b = HEIGHT - MARGIN
    );
}

fn axis_labels(out: &mut String, x_label: &str, y_label: &str, x_max: f64, y_max: f64) {
    let b = HEIGHT - MARGIN;
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        HEIGHT - 20.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">{}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(y_label)
    );
    let _ = writeln!(out, "<text x=\"{MARGIN}\" y=\"{}\" text-anchor=\"middle\">0</text>", b + 16.0);
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
        WIDTH - MARGIN,
        b + 16.0,
        x_max
    );
    let _ = writeln!(
        out,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{:.3}</text>",
        MARGIN - 4.0,
        MARGIN + 4.0,
        y_max
    );
}

fn legend(out: &mut String, labels: &[String]) {
    for (i, l) in labels.iter().enumerate() {
        let y = MARGIN + 16.0 * i as f64;
        let x = MARGIN + 12.0;
        let _ = writeln!(
            out,
            "<rect x=\"{x}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>\
             <text x=\"{}\" y=\"{}\">{}</text>",
            y - 9.0,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            y,
            escape(l)
        );
    }
}

/// Median cumulative regret with interquartile bands for every experiment
/// on `function`.
pub fn regret_svg(s: &Summary, function: &str) -> String {
    let groups: Vec<&GroupSummary> = s.for_function(function).collect();
    let x_max = groups.iter().map(|g| g.horizon).max().unwrap_or(1) as f64;
    let y_max = groups
        .iter()
        .flat_map(|g| g.q3.iter().chain(&g.median))
        .copied()
        .fold(0.0, f64::max);
    let tr = Affine::fit(x_max, y_max);
    let mut out = String::new();
    svg_open(&mut out, &format!("{function}: cumulative regret"), &tr);
    for (i, gs) in groups.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let data = serde_json::json!({
            "series": gs.label(),
            "experiment": gs.experiment,
            "median": gs.median,
            "q1": gs.q1,
            "q3": gs.q3,
        });
        let _ = writeln!(out, "<!-- data {data} -->");
        let mut band = String::new();
        for (t, v) in gs.q3.iter().enumerate() {
            let (x, y) = tr.apply((t + 1) as f64, *v);
            let _ = write!(band, "{x:.4},{y:.4} ");
        }
        for (t, v) in gs.q1.iter().enumerate().rev() {
            let (x, y) = tr.apply((t + 1) as f64, *v);
            let _ = write!(band, "{x:.4},{y:.4} ");
        }
        let _ = writeln!(
            out,
            "<polygon points=\"{}\" fill=\"{colour}\" fill-opacity=\"0.15\" stroke=\"none\"/>",
            band.trim_end()
        );
        let mut line = String::new();
        for (t, v) in gs.median.iter().enumerate() {
            let (x, y) = tr.apply((t + 1) as f64, *v);
            let _ = write!(line, "{x:.4},{y:.4} ");
        }
        let _ = writeln!(
            out,
            "<polyline data-series=\"{}\" points=\"{}\" fill=\"none\" stroke=\"{colour}\" stroke-width=\"1.5\"/>",
            escape(&gs.experiment),
            line.trim_end()
        );
    }
    axis_labels(&mut out, "iteration t", "median R_t", x_max, y_max);
    legend(&mut out, &groups.iter().map(|g| g.label()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

/// Median total solve time per experiment on `function`.
pub fn time_svg(s: &Summary, function: &str) -> String {
    let groups: Vec<&GroupSummary> = s.for_function(function).collect();
    let n = groups.len().max(1) as f64;
    let y_max = groups.iter().map(|g| g.solve_ms_median).fold(0.0, f64::max);
    let tr = Affine::fit(n, y_max);
    let mut out = String::new();
    svg_open(&mut out, &format!("{function}: total solve time"), &tr);
    for (i, gs) in groups.iter().enumerate() {
        let data = serde_json::json!({
            "series": gs.label(),
            "experiment": gs.experiment,
            "solve_ms_median": gs.solve_ms_median,
        });
        let _ = writeln!(out, "<!-- data {data} -->");
        let (x_left, y_top) = tr.apply(i as f64 + 0.15, gs.solve_ms_median);
        let (x_right, y_base) = tr.apply(i as f64 + 0.85, 0.0);
        let _ = writeln!(
            out,
            "<rect data-series=\"{}\" x=\"{x_left:.4}\" y=\"{y_top:.4}\" width=\"{:.4}\" height=\"{:.4}\" fill=\"{}\"/>",
            escape(&gs.experiment),
            x_right - x_left,
            y_base - y_top,
            PALETTE[i % PALETTE.len()]
        );
    }
    axis_labels(&mut out, "solver", "median total solve time (ms)", n, y_max);
    legend(&mut out, &groups.iter().map(|g| g.label()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    out
}

fn file_stem(function: &str) -> String {
    function
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

/// Reads `dir/results.csv` and writes `summary.csv`, `summary.md`,
/// `summary.json` and `plots/*.svg` next to it.
pub fn summarize(dir: &Path) -> Result<Summary> {
    let path = dir.join("results.csv");
    let file = fs::File::open(&path).with_context(|| format!("opening {}", path.display()))?;
    let rows = read_rows(file).with_context(|| format!("reading {}", path.display()))?;
    let summary = summarize_rows(&rows)?;
    fs::write(dir.join("summary.csv"), summary_table(&summary))?;
    fs::write(dir.join("summary.md"), summary_markdown(&summary))?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&summary)?)?;
    let plots = dir.join("plots");
    fs::create_dir_all(&plots)?;
    for f in summary.functions() {
        let stem = file_stem(f);
        fs::write(plots.join(format!("regret-{stem}.svg")), regret_svg(&summary, f))?;
        fs::write(plots.join(format!("time-{stem}.svg")), time_svg(&summary, f))?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(experiment: &str, solver: &str, seed: u64, curve: impl Fn(f64) -> f64, t_max: usize, ms: f64) -> Vec<ResultRow> {
        (1..=t_max)
            .map(|t| {
                let c = curve(t as f64);
                let prev = if t == 1 { 0.0 } else { curve((t - 1) as f64) };
                ResultRow {
                    experiment: experiment.into(),
                    function: "branin".into(),
                    algorithm: "ucb".into(),
                    solver: solver.into(),
                    seed,
                    t,
                    x: vec![0.0, 0.0],
                    y: 0.0,
                    r_t: c - prev,
                    cum_regret: c,
                    eta_hat: None,
                    beta: 1.0,
                    gamma: 0.0,
                    solve_ms: ms,
                    n_evals: 1,
                }
            })
            .collect()
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 1.0), 4.0);
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
    }

    #[test]
    fn single_run_median_is_the_trace() {
        let r = rows("a", "uniform-grid", 0, |t| t.sqrt(), 30, 1.0);
        let s = summarize_rows(&r).unwrap();
        let gs = &s.groups[0];
        let trace: Vec<f64> = r.iter().map(|r| r.cum_regret).collect();
        assert_eq!(gs.median, trace);
        assert_eq!(gs.q1, trace);
        assert_eq!(gs.final_iqr, 0.0);
    }

    #[test]
    fn linear_and_sqrt_curves_are_ordered() {
        let mut all = Vec::new();
        for seed in 0..3 {
            all.extend(rows("lin", "simplex-multistart", seed, |t| t, 50, 10.0));
            all.extend(rows("sqrt", "uniform-grid", seed, |t| t.sqrt(), 50, 2.0));
        }
        let s = summarize_rows(&all).unwrap();
        let lin = s.group("lin").unwrap();
        let sq = s.group("sqrt").unwrap();
        assert!(!lin.sublinearity.as_ref().unwrap().sublinear);
        assert!(sq.sublinearity.as_ref().unwrap().sublinear);
        assert_eq!((lin.runs_sublinear, sq.runs_sublinear), (0, 3));
        assert!(sq.final_median < lin.final_median);
        assert_eq!(lin.solve_ms_median, 500.0);
        assert_eq!(sq.solve_ms_median, 100.0);
        let svg = time_svg(&s, "branin");
        let heights: Vec<f64> = svg
            .lines()
            .filter(|l| l.starts_with("<rect data-series"))
            .map(|l| attr(l, "height"))
            .collect();
        assert_eq!(heights.len(), 2);
        assert!(heights[0] > heights[1]);
    }

    fn attr(line: &str, name: &str) -> f64 {
        let key = format!(" {name}=\"");
        let start = line.find(&key).unwrap() + key.len();
        let end = start + line[start..].find('"').unwrap();
        line[start..end].parse().unwrap()
    }

    #[test]
    fn plotted_points_are_affine_images_of_the_table() {
        let mut all = Vec::new();
        for seed in 0..4 {
            all.extend(rows("a", "uniform-grid", seed, move |t| t.sqrt() * (1.0 + seed as f64), 20, 1.0));
            all.extend(rows("b", "fixed-grid", seed, move |t| t.ln_1p() + seed as f64, 20, 1.0));
        }
        let s = summarize_rows(&all).unwrap();
        let svg = regret_svg(&s, "branin");
        let tr_line = svg.lines().find(|l| l.starts_with("<!-- transform")).unwrap();
        let tr: Affine = serde_json::from_str(
            tr_line.trim_start_matches("<!-- transform ").trim_end_matches(" -->"),
        )
        .unwrap();
        let data: Vec<serde_json::Value> = svg
            .lines()
            .filter(|l| l.starts_with("<!-- data "))
            .map(|l| serde_json::from_str(l.trim_start_matches("<!-- data ").trim_end_matches(" -->")).unwrap())
            .collect();
        let lines: Vec<&str> = svg.lines().filter(|l| l.starts_with("<polyline")).collect();
        assert_eq!(data.len(), 2);
        for ((d, line), gs) in data.iter().zip(&lines).zip(&s.groups) {
            let embedded: Vec<f64> = serde_json::from_value(d["median"].clone()).unwrap();
            assert_eq!(embedded, gs.median);
            let start = line.find("points=\"").unwrap() + 8;
            let pts = &line[start..start + line[start..].find('"').unwrap()];
            for (t, p) in pts.split(' ').enumerate() {
                let (x, y) = p.split_once(',').unwrap();
                let (ex, ey) = tr.apply((t + 1) as f64, gs.median[t]);
                assert!((x.parse::<f64>().unwrap() - ex).abs() < 1e-3);
                assert!((y.parse::<f64>().unwrap() - ey).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn gaps_in_iterations_are_rejected() {
        let mut r = rows("a", "uniform-grid", 0, |t| t, 12, 1.0);
        r.remove(3);
        assert!(summarize_rows(&r).is_err());
    }
}
