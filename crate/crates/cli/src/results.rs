//! The per-iteration CSV format shared by run files and `results.csv`.

use std::io::{Read, Write};

use gridbo::metrics::RunTrace;

/// Fixed leading and trailing columns; `x0..x{d-1}` sit between them.
pub const LEADING_COLUMNS: [&str; 6] = ["experiment", "function", "algorithm", "solver", "seed", "t"];
pub const TRAILING_COLUMNS: [&str; 8] =
    ["y", "r_t", "R_t", "eta_hat", "beta_t", "gamma_t", "solve_ms", "n_evals"];

#[derive(Debug, thiserror::Error)]
pub enum ResultsError {
    #[error("schema error: missing column '{0}'")]
    MissingColumn(String),
    #[error("row {row}: column '{column}': {message}")]
    BadValue {
        row: usize,
        column: String,
        message: String,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One (run, iteration) row.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub function: String,
    pub algorithm: String,
    pub solver: String,
    pub seed: u64,
    pub t: usize,
    pub x: Vec<f64>,
    pub y: f64,
    pub r_t: f64,
    pub cum_regret: f64,
    pub eta_hat: Option<f64>,
    pub beta: f64,
    pub gamma: f64,
    /// Solver wall time; includes acquisition construction for Thompson
    /// sampling, where building the sample is the search.
    pub solve_ms: f64,
    pub n_evals: usize,
}

impl ResultRow {
    /// Rows of one run trace.
    pub fn from_trace(experiment: &str, trace: &RunTrace) -> Vec<Self> {
        let ts = trace.algorithm != "ucb";
        trace
            .records
            .iter()
            .map(|r| {
                let solve = if ts { r.build_time + r.solve_time } else { r.solve_time };
                Self {
                    experiment: experiment.to_string(),
                    function: trace.function.clone(),
                    algorithm: trace.algorithm.clone(),
                    solver: trace.solver.clone(),
                    seed: trace.seed,
                    t: r.t,
                    x: r.x.clone(),
                    y: r.y,
                    r_t: r.regret,
                    cum_regret: r.cum_regret,
                    eta_hat: r.eta_hat,
                    beta: r.beta,
                    gamma: r.gamma,
                    solve_ms: solve.as_secs_f64() * 1e3,
                    n_evals: r.n_evals,
                }
            })
            .collect()
    }
}

/// Header for rows with up to `dim` coordinates.
pub fn header(dim: usize) -> Vec<String> {
    LEADING_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((0..dim).map(|j| format!("x{j}")))
        .chain(TRAILING_COLUMNS.iter().map(|s| s.to_string()))
        .collect()
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `rows` with a header sized for the widest row (at least
/// `min_dim`); narrower rows leave the extra coordinates empty.
pub fn write_rows<W: Write>(out: W, rows: &[ResultRow], min_dim: usize) -> Result<(), ResultsError> {
    let dim = rows.iter().map(|r| r.x.len()).max().unwrap_or(0).max(min_dim);
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(dim))?;
    let mut rec: Vec<String> = Vec::with_capacity(dim + 14);
    for r in rows {
        rec.clear();
        rec.extend([
            r.experiment.clone(),
            r.function.clone(),
            r.algorithm.clone(),
            r.solver.clone(),
            r.seed.to_string(),
            r.t.to_string(),
        ]);
        rec.extend(r.x.iter().map(|v| float(*v)));
        rec.extend((r.x.len()..dim).map(|_| String::new()));
        rec.extend([
            float(r.y),
            float(r.r_t),
            float(r.cum_regret),
            r.eta_hat.map(float).unwrap_or_default(),
            float(r.beta),
            float(r.gamma),
            float(r.solve_ms),
            r.n_evals.to_string(),
        ]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rows written by [`write_rows`].
pub fn read_rows<R: Read>(input: R) -> Result<Vec<ResultRow>, ResultsError> {
    let mut rd = csv::Reader::from_reader(input);
    let head = rd.headers()?.clone();
    let col = |name: &str| {
        head.iter()
            .position(|h| h == name)
            .ok_or_else(|| ResultsError::MissingColumn(name.to_string()))
    };
    let lead: Vec<usize> = LEADING_COLUMNS.iter().map(|c| col(c)).collect::<Result<_, _>>()?;
    let trail: Vec<usize> = TRAILING_COLUMNS.iter().map(|c| col(c)).collect::<Result<_, _>>()?;
    let mut xs = Vec::new();
    while let Ok(i) = col(&format!("x{}", xs.len())) {
        xs.push(i);
    }
    let mut rows = Vec::new();
    for (n, rec) in rd.records().enumerate() {
        let rec = rec?;
        let row = n + 1;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let bad = |i: usize, message: String| ResultsError::BadValue {
            row,
            column: head.get(i).unwrap_or("?").to_string(),
            message,
        };
        let num = |i: usize| -> Result<f64, ResultsError> {
            field(i).parse().map_err(|_| bad(i, format!("not a number: '{}'", field(i))))
        };
        let int = |i: usize| -> Result<u64, ResultsError> {
            field(i).parse().map_err(|_| bad(i, format!("not an integer: '{}'", field(i))))
        };
        let mut x = Vec::new();
        for &i in &xs {
            if field(i).is_empty() {
                break;
            }
            x.push(num(i)?);
        }
        rows.push(ResultRow {
            experiment: field(lead[0]).to_string(),
            function: field(lead[1]).to_string(),
            algorithm: field(lead[2]).to_string(),
            solver: field(lead[3]).to_string(),
            seed: int(lead[4])?,
            t: int(lead[5])? as usize,
            x,
            y: num(trail[0])?,
            r_t: num(trail[1])?,
            cum_regret: num(trail[2])?,
            eta_hat: if field(trail[3]).is_empty() {
                None
            } else {
                Some(num(trail[3])?)
            },
            beta: num(trail[4])?,
            gamma: num(trail[5])?,
            solve_ms: num(trail[6])?,
            n_evals: int(trail[7])? as usize,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![
            any::<f64>().prop_filter("finite", |v| v.is_finite()),
            Just(0.0),
            Just(-0.0),
            Just(f64::MIN_POSITIVE),
            Just(5e-324),
        ]
    }

    fn row() -> impl Strategy<Value = ResultRow> {
        (
            "[a-z0-9-]{1,12}",
            0u64..1000,
            1usize..500,
            prop::collection::vec(finite(), 1..7),
            prop::collection::vec(finite(), 6),
            prop::option::of(finite()),
            0usize..100_000,
        )
            .prop_map(|(id, seed, t, x, v, eta, n)| ResultRow {
                experiment: id.clone(),
                function: "branin".into(),
                algorithm: "ucb".into(),
                solver: "uniform-grid".into(),
                seed,
                t,
                x,
                y: v[0],
                r_t: v[1],
                cum_regret: v[2],
                eta_hat: eta,
                beta: v[3],
                gamma: v[4],
                solve_ms: v[5],
                n_evals: n,
            })
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_field_exact(rows in prop::collection::vec(row(), 0..20)) {
            let mut buf = Vec::new();
            write_rows(&mut buf, &rows, 0).unwrap();
            let back = read_rows(buf.as_slice()).unwrap();
            prop_assert_eq!(back.len(), rows.len());
            for (a, b) in rows.iter().zip(&back) {
                // compare bit patterns so that -0.0 and 0.0 differ
                let bits = |v: &[f64]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
                prop_assert_eq!(bits(&a.x), bits(&b.x));
                prop_assert_eq!(a.y.to_bits(), b.y.to_bits());
                prop_assert_eq!(a.eta_hat.map(f64::to_bits), b.eta_hat.map(f64::to_bits));
                prop_assert_eq!(a, b);
            }
        }
    }

    #[test]
    fn empty_file_has_header_only() {
        let mut buf = Vec::new();
        write_rows(&mut buf, &[], 0).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "experiment,function,algorithm,solver,seed,t,y,r_t,R_t,eta_hat,beta_t,gamma_t,solve_ms,n_evals\n"
        );
    }

    #[test]
    fn missing_column_is_named() {
        let text = "experiment,function,algorithm,solver,seed,t,y,r_t,eta_hat,beta_t,gamma_t,solve_ms,n_evals\n";
        let e = read_rows(text.as_bytes()).unwrap_err();
        assert_eq!(e.to_string(), "schema error: missing column 'R_t'");
    }

    #[test]
    fn bad_value_reports_row_and_column() {
        let text = "experiment,function,algorithm,solver,seed,t,x0,y,r_t,R_t,eta_hat,beta_t,gamma_t,solve_ms,n_evals\n\
                    a,branin,ucb,uniform-grid,0,1,0.5,1,0,0,,1,0,oops,10\n";
        let e = read_rows(text.as_bytes()).unwrap_err().to_string();
        assert!(e.contains("row 1") && e.contains("solve_ms"), "{e}");
    }
}
