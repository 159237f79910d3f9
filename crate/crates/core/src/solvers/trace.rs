use serde::Serialize;
use std::io::Write;

/// Why a solve ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxIters,
    Tolerance,
}

/// One trace row. Iteration `k` describes `X^k`; iteration 0 is the start.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub iter: usize,
    /// First constraint index of the step that produced `X^k`.
    pub index: Option<usize>,
    /// `||A(X^k) - B||_F`.
    pub residual: Option<f64>,
    /// `||X^k - X^{k-1}|| / ||X^{k-1}||`.
    pub rel_change: Option<f64>,
    /// `||X^k - Y|| / ||Y||` against the reference `Y`.
    pub rel_err: Option<f64>,
    /// Bregman distance from `X^k` (with subgradient `Z^k`) to the reference.
    pub bregman: Option<f64>,
    /// Sum over the step's constraints of `||B(i) - A(i) X^{k-1}||^2`.
    pub step_residual_sq: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveTrace {
    pub records: Vec<TraceRecord>,
    pub stop: StopReason,
    pub iterations: usize,
    pub warnings: Vec<String>,
    /// `max_i ||E(i)|| / ||A(i)||` for perturbed right-hand sides.
    pub noise_level: Option<f64>,
    /// Wall-clock seconds; kept out of the CSV so reruns compare equal.
    pub wall_seconds: f64,
}

pub const CSV_HEADER: &str = "iter,index,residual,rel_change,rel_err,bregman";

fn opt<T: std::fmt::LowerExp>(v: Option<T>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl SolveTrace {
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{CSV_HEADER}")?;
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.iter,
                r.index.map(|i| i.to_string()).unwrap_or_default(),
                opt(r.residual),
                opt(r.rel_change),
                opt(r.rel_err),
                opt(r.bregman)
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii csv")
    }

    pub fn final_record(&self) -> &TraceRecord {
        self.records.last().expect("trace has the initial record")
    }

    /// Relative errors of all records that carry one.
    pub fn rel_errs(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.rel_err).collect()
    }

    pub fn bregmans(&self) -> Vec<f64> {
        self.records.iter().filter_map(|r| r.bregman).collect()
    }
}
