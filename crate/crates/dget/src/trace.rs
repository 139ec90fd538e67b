//! Per-run iteration records.

/// One recorded iteration.
///
/// The first twelve fields form the fixed CSV column set; the remaining
/// fields are in-memory extras used by checks that need quantities outside
/// the serialized schema (the mean-tracker norm for the potential-descent
/// inequality, and the raw gradient-evaluation count).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub r: usize,
    /// Objective at the average iterate, `f(x_bar)`.
    pub f_bar: f64,
    /// Stationarity measure `h = grad_term + consensus_term`.
    pub h: f64,
    /// `|| (1/m) sum_i grad f^i(x_i) ||^2`.
    pub grad_term: f64,
    /// `(1/m) sum_i || x_i - x_bar ||^2`.
    pub consensus_term: f64,
    /// `|| y_bar - (1/m) sum_i grad f^i(x_i) ||^2`.
    pub tracking_err: f64,
    /// `|| v - grad f(x) ||^2` over the whole stack.
    pub estimator_err: f64,
    /// `|| y - 1 y_bar ||^2`.
    pub y_consensus: f64,
    /// `f(x_bar) + (1/m)||x - 1 x_bar||^2 + (alpha/m)||y - 1 y_bar||^2`.
    pub potential_h: f64,
    /// Sample accesses since the start of the run.
    pub ifo_total: u64,
    pub comm_rounds: u64,
    /// Whether this iteration recomputed the estimator from scratch.
    pub refresh: bool,
    /// `|| y_bar ||^2` (not serialized).
    pub ybar_norm_sq: f64,
    /// Raw gradient evaluations since the start of the run (not serialized).
    pub grad_evals: u64,
}

pub const CSV_HEADER: &str = "r,f_bar,h,grad_term,consensus_term,tracking_err,estimator_err,\
                              y_consensus,potential_H,ifo_total,comm_rounds,refresh";

impl TraceRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{},{},{}",
            self.r,
            self.f_bar,
            self.h,
            self.grad_term,
            self.consensus_term,
            self.tracking_err,
            self.estimator_err,
            self.y_consensus,
            self.potential_h,
            self.ifo_total,
            self.comm_rounds,
            u8::from(self.refresh),
        )
    }
}

/// Full record of a run: one row per recorded iteration plus running
/// residual maxima that are tracked at every iteration regardless of
/// trace thinning.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub rows: Vec<TraceRow>,
    /// Node count of the run that produced this trace.
    pub m: usize,
    /// Iteration horizon `T` of the run that produced this trace.
    pub horizon: usize,
    /// Recording stride (1 = every iteration).
    pub diag_every: usize,
    /// `max_r ||y_bar - v_bar|| / (1 + ||v_bar||)` over all iterations.
    pub max_tracking_residual: f64,
    /// `max_r ||x_bar^r - (x_bar^{r-1} - alpha y_bar^{r-1})|| / (1 + ||x_bar^r||)`.
    pub max_xbar_residual: f64,
    /// Average iterate at the end of the run.
    pub final_x_bar: Vec<f64>,
    /// End-of-run oracle total, independent of row thinning.
    pub final_ifo_total: u64,
    /// End-of-run communication rounds, independent of row thinning.
    pub final_comm_rounds: u64,
}

impl RunTrace {
    /// Serializes the fixed column set.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.to_csv_line());
            out.push('\n');
        }
        out
    }

    /// Smallest stationarity value and the iteration where it occurred.
    pub fn best_h(&self) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for row in &self.rows {
            if row.h < best.0 {
                best = (row.h, row.r);
            }
        }
        best
    }

    /// First recorded row with `h <= epsilon` (equivalently, the first
    /// iteration where the running minimum of `h` crosses `epsilon`).
    pub fn first_hit(&self, epsilon: f64) -> Option<&TraceRow> {
        self.rows.iter().find(|row| row.h <= epsilon)
    }

    pub fn final_ifo(&self) -> u64 {
        self.final_ifo_total
    }

    pub fn final_comm_rounds(&self) -> u64 {
        self.final_comm_rounds
    }
}
