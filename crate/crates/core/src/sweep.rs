//! Parameter sweeps over one or two axes, evaluated in parallel and gathered
//! in grid order.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::edge::{self, Eta, Sector};
use crate::eigen::{self, eig2};
use crate::error::{Error, Result};
use crate::spectra::{self, momentum_grid};
use crate::table::{ColumnKind, ResultTable, Value};
use crate::topology::{self, gbz_contour, Contour};
use crate::walk::{build_bloch_block_in_frame, Boundary, Frame, WalkParams};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisName {
    Theta1,
    Theta2,
    Gamma,
}

impl AxisName {
    pub fn as_str(self) -> &'static str {
        match self {
            AxisName::Theta1 => "theta1",
            AxisName::Theta2 => "theta2",
            AxisName::Gamma => "gamma",
        }
    }

    fn apply(self, params: WalkParams, value: f64) -> WalkParams {
        match self {
            AxisName::Theta1 => WalkParams { theta1: value, ..params },
            AxisName::Theta2 => WalkParams { theta2: value, ..params },
            AxisName::Gamma => WalkParams { gamma: value, ..params },
        }
    }
}

impl std::str::FromStr for AxisName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "theta1" => Ok(AxisName::Theta1),
            "theta2" => Ok(AxisName::Theta2),
            "gamma" => Ok(AxisName::Gamma),
            other => Err(Error::InvalidParameter(format!("unknown sweep axis '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: AxisName,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Axis {
    pub fn new(name: AxisName, start: f64, stop: f64, count: usize) -> Result<Self> {
        let axis = Self { name, start, stop, count };
        axis.validate()?;
        Ok(axis)
    }

    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(Error::InvalidParameter(format!("axis {} needs at least 2 points", self.name.as_str())));
        }
        if !(self.start.is_finite() && self.stop.is_finite() && self.start < self.stop) {
            return Err(Error::InvalidParameter(format!(
                "axis {} needs finite start < stop, got [{}, {}]",
                self.name.as_str(),
                self.start,
                self.stop
            )));
        }
        Ok(())
    }

    /// Evenly spaced values including both end points.
    pub fn values(&self) -> Vec<f64> {
        let step = (self.stop - self.start) / (self.count - 1) as f64;
        (0..self.count).map(|i| if i + 1 == self.count { self.stop } else { self.start + step * i as f64 }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    SpectrumScan,
    PhaseDiagram,
    TransferMap,
    Gbz,
    EdgeModes,
    Verify,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::SpectrumScan => "spectrum-scan",
            Task::PhaseDiagram => "phase-diagram",
            Task::TransferMap => "transfer-map",
            Task::Gbz => "gbz",
            Task::EdgeModes => "edge-modes",
            Task::Verify => "verify",
        }
    }
}

/// Resolution settings shared by all tasks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaskOptions {
    pub n_k: usize,
    pub contour: Contour,
}

impl Default for TaskOptions {
    fn default() -> Self {
        Self { n_k: topology::DEFAULT_NK, contour: Contour::Bloch }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub axis1: Axis,
    pub axis2: Option<Axis>,
    pub fixed: WalkParams,
    pub task: Task,
    pub options: TaskOptions,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        self.axis1.validate()?;
        if let Some(a2) = &self.axis2 {
            a2.validate()?;
            if a2.name == self.axis1.name {
                return Err(Error::InvalidParameter("sweep axes must differ".into()));
            }
        }
        self.fixed.validate()?;
        if self.options.n_k < 8 {
            return Err(Error::InvalidParameter(format!("n_k must be at least 8, got {}", self.options.n_k)));
        }
        Ok(())
    }

    /// Parameter points in grid order, axis 1 outermost.
    pub fn points(&self) -> Vec<WalkParams> {
        let v1 = self.axis1.values();
        match &self.axis2 {
            None => v1.iter().map(|&x| self.axis1.name.apply(self.fixed, x)).collect(),
            Some(a2) => {
                let v2 = a2.values();
                v1.iter()
                    .flat_map(|&x| v2.iter().map(move |&y| (x, y)))
                    .map(|(x, y)| a2.name.apply(self.axis1.name.apply(self.fixed, x), y))
                    .collect()
            }
        }
    }
}

const PARAM_COLUMNS: [(&str, ColumnKind); 7] = [
    ("point", ColumnKind::Integer),
    ("theta1", ColumnKind::Real),
    ("theta2", ColumnKind::Real),
    ("gamma", ColumnKind::Real),
    ("n_sites", ColumnKind::Integer),
    ("boundary", ColumnKind::Text),
    ("status", ColumnKind::Text),
];

fn task_columns(task: Task) -> &'static [(&'static str, ColumnKind)] {
    use ColumnKind::*;
    match task {
        Task::SpectrumScan => &[("mode", Integer), ("band", Integer), ("momentum", Real), ("E", Complex)],
        Task::PhaseDiagram => &[("contour", Text), ("nu", Real), ("nu_prime", Real), ("nu0", Real), ("nupi", Real)],
        Task::TransferMap => &[
            ("s_zero", Integer),
            ("s_pi", Integer),
            ("region", Integer),
            ("inside_zero", Integer),
            ("inside_pi", Integer),
            ("loops_agree", Integer),
        ],
        Task::Gbz => &[("momentum", Real), ("beta", Complex), ("E_plus", Complex), ("E_minus", Complex)],
        Task::EdgeModes => &[("alpha", Text), ("eta", Integer), ("site", Integer), ("amplitude", Real), ("t_tilde", Real)],
        Task::Verify => &[
            ("alpha", Text),
            ("eta", Integer),
            ("fidelity", Real),
            ("eigen_residual", Real),
            ("sublattice_residual", Real),
            ("t_tilde", Real),
        ],
    }
}

/// Empty table with the columns of `task`.
pub fn task_table(task: Task) -> ResultTable {
    let cols: Vec<(&str, ColumnKind)> = PARAM_COLUMNS.iter().chain(task_columns(task)).copied().collect();
    ResultTable::with_columns(&cols)
}

fn param_cells(point: usize, p: &WalkParams, status: &str) -> Vec<Value> {
    vec![
        point.into(),
        p.theta1.into(),
        p.theta2.into(),
        p.gamma.into(),
        p.n_sites.into(),
        p.boundary.as_str().into(),
        status.into(),
    ]
}

fn flag(b: bool) -> Value {
    Value::Integer(b as i64)
}

fn eta_value(eta: Eta) -> Value {
    Value::Integer(eta.value() as i64)
}

fn task_rows(task: Task, p: &WalkParams, opts: &TaskOptions) -> Result<Vec<Vec<Value>>> {
    match task {
        Task::SpectrumScan => {
            let s = match p.boundary {
                Boundary::Fbc => spectra::spectrum_fbc(p)?,
                Boundary::Pbc => spectra::spectrum_pbc_bloch(p, opts.n_k)?,
            };
            Ok((0..s.len())
                .map(|j| {
                    vec![
                        j.into(),
                        s.bands.get(j).copied().into(),
                        s.momenta.get(j).copied().into(),
                        s.energies[j].into(),
                    ]
                })
                .collect())
        }
        Task::PhaseDiagram => {
            let inv = topology::invariants(p, opts.contour, opts.n_k)?;
            Ok(vec![vec![
                opts.contour.as_str().into(),
                inv.frame_windings.0.into(),
                inv.frame_windings.1.into(),
                inv.nu0.into(),
                inv.nupi.into(),
            ]])
        }
        Task::TransferMap => {
            let class = edge::transfer_classification(p)?;
            let head = vec![
                Value::Integer(class.s_zero as i64),
                Value::Integer(class.s_pi as i64),
                Value::Integer(class.region.number() as i64),
            ];
            let loops = spectra::loop_classification(p, opts.n_k)?;
            let agrees = loops.inside_zero == (class.s_zero > 0) && loops.inside_pi == (class.s_pi > 0);
            let mut row = head;
            row.extend([flag(loops.inside_zero), flag(loops.inside_pi), flag(agrees)]);
            Ok(vec![row])
        }
        Task::Gbz => {
            let betas = gbz_contour(p.gamma, opts.n_k);
            let mut rows = Vec::with_capacity(opts.n_k);
            for (k, beta) in momentum_grid(opts.n_k).into_iter().zip(betas) {
                let block = build_bloch_block_in_frame(p, Frame::Standard, k, p.gamma)?;
                let e = eig2(&block.entries);
                let mut energies = [
                    eigen::quasienergy_from_eigenvalue(e.values[0])?,
                    eigen::quasienergy_from_eigenvalue(e.values[1])?,
                ];
                if energies[0].re < energies[1].re {
                    energies.swap(0, 1);
                }
                rows.push(vec![k.into(), beta.into(), energies[0].into(), energies[1].into()]);
            }
            Ok(rows)
        }
        Task::EdgeModes => {
            let mut rows = Vec::new();
            for alpha in Sector::BOTH {
                for eta in Eta::BOTH {
                    let m = edge::analytic_edge_mode(p, alpha, eta)?;
                    for (n, a) in m.amplitudes().into_iter().enumerate() {
                        rows.push(vec![alpha.as_str().into(), eta_value(eta), (n + 1).into(), a.into(), m.t_tilde.into()]);
                    }
                }
            }
            Ok(rows)
        }
        Task::Verify => {
            let fbc = p.with_boundary(Boundary::Fbc);
            let s = spectra::spectrum_fbc(&fbc)?;
            let mut rows = Vec::new();
            for alpha in Sector::BOTH {
                for eta in Eta::BOTH {
                    let r = edge::verify_against_numeric(&fbc, alpha, eta, &s)?;
                    rows.push(vec![
                        alpha.as_str().into(),
                        eta_value(eta),
                        r.fidelity.into(),
                        r.eigen_residual.into(),
                        r.sublattice_residual.into(),
                        r.t_tilde.into(),
                    ]);
                }
            }
            Ok(rows)
        }
    }
}

/// Rows for one parameter point. Failures become a single row carrying the
/// error tag in the status column.
pub fn evaluate_point(task: Task, point: usize, p: &WalkParams, opts: &TaskOptions) -> Vec<Vec<Value>> {
    let n_task = task_columns(task).len();
    match task_rows(task, p, opts) {
        Ok(rows) => rows
            .into_iter()
            .map(|r| {
                let mut row = param_cells(point, p, "ok");
                row.extend(r);
                row
            })
            .collect(),
        Err(e) => {
            let mut row = param_cells(point, p, e.kind());
            row.extend(std::iter::repeat_n(Value::Missing, n_task));
            vec![row]
        }
    }
}

fn base_metadata(task: Task, opts: &TaskOptions) -> ResultTable {
    let mut t = task_table(task);
    t.metadata.insert("task".into(), json!(task.as_str()));
    t.metadata.insert("version".into(), json!(env!("CARGO_PKG_VERSION")));
    t.metadata.insert("n_k".into(), json!(opts.n_k));
    t.metadata.insert("contour".into(), json!(opts.contour.as_str()));
    t.metadata.insert(
        "tolerances".into(),
        json!({
            "edge_mode": spectra::EDGE_TOL,
            "min_gap": topology::MIN_GAP,
            "rounding_residual": topology::ROUNDING_RESIDUAL,
            "winding_residual": spectra::WINDING_RESIDUAL,
            "degenerate_branch": edge::DEGENERATE_TOL,
        }),
    );
    t
}

/// Table for a single parameter point. Unlike sweeps, a failing point is an error.
pub fn run_point(task: Task, p: &WalkParams, opts: &TaskOptions) -> Result<ResultTable> {
    p.validate()?;
    let mut t = base_metadata(task, opts);
    t.metadata.insert("params".into(), serde_json::to_value(p).expect("params serialize"));
    for r in task_rows(task, p, opts)? {
        let mut row = param_cells(0, p, "ok");
        row.extend(r);
        t.push_row(row)?;
    }
    Ok(t)
}

/// Evaluates the task on every grid point in parallel; rows are ordered by grid index.
pub fn run_sweep(spec: &SweepSpec) -> Result<ResultTable> {
    spec.validate()?;
    let mut t = base_metadata(spec.task, &spec.options);
    t.metadata.insert("params".into(), serde_json::to_value(spec.fixed).expect("params serialize"));
    t.metadata.insert("axis1".into(), serde_json::to_value(spec.axis1).expect("axis serialize"));
    if let Some(a2) = spec.axis2 {
        t.metadata.insert("axis2".into(), serde_json::to_value(a2).expect("axis serialize"));
    }
    let points = spec.points();
    let per_point: Vec<Vec<Vec<Value>>> = points
        .par_iter()
        .enumerate()
        .map(|(i, p)| evaluate_point(spec.task, i, p, &spec.options))
        .collect();
    for row in per_point.into_iter().flatten() {
        t.push_row(row)?;
    }
    Ok(t)
}

/// Smallest quasienergy distance of the periodic-boundary bands to E = 0 and
/// E = π as a function of θ₂.
#[derive(Debug, Clone, PartialEq)]
pub struct GapScan {
    pub theta2: Vec<f64>,
    pub gap_zero: Vec<f64>,
    pub gap_pi: Vec<f64>,
}

impl GapScan {
    /// θ₂ values where the gap at `sector` has a local minimum below `threshold`.
    pub fn touchings(&self, sector: Sector, threshold: f64) -> Vec<f64> {
        let g = match sector {
            Sector::Zero => &self.gap_zero,
            Sector::Pi => &self.gap_pi,
        };
        let n = g.len();
        (0..n)
            .filter(|&i| {
                let left = if i > 0 { g[i - 1] } else { f64::INFINITY };
                let right = if i + 1 < n { g[i + 1] } else { f64::INFINITY };
                g[i] < threshold && g[i] <= left && g[i] < right
            })
            .map(|i| self.theta2[i])
            .collect()
    }
}

pub fn gap_scan(base: &WalkParams, theta2: &[f64], n_k: usize) -> Result<GapScan> {
    base.validate()?;
    let ks = momentum_grid(n_k);
    let gaps: Vec<(f64, f64)> = theta2
        .par_iter()
        .map(|&t2| {
            let p = WalkParams { theta2: t2, ..*base };
            let mut g0 = f64::INFINITY;
            let mut gpi = f64::INFINITY;
            for &k in &ks {
                let block = build_bloch_block_in_frame(&p, Frame::Standard, k, 0.0)?;
                for lam in eig2(&block.entries).values {
                    let e = eigen::quasienergy_from_eigenvalue(lam)?;
                    g0 = g0.min(eigen::quasienergy_distance(e, C64::new(0.0, 0.0)));
                    gpi = gpi.min(eigen::quasienergy_distance(e, C64::new(PI, 0.0)));
                }
            }
            Ok((g0, gpi))
        })
        .collect::<Result<_>>()?;
    Ok(GapScan {
        theta2: theta2.to_vec(),
        gap_zero: gaps.iter().map(|g| g.0).collect(),
        gap_pi: gaps.iter().map(|g| g.1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(boundary: Boundary) -> WalkParams {
        WalkParams::new(0.2 * PI, -0.15 * PI, 0.0, 20, boundary).unwrap()
    }

    #[test]
    fn axis_values_include_end_points() {
        let a = Axis::new(AxisName::Theta2, -PI, PI, 5).unwrap();
        let v = a.values();
        assert_eq!(v.len(), 5);
        assert_eq!(v[0], -PI);
        assert_eq!(v[4], PI);
        assert!(Axis::new(AxisName::Theta2, 1.0, 0.0, 5).is_err());
        assert!(Axis::new(AxisName::Theta2, 0.0, 1.0, 1).is_err());
    }

    #[test]
    fn grid_order_is_axis1_major() {
        let spec = SweepSpec {
            axis1: Axis::new(AxisName::Theta1, 0.1, 0.2, 2).unwrap(),
            axis2: Some(Axis::new(AxisName::Theta2, 0.3, 0.5, 3).unwrap()),
            fixed: base(Boundary::Pbc),
            task: Task::TransferMap,
            options: TaskOptions { n_k: 64, contour: Contour::Bloch },
        };
        let pts = spec.points();
        assert_eq!(pts.len(), 6);
        assert_eq!((pts[1].theta1, pts[1].theta2), (0.1, 0.4));
        assert_eq!((pts[3].theta1, pts[3].theta2), (0.2, 0.3));
    }

    #[test]
    fn failures_become_status_rows() {
        // θ₂ = −θ₁ closes the gap at E = 0
        let p = WalkParams { theta2: -0.2 * PI, ..base(Boundary::Pbc) };
        let rows = evaluate_point(Task::PhaseDiagram, 7, &p, &TaskOptions { n_k: 64, contour: Contour::Bloch });
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0][6], Value::Text("gapless".into()));
        assert!(rows[0][7..].iter().all(|v| *v == Value::Missing));
    }

    #[test]
    fn spectrum_rows_carry_params() {
        let t = run_point(Task::SpectrumScan, &base(Boundary::Fbc), &TaskOptions::default()).unwrap();
        assert_eq!(t.len(), 40);
        assert!(t.rows.iter().all(|r| r[6] == Value::Text("ok".into()) && r[5] == Value::Text("fbc".into())));
    }

    #[test]
    fn sweep_is_thread_count_independent() {
        let spec = SweepSpec {
            axis1: Axis::new(AxisName::Theta2, -PI, PI, 9).unwrap(),
            axis2: None,
            fixed: base(Boundary::Pbc),
            task: Task::PhaseDiagram,
            options: TaskOptions { n_k: 64, contour: Contour::Bloch },
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| run_sweep(&spec)).unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap().install(|| run_sweep(&spec)).unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn gap_scan_finds_unitary_closings() {
        let p = WalkParams::new(0.2 * PI, 0.0, 0.0, 60, Boundary::Pbc).unwrap();
        let grid: Vec<f64> = (0..=200).map(|i| (-1.0 + i as f64 * 0.01) * PI).collect();
        let scan = gap_scan(&p, &grid, 128).unwrap();
        let z: Vec<f64> = scan.touchings(Sector::Zero, 1e-2).iter().map(|x| x / PI).collect();
        let pi: Vec<f64> = scan.touchings(Sector::Pi, 1e-2).iter().map(|x| x / PI).collect();
        assert_eq!(z.len(), 2, "{z:?}");
        assert_eq!(pi.len(), 2, "{pi:?}");
        assert!((z[0] + 0.8).abs() < 1e-9 && (z[1] + 0.2).abs() < 1e-9);
        assert!((pi[0] - 0.2).abs() < 1e-9 && (pi[1] - 0.8).abs() < 1e-9);
    }
}
