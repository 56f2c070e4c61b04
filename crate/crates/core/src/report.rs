//! Pipelines behind the CLI subcommands and their artifacts.
//!
//! Every artifact is a pure function of the configuration: spectra are
//! sorted by `(Re, Im)`, reals are printed with 17 significant digits and
//! JSON reports contain no wall-clock data.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Criterion, QuadratureConfig, RunConfig};
use crate::convergence::{summarize_orders, verify_theorem_conv, DiskFamily, MinimalOrder, Sampling};
use crate::eigen::{Spectrum, SpectrumLabel, Window};
use crate::feedback::{BasisChoice, ControllerDesign};
use crate::observer::{duality_defect, ObserverDesign};
use crate::plant::{modal_input_coefficient, PlantParameters};
use crate::simulation::{decay_rate, simulate, simulate_observer, Grid, SimulationTrace};
use crate::state::StateFunction;
use crate::target::{check_assumption_a2, AssumptionReport, TargetDynamics};
use crate::{Error, Result, C64};

pub const SPECTRUM_HEADER: &str = "set,index,re,im";
pub const TRACE_HEADER: &str = "t,energy,u_re,u_im";
pub const SWEEP_HEADER: &str = "n,contained,one_per_disk,max_re,hausdorff,passed";

/// 17 significant digits; `-0` prints as `0`.
pub fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        return format!("{:.16e}", 0.0);
    }
    format!("{x:.16e}")
}

/// Which system a spectrum belongs to; used as the CSV `set` column.
pub fn side(label: SpectrumLabel) -> &'static str {
    match label {
        SpectrumLabel::ObserverIntermediate | SpectrumLabel::ObserverDesired | SpectrumLabel::ObserverClosedLoop => "observer",
        _ => "controller",
    }
}

pub fn spectrum_csv(s: &Spectrum) -> String {
    let mut out = String::from(SPECTRUM_HEADER);
    out.push('\n');
    for (i, z) in s.eigenvalues.iter().enumerate() {
        out.push_str(&format!("{},{},{},{}\n", side(s.label), i, fmt_real(z.re), fmt_real(z.im)));
    }
    out
}

pub fn trace_csv(tr: &SimulationTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for i in 0..tr.times.len() {
        out.push_str(&format!(
            "{},{},{},{}\n",
            fmt_real(tr.times[i]),
            fmt_real(tr.energy[i]),
            fmt_real(tr.control[i].re),
            fmt_real(tr.control[i].im)
        ));
    }
    out
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let c = &r.report;
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            c.n,
            c.contained,
            c.one_per_disk,
            fmt_real(c.max_re_closed_loop),
            fmt_real(c.hausdorff),
            r.passed
        ));
    }
    out
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

fn observer_design(cfg: &RunConfig) -> Result<ObserverDesign> {
    cfg.observer_design()?
        .ok_or_else(|| Error::Config("observer_target is required for observer outputs".into()))
}

/// Spectrum of the requested dynamics on the configured window.
pub fn compute_spectrum(cfg: &RunConfig, which: SpectrumLabel) -> Result<Spectrum> {
    let w = cfg.window_checked()?;
    let n = cfg.approximation.n;
    match which {
        SpectrumLabel::OpenLoop | SpectrumLabel::Intermediate | SpectrumLabel::Desired | SpectrumLabel::ClosedLoop => {
            let d = cfg.controller_design()?;
            match which {
                SpectrumLabel::OpenLoop => d.open_loop_spectrum(w),
                SpectrumLabel::Intermediate => d.intermediate_spectrum(w),
                SpectrumLabel::Desired => d.desired_spectrum(w),
                _ => {
                    let fb = d.approximation(cfg.approximation.basis, n)?;
                    d.closed_loop(&fb, w)
                }
            }
        }
        SpectrumLabel::ObserverIntermediate => observer_design(cfg)?.intermediate_spectrum(w),
        SpectrumLabel::ObserverDesired => observer_design(cfg)?.desired_spectrum(w),
        SpectrumLabel::ObserverClosedLoop => {
            let od = observer_design(cfg)?;
            let obs = od.approximation(n)?;
            od.closed_loop_matrix(&obs, w)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub window: Window,
    pub epsilon: f64,
    pub quadrature: QuadratureConfig,
    pub sampling: Sampling,
    pub re_max: f64,
}

impl Settings {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self {
            window: cfg.window,
            epsilon: cfg.epsilon,
            quadrature: cfg.quadrature,
            sampling: cfg.sampling,
            re_max: cfg.search.re_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSection {
    pub kappa: Vec<f64>,
    pub mu: f64,
    pub tau: f64,
}

impl TargetSection {
    fn of(t: &TargetDynamics) -> Self {
        Self { kappa: t.kappa().to_vec(), mu: t.mu(), tau: t.tau() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllerSection {
    pub target: TargetSection,
    pub rho: f64,
    pub c_plus: C64,
    pub c_minus: C64,
    pub basis: BasisChoice,
    pub n: usize,
    pub eigenvalues: Vec<C64>,
    pub gains: Vec<C64>,
    pub input_coefficients: Vec<C64>,
    pub assumptions: AssumptionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverSection {
    pub target: TargetSection,
    pub rho_o: f64,
    pub n: usize,
    pub eigenvalues: Vec<C64>,
    pub r: Vec<C64>,
    pub l: Vec<C64>,
    pub output_coefficients: Vec<C64>,
    pub flat_residual_max: f64,
    pub assumptions: AssumptionReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub kind: String,
    pub plant: PlantParameters,
    pub settings: Settings,
    pub controller: ControllerSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observer: Option<ObserverSection>,
    pub assumptions_ok: bool,
}

fn assumptions(d: &ControllerDesign, w: Window, sampling: &Sampling) -> Result<AssumptionReport> {
    let (desired, b) = d.desired_input_coefficients(w)?;
    check_assumption_a2(&d.target, &desired, &b, sampling)
}

pub fn design(cfg: &RunConfig) -> Result<DesignReport> {
    let w = cfg.window_checked()?;
    let d = cfg.controller_design()?;
    let fb = d.approximation(cfg.approximation.basis, cfg.approximation.n)?;
    let controller = ControllerSection {
        target: TargetSection::of(&d.target),
        rho: d.rho.re,
        c_plus: d.kernel.c_plus,
        c_minus: d.kernel.c_minus,
        basis: fb.basis,
        n: fb.n,
        eigenvalues: fb.pairs.iter().map(|p| p.lambda).collect(),
        input_coefficients: fb.pairs.iter().map(|p| modal_input_coefficient(p, &d.plant)).collect(),
        gains: fb.gains.clone(),
        assumptions: assumptions(&d, w, &cfg.sampling)?,
    };
    let observer = match cfg.observer_design()? {
        None => None,
        Some(od) => {
            let obs = od.approximation(cfg.approximation.n)?;
            Some(ObserverSection {
                target: TargetSection::of(od.target()),
                rho_o: obs.rho_o.re,
                n: obs.n,
                eigenvalues: obs.pairs.iter().map(|p| p.lambda).collect(),
                flat_residual_max: od.flat_matching_residuals(&obs).into_iter().fold(0.0, f64::max),
                r: obs.r,
                l: obs.l,
                output_coefficients: obs.c,
                assumptions: assumptions(&od.controller_twin, w, &cfg.sampling)?,
            })
        }
    };
    let assumptions_ok = controller.assumptions.all_ok() && observer.as_ref().is_none_or(|o| o.assumptions.all_ok());
    Ok(DesignReport {
        kind: "design".into(),
        plant: cfg.plant,
        settings: Settings::from_config(cfg),
        controller,
        observer,
        assumptions_ok,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(flatten)]
    pub report: crate::convergence::ConvergenceReport,
    /// Verdict under the configured criterion.
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergeReport {
    pub kind: String,
    pub side: String,
    pub basis: BasisChoice,
    pub criterion: Criterion,
    pub settings: Settings,
    pub disks: usize,
    pub rows: Vec<SweepRow>,
    pub minimal_order: MinimalOrder,
    pub criterion_met: bool,
}

fn judge(criterion: Criterion, r: &crate::convergence::ConvergenceReport) -> bool {
    match criterion {
        Criterion::Theorem => r.passed(),
        Criterion::Margin(m) => r.max_re_closed_loop <= m,
    }
}

fn sweep<F>(cfg: &RunConfig, side: &str, basis: BasisChoice, desired: &Spectrum, closed: F) -> Result<ConvergeReport>
where
    F: Fn(usize) -> Result<Spectrum> + Sync,
{
    let w = cfg.window_checked()?;
    let disks = DiskFamily::new(desired, cfg.epsilon)?;
    let c = cfg.convergence;
    let rows = (c.n_min..=c.n_max)
        .into_par_iter()
        .map(|n| {
            let report = verify_theorem_conv(n, &closed(n)?, &disks, &w);
            Ok(SweepRow { passed: judge(c.criterion, &report), report })
        })
        .collect::<Result<Vec<_>>>()?;
    let minimal_order = summarize_orders(rows.iter().map(|r| (r.report.n, r.passed)).collect());
    Ok(ConvergeReport {
        kind: "converge".into(),
        side: side.into(),
        basis,
        criterion: c.criterion,
        settings: Settings::from_config(cfg),
        disks: disks.len(),
        criterion_met: minimal_order.suffix.is_some(),
        rows,
        minimal_order,
    })
}

/// Theorem-1 (or margin) sweep for the controller over `convergence.n_min..=n_max`.
pub fn converge(cfg: &RunConfig) -> Result<ConvergeReport> {
    let w = cfg.window_checked()?;
    let d = cfg.controller_design()?;
    let desired = d.desired_spectrum(cfg.disk_window()?)?;
    let basis = cfg.approximation.basis;
    sweep(cfg, "controller", basis, &desired, |n| d.closed_loop(&d.approximation(basis, n)?, w))
}

pub fn converge_observer(cfg: &RunConfig) -> Result<ConvergeReport> {
    let w = cfg.window_checked()?;
    let od = observer_design(cfg)?;
    let desired = od.desired_spectrum(cfg.disk_window()?)?;
    sweep(cfg, "observer", BasisChoice::Intermediate, &desired, |n| od.closed_loop_matrix(&od.approximation(n)?, w))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub kind: String,
    pub side: String,
    pub basis: BasisChoice,
    pub n: usize,
    pub cells: usize,
    #[serde(rename = "T")]
    pub t_end: f64,
    pub t_start: f64,
    pub steps: usize,
    pub initial_energy: f64,
    pub final_energy: f64,
    /// `None` when the energy is identically zero or the fit window is empty.
    pub fitted_rate: Option<f64>,
    pub spectral_rate: Option<f64>,
    pub relative_gap: Option<f64>,
}

fn summarize(side: &str, cfg: &RunConfig, basis: BasisChoice, n: usize, tr: &SimulationTrace, spectral: Option<f64>) -> SimulateSummary {
    let fitted = decay_rate(tr, cfg.simulation.t_start).ok();
    let gap = match (fitted, spectral) {
        (Some(f), Some(s)) if s != 0.0 => Some((f - s).abs() / s.abs()),
        _ => None,
    };
    SimulateSummary {
        kind: "simulate".into(),
        side: side.into(),
        basis,
        n,
        cells: cfg.simulation.cells,
        t_end: cfg.simulation.t_end,
        t_start: cfg.simulation.t_start,
        steps: tr.times.len() - 1,
        initial_energy: tr.energy[0],
        final_energy: *tr.energy.last().unwrap(),
        fitted_rate: fitted,
        spectral_rate: spectral,
        relative_gap: gap,
    }
}

/// Closed-loop simulation with the configured approximation.
pub fn run_simulation(cfg: &RunConfig) -> Result<(SimulationTrace, SimulateSummary)> {
    let w = cfg.window_checked()?;
    let d = cfg.controller_design()?;
    let (basis, n) = (cfg.approximation.basis, cfg.approximation.n);
    let fb = d.approximation(basis, n)?;
    let spectral = d.closed_loop(&fb, w)?.max_re();
    let grid = Grid::new(cfg.plant, cfg.simulation.cells)?;
    let tr = simulate(&grid, &fb, &cfg.simulation.x0.state(), cfg.simulation.t_end)?;
    let summary = summarize("controller", cfg, basis, n, &tr, spectral);
    Ok((tr, summary))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserveReport {
    pub kind: String,
    pub n: usize,
    pub flat_residual_max: f64,
    /// Distance to the conjugated controller closed loop, reported when
    /// both targets coincide.
    pub duality_defect: Option<f64>,
    pub converge: ConvergeReport,
    pub simulate: SimulateSummary,
}

/// Observer sweep plus an error simulation (plant from `x0`, observer from 0).
pub fn observe(cfg: &RunConfig) -> Result<(ObserveReport, SimulationTrace)> {
    let w = cfg.window_checked()?;
    let od = observer_design(cfg)?;
    let n = cfg.approximation.n;
    let obs = od.approximation(n)?;
    let closed = od.closed_loop_matrix(&obs, w)?;
    let duality = if cfg.observer_target.as_ref() == Some(&cfg.controller_target) {
        let d = cfg.controller_design()?;
        Some(duality_defect(&closed, &od.dual_controller_spectrum(&d, &obs, w)?))
    } else {
        None
    };
    let grid = Grid::new(cfg.plant, cfg.simulation.cells)?;
    let tr = simulate_observer(&grid, &obs, &cfg.simulation.x0.state(), &StateFunction::zero(), cfg.simulation.t_end)?;
    let report = ObserveReport {
        kind: "observe".into(),
        n,
        flat_residual_max: od.flat_matching_residuals(&obs).into_iter().fold(0.0, f64::max),
        duality_defect: duality,
        converge: converge_observer(cfg)?,
        simulate: summarize("observer", cfg, BasisChoice::Intermediate, n, &tr, closed.max_re()),
    };
    Ok((report, tr))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> RunConfig {
        let mut c = RunConfig::reference();
        c.window = Window { re_min: -40.0, im_max: 120.0 };
        c.convergence.n_min = 2;
        c.convergence.n_max = 4;
        c.approximation.n = 3;
        c.simulation.cells = 100;
        c.simulation.t_end = 1.0;
        c
    }

    #[test]
    fn real_formatting() {
        assert_eq!(fmt_real(-0.0), fmt_real(0.0));
        assert_eq!(fmt_real(-12.0), "-1.2000000000000000e1");
        assert_eq!(fmt_real(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn desired_csv_contains_target_rows() {
        let csv = spectrum_csv(&compute_spectrum(&cfg(), SpectrumLabel::Desired).unwrap());
        assert!(csv.starts_with("set,index,re,im\n"));
        let rows: Vec<(f64, f64)> = csv
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                assert_eq!(f[0], "controller");
                (f[2].parse().unwrap(), f[3].parse().unwrap())
            })
            .collect();
        assert!(rows.iter().any(|(re, im)| (re + 12.0).abs() < 1e-10 && *im == 0.0));
        assert!(rows.iter().filter(|(re, _)| (re + 10.0).abs() < 1e-10).count() >= 4);
    }

    #[test]
    fn empty_window_gives_header_only() {
        let mut c = cfg();
        c.window = Window { re_min: -1.0, im_max: 100.0 };
        assert_eq!(spectrum_csv(&compute_spectrum(&c, SpectrumLabel::Desired).unwrap()), "set,index,re,im\n");
    }

    #[test]
    fn closed_loop_at_zero_order_equals_intermediate() {
        let mut c = cfg();
        c.approximation.n = 0;
        for basis in [BasisChoice::Intermediate, BasisChoice::OpenLoop] {
            c.approximation.basis = basis;
            let a = spectrum_csv(&compute_spectrum(&c, SpectrumLabel::ClosedLoop).unwrap());
            let b = spectrum_csv(&compute_spectrum(&c, SpectrumLabel::Intermediate).unwrap());
            assert_eq!(a, b);
        }
    }

    #[test]
    fn observer_outputs_need_target() {
        let mut c = cfg();
        c.observer_target = None;
        assert!(matches!(compute_spectrum(&c, SpectrumLabel::ObserverDesired), Err(Error::Config(_))));
        assert!(design(&c).unwrap().observer.is_none());
    }

    #[test]
    fn design_report_values() {
        let r = design(&cfg()).unwrap();
        assert!((r.controller.rho + 0.7972382171).abs() < 1e-9);
        assert_eq!(r.controller.gains.len(), 3);
        assert!(r.observer.as_ref().unwrap().flat_residual_max < 1e-9);
        assert!(to_json(&r).contains("\"a2_bound_M\""));
    }

    #[test]
    fn converge_sweep_rows() {
        let r = converge(&cfg()).unwrap();
        assert_eq!(r.rows.iter().map(|r| r.report.n).collect::<Vec<_>>(), vec![2, 3, 4]);
        assert!(r.rows[1].passed && r.rows[2].passed);
        assert_eq!(sweep_csv(&r.rows).lines().count(), 4);
    }

    #[test]
    fn simulation_summary_and_zero_state() {
        let (tr, s) = run_simulation(&cfg()).unwrap();
        assert_eq!(tr.times.len(), s.steps + 1);
        assert!(s.relative_gap.unwrap() < 0.1);
        let mut c = cfg();
        c.simulation.x0 = crate::config::InitialState::Zero;
        let (tr, s) = run_simulation(&c).unwrap();
        assert!(tr.energy.iter().all(|e| *e == 0.0) && s.fitted_rate.is_none());
    }

    #[test]
    fn deterministic_output() {
        let a = to_json(&design(&cfg()).unwrap());
        let b = to_json(&design(&cfg()).unwrap());
        assert_eq!(a, b);
    }
}
