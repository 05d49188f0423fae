//! Batch experiments: fault enumeration, line classification, gain sweeps and
//! critical-gain tables.
//!
//! Independent runs execute on the rayon pool. Every result list is sorted by
//! (fault, gain) before it is returned, so output never depends on scheduling.

use std::cmp::Ordering;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{simulate_cascade, ControlConfig, ControlMode, Outcome, SimConfig};
use crate::error::{GridError, Result};
use crate::flow::static_cascade;
use crate::grid::LineKey;
use crate::ingest::GridCase;
use crate::spectral::{critical_gain, CriticalGain};

/// Which faults a batch covers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultSelection {
    All,
    /// Endpoints as external node labels.
    Lines(Vec<(u32, u32)>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GainSelection {
    List(Vec<f64>),
    Range { min: f64, max: f64, step: f64 },
    /// [`default_gain_grid`] around the fault's critical gain.
    Default,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub case: String,
    pub faults: FaultSelection,
    pub gains: GainSelection,
    pub mode: ControlMode,
    /// External labels of the pinned nodes; ignored unless `mode` is pinning.
    pub pinned: Vec<u32>,
    pub report: Option<PathBuf>,
    pub trace: Option<PathBuf>,
}

impl SweepSpec {
    pub fn fault_lines(&self, case: &GridCase) -> Result<Vec<LineKey>> {
        resolve_faults(case, &self.faults)
    }

    /// Gains for one fault. `Default` needs the case's critical gain.
    pub fn gain_values(&self, case: &GridCase, fault: LineKey) -> Result<Vec<f64>> {
        match &self.gains {
            GainSelection::List(g) => {
                check_gains(g)?;
                Ok(g.clone())
            }
            GainSelection::Range { min, max, step } => gain_range(*min, *max, *step),
            GainSelection::Default => {
                let params = case.linear_params()?;
                let post = case.topology.remove_line(fault)?;
                Ok(default_gain_grid(critical_gain(&post, params)?.value))
            }
        }
    }

    pub fn pinned_indices(&self, case: &GridCase) -> Result<Vec<usize>> {
        self.pinned.iter().map(|&l| case.index_of(l)).collect()
    }
}

pub fn resolve_faults(case: &GridCase, faults: &FaultSelection) -> Result<Vec<LineKey>> {
    match faults {
        FaultSelection::All => Ok(case.topology.lines().iter().map(|l| l.key).collect()),
        FaultSelection::Lines(pairs) => {
            let mut keys = pairs
                .iter()
                .map(|&(a, b)| case.line_key(a, b))
                .collect::<Result<Vec<_>>>()?;
            keys.sort();
            keys.dedup();
            Ok(keys)
        }
    }
}

fn check_gains(gains: &[f64]) -> Result<()> {
    match gains.iter().find(|g| !(**g >= 0.0 && g.is_finite())) {
        Some(g) => Err(GridError::InvalidParameter(format!(
            "gain {g} must be finite and nonnegative"
        ))),
        None => Ok(()),
    }
}

/// `min, min + step, …` up to `max` inclusive (within a relative 1e-9).
pub fn gain_range(min: f64, max: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(max >= min) {
        return Err(GridError::InvalidParameter(format!(
            "gain range {min}:{max}:{step} needs step > 0 and max >= min"
        )));
    }
    check_gains(&[min, max])?;
    let count = ((max - min) / step * (1.0 + 1e-9)).floor() as usize + 1;
    Ok((0..count).map(|i| min + i as f64 * step).collect())
}

/// Zero followed by 25 logarithmically spaced gains from `0.011·k̄_c` to
/// `1.1·k̄_c`.
pub fn default_gain_grid(critical: f64) -> Vec<f64> {
    const POINTS: usize = 25;
    let (lo, hi) = ((0.011 * critical).ln(), (1.1 * critical).ln());
    let mut grid = vec![0.0];
    grid.extend((0..POINTS).map(|i| (lo + (hi - lo) * i as f64 / (POINTS - 1) as f64).exp()));
    grid
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineLabel {
    Safe,
    StaticFailure,
    DynamicOnly,
}

impl LineLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            LineLabel::Safe => "safe",
            LineLabel::StaticFailure => "static-failure",
            LineLabel::DynamicOnly => "dynamic-only",
        }
    }

    /// Static failures take precedence; a line is dynamic-only when the
    /// equilibrium cascade is empty but the transient one is not.
    pub fn from_counts(static_n_c: usize, dynamic_n_c: usize) -> Self {
        match (static_n_c, dynamic_n_c) {
            (0, 0) => LineLabel::Safe,
            (0, _) => LineLabel::DynamicOnly,
            _ => LineLabel::StaticFailure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineClassification {
    pub line: LineKey,
    pub static_n_c: Option<usize>,
    pub dynamic_n_c: Option<usize>,
    pub dynamic_outcome: Option<Outcome>,
    /// `None` when one of the two runs failed; see `error`.
    pub label: Option<LineLabel>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationTable {
    pub lines: Vec<LineClassification>,
}

impl ClassificationTable {
    pub fn with_label(&self, label: LineLabel) -> Vec<LineKey> {
        self.lines
            .iter()
            .filter(|c| c.label == Some(label))
            .map(|c| c.line)
            .collect()
    }

    pub fn count(&self, label: LineLabel) -> usize {
        self.lines.iter().filter(|c| c.label == Some(label)).count()
    }

    pub fn failures(&self) -> Vec<&LineClassification> {
        self.lines.iter().filter(|c| c.error.is_some()).collect()
    }
}

fn classify_line(case: &GridCase, sim: &SimConfig, line: LineKey) -> LineClassification {
    let stat = static_cascade(&case.topology, &case.params, line, sim.threshold);
    let dyn_ = simulate_cascade(
        &case.topology,
        &case.params,
        line,
        sim,
        &ControlConfig::off(case.node_count()),
    );
    let mut errors = Vec::new();
    if let Err(e) = &stat {
        errors.push(format!("static: {e}"));
    }
    if let Err(e) = &dyn_ {
        errors.push(format!("dynamic: {e}"));
    }
    let static_n_c = stat.ok().map(|r| r.n_c);
    let (dynamic_n_c, dynamic_outcome) = match dyn_ {
        Ok(r) => (Some(r.n_c), Some(r.outcome)),
        Err(_) => (None, None),
    };
    LineClassification {
        line,
        static_n_c,
        dynamic_n_c,
        dynamic_outcome,
        label: static_n_c
            .zip(dynamic_n_c)
            .map(|(s, d)| LineLabel::from_counts(s, d)),
        error: (!errors.is_empty()).then(|| errors.join("; ")),
    }
}

/// Runs the static and the uncontrolled dynamic cascade for every line as the
/// initial fault. Per-line solver failures are recorded, not propagated.
pub fn classify_all_lines(case: &GridCase, sim: &SimConfig) -> ClassificationTable {
    let keys: Vec<LineKey> = case.topology.lines().iter().map(|l| l.key).collect();
    classify_lines(case, sim, &keys)
}

pub fn classify_lines(case: &GridCase, sim: &SimConfig, faults: &[LineKey]) -> ClassificationTable {
    let mut lines: Vec<LineClassification> = faults
        .par_iter()
        .map(|&k| classify_line(case, sim, k))
        .collect();
    lines.sort_by_key(|c| c.line);
    ClassificationTable { lines }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainPoint {
    pub gain: f64,
    pub n_c: usize,
    pub outcome: Outcome,
    pub settle_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainCurve {
    pub fault: LineKey,
    pub mode: ControlMode,
    /// Pinned node indices (all nodes under full control).
    pub pinned: Vec<usize>,
    /// Whether the grid stays connected after the initial fault. When it does
    /// not, control cannot resynchronize the pieces.
    pub post_fault_connected: bool,
    pub points: Vec<GainPoint>,
}

impl GainCurve {
    /// Smallest sampled gain from which every sampled `n_c` is zero.
    pub fn zero_onset(&self) -> Option<f64> {
        let last_nonzero = self.points.iter().rposition(|p| p.n_c > 0);
        let start = last_nonzero.map_or(0, |i| i + 1);
        self.points.get(start).map(|p| p.gain)
    }
}

fn control_for(case: &GridCase, mode: ControlMode, pinned: &[usize], gain: f64) -> Result<ControlConfig> {
    let n = case.node_count();
    match mode {
        ControlMode::Off => Ok(ControlConfig::off(n)),
        ControlMode::Full => ControlConfig::full(n, gain),
        ControlMode::Pinning => ControlConfig::pinning(n, gain, pinned.iter().copied()),
    }
}

fn sort_gains(gains: &[f64]) -> Vec<f64> {
    let mut g = gains.to_vec();
    g.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    g.dedup();
    g
}

/// One cascade simulation per gain, in ascending gain order.
pub fn gain_sweep(
    case: &GridCase,
    sim: &SimConfig,
    fault: LineKey,
    gains: &[f64],
    mode: ControlMode,
    pinned: &[usize],
) -> Result<GainCurve> {
    let mut curves = sweep_many(case, sim, &[(fault, sort_gains(gains))], mode, pinned)?;
    Ok(curves.remove(0))
}

fn sweep_many(
    case: &GridCase,
    sim: &SimConfig,
    plan: &[(LineKey, Vec<f64>)],
    mode: ControlMode,
    pinned: &[usize],
) -> Result<Vec<GainCurve>> {
    for (fault, gains) in plan {
        check_gains(gains)?;
        if !case.topology.contains(*fault) {
            return Err(GridError::LineNotFound(*fault));
        }
    }
    let pinned_nodes: Vec<usize> = match mode {
        ControlMode::Full => (0..case.node_count()).collect(),
        ControlMode::Pinning => {
            let mut p = pinned.to_vec();
            p.sort_unstable();
            p.dedup();
            p
        }
        ControlMode::Off => Vec::new(),
    };
    control_for(case, mode, &pinned_nodes, 0.0)?;

    let jobs: Vec<(usize, f64)> = plan
        .iter()
        .enumerate()
        .flat_map(|(i, (_, gains))| gains.iter().map(move |&g| (i, g)))
        .collect();
    let results: Vec<Result<(usize, GainPoint)>> = jobs
        .par_iter()
        .map(|&(i, gain)| {
            let control = control_for(case, mode, &pinned_nodes, gain)?;
            let r = simulate_cascade(&case.topology, &case.params, plan[i].0, sim, &control)?;
            Ok((
                i,
                GainPoint {
                    gain,
                    n_c: r.n_c,
                    outcome: r.outcome,
                    settle_time: r.settle_time,
                },
            ))
        })
        .collect();

    let mut curves: Vec<GainCurve> = plan
        .iter()
        .map(|(fault, _)| {
            Ok(GainCurve {
                fault: *fault,
                mode,
                pinned: pinned_nodes.clone(),
                post_fault_connected: case.topology.remove_line(*fault)?.is_connected(),
                points: Vec::new(),
            })
        })
        .collect::<Result<_>>()?;
    for r in results {
        let (i, point) = r?;
        curves[i].points.push(point);
    }
    for c in &mut curves {
        c.points
            .sort_by(|a, b| a.gain.partial_cmp(&b.gain).unwrap_or(Ordering::Equal));
    }
    curves.sort_by_key(|c| c.fault);
    Ok(curves)
}

/// Gain sweeps under pinning control for several faults at once.
pub fn pinning_experiment(
    case: &GridCase,
    sim: &SimConfig,
    pinned: &[usize],
    faults: &[LineKey],
    gains: &[f64],
) -> Result<Vec<GainCurve>> {
    let gains = sort_gains(gains);
    let plan: Vec<(LineKey, Vec<f64>)> = faults.iter().map(|&f| (f, gains.clone())).collect();
    sweep_many(case, sim, &plan, ControlMode::Pinning, pinned)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalGainRow {
    pub line: LineKey,
    pub critical: Option<CriticalGain>,
    pub error: Option<String>,
}

/// Critical gain of the post-fault graph for each fault, sorted by line.
///
/// Fails outright when the case does not have uniform coupling and damping
/// with unit inertia. A fault that disconnects the grid gets a row with an
/// error instead of a value.
pub fn critical_gain_table(case: &GridCase, faults: &[LineKey]) -> Result<Vec<CriticalGainRow>> {
    let params = case.linear_params()?;
    let mut rows = faults
        .par_iter()
        .map(|&line| {
            let post = case.topology.remove_line(line)?;
            Ok(match critical_gain(&post, params) {
                Ok(c) => CriticalGainRow {
                    line,
                    critical: Some(c),
                    error: None,
                },
                Err(e) => CriticalGainRow {
                    line,
                    critical: None,
                    error: Some(e.to_string()),
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| r.line);
    rows.dedup_by_key(|r| r.line);
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::builtin_five_node;

    #[test]
    fn label_rule() {
        assert_eq!(LineLabel::from_counts(0, 0), LineLabel::Safe);
        assert_eq!(LineLabel::from_counts(0, 3), LineLabel::DynamicOnly);
        assert_eq!(LineLabel::from_counts(1, 1), LineLabel::StaticFailure);
        assert_eq!(LineLabel::from_counts(2, 0), LineLabel::StaticFailure);
    }

    #[test]
    fn default_grid_shape() {
        let g = default_gain_grid(2.0);
        assert_eq!(g.len(), 26);
        assert_eq!(g[0], 0.0);
        assert!((g[1] - 0.022).abs() < 1e-12);
        assert!((g[25] - 2.2).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn range_is_inclusive() {
        assert_eq!(gain_range(0.0, 1.0, 0.25).unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(gain_range(0.0, 0.3, 0.1).unwrap().len(), 4);
        assert!(gain_range(1.0, 0.0, 0.1).is_err());
        assert!(gain_range(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn zero_onset() {
        let point = |gain, n_c| GainPoint {
            gain,
            n_c,
            outcome: Outcome::Settled,
            settle_time: None,
        };
        let mut curve = GainCurve {
            fault: LineKey::new(0, 1),
            mode: ControlMode::Full,
            pinned: vec![],
            post_fault_connected: true,
            points: vec![point(0.0, 5), point(0.1, 0), point(0.2, 2), point(0.3, 0), point(0.4, 0)],
        };
        assert_eq!(curve.zero_onset(), Some(0.3));
        curve.points.push(point(0.5, 1));
        assert_eq!(curve.zero_onset(), None);
    }

    #[test]
    fn fault_resolution_sorts_and_checks() {
        let case = builtin_five_node();
        let keys = resolve_faults(&case, &FaultSelection::Lines(vec![(4, 2), (1, 2)])).unwrap();
        assert_eq!(keys, vec![LineKey::new(0, 1), LineKey::new(1, 3)]);
        assert!(resolve_faults(&case, &FaultSelection::Lines(vec![(1, 4)])).is_err());
        assert_eq!(resolve_faults(&case, &FaultSelection::All).unwrap().len(), 7);
    }

    #[test]
    fn negative_gain_rejected() {
        let case = builtin_five_node();
        let r = gain_sweep(&case, &case.sim, LineKey::new(0, 1), &[-1.0], ControlMode::Full, &[]);
        assert!(matches!(r, Err(GridError::InvalidParameter(_))));
    }

    #[test]
    fn critical_table_refuses_nonuniform() {
        let mut case = builtin_five_node();
        case.params.inertia[0] = 2.0;
        assert!(matches!(
            critical_gain_table(&case, &[LineKey::new(0, 1)]),
            Err(GridError::NonUniform(_))
        ));
    }
}
