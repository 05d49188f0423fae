//! Controlled swing equations with in-flight line tripping.
//!
//! Each node obeys
//!
//! ```text
//! dθ_i/dt = ω_i
//! I_i dω_i/dt = P_i − γ_i ω_i + Σ_j K_ij sin(θ_j − θ_i) + u_i
//! u_i = k_c ξ_i Σ_j a_ij (ω_j − ω_i)
//! ```
//!
//! over the lines still in operation. The control layer uses the same lines
//! as the physical one with unit weights, so a tripped line also stops
//! carrying control signal. Integration is fixed-step RK4; the overload test
//! runs on the state at the end of every step and trips all violating lines
//! together.

use serde::{Deserialize, Serialize};

use crate::error::{GridError, Result};
use crate::flow::{
    component_imbalance, line_flows, overloaded_lines, solve_equilibrium, OverloadThreshold,
    PhaseVector,
};
use crate::grid::{component_labels, GridTopology, LineKey, MachineParams, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControlMode {
    Off,
    Full,
    Pinning,
}

impl std::str::FromStr for ControlMode {
    type Err = GridError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "off" | "none" => Ok(ControlMode::Off),
            "full" => Ok(ControlMode::Full),
            "pin" | "pinning" => Ok(ControlMode::Pinning),
            other => Err(GridError::InvalidParameter(format!(
                "unknown control mode '{other}'"
            ))),
        }
    }
}

/// Gain `k_c` and the pinned-node indicator `ξ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlConfig {
    gain: f64,
    pinned: Vec<bool>,
    mode: ControlMode,
}

impl ControlConfig {
    pub fn off(node_count: usize) -> Self {
        ControlConfig {
            gain: 0.0,
            pinned: vec![false; node_count],
            mode: ControlMode::Off,
        }
    }

    pub fn full(node_count: usize, gain: f64) -> Result<Self> {
        check_gain(gain)?;
        Ok(ControlConfig {
            gain,
            pinned: vec![true; node_count],
            mode: ControlMode::Full,
        })
    }

    pub fn pinning(
        node_count: usize,
        gain: f64,
        pinned: impl IntoIterator<Item = usize>,
    ) -> Result<Self> {
        check_gain(gain)?;
        let mut mask = vec![false; node_count];
        for p in pinned {
            if p >= node_count {
                return Err(GridError::InvalidParameter(format!(
                    "pinned node index {p} out of range"
                )));
            }
            mask[p] = true;
        }
        Ok(ControlConfig {
            gain,
            pinned: mask,
            mode: ControlMode::Pinning,
        })
    }

    pub fn mode(&self) -> ControlMode {
        self.mode
    }

    /// `k_c`, or zero when the control is off.
    pub fn gain(&self) -> f64 {
        match self.mode {
            ControlMode::Off => 0.0,
            _ => self.gain,
        }
    }

    pub fn is_pinned(&self, node: usize) -> bool {
        self.mode != ControlMode::Off && self.pinned[node]
    }

    pub fn pinned_nodes(&self) -> Vec<NodeId> {
        (0..self.pinned.len())
            .filter(|&i| self.is_pinned(i))
            .map(NodeId)
            .collect()
    }

    pub fn node_count(&self) -> usize {
        self.pinned.len()
    }
}

fn check_gain(gain: f64) -> Result<()> {
    if gain >= 0.0 && gain.is_finite() {
        Ok(())
    } else {
        Err(GridError::InvalidParameter(format!(
            "control gain {gain} must be nonnegative"
        )))
    }
}

/// Integrator and termination settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub step: f64,
    pub horizon: f64,
    pub settle_velocity_tol: f64,
    pub settle_window: f64,
    pub threshold: OverloadThreshold,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            step: 1e-3,
            horizon: 200.0,
            settle_velocity_tol: 1e-6,
            settle_window: 1.0,
            threshold: OverloadThreshold::new(0.6).expect("valid"),
        }
    }
}

impl SimConfig {
    pub fn with_threshold(threshold: OverloadThreshold) -> Self {
        SimConfig {
            threshold,
            ..SimConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(GridError::InvalidParameter(format!("{name} must be positive")))
            }
        };
        positive("step", self.step)?;
        positive("horizon", self.horizon)?;
        positive("settle_velocity_tol", self.settle_velocity_tol)?;
        positive("settle_window", self.settle_window)
    }
}

/// Angles, velocities and time, together with the lines still operating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicState {
    pub time: f64,
    pub angles: PhaseVector,
    pub velocities: Vec<f64>,
    pub operating: GridTopology,
}

impl DynamicState {
    pub fn at_rest(angles: PhaseVector, operating: GridTopology) -> Self {
        let n = angles.len();
        DynamicState {
            time: 0.0,
            angles,
            velocities: vec![0.0; n],
            operating,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.time.is_finite()
            && self.angles.iter().all(|x| x.is_finite())
            && self.velocities.iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Settled,
    HorizonExhausted,
    IslandedUnbalanced,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Settled => "settled",
            Outcome::HorizonExhausted => "horizon-exhausted",
            Outcome::IslandedUnbalanced => "islanded-unbalanced",
        }
    }
}

/// When a line tripped: a physical time for dynamic runs, an iteration index
/// for the static procedure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TripMark {
    Time(f64),
    Iteration(usize),
}

impl TripMark {
    pub fn value(self) -> f64 {
        match self {
            TripMark::Time(t) => t,
            TripMark::Iteration(i) => i as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripEvent {
    pub line: LineKey,
    pub mark: TripMark,
    /// Failed because its island could not balance, not because of overload.
    pub islanded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FinalState {
    Dynamic(DynamicState),
    Equilibrium(PhaseVector),
}

impl FinalState {
    pub fn angles(&self) -> &PhaseVector {
        match self {
            FinalState::Dynamic(s) => &s.angles,
            FinalState::Equilibrium(p) => p,
        }
    }
}

/// Result of one cascade run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeReport {
    pub initial_fault: LineKey,
    pub tripped: Vec<TripEvent>,
    /// Lines lost after the initial fault (the fault itself is not counted).
    pub n_c: usize,
    pub outcome: Outcome,
    /// Start of the final quiet window, for dynamic runs that synchronized.
    pub settle_time: Option<f64>,
    pub final_state: FinalState,
}

impl CascadeReport {
    pub fn new(
        initial_fault: LineKey,
        tripped: Vec<TripEvent>,
        outcome: Outcome,
        settle_time: Option<f64>,
        final_state: FinalState,
    ) -> Self {
        CascadeReport {
            initial_fault,
            n_c: tripped.len(),
            tripped,
            outcome,
            settle_time,
            final_state,
        }
    }

    pub fn tripped_lines(&self) -> Vec<LineKey> {
        self.tripped.iter().map(|t| t.line).collect()
    }
}

/// Control input `u_i = k_c ξ_i Σ_j a_ij (ω_j − ω_i)` on the given lines.
pub fn control_input(
    velocities: &[f64],
    operating: &GridTopology,
    config: &ControlConfig,
) -> Result<Vec<f64>> {
    let n = operating.node_count();
    check_len(velocities.len(), n)?;
    check_len(config.node_count(), n)?;
    let mut u = vec![0.0; n];
    if config.mode() == ControlMode::Off {
        return Ok(u);
    }
    for l in operating.lines() {
        let (a, b) = (l.key.lo(), l.key.hi());
        let d = velocities[b] - velocities[a];
        u[a] += d;
        u[b] -= d;
    }
    let kc = config.gain();
    for (i, ui) in u.iter_mut().enumerate() {
        *ui = if config.is_pinned(i) { kc * *ui } else { 0.0 };
    }
    Ok(u)
}

/// Time derivative of the state: `(dθ/dt, dω/dt)`.
pub fn swing_rhs(
    state: &DynamicState,
    params: &MachineParams,
    control: &ControlConfig,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = state.operating.node_count();
    check_len(state.angles.len(), n)?;
    check_len(state.velocities.len(), n)?;
    check_len(params.len(), n)?;
    check_len(control.node_count(), n)?;
    let sys = System::new(&state.operating, params, control);
    let mut x = state.angles.0.clone();
    x.extend_from_slice(&state.velocities);
    let mut dx = vec![0.0; 2 * n];
    sys.eval(&x, &mut dx);
    let dw = dx.split_off(n);
    Ok((dx, dw))
}

/// One classical RK4 step of size `step`.
pub fn integrate_step(
    state: &DynamicState,
    params: &MachineParams,
    control: &ControlConfig,
    step: f64,
) -> Result<DynamicState> {
    let n = state.operating.node_count();
    check_len(state.angles.len(), n)?;
    check_len(state.velocities.len(), n)?;
    check_len(params.len(), n)?;
    check_len(control.node_count(), n)?;
    let sys = System::new(&state.operating, params, control);
    let mut x = state.angles.0.clone();
    x.extend_from_slice(&state.velocities);
    let mut rk = Rk4::new(2 * n);
    rk.step(&sys, &mut x, step);
    let time = state.time + step;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(GridError::IntegrationDiverged { time });
    }
    let velocities = x.split_off(n);
    Ok(DynamicState {
        time,
        angles: PhaseVector(x),
        velocities,
        operating: state.operating.clone(),
    })
}

/// Flattened right-hand side over the currently operating lines.
struct System<'a> {
    n: usize,
    lines: Vec<(usize, usize, f64)>,
    params: &'a MachineParams,
    /// `k_c ξ_i` per node; empty when the control is off.
    control_gain: Vec<f64>,
}

impl<'a> System<'a> {
    fn new(operating: &GridTopology, params: &'a MachineParams, control: &ControlConfig) -> Self {
        let n = operating.node_count();
        let lines = operating
            .lines()
            .iter()
            .map(|l| (l.key.lo(), l.key.hi(), l.coupling))
            .collect();
        let control_gain = if control.mode() == ControlMode::Off {
            Vec::new()
        } else {
            (0..n)
                .map(|i| if control.is_pinned(i) { control.gain() } else { 0.0 })
                .collect()
        };
        System {
            n,
            lines,
            params,
            control_gain,
        }
    }

    fn eval(&self, x: &[f64], dx: &mut [f64]) {
        let n = self.n;
        let (theta, omega) = x.split_at(n);
        let (dtheta, domega) = dx.split_at_mut(n);
        dtheta.copy_from_slice(omega);
        for i in 0..n {
            domega[i] = self.params.power[i] - self.params.damping[i] * omega[i];
        }
        for &(a, b, k) in &self.lines {
            let f = k * (theta[b] - theta[a]).sin();
            domega[a] += f;
            domega[b] -= f;
        }
        if !self.control_gain.is_empty() {
            for &(a, b, _) in &self.lines {
                let d = omega[b] - omega[a];
                domega[a] += self.control_gain[a] * d;
                domega[b] -= self.control_gain[b] * d;
            }
        }
        for (d, m) in domega.iter_mut().zip(&self.params.inertia) {
            *d /= m;
        }
    }
}

struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        Rk4 {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    fn step(&mut self, sys: &System, x: &mut [f64], h: f64) {
        let half = 0.5 * h;
        let stage = |tmp: &mut [f64], x: &[f64], k: &[f64], c: f64| {
            for ((t, xi), ki) in tmp.iter_mut().zip(x).zip(k) {
                *t = xi + c * ki;
            }
        };
        sys.eval(x, &mut self.k1);
        stage(&mut self.tmp, x, &self.k1, half);
        sys.eval(&self.tmp, &mut self.k2);
        stage(&mut self.tmp, x, &self.k2, half);
        sys.eval(&self.tmp, &mut self.k3);
        stage(&mut self.tmp, x, &self.k3, h);
        sys.eval(&self.tmp, &mut self.k4);
        for (i, xi) in x.iter_mut().enumerate() {
            *xi += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Sampled trajectory. Flow columns follow the original line order; a tripped
/// line reports zero flow from its trip onwards.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub lines: Vec<LineKey>,
    pub time: Vec<f64>,
    pub angles: Vec<Vec<f64>>,
    pub velocities: Vec<Vec<f64>>,
    pub flows: Vec<Vec<f64>>,
}

impl Trajectory {
    fn record(&mut self, t: f64, x: &[f64], n: usize, operating: &GridTopology) {
        let (theta, omega) = x.split_at(n);
        self.time.push(t);
        self.angles.push(theta.to_vec());
        self.velocities.push(omega.to_vec());
        self.flows.push(
            self.lines
                .iter()
                .map(|&key| {
                    operating
                        .find(key)
                        .map_or(0.0, |l| l.coupling * (theta[key.hi()] - theta[key.lo()]).sin())
                })
                .collect(),
        );
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }
}

/// Per-component frequency the swing equations converge to once synchronized:
/// `Σ P / Σ γ` over the component (zero for balanced components).
struct Islands {
    target: Vec<f64>,
    any_unbalanced: bool,
}

impl Islands {
    fn of(operating: &GridTopology, params: &MachineParams) -> Self {
        let comps = operating.connected_components();
        let labels = component_labels(operating.node_count(), operating.lines().iter().map(|l| l.key));
        let mut freq = Vec::with_capacity(comps.len());
        let mut any_unbalanced = false;
        for c in &comps {
            let (imbalance, balanced) = component_imbalance(c, &params.power);
            if balanced {
                freq.push(0.0);
            } else {
                any_unbalanced = true;
                let damping: f64 = c.iter().map(|n| params.damping[n.0]).sum();
                freq.push(imbalance / damping);
            }
        }
        Islands {
            target: labels.iter().map(|&c| freq[c]).collect(),
            any_unbalanced,
        }
    }
}

/// Runs the dynamic cascade triggered by removing `initial_fault` from the
/// synchronized pre-fault state `(θ*, 0)` at `t = 0`.
///
/// The run stops when every node has stayed within `settle_velocity_tol` of
/// its island's synchronous frequency for `settle_window`, or at the horizon.
/// Islands whose powers do not balance keep being integrated (they drift at a
/// common nonzero frequency) and their lines stay subject to the overload
/// test; the outcome is then `IslandedUnbalanced`.
pub fn simulate_cascade(
    topology: &GridTopology,
    params: &MachineParams,
    initial_fault: LineKey,
    sim: &SimConfig,
    control: &ControlConfig,
) -> Result<CascadeReport> {
    run(topology, params, initial_fault, sim, control, None)
}

/// Like [`simulate_cascade`], also sampling the trajectory every `stride` steps.
pub fn simulate_cascade_traced(
    topology: &GridTopology,
    params: &MachineParams,
    initial_fault: LineKey,
    sim: &SimConfig,
    control: &ControlConfig,
    stride: usize,
) -> Result<(CascadeReport, Trajectory)> {
    let mut trace = Trajectory {
        lines: topology.lines().iter().map(|l| l.key).collect(),
        ..Trajectory::default()
    };
    let report = run(
        topology,
        params,
        initial_fault,
        sim,
        control,
        Some((&mut trace, stride.max(1))),
    )?;
    Ok((report, trace))
}

fn run(
    topology: &GridTopology,
    params: &MachineParams,
    initial_fault: LineKey,
    sim: &SimConfig,
    control: &ControlConfig,
    mut trace: Option<(&mut Trajectory, usize)>,
) -> Result<CascadeReport> {
    let n = topology.node_count();
    sim.validate()?;
    params.validate(n)?;
    check_len(control.node_count(), n)?;

    let base = solve_equilibrium(topology, params, &vec![0.0; n])?;
    let base_overloads = overloaded_lines(&line_flows(&base, topology)?, topology, sim.threshold);
    if !base_overloads.is_empty() {
        return Err(GridError::OverloadedBaseCase(base_overloads.len()));
    }

    let mut operating = topology.remove_line(initial_fault)?;
    let mut sys = System::new(&operating, params, control);
    let mut islands = Islands::of(&operating, params);
    let mut rk = Rk4::new(2 * n);
    let mut x = base.0.clone();
    x.extend(std::iter::repeat_n(0.0, n));

    let h = sim.step;
    let max_steps = (sim.horizon / h - 1e-9).ceil() as u64;
    let window_steps = (sim.settle_window / h - 1e-9).ceil() as u64;
    let mut tripped: Vec<TripEvent> = Vec::new();
    let mut calm_since: Option<u64> = None;
    let mut settled_at: Option<u64> = None;

    if let Some((tr, _)) = trace.as_mut() {
        tr.record(0.0, &x, n, &operating);
    }

    let mut step_index = 0u64;
    while step_index < max_steps {
        rk.step(&sys, &mut x, h);
        step_index += 1;
        let t = step_index as f64 * h;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GridError::IntegrationDiverged { time: t });
        }

        let over: Vec<LineKey> = operating
            .lines()
            .iter()
            .filter(|l| {
                let f = l.coupling * (x[l.key.hi()] - x[l.key.lo()]).sin();
                sim.threshold.is_overloaded(f, l.coupling)
            })
            .map(|l| l.key)
            .collect();
        if !over.is_empty() {
            for key in over {
                operating = operating.remove_line(key)?;
                tripped.push(TripEvent {
                    line: key,
                    mark: TripMark::Time(t),
                    islanded: false,
                });
            }
            sys = System::new(&operating, params, control);
            islands = Islands::of(&operating, params);
            calm_since = None;
        }

        if let Some((tr, stride)) = trace.as_mut() {
            if step_index.is_multiple_of(*stride as u64) {
                tr.record(t, &x, n, &operating);
            }
        }

        let calm = x[n..]
            .iter()
            .zip(&islands.target)
            .all(|(w, target)| (w - target).abs() < sim.settle_velocity_tol);
        if calm {
            let since = *calm_since.get_or_insert(step_index);
            if step_index - since >= window_steps {
                settled_at = Some(since);
                break;
            }
        } else {
            calm_since = None;
        }
    }

    let t_end = step_index as f64 * h;
    if let Some((tr, _)) = trace.as_mut() {
        if tr.time.last() != Some(&t_end) {
            tr.record(t_end, &x, n, &operating);
        }
    }

    let outcome = if islands.any_unbalanced {
        Outcome::IslandedUnbalanced
    } else if settled_at.is_some() {
        Outcome::Settled
    } else {
        Outcome::HorizonExhausted
    };
    let velocities = x.split_off(n);
    let final_state = DynamicState {
        time: t_end,
        angles: PhaseVector(x),
        velocities,
        operating,
    };
    Ok(CascadeReport::new(
        initial_fault,
        tripped,
        outcome,
        settled_at.map(|s| s as f64 * h),
        FinalState::Dynamic(final_state),
    ))
}

fn check_len(actual: usize, expected: usize) -> Result<()> {
    if actual == expected {
        Ok(())
    } else {
        Err(GridError::DimensionMismatch { expected, actual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Line;
    use approx::assert_abs_diff_eq;

    fn pair() -> GridTopology {
        GridTopology::new(2, [Line::new(0, 1, 1.0)], []).unwrap()
    }

    #[test]
    fn control_vanishes_on_synchronous_manifold() {
        let c = ControlConfig::full(2, 3.0).unwrap();
        assert_eq!(control_input(&[0.4, 0.4], &pair(), &c).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn two_node_control_by_hand() {
        let c = ControlConfig::full(2, 0.5).unwrap();
        assert_eq!(control_input(&[1.0, 0.0], &pair(), &c).unwrap(), vec![-0.5, 0.5]);
    }

    #[test]
    fn control_off_is_zero_and_pinning_masks() {
        let off = ControlConfig::off(2);
        assert_eq!(off.gain(), 0.0);
        assert_eq!(control_input(&[1.0, 0.0], &pair(), &off).unwrap(), vec![0.0, 0.0]);
        let pin = ControlConfig::pinning(2, 0.5, [1]).unwrap();
        assert_eq!(control_input(&[1.0, 0.0], &pair(), &pin).unwrap(), vec![0.0, 0.5]);
        assert!(ControlConfig::pinning(2, 0.5, [2]).is_err());
        assert!(ControlConfig::full(2, -1.0).is_err());
    }

    #[test]
    fn full_control_sums_to_zero() {
        let t = GridTopology::new(
            4,
            [Line::new(0, 1, 1.0), Line::new(1, 2, 1.0), Line::new(0, 3, 1.0), Line::new(2, 3, 1.0)],
            [],
        )
        .unwrap();
        let c = ControlConfig::full(4, 1.7).unwrap();
        let u = control_input(&[0.25, -1.0, 0.5, 2.0], &t, &c).unwrap();
        assert_eq!(u.iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn isolated_node_accelerates_by_its_power() {
        let t = GridTopology::new(1, [], []).unwrap();
        let p = MachineParams::uniform(1, 1.0, 0.1, vec![1.0]);
        let s = DynamicState::at_rest(PhaseVector::zeros(1), t);
        let (dth, dw) = swing_rhs(&s, &p, &ControlConfig::off(1)).unwrap();
        assert_eq!(dth, vec![0.0]);
        assert_eq!(dw, vec![1.0]);
    }

    #[test]
    fn zero_derivative_state_only_advances_time() {
        let t = GridTopology::new(2, [Line::new(0, 1, 1.0)], []).unwrap();
        let p = MachineParams::uniform(2, 1.0, 0.1, vec![0.0, 0.0]);
        let s = DynamicState::at_rest(PhaseVector(vec![0.2, 0.2]), t);
        let next = integrate_step(&s, &p, &ControlConfig::off(2), 0.01).unwrap();
        assert_eq!(next.angles, s.angles);
        assert_eq!(next.velocities, s.velocities);
        assert_eq!(next.time, 0.01);
    }

    #[test]
    fn damped_node_matches_closed_form() {
        let t = GridTopology::new(1, [], []).unwrap();
        let (inertia, gamma, w0) = (2.0, 0.3, 1.5);
        let p = MachineParams::uniform(1, inertia, gamma, vec![0.0]);
        let mut s = DynamicState::at_rest(PhaseVector::zeros(1), t);
        s.velocities[0] = w0;
        let h = 0.05;
        for _ in 0..200 {
            s = integrate_step(&s, &p, &ControlConfig::off(1), h).unwrap();
        }
        let exact = w0 * (-gamma * s.time / inertia).exp();
        assert_abs_diff_eq!(s.velocities[0], exact, epsilon = 1e-8);
    }

    #[test]
    fn nonfinite_state_is_reported() {
        let t = GridTopology::new(1, [], []).unwrap();
        let p = MachineParams::uniform(1, 1.0, 0.1, vec![f64::MAX]);
        let s = DynamicState::at_rest(PhaseVector::zeros(1), t);
        let mut s2 = s.clone();
        s2.velocities[0] = f64::MAX;
        assert!(matches!(
            integrate_step(&s2, &p, &ControlConfig::off(1), 10.0),
            Err(GridError::IntegrationDiverged { .. })
        ));
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("pin".parse::<ControlMode>().unwrap(), ControlMode::Pinning);
        assert_eq!("full".parse::<ControlMode>().unwrap(), ControlMode::Full);
        assert!("half".parse::<ControlMode>().is_err());
    }
}
