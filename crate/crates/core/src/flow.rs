//! Line flows, the overload test, the synchronous fixed point and the
//! quasi-static (iterated equilibrium) cascade.

use std::ops::{Deref, DerefMut};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dynamics::{CascadeReport, FinalState, Outcome, TripEvent, TripMark};
use crate::error::{GridError, Result};
use crate::grid::{GridTopology, LineKey, MachineParams, NodeId};

/// Phase angles `θ_i` in the co-rotating frame (radians).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhaseVector(pub Vec<f64>);

impl PhaseVector {
    pub fn zeros(n: usize) -> Self {
        PhaseVector(vec![0.0; n])
    }

    /// Shifts every angle so that `reference` sits at zero.
    pub fn relative_to(&self, reference: usize) -> PhaseVector {
        let r = self.0[reference];
        PhaseVector(self.0.iter().map(|x| x - r).collect())
    }
}

impl Deref for PhaseVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for PhaseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for PhaseVector {
    fn from(v: Vec<f64>) -> Self {
        PhaseVector(v)
    }
}

/// Per-line flows. The stored sign is `F = K sin(θ_hi − θ_lo)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowMap {
    entries: Vec<(LineKey, f64)>,
}

impl FlowMap {
    pub fn get(&self, key: LineKey) -> Option<f64> {
        self.entries
            .binary_search_by_key(&key, |e| e.0)
            .ok()
            .map(|i| self.entries[i].1)
    }

    /// Flow measured from `from` towards `to`: `K sin(θ_to − θ_from)`.
    pub fn oriented(&self, from: usize, to: usize) -> Option<f64> {
        let f = self.get(LineKey::new(from, to))?;
        Some(if from <= to { f } else { -f })
    }

    pub fn iter(&self) -> impl Iterator<Item = (LineKey, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Fraction `α` of `K_ij` above which a line trips. Capacity is always derived.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct OverloadThreshold(f64);

impl OverloadThreshold {
    pub fn new(alpha: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&alpha) {
            Ok(OverloadThreshold(alpha))
        } else {
            Err(GridError::InvalidParameter(format!(
                "overload threshold {alpha} outside [0, 1]"
            )))
        }
    }

    pub fn alpha(self) -> f64 {
        self.0
    }

    pub fn capacity(self, coupling: f64) -> f64 {
        self.0 * coupling
    }

    /// Strict `|F| > αK`.
    pub fn is_overloaded(self, flow: f64, coupling: f64) -> bool {
        flow.abs() > self.capacity(coupling)
    }
}

impl TryFrom<f64> for OverloadThreshold {
    type Error = GridError;
    fn try_from(v: f64) -> Result<Self> {
        OverloadThreshold::new(v)
    }
}

impl From<OverloadThreshold> for f64 {
    fn from(t: OverloadThreshold) -> f64 {
        t.0
    }
}

pub fn line_flows(angles: &[f64], topology: &GridTopology) -> Result<FlowMap> {
    check_dim(angles.len(), topology.node_count())?;
    let entries = topology
        .lines()
        .iter()
        .map(|l| {
            let f = l.coupling * (angles[l.key.hi()] - angles[l.key.lo()]).sin();
            (l.key, f)
        })
        .collect();
    Ok(FlowMap { entries })
}

pub fn overloaded_lines(
    flows: &FlowMap,
    topology: &GridTopology,
    threshold: OverloadThreshold,
) -> Vec<LineKey> {
    topology
        .lines()
        .iter()
        .filter(|l| {
            flows
                .get(l.key)
                .is_some_and(|f| threshold.is_overloaded(f, l.coupling))
        })
        .map(|l| l.key)
        .collect()
}

/// `P_i + Σ_j K_ij sin(θ_j − θ_i)` for every node.
pub fn equilibrium_residual(
    angles: &[f64],
    topology: &GridTopology,
    params: &MachineParams,
) -> Result<Vec<f64>> {
    check_dim(angles.len(), topology.node_count())?;
    check_dim(params.len(), topology.node_count())?;
    let mut r = params.power.clone();
    for l in topology.lines() {
        let (a, b) = (l.key.lo(), l.key.hi());
        let f = l.coupling * (angles[b] - angles[a]).sin();
        r[a] += f;
        r[b] -= f;
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NewtonOptions {
    /// Max-norm residual the solve must reach.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        NewtonOptions {
            tolerance: 1e-10,
            max_iterations: 100,
        }
    }
}

/// Relative tolerance for deciding that a component's powers sum to zero.
const BALANCE_TOL: f64 = 1e-9;

pub(crate) fn component_imbalance(nodes: &[NodeId], power: &[f64]) -> (f64, bool) {
    let sum: f64 = nodes.iter().map(|n| power[n.0]).sum();
    let scale: f64 = nodes.iter().map(|n| power[n.0].abs()).sum::<f64>().max(1.0);
    (sum, sum.abs() <= BALANCE_TOL * scale)
}

/// Synchronous fixed point via Newton–Raphson, gauge fixed with the smallest
/// node of each component at angle zero.
pub fn solve_equilibrium(
    topology: &GridTopology,
    params: &MachineParams,
    guess: &[f64],
) -> Result<PhaseVector> {
    solve_equilibrium_with(topology, params, guess, NewtonOptions::default())
}

pub fn solve_equilibrium_with(
    topology: &GridTopology,
    params: &MachineParams,
    guess: &[f64],
    opts: NewtonOptions,
) -> Result<PhaseVector> {
    check_dim(guess.len(), topology.node_count())?;
    params.validate(topology.node_count())?;
    let comps = topology.connected_components();
    for c in &comps {
        let (imbalance, ok) = component_imbalance(c, &params.power);
        if !ok {
            return Err(GridError::UnbalancedComponent {
                node: c[0].0,
                imbalance,
            });
        }
    }
    let mut theta = guess.to_vec();
    for c in &comps {
        solve_component(topology, &params.power, c, &mut theta, opts)?;
    }
    Ok(PhaseVector(theta))
}

/// Newton on one connected component, updating `theta` in place for its nodes.
fn solve_component(
    topology: &GridTopology,
    power: &[f64],
    nodes: &[NodeId],
    theta: &mut [f64],
    opts: NewtonOptions,
) -> Result<()> {
    let reference = nodes[0].0;
    let shift = theta[reference];
    for n in nodes {
        theta[n.0] -= shift;
    }
    if nodes.len() == 1 {
        theta[reference] = 0.0;
        return Ok(());
    }

    // Local numbering: reference is dropped from the unknowns.
    let mut local = vec![usize::MAX; topology.node_count()];
    for (k, n) in nodes.iter().enumerate() {
        local[n.0] = k;
    }
    let lines: Vec<_> = topology
        .lines()
        .iter()
        .filter(|l| local[l.key.lo()] != usize::MAX)
        .collect();
    let m = nodes.len() - 1;

    let residual = |theta: &[f64]| -> Vec<f64> {
        let mut r: Vec<f64> = nodes.iter().map(|n| power[n.0]).collect();
        for l in &lines {
            let (a, b) = (l.key.lo(), l.key.hi());
            let f = l.coupling * (theta[b] - theta[a]).sin();
            r[local[a]] += f;
            r[local[b]] -= f;
        }
        r
    };
    let max_abs = |r: &[f64]| r.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));

    let mut r = residual(theta);
    let mut res = max_abs(&r);
    for _ in 0..opts.max_iterations {
        if res <= opts.tolerance * 1e-3 {
            return Ok(());
        }
        let mut jac = DMatrix::<f64>::zeros(m, m);
        for l in &lines {
            let (a, b) = (l.key.lo(), l.key.hi());
            let c = l.coupling * (theta[b] - theta[a]).cos();
            let (la, lb) = (local[a], local[b]);
            // dr_a/dθ_b = c, dr_a/dθ_a = -c, and symmetrically for b.
            if la > 0 {
                jac[(la - 1, la - 1)] -= c;
                if lb > 0 {
                    jac[(la - 1, lb - 1)] += c;
                }
            }
            if lb > 0 {
                jac[(lb - 1, lb - 1)] -= c;
                if la > 0 {
                    jac[(lb - 1, la - 1)] += c;
                }
            }
        }
        let rhs = DVector::from_iterator(m, r[1..].iter().map(|x| -x));
        let step = jac.lu().solve(&rhs).ok_or(GridError::SingularJacobian)?;
        if step.iter().any(|x| !x.is_finite()) {
            return Err(GridError::SingularJacobian);
        }

        // Backtrack on the max-norm residual.
        let base: Vec<f64> = theta.to_vec();
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..12 {
            for (k, n) in nodes.iter().enumerate().skip(1) {
                theta[n.0] = base[n.0] + scale * step[k - 1];
            }
            let trial = residual(theta);
            let trial_res = max_abs(&trial);
            if trial_res < res || trial_res <= opts.tolerance * 1e-3 {
                r = trial;
                res = trial_res;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            for n in nodes {
                theta[n.0] = base[n.0];
            }
            // Stalled at round-off: good enough if under tolerance.
            if res < opts.tolerance {
                return Ok(());
            }
            return Err(GridError::NoConvergence {
                iterations: opts.max_iterations,
                residual: res,
            });
        }
    }
    if res < opts.tolerance {
        Ok(())
    } else {
        Err(GridError::NoConvergence {
            iterations: opts.max_iterations,
            residual: res,
        })
    }
}

/// Iterated equilibrium cascade.
///
/// Removes `initial_fault`, solves the fixed point on what remains, removes
/// every overloaded line at once and repeats until nothing trips. A component
/// whose powers do not balance has no fixed point: all of its lines are
/// failed and the component is dropped (`islanded` trips).
pub fn static_cascade(
    topology: &GridTopology,
    params: &MachineParams,
    initial_fault: LineKey,
    threshold: OverloadThreshold,
) -> Result<CascadeReport> {
    let base = solve_equilibrium(topology, params, &vec![0.0; topology.node_count()])?;
    let base_flows = line_flows(&base, topology)?;
    let pre = overloaded_lines(&base_flows, topology, threshold);
    if !pre.is_empty() {
        return Err(GridError::OverloadedBaseCase(pre.len()));
    }

    let mut current = topology.remove_line(initial_fault)?;
    let mut theta = base.0.clone();
    let mut excluded = vec![false; topology.node_count()];
    let mut tripped = Vec::new();
    let mut islanded_any = false;
    let opts = NewtonOptions::default();

    for iteration in 1..=topology.line_count() + 1 {
        let mut to_remove: Vec<(LineKey, bool)> = Vec::new();
        let comps = current.connected_components();
        let mut solved_nodes = vec![false; topology.node_count()];

        for c in &comps {
            if c.iter().all(|n| excluded[n.0]) {
                continue;
            }
            let (_, balanced) = component_imbalance(c, &params.power);
            if !balanced {
                islanded_any = true;
                for n in c {
                    excluded[n.0] = true;
                }
                for l in current.lines() {
                    if c.binary_search(&NodeId(l.key.lo())).is_ok() {
                        to_remove.push((l.key, true));
                    }
                }
                continue;
            }
            solve_component(&current, &params.power, c, &mut theta, opts)?;
            for n in c {
                solved_nodes[n.0] = true;
            }
        }

        for l in current.lines() {
            if !solved_nodes[l.key.lo()] {
                continue;
            }
            let f = l.coupling * (theta[l.key.hi()] - theta[l.key.lo()]).sin();
            if threshold.is_overloaded(f, l.coupling) {
                to_remove.push((l.key, false));
            }
        }

        if to_remove.is_empty() {
            let outcome = if islanded_any {
                Outcome::IslandedUnbalanced
            } else {
                Outcome::Settled
            };
            return Ok(CascadeReport::new(
                initial_fault,
                tripped,
                outcome,
                None,
                FinalState::Equilibrium(PhaseVector(theta)),
            ));
        }
        to_remove.sort();
        for (key, islanded) in to_remove {
            current = current.remove_line(key)?;
            tripped.push(TripEvent {
                line: key,
                mark: TripMark::Iteration(iteration),
                islanded,
            });
        }
    }
    unreachable!("each iteration removes at least one line")
}

fn check_dim(actual: usize, expected: usize) -> Result<()> {
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

    fn two_node() -> (GridTopology, MachineParams) {
        let t = GridTopology::new(2, [Line::new(0, 1, 1.0)], [0]).unwrap();
        let p = MachineParams::uniform(2, 1.0, 0.1, vec![0.5, -0.5]);
        (t, p)
    }

    #[test]
    fn equal_angles_carry_no_flow() {
        let (t, _) = two_node();
        let f = line_flows(&[0.3, 0.3], &t).unwrap();
        assert_eq!(f.get(LineKey::new(0, 1)), Some(0.0));
    }

    #[test]
    fn quarter_turn_gives_full_coupling() {
        let t = GridTopology::new(2, [Line::new(0, 1, 1.63)], []).unwrap();
        let f = line_flows(&[0.0, std::f64::consts::FRAC_PI_2], &t).unwrap();
        assert_eq!(f.get(LineKey::new(0, 1)), Some(1.63));
        assert_eq!(f.oriented(1, 0), Some(-1.63));
    }

    #[test]
    fn dimension_mismatch() {
        let (t, _) = two_node();
        assert!(matches!(
            line_flows(&[0.0], &t),
            Err(GridError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn overload_is_strict() {
        let t = GridTopology::new(2, [Line::new(0, 1, 1.63)], []).unwrap();
        let alpha = OverloadThreshold::new(0.6).unwrap();
        let cap = alpha.capacity(1.63);
        // asin of the ratio puts the flow exactly on the capacity.
        let flows_at = |target: f64| {
            let d = (target / 1.63).asin();
            line_flows(&[0.0, d], &t).unwrap()
        };
        assert_eq!(overloaded_lines(&flows_at(1.0), &t, alpha).len(), 1);
        assert!(alpha.is_overloaded(1.0, 1.63));
        assert!(!alpha.is_overloaded(cap, 1.63));
        let never = OverloadThreshold::new(1.0).unwrap();
        assert!(overloaded_lines(&flows_at(1.63), &t, never).is_empty());
    }

    #[test]
    fn threshold_range() {
        assert!(OverloadThreshold::new(-0.1).is_err());
        assert!(OverloadThreshold::new(1.1).is_err());
        assert!(OverloadThreshold::new(0.0).is_ok());
    }

    #[test]
    fn two_node_closed_form() {
        let (t, p) = two_node();
        let th = solve_equilibrium(&t, &p, &[0.0, 0.0]).unwrap();
        assert_eq!(th[0], 0.0);
        // 0.5 + sin(θ1 − θ0) = 0 at node 0, so θ0 − θ1 = asin(0.5).
        assert_abs_diff_eq!(th[0] - th[1], 0.5f64.asin(), epsilon = 1e-12);
        assert_abs_diff_eq!(th[0] - th[1], std::f64::consts::FRAC_PI_6, epsilon = 1e-12);
    }

    #[test]
    fn zero_injection_gives_zero_angles() {
        let t = GridTopology::new(3, [Line::new(0, 1, 1.0), Line::new(1, 2, 1.0)], []).unwrap();
        let p = MachineParams::uniform(3, 1.0, 0.1, vec![0.0; 3]);
        let th = solve_equilibrium(&t, &p, &[0.0; 3]).unwrap();
        assert_eq!(th.0, vec![0.0; 3]);
    }

    #[test]
    fn unbalanced_is_rejected() {
        let t = GridTopology::new(2, [Line::new(0, 1, 1.0)], []).unwrap();
        let p = MachineParams::uniform(2, 1.0, 0.1, vec![0.5, -0.4]);
        assert!(matches!(
            solve_equilibrium(&t, &p, &[0.0; 2]),
            Err(GridError::UnbalancedComponent { .. })
        ));
    }

    #[test]
    fn infeasible_transfer_does_not_converge() {
        // The line can carry at most 1.0.
        let t = GridTopology::new(2, [Line::new(0, 1, 1.0)], []).unwrap();
        let p = MachineParams::uniform(2, 1.0, 0.1, vec![1.5, -1.5]);
        assert!(solve_equilibrium(&t, &p, &[0.0; 2]).is_err());
    }

    #[test]
    fn gauge_shift_leaves_flows_unchanged() {
        let (t, p) = two_node();
        let a = solve_equilibrium(&t, &p, &[0.0, 0.0]).unwrap();
        let b = solve_equilibrium(&t, &p, &[0.7, 0.7]).unwrap();
        let fa = line_flows(&a, &t).unwrap();
        let fb = line_flows(&b, &t).unwrap();
        for ((_, x), (_, y)) in fa.iter().zip(fb.iter()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-10);
        }
        let shifted: Vec<f64> = a.iter().map(|x| x + 0.7).collect();
        assert_eq!(line_flows(&shifted, &t).unwrap().len(), 1);
    }
}
