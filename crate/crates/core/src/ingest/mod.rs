//! Case loading: the built-in five-node grid, the native TOML grid format,
//! IEEE Common Data Format files and parameter sidecars.

mod builtin;
mod cdf;
mod native;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use builtin::builtin_five_node;
pub use cdf::{parse_ieee_cdf, CdfBalance, CdfCase, CdfOptions, CdfSummary, Susceptance};
pub use native::{parse_grid_file, serialize_grid_file, NATIVE_FORMAT_TAG};

use crate::dynamics::SimConfig;
use crate::error::{GridError, Result};
use crate::flow::OverloadThreshold;
use crate::grid::{GridTopology, LineKey, MachineParams};
use crate::spectral::LinearModelParams;

/// One case study: topology, machine parameters and simulation defaults.
///
/// Nodes are addressed internally by dense index; `labels` keeps the external
/// numbering used by files, the CLI and reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    pub name: String,
    pub provenance: String,
    pub labels: Vec<u32>,
    pub topology: GridTopology,
    pub params: MachineParams,
    pub sim: SimConfig,
    /// Uniform coupling `k` when the case declares one.
    pub coupling: Option<f64>,
}

impl GridCase {
    pub fn node_count(&self) -> usize {
        self.topology.node_count()
    }

    pub fn threshold(&self) -> OverloadThreshold {
        self.sim.threshold
    }

    pub fn index_of(&self, label: u32) -> Result<usize> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .ok_or(GridError::UnknownNode(label))
    }

    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    /// Key of the line joining two externally numbered nodes.
    pub fn line_key(&self, a: u32, b: u32) -> Result<LineKey> {
        let key = LineKey::new(self.index_of(a)?, self.index_of(b)?);
        if self.topology.contains(key) {
            Ok(key)
        } else {
            Err(GridError::LineNotFound(key))
        }
    }

    /// External labels of a line, smaller label first.
    pub fn line_labels(&self, key: LineKey) -> (u32, u32) {
        let (a, b) = (self.label(key.lo()), self.label(key.hi()));
        (a.min(b), a.max(b))
    }

    pub fn format_line(&self, key: LineKey) -> String {
        let (a, b) = self.line_labels(key);
        format!("({a},{b})")
    }

    pub fn imbalance(&self) -> f64 {
        self.params.imbalance()
    }

    pub fn validate(&self) -> Result<()> {
        let violations = self.topology.validate();
        if !violations.is_empty() {
            return Err(GridError::InvalidTopology(violations));
        }
        if self.labels.len() != self.node_count() {
            return Err(GridError::DimensionMismatch {
                expected: self.node_count(),
                actual: self.labels.len(),
            });
        }
        let mut sorted = self.labels.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(GridError::Format(format!("duplicate node id {}", w[0])));
        }
        self.params.validate(self.node_count())?;
        self.sim.validate()
    }

    /// Parameters for the linearized analysis. Requires equal couplings, equal
    /// damping and unit inertia everywhere.
    pub fn linear_params(&self) -> Result<LinearModelParams> {
        let lines = self.topology.lines();
        let k = self
            .coupling
            .or_else(|| lines.first().map(|l| l.coupling))
            .ok_or_else(|| GridError::NonUniform("case has no lines".into()))?;
        if let Some(l) = lines.iter().find(|l| !close(l.coupling, k)) {
            return Err(GridError::NonUniform(format!(
                "line {} has coupling {} but the case uses k = {k}",
                self.format_line(l.key),
                l.coupling
            )));
        }
        let gamma = self.params.damping[0];
        if let Some(i) = self.params.damping.iter().position(|&g| !close(g, gamma)) {
            return Err(GridError::NonUniform(format!(
                "node {} has damping {} but node {} has {gamma}",
                self.label(i),
                self.params.damping[i],
                self.label(0)
            )));
        }
        if let Some(i) = self.params.inertia.iter().position(|&m| !close(m, 1.0)) {
            return Err(GridError::NonUniform(format!(
                "node {} has inertia {}; the linear analysis assumes unit inertia",
                self.label(i),
                self.params.inertia[i]
            )));
        }
        LinearModelParams::new(k, gamma)
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

/// Sets every load to −1 and every generator to `loads / generators`, so the
/// powers sum to zero.
pub fn normalize_powers(case: &GridCase) -> Result<GridCase> {
    let n = case.node_count();
    let gens = case.topology.generators().len();
    if gens == 0 {
        return Err(GridError::EmptyGeneratorSet);
    }
    let loads = n - gens;
    let gen_power = loads as f64 / gens as f64;
    let mut out = case.clone();
    for i in 0..n {
        out.params.power[i] = if case.topology.is_generator(i) {
            gen_power
        } else {
            -1.0
        };
    }
    Ok(out)
}

/// Parameter overrides applied on top of a parsed case. Global values apply to
/// every node first; per-node entries then take precedence.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default)]
    pub format: Option<String>,
    #[serde(default)]
    pub globals: GlobalOverrides,
    #[serde(default)]
    pub nodes: Vec<NodeOverride>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GlobalOverrides {
    pub inertia: Option<f64>,
    pub damping: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeOverride {
    pub id: u32,
    pub inertia: Option<f64>,
    pub damping: Option<f64>,
    pub power: Option<f64>,
}

pub const OVERRIDES_FORMAT_TAG: &str = "gridcascade-overrides/1";

impl Overrides {
    pub fn parse(text: &str) -> Result<Overrides> {
        let o: Overrides = toml::from_str(text).map_err(|e| native::syntax_error(text, &e))?;
        if let Some(tag) = &o.format {
            if tag != OVERRIDES_FORMAT_TAG {
                return Err(GridError::Format(format!(
                    "unsupported overrides format '{tag}', expected '{OVERRIDES_FORMAT_TAG}'"
                )));
            }
        }
        Ok(o)
    }
}

pub fn apply_overrides(case: &GridCase, overrides: &Overrides) -> Result<GridCase> {
    let mut out = case.clone();
    let n = out.node_count();
    let g = &overrides.globals;
    if let Some(v) = g.inertia {
        out.params.inertia = vec![v; n];
    }
    if let Some(v) = g.damping {
        out.params.damping = vec![v; n];
    }
    if let Some(a) = g.alpha {
        out.sim.threshold = OverloadThreshold::new(a)?;
    }
    for node in &overrides.nodes {
        let i = out.index_of(node.id)?;
        if let Some(v) = node.inertia {
            out.params.inertia[i] = v;
        }
        if let Some(v) = node.damping {
            out.params.damping[i] = v;
        }
        if let Some(v) = node.power {
            out.params.power[i] = v;
        }
    }
    out.params.validate(n)?;
    Ok(out)
}

/// Loads a case from a path, or the built-in grid when `source` is `five-node`.
/// CDF is recognized by its section header; anything else is read as the
/// native format.
pub fn load_case(source: &str) -> std::result::Result<GridCase, LoadError> {
    if source == "five-node" || source == "builtin:five-node" {
        return Ok(builtin_five_node());
    }
    let text = std::fs::read_to_string(Path::new(source)).map_err(|e| LoadError::Io {
        path: source.to_string(),
        source: e,
    })?;
    if text.contains("BUS DATA FOLLOWS") {
        Ok(parse_ieee_cdf(&text, &CdfOptions::default())?.case)
    } else {
        Ok(parse_grid_file(&text)?)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalization_ratios() {
        let mut case = builtin_five_node();
        case.params.power = vec![0.0; 5];
        let n = normalize_powers(&case).unwrap();
        assert_eq!(n.params.power, vec![-1.0, 1.5, -1.0, -1.0, 1.5]);
        assert_eq!(n.imbalance(), 0.0);
    }

    #[test]
    fn normalization_one_to_one() {
        let topo = GridTopology::new(2, [crate::grid::Line::new(0, 1, 1.0)], [0]).unwrap();
        let case = GridCase {
            name: "pair".into(),
            provenance: String::new(),
            labels: vec![1, 2],
            topology: topo,
            params: MachineParams::uniform(2, 1.0, 0.1, vec![0.0, 0.0]),
            sim: SimConfig::default(),
            coupling: Some(1.0),
        };
        assert_eq!(normalize_powers(&case).unwrap().params.power, vec![1.0, -1.0]);

        let mut none = case.clone();
        none.topology = GridTopology::new(2, [crate::grid::Line::new(0, 1, 1.0)], []).unwrap();
        assert_eq!(normalize_powers(&none), Err(GridError::EmptyGeneratorSet));
    }

    #[test]
    fn italian_generator_power() {
        let ratio = 93.0 / 34.0;
        assert_eq!(format!("{ratio:.4}"), "2.7353");
    }

    #[test]
    fn overrides_apply_globals_then_nodes() {
        let case = builtin_five_node();
        let o = Overrides::parse(
            r#"
            [globals]
            damping = 0.05
            alpha = 0.4
            inertia = 0.064
            [[nodes]]
            id = 2
            inertia = 0.2
            "#,
        )
        .unwrap();
        let out = apply_overrides(&case, &o).unwrap();
        assert!(out.params.damping.iter().all(|&g| g == 0.05));
        assert_eq!(out.threshold().alpha(), 0.4);
        assert_eq!(out.params.inertia, vec![0.064, 0.2, 0.064, 0.064, 0.064]);
    }

    #[test]
    fn override_of_unknown_node_fails() {
        let o = Overrides {
            nodes: vec![NodeOverride {
                id: 999,
                inertia: Some(1.0),
                damping: None,
                power: None,
            }],
            ..Overrides::default()
        };
        assert_eq!(
            apply_overrides(&builtin_five_node(), &o),
            Err(GridError::UnknownNode(999))
        );
    }

    #[test]
    fn linear_params_require_uniformity() {
        let case = builtin_five_node();
        let p = case.linear_params().unwrap();
        assert_eq!((p.coupling(), p.damping()), (1.63, 0.1));
        let mut odd = case.clone();
        odd.params.damping[3] = 0.2;
        assert!(matches!(odd.linear_params(), Err(GridError::NonUniform(_))));
    }
}
