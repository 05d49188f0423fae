//! Native grid format: a TOML document tagged `format = "gridcascade-grid/1"`.
//!
//! ```toml
//! format = "gridcascade-grid/1"
//! name = "five-node"
//!
//! [globals]
//! coupling = 1.63   # k, used by lines without their own coupling
//! alpha = 0.6
//! inertia = 1.0     # default for nodes that omit it
//! damping = 0.1
//! normalize = false # loads -> -1, generators -> loads/generators
//!
//! [simulation]      # optional
//! step = 0.001
//! horizon = 200.0
//!
//! [[nodes]]
//! id = 1
//! role = "load"     # or "generator"
//! power = -1.0      # may be omitted when normalize = true
//!
//! [[lines]]
//! from = 1
//! to = 2
//! coupling = 1.63   # optional
//! ```

use serde::{Deserialize, Serialize};

use crate::dynamics::SimConfig;
use crate::error::{GridError, Result};
use crate::flow::OverloadThreshold;
use crate::grid::{GridTopology, Line, MachineParams};

use super::{normalize_powers, GridCase};

pub const NATIVE_FORMAT_TAG: &str = "gridcascade-grid/1";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<String>,
    globals: Globals,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    simulation: Option<Simulation>,
    #[serde(default)]
    nodes: Vec<NodeEntry>,
    #[serde(default)]
    lines: Vec<LineEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Globals {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coupling: Option<f64>,
    alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inertia: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    damping: Option<f64>,
    #[serde(default)]
    normalize: bool,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Simulation {
    step: Option<f64>,
    horizon: Option<f64>,
    settle_velocity_tol: Option<f64>,
    settle_window: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Role {
    Generator,
    Load,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    id: u32,
    role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    power: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inertia: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    damping: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineEntry {
    from: u32,
    to: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    coupling: Option<f64>,
}

pub(crate) fn syntax_error(text: &str, err: &toml::de::Error) -> GridError {
    let (line, column) = match err.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
            (line, column)
        }
        None => (0, 0),
    };
    GridError::Syntax {
        line,
        column,
        message: err.message().to_string(),
    }
}

pub fn parse_grid_file(text: &str) -> Result<GridCase> {
    let file: GridFile = toml::from_str(text).map_err(|e| syntax_error(text, &e))?;
    if file.format != NATIVE_FORMAT_TAG {
        return Err(GridError::Format(format!(
            "unsupported format '{}', expected '{NATIVE_FORMAT_TAG}'",
            file.format
        )));
    }
    let g = &file.globals;
    let labels: Vec<u32> = file.nodes.iter().map(|n| n.id).collect();
    let index_of = |id: u32| -> Result<usize> {
        labels
            .iter()
            .position(|&l| l == id)
            .ok_or(GridError::UnknownNode(id))
    };

    let n = labels.len();
    let mut inertia = Vec::with_capacity(n);
    let mut damping = Vec::with_capacity(n);
    let mut power = Vec::with_capacity(n);
    let mut generators = Vec::new();
    for (i, node) in file.nodes.iter().enumerate() {
        let missing = |what: &str| {
            GridError::Format(format!("node {} has no {what} and no global default", node.id))
        };
        inertia.push(node.inertia.or(g.inertia).ok_or_else(|| missing("inertia"))?);
        damping.push(node.damping.or(g.damping).ok_or_else(|| missing("damping"))?);
        power.push(match (node.power, g.normalize) {
            (Some(p), _) => p,
            (None, true) => 0.0,
            (None, false) => return Err(missing("power")),
        });
        if node.role == Role::Generator {
            generators.push(i);
        }
    }

    let mut lines = Vec::with_capacity(file.lines.len());
    for l in &file.lines {
        let coupling = l.coupling.or(g.coupling).ok_or_else(|| {
            GridError::Format(format!(
                "line ({},{}) has no coupling and no global k",
                l.from, l.to
            ))
        })?;
        lines.push(Line::new(index_of(l.from)?, index_of(l.to)?, coupling));
    }
    let topology = GridTopology::new(n, lines, generators)?;

    let defaults = SimConfig::default();
    let s = file.simulation.unwrap_or_default();
    let sim = SimConfig {
        step: s.step.unwrap_or(defaults.step),
        horizon: s.horizon.unwrap_or(defaults.horizon),
        settle_velocity_tol: s.settle_velocity_tol.unwrap_or(defaults.settle_velocity_tol),
        settle_window: s.settle_window.unwrap_or(defaults.settle_window),
        threshold: OverloadThreshold::new(g.alpha)?,
    };

    let mut case = GridCase {
        name: file.name.unwrap_or_default(),
        provenance: file.provenance.unwrap_or_default(),
        labels,
        topology,
        params: MachineParams {
            inertia,
            damping,
            power,
        },
        sim,
        coupling: g.coupling,
    };
    if g.normalize {
        case = normalize_powers(&case)?;
    }
    case.validate()?;
    let imbalance = case.imbalance();
    let scale: f64 = case.params.power.iter().map(|p| p.abs()).sum::<f64>().max(1.0);
    if imbalance.abs() > 1e-9 * scale {
        return Err(GridError::Unbalanced(imbalance));
    }
    Ok(case)
}

/// Writes every per-node and per-line value explicitly, so that parsing the
/// output reproduces the case exactly.
pub fn serialize_grid_file(case: &GridCase) -> String {
    let file = GridFile {
        format: NATIVE_FORMAT_TAG.to_string(),
        name: (!case.name.is_empty()).then(|| case.name.clone()),
        provenance: (!case.provenance.is_empty()).then(|| case.provenance.clone()),
        globals: Globals {
            coupling: case.coupling,
            alpha: case.sim.threshold.alpha(),
            inertia: None,
            damping: None,
            normalize: false,
        },
        simulation: Some(Simulation {
            step: Some(case.sim.step),
            horizon: Some(case.sim.horizon),
            settle_velocity_tol: Some(case.sim.settle_velocity_tol),
            settle_window: Some(case.sim.settle_window),
        }),
        nodes: (0..case.node_count())
            .map(|i| NodeEntry {
                id: case.labels[i],
                role: if case.topology.is_generator(i) {
                    Role::Generator
                } else {
                    Role::Load
                },
                power: Some(case.params.power[i]),
                inertia: Some(case.params.inertia[i]),
                damping: Some(case.params.damping[i]),
            })
            .collect(),
        lines: case
            .topology
            .lines()
            .iter()
            .map(|l| LineEntry {
                from: case.labels[l.key.lo()],
                to: case.labels[l.key.hi()],
                coupling: Some(l.coupling),
            })
            .collect(),
    };
    toml::to_string(&file).expect("grid file serializes")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Violation;
    use crate::ingest::builtin_five_node;

    const HEADER: &str = r#"
format = "gridcascade-grid/1"
[globals]
coupling = 1.0
alpha = 0.6
inertia = 1.0
damping = 0.1
"#;

    #[test]
    fn five_node_round_trips() {
        let case = builtin_five_node();
        let text = serialize_grid_file(&case);
        assert_eq!(parse_grid_file(&text).unwrap(), case);
    }

    #[test]
    fn duplicate_line_is_rejected() {
        let text = format!(
            "{HEADER}
[[nodes]]
id = 1
role = \"generator\"
power = 1.0
[[nodes]]
id = 2
role = \"load\"
power = -1.0
[[lines]]
from = 1
to = 2
[[lines]]
from = 2
to = 1
"
        );
        match parse_grid_file(&text) {
            Err(GridError::InvalidTopology(v)) => {
                assert_eq!(v, vec![Violation::DuplicateLine(0, 1)])
            }
            other => panic!("expected duplicate-line error, got {other:?}"),
        }
    }

    #[test]
    fn syntax_error_has_position() {
        let text = "format = \"gridcascade-grid/1\"\n[globals]\nalpha = = 0.6\n";
        match parse_grid_file(text) {
            Err(GridError::Syntax { line, column, .. }) => {
                assert_eq!(line, 3);
                assert!(column > 1);
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn unbalanced_needs_normalize() {
        let nodes = "
[[nodes]]
id = 10
role = \"generator\"
power = 2.0
[[nodes]]
id = 20
role = \"load\"
power = -1.0
[[nodes]]
id = 30
role = \"load\"
[[lines]]
from = 10
to = 20
[[lines]]
from = 20
to = 30
";
        let plain = format!("{HEADER}{nodes}");
        assert!(matches!(parse_grid_file(&plain), Err(GridError::Format(_))));
        let with_power = plain.replace("role = \"load\"\n[[lines]]", "role = \"load\"\npower = -0.5\n[[lines]]");
        assert!(matches!(parse_grid_file(&with_power), Err(GridError::Unbalanced(_))));
        let normalized = format!("{}{nodes}", HEADER.replace("damping = 0.1", "damping = 0.1\nnormalize = true"));
        let case = parse_grid_file(&normalized).unwrap();
        assert_eq!(case.params.power, vec![2.0, -1.0, -1.0]);
        assert_eq!(case.labels, vec![10, 20, 30]);
    }

    #[test]
    fn wrong_tag_and_unknown_node() {
        let bad_tag = HEADER.replace("gridcascade-grid/1", "other/2");
        assert!(matches!(parse_grid_file(&bad_tag), Err(GridError::Format(_))));
        let dangling = format!(
            "{HEADER}
[[nodes]]
id = 1
role = \"load\"
power = 0.0
[[lines]]
from = 1
to = 5
"
        );
        assert_eq!(parse_grid_file(&dangling), Err(GridError::UnknownNode(5)));
    }
}
