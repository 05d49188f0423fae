use crate::dynamics::SimConfig;
use crate::flow::OverloadThreshold;
use crate::grid::{GridTopology, Line, MachineParams};

use super::GridCase;

const FIVE_NODE_EDGES: [(u32, u32); 7] = [(1, 2), (1, 3), (1, 5), (2, 3), (2, 4), (3, 4), (4, 5)];

/// Two generators (nodes 2 and 5, `P = 1.5`) and three loads (`P = −1`) on
/// seven equal lines with `k = 1.63`; `I = 1`, `γ = 0.1`, `α = 0.6`.
pub fn builtin_five_node() -> GridCase {
    let k = 1.63;
    let topology = GridTopology::new(
        5,
        FIVE_NODE_EDGES
            .iter()
            .map(|&(a, b)| Line::new(a as usize - 1, b as usize - 1, k)),
        [1, 4],
    )
    .expect("built-in topology is valid");
    let params = MachineParams::uniform(5, 1.0, 0.1, vec![-1.0, 1.5, -1.0, -1.0, 1.5]);
    GridCase {
        name: "five-node".into(),
        provenance: "built-in five-node example grid (2 generators, 3 loads, 7 lines)".into(),
        labels: (1..=5).collect(),
        topology,
        params,
        sim: SimConfig::with_threshold(OverloadThreshold::new(0.6).expect("valid")),
        coupling: Some(k),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::NodeId;

    #[test]
    fn shape() {
        let c = builtin_five_node();
        c.validate().unwrap();
        assert_eq!(c.node_count(), 5);
        assert_eq!(c.topology.line_count(), 7);
        let gens: Vec<u32> = c.topology.generators().iter().map(|&NodeId(i)| c.label(i)).collect();
        assert_eq!(gens, vec![2, 5]);
        assert_eq!(c.imbalance(), 0.0);
        assert_eq!(c.threshold().alpha(), 0.6);
    }
}
