use ndarray::Array2;

use crate::petrinet::PetriNet;

/// Place-only view of a net: `adjacency[[p, q]] == 1` iff some transition
/// consumes from `p` and produces into `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaceGraph {
    pub adjacency: Array2<u8>,
    /// Node `i` is the place with this id.
    pub place_ids: Vec<String>,
}

impl PlaceGraph {
    pub fn num_nodes(&self) -> usize {
        self.place_ids.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().filter(|&&a| a != 0).count()
    }
}

pub fn to_place_graph(net: &PetriNet) -> PlaceGraph {
    let n = net.num_places();
    let mut adjacency = Array2::zeros((n, n));
    for t in 0..net.num_transitions() {
        for &p in net.preset(t) {
            for &q in net.postset(t) {
                adjacency[[p, q]] = 1;
            }
        }
    }
    PlaceGraph {
        adjacency,
        place_ids: net.places().iter().map(|p| p.id.clone()).collect(),
    }
}

/// Random-walk normalization with self-loops: `D⁻¹(A + I)` where `D` holds
/// the row sums of `A + I`. Rows of the result sum to one.
pub fn normalize(adjacency: &Array2<u8>) -> Array2<f64> {
    assert_eq!(adjacency.nrows(), adjacency.ncols(), "adjacency must be square");
    let mut out = adjacency.mapv(f64::from) + Array2::<f64>::eye(adjacency.nrows());
    for mut row in out.rows_mut() {
        let degree = row.sum();
        row /= degree;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::petrinet::NetBuilder;
    use ndarray::array;

    #[test]
    fn chain_has_one_edge() {
        let mut b = NetBuilder::new();
        let p = b.places(2);
        b.transition(Some("a"), &[p[0]], &[p[1]]);
        let g = to_place_graph(&b.build().unwrap());
        assert_eq!(g.adjacency, array![[0, 1], [0, 0]]);
    }

    #[test]
    fn self_edge_only_from_loop_pattern() {
        let mut b = NetBuilder::new();
        let p = b.places(2);
        b.transition(Some("a"), &[p[0]], &[p[1]]);
        b.transition(Some("b"), &[p[1]], &[p[1]]);
        let g = to_place_graph(&b.build().unwrap());
        assert_eq!(g.adjacency[[1, 1]], 1);
        assert_eq!(g.adjacency[[0, 0]], 0);
    }

    #[test]
    fn isolated_node_normalizes_to_one() {
        assert_eq!(normalize(&Array2::zeros((1, 1))), array![[1.0]]);
    }

    #[test]
    fn two_node_hand_example() {
        let a = array![[0u8, 1], [0, 0]];
        assert_eq!(normalize(&a), array![[0.5, 0.5], [0.0, 1.0]]);
    }

    #[test]
    fn existing_self_loop_adds_to_identity() {
        let a = array![[1u8, 1], [0, 0]];
        let n = normalize(&a);
        assert!((n[[0, 0]] - 2.0 / 3.0).abs() < 1e-15);
        assert!((n[[0, 1]] - 1.0 / 3.0).abs() < 1e-15);
    }
}
