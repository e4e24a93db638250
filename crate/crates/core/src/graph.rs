//! Chimera topology: an `n x n` grid of `K_{4,4}` unit cells.
//!
//! Node ids follow `8 * (n * row + col) + 4 * side + index`, with the left
//! half of every cell (`side = 0`) coupled vertically to the cells above and
//! below and the right half coupled horizontally to the cells beside it.
//! A graph may carry a mask of inactive nodes; masked nodes and their edges
//! are simply absent from the node and edge lists.

use std::collections::BTreeSet;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn bit(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 1,
        }
    }
}

/// Bipartition class. No edge joins two nodes of the same color.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Color {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CellPos {
    pub row: usize,
    pub col: usize,
    pub side: Side,
    pub index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    /// Left node `left` to right node `right` inside one cell.
    Intra {
        row: usize,
        col: usize,
        left: usize,
        right: usize,
    },
    /// Left-side coupler between `(row, col)` and `(row + 1, col)`.
    Vertical { row: usize, col: usize, index: usize },
    /// Right-side coupler between `(row, col)` and `(row, col + 1)`.
    Horizontal { row: usize, col: usize, index: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChimeraGraph {
    n: usize,
    active: Vec<bool>,
    nodes: Vec<usize>,
    index_of: Vec<Option<usize>>,
    edges: Vec<(usize, usize)>,
    edge_kinds: Vec<EdgeKind>,
    // neighbor lists in index space: (neighbor index, edge index)
    adjacency: Vec<Vec<(usize, usize)>>,
}

pub fn node_id(n: usize, row: usize, col: usize, side: Side, index: usize) -> usize {
    8 * (n * row + col) + 4 * side.bit() + index
}

/// Builds the full `C_n` graph.
pub fn build_chimera(n: usize) -> Result<ChimeraGraph> {
    ChimeraGraph::masked(n, &BTreeSet::new())
}

impl ChimeraGraph {
    /// `C_n` with the given node ids removed.
    pub fn masked(n: usize, masked: &BTreeSet<usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("Chimera grid side n must be at least 1"));
        }
        let total = 8 * n * n;
        if let Some(&bad) = masked.iter().find(|&&v| v >= total) {
            return Err(Error::invalid(format!(
                "masked node {bad} outside C_{n} (which has {total} nodes)"
            )));
        }
        let active: Vec<bool> = (0..total).map(|v| !masked.contains(&v)).collect();
        let nodes: Vec<usize> = (0..total).filter(|&v| active[v]).collect();
        let mut index_of = vec![None; total];
        for (i, &v) in nodes.iter().enumerate() {
            index_of[v] = Some(i);
        }

        let mut edges = Vec::with_capacity(16 * n * n + 8 * n * (n - 1));
        let mut edge_kinds = Vec::with_capacity(edges.capacity());
        let mut push = |u: usize, v: usize, kind: EdgeKind| {
            if active[u] && active[v] {
                edges.push((u.min(v), u.max(v)));
                edge_kinds.push(kind);
            }
        };
        for row in 0..n {
            for col in 0..n {
                for left in 0..4 {
                    for right in 0..4 {
                        push(
                            node_id(n, row, col, Side::Left, left),
                            node_id(n, row, col, Side::Right, right),
                            EdgeKind::Intra { row, col, left, right },
                        );
                    }
                }
            }
        }
        // couplers between rows first, then couplers between columns
        for row in 0..n.saturating_sub(1) {
            for col in 0..n {
                for index in 0..4 {
                    push(
                        node_id(n, row, col, Side::Left, index),
                        node_id(n, row + 1, col, Side::Left, index),
                        EdgeKind::Vertical { row, col, index },
                    );
                }
            }
        }
        for row in 0..n {
            for col in 0..n.saturating_sub(1) {
                for index in 0..4 {
                    push(
                        node_id(n, row, col, Side::Right, index),
                        node_id(n, row, col + 1, Side::Right, index),
                        EdgeKind::Horizontal { row, col, index },
                    );
                }
            }
        }

        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (e, &(u, v)) in edges.iter().enumerate() {
            let (iu, iv) = (index_of[u].unwrap(), index_of[v].unwrap());
            adjacency[iu].push((iv, e));
            adjacency[iv].push((iu, e));
        }

        Ok(ChimeraGraph {
            n,
            active,
            nodes,
            index_of,
            edges,
            edge_kinds,
            adjacency,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of active nodes.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Total number of node slots in the underlying `C_n`, masked or not.
    pub fn full_node_count(&self) -> usize {
        8 * self.n * self.n
    }

    /// Active node ids in canonical (ascending) order.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    /// Edges as `(u, v)` node-id pairs with `u < v`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_kinds(&self) -> &[EdgeKind] {
        &self.edge_kinds
    }

    /// Edges as pairs of positions in [`nodes`](Self::nodes).
    pub fn edge_indices(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges
            .iter()
            .map(move |&(u, v)| (self.index_of[u].unwrap(), self.index_of[v].unwrap()))
    }

    pub fn is_active(&self, id: usize) -> bool {
        self.active.get(id).copied().unwrap_or(false)
    }

    pub fn is_masked(&self) -> bool {
        self.nodes.len() != self.active.len()
    }

    pub fn masked_nodes(&self) -> Vec<usize> {
        (0..self.active.len()).filter(|&v| !self.active[v]).collect()
    }

    /// Position of node `id` in the canonical node list.
    pub fn index_of(&self, id: usize) -> Option<usize> {
        self.index_of.get(id).copied().flatten()
    }

    /// Neighbors of the node at position `idx`, as `(neighbor position, edge index)`.
    pub fn neighbors(&self, idx: usize) -> &[(usize, usize)] {
        &self.adjacency[idx]
    }

    pub fn cell_of(&self, id: usize) -> CellPos {
        let cell = id / 8;
        let within = id % 8;
        CellPos {
            row: cell / self.n,
            col: cell % self.n,
            side: if within < 4 { Side::Left } else { Side::Right },
            index: within % 4,
        }
    }

    pub fn color_of(&self, id: usize) -> Color {
        let p = self.cell_of(id);
        if (p.row + p.col + p.side.bit()) % 2 == 0 {
            Color::A
        } else {
            Color::B
        }
    }

    /// Positions (in [`nodes`](Self::nodes)) of each color class.
    pub fn color_classes(&self) -> (Vec<usize>, Vec<usize>) {
        let mut a = Vec::new();
        let mut b = Vec::new();
        for (i, &v) in self.nodes.iter().enumerate() {
            match self.color_of(v) {
                Color::A => a.push(i),
                Color::B => b.push(i),
            }
        }
        (a, b)
    }

    /// Image of node `id` under the row/column transpose, which swaps the
    /// two sides of every cell.
    pub fn transpose_id(&self, id: usize) -> usize {
        let p = self.cell_of(id);
        let side = match p.side {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        };
        node_id(self.n, p.col, p.row, side, p.index)
    }

    pub fn transposed(&self) -> ChimeraGraph {
        let masked: BTreeSet<usize> = self.masked_nodes().into_iter().map(|v| self.transpose_id(v)).collect();
        ChimeraGraph::masked(self.n, &masked).expect("transpose of a valid graph is valid")
    }

    /// Index of the edge joining node ids `u` and `v`, if present.
    pub fn edge_index(&self, u: usize, v: usize) -> Option<usize> {
        let iu = self.index_of(u)?;
        let iv = self.index_of(v)?;
        self.adjacency[iu].iter().find(|&&(w, _)| w == iv).map(|&(_, e)| e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_and_edge_counts() {
        let g = build_chimera(1).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (8, 16));
        let g = build_chimera(2).unwrap();
        assert_eq!((g.node_count(), g.edge_count()), (32, 80));
        assert_eq!(build_chimera(12).unwrap().node_count(), 1152);
    }

    #[test]
    fn edge_formula_matches_construction() {
        for n in 1..=12usize {
            let g = build_chimera(n).unwrap();
            assert_eq!(g.node_count(), 8 * n * n);
            assert_eq!(g.edge_count(), 16 * n * n + 8 * n * (n - 1), "n = {n}");
        }
    }

    #[test]
    fn zero_grid_rejected() {
        assert!(matches!(build_chimera(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn edges_respect_cell_structure() {
        let g = build_chimera(3).unwrap();
        for &(u, v) in g.edges() {
            let (pu, pv) = (g.cell_of(u), g.cell_of(v));
            if (pu.row, pu.col) == (pv.row, pv.col) {
                assert_ne!(pu.side, pv.side);
            } else {
                assert_eq!((pu.side, pu.index), (pv.side, pv.index));
                let dist = pu.row.abs_diff(pv.row) + pu.col.abs_diff(pv.col);
                assert_eq!(dist, 1);
            }
            assert_ne!(g.color_of(u), g.color_of(v));
        }
    }

    #[test]
    fn node_id_layout() {
        let g = build_chimera(4).unwrap();
        let p = g.cell_of(node_id(4, 2, 3, Side::Right, 1));
        assert_eq!(
            p,
            CellPos {
                row: 2,
                col: 3,
                side: Side::Right,
                index: 1
            }
        );
        assert_eq!(node_id(4, 2, 3, Side::Right, 1), 8 * (4 * 2 + 3) + 5);
    }

    #[test]
    fn masked_graph_drops_incident_edges() {
        let masked: BTreeSet<usize> = [0, 12].into_iter().collect();
        let g = ChimeraGraph::masked(2, &masked).unwrap();
        assert_eq!(g.node_count(), 30);
        // node 0 has 4 intra + 1 vertical edge; node 12 (cell 1, right, 0) 4 intra + 1 horizontal
        assert_eq!(g.edge_count(), 80 - 10);
        assert!(g.edges().iter().all(|&(u, v)| u != 0 && v != 0 && u != 12 && v != 12));
        assert!(ChimeraGraph::masked(1, &[8].into_iter().collect()).is_err());
    }

    #[test]
    fn transpose_is_an_involution_on_edges() {
        let masked: BTreeSet<usize> = [3, 17, 40].into_iter().collect();
        let g = ChimeraGraph::masked(3, &masked).unwrap();
        let t = g.transposed();
        assert_eq!(t.edge_count(), g.edge_count());
        for &(u, v) in g.edges() {
            assert!(t.edge_index(g.transpose_id(u), g.transpose_id(v)).is_some());
        }
        assert_eq!(t.transposed(), g);
    }
}
