//! Oriented circuit graph: incidence matrix, loop matrix, Tellegen check.
//!
//! The incidence matrix `B` is branch-by-node with the reference node's
//! column dropped; row `l` holds +1 at the node branch `l` leaves and -1
//! where it enters. The loop matrix `A` collects the fundamental cycles of
//! a BFS spanning tree, one column per co-tree branch, oriented along that
//! branch. Both are exact integer matrices and satisfy `A^T B = 0`.

use crate::error::{Error, Result};
use crate::linalg::IntMat;
use crate::netlist::NetlistDoc;

#[derive(Debug, Clone)]
pub struct CircuitGraph {
    /// Branch count.
    pub b: usize,
    /// Node count minus one.
    pub n: usize,
    /// Independent loop count, `b - n`.
    pub m: usize,
    /// b x n incidence matrix.
    pub incidence: IntMat,
    /// b x m loop matrix (fundamental cycle basis).
    pub loops: IntMat,
    /// Branch indices of the BFS spanning tree, ascending.
    pub spanning_tree: Vec<usize>,
}

impl CircuitGraph {
    pub fn build(doc: &NetlistDoc) -> Result<CircuitGraph> {
        let b = doc.branch_count();
        let n = doc.node_count - 1;
        let tree = spanning_tree(doc)?;
        let m = b - n;
        if m == 0 {
            return Err(Error::Graph(
                "the graph has no loops (it is a tree); the dynamics are empty".to_string(),
            ));
        }
        let incidence = build_incidence_with_tree(doc, &tree);
        let loops = build_loops_from_tree(doc, &tree);
        debug_assert!(loops.transpose().mul(&incidence).is_zero());
        let mut spanning: Vec<usize> = (0..b).filter(|&l| tree.parent_edge_set[l]).collect();
        spanning.sort_unstable();
        Ok(CircuitGraph { b, n, m, incidence, loops, spanning_tree: spanning })
    }
}

/// Build the b x n incidence matrix (reference node column dropped).
pub fn build_incidence(doc: &NetlistDoc) -> Result<IntMat> {
    let tree = spanning_tree(doc)?;
    Ok(build_incidence_with_tree(doc, &tree))
}

/// Build a b x m loop matrix from the fundamental cycles of the BFS tree.
pub fn build_loop_matrix(doc: &NetlistDoc) -> Result<IntMat> {
    let tree = spanning_tree(doc)?;
    Ok(build_loops_from_tree(doc, &tree))
}

/// Tellegen orthogonality: `A^T B = 0` with complementary ranks.
pub fn check_tellegen(b_mat: &IntMat, a_mat: &IntMat) -> bool {
    if b_mat.nrows() != a_mat.nrows() {
        return false;
    }
    a_mat.transpose().mul(b_mat).is_zero()
        && b_mat.rank() + a_mat.rank() == b_mat.nrows()
}

struct SpanningTree {
    /// parent[v] = (parent node, branch index) for non-root visited nodes.
    parent: Vec<Option<(usize, usize)>>,
    /// Marks branches that are tree edges.
    parent_edge_set: Vec<bool>,
    depth: Vec<usize>,
}

/// BFS from node 1, expanding each node's branches in normalized order.
fn spanning_tree(doc: &NetlistDoc) -> Result<SpanningTree> {
    let nn = doc.node_count;
    let b = doc.branch_count();
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; nn + 1];
    let mut depth = vec![0usize; nn + 1];
    let mut visited = vec![false; nn + 1];
    let mut tree_edge = vec![false; b];
    let mut queue = std::collections::VecDeque::new();
    visited[1] = true;
    queue.push_back(1usize);
    while let Some(u) = queue.pop_front() {
        for (l, br) in doc.branches.iter().enumerate() {
            let other = if br.from_node == u {
                br.to_node
            } else if br.to_node == u {
                br.from_node
            } else {
                continue;
            };
            if !visited[other] {
                visited[other] = true;
                parent[other] = Some((u, l));
                depth[other] = depth[u] + 1;
                tree_edge[l] = true;
                queue.push_back(other);
            }
        }
    }
    if let Some(node) = (1..=nn).find(|&v| !visited[v]) {
        let incident = doc
            .branches
            .iter()
            .any(|br| br.from_node == node || br.to_node == node);
        return Err(Error::Graph(if incident {
            format!("graph is disconnected: node {node} is unreachable from node 1")
        } else {
            format!("isolated node {node} has no incident branches")
        }));
    }
    Ok(SpanningTree { parent, parent_edge_set: tree_edge, depth })
}

fn build_incidence_with_tree(doc: &NetlistDoc, _tree: &SpanningTree) -> IntMat {
    let b = doc.branch_count();
    let n = doc.node_count - 1;
    // column index for each non-reference node, ascending node order
    let mut col_of = vec![usize::MAX; doc.node_count + 1];
    let mut c = 0;
    for v in 1..=doc.node_count {
        if v != doc.reference_node {
            col_of[v] = c;
            c += 1;
        }
    }
    let mut mat = IntMat::zeros(b, n);
    for (l, br) in doc.branches.iter().enumerate() {
        if col_of[br.from_node] != usize::MAX {
            mat[(l, col_of[br.from_node])] = 1;
        }
        if col_of[br.to_node] != usize::MAX {
            mat[(l, col_of[br.to_node])] = -1;
        }
    }
    mat
}

fn build_loops_from_tree(doc: &NetlistDoc, tree: &SpanningTree) -> IntMat {
    let b = doc.branch_count();
    let cotree: Vec<usize> = (0..b).filter(|&l| !tree.parent_edge_set[l]).collect();
    let mut mat = IntMat::zeros(b, cotree.len());
    for (col, &l) in cotree.iter().enumerate() {
        let br = &doc.branches[l];
        mat[(l, col)] = 1;
        // close the cycle with the tree path from `to` back to `from`;
        // the `to` side is traversed child-to-parent along the cycle, the
        // `from` side parent-to-child
        let (mut u, mut v) = (br.from_node, br.to_node);
        while u != v {
            let (walk, side) = if tree.depth[u] >= tree.depth[v] {
                (&mut u, -1)
            } else {
                (&mut v, 1)
            };
            let (p, edge) = tree.parent[*walk].expect("non-root node has a parent");
            let e = &doc.branches[edge];
            let toward_root = if e.from_node == *walk { 1 } else { -1 };
            mat[(edge, col)] += toward_root * side;
            *walk = p;
        }
    }
    mat
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{parse_netlist, SIX_BRANCH_EXAMPLE};

    #[test]
    fn six_branch_incidence_matches_reference() {
        let doc = parse_netlist(SIX_BRANCH_EXAMPLE).unwrap();
        let g = CircuitGraph::build(&doc).unwrap();
        assert_eq!((g.b, g.n, g.m), (6, 4, 2));
        let expected = IntMat::from_rows(&[
            vec![1, -1, 0, 0],
            vec![0, 0, 0, 1],
            vec![0, 1, -1, 0],
            vec![0, 1, 0, -1],
            vec![-1, 0, 0, 0],
            vec![0, 0, 1, -1],
        ]);
        assert_eq!(g.incidence, expected);
        assert_eq!(g.incidence.rank(), 4);
        assert_eq!(g.loops.rank(), 2);
        assert!(check_tellegen(&g.incidence, &g.loops));
    }

    #[test]
    fn six_branch_loop_matrix_spans_reference_columns() {
        let doc = parse_netlist(SIX_BRANCH_EXAMPLE).unwrap();
        let g = CircuitGraph::build(&doc).unwrap();
        let reference = IntMat::from_rows(&[
            vec![1, 0],
            vec![1, 0],
            vec![0, 1],
            vec![1, -1],
            vec![1, 0],
            vec![0, 1],
        ]);
        assert!(crate::linalg::colspace_equal(&g.loops, &reference));
    }

    #[test]
    fn two_branch_loop() {
        let doc = parse_netlist(".nodes 2\n.ref 2\nR1 1 2 1.0\nR2 1 2 1.0\n").unwrap();
        let g = CircuitGraph::build(&doc).unwrap();
        assert_eq!(g.incidence, IntMat::from_rows(&[vec![1], vec![1]]));
        // single cycle, up to sign
        let a = g.loops.rows_vec();
        assert!(a == vec![vec![-1], vec![1]] || a == vec![vec![1], vec![-1]]);
        assert!(check_tellegen(&g.incidence, &g.loops));
    }

    #[test]
    fn incidence_rows_have_one_pair_of_signs() {
        let doc = parse_netlist(SIX_BRANCH_EXAMPLE).unwrap();
        let g = CircuitGraph::build(&doc).unwrap();
        for i in 0..g.b {
            let pos = g.incidence.row(i).iter().filter(|&&v| v == 1).count();
            let neg = g.incidence.row(i).iter().filter(|&&v| v == -1).count();
            assert!(pos <= 1 && neg <= 1);
        }
    }

    #[test]
    fn tellegen_fails_on_perturbed_loop_matrix() {
        let doc = parse_netlist(SIX_BRANCH_EXAMPLE).unwrap();
        let g = CircuitGraph::build(&doc).unwrap();
        let mut rows = g.loops.rows_vec();
        rows[0][0] = -rows[0][0];
        let perturbed = IntMat::from_rows(&rows);
        assert!(!check_tellegen(&g.incidence, &perturbed));
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let text = ".nodes 4\nR1 1 2 1.0\nR2 2 1 1.0\nR3 3 4 1.0\nR4 4 3 1.0\n";
        assert!(matches!(
            CircuitGraph::build(&parse_netlist(text).unwrap()),
            Err(Error::Graph(_))
        ));
    }

    #[test]
    fn tree_network_has_no_loops() {
        let text = ".nodes 3\nR1 1 2 1.0\nR2 2 3 1.0\n";
        assert!(CircuitGraph::build(&parse_netlist(text).unwrap()).is_err());
    }
}
