//! Tree structure of a substrate: tree checks, rooting and unique paths.

use std::collections::VecDeque;

use crate::model::{ModelError, Substrate};

/// Fails unless the underlying undirected graph is a tree.
pub fn check_tree(substrate: &Substrate) -> Result<(), ModelError> {
    let n = substrate.node_count();
    if n == 0 {
        return Err(ModelError::NotATree("empty substrate".into()));
    }
    let adj = substrate.undirected_neighbors();
    let undirected_edges: usize = adj.iter().map(Vec::len).sum::<usize>() / 2;
    if undirected_edges != n - 1 {
        return Err(ModelError::NotATree(format!(
            "{n} nodes but {undirected_edges} undirected edges"
        )));
    }
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    let mut reached = 1;
    while let Some(v) = stack.pop() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                reached += 1;
                stack.push(w);
            }
        }
    }
    if reached != n {
        return Err(ModelError::NotATree("disconnected".into()));
    }
    Ok(())
}

/// A substrate tree hung from a root. Children keep the order in which the
/// connecting edges first appear in the substrate's edge list.
#[derive(Debug, Clone)]
pub struct RootedTree {
    pub root: usize,
    pub parent: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    pub depth: Vec<usize>,
    /// Breadth-first order starting at the root.
    pub bfs_order: Vec<usize>,
}

impl RootedTree {
    pub fn new(substrate: &Substrate, root: usize) -> Result<Self, ModelError> {
        check_tree(substrate)?;
        let n = substrate.node_count();
        if root >= n {
            return Err(ModelError::UnknownNode(format!("#{root}")));
        }
        let adj = substrate.undirected_neighbors();
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut depth = vec![0; n];
        let mut bfs_order = Vec::with_capacity(n);
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(v) = queue.pop_front() {
            bfs_order.push(v);
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    parent[w] = Some(v);
                    depth[w] = depth[v] + 1;
                    children[v].push(w);
                    queue.push_back(w);
                }
            }
        }
        Ok(RootedTree {
            root,
            parent,
            children,
            depth,
            bfs_order,
        })
    }

    /// Children before parents.
    pub fn post_order(&self) -> Vec<usize> {
        let mut order = self.bfs_order.clone();
        order.reverse();
        order
    }

    pub fn is_leaf(&self, v: usize) -> bool {
        self.children[v].is_empty()
    }
}

/// Answers repeated unique-path queries on one substrate tree.
#[derive(Debug, Clone)]
pub struct TreePaths<'a> {
    substrate: &'a Substrate,
    tree: RootedTree,
}

impl<'a> TreePaths<'a> {
    pub fn new(substrate: &'a Substrate) -> Result<Self, ModelError> {
        let tree = RootedTree::new(substrate, 0)?;
        Ok(TreePaths { substrate, tree })
    }

    /// Nodes on the undirected tree path from `u` to `v`, both included.
    pub fn node_path(&self, u: usize, v: usize) -> Vec<usize> {
        let (mut a, mut b) = (u, v);
        let mut head = vec![a];
        let mut tail = vec![b];
        while self.tree.depth[a] > self.tree.depth[b] {
            a = self.tree.parent[a].unwrap();
            head.push(a);
        }
        while self.tree.depth[b] > self.tree.depth[a] {
            b = self.tree.parent[b].unwrap();
            tail.push(b);
        }
        while a != b {
            a = self.tree.parent[a].unwrap();
            b = self.tree.parent[b].unwrap();
            head.push(a);
            tail.push(b);
        }
        // both halves end at the meeting point
        tail.pop();
        head.extend(tail.into_iter().rev());
        head
    }

    /// Directed edge indices from `u` to `v`; empty when `u == v`. Fails when
    /// a required direction is missing from the substrate.
    pub fn path(&self, u: usize, v: usize) -> Result<Vec<usize>, ModelError> {
        let nodes = self.node_path(u, v);
        nodes
            .windows(2)
            .map(|w| {
                self.substrate.find_edge(w[0], w[1]).ok_or_else(|| {
                    ModelError::MissingEdge(
                        self.substrate.node_id(w[0]).to_string(),
                        self.substrate.node_id(w[1]).to_string(),
                    )
                })
            })
            .collect()
    }
}

/// The unique directed walk from `u` to `v` along the tree.
pub fn unique_tree_path(
    substrate: &Substrate,
    u: usize,
    v: usize,
) -> Result<Vec<usize>, ModelError> {
    if u >= substrate.node_count() || v >= substrate.node_count() {
        return Err(ModelError::UnknownNode(format!("#{}", u.max(v))));
    }
    TreePaths::new(substrate)?.path(u, v)
}
