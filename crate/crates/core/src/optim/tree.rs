use std::cmp::Ordering;

use super::PlanError;

/// One information state. The root carries no demand; a node at depth
/// `d ≥ 1` carries the demand realized in relative period `d - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub depth: usize,
    pub probability: f64,
    /// Per retail edge; empty at the root.
    pub demand: Vec<f64>,
    pub children: Vec<usize>,
}

/// Scenario tree over a planning horizon of `stages` periods.
///
/// Decisions for period `τ` live on the depth-`τ` node and are shared by every
/// scenario through it, which is the non-anticipativity condition. Paths with
/// equal prefixes share nodes; siblings are ordered by demand so the node
/// layout does not depend on the order scenarios were supplied in.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioTree {
    nodes: Vec<TreeNode>,
    stages: usize,
    n_retail: usize,
}

fn cmp_demand(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

impl ScenarioTree {
    /// Build from scenario paths `[scenario][period][retail edge]` with
    /// probabilities that are normalized to sum to one.
    pub fn from_paths(paths: &[Vec<Vec<f64>>], probabilities: &[f64]) -> Result<Self, PlanError> {
        let bad = |m: &str| Err(PlanError::InvalidTree(m.to_owned()));
        if paths.is_empty() {
            return bad("no scenarios");
        }
        if paths.len() != probabilities.len() {
            return bad("one probability per scenario required");
        }
        let stages = paths[0].len();
        if stages == 0 {
            return bad("scenarios must cover at least one period");
        }
        let n_retail = paths[0][0].len();
        for p in paths {
            if p.len() != stages || p.iter().any(|d| d.len() != n_retail) {
                return bad("scenarios must share shape");
            }
            if p.iter().flatten().any(|d| !(d.is_finite() && *d >= 0.0)) {
                return bad("demand must be finite and non-negative");
            }
        }
        if probabilities.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return bad("probabilities must be non-negative");
        }
        let total: f64 = probabilities.iter().sum();
        if total <= 0.0 {
            return bad("probabilities sum to zero");
        }
        let mut tree = ScenarioTree {
            nodes: vec![TreeNode {
                parent: None,
                depth: 0,
                probability: 1.0,
                demand: Vec::new(),
                children: Vec::new(),
            }],
            stages,
            n_retail,
        };
        let members: Vec<usize> = (0..paths.len()).collect();
        tree.expand(0, &members, paths, probabilities, total);
        Ok(tree)
    }

    fn expand(&mut self, node: usize, members: &[usize], paths: &[Vec<Vec<f64>>], probs: &[f64], total: f64) {
        let depth = self.nodes[node].depth;
        if depth == self.stages {
            return;
        }
        let mut sorted = members.to_vec();
        sorted.sort_by(|&a, &b| cmp_demand(&paths[a][depth], &paths[b][depth]));
        let mut groups: Vec<Vec<usize>> = Vec::new();
        for s in sorted {
            match groups.last_mut() {
                Some(g) if cmp_demand(&paths[g[0]][depth], &paths[s][depth]).is_eq() => g.push(s),
                _ => groups.push(vec![s]),
            }
        }
        for group in groups {
            let probability = group.iter().map(|&s| probs[s]).sum::<f64>() / total;
            let child = self.nodes.len();
            self.nodes.push(TreeNode {
                parent: Some(node),
                depth: depth + 1,
                probability,
                demand: paths[group[0]][depth].clone(),
                children: Vec::new(),
            });
            self.nodes[node].children.push(child);
            self.expand(child, &group, paths, probs, total);
        }
    }

    pub fn single_path(path: Vec<Vec<f64>>) -> Result<Self, PlanError> {
        Self::from_paths(&[path], &[1.0])
    }

    /// Sample a tree node by node: every node at depth `τ` gets
    /// `branching[τ]` children (1 past the end of `branching`), each drawing
    /// period-`τ` demand from `draw(τ, edge)`. Equal-probability scenarios.
    pub fn sample(
        stages: usize,
        n_retail: usize,
        branching: &[usize],
        mut draw: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self, PlanError> {
        if branching.contains(&0) {
            return Err(PlanError::InvalidTree("zero branching".into()));
        }
        let mut paths: Vec<Vec<Vec<f64>>> = vec![Vec::new()];
        for tau in 0..stages {
            let b = branching.get(tau).copied().unwrap_or(1);
            let mut next = Vec::with_capacity(paths.len() * b);
            for prefix in &paths {
                for _ in 0..b {
                    let mut p = prefix.clone();
                    p.push((0..n_retail).map(|k| draw(tau, k)).collect());
                    next.push(p);
                }
            }
            paths = next;
        }
        let n = paths.len();
        Self::from_paths(&paths, &vec![1.0; n])
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &TreeNode {
        &self.nodes[i]
    }

    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn n_retail(&self) -> usize {
        self.n_retail
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].children.is_empty())
            .collect()
    }

    pub fn num_scenarios(&self) -> usize {
        self.leaves().len()
    }

    /// Node ids from the root down to `node`, indexed by depth.
    pub fn lineage(&self, node: usize) -> Vec<usize> {
        let mut out = vec![node];
        let mut cur = node;
        while let Some(p) = self.nodes[cur].parent {
            out.push(p);
            cur = p;
        }
        out.reverse();
        out
    }

    /// Scenarios (leaf ids) that must share the decision taken at each node.
    pub fn nonanticipativity_groups(&self) -> Vec<Vec<usize>> {
        let leaves = self.leaves();
        (0..self.nodes.len())
            .map(|n| {
                leaves
                    .iter()
                    .copied()
                    .filter(|&l| self.lineage(l).contains(&n))
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|x| vec![*x]).collect()
    }

    #[test]
    fn probabilities_sum_at_every_node() {
        let tree = ScenarioTree::from_paths(
            &[p(&[1., 2., 3.]), p(&[1., 2., 4.]), p(&[5., 2., 3.])],
            &[1.0, 1.0, 2.0],
        )
        .unwrap();
        for n in tree.nodes() {
            if !n.children.is_empty() {
                let s: f64 = n.children.iter().map(|&c| tree.node(c).probability).sum();
                assert!((s - n.probability).abs() < 1e-12);
            }
        }
        assert_eq!(tree.num_scenarios(), 3);
        assert_eq!(tree.node(0).children.len(), 2);
        assert_eq!(tree.nonanticipativity_groups()[0].len(), 3);
    }

    #[test]
    fn identical_paths_merge_and_order_is_canonical() {
        let a = ScenarioTree::from_paths(&[p(&[3., 1.]), p(&[3., 1.])], &[0.5, 0.5]).unwrap();
        assert_eq!(a, ScenarioTree::single_path(p(&[3., 1.])).unwrap());
        let x = ScenarioTree::from_paths(&[p(&[1., 9.]), p(&[2., 8.])], &[0.3, 0.7]).unwrap();
        let y = ScenarioTree::from_paths(&[p(&[2., 8.]), p(&[1., 9.])], &[0.7, 0.3]).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn sampled_shape() {
        let mut c = 0.0;
        let tree = ScenarioTree::sample(5, 1, &[3, 3, 3], |_, _| {
            c += 1.0;
            c
        })
        .unwrap();
        assert_eq!(tree.num_scenarios(), 27);
        assert_eq!(tree.nodes().len(), 1 + 3 + 9 + 27 + 27 + 27);
    }

    #[test]
    fn invalid_trees() {
        assert!(ScenarioTree::from_paths(&[], &[]).is_err());
        assert!(ScenarioTree::from_paths(&[vec![]], &[1.0]).is_err());
        assert!(ScenarioTree::from_paths(&[p(&[1.0])], &[0.0]).is_err());
        assert!(ScenarioTree::sample(2, 1, &[0], |_, _| 1.0).is_err());
    }
}
