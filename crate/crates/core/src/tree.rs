//! Finite scenario trees: conditional supports, arbitrage classifiers,
//! absolutely continuous martingale measures by LP, dynamic-programming
//! pricing and a brute-force super-hedging LP oracle.
//!
//! A node is an atom of the filtration at its depth. Transition
//! probabilities enter the pricing machinery in exactly one place: edges
//! with zero probability are kept in the tree but excluded from
//! conditional supports, so prices are measure-independent given the
//! supports.

use rand::Rng;

use crate::convex::{envelope_eval_sampled, SupportSet};
use crate::error::{Error, Result};
use crate::simplex::{LpBuilder, LpOutcome, Relation};

/// Tolerance for per-parent probability sums.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// Leaf-count limit for the brute-force LP.
pub const BRUTE_FORCE_LEAF_LIMIT: usize = 10_000;

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub parent: Option<usize>,
    pub depth: usize,
    /// Asset price at the node, non-negative.
    pub price: f64,
    /// Probability of the edge from the parent; 1 for the root.
    pub edge_prob: f64,
    children: Vec<usize>,
}

/// Finite filtered market. Nodes are indexed 0..len with the root at 0,
/// and every child index is larger than its parent's, so reverse index
/// order is a valid backward-induction order.
#[derive(Debug, Clone)]
pub struct ScenarioTree {
    nodes: Vec<TreeNode>,
    horizon: usize,
}

impl ScenarioTree {
    pub fn with_root(price: f64) -> Self {
        ScenarioTree {
            nodes: vec![TreeNode {
                parent: None,
                depth: 0,
                price,
                edge_prob: 1.0,
                children: Vec::new(),
            }],
            horizon: 0,
        }
    }

    pub fn add_child(&mut self, parent: usize, price: f64, prob: f64) -> Result<usize> {
        if parent >= self.nodes.len() {
            return Err(Error::InvalidTree(format!("no node {parent}")));
        }
        if !price.is_finite() || price < 0.0 {
            return Err(Error::InvalidTree(format!("price {price} must be >= 0")));
        }
        if !prob.is_finite() || prob < 0.0 {
            return Err(Error::InvalidTree(format!(
                "edge probability {prob} must be >= 0"
            )));
        }
        let depth = self.nodes[parent].depth + 1;
        let id = self.nodes.len();
        self.nodes.push(TreeNode {
            parent: Some(parent),
            depth,
            price,
            edge_prob: prob,
            children: Vec::new(),
        });
        self.nodes[parent].children.push(id);
        self.horizon = self.horizon.max(depth);
        Ok(id)
    }

    /// Structural checks: probabilities sum to one per parent, prices are
    /// admissible, and every leaf sits at the horizon.
    pub fn validate(&self) -> Result<()> {
        for (i, node) in self.nodes.iter().enumerate() {
            if !node.price.is_finite() || node.price < 0.0 {
                return Err(Error::InvalidTree(format!(
                    "node {i}: price {} must be >= 0",
                    node.price
                )));
            }
            if node.children.is_empty() {
                if node.depth != self.horizon {
                    return Err(Error::InvalidTree(format!(
                        "node {i} is a leaf at depth {} but the horizon is {}",
                        node.depth, self.horizon
                    )));
                }
            } else {
                let sum: f64 = node.children.iter().map(|&c| self.nodes[c].edge_prob).sum();
                if (sum - 1.0).abs() > PROB_SUM_TOL {
                    return Err(Error::InvalidTree(format!(
                        "node {i}: child probabilities sum to {sum}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn node(&self, id: usize) -> &TreeNode {
        &self.nodes[id]
    }

    pub fn children(&self, id: usize) -> &[usize] {
        &self.nodes[id].children
    }

    pub fn is_leaf(&self, id: usize) -> bool {
        self.nodes[id].children.is_empty()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = usize> {
        0..self.nodes.len()
    }

    pub fn leaves(&self) -> impl Iterator<Item = usize> + '_ {
        self.node_ids().filter(|&i| self.is_leaf(i))
    }

    fn charged_children(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        self.nodes[id]
            .children
            .iter()
            .copied()
            .filter(|&c| self.nodes[c].edge_prob > 0.0)
    }

    /// Non-recombining binomial tree induced by per-step multipliers,
    /// with equal edge probabilities. Degenerate steps (`k_d == k_u`)
    /// collapse to a single edge.
    pub fn binomial(s0: f64, k_down: &[f64], k_up: &[f64]) -> Result<Self> {
        if k_down.len() != k_up.len() {
            return Err(Error::InvalidTree(
                "multiplier lists differ in length".to_string(),
            ));
        }
        if k_up.iter().any(|k| k.is_infinite()) {
            return Err(Error::InvalidTree(
                "an infinite multiplier has no finite-tree counterpart".to_string(),
            ));
        }
        let mut tree = ScenarioTree::with_root(s0);
        let mut frontier = vec![0usize];
        for (kd, ku) in k_down.iter().zip(k_up) {
            let mut next = Vec::with_capacity(frontier.len() * 2);
            for &v in &frontier {
                let s = tree.node(v).price;
                if kd == ku {
                    next.push(tree.add_child(v, kd * s, 1.0)?);
                } else {
                    next.push(tree.add_child(v, kd * s, 0.5)?);
                    next.push(tree.add_child(v, ku * s, 0.5)?);
                }
            }
            frontier = next;
        }
        Ok(tree)
    }

    /// Child prices reached with strictly positive probability.
    pub fn conditional_support(&self, id: usize) -> Result<SupportSet> {
        if self.is_leaf(id) {
            return Err(Error::LeafNode(id));
        }
        let pts: Vec<f64> = self.charged_children(id).map(|c| self.nodes[c].price).collect();
        SupportSet::points(pts)
    }

    /// `(essinf, esssup)` of `h(S_{t+1})` conditional on the node.
    pub fn essential_extrema(&self, id: usize, h: impl Fn(f64) -> f64) -> Result<(f64, f64)> {
        let supp = self.conditional_support(id)?;
        let SupportSet::Points(pts) = &supp else {
            unreachable!()
        };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &z in pts {
            let v = h(z);
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok((lo, hi))
    }

    /// Essential supremum of `h` over a finite family of next-step
    /// variables: the supremum of `h` over the union of their conditional
    /// supports. Each family member maps a child node to its value.
    pub fn family_esssup(
        &self,
        id: usize,
        h: impl Fn(f64) -> f64,
        family: &[&dyn Fn(usize) -> f64],
    ) -> Result<f64> {
        if family.is_empty() {
            return Err(Error::EmptyFamily);
        }
        if self.is_leaf(id) {
            return Err(Error::LeafNode(id));
        }
        let mut sup = f64::NEG_INFINITY;
        for member in family {
            for c in self.charged_children(id) {
                sup = sup.max(h(member(c)));
            }
        }
        Ok(sup)
    }

    /// One-step no-arbitrage analysis at a node: returns a violating
    /// strategy if one exists. For d = 1 this is sign analysis on the
    /// support of the increment.
    pub fn na_violation_at(&self, id: usize) -> Result<Option<f64>> {
        let supp = self.conditional_support(id)?;
        let y = self.nodes[id].price;
        let (lo, hi) = (supp.min(), supp.max());
        Ok(if lo == hi && lo == y {
            None
        } else if lo < y && y < hi {
            None
        } else if y <= lo {
            Some(1.0)
        } else {
            Some(-1.0)
        })
    }

    /// Local absence of immediate profit: the node price lies in the
    /// convex hull of its conditional support.
    pub fn aip_holds_at(&self, id: usize) -> Result<bool> {
        let supp = self.conditional_support(id)?;
        Ok(supp.contains_hull(self.nodes[id].price))
    }

    /// NA over the whole tree, with a witness strategy when it fails.
    pub fn check_na(&self) -> Result<NaReport> {
        for id in self.node_ids() {
            if !self.is_leaf(id) {
                if let Some(theta) = self.na_violation_at(id)? {
                    return Ok(NaReport {
                        holds: false,
                        witness: Some(ArbitrageWitness { node: id, theta }),
                    });
                }
            }
        }
        Ok(NaReport {
            holds: true,
            witness: None,
        })
    }

    /// AIP over the whole tree, with the first offending node when it
    /// fails.
    pub fn check_aip(&self) -> Result<AipReport> {
        for id in self.node_ids() {
            if !self.is_leaf(id) && !self.aip_holds_at(id)? {
                return Ok(AipReport {
                    holds: false,
                    offending: Some(id),
                });
            }
        }
        Ok(AipReport {
            holds: true,
            offending: None,
        })
    }

    /// Searches for an absolutely continuous martingale measure on the
    /// subtree rooted at `root`: non-negative node weights, unit weight at
    /// `root`, consistency along edges and the martingale constraint at
    /// every charged non-leaf. Infeasibility is a result, not an error.
    pub fn find_acmm_at(&self, root: usize) -> Option<MartingaleMeasure> {
        let mut lp = LpBuilder::new();
        let mut var_of = vec![None; self.nodes.len()];
        let mut stack = vec![root];
        let mut order = Vec::new();
        while let Some(v) = stack.pop() {
            var_of[v] = Some(lp.nonneg(0.0));
            order.push(v);
            for c in self.charged_children(v) {
                stack.push(c);
            }
        }
        lp.constraint(&[(var_of[root].unwrap(), 1.0)], Relation::Eq, 1.0);
        for &v in &order {
            if self.is_leaf(v) {
                continue;
            }
            let rho_v = var_of[v].unwrap();
            let mut consistency = vec![(rho_v, 1.0)];
            let mut martingale = Vec::new();
            for c in self.charged_children(v) {
                let p = self.nodes[c].edge_prob;
                let rho_c = var_of[c].unwrap();
                consistency.push((rho_c, -p));
                martingale.push((rho_c, p * (self.nodes[c].price - self.nodes[v].price)));
            }
            lp.constraint(&consistency, Relation::Eq, 0.0);
            lp.constraint(&martingale, Relation::Eq, 0.0);
        }
        match lp.solve() {
            LpOutcome::Optimal { solution, .. } => {
                let mut node_weights = vec![0.0; self.nodes.len()];
                for (v, var) in var_of.iter().enumerate() {
                    if let Some(var) = var {
                        node_weights[v] = solution[var.index()].max(0.0);
                    }
                }
                Some(MartingaleMeasure { root, node_weights })
            }
            LpOutcome::Infeasible => None,
            LpOutcome::Unbounded => unreachable!("feasibility LP cannot be unbounded"),
        }
    }

    /// [`Self::find_acmm_at`] from the tree root.
    pub fn find_acmm(&self) -> Option<MartingaleMeasure> {
        self.find_acmm_at(0)
    }

    /// Backward-induction super-hedging prices of the claim
    /// `payoff(S_horizon)`: each node's value is the one-step infimum
    /// price of its children's values over the node's conditional
    /// support. `-inf` marks nodes from which the zero claim is
    /// super-replicable at a negative cost.
    pub fn multi_period_price(&self, payoff: impl Fn(f64) -> f64) -> PriceProcess {
        let n = self.nodes.len();
        let mut values = vec![0.0; n];
        let mut thetas = vec![0.0; n];
        for id in (0..n).rev() {
            if self.is_leaf(id) {
                values[id] = payoff(self.nodes[id].price);
            } else {
                let mut pts = Vec::new();
                let mut vals = Vec::new();
                for c in self.charged_children(id) {
                    pts.push(self.nodes[c].price);
                    vals.push(values[c]);
                }
                let one = envelope_eval_sampled(&pts, &vals, self.nodes[id].price);
                values[id] = one.price;
                thetas[id] = one.theta;
            }
        }
        PriceProcess { values, thetas }
    }

    /// Exact minimal super-replication price at `root` by a single LP
    /// over all path strategies:
    /// `min x  s.t.  x + sum theta_v dS >= payoff` on every charged leaf.
    ///
    /// This is the oracle the dynamic programming is checked against.
    pub fn brute_force_superhedge(
        &self,
        payoff: impl Fn(f64) -> f64,
        root: usize,
    ) -> Result<f64> {
        let mut leaves = Vec::new();
        let mut stack = vec![root];
        let mut count = 0usize;
        while let Some(v) = stack.pop() {
            if self.is_leaf(v) {
                count += 1;
                if count > BRUTE_FORCE_LEAF_LIMIT {
                    return Err(Error::LpTooLarge {
                        leaves: count,
                        limit: BRUTE_FORCE_LEAF_LIMIT,
                    });
                }
                leaves.push(v);
            } else {
                for c in self.charged_children(v) {
                    stack.push(c);
                }
            }
        }
        let mut lp = LpBuilder::new();
        let x = lp.free(1.0);
        let mut theta_of = vec![None; self.nodes.len()];
        for &leaf in &leaves {
            let mut terms = vec![(x, 1.0)];
            let mut w = leaf;
            while w != root {
                let v = self.nodes[w].parent.expect("walk stays inside the subtree");
                let theta = *theta_of[v].get_or_insert_with(|| lp.free(0.0));
                terms.push((theta, self.nodes[w].price - self.nodes[v].price));
                w = v;
            }
            lp.constraint(&terms, Relation::Ge, payoff(self.nodes[leaf].price));
        }
        match lp.solve() {
            LpOutcome::Optimal { objective, .. } => Ok(objective),
            LpOutcome::Unbounded => Ok(f64::NEG_INFINITY),
            LpOutcome::Infeasible => unreachable!("super-hedging LPs are always feasible"),
        }
    }

    /// Serialises to the line-based text format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, node) in self.nodes.iter().enumerate() {
            let parent = match node.parent {
                Some(p) => p.to_string(),
                None => "-".to_string(),
            };
            out.push_str(&format!(
                "node {i} parent={parent} t={} S={} p={}\n",
                node.depth, node.price, node.edge_prob
            ));
        }
        out
    }

    /// Parses the text format: one node per line,
    /// `node <id> parent=<id|-> t=<depth> S=<price> p=<edge-prob>`,
    /// ids consecutive from 0 with parents declared first. Blank lines
    /// and `#` comments are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut tree: Option<ScenarioTree> = None;
        for (lineno, raw) in text.lines().enumerate() {
            let line = lineno + 1;
            let parse_err = |msg: String| Error::TreeParse { line, msg };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut tokens = trimmed.split_whitespace();
            if tokens.next() != Some("node") {
                return Err(parse_err("expected `node <id> ...`".to_string()));
            }
            let id: usize = tokens
                .next()
                .and_then(|t| t.parse().ok())
                .ok_or_else(|| parse_err("missing node id".to_string()))?;
            let mut parent: Option<Option<usize>> = None;
            let mut depth: Option<usize> = None;
            let mut price: Option<f64> = None;
            let mut prob: Option<f64> = None;
            for tok in tokens {
                let (key, value) = tok
                    .split_once('=')
                    .ok_or_else(|| parse_err(format!("bad token `{tok}`")))?;
                match key {
                    "parent" => {
                        parent = Some(if value == "-" {
                            None
                        } else {
                            Some(value.parse().map_err(|_| {
                                parse_err(format!("bad parent `{value}`"))
                            })?)
                        });
                    }
                    "t" => {
                        depth = Some(
                            value
                                .parse()
                                .map_err(|_| parse_err(format!("bad depth `{value}`")))?,
                        );
                    }
                    "S" => {
                        price = Some(
                            value
                                .parse()
                                .map_err(|_| parse_err(format!("bad price `{value}`")))?,
                        );
                    }
                    "p" => {
                        prob = Some(
                            value
                                .parse()
                                .map_err(|_| parse_err(format!("bad probability `{value}`")))?,
                        );
                    }
                    _ => return Err(parse_err(format!("unknown key `{key}`"))),
                }
            }
            let parent = parent.ok_or_else(|| parse_err("missing parent=".to_string()))?;
            let depth = depth.ok_or_else(|| parse_err("missing t=".to_string()))?;
            let price = price.ok_or_else(|| parse_err("missing S=".to_string()))?;
            let prob = prob.ok_or_else(|| parse_err("missing p=".to_string()))?;
            match (parent, &mut tree) {
                (None, None) => {
                    if id != 0 || depth != 0 {
                        return Err(parse_err("root must be node 0 at t=0".to_string()));
                    }
                    if !price.is_finite() || price < 0.0 {
                        return Err(parse_err(format!("price {price} must be >= 0")));
                    }
                    tree = Some(ScenarioTree::with_root(price));
                }
                (None, Some(_)) => {
                    return Err(parse_err("second root".to_string()));
                }
                (Some(_), None) => {
                    return Err(parse_err("first node must be the root".to_string()));
                }
                (Some(p), Some(tree)) => {
                    if id != tree.len() {
                        return Err(parse_err(format!(
                            "expected node id {} (ids are consecutive, parents first)",
                            tree.len()
                        )));
                    }
                    if p >= tree.len() {
                        return Err(parse_err(format!("parent {p} not yet declared")));
                    }
                    let got = tree
                        .add_child(p, price, prob)
                        .map_err(|e| parse_err(e.to_string()))?;
                    if tree.node(got).depth != depth {
                        return Err(parse_err(format!(
                            "depth {depth} does not match parent depth + 1"
                        )));
                    }
                }
            }
        }
        let tree = tree.ok_or(Error::TreeParse {
            line: 0,
            msg: "empty tree file".to_string(),
        })?;
        tree.validate()?;
        Ok(tree)
    }
}

/// One-step strategy falsifying NA.
#[derive(Debug, Clone, Copy)]
pub struct ArbitrageWitness {
    pub node: usize,
    pub theta: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct NaReport {
    pub holds: bool,
    pub witness: Option<ArbitrageWitness>,
}

#[derive(Debug, Clone, Copy)]
pub struct AipReport {
    pub holds: bool,
    pub offending: Option<usize>,
}

/// Density process of an absolutely continuous martingale measure:
/// `node_weights[v] = E(dQ/dP | F_v)` on the subtree below `root`.
#[derive(Debug, Clone)]
pub struct MartingaleMeasure {
    pub root: usize,
    pub node_weights: Vec<f64>,
}

impl MartingaleMeasure {
    /// Checks the defining constraints to within `tol`.
    pub fn verify(&self, tree: &ScenarioTree, tol: f64) -> bool {
        if (self.node_weights[self.root] - 1.0).abs() > tol {
            return false;
        }
        let mut stack = vec![self.root];
        while let Some(v) = stack.pop() {
            let rho_v = self.node_weights[v];
            if rho_v < -tol {
                return false;
            }
            if tree.is_leaf(v) {
                continue;
            }
            let mut mass = 0.0;
            let mut drift = 0.0;
            for c in tree.children(v) {
                let p = tree.node(*c).edge_prob;
                if p == 0.0 {
                    continue;
                }
                let rho_c = self.node_weights[*c];
                mass += p * rho_c;
                drift += p * rho_c * (tree.node(*c).price - tree.node(v).price);
                stack.push(*c);
            }
            if (mass - rho_v).abs() > tol || drift.abs() > tol {
                return false;
            }
        }
        true
    }
}

/// Super-hedging price process: per-node infimum cost and hedge.
#[derive(Debug, Clone)]
pub struct PriceProcess {
    pub values: Vec<f64>,
    pub thetas: Vec<f64>,
}

impl PriceProcess {
    pub fn root_price(&self) -> f64 {
        self.values[0]
    }
}

/// Shape of the randomly generated test trees.
#[derive(Debug, Clone)]
pub struct RandomTreeConfig {
    pub max_depth: usize,
    pub max_branching: usize,
    /// Chance of zeroing one edge probability at a node with >= 2 children.
    pub zero_prob_edge: f64,
    /// Chance of pinning one child price to the parent price exactly.
    pub boundary_child: f64,
    /// Multiplicative price factor range for children.
    pub factor_low: f64,
    pub factor_high: f64,
}

impl Default for RandomTreeConfig {
    fn default() -> Self {
        RandomTreeConfig {
            max_depth: 5,
            max_branching: 4,
            zero_prob_edge: 0.15,
            boundary_child: 0.2,
            factor_low: 0.6,
            factor_high: 1.5,
        }
    }
}

/// Random scenario tree for oracle cross-checks. The factor range strays
/// on both sides of 1, so AIP holds on some trees and fails on others,
/// and pinned children exercise the boundary cases.
pub fn random_tree(rng: &mut impl Rng, cfg: &RandomTreeConfig) -> ScenarioTree {
    let depth = rng.gen_range(1..=cfg.max_depth.max(1));
    let mut tree = ScenarioTree::with_root(100.0 * rng.gen_range(0.5..2.0));
    let mut frontier = vec![0usize];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &v in &frontier {
            let k = rng.gen_range(1..=cfg.max_branching.max(1));
            let mut probs: Vec<f64> = (0..k).map(|_| rng.gen_range(0.05..1.0)).collect();
            if k >= 2 && rng.gen_bool(cfg.zero_prob_edge) {
                probs[rng.gen_range(0..k)] = 0.0;
            }
            let total: f64 = probs.iter().sum();
            for p in probs.iter_mut() {
                *p /= total;
            }
            let head: f64 = probs[..k - 1].iter().sum();
            probs[k - 1] = (1.0 - head).max(0.0);
            let parent_price = tree.node(v).price;
            let pin = rng.gen_bool(cfg.boundary_child);
            let pin_idx = rng.gen_range(0..k);
            for (i, &p) in probs.iter().enumerate() {
                let price = if pin && i == pin_idx {
                    parent_price
                } else {
                    parent_price * rng.gen_range(cfg.factor_low..cfg.factor_high)
                };
                next.push(tree.add_child(v, price, p).expect("valid child"));
            }
        }
        frontier = next;
    }
    tree
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::convex::one_step_price_convex;
    use crate::payoff::PiecewisePayoff;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-9
    }

    fn one_step(prices_probs: &[(f64, f64)], root: f64) -> ScenarioTree {
        let mut t = ScenarioTree::with_root(root);
        for &(s, p) in prices_probs {
            t.add_child(0, s, p).unwrap();
        }
        t.validate().unwrap();
        t
    }

    #[test]
    fn conditional_support_excludes_zero_probability_branches() {
        let t = one_step(&[(1.0, 0.5), (3.0, 0.0), (5.0, 0.5)], 2.0);
        assert_eq!(
            t.conditional_support(0).unwrap(),
            SupportSet::points(vec![1.0, 5.0]).unwrap()
        );

        let t = one_step(&[(1.0, 0.25), (3.0, 0.5), (5.0, 0.25)], 2.0);
        assert_eq!(
            t.conditional_support(0).unwrap(),
            SupportSet::points(vec![1.0, 3.0, 5.0]).unwrap()
        );

        let t = one_step(&[(4.0, 1.0)], 2.0);
        assert_eq!(t.conditional_support(0).unwrap(), SupportSet::singleton(4.0));
        assert!(matches!(
            t.conditional_support(1),
            Err(Error::LeafNode(1))
        ));
    }

    #[test]
    fn essential_extrema_over_supports() {
        let t = one_step(&[(1.0, 0.25), (3.0, 0.5), (5.0, 0.25)], 2.0);
        assert_eq!(t.essential_extrema(0, |x| x).unwrap(), (1.0, 5.0));
        let (lo, hi) = t.essential_extrema(0, |x| -x).unwrap();
        assert_eq!((lo, hi), (-5.0, -1.0));
        assert_eq!(
            t.essential_extrema(0, |x| (x - 2.0).max(0.0)).unwrap(),
            (0.0, 3.0)
        );
    }

    #[test]
    fn family_esssup_unions_supports() {
        let t = one_step(&[(1.0, 0.25), (3.0, 0.5), (5.0, 0.25)], 2.0);
        let price = |c: usize| t.node(c).price;
        let neg_price = |c: usize| -t.node(c).price;
        let singleton: Vec<&dyn Fn(usize) -> f64> = vec![&price];
        assert_eq!(t.family_esssup(0, |x| x, &singleton).unwrap(), 5.0);

        let pair: Vec<&dyn Fn(usize) -> f64> = vec![&price, &neg_price];
        assert_eq!(t.family_esssup(0, |x| x, &pair).unwrap(), 5.0);
        assert_eq!(t.family_esssup(0, |_| 7.0, &pair).unwrap(), 7.0);
        assert!(matches!(
            t.family_esssup(0, |x| x, &[]),
            Err(Error::EmptyFamily)
        ));
    }

    #[test]
    fn na_and_aip_classifiers() {
        // Interior: both hold.
        let t = one_step(&[(80.0, 0.5), (120.0, 0.5)], 100.0);
        assert!(t.check_na().unwrap().holds);
        assert!(t.check_aip().unwrap().holds);

        // Boundary: AIP holds but NA fails with a buy-and-hold witness.
        let t = one_step(&[(100.0, 0.5), (200.0, 0.5)], 100.0);
        let na = t.check_na().unwrap();
        assert!(!na.holds);
        let w = na.witness.unwrap();
        assert_eq!(w.node, 0);
        assert_eq!(w.theta, 1.0);
        assert!(t.check_aip().unwrap().holds);

        // Price below the support: an immediate profit.
        let t = one_step(&[(80.0, 0.5), (120.0, 0.5)], 70.0);
        assert!(!t.check_aip().unwrap().holds);
        assert_eq!(t.check_aip().unwrap().offending, Some(0));
        assert!(!t.check_na().unwrap().holds);

        // Deterministic step: NA holds.
        let t = one_step(&[(100.0, 1.0)], 100.0);
        assert!(t.check_na().unwrap().holds);
    }

    #[test]
    fn acmm_search() {
        let t = one_step(&[(80.0, 0.5), (120.0, 0.5)], 100.0);
        let q = t.find_acmm().unwrap();
        assert!(q.verify(&t, 1e-9));
        // 80 q + 120 (1-q) = 100 forces equal conditional weights.
        assert!(close(q.node_weights[1], 1.0));
        assert!(close(q.node_weights[2], 1.0));

        // Boundary case: all mass on the stagnating child; absolutely
        // continuous but not equivalent.
        let t = one_step(&[(100.0, 0.5), (200.0, 0.5)], 100.0);
        let q = t.find_acmm().unwrap();
        assert!(q.verify(&t, 1e-9));
        assert!(close(q.node_weights[1], 2.0));
        assert!(close(q.node_weights[2], 0.0));

        // No convex combination of {80, 120} equals 70.
        let t = one_step(&[(80.0, 0.5), (120.0, 0.5)], 70.0);
        assert!(t.find_acmm().is_none());
    }

    #[test]
    fn multi_period_pricing_examples() {
        // Deterministic chain: the price is the leaf payoff.
        let mut t = ScenarioTree::with_root(100.0);
        let a = t.add_child(0, 100.0, 1.0).unwrap();
        t.add_child(a, 100.0, 1.0).unwrap();
        t.validate().unwrap();
        let call = PiecewisePayoff::call(90.0);
        let pp = t.multi_period_price(|s| call.value(s));
        assert!(close(pp.root_price(), 10.0));

        // Two-step binomial, the worked 100/3 example.
        let t = ScenarioTree::binomial(100.0, &[0.5, 0.5], &[2.0, 2.0]).unwrap();
        t.validate().unwrap();
        let call = PiecewisePayoff::call(100.0);
        let pp = t.multi_period_price(|s| call.value(s));
        assert!(close(pp.root_price(), 100.0 / 3.0));
        assert!(close(pp.thetas[0], 2.0 / 3.0));

        // AIP failure at the root with a bounded payoff: minus infinity.
        let t = one_step(&[(80.0, 0.5), (120.0, 0.5)], 70.0);
        let pp = t.multi_period_price(|_| 1.0);
        assert_eq!(pp.root_price(), f64::NEG_INFINITY);
    }

    #[test]
    fn brute_force_matches_one_step_formula() {
        let t = one_step(&[(80.0, 0.5), (120.0, 0.5)], 100.0);
        let call = PiecewisePayoff::call(100.0);
        let lp = t.brute_force_superhedge(|s| call.value(s), 0).unwrap();
        let direct = one_step_price_convex(&call, 100.0, 80.0, 120.0).unwrap();
        assert!(close(lp, direct.price));

        // Zero payoff under AIP prices to zero.
        let zero = t.brute_force_superhedge(|_| 0.0, 0).unwrap();
        assert!(close(zero, 0.0));

        // Unbounded when AIP fails.
        let t = one_step(&[(80.0, 0.5), (120.0, 0.5)], 70.0);
        assert_eq!(
            t.brute_force_superhedge(|_| 0.0, 0).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn text_round_trip_and_errors() {
        let t = ScenarioTree::binomial(100.0, &[0.5], &[2.0]).unwrap();
        let text = t.to_text();
        let back = ScenarioTree::from_text(&text).unwrap();
        assert_eq!(back.len(), t.len());
        assert_eq!(back.node(1).price, 50.0);

        let bad = "node 0 parent=- t=0 S=100 p=1\nnode 1 parent=0 t=1 S=-5 p=1\n";
        match ScenarioTree::from_text(bad) {
            Err(Error::TreeParse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }

        let bad_probs = "node 0 parent=- t=0 S=100 p=1\n\
                         node 1 parent=0 t=1 S=80 p=0.4\n\
                         node 2 parent=0 t=1 S=120 p=0.4\n";
        assert!(matches!(
            ScenarioTree::from_text(bad_probs),
            Err(Error::InvalidTree(_))
        ));

        // Leaves off the horizon are rejected.
        let mut t = ScenarioTree::with_root(100.0);
        let a = t.add_child(0, 90.0, 0.5).unwrap();
        t.add_child(0, 110.0, 0.5).unwrap();
        t.add_child(a, 100.0, 1.0).unwrap();
        assert!(t.validate().is_err());
    }
}
