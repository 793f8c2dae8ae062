//! Resource graph of a type-A equilibrium and the quantities derived from it.
//!
//! Nodes are resources. A resource is *high* (in V1) when its equilibrium
//! congestion exceeds `psi`, otherwise *terminal* (V2). Every single-resource
//! player sitting on a high resource `x` contributes one edge `x -> y` per
//! resource `y != x` of its optimal strategy, so parallel edges are kept.
//!
//! Every certification here is exact integer arithmetic on the graph itself.
//! The condensation DAG is produced for inspection only.

use std::collections::{BTreeMap, VecDeque};

use petgraph::algo::{condensation, is_cyclic_directed};
use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{delay, Cost, ResourceId};
use crate::transform::TwoStrategyGame;

#[derive(Clone, Debug)]
pub struct ResourceGraph {
    degree: u32,
    psi: u32,
    c_star: u32,
    congestion: Vec<u32>,
    children: Vec<Vec<ResourceId>>,
}

/// One line of the expansion ledger.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCheck {
    pub node: ResourceId,
    pub congestion: u32,
    pub lhs: Cost,
    /// `rhs = rhs_num / rhs_den`; zero when `C_x <= C*`.
    pub rhs_num: Cost,
    pub rhs_den: Cost,
    pub rhs: f64,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescendantCheck {
    pub root: ResourceId,
    pub congestion: u32,
    pub v2_count: usize,
    pub lhs: Cost,
    pub rhs_num: Cost,
    pub rhs_den: Cost,
    pub holds: bool,
    /// `v2_count <= |R| - 1`.
    pub within_resource_count: bool,
}

/// Condensation of a resource graph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionDag {
    /// Member resources of each strongly connected component.
    pub components: Vec<Vec<ResourceId>>,
    /// Deduplicated edges between components.
    pub edges: Vec<(usize, usize)>,
}

impl ExpansionDag {
    pub fn is_acyclic(&self) -> bool {
        let mut g = DiGraph::<(), ()>::new();
        let nodes: Vec<_> = (0..self.components.len()).map(|_| g.add_node(())).collect();
        for &(a, b) in &self.edges {
            g.add_edge(nodes[a], nodes[b], ());
        }
        !is_cyclic_directed(&g)
    }
}

impl ResourceGraph {
    /// Builds the graph from `(eq, opt)` strategy pairs with a fixed
    /// equilibrium congestion vector.
    ///
    /// Fails when a player with two or more equilibrium resources touches a
    /// high resource.
    pub fn from_assignments<'a, I>(
        degree: u32,
        congestion: Vec<u32>,
        players: I,
        psi: u32,
        c_star: u32,
    ) -> Result<Self>
    where
        I: IntoIterator<Item = (&'a [ResourceId], &'a [ResourceId])>,
    {
        let mut children = vec![Vec::new(); congestion.len()];
        for (i, (eq, opt)) in players.into_iter().enumerate() {
            let high: Vec<_> = eq.iter().filter(|&&r| congestion[r] > psi).collect();
            if high.is_empty() {
                continue;
            }
            if eq.len() > 1 {
                return Err(Error::ExpansionPrecondition(format!(
                    "player {i} uses {} resources including resource {} with congestion {} > psi = {psi}",
                    eq.len(),
                    high[0],
                    congestion[*high[0]]
                )));
            }
            let x = eq[0];
            children[x].extend(opt.iter().copied().filter(|&y| y != x));
        }
        for list in &mut children {
            list.sort_unstable();
        }
        Ok(ResourceGraph {
            degree,
            psi,
            c_star,
            congestion,
            children,
        })
    }

    /// Graph of a two-strategy game under the given threshold and optimum.
    pub fn build(tsg: &TwoStrategyGame, psi: u32, c_star: u32) -> Result<Self> {
        let players: Vec<_> = tsg
            .players()
            .map(|(_, p)| (p.eq.as_slice(), p.opt.as_slice()))
            .collect();
        Self::from_assignments(tsg.degree(), tsg.congestion().to_vec(), players, psi, c_star)
    }

    pub fn psi(&self) -> u32 {
        self.psi
    }

    pub fn c_star(&self) -> u32 {
        self.c_star
    }

    pub fn num_nodes(&self) -> usize {
        self.congestion.len()
    }

    pub fn congestion(&self, r: ResourceId) -> u32 {
        self.congestion[r]
    }

    pub fn is_high(&self, r: ResourceId) -> bool {
        self.congestion[r] > self.psi
    }

    /// V1, ascending.
    pub fn high_nodes(&self) -> Vec<ResourceId> {
        (0..self.num_nodes()).filter(|&r| self.is_high(r)).collect()
    }

    /// V2, ascending.
    pub fn terminal_nodes(&self) -> Vec<ResourceId> {
        (0..self.num_nodes()).filter(|&r| !self.is_high(r)).collect()
    }

    /// Children of `x` with multiplicity, sorted.
    pub fn children(&self, x: ResourceId) -> &[ResourceId] {
        &self.children[x]
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(Vec::len).sum()
    }

    /// Number of distinct parents of each node.
    pub fn parent_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_nodes()];
        for list in &self.children {
            let mut prev = None;
            for &y in list {
                if prev != Some(y) {
                    counts[y] += 1;
                }
                prev = Some(y);
            }
        }
        counts
    }

    fn multiplicities(&self, x: ResourceId) -> BTreeMap<ResourceId, u32> {
        let mut m = BTreeMap::new();
        for &y in &self.children[x] {
            *m.entry(y).or_insert(0) += 1;
        }
        m
    }

    /// `(C_x - C*) C_x^M / (2 C*)` as an exact fraction, zero when `C_x <= C*`.
    fn expansion_rhs(&self, cx: u32) -> Result<(Cost, Cost)> {
        let den = 2 * Cost::from(self.c_star.max(1));
        let surplus = cx.saturating_sub(self.c_star);
        let num = Cost::from(surplus)
            .checked_mul(delay(u64::from(cx), self.degree)?)
            .ok_or(Error::Overflow("expansion bound"))?;
        Ok((num, den))
    }

    fn holds(lhs: Cost, num: Cost, den: Cost) -> Result<bool> {
        Ok(lhs
            .checked_mul(den)
            .ok_or(Error::Overflow("expansion comparison"))?
            >= num)
    }

    /// Checks the expansion inequality at high node `x`:
    /// `sum_{y in Ch(x), high} C_y^M + sum_{y in Ch(x), terminal} psi^M >= (C_x - C*) C_x^M / (2 C*)`,
    /// each distinct child counted as often as it occurs, but at most `C*` times.
    pub fn check_expansion(&self, x: ResourceId) -> Result<ExpansionCheck> {
        if x >= self.num_nodes() || !self.is_high(x) {
            return Err(Error::ExpansionPrecondition(format!(
                "resource {x} is not a high node"
            )));
        }
        let psi_term = delay(u64::from(self.psi), self.degree)?;
        let mut lhs: Cost = 0;
        for (y, mult) in self.multiplicities(x) {
            let weight = if self.is_high(y) {
                delay(u64::from(self.congestion[y]), self.degree)?
            } else {
                psi_term
            };
            let times = Cost::from(mult.min(self.c_star));
            lhs = weight
                .checked_mul(times)
                .and_then(|v| v.checked_add(lhs))
                .ok_or(Error::Overflow("expansion sum"))?;
        }
        let cx = self.congestion[x];
        let (rhs_num, rhs_den) = self.expansion_rhs(cx)?;
        Ok(ExpansionCheck {
            node: x,
            congestion: cx,
            lhs,
            rhs_num,
            rhs_den,
            rhs: rhs_num as f64 / rhs_den as f64,
            holds: Self::holds(lhs, rhs_num, rhs_den)?,
        })
    }

    /// [`check_expansion`](Self::check_expansion) at every high node.
    pub fn expansion_ledger(&self) -> Result<Vec<ExpansionCheck>> {
        self.high_nodes()
            .into_iter()
            .map(|x| self.check_expansion(x))
            .collect()
    }

    /// Strongly connected components collapsed into single nodes.
    pub fn build_expansion_dag(&self) -> ExpansionDag {
        let mut g = DiGraph::<ResourceId, ()>::new();
        let nodes: Vec<_> = (0..self.num_nodes()).map(|r| g.add_node(r)).collect();
        for (x, list) in self.children.iter().enumerate() {
            for &y in list {
                g.add_edge(nodes[x], nodes[y], ());
            }
        }
        let dag = condensation(g, true);
        let mut components: Vec<Vec<ResourceId>> = dag
            .node_indices()
            .map(|i| {
                let mut members = dag[i].clone();
                members.sort_unstable();
                members
            })
            .collect();
        // order components by smallest member for stable output
        let mut order: Vec<usize> = (0..components.len()).collect();
        order.sort_by_key(|&i| components[i][0]);
        let mut rank = vec![0; components.len()];
        for (new, &old) in order.iter().enumerate() {
            rank[old] = new;
        }
        let mut edges: Vec<(usize, usize)> = dag
            .edge_indices()
            .filter_map(|e| dag.edge_endpoints(e))
            .map(|(a, b)| (rank[a.index()], rank[b.index()]))
            .collect();
        edges.sort_unstable();
        edges.dedup();
        components = order
            .into_iter()
            .map(|i| std::mem::take(&mut components[i]))
            .collect();
        ExpansionDag { components, edges }
    }

    /// Terminal nodes reachable from `root`, each counted once.
    pub fn reachable_terminals(&self, root: ResourceId) -> Vec<ResourceId> {
        let mut seen = vec![false; self.num_nodes()];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        let mut found = Vec::new();
        while let Some(x) = queue.pop_front() {
            for &y in &self.children[x] {
                if !seen[y] {
                    seen[y] = true;
                    if self.is_high(y) {
                        queue.push_back(y);
                    } else {
                        found.push(y);
                    }
                }
            }
        }
        found.sort_unstable();
        found
    }

    /// Certifies `v2 * C* * psi^M >= (C - C*) C^M / (2 C*)` for the terminal
    /// descendants of high node `root`, with `C` its congestion.
    pub fn descendant_count_check(&self, root: ResourceId) -> Result<DescendantCheck> {
        if root >= self.num_nodes() || !self.is_high(root) {
            return Err(Error::ExpansionPrecondition(format!(
                "root {root} is not a high node"
            )));
        }
        let v2_count = self.reachable_terminals(root).len();
        let lhs = (v2_count as Cost)
            .checked_mul(Cost::from(self.c_star.max(1)))
            .and_then(|v| v.checked_mul(delay(u64::from(self.psi), self.degree).ok()?))
            .ok_or(Error::Overflow("descendant bound"))?;
        let c = self.congestion[root];
        let (rhs_num, rhs_den) = self.expansion_rhs(c)?;
        Ok(DescendantCheck {
            root,
            congestion: c,
            v2_count,
            lhs,
            rhs_num,
            rhs_den,
            holds: Self::holds(lhs, rhs_num, rhs_den)?,
            within_resource_count: v2_count < self.num_nodes(),
        })
    }

    /// High node with the largest congestion, lowest id on ties.
    pub fn max_congestion_root(&self) -> Option<ResourceId> {
        self.high_nodes()
            .into_iter()
            .min_by_key(|&r| (std::cmp::Reverse(self.congestion[r]), r))
    }
}

/// Every expansion check on one graph.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    pub psi: u32,
    #[serde(rename = "C_star")]
    pub c_star: u32,
    pub high_nodes: Vec<ResourceId>,
    pub edges: usize,
    pub expansion: Vec<ExpansionCheck>,
    /// At the most congested high node, if any.
    pub descendant: Option<DescendantCheck>,
    pub dag: ExpansionDag,
    pub dag_acyclic: bool,
    pub pass: bool,
}

impl ResourceGraph {
    pub fn report(&self) -> Result<ExpansionReport> {
        let expansion = self.expansion_ledger()?;
        let descendant = self
            .max_congestion_root()
            .map(|root| self.descendant_count_check(root))
            .transpose()?;
        let dag = self.build_expansion_dag();
        let pass = expansion.iter().all(|e| e.holds)
            && descendant
                .as_ref()
                .is_none_or(|d| d.holds && d.within_resource_count);
        Ok(ExpansionReport {
            psi: self.psi,
            c_star: self.c_star,
            high_nodes: self.high_nodes(),
            edges: self.edge_count(),
            expansion,
            descendant,
            dag_acyclic: dag.is_acyclic(),
            dag,
            pass,
        })
    }
}

/// `max(2, (4 * 3^M * (|R| - 1))^(1/(M+1)))`, the price-of-anarchy ceiling for
/// games whose congested resources hold only single-resource players.
pub fn upper_bound_type_a(num_resources: usize, degree: u32) -> f64 {
    let m = f64::from(degree);
    let base = 4.0 * 3f64.powi(degree as i32) * (num_resources.saturating_sub(1)) as f64;
    base.powf(1.0 / (m + 1.0)).max(2.0)
}

/// Seven times [`upper_bound_type_a`]: the ceiling for arbitrary games.
pub fn upper_bound_arbitrary(num_resources: usize, degree: u32) -> f64 {
    7.0 * upper_bound_type_a(num_resources, degree)
}

/// Exact test of `C / C* <= upper_bound_arbitrary(|R|, M)`.
///
/// Equivalent to `C <= 14 C*` or `C^(M+1) <= 4 * 3^M * (|R| - 1) * (7 C*)^(M+1)`.
pub fn poa_within_upper_bound(c: u32, c_star: u32, num_resources: usize, degree: u32) -> Result<bool> {
    if c_star == 0 {
        return Ok(c == 0);
    }
    if u64::from(c) <= 14 * u64::from(c_star) {
        return Ok(true);
    }
    let overflow = || Error::Overflow("upper-bound comparison");
    let lhs = Cost::from(c).checked_pow(degree + 1).ok_or_else(overflow)?;
    let rhs = Cost::from(4u8)
        .checked_mul(Cost::from(3u8).checked_pow(degree).ok_or_else(overflow)?)
        .and_then(|v| v.checked_mul(num_resources.saturating_sub(1) as Cost))
        .and_then(|v| v.checked_mul(Cost::from(7 * c_star).checked_pow(degree + 1)?))
        .ok_or_else(overflow)?;
    Ok(lhs <= rhs)
}
