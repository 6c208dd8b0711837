//! Scenario trees over load-port demand.

use serde::{Deserialize, Serialize};

use crate::error::{Result, StowError};
use crate::instances::{draw_one, DemandMode, Episode};
use crate::rng::{substream, Stream};
use crate::voyage::Voyage;

/// Default refusal threshold on the number of paths.
pub const DEFAULT_PATH_CAP: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    /// Port whose demand this node reveals.
    pub stage: usize,
    pub parent: Option<usize>,
    pub prob: f64,
    /// Full `tr * |K| + k` vector, non-zero only on transports loaded at `stage`.
    pub demand: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTree {
    pub s_st: usize,
    pub nodes: Vec<TreeNode>,
    /// Root-to-leaf node lists; `paths[φ][p - 1]` is the stage-`p` node.
    pub paths: Vec<Vec<usize>>,
}

/// `s_st^(N_P - 2)`, or `None` on overflow.
pub fn path_count(s_st: usize, n_ports: usize) -> Option<usize> {
    let exp = n_ports.saturating_sub(2) as u32;
    s_st.checked_pow(exp)
}

impl ScenarioTree {
    pub fn n_paths(&self) -> usize {
        self.paths.len()
    }

    pub fn path_prob(&self, phi: usize) -> f64 {
        self.nodes[*self.paths[phi].last().unwrap()].prob
    }

    /// Demand of path `phi` over every transport.
    pub fn path_demand(&self, phi: usize) -> Vec<f64> {
        let n = self.nodes[0].demand.len();
        let mut q = vec![0.0; n];
        for &node in &self.paths[phi] {
            for (a, b) in q.iter_mut().zip(&self.nodes[node].demand) {
                *a += b;
            }
        }
        q
    }

    /// Node identifying the demand history `q_[pol-1]` of path `phi`: loads at
    /// port `pol` may only differ between paths with different keys.
    pub fn history_node(&self, phi: usize, pol: usize) -> usize {
        self.paths[phi][pol.max(2) - 2]
    }
}

/// Root demand is the episode's port-1 realization; every later load port
/// branches into `s_st` children drawn from the episode's perturbed bounds.
pub fn build_scenario_tree(
    voyage: &Voyage,
    episode: &Episode,
    s_st: usize,
    mode: DemandMode,
    cap: usize,
) -> Result<ScenarioTree> {
    if s_st == 0 {
        return Err(StowError::InvalidConfig("s_st must be at least 1".into()));
    }
    let n_ports = voyage.n_ports();
    match path_count(s_st, n_ports) {
        Some(z) if z <= cap => {}
        Some(z) => {
            return Err(StowError::Refused(format!(
                "scenario tree would have {z} paths, above the cap of {cap}"
            )))
        }
        None => {
            return Err(StowError::Refused(format!(
                "scenario tree would have {s_st}^{} paths, above the cap of {cap}",
                n_ports - 2
            )))
        }
    }
    let stage_mask = |p: usize| -> Vec<usize> {
        voyage
            .ti
            .load(p)
            .into_iter()
            .flat_map(|tr| (0..voyage.n_k()).map(move |k| voyage.qi(tr, k)))
            .collect()
    };
    let mut root_q = vec![0.0; voyage.n_q()];
    for i in stage_mask(1) {
        root_q[i] = episode.demand.q[i];
    }
    let mut nodes = vec![TreeNode {
        stage: 1,
        parent: None,
        prob: 1.0,
        demand: root_q,
    }];
    let mut rng = Stream::new(episode.base_seed, episode.index, substream::TREE);
    let mut frontier = vec![0usize];
    for p in 2..n_ports {
        let idx = stage_mask(p);
        let mut next = Vec::with_capacity(frontier.len() * s_st);
        for &parent in &frontier {
            for _ in 0..s_st {
                let mut q = vec![0.0; voyage.n_q()];
                for &i in &idx {
                    q[i] = draw_one(episode.dist.ub_perturbed[i], mode, &mut rng).0;
                }
                nodes.push(TreeNode {
                    stage: p,
                    parent: Some(parent),
                    prob: nodes[parent].prob / s_st as f64,
                    demand: q,
                });
                next.push(nodes.len() - 1);
            }
        }
        frontier = next;
    }
    let paths = frontier
        .iter()
        .map(|&leaf| {
            let mut path = vec![leaf];
            let mut cur = leaf;
            while let Some(par) = nodes[cur].parent {
                path.push(par);
                cur = par;
            }
            path.reverse();
            path
        })
        .collect();
    Ok(ScenarioTree { s_st, nodes, paths })
}
