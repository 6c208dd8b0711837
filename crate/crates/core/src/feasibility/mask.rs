//! Paired block stowage mask: each (bay, block) receives cargo of a single POD.

use serde::{Deserialize, Serialize};

use crate::env::State;
use crate::rng::Stream;
use crate::voyage::Voyage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionMask {
    /// One flag per location.
    pub xm: Vec<bool>,
    /// Mirrored scores per (bay, block); only empty bay-blocks compete.
    pub scores: Vec<f64>,
    pub fq: f64,
    /// Number of bay-blocks taken from the sorted list.
    pub k: usize,
}

impl ActionMask {
    pub fn all(n: usize) -> Self {
        Self {
            xm: vec![true; n],
            scores: Vec::new(),
            fq: 0.0,
            k: 0,
        }
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.xm.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect()
    }
}

/// Per-location view of what is on board.
struct Usage {
    /// POD of the cargo in each bay-block, if any cargo is there.
    block_pods: Vec<Vec<usize>>,
    empty_loc: Vec<bool>,
    c_res: Vec<f64>,
}

fn usage(voyage: &Voyage, u: &[f64]) -> Usage {
    let n_c = voyage.n_c();
    let mut block_pods = vec![Vec::new(); voyage.n_bay_blocks()];
    let mut empty_loc = vec![true; n_c];
    for loc in 0..n_c {
        let (b, _, bl) = voyage.loc_parts(loc);
        for tr in 0..voyage.n_tr() {
            let on: f64 = (0..voyage.n_k()).map(|k| u[voyage.ui(loc, tr, k)]).sum();
            if on > 0.0 {
                empty_loc[loc] = false;
                let pod = voyage.ti.pair(tr).1;
                let bp = &mut block_pods[voyage.bay_block(b, bl)];
                if !bp.contains(&pod) {
                    bp.push(pod);
                }
            }
        }
    }
    let c_res = voyage.capacity.iter().zip(voyage.teu_load(u)).map(|(c, t)| c - t).collect();
    Usage {
        block_pods,
        empty_loc,
        c_res,
    }
}

/// Builds the mask for the current step target.
///
/// Blocks whose cargo all has the target POD stay open on every tier. Among
/// fully empty bay-blocks, a random score is drawn per bay and mirrored fore to
/// aft; the highest-scoring blocks are opened until their capacity covers the
/// target POD's remaining TEU demand not already absorbed by its own blocks.
pub fn pbs_mask(voyage: &Voyage, state: &State, rng: &mut Stream) -> ActionMask {
    let j = state.target.pod;
    let p = state.p;
    let n_b = voyage.n_bays();
    let n_bl = voyage.n_blocks();
    let us = usage(voyage, &state.u);

    // TEU still to load at this port for pod j
    let mut q_pod = 0.0;
    for tr in voyage.ti.load(p) {
        if voyage.ti.pair(tr).1 != j {
            continue;
        }
        for k in 0..voyage.n_k() {
            let loaded: f64 = (0..voyage.n_c()).map(|l| state.u[voyage.ui(l, tr, k)]).sum();
            q_pod += voyage.teu(k) * (state.q_now[voyage.qi(tr, k)] - loaded).max(0.0);
        }
    }

    let block_of = |loc: usize| {
        let (b, _, bl) = voyage.loc_parts(loc);
        voyage.bay_block(b, bl)
    };
    let ul: Vec<bool> = (0..voyage.n_c())
        .map(|loc| {
            let pods = &us.block_pods[block_of(loc)];
            !pods.is_empty() && pods.iter().all(|&x| x == j)
        })
        .collect();
    let used_cap: f64 = (0..voyage.n_c()).filter(|&l| ul[l]).map(|l| us.c_res[l].max(0.0)).sum();
    let rq = (q_pod - used_cap).max(0.0);
    let total_res: f64 = us.c_res.iter().map(|c| c.max(0.0)).sum();
    let fq = total_res.min(rq);

    let raw: Vec<f64> = (0..n_b * n_bl).map(|_| rng.uniform()).collect();
    let mut scores = vec![0.0; n_b * n_bl];
    let mut eligible = Vec::new();
    for b in 0..n_b {
        let mb = b.min(n_b - 1 - b);
        for bl in 0..n_bl {
            let bb = voyage.bay_block(b, bl);
            let empty = us.block_pods[bb].is_empty();
            scores[bb] = raw[voyage.bay_block(mb, bl)];
            if empty {
                eligible.push(bb);
            }
        }
    }
    // stable: ties keep bay-block order
    eligible.sort_by(|a, b| scores[*b].partial_cmp(&scores[*a]).unwrap());

    let block_cap = |bb: usize| -> f64 {
        let (b, bl) = (bb / n_bl, bb % n_bl);
        (0..voyage.n_decks()).map(|d| voyage.capacity[voyage.loc(b, d, bl)]).sum()
    };
    let mut k = 0;
    if fq > 0.0 {
        let mut acc = 0.0;
        for &bb in &eligible {
            k += 1;
            acc += block_cap(bb);
            if acc >= fq {
                break;
            }
        }
    }
    let mut selected = vec![false; n_b * n_bl];
    for &bb in &eligible[..k] {
        selected[bb] = true;
    }
    let xm = (0..voyage.n_c())
        .map(|loc| (selected[block_of(loc)] && us.empty_loc[loc]) || ul[loc])
        .collect();
    ActionMask { xm, scores, fq, k }
}

pub fn apply_mask(x: &[f64], mask: &[bool]) -> Vec<f64> {
    x.iter().zip(mask).map(|(&v, &m)| if m { v } else { 0.0 }).collect()
}

/// Masked entries become `-inf`; the summed log-density skips them.
pub fn masked_logprob(logp: &[f64], mask: &[bool]) -> Vec<f64> {
    logp.iter()
        .zip(mask)
        .map(|(&v, &m)| if m { v } else { f64::NEG_INFINITY })
        .collect()
}

pub fn masked_logprob_sum(logp: &[f64], mask: &[bool]) -> f64 {
    logp.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| v).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::VoyageConfig;
    use crate::env::Env;
    use crate::rng::substream;
    use std::sync::Arc;

    fn paper_env() -> (Arc<Voyage>, Env) {
        let mut cfg = VoyageConfig::paper(4);
        cfg.n_bays = 6;
        cfg.n_blocks = 2;
        cfg.total_teu = 1200.0;
        let v = Arc::new(Voyage::new(cfg).unwrap());
        let env = Env::reset(v.clone(), 5, 0).unwrap();
        (v, env)
    }

    #[test]
    fn apply_trivia() {
        let x = [1.0, 2.0, 3.0];
        assert_eq!(apply_mask(&x, &[true; 3]), x.to_vec());
        assert_eq!(apply_mask(&x, &[false; 3]), vec![0.0; 3]);
        let lp = masked_logprob(&[-1.0, -2.0], &[true, false]);
        assert_eq!(lp[0], -1.0);
        assert_eq!(lp[1], f64::NEG_INFINITY);
        assert_eq!(masked_logprob_sum(&[-1.0, -2.0], &[true, false]), -1.0);
    }

    #[test]
    fn empty_vessel_minimal_prefix() {
        let (v, env) = paper_env();
        let mut rng = Stream::new(1, 0, substream::MASK);
        let m = pbs_mask(&v, env.state(), &mut rng);
        assert!(m.fq > 0.0);
        let n_bl = v.n_blocks();
        let mut order: Vec<usize> = (0..v.n_bay_blocks()).collect();
        order.sort_by(|a, b| m.scores[*b].partial_cmp(&m.scores[*a]).unwrap());
        let cap = |bb: usize| -> f64 {
            (0..v.n_decks()).map(|d| v.capacity[v.loc(bb / n_bl, d, bb % n_bl)]).sum()
        };
        // brute force: smallest prefix length covering fq
        let mut best = order.len();
        for len in 0..=order.len() {
            if order[..len].iter().map(|&bb| cap(bb)).sum::<f64>() >= m.fq {
                best = len;
                break;
            }
        }
        assert_eq!(m.k, best);
        let open: usize = m.xm.iter().filter(|&&x| x).count();
        assert_eq!(open, best * v.n_decks());
    }

    #[test]
    fn scores_mirror() {
        let (v, env) = paper_env();
        let mut rng = Stream::new(2, 0, substream::MASK);
        for _ in 0..20 {
            let m = pbs_mask(&v, env.state(), &mut rng);
            for b in 0..v.n_bays() {
                for bl in 0..v.n_blocks() {
                    let mb = v.n_bays() - 1 - b;
                    assert_eq!(m.scores[v.bay_block(b, bl)], m.scores[v.bay_block(mb, bl)]);
                }
            }
        }
    }

    #[test]
    fn used_blocks_always_open() {
        let (v, env) = paper_env();
        let mut s = env.state().clone();
        let tg = s.target;
        let loc = v.loc(2, 0, 1);
        s.u[v.ui(loc, tg.tr, tg.k)] = 1.0;
        let mut rng = Stream::new(3, 0, substream::MASK);
        for _ in 0..10 {
            let m = pbs_mask(&v, &s, &mut rng);
            for d in 0..v.n_decks() {
                assert!(m.xm[v.loc(2, d, 1)]);
            }
        }
    }

    #[test]
    fn no_remaining_demand_opens_used_only() {
        let (v, env) = paper_env();
        let mut s = env.state().clone();
        let tg = s.target;
        // demand of pod j is all loaded already
        for tr in v.ti.load(1) {
            if v.ti.pair(tr).1 == tg.pod {
                for k in 0..v.n_k() {
                    s.q_now[v.qi(tr, k)] = 0.0;
                }
            }
        }
        s.u[v.ui(v.loc(0, 1, 0), tg.tr, tg.k)] = 0.5;
        let mut rng = Stream::new(4, 0, substream::MASK);
        let m = pbs_mask(&v, &s, &mut rng);
        assert_eq!(m.fq, 0.0);
        assert_eq!(m.k, 0);
        for loc in 0..v.n_c() {
            let (b, _, bl) = v.loc_parts(loc);
            assert_eq!(m.xm[loc], b == 0 && bl == 0);
        }
    }

    #[test]
    fn other_pod_blocks_closed() {
        let (v, env) = paper_env();
        let mut s = env.state().clone();
        let tg = s.target;
        let other = v.ti.load(1).into_iter().find(|&tr| v.ti.pair(tr).1 != tg.pod).unwrap();
        s.u[v.ui(v.loc(1, 0, 0), other, 0)] = 2.0;
        let mut rng = Stream::new(5, 0, substream::MASK);
        for _ in 0..10 {
            let m = pbs_mask(&v, &s, &mut rng);
            for d in 0..v.n_decks() {
                assert!(!m.xm[v.loc(1, d, 0)]);
            }
        }
    }
}
