//! Ordered mask and projection stages, selected by names such as `PBS/CP`.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::mask::{apply_mask, pbs_mask, ActionMask};
use super::polyhedron::{build_polyhedron, StepPolyParams};
use super::project::{clip_box, cp_project, vp_project, CpParams, VpParams};
use crate::env::State;
use crate::error::{Result, StowError};
use crate::rng::Stream;
use crate::voyage::Voyage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Stage {
    Pbs,
    Vp(VpParams),
    Pc,
    Cp(CpParams),
}

impl Stage {
    fn token(&self) -> String {
        match self {
            Stage::Pbs => "PBS".into(),
            Stage::Vp(p) if *p == VpParams::star() => "VP*".into(),
            Stage::Vp(_) => "VP".into(),
            Stage::Pc => "PC".into(),
            Stage::Cp(_) => "CP".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// VP runs its full epoch budget.
    Train,
    /// VP stops once the violation stops falling.
    Inference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub stages: Vec<Stage>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub mask: ActionMask,
    pub masked: Vec<f64>,
    pub projected: Vec<f64>,
    pub vp_iterations: usize,
}

impl PipelineSpec {
    pub fn none() -> Self {
        Self { stages: Vec::new() }
    }

    /// Parses `none` or `/`-separated stages from PBS, VP, VP* (or vp-star), PC, CP.
    pub fn parse(name: &str) -> Result<Self> {
        let name = name.trim();
        if name.eq_ignore_ascii_case("none") || name.is_empty() {
            return Ok(Self::none());
        }
        let mut stages = Vec::new();
        for tok in name.split('/') {
            let stage = match tok.trim().to_ascii_lowercase().as_str() {
                "pbs" => Stage::Pbs,
                "vp" => Stage::Vp(VpParams::default()),
                "vp*" | "vp-star" => Stage::Vp(VpParams::star()),
                "pc" => Stage::Pc,
                "cp" => Stage::Cp(CpParams::default()),
                other => {
                    return Err(StowError::InvalidConfig(format!("unknown pipeline stage '{other}'")))
                }
            };
            stages.push(stage);
        }
        let spec = Self { stages };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(StowError::InvalidConfig(format!("pipeline {self}: {m}")));
        if self.stages.iter().skip(1).any(|s| *s == Stage::Pbs) {
            return bad("PBS must be the first stage");
        }
        let has_vp = self.stages.iter().any(|s| matches!(s, Stage::Vp(_)));
        let has_cp = self.stages.iter().any(|s| matches!(s, Stage::Cp(_)));
        if has_vp && has_cp {
            return bad("VP and CP cannot be combined");
        }
        for (i, s) in self.stages.iter().enumerate() {
            if self.stages[..i]
                .iter()
                .any(|t| std::mem::discriminant(t) == std::mem::discriminant(s))
            {
                return bad("repeated stage");
            }
            match s {
                Stage::Vp(p) if !(p.eta > 0.0) || p.epochs == 0 => return bad("VP needs eta > 0 and epochs >= 1"),
                Stage::Cp(p) if !(p.lambda > 0.0) => return bad("CP needs lambda > 0"),
                _ => {}
            }
        }
        Ok(())
    }

    pub fn has_pbs(&self) -> bool {
        self.stages.first() == Some(&Stage::Pbs)
    }

    /// Replaces the parameters of every VP stage.
    pub fn with_vp(mut self, params: VpParams) -> Self {
        for s in &mut self.stages {
            if let Stage::Vp(p) = s {
                *p = params;
            }
        }
        self
    }

    /// Runs the stages on raw action `x` for the current step. `rng` feeds the
    /// PBS scores and is untouched when PBS is absent.
    pub fn apply(
        &self,
        voyage: &Voyage,
        state: &State,
        x: &[f64],
        rng: &mut Stream,
        mode: Mode,
    ) -> Result<PipelineOutput> {
        let mask = self.mask(voyage, state, rng);
        self.apply_with_mask(voyage, state, x, mask, mode)
    }

    /// The PBS mask when the pipeline starts with PBS, otherwise all open.
    pub fn mask(&self, voyage: &Voyage, state: &State, rng: &mut Stream) -> ActionMask {
        if self.has_pbs() {
            pbs_mask(voyage, state, rng)
        } else {
            ActionMask::all(voyage.n_c())
        }
    }

    /// Same as [`apply`](Self::apply) with a mask drawn beforehand.
    pub fn apply_with_mask(
        &self,
        voyage: &Voyage,
        state: &State,
        x: &[f64],
        mask: ActionMask,
        mode: Mode,
    ) -> Result<PipelineOutput> {
        let n = voyage.n_c();
        if x.len() != n || mask.xm.len() != n {
            return Err(StowError::Contract(format!("action has {} entries, expected {n}", x.len())));
        }
        let masked = apply_mask(x, &mask.xm);
        let support = self.has_pbs().then_some(mask.xm.as_slice());
        let mut cur = masked.clone();
        let mut vp_iterations = 0;
        let mut params: Option<StepPolyParams> = None;
        for stage in &self.stages {
            let pp = params.get_or_insert_with(|| StepPolyParams::from_state(voyage, state));
            match stage {
                Stage::Pbs => {}
                Stage::Vp(p) => {
                    let ph = pp.polyhedron(voyage).normalized();
                    let out = vp_project(&cur, &ph, *p, mode == Mode::Inference, support)?;
                    vp_iterations = out.iterations;
                    cur = out.x;
                }
                Stage::Pc => {
                    let teu = voyage.teu(pp.k);
                    let ub: Vec<f64> = pp.capacity.iter().map(|c| (c / teu).max(0.0)).collect();
                    cur = clip_box(&cur, &vec![0.0; n], &ub);
                }
                Stage::Cp(p) => {
                    let ph = pp.polyhedron(voyage);
                    cur = cp_project(&cur, &ph, *p, support)?.x;
                }
            }
        }
        Ok(PipelineOutput {
            mask,
            masked,
            projected: cur,
            vp_iterations,
        })
    }
}

impl fmt::Display for PipelineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.stages.is_empty() {
            return write!(f, "none");
        }
        let toks: Vec<String> = self.stages.iter().map(Stage::token).collect();
        write!(f, "{}", toks.join("/"))
    }
}

/// Convenience used by tests and tools that want the unprojected polyhedron.
pub fn step_polyhedron(voyage: &Voyage, state: &State) -> super::Polyhedron {
    build_polyhedron(voyage, state)
}
