//! The abstraction-efficiency score and its constituent terms.
//!
//! A sketch is described by three signals: the number of commonsense
//! elements its class admits (`E`), how many of them are visibly drawn
//! (`V`), and the probability a zero-shot classifier assigns to the true
//! class (`P`). With the visual ratio `v = V / E` the score is
//!
//! ```text
//! u(v)      = ln((1 + δ) / (v + δ))
//! g(P, v)   = tanh(β/2 · ln((P + δ) / (v + δ)))
//! reward    = P^γ · u(v) · g(P, v)
//! penalty   = λ · v^η · (1 − P)^k + τ · (1 − P)^r
//! Z         = reward − penalty
//! score     = tanh(α · Z)
//! ```
//!
//! Everything here is pure; identical inputs give bit-identical outputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest `f64` strictly below one. `tanh` rounds to exactly ±1 once its
/// argument passes ~19.06, so scores are pulled back inside the open interval.
pub const SCORE_BOUND: f64 = 1.0 - f64::EPSILON / 2.0;

/// The nine scoring constants plus the probability clipping margin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    /// Outer tanh scale.
    pub alpha: f64,
    /// Gate sharpness.
    pub beta: f64,
    /// Visual-complexity penalty scale.
    pub lambda: f64,
    /// Penalty curvature in `v`.
    pub eta: f64,
    /// Penalty sensitivity to `1 − P`.
    pub k: f64,
    /// Base low-recognizability penalty.
    pub tau: f64,
    /// Base penalty decay.
    pub r: f64,
    /// Recognizability guidance exponent.
    pub gamma: f64,
    /// Stabilizer inside logarithms.
    pub delta: f64,
    /// Margin used when clipping `P` into `[ε, 1 − ε]`.
    pub epsilon_clip: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Self {
            alpha: 2.2,
            beta: 8.0,
            lambda: 1.0,
            eta: 0.8,
            k: 2.3,
            tau: 0.4,
            r: 1.7,
            gamma: 1.7,
            delta: 1e-6,
            epsilon_clip: 1e-6,
        }
    }
}

impl Hyperparams {
    /// Checks every field is finite and in range.
    ///
    /// `lambda` and `tau` may be zero, which removes the corresponding
    /// penalty term; everything else must be strictly positive.
    pub fn validate(&self) -> Result<()> {
        let strictly_positive = [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("eta", self.eta),
            ("k", self.k),
            ("r", self.r),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("epsilon_clip", self.epsilon_clip),
        ];
        for (name, value) in strictly_positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::InvalidHyperparams {
                    name,
                    value,
                    reason: "must be finite and strictly positive",
                });
            }
        }
        for (name, value) in [("lambda", self.lambda), ("tau", self.tau)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::InvalidHyperparams {
                    name,
                    value,
                    reason: "must be finite and non-negative",
                });
            }
        }
        if self.epsilon_clip >= 0.5 {
            return Err(Error::InvalidHyperparams {
                name: "epsilon_clip",
                value: self.epsilon_clip,
                reason: "must be below 0.5",
            });
        }
        Ok(())
    }
}

/// Where a signal value came from.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Fixture,
    Mock,
    Provider(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub element_count: Source,
    pub visible_count: Source,
    pub probability: Source,
}

impl Provenance {
    pub fn uniform(source: Source) -> Self {
        Self {
            element_count: source.clone(),
            visible_count: source.clone(),
            probability: source,
        }
    }
}

/// One sketch's `(E, V, P)` triple.
///
/// `visible_count` is real-valued so averaged annotations can be expressed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signals {
    pub element_count: u32,
    pub visible_count: f64,
    pub probability: f64,
    pub provenance: Provenance,
}

impl Signals {
    pub fn new(element_count: u32, visible_count: f64, probability: f64, source: Source) -> Self {
        Self {
            element_count,
            visible_count,
            probability,
            provenance: Provenance::uniform(source),
        }
    }
}

/// Every intermediate quantity of one evaluation, so a low score can be
/// traced to low recognizability or to excess detail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreBreakdown {
    /// Clipped class probability the score was computed with.
    pub p: f64,
    pub v: f64,
    pub u: f64,
    pub g: f64,
    pub reward: f64,
    pub penalty: f64,
    pub z: f64,
    pub sea: f64,
}

/// Clamps `V` into `[0, E]` and `P` into `[ε, 1 − ε]`.
pub fn clip_signals(raw: &Signals, hp: &Hyperparams) -> Result<Signals> {
    if raw.element_count < 1 {
        return Err(Error::InvalidCapacity(raw.element_count));
    }
    if !raw.visible_count.is_finite() || !raw.probability.is_finite() {
        return Err(Error::InvalidInput(format!(
            "non-finite signal (V={}, P={})",
            raw.visible_count, raw.probability
        )));
    }
    let e = f64::from(raw.element_count);
    Ok(Signals {
        element_count: raw.element_count,
        visible_count: raw.visible_count.clamp(0.0, e),
        probability: raw.probability.clamp(hp.epsilon_clip, 1.0 - hp.epsilon_clip),
        provenance: raw.provenance.clone(),
    })
}

/// `V / E`; callers pass clipped signals.
pub fn visual_ratio(s: &Signals) -> f64 {
    s.visible_count / f64::from(s.element_count)
}

/// Economy of expression, `ln((1 + δ) / (v + δ))`. Exactly zero at `v = 1`.
pub fn economy(v: f64, hp: &Hyperparams) -> f64 {
    ((1.0 + hp.delta) / (v + hp.delta)).ln()
}

/// Centered gate: zero on `v = P`, positive when `P > v`.
pub fn gate(p: f64, v: f64, hp: &Hyperparams) -> f64 {
    (0.5 * hp.beta * ((p + hp.delta) / (v + hp.delta)).ln()).tanh()
}

pub fn reward(p: f64, v: f64, hp: &Hyperparams) -> f64 {
    p.powf(hp.gamma) * economy(v, hp) * gate(p, v, hp)
}

pub fn penalty(p: f64, v: f64, hp: &Hyperparams) -> f64 {
    let miss = 1.0 - p;
    hp.lambda * v.powf(hp.eta) * miss.powf(hp.k) + hp.tau * miss.powf(hp.r)
}

/// Latent efficiency `Z = reward − penalty` at an unclipped `(P, v)`.
pub fn latent(p: f64, v: f64, hp: &Hyperparams) -> f64 {
    reward(p, v, hp) - penalty(p, v, hp)
}

/// Maps a latent value through `tanh(α·Z)`, kept strictly inside (−1, 1).
pub fn squash(z: f64, hp: &Hyperparams) -> f64 {
    (hp.alpha * z).tanh().clamp(-SCORE_BOUND, SCORE_BOUND)
}

/// Full breakdown at a ratio/probability pair, without clipping.
pub fn breakdown_at(p: f64, v: f64, hp: &Hyperparams) -> ScoreBreakdown {
    let u = economy(v, hp);
    let g = gate(p, v, hp);
    let reward = p.powf(hp.gamma) * u * g;
    let penalty = penalty(p, v, hp);
    let z = reward - penalty;
    ScoreBreakdown {
        p,
        v,
        u,
        g,
        reward,
        penalty,
        z,
        sea: squash(z, hp),
    }
}

/// Score at a `(P, v)` pair, clipping both into the admissible domain first.
pub fn score_at(p: f64, v: f64, hp: &Hyperparams) -> f64 {
    let p = p.clamp(hp.epsilon_clip, 1.0 - hp.epsilon_clip);
    breakdown_at(p, v.clamp(0.0, 1.0), hp).sea
}

/// Scores one sketch. Signals are clipped here, so any finite input with
/// `E ≥ 1` produces a finite score.
pub fn sea(signals: &Signals, hp: &Hyperparams) -> Result<ScoreBreakdown> {
    let clipped = clip_signals(signals, hp)?;
    Ok(breakdown_at(clipped.probability, visual_ratio(&clipped), hp))
}
