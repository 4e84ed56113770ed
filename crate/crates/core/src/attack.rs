//! Individual attacks by a no-signalling eavesdropper.
//!
//! Eve's attack reduces to preparing, round by round, one of several
//! no-signalling boxes `P_e(ab|xy)` with probability `p_e`, such that the
//! mixture reproduces what Alice and Bob observe. Her knowledge is the label
//! `e`. Extremal boxes fall into three classes according to whether the key
//! settings `x = 0` and `y = 0` have deterministic (D) or random (R) outputs.

use std::fmt;

use crate::error::{check_range, Error, Result};
use crate::keyrate::capacity_centered;
use crate::lp::{self, LinearProgram, Sense};
use crate::nsbox::{enumerate_correlation_boxes, enumerate_deterministic, ConditionalBox, STRUCTURAL_TOL};

/// Components lighter than this are dropped from a decomposition.
const WEIGHT_CUTOFF: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyId {
    /// Both key outputs predetermined.
    DD,
    /// Alice's key output predetermined, Bob's locally random.
    DR,
    /// Both key outputs locally random.
    RR,
}

impl StrategyId {
    pub const ALL: [StrategyId; 3] = [StrategyId::DD, StrategyId::DR, StrategyId::RR];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn class(self) -> &'static StrategyClass {
        &STRATEGY_CLASSES[self.index()]
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StrategyId::DD => "DD",
            StrategyId::DR => "DR",
            StrategyId::RR => "RR",
        })
    }
}

/// Constraint a strategy class places on the key-setting correlation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorrBound {
    AtMost(f64),
    Exactly(f64),
}

/// Bell-value bounds and entropies of one class of extremal strategies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrategyClass {
    pub id: StrategyId,
    /// Lower bound on the test functional (CHSH or CHAIN).
    pub chain_lower_bound: f64,
    pub corr_bound: CorrBound,
    pub h_a_given_e: f64,
    pub h_b_given_e: f64,
    pub i_ab_given_e: f64,
}

pub const STRATEGY_CLASSES: [StrategyClass; 3] = [
    StrategyClass {
        id: StrategyId::DD,
        chain_lower_bound: 1.0,
        corr_bound: CorrBound::AtMost(1.0),
        h_a_given_e: 0.0,
        h_b_given_e: 0.0,
        i_ab_given_e: 0.0,
    },
    StrategyClass {
        id: StrategyId::DR,
        chain_lower_bound: 0.0,
        corr_bound: CorrBound::Exactly(0.0),
        h_a_given_e: 0.0,
        h_b_given_e: 1.0,
        i_ab_given_e: 0.0,
    },
    StrategyClass {
        id: StrategyId::RR,
        chain_lower_bound: 0.0,
        corr_bound: CorrBound::AtMost(1.0),
        h_a_given_e: 1.0,
        h_b_given_e: 1.0,
        i_ab_given_e: 1.0,
    },
];

/// Class of a box from the determinism of its key outputs. A deterministic
/// `y = 0` output hands Eve Bob's key bit, so it is grouped with `DD`.
pub fn classify(bx: &ConditionalBox) -> StrategyId {
    match (bx.alice_deterministic(0, STRUCTURAL_TOL), bx.bob_deterministic(0, STRUCTURAL_TOL)) {
        (_, Some(_)) => StrategyId::DD,
        (Some(_), None) => StrategyId::DR,
        (None, None) => StrategyId::RR,
    }
}

/// One box of an explicit attack mixture.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackComponent {
    pub weight: f64,
    pub class: StrategyId,
    pub bx: ConditionalBox,
    /// Bob's key output when it is predetermined; Eve then knows it.
    pub bob_key_bit: Option<u8>,
}

/// Weights `(p1, p2, p3)` on the `DD`, `DR`, `RR` classes, optionally with
/// the boxes realising them.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackDecomposition {
    pub weights: [f64; 3],
    pub components: Option<Vec<AttackComponent>>,
}

impl AttackDecomposition {
    /// Groups explicit components by class. Weights are renormalised.
    pub fn from_components(mut components: Vec<AttackComponent>) -> Result<Self> {
        let total: f64 = components.iter().map(|c| c.weight).sum();
        if components.is_empty() || !(total > 0.0) {
            return Err(Error::Structure("attack mixture has no weight".into()));
        }
        let mut weights = [0.0; 3];
        for c in &mut components {
            c.weight /= total;
            weights[c.class.index()] += c.weight;
        }
        Ok(Self { weights, components: Some(components) })
    }

    /// `p1`, the weight on strategies fixing Bob's key output.
    pub fn deterministic_weight(&self) -> f64 {
        self.weights[StrategyId::DD.index()]
    }

    pub fn weight(&self, id: StrategyId) -> f64 {
        self.weights[id.index()]
    }

    /// `sum_e p_e P_e`, when components are present.
    pub fn reconstruct(&self) -> Option<Result<ConditionalBox>> {
        self.components
            .as_ref()
            .map(|cs| ConditionalBox::weighted_sum(cs.iter().map(|c| (c.weight, &c.bx))))
    }
}

/// Eve's best class weights given the observed test value and key correlation.
///
/// She maximises `I(B:E) = p1` subject to `p1 <= CHAIN`, `p1 + p3 >= C` and
/// the simplex.
pub fn optimal_weights(chain_obs: f64, corr_obs: f64) -> Result<AttackDecomposition> {
    if !(chain_obs >= 0.0) {
        return Err(Error::OutOfRange { name: "chain", value: chain_obs, expected: ">= 0" });
    }
    check_range("corr", corr_obs, -1.0, 1.0, "[-1, 1]")?;
    let p1 = chain_obs.min(1.0);
    let p3 = (corr_obs - p1).max(0.0);
    let p2 = (1.0 - p1 - p3).max(0.0);
    Ok(AttackDecomposition { weights: [p1, p2, p3], components: None })
}

/// Upper bound on `I(B:E)` after Bob flips his key bit with probability `r`.
///
/// Under `DD` Eve knows the pre-flip bit, leaving `H(B|E) = h(r)`; under the
/// other classes `H(B|E) = 1`. Hence `min(CHAIN, 1) (1 - h(r))`.
pub fn eve_info_bound(chain_obs: f64, flip_r: f64) -> Result<f64> {
    if !(chain_obs >= 0.0) {
        return Err(Error::OutOfRange { name: "chain", value: chain_obs, expected: ">= 0" });
    }
    check_range("r", flip_r, 0.0, 0.5, "[0, 1/2]")?;
    Ok(chain_obs.min(1.0) * capacity_centered(1.0 - 2.0 * flip_r))
}

/// Bound on the intrinsic information, `max(0, C - CHAIN)`.
pub fn intrinsic_info_upper(chain_obs: f64, corr_obs: f64) -> Result<f64> {
    if !(chain_obs >= 0.0) {
        return Err(Error::OutOfRange { name: "chain", value: chain_obs, expected: ">= 0" });
    }
    check_range("corr", corr_obs, -1.0, 1.0, "[-1, 1]")?;
    Ok((corr_obs - chain_obs).max(0.0))
}

/// Largest chain length for which explicit mixtures are built.
pub const MAX_MIXTURE_CHAIN: usize = 3;

/// Convex decomposition of `target` into deterministic and correlation boxes
/// that puts as much weight as possible on boxes with a predetermined `y = 0`
/// output. `target` must use the chained layout (`N + 1` by `N` settings).
pub fn build_attack_mixture(target: &ConditionalBox) -> Result<AttackDecomposition> {
    let n = target.n_bob();
    if target.n_alice() != n + 1 || !(2..=MAX_MIXTURE_CHAIN).contains(&n) {
        return Err(Error::Structure(format!(
            "attack mixtures need the chained layout with N in 2..={MAX_MIXTURE_CHAIN}, got {}x{}",
            target.n_alice(),
            n
        )));
    }
    let validation = target.validate(STRUCTURAL_TOL);
    if !validation.is_valid() {
        let first = validation.violations[0].to_string();
        return Err(Error::Structure(format!("target is not a no-signalling box: {first}")));
    }

    let (n_a, n_b) = (n + 1, n);
    let mut columns: Vec<ConditionalBox> = enumerate_deterministic(n_a, n_b)?
        .iter()
        .map(|d| d.to_box())
        .collect();
    let n_det = columns.len();
    // Fixed Alice outputs only enlarge the N = 3 family past what the LP needs.
    let allow_fixed = n == 2;
    columns.extend(
        enumerate_correlation_boxes(n_a, n_b, allow_fixed)?
            .iter()
            .map(|c| c.to_box()),
    );

    let cost: Vec<f64> = (0..columns.len()).map(|k| if k < n_det { 1.0 } else { 0.0 }).collect();
    let mut program = LinearProgram::new(cost);
    for (i, &t) in target.table().iter().enumerate() {
        program.add_equality(columns.iter().map(|c| c.table()[i]).collect(), t);
    }
    let solution = lp::solve(&program, Sense::Maximize)?;

    let components: Vec<AttackComponent> = solution
        .x
        .iter()
        .zip(columns)
        .filter(|(w, _)| **w > WEIGHT_CUTOFF)
        .map(|(&weight, bx)| AttackComponent {
            weight,
            class: classify(&bx),
            bob_key_bit: bx.bob_deterministic(0, STRUCTURAL_TOL),
            bx,
        })
        .collect();
    AttackDecomposition::from_components(components)
}
