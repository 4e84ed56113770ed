//! Bipartite conditional-probability boxes `P(ab|xy)` with binary outcomes.
//!
//! Bell functionals follow the "smaller is more nonlocal" orientation: local
//! boxes give `CHSH >= 1`, every no-signalling box gives `CHSH >= 0`.

use std::fmt;

use crate::error::{check_range, Error, Result};
use crate::lp::{self, LinearProgram, Sense};

/// Largest number of settings per party accepted by the enumeration routines.
pub const MAX_ENUM_SETTINGS: usize = 6;

/// Tolerance used for structural validation of boxes.
pub const STRUCTURAL_TOL: f64 = 1e-9;

/// Largest chain length accepted by [`min_chain_given_marginal`].
pub const MAX_LP_CHAIN: usize = 5;

/// Upper limit on the number of correlation vertices generated in one call.
pub const MAX_CORRELATION_VERTICES: usize = 20_000;

/// Conditional distribution `P(ab|xy)` for binary outputs.
///
/// Entries are stored with `(x, y)` outermost so that a single measurement
/// context occupies four consecutive cells ordered `(a, b) = 00, 01, 10, 11`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalBox {
    n_a: usize,
    n_b: usize,
    table: Vec<f64>,
}

#[inline]
fn cell(n_b: usize, a: usize, b: usize, x: usize, y: usize) -> usize {
    ((x * n_b + y) << 2) | (a << 1) | b
}

impl ConditionalBox {
    pub fn from_table(n_a: usize, n_b: usize, table: Vec<f64>) -> Result<Self> {
        if n_a == 0 || n_b == 0 {
            return Err(Error::Structure("a box needs at least one setting per party".into()));
        }
        if table.len() != 4 * n_a * n_b {
            return Err(Error::Structure(format!(
                "table has {} entries, expected 4*{}*{} = {}",
                table.len(),
                n_a,
                n_b,
                4 * n_a * n_b
            )));
        }
        Ok(Self { n_a, n_b, table })
    }

    /// Builds a box from `f(a, b, x, y)`.
    pub fn from_fn(n_a: usize, n_b: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Self {
        let mut table = vec![0.0; 4 * n_a * n_b];
        for x in 0..n_a {
            for y in 0..n_b {
                for a in 0..2 {
                    for b in 0..2 {
                        table[cell(n_b, a, b, x, y)] = f(a, b, x, y);
                    }
                }
            }
        }
        Self { n_a, n_b, table }
    }

    /// Every outcome pair equally likely in every context.
    pub fn uniform(n_a: usize, n_b: usize) -> Self {
        Self::from_fn(n_a, n_b, |_, _, _, _| 0.25)
    }

    pub fn n_alice(&self) -> usize {
        self.n_a
    }

    pub fn n_bob(&self) -> usize {
        self.n_b
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    #[inline]
    pub fn prob(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.table[cell(self.n_b, a, b, x, y)]
    }

    /// The four probabilities of context `(x, y)` in the order `00, 01, 10, 11`.
    pub fn context(&self, x: usize, y: usize) -> [f64; 4] {
        let i = cell(self.n_b, 0, 0, x, y);
        [self.table[i], self.table[i + 1], self.table[i + 2], self.table[i + 3]]
    }

    /// `P(a|x)` as seen in context `(x, y)`.
    pub fn alice_marginal(&self, a: usize, x: usize, y: usize) -> f64 {
        self.prob(a, 0, x, y) + self.prob(a, 1, x, y)
    }

    /// `P(b|y)` as seen in context `(x, y)`.
    pub fn bob_marginal(&self, b: usize, x: usize, y: usize) -> f64 {
        self.prob(0, b, x, y) + self.prob(1, b, x, y)
    }

    /// `P(a = b | xy)`.
    pub fn p_equal(&self, x: usize, y: usize) -> f64 {
        self.prob(0, 0, x, y) + self.prob(1, 1, x, y)
    }

    /// `P(a != b | xy)`.
    pub fn p_differ(&self, x: usize, y: usize) -> f64 {
        self.prob(0, 1, x, y) + self.prob(1, 0, x, y)
    }

    /// The output Bob's setting `y` always produces, if any.
    pub fn bob_deterministic(&self, y: usize, tol: f64) -> Option<u8> {
        let p0 = self.bob_marginal(0, 0, y);
        if (p0 - 1.0).abs() <= tol {
            Some(0)
        } else if p0.abs() <= tol {
            Some(1)
        } else {
            None
        }
    }

    /// The output Alice's setting `x` always produces, if any.
    pub fn alice_deterministic(&self, x: usize, tol: f64) -> Option<u8> {
        let p0 = self.alice_marginal(0, x, 0);
        if (p0 - 1.0).abs() <= tol {
            Some(0)
        } else if p0.abs() <= tol {
            Some(1)
        } else {
            None
        }
    }

    fn check_same_shape(&self, other: &Self) -> Result<()> {
        if self.n_a != other.n_a || self.n_b != other.n_b {
            return Err(Error::Structure(format!(
                "shape mismatch: {}x{} vs {}x{}",
                self.n_a, self.n_b, other.n_a, other.n_b
            )));
        }
        Ok(())
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &Self, lambda: f64) -> Result<Self> {
        self.check_same_shape(other)?;
        check_range("lambda", lambda, 0.0, 1.0, "[0, 1]")?;
        let table = self
            .table
            .iter()
            .zip(&other.table)
            .map(|(p, q)| lambda * p + (1.0 - lambda) * q)
            .collect();
        Ok(Self { table, ..*self })
    }

    /// Weighted sum `sum_k w_k B_k`. Weights are used as given.
    pub fn weighted_sum<'a>(parts: impl IntoIterator<Item = (f64, &'a ConditionalBox)>) -> Result<Self> {
        let mut iter = parts.into_iter();
        let (w0, first) = iter
            .next()
            .ok_or_else(|| Error::Structure("empty mixture".into()))?;
        let mut acc = Self {
            table: first.table.iter().map(|p| w0 * p).collect(),
            ..*first
        };
        for (w, b) in iter {
            acc.check_same_shape(b)?;
            for (t, p) in acc.table.iter_mut().zip(&b.table) {
                *t += w * p;
            }
        }
        Ok(acc)
    }

    /// Largest entrywise deviation from `other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self
            .table
            .iter()
            .zip(&other.table)
            .map(|(p, q)| (p - q).abs())
            .fold(0.0, f64::max))
    }

    /// Checks nonnegativity, normalisation and both no-signalling families.
    pub fn validate(&self, tol: f64) -> Validation {
        let mut violations = Vec::new();
        for x in 0..self.n_a {
            for y in 0..self.n_b {
                for a in 0..2 {
                    for b in 0..2 {
                        let p = self.prob(a, b, x, y);
                        if !(p >= -tol) {
                            violations.push(Violation::Negative { a, b, x, y, value: p });
                        }
                    }
                }
                let total: f64 = self.context(x, y).iter().sum();
                if !((total - 1.0).abs() <= tol) {
                    violations.push(Violation::Normalization { x, y, total });
                }
            }
        }
        // Alice's marginal must not depend on y; compare every y against y = 0.
        for x in 0..self.n_a {
            for a in 0..2 {
                let reference = self.alice_marginal(a, x, 0);
                for y in 1..self.n_b {
                    let m = self.alice_marginal(a, x, y);
                    if !((m - reference).abs() <= tol) {
                        violations.push(Violation::AliceMarginal {
                            a,
                            x,
                            y,
                            deviation: m - reference,
                        });
                    }
                }
            }
        }
        for y in 0..self.n_b {
            for b in 0..2 {
                let reference = self.bob_marginal(b, 0, y);
                for x in 1..self.n_a {
                    let m = self.bob_marginal(b, x, y);
                    if !((m - reference).abs() <= tol) {
                        violations.push(Violation::BobMarginal {
                            b,
                            x,
                            y,
                            deviation: m - reference,
                        });
                    }
                }
            }
        }
        Validation { violations }
    }

    /// Evaluates a Bell functional on this box.
    pub fn evaluate(&self, functional: BellFunctional) -> Result<BellValue> {
        let value = match functional {
            BellFunctional::Chsh => chsh_value(self)?,
            BellFunctional::Chain(n) => chain_value(self, n)?,
            BellFunctional::Corr => corr_value(self)?,
        };
        Ok(BellValue { functional, value })
    }
}

/// A single failed constraint reported by [`ConditionalBox::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Negative { a: usize, b: usize, x: usize, y: usize, value: f64 },
    Normalization { x: usize, y: usize, total: f64 },
    /// `P(a|x)` measured with Bob's setting `y` differs from the `y = 0` value.
    AliceMarginal { a: usize, x: usize, y: usize, deviation: f64 },
    /// `P(b|y)` measured with Alice's setting `x` differs from the `x = 0` value.
    BobMarginal { b: usize, x: usize, y: usize, deviation: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Violation::Negative { a, b, x, y, value } => {
                write!(f, "P({a}{b}|{x}{y}) = {value:e} is negative")
            }
            Violation::Normalization { x, y, total } => {
                write!(f, "context ({x},{y}) sums to {total}")
            }
            Violation::AliceMarginal { a, x, y, deviation } => {
                write!(f, "P(a={a}|x={x}) shifts by {deviation:e} when y={y}")
            }
            Violation::BobMarginal { b, x, y, deviation } => {
                write!(f, "P(b={b}|y={y}) shifts by {deviation:e} when x={x}")
            }
        }
    }
}

/// Outcome of [`ConditionalBox::validate`].
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Validation {
    pub violations: Vec<Violation>,
}

impl Validation {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has_alice_signalling(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::AliceMarginal { .. }))
    }

    pub fn has_bob_signalling(&self) -> bool {
        self.violations
            .iter()
            .any(|v| matches!(v, Violation::BobMarginal { .. }))
    }
}

/// Bell-type functionals evaluated on boxes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BellFunctional {
    Chsh,
    Chain(usize),
    Corr,
}

impl BellFunctional {
    /// Range of values attainable by no-signalling boxes.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            BellFunctional::Chsh => (0.0, 4.0),
            BellFunctional::Chain(n) => (0.0, 2.0 * n as f64),
            BellFunctional::Corr => (-1.0, 1.0),
        }
    }
}

impl fmt::Display for BellFunctional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BellFunctional::Chsh => f.write_str("CHSH"),
            BellFunctional::Chain(n) => write!(f, "CHAIN({n})"),
            BellFunctional::Corr => f.write_str("CORR"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellValue {
    pub functional: BellFunctional,
    pub value: f64,
}

fn require_settings(bx: &ConditionalBox, n_a: usize, n_b: usize, what: &str) -> Result<()> {
    if bx.n_a < n_a || bx.n_b < n_b {
        return Err(Error::Structure(format!(
            "{what} needs at least {n_a} Alice and {n_b} Bob settings, box has {}x{}",
            bx.n_a, bx.n_b
        )));
    }
    Ok(())
}

/// `P(a1 != b0) + P(a1 != b1) + P(a2 != b1) + P(a2 = b0)`.
///
/// Alice's setting 0 is the key setting and takes no part in the test.
pub fn chsh_value(bx: &ConditionalBox) -> Result<f64> {
    require_settings(bx, 3, 2, "CHSH")?;
    Ok(bx.p_differ(1, 0) + bx.p_differ(1, 1) + bx.p_differ(2, 1) + bx.p_equal(2, 0))
}

/// One clause of the chained inequality: the probability that `(x, y)`
/// yields equal outputs (`want_equal`) or different outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ChainClause {
    pub x: usize,
    pub y: usize,
    pub want_equal: bool,
}

/// The `2n` clauses of the chained functional. Alice's test settings are
/// `1..=n`, Bob's are `0..n`; the last clause pairs `x = n` with `y = 0`
/// and counts agreements, since Bob's `y = n` output is `b0` complemented.
pub fn chain_clauses(n: usize) -> Vec<ChainClause> {
    let mut out = Vec::with_capacity(2 * n);
    for i in 1..=n {
        out.push(ChainClause { x: i, y: i - 1, want_equal: false });
        if i < n {
            out.push(ChainClause { x: i, y: i, want_equal: false });
        } else {
            out.push(ChainClause { x: n, y: 0, want_equal: true });
        }
    }
    out
}

pub fn chain_value(bx: &ConditionalBox, n: usize) -> Result<f64> {
    if n < 2 {
        return Err(Error::Structure(format!("chain length must be at least 2, got {n}")));
    }
    require_settings(bx, n + 1, n, "CHAIN")?;
    Ok(chain_clauses(n)
        .into_iter()
        .map(|c| if c.want_equal { bx.p_equal(c.x, c.y) } else { bx.p_differ(c.x, c.y) })
        .sum())
}

/// `P(a0 = b0) - P(a0 != b0)` on the key setting.
pub fn corr_value(bx: &ConditionalBox) -> Result<f64> {
    Ok(bx.p_equal(0, 0) - bx.p_differ(0, 0))
}

/// A local deterministic strategy: each setting has a fixed output.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DeterministicBox {
    pub alice: Vec<u8>,
    pub bob: Vec<u8>,
}

impl DeterministicBox {
    pub fn to_box(&self) -> ConditionalBox {
        ConditionalBox::from_fn(self.alice.len(), self.bob.len(), |a, b, x, y| {
            if self.alice[x] as usize == a && self.bob[y] as usize == b {
                1.0
            } else {
                0.0
            }
        })
    }
}

fn bits(mask: usize, len: usize) -> Vec<u8> {
    (0..len).map(|i| ((mask >> i) & 1) as u8).collect()
}

/// All `2^n_a * 2^n_b` deterministic strategies.
pub fn enumerate_deterministic(n_a: usize, n_b: usize) -> Result<Vec<DeterministicBox>> {
    if n_a > MAX_ENUM_SETTINGS || n_b > MAX_ENUM_SETTINGS {
        return Err(Error::Limit(format!(
            "deterministic enumeration limited to {MAX_ENUM_SETTINGS} settings per party, got {n_a}x{n_b}"
        )));
    }
    let mut out = Vec::with_capacity(1 << (n_a + n_b));
    for ma in 0..1usize << n_a {
        for mb in 0..1usize << n_b {
            out.push(DeterministicBox { alice: bits(ma, n_a), bob: bits(mb, n_b) });
        }
    }
    Ok(out)
}

/// How one of Alice's settings behaves in a [`CorrelationBox`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AliceResponse {
    /// Fixed output, independent of Bob.
    Fixed(u8),
    /// Uniformly random output with `a XOR b = pattern[y]` for every Bob setting.
    Coupled(Vec<u8>),
}

/// PR-type box: Bob's outputs are uniformly random for every setting and each
/// of Alice's settings is either fixed or tied to Bob's output by a parity pattern.
///
/// When the coupled settings realise the PR clause pattern on some 2x2
/// sub-scenario these are the nonlocal extremal points used by Eve; the
/// family also contains some local members, which is harmless for mixtures.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CorrelationBox {
    pub alice: Vec<AliceResponse>,
    pub n_b: usize,
}

impl CorrelationBox {
    /// The box winning every chained clause: `a XOR b = 0` on all pairs
    /// except `(n, 0)` where `a XOR b = 1`. Alice's key setting copies `b0`.
    pub fn chained_pr(n: usize) -> Self {
        let alice = (0..=n)
            .map(|x| {
                AliceResponse::Coupled((0..n).map(|y| u8::from(x == n && y == 0)).collect())
            })
            .collect();
        Self { alice, n_b: n }
    }

    pub fn to_box(&self) -> ConditionalBox {
        ConditionalBox::from_fn(self.alice.len(), self.n_b, |a, b, x, y| match &self.alice[x] {
            AliceResponse::Fixed(v) => {
                if a == *v as usize {
                    0.5
                } else {
                    0.0
                }
            }
            AliceResponse::Coupled(pattern) => {
                if (a ^ b) == pattern[y] as usize {
                    0.5
                } else {
                    0.0
                }
            }
        })
    }
}

/// Correlation boxes for an `n_a x n_b` scenario.
///
/// With `allow_fixed` every Alice setting ranges over the two fixed outputs and
/// the `2^n_b` coupling patterns; without it only fully coupled boxes are listed.
pub fn enumerate_correlation_boxes(n_a: usize, n_b: usize, allow_fixed: bool) -> Result<Vec<CorrelationBox>> {
    if n_a > MAX_ENUM_SETTINGS || n_b > MAX_ENUM_SETTINGS {
        return Err(Error::Limit(format!(
            "correlation enumeration limited to {MAX_ENUM_SETTINGS} settings per party, got {n_a}x{n_b}"
        )));
    }
    let mut choices: Vec<AliceResponse> = (0..1usize << n_b)
        .map(|m| AliceResponse::Coupled(bits(m, n_b)))
        .collect();
    if allow_fixed {
        choices.push(AliceResponse::Fixed(0));
        choices.push(AliceResponse::Fixed(1));
    }
    let total = (choices.len() as f64).powi(n_a as i32);
    if total > MAX_CORRELATION_VERTICES as f64 {
        return Err(Error::Limit(format!(
            "{total} correlation boxes exceed the limit of {MAX_CORRELATION_VERTICES}"
        )));
    }
    let k = choices.len();
    let total = total as usize;
    let mut out = Vec::with_capacity(total);
    for mut code in 0..total {
        let alice = (0..n_a)
            .map(|_| {
                let c = choices[code % k].clone();
                code /= k;
                c
            })
            .collect();
        out.push(CorrelationBox { alice, n_b });
    }
    Ok(out)
}

/// Linear coefficients of the chained functional over the box table.
pub(crate) fn chain_coefficients(n_a: usize, n_b: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; 4 * n_a * n_b];
    for clause in chain_clauses(n) {
        for a in 0..2 {
            for b in 0..2 {
                if (a == b) == clause.want_equal {
                    c[cell(n_b, a, b, clause.x, clause.y)] += 1.0;
                }
            }
        }
    }
    c
}

/// Minimum of the chained functional over all no-signalling boxes of the
/// `(n + 1) x n` chained scenario with `P(b = 0 | y = 0) = beta`.
pub fn min_chain_given_marginal(n: usize, beta: f64) -> Result<f64> {
    if !(2..=MAX_LP_CHAIN).contains(&n) {
        return Err(Error::Limit(format!("chain LP supports n in 2..={MAX_LP_CHAIN}, got {n}")));
    }
    check_range("beta", beta, 0.0, 1.0, "[0, 1]")?;
    let (n_a, n_b) = (n + 1, n);
    let dim = 4 * n_a * n_b;
    let mut lp = LinearProgram::new(chain_coefficients(n_a, n_b, n));

    for x in 0..n_a {
        for y in 0..n_b {
            let mut row = vec![0.0; dim];
            for a in 0..2 {
                for b in 0..2 {
                    row[cell(n_b, a, b, x, y)] = 1.0;
                }
            }
            lp.add_equality(row, 1.0);
        }
    }
    for x in 0..n_a {
        for a in 0..2 {
            for y in 1..n_b {
                let mut row = vec![0.0; dim];
                for b in 0..2 {
                    row[cell(n_b, a, b, x, y)] += 1.0;
                    row[cell(n_b, a, b, x, 0)] -= 1.0;
                }
                lp.add_equality(row, 0.0);
            }
        }
    }
    for y in 0..n_b {
        for b in 0..2 {
            for x in 1..n_a {
                let mut row = vec![0.0; dim];
                for a in 0..2 {
                    row[cell(n_b, a, b, x, y)] += 1.0;
                    row[cell(n_b, a, b, 0, y)] -= 1.0;
                }
                lp.add_equality(row, 0.0);
            }
        }
    }
    let mut pin = vec![0.0; dim];
    pin[cell(n_b, 0, 0, 0, 0)] = 1.0;
    pin[cell(n_b, 1, 0, 0, 0)] = 1.0;
    lp.add_equality(pin, beta);

    let solution = lp::solve(&lp, Sense::Minimize)?;
    Ok(solution.objective)
}
