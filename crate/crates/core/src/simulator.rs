//! Monte-Carlo runs of the chained protocol.
//!
//! Each round draws settings (`x = 0` with probability `q`, `y = 0` with
//! probability `q'`, other settings uniformly), then outputs from either the
//! honest Werner box or a component of Eve's attack mixture. Round `i` uses
//! its own ChaCha8 stream `(seed, i)`, so transcripts do not depend on how
//! rounds are scheduled across threads.

use std::fmt;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::attack::{build_attack_mixture, eve_info_bound, AttackDecomposition, StrategyId};
use crate::correlations::werner_box;
use crate::error::{check_range, Error, Result};
use crate::keyrate::capacity_centered;
use crate::nsbox::{chain_clauses, ConditionalBox};

/// KEY rounds required before Eve's information is estimated.
pub const MIN_KEY_ROUNDS_FOR_EVE: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProtocolConfig {
    pub n: usize,
    pub p: f64,
    pub rounds: usize,
    /// Probability that Alice picks the key setting.
    pub q: f64,
    /// Probability that Bob picks the key setting.
    pub q_prime: f64,
    pub flip_r: f64,
    pub seed: u64,
    pub adversarial: bool,
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::OutOfRange { name: "N", value: self.n as f64, expected: "N >= 2" });
        }
        check_range("p", self.p, 0.0, 1.0, "[0, 1]")?;
        if self.rounds == 0 {
            return Err(Error::OutOfRange { name: "rounds", value: 0.0, expected: ">= 1" });
        }
        for (name, v) in [("q", self.q), ("q'", self.q_prime)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::OutOfRange { name, value: v, expected: "(0, 1)" });
            }
        }
        check_range("flip_r", self.flip_r, 0.0, 0.5, "[0, 1/2]")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SiftTag {
    Key,
    Test,
    Discard,
}

impl SiftTag {
    pub fn of(x: usize, y: usize) -> Self {
        match (x, y) {
            (0, 0) => SiftTag::Key,
            (0, _) => SiftTag::Discard,
            _ => SiftTag::Test,
        }
    }
}

impl fmt::Display for SiftTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SiftTag::Key => "KEY",
            SiftTag::Test => "TEST",
            SiftTag::Discard => "DISCARD",
        })
    }
}

/// Which attack component Eve prepared in a round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EveTag {
    pub component: usize,
    pub class: StrategyId,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Round {
    pub x: usize,
    pub y: usize,
    pub a: u8,
    /// Bob's recorded output, after preprocessing on KEY rounds.
    pub b: u8,
    pub sift_tag: SiftTag,
    /// Only present in adversarial runs; never used by estimation.
    pub eve_component: Option<EveTag>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub config: ProtocolConfig,
    pub rounds: Vec<Round>,
    pub attack: Option<AttackDecomposition>,
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.value - target).abs() <= sigmas * self.std_error
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimationReport {
    /// `None` until every chained clause has at least one TEST round.
    pub chain_est: Option<Estimate>,
    /// `None` without KEY rounds.
    pub qber_est: Option<Estimate>,
    pub key_count: usize,
    pub test_count: usize,
    pub eve_empirical_info: Option<Estimate>,
}

fn sample_context(probs: [f64; 4], u: f64) -> (u8, u8) {
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return ((k >> 1) as u8, (k & 1) as u8);
        }
    }
    // Rounding left u above the running sum; take the last nonzero cell.
    let k = probs.iter().rposition(|&p| p > 0.0).unwrap_or(3);
    ((k >> 1) as u8, (k & 1) as u8)
}

fn round_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

enum Source<'a> {
    Honest(ConditionalBox),
    Attack { attack: &'a AttackDecomposition, cumulative: Vec<f64> },
}

fn simulate_round(cfg: &ProtocolConfig, source: &Source<'_>, index: usize) -> Round {
    let mut rng = round_rng(cfg.seed, index);
    let n = cfg.n;
    let x = if rng.random::<f64>() < cfg.q { 0 } else { 1 + rng.random_range(0..n) };
    let y = if rng.random::<f64>() < cfg.q_prime { 0 } else { 1 + rng.random_range(0..n - 1) };
    let (probs, eve_component) = match source {
        Source::Honest(bx) => (bx.context(x, y), None),
        Source::Attack { attack, cumulative } => {
            let u = rng.random::<f64>();
            let k = cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1);
            let comp = &attack.components.as_ref().expect("attack has components")[k];
            (comp.bx.context(x, y), Some(EveTag { component: k, class: comp.class }))
        }
    };
    let (a, mut b) = sample_context(probs, rng.random::<f64>());
    let sift_tag = SiftTag::of(x, y);
    if sift_tag == SiftTag::Key && cfg.flip_r > 0.0 && rng.random::<f64>() < cfg.flip_r {
        b ^= 1;
    }
    Round { x, y, a, b, sift_tag, eve_component }
}

fn generate(cfg: &ProtocolConfig, source: &Source<'_>) -> Vec<Round> {
    (0..cfg.rounds)
        .into_par_iter()
        .map(|i| simulate_round(cfg, source, i))
        .collect()
}

/// Runs the protocol. Adversarial runs build Eve's mixture for the Werner box.
pub fn run(config: &ProtocolConfig) -> Result<(Transcript, EstimationReport)> {
    config.validate()?;
    if config.adversarial {
        let attack = build_attack_mixture(&werner_box(config.p, config.n)?)?;
        return run_with_attack(config, attack);
    }
    let source = Source::Honest(werner_box(config.p, config.n)?);
    let transcript = Transcript { config: *config, rounds: generate(config, &source), attack: None };
    let report = estimate(&transcript);
    Ok((transcript, report))
}

/// Runs the protocol with outputs drawn from an explicit attack mixture.
pub fn run_with_attack(
    config: &ProtocolConfig,
    attack: AttackDecomposition,
) -> Result<(Transcript, EstimationReport)> {
    config.validate()?;
    let components = attack
        .components
        .as_ref()
        .ok_or_else(|| Error::Structure("attack mixture carries no components".into()))?;
    if components
        .iter()
        .any(|c| c.bx.n_alice() != config.n + 1 || c.bx.n_bob() != config.n)
    {
        return Err(Error::Structure(format!("attack components do not match N = {}", config.n)));
    }
    let mut cumulative = Vec::with_capacity(components.len());
    let mut acc = 0.0;
    for c in components {
        acc += c.weight;
        cumulative.push(acc);
    }
    let rounds = generate(config, &Source::Attack { attack: &attack, cumulative });
    let mut transcript = Transcript { config: *config, rounds, attack: Some(attack) };
    let mut report = estimate(&transcript);
    report.eve_empirical_info = eve_accuracy(&transcript).ok();
    transcript.config.adversarial = true;
    Ok((transcript, report))
}

fn binomial(successes: usize, trials: usize) -> Estimate {
    let f = successes as f64 / trials as f64;
    Estimate { value: f, std_error: (f * (1.0 - f) / trials as f64).sqrt() }
}

/// Public-data estimates: QBER on KEY rounds and the chained value from the
/// TEST rounds whose settings form a clause.
pub fn estimate(transcript: &Transcript) -> EstimationReport {
    let n = transcript.config.n;
    let clauses = chain_clauses(n);
    let mut clause_trials = vec![0usize; clauses.len()];
    let mut clause_hits = vec![0usize; clauses.len()];
    let (mut key_count, mut key_errors, mut test_count) = (0, 0, 0);

    for r in &transcript.rounds {
        match r.sift_tag {
            SiftTag::Key => {
                key_count += 1;
                key_errors += usize::from(r.a != r.b);
            }
            SiftTag::Test => {
                test_count += 1;
                for (k, c) in clauses.iter().enumerate() {
                    if c.x == r.x && c.y == r.y {
                        clause_trials[k] += 1;
                        clause_hits[k] += usize::from((r.a == r.b) == c.want_equal);
                    }
                }
            }
            SiftTag::Discard => {}
        }
    }

    let chain_est = clause_trials.iter().all(|&t| t > 0).then(|| {
        let (value, var) = clause_trials
            .iter()
            .zip(&clause_hits)
            .map(|(&t, &h)| binomial(h, t))
            .fold((0.0, 0.0), |(v, s2), e| (v + e.value, s2 + e.std_error * e.std_error));
        Estimate { value, std_error: var.sqrt() }
    });
    let qber_est = (key_count > 0).then(|| binomial(key_errors, key_count));
    EstimationReport { chain_est, qber_est, key_count, test_count, eve_empirical_info: None }
}

/// Relative frequencies of every context; contexts never drawn stay uniform.
pub fn empirical_box(transcript: &Transcript) -> (ConditionalBox, Vec<usize>) {
    let n = transcript.config.n;
    let (n_a, n_b) = (n + 1, n);
    let mut counts = vec![[0usize; 4]; n_a * n_b];
    for r in &transcript.rounds {
        counts[r.x * n_b + r.y][((r.a as usize) << 1) | r.b as usize] += 1;
    }
    let totals: Vec<usize> = counts.iter().map(|c| c.iter().sum()).collect();
    let bx = ConditionalBox::from_fn(n_a, n_b, |a, b, x, y| {
        let k = x * n_b + y;
        if totals[k] == 0 {
            0.25
        } else {
            counts[k][(a << 1) | b] as f64 / totals[k] as f64
        }
    });
    (bx, totals)
}

/// Plug-in estimate of `I(B:E)` on KEY rounds, where Eve's variable is
/// Bob's predetermined key bit for components that fix it and a blank
/// symbol otherwise.
///
/// The standard error is the delta-method term plus the plug-in bias scale
/// `dof / (2 n ln 2)`, which dominates when the true information is zero.
pub fn eve_accuracy(transcript: &Transcript) -> Result<Estimate> {
    let attack = transcript
        .attack
        .as_ref()
        .and_then(|a| a.components.as_ref())
        .ok_or_else(|| Error::InsufficientData("transcript has no attack record".into()))?;
    let mut joint = [[0usize; 2]; 3];
    let mut total = 0usize;
    for r in transcript.rounds.iter().filter(|r| r.sift_tag == SiftTag::Key) {
        let tag = r
            .eve_component
            .ok_or_else(|| Error::InsufficientData("KEY round without Eve's record".into()))?;
        let e = attack[tag.component].bob_key_bit.map_or(2, usize::from);
        joint[e][r.b as usize] += 1;
        total += 1;
    }
    if total < MIN_KEY_ROUNDS_FOR_EVE {
        return Err(Error::InsufficientData(format!(
            "{total} KEY rounds, need at least {MIN_KEY_ROUNDS_FOR_EVE}"
        )));
    }
    let n = total as f64;
    let pe: Vec<f64> = joint.iter().map(|row| (row[0] + row[1]) as f64 / n).collect();
    let pb: Vec<f64> = (0..2).map(|b| joint.iter().map(|row| row[b]).sum::<usize>() as f64 / n).collect();
    let (mut mi, mut second) = (0.0, 0.0);
    for (e, row) in joint.iter().enumerate() {
        for (b, &count) in row.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let pj = count as f64 / n;
            let l = (pj / (pe[e] * pb[b])).log2();
            mi += pj * l;
            second += pj * l * l;
        }
    }
    let observed_e = pe.iter().filter(|&&p| p > 0.0).count();
    let observed_b = pb.iter().filter(|&&p| p > 0.0).count();
    let dof = (observed_e.saturating_sub(1) * observed_b.saturating_sub(1)) as f64;
    let std_error = ((second - mi * mi).max(0.0) / n).sqrt() + dof / (2.0 * n * std::f64::consts::LN_2);
    Ok(Estimate { value: mi.max(0.0), std_error })
}

/// Shannon-limit key length from the public estimates:
/// `floor(key_count * max(0, 1 - h(qber) - eve_info_bound(chain_est, r)))`.
pub fn achievable_key_length(report: &EstimationReport, config: &ProtocolConfig) -> Result<u64> {
    let (Some(chain), Some(qber)) = (report.chain_est, report.qber_est) else {
        return Ok(0);
    };
    if report.key_count == 0 {
        return Ok(0);
    }
    let qber = qber.value.min(0.5);
    let i_ab = capacity_centered(1.0 - 2.0 * qber);
    let rate = (i_ab - eve_info_bound(chain.value.max(0.0), config.flip_r)?).max(0.0);
    Ok((report.key_count as f64 * rate).floor() as u64)
}

impl Transcript {
    /// Writes `round_index,x,y,a,b,sift_tag[,eve_component]` records with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        let with_eve = self.attack.is_some();
        out.write_all(b"round_index,x,y,a,b,sift_tag")?;
        if with_eve {
            out.write_all(b",eve_component")?;
        }
        out.write_all(b"\n")?;
        for (i, r) in self.rounds.iter().enumerate() {
            write!(out, "{i},{},{},{},{},{}", r.x, r.y, r.a, r.b, r.sift_tag)?;
            if with_eve {
                match r.eve_component {
                    Some(tag) => write!(out, ",{}", tag.class)?,
                    None => out.write_all(b",")?,
                }
            }
            out.write_all(b"\n")?;
        }
        out.flush()
    }
}
