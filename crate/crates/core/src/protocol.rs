//! Monte-Carlo simulation of the parity-CHSH conference key protocol on an
//! i.i.d. device: test/key round split, parameter estimation and abort.
//!
//! Error correction and privacy amplification are not simulated; the output
//! is the statistics a run would produce.
//!
//! Randomness: ChaCha8 seeded with `rng_seed`. Round j reads exactly four
//! f64 values starting at word position 8j of the stream, so results do not
//! depend on how rounds are split across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::SweepResult;
use crate::correlations::{check_no_signaling, Correlation};
use crate::error::{check_range, Error, Result};
use crate::games::{parity_chsh_predicate, GameSpec};

pub const DEFAULT_WIN_THRESHOLD: f64 = 0.76;
pub const DEVICE_NS_TOL: f64 = 1e-8;
const WORDS_PER_ROUND: u128 = 8;
const BLOCK_ROUNDS: u64 = 8192;

fn default_threshold() -> f64 {
    DEFAULT_WIN_THRESHOLD
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub device: Correlation,
    pub num_rounds: u64,
    /// Probability that a round is a test round.
    pub mu: f64,
    #[serde(default = "default_threshold")]
    pub win_threshold: f64,
    pub rng_seed: u64,
}

impl ProtocolConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    fn validate(&self) -> Result<()> {
        if self.num_rounds == 0 {
            return Err(Error::InvalidConfig("num_rounds must be positive".into()));
        }
        check_range("mu", self.mu, 0.0, 1.0, "[0, 1]")?;
        check_range("win_threshold", self.win_threshold, 0.0, 1.0, "[0, 1]")?;
        let p = &self.device;
        let m = p.num_parties();
        if m < 2 || p.output_sizes().iter().any(|&k| k != 2) {
            return Err(Error::ShapeMismatch(
                "device needs at least two parties with binary outputs".into(),
            ));
        }
        let ins = p.input_sizes();
        if ins[0] < 2 || ins[1] < 3 || ins[2..].iter().any(|&n| n < 2) {
            return Err(Error::ShapeMismatch(format!(
                "device inputs {ins:?} lack the test settings {{0,1}} or Bob's key setting 2"
            )));
        }
        let ns = check_no_signaling(p, DEVICE_NS_TOL);
        if !ns.passed {
            return Err(Error::Signaling {
                violation: ns.worst_violation,
                location: ns.location,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairQber {
    pub parties: (usize, usize),
    pub qber: f64,
}

/// Tally of the per-round verdicts C_j: won (1), lost (0), key round (⊥).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerdictCounts {
    pub won: u64,
    pub lost: u64,
    pub not_tested: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolStats {
    pub num_rounds: u64,
    pub rounds_tested: u64,
    pub rounds_key: u64,
    /// Fraction of test rounds won; absent when no round was tested.
    pub empirical_win: Option<f64>,
    /// Key-round disagreement of party 1 with each other party.
    pub empirical_qber: Vec<PairQber>,
    pub aborted: bool,
    pub c_counts: VerdictCounts,
    /// Test rounds per (x₁, x₂) in row-major order.
    pub test_input_counts: [u64; 4],
}

impl ProtocolStats {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct Tally {
    tested: u64,
    won: u64,
    key: u64,
    inputs: [u64; 4],
}

/// Cumulative output distribution of one input tuple.
struct Sampler {
    cdf: Vec<f64>,
    outputs: Vec<Vec<usize>>,
}

impl Sampler {
    fn new(p: &Correlation, inputs: &[usize]) -> Self {
        let row = p.row(inputs);
        let mut acc = 0.0;
        let cdf = row
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        Self {
            cdf,
            outputs: crate::correlations::tuples(p.output_sizes()),
        }
    }

    fn sample(&self, u: f64) -> &[usize] {
        let k = self
            .cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1);
        &self.outputs[k]
    }
}

/// Runs the protocol and reports its statistics. An abort is reported in
/// the stats, not as an error.
pub fn run_rmw18(cfg: &ProtocolConfig) -> Result<ProtocolStats> {
    run_with_block_size(cfg, BLOCK_ROUNDS)
}

fn run_with_block_size(cfg: &ProtocolConfig, block: u64) -> Result<ProtocolStats> {
    cfg.validate()?;
    let p = &cfg.device;
    let m = p.num_parties();
    let mut key_inputs = vec![0; m];
    key_inputs[1] = 2;
    let game = GameSpec::parity_chsh(m)?;
    let key = Sampler::new(p, &key_inputs);
    let tests: Vec<(Vec<usize>, Sampler)> = game
        .test_inputs
        .iter()
        .map(|(x, _)| (x.clone(), Sampler::new(p, x)))
        .collect();
    log::debug!(
        "simulating {} rounds, mu = {}, seed = {}",
        cfg.num_rounds,
        cfg.mu,
        cfg.rng_seed
    );

    let n_blocks = cfg.num_rounds.div_ceil(block);
    let (tally, disagree) = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
            let mut t = Tally::default();
            let mut dis = vec![0u64; m - 1];
            let end = ((b + 1) * block).min(cfg.num_rounds);
            for j in b * block..end {
                rng.set_word_pos(j as u128 * WORDS_PER_ROUND);
                let u_test: f64 = rng.random();
                let u_x1: f64 = rng.random();
                let u_x2: f64 = rng.random();
                let u_out: f64 = rng.random();
                if u_test < cfg.mu {
                    let x1 = (u_x1 >= 0.5) as usize;
                    let x2 = (u_x2 >= 0.5) as usize;
                    let (x, sampler) = &tests[2 * x1 + x2];
                    let a = sampler.sample(u_out);
                    t.tested += 1;
                    t.inputs[2 * x1 + x2] += 1;
                    if parity_chsh_predicate(a, x) {
                        t.won += 1;
                    }
                } else {
                    let a = key.sample(u_out);
                    t.key += 1;
                    for k in 1..m {
                        dis[k - 1] += (a[0] != a[k]) as u64;
                    }
                }
            }
            (t, dis)
        })
        .reduce(
            || (Tally::default(), vec![0u64; m - 1]),
            |(a, da), (b, db)| {
                let mut inputs = a.inputs;
                for (i, v) in inputs.iter_mut().enumerate() {
                    *v += b.inputs[i];
                }
                (
                    Tally {
                        tested: a.tested + b.tested,
                        won: a.won + b.won,
                        key: a.key + b.key,
                        inputs,
                    },
                    da.iter().zip(&db).map(|(x, y)| x + y).collect(),
                )
            },
        );
    // Announcing the inputs publicly changes nothing for i.i.d. statistics.
    log::debug!("inputs announced; no effect on i.i.d. statistics");

    let empirical_win = (tally.tested > 0).then(|| tally.won as f64 / tally.tested as f64);
    let aborted = empirical_win.is_some_and(|w| w < cfg.win_threshold);
    if aborted {
        log::info!(
            "protocol aborted: win rate {:?} below {}",
            empirical_win,
            cfg.win_threshold
        );
    }
    let empirical_qber = (1..m)
        .map(|k| PairQber {
            parties: (0, k),
            qber: if tally.key > 0 {
                disagree[k - 1] as f64 / tally.key as f64
            } else {
                0.0
            },
        })
        .collect();
    Ok(ProtocolStats {
        num_rounds: cfg.num_rounds,
        rounds_tested: tally.tested,
        rounds_key: tally.key,
        empirical_win,
        empirical_qber,
        aborted,
        c_counts: VerdictCounts {
            won: tally.won,
            lost: tally.tested - tally.won,
            not_tested: tally.key,
        },
        test_input_counts: tally.inputs,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub s_estimate: f64,
    pub bound: f64,
    pub qber: Vec<PairQber>,
}

/// Joins simulated statistics with a bound curve: S is estimated as
/// 4·win − 2 and the bound interpolated linearly at that S.
pub fn estimated_rate_report(stats: &ProtocolStats, curve: &SweepResult) -> Result<RateReport> {
    if stats.aborted {
        return Err(Error::Aborted {
            empirical_win: stats.empirical_win.unwrap_or(f64::NAN),
        });
    }
    let win = stats
        .empirical_win
        .ok_or_else(|| Error::InvalidConfig("no test rounds to estimate S from".into()))?;
    let s = 4.0 * win - 2.0;
    let bound = if s <= 1.0 { 0.0 } else { curve.bound_at_s(s)? };
    Ok(RateReport {
        s_estimate: s,
        bound,
        qber: stats.empirical_qber.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::{isotropic_correlation, SweepRow};
    use crate::games::parity_chsh_win_probability;

    fn config(device: Correlation, n: u64, mu: f64) -> ProtocolConfig {
        ProtocolConfig {
            device,
            num_rounds: n,
            mu,
            win_threshold: DEFAULT_WIN_THRESHOLD,
            rng_seed: 11,
        }
    }

    #[test]
    fn block_split_does_not_matter() {
        let cfg = config(isotropic_correlation(0.1).unwrap(), 5000, 0.3);
        let a = run_with_block_size(&cfg, 64).unwrap();
        let b = run_with_block_size(&cfg, 5000).unwrap();
        let c = run_with_block_size(&cfg, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn uniform_device_aborts() {
        let u = Correlation::uniform(vec![2, 2, 2], vec![2, 3, 2]).unwrap();
        let stats = run_rmw18(&config(u, 20_000, 0.5)).unwrap();
        let w = stats.empirical_win.unwrap();
        assert!((w - 0.5).abs() < 0.01, "{w}");
        assert!(stats.aborted);
        assert!(estimated_rate_report(&stats, &SweepResult::default()).is_err());
    }

    #[test]
    fn no_test_rounds_when_mu_is_zero() {
        let stats = run_rmw18(&config(isotropic_correlation(0.0).unwrap(), 1000, 0.0)).unwrap();
        assert_eq!(stats.rounds_tested, 0);
        assert_eq!(stats.rounds_key, 1000);
        assert_eq!(stats.c_counts.not_tested, 1000);
        assert!(!stats.aborted);
        assert_eq!(stats.empirical_win, None);
    }

    #[test]
    fn win_rate_within_five_sigma() {
        let q = isotropic_correlation(0.05).unwrap();
        let w = parity_chsh_win_probability(&q).unwrap();
        let stats = run_rmw18(&config(q, 40_000, 0.5)).unwrap();
        let n = stats.rounds_tested as f64;
        let sigma = (w * (1.0 - w) / n).sqrt();
        assert!((stats.empirical_win.unwrap() - w).abs() <= 5.0 * sigma);
        // inputs uniform over the four test tuples, within 3σ
        let expect = n / 4.0;
        let sd = (n * 0.25 * 0.75).sqrt();
        for c in stats.test_input_counts {
            assert!((c as f64 - expect).abs() <= 3.0 * sd, "{c} vs {expect}");
        }
        assert_eq!(stats.rounds_tested + stats.rounds_key, 40_000);
    }

    #[test]
    fn config_validation() {
        let q = isotropic_correlation(0.0).unwrap();
        assert!(run_rmw18(&config(q.clone(), 0, 0.5)).is_err());
        assert!(run_rmw18(&config(q, 10, 1.5)).is_err());
        let small = Correlation::uniform(vec![2, 2, 2], vec![2, 2, 2]).unwrap();
        assert!(matches!(
            run_rmw18(&config(small, 10, 0.5)),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn report_interpolates() {
        let curve = SweepResult::new(vec![
            SweepRow {
                parameter: 1.0,
                s: 1.0,
                bound: 0.0,
            },
            SweepRow {
                parameter: 1.4,
                s: 1.4,
                bound: 0.8,
            },
        ])
        .unwrap();
        let stats = ProtocolStats {
            num_rounds: 10,
            rounds_tested: 10,
            rounds_key: 0,
            empirical_win: Some(0.8),
            empirical_qber: vec![],
            aborted: false,
            c_counts: VerdictCounts::default(),
            test_input_counts: [0; 4],
        };
        let r = estimated_rate_report(&stats, &curve).unwrap();
        assert!((r.s_estimate - 1.2).abs() < 1e-12);
        assert!((r.bound - 0.4).abs() < 1e-12);
        let at_local = ProtocolStats {
            empirical_win: Some(0.75),
            ..stats
        };
        assert_eq!(estimated_rate_report(&at_local, &curve).unwrap().bound, 0.0);
    }

    #[test]
    fn stats_json_round_trip() {
        let stats = run_rmw18(&config(isotropic_correlation(0.0).unwrap(), 100, 0.5)).unwrap();
        assert_eq!(
            ProtocolStats::from_json(&stats.to_json().unwrap()).unwrap(),
            stats
        );
    }
}
