//! Mean-field dynamics of the three-throw game, the critical box ratio, and Monte
//! Carlo simulations of the game itself.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::heuristic::sample_lambda_triple_scored;
use crate::peeling::{KnownSupportGame, ThrowAssignment};
use crate::poly::{all_monomials, monomial_count};
use crate::rng::{seeded, SeedRng};
use rand::Rng;

/// Default truncation of the occupancy distribution.
pub const DEFAULT_K_MAX: usize = 64;

// binomials switch to log space above this row
const EXACT_BINOMIAL_ROWS: usize = 40;

/// Expected fraction `p_k` of the `t` balls sitting in a box with `k` balls, for one
/// throw in one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundDistribution {
    p: Vec<f64>,
    tail: f64,
    sigma: f64,
}

impl RoundDistribution {
    fn from_p(p: Vec<f64>, tail: f64) -> Self {
        let sigma = p.iter().sum();
        RoundDistribution { p, tail, sigma }
    }

    /// `p_1, ..., p_{k_max}`.
    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// `p_k` for `k >= 1`; zero beyond the truncation.
    pub fn p_k(&self, k: usize) -> f64 {
        assert!(k >= 1, "occupancies start at 1");
        self.p.get(k - 1).copied().unwrap_or(0.0)
    }

    pub fn k_max(&self) -> usize {
        self.p.len()
    }

    /// Bound on the mass beyond `k_max`, which is also a bound on the truncation error
    /// of every entry.
    pub fn tail(&self) -> f64 {
        self.tail
    }

    /// Fraction of balls still in play.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Probability that a ball in a shared box of the first throw is private in one of
    /// the other two.
    pub fn pi(&self) -> f64 {
        if self.sigma <= 0.0 {
            return 0.0;
        }
        let x = self.p_k(1) / self.sigma;
        (2.0 - x) * x
    }

    pub fn is_zero(&self) -> bool {
        self.sigma == 0.0
    }
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for i in 1..=n {
        out[i] = out[i - 1] + (i as f64).ln();
    }
    out
}

/// Round-one distribution: `p_{1,k} = e^{-1/tau} / ((k-1)! tau^{k-1})`.
pub fn initial_distribution(tau: f64, k_max: usize) -> Result<RoundDistribution> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Precondition(format!(
            "tau must be positive, got {tau}"
        )));
    }
    if k_max < 8 {
        return Err(Error::Precondition(format!(
            "k_max must be at least 8, got {k_max}"
        )));
    }
    let lf = ln_factorials(k_max + 1);
    let ln_p = |k: usize| -1.0 / tau - lf[k - 1] - (k - 1) as f64 * tau.ln();
    let p: Vec<f64> = (1..=k_max).map(|k| ln_p(k).exp()).collect();
    // p_{k+1}/p_k = 1/(k tau), so past k_max the terms shrink at least geometrically
    // once (k_max + 1) tau > 1
    let ratio = 1.0 / ((k_max + 1) as f64 * tau);
    let tail = if ratio < 1.0 {
        ln_p(k_max + 1).exp() / (1.0 - ratio)
    } else {
        (1.0 - p.iter().sum::<f64>()).max(0.0)
    };
    Ok(RoundDistribution::from_p(p, tail))
}

/// One round of the recurrence
/// `p_{i+1,j} = sum_{k >= max(2,j)} C(k-1, j-1) pi^{k-j} (1-pi)^j p_{i,k}`.
///
/// Box occupancies only shrink, so the mass beyond `k_max` never exceeds its round-one
/// value; the tail bound is carried over unchanged.
pub fn step(dist: &RoundDistribution) -> RoundDistribution {
    let k_max = dist.k_max();
    if dist.is_zero() {
        return RoundDistribution::from_p(vec![0.0; k_max], dist.tail);
    }
    let pi = dist.pi();
    let keep = 1.0 - pi;
    let exact_rows = k_max.min(EXACT_BINOMIAL_ROWS);
    // pascal[m][l] = C(m, l) for m < exact_rows
    let mut pascal = vec![vec![1.0f64; 1]; exact_rows];
    for m in 1..exact_rows {
        let prev = &pascal[m - 1];
        let mut row = vec![1.0; m + 1];
        for l in 1..m {
            row[l] = prev[l - 1] + prev[l];
        }
        pascal[m] = row;
    }
    let lf = ln_factorials(k_max);
    let (ln_pi, ln_keep) = (pi.ln(), keep.ln());
    let pi_pow: Vec<f64> = (0..=k_max).map(|e| pi.powi(e as i32)).collect();
    let keep_pow: Vec<f64> = (0..=k_max).map(|e| keep.powi(e as i32)).collect();

    let mut next = vec![0.0; k_max];
    for k in 2..=k_max {
        let pk = dist.p[k - 1];
        if pk == 0.0 {
            continue;
        }
        for j in 1..=k {
            let weight = if k <= exact_rows {
                pascal[k - 1][j - 1] * pi_pow[k - j] * keep_pow[j]
            } else {
                let mut ln_w = lf[k - 1] - lf[j - 1] - lf[k - j];
                if k > j {
                    ln_w += (k - j) as f64 * ln_pi;
                }
                ln_w += j as f64 * ln_keep;
                ln_w.exp()
            };
            next[j - 1] += weight * pk;
        }
    }
    RoundDistribution::from_p(next, dist.tail)
}

/// Rounds `1, 2, ...` starting from [`initial_distribution`], stopping after
/// `max_rounds` entries or at the first round with `sigma < stop_sigma`.
pub fn iterate(tau: f64, max_rounds: usize, stop_sigma: f64) -> Result<Vec<RoundDistribution>> {
    iterate_with(tau, DEFAULT_K_MAX, max_rounds, stop_sigma)
}

pub fn iterate_with(
    tau: f64,
    k_max: usize,
    max_rounds: usize,
    stop_sigma: f64,
) -> Result<Vec<RoundDistribution>> {
    let mut out = Vec::new();
    if max_rounds == 0 {
        return Ok(out);
    }
    out.push(initial_distribution(tau, k_max)?);
    while out.len() < max_rounds && out.last().unwrap().sigma() >= stop_sigma {
        let next = step(out.last().unwrap());
        out.push(next);
    }
    Ok(out)
}

/// `i,k,p` rows (rounds and occupancies from 1) for `k <= k_cols`, five decimals.
pub fn distribution_csv(rounds: &[RoundDistribution], k_cols: usize) -> String {
    let mut out = String::from("i,k,p\n");
    for (i, d) in rounds.iter().enumerate() {
        for k in 1..=k_cols {
            writeln!(out, "{},{},{:.5}", i + 1, k, d.p_k(k)).unwrap();
        }
    }
    out
}

/// Settings for deciding whether a box ratio wins or loses in the limit.
#[derive(Debug, Clone)]
pub struct ClassifierConfig {
    pub rounds: usize,
    pub k_max: usize,
    /// `sigma` below this counts as a win.
    pub win_below: f64,
    /// `sigma` that settles above this counts as a loss.
    pub lose_above: f64,
    /// `sigma` has settled once `p_1` (which bounds the per-round drop) is this small.
    pub settled_p1: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            rounds: 10_000,
            k_max: DEFAULT_K_MAX,
            win_below: 1e-8,
            lose_above: 1e-3,
            settled_p1: 1e-14,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    Win { round: usize },
    Lose { sigma: f64 },
    Indeterminate { sigma: f64 },
}

pub fn classify(tau: f64, config: &ClassifierConfig) -> Result<Verdict> {
    let mut d = initial_distribution(tau, config.k_max)?;
    for round in 1..=config.rounds {
        if d.sigma() < config.win_below {
            return Ok(Verdict::Win { round });
        }
        if round < config.rounds {
            d = step(&d);
        }
    }
    if d.sigma() > config.lose_above && d.p_k(1) < config.settled_p1 {
        Ok(Verdict::Lose { sigma: d.sigma() })
    } else {
        Ok(Verdict::Indeterminate { sigma: d.sigma() })
    }
}

/// Classifies with the configured budget, then once more with ten times the rounds.
fn classify_widening(tau: f64, config: &ClassifierConfig) -> Result<Verdict> {
    let first = classify(tau, config)?;
    if !matches!(first, Verdict::Indeterminate { .. }) {
        return Ok(first);
    }
    let wide = ClassifierConfig {
        rounds: config.rounds * 10,
        ..config.clone()
    };
    classify(tau, &wide)
}

/// Bracket for the critical ratio: `lo` loses, `hi` wins.
#[derive(Debug, Clone, PartialEq)]
pub struct TauCritInterval {
    pub lo: f64,
    pub hi: f64,
    /// Ratios the classifier could not decide even with the widened budget; the
    /// search stopped there.
    pub indeterminate: Option<f64>,
}

impl TauCritInterval {
    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

pub fn estimate_tau_crit(tolerance: f64) -> Result<TauCritInterval> {
    estimate_tau_crit_with(tolerance, &ClassifierConfig::default())
}

/// Bisection between 0.3 (a clear loss) and 0.5 (a clear win).
pub fn estimate_tau_crit_with(
    tolerance: f64,
    config: &ClassifierConfig,
) -> Result<TauCritInterval> {
    if !(tolerance >= 1e-6) {
        return Err(Error::Precondition(format!(
            "tolerance must be at least 1e-6, got {tolerance}"
        )));
    }
    let (mut lo, mut hi) = (0.3, 0.5);
    for (tau, want_win) in [(lo, false), (hi, true)] {
        let v = classify_widening(tau, config)?;
        if matches!(v, Verdict::Win { .. }) != want_win {
            return Err(Error::Precondition(format!(
                "classifier gave {v:?} at the bracket end {tau}"
            )));
        }
    }
    while hi - lo > tolerance {
        let mid = 0.5 * (lo + hi);
        match classify_widening(mid, config)? {
            Verdict::Win { .. } => hi = mid,
            Verdict::Lose { .. } => lo = mid,
            Verdict::Indeterminate { .. } => {
                return Ok(TauCritInterval {
                    lo,
                    hi,
                    indeterminate: Some(mid),
                })
            }
        }
    }
    Ok(TauCritInterval {
        lo,
        hi,
        indeterminate: None,
    })
}

/// Tangency point `(x, alpha)` of `1 - exp(-x^2/alpha) = x`, where the two curves also
/// share a slope: `(2x/alpha) exp(-x^2/alpha) = 1`.
///
/// Eliminating the exponential gives `alpha = 2x(1-x)` and
/// `x / (2(1-x)) + ln(1-x) = 0`, which has one root in `(0, 1)`.
pub fn tangency_point() -> (f64, f64) {
    let f = |x: f64| x / (2.0 * (1.0 - x)) + (1.0 - x).ln();
    // f < 0 on (0, x*) and f > 0 on (x*, 1)
    let (mut lo, mut hi) = (0.5, 0.99);
    while hi - lo > 1e-15 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let x = 0.5 * (lo + hi);
    (x, 2.0 * x * (1.0 - x))
}

/// Smallest `alpha` with `1 - exp(-x^2/alpha) < x` failing for some `x` in `(0, 1)`.
pub fn tau_crit_closed_form() -> f64 {
    tangency_point().1
}

/// Counts `N_{i,k}` of remaining balls sitting in a first-throw box with `k` balls at
/// the start of round `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimTable {
    rows: Vec<Vec<u64>>,
}

impl SimTable {
    /// Rows indexed from round 1; `row[k-1]` is `N_{i,k}`.
    pub fn rows(&self) -> &[Vec<u64>] {
        &self.rows
    }

    pub fn n(&self, round: usize, k: usize) -> u64 {
        self.rows
            .get(round - 1)
            .and_then(|r| r.get(k - 1))
            .copied()
            .unwrap_or(0)
    }

    /// `Sigma_i`, the balls remaining at the start of each round.
    pub fn sums(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn csv(&self, k_cols: usize) -> String {
        let mut out = String::from("i,k,N\n");
        for i in 1..=self.rows.len() {
            for k in 1..=k_cols {
                writeln!(out, "{},{},{}", i, k, self.n(i, k)).unwrap();
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub table: SimTable,
    pub won: bool,
    pub rounds: u32,
    pub leftover: usize,
    pub boxes: usize,
}

fn occupancy_row(game: &KnownSupportGame<'_>) -> Vec<u64> {
    let occ = game.occupancy(0);
    let top = occ.iter().copied().max().unwrap_or(0) as usize;
    let mut row = vec![0u64; top];
    for &k in occ {
        if k > 0 {
            row[k as usize - 1] += k as u64;
        }
    }
    row
}

fn play_recorded(assignment: &ThrowAssignment) -> Result<SimOutcome> {
    let mut game = KnownSupportGame::new(assignment, vec![Vec::new(); assignment.throws()])?;
    let mut rows = vec![occupancy_row(&game)];
    while !game.is_stuck() {
        game.run_round();
        rows.push(occupancy_row(&game));
    }
    let leftover = game.remaining();
    Ok(SimOutcome {
        table: SimTable { rows },
        won: leftover == 0,
        rounds: game.round(),
        leftover,
        boxes: assignment.boxes_in(0),
    })
}

/// Throws `t` balls three times into `floor(tau t)` uniform boxes and plays the game.
pub fn simulate_game(t: usize, tau: f64, seed: u64) -> Result<SimOutcome> {
    if t == 0 {
        return Err(Error::Precondition(
            "the simulation needs at least one ball".into(),
        ));
    }
    if !(tau > 0.0) {
        return Err(Error::Precondition(format!(
            "tau must be positive, got {tau}"
        )));
    }
    let r = ((tau * t as f64).floor() as usize).max(1);
    let mut rng: SeedRng = seeded(seed);
    let rows: Vec<Vec<usize>> = (0..3)
        .map(|_| (0..t).map(|_| rng.gen_range(0..r)).collect())
        .collect();
    play_recorded(&ThrowAssignment::new(vec![r; 3], rows)?)
}

#[derive(Debug, Clone)]
pub struct DenseOutcome {
    pub won: bool,
    pub lambdas: [Vec<u64>; 3],
    pub t: usize,
    pub r: u64,
    pub leftover: usize,
    pub rounds: u32,
}

/// Plays the game on the full support of a product of dense polynomials of total
/// degrees `d_p` and `d_q` in `n` variables, each evaluation vector being the best of
/// `candidates` by squared box occupancy.
pub fn dense_support_experiment(
    n: usize,
    d_p: u32,
    d_q: u32,
    tau: f64,
    candidates: usize,
    seed: u64,
) -> Result<DenseOutcome> {
    let d = d_p + d_q;
    let count = monomial_count(n, d);
    if count > crate::heuristic::MAX_TERMS_BOUND as u128 {
        return Err(Error::Precondition(format!(
            "dense support with {count} monomials is too large"
        )));
    }
    let support = all_monomials(n, d);
    let t = support.len();
    let r = (tau * t as f64).floor() as u64;
    let mut rng = seeded(seed);
    let lambdas = sample_lambda_triple_scored(n, r, &support, candidates, &mut rng)?;
    let rows = lambdas
        .iter()
        .map(|l| support.iter().map(|e| e.dot_mod(l, r) as usize).collect())
        .collect();
    let sim = play_recorded(&ThrowAssignment::new(vec![r as usize; 3], rows)?)?;
    Ok(DenseOutcome {
        won: sim.won,
        lambdas,
        t,
        r,
        leftover: sim.leftover,
        rounds: sim.rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn first_round_matches_poisson() {
        let d = initial_distribution(0.5, 64).unwrap();
        assert!(close(d.p_k(1), 0.13534, 5e-6));
        assert!(close(d.p_k(2), 0.27067, 5e-6));
        let d = initial_distribution(1.0 / 3.0, 64).unwrap();
        assert!(close(d.p_k(1), 0.04979, 5e-6));
        for tau in [0.1, 0.33, 0.5, 1.14, 3.0] {
            let d = initial_distribution(tau, 64).unwrap();
            assert!(d.sigma() <= 1.0 + 1e-12);
            assert!(1.0 - d.sigma() <= d.tail() + 1e-12, "tau {tau}");
        }
        assert!(initial_distribution(0.5, 7).is_err());
        assert!(initial_distribution(0.0, 64).is_err());
    }

    #[test]
    fn one_step_at_one_half() {
        let d = step(&initial_distribution(0.5, 64).unwrap());
        assert!(close(d.p_k(1), 0.06643, 5e-6));
        assert!(close(d.sigma(), 0.64646, 5e-6));
    }

    #[test]
    fn zero_is_a_fixpoint() {
        let z = RoundDistribution::from_p(vec![0.0; 16], 0.0);
        assert_eq!(step(&z), z);
    }

    #[test]
    fn mass_identity_and_monotonicity() {
        for tau in [0.3, 1.0 / 3.0, 0.4, 0.42, 0.5, 0.8] {
            let rounds = iterate(tau, 40, 0.0).unwrap();
            for w in rounds.windows(2) {
                let (a, b) = (&w[0], &w[1]);
                if a.is_zero() {
                    assert!(b.is_zero());
                    continue;
                }
                let want = a.sigma() * (1.0 - a.p_k(1) / a.sigma()).powi(3);
                assert!(close(b.sigma(), want, 1e-12), "tau {tau}");
                if a.p_k(1) / a.sigma() > 1e-12 {
                    assert!(b.sigma() < a.sigma());
                }
            }
        }
    }

    #[test]
    fn critical_limit_row_is_bracketed() {
        // the published limit row sits between these two ratios just below criticality
        let row = |tau: f64| iterate(tau, 10_000, 0.0).unwrap().pop().unwrap();
        let (a, b) = (row(0.407263), row(0.4072635));
        let want = [
            0.00000, 0.18338, 0.11551, 0.04851, 0.01528, 0.00385, 0.00081,
        ];
        for (k, w) in want.iter().enumerate() {
            let (x, y) = (a.p_k(k + 1), b.p_k(k + 1));
            assert!(
                x.min(y) - 5e-6 <= *w && *w <= x.max(y) + 5e-6,
                "k = {}",
                k + 1
            );
        }
        assert!(b.sigma() < 0.36751 && 0.36751 < a.sigma());
    }

    #[test]
    fn csv_layout() {
        let rounds = iterate(0.5, 2, 0.0).unwrap();
        let csv = distribution_csv(&rounds, 3);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "i,k,p");
        assert_eq!(lines[1], "1,1,0.13534");
        assert_eq!(lines.len(), 7);
    }

    #[test]
    fn classifier_extremes() {
        let cfg = ClassifierConfig::default();
        assert!(matches!(classify(0.5, &cfg).unwrap(), Verdict::Win { .. }));
        match classify(1.0 / 3.0, &cfg).unwrap() {
            Verdict::Lose { sigma } => assert!(close(sigma, 0.78350, 1e-5)),
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn tangency_residuals() {
        let (x, a) = tangency_point();
        assert!(x > 0.0 && x < 1.0);
        let e = (-x * x / a).exp();
        assert!((1.0 - e - x).abs() < 1e-9);
        assert!((2.0 * x / a * e - 1.0).abs() < 1e-9);
        let tc = tau_crit_closed_form();
        assert!(tc > 0.407264 && tc < 0.407265);
    }

    #[test]
    fn single_ball_simulation() {
        let sim = simulate_game(1, 0.5, 3).unwrap();
        assert!(sim.won);
        assert_eq!(sim.rounds, 1);
        assert_eq!(sim.table.n(1, 1), 1);
    }

    #[test]
    fn simulated_sums_shrink() {
        let sim = simulate_game(2000, 0.5, 11).unwrap();
        let sums = sim.table.sums();
        assert_eq!(sums[0], 2000);
        assert!(sums.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(*sums.last().unwrap() as usize, sim.leftover);
    }

    #[test]
    fn dense_support_sizes() {
        let out = dense_support_experiment(2, 50, 50, 1.14, 12, 1).unwrap();
        assert_eq!(out.t, 5151);
        assert_eq!(out.r, 5872);
        assert_eq!(monomial_count(3, 25), 3276);
        assert!(dense_support_experiment(10, 30, 30, 1.0, 1, 1).is_err());
    }
}
