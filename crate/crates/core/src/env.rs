//! Simulated user with hierarchical Bernoulli feedback and flip noise.

use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Result};
use crate::model::{ordered_pairs, sample_unit_ball, Catalog, Feedback, Visualization};
use crate::ridge::dot;
use crate::seed::derive_seed;

pub const DEFAULT_FLIP_PROB: f64 = 0.05;
/// Share of all combinations whose configuration and attribute pair are both liked.
pub const DEFAULT_PART_RATE: f64 = 0.041;
/// Share of liked-part combinations that are liked as a visualization.
pub const DEFAULT_COMBO_RATE: f64 = 0.22;

/// Ground-truth preferences plus the noise stream for one simulated user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserModel {
    liked_configs: BTreeSet<usize>,
    liked_pairs: BTreeSet<(usize, usize)>,
    liked_vis: BTreeSet<Visualization>,
    flip_prob: f64,
    seed: u64,
}

/// Noiseless truth for one action.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Truth {
    pub r_vis: bool,
    pub r_config: bool,
    pub r_attrs: bool,
}

impl UserModel {
    pub fn new(
        liked_configs: BTreeSet<usize>,
        liked_pairs: BTreeSet<(usize, usize)>,
        liked_vis: BTreeSet<Visualization>,
        flip_prob: f64,
        seed: u64,
    ) -> Result<Self> {
        if liked_vis.is_empty() {
            return Err(invalid("user must like at least one visualization"));
        }
        if !(0.0..0.5).contains(&flip_prob) {
            return Err(invalid(format!("flip probability must be in [0, 0.5), got {flip_prob}")));
        }
        for v in &liked_vis {
            if !liked_configs.contains(&v.config) || !liked_pairs.contains(&v.pair()) {
                return Err(invalid(format!("liked visualization {v} has a disliked part")));
            }
        }
        Ok(UserModel {
            liked_configs,
            liked_pairs,
            liked_vis,
            flip_prob,
            seed,
        })
    }

    pub fn liked_configs(&self) -> &BTreeSet<usize> {
        &self.liked_configs
    }

    pub fn liked_pairs(&self) -> &BTreeSet<(usize, usize)> {
        &self.liked_pairs
    }

    pub fn liked_vis(&self) -> &BTreeSet<Visualization> {
        &self.liked_vis
    }

    pub fn flip_prob(&self) -> f64 {
        self.flip_prob
    }

    pub fn with_flip_prob(mut self, flip_prob: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&flip_prob) {
            return Err(invalid(format!("flip probability must be in [0, 0.5), got {flip_prob}")));
        }
        self.flip_prob = flip_prob;
        Ok(self)
    }

    pub fn truth(&self, v: &Visualization) -> Truth {
        Truth {
            r_vis: self.liked_vis.contains(v),
            r_config: self.liked_configs.contains(&v.config),
            r_attrs: self.liked_pairs.contains(&v.pair()),
        }
    }

    /// Noisy hierarchical answer for `v` at `round`.
    ///
    /// Each of the three bits flips independently with `flip_prob`. Part
    /// answers are reported only when the reported visualization answer is 0.
    /// The noise draw depends only on the user seed and the round index.
    pub fn respond(&self, round: u64, v: &Visualization) -> Feedback {
        let truth = self.truth(v);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, round));
        let mut noisy = |bit: bool| bit ^ (rng.random::<f64>() < self.flip_prob);
        let r_vis = noisy(truth.r_vis);
        let r_config = noisy(truth.r_config);
        let r_attrs = noisy(truth.r_attrs);
        if r_vis {
            Feedback::liked()
        } else {
            Feedback::disliked(r_config, r_attrs)
        }
    }

    /// Best achievable noiseless reward per round.
    pub fn optimal_reward(&self) -> f64 {
        1.0
    }
}

/// Number of liked configurations and liked attributes giving a liked-part
/// share of all combinations closest to `part_rate`. Liked pairs are the
/// ordered distinct pairs of liked attributes.
pub fn part_sizes(n: usize, m: usize, part_rate: f64) -> Result<(usize, usize)> {
    if !(part_rate > 0.0 && part_rate <= 1.0) {
        return Err(invalid(format!("part rate must be in (0, 1], got {part_rate}")));
    }
    if n == 0 || m < 2 {
        return Err(invalid("need at least one configuration and two attributes"));
    }
    let total = (n * m * (m - 1)) as f64;
    let mut best = (1, 2);
    let mut best_err = f64::INFINITY;
    for k in 1..=n {
        for s in 2..=m {
            let err = ((k * s * (s - 1)) as f64 / total - part_rate).abs();
            // prefer more configurations on ties
            if err < best_err - 1e-15 || ((err - best_err).abs() <= 1e-15 && k > best.0) {
                best = (k, s);
                best_err = err;
            }
        }
    }
    let smallest = 2.0 / total;
    if part_rate < smallest / 2.0 {
        return Err(invalid(format!(
            "part rate {part_rate} is below the smallest achievable share {smallest:.4} for n={n}, m={m}"
        )));
    }
    Ok(best)
}

fn check_combo_rate(combo_rate: f64) -> Result<()> {
    if !(combo_rate > 0.0 && combo_rate <= 1.0) {
        return Err(invalid(format!("combination rate must be in (0, 1], got {combo_rate}")));
    }
    Ok(())
}

/// Marks `round(combo_rate * |product|)` (at least one) of the liked-part
/// triples as liked visualizations.
fn draw_liked_vis<R: Rng>(
    rng: &mut R,
    configs: &BTreeSet<usize>,
    pairs: &BTreeSet<(usize, usize)>,
    combo_rate: f64,
) -> BTreeSet<Visualization> {
    let product: Vec<Visualization> = configs
        .iter()
        .flat_map(|&c| pairs.iter().map(move |&(x, y)| Visualization::new(c, x, y)))
        .collect();
    let k = ((combo_rate * product.len() as f64).round() as usize).clamp(1, product.len());
    sample(rng, product.len(), k)
        .into_iter()
        .map(|i| product[i])
        .collect()
}

/// User whose liked parts are random sets sized to hit `part_rate`, with
/// `combo_rate` of the liked-part triples liked as visualizations.
pub fn gen_user_setwise(
    n: usize,
    m: usize,
    seed: u64,
    part_rate: f64,
    combo_rate: f64,
    flip_prob: f64,
) -> Result<UserModel> {
    check_combo_rate(combo_rate)?;
    let (k, s) = part_sizes(n, m, part_rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let configs: BTreeSet<usize> = sample(&mut rng, n, k).into_iter().collect();
    let attrs: BTreeSet<usize> = sample(&mut rng, m, s).into_iter().collect();
    let pairs: BTreeSet<(usize, usize)> = ordered_pairs(m, false)
        .into_iter()
        .filter(|(x, y)| attrs.contains(x) && attrs.contains(y))
        .collect();
    let liked_vis = draw_liked_vis(&mut rng, &configs, &pairs, combo_rate);
    UserModel::new(configs, pairs, liked_vis, flip_prob, derive_seed(seed, u64::MAX))
}

/// User whose liked parts are those scoring above `threshold` under random
/// latent unit vectors for configurations and attribute pairs.
pub fn gen_user_latent(
    catalog: &Catalog,
    seed: u64,
    threshold: f64,
    combo_rate: f64,
    flip_prob: f64,
) -> Result<UserModel> {
    check_combo_rate(combo_rate)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta_c = unit_vector(&mut rng, catalog.config_dim());
    let theta_a = unit_vector(&mut rng, 2 * catalog.attr_dim());
    let configs: BTreeSet<usize> = catalog
        .configs()
        .iter()
        .filter(|c| dot(&theta_c, &c.vector) > threshold)
        .map(|c| c.id)
        .collect();
    let mut pairs = BTreeSet::new();
    for &(x, y) in catalog.pairs() {
        if dot(&theta_a, &catalog.pair_feature(x, y)?) > threshold {
            pairs.insert((x, y));
        }
    }
    if configs.is_empty() || pairs.is_empty() {
        return Err(invalid(format!(
            "threshold {threshold} leaves no liked configuration or attribute pair"
        )));
    }
    let liked_vis = draw_liked_vis(&mut rng, &configs, &pairs, combo_rate);
    UserModel::new(configs, pairs, liked_vis, flip_prob, derive_seed(seed, u64::MAX))
}

fn unit_vector<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    let v = sample_unit_ball(rng, dim);
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(flip: f64) -> UserModel {
        UserModel::new(
            [0].into(),
            [(0, 1), (1, 0)].into(),
            [Visualization::new(0, 0, 1)].into(),
            flip,
            9,
        )
        .unwrap()
    }

    #[test]
    fn noiseless_responses() {
        let u = single(0.0);
        assert_eq!(u.respond(0, &Visualization::new(0, 0, 1)), Feedback::liked());
        assert_eq!(
            u.respond(1, &Visualization::new(0, 1, 0)),
            Feedback::disliked(true, true)
        );
        assert_eq!(
            u.respond(2, &Visualization::new(1, 0, 2)),
            Feedback::disliked(false, false)
        );
        assert_eq!(u.optimal_reward(), 1.0);
        assert_eq!(u.optimal_reward() - f64::from(u8::from(u.truth(&Visualization::new(0, 0, 1)).r_vis)), 0.0);
    }

    #[test]
    fn respond_is_deterministic_for_round() {
        let u = single(0.3);
        let v = Visualization::new(0, 1, 0);
        for round in 0..50 {
            assert_eq!(u.respond(round, &v), u.respond(round, &v));
        }
    }

    #[test]
    fn flip_rate_near_five_percent() {
        let u = single(0.05);
        let v = Visualization::new(0, 0, 1);
        let flips = (0..10_000).filter(|&r| !u.respond(r, &v).r_vis).count();
        let rate = flips as f64 / 10_000.0;
        assert!((rate - 0.05).abs() <= 0.01, "rate {rate}");
    }

    #[test]
    fn user_model_validation() {
        assert!(UserModel::new([0].into(), [(0, 1)].into(), BTreeSet::new(), 0.0, 0).is_err());
        assert!(UserModel::new([0].into(), [(0, 1)].into(), [Visualization::new(1, 0, 1)].into(), 0.0, 0).is_err());
        assert!(single(0.0).with_flip_prob(0.5).is_err());
    }

    #[test]
    fn degenerate_rates_like_everything() {
        let u = gen_user_setwise(3, 4, 1, 1.0, 1.0, 0.0).unwrap();
        assert_eq!(u.liked_vis().len(), 3 * 4 * 3);
    }

    #[test]
    fn rejects_bad_rates() {
        assert!(gen_user_setwise(10, 20, 1, 0.041, 0.0, 0.05).is_err());
        assert!(gen_user_setwise(10, 20, 1, 0.0, 0.22, 0.05).is_err());
        assert!(gen_user_setwise(10, 20, 1, 1.5, 0.22, 0.05).is_err());
        assert!(gen_user_setwise(1, 2, 1, 0.01, 0.22, 0.05).is_err());
    }

    #[test]
    fn default_part_sizes() {
        let (k, s) = part_sizes(10, 20, DEFAULT_PART_RATE).unwrap();
        let share = (k * s * (s - 1)) as f64 / 3800.0;
        assert!((share - DEFAULT_PART_RATE).abs() < 0.002, "k={k} s={s} share={share}");
    }

    #[test]
    fn setwise_combo_rate_over_seeds() {
        let (mut liked, mut product) = (0usize, 0usize);
        for seed in 0..100 {
            let u = gen_user_setwise(10, 100, seed, DEFAULT_PART_RATE, DEFAULT_COMBO_RATE, 0.05).unwrap();
            liked += u.liked_vis().len();
            product += u.liked_configs().len() * u.liked_pairs().len();
        }
        let rate = liked as f64 / product as f64;
        assert!((rate - 0.22).abs() <= 0.03, "rate {rate}");
    }

    #[test]
    fn latent_thresholds() {
        let cat = Catalog::synthetic(10, 6, 4, 2, false).unwrap();
        let u = gen_user_latent(&cat, 3, f64::NEG_INFINITY, 0.22, 0.0).unwrap();
        assert_eq!(u.liked_configs().len(), 10);
        assert_eq!(u.liked_pairs().len(), 30);
        for v in u.liked_vis() {
            assert!(u.liked_configs().contains(&v.config));
            assert!(u.liked_pairs().contains(&v.pair()));
        }
        assert!(gen_user_latent(&cat, 3, 10.0, 0.22, 0.0).is_err());
    }

    #[test]
    fn latent_median_threshold_likes_half_the_configs() {
        // one-hot configs score θ_c; the score distribution is symmetric about 0
        let cat = Catalog::synthetic(10, 4, 3, 5, false).unwrap();
        let mut total = 0usize;
        let mut runs = 0usize;
        for seed in 0..1000 {
            if let Ok(u) = gen_user_latent(&cat, seed, 0.0, 0.22, 0.0) {
                total += u.liked_configs().len();
                runs += 1;
            }
        }
        let frac = total as f64 / (runs * 10) as f64;
        assert!((frac - 0.5).abs() < 0.03, "fraction {frac}");
    }
}
