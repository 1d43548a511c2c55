//! Domain vocabulary shared by every other module: arms, actions, feedback,
//! and the catalog an agent chooses from.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default attribute embedding dimension.
pub const DEFAULT_ATTR_DIM: usize = 10;

/// Chart types observed in the processed corpus. Closed vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartType {
    Surface,
    Scatter,
    Scattergl,
    Box,
    Bar,
    Mesh3d,
    Scatter3d,
    Contour,
    Heatmap,
    Histogram,
}

impl ChartType {
    pub const ALL: [ChartType; 10] = [
        ChartType::Surface,
        ChartType::Scatter,
        ChartType::Scattergl,
        ChartType::Box,
        ChartType::Bar,
        ChartType::Mesh3d,
        ChartType::Scatter3d,
        ChartType::Contour,
        ChartType::Heatmap,
        ChartType::Histogram,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChartType::Surface => "surface",
            ChartType::Scatter => "scatter",
            ChartType::Scattergl => "scattergl",
            ChartType::Box => "box",
            ChartType::Bar => "bar",
            ChartType::Mesh3d => "mesh3d",
            ChartType::Scatter3d => "scatter3d",
            ChartType::Contour => "contour",
            ChartType::Heatmap => "heatmap",
            ChartType::Histogram => "histogram",
        }
    }

    /// Position in [`ChartType::ALL`].
    pub fn index(self) -> usize {
        ChartType::ALL.iter().position(|c| *c == self).unwrap()
    }
}

impl fmt::Display for ChartType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChartType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ChartType::ALL
            .iter()
            .copied()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| invalid(format!("unknown chart type {s:?}")))
    }
}

/// A dataset column described by a statistical feature vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeEmbedding {
    pub id: usize,
    pub name: String,
    pub vector: Vec<f64>,
}

impl AttributeEmbedding {
    /// Validates finiteness and caps the L2 norm at 1.
    pub fn new(id: usize, name: impl Into<String>, vector: Vec<f64>) -> Result<Self> {
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("attribute {id} has a non-finite entry")));
        }
        Ok(AttributeEmbedding {
            id,
            name: name.into(),
            vector: cap_norm(vector),
        })
    }
}

/// A chart configuration arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigurationArm {
    pub id: usize,
    pub chart_type: ChartType,
    pub vector: Vec<f64>,
}

impl ConfigurationArm {
    /// One-hot encoding over the chart-type vocabulary (dimension 10).
    pub fn one_hot(id: usize, chart_type: ChartType) -> Self {
        let mut vector = vec![0.0; ChartType::ALL.len()];
        vector[chart_type.index()] = 1.0;
        ConfigurationArm {
            id,
            chart_type,
            vector,
        }
    }

    pub fn new(id: usize, chart_type: ChartType, vector: Vec<f64>) -> Result<Self> {
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(invalid(format!("configuration {id} has a non-finite entry")));
        }
        Ok(ConfigurationArm {
            id,
            chart_type,
            vector: cap_norm(vector),
        })
    }
}

/// The recommended item: a configuration plus an ordered pair of attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Visualization {
    pub config: usize,
    pub x_attr: usize,
    pub y_attr: usize,
}

impl Visualization {
    pub const fn new(config: usize, x_attr: usize, y_attr: usize) -> Self {
        Visualization {
            config,
            x_attr,
            y_attr,
        }
    }

    pub fn pair(&self) -> (usize, usize) {
        (self.x_attr, self.y_attr)
    }
}

impl fmt::Display for Visualization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.config, self.x_attr, self.y_attr)
    }
}

/// Hierarchical user feedback. Part answers are only present after a rejection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feedback {
    pub r_vis: bool,
    pub r_config: Option<bool>,
    pub r_attrs: Option<bool>,
}

impl Feedback {
    pub const fn liked() -> Self {
        Feedback {
            r_vis: true,
            r_config: None,
            r_attrs: None,
        }
    }

    pub const fn disliked(r_config: bool, r_attrs: bool) -> Self {
        Feedback {
            r_vis: false,
            r_config: Some(r_config),
            r_attrs: Some(r_attrs),
        }
    }

    /// Builds feedback from wire-level 0/1 integers.
    pub fn from_bits(r_vis: u8, r_config: Option<u8>, r_attrs: Option<u8>) -> Result<Self> {
        let bit = |name: &str, v: u8| match v {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(invalid(format!("{name} must be 0 or 1, got {v}"))),
        };
        let fb = Feedback {
            r_vis: bit("r_vis", r_vis)?,
            r_config: r_config.map(|v| bit("r_config", v)).transpose()?,
            r_attrs: r_attrs.map(|v| bit("r_attrs", v)).transpose()?,
        };
        fb.validate()?;
        Ok(fb)
    }

    pub fn validate(&self) -> Result<()> {
        match (self.r_vis, self.r_config, self.r_attrs) {
            (true, None, None) | (false, Some(_), Some(_)) => Ok(()),
            (true, _, _) => Err(invalid(
                "a liked visualization must not carry configuration or attribute answers",
            )),
            (false, _, _) => Err(invalid(
                "a rejected visualization needs both r_config and r_attrs",
            )),
        }
    }

    /// (r_config, r_attrs) with the implied 1s filled in for a liked visualization.
    pub fn resolved(&self) -> (bool, bool) {
        if self.r_vis {
            (true, true)
        } else {
            (self.r_config.unwrap_or(false), self.r_attrs.unwrap_or(false))
        }
    }
}

/// Concatenates two attribute embeddings into the `2d` attribute-pair feature.
///
/// Equivalent to summing the two zero-padded vectors `[x; 0]` and `[0; y]`, so a
/// single parameter vector scores the x-axis and y-axis slots separately.
pub fn attribute_feature_pair(x: &AttributeEmbedding, y: &AttributeEmbedding) -> Result<Vec<f64>> {
    if x.vector.len() != y.vector.len() {
        return Err(invalid(format!(
            "attribute dimension mismatch: {} vs {}",
            x.vector.len(),
            y.vector.len()
        )));
    }
    let mut z = Vec::with_capacity(2 * x.vector.len());
    z.extend_from_slice(&x.vector);
    z.extend_from_slice(&y.vector);
    Ok(z)
}

/// All `n * m * (m - 1)` ordered triples with distinct axes, lexicographic order.
pub fn enumerate_actions(n: usize, m: usize) -> Result<Vec<Visualization>> {
    if n < 1 {
        return Err(invalid("need at least one configuration"));
    }
    if m < 2 {
        return Err(invalid("need at least two attributes"));
    }
    let pairs = ordered_pairs(m, false);
    Ok((0..n)
        .flat_map(|c| pairs.iter().map(move |&(x, y)| Visualization::new(c, x, y)))
        .collect())
}

/// Ordered attribute pairs in lexicographic order.
pub fn ordered_pairs(m: usize, allow_self_pair: bool) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(m * m);
    for x in 0..m {
        for y in 0..m {
            if x != y || allow_self_pair {
                out.push((x, y));
            }
        }
    }
    out
}

/// Configuration and attribute arms available to an agent.
#[derive(Debug, Clone, PartialEq)]
pub struct Catalog {
    configs: Vec<ConfigurationArm>,
    attrs: Vec<AttributeEmbedding>,
    allow_self_pair: bool,
    pairs: Vec<(usize, usize)>,
}

impl Catalog {
    pub fn new(
        configs: Vec<ConfigurationArm>,
        attrs: Vec<AttributeEmbedding>,
        allow_self_pair: bool,
    ) -> Result<Self> {
        if configs.is_empty() {
            return Err(Error::InvalidState("catalog has no configurations".into()));
        }
        let min_attrs = if allow_self_pair { 1 } else { 2 };
        if attrs.len() < min_attrs {
            return Err(Error::InvalidState(format!(
                "catalog needs at least {min_attrs} attributes, has {}",
                attrs.len()
            )));
        }
        let dc = configs[0].vector.len();
        let d = attrs[0].vector.len();
        if dc == 0 || d == 0 {
            return Err(invalid("feature vectors must be non-empty"));
        }
        for (i, c) in configs.iter().enumerate() {
            if c.id != i {
                return Err(invalid(format!("configuration at position {i} has id {}", c.id)));
            }
            if c.vector.len() != dc {
                return Err(invalid(format!("configuration {i} has dimension {}", c.vector.len())));
            }
            check_norm(&c.vector, || format!("configuration {i}"))?;
        }
        for (i, a) in attrs.iter().enumerate() {
            if a.id != i {
                return Err(invalid(format!("attribute at position {i} has id {}", a.id)));
            }
            if a.vector.len() != d {
                return Err(invalid(format!("attribute {i} has dimension {}", a.vector.len())));
            }
            check_norm(&a.vector, || format!("attribute {i}"))?;
        }
        let pairs = ordered_pairs(attrs.len(), allow_self_pair);
        Ok(Catalog {
            configs,
            attrs,
            allow_self_pair,
            pairs,
        })
    }

    /// `n` one-hot configurations (first `n` chart types) and `m` attributes
    /// drawn uniformly from the unit ball in `dim` dimensions.
    pub fn synthetic(n: usize, m: usize, dim: usize, seed: u64, allow_self_pair: bool) -> Result<Self> {
        if n == 0 || n > ChartType::ALL.len() {
            return Err(invalid(format!(
                "n_configs must be in 1..={}, got {n}",
                ChartType::ALL.len()
            )));
        }
        if dim == 0 {
            return Err(invalid("dim must be positive"));
        }
        let configs = ChartType::ALL[..n]
            .iter()
            .enumerate()
            .map(|(i, &c)| ConfigurationArm::one_hot(i, c))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let attrs = (0..m)
            .map(|i| AttributeEmbedding {
                id: i,
                name: format!("attr_{i}"),
                vector: sample_unit_ball(&mut rng, dim),
            })
            .collect();
        Catalog::new(configs, attrs, allow_self_pair)
    }

    pub fn configs(&self) -> &[ConfigurationArm] {
        &self.configs
    }

    pub fn attrs(&self) -> &[AttributeEmbedding] {
        &self.attrs
    }

    pub fn n_configs(&self) -> usize {
        self.configs.len()
    }

    pub fn n_attrs(&self) -> usize {
        self.attrs.len()
    }

    pub fn config_dim(&self) -> usize {
        self.configs[0].vector.len()
    }

    pub fn attr_dim(&self) -> usize {
        self.attrs[0].vector.len()
    }

    pub fn allow_self_pair(&self) -> bool {
        self.allow_self_pair
    }

    /// Ordered attribute pairs eligible as (x, y), lexicographic.
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn n_actions(&self) -> usize {
        self.configs.len() * self.pairs.len()
    }

    /// All actions in lexicographic (config, x, y) order.
    pub fn actions(&self) -> impl Iterator<Item = Visualization> + '_ {
        (0..self.configs.len())
            .flat_map(move |c| self.pairs.iter().map(move |&(x, y)| Visualization::new(c, x, y)))
    }

    pub fn config(&self, id: usize) -> Result<&ConfigurationArm> {
        self.configs
            .get(id)
            .ok_or_else(|| invalid(format!("unknown configuration id {id}")))
    }

    pub fn attr(&self, id: usize) -> Result<&AttributeEmbedding> {
        self.attrs
            .get(id)
            .ok_or_else(|| invalid(format!("unknown attribute id {id}")))
    }

    pub fn check(&self, v: &Visualization) -> Result<()> {
        self.config(v.config)?;
        self.attr(v.x_attr)?;
        self.attr(v.y_attr)?;
        if v.x_attr == v.y_attr && !self.allow_self_pair {
            return Err(invalid(format!("{v} plots an attribute against itself")));
        }
        Ok(())
    }

    pub fn pair_feature(&self, x: usize, y: usize) -> Result<Vec<f64>> {
        attribute_feature_pair(self.attr(x)?, self.attr(y)?)
    }
}

/// Uniform sample from the closed unit ball.
pub(crate) fn sample_unit_ball<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let g: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = l2_norm(&g);
        if norm > 1e-12 {
            let radius = rng.random::<f64>().powf(1.0 / dim as f64);
            return g.into_iter().map(|v| v * radius / norm).collect();
        }
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Scales `v` onto the unit sphere when its norm exceeds 1.
pub fn cap_norm(mut v: Vec<f64>) -> Vec<f64> {
    let norm = l2_norm(&v);
    if norm > 1.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

fn check_norm(v: &[f64], what: impl Fn() -> String) -> Result<()> {
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid(format!("{} has a non-finite entry", what())));
    }
    if l2_norm(v) > 1.0 + 1e-9 {
        return Err(invalid(format!("{} has L2 norm above 1", what())));
    }
    Ok(())
}
