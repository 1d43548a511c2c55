//! Corpus-shaped datasets: JSON-lines loading, validation, a statistics-matched
//! synthetic generator, and conversion into a catalog plus simulated user.
//!
//! Two files make up a corpus directory:
//!
//! * `attributes.jsonl`: `{"dataset_id", "attr_index", "name", "embedding"}`
//! * `users.jsonl`: `{"user_id", "liked": [{"dataset_id", "chart_type", "x", "y"}]}`
//!   with an optional `"datasets"` list.
//!
//! Unknown fields are ignored. Datasets with more than [`MAX_ATTRIBUTES`]
//! attributes are dropped and counted in [`Corpus::excluded`].

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};
use serde::{Deserialize, Serialize};

use crate::env::{UserModel, DEFAULT_COMBO_RATE, DEFAULT_PART_RATE};
use crate::error::{invalid, Error, Result};
use crate::model::{
    cap_norm, ordered_pairs, sample_unit_ball, AttributeEmbedding, Catalog, ChartType, ConfigurationArm,
    Visualization, DEFAULT_ATTR_DIM,
};

pub const MAX_ATTRIBUTES: usize = 100;
pub const ATTRIBUTES_FILE: &str = "attributes.jsonl";
pub const USERS_FILE: &str = "users.jsonl";

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusDataset {
    pub id: String,
    pub owner: String,
    pub attributes: Vec<AttributeEmbedding>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LikedVis {
    pub dataset_id: String,
    pub chart_type: ChartType,
    pub x: usize,
    pub y: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserRecord {
    pub user_id: String,
    pub datasets: Vec<String>,
    pub liked: Vec<LikedVis>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub datasets: Vec<CorpusDataset>,
    pub users: Vec<UserRecord>,
    /// Datasets dropped for having more than [`MAX_ATTRIBUTES`] attributes.
    pub excluded: usize,
}

#[derive(Serialize, Deserialize)]
struct AttributeLine {
    dataset_id: String,
    attr_index: usize,
    name: String,
    embedding: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct LikedLine {
    dataset_id: String,
    chart_type: String,
    x: usize,
    y: usize,
}

#[derive(Serialize, Deserialize)]
struct UserLine {
    user_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    datasets: Option<Vec<String>>,
    liked: Vec<LikedLine>,
}

fn read_lines<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<(usize, T)>> {
    let file = path.display().to_string();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| Error::Parse {
            file: file.clone(),
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push((i + 1, rec));
    }
    Ok(out)
}

/// Loads `attributes.jsonl` and `users.jsonl` from a directory.
pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    load_corpus_files(&dir.join(ATTRIBUTES_FILE), &dir.join(USERS_FILE))
}

pub fn load_corpus_files(attributes: &Path, users: &Path) -> Result<Corpus> {
    let attr_lines: Vec<(usize, AttributeLine)> = read_lines(attributes)?;
    let user_lines: Vec<(usize, UserLine)> = read_lines(users)?;

    let mut order: Vec<String> = Vec::new();
    let mut grouped: HashMap<String, Vec<(usize, AttributeLine)>> = HashMap::new();
    for (line, rec) in attr_lines {
        if !grouped.contains_key(&rec.dataset_id) {
            order.push(rec.dataset_id.clone());
        }
        grouped.entry(rec.dataset_id.clone()).or_default().push((line, rec));
    }

    let mut excluded_ids = BTreeSet::new();
    let mut datasets = Vec::new();
    for id in order {
        let mut rows = grouped.remove(&id).unwrap();
        if rows.len() > MAX_ATTRIBUTES {
            excluded_ids.insert(id);
            continue;
        }
        rows.sort_by_key(|(_, r)| r.attr_index);
        let dim = rows[0].1.embedding.len();
        let mut attributes = Vec::with_capacity(rows.len());
        for (expected, (line, r)) in rows.into_iter().enumerate() {
            if r.attr_index != expected {
                return Err(Error::Validation(format!(
                    "dataset {id:?}: attribute indices must be 0..k without gaps (line {line} has {})",
                    r.attr_index
                )));
            }
            if r.embedding.len() != dim {
                return Err(Error::Validation(format!(
                    "dataset {id:?}: attribute {} has dimension {}, expected {dim} (line {line})",
                    r.attr_index,
                    r.embedding.len()
                )));
            }
            let emb = AttributeEmbedding::new(r.attr_index, r.name, r.embedding)
                .map_err(|e| Error::Validation(format!("dataset {id:?} line {line}: {e}")))?;
            attributes.push(emb);
        }
        datasets.push(CorpusDataset {
            id,
            owner: String::new(),
            attributes,
        });
    }

    let index: HashMap<String, usize> = datasets
        .iter()
        .enumerate()
        .map(|(i, d)| (d.id.clone(), i))
        .collect();
    let mut users = Vec::with_capacity(user_lines.len());
    for (line, u) in user_lines {
        let known = |ds: &str| -> Result<bool> {
            if index.contains_key(ds) {
                Ok(true)
            } else if excluded_ids.contains(ds) {
                Ok(false)
            } else {
                Err(Error::Validation(format!(
                    "user {:?} (line {line}) references unknown dataset {ds:?}",
                    u.user_id
                )))
            }
        };
        let mut liked = Vec::with_capacity(u.liked.len());
        for l in &u.liked {
            if !known(&l.dataset_id)? {
                continue;
            }
            let chart_type: ChartType = l.chart_type.parse().map_err(|_| {
                Error::Validation(format!(
                    "user {:?} (line {line}) likes unknown chart type {:?}",
                    u.user_id, l.chart_type
                ))
            })?;
            let m = datasets[index[&l.dataset_id]].attributes.len();
            if l.x >= m || l.y >= m || l.x == l.y {
                return Err(Error::Validation(format!(
                    "user {:?} (line {line}) likes invalid attribute pair ({}, {}) in {:?} with {m} attributes",
                    u.user_id, l.x, l.y, l.dataset_id
                )));
            }
            liked.push(LikedVis {
                dataset_id: l.dataset_id.clone(),
                chart_type,
                x: l.x,
                y: l.y,
            });
        }
        let mut ds_list = Vec::new();
        match &u.datasets {
            Some(list) => {
                for ds in list {
                    if known(ds)? {
                        ds_list.push(ds.clone());
                    }
                }
            }
            None => {
                for l in &liked {
                    if !ds_list.contains(&l.dataset_id) {
                        ds_list.push(l.dataset_id.clone());
                    }
                }
            }
        }
        users.push(UserRecord {
            user_id: u.user_id,
            datasets: ds_list,
            liked,
        });
    }

    for u in &users {
        for ds in &u.datasets {
            let d = &mut datasets[index[ds]];
            if d.owner.is_empty() {
                d.owner = u.user_id.clone();
            }
        }
    }

    Ok(Corpus {
        datasets,
        users,
        excluded: excluded_ids.len(),
    })
}

/// Writes `attributes.jsonl` and `users.jsonl` into `dir`.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut w = BufWriter::new(File::create(dir.join(ATTRIBUTES_FILE))?);
    for d in &corpus.datasets {
        for a in &d.attributes {
            let line = AttributeLine {
                dataset_id: d.id.clone(),
                attr_index: a.id,
                name: a.name.clone(),
                embedding: a.vector.clone(),
            };
            serde_json::to_writer(&mut w, &line).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    let mut w = BufWriter::new(File::create(dir.join(USERS_FILE))?);
    for u in &corpus.users {
        let line = UserLine {
            user_id: u.user_id.clone(),
            datasets: Some(u.datasets.clone()),
            liked: u
                .liked
                .iter()
                .map(|l| LikedLine {
                    dataset_id: l.dataset_id.clone(),
                    chart_type: l.chart_type.to_string(),
                    x: l.x,
                    y: l.y,
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &line).map_err(std::io::Error::from)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Liked configurations and liked attributes for `m` attributes and `n`
/// configurations, balancing the liked-part share against the
/// liked-visualization share. Every liked configuration and pair must appear in
/// at least one liked visualization, so the liked count is at least
/// `max(configs, pairs)`.
fn corpus_part_sizes(n: usize, m: usize, part_rate: f64, combo_rate: f64) -> (usize, usize, usize) {
    let total = (n * m * (m - 1)) as f64;
    let mut best = (1, 2, 2);
    let mut best_cost = f64::INFINITY;
    for k in 1..=n {
        for s in 2..=m {
            let pairs = s * (s - 1);
            let product = k * pairs;
            let liked = ((combo_rate * product as f64).round() as usize).max(k.max(pairs));
            let part_err = ((product as f64 / total) - part_rate).abs() / part_rate;
            let combo_err = ((liked as f64 / product as f64) - combo_rate).abs() / combo_rate;
            let cost = part_err + combo_err;
            if cost < best_cost {
                best_cost = cost;
                best = (k, s, liked);
            }
        }
    }
    best
}

/// Liked visualizations whose projections are exactly the planted liked parts.
fn plant_liked<R: Rng>(rng: &mut R, n: usize, m: usize) -> Vec<Visualization> {
    let (k, s, liked) = corpus_part_sizes(n, m, DEFAULT_PART_RATE, DEFAULT_COMBO_RATE);
    let configs: Vec<usize> = sample(rng, n, k).into_iter().collect();
    let attrs: BTreeSet<usize> = sample(rng, m, s).into_iter().collect();
    let mut pairs: Vec<(usize, usize)> = ordered_pairs(m, false)
        .into_iter()
        .filter(|(x, y)| attrs.contains(x) && attrs.contains(y))
        .collect();
    pairs.shuffle(rng);

    let mut chosen = BTreeSet::new();
    for i in 0..k.max(pairs.len()) {
        let (x, y) = pairs[i % pairs.len()];
        chosen.insert(Visualization::new(configs[i % k], x, y));
    }
    let rest: Vec<Visualization> = configs
        .iter()
        .flat_map(|&c| pairs.iter().map(move |&(x, y)| Visualization::new(c, x, y)))
        .filter(|v| !chosen.contains(v))
        .collect();
    let extra = liked.saturating_sub(chosen.len()).min(rest.len());
    for i in sample(rng, rest.len(), extra) {
        chosen.insert(rest[i]);
    }
    chosen.into_iter().collect()
}

/// Synthetic corpus with long-tailed attribute counts and planted preferences
/// matching the measured liked-part and liked-visualization shares.
pub fn gen_synthetic_corpus(users: usize, datasets_per_user: usize, seed: u64) -> Result<Corpus> {
    if users == 0 || datasets_per_user == 0 {
        return Err(invalid("users and datasets_per_user must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // mode exp(μ - σ²) + 2 ≈ 7 attributes, a thin tail past 100
    let counts: LogNormal<f64> = LogNormal::new(2.3, 0.8).expect("valid lognormal");
    let n = ChartType::ALL.len();
    let mut corpus = Corpus::default();
    for u in 0..users {
        let user_id = format!("user{u:05}");
        let mut record = UserRecord {
            user_id: user_id.clone(),
            datasets: vec![],
            liked: vec![],
        };
        // over-wide draws are counted and replaced, so every user keeps
        // `datasets_per_user` datasets
        let mut j = 0;
        while record.datasets.len() < datasets_per_user {
            let m = 2 + counts.sample(&mut rng).floor().min(1e6) as usize;
            let id = format!("{user_id}-ds{j}");
            j += 1;
            if m > MAX_ATTRIBUTES {
                corpus.excluded += 1;
                continue;
            }
            let attributes = (0..m)
                .map(|i| AttributeEmbedding {
                    id: i,
                    name: format!("col{i}"),
                    vector: cap_norm(sample_unit_ball(&mut rng, DEFAULT_ATTR_DIM)),
                })
                .collect();
            for v in plant_liked(&mut rng, n, m) {
                record.liked.push(LikedVis {
                    dataset_id: id.clone(),
                    chart_type: ChartType::ALL[v.config],
                    x: v.x_attr,
                    y: v.y_attr,
                });
            }
            record.datasets.push(id.clone());
            corpus.datasets.push(CorpusDataset {
                id,
                owner: user_id.clone(),
                attributes,
            });
        }
        corpus.users.push(record);
    }
    Ok(corpus)
}

/// Catalog (one-hot chart types, the dataset's attributes) and a user whose
/// liked parts are the projections of their liked visualizations.
pub fn corpus_to_environment(
    ds: &CorpusDataset,
    ur: &UserRecord,
    flip_prob: f64,
    seed: u64,
) -> Result<(Catalog, UserModel)> {
    let configs = ChartType::ALL
        .iter()
        .enumerate()
        .map(|(i, &c)| ConfigurationArm::one_hot(i, c))
        .collect();
    let catalog = Catalog::new(configs, ds.attributes.clone(), false)?;
    let mut liked_configs = BTreeSet::new();
    let mut liked_pairs = BTreeSet::new();
    let mut liked_vis = BTreeSet::new();
    for l in ur.liked.iter().filter(|l| l.dataset_id == ds.id) {
        let v = Visualization::new(l.chart_type.index(), l.x, l.y);
        catalog.check(&v)?;
        liked_configs.insert(v.config);
        liked_pairs.insert(v.pair());
        liked_vis.insert(v);
    }
    if liked_vis.is_empty() {
        return Err(invalid(format!(
            "user {:?} has no liked visualization in dataset {:?}",
            ur.user_id, ds.id
        )));
    }
    let user = UserModel::new(liked_configs, liked_pairs, liked_vis, flip_prob, seed)?;
    Ok((catalog, user))
}

impl Corpus {
    pub fn dataset(&self, id: &str) -> Option<&CorpusDataset> {
        self.datasets.iter().find(|d| d.id == id)
    }

    /// (user index, dataset index) pairs where the user likes something.
    pub fn episodes(&self) -> Vec<(usize, usize)> {
        let index: HashMap<&str, usize> = self
            .datasets
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.as_str(), i))
            .collect();
        let mut out = Vec::new();
        for (u, rec) in self.users.iter().enumerate() {
            let mut seen = BTreeSet::new();
            for l in &rec.liked {
                if let Some(&d) = index.get(l.dataset_id.as_str()) {
                    if seen.insert(d) {
                        out.push((u, d));
                    }
                }
            }
        }
        out
    }
}
