//! Random unit-cell weights `w = Σ_k m_k 1_{α_k}` over a [`CellCover`].
//!
//! Three samplers are provided:
//!
//! * selector: every cell joins independently with probability
//!   `δ = min(1, c·R^{λ−1})`;
//! * Carbery without replacement: `m` distinct cells drawn uniformly;
//! * Carbery with replacement: `m` i.i.d. uniform draws whose multiplicities
//!   accumulate, so each `m_k` is `Binomial(m, 1/count)`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cover::{CellCover, CellGeometry, CoverSpec};
use crate::error::{LabError, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelTag {
    Selector,
    CarberyWithReplacement,
    CarberyWithoutReplacement,
    Full,
    Custom,
}

impl ModelTag {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelTag::Selector => "selector",
            ModelTag::CarberyWithReplacement => "carbery-with-replacement",
            ModelTag::CarberyWithoutReplacement => "carbery-without-replacement",
            ModelTag::Full => "full",
            ModelTag::Custom => "custom",
        }
    }
}

/// Which random model a config asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Selector,
    Carbery,
    Full,
}

fn default_c() -> f64 {
    1.0
}

/// Model section of an experiment config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(rename = "modelTag")]
    pub kind: ModelKind,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default)]
    pub lambda: f64,
    /// Carbery draw count; defaults to `round(R^{d−1})`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default)]
    pub replacement: bool,
}

impl ModelSpec {
    pub fn selector(c: f64, lambda: f64) -> Self {
        ModelSpec {
            kind: ModelKind::Selector,
            c,
            lambda,
            m: None,
            replacement: false,
        }
    }

    pub fn carbery(m: Option<usize>, replacement: bool) -> Self {
        ModelSpec {
            kind: ModelKind::Carbery,
            c: default_c(),
            lambda: 0.0,
            m,
            replacement,
        }
    }

    pub fn full() -> Self {
        ModelSpec {
            kind: ModelKind::Full,
            c: default_c(),
            lambda: 0.0,
            m: None,
            replacement: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(LabError::config(format!(
                "lambda must lie in [0, 1), got {}",
                self.lambda
            )));
        }
        if !(self.c >= 0.0) || !self.c.is_finite() {
            return Err(LabError::config(format!("c must be a finite nonnegative number, got {}", self.c)));
        }
        if self.m == Some(0) {
            return Err(LabError::config("m must be at least 1"));
        }
        Ok(())
    }

    /// Exponent `β` in the mass law `‖w‖₁ ∼ R^β`.
    pub fn mass_exponent(&self, d: usize) -> f64 {
        match self.kind {
            ModelKind::Selector => d as f64 - 1.0 + self.lambda,
            ModelKind::Carbery => d as f64 - 1.0,
            ModelKind::Full => d as f64,
        }
    }

    /// Draw one weight on `cover` under this model.
    pub fn sample<T: Scalar, R: Rng + ?Sized>(
        &self,
        cover: &Arc<CellCover<T>>,
        seed: u64,
        rng: &mut R,
    ) -> Result<Weight<T>> {
        self.validate()?;
        let mut w = match self.kind {
            ModelKind::Selector => sample_selector_weight(cover, self.c, self.lambda, rng)?,
            ModelKind::Carbery => {
                let m = self.m.unwrap_or_else(|| default_carbery_draws(cover));
                sample_carbery_weight(cover, m, self.replacement, rng)?
            }
            ModelKind::Full => Weight::full(cover),
        };
        if self.kind != ModelKind::Full {
            w.seed = Some(seed);
        }
        Ok(w)
    }
}

/// `round(R^{d−1})`, at least 1.
pub fn default_carbery_draws<T: Scalar>(cover: &CellCover<T>) -> usize {
    let r = cover.radius().to_f64_lossy();
    (r.powi(cover.dim() as i32 - 1).round() as usize).max(1)
}

/// Selection probability `min(1, c·R^{λ−1})`.
pub fn selector_probability(c: f64, lambda: f64, radius: f64) -> f64 {
    (c * radius.powf(lambda - 1.0)).min(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Weight<T> {
    cover: Arc<CellCover<T>>,
    multiplicities: BTreeMap<usize, u32>,
    model: ModelTag,
    seed: Option<u64>,
}

impl<T: Scalar> Weight<T> {
    pub fn empty(cover: &Arc<CellCover<T>>, model: ModelTag) -> Self {
        Weight {
            cover: Arc::clone(cover),
            multiplicities: BTreeMap::new(),
            model,
            seed: None,
        }
    }

    /// `w = 1` on every cell.
    pub fn full(cover: &Arc<CellCover<T>>) -> Self {
        Weight {
            cover: Arc::clone(cover),
            multiplicities: (0..cover.len()).map(|k| (k, 1)).collect(),
            model: ModelTag::Full,
            seed: None,
        }
    }

    /// Custom weight from `(cell index, multiplicity)` pairs; zero
    /// multiplicities are dropped and repeated indices accumulate.
    pub fn from_pairs(
        cover: &Arc<CellCover<T>>,
        pairs: impl IntoIterator<Item = (usize, u32)>,
    ) -> Result<Self> {
        let mut w = Weight::empty(cover, ModelTag::Custom);
        for (k, m) in pairs {
            if k >= cover.len() {
                return Err(LabError::config(format!(
                    "cell index {k} out of range for cover with {} cells",
                    cover.len()
                )));
            }
            if m > 0 {
                *w.multiplicities.entry(k).or_insert(0) += m;
            }
        }
        Ok(w)
    }

    pub fn cover(&self) -> &Arc<CellCover<T>> {
        &self.cover
    }

    pub fn model(&self) -> ModelTag {
        self.model
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn multiplicities(&self) -> &BTreeMap<usize, u32> {
        &self.multiplicities
    }

    pub fn multiplicity(&self, k: usize) -> u32 {
        self.multiplicities.get(&k).copied().unwrap_or(0)
    }

    /// Number of cells with positive multiplicity.
    pub fn support_size(&self) -> usize {
        self.multiplicities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multiplicities.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.multiplicities.iter().map(|(&k, &m)| (k, m))
    }

    pub fn max_multiplicity(&self) -> u32 {
        self.multiplicities.values().copied().max().unwrap_or(0)
    }

    /// Multiply every multiplicity by `q`.
    pub fn scaled(&self, q: u32) -> Self {
        let mut w = self.clone();
        w.model = ModelTag::Custom;
        w.multiplicities = if q == 0 {
            BTreeMap::new()
        } else {
            self.iter().map(|(k, m)| (k, m * q)).collect()
        };
        w
    }

    /// Cellwise sum with another weight on the same cover.
    pub fn sum(&self, other: &Weight<T>) -> Result<Self> {
        if self.cover.spec() != other.cover.spec() {
            return Err(LabError::config("cannot add weights on different covers"));
        }
        Weight::from_pairs(&self.cover, self.iter().chain(other.iter()))
    }

    /// `m′_k ≥ m_k` for every cell.
    pub fn dominates(&self, other: &Weight<T>) -> bool {
        other.iter().all(|(k, m)| self.multiplicity(k) >= m)
    }

    pub fn to_record(&self) -> WeightRecord {
        let spec = self.cover.spec();
        WeightRecord {
            model_tag: self.model,
            seed: self.seed,
            radius: spec.radius,
            d: spec.d,
            geometry: spec.geometry,
            indices: self.multiplicities.keys().copied().collect(),
            multiplicities: self.multiplicities.values().copied().collect(),
        }
    }
}

/// `‖w‖₁ = Σ_k m_k · |cell|`.
pub fn weight_mass<T: Scalar>(weight: &Weight<T>) -> T {
    let total: u64 = weight.multiplicities.values().map(|&m| u64::from(m)).sum();
    T::lit(total as f64) * weight.cover.cell_volume()
}

/// Include each cell independently with probability `min(1, c·R^{λ−1})`.
pub fn sample_selector_weight<T: Scalar, R: Rng + ?Sized>(
    cover: &Arc<CellCover<T>>,
    c: f64,
    lambda: f64,
    rng: &mut R,
) -> Result<Weight<T>> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(LabError::config(format!("lambda must lie in [0, 1), got {lambda}")));
    }
    if !(c >= 0.0) {
        return Err(LabError::config(format!("c must be nonnegative, got {c}")));
    }
    let delta = selector_probability(c, lambda, cover.radius().to_f64_lossy());
    let mut w = Weight::empty(cover, ModelTag::Selector);
    for k in 0..cover.len() {
        // one uniform per cell keeps the stream layout independent of δ
        let u: f64 = rng.random();
        if u < delta {
            w.multiplicities.insert(k, 1);
        }
    }
    Ok(w)
}

pub fn sample_carbery_weight<T: Scalar, R: Rng + ?Sized>(
    cover: &Arc<CellCover<T>>,
    m: usize,
    replacement: bool,
    rng: &mut R,
) -> Result<Weight<T>> {
    let n = cover.len();
    if m == 0 {
        return Err(LabError::config("Carbery draw count must be at least 1"));
    }
    if replacement {
        let mut w = Weight::empty(cover, ModelTag::CarberyWithReplacement);
        for _ in 0..m {
            let k = rng.random_range(0..n);
            *w.multiplicities.entry(k).or_insert(0) += 1;
        }
        Ok(w)
    } else {
        if m > n {
            return Err(LabError::config(format!(
                "cannot draw {m} distinct cells from a cover with {n} cells"
            )));
        }
        let mut w = Weight::empty(cover, ModelTag::CarberyWithoutReplacement);
        for k in rand::seq::index::sample(rng, n, m) {
            w.multiplicities.insert(k, 1);
        }
        Ok(w)
    }
}

/// JSON form of a weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightRecord {
    #[serde(rename = "modelTag")]
    pub model_tag: ModelTag,
    pub seed: Option<u64>,
    #[serde(rename = "R")]
    pub radius: f64,
    pub d: usize,
    pub geometry: CellGeometry,
    pub indices: Vec<usize>,
    pub multiplicities: Vec<u32>,
}

impl WeightRecord {
    /// Rebuild the weight, constructing the cover from the record.
    pub fn into_weight<T: Scalar>(self) -> Result<Weight<T>> {
        let cover = Arc::new(CellCover::from_spec(&CoverSpec {
            radius: self.radius,
            d: self.d,
            geometry: self.geometry,
        })?);
        self.into_weight_on(&cover)
    }

    pub fn into_weight_on<T: Scalar>(self, cover: &Arc<CellCover<T>>) -> Result<Weight<T>> {
        if self.indices.len() != self.multiplicities.len() {
            return Err(LabError::config(
                "weight record: indices and multiplicities differ in length",
            ));
        }
        if self.multiplicities.contains(&0) {
            return Err(LabError::config("weight record: multiplicities must be >= 1"));
        }
        let mut w = Weight::from_pairs(cover, self.indices.into_iter().zip(self.multiplicities))?;
        w.model = self.model_tag;
        w.seed = self.seed;
        Ok(w)
    }
}
