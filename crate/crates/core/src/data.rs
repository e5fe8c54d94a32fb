//! Synthetic paired image–caption data.
//!
//! A scene has four attributes with four values each: shape, size, intensity
//! and position (one of the four image quadrants). Images show the full
//! scene; captions mention only a random subset of the attributes, controlled
//! by the `imbalance` knob. The ground-truth semantic vector of a caption is
//! the one-hot concatenation of the attributes it mentions.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::encoder::{ImageBatch, PairedInputs, TokenBatch};
use crate::error::{Error, Result};
use crate::geometry::{EmbeddingBatch, LabelVector};
use crate::linalg::Matrix;
use crate::math;

pub const NUM_ATTRIBUTES: usize = 4;
pub const VALUES_PER_ATTRIBUTE: usize = 4;
/// Length of a ground-truth semantic vector.
pub const SEMANTIC_DIM: usize = NUM_ATTRIBUTES * VALUES_PER_ATTRIBUTE;
/// Number of distinct scenes.
pub const NUM_CONCEPTS: usize = 256;

const SIZE_FRACTIONS: [f64; VALUES_PER_ATTRIBUTE] = [0.4, 0.6, 0.8, 1.0];
const INTENSITIES: [f64; VALUES_PER_ATTRIBUTE] = [0.25, 0.5, 0.75, 1.0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Attribute {
    Shape,
    Size,
    Intensity,
    Position,
}

impl Attribute {
    pub const ALL: [Self; NUM_ATTRIBUTES] = [Self::Shape, Self::Size, Self::Intensity, Self::Position];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// One scene: an index per attribute, each in `0..4`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SyntheticScene {
    /// square, cross, disk, triangle
    pub shape: u8,
    pub size: u8,
    pub intensity: u8,
    /// top-left, top-right, bottom-left, bottom-right quadrant
    pub position: u8,
}

impl SyntheticScene {
    pub fn value(&self, a: Attribute) -> u8 {
        match a {
            Attribute::Shape => self.shape,
            Attribute::Size => self.size,
            Attribute::Intensity => self.intensity,
            Attribute::Position => self.position,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if Attribute::ALL.iter().any(|&a| self.value(a) as usize >= VALUES_PER_ATTRIBUTE) {
            return Err(Error::InvalidConfig(format!("scene attribute out of range: {self:?}")));
        }
        Ok(())
    }

    /// Index in `0..256`, shape-major.
    pub fn concept(&self) -> usize {
        Attribute::ALL.iter().fold(0, |acc, &a| acc * VALUES_PER_ATTRIBUTE + self.value(a) as usize)
    }

    pub fn from_concept(concept: usize) -> Self {
        let v = |shift: u32| ((concept / VALUES_PER_ATTRIBUTE.pow(shift)) % VALUES_PER_ATTRIBUTE) as u8;
        Self {
            shape: v(3),
            size: v(2),
            intensity: v(1),
            position: v(0),
        }
    }
}

/// Caption words; token id is the word index plus one, 0 is padding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
}

/// Template words, then the four values of each attribute in order.
const DEFAULT_WORDS: [&str; 22] = [
    "a", "photo", "of", "the", "in", "object", "square", "cross", "disk", "triangle", "tiny", "small", "large", "huge",
    "dim", "faint", "bright", "vivid", "topleft", "topright", "bottomleft", "bottomright",
];
const TEMPLATE_WORDS: usize = 6;

impl Default for Vocabulary {
    fn default() -> Self {
        Self {
            words: DEFAULT_WORDS.iter().map(|w| w.to_string()).collect(),
        }
    }
}

impl Vocabulary {
    /// Word count excluding padding.
    pub const REQUIRED_WORDS: usize = DEFAULT_WORDS.len();

    pub fn new(words: Vec<String>) -> Result<Self> {
        if words.len() != Self::REQUIRED_WORDS {
            return Err(Error::InvalidConfig(format!(
                "vocabulary needs {} words, got {}",
                Self::REQUIRED_WORDS,
                words.len()
            )));
        }
        for (i, w) in words.iter().enumerate() {
            if w.is_empty() || w.contains(|c: char| c.is_whitespace() || c == ',') || words[..i].contains(w) {
                return Err(Error::InvalidConfig(format!("invalid or duplicate vocabulary word {w:?}")));
            }
        }
        Ok(Self { words })
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    /// Number of token ids in use, including padding.
    pub fn size(&self) -> usize {
        self.words.len() + 1
    }

    fn template(&self, i: usize) -> u32 {
        i as u32 + 1
    }

    pub fn attribute_token(&self, a: Attribute, value: u8) -> u32 {
        (TEMPLATE_WORDS + a.index() * VALUES_PER_ATTRIBUTE + value as usize) as u32 + 1
    }

    pub fn decode(&self, tokens: &[u32]) -> String {
        let mut out = String::new();
        for &t in tokens {
            if t == 0 {
                continue;
            }
            if !out.is_empty() {
                out.push(' ');
            }
            out.push_str(self.words.get(t as usize - 1).map_or("?", String::as_str));
        }
        out
    }

    /// "a photo of the {size} {intensity} {shape|object} [in the {position}]"
    /// restricted to the attributes in `keep`.
    pub fn caption(&self, scene: &SyntheticScene, keep: [bool; NUM_ATTRIBUTES]) -> Vec<u32> {
        let mut t = vec![self.template(0), self.template(1), self.template(2), self.template(3)];
        for a in [Attribute::Size, Attribute::Intensity] {
            if keep[a.index()] {
                t.push(self.attribute_token(a, scene.value(a)));
            }
        }
        if keep[Attribute::Shape.index()] {
            t.push(self.attribute_token(Attribute::Shape, scene.shape));
        } else {
            t.push(self.template(5));
        }
        if keep[Attribute::Position.index()] {
            t.extend_from_slice(&[self.template(4), self.template(3)]);
            t.push(self.attribute_token(Attribute::Position, scene.position));
        }
        t
    }
}

/// Longest caption the template can produce.
pub const MAX_CAPTION_TOKENS: usize = 10;

/// Generator settings.
#[derive(Clone, Debug, PartialEq)]
pub struct GenConfig {
    pub n_samples: usize,
    pub image_size: usize,
    /// Fraction of attributes dropped from captions, in `[0, 1]`.
    pub imbalance: f64,
    pub noise_std: f64,
    pub vocab: Vocabulary,
    /// Width of the stored token table.
    pub seq_len: usize,
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
    pub seed: u64,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_samples: 4096,
            image_size: 16,
            imbalance: 0.5,
            noise_std: 0.05,
            vocab: Vocabulary::default(),
            seq_len: 16,
            train_frac: 0.8,
            val_frac: 0.1,
            test_frac: 0.1,
            seed: 0,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.n_samples == 0 {
            return fail("n_samples must be positive".into());
        }
        if self.image_size < 4 || self.image_size % 2 != 0 {
            return fail(format!("image_size must be even and >= 4, got {}", self.image_size));
        }
        if !(0.0..=1.0).contains(&self.imbalance) {
            return fail(format!("imbalance must lie in [0, 1], got {}", self.imbalance));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return fail(format!("noise_std must be >= 0, got {}", self.noise_std));
        }
        if self.seq_len < MAX_CAPTION_TOKENS {
            return fail(format!("seq_len must be >= {MAX_CAPTION_TOKENS}, got {}", self.seq_len));
        }
        let fr = [self.train_frac, self.val_frac, self.test_frac];
        if fr.iter().any(|f| !(0.0..=1.0).contains(f)) || (fr.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return fail(format!("split fractions must be in [0, 1] and sum to 1, got {fr:?}"));
        }
        Ok(())
    }

    /// Attributes removed from each caption; at least one always remains.
    pub fn dropped_attributes(&self) -> usize {
        (math::ceil(self.imbalance * NUM_ATTRIBUTES as f64) as usize).min(NUM_ATTRIBUTES - 1)
    }
}

/// Rasterizes a scene: the shape inside its quadrant, scaled by size and
/// intensity, plus Gaussian pixel noise, clipped to `[0, 1]`.
pub fn render_image<R: Rng + ?Sized>(scene: &SyntheticScene, gen: &GenConfig, rng: &mut R) -> Vec<f32> {
    let s = gen.image_size;
    let cell = s / 2;
    let (cx0, cy0) = ((scene.position as usize % 2) * cell, (scene.position as usize / 2) * cell);
    let half = cell as f64 / 2.0;
    let r = SIZE_FRACTIONS[scene.size as usize] * half;
    let level = INTENSITIES[scene.intensity as usize];
    let noise = Normal::new(0.0, gen.noise_std).ok().filter(|_| gen.noise_std > 0.0);
    let mut img = vec![0f32; s * s];
    for y in 0..s {
        for x in 0..s {
            let inside_cell = (cx0..cx0 + cell).contains(&x) && (cy0..cy0 + cell).contains(&y);
            let mut v = 0.0;
            if inside_cell {
                let dx = x as f64 + 0.5 - (cx0 as f64 + half);
                let dy = y as f64 + 0.5 - (cy0 as f64 + half);
                if covers(scene.shape, dx, dy, r) {
                    v = level;
                }
            }
            if let Some(n) = &noise {
                v += n.sample(rng);
            }
            img[y * s + x] = v.clamp(0.0, 1.0) as f32;
        }
    }
    img
}

fn covers(shape: u8, dx: f64, dy: f64, r: f64) -> bool {
    let (ax, ay) = (dx.abs(), dy.abs());
    match shape {
        0 => ax <= r && ay <= r,
        1 => (ax <= r / 3.0 && ay <= r) || (ay <= r / 3.0 && ax <= r),
        2 => dx * dx + dy * dy <= r * r,
        _ => ay <= r && ax <= (dy + r) / 2.0,
    }
}

/// Caption tokens and the matching semantic vector.
pub fn caption_scene<R: Rng + ?Sized>(scene: &SyntheticScene, gen: &GenConfig, rng: &mut R) -> (Vec<u32>, Vec<f64>) {
    let mut order = Attribute::ALL;
    order.shuffle(rng);
    let mut keep = [true; NUM_ATTRIBUTES];
    for a in &order[..gen.dropped_attributes()] {
        keep[a.index()] = false;
    }
    (gen.vocab.caption(scene, keep), semantic_vector(scene, keep))
}

/// One-hot blocks for the kept attributes, zeros elsewhere.
pub fn semantic_vector(scene: &SyntheticScene, keep: [bool; NUM_ATTRIBUTES]) -> Vec<f64> {
    let mut v = vec![0.0; SEMANTIC_DIM];
    for a in Attribute::ALL {
        if keep[a.index()] {
            v[a.index() * VALUES_PER_ATTRIBUTE + scene.value(a) as usize] = 1.0;
        }
    }
    v
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_u8(self) -> u8 {
        self as u8
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Self::Train),
            1 => Some(Self::Val),
            2 => Some(Self::Test),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Train => "train",
            Self::Val => "val",
            Self::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "train" => Some(Self::Train),
            "val" => Some(Self::Val),
            "test" => Some(Self::Test),
            _ => None,
        }
    }
}

/// Generated samples, row-aligned across every field.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub config: GenConfig,
    pub scenes: Vec<SyntheticScene>,
    /// `n × image_size²` rasters.
    pub images: Vec<f32>,
    pub captions: Vec<Vec<u32>>,
    /// `n × SEMANTIC_DIM` ground-truth vectors.
    pub semantics: Vec<f64>,
    pub splits: Vec<Split>,
}

pub fn generate_dataset(gen: &GenConfig) -> Result<Dataset> {
    gen.validate()?;
    let n = gen.n_samples;
    let mut rng = ChaCha8Rng::seed_from_u64(gen.seed);
    let mut scenes = Vec::with_capacity(n);
    let mut images = Vec::with_capacity(n * gen.image_size * gen.image_size);
    let mut captions = Vec::with_capacity(n);
    let mut semantics = Vec::with_capacity(n * SEMANTIC_DIM);
    for _ in 0..n {
        let mut pick = || rng.random_range(0..VALUES_PER_ATTRIBUTE as u8);
        let scene = SyntheticScene {
            shape: pick(),
            size: pick(),
            intensity: pick(),
            position: pick(),
        };
        images.extend(render_image(&scene, gen, &mut rng));
        let (caption, sem) = caption_scene(&scene, gen, &mut rng);
        scenes.push(scene);
        captions.push(caption);
        semantics.extend(sem);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let n_train = math::round(n as f64 * gen.train_frac) as usize;
    let n_val = (math::round(n as f64 * gen.val_frac) as usize).min(n - n_train);
    let mut splits = vec![Split::Test; n];
    for (rank, &i) in order.iter().enumerate() {
        if rank < n_train {
            splits[i] = Split::Train;
        } else if rank < n_train + n_val {
            splits[i] = Split::Val;
        }
    }
    Ok(Dataset {
        config: gen.clone(),
        scenes,
        images,
        captions,
        semantics,
        splits,
    })
}

/// Source of the fixed semantic embeddings used to re-scale separation logits.
pub trait SemanticProvider {
    fn dim(&self) -> usize;
    /// Writes the embedding of dataset row `row` into `out`.
    fn embed(&self, dataset: &Dataset, row: usize, out: &mut [f64]);
}

/// Returns the attribute vector each caption was generated from.
#[derive(Clone, Copy, Debug, Default)]
pub struct GroundTruthSemantics;

impl SemanticProvider for GroundTruthSemantics {
    fn dim(&self) -> usize {
        SEMANTIC_DIM
    }

    fn embed(&self, dataset: &Dataset, row: usize, out: &mut [f64]) {
        out.copy_from_slice(&dataset.semantics[row * SEMANTIC_DIM..(row + 1) * SEMANTIC_DIM]);
    }
}

/// Precomputed vectors, one per dataset row (e.g. from an external sentence encoder).
#[derive(Clone, Debug, PartialEq)]
pub struct PrecomputedSemantics {
    vectors: Matrix,
}

impl PrecomputedSemantics {
    pub fn new(vectors: Matrix) -> Result<Self> {
        if vectors.cols() == 0 || !vectors.is_finite() {
            return Err(Error::InvalidConfig("precomputed semantics must be finite and non-empty".into()));
        }
        Ok(Self { vectors })
    }

    pub fn rows(&self) -> usize {
        self.vectors.rows()
    }
}

impl SemanticProvider for PrecomputedSemantics {
    fn dim(&self) -> usize {
        self.vectors.cols()
    }

    fn embed(&self, _dataset: &Dataset, row: usize, out: &mut [f64]) {
        out.copy_from_slice(self.vectors.row(row));
    }
}

/// One shuffled training batch.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedRawBatch {
    pub indices: Vec<usize>,
    pub inputs: PairedInputs,
    pub labels: LabelVector,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }

    pub fn image_size(&self) -> usize {
        self.config.image_size
    }

    pub fn image(&self, row: usize) -> &[f32] {
        let n = self.image_size() * self.image_size();
        &self.images[row * n..(row + 1) * n]
    }

    pub fn semantic(&self, row: usize) -> &[f64] {
        &self.semantics[row * SEMANTIC_DIM..(row + 1) * SEMANTIC_DIM]
    }

    /// Rows of a split in ascending order.
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    pub fn image_batch(&self, indices: &[usize]) -> Result<ImageBatch> {
        let mut px = Vec::with_capacity(indices.len() * self.image_size() * self.image_size());
        for &i in indices {
            px.extend(self.image(i).iter().map(|&v| v as f64));
        }
        ImageBatch::new(indices.len(), self.image_size(), px)
    }

    /// Captions padded to `seq_len` (the encoder's sequence length).
    pub fn token_batch(&self, indices: &[usize], seq_len: usize) -> Result<TokenBatch> {
        let seqs: Vec<&[u32]> = indices.iter().map(|&i| self.captions[i].as_slice()).collect();
        TokenBatch::from_sequences(&seqs, seq_len)
    }

    pub fn semantic_batch(&self, indices: &[usize], provider: &dyn SemanticProvider) -> Result<EmbeddingBatch> {
        let d = provider.dim();
        let mut m = Matrix::zeros(indices.len(), d);
        for (r, &i) in indices.iter().enumerate() {
            provider.embed(self, i, m.row_mut(r));
        }
        EmbeddingBatch::new(m)
    }

    pub fn paired_inputs(&self, indices: &[usize], seq_len: usize, provider: &dyn SemanticProvider) -> Result<PairedInputs> {
        Ok(PairedInputs {
            images: self.image_batch(indices)?,
            tokens: self.token_batch(indices, seq_len)?,
            semantic: self.semantic_batch(indices, provider)?,
        })
    }
}

/// Shuffled index batches of one split. The final partial batch is dropped.
pub fn batch_indices(dataset: &Dataset, split: Split, batch_size: usize, epoch_seed: u64) -> Result<Vec<Vec<usize>>> {
    if batch_size < 2 {
        return Err(Error::BatchTooSmall { got: batch_size, min: 2 });
    }
    let mut rows = dataset.split_indices(split);
    rows.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed));
    Ok(rows.chunks_exact(batch_size).map(<[usize]>::to_vec).collect())
}

/// Lazily materialized batches of one split, each with identity labels.
pub fn batches<'a>(
    dataset: &'a Dataset,
    split: Split,
    batch_size: usize,
    epoch_seed: u64,
    seq_len: usize,
    provider: &'a dyn SemanticProvider,
) -> Result<impl Iterator<Item = Result<PairedRawBatch>> + 'a> {
    let order = batch_indices(dataset, split, batch_size, epoch_seed)?;
    Ok(order.into_iter().map(move |indices| {
        let inputs = dataset.paired_inputs(&indices, seq_len, provider)?;
        Ok(PairedRawBatch {
            labels: LabelVector::identity(indices.len()),
            indices,
            inputs,
        })
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet(n: usize) -> GenConfig {
        GenConfig {
            n_samples: n,
            noise_std: 0.0,
            ..GenConfig::default()
        }
    }

    fn cell_mean(img: &[f32], s: usize, q: usize) -> f64 {
        let c = s / 2;
        let (x0, y0) = ((q % 2) * c, (q / 2) * c);
        let mut t = 0.0;
        for y in y0..y0 + c {
            for x in x0..x0 + c {
                t += img[y * s + x] as f64;
            }
        }
        t / (c * c) as f64
    }

    #[test]
    fn noiseless_render_is_deterministic() {
        let g = quiet(1);
        let scene = SyntheticScene { shape: 3, size: 2, intensity: 1, position: 2 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(render_image(&scene, &g, &mut rng), render_image(&scene, &g, &mut rng));
    }

    #[test]
    fn bright_disk_outshines_empty_cells() {
        let g = quiet(1);
        let scene = SyntheticScene { shape: 2, size: 3, intensity: 3, position: 1 };
        let img = render_image(&scene, &g, &mut ChaCha8Rng::seed_from_u64(0));
        let lit = cell_mean(&img, 16, 1);
        for q in [0, 2, 3] {
            assert!(lit > cell_mean(&img, 16, q));
        }
    }

    #[test]
    fn moving_a_scene_only_touches_two_cells() {
        let g = quiet(1);
        let a = SyntheticScene { shape: 1, size: 3, intensity: 2, position: 0 };
        let b = SyntheticScene { position: 3, ..a };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (ia, ib) = (render_image(&a, &g, &mut rng), render_image(&b, &g, &mut rng));
        for y in 0..16 {
            for x in 0..16 {
                let q = (y / 8) * 2 + x / 8;
                if q == 1 || q == 2 {
                    assert_eq!(ia[y * 16 + x], ib[y * 16 + x]);
                }
            }
        }
        assert_ne!(ia, ib);
    }

    #[test]
    fn shapes_render_differently() {
        let g = quiet(1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let imgs: Vec<_> = (0..4)
            .map(|s| render_image(&SyntheticScene { shape: s, size: 3, intensity: 3, position: 0 }, &g, &mut rng))
            .collect();
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(imgs[i], imgs[j], "shapes {i} and {j}");
            }
        }
    }

    #[test]
    fn caption_keeps_everything_without_imbalance() {
        let g = GenConfig { imbalance: 0.0, ..quiet(1) };
        let scene = SyntheticScene { shape: 2, size: 1, intensity: 3, position: 0 };
        let (tokens, sem) = caption_scene(&scene, &g, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(sem.iter().filter(|&&v| v == 1.0).count(), 4);
        assert_eq!(g.vocab.decode(&tokens), "a photo of the small vivid disk in the topleft");
    }

    #[test]
    fn full_imbalance_keeps_one_attribute() {
        let g = GenConfig { imbalance: 1.0, ..quiet(1) };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for c in 0..NUM_CONCEPTS {
            let (_, sem) = caption_scene(&SyntheticScene::from_concept(c), &g, &mut rng);
            assert_eq!(sem.iter().filter(|&&v| v == 1.0).count(), 1);
        }
    }

    #[test]
    fn concept_round_trip() {
        for c in 0..NUM_CONCEPTS {
            assert_eq!(SyntheticScene::from_concept(c).concept(), c);
        }
    }

    #[test]
    fn split_sizes() {
        let d = generate_dataset(&quiet(1000)).unwrap();
        assert_eq!(d.split_indices(Split::Train).len(), 800);
        assert_eq!(d.split_indices(Split::Val).len(), 100);
        assert_eq!(d.split_indices(Split::Test).len(), 100);
    }

    #[test]
    fn same_config_same_dataset() {
        let g = GenConfig { n_samples: 50, ..GenConfig::default() };
        assert_eq!(generate_dataset(&g).unwrap(), generate_dataset(&g).unwrap());
        let other = GenConfig { seed: 1, ..g.clone() };
        assert_ne!(generate_dataset(&g).unwrap(), generate_dataset(&other).unwrap());
    }

    #[test]
    fn batching() {
        let g = GenConfig {
            n_samples: 100,
            train_frac: 1.0,
            val_frac: 0.0,
            test_frac: 0.0,
            ..quiet(100)
        };
        let d = generate_dataset(&g).unwrap();
        let a = batch_indices(&d, Split::Train, 16, 3).unwrap();
        assert_eq!(a.len(), 6);
        assert!(a.iter().all(|b| b.len() == 16));
        assert_eq!(a, batch_indices(&d, Split::Train, 16, 3).unwrap());
        assert_ne!(a, batch_indices(&d, Split::Train, 16, 4).unwrap());
        assert!(matches!(batch_indices(&d, Split::Train, 1, 0), Err(Error::BatchTooSmall { .. })));
        let b = batches(&d, Split::Train, 16, 3, 16, &GroundTruthSemantics).unwrap().next().unwrap().unwrap();
        assert_eq!(b.labels, LabelVector::identity(16));
        assert_eq!(b.indices, a[0]);
    }

    #[test]
    fn invalid_configs() {
        for g in [
            GenConfig { imbalance: 1.5, ..GenConfig::default() },
            GenConfig { train_frac: 0.5, ..GenConfig::default() },
            GenConfig { n_samples: 0, ..GenConfig::default() },
            GenConfig { seq_len: 4, ..GenConfig::default() },
        ] {
            assert!(matches!(generate_dataset(&g), Err(Error::InvalidConfig(_))));
        }
    }

    #[test]
    fn vocabulary_validation() {
        let mut words: Vec<String> = DEFAULT_WORDS.iter().map(|w| w.to_string()).collect();
        assert!(Vocabulary::new(words.clone()).is_ok());
        words[1] = "a".into();
        assert!(Vocabulary::new(words).is_err());
    }
}
