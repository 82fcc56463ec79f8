//! Catalog assembly: seeded spec sampling per split, holdout exclusion, and
//! the on-disk layout (`catalog.jsonl` + `images/<id>.png`).

use super::{
    render_product, Brand, ColorName, Feature, Pattern, Product, ProductSpec, Raster, Sortal,
    Split, SynthError,
};
use crate::geom::PixelBox;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogConfig {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub hout_c: usize,
    pub hout_b: usize,
    pub seed: u64,
    pub holdout_category: Sortal,
    pub holdout_brands: [Brand; 2],
}

impl Default for CatalogConfig {
    fn default() -> Self {
        CatalogConfig {
            train: 2000,
            val: 200,
            test: 200,
            hout_c: 100,
            hout_b: 100,
            seed: 17,
            holdout_category: Sortal::Pochette,
            holdout_brands: [Brand::Gucci, Brand::Fendi],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Catalog {
    pub products: Vec<Product>,
    /// Concatenation of all train-split captions; the tokenizer vocabulary
    /// is built from this and nothing else.
    pub vocab_source: String,
    pub holdout_category: Sortal,
    pub holdout_brands: [Brand; 2],
}

impl Catalog {
    pub fn split(&self, split: Split) -> impl Iterator<Item = &Product> {
        self.products.iter().filter(move |p| p.split == split)
    }
}

fn sample_pattern<R: Rng>(rng: &mut R) -> Option<Pattern> {
    match rng.random_range(0..4u32) {
        0 => None,
        1 => Some(Pattern::Plain),
        2 => Some(Pattern::Stripes),
        _ => Some(Pattern::Dots),
    }
}

fn sample_features<R: Rng>(rng: &mut R, sortal: Sortal) -> Vec<Feature> {
    let legal = sortal.legal_features();
    let count = match rng.random_range(0..100u32) {
        0..=34 => 0,
        35..=74 => 1,
        _ => 2,
    };
    let count = count.min(legal.len());
    let mut picked: Vec<Feature> = legal.choose_multiple(rng, count).copied().collect();
    picked.sort();
    picked
}

fn sample_brand<R: Rng>(rng: &mut R, sortal: Sortal, excluded: &[Brand]) -> Option<Brand> {
    let candidates: Vec<Brand> = Brand::ALL
        .iter()
        .copied()
        .filter(|b| b.affinity().contains(&sortal) && !excluded.contains(b))
        .collect();
    if candidates.is_empty() || !rng.random_bool(0.6) {
        None
    } else {
        candidates.choose(rng).copied()
    }
}

fn sample_spec<R: Rng>(rng: &mut R, split: Split, cfg: &CatalogConfig) -> ProductSpec {
    let seed = rng.random::<u64>();
    let (sortal, brand) = match split {
        Split::HoutC => {
            let sortal = cfg.holdout_category;
            (sortal, sample_brand(rng, sortal, &cfg.holdout_brands))
        }
        Split::HoutB => {
            // Joint draw over (holdout brand, affine non-holdout sortal).
            let pairs: Vec<(Brand, Sortal)> = cfg
                .holdout_brands
                .iter()
                .flat_map(|b| {
                    b.affinity()
                        .iter()
                        .filter(|s| **s != cfg.holdout_category)
                        .map(move |s| (*b, *s))
                })
                .collect();
            let (b, s) = *pairs.choose(rng).expect("holdout brands have affine sortals");
            (s, Some(b))
        }
        _ => {
            let sortals: Vec<Sortal> = Sortal::ALL
                .iter()
                .copied()
                .filter(|s| *s != cfg.holdout_category)
                .collect();
            let sortal = *sortals.choose(rng).expect("non-holdout sortal exists");
            (sortal, sample_brand(rng, sortal, &cfg.holdout_brands))
        }
    };
    let color = *ColorName::ALL.choose(rng).expect("colors nonempty");
    let pattern = sample_pattern(rng);
    let features = sample_features(rng, sortal);
    ProductSpec::new(sortal, color, pattern, features, brand, seed)
        .expect("sampled features are legal by construction")
}

/// Builds the full catalog: specs are drawn sequentially with a seeded
/// generator, rendered in parallel, and assembled in index order so the
/// output is independent of thread count.
pub fn build_catalog(config: &CatalogConfig) -> Result<Catalog, SynthError> {
    for (name, n) in [
        ("train", config.train),
        ("val", config.val),
        ("test", config.test),
        ("hout_c", config.hout_c),
        ("hout_b", config.hout_b),
    ] {
        if n == 0 {
            return Err(SynthError::BadConfig(format!("split {name} has count 0")));
        }
    }
    if Sortal::ALL.iter().all(|s| *s == config.holdout_category) {
        return Err(SynthError::BadConfig("holdout category covers every category".into()));
    }
    if config.holdout_brands[0] == config.holdout_brands[1] {
        return Err(SynthError::BadConfig("holdout brands must be distinct".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut plan: Vec<(Split, ProductSpec)> = Vec::new();
    for (split, count) in [
        (Split::Train, config.train),
        (Split::Val, config.val),
        (Split::Test, config.test),
        (Split::HoutC, config.hout_c),
        (Split::HoutB, config.hout_b),
    ] {
        for _ in 0..count {
            plan.push((split, sample_spec(&mut rng, split, config)));
        }
    }

    let mut products: Vec<Product> = plan
        .par_iter()
        .map(|(split, spec)| {
            let mut p = render_product(spec).expect("planned specs are legal");
            p.split = *split;
            p
        })
        .collect();
    for (i, p) in products.iter_mut().enumerate() {
        p.id = format!("p{i:05}");
    }

    let vocab_source = products
        .iter()
        .filter(|p| p.split == Split::Train)
        .map(|p| p.caption.as_str())
        .collect::<Vec<_>>()
        .join("\n");

    let catalog = Catalog {
        products,
        vocab_source,
        holdout_category: config.holdout_category,
        holdout_brands: config.holdout_brands,
    };
    validate_catalog(&catalog)?;
    Ok(catalog)
}

/// Checks every catalog invariant: split disjointness by id, holdout
/// exclusion, in-bounds boxes, strict brand containment, and the pure-white
/// background outside the sortal box.
pub fn validate_catalog(catalog: &Catalog) -> Result<(), SynthError> {
    let mut ids = HashSet::new();
    for p in &catalog.products {
        if !ids.insert(p.id.as_str()) {
            return Err(SynthError::InvariantViolation(format!("duplicate id {}", p.id)));
        }
        if matches!(p.split, Split::Train | Split::Val) {
            if p.spec.sortal == catalog.holdout_category {
                return Err(SynthError::InvariantViolation(format!(
                    "{} has holdout sortal {} in split {}",
                    p.id, p.spec.sortal, p.split
                )));
            }
            if let Some(b) = p.spec.brand {
                if catalog.holdout_brands.contains(&b) {
                    return Err(SynthError::InvariantViolation(format!(
                        "{} has holdout brand {} in split {}",
                        p.id, b, p.split
                    )));
                }
            }
        }
        let sortal_box = p.gt_boxes.get(p.spec.sortal.word()).ok_or_else(|| {
            SynthError::InvariantViolation(format!("{} missing sortal box", p.id))
        })?;
        for (concept, b) in &p.gt_boxes {
            if !b.in_bounds(p.image.width, p.image.height) {
                return Err(SynthError::InvariantViolation(format!(
                    "{} box {concept} out of bounds",
                    p.id
                )));
            }
        }
        if let Some(brand) = p.spec.brand {
            let bb = &p.gt_boxes[brand.word()];
            if !sortal_box.strictly_contains(bb) {
                return Err(SynthError::InvariantViolation(format!(
                    "{} brand box not strictly inside sortal box",
                    p.id
                )));
            }
        }
        for y in 0..p.image.height {
            for x in 0..p.image.width {
                if !sortal_box.contains_point(x, y) && p.image.get(x, y) != [255, 255, 255] {
                    return Err(SynthError::InvariantViolation(format!(
                        "{} non-white background at ({x},{y})",
                        p.id
                    )));
                }
            }
        }
    }
    Ok(())
}

/// One `catalog.jsonl` line. Field names are part of the on-disk contract.
#[derive(Debug, Serialize, Deserialize)]
pub(super) struct ProductRecord {
    pub id: String,
    pub caption: String,
    pub highlights: Vec<String>,
    pub tree: [String; 3],
    pub brand: String,
    pub styles: Vec<String>,
    pub split: Split,
    pub image_path: String,
    pub gt_boxes: BTreeMap<String, PixelBox>,
    #[serde(rename = "spec")]
    pub spec: ProductSpec,
}

impl ProductRecord {
    pub fn from_product(p: &Product) -> Self {
        ProductRecord {
            id: p.id.clone(),
            caption: p.caption.clone(),
            highlights: p.highlights.clone(),
            tree: p.tree.clone(),
            brand: p.brand.clone(),
            styles: p.styles.clone(),
            split: p.split,
            image_path: format!("images/{}.png", p.id),
            gt_boxes: p.gt_boxes.clone(),
            spec: p.spec.clone(),
        }
    }

    pub fn into_product(self, image: Raster) -> Product {
        Product {
            id: self.id,
            image,
            caption: self.caption,
            highlights: self.highlights,
            tree: self.tree,
            brand: self.brand,
            styles: self.styles,
            split: self.split,
            gt_boxes: self.gt_boxes,
            spec: self.spec,
        }
    }
}

/// Writes `catalog.jsonl` and `images/<id>.png` under `dir`.
pub fn save_catalog(catalog: &Catalog, dir: &Path) -> Result<(), SynthError> {
    std::fs::create_dir_all(dir.join("images"))?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("catalog.jsonl"))?);
    for p in &catalog.products {
        let record = ProductRecord::from_product(p);
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
        p.image.save_png(&dir.join("images").join(format!("{}.png", p.id)))?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_catalog(dir: &Path) -> Result<Catalog, SynthError> {
    let file = std::fs::File::open(dir.join("catalog.jsonl"))?;
    let mut products = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let record: ProductRecord = serde_json::from_str(&line?)?;
        let image = Raster::load_png(&dir.join(&record.image_path))?;
        products.push(record.into_product(image));
    }
    let vocab_source = products
        .iter()
        .filter(|p| p.split == Split::Train)
        .map(|p| p.caption.as_str())
        .collect::<Vec<_>>()
        .join("\n");
    // Holdouts are recoverable from the split contents.
    let holdout_category = products
        .iter()
        .find(|p| p.split == Split::HoutC)
        .map(|p| p.spec.sortal)
        .unwrap_or(Sortal::Pochette);
    let mut hout_brands: Vec<Brand> = products
        .iter()
        .filter(|p| p.split == Split::HoutB)
        .filter_map(|p| p.spec.brand)
        .collect();
    hout_brands.sort();
    hout_brands.dedup();
    let holdout_brands = match hout_brands.as_slice() {
        [a, b, ..] => [*a, *b],
        [a] => [*a, *a],
        [] => [Brand::Gucci, Brand::Fendi],
    };
    Ok(Catalog { products, vocab_source, holdout_category, holdout_brands })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> CatalogConfig {
        CatalogConfig { train: 60, val: 12, test: 12, hout_c: 8, hout_b: 8, ..Default::default() }
    }

    #[test]
    fn split_counts_and_disjoint_ids() {
        let cat = build_catalog(&small_config()).unwrap();
        assert_eq!(cat.split(Split::Train).count(), 60);
        assert_eq!(cat.split(Split::Val).count(), 12);
        assert_eq!(cat.split(Split::Test).count(), 12);
        assert_eq!(cat.split(Split::HoutC).count(), 8);
        assert_eq!(cat.split(Split::HoutB).count(), 8);
        let ids: HashSet<_> = cat.products.iter().map(|p| p.id.clone()).collect();
        assert_eq!(ids.len(), cat.products.len());
    }

    #[test]
    fn holdouts_absent_from_train_and_val() {
        let cfg = small_config();
        let cat = build_catalog(&cfg).unwrap();
        for p in cat.split(Split::Train).chain(cat.split(Split::Val)) {
            assert_ne!(p.spec.sortal, cfg.holdout_category);
            if let Some(b) = p.spec.brand {
                assert!(!cfg.holdout_brands.contains(&b));
            }
        }
        for p in cat.split(Split::HoutC) {
            assert_eq!(p.spec.sortal, cfg.holdout_category);
        }
        for p in cat.split(Split::HoutB) {
            assert!(cfg.holdout_brands.contains(&p.spec.brand.unwrap()));
        }
    }

    #[test]
    fn zero_count_is_a_config_error() {
        let cfg = CatalogConfig { val: 0, ..small_config() };
        assert!(matches!(build_catalog(&cfg), Err(SynthError::BadConfig(_))));
    }

    #[test]
    fn same_seed_builds_identical_files() {
        let cfg = small_config();
        let a = build_catalog(&cfg).unwrap();
        let b = build_catalog(&cfg).unwrap();
        let da = tempfile::tempdir().unwrap();
        let db = tempfile::tempdir().unwrap();
        save_catalog(&a, da.path()).unwrap();
        save_catalog(&b, db.path()).unwrap();
        let ja = std::fs::read(da.path().join("catalog.jsonl")).unwrap();
        let jb = std::fs::read(db.path().join("catalog.jsonl")).unwrap();
        assert_eq!(ja, jb);
        for p in &a.products {
            let ia = std::fs::read(da.path().join(format!("images/{}.png", p.id))).unwrap();
            let ib = std::fs::read(db.path().join(format!("images/{}.png", p.id))).unwrap();
            assert_eq!(ia, ib, "image bytes differ for {}", p.id);
        }
    }

    #[test]
    fn save_load_round_trip_preserves_products() {
        let cat = build_catalog(&small_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_catalog(&cat, dir.path()).unwrap();
        let loaded = load_catalog(dir.path()).unwrap();
        assert_eq!(loaded.products.len(), cat.products.len());
        for (a, b) in cat.products.iter().zip(&loaded.products) {
            assert_eq!(a.id, b.id);
            assert_eq!(a.caption, b.caption);
            assert_eq!(a.image, b.image);
            assert_eq!(a.gt_boxes, b.gt_boxes);
        }
        assert_eq!(loaded.vocab_source, cat.vocab_source);
    }
}
