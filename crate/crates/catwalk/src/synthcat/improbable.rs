//! Composition of out-of-distribution products from noun phrases: brands on
//! sortals they never produce, features from foreign sortals, and colors
//! bound to parts, plus the distractor label sets used to score them.

use super::render::{
    draw_feature, draw_logo, feature_color, generic_feature_boxes, logo_anchor,
    native_feature_boxes, silhouette,
};
use super::{
    Brand, ColorName, Feature, Modifier, NounPhrase, Product, ProductSpec, Raster, Sortal, Split,
    SynthError, IMAGE_SIZE,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use crate::geom::PixelBox;
use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

/// True when the phrase describes a combination the catalog never produces:
/// a feature illegal for the sortal, a brand outside its sortal affinity, or
/// a color bound to a feature (catalog features keep their standard colors).
pub fn is_improbable(np: &NounPhrase) -> bool {
    let mut prev_was_color = false;
    for m in &np.modifiers {
        match m {
            Modifier::Feature(f) => {
                if !np.sortal.legal_features().contains(f) {
                    return true;
                }
                if prev_was_color {
                    return true;
                }
                prev_was_color = false;
            }
            Modifier::Brand(b) => {
                if !b.affinity().contains(&np.sortal) {
                    return true;
                }
                prev_was_color = false;
            }
            Modifier::Color(_) => {
                prev_was_color = true;
            }
        }
    }
    false
}

fn render_np(np: &NounPhrase, seed: u64) -> (Raster, BTreeMap<String, PixelBox>, ProductSpec) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Colors immediately preceding a feature bind to it; the first free color
    // is the body color, otherwise one is drawn.
    let mut body_color: Option<ColorName> = None;
    let mut features: Vec<(Feature, Option<ColorName>)> = Vec::new();
    let mut brand: Option<Brand> = None;
    let mut i = 0;
    while i < np.modifiers.len() {
        match np.modifiers[i] {
            Modifier::Color(c) => {
                if let Some(Modifier::Feature(f)) = np.modifiers.get(i + 1) {
                    features.push((*f, Some(c)));
                    i += 2;
                    continue;
                }
                if body_color.is_none() {
                    body_color = Some(c);
                }
            }
            Modifier::Feature(f) => features.push((f, None)),
            Modifier::Brand(b) => brand = brand.or(Some(b)),
        }
        i += 1;
    }
    let body_color =
        body_color.unwrap_or_else(|| *ColorName::ALL.choose(&mut rng).expect("colors nonempty"));

    let sil = silhouette(np.sortal);
    let mut img = Raster::white(IMAGE_SIZE, IMAGE_SIZE);
    let body = body_color.rgb();
    for y in 0..IMAGE_SIZE {
        for x in 0..IMAGE_SIZE {
            if sil.mask[(y * IMAGE_SIZE + x) as usize] {
                img.put(x, y, body);
            }
        }
    }
    let mut gt_boxes = BTreeMap::new();
    gt_boxes.insert(np.sortal.word().to_string(), sil.hull);

    for (f, bound) in &features {
        let boxes = if np.sortal.legal_features().contains(f) {
            native_feature_boxes(np.sortal, *f)
        } else {
            generic_feature_boxes(*f, &sil.hull)
        };
        let rgb = bound.map(|c| c.rgb()).unwrap_or_else(|| feature_color(*f, body));
        draw_feature(&mut img, *f, &boxes, rgb);
        let hull = boxes.iter().skip(1).fold(boxes[0], |acc, b| acc.hull(b));
        gt_boxes.insert(f.word().to_string(), hull);
    }
    if let Some(b) = brand {
        let anchor = logo_anchor(np.sortal, b.is_text_logo());
        let patch = draw_logo(&mut img, b, anchor);
        gt_boxes.insert(b.word().to_string(), patch);
    }

    let spec = ProductSpec {
        sortal: np.sortal,
        color: body_color,
        pattern: None,
        features: features.iter().map(|(f, _)| *f).collect(),
        brand,
        styles: super::style_tags(body_color, None, brand),
        seed,
    };
    (img, gt_boxes, spec)
}

/// Composes a product realizing an improbable noun phrase. Brand regions are
/// proper internal parts of the sortal region; foreign features attach as
/// connected regions that may straddle the sortal boundary. `force` admits
/// phrases that are in fact probable.
pub fn compose_improbable(np: &NounPhrase, seed: u64, force: bool) -> Result<Product, SynthError> {
    if !force && !is_improbable(np) {
        return Err(SynthError::NotImprobable(np.text()));
    }
    let (image, gt_boxes, spec) = render_np(np, seed);
    Ok(Product {
        id: format!("imp-{seed:016x}"),
        image,
        caption: np.text(),
        highlights: Vec::new(),
        tree: np.sortal.tree(None),
        brand: spec.brand.map(|b| b.word().to_string()).unwrap_or_default(),
        styles: spec.styles.iter().map(|s| s.word().to_string()).collect(),
        split: Split::TestExtension,
        gt_boxes,
        spec,
    })
}

/// One improbable product with its zero-shot label set.
#[derive(Debug, Clone)]
pub struct ImprobableCase {
    pub product: Product,
    /// Exactly `label_set_size` labels including the target.
    pub labels: Vec<String>,
    pub target: String,
}

const LABEL_SET_SIZE: usize = 10;

fn random_legal_np<R: Rng>(rng: &mut R, exclude_sortal: Sortal, holdout: Sortal) -> NounPhrase {
    let sortals: Vec<Sortal> = Sortal::ALL
        .iter()
        .copied()
        .filter(|s| *s != exclude_sortal && *s != holdout)
        .collect();
    let sortal = *sortals.choose(rng).expect("sortal pool nonempty");
    let color = *ColorName::ALL.choose(rng).expect("colors nonempty");
    let mut modifiers = vec![Modifier::Color(color)];
    if rng.random_bool(0.5) {
        if let Some(f) = sortal.legal_features().choose(rng) {
            modifiers.push(Modifier::Feature(*f));
        }
    }
    NounPhrase { sortal, modifiers }
}

fn distractors<R: Rng>(
    np: &NounPhrase,
    holdout_category: Sortal,
    holdout_brands: &[Brand; 2],
    rng: &mut R,
) -> Vec<String> {
    let mut labels = vec![np.text()];
    let push = |labels: &mut Vec<String>, text: String| {
        if !labels.contains(&text) {
            labels.push(text);
        }
    };

    // Brand swap (or brand insertion when the target has none).
    let brands: Vec<Brand> = Brand::ALL
        .iter()
        .copied()
        .filter(|b| !holdout_brands.contains(b))
        .collect();
    let current_brand = np.modifiers.iter().find_map(|m| match m {
        Modifier::Brand(b) => Some(*b),
        _ => None,
    });
    if let Some(swap) = brands.iter().find(|b| Some(**b) != current_brand) {
        let mut alt = np.clone();
        if current_brand.is_some() {
            for m in &mut alt.modifiers {
                if matches!(m, Modifier::Brand(_)) {
                    *m = Modifier::Brand(*swap);
                }
            }
        } else {
            alt.modifiers.insert(0, Modifier::Brand(*swap));
        }
        push(&mut labels, alt.text());
    }

    // Sortal swap.
    let alt_sortals: Vec<Sortal> = Sortal::ALL
        .iter()
        .copied()
        .filter(|s| *s != np.sortal && *s != holdout_category)
        .collect();
    if let Some(s) = alt_sortals.choose(rng) {
        let alt = NounPhrase { sortal: *s, modifiers: np.modifiers.clone() };
        push(&mut labels, alt.text());
    }

    // Color swap: exchange bound and body colors when both exist (the
    // inverse phrase), otherwise substitute the body color.
    let colors: Vec<ColorName> = np
        .modifiers
        .iter()
        .filter_map(|m| match m {
            Modifier::Color(c) => Some(*c),
            _ => None,
        })
        .collect();
    if colors.len() >= 2 {
        let mut alt = np.clone();
        let mut seen = 0;
        for m in &mut alt.modifiers {
            if let Modifier::Color(c) = m {
                *c = colors[(seen + 1) % colors.len()];
                seen += 1;
            }
        }
        push(&mut labels, alt.text());
    } else if let Some(cur) = colors.first() {
        let alt_color = ColorName::ALL.iter().find(|c| *c != cur).copied().unwrap();
        let mut alt = np.clone();
        for m in &mut alt.modifiers {
            if matches!(m, Modifier::Color(_)) {
                *m = Modifier::Color(alt_color);
                break;
            }
        }
        push(&mut labels, alt.text());
    }

    // Feature swap or feature drop.
    if np.modifiers.iter().any(|m| matches!(m, Modifier::Feature(_))) {
        let mut alt = np.clone();
        alt.modifiers.retain(|m| !matches!(m, Modifier::Feature(_) | Modifier::Color(_)));
        let color = colors.first().copied().unwrap_or(ColorName::Red);
        alt.modifiers.insert(0, Modifier::Color(color));
        push(&mut labels, alt.text());
    } else if let Some(f) = np.sortal.legal_features().choose(rng) {
        let mut alt = np.clone();
        alt.modifiers.push(Modifier::Feature(*f));
        push(&mut labels, alt.text());
    }

    // Unrelated fillers from other sortals.
    let mut guard = 0;
    while labels.len() < LABEL_SET_SIZE && guard < 200 {
        let filler = random_legal_np(rng, np.sortal, holdout_category);
        push(&mut labels, filler.text());
        guard += 1;
    }
    labels.truncate(LABEL_SET_SIZE);

    // Target position is a seeded draw so ties never systematically favor it.
    let target = labels[0].clone();
    let pos = rng.random_range(0..labels.len());
    labels.swap(0, pos);
    debug_assert!(labels.contains(&target));
    labels
}

/// Builds `count` improbable products with label sets, cycling through the
/// three improbability kinds: brand-affinity violation, foreign feature, and
/// color-to-part binding. Holdout concepts are avoided so every label word
/// was trainable.
pub fn improbable_suite(
    count: usize,
    holdout_category: Sortal,
    holdout_brands: &[Brand; 2],
    seed: u64,
) -> Result<Vec<ImprobableCase>, SynthError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let brands: Vec<Brand> = Brand::ALL
        .iter()
        .copied()
        .filter(|b| !holdout_brands.contains(b))
        .collect();
    let sortals: Vec<Sortal> =
        Sortal::ALL.iter().copied().filter(|s| *s != holdout_category).collect();

    let mut cases = Vec::with_capacity(count);
    let mut index = 0usize;
    while cases.len() < count {
        let kind = index % 3;
        index += 1;
        let np = match kind {
            0 => {
                let brand = brands[index / 3 % brands.len()];
                let foreign: Vec<Sortal> = sortals
                    .iter()
                    .copied()
                    .filter(|s| !brand.affinity().contains(s))
                    .collect();
                let Some(sortal) = foreign.choose(&mut rng).copied() else { continue };
                let color = *ColorName::ALL.choose(&mut rng).unwrap();
                NounPhrase {
                    sortal,
                    modifiers: vec![Modifier::Brand(brand), Modifier::Color(color)],
                }
            }
            1 => {
                let sortal = sortals[index / 3 % sortals.len()];
                let foreign: Vec<Feature> = sortals
                    .iter()
                    .filter(|s| **s != sortal)
                    .flat_map(|s| s.legal_features().iter().copied())
                    .filter(|f| !sortal.legal_features().contains(f))
                    .collect();
                let Some(f) = foreign.choose(&mut rng).copied() else { continue };
                let color = *ColorName::ALL.choose(&mut rng).unwrap();
                NounPhrase {
                    sortal,
                    modifiers: vec![Modifier::Color(color), Modifier::Feature(f)],
                }
            }
            _ => {
                let sortal = sortals[index / 3 % sortals.len()];
                let Some(f) = sortal.legal_features().choose(&mut rng).copied() else { continue };
                let body = *ColorName::ALL.choose(&mut rng).unwrap();
                let part = *ColorName::ALL.iter().filter(|c| **c != body).collect::<Vec<_>>()
                    .choose(&mut rng)
                    .unwrap();
                NounPhrase {
                    sortal,
                    modifiers: vec![
                        Modifier::Color(body),
                        Modifier::Color(*part),
                        Modifier::Feature(f),
                    ],
                }
            }
        };
        let case_seed = rng.random::<u64>();
        let mut product = compose_improbable(&np, case_seed, false)?;
        product.id = format!("x{:05}", cases.len());
        let labels = distractors(&np, holdout_category, holdout_brands, &mut rng);
        let target = product.caption.clone();
        cases.push(ImprobableCase { product, labels, target });
    }
    Ok(cases)
}

/// Writes `improbable.jsonl` (catalog schema), its images, and the label
/// sets sidecar `improbable_labels.json`.
pub fn save_improbable(cases: &[ImprobableCase], dir: &Path) -> Result<(), SynthError> {
    std::fs::create_dir_all(dir.join("images"))?;
    let mut out = std::io::BufWriter::new(std::fs::File::create(dir.join("improbable.jsonl"))?);
    let mut labels: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for case in cases {
        let record = super::catalog::ProductRecord::from_product(&case.product);
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
        case.product
            .image
            .save_png(&dir.join("images").join(format!("{}.png", case.product.id)))?;
        labels.insert(case.product.id.clone(), case.labels.clone());
    }
    out.flush()?;
    let f = std::fs::File::create(dir.join("improbable_labels.json"))?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(f), &labels)?;
    Ok(())
}

pub fn load_improbable(dir: &Path) -> Result<Vec<ImprobableCase>, SynthError> {
    let file = std::fs::File::open(dir.join("improbable.jsonl"))?;
    let labels: BTreeMap<String, Vec<String>> = serde_json::from_reader(std::io::BufReader::new(
        std::fs::File::open(dir.join("improbable_labels.json"))?,
    ))?;
    let mut cases = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let record: super::catalog::ProductRecord = serde_json::from_str(&line?)?;
        let image = Raster::load_png(&dir.join(&record.image_path))?;
        let product = record.into_product(image);
        let label_set = labels
            .get(&product.id)
            .cloned()
            .ok_or_else(|| SynthError::InvariantViolation(format!("no labels for {}", product.id)))?;
        let target = product.caption.clone();
        cases.push(ImprobableCase { product, labels: label_set, target });
    }
    Ok(cases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthcat::parse_np;

    #[test]
    fn brand_on_foreign_sortal_has_logo_strictly_inside() {
        let np = parse_np("nike dress").unwrap();
        assert!(is_improbable(&np));
        let p = compose_improbable(&np, 5, false).unwrap();
        let sortal = p.gt_boxes["dress"];
        let logo = p.gt_boxes["nike"];
        assert!(sortal.strictly_contains(&logo));
        assert_eq!(p.split, Split::TestExtension);
    }

    #[test]
    fn foreign_feature_attaches_connected_not_contained() {
        let np = parse_np("shoe with handles").unwrap();
        assert!(is_improbable(&np));
        let p = compose_improbable(&np, 9, false).unwrap();
        let sortal = p.gt_boxes["shoe"];
        let handles = p.gt_boxes["handles"];
        assert!(sortal.intersects(&handles), "{sortal:?} vs {handles:?}");
    }

    #[test]
    fn bound_color_recolors_the_part() {
        let np = parse_np("red shoe with black high heels").unwrap();
        assert!(is_improbable(&np));
        let p = compose_improbable(&np, 11, false).unwrap();
        let heel = p.gt_boxes["high heels"];
        let sortal = p.gt_boxes["shoe"];
        // Heel pixels black-dominant.
        let mut heel_dark = 0u32;
        let mut heel_px = 0u32;
        for y in heel.y0..=heel.y1 {
            for x in heel.x0..=heel.x1 {
                let [r, g, b] = p.image.get(x, y);
                heel_px += 1;
                if r < 60 && g < 60 && b < 60 {
                    heel_dark += 1;
                }
            }
        }
        assert!(heel_dark * 2 > heel_px, "heel region not black-dominant");
        // Body pixels outside the heel red-dominant.
        let mut red = 0u32;
        let mut other = 0u32;
        for y in sortal.y0..=sortal.y1 {
            for x in sortal.x0..=sortal.x1 {
                if heel.contains_point(x, y) {
                    continue;
                }
                let [r, g, b] = p.image.get(x, y);
                if [r, g, b] == [255, 255, 255] {
                    continue;
                }
                if r > g && r > b {
                    red += 1;
                } else {
                    other += 1;
                }
            }
        }
        assert!(red > 10 * other.max(1), "body not red-dominant: {red} vs {other}");
    }

    #[test]
    fn probable_phrase_is_rejected_unless_forced() {
        let np = parse_np("nike tshirt").unwrap();
        assert!(!is_improbable(&np));
        assert!(matches!(compose_improbable(&np, 1, false), Err(SynthError::NotImprobable(_))));
        assert!(compose_improbable(&np, 1, true).is_ok());
    }

    #[test]
    fn suite_produces_valid_label_sets() {
        let cases =
            improbable_suite(24, Sortal::Pochette, &[Brand::Gucci, Brand::Fendi], 3).unwrap();
        assert_eq!(cases.len(), 24);
        for case in &cases {
            assert_eq!(case.labels.len(), LABEL_SET_SIZE);
            assert!(case.labels.contains(&case.target));
            assert_eq!(case.target, case.product.caption);
            let unique: std::collections::HashSet<_> = case.labels.iter().collect();
            assert_eq!(unique.len(), case.labels.len(), "duplicate labels in {:?}", case.labels);
        }
    }

    #[test]
    fn suite_round_trips_through_disk() {
        let cases =
            improbable_suite(6, Sortal::Pochette, &[Brand::Gucci, Brand::Fendi], 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        save_improbable(&cases, dir.path()).unwrap();
        let loaded = load_improbable(dir.path()).unwrap();
        assert_eq!(loaded.len(), cases.len());
        for (a, b) in cases.iter().zip(&loaded) {
            assert_eq!(a.product.id, b.product.id);
            assert_eq!(a.product.image, b.product.image);
            assert_eq!(a.labels, b.labels);
        }
    }
}
