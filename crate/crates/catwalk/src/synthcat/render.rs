//! Deterministic product rendering: sortal silhouettes, pattern overlays,
//! feature glyphs, brand logos, the 5x7 text font, typographic attacks, and
//! the shifted-domain render variants used by the evaluation suite.

use super::{
    generate_caption, Brand, ColorName, Feature, Pattern, Product, ProductSpec, Raster, Sortal,
    Split, SynthError, IMAGE_SIZE,
};
use crate::geom::PixelBox;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

const WHITE: [u8; 3] = [255, 255, 255];

fn darken(rgb: [u8; 3], num: u16, den: u16) -> [u8; 3] {
    [
        (u16::from(rgb[0]) * num / den) as u8,
        (u16::from(rgb[1]) * num / den) as u8,
        (u16::from(rgb[2]) * num / den) as u8,
    ]
}

/// Silhouette occupancy for one sortal on the 64x64 canvas.
pub(super) struct Silhouette {
    pub mask: Vec<bool>,
    pub hull: PixelBox,
}

pub(super) fn silhouette(sortal: Sortal) -> Silhouette {
    let n = IMAGE_SIZE as usize;
    let mut mask = vec![false; n * n];
    let mut set = |x: u32, y: u32| {
        if x < IMAGE_SIZE && y < IMAGE_SIZE {
            mask[(y * IMAGE_SIZE + x) as usize] = true;
        }
    };
    let mut fill = |b: (u32, u32, u32, u32)| {
        for y in b.1..=b.3 {
            for x in b.0..=b.2 {
                set(x, y);
            }
        }
    };
    match sortal {
        Sortal::Dress => {
            fill((26, 10, 38, 24));
            for y in 24..=54 {
                let half = 6 + (12 * (y - 24)) / 30;
                fill((32 - half, y, 32 + half, y));
            }
        }
        Sortal::Tshirt => {
            fill((22, 14, 42, 46));
            fill((12, 14, 21, 26));
            fill((43, 14, 52, 26));
        }
        Sortal::Shoe => {
            fill((10, 46, 54, 52));
            fill((10, 38, 36, 45));
            fill((36, 30, 50, 45));
        }
        Sortal::Bag => {
            fill((16, 26, 48, 52));
            fill((20, 22, 44, 25));
        }
        Sortal::Hat => {
            for y in 16..=30 {
                let dy = 30 - y;
                let half = ((196 - dy * dy) as f64).sqrt() as u32;
                fill((32 - half, y, 32 + half, y));
            }
            fill((14, 30, 50, 35));
        }
        Sortal::Pochette => {
            fill((18, 30, 46, 48));
        }
    }
    let mut hull: Option<PixelBox> = None;
    for y in 0..IMAGE_SIZE {
        for x in 0..IMAGE_SIZE {
            if mask[(y * IMAGE_SIZE + x) as usize] {
                let px = PixelBox::new(x, y, x, y);
                hull = Some(hull.map_or(px, |h| h.hull(&px)));
            }
        }
    }
    Silhouette { mask, hull: hull.expect("silhouette is never empty") }
}

fn body_pixel(color: ColorName, pattern: Option<Pattern>, x: u32, y: u32) -> [u8; 3] {
    let base = color.rgb();
    match pattern {
        Some(Pattern::Stripes) if (x / 3) % 2 == 1 => darken(base, 11, 20),
        Some(Pattern::Dots) if x % 5 < 2 && y % 5 < 2 => darken(base, 11, 20),
        _ => base,
    }
}

pub(super) fn feature_color(feature: Feature, body: [u8; 3]) -> [u8; 3] {
    match feature {
        Feature::LongSleeves => darken(body, 18, 25),
        Feature::Belt => [45, 30, 15],
        Feature::Collar => [210, 210, 225],
        Feature::Pocket => [55, 55, 55],
        Feature::HighHeels => [50, 25, 60],
        Feature::AnkleStrap => [25, 25, 25],
        Feature::Laces => [205, 205, 215],
        Feature::Handles => [70, 45, 20],
        Feature::ShoulderStrap => [35, 55, 35],
        Feature::Buckle => [215, 180, 60],
        Feature::Ribbon => [170, 30, 90],
        Feature::Feather => [90, 140, 60],
        Feature::Chain => [200, 180, 90],
        Feature::Clasp => [150, 150, 160],
    }
}

/// Anchor rectangles for a feature legally placed on its sortal. All boxes
/// lie inside the sortal hull so catalog renders keep the background white.
pub(super) fn native_feature_boxes(sortal: Sortal, feature: Feature) -> Vec<PixelBox> {
    let b = |x0, y0, x1, y1| PixelBox::new(x0, y0, x1, y1);
    match (sortal, feature) {
        (Sortal::Dress, Feature::LongSleeves) => vec![b(18, 10, 24, 26), b(40, 10, 46, 26)],
        (Sortal::Dress, Feature::Belt) => vec![b(24, 26, 40, 29)],
        (Sortal::Dress, Feature::Collar) => vec![b(28, 10, 36, 13)],
        (Sortal::Tshirt, Feature::LongSleeves) => vec![b(12, 27, 18, 44), b(46, 27, 52, 44)],
        (Sortal::Tshirt, Feature::Pocket) => vec![b(22, 39, 28, 45)],
        (Sortal::Tshirt, Feature::Collar) => vec![b(26, 14, 38, 17)],
        (Sortal::Shoe, Feature::HighHeels) => vec![b(46, 32, 53, 45)],
        (Sortal::Shoe, Feature::AnkleStrap) => vec![b(36, 31, 50, 34)],
        (Sortal::Shoe, Feature::Laces) => vec![b(14, 39, 26, 43)],
        (Sortal::Bag, Feature::Handles) => vec![b(18, 28, 26, 38), b(38, 28, 46, 38)],
        (Sortal::Bag, Feature::ShoulderStrap) => vec![b(17, 28, 45, 50)],
        (Sortal::Bag, Feature::Buckle) => vec![b(20, 44, 28, 50)],
        (Sortal::Hat, Feature::Ribbon) => vec![b(16, 31, 48, 34)],
        (Sortal::Hat, Feature::Feather) => vec![b(45, 22, 49, 28)],
        (Sortal::Pochette, Feature::Chain) => vec![b(20, 31, 44, 33)],
        (Sortal::Pochette, Feature::Clasp) => vec![b(38, 42, 44, 46)],
        _ => unreachable!("native placement queried for illegal pair {sortal}/{feature}"),
    }
}

/// Placement for a feature composed onto a sortal that does not legally carry
/// it. Attachment features straddle the hull edge (connected but not
/// contained); fitted features sit inside.
pub(super) fn generic_feature_boxes(feature: Feature, hull: &PixelBox) -> Vec<PixelBox> {
    let cx = (hull.x0 + hull.x1) / 2;
    let cy = (hull.y0 + hull.y1) / 2;
    let top = hull.y0.saturating_sub(6);
    let bottom = (hull.y1 + 6).min(IMAGE_SIZE - 1);
    let b = |x0: u32, y0: u32, x1: u32, y1: u32| {
        PixelBox::new(x0, y0, x1.min(IMAGE_SIZE - 1), y1.min(IMAGE_SIZE - 1))
    };
    match feature {
        Feature::Handles => vec![b(cx - 12, top, cx - 4, hull.y0 + 4), b(cx + 4, top, cx + 12, hull.y0 + 4)],
        Feature::Chain => vec![b(hull.x0 + 2, top, hull.x1 - 2, hull.y0 + 2)],
        Feature::ShoulderStrap => vec![b(hull.x0 + 2, top, hull.x1 - 2, hull.y1 - 2)],
        Feature::Collar => vec![b(cx - 6, top, cx + 6, hull.y0 + 3)],
        Feature::Ribbon => vec![b(hull.x0 + 3, hull.y0 + 4, hull.x1 - 3, hull.y0 + 7)],
        Feature::HighHeels => vec![b(cx + 6, hull.y1 - 4, cx + 13, bottom)],
        Feature::Laces => vec![b(cx - 8, hull.y1 - 4, cx + 6, bottom)],
        Feature::LongSleeves => {
            vec![
                b(hull.x0 + 1, hull.y0 + 2, hull.x0 + 6, (hull.y0 + 18).min(hull.y1)),
                b(hull.x1 - 6, hull.y0 + 2, hull.x1 - 1, (hull.y0 + 18).min(hull.y1)),
            ]
        }
        Feature::Belt => vec![b(hull.x0 + 2, cy - 1, hull.x1 - 2, cy + 2)],
        Feature::AnkleStrap => vec![b(hull.x0 + 4, hull.y0 + 3, hull.x1 - 4, hull.y0 + 6)],
        Feature::Pocket => vec![b(cx - 4, cy - 3, cx + 3, cy + 3)],
        Feature::Buckle => vec![b(cx - 4, cy - 4, cx + 4, cy + 4)],
        Feature::Feather => vec![b(hull.x1 - 10, top, hull.x1 - 2, hull.y0 + 2)],
        Feature::Clasp => vec![b(cx - 3, cy - 2, cx + 3, cy + 2)],
    }
}

fn fill_box(img: &mut Raster, b: &PixelBox, rgb: [u8; 3]) {
    for y in b.y0..=b.y1 {
        for x in b.x0..=b.x1 {
            img.put(x, y, rgb);
        }
    }
}

fn outline_box(img: &mut Raster, b: &PixelBox, thickness: u32, rgb: [u8; 3]) {
    for y in b.y0..=b.y1 {
        for x in b.x0..=b.x1 {
            let edge = x < b.x0 + thickness
                || x > b.x1 - thickness
                || y < b.y0 + thickness
                || y > b.y1 - thickness;
            if edge {
                img.put(x, y, rgb);
            }
        }
    }
}

pub(super) fn draw_feature(img: &mut Raster, feature: Feature, boxes: &[PixelBox], rgb: [u8; 3]) {
    match feature {
        Feature::Handles => {
            for b in boxes {
                // Inverted U: two uprights joined by a top bar.
                fill_box(img, &PixelBox::new(b.x0, b.y0, b.x0 + 1, b.y1), rgb);
                fill_box(img, &PixelBox::new(b.x1 - 1, b.y0, b.x1, b.y1), rgb);
                fill_box(img, &PixelBox::new(b.x0, b.y0, b.x1, b.y0 + 1), rgb);
            }
        }
        Feature::Laces => {
            for b in boxes {
                fill_box(img, &PixelBox::new(b.x0, b.y0, b.x1, b.y0 + 1), rgb);
                fill_box(img, &PixelBox::new(b.x0, b.y1 - 1, b.x1, b.y1), rgb);
            }
        }
        Feature::ShoulderStrap => {
            for b in boxes {
                for y in b.y0..=b.y1 {
                    let t = y - b.y0;
                    let span = b.y1 - b.y0;
                    let xc = b.x0 + ((b.x1 - b.x0 - 2) * t) / span.max(1);
                    fill_box(img, &PixelBox::new(xc, y, xc + 2, y), rgb);
                }
            }
        }
        Feature::Buckle => {
            for b in boxes {
                outline_box(img, b, 2, rgb);
            }
        }
        Feature::Chain => {
            for b in boxes {
                let cy = (b.y0 + b.y1) / 2;
                let mut x = b.x0;
                while x + 1 <= b.x1 {
                    fill_box(img, &PixelBox::new(x, cy.saturating_sub(1), x + 1, cy), rgb);
                    x += 4;
                }
            }
        }
        Feature::Feather => {
            for b in boxes {
                let n = (b.x1 - b.x0).max(b.y1 - b.y0).max(1);
                for i in 0..=n {
                    let x = b.x0 + ((b.x1 - b.x0) * i) / n;
                    let y = b.y1 - ((b.y1 - b.y0) * i) / n;
                    fill_box(img, &PixelBox::new(x, y, (x + 1).min(b.x1), (y + 1).min(b.y1)), rgb);
                }
            }
        }
        _ => {
            for b in boxes {
                fill_box(img, b, rgb);
            }
        }
    }
}

// --- brand logos -----------------------------------------------------------

const MARK_PATCH: (u32, u32) = (11, 11);

pub(super) fn logo_anchor(sortal: Sortal, text_logo: bool) -> (u32, u32) {
    match (sortal, text_logo) {
        (Sortal::Dress, false) => (27, 30),
        (Sortal::Dress, true) => (19, 32),
        (Sortal::Tshirt, false) => (27, 26),
        (Sortal::Tshirt, true) => (19, 28),
        (Sortal::Shoe, false) => (28, 38),
        (Sortal::Shoe, true) => (17, 39),
        (Sortal::Bag, false) => (27, 32),
        (Sortal::Bag, true) => (18, 36),
        (Sortal::Hat, false) => (27, 19),
        (Sortal::Hat, true) => (18, 20),
        (Sortal::Pochette, false) => (26, 35),
        (Sortal::Pochette, true) => (19, 36),
    }
}

fn brand_glyph(brand: Brand) -> ([&'static str; 7], [u8; 3]) {
    match brand {
        Brand::Nike => (
            [".......", "......#", ".....##", "#...##.", "##.##..", ".###...", "..#...."],
            [15, 15, 15],
        ),
        Brand::Armani => (
            ["...#...", "..#.#..", "..#.#..", ".#...#.", ".#...#.", "#.....#", "#######"],
            [200, 160, 10],
        ),
        Brand::Prada => (
            ["...#...", "..###..", ".#####.", "#######", ".#####.", "..###..", "...#..."],
            [150, 20, 60],
        ),
        Brand::Gucci => (
            [".......", ".##.##.", "#..#..#", "#..#..#", "#..#..#", ".##.##.", "......."],
            [10, 110, 45],
        ),
        Brand::Fendi => (
            ["#######", "#######", ".......", "#####..", "#####..", ".......", "......."],
            [190, 120, 20],
        ),
        Brand::Zara => unreachable!("text-logo brand has no mark glyph"),
    }
}

/// Stamps a logo patch and returns its box. The patch is a white label with a
/// thin black border so marks stay visible on any body color and a white
/// occluder always removes glyph pixels.
pub(super) fn draw_logo(img: &mut Raster, brand: Brand, anchor: (u32, u32)) -> PixelBox {
    if brand.is_text_logo() {
        return draw_text_patch(img, anchor, brand.word());
    }
    let patch = PixelBox::new(anchor.0, anchor.1, anchor.0 + MARK_PATCH.0 - 1, anchor.1 + MARK_PATCH.1 - 1);
    fill_box(img, &patch, WHITE);
    outline_box(img, &patch, 1, [40, 40, 40]);
    let (rows, rgb) = brand_glyph(brand);
    for (dy, row) in rows.iter().enumerate() {
        for (dx, c) in row.bytes().enumerate() {
            if c == b'#' {
                img.put(anchor.0 + 2 + dx as u32, anchor.1 + 2 + dy as u32, rgb);
            }
        }
    }
    patch
}

// --- 5x7 bitmap font -------------------------------------------------------

fn font_glyph(c: char) -> Option<[&'static str; 7]> {
    let g: [&'static str; 7] = match c.to_ascii_lowercase() {
        'a' => [".###.", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
        'b' => ["####.", "#...#", "####.", "#...#", "#...#", "#...#", "####."],
        'c' => [".####", "#....", "#....", "#....", "#....", "#....", ".####"],
        'd' => ["####.", "#...#", "#...#", "#...#", "#...#", "#...#", "####."],
        'e' => ["#####", "#....", "####.", "#....", "#....", "#....", "#####"],
        'f' => ["#####", "#....", "####.", "#....", "#....", "#....", "#...."],
        'g' => [".####", "#....", "#....", "#.###", "#...#", "#...#", ".###."],
        'h' => ["#...#", "#...#", "#####", "#...#", "#...#", "#...#", "#...#"],
        'i' => ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "#####"],
        'j' => ["....#", "....#", "....#", "....#", "#...#", "#...#", ".###."],
        'k' => ["#...#", "#..#.", "###..", "#..#.", "#...#", "#...#", "#...#"],
        'l' => ["#....", "#....", "#....", "#....", "#....", "#....", "#####"],
        'm' => ["#...#", "##.##", "#.#.#", "#...#", "#...#", "#...#", "#...#"],
        'n' => ["#...#", "##..#", "#.#.#", "#..##", "#...#", "#...#", "#...#"],
        'o' => [".###.", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
        'p' => ["####.", "#...#", "#...#", "####.", "#....", "#....", "#...."],
        'q' => [".###.", "#...#", "#...#", "#...#", "#.#.#", "#..#.", ".##.#"],
        'r' => ["####.", "#...#", "#...#", "####.", "#.#..", "#..#.", "#...#"],
        's' => [".####", "#....", "#....", ".###.", "....#", "....#", "####."],
        't' => ["#####", "..#..", "..#..", "..#..", "..#..", "..#..", "..#.."],
        'u' => ["#...#", "#...#", "#...#", "#...#", "#...#", "#...#", ".###."],
        'v' => ["#...#", "#...#", "#...#", "#...#", "#...#", ".#.#.", "..#.."],
        'w' => ["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "##.##", "#...#"],
        'x' => ["#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#", "#...#"],
        'y' => ["#...#", ".#.#.", "..#..", "..#..", "..#..", "..#..", "..#.."],
        'z' => ["#####", "....#", "...#.", "..#..", ".#...", "#....", "#####"],
        _ => return None,
    };
    Some(g)
}

fn text_patch_size(word: &str) -> (u32, u32) {
    (6 * word.len() as u32 + 3, 11)
}

fn draw_text_patch(img: &mut Raster, anchor: (u32, u32), word: &str) -> PixelBox {
    let (w, h) = text_patch_size(word);
    let patch = PixelBox::new(anchor.0, anchor.1, anchor.0 + w - 1, anchor.1 + h - 1);
    fill_box(img, &patch, WHITE);
    outline_box(img, &patch, 1, [40, 40, 40]);
    for (i, c) in word.chars().enumerate() {
        let rows = font_glyph(c).expect("caller validated glyph availability");
        let gx = anchor.0 + 2 + 6 * i as u32;
        for (dy, row) in rows.iter().enumerate() {
            for (dx, b) in row.bytes().enumerate() {
                if b == b'#' {
                    img.put(gx + dx as u32, anchor.1 + 2 + dy as u32, [10, 10, 10]);
                }
            }
        }
    }
    patch
}

// --- product rendering -----------------------------------------------------

pub(super) struct RenderedImage {
    pub image: Raster,
    pub gt_boxes: BTreeMap<String, PixelBox>,
}

pub(super) fn render_image(spec: &ProductSpec) -> RenderedImage {
    let sil = silhouette(spec.sortal);
    let mut img = Raster::white(IMAGE_SIZE, IMAGE_SIZE);
    for y in 0..IMAGE_SIZE {
        for x in 0..IMAGE_SIZE {
            if sil.mask[(y * IMAGE_SIZE + x) as usize] {
                img.put(x, y, body_pixel(spec.color, spec.pattern, x, y));
            }
        }
    }
    if spec.sortal == Sortal::Pochette {
        // Flap shading on the upper body.
        for y in 30..=40u32 {
            let half = 14u32.saturating_sub(((y - 30) * 14) / 10);
            if half == 0 {
                continue;
            }
            for x in (32 - half)..=(32 + half) {
                let cur = img.get(x, y);
                if cur != WHITE {
                    img.put(x, y, darken(cur, 4, 5));
                }
            }
        }
    }

    let mut gt_boxes = BTreeMap::new();
    gt_boxes.insert(spec.sortal.word().to_string(), sil.hull);

    let body = spec.color.rgb();
    for &f in &spec.features {
        let boxes = native_feature_boxes(spec.sortal, f);
        draw_feature(&mut img, f, &boxes, feature_color(f, body));
        let hull = boxes.iter().skip(1).fold(boxes[0], |acc, b| acc.hull(b));
        gt_boxes.insert(f.word().to_string(), hull);
    }
    if let Some(brand) = spec.brand {
        let anchor = logo_anchor(spec.sortal, brand.is_text_logo());
        let patch = draw_logo(&mut img, brand, anchor);
        gt_boxes.insert(brand.word().to_string(), patch);
    }
    RenderedImage { image: img, gt_boxes }
}

/// Renders one product from its spec. The id and split are placeholders that
/// the catalog builder overwrites.
pub fn render_product(spec: &ProductSpec) -> Result<Product, SynthError> {
    for f in &spec.features {
        if !spec.sortal.legal_features().contains(f) {
            return Err(SynthError::IllegalFeature { sortal: spec.sortal, feature: *f });
        }
    }
    let rendered = render_image(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (caption, highlights) = generate_caption(spec, &mut rng);
    Ok(Product {
        id: format!("sku-{:016x}", spec.seed),
        image: rendered.image,
        caption,
        highlights,
        tree: spec.sortal.tree(spec.pattern),
        brand: spec.brand.map(|b| b.word().to_string()).unwrap_or_default(),
        styles: spec.styles.iter().map(|s| s.word().to_string()).collect(),
        split: Split::Test,
        gt_boxes: rendered.gt_boxes,
        spec: spec.clone(),
    })
}

/// Prints a word in the bitmap font onto the item region and records the new
/// concept box. The empty word is the identity.
pub fn apply_typographic_attack(product: &Product, word: &str) -> Result<Product, SynthError> {
    if word.is_empty() {
        return Ok(product.clone());
    }
    for c in word.chars() {
        if font_glyph(c).is_none() {
            return Err(SynthError::NoGlyph(c));
        }
    }
    let hull = *product.sortal_box();
    let (w, h) = text_patch_size(word);
    if w > hull.width().saturating_sub(2) || h > hull.height().saturating_sub(2) {
        let max_len = (hull.width().saturating_sub(5)) / 6;
        return Err(SynthError::WordTooWide { word: word.to_string(), max_len });
    }
    let anchor = (hull.x0 + (hull.width() - w) / 2, hull.y0 + (hull.height() - h) / 2);
    let mut out = product.clone();
    let patch = draw_text_patch(&mut out.image, anchor, word);
    out.gt_boxes.insert(format!("text:{word}"), patch);
    Ok(out)
}

/// Shifted-domain render styles standing in for external test datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RenderVariant {
    /// Catalog rendering.
    Standard,
    /// Grayscale, quantized, 16x16 detail: a low-resolution domain shift.
    GrayLowRes,
    /// Checkered light-gray background outside the item hull.
    TexturedBg,
    /// Offset item with a dark outline and muted colors.
    AltStyle,
}

/// Renders the spec under a domain-shift variant. Variants are evaluation
/// inputs only and carry no ground-truth boxes.
pub fn render_variant(spec: &ProductSpec, variant: RenderVariant) -> Raster {
    let rendered = render_image(spec);
    let base = rendered.image;
    match variant {
        RenderVariant::Standard => base,
        RenderVariant::GrayLowRes => {
            let mut out = Raster::white(IMAGE_SIZE, IMAGE_SIZE);
            let block = IMAGE_SIZE / 16;
            for by in 0..16 {
                for bx in 0..16 {
                    let mut acc = 0u32;
                    for dy in 0..block {
                        for dx in 0..block {
                            let [r, g, b] = base.get(bx * block + dx, by * block + dy);
                            acc += (u32::from(r) * 30 + u32::from(g) * 59 + u32::from(b) * 11) / 100;
                        }
                    }
                    let mean = acc / (block * block);
                    let q = ((mean / 64).min(3) * 85) as u8;
                    for dy in 0..block {
                        for dx in 0..block {
                            out.put(bx * block + dx, by * block + dy, [q, q, q]);
                        }
                    }
                }
            }
            out
        }
        RenderVariant::TexturedBg => {
            let hull = rendered.gt_boxes[spec.sortal.word()];
            let mut out = base;
            for y in 0..IMAGE_SIZE {
                for x in 0..IMAGE_SIZE {
                    if !hull.contains_point(x, y) {
                        let shade = if ((x / 4) + (y / 4)) % 2 == 0 { 235 } else { 214 };
                        out.put(x, y, [shade, shade, shade]);
                    }
                }
            }
            out
        }
        RenderVariant::AltStyle => {
            let (dx, dy) = (3u32, 2u32);
            let mut out = Raster::white(IMAGE_SIZE, IMAGE_SIZE);
            for y in 0..IMAGE_SIZE {
                for x in 0..IMAGE_SIZE {
                    let px = base.get(x, y);
                    if px != WHITE {
                        let muted = [
                            ((u16::from(px[0]) * 3 + 255) / 4) as u8,
                            ((u16::from(px[1]) * 3 + 255) / 4) as u8,
                            ((u16::from(px[2]) * 3 + 255) / 4) as u8,
                        ];
                        out.put(x + dx, y + dy, muted);
                    }
                }
            }
            // Dark outline around the shifted item.
            let snapshot = out.clone();
            for y in 0..IMAGE_SIZE {
                for x in 0..IMAGE_SIZE {
                    if snapshot.get(x, y) == WHITE {
                        let mut touches = false;
                        for (nx, ny) in [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)] {
                            if nx < IMAGE_SIZE && ny < IMAGE_SIZE && snapshot.get(nx, ny) != WHITE {
                                touches = true;
                                break;
                            }
                        }
                        if touches {
                            out.put(x, y, [30, 30, 30]);
                        }
                    }
                }
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthcat::{ColorName, Feature, ProductSpec, Sortal};

    fn spec(sortal: Sortal, color: ColorName, features: Vec<Feature>, brand: Option<Brand>) -> ProductSpec {
        ProductSpec::new(sortal, color, None, features, brand, 7).unwrap()
    }

    #[test]
    fn plain_red_dress_is_red_dominant_with_single_box() {
        let p = render_product(&spec(Sortal::Dress, ColorName::Red, vec![], None)).unwrap();
        assert_eq!(p.gt_boxes.len(), 1);
        assert!(p.gt_boxes.contains_key("dress"));
        for y in 0..IMAGE_SIZE {
            for x in 0..IMAGE_SIZE {
                let [r, g, b] = p.image.get(x, y);
                if [r, g, b] != WHITE {
                    assert!(r > g && r > b, "non-red pixel {:?} at ({x},{y})", [r, g, b]);
                }
            }
        }
    }

    #[test]
    fn rendering_is_bit_identical() {
        let s = spec(Sortal::Bag, ColorName::Teal, vec![Feature::Handles], Some(Brand::Gucci));
        let a = render_product(&s).unwrap();
        let b = render_product(&s).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.caption, b.caption);
    }

    #[test]
    fn brand_box_strictly_inside_sortal_box() {
        let s = spec(Sortal::Shoe, ColorName::Blue, vec![Feature::HighHeels], Some(Brand::Nike));
        let p = render_product(&s).unwrap();
        let sortal = p.gt_boxes["shoe"];
        let brand = p.gt_boxes["nike"];
        assert!(sortal.strictly_contains(&brand), "{sortal:?} vs {brand:?}");
    }

    #[test]
    fn every_catalog_combination_stays_inside_the_hull() {
        // White background outside the sortal box for all legal renders.
        for &sortal in Sortal::ALL {
            for &brand in Brand::ALL {
                let features = sortal.legal_features().to_vec();
                let brand = brand.affinity().contains(&sortal).then_some(brand);
                let s = spec(sortal, ColorName::Orange, features, brand);
                let p = render_product(&s).unwrap();
                let hull = p.gt_boxes[sortal.word()];
                for y in 0..IMAGE_SIZE {
                    for x in 0..IMAGE_SIZE {
                        if !hull.contains_point(x, y) {
                            assert_eq!(
                                p.image.get(x, y),
                                WHITE,
                                "{sortal} {brand:?}: stray pixel at ({x},{y})"
                            );
                        }
                    }
                }
                for (concept, b) in &p.gt_boxes {
                    assert!(b.in_bounds(IMAGE_SIZE, IMAGE_SIZE), "{concept} out of bounds");
                }
            }
        }
    }

    #[test]
    fn attack_changes_pixels_only_inside_text_box() {
        let p = render_product(&spec(Sortal::Bag, ColorName::Green, vec![], None)).unwrap();
        let attacked = apply_typographic_attack(&p, "zara").unwrap();
        let tb = attacked.gt_boxes["text:zara"];
        for y in 0..IMAGE_SIZE {
            for x in 0..IMAGE_SIZE {
                if !tb.contains_point(x, y) {
                    assert_eq!(p.image.get(x, y), attacked.image.get(x, y));
                }
            }
        }
        assert_ne!(p.image, attacked.image);
    }

    #[test]
    fn empty_attack_is_identity() {
        let p = render_product(&spec(Sortal::Hat, ColorName::Pink, vec![], None)).unwrap();
        let same = apply_typographic_attack(&p, "").unwrap();
        assert_eq!(p.image, same.image);
        assert_eq!(p.gt_boxes, same.gt_boxes);
    }

    #[test]
    fn oversized_attack_word_names_max_length() {
        let p = render_product(&spec(Sortal::Pochette, ColorName::Red, vec![], None)).unwrap();
        match apply_typographic_attack(&p, "extravaganza") {
            Err(SynthError::WordTooWide { max_len, .. }) => assert!(max_len >= 1),
            other => panic!("expected WordTooWide, got {other:?}"),
        }
    }

    #[test]
    fn variants_differ_from_standard() {
        let s = spec(Sortal::Tshirt, ColorName::Purple, vec![Feature::Pocket], None);
        let std = render_variant(&s, RenderVariant::Standard);
        for v in [RenderVariant::GrayLowRes, RenderVariant::TexturedBg, RenderVariant::AltStyle] {
            assert_ne!(render_variant(&s, v), std, "{v:?} should shift the domain");
        }
    }
}
