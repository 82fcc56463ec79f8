//! Procedural synthetic fashion catalog: deterministic renders, templated
//! captions, a three-layer taxonomy, holdout-aware splits, and the noun-phrase
//! grammar used to compose out-of-distribution products.

mod caption;
mod catalog;
mod grammar;
mod improbable;
mod render;

pub use caption::generate_caption;
pub use catalog::{build_catalog, load_catalog, save_catalog, validate_catalog, Catalog, CatalogConfig};
pub use grammar::{parse_np, Modifier, NounPhrase};
pub use improbable::{
    compose_improbable, improbable_suite, load_improbable, save_improbable, ImprobableCase,
};
pub use render::{apply_typographic_attack, render_product, render_variant, RenderVariant};

use crate::geom::PixelBox;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

pub const IMAGE_SIZE: u32 = 64;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("feature {feature} is not legal for sortal {sortal}")]
    IllegalFeature { sortal: Sortal, feature: Feature },
    #[error("no sortal found in {0:?}")]
    NoSortal(String),
    #[error("ambiguous phrase: both {0} and {1} are sortals")]
    TwoSortals(Sortal, Sortal),
    #[error("noun phrase {0:?} is already a probable catalog combination")]
    NotImprobable(String),
    #[error("word {word:?} is too wide for the item region (at most {max_len} characters)")]
    WordTooWide { word: String, max_len: u32 },
    #[error("character {0:?} has no glyph in the 5x7 font")]
    NoGlyph(char),
    #[error("catalog config invalid: {0}")]
    BadConfig(String),
    #[error("catalog invariant violated: {0}")]
    InvariantViolation(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("png error: {0}")]
    Png(#[from] image::ImageError),
}

macro_rules! word_enum {
    ($name:ident { $($variant:ident => $word:expr),+ $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            /// Lowercase surface form as it appears in captions and queries.
            pub fn word(&self) -> &'static str {
                match self {
                    $($name::$variant => $word),+
                }
            }

            pub fn from_word(w: &str) -> Option<$name> {
                match w {
                    $($word => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.word())
            }
        }
    };
}

word_enum!(Sortal {
    Dress => "dress",
    Tshirt => "tshirt",
    Shoe => "shoe",
    Bag => "bag",
    Hat => "hat",
    Pochette => "pochette",
});

word_enum!(ColorName {
    Red => "red",
    Blue => "blue",
    Green => "green",
    Yellow => "yellow",
    Orange => "orange",
    Purple => "purple",
    Pink => "pink",
    Brown => "brown",
    Black => "black",
    Teal => "teal",
});

word_enum!(Pattern {
    Stripes => "striped",
    Dots => "dotted",
    Plain => "plain",
});

word_enum!(Feature {
    LongSleeves => "long sleeves",
    Belt => "belt",
    Collar => "collar",
    Pocket => "pocket",
    HighHeels => "high heels",
    AnkleStrap => "ankle strap",
    Laces => "laces",
    Handles => "handles",
    ShoulderStrap => "shoulder strap",
    Buckle => "buckle",
    Ribbon => "ribbon",
    Feather => "feather",
    Chain => "chain",
    Clasp => "clasp",
});

word_enum!(Brand {
    Nike => "nike",
    Armani => "armani",
    Prada => "prada",
    Zara => "zara",
    Gucci => "gucci",
    Fendi => "fendi",
});

word_enum!(Style {
    Classic => "classic",
    Streetwear => "streetwear",
    Edgy => "edgy",
    Casual => "casual",
});

impl ColorName {
    pub fn rgb(&self) -> [u8; 3] {
        match self {
            ColorName::Red => [200, 30, 30],
            ColorName::Blue => [30, 60, 200],
            ColorName::Green => [30, 160, 60],
            ColorName::Yellow => [235, 200, 40],
            ColorName::Orange => [240, 140, 30],
            ColorName::Purple => [130, 40, 160],
            ColorName::Pink => [245, 130, 180],
            ColorName::Brown => [130, 80, 40],
            ColorName::Black => [25, 25, 25],
            ColorName::Teal => [40, 160, 160],
        }
    }

    /// Color family used by the deterministic style rules.
    pub fn is_dark(&self) -> bool {
        matches!(self, ColorName::Blue | ColorName::Purple | ColorName::Brown | ColorName::Black)
    }
}

impl Sortal {
    /// Features that may appear on this sortal in the catalog.
    pub fn legal_features(&self) -> &'static [Feature] {
        match self {
            Sortal::Dress => &[Feature::LongSleeves, Feature::Belt, Feature::Collar],
            Sortal::Tshirt => &[Feature::LongSleeves, Feature::Pocket, Feature::Collar],
            Sortal::Shoe => &[Feature::HighHeels, Feature::AnkleStrap, Feature::Laces],
            Sortal::Bag => &[Feature::Handles, Feature::ShoulderStrap, Feature::Buckle],
            Sortal::Hat => &[Feature::Ribbon, Feature::Feather],
            Sortal::Pochette => &[Feature::Chain, Feature::Clasp],
        }
    }

    /// Three-layer taxonomy path for this sortal (level 3 appends the pattern).
    pub fn tree(&self, pattern: Option<Pattern>) -> [String; 3] {
        let (level1, level2) = match self {
            Sortal::Dress => ("Clothing", "Dresses"),
            Sortal::Tshirt => ("Clothing", "Tops"),
            Sortal::Shoe => ("Clothing", "Shoes"),
            Sortal::Bag => ("Accessories", "Bags"),
            Sortal::Hat => ("Accessories", "Hats"),
            Sortal::Pochette => ("Accessories", "Pochettes"),
        };
        let refinement = match pattern {
            Some(Pattern::Stripes) => "Striped",
            Some(Pattern::Dots) => "Dotted",
            Some(Pattern::Plain) | None => "Plain",
        };
        [level1.to_string(), level2.to_string(), format!("{refinement} {level2}")]
    }
}

impl Brand {
    /// Sortals this brand actually produces in the catalog. A brand placed on
    /// a sortal outside this set is an improbable combination.
    pub fn affinity(&self) -> &'static [Sortal] {
        match self {
            Brand::Nike => &[Sortal::Shoe, Sortal::Tshirt],
            Brand::Armani => &[Sortal::Dress, Sortal::Tshirt],
            Brand::Prada => &[Sortal::Bag, Sortal::Pochette, Sortal::Dress],
            Brand::Zara => &[Sortal::Dress, Sortal::Tshirt, Sortal::Hat],
            Brand::Gucci => &[Sortal::Bag, Sortal::Shoe, Sortal::Pochette],
            Brand::Fendi => &[Sortal::Bag, Sortal::Pochette, Sortal::Hat],
        }
    }

    /// One brand is rendered as a printed text string instead of a mark, so
    /// the catalog carries an OCR-like logo.
    pub fn is_text_logo(&self) -> bool {
        matches!(self, Brand::Zara)
    }
}

/// Deterministic style tags from visual attributes. The rules never look at
/// the sortal, so style labels stay orthogonal to the taxonomy.
pub fn style_tags(color: ColorName, pattern: Option<Pattern>, brand: Option<Brand>) -> Vec<Style> {
    let mut tags = Vec::new();
    let plainish = matches!(pattern, None | Some(Pattern::Plain));
    if color.is_dark() && plainish {
        tags.push(Style::Classic);
    }
    if brand.is_some() {
        tags.push(Style::Streetwear);
    }
    if pattern == Some(Pattern::Stripes) || color == ColorName::Black {
        tags.push(Style::Edgy);
    }
    if !color.is_dark() || pattern == Some(Pattern::Dots) {
        tags.push(Style::Casual);
    }
    debug_assert!(!tags.is_empty(), "style rules must cover every attribute combination");
    tags
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
    HoutC,
    HoutB,
    /// Marker for composed improbable products appended to the test pool.
    TestExtension,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
            Split::HoutC => "hout_c",
            Split::HoutB => "hout_b",
            Split::TestExtension => "test_extension",
        };
        f.write_str(s)
    }
}

/// Full attribute description of one renderable catalog item.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductSpec {
    pub sortal: Sortal,
    pub color: ColorName,
    pub pattern: Option<Pattern>,
    pub features: Vec<Feature>,
    pub brand: Option<Brand>,
    pub styles: Vec<Style>,
    pub seed: u64,
}

impl ProductSpec {
    pub fn new(
        sortal: Sortal,
        color: ColorName,
        pattern: Option<Pattern>,
        features: Vec<Feature>,
        brand: Option<Brand>,
        seed: u64,
    ) -> Result<Self, SynthError> {
        for f in &features {
            if !sortal.legal_features().contains(f) {
                return Err(SynthError::IllegalFeature { sortal, feature: *f });
            }
        }
        let styles = style_tags(color, pattern, brand);
        Ok(ProductSpec { sortal, color, pattern, features, brand, styles, seed })
    }
}

/// 8-bit RGB raster with white background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster {
    pub width: u32,
    pub height: u32,
    pub data: Vec<u8>,
}

impl Raster {
    pub fn white(width: u32, height: u32) -> Self {
        Raster { width, height, data: vec![255; (width * height * 3) as usize] }
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.width + x) * 3) as usize;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn put(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        if x < self.width && y < self.height {
            let i = ((y * self.width + x) * 3) as usize;
            self.data[i..i + 3].copy_from_slice(&rgb);
        }
    }

    pub fn save_png(&self, path: &std::path::Path) -> Result<(), SynthError> {
        let img = image::RgbImage::from_raw(self.width, self.height, self.data.clone())
            .expect("raster buffer matches dimensions");
        img.save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn load_png(path: &std::path::Path) -> Result<Self, SynthError> {
        let img = image::open(path)?.into_rgb8();
        Ok(Raster { width: img.width(), height: img.height(), data: img.into_raw() })
    }
}

/// One rendered catalog item with its text and ground-truth concept boxes.
#[derive(Debug, Clone)]
pub struct Product {
    pub id: String,
    pub image: Raster,
    pub caption: String,
    pub highlights: Vec<String>,
    pub tree: [String; 3],
    pub brand: String,
    pub styles: Vec<String>,
    pub split: Split,
    pub gt_boxes: BTreeMap<String, PixelBox>,
    pub spec: ProductSpec,
}

impl Product {
    pub fn sortal_box(&self) -> &PixelBox {
        &self.gt_boxes[self.spec.sortal.word()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn illegal_feature_is_rejected_with_pair_named() {
        let err = ProductSpec::new(
            Sortal::Dress,
            ColorName::Red,
            None,
            vec![Feature::HighHeels],
            None,
            0,
        )
        .unwrap_err();
        match err {
            SynthError::IllegalFeature { sortal, feature } => {
                assert_eq!(sortal, Sortal::Dress);
                assert_eq!(feature, Feature::HighHeels);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn style_rules_cover_every_combination() {
        for &color in ColorName::ALL {
            for pattern in [None, Some(Pattern::Plain), Some(Pattern::Stripes), Some(Pattern::Dots)] {
                for brand in [None, Some(Brand::Nike)] {
                    assert!(!style_tags(color, pattern, brand).is_empty());
                }
            }
        }
    }

    #[test]
    fn style_rules_ignore_sortal() {
        // Same attributes on different sortals yield identical tags.
        let a = style_tags(ColorName::Black, Some(Pattern::Plain), None);
        assert_eq!(a, vec![Style::Classic, Style::Edgy]);
    }

    #[test]
    fn trees_have_three_levels_consistent_with_sortal() {
        let tree = Sortal::Shoe.tree(Some(Pattern::Stripes));
        assert_eq!(tree, ["Clothing".to_string(), "Shoes".to_string(), "Striped Shoes".to_string()]);
    }
}
