//! The two encoders: a three-layer strided convnet for images and a mean-pool
//! bag-of-tokens encoder for text, both projecting into a shared unit-norm
//! space. Forward passes cache activations so training can run exact
//! backpropagation; all arithmetic is f64 while parameters stay on the f32
//! grid so checkpoints round-trip bit-exactly.

use super::vocab::PAD;
use super::EncoderError;
use crate::synthcat::Raster;
use ndarray::{Array1, Array2, Array3, Array4, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const KERNEL: usize = 3;
pub const STRIDE: usize = 2;
pub const PADDING: usize = 1;

/// Architecture hyperparameters; stored inside every checkpoint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchConfig {
    pub image_size: usize,
    pub conv_channels: [usize; 3],
    pub embed_dim: usize,
    pub tok_dim: usize,
    pub max_len: usize,
    pub vocab_size: usize,
}

impl ArchConfig {
    pub fn with_vocab(vocab_size: usize) -> ArchConfig {
        ArchConfig {
            image_size: 64,
            conv_channels: [16, 32, 32],
            embed_dim: 64,
            tok_dim: 64,
            max_len: 12,
            vocab_size,
        }
    }

    fn conv_out(size: usize) -> usize {
        (size + 2 * PADDING - KERNEL) / STRIDE + 1
    }

    /// Spatial side length after all conv layers.
    pub fn final_side(&self) -> usize {
        let mut s = self.image_size;
        for _ in 0..self.conv_channels.len() {
            s = Self::conv_out(s);
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct ConvLayer {
    /// (out_channels, in_channels, 3, 3)
    pub weight: Array4<f64>,
    pub bias: Array1<f64>,
}

/// Unit-norm vector in the shared contrastive space.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding(pub Array1<f64>);

impl Embedding {
    pub fn dot(&self, other: &Embedding) -> f64 {
        self.0.dot(&other.0)
    }

    pub fn norm(&self) -> f64 {
        self.0.dot(&self.0).sqrt()
    }
}

/// All trainable tensors plus the architecture they instantiate.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub arch: ArchConfig,
    pub conv: Vec<ConvLayer>,
    pub img_proj_w: Array2<f64>,
    pub img_proj_b: Array1<f64>,
    pub tok_embed: Array2<f64>,
    pub txt_proj_w: Array2<f64>,
    pub txt_proj_b: Array1<f64>,
    /// Stored as a length-1 tensor so optimizer and checkpoint visitors stay
    /// uniform; semantically a scalar.
    pub log_temperature: Array1<f64>,
}

/// Mutable view of one named tensor, used by the optimizer and serializer.
pub struct TensorEntry<'a> {
    pub name: &'static str,
    pub dims: Vec<usize>,
    pub data: &'a mut [f64],
    /// Weight decay applies to weights only, never biases or the temperature.
    pub decays: bool,
}

fn round_to_f32(xs: &mut [f64]) {
    for x in xs {
        *x = *x as f32 as f64;
    }
}

impl ModelParams {
    /// Seeded initialization: every tensor uniform in [-1/sqrt(fan_in),
    /// +1/sqrt(fan_in)]; the temperature starts at ln(1/0.07).
    pub fn init(arch: ArchConfig, seed: u64) -> ModelParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut uniform = |shape: &[usize], fan_in: usize| -> Vec<f64> {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let n: usize = shape.iter().product();
            (0..n).map(|_| rng.random_range(-bound..bound)).collect()
        };

        let mut conv = Vec::new();
        let mut in_c = 3usize;
        for &out_c in &arch.conv_channels {
            let fan_in = in_c * KERNEL * KERNEL;
            let weight = Array4::from_shape_vec(
                (out_c, in_c, KERNEL, KERNEL),
                uniform(&[out_c, in_c, KERNEL, KERNEL], fan_in),
            )
            .expect("conv shape");
            let bias = Array1::from_vec(uniform(&[out_c], fan_in));
            conv.push(ConvLayer { weight, bias });
            in_c = out_c;
        }
        let last_c = arch.conv_channels[2];
        let img_proj_w = Array2::from_shape_vec(
            (arch.embed_dim, last_c),
            uniform(&[arch.embed_dim, last_c], last_c),
        )
        .expect("proj shape");
        let img_proj_b = Array1::from_vec(uniform(&[arch.embed_dim], last_c));
        let tok_embed = Array2::from_shape_vec(
            (arch.vocab_size, arch.tok_dim),
            uniform(&[arch.vocab_size, arch.tok_dim], arch.vocab_size),
        )
        .expect("embed shape");
        let txt_proj_w = Array2::from_shape_vec(
            (arch.embed_dim, arch.tok_dim),
            uniform(&[arch.embed_dim, arch.tok_dim], arch.tok_dim),
        )
        .expect("proj shape");
        let txt_proj_b = Array1::from_vec(uniform(&[arch.embed_dim], arch.tok_dim));
        let log_temperature = Array1::from_vec(vec![(1.0f64 / 0.07).ln()]);

        let mut params = ModelParams {
            arch,
            conv,
            img_proj_w,
            img_proj_b,
            tok_embed,
            txt_proj_w,
            txt_proj_b,
            log_temperature,
        };
        params.quantize_to_f32();
        params
    }

    /// Same shapes, all zeros: gradient and optimizer-state buffers.
    pub fn zeros_like(&self) -> ModelParams {
        let mut z = self.clone();
        z.visit_tensors(|entry| entry.data.fill(0.0));
        z
    }

    /// Snap every parameter onto the f32 grid. Invoked after init and after
    /// every optimizer step: checkpoints store f32, so keeping parameters
    /// exactly representable makes save/load bit-exact.
    pub fn quantize_to_f32(&mut self) {
        self.visit_tensors(|entry| round_to_f32(entry.data));
    }

    pub fn log_temp(&self) -> f64 {
        self.log_temperature[0]
    }

    /// Visits every tensor in a fixed order.
    pub fn visit_tensors(&mut self, mut f: impl FnMut(TensorEntry<'_>)) {
        let names = ["conv1", "conv2", "conv3"];
        for (layer, name) in self.conv.iter_mut().zip(names) {
            let dims = layer.weight.shape().to_vec();
            f(TensorEntry {
                name: match name {
                    "conv1" => "conv1.weight",
                    "conv2" => "conv2.weight",
                    _ => "conv3.weight",
                },
                dims,
                data: layer.weight.as_slice_mut().expect("contiguous"),
                decays: true,
            });
            let dims = layer.bias.shape().to_vec();
            f(TensorEntry {
                name: match name {
                    "conv1" => "conv1.bias",
                    "conv2" => "conv2.bias",
                    _ => "conv3.bias",
                },
                dims,
                data: layer.bias.as_slice_mut().expect("contiguous"),
                decays: false,
            });
        }
        for (name, arr, decays) in [
            ("img_proj.weight", &mut self.img_proj_w as &mut Array2<f64>, true),
            ("txt_proj.weight", &mut self.txt_proj_w, true),
            ("tok_embed.weight", &mut self.tok_embed, true),
        ] {
            let dims = arr.shape().to_vec();
            f(TensorEntry { name, dims, data: arr.as_slice_mut().expect("contiguous"), decays });
        }
        for (name, arr) in
            [("img_proj.bias", &mut self.img_proj_b), ("txt_proj.bias", &mut self.txt_proj_b)]
        {
            let dims = arr.shape().to_vec();
            f(TensorEntry { name, dims, data: arr.as_slice_mut().expect("contiguous"), decays: false });
        }
        f(TensorEntry {
            name: "log_temperature",
            dims: vec![],
            data: self.log_temperature.as_slice_mut().expect("contiguous"),
            decays: false,
        });
    }

    pub fn all_finite(&mut self) -> bool {
        let mut ok = true;
        self.visit_tensors(|entry| {
            if entry.data.iter().any(|x| !x.is_finite()) {
                ok = false;
            }
        });
        ok
    }
}

// --- image path -------------------------------------------------------------

/// Activations cached by the image forward pass for backpropagation.
pub struct ImageCache {
    pub input: Array3<f64>,
    /// Post-ReLU output of each conv layer.
    pub post: Vec<Array3<f64>>,
    pub pooled: Array1<f64>,
    pub prenorm: Array1<f64>,
    pub norm: f64,
}

/// Scale to [0,1] planes (channel, y, x).
pub fn raster_to_input(img: &Raster) -> Array3<f64> {
    let (w, h) = (img.width as usize, img.height as usize);
    let mut out = Array3::zeros((3, h, w));
    for y in 0..h {
        for x in 0..w {
            let px = img.get(x as u32, y as u32);
            for c in 0..3 {
                out[[c, y, x]] = f64::from(px[c]) / 255.0;
            }
        }
    }
    out
}

fn im2col(input: &Array3<f64>) -> (Array2<f64>, usize, usize) {
    let (c_in, h, w) = input.dim();
    let oh = (h + 2 * PADDING - KERNEL) / STRIDE + 1;
    let ow = (w + 2 * PADDING - KERNEL) / STRIDE + 1;
    let mut cols = Array2::zeros((c_in * KERNEL * KERNEL, oh * ow));
    for c in 0..c_in {
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = (c * KERNEL + ky) * KERNEL + kx;
                for oy in 0..oh {
                    let iy = oy * STRIDE + ky;
                    if iy < PADDING || iy >= h + PADDING {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = ox * STRIDE + kx;
                        if ix < PADDING || ix >= w + PADDING {
                            continue;
                        }
                        cols[[row, oy * ow + ox]] = input[[c, iy - PADDING, ix - PADDING]];
                    }
                }
            }
        }
    }
    (cols, oh, ow)
}

fn col2im(dcols: &Array2<f64>, c_in: usize, h: usize, w: usize) -> Array3<f64> {
    let oh = (h + 2 * PADDING - KERNEL) / STRIDE + 1;
    let ow = (w + 2 * PADDING - KERNEL) / STRIDE + 1;
    let mut dinput = Array3::zeros((c_in, h, w));
    for c in 0..c_in {
        for ky in 0..KERNEL {
            for kx in 0..KERNEL {
                let row = (c * KERNEL + ky) * KERNEL + kx;
                for oy in 0..oh {
                    let iy = oy * STRIDE + ky;
                    if iy < PADDING || iy >= h + PADDING {
                        continue;
                    }
                    for ox in 0..ow {
                        let ix = ox * STRIDE + kx;
                        if ix < PADDING || ix >= w + PADDING {
                            continue;
                        }
                        dinput[[c, iy - PADDING, ix - PADDING]] += dcols[[row, oy * ow + ox]];
                    }
                }
            }
        }
    }
    dinput
}

fn conv_forward(layer: &ConvLayer, input: &Array3<f64>) -> Array3<f64> {
    let (cols, oh, ow) = im2col(input);
    let (out_c, in_c, _, _) = layer.weight.dim();
    let w2 = layer
        .weight
        .view()
        .into_shape_with_order((out_c, in_c * KERNEL * KERNEL))
        .expect("contiguous conv weight");
    let mut out2 = w2.dot(&cols);
    for (mut row, b) in out2.axis_iter_mut(Axis(0)).zip(layer.bias.iter()) {
        row += *b;
    }
    out2.into_shape_with_order((out_c, oh, ow)).expect("conv output shape")
}

fn relu_inplace(x: &mut Array3<f64>) {
    x.mapv_inplace(|v| v.max(0.0));
}

fn normalize(v: &Array1<f64>) -> (Array1<f64>, f64) {
    let norm = v.dot(v).sqrt();
    (v / norm, norm)
}

/// dL/dv from dL/de through e = v / ||v||.
fn normalize_backward(de: &Array1<f64>, e: &Array1<f64>, norm: f64) -> Array1<f64> {
    let proj = e.dot(de);
    (de - &(e * proj)) / norm
}

impl ModelParams {
    pub fn forward_image(&self, input: &Array3<f64>) -> (Embedding, ImageCache) {
        let mut post = Vec::with_capacity(self.conv.len());
        // Shift so the white background is exactly zero; pooled features then
        // carry item-only signal instead of a shared background component.
        let mut cur = input - 1.0;
        for layer in &self.conv {
            let mut out = conv_forward(layer, &cur);
            relu_inplace(&mut out);
            post.push(out.clone());
            cur = out;
        }
        let last = post.last().expect("conv stack nonempty");
        let (c, oh, ow) = last.dim();
        let spatial = (oh * ow) as f64;
        let mut pooled = Array1::zeros(c);
        for ch in 0..c {
            pooled[ch] = last.index_axis(Axis(0), ch).sum() / spatial;
        }
        let prenorm = self.img_proj_w.dot(&pooled) + &self.img_proj_b;
        let (e, norm) = normalize(&prenorm);
        (
            Embedding(e),
            ImageCache { input: input - 1.0, post, pooled, prenorm, norm },
        )
    }

    /// Deterministic forward pass producing a unit-norm embedding.
    pub fn encode_image(&self, img: &Raster) -> Result<Embedding, EncoderError> {
        if img.width as usize != self.arch.image_size || img.height as usize != self.arch.image_size
        {
            return Err(EncoderError::ShapeError {
                expected: format!("{0}x{0} RGB", self.arch.image_size),
                got: format!("{}x{}", img.width, img.height),
            });
        }
        Ok(self.forward_image(&raster_to_input(img)).0)
    }

    /// Accumulates parameter gradients for one image given dL/d(embedding).
    pub fn backward_image(&self, cache: &ImageCache, de: &Array1<f64>, grads: &mut ModelParams) {
        let e = &cache.prenorm / cache.norm;
        let dv = normalize_backward(de, &e, cache.norm);

        // Projection layer.
        let last = cache.post.last().expect("conv stack nonempty");
        let (c, oh, ow) = last.dim();
        let spatial = (oh * ow) as f64;
        for i in 0..self.arch.embed_dim {
            for j in 0..c {
                grads.img_proj_w[[i, j]] += dv[i] * cache.pooled[j];
            }
        }
        grads.img_proj_b += &dv;
        let dpooled = self.img_proj_w.t().dot(&dv);

        // Global average pool spreads gradient uniformly.
        let mut dcur = Array3::zeros((c, oh, ow));
        for ch in 0..c {
            let g = dpooled[ch] / spatial;
            dcur.index_axis_mut(Axis(0), ch).fill(g);
        }

        // Walk the conv stack backwards.
        for li in (0..self.conv.len()).rev() {
            let post = &cache.post[li];
            // ReLU mask.
            ndarray::Zip::from(&mut dcur).and(post).for_each(|d, &p| {
                if p <= 0.0 {
                    *d = 0.0;
                }
            });
            let input = if li == 0 { &cache.input } else { &cache.post[li - 1] };
            let (cols, oh_i, ow_i) = im2col(input);
            let (out_c, in_c, _, _) = self.conv[li].weight.dim();
            let dout2 = dcur
                .view()
                .into_shape_with_order((out_c, oh_i * ow_i))
                .expect("gradient shape");
            let dw2 = dout2.dot(&cols.t());
            let gw = grads.conv[li]
                .weight
                .as_slice_mut()
                .expect("contiguous");
            for (g, d) in gw.iter_mut().zip(dw2.iter()) {
                *g += d;
            }
            for (gb, row) in grads.conv[li].bias.iter_mut().zip(dout2.axis_iter(Axis(0))) {
                *gb += row.sum();
            }
            if li > 0 {
                let w2 = self.conv[li]
                    .weight
                    .view()
                    .into_shape_with_order((out_c, in_c * KERNEL * KERNEL))
                    .expect("contiguous conv weight");
                let dcols = w2.t().dot(&dout2);
                let (ci, h, w) = input.dim();
                debug_assert_eq!(ci, in_c);
                dcur = col2im(&dcols, in_c, h, w);
            }
        }
    }
}

// --- text path ---------------------------------------------------------------

pub struct TextCache {
    pub tokens: Vec<usize>,
    pub mean: Array1<f64>,
    pub prenorm: Array1<f64>,
    pub norm: f64,
}

impl ModelParams {
    pub fn forward_text(&self, tokens: &[usize]) -> (Embedding, TextCache) {
        debug_assert_eq!(tokens.len(), self.arch.max_len, "token sequence length");
        let mut mean = Array1::zeros(self.arch.tok_dim);
        let mut count = 0usize;
        for &t in tokens {
            if t != PAD {
                mean += &self.tok_embed.row(t);
                count += 1;
            }
        }
        if count > 0 {
            mean /= count as f64;
        }
        let prenorm = self.txt_proj_w.dot(&mean) + &self.txt_proj_b;
        let (e, norm) = normalize(&prenorm);
        (Embedding(e), TextCache { tokens: tokens.to_vec(), mean, prenorm, norm })
    }

    /// Mean-pooled token embeddings, projected and normalized. The all-PAD
    /// sequence maps to the normalized bias path.
    pub fn encode_text(&self, tokens: &[usize]) -> Embedding {
        self.forward_text(tokens).0
    }

    pub fn backward_text(&self, cache: &TextCache, de: &Array1<f64>, grads: &mut ModelParams) {
        let e = &cache.prenorm / cache.norm;
        let dv = normalize_backward(de, &e, cache.norm);
        for i in 0..self.arch.embed_dim {
            for j in 0..self.arch.tok_dim {
                grads.txt_proj_w[[i, j]] += dv[i] * cache.mean[j];
            }
        }
        grads.txt_proj_b += &dv;
        let count = cache.tokens.iter().filter(|&&t| t != PAD).count();
        if count == 0 {
            return;
        }
        let dmean = self.txt_proj_w.t().dot(&dv) / count as f64;
        for &t in &cache.tokens {
            if t != PAD {
                let mut row = grads.tok_embed.row_mut(t);
                row += &dmean;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthcat::{render_product, ColorName, ProductSpec, Sortal};

    fn tiny_arch() -> ArchConfig {
        ArchConfig { vocab_size: 10, ..ArchConfig::with_vocab(10) }
    }

    #[test]
    fn image_embedding_is_unit_norm_and_deterministic() {
        let params = ModelParams::init(ArchConfig::with_vocab(30), 7);
        let spec =
            ProductSpec::new(Sortal::Dress, ColorName::Red, None, vec![], None, 1).unwrap();
        let p = render_product(&spec).unwrap();
        let a = params.encode_image(&p.image).unwrap();
        let b = params.encode_image(&p.image).unwrap();
        assert!((a.norm() - 1.0).abs() < 1e-6);
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_images_embed_apart_under_random_params() {
        let params = ModelParams::init(ArchConfig::with_vocab(30), 3);
        let white = Raster::white(64, 64);
        let spec =
            ProductSpec::new(Sortal::Dress, ColorName::Red, None, vec![], None, 1).unwrap();
        let dress = render_product(&spec).unwrap();
        let ew = params.encode_image(&white).unwrap();
        let ed = params.encode_image(&dress.image).unwrap();
        eprintln!("cos(white,dress) = {}", ew.dot(&ed));
        assert!(ew.dot(&ed) < 1.0 - 1e-3);
    }

    #[test]
    fn wrong_raster_shape_is_an_error() {
        let params = ModelParams::init(ArchConfig::with_vocab(30), 3);
        let img = Raster::white(32, 64);
        assert!(matches!(params.encode_image(&img), Err(EncoderError::ShapeError { .. })));
    }

    #[test]
    fn text_embedding_unit_norm_and_order_invariant() {
        let params = ModelParams::init(tiny_arch(), 5);
        let a = params.encode_text(&[2, 3, 4, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        let b = params.encode_text(&[4, 2, 3, 0, 0, 0, 0, 0, 0, 0, 0, 0]);
        assert!((a.norm() - 1.0).abs() < 1e-6);
        let diff = (&a.0 - &b.0).iter().map(|x| x.abs()).fold(0.0f64, f64::max);
        assert!(diff < 1e-12, "mean pooling must be order invariant");
    }

    #[test]
    fn all_pad_text_is_the_normalized_bias() {
        let params = ModelParams::init(tiny_arch(), 5);
        let e = params.encode_text(&[0; 12]);
        let (expected, _) = normalize(&params.txt_proj_b);
        let diff = (&e.0 - &expected).iter().map(|x| x.abs()).fold(0.0f64, f64::max);
        assert!(diff < 1e-12);
        assert!((e.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn init_is_seeded_and_f32_exact() {
        let mut a = ModelParams::init(tiny_arch(), 11);
        let b = ModelParams::init(tiny_arch(), 11);
        let mut c = ModelParams::init(tiny_arch(), 12);
        assert_eq!(a.tok_embed, b.tok_embed);
        assert_ne!(a.tok_embed, c.tok_embed);
        let mut all_f32 = true;
        a.visit_tensors(|e| {
            if e.data.iter().any(|&x| x != x as f32 as f64) {
                all_f32 = false;
            }
        });
        assert!(all_f32);
        assert!(c.all_finite());
    }

    #[test]
    fn conv_geometry_matches_the_formula() {
        let arch = ArchConfig::with_vocab(10);
        assert_eq!(arch.final_side(), 8);
        let params = ModelParams::init(arch, 1);
        let input = Array3::zeros((3, 64, 64));
        let (_, cache) = params.forward_image(&input);
        assert_eq!(cache.post[0].dim(), (16, 32, 32));
        assert_eq!(cache.post[1].dim(), (32, 16, 16));
        assert_eq!(cache.post[2].dim(), (32, 8, 8));
    }
}
