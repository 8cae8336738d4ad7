//! Network layout, parameter manifest and the forward pass.
//!
//! ```text
//! enc1 ─────────────────────────────────────────────── dec1 ── spu x1 ─┐
//!  └ merge1 ─ enc2 ─────────────────────────── dec2 ─ up1 ┘   spu x2 ─┤
//!              └ merge2 ─ enc3 ─────── dec3 ─ up2 ┘           spu x4 ─┼─ concat ─ out
//!                          └ merge3 ─ enc4 ─ up3 ┘            spu x8 ─┘
//! ```
//!
//! Encoder and decoder stages are two (3³ conv, batch norm, ReLU) blocks.
//! `merge*` are patch-merge downsamplers and `up*` x2 patch expanders whose
//! output is concatenated with the matching encoder skip. Each of dec1, dec2,
//! dec3 and enc4 is compressed to a common channel count by a 1³ conv, patch
//! expanded back to input resolution, and the four maps are concatenated into
//! the output 3³ conv.

use super::ops::{
    batchnorm3d, conv3d, patch_expand3d, patch_merge3d, relu_inplace, BatchNormParams,
    ConvWeights,
};
use super::tensor::{concat_channels, Tensor5};
use super::weights::WeightStore;
use crate::heatmap::HeatmapStack;
use crate::landmarks::Landmark;
use crate::volume::{Dims, Volume};
use crate::{Error, Result};

/// Pyramid factor per fused scale, finest first.
pub const SPU_SCALES: [usize; 4] = [1, 2, 4, 8];

#[derive(Clone, Debug, PartialEq)]
pub struct ArchConfig {
    pub in_channels: usize,
    /// Encoder stage widths, finest first.
    pub widths: [usize; 4],
    /// Channels each scale is compressed to before fusion.
    pub spu_channels: usize,
    pub out_channels: usize,
    /// Expected input `(Z, Y, X)`; each must be divisible by 8.
    pub input_dims: Dims,
    pub bn_eps: f32,
}

impl ArchConfig {
    /// 16/32/64/128 channels on a 72×128×128 input.
    pub fn full() -> Self {
        ArchConfig {
            in_channels: 1,
            widths: [16, 32, 64, 128],
            spu_channels: 8,
            out_channels: Landmark::ALL.len(),
            input_dims: [72, 128, 128],
            bn_eps: 1e-5,
        }
    }

    /// Reduced variant for fast tests: 4/8/16/32 channels on 24×32×32.
    pub fn smoke() -> Self {
        ArchConfig {
            widths: [4, 8, 16, 32],
            input_dims: [24, 32, 32],
            ..ArchConfig::full()
        }
    }

    pub fn named(name: &str) -> Result<Self> {
        match name {
            "full" => Ok(ArchConfig::full()),
            "smoke" => Ok(ArchConfig::smoke()),
            other => Err(Error::InvalidParameter(format!(
                "architecture `{other}` (expected full or smoke)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(d) = self.input_dims.iter().find(|&&d| d == 0 || d % 8 != 0) {
            return Err(Error::InvalidParameter(format!(
                "input dimension {d} is not a positive multiple of 8"
            )));
        }
        if self.widths.contains(&0)
            || self.in_channels == 0
            || self.spu_channels == 0
            || self.out_channels == 0
        {
            return Err(Error::InvalidParameter("channel counts must be positive".into()));
        }
        Ok(())
    }

    /// Every parameter block in storage order.
    pub fn manifest(&self) -> Vec<ParamSpec> {
        let mut m = Manifest::default();
        let w = self.widths;
        let mut prev = self.in_channels;
        for (i, &c) in w.iter().enumerate() {
            if i > 0 {
                m.conv(&format!("merge{i}.conv"), prev, 8 * prev, 1);
                m.bn(&format!("merge{i}.bn"), prev);
            }
            m.double(&format!("enc{}", i + 1), prev, c);
            prev = c;
        }
        for i in (1..=3).rev() {
            let (deep, skip) = (w[i], w[i - 1]);
            m.conv(&format!("up{i}.conv"), 8 * deep, deep, 1);
            m.double(&format!("dec{i}"), deep + skip, skip);
        }
        let sources = [w[0], w[1], w[2], w[3]];
        for (&s, &c) in SPU_SCALES.iter().zip(&sources) {
            let k = self.spu_channels;
            m.conv(&format!("spu.x{s}.compress"), k, c, 1);
            m.conv(&format!("spu.x{s}.expand"), k * s * s * s, k, 1);
        }
        m.conv("out", self.out_channels, self.spu_channels * SPU_SCALES.len(), 3);
        m.0
    }

    /// Recovers the channel plan from a weight store.
    pub fn from_weights(store: &WeightStore, input_dims: Dims) -> Result<Self> {
        let shape = |name: &str| store.get(name).map(|p| p.shape.clone());
        let mut widths = [0; 4];
        for (i, w) in widths.iter_mut().enumerate() {
            *w = *shape(&format!("enc{}.conv1.weight", i + 1))?
                .first()
                .ok_or_else(|| Error::Weights {
                    layer: format!("enc{}.conv1.weight", i + 1),
                    reason: "rank 0".into(),
                })?;
        }
        let enc1 = shape("enc1.conv1.weight")?;
        let out = shape("out.weight")?;
        let spu = shape("spu.x1.compress.weight")?;
        let arch = ArchConfig {
            in_channels: enc1.get(1).copied().unwrap_or(0),
            widths,
            spu_channels: spu.first().copied().unwrap_or(0),
            out_channels: out.first().copied().unwrap_or(0),
            input_dims,
            bn_eps: 1e-5,
        };
        arch.validate()?;
        store.validate(&arch)?;
        Ok(arch)
    }

    /// Output shape for a batch-1 input of `dims`, derived by walking the
    /// layer list.
    pub fn output_shape(&self, dims: Dims) -> [usize; 5] {
        [1, self.out_channels, dims[0], dims[1], dims[2]]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamRole {
    Kernel,
    Bias,
    BnScale,
    BnShift,
    BnMean,
    BnVar,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub role: ParamRole,
}

#[derive(Default)]
struct Manifest(Vec<ParamSpec>);

impl Manifest {
    fn push(&mut self, name: String, shape: Vec<usize>, role: ParamRole) {
        self.0.push(ParamSpec { name, shape, role });
    }

    fn conv(&mut self, name: &str, co: usize, ci: usize, k: usize) {
        self.push(format!("{name}.weight"), vec![co, ci, k, k, k], ParamRole::Kernel);
        self.push(format!("{name}.bias"), vec![co], ParamRole::Bias);
    }

    fn bn(&mut self, name: &str, c: usize) {
        self.push(format!("{name}.scale"), vec![c], ParamRole::BnScale);
        self.push(format!("{name}.shift"), vec![c], ParamRole::BnShift);
        self.push(format!("{name}.mean"), vec![c], ParamRole::BnMean);
        self.push(format!("{name}.var"), vec![c], ParamRole::BnVar);
    }

    fn double(&mut self, name: &str, ci: usize, co: usize) {
        self.conv(&format!("{name}.conv1"), co, ci, 3);
        self.bn(&format!("{name}.bn1"), co);
        self.conv(&format!("{name}.conv2"), co, co, 3);
        self.bn(&format!("{name}.bn2"), co);
    }
}

/// Human-readable manifest, one block per line.
pub fn format_manifest(arch: &ArchConfig) -> String {
    let mut out = String::new();
    let mut total = 0usize;
    for spec in arch.manifest() {
        let n: usize = spec.shape.iter().product();
        total += n;
        out += &format!("{:<28} {:?}\n", spec.name, spec.shape);
    }
    out += &format!("# {} blocks, {} parameters\n", arch.manifest().len(), total);
    out
}

struct Net<'a> {
    store: &'a WeightStore,
    eps: f32,
}

impl Net<'_> {
    fn conv_weights(&self, layer: &str) -> Result<ConvWeights<'_>> {
        let w = self.store.get(&format!("{layer}.weight"))?;
        let b = self.store.get(&format!("{layer}.bias"))?;
        let shape: [usize; 5] = w.shape.as_slice().try_into().map_err(|_| Error::Weights {
            layer: layer.to_string(),
            reason: format!("kernel rank {} (expected 5)", w.shape.len()),
        })?;
        ConvWeights::new(&w.values, &b.values, shape).map_err(|e| Error::Weights {
            layer: layer.to_string(),
            reason: e.to_string(),
        })
    }

    fn bn_params(&self, layer: &str) -> Result<BatchNormParams<'_>> {
        let get = |p: &str| self.store.get(&format!("{layer}.{p}")).map(|p| p.values.as_slice());
        Ok(BatchNormParams {
            scale: get("scale")?,
            shift: get("shift")?,
            mean: get("mean")?,
            var: get("var")?,
            eps: self.eps,
        })
    }

    fn conv(&self, t: &Tensor5, layer: &str) -> Result<Tensor5> {
        checked(layer, conv3d(t, &self.conv_weights(layer)?)?)
    }

    fn conv_bn_relu(&self, t: &Tensor5, conv: &str, bn: &str) -> Result<Tensor5> {
        let mut y = batchnorm3d(&self.conv(t, conv)?, &self.bn_params(bn)?)?;
        relu_inplace(&mut y);
        checked(bn, y)
    }

    fn double(&self, t: &Tensor5, stage: &str) -> Result<Tensor5> {
        let y = self.conv_bn_relu(t, &format!("{stage}.conv1"), &format!("{stage}.bn1"))?;
        self.conv_bn_relu(&y, &format!("{stage}.conv2"), &format!("{stage}.bn2"))
    }

    fn merge(&self, t: &Tensor5, layer: &str) -> Result<Tensor5> {
        let y = patch_merge3d(
            t,
            &self.conv_weights(&format!("{layer}.conv"))?,
            &self.bn_params(&format!("{layer}.bn"))?,
        )?;
        checked(layer, y)
    }

    fn expand(&self, t: &Tensor5, s: usize, layer: &str) -> Result<Tensor5> {
        checked(layer, patch_expand3d(t, s, &self.conv_weights(layer)?)?)
    }
}

fn checked(layer: &str, t: Tensor5) -> Result<Tensor5> {
    if t.is_finite() {
        Ok(t)
    } else {
        Err(Error::NonFinite {
            layer: layer.to_string(),
        })
    }
}

/// Runs the network on a `(B, C_in, Z, Y, X)` tensor.
pub fn forward_tensor(input: &Tensor5, store: &WeightStore, arch: &ArchConfig) -> Result<Tensor5> {
    store.validate(arch)?;
    if input.channels() != arch.in_channels {
        return Err(Error::ShapeMismatch(format!(
            "input has {} channels, network expects {}",
            input.channels(),
            arch.in_channels
        )));
    }
    if let Some(d) = input.spatial().iter().find(|&&d| d == 0 || d % 8 != 0) {
        return Err(Error::ShapeMismatch(format!(
            "input dimension {d} is not a positive multiple of 8"
        )));
    }
    let net = Net {
        store,
        eps: arch.bn_eps,
    };
    let e1 = net.double(input, "enc1")?;
    let e2 = net.double(&net.merge(&e1, "merge1")?, "enc2")?;
    let e3 = net.double(&net.merge(&e2, "merge2")?, "enc3")?;
    let e4 = net.double(&net.merge(&e3, "merge3")?, "enc4")?;

    let d3 = net.double(&concat_channels(&[&net.expand(&e4, 2, "up3.conv")?, &e3])?, "dec3")?;
    let d2 = net.double(&concat_channels(&[&net.expand(&d3, 2, "up2.conv")?, &e2])?, "dec2")?;
    let d1 = net.double(&concat_channels(&[&net.expand(&d2, 2, "up1.conv")?, &e1])?, "dec1")?;

    let mut fused = Vec::with_capacity(SPU_SCALES.len());
    for (s, feat) in SPU_SCALES.into_iter().zip([&d1, &d2, &d3, &e4]) {
        let squeezed = net.conv(feat, &format!("spu.x{s}.compress"))?;
        fused.push(net.expand(&squeezed, s, &format!("spu.x{s}.expand"))?);
    }
    let fused = concat_channels(&fused.iter().collect::<Vec<_>>())?;
    net.conv(&fused, "out")
}

/// Predicts one heatmap per landmark at the input resolution.
pub fn forward(vol: &Volume, store: &WeightStore, arch: &ArchConfig) -> Result<HeatmapStack> {
    arch.validate()?;
    if vol.dims() != arch.input_dims {
        return Err(Error::ShapeMismatch(format!(
            "volume dims {:?} differ from the configured input {:?}",
            vol.dims(),
            arch.input_dims
        )));
    }
    if arch.in_channels != 1 || arch.out_channels > Landmark::ALL.len() {
        return Err(Error::InvalidParameter(
            "volume inference needs one input channel and at most 7 outputs".into(),
        ));
    }
    let [z, y, x] = vol.dims();
    let input = Tensor5::new([1, 1, z, y, x], vol.voxels().to_vec())?;
    let out = forward_tensor(&input, store, arch)?;
    let names = Landmark::ALL[..arch.out_channels].to_vec();
    HeatmapStack::new(vol.grid().clone(), names, out.into_data())
}
