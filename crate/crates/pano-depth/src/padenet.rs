//! The disparity network: a VGG-style encoder, a scene-understanding block,
//! and a bilinear-upsampling decoder that emits angular disparity at four
//! scales.
//!
//! Layout for input H×W (divisible by 16) and encoder plan `[c1, c2, c3, c4]`:
//!
//! * Encoder: four stages of `[conv3×3+relu, conv3×3+relu, maxpool2]`,
//!   reaching c4 channels at H/16 × W/16. The pre-pool activation of each
//!   stage feeds the decoder as a skip connection.
//! * Scene understanding: five parallel branches over the encoder output —
//!   a global branch (average pool, fully connected, relu, spatial tile), a
//!   1×1 pixel branch, and three 3×3 dilated branches with anisotropic
//!   rates (three distinct horizontal, two distinct vertical) — concatenated
//!   and fused by a 1×1 convolution.
//! * Decoder: four stages of `[upsample ×2, concat skip, conv3×3+relu]`,
//!   each with a `conv3×3 → sigmoid × d_max` head, so every scale predicts
//!   disparity in (0, d_max) radians. The last head is full resolution.
//!
//! Backward is chained by hand through the recorded activations; there is
//! no graph. The finite-difference suite checks the whole chain.

use thiserror::Error;

use crate::autodiff::ops::{self, ConvSpec};
use crate::autodiff::{AutodiffError, Tensor};
use crate::io::{Checkpoint, CheckpointMeta};
use crate::rng::SplitMix64;

#[derive(Debug, Error)]
pub enum PadeNetError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
    #[error("model/checkpoint mismatch: {0}")]
    Mismatch(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PadeNetConfig {
    pub input_height: usize,
    pub input_width: usize,
    /// Output channels of the four encoder stages.
    pub encoder_channels: [usize; 4],
    /// (horizontal, vertical) dilation of the three ASPP branches.
    pub aspp_dilations: [(usize, usize); 3],
    /// Channels after the scene-understanding fusion conv.
    pub su_channels: usize,
    /// Disparity ceiling in radians; heads emit `sigmoid · d_max`.
    pub d_max: f32,
}

impl Default for PadeNetConfig {
    fn default() -> Self {
        PadeNetConfig {
            input_height: 64,
            input_width: 128,
            encoder_channels: [16, 32, 64, 128],
            aspp_dilations: [(2, 1), (4, 2), (8, 2)],
            su_channels: 128,
            d_max: 0.5,
        }
    }
}

impl PadeNetConfig {
    /// Smallest practical network, used by the gradient suite.
    pub fn tiny() -> Self {
        PadeNetConfig {
            input_height: 16,
            input_width: 32,
            encoder_channels: [4, 8, 8, 8],
            aspp_dilations: [(2, 1), (4, 2), (8, 2)],
            su_channels: 8,
            d_max: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), PadeNetError> {
        if self.input_height % 16 != 0 || self.input_width % 16 != 0 {
            return Err(PadeNetError::InvalidConfig(format!(
                "input {}x{} must be divisible by 16",
                self.input_height, self.input_width
            )));
        }
        if self.encoder_channels.iter().any(|&c| c == 0) || self.su_channels == 0 {
            return Err(PadeNetError::InvalidConfig("zero channel count".into()));
        }
        let mut horizontal: Vec<usize> = self.aspp_dilations.iter().map(|d| d.0).collect();
        horizontal.sort_unstable();
        horizontal.dedup();
        let mut vertical: Vec<usize> = self.aspp_dilations.iter().map(|d| d.1).collect();
        vertical.sort_unstable();
        vertical.dedup();
        if horizontal.len() != 3 || vertical.len() != 2 {
            return Err(PadeNetError::InvalidConfig(format!(
                "ASPP needs 3 distinct horizontal and 2 distinct vertical rates, got {:?}",
                self.aspp_dilations
            )));
        }
        if self.aspp_dilations.iter().any(|&(h, v)| h == 0 || v == 0) {
            return Err(PadeNetError::InvalidConfig("zero dilation".into()));
        }
        if !(self.d_max > 0.0) {
            return Err(PadeNetError::InvalidConfig("d_max must be positive".into()));
        }
        Ok(())
    }

    /// Decoder stage output channels, derived from the encoder plan.
    pub fn decoder_channels(&self) -> [usize; 4] {
        let e = self.encoder_channels;
        [e[2], e[1], e[0], e[0]]
    }

    /// Spatial size of disparity output `i` (0-based; 3 is full resolution).
    pub fn scale_size(&self, i: usize) -> (usize, usize) {
        let div = 1 << (3 - i);
        (self.input_height / div, self.input_width / div)
    }

    pub fn to_meta(&self, meta: &mut CheckpointMeta) {
        let e = self.encoder_channels;
        meta.extra
            .insert("net.input_height".into(), self.input_height.to_string());
        meta.extra
            .insert("net.input_width".into(), self.input_width.to_string());
        meta.extra.insert(
            "net.encoder_channels".into(),
            format!("{},{},{},{}", e[0], e[1], e[2], e[3]),
        );
        let d = self.aspp_dilations;
        meta.extra.insert(
            "net.aspp_dilations".into(),
            format!("{},{};{},{};{},{}", d[0].0, d[0].1, d[1].0, d[1].1, d[2].0, d[2].1),
        );
        meta.extra
            .insert("net.su_channels".into(), self.su_channels.to_string());
        meta.extra.insert("net.d_max".into(), self.d_max.to_string());
    }

    pub fn from_meta(meta: &CheckpointMeta) -> Result<Self, PadeNetError> {
        let get = |key: &str| {
            meta.extra
                .get(key)
                .ok_or_else(|| PadeNetError::Mismatch(format!("missing meta {key}")))
        };
        let parse_usize = |key: &str| -> Result<usize, PadeNetError> {
            get(key)?
                .parse()
                .map_err(|_| PadeNetError::Mismatch(format!("bad meta {key}")))
        };
        let channels: Vec<usize> = get("net.encoder_channels")?
            .split(',')
            .map(|s| s.parse())
            .collect::<Result<_, _>>()
            .map_err(|_| PadeNetError::Mismatch("bad encoder_channels".into()))?;
        if channels.len() != 4 {
            return Err(PadeNetError::Mismatch("need 4 encoder channels".into()));
        }
        let mut dilations = Vec::new();
        for pair in get("net.aspp_dilations")?.split(';') {
            let (h, v) = pair
                .split_once(',')
                .ok_or_else(|| PadeNetError::Mismatch("bad aspp_dilations".into()))?;
            let parse = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| PadeNetError::Mismatch("bad aspp_dilations".into()))
            };
            dilations.push((parse(h)?, parse(v)?));
        }
        if dilations.len() != 3 {
            return Err(PadeNetError::Mismatch("need 3 ASPP branches".into()));
        }
        let config = PadeNetConfig {
            input_height: parse_usize("net.input_height")?,
            input_width: parse_usize("net.input_width")?,
            encoder_channels: [channels[0], channels[1], channels[2], channels[3]],
            aspp_dilations: [dilations[0], dilations[1], dilations[2]],
            su_channels: parse_usize("net.su_channels")?,
            d_max: get("net.d_max")?
                .parse()
                .map_err(|_| PadeNetError::Mismatch("bad d_max".into()))?,
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Clone, Debug)]
pub struct ConvParams {
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Clone, Debug)]
pub struct PadeNetModel {
    pub config: PadeNetConfig,
    /// Four encoder stages × two convolutions.
    enc: Vec<[ConvParams; 2]>,
    su_pixel: ConvParams,
    su_fc: ConvParams,
    su_aspp: Vec<ConvParams>,
    su_fuse: ConvParams,
    dec_conv: Vec<ConvParams>,
    dec_head: Vec<ConvParams>,
}

/// Parameter tensor shapes implied by a config, in fixed manifest order
/// (weight then bias per layer, encoder → scene understanding → decoder).
fn parameter_plan(config: &PadeNetConfig) -> Vec<(String, Vec<usize>)> {
    let e = config.encoder_channels;
    let d = config.decoder_channels();
    let su = config.su_channels;
    let mut plan = Vec::new();
    let mut prev = 3;
    for (s, &c) in e.iter().enumerate() {
        plan.push((format!("enc{}.conv1.weight", s + 1), vec![c, prev, 3, 3]));
        plan.push((format!("enc{}.conv1.bias", s + 1), vec![c]));
        plan.push((format!("enc{}.conv2.weight", s + 1), vec![c, c, 3, 3]));
        plan.push((format!("enc{}.conv2.bias", s + 1), vec![c]));
        prev = c;
    }
    plan.push(("su.pixel.weight".into(), vec![e[3], e[3], 1, 1]));
    plan.push(("su.pixel.bias".into(), vec![e[3]]));
    plan.push(("su.fc.weight".into(), vec![e[3], e[3]]));
    plan.push(("su.fc.bias".into(), vec![e[3]]));
    for i in 0..3 {
        plan.push((format!("su.aspp{}.weight", i + 1), vec![e[3], e[3], 3, 3]));
        plan.push((format!("su.aspp{}.bias", i + 1), vec![e[3]]));
    }
    plan.push(("su.fuse.weight".into(), vec![su, 5 * e[3], 1, 1]));
    plan.push(("su.fuse.bias".into(), vec![su]));
    let skip = [e[3], e[2], e[1], e[0]];
    let mut dec_in = su;
    for i in 0..4 {
        plan.push((format!("dec{}.conv.weight", i + 1), vec![d[i], dec_in + skip[i], 3, 3]));
        plan.push((format!("dec{}.conv.bias", i + 1), vec![d[i]]));
        plan.push((format!("dec{}.head.weight", i + 1), vec![1, d[i], 3, 3]));
        plan.push((format!("dec{}.head.bias", i + 1), vec![1]));
        dec_in = d[i];
    }
    plan
}

impl PadeNetModel {
    /// Deterministically initialized model: fan-in-scaled uniform weights
    /// from per-tensor streams of `seed`, zero biases.
    pub fn build(config: &PadeNetConfig, seed: u64) -> Result<PadeNetModel, PadeNetError> {
        config.validate()?;
        let plan = parameter_plan(config);
        let mut tensors = Vec::with_capacity(plan.len());
        for (index, (name, shape)) in plan.iter().enumerate() {
            let tensor = if name.ends_with(".bias") {
                Tensor::zeros(shape)
            } else {
                let fan_in: usize = shape[1..].iter().product();
                let bound = (6.0 / fan_in as f64).sqrt();
                let mut rng = SplitMix64::derive(seed, 0xb01d + index as u64);
                let n: usize = shape.iter().product();
                let data: Vec<f32> = (0..n).map(|_| rng.range_f64(-bound, bound) as f32).collect();
                Tensor::from_vec(shape, data).expect("plan shapes are consistent")
            };
            tensors.push(tensor.with_grad());
        }
        Ok(Self::from_tensor_list(config.clone(), tensors))
    }

    fn from_tensor_list(config: PadeNetConfig, tensors: Vec<Tensor>) -> PadeNetModel {
        let mut iter = tensors.into_iter();
        let mut take_conv = || ConvParams {
            weight: iter.next().expect("plan covers all tensors"),
            bias: iter.next().expect("plan covers all tensors"),
        };
        let enc = (0..4).map(|_| [take_conv(), take_conv()]).collect();
        let su_pixel = take_conv();
        let su_fc = take_conv();
        let su_aspp = (0..3).map(|_| take_conv()).collect();
        let su_fuse = take_conv();
        let mut dec_conv = Vec::with_capacity(4);
        let mut dec_head = Vec::with_capacity(4);
        for _ in 0..4 {
            dec_conv.push(take_conv());
            dec_head.push(take_conv());
        }
        PadeNetModel {
            config,
            enc,
            su_pixel,
            su_fc,
            su_aspp,
            su_fuse,
            dec_conv,
            dec_head,
        }
    }

    /// All layers in manifest order. Keep in sync with [`parameter_plan`].
    fn layers(&self) -> Vec<&ConvParams> {
        let mut list: Vec<&ConvParams> = Vec::new();
        for stage in &self.enc {
            list.push(&stage[0]);
            list.push(&stage[1]);
        }
        list.push(&self.su_pixel);
        list.push(&self.su_fc);
        list.extend(self.su_aspp.iter());
        list.push(&self.su_fuse);
        for i in 0..4 {
            list.push(&self.dec_conv[i]);
            list.push(&self.dec_head[i]);
        }
        list
    }

    fn layers_mut(&mut self) -> Vec<&mut ConvParams> {
        let mut list: Vec<&mut ConvParams> = Vec::new();
        for stage in &mut self.enc {
            let [a, b] = stage;
            list.push(a);
            list.push(b);
        }
        list.push(&mut self.su_pixel);
        list.push(&mut self.su_fc);
        list.extend(self.su_aspp.iter_mut());
        list.push(&mut self.su_fuse);
        for (conv, head) in self.dec_conv.iter_mut().zip(self.dec_head.iter_mut()) {
            list.push(conv);
            list.push(head);
        }
        list
    }

    /// `(name, tensor)` pairs in the fixed manifest order.
    pub fn named_params(&self) -> Vec<(String, &Tensor)> {
        let names = parameter_plan(&self.config);
        let mut out = Vec::with_capacity(names.len());
        for (layer, pair) in self.layers().into_iter().zip(names.chunks(2)) {
            out.push((pair[0].0.clone(), &layer.weight));
            out.push((pair[1].0.clone(), &layer.bias));
        }
        out
    }

    pub fn named_params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let names = parameter_plan(&self.config);
        let mut out = Vec::with_capacity(names.len());
        for (layer, pair) in self.layers_mut().into_iter().zip(names.chunks(2)) {
            out.push((pair[0].0.clone(), &mut layer.weight));
            out.push((pair[1].0.clone(), &mut layer.bias));
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.named_params().iter().map(|(_, t)| t.numel()).sum()
    }

    pub fn zero_grads(&mut self) {
        for (_, t) in self.named_params_mut() {
            t.zero_grad();
        }
    }

    /// Forward pass returning the four disparity maps, coarsest first.
    pub fn forward(&self, rgb: &Tensor) -> Result<Vec<Tensor>, PadeNetError> {
        Ok(self.forward_record(rgb)?.0)
    }

    /// Forward pass that also returns the activation record for backward.
    pub fn forward_record(
        &self,
        rgb: &Tensor,
    ) -> Result<(Vec<Tensor>, ForwardRecord), PadeNetError> {
        let (_, c, h, w) = rgb.dims4()?;
        if c != 3 || h != self.config.input_height || w != self.config.input_width {
            return Err(PadeNetError::Mismatch(format!(
                "input shape {:?} does not match config 3x{}x{}",
                rgb.shape(),
                self.config.input_height,
                self.config.input_width
            )));
        }
        let unit = ConvSpec::unit();

        let mut enc_a1 = Vec::with_capacity(4);
        let mut enc_a2 = Vec::with_capacity(4);
        let mut enc_pool = Vec::with_capacity(4);
        let mut enc_arg = Vec::with_capacity(4);
        let mut x = rgb.clone();
        for stage in &self.enc {
            let a1 = ops::relu(&ops::conv2d(&x, &stage[0].weight, &stage[0].bias, unit)?);
            let a2 = ops::relu(&ops::conv2d(&a1, &stage[1].weight, &stage[1].bias, unit)?);
            let (pooled, argmax) = ops::maxpool2(&a2)?;
            enc_a1.push(a1);
            enc_a2.push(a2);
            enc_arg.push(argmax);
            x = pooled.clone();
            enc_pool.push(pooled);
        }

        let f = &enc_pool[3];
        let (_, _, fh, fw) = f.dims4()?;
        let gap = ops::global_avg_pool(f)?;
        let fc = ops::relu(&ops::fully_connected(&gap, &self.su_fc.weight, &self.su_fc.bias)?);
        let tiled = ops::tile_spatial(&fc, fh, fw)?;
        let pix = ops::relu(&ops::conv2d(f, &self.su_pixel.weight, &self.su_pixel.bias, unit)?);
        let mut aspp = Vec::with_capacity(3);
        for (branch, &(dh, dv)) in self.su_aspp.iter().zip(&self.config.aspp_dilations) {
            aspp.push(ops::relu(&ops::conv2d(
                f,
                &branch.weight,
                &branch.bias,
                ConvSpec::dilated(dh, dv),
            )?));
        }
        let cat_su = ops::concat_channels(&[&tiled, &pix, &aspp[0], &aspp[1], &aspp[2]])?;
        let fused = ops::relu(&ops::conv2d(&cat_su, &self.su_fuse.weight, &self.su_fuse.bias, unit)?);

        let mut dec_up = Vec::with_capacity(4);
        let mut dec_cat = Vec::with_capacity(4);
        let mut dec_d = Vec::with_capacity(4);
        let mut dec_sig = Vec::with_capacity(4);
        let mut disps = Vec::with_capacity(4);
        let mut u = fused.clone();
        for i in 0..4 {
            let up = ops::bilinear_upsample(&u, 2)?;
            let skip = &enc_a2[3 - i];
            let cat = ops::concat_channels(&[&up, skip])?;
            let d = ops::relu(&ops::conv2d(
                &cat,
                &self.dec_conv[i].weight,
                &self.dec_conv[i].bias,
                unit,
            )?);
            let head = ops::conv2d(&d, &self.dec_head[i].weight, &self.dec_head[i].bias, unit)?;
            let sig = ops::sigmoid(&head);
            disps.push(ops::scale(&sig, self.config.d_max));
            dec_up.push(up);
            dec_cat.push(cat);
            dec_sig.push(sig);
            u = d.clone();
            dec_d.push(d);
        }

        let record = ForwardRecord {
            input: rgb.clone(),
            enc_a1,
            enc_a2,
            enc_pool,
            enc_arg,
            gap,
            fc,
            pix,
            aspp,
            cat_su,
            fused,
            dec_up,
            dec_cat,
            dec_d,
            dec_sig,
        };
        Ok((disps, record))
    }

    /// Backpropagate `grad_disps` (one per scale, coarsest first) through
    /// the recorded activations. Returns parameter gradients in manifest
    /// order plus the gradient w.r.t. the input image.
    pub fn backward(
        &self,
        record: &ForwardRecord,
        grad_disps: &[Tensor],
    ) -> Result<(Vec<Tensor>, Tensor), PadeNetError> {
        if grad_disps.len() != 4 {
            return Err(PadeNetError::Mismatch(format!(
                "expected 4 per-scale gradients, got {}",
                grad_disps.len()
            )));
        }
        let unit = ConvSpec::unit();
        let e = self.config.encoder_channels;

        // Per-layer (weight, bias) gradients, slots keyed like layers():
        // 0..8 encoder, 8 pixel, 9 fc, 10..13 aspp, 13 fuse, 14+2i dec conv,
        // 15+2i dec head.
        let mut grads: Vec<Option<(Tensor, Tensor)>> = vec![None; 22];

        let mut skip_grads: Vec<Option<Tensor>> = vec![None; 4];
        let mut g_carry: Option<Tensor> = None;
        for i in (0..4).rev() {
            // Head chain: disp = d_max · sigmoid(head(d)).
            let g_sig = ops::scale(&grad_disps[i], self.config.d_max);
            let g_head = ops::sigmoid_backward(&record.dec_sig[i], &g_sig)?;
            let (g_d_from_head, gw_head, gb_head) =
                ops::conv2d_backward(&record.dec_d[i], &self.dec_head[i].weight, unit, &g_head)?;
            grads[15 + 2 * i] = Some((gw_head, gb_head));

            let g_d = match g_carry.take() {
                Some(carry) => ops::add(&g_d_from_head, &carry)?,
                None => g_d_from_head,
            };
            let g_conv_out = ops::relu_backward(&record.dec_d[i], &g_d)?;
            let (g_cat, gw, gb) = ops::conv2d_backward(
                &record.dec_cat[i],
                &self.dec_conv[i].weight,
                unit,
                &g_conv_out,
            )?;
            grads[14 + 2 * i] = Some((gw, gb));

            let up_channels = record.dec_up[i].shape()[1];
            let mut parts =
                ops::concat_channels_backward(&[up_channels, e[3 - i]], &g_cat)?.into_iter();
            let g_up = parts.next().expect("two parts");
            skip_grads[3 - i] = Some(parts.next().expect("two parts"));

            let upstream_shape: Vec<usize> = if i == 0 {
                record.fused.shape().to_vec()
            } else {
                record.dec_d[i - 1].shape().to_vec()
            };
            g_carry = Some(ops::bilinear_upsample_backward(&upstream_shape, 2, &g_up)?);
        }

        // Scene understanding.
        let g_fused = ops::relu_backward(&record.fused, &g_carry.take().expect("decoder ran"))?;
        let (g_cat_su, gw_fuse, gb_fuse) =
            ops::conv2d_backward(&record.cat_su, &self.su_fuse.weight, unit, &g_fused)?;
        grads[13] = Some((gw_fuse, gb_fuse));

        let c4 = e[3];
        let mut parts =
            ops::concat_channels_backward(&[c4, c4, c4, c4, c4], &g_cat_su)?.into_iter();
        let g_tiled = parts.next().expect("five parts");
        let g_pix = parts.next().expect("five parts");
        let g_aspp: Vec<Tensor> = parts.collect();

        let f = &record.enc_pool[3];
        // Global branch.
        let g_fc_out = ops::tile_spatial_backward(&g_tiled)?;
        let g_fc_pre = ops::relu_backward(&record.fc, &g_fc_out)?;
        let (g_gap, gw_fc, gb_fc) =
            ops::fully_connected_backward(&record.gap, &self.su_fc.weight, &g_fc_pre)?;
        grads[9] = Some((gw_fc, gb_fc));
        let mut g_f = ops::global_avg_pool_backward(f.shape(), &g_gap)?;
        // Pixel branch.
        let g_pix_pre = ops::relu_backward(&record.pix, &g_pix)?;
        let (g_f_pix, gw_pix, gb_pix) =
            ops::conv2d_backward(f, &self.su_pixel.weight, unit, &g_pix_pre)?;
        grads[8] = Some((gw_pix, gb_pix));
        g_f = ops::add(&g_f, &g_f_pix)?;
        // ASPP branches.
        for (b, g_branch) in g_aspp.into_iter().enumerate() {
            let (dh, dv) = self.config.aspp_dilations[b];
            let g_pre = ops::relu_backward(&record.aspp[b], &g_branch)?;
            let (g_f_branch, gw, gb) =
                ops::conv2d_backward(f, &self.su_aspp[b].weight, ConvSpec::dilated(dh, dv), &g_pre)?;
            grads[10 + b] = Some((gw, gb));
            g_f = ops::add(&g_f, &g_f_branch)?;
        }

        // Encoder, deepest stage first.
        let mut g_pool = g_f;
        let mut g_input = None;
        for s in (0..4).rev() {
            let mut g_a2 =
                ops::maxpool2_backward(record.enc_a2[s].shape(), &record.enc_arg[s], &g_pool)?;
            if let Some(skip) = skip_grads[s].take() {
                g_a2 = ops::add(&g_a2, &skip)?;
            }
            let g_a2_pre = ops::relu_backward(&record.enc_a2[s], &g_a2)?;
            let (g_a1, gw2, gb2) =
                ops::conv2d_backward(&record.enc_a1[s], &self.enc[s][1].weight, unit, &g_a2_pre)?;
            grads[2 * s + 1] = Some((gw2, gb2));
            let g_a1_pre = ops::relu_backward(&record.enc_a1[s], &g_a1)?;
            let stage_input = if s == 0 {
                &record.input
            } else {
                &record.enc_pool[s - 1]
            };
            let (g_x, gw1, gb1) =
                ops::conv2d_backward(stage_input, &self.enc[s][0].weight, unit, &g_a1_pre)?;
            grads[2 * s] = Some((gw1, gb1));
            if s == 0 {
                g_input = Some(g_x);
            } else {
                g_pool = g_x;
            }
        }

        let mut flat = Vec::with_capacity(grads.len() * 2);
        for pair in grads {
            let (gw, gb) = pair.expect("all layers visited in backward");
            flat.push(gw);
            flat.push(gb);
        }
        Ok((flat, g_input.expect("encoder ran")))
    }

    /// Accumulate backward results into the parameters' gradient buffers.
    pub fn accumulate_grads(&mut self, grads: &[Tensor]) -> Result<(), PadeNetError> {
        let mut params = self.named_params_mut();
        if grads.len() != params.len() {
            return Err(PadeNetError::Mismatch(format!(
                "got {} gradients for {} parameters",
                grads.len(),
                params.len()
            )));
        }
        for ((_, p), g) in params.iter_mut().zip(grads) {
            p.accumulate_grad(g.data())?;
        }
        Ok(())
    }

    /// Serialize parameters for [`crate::io::save_checkpoint`].
    pub fn checkpoint_tensors(&self) -> Vec<(String, Vec<usize>, Vec<f32>)> {
        self.named_params()
            .into_iter()
            .map(|(name, t)| (name, t.shape().to_vec(), t.data().to_vec()))
            .collect()
    }

    /// Rebuild a model from a checkpoint (config from meta, weights by name).
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<PadeNetModel, PadeNetError> {
        let config = PadeNetConfig::from_meta(&ck.meta)?;
        let mut model = PadeNetModel::build(&config, 0)?;
        model.load_tensors(ck)?;
        Ok(model)
    }

    /// Copy checkpoint tensors into this model, validating names and shapes.
    pub fn load_tensors(&mut self, ck: &Checkpoint) -> Result<(), PadeNetError> {
        let mut params = self.named_params_mut();
        let mut filled = vec![false; params.len()];
        for (name, shape, data) in &ck.tensors {
            let slot = params.iter().position(|(n, _)| n == name).ok_or_else(|| {
                PadeNetError::Mismatch(format!("unknown tensor name {name:?}"))
            })?;
            let (_, param) = &mut params[slot];
            if param.shape() != shape.as_slice() {
                return Err(PadeNetError::Mismatch(format!(
                    "tensor {name:?} has shape {shape:?}, model expects {:?}",
                    param.shape()
                )));
            }
            param.data_mut().copy_from_slice(data);
            filled[slot] = true;
        }
        if let Some(missing) = filled.iter().position(|f| !f) {
            return Err(PadeNetError::Mismatch(format!(
                "checkpoint missing tensor {:?}",
                params[missing].0
            )));
        }
        Ok(())
    }
}

/// Everything the backward pass needs from a forward pass.
pub struct ForwardRecord {
    input: Tensor,
    enc_a1: Vec<Tensor>,
    enc_a2: Vec<Tensor>,
    enc_pool: Vec<Tensor>,
    enc_arg: Vec<Vec<u32>>,
    gap: Tensor,
    fc: Tensor,
    pix: Tensor,
    aspp: Vec<Tensor>,
    cat_su: Tensor,
    fused: Tensor,
    dec_up: Vec<Tensor>,
    dec_cat: Vec<Tensor>,
    dec_d: Vec<Tensor>,
    dec_sig: Vec<Tensor>,
}
