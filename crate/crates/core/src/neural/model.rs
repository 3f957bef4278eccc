use ndarray::{s, Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{CrossBlock, CrossCache, EncoderCache, EncoderLayer, LayerNorm, Linear, LnCache};
use super::params::{Grads, ParamStore};
use super::{ModelConfig, NeuralError, Vocab};
use crate::chart::{DataTable, Raster};
use crate::qa::{linearize_with_limit, Linearized};

/// Table tokens belonging to one data cell, by data coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct CellTokens {
    pub row: usize,
    pub col: usize,
    pub tokens: Vec<usize>,
}

/// Model-ready encoding of one (raster, question, table) triple.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelInput {
    /// `num_patches x patch_dim`, row-major patch order.
    pub patches: Array2<f64>,
    pub token_ids: Vec<usize>,
    pub segments: Vec<usize>,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    /// `false` marks padding positions that no query may attend to.
    pub key_mask: Option<Vec<bool>>,
    pub cells: Vec<CellTokens>,
}

/// Splits a square raster into flattened `P x P x 3` patches.
pub fn patchify_raster(raster: &Raster, config: &ModelConfig) -> Result<Array2<f64>, NeuralError> {
    let (size, p) = (config.image_size, config.patch_size);
    if raster.size != size || raster.data.len() != size * size * 3 {
        return Err(NeuralError::Shape {
            expected: format!("{size}x{size}x3 raster"),
            found: format!("{0}x{0}x3 raster with {1} values", raster.size, raster.data.len()),
        });
    }
    let side = size / p;
    let mut out = Array2::zeros((side * side, config.patch_dim()));
    for py in 0..side {
        for px in 0..side {
            let mut row = out.row_mut(py * side + px);
            let mut k = 0;
            for y in py * p..(py + 1) * p {
                for x in px * p..(px + 1) * p {
                    let i = (y * size + x) * 3;
                    for c in 0..3 {
                        row[k] = raster.data[i + c];
                        k += 1;
                    }
                }
            }
        }
    }
    Ok(out)
}

impl ModelInput {
    pub fn new(
        config: &ModelConfig,
        vocab: &Vocab,
        raster: &Raster,
        question: &str,
        table: &DataTable,
    ) -> Result<Self, NeuralError> {
        let patches = patchify_raster(raster, config)?;
        let lin = linearize_with_limit(question, table, config.max_seq_len);
        Self::from_linearized(config, vocab, patches, &lin)
    }

    pub fn from_linearized(
        config: &ModelConfig,
        vocab: &Vocab,
        patches: Array2<f64>,
        lin: &Linearized,
    ) -> Result<Self, NeuralError> {
        if patches.dim() != (config.num_patches(), config.patch_dim()) {
            return Err(NeuralError::Shape {
                expected: format!("{}x{} patches", config.num_patches(), config.patch_dim()),
                found: format!("{:?}", patches.dim()),
            });
        }
        let n = lin.tokens.len();
        if n > config.max_seq_len {
            return Err(NeuralError::IdOutOfRange {
                kind: "position",
                id: n - 1,
                limit: config.max_seq_len,
            });
        }
        let mut input = ModelInput {
            patches,
            token_ids: Vec::with_capacity(n),
            segments: Vec::with_capacity(n),
            rows: Vec::with_capacity(n),
            cols: Vec::with_capacity(n),
            key_mask: None,
            cells: Vec::new(),
        };
        for (i, t) in lin.tokens.iter().enumerate() {
            input.token_ids.push(vocab.id(&t.text));
            input.segments.push(t.segment.index());
            input.rows.push(t.row);
            input.cols.push(t.col);
            if t.row >= 1 && t.col >= 1 {
                let (r, c) = (t.row - 1, t.col - 1);
                match input.cells.iter_mut().find(|cell| cell.row == r && cell.col == c) {
                    Some(cell) => cell.tokens.push(i),
                    None => input.cells.push(CellTokens { row: r, col: c, tokens: vec![i] }),
                }
            }
        }
        input.cells.sort_by_key(|c| (c.row, c.col));
        input.check_ids(config)?;
        Ok(input)
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn check_ids(&self, config: &ModelConfig) -> Result<(), NeuralError> {
        let check = |kind: &'static str, ids: &[usize], limit: usize| match ids.iter().find(|&&id| id >= limit) {
            Some(&id) => Err(NeuralError::IdOutOfRange { kind, id, limit }),
            None => Ok(()),
        };
        check("token", &self.token_ids, config.vocab_size)?;
        check("segment", &self.segments, 2)?;
        check("row", &self.rows, config.max_rows)?;
        check("column", &self.cols, config.max_cols)?;
        if self.len() > config.max_seq_len {
            return Err(NeuralError::IdOutOfRange {
                kind: "position",
                id: self.len() - 1,
                limit: config.max_seq_len,
            });
        }
        if let Some(m) = &self.key_mask {
            if m.len() != self.len() {
                return Err(NeuralError::Shape {
                    expected: format!("mask of length {}", self.len()),
                    found: m.len().to_string(),
                });
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelOutput {
    pub op_logits: Vec<f64>,
    pub token_scores: Vec<f64>,
    /// `((row, col), score)` per data cell present in the input, row-major.
    pub cell_scores: Vec<((usize, usize), f64)>,
    pub pooled_visual: Vec<f64>,
    pub pooled_text: Vec<f64>,
}

#[derive(Clone, Debug)]
pub(crate) struct Layout {
    tok: usize,
    pos: usize,
    seg: usize,
    row: usize,
    col: usize,
    patch: Linear,
    vis_cls: usize,
    vis_pos: usize,
    vit: Vec<EncoderLayer>,
    tapas: Vec<EncoderLayer>,
    cross: Vec<CrossBlock>,
    final_vis: Option<LayerNorm>,
    final_txt: Option<LayerNorm>,
    op_head: Linear,
    cell_head: Linear,
}

impl Layout {
    fn build(c: &ModelConfig, p: &mut ParamStore) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let (d, std, h, f) = (c.embed_dim, c.init_std, c.num_heads, c.ffn_dim);
        let tok = p.normal("embed.token".into(), (c.vocab_size, d), std, &mut rng);
        let pos = p.normal("embed.position".into(), (c.max_seq_len, d), std, &mut rng);
        let seg = p.normal("embed.segment".into(), (2, d), std, &mut rng);
        let row = p.normal("embed.row".into(), (c.max_rows, d), std, &mut rng);
        let col = p.normal("embed.column".into(), (c.max_cols, d), std, &mut rng);
        let patch = Linear::new(p, "visual.patch", c.patch_dim(), d, std, &mut rng);
        let vis_cls = p.normal("visual.cls".into(), (1, d), std, &mut rng);
        let vis_pos = p.normal("visual.position".into(), (c.num_patches() + 1, d), std, &mut rng);
        let vit = (0..c.vit_layers)
            .map(|i| EncoderLayer::new(p, &format!("visual.layer{i}"), d, h, f, std, &mut rng))
            .collect();
        let tapas = (0..c.tapas_layers)
            .map(|i| EncoderLayer::new(p, &format!("text.layer{i}"), d, h, f, std, &mut rng))
            .collect();
        let cross = (0..c.cross_blocks)
            .map(|i| CrossBlock::new(p, &format!("cross{i}"), d, h, f, std, &mut rng))
            .collect();
        let (final_vis, final_txt) = if c.linear_only {
            (None, None)
        } else {
            (
                Some(LayerNorm::new(p, "visual.final_norm", d)),
                Some(LayerNorm::new(p, "text.final_norm", d)),
            )
        };
        let op_head = Linear::new(p, "head.op", d, c.num_ops, std, &mut rng);
        let cell_head = Linear::new(p, "head.cell", d, 1, std, &mut rng);
        Self {
            tok,
            pos,
            seg,
            row,
            col,
            patch,
            vis_cls,
            vis_pos,
            vit,
            tapas,
            cross,
            final_vis,
            final_txt,
            op_head,
            cell_head,
        }
    }
}

/// Intermediate activations kept for the backward pass.
pub struct ForwardCache {
    vit: Vec<EncoderCache>,
    tapas: Vec<EncoderCache>,
    cross: Vec<CrossCache>,
    final_vis: Option<LnCache>,
    final_txt: Option<LnCache>,
    z_final: Array2<f64>,
    input_len: usize,
}

impl ForwardCache {
    /// Attention probabilities of every head in every layer, for inspection.
    pub fn attention_maps(&self) -> Vec<&Array2<f64>> {
        let mut out: Vec<&Array2<f64>> = Vec::new();
        for e in self.vit.iter().chain(&self.tapas) {
            out.extend(e.attn.probs.iter());
        }
        for c in &self.cross {
            out.extend(c.vis_cross.probs.iter());
            out.extend(c.txt_cross.probs.iter());
            out.extend(c.vis_layer.attn.probs.iter());
            out.extend(c.txt_layer.attn.probs.iter());
        }
        out
    }
}

#[derive(Clone, Debug)]
pub struct VisionTapas {
    config: ModelConfig,
    params: ParamStore,
    layout: Layout,
}

impl VisionTapas {
    /// Randomly initialized model; the config's seed fixes every weight.
    pub fn new(config: ModelConfig) -> Result<Self, NeuralError> {
        config.validate()?;
        let mut params = ParamStore::new();
        let layout = Layout::build(&config, &mut params);
        Ok(Self { config, params, layout })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// Visual CLS followed by projected patches, positional embeddings added.
    pub fn patchify(&self, patches: &Array2<f64>) -> Array2<f64> {
        let p = &self.params;
        let proj = self.layout.patch.forward(p, patches);
        let mut h = Array2::zeros((proj.nrows() + 1, self.config.embed_dim));
        h.row_mut(0).assign(&p.get(self.layout.vis_cls).row(0));
        h.slice_mut(s![1.., ..]).assign(&proj);
        h + p.get(self.layout.vis_pos)
    }

    /// Sum of token, position, segment, row and column embeddings.
    pub fn embed_tokens(&self, input: &ModelInput) -> Array2<f64> {
        let p = &self.params;
        let l = &self.layout;
        let mut z = Array2::zeros((input.len(), self.config.embed_dim));
        for (i, mut row) in z.axis_iter_mut(Axis(0)).enumerate() {
            row += &p.get(l.tok).row(input.token_ids[i]);
            row += &p.get(l.pos).row(i);
            row += &p.get(l.seg).row(input.segments[i]);
            row += &p.get(l.row).row(input.rows[i]);
            row += &p.get(l.col).row(input.cols[i]);
        }
        z
    }

    pub fn forward(&self, input: &ModelInput) -> Result<ModelOutput, NeuralError> {
        self.forward_cached(input).map(|(o, _)| o)
    }

    pub fn forward_cached(&self, input: &ModelInput) -> Result<(ModelOutput, ForwardCache), NeuralError> {
        input.check_ids(&self.config)?;
        if input.patches.dim() != (self.config.num_patches(), self.config.patch_dim()) {
            return Err(NeuralError::Shape {
                expected: format!("{}x{} patches", self.config.num_patches(), self.config.patch_dim()),
                found: format!("{:?}", input.patches.dim()),
            });
        }
        let p = &self.params;
        let l = &self.layout;
        let mask = input.key_mask.as_deref();
        let mut h = self.patchify(&input.patches);
        let mut z = self.embed_tokens(input);
        let mut vit = Vec::with_capacity(l.vit.len());
        for layer in &l.vit {
            let (y, c) = layer.forward(p, &h, None);
            h = y;
            vit.push(c);
        }
        let mut tapas = Vec::with_capacity(l.tapas.len());
        for layer in &l.tapas {
            let (y, c) = layer.forward(p, &z, mask);
            z = y;
            tapas.push(c);
        }
        let mut cross = Vec::with_capacity(l.cross.len());
        for block in &l.cross {
            let (h2, z2, c) = block.forward(p, &h, &z, mask);
            h = h2;
            z = z2;
            cross.push(c);
        }
        let (h, final_vis) = match &l.final_vis {
            Some(ln) => {
                let (y, c) = ln.forward(p, &h);
                (y, Some(c))
            }
            None => (h, None),
        };
        let (z, final_txt) = match &l.final_txt {
            Some(ln) => {
                let (y, c) = ln.forward(p, &z);
                (y, Some(c))
            }
            None => (z, None),
        };
        let cls = z.slice(s![0..1, ..]).to_owned();
        let op_logits = l.op_head.forward(p, &cls).row(0).to_vec();
        let token_scores = l.cell_head.forward(p, &z).column(0).to_vec();
        let cell_scores = input
            .cells
            .iter()
            .map(|c| {
                let mean = c.tokens.iter().map(|&t| token_scores[t]).sum::<f64>() / c.tokens.len() as f64;
                ((c.row, c.col), mean)
            })
            .collect();
        let out = ModelOutput {
            op_logits,
            token_scores,
            cell_scores,
            pooled_visual: h.row(0).to_vec(),
            pooled_text: z.row(0).to_vec(),
        };
        let cache = ForwardCache {
            vit,
            tapas,
            cross,
            final_vis,
            final_txt,
            z_final: z,
            input_len: input.len(),
        };
        Ok((out, cache))
    }

    /// Gradients of a loss whose derivatives with respect to the op logits
    /// and the per-cell scores (ordered as `input.cells`) are given.
    pub fn backward(&self, input: &ModelInput, cache: &ForwardCache, d_logits: &[f64], d_cells: &[f64]) -> Grads {
        let p = &self.params;
        let l = &self.layout;
        let d = self.config.embed_dim;
        let mut g = p.zeros_like();
        let n = cache.input_len;

        let mut dz = Array2::zeros((n, d));
        let cls = cache.z_final.slice(s![0..1, ..]).to_owned();
        let dl = Array2::from_shape_vec((1, d_logits.len()), d_logits.to_vec()).expect("logit gradient shape");
        let dcls = l.op_head.backward(p, &mut g, &cls, &dl);
        dz.row_mut(0).scaled_add(1.0, &dcls.row(0));
        let mut dts = Array2::zeros((n, 1));
        for (cell, &dc) in input.cells.iter().zip(d_cells) {
            let share = dc / cell.tokens.len() as f64;
            for &t in &cell.tokens {
                dts[[t, 0]] += share;
            }
        }
        dz += &l.cell_head.backward(p, &mut g, &cache.z_final, &dts);
        let mut dh = Array2::zeros((self.config.num_patches() + 1, d));

        if let (Some(ln), Some(c)) = (&l.final_txt, &cache.final_txt) {
            dz = ln.backward(p, &mut g, c, &dz);
        }
        if let (Some(ln), Some(c)) = (&l.final_vis, &cache.final_vis) {
            dh = ln.backward(p, &mut g, c, &dh);
        }
        for (block, c) in l.cross.iter().zip(&cache.cross).rev() {
            let (a, b) = block.backward(p, &mut g, c, &dh, &dz);
            dh = a;
            dz = b;
        }
        for (layer, c) in l.tapas.iter().zip(&cache.tapas).rev() {
            dz = layer.backward(p, &mut g, c, &dz);
        }
        for (layer, c) in l.vit.iter().zip(&cache.vit).rev() {
            dh = layer.backward(p, &mut g, c, &dh);
        }

        *g.acc(l.vis_pos) += &dh;
        g.acc(l.vis_cls).row_mut(0).scaled_add(1.0, &dh.row(0));
        let dproj = dh.slice(s![1.., ..]).to_owned();
        l.patch.backward(p, &mut g, &input.patches, &dproj);

        for (i, row) in dz.axis_iter(Axis(0)).enumerate() {
            g.acc(l.tok).row_mut(input.token_ids[i]).scaled_add(1.0, &row);
            g.acc(l.pos).row_mut(i).scaled_add(1.0, &row);
            g.acc(l.seg).row_mut(input.segments[i]).scaled_add(1.0, &row);
            g.acc(l.row).row_mut(input.rows[i]).scaled_add(1.0, &row);
            g.acc(l.col).row_mut(input.cols[i]).scaled_add(1.0, &row);
        }
        g
    }

    /// Replaces all parameters; names and shapes must match this config.
    pub fn set_params(&mut self, params: ParamStore) -> Result<(), NeuralError> {
        if params.names() != self.params.names() {
            return Err(NeuralError::Checkpoint("parameter names do not match config".into()));
        }
        for i in 0..params.len() {
            if params.get(i).dim() != self.params.get(i).dim() {
                return Err(NeuralError::Shape {
                    expected: format!("{:?} for {}", self.params.get(i).dim(), params.name(i)),
                    found: format!("{:?}", params.get(i).dim()),
                });
            }
        }
        self.params = params;
        Ok(())
    }

    #[cfg(test)]
    pub(crate) fn position_embedding_index(&self) -> usize {
        self.layout.pos
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qa::linearize;

    fn config() -> ModelConfig {
        ModelConfig {
            vocab_size: 32,
            ..ModelConfig::default()
        }
    }

    fn vocab() -> Vocab {
        Vocab::build(["what", "is", "the", "sum", "?", "a", "b", "x", "y", "5", "7", "v"])
    }

    fn table() -> DataTable {
        DataTable::single_column("v", vec![("x".into(), 5.0), ("y".into(), 7.0)])
    }

    fn input(model: &VisionTapas) -> ModelInput {
        let cfg = ModelConfig {
            vocab_size: vocab().len(),
            ..model.config().clone()
        };
        ModelInput::new(&cfg, &vocab(), &Raster::blank(64), "what is the sum?", &table()).unwrap()
    }

    #[test]
    fn patch_count_and_zero_image() {
        let model = VisionTapas::new(config()).unwrap();
        let zero = Raster { size: 64, data: vec![0.0; 64 * 64 * 3] };
        let patches = patchify_raster(&zero, model.config()).unwrap();
        assert_eq!(patches.dim(), (16, 768));
        let h = model.patchify(&patches);
        assert_eq!(h.nrows(), 17);
        let p = model.params();
        let bias = p.get(model.layout.patch.b);
        let pos = p.get(model.layout.vis_pos);
        for i in 1..17 {
            let want = &bias.row(0) + &pos.row(i);
            assert_eq!(h.row(i), want);
        }
        assert!(patchify_raster(&Raster::blank(32), model.config()).is_err());
    }

    #[test]
    fn one_patch_changes_one_embedding() {
        let model = VisionTapas::new(config()).unwrap();
        let a = Raster::blank(64);
        let mut b = a.clone();
        // pixel (20, 5) lies in patch row 0, col 1
        let i = (5 * 64 + 20) * 3;
        b.data[i] = 0.0;
        let ha = model.patchify(&patchify_raster(&a, model.config()).unwrap());
        let hb = model.patchify(&patchify_raster(&b, model.config()).unwrap());
        for r in 0..17 {
            assert_eq!(ha.row(r) == hb.row(r), r != 2, "row {r}");
        }
    }

    #[test]
    fn same_token_in_two_cells() {
        let mut model = VisionTapas::new(config()).unwrap();
        let pos = model.position_embedding_index();
        model.params_mut().get_mut(pos).fill(0.0);
        let t = DataTable::new(
            vec!["a".into(), "b".into()],
            vec!["x".into()],
            vec![vec![Some(5.0), Some(5.0)]],
        )
        .unwrap();
        let cfg = model.config().clone();
        let inp = ModelInput::from_linearized(&cfg, &vocab(), Array2::zeros((16, 768)), &linearize("sum", &t)).unwrap();
        let z = model.embed_tokens(&inp);
        let (i, j) = (inp.cells[0].tokens[0], inp.cells[1].tokens[0]);
        let p = model.params();
        let col = p.get(model.layout.col);
        let delta = &col.row(2) - &col.row(1);
        let got = &z.row(j) - &z.row(i);
        for (a, b) in got.iter().zip(delta.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_shapes_and_determinism() {
        let model = VisionTapas::new(config()).unwrap();
        let inp = input(&model);
        let a = model.forward(&inp).unwrap();
        let b = VisionTapas::new(config()).unwrap().forward(&inp).unwrap();
        assert_eq!(a.op_logits.len(), 8);
        assert_eq!(a.cell_scores.len(), 2);
        assert_eq!(a, b);
        assert!(a.op_logits.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn padding_mask_hides_tokens() {
        let model = VisionTapas::new(config()).unwrap();
        let mut inp = input(&model);
        let pad = inp.len() - 1;
        let mut mask = vec![true; inp.len()];
        mask[pad] = false;
        inp.key_mask = Some(mask);
        let base = model.forward(&inp).unwrap();
        let mut changed = inp.clone();
        changed.token_ids[pad] = Vocab::CLS_ID;
        let other = model.forward(&changed).unwrap();
        assert_eq!(base.op_logits, other.op_logits);
        for t in 0..pad {
            assert_eq!(base.token_scores[t], other.token_scores[t]);
        }
        assert_ne!(base.token_scores[pad], other.token_scores[pad]);
    }

    #[test]
    fn attention_rows_are_distributions() {
        let model = VisionTapas::new(config()).unwrap();
        let (_, cache) = model.forward_cached(&input(&model)).unwrap();
        let maps = cache.attention_maps();
        assert_eq!(maps.len(), (2 + 2 + 4 * 4) * 4);
        for m in maps {
            for row in m.rows() {
                assert!((row.sum() - 1.0).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn cross_blocks_preserve_lengths() {
        let model = VisionTapas::new(config()).unwrap();
        let inp = input(&model);
        let p = &model.params;
        let h = model.patchify(&inp.patches);
        let z = model.embed_tokens(&inp);
        let (h2, z2, _) = model.layout.cross[0].forward(p, &h, &z, None);
        assert_eq!(h2.dim(), h.dim());
        assert_eq!(z2.dim(), z.dim());
        assert_eq!(model.layout.cross.len(), 4);
    }

    #[test]
    fn zero_layers_are_identity() {
        let model = VisionTapas::new(ModelConfig { vocab_size: 32, ..ModelConfig::linear_only() }).unwrap();
        let inp = input(&model);
        let z = model.embed_tokens(&inp);
        let out = model.forward(&inp).unwrap();
        let p = model.params();
        let w = p.get(model.layout.cell_head.w);
        let b = p.get(model.layout.cell_head.b)[[0, 0]];
        for (t, s) in out.token_scores.iter().enumerate() {
            let direct = z.row(t).dot(&w.column(0)) + b;
            assert!((direct - s).abs() < 1e-15);
        }
    }

    #[test]
    fn out_of_range_ids() {
        let model = VisionTapas::new(config()).unwrap();
        let mut inp = input(&model);
        inp.rows[4] = 99;
        assert!(matches!(
            model.forward(&inp),
            Err(NeuralError::IdOutOfRange { kind: "row", id: 99, .. })
        ));
    }
}
