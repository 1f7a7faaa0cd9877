use super::{ModelConfig, ModelError, Result, SubjectTokens, TokenKind};
use crate::rng;
use crate::tensor::{Mode, Params, Tape, Tensor, Var};
use rand::Rng;
use std::collections::BTreeMap;

/// Parameter-name prefixes of the two attention pathways.
pub const PATHWAYS: [&str; 2] = ["temporal", "contextual"];

const LN_EPS: f64 = 1e-5;
const PE_BASE: f64 = 10_000.0;

/// The stages a forward pass runs through, in execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Input,
    Embedding,
    PositionalEncoding,
    AttentionBlock,
    AveragePooling,
    Dropout,
    Dense,
}

impl Stage {
    pub const ORDER: [Stage; 7] = [
        Stage::Input,
        Stage::Embedding,
        Stage::PositionalEncoding,
        Stage::AttentionBlock,
        Stage::AveragePooling,
        Stage::Dropout,
        Stage::Dense,
    ];
}

/// Names and shapes of every trainable tensor implied by `cfg`.
///
/// The key projection has no bias: adding the same vector to every key
/// shifts all scores of a query by one constant, which softmax ignores.
pub fn param_shapes(cfg: &ModelConfig) -> Vec<(String, Vec<usize>)> {
    let (d, ff) = (cfg.d_model, cfg.d_ff);
    let mut out = Vec::new();
    for (p, kind) in PATHWAYS.iter().zip(cfg.modality.pathway_inputs()) {
        let f = kind.feature_dim();
        let mut add = |name: &str, shape: Vec<usize>| out.push((format!("{p}.{name}"), shape));
        add("embed.w", vec![f, d]);
        add("embed.b", vec![d]);
        add("attn.wq", vec![d, d]);
        add("attn.bq", vec![d]);
        add("attn.wk", vec![d, d]);
        add("attn.wv", vec![d, d]);
        add("attn.bv", vec![d]);
        add("attn.wo", vec![d, d]);
        add("attn.bo", vec![d]);
        add("ln1.gain", vec![d]);
        add("ln1.bias", vec![d]);
        add("ffn.w1", vec![d, ff]);
        add("ffn.b1", vec![ff]);
        add("ffn.w2", vec![ff, d]);
        add("ffn.b2", vec![d]);
        add("ln2.gain", vec![d]);
        add("ln2.bias", vec![d]);
    }
    out.push(("head.w".into(), vec![2 * d, 2]));
    out.push(("head.b".into(), vec![2]));
    out
}

/// Glorot-uniform matrices, zero biases, unit layer-norm gains, drawn from
/// the `init` stream of `cfg.seed`.
pub fn init_weights(cfg: &ModelConfig) -> Result<Params> {
    cfg.validate()?;
    let mut r = rng::stream(cfg.seed, "init");
    let mut params = Params::new();
    for (name, shape) in param_shapes(cfg) {
        let n: usize = shape.iter().product();
        let data = if shape.len() == 2 {
            let a = (6.0 / (shape[0] + shape[1]) as f64).sqrt();
            (0..n).map(|_| r.random_range(-a..=a)).collect()
        } else if name.ends_with(".gain") {
            vec![1.0; n]
        } else {
            vec![0.0; n]
        };
        params.insert(name, Tensor::new(shape, data)?);
    }
    Ok(params)
}

/// Per-token linear projection: `x * w + b`.
pub fn embed(tape: &mut Tape, x: Var, w: Var, b: Var) -> Result<Var> {
    let h = tape.matmul(x, w)?;
    Ok(tape.add_row(h, b)?)
}

/// Sinusoidal table: `PE[pos, 2i] = sin(pos / 10000^(2i/d))`, `PE[pos, 2i+1] = cos(...)`.
pub fn positional_encoding(seq_len: usize, d_model: usize) -> Tensor {
    let mut data = vec![0.0; seq_len * d_model];
    for pos in 0..seq_len {
        for j in 0..d_model {
            let pair = (j / 2 * 2) as f64;
            let angle = pos as f64 / PE_BASE.powf(pair / d_model as f64);
            data[pos * d_model + j] = if j % 2 == 0 { angle.sin() } else { angle.cos() };
        }
    }
    Tensor::new(vec![seq_len, d_model], data).expect("consistent shape")
}

/// Adds the positional table to a stack of `rows / seq_len` sequences.
pub fn positional_encode(tape: &mut Tape, emb: Var, seq_len: usize, enabled: bool) -> Result<Var> {
    if !enabled {
        return Ok(emb);
    }
    let (rows, d) = (tape.value(emb).rows(), tape.value(emb).cols());
    if seq_len == 0 || rows % seq_len != 0 {
        return Err(ModelError::ShapeMismatch {
            name: "positional encoding".into(),
            expected: vec![seq_len, d],
            found: vec![rows, d],
        });
    }
    let table = positional_encoding(seq_len, d);
    let tiled: Vec<f64> = table.data().iter().copied().cycle().take(rows * d).collect();
    let pe = tape.constant(Tensor::new(vec![rows, d], tiled)?);
    Ok(tape.add(emb, pe)?)
}

fn param(bound: &BTreeMap<String, Var>, name: &str) -> Result<Var> {
    bound.get(name).copied().ok_or_else(|| ModelError::Config(format!("missing parameter {name}")))
}

/// Handles into one attention block's computation.
#[derive(Debug, Clone)]
pub struct AttentionOutput {
    /// Block output, same shape as the input.
    pub output: Var,
    /// Softmax weights `[seq_len x seq_len]`, ordered by sequence then head.
    pub weights: Vec<Var>,
    /// Value projection of the input.
    pub values: Var,
    /// Concatenated head outputs before the output projection.
    pub heads: Var,
}

/// One post-norm transformer block over a stack of equal-length sequences:
/// `y1 = LN(x + drop(MHA(x)))`, `y = LN(y1 + drop(FFN(y1)))`. Attention never
/// crosses sequence boundaries.
#[allow(clippy::too_many_arguments)]
pub fn attention_block<R: Rng + ?Sized>(
    tape: &mut Tape,
    x: Var,
    seq_len: usize,
    bound: &BTreeMap<String, Var>,
    prefix: &str,
    cfg: &ModelConfig,
    mode: Mode,
    rng: &mut R,
) -> Result<AttentionOutput> {
    let rows = tape.value(x).rows();
    if seq_len == 0 || !rows.is_multiple_of(seq_len) {
        return Err(ModelError::ShapeMismatch {
            name: format!("{prefix} attention input"),
            expected: vec![seq_len, cfg.d_model],
            found: tape.value(x).shape().to_vec(),
        });
    }
    let n_seq = rows / seq_len;
    let p = |name: &str| param(bound, &format!("{prefix}.{name}"));
    let (dh, heads) = (cfg.head_dim(), cfg.n_heads);
    let scale = 1.0 / (dh as f64).sqrt();

    let q = embed(tape, x, p("attn.wq")?, p("attn.bq")?)?;
    let k = tape.matmul(x, p("attn.wk")?)?;
    let v = embed(tape, x, p("attn.wv")?, p("attn.bv")?)?;
    let split = |tape: &mut Tape, t: Var| -> Result<Vec<Var>> {
        if heads == 1 {
            return Ok(vec![t]);
        }
        (0..heads).map(|h| Ok(tape.slice_cols(t, h * dh, dh)?)).collect()
    };
    let (qh, kh, vh) = (split(tape, q)?, split(tape, k)?, split(tape, v)?);

    let mut weights = Vec::with_capacity(n_seq * heads);
    let mut per_seq = Vec::with_capacity(n_seq);
    for s in 0..n_seq {
        let mut outs = Vec::with_capacity(heads);
        for h in 0..heads {
            let rows_of = |tape: &mut Tape, t: Var| -> Result<Var> {
                if n_seq == 1 {
                    Ok(t)
                } else {
                    Ok(tape.slice_rows(t, s * seq_len, seq_len)?)
                }
            };
            let (qs, ks, vs) = (rows_of(tape, qh[h])?, rows_of(tape, kh[h])?, rows_of(tape, vh[h])?);
            let kt = tape.transpose(ks)?;
            let scores = tape.matmul(qs, kt)?;
            let scores = tape.scale(scores, scale)?;
            let a = tape.softmax(scores, 1)?;
            weights.push(a);
            outs.push(tape.matmul(a, vs)?);
        }
        per_seq.push(if heads == 1 { outs[0] } else { tape.hcat(&outs)? });
    }
    let heads_out = if n_seq == 1 { per_seq[0] } else { tape.vcat(&per_seq)? };
    let attended = embed(tape, heads_out, p("attn.wo")?, p("attn.bo")?)?;

    let dropped = tape.dropout(attended, cfg.p_drop, mode, rng)?;
    let res1 = tape.add(x, dropped)?;
    let y1 = tape.layer_norm(res1, p("ln1.gain")?, p("ln1.bias")?, LN_EPS)?;

    let hidden = embed(tape, y1, p("ffn.w1")?, p("ffn.b1")?)?;
    let hidden = tape.relu(hidden)?;
    let ffn = embed(tape, hidden, p("ffn.w2")?, p("ffn.b2")?)?;
    let dropped = tape.dropout(ffn, cfg.p_drop, mode, rng)?;
    let res2 = tape.add(y1, dropped)?;
    let output = tape.layer_norm(res2, p("ln2.gain")?, p("ln2.bias")?, LN_EPS)?;
    Ok(AttentionOutput { output, weights, values: v, heads: heads_out })
}

/// Handles into a full forward pass.
#[derive(Debug, Clone)]
pub struct ForwardOutput {
    /// `[batch x 2]`.
    pub logits: Var,
    /// Pooled `[batch x d_model]` output of each pathway.
    pub pooled: [Var; 2],
    pub attention: Vec<AttentionOutput>,
    /// Stages in the order they ran.
    pub stages: Vec<Stage>,
}

fn stack_inputs(batch: &[&SubjectTokens], kind: TokenKind, cfg: &ModelConfig) -> Result<Tensor> {
    let len = cfg.seq_len(kind);
    let f = kind.feature_dim();
    let mut data = Vec::with_capacity(batch.len() * len * f);
    for s in batch {
        let seq = s.sequence(kind).ok_or(ModelError::Modality(cfg.modality))?;
        if seq.tokens.shape() != [len, f] {
            return Err(ModelError::ShapeMismatch {
                name: format!("{kind:?} tokens"),
                expected: vec![len, f],
                found: seq.tokens.shape().to_vec(),
            });
        }
        data.extend_from_slice(seq.tokens.data());
    }
    Ok(Tensor::new(vec![batch.len() * len, f], data)?)
}

/// Runs the classifier on a batch and returns `[batch x 2]` logits.
pub fn bisam_forward<R: Rng + ?Sized>(
    tape: &mut Tape,
    bound: &BTreeMap<String, Var>,
    cfg: &ModelConfig,
    batch: &[&SubjectTokens],
    mode: Mode,
    rng: &mut R,
) -> Result<ForwardOutput> {
    if batch.is_empty() {
        return Err(ModelError::Config("empty batch".into()));
    }
    let b = batch.len();
    let mut stages = vec![Stage::Input];
    let mut pooled = Vec::with_capacity(2);
    let mut attention = Vec::with_capacity(2);
    for (i, (prefix, kind)) in PATHWAYS.iter().zip(cfg.modality.pathway_inputs()).enumerate() {
        let first = i == 0;
        let len = cfg.seq_len(kind);
        let x = tape.constant(stack_inputs(batch, kind, cfg)?);
        let emb =
            embed(tape, x, param(bound, &format!("{prefix}.embed.w"))?, param(bound, &format!("{prefix}.embed.b"))?)?;
        let emb = positional_encode(tape, emb, len, cfg.positional_encoding && kind == TokenKind::Signal)?;
        let att = attention_block(tape, emb, len, bound, prefix, cfg, mode, rng)?;
        let mut pool = vec![0.0; b * b * len];
        for s in 0..b {
            pool[s * b * len + s * len..s * b * len + (s + 1) * len].fill(1.0 / len as f64);
        }
        let pool = tape.constant(Tensor::new(vec![b, b * len], pool)?);
        pooled.push(tape.matmul(pool, att.output)?);
        attention.push(att);
        if first {
            stages.extend([Stage::Embedding, Stage::PositionalEncoding, Stage::AttentionBlock, Stage::AveragePooling]);
        }
    }
    let fused = tape.hcat(&pooled)?;
    let fused = tape.dropout(fused, cfg.p_drop, mode, rng)?;
    stages.push(Stage::Dropout);
    let logits = embed(tape, fused, param(bound, "head.w")?, param(bound, "head.b")?)?;
    stages.push(Stage::Dense);
    Ok(ForwardOutput { logits, pooled: [pooled[0], pooled[1]], attention, stages })
}

/// Anything that maps subjects to binary predictions.
pub trait Predictor {
    fn predict(&self, inputs: &[SubjectTokens]) -> Result<Vec<u8>>;

    /// False for a model that has never been trained.
    fn is_fitted(&self) -> bool {
        true
    }
}

/// A configured model together with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Bisam {
    pub config: ModelConfig,
    pub params: Params,
    /// Optimizer updates applied so far; zero for a freshly initialised model.
    pub trained_steps: u64,
}

const EVAL_CHUNK: usize = 64;

impl Bisam {
    pub fn new(config: ModelConfig) -> Result<Self> {
        let params = init_weights(&config)?;
        Ok(Self { config, params, trained_steps: 0 })
    }

    /// Eval-mode logits, one `[f64; 2]` per subject.
    pub fn logits(&self, inputs: &[SubjectTokens]) -> Result<Vec<[f64; 2]>> {
        let mut out = Vec::with_capacity(inputs.len());
        let mut unused = rng::stream(self.config.seed, "eval");
        for chunk in inputs.chunks(EVAL_CHUNK) {
            let mut tape = Tape::new();
            let bound = tape.bind(&self.params);
            let refs: Vec<&SubjectTokens> = chunk.iter().collect();
            let f = bisam_forward(&mut tape, &bound, &self.config, &refs, Mode::Eval, &mut unused)?;
            out.extend(tape.value(f.logits).data().chunks(2).map(|c| [c[0], c[1]]));
        }
        Ok(out)
    }
}

impl Predictor for Bisam {
    /// Class 1 when its logit is strictly larger.
    fn predict(&self, inputs: &[SubjectTokens]) -> Result<Vec<u8>> {
        Ok(self.logits(inputs)?.iter().map(|l| u8::from(l[1] > l[0])).collect())
    }

    fn is_fitted(&self) -> bool {
        self.trained_steps > 0
    }
}
