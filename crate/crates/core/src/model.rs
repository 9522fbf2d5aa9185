//! Subword embedding model trained as a twin network with a cosine triplet
//! hinge loss.
//!
//! A token embeds to the mean of its character n-gram vectors and a text
//! embeds to the mean of its token embeddings. Both legs of the twin network
//! read from the same n-gram table. For an anchor `q`, positive title `p` and
//! negative title `n` the loss is
//!
//! ```text
//! max(0, margin - cos(E(q), E(p)) + cos(E(q), E(n)))
//! ```
//!
//! Gradients are derived analytically through the cosine and both means, so
//! training needs no autodiff machinery. Parameters are updated sparsely:
//! only rows touched by a triplet move, and each touched row is updated once
//! per triplet even when it appears in several legs.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{derive_seed, Triplet};
use crate::error::{Error, Result};
use crate::text::{char_ngrams, NgramSpec, Token};

const MAGIC: &[u8; 4] = b"SNTA";
const FORMAT_VERSION: u32 = 1;

/// How a token is turned into rows of the table.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Composition {
    /// Mean of character n-gram rows.
    Subword(NgramSpec),
    /// Direct lookup of the whole token (externally trained word vectors).
    Token,
}

/// Key → vector table plus the rule for composing token embeddings.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    dim: usize,
    composition: Composition,
    keys: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingModel {
    pub fn new_subword(dim: usize, spec: NgramSpec) -> Self {
        Self::with_composition(dim, Composition::Subword(spec))
    }

    pub fn new_token_lookup(dim: usize) -> Self {
        Self::with_composition(dim, Composition::Token)
    }

    fn with_composition(dim: usize, composition: Composition) -> Self {
        EmbeddingModel {
            dim,
            composition,
            keys: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn composition(&self) -> Composition {
        self.composition
    }

    /// Number of rows in the table.
    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.index.get(key).map(|&i| self.row(i))
    }

    /// Inserts or overwrites a row.
    pub fn insert(&mut self, key: impl Into<String>, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: vector.len(),
            });
        }
        let key = key.into();
        match self.index.get(&key) {
            Some(&i) => self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(vector),
            None => {
                self.index.insert(key.clone(), self.keys.len());
                self.keys.push(key);
                self.data.extend_from_slice(vector);
            }
        }
        Ok(())
    }

    /// Rows in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.keys.iter().enumerate().map(|(i, k)| (k.as_str(), self.row(i)))
    }

    /// Multiplies every stored coordinate by `factor`.
    pub fn scale(&mut self, factor: f64) {
        for x in &mut self.data {
            *x *= factor;
        }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Table keys that make up `token`, with repetition.
    pub fn units(&self, token: &str) -> Vec<String> {
        match self.composition {
            Composition::Subword(spec) => char_ngrams(token, spec),
            Composition::Token => vec![token.to_owned()],
        }
    }

    /// Mean of the token's unit rows; unknown units count as zero vectors.
    pub fn embed_token(&self, token: &str) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        let units = self.units(token);
        if units.is_empty() {
            return out;
        }
        let w = 1.0 / units.len() as f64;
        for u in &units {
            if let Some(&i) = self.index.get(u) {
                axpy(w, self.row(i), &mut out);
            }
        }
        out
    }

    /// Mean of the token embeddings.
    pub fn embed_text<T: AsRef<str>>(&self, tokens: &[T]) -> Result<Vec<f64>> {
        if tokens.is_empty() {
            return Err(Error::EmptyText);
        }
        let mut out = vec![0.0; self.dim];
        let w = 1.0 / tokens.len() as f64;
        for t in tokens {
            axpy(w, &self.embed_token(t.as_ref()), &mut out);
        }
        Ok(out)
    }

    /// Adds a row for every unit in `triplets` that is not yet in the table,
    /// drawn uniformly from `[-1/(2d), 1/(2d)]`. Units are visited in triplet
    /// order so the result depends only on the data and `rng`.
    pub fn materialize<R: Rng + ?Sized>(&mut self, triplets: &[Triplet], rng: &mut R) -> usize {
        let bound = 0.5 / self.dim as f64;
        let before = self.len();
        let mut seen_tokens: std::collections::HashSet<&str> = std::collections::HashSet::new();
        for t in triplets {
            for token in t.q.iter().chain(&t.a_pos).chain(&t.a_neg) {
                if !seen_tokens.insert(token.as_str()) {
                    continue;
                }
                for unit in self.units(token.as_str()) {
                    if !self.index.contains_key(&unit) {
                        let v: Vec<f64> = (0..self.dim).map(|_| rng.gen_range(-bound..=bound)).collect();
                        self.index.insert(unit.clone(), self.keys.len());
                        self.keys.push(unit);
                        self.data.extend_from_slice(&v);
                    }
                }
            }
        }
        self.len() - before
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(|e| Error::file(path, e))?;
        let mut w = BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush().map_err(|e| Error::file(path, e))?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(|e| Error::file(path, e))?;
        Self::read_from(BufReader::new(f))
    }

    /// Binary layout, little endian:
    ///
    /// ```text
    /// "SNTA" | version u32 | dim u32 | composition u8 | n_min u32 | n_max u32 | markers u8
    ///        | count u64 | count × (len u32, utf-8 key, dim × f64)
    /// ```
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        let (kind, n_min, n_max, marks) = match self.composition {
            Composition::Subword(s) => (0u8, s.n_min() as u32, s.n_max() as u32, u8::from(s.add_boundary_markers())),
            Composition::Token => (1u8, 0, 0, 0),
        };
        w.write_all(&[kind])?;
        w.write_all(&n_min.to_le_bytes())?;
        w.write_all(&n_max.to_le_bytes())?;
        w.write_all(&[marks])?;
        w.write_all(&(self.keys.len() as u64).to_le_bytes())?;
        for (i, key) in self.keys.iter().enumerate() {
            w.write_all(&(key.len() as u32).to_le_bytes())?;
            w.write_all(key.as_bytes())?;
            for x in self.row(i) {
                w.write_all(&x.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, "magic")?;
        if &magic != MAGIC {
            return Err(Error::ModelFormat(format!("bad magic {magic:?}")));
        }
        let version = read_u32(&mut r, "version")?;
        if version != FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported version {version} (expected {FORMAT_VERSION})"
            )));
        }
        let dim = read_u32(&mut r, "dimension")? as usize;
        if dim == 0 {
            return Err(Error::ModelFormat("dimension is zero".into()));
        }
        let kind = read_u8(&mut r, "composition")?;
        let n_min = read_u32(&mut r, "n_min")? as usize;
        let n_max = read_u32(&mut r, "n_max")? as usize;
        let marks = read_u8(&mut r, "markers")?;
        let composition = match kind {
            0 => Composition::Subword(
                NgramSpec::new(n_min, n_max, marks != 0).map_err(|e| Error::ModelFormat(e.to_string()))?,
            ),
            1 => Composition::Token,
            k => return Err(Error::ModelFormat(format!("unknown composition tag {k}"))),
        };
        let count = read_u64(&mut r, "entry count")?;
        let mut model = EmbeddingModel::with_composition(dim, composition);
        let mut buf8 = [0u8; 8];
        for i in 0..count {
            let len = read_u32(&mut r, "key length")? as usize;
            let mut key = vec![0u8; len];
            read_exact(&mut r, &mut key, "key")?;
            let key = String::from_utf8(key).map_err(|_| Error::ModelFormat(format!("entry {i}: key is not utf-8")))?;
            if model.index.contains_key(&key) {
                return Err(Error::ModelFormat(format!("entry {i}: duplicate key {key:?}")));
            }
            model.index.insert(key.clone(), model.keys.len());
            model.keys.push(key);
            for _ in 0..dim {
                read_exact(&mut r, &mut buf8, "vector")?;
                model.data.push(f64::from_le_bytes(buf8));
            }
        }
        let mut trailing = [0u8; 1];
        if r.read(&mut trailing)? != 0 {
            return Err(Error::ModelFormat("trailing bytes after last entry".into()));
        }
        Ok(model)
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::ModelFormat(format!("truncated file while reading {what}")),
        _ => Error::Io(e),
    })
}

fn read_u8<R: Read>(r: &mut R, what: &str) -> Result<u8> {
    let mut b = [0u8; 1];
    read_exact(r, &mut b, what)?;
    Ok(b[0])
}

fn read_u32<R: Read>(r: &mut R, what: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, what)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, what: &str) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, what)?;
    Ok(u64::from_le_bytes(b))
}

/// Reads the common text vector format: a `count dim` header, then
/// `token v1 .. vdim` per line. The result is a token-lookup model.
pub fn load_external_vectors<R: BufRead>(r: R) -> Result<EmbeddingModel> {
    let mut lines = r.lines().enumerate();
    let (count, dim) = loop {
        let Some((i, line)) = lines.next() else {
            return Err(Error::parse(1, "missing `count dim` header"));
        };
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parsed = match fields.as_slice() {
            [c, d] => c.parse::<usize>().ok().zip(d.parse::<usize>().ok()),
            _ => None,
        };
        match parsed {
            Some((c, d)) if d > 0 => break (c, d),
            _ => return Err(Error::parse(i + 1, "header must be `count dim` with dim > 0")),
        }
    };
    let mut model = EmbeddingModel::new_token_lookup(dim);
    let mut row = Vec::with_capacity(dim);
    for (i, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields.next().unwrap_or_default();
        row.clear();
        for f in fields {
            let x: f64 = f
                .parse()
                .map_err(|_| Error::parse(i + 1, format!("`{f}` is not a number")))?;
            row.push(x);
        }
        if row.len() != dim {
            return Err(Error::parse(i + 1, format!("expected {dim} values after the token, found {}", row.len())));
        }
        model.insert(token, &row)?;
    }
    if model.len() != count {
        return Err(Error::Parse {
            line: 1,
            message: format!("header announces {count} vectors but {} were read", model.len()),
        });
    }
    Ok(model)
}

/// Writes `(token, vector)` pairs in the text vector format. Values use the
/// shortest representation that parses back to the same `f64`.
pub fn write_text_vectors<W: Write>(mut w: W, dim: usize, rows: &[(String, Vec<f64>)]) -> Result<()> {
    writeln!(w, "{} {}", rows.len(), dim)?;
    for (token, v) in rows {
        write!(w, "{token}")?;
        for x in v {
            write!(w, " {x}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Cosine similarity, or `None` if either vector has zero norm.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        None
    } else {
        Some(dot(a, b) / (na * nb))
    }
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// A non-negative hinge loss value.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LossValue(f64);

impl LossValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

fn hinge(margin: f64, cos_pos: f64, cos_neg: f64) -> f64 {
    (margin - cos_pos + cos_neg).max(0.0)
}

pub fn triplet_loss(e_q: &[f64], e_pos: &[f64], e_neg: &[f64], margin: f64) -> Result<LossValue> {
    for v in [e_pos, e_neg] {
        if v.len() != e_q.len() {
            return Err(Error::Dimension {
                expected: e_q.len(),
                got: v.len(),
            });
        }
    }
    let cp = cosine(e_q, e_pos).ok_or(Error::ZeroVector)?;
    let cn = cosine(e_q, e_neg).ok_or(Error::ZeroVector)?;
    Ok(LossValue(hinge(margin, cp, cn)))
}

struct LegGradients {
    loss: f64,
    q: Vec<f64>,
    pos: Vec<f64>,
    neg: Vec<f64>,
}

/// Gradient of the hinge loss with respect to the three composed
/// embeddings; `Err(ZeroVector)` for zero-norm inputs, `Ok(None)` when the
/// hinge is inactive.
fn leg_gradients(u: &[f64], v: &[f64], w: &[f64], margin: f64) -> Result<Option<LegGradients>> {
    let (nu, nv, nw) = (norm(u), norm(v), norm(w));
    if nu == 0.0 || nv == 0.0 || nw == 0.0 {
        return Err(Error::ZeroVector);
    }
    let cp = dot(u, v) / (nu * nv);
    let cn = dot(u, w) / (nu * nw);
    let raw = margin - cp + cn;
    if raw <= 0.0 {
        return Ok(None);
    }
    let (nu2, nv2, nw2) = (nu * nu, nv * nv, nw * nw);
    let d = u.len();
    let mut gq = vec![0.0; d];
    let mut gp = vec![0.0; d];
    let mut gn = vec![0.0; d];
    for k in 0..d {
        // d cos(x, y) / dx = y / (|x||y|) - cos(x, y) x / |x|^2
        let dcp_du = v[k] / (nu * nv) - cp * u[k] / nu2;
        let dcn_du = w[k] / (nu * nw) - cn * u[k] / nu2;
        gq[k] = dcn_du - dcp_du;
        gp[k] = -(u[k] / (nu * nv) - cp * v[k] / nv2);
        gn[k] = u[k] / (nu * nw) - cn * w[k] / nw2;
    }
    Ok(Some(LegGradients {
        loss: raw,
        q: gq,
        pos: gp,
        neg: gn,
    }))
}

/// Per-key weights of a text leg: `d E(text) / d row(key)`.
fn leg_weights(model: &EmbeddingModel, tokens: &[Token]) -> Vec<(String, f64)> {
    let mut out: Vec<(String, f64)> = Vec::new();
    let mut pos: HashMap<String, usize> = HashMap::new();
    let t = tokens.len() as f64;
    for token in tokens {
        let units = model.units(token.as_str());
        let w = 1.0 / (t * units.len() as f64);
        for u in units {
            match pos.get(&u) {
                Some(&i) => out[i].1 += w,
                None => {
                    pos.insert(u.clone(), out.len());
                    out.push((u, w));
                }
            }
        }
    }
    out
}

/// Loss and gradients for one triplet.
#[derive(Debug, Clone, PartialEq)]
pub struct Backward {
    pub loss: LossValue,
    /// Row key → gradient, in first-touch order (anchor, positive, negative).
    /// Empty when the hinge is inactive.
    pub gradients: Vec<(String, Vec<f64>)>,
}

impl Backward {
    pub fn gradient(&self, key: &str) -> Option<&[f64]> {
        self.gradients.iter().find(|(k, _)| k == key).map(|(_, g)| g.as_slice())
    }
}

/// Analytic gradients of the triplet loss with respect to every row that
/// participates in any leg. Rows missing from the table are treated as zero
/// vectors and still receive a gradient. A row shared by several legs gets
/// the sum of the per-leg contributions.
pub fn backward(model: &EmbeddingModel, triplet: &Triplet, margin: f64) -> Result<Backward> {
    if triplet.q.is_empty() || triplet.a_pos.is_empty() || triplet.a_neg.is_empty() {
        return Err(Error::EmptyText);
    }
    let legs = [
        leg_weights(model, &triplet.q),
        leg_weights(model, &triplet.a_pos),
        leg_weights(model, &triplet.a_neg),
    ];
    let compose = |weights: &[(String, f64)]| {
        let mut e = vec![0.0; model.dim];
        for (key, w) in weights {
            if let Some(row) = model.get(key) {
                axpy(*w, row, &mut e);
            }
        }
        e
    };
    let (u, v, w) = (compose(&legs[0]), compose(&legs[1]), compose(&legs[2]));
    let Some(g) = leg_gradients(&u, &v, &w, margin)? else {
        return Ok(Backward {
            loss: LossValue(0.0),
            gradients: Vec::new(),
        });
    };
    let mut gradients: Vec<(String, Vec<f64>)> = Vec::new();
    let mut pos: HashMap<String, usize> = HashMap::new();
    for (weights, leg_grad) in legs.iter().zip([&g.q, &g.pos, &g.neg]) {
        for (key, wt) in weights {
            let i = *pos.entry(key.clone()).or_insert_with(|| {
                gradients.push((key.clone(), vec![0.0; model.dim]));
                gradients.len() - 1
            });
            axpy(*wt, leg_grad, &mut gradients[i].1);
        }
    }
    Ok(Backward {
        loss: LossValue(g.loss),
        gradients,
    })
}

/// Per-coordinate update rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Optimizer {
    /// Decaying averages of squared gradients and squared updates.
    Adadelta { rho: f64, eps: f64, lr: f64 },
    Sgd { lr: f64 },
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adadelta {
            rho: 0.95,
            eps: 1e-6,
            lr: 1.0,
        }
    }
}

impl Optimizer {
    /// Updates one coordinate. `sq_grad` and `sq_update` are the running
    /// accumulators (unused by SGD).
    #[inline]
    pub fn step(&self, param: &mut f64, sq_grad: &mut f64, sq_update: &mut f64, grad: f64) {
        match *self {
            Optimizer::Adadelta { rho, eps, lr } => {
                *sq_grad = rho * *sq_grad + (1.0 - rho) * grad * grad;
                let delta = ((*sq_update + eps).sqrt() / (*sq_grad + eps).sqrt()) * grad;
                *sq_update = rho * *sq_update + (1.0 - rho) * delta * delta;
                *param -= lr * delta;
            }
            Optimizer::Sgd { lr } => *param -= lr * grad,
        }
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub margin: f64,
    pub dimension: usize,
    pub ngram_spec: NgramSpec,
    pub epochs: usize,
    pub optimizer: Optimizer,
    pub seed: u64,
    /// Worker threads. Anything above 1 trains lock-free and is not reproducible.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            margin: 0.4,
            dimension: 200,
            ngram_spec: NgramSpec::embedding_default(),
            epochs: 5,
            optimizer: Optimizer::default(),
            seed: 0,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 0.0) {
            return Err(Error::Config(format!("margin must be positive, got {}", self.margin)));
        }
        if self.dimension == 0 {
            return Err(Error::Config("dimension must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be positive".into()));
        }
        match self.optimizer {
            Optimizer::Adadelta { rho, eps, lr } => {
                if !(0.0..1.0).contains(&rho) || !(eps > 0.0) || !(lr > 0.0) {
                    return Err(Error::Config("adadelta needs 0 <= rho < 1, eps > 0, lr > 0".into()));
                }
            }
            Optimizer::Sgd { lr } => {
                if !(lr > 0.0) {
                    return Err(Error::Config("learning rate must be positive".into()));
                }
            }
        }
        Ok(())
    }

    /// A fresh model for this config with every unit of `triplets`
    /// materialized but no training applied.
    pub fn initial_model(&self, triplets: &[Triplet]) -> EmbeddingModel {
        let mut model = EmbeddingModel::new_subword(self.dimension, self.ngram_spec);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(self.seed, "init"));
        model.materialize(triplets, &mut rng);
        model
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean loss over the non-degenerate triplets of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Triplet visits skipped because a composed embedding had zero norm.
    pub degenerate: usize,
    pub table_size: usize,
}

/// Trains `model` in place. Missing units are materialized first (seeded by
/// `config.seed`), then each epoch visits the triplets once in a freshly
/// shuffled order.
pub fn train(model: &mut EmbeddingModel, triplets: &[Triplet], config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    if triplets.is_empty() {
        return Err(Error::Config("no training triplets".into()));
    }
    if model.dim != config.dimension {
        return Err(Error::Dimension {
            expected: config.dimension,
            got: model.dim,
        });
    }
    if matches!(model.composition, Composition::Token) {
        return Err(Error::Config("token-lookup models cannot be trained".into()));
    }
    let mut init_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "init"));
    model.materialize(triplets, &mut init_rng);

    let encoded = EncodedTriplets::new(model, triplets);
    let table = SharedTable::from_model(model);
    let mut order: Vec<usize> = (0..triplets.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "shuffle"));
    let threads = config.threads.max(1);
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut degenerate = 0;

    for _ in 0..config.epochs {
        order.shuffle(&mut shuffle_rng);
        let (sum, count, degen) = if threads == 1 {
            let mut scratch = Scratch::new(model.dim, model.len());
            run_slice(&table, &encoded, &order, config, &mut scratch)
        } else {
            let chunk = order.len().div_ceil(threads);
            std::thread::scope(|s| {
                let handles: Vec<_> = order
                    .chunks(chunk)
                    .map(|part| {
                        let (table, encoded) = (&table, &encoded);
                        s.spawn(move || {
                            let mut scratch = Scratch::new(table.dim, table.rows());
                            run_slice(table, encoded, part, config, &mut scratch)
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("training worker panicked"))
                    .fold((0.0, 0, 0), |a, b| (a.0 + b.0, a.1 + b.1, a.2 + b.2))
            })
        };
        degenerate += degen;
        epoch_losses.push(if count > 0 { sum / count as f64 } else { 0.0 });
    }
    table.write_back(model);
    Ok(TrainReport {
        epoch_losses,
        degenerate,
        table_size: model.len(),
    })
}

/// Triplets rewritten as token ids, with each token's row ids cached.
struct EncodedTriplets {
    token_rows: Vec<Vec<usize>>,
    legs: Vec<[Vec<usize>; 3]>,
}

impl EncodedTriplets {
    fn new(model: &EmbeddingModel, triplets: &[Triplet]) -> Self {
        let mut token_ids: HashMap<&str, usize> = HashMap::new();
        let mut token_rows: Vec<Vec<usize>> = Vec::new();
        let mut legs = Vec::with_capacity(triplets.len());
        for t in triplets {
            let mut encoded: [Vec<usize>; 3] = Default::default();
            for (slot, tokens) in encoded.iter_mut().zip([&t.q, &t.a_pos, &t.a_neg]) {
                for tok in tokens {
                    let id = *token_ids.entry(tok.as_str()).or_insert_with(|| {
                        let rows = model.units(tok.as_str()).iter().map(|u| model.index[u]).collect();
                        token_rows.push(rows);
                        token_rows.len() - 1
                    });
                    slot.push(id);
                }
            }
            legs.push(encoded);
        }
        EncodedTriplets { token_rows, legs }
    }
}

/// Parameters and optimizer state as relaxed atomics so several workers can
/// update rows without locking. With one worker the result is deterministic.
struct SharedTable {
    dim: usize,
    params: Vec<AtomicU64>,
    sq_grad: Vec<AtomicU64>,
    sq_update: Vec<AtomicU64>,
}

impl SharedTable {
    fn from_model(model: &EmbeddingModel) -> Self {
        let zeros = || (0..model.data.len()).map(|_| AtomicU64::new(0f64.to_bits())).collect();
        SharedTable {
            dim: model.dim,
            params: model.data.iter().map(|x| AtomicU64::new(x.to_bits())).collect(),
            sq_grad: zeros(),
            sq_update: zeros(),
        }
    }

    fn rows(&self) -> usize {
        self.params.len() / self.dim
    }

    #[inline]
    fn load(cells: &[AtomicU64], i: usize) -> f64 {
        f64::from_bits(cells[i].load(Ordering::Relaxed))
    }

    #[inline]
    fn store(cells: &[AtomicU64], i: usize, v: f64) {
        cells[i].store(v.to_bits(), Ordering::Relaxed);
    }

    fn add_row(&self, row: usize, weight: f64, acc: &mut [f64]) {
        let base = row * self.dim;
        for (k, a) in acc.iter_mut().enumerate() {
            *a += weight * Self::load(&self.params, base + k);
        }
    }

    fn update_row(&self, row: usize, grad: &[f64], opt: &Optimizer) {
        let base = row * self.dim;
        for (k, &g) in grad.iter().enumerate() {
            let i = base + k;
            let mut p = Self::load(&self.params, i);
            let mut sg = Self::load(&self.sq_grad, i);
            let mut su = Self::load(&self.sq_update, i);
            opt.step(&mut p, &mut sg, &mut su, g);
            Self::store(&self.params, i, p);
            Self::store(&self.sq_grad, i, sg);
            Self::store(&self.sq_update, i, su);
        }
    }

    fn write_back(&self, model: &mut EmbeddingModel) {
        for (dst, src) in model.data.iter_mut().zip(&self.params) {
            *dst = f64::from_bits(src.load(Ordering::Relaxed));
        }
    }
}

/// Per-worker buffers reused across triplets.
struct Scratch {
    emb: [Vec<f64>; 3],
    grad: Vec<f64>,
    /// row → slot in `touched`, valid when `stamp[row] == generation`.
    stamp: Vec<u32>,
    slot: Vec<u32>,
    generation: u32,
    touched: Vec<(usize, [f64; 3])>,
}

impl Scratch {
    fn new(dim: usize, rows: usize) -> Self {
        Scratch {
            emb: [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]],
            grad: vec![0.0; dim],
            stamp: vec![0; rows],
            slot: vec![0; rows],
            generation: 0,
            touched: Vec::new(),
        }
    }
}

/// Returns (loss sum, non-degenerate count, degenerate count).
fn run_slice(
    table: &SharedTable,
    encoded: &EncodedTriplets,
    order: &[usize],
    config: &TrainConfig,
    scratch: &mut Scratch,
) -> (f64, usize, usize) {
    let mut sum = 0.0;
    let mut count = 0;
    let mut degenerate = 0;
    for &t in order {
        match train_one(table, encoded, &encoded.legs[t], config, scratch) {
            Some(loss) => {
                sum += loss;
                count += 1;
            }
            None => degenerate += 1,
        }
    }
    (sum, count, degenerate)
}

/// One forward/backward/update pass. `None` for a degenerate triplet.
fn train_one(
    table: &SharedTable,
    encoded: &EncodedTriplets,
    legs: &[Vec<usize>; 3],
    config: &TrainConfig,
    scratch: &mut Scratch,
) -> Option<f64> {
    scratch.generation = scratch.generation.wrapping_add(1);
    if scratch.generation == 0 {
        scratch.stamp.iter_mut().for_each(|s| *s = 0);
        scratch.generation = 1;
    }
    scratch.touched.clear();

    for (leg_idx, leg) in legs.iter().enumerate() {
        let emb = &mut scratch.emb[leg_idx];
        emb.iter_mut().for_each(|x| *x = 0.0);
        let t = leg.len() as f64;
        for &tok in leg {
            let rows = &encoded.token_rows[tok];
            let w = 1.0 / (t * rows.len() as f64);
            for &row in rows {
                table.add_row(row, w, emb);
                let s = if scratch.stamp[row] == scratch.generation {
                    scratch.slot[row] as usize
                } else {
                    scratch.stamp[row] = scratch.generation;
                    scratch.slot[row] = scratch.touched.len() as u32;
                    scratch.touched.push((row, [0.0; 3]));
                    scratch.touched.len() - 1
                };
                scratch.touched[s].1[leg_idx] += w;
            }
        }
    }

    let g = match leg_gradients(&scratch.emb[0], &scratch.emb[1], &scratch.emb[2], config.margin) {
        Err(_) => return None,
        Ok(None) => return Some(0.0),
        Ok(Some(g)) => g,
    };
    for &(row, [wq, wp, wn]) in &scratch.touched {
        for k in 0..table.dim {
            scratch.grad[k] = wq * g.q[k] + wp * g.pos[k] + wn * g.neg[k];
        }
        table.update_row(row, &scratch.grad, &config.optimizer);
    }
    Some(g.loss)
}
