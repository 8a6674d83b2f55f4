use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::autodiff::{Graph, Tensor, Var};
use super::data::{Conditioning, GridMeta, Normalization, TrainingSet};
use super::io::{read_weights, write_weights, Architecture, LossHistory, WeightsHeader};
use super::nets::{bind, Activation, ConvNet, ConvSpec, Dropout, Mlp, MlpSpec};
use super::optim::Adam;
use super::{GanConfig, NeuralError, DIVERGENCE_LIMIT};
use crate::features::FeatureSet;
use crate::hydro::DensitySequence;

/// Keeps the norm differentiable at zero.
const NORM_EPS: f64 = 1e-12;
/// Rows per forward pass when sampling large ensembles.
const ENSEMBLE_CHUNK: usize = 250;

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    Tensor::matrix(
        rows,
        cols,
        (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect(),
    )
}

fn shuffled_batches(rng: &mut ChaCha8Rng, n: usize, batch: usize) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    idx.chunks(batch).map(<[usize]>::to_vec).collect()
}

fn values(g: &Graph, vars: &[Var]) -> Vec<Tensor> {
    vars.iter().map(|&v| g.value(v).clone()).collect()
}

fn check(term: &str, epoch: usize, value: f64) -> Result<(), NeuralError> {
    if !value.is_finite() || value.abs() > DIVERGENCE_LIMIT {
        return Err(NeuralError::DivergedLoss {
            term: term.into(),
            epoch,
            value,
        });
    }
    Ok(())
}

/// Per-row Euclidean norms of a [m, n] matrix, shape [m, 1].
fn row_norms(g: &mut Graph, x: Var) -> Var {
    let sq = g.mul(x, x);
    let s = g.sum_rows(sq);
    let s = g.add_scalar(s, NORM_EPS);
    g.sqrt(s)
}

fn mlp_header_spec(input: usize, output: usize, cfg: &GanConfig) -> MlpSpec {
    MlpSpec::new(
        input,
        &cfg.hidden,
        output,
        Activation::Relu,
        Activation::Identity,
        cfg.dropout,
    )
}

fn select(x: &[f64], width: usize, idx: &[usize]) -> Tensor {
    let mut out = Vec::with_capacity(idx.len() * width);
    for &k in idx {
        out.extend_from_slice(&x[k * width..(k + 1) * width]);
    }
    Tensor::matrix(idx.len(), width, out)
}

/// A conditional generator with the metadata needed to sample from it.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorModel {
    pub mlp: Mlp,
    pub noise_dim: usize,
    pub norm: Normalization,
    pub grid: GridMeta,
    /// Standardization of the normalized features at the input.
    pub conditioning: Conditioning,
    /// Dropout rate when sampling with dropout at test time.
    pub test_dropout: f64,
}

impl GeneratorModel {
    /// Raw generator output for noise `z` [b, noise] and normalized features
    /// `c` [b, f].
    pub fn forward_rows(&self, z: Tensor, c: Tensor, dropout: &mut Dropout<'_>) -> Result<Tensor, NeuralError> {
        let mut g = Graph::new();
        let pv = bind(&mut g, &self.mlp.params);
        let z = g.constant(z);
        let c = g.constant(Tensor::matrix(c.rows(), c.cols(), self.conditioning.apply(&c.data)));
        let input = g.concat_cols(z, c);
        let y = self.mlp.forward(&mut g, &pv, input, dropout)?;
        Ok(g.value(y).clone())
    }
}

/// Samples drawn for one conditioning and their average.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub members: Vec<DensitySequence>,
    pub mean: DensitySequence,
}

impl Ensemble {
    /// Per-radius standard deviation summed over the whole grid [g/cm³].
    pub fn spread(&self) -> f64 {
        let n = self.members.len() as f64;
        (0..self.mean.data.len())
            .map(|i| {
                let m = self.mean.data[i];
                (self.members.iter().map(|s| (s.data[i] - m).powi(2)).sum::<f64>() / n).sqrt()
            })
            .sum()
    }
}

/// Draws `n` sequences for `features`; negative densities are clamped to 0.
/// With `dropout_at_test` every draw gets fresh dropout masks.
pub fn generate_ensemble(
    gen: &GeneratorModel,
    features: &FeatureSet,
    n: usize,
    dropout_at_test: bool,
    seed: u64,
) -> Result<Ensemble, NeuralError> {
    if n == 0 {
        return Err(NeuralError::InvalidConfig("ensemble size must be positive".into()));
    }
    let c_row = gen.norm.feature_row(features);
    sample_rows(gen, &c_row.repeat(n), dropout_at_test, seed)
}

/// One draw per entry of `features`, e.g. for perturbed conditionings.
pub fn generate_conditioned(
    gen: &GeneratorModel,
    features: &[FeatureSet],
    dropout_at_test: bool,
    seed: u64,
) -> Result<Ensemble, NeuralError> {
    if features.is_empty() {
        return Err(NeuralError::InvalidConfig("ensemble size must be positive".into()));
    }
    let c: Vec<f64> = features.iter().flat_map(|f| gen.norm.feature_row(f)).collect();
    sample_rows(gen, &c, dropout_at_test, seed)
}

fn sample_rows(
    gen: &GeneratorModel,
    c_rows: &[f64],
    dropout_at_test: bool,
    seed: u64,
) -> Result<Ensemble, NeuralError> {
    let fw = gen.grid.feature_width();
    if !c_rows.len().is_multiple_of(fw) {
        return Err(NeuralError::ShapeMismatch(format!(
            "feature rows of length {} for a generator expecting width {fw}",
            c_rows.len()
        )));
    }
    let n = c_rows.len() / fw;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = gen.grid.width();
    let mut members = Vec::with_capacity(n);
    let mut sum = vec![0.0; width];
    let mut done = 0;
    while done < n {
        let rows = ENSEMBLE_CHUNK.min(n - done);
        let z = gaussian(&mut rng, rows, gen.noise_dim);
        let c = Tensor::matrix(rows, fw, c_rows[done * fw..(done + rows) * fw].to_vec());
        let y = if dropout_at_test {
            let mut mask_rng = ChaCha8Rng::seed_from_u64(rng.random());
            gen.forward_rows(
                z,
                c,
                &mut Dropout::On {
                    rate: gen.test_dropout,
                    rng: &mut mask_rng,
                },
            )?
        } else {
            gen.forward_rows(z, c, &mut Dropout::Off)?
        };
        for row in y.data.chunks_exact(width) {
            let clamped: Vec<f64> = row.iter().map(|v| v.max(0.0)).collect();
            for (s, v) in sum.iter_mut().zip(&clamped) {
                *s += v;
            }
            members.push(gen.norm.density_from_row(&gen.grid, &clamped));
        }
        done += rows;
    }
    let mean_row: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
    Ok(Ensemble {
        members,
        mean: gen.norm.density_from_row(&gen.grid, &mean_row),
    })
}

// ---------------------------------------------------------------- cWGAN

#[derive(Debug, Clone, PartialEq)]
pub struct CwganModel {
    pub generator: GeneratorModel,
    pub critic: Mlp,
    pub config: GanConfig,
}

/// Networks and losses from a cWGAN run on raw rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CwganRun {
    pub generator: Mlp,
    pub critic: Mlp,
    pub history: LossHistory,
}

/// Row-wise ε·real + (1 − ε)·fake, the points where the gradient penalty is
/// evaluated.
pub fn interpolate(real: &Tensor, fake: &Tensor, eps: &[f64]) -> Tensor {
    let width = real.cols();
    let hat = real
        .data
        .iter()
        .zip(&fake.data)
        .enumerate()
        .map(|(i, (r, f))| {
            let e = eps[i / width];
            e * r + (1.0 - e) * f
        })
        .collect();
    Tensor::matrix(real.rows(), width, hat)
}

/// Critic loss pieces for one batch, with the graph still alive.
struct CriticLoss {
    total: Var,
    penalty: Var,
    gap: Var,
}

#[allow(clippy::too_many_arguments)]
fn critic_loss(
    g: &mut Graph,
    critic: &Mlp,
    dp: &[Var],
    real: Tensor,
    fake: Tensor,
    c: Tensor,
    eps: &[f64],
    lambda: f64,
    rng: &mut ChaCha8Rng,
    rate: f64,
) -> Result<CriticLoss, NeuralError> {
    let hat = g.leaf(interpolate(&real, &fake, eps));
    let xr = g.constant(real);
    let xf = g.constant(fake);
    let c = g.constant(c);
    let mut drop = Dropout::On { rate, rng };
    let ir = g.concat_cols(xr, c);
    let d_real = critic.forward(g, dp, ir, &mut drop)?;
    let if_ = g.concat_cols(xf, c);
    let d_fake = critic.forward(g, dp, if_, &mut drop)?;
    let ih = g.concat_cols(hat, c);
    let d_hat = critic.forward(g, dp, ih, &mut drop)?;
    let s = g.sum(d_hat);
    let gx = g.grad(s, &[hat])?[0];
    let norms = row_norms(g, gx);
    let dev = g.add_scalar(norms, -1.0);
    let dev2 = g.mul(dev, dev);
    let penalty = g.mean(dev2);
    let mr = g.mean(d_real);
    let mf = g.mean(d_fake);
    let gap = g.sub(mr, mf);
    let neg = g.scale(gap, -1.0);
    let pen = g.scale(penalty, lambda);
    let total = g.add(neg, pen);
    Ok(CriticLoss { total, penalty, gap })
}

/// Trains a conditional WGAN with gradient penalty on rows `x` [n, xw]
/// conditioned on rows `c` [n, cw].
pub fn train_cwgan_on(
    x: &[f64],
    c: &[f64],
    x_width: usize,
    c_width: usize,
    gen_hidden: &[usize],
    critic_hidden: &[usize],
    cfg: &GanConfig,
) -> Result<CwganRun, NeuralError> {
    cfg.validate()?;
    if x_width == 0 || c_width == 0 || !x.len().is_multiple_of(x_width) || !c.len().is_multiple_of(c_width) {
        return Err(NeuralError::ShapeMismatch("row widths do not divide the data".into()));
    }
    let n = x.len() / x_width;
    if n == 0 {
        return Err(NeuralError::EmptyDatabase);
    }
    if c.len() / c_width != n {
        return Err(NeuralError::ShapeMismatch(format!(
            "{n} samples but {} conditions",
            c.len() / c_width
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let nz = cfg.cwgan_noise_dim;
    let gspec = MlpSpec::new(
        nz + c_width,
        gen_hidden,
        x_width,
        Activation::Relu,
        Activation::Identity,
        cfg.dropout,
    );
    let cspec = MlpSpec::new(
        x_width + c_width,
        critic_hidden,
        1,
        Activation::Relu,
        Activation::Identity,
        cfg.dropout,
    );
    let mut gen = Mlp::new(gspec, &mut rng)?;
    let mut critic = Mlp::new(cspec, &mut rng)?;
    let mut gopt = Adam::new(&gen.params, cfg.learning_rate, cfg.beta1);
    let mut copt = Adam::new(&critic.params, cfg.learning_rate, cfg.beta1);
    let mut history = LossHistory::default();
    let mut critic_steps = 0usize;

    for epoch in 0..cfg.epochs {
        let (mut sum_c, mut sum_p, mut sum_w, mut nc) = (0.0, 0.0, 0.0, 0usize);
        let (mut sum_g, mut ng) = (0.0, 0usize);
        for idx in shuffled_batches(&mut rng, n, cfg.batch_size) {
            let b = idx.len();
            let real = select(x, x_width, &idx);
            let cond = select(c, c_width, &idx);

            // Critic update.
            let z = gaussian(&mut rng, b, nz);
            let fake = {
                let mut g = Graph::new();
                let pv = bind(&mut g, &gen.params);
                let zc = g.constant(z);
                let cc = g.constant(cond.clone());
                let inp = g.concat_cols(zc, cc);
                let y = gen.forward(
                    &mut g,
                    &pv,
                    inp,
                    &mut Dropout::On {
                        rate: cfg.dropout,
                        rng: &mut rng,
                    },
                )?;
                g.value(y).clone()
            };
            let eps: Vec<f64> = (0..b).map(|_| rng.random::<f64>()).collect();
            let mut g = Graph::new();
            let dp = bind(&mut g, &critic.params);
            let loss = critic_loss(
                &mut g,
                &critic,
                &dp,
                real,
                fake,
                cond.clone(),
                &eps,
                cfg.lambda_gp,
                &mut rng,
                cfg.dropout,
            )?;
            let total = g.value(loss.total).item();
            check("critic", epoch, total)?;
            sum_c += total;
            sum_p += g.value(loss.penalty).item();
            sum_w += g.value(loss.gap).item();
            nc += 1;
            let grads = g.grad(loss.total, &dp)?;
            copt.update(&mut critic.params, &values(&g, &grads))?;
            critic_steps += 1;

            // Generator update every n_critic critic steps.
            if critic_steps.is_multiple_of(cfg.n_critic) {
                let z = gaussian(&mut rng, b, nz);
                let mut g = Graph::new();
                let gp = bind(&mut g, &gen.params);
                let dp = bind(&mut g, &critic.params);
                let zc = g.constant(z);
                let cc = g.constant(cond);
                let inp = g.concat_cols(zc, cc);
                let mut drop = Dropout::On {
                    rate: cfg.dropout,
                    rng: &mut rng,
                };
                let fake = gen.forward(&mut g, &gp, inp, &mut drop)?;
                let inp = g.concat_cols(fake, cc);
                let d = critic.forward(&mut g, &dp, inp, &mut drop)?;
                let m = g.mean(d);
                let loss = g.scale(m, -1.0);
                let value = g.value(loss).item();
                check("generator", epoch, value)?;
                sum_g += value;
                ng += 1;
                let grads = g.grad(loss, &gp)?;
                gopt.update(&mut gen.params, &values(&g, &grads))?;
            }
        }
        history.push(epoch, "critic", sum_c / nc as f64);
        history.push(epoch, "gradient_penalty", sum_p / nc as f64);
        history.push(epoch, "wasserstein", sum_w / nc as f64);
        if ng > 0 {
            history.push(epoch, "generator", sum_g / ng as f64);
        }
    }
    Ok(CwganRun {
        generator: gen,
        critic,
        history,
    })
}

/// cWGAN on a density/feature training set.
pub fn train_cwgan(set: &TrainingSet, cfg: &GanConfig) -> Result<(CwganModel, LossHistory), NeuralError> {
    if set.is_empty() {
        return Err(NeuralError::EmptyDatabase);
    }
    let conditioning = Conditioning::fit(&set.c, set.grid.feature_width());
    let run = train_cwgan_on(
        &set.x,
        &conditioning.apply(&set.c),
        set.grid.width(),
        set.grid.feature_width(),
        &cfg.hidden,
        &cfg.hidden,
        cfg,
    )?;
    let model = CwganModel {
        generator: GeneratorModel {
            mlp: run.generator,
            noise_dim: cfg.cwgan_noise_dim,
            norm: set.norm,
            grid: set.grid.clone(),
            conditioning,
            test_dropout: cfg.test_dropout,
        },
        critic: run.critic,
        config: cfg.clone(),
    };
    Ok((model, run.history))
}

fn critic_rows(model: &CwganModel, x: Tensor, c: Tensor) -> Result<Vec<f64>, NeuralError> {
    let mut g = Graph::new();
    let dp = bind(&mut g, &model.critic.params);
    let x = g.constant(x);
    let c = g.constant(Tensor::matrix(
        c.rows(),
        c.cols(),
        model.generator.conditioning.apply(&c.data),
    ));
    let inp = g.concat_cols(x, c);
    let d = model.critic.forward(&mut g, &dp, inp, &mut Dropout::Off)?;
    Ok(g.value(d).data.clone())
}

/// Raw critic value of one sequence under its features.
pub fn critic_score(model: &CwganModel, seq: &DensitySequence, features: &FeatureSet) -> Result<f64, NeuralError> {
    let grid = &model.generator.grid;
    let norm = &model.generator.norm;
    if seq.points != grid.points || seq.times.len() != grid.times_us.len() || features.len() != grid.times_us.len() {
        return Err(NeuralError::ShapeMismatch(format!(
            "sequence {}x{} with {} feature snapshots for a {}x{} critic",
            seq.times.len(),
            seq.points,
            features.len(),
            grid.times_us.len(),
            grid.points
        )));
    }
    let x = Tensor::matrix(1, grid.width(), norm.density_row(seq));
    let c = Tensor::matrix(1, grid.feature_width(), norm.feature_row(features));
    Ok(critic_rows(model, x, c)?[0])
}

/// Critic values for every row of a training set.
pub fn critic_scores(model: &CwganModel, set: &TrainingSet) -> Result<Vec<f64>, NeuralError> {
    if set.grid.width() != model.generator.grid.width() {
        return Err(NeuralError::ShapeMismatch(
            "training set grid differs from the critic".into(),
        ));
    }
    critic_rows(
        model,
        Tensor::matrix(set.len(), set.grid.width(), set.x.clone()),
        Tensor::matrix(set.len(), set.grid.feature_width(), set.c.clone()),
    )
}

/// Generator of either model family stored at `path`.
pub fn load_generator(path: &Path) -> Result<GeneratorModel, NeuralError> {
    match CganDfModel::load(path) {
        Ok(m) => Ok(m.generator),
        Err(_) => Ok(CwganModel::load(path)?.generator),
    }
}

impl CwganModel {
    fn header(&self) -> WeightsHeader {
        WeightsHeader {
            kind: "cwgan".into(),
            networks: vec![
                ("generator".into(), Architecture::Mlp(self.generator.mlp.spec.clone())),
                ("critic".into(), Architecture::Mlp(self.critic.spec.clone())),
            ],
            config: self.config.clone(),
            normalization: self.generator.norm,
            grid: self.generator.grid.clone(),
            conditioning: Some(self.generator.conditioning.clone()),
            scalars: vec![("noise_dim".into(), self.generator.noise_dim as f64)],
            shapes: self.tensors().iter().map(|t| t.shape.clone()).collect(),
        }
    }

    fn tensors(&self) -> Vec<&Tensor> {
        self.generator.mlp.params.iter().chain(&self.critic.params).collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        write_weights(path, &self.header(), &self.tensors())
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let (h, tensors) = read_weights(path)?;
        let (gspec, cspec) = two_mlps(&h, "cwgan")?;
        let k = 2 * (gspec.widths.len() - 1);
        let mut tensors = tensors;
        let critic_params = tensors.split_off(k.min(tensors.len()));
        Ok(Self {
            generator: GeneratorModel {
                mlp: Mlp::from_params(gspec, tensors)?,
                noise_dim: h.scalar("noise_dim")? as usize,
                norm: h.normalization,
                grid: h.grid.clone(),
                conditioning: stored_conditioning(&h)?,
                test_dropout: h.config.test_dropout,
            },
            critic: Mlp::from_params(cspec, critic_params)?,
            config: h.config,
        })
    }
}

fn stored_conditioning(h: &WeightsHeader) -> Result<Conditioning, NeuralError> {
    match &h.conditioning {
        Some(c) if c.width() == h.grid.feature_width() && c.scale.len() == c.width() => Ok(c.clone()),
        Some(_) => Err(NeuralError::Parse("conditioning width differs from the grid".into())),
        None => Ok(Conditioning::identity(h.grid.feature_width())),
    }
}

fn two_mlps(h: &WeightsHeader, kind: &str) -> Result<(MlpSpec, MlpSpec), NeuralError> {
    if h.kind != kind {
        return Err(NeuralError::Parse(format!("expected {kind} weights, found {}", h.kind)));
    }
    match h.networks.as_slice() {
        [(_, Architecture::Mlp(a)), (_, Architecture::Mlp(b))] => Ok((a.clone(), b.clone())),
        _ => Err(NeuralError::Parse(format!("{kind} weights need two MLPs"))),
    }
}

// ---------------------------------------------------------------- F̃

/// Frozen convolutional surrogate of the feature extractor.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureModel {
    pub net: ConvNet,
    pub norm: Normalization,
    pub grid: GridMeta,
    pub config: GanConfig,
}

impl FeatureModel {
    /// Normalized predictions for rows `x` [b, width].
    pub fn predict_rows(&self, x: Tensor) -> Result<Tensor, NeuralError> {
        let mut g = Graph::new();
        let pv = bind(&mut g, &self.net.params);
        let x = g.constant(x);
        let y = self.net.forward(&mut g, &pv, x)?;
        Ok(g.value(y).clone())
    }

    pub fn predict(&self, seq: &DensitySequence) -> Result<FeatureSet, NeuralError> {
        if seq.points != self.grid.points || seq.times.len() != self.grid.times_us.len() {
            return Err(NeuralError::ShapeMismatch(
                "sequence grid differs from the feature net".into(),
            ));
        }
        let y = self.predict_rows(Tensor::matrix(1, self.grid.width(), self.norm.density_row(seq)))?;
        Ok(self.norm.features_from_row(&self.grid, &y.data))
    }

    /// Root-mean-square feature error over a training set [cm].
    pub fn rmse_cm(&self, set: &TrainingSet) -> Result<f64, NeuralError> {
        let y = self.predict_rows(Tensor::matrix(set.len(), set.grid.width(), set.x.clone()))?;
        let ss: f64 = y.data.iter().zip(&set.c).map(|(a, b)| (a - b).powi(2)).sum();
        Ok((ss / y.len() as f64).sqrt() * self.norm.r_domain_cm)
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        let header = WeightsHeader {
            kind: "feature_net".into(),
            networks: vec![("feature_net".into(), Architecture::Conv(self.net.spec.clone()))],
            config: self.config.clone(),
            normalization: self.norm,
            grid: self.grid.clone(),
            conditioning: None,
            scalars: vec![],
            shapes: self.net.params.iter().map(|t| t.shape.clone()).collect(),
        };
        write_weights(path, &header, &self.net.params.iter().collect::<Vec<_>>())
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let (h, tensors) = read_weights(path)?;
        let spec = match (h.kind.as_str(), h.networks.as_slice()) {
            ("feature_net", [(_, Architecture::Conv(s))]) => s.clone(),
            _ => {
                return Err(NeuralError::Parse(format!(
                    "expected feature_net weights, found {}",
                    h.kind
                )))
            }
        };
        Ok(Self {
            net: ConvNet::from_params(spec, tensors)?,
            norm: h.normalization,
            grid: h.grid,
            config: h.config,
        })
    }
}

/// Fits the surrogate by mean squared error on (density, feature) pairs.
pub fn pretrain_feature_net(set: &TrainingSet, cfg: &GanConfig) -> Result<(FeatureModel, LossHistory), NeuralError> {
    cfg.validate()?;
    if set.is_empty() {
        return Err(NeuralError::EmptyDatabase);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let spec = ConvSpec {
        input_len: set.grid.points,
        input_channels: set.grid.times_us.len(),
        outputs: set.grid.feature_width(),
        ..ConvSpec::default()
    };
    let mut net = ConvNet::new(spec, &mut rng)?;
    // Start the head at the mean target so training only has to learn the
    // variation across records.
    let (xw, cw) = (set.grid.width(), set.grid.feature_width());
    let head = net.params.last_mut().unwrap();
    for j in 0..cw {
        let mean = (0..set.len()).map(|k| set.c[k * cw + j]).sum::<f64>() / set.len() as f64;
        head.data[j] = mean.clamp(-0.99, 0.99).atanh();
    }
    let mut opt = Adam::new(&net.params, cfg.learning_rate, cfg.beta1);
    let mut history = LossHistory::default();
    for epoch in 0..cfg.feature_epochs {
        let (mut sum, mut count) = (0.0, 0usize);
        for idx in shuffled_batches(&mut rng, set.len(), cfg.batch_size) {
            let mut g = Graph::new();
            let pv = bind(&mut g, &net.params);
            let x = g.constant(select(&set.x, xw, &idx));
            let c = g.constant(select(&set.c, cw, &idx));
            let y = net.forward(&mut g, &pv, x)?;
            let d = g.sub(y, c);
            let d2 = g.mul(d, d);
            let loss = g.mean(d2);
            let value = g.value(loss).item();
            check("mse", epoch, value)?;
            sum += value * idx.len() as f64;
            count += idx.len();
            let grads = g.grad(loss, &pv)?;
            opt.update(&mut net.params, &values(&g, &grads))?;
        }
        history.push(epoch, "mse", sum / count as f64);
    }
    let model = FeatureModel {
        net,
        norm: set.norm,
        grid: set.grid.clone(),
        config: cfg.clone(),
    };
    Ok((model, history))
}

// ---------------------------------------------------------------- cGAN-DF

#[derive(Debug, Clone, PartialEq)]
pub struct CganDfModel {
    pub generator: GeneratorModel,
    pub discriminator: Mlp,
    /// Known shell mass [g].
    pub known_mass: f64,
    pub config: GanConfig,
}

/// Generator loss terms for one batch.
struct GeneratorLoss {
    total: Var,
    adversarial: Var,
    l1: Var,
    feature: Var,
    mass: Var,
}

#[allow(clippy::too_many_arguments)]
fn generator_loss(
    g: &mut Graph,
    gen: &Mlp,
    gp: &[Var],
    disc: &Mlp,
    dp: &[Var],
    fnet: &ConvNet,
    fp: &[Var],
    mass_op: Var,
    z: Tensor,
    real: Tensor,
    cond: Tensor,
    target: Tensor,
    cfg: &GanConfig,
    rng: &mut ChaCha8Rng,
) -> Result<GeneratorLoss, NeuralError> {
    let zc = g.constant(z);
    let xr = g.constant(real);
    let cc = g.constant(cond);
    let tc = g.constant(target);
    let mut drop = Dropout::On { rate: cfg.dropout, rng };
    let inp = g.concat_cols(zc, cc);
    let fake = gen.forward(g, gp, inp, &mut drop)?;
    let dinp = g.concat_cols(fake, cc);
    let d = disc.forward(g, dp, dinp, &mut drop)?;

    // mean log(1 − σ(d)) = −mean softplus(d)
    let sp = g.softplus(d);
    let msp = g.mean(sp);
    let adversarial = g.scale(msp, -1.0);

    let diff = g.sub(fake, xr);
    let ad = g.abs(diff);
    let l1 = g.mean(ad);

    let f = fnet.forward(g, fp, fake)?;
    let fd = g.sub(f, tc);
    let fnorm = row_norms(g, fd);
    let feature = g.mean(fnorm);

    let m = g.matmul(fake, mass_op)?;
    let md = g.add_scalar(m, -1.0);
    let mnorm = row_norms(g, md);
    let mass = g.mean(mnorm);

    let t1 = g.scale(adversarial, cfg.lambda_d);
    let t2 = g.scale(l1, cfg.lambda_l1);
    let t3 = g.scale(feature, cfg.lambda_feature);
    let t4 = g.scale(mass, cfg.lambda_mass);
    let s = g.add(t1, t2);
    let s = g.add(s, t3);
    let total = g.add(s, t4);
    Ok(GeneratorLoss {
        total,
        adversarial,
        l1,
        feature,
        mass,
    })
}

/// Trains the data-fidelity cGAN with the surrogate `fnet` held fixed.
pub fn train_cgan_df(
    set: &TrainingSet,
    fnet: &FeatureModel,
    known_mass: f64,
    cfg: &GanConfig,
) -> Result<(CganDfModel, LossHistory), NeuralError> {
    cfg.validate()?;
    if set.is_empty() {
        return Err(NeuralError::EmptyDatabase);
    }
    if fnet.grid != set.grid {
        return Err(NeuralError::ShapeMismatch(
            "feature net grid differs from the training set".into(),
        ));
    }
    if !(known_mass > 0.0) {
        return Err(NeuralError::InvalidConfig("known mass must be positive".into()));
    }
    let (xw, cw) = (set.grid.width(), set.grid.feature_width());
    let nt = set.grid.times_us.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut gen = Mlp::new(mlp_header_spec(cfg.noise_dim + cw, xw, cfg), &mut rng)?;
    let mut disc = Mlp::new(mlp_header_spec(xw + cw, 1, cfg), &mut rng)?;
    let mut gopt = Adam::new(&gen.params, cfg.learning_rate, cfg.beta1);
    let mut dopt = Adam::new(&disc.params, cfg.learning_rate, cfg.beta1);
    let mass_op = Tensor::matrix(xw, nt, set.grid.mass_operator(set.norm.rho_ref, known_mass));
    let conditioning = Conditioning::fit(&set.c, cw);
    let c_in = conditioning.apply(&set.c);
    let mut history = LossHistory::default();

    for epoch in 0..cfg.epochs {
        let mut sums = [0.0; 6];
        let mut count = 0usize;
        for idx in shuffled_batches(&mut rng, set.len(), cfg.batch_size) {
            let b = idx.len();
            let real = select(&set.x, xw, &idx);
            let cond = select(&c_in, cw, &idx);

            // Discriminator: BCE with real labelled 1 and fake labelled 0.
            let z = gaussian(&mut rng, b, cfg.noise_dim);
            let fake = {
                let mut g = Graph::new();
                let pv = bind(&mut g, &gen.params);
                let zc = g.constant(z);
                let cc = g.constant(cond.clone());
                let inp = g.concat_cols(zc, cc);
                let y = gen.forward(
                    &mut g,
                    &pv,
                    inp,
                    &mut Dropout::On {
                        rate: cfg.dropout,
                        rng: &mut rng,
                    },
                )?;
                g.value(y).clone()
            };
            let mut g = Graph::new();
            let dp = bind(&mut g, &disc.params);
            let xr = g.constant(real.clone());
            let xf = g.constant(fake);
            let cc = g.constant(cond.clone());
            let mut drop = Dropout::On {
                rate: cfg.dropout,
                rng: &mut rng,
            };
            let ir = g.concat_cols(xr, cc);
            let dr = disc.forward(&mut g, &dp, ir, &mut drop)?;
            let if_ = g.concat_cols(xf, cc);
            let df = disc.forward(&mut g, &dp, if_, &mut drop)?;
            let ndr = g.scale(dr, -1.0);
            let sr = g.softplus(ndr);
            let sf = g.softplus(df);
            let lr = g.mean(sr);
            let lf = g.mean(sf);
            let dloss = g.add(lr, lf);
            let dv = g.value(dloss).item();
            check("discriminator", epoch, dv)?;
            let grads = g.grad(dloss, &dp)?;
            dopt.update(&mut disc.params, &values(&g, &grads))?;

            // Generator: composite loss through the frozen surrogate.
            let z = gaussian(&mut rng, b, cfg.noise_dim);
            let mut g = Graph::new();
            let gp = bind(&mut g, &gen.params);
            let dp = bind(&mut g, &disc.params);
            let fp = bind(&mut g, &fnet.net.params);
            let mo = g.constant(mass_op.clone());
            let loss = generator_loss(
                &mut g,
                &gen,
                &gp,
                &disc,
                &dp,
                &fnet.net,
                &fp,
                mo,
                z,
                real,
                cond,
                select(&set.c, cw, &idx),
                cfg,
                &mut rng,
            )?;
            let gv = g.value(loss.total).item();
            check("generator", epoch, gv)?;
            let terms = [
                dv,
                g.value(loss.adversarial).item(),
                g.value(loss.l1).item(),
                g.value(loss.feature).item(),
                g.value(loss.mass).item(),
                gv,
            ];
            for (s, t) in sums.iter_mut().zip(terms) {
                *s += t * b as f64;
            }
            count += b;
            let grads = g.grad(loss.total, &gp)?;
            gopt.update(&mut gen.params, &values(&g, &grads))?;
        }
        for (name, s) in ["discriminator", "adversarial", "l1", "feature", "mass", "generator"]
            .iter()
            .zip(sums)
        {
            history.push(epoch, name, s / count as f64);
        }
    }
    let model = CganDfModel {
        generator: GeneratorModel {
            mlp: gen,
            noise_dim: cfg.noise_dim,
            norm: set.norm,
            grid: set.grid.clone(),
            conditioning,
            test_dropout: cfg.test_dropout,
        },
        discriminator: disc,
        known_mass,
        config: cfg.clone(),
    };
    Ok((model, history))
}

impl CganDfModel {
    fn tensors(&self) -> Vec<&Tensor> {
        self.generator
            .mlp
            .params
            .iter()
            .chain(&self.discriminator.params)
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        let header = WeightsHeader {
            kind: "cgan_df".into(),
            networks: vec![
                ("generator".into(), Architecture::Mlp(self.generator.mlp.spec.clone())),
                (
                    "discriminator".into(),
                    Architecture::Mlp(self.discriminator.spec.clone()),
                ),
            ],
            config: self.config.clone(),
            normalization: self.generator.norm,
            grid: self.generator.grid.clone(),
            conditioning: Some(self.generator.conditioning.clone()),
            scalars: vec![
                ("noise_dim".into(), self.generator.noise_dim as f64),
                ("known_mass".into(), self.known_mass),
            ],
            shapes: self.tensors().iter().map(|t| t.shape.clone()).collect(),
        };
        write_weights(path, &header, &self.tensors())
    }

    pub fn load(path: &Path) -> Result<Self, NeuralError> {
        let (h, mut tensors) = read_weights(path)?;
        let (gspec, dspec) = two_mlps(&h, "cgan_df")?;
        let k = 2 * (gspec.widths.len() - 1);
        let disc = tensors.split_off(k.min(tensors.len()));
        Ok(Self {
            generator: GeneratorModel {
                mlp: Mlp::from_params(gspec, tensors)?,
                noise_dim: h.scalar("noise_dim")? as usize,
                norm: h.normalization,
                grid: h.grid.clone(),
                conditioning: stored_conditioning(&h)?,
                test_dropout: h.config.test_dropout,
            },
            discriminator: Mlp::from_params(dspec, disc)?,
            known_mass: h.scalar("known_mass")?,
            config: h.config,
        })
    }
}
