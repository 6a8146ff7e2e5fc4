use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::NeuralError;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Plain,
    /// Q(a) = V + A(a) - mean(A).
    Dueling,
}

/// How noisy layers treat their noise during a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseMode {
    /// Use the current noise draw.
    Frozen,
    /// Draw fresh noise, then use it.
    Resample,
    /// Ignore noise; noisy layers act as their mean weights.
    Zero,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
    pub output_dim: usize,
    pub head: Head,
    /// Use factorized-noise layers everywhere except the input layer.
    pub noisy: bool,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden: Vec<usize>, output_dim: usize, head: Head, noisy: bool) -> Self {
        Self {
            input_dim,
            hidden,
            output_dim,
            head,
            noisy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    Dense,
    Noisy,
}

/// A layer's shape and its offsets into the flat parameter vector.
///
/// Weights are row-major `n_out x n_in`. Noisy layers additionally own
/// `sigma_w` and `sigma_b` blocks of the same shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub n_in: usize,
    pub n_out: usize,
    pub w: usize,
    pub b: usize,
    pub sigma_w: usize,
    pub sigma_b: usize,
}

impl LayerSpec {
    fn n_params(&self) -> usize {
        let base = self.n_in * self.n_out + self.n_out;
        match self.kind {
            LayerKind::Dense => base,
            LayerKind::Noisy => 2 * base,
        }
    }
}

/// Current factorized noise of one layer, already passed through `sign(x) sqrt(|x|)`.
#[derive(Debug, Clone, Default, PartialEq)]
struct LayerNoise {
    eps_in: Vec<f64>,
    eps_out: Vec<f64>,
}

/// One regression sample: move `Q(input)[action]` towards `target`.
#[derive(Debug, Clone, Copy)]
pub struct TrainingSample<'a> {
    pub input: &'a [f64],
    pub action: usize,
    pub target: f64,
    pub weight: f64,
}

#[derive(Debug, Clone)]
pub struct Backward {
    /// Weighted mean-squared error over the batch.
    pub loss: f64,
    pub grads: Vec<f64>,
    /// `Q(input)[action] - target` per sample.
    pub td_errors: Vec<f64>,
}

/// Intermediate values of a single forward pass.
struct Trace {
    /// Input followed by each trunk layer's post-ReLU output.
    acts: Vec<Vec<f64>>,
    /// Pre-activation of each trunk layer.
    pre: Vec<Vec<f64>>,
    value: Option<f64>,
    q: Vec<f64>,
}

/// Feed-forward Q network: ReLU trunk followed by a plain or dueling head.
#[derive(Debug, Clone)]
pub struct Network {
    arch: Architecture,
    /// Trunk layers, then the head: `[out]` for plain, `[value, advantage]` for dueling.
    layers: Vec<LayerSpec>,
    params: Vec<f64>,
    noise: Vec<LayerNoise>,
    noise_rng: ChaCha8Rng,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NetworkCheckpoint {
    pub version: u32,
    pub architecture: Architecture,
    pub params: Vec<f64>,
}

impl Network {
    /// Build a network with uniform `+/- 1/sqrt(fan_in)` weights and, for noisy
    /// layers, noise scales of `0.5/sqrt(fan_in)`.
    pub fn new(arch: Architecture, seed: u64) -> Self {
        let layers = layout(&arch);
        let n_params = layers.last().map_or(0, |l| end_offset(l));
        let mut params = vec![0.0; n_params];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in &layers {
            let bound = 1.0 / (l.n_in as f64).sqrt();
            for p in &mut params[l.w..l.w + l.n_in * l.n_out] {
                *p = rng.random_range(-bound..bound);
            }
            for p in &mut params[l.b..l.b + l.n_out] {
                *p = rng.random_range(-bound..bound);
            }
            if l.kind == LayerKind::Noisy {
                let sigma = 0.5 / (l.n_in as f64).sqrt();
                params[l.sigma_w..l.sigma_w + l.n_in * l.n_out].fill(sigma);
                params[l.sigma_b..l.sigma_b + l.n_out].fill(sigma);
            }
        }
        let mut net = Self::from_parts(arch, layers, params, seed);
        net.resample_noise();
        net
    }

    fn from_parts(arch: Architecture, layers: Vec<LayerSpec>, params: Vec<f64>, seed: u64) -> Self {
        let noise = layers
            .iter()
            .map(|l| match l.kind {
                LayerKind::Dense => LayerNoise::default(),
                LayerKind::Noisy => LayerNoise {
                    eps_in: vec![0.0; l.n_in],
                    eps_out: vec![0.0; l.n_out],
                },
            })
            .collect();
        Self {
            arch,
            layers,
            params,
            noise,
            noise_rng: ChaCha8Rng::seed_from_u64(seed ^ 0x6e6f_6973_655f_7267),
        }
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn has_noise(&self) -> bool {
        self.layers.iter().any(|l| l.kind == LayerKind::Noisy)
    }

    /// Reseed the noise stream; subsequent draws are a function of `seed` only.
    pub fn seed_noise(&mut self, seed: u64) {
        self.noise_rng = ChaCha8Rng::seed_from_u64(seed);
    }

    /// Draw fresh factorized Gaussian noise for every noisy layer.
    pub fn resample_noise(&mut self) {
        let rng = &mut self.noise_rng;
        for noise in &mut self.noise {
            for e in noise.eps_in.iter_mut().chain(noise.eps_out.iter_mut()) {
                let x: f64 = rng.sample(StandardNormal);
                *e = x.signum() * x.abs().sqrt();
            }
        }
    }

    pub fn forward(&mut self, input: &[f64], mode: NoiseMode) -> Result<Vec<f64>, NeuralError> {
        if mode == NoiseMode::Resample {
            self.check_input(input)?;
            self.resample_noise();
        }
        self.infer(input, mode != NoiseMode::Zero)
    }

    /// Forward pass without touching the noise state.
    pub fn infer(&self, input: &[f64], use_noise: bool) -> Result<Vec<f64>, NeuralError> {
        self.check_input(input)?;
        Ok(self.trace(input, use_noise).q)
    }

    /// State value of a dueling network (`None` for a plain head).
    pub fn state_value(&self, input: &[f64], use_noise: bool) -> Result<Option<f64>, NeuralError> {
        self.check_input(input)?;
        Ok(self.trace(input, use_noise).value)
    }

    fn check_input(&self, input: &[f64]) -> Result<(), NeuralError> {
        if input.len() != self.arch.input_dim {
            return Err(NeuralError::DimensionMismatch {
                expected: self.arch.input_dim,
                got: input.len(),
            });
        }
        Ok(())
    }

    fn n_trunk(&self) -> usize {
        self.arch.hidden.len()
    }

    fn layer_forward(&self, li: usize, x: &[f64], use_noise: bool) -> Vec<f64> {
        let l = &self.layers[li];
        let w = &self.params[l.w..l.w + l.n_in * l.n_out];
        let b = &self.params[l.b..l.b + l.n_out];
        let mut y: Vec<f64> = w
            .chunks_exact(l.n_in)
            .zip(b)
            .map(|(row, &bj)| dot(row, x) + bj)
            .collect();
        if use_noise && l.kind == LayerKind::Noisy {
            let noise = &self.noise[li];
            let sw = &self.params[l.sigma_w..l.sigma_w + l.n_in * l.n_out];
            let sb = &self.params[l.sigma_b..l.sigma_b + l.n_out];
            let scaled: Vec<f64> = x.iter().zip(&noise.eps_in).map(|(xi, ei)| xi * ei).collect();
            for (j, yj) in y.iter_mut().enumerate() {
                let row = &sw[j * l.n_in..(j + 1) * l.n_in];
                *yj += noise.eps_out[j] * (dot(row, &scaled) + sb[j]);
            }
        }
        y
    }

    fn trace(&self, input: &[f64], use_noise: bool) -> Trace {
        let n_trunk = self.n_trunk();
        let mut acts = Vec::with_capacity(n_trunk + 1);
        let mut pre = Vec::with_capacity(n_trunk);
        acts.push(input.to_vec());
        for li in 0..n_trunk {
            let z = self.layer_forward(li, &acts[li], use_noise);
            acts.push(z.iter().map(|&v| v.max(0.0)).collect());
            pre.push(z);
        }
        let h = &acts[n_trunk];
        match self.arch.head {
            Head::Plain => {
                let q = self.layer_forward(n_trunk, h, use_noise);
                Trace {
                    acts,
                    pre,
                    value: None,
                    q,
                }
            }
            Head::Dueling => {
                let v = self.layer_forward(n_trunk, h, use_noise)[0];
                let a = self.layer_forward(n_trunk + 1, h, use_noise);
                let mean = a.iter().sum::<f64>() / a.len() as f64;
                let q = a.iter().map(|ai| v + (ai - mean)).collect();
                Trace {
                    acts,
                    pre,
                    value: Some(v),
                    q,
                }
            }
        }
    }

    /// Accumulate parameter gradients of one layer given `dy`, returning `dL/dx`.
    fn layer_backward(
        &self,
        li: usize,
        x: &[f64],
        dy: &[f64],
        use_noise: bool,
        grads: &mut [f64],
        need_dx: bool,
    ) -> Vec<f64> {
        let l = &self.layers[li];
        let (n_in, n_out) = (l.n_in, l.n_out);
        let mut dx = if need_dx { vec![0.0; n_in] } else { Vec::new() };
        let noisy = use_noise && l.kind == LayerKind::Noisy;
        let scaled: Vec<f64> = if noisy {
            x.iter().zip(&self.noise[li].eps_in).map(|(xi, ei)| xi * ei).collect()
        } else {
            Vec::new()
        };
        for j in 0..n_out {
            let g = dy[j];
            if g == 0.0 {
                continue;
            }
            let row = l.w + j * n_in;
            axpy(g, x, &mut grads[row..row + n_in]);
            grads[l.b + j] += g;
            if need_dx {
                axpy(g, &self.params[row..row + n_in], &mut dx);
            }
            if noisy {
                let eo = self.noise[li].eps_out[j];
                let srow = l.sigma_w + j * n_in;
                axpy(g * eo, &scaled, &mut grads[srow..srow + n_in]);
                grads[l.sigma_b + j] += g * eo;
                if need_dx {
                    let ein = &self.noise[li].eps_in;
                    let sw = &self.params[srow..srow + n_in];
                    for ((d, s), e) in dx.iter_mut().zip(sw).zip(ein) {
                        *d += g * eo * s * e;
                    }
                }
            }
        }
        dx
    }

    /// Gradients of the weighted mean-squared error on the taken actions.
    ///
    /// Uses the current (frozen) noise draw of noisy layers.
    pub fn backward(&self, batch: &[TrainingSample<'_>]) -> Result<Backward, NeuralError> {
        self.backward_with(batch, true)
    }

    pub fn backward_with(
        &self,
        batch: &[TrainingSample<'_>],
        use_noise: bool,
    ) -> Result<Backward, NeuralError> {
        if batch.is_empty() {
            return Err(NeuralError::EmptyBatch);
        }
        let mut grads = vec![0.0; self.params.len()];
        let mut loss = 0.0;
        let mut td_errors = Vec::with_capacity(batch.len());
        let scale = 1.0 / batch.len() as f64;
        let n_trunk = self.n_trunk();
        for s in batch {
            self.check_input(s.input)?;
            if s.action >= self.arch.output_dim {
                return Err(NeuralError::DimensionMismatch {
                    expected: self.arch.output_dim,
                    got: s.action,
                });
            }
            let tr = self.trace(s.input, use_noise);
            let err = tr.q[s.action] - s.target;
            td_errors.push(err);
            loss += scale * s.weight * err * err;
            if s.weight == 0.0 {
                continue;
            }
            let mut dq = vec![0.0; self.arch.output_dim];
            dq[s.action] = 2.0 * scale * s.weight * err;

            let h = &tr.acts[n_trunk];
            let need_dx = n_trunk > 0;
            let mut dh = match self.arch.head {
                Head::Plain => self.layer_backward(n_trunk, h, &dq, use_noise, &mut grads, need_dx),
                Head::Dueling => {
                    let dv = dq.iter().sum::<f64>();
                    let mean = dv / dq.len() as f64;
                    let da: Vec<f64> = dq.iter().map(|d| d - mean).collect();
                    let mut dh = self.layer_backward(n_trunk, h, &[dv], use_noise, &mut grads, need_dx);
                    let dh_a = self.layer_backward(n_trunk + 1, h, &da, use_noise, &mut grads, need_dx);
                    for (a, b) in dh.iter_mut().zip(dh_a) {
                        *a += b;
                    }
                    dh
                }
            };
            for li in (0..n_trunk).rev() {
                for (d, z) in dh.iter_mut().zip(&tr.pre[li]) {
                    if *z <= 0.0 {
                        *d = 0.0;
                    }
                }
                dh = self.layer_backward(li, &tr.acts[li], &dh, use_noise, &mut grads, li > 0);
            }
        }
        Ok(Backward {
            loss,
            grads,
            td_errors,
        })
    }

    /// Copy all parameters from `source`; noise draws are left alone.
    pub fn copy_parameters_from(&mut self, source: &Network) -> Result<(), NeuralError> {
        if self.arch != source.arch {
            return Err(NeuralError::ArchitectureMismatch(format!(
                "{:?} vs {:?}",
                source.arch, self.arch
            )));
        }
        self.params.copy_from_slice(&source.params);
        Ok(())
    }

    pub fn to_checkpoint(&self) -> NetworkCheckpoint {
        NetworkCheckpoint {
            version: CHECKPOINT_VERSION,
            architecture: self.arch.clone(),
            params: self.params.clone(),
        }
    }

    pub fn from_checkpoint(ckpt: NetworkCheckpoint, noise_seed: u64) -> Result<Self, NeuralError> {
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(NeuralError::Checkpoint(format!(
                "unsupported checkpoint version {}",
                ckpt.version
            )));
        }
        let layers = layout(&ckpt.architecture);
        let expected = layers.last().map_or(0, end_offset);
        if ckpt.params.len() != expected {
            return Err(NeuralError::Checkpoint(format!(
                "expected {expected} parameters, found {}",
                ckpt.params.len()
            )));
        }
        if ckpt.params.iter().any(|p| !p.is_finite()) {
            return Err(NeuralError::NonFinite("checkpoint parameters"));
        }
        let mut net = Self::from_parts(ckpt.architecture, layers, ckpt.params, noise_seed);
        net.resample_noise();
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<(), NeuralError> {
        let text = serde_json::to_string(&self.to_checkpoint())
            .map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        std::fs::write(path, text)
            .map_err(|e| NeuralError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path, noise_seed: u64) -> Result<Self, NeuralError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| NeuralError::Checkpoint(format!("{}: {e}", path.display())))?;
        let ckpt: NetworkCheckpoint =
            serde_json::from_str(&text).map_err(|e| NeuralError::Checkpoint(e.to_string()))?;
        Self::from_checkpoint(ckpt, noise_seed)
    }
}

fn end_offset(l: &LayerSpec) -> usize {
    match l.kind {
        LayerKind::Dense => l.b + l.n_out,
        LayerKind::Noisy => l.sigma_b + l.n_out,
    }
}

fn layout(arch: &Architecture) -> Vec<LayerSpec> {
    let mut shapes = Vec::new();
    let mut n_in = arch.input_dim;
    for &h in &arch.hidden {
        shapes.push((n_in, h));
        n_in = h;
    }
    match arch.head {
        Head::Plain => shapes.push((n_in, arch.output_dim)),
        Head::Dueling => {
            shapes.push((n_in, 1));
            shapes.push((n_in, arch.output_dim));
        }
    }
    let has_trunk = !arch.hidden.is_empty();
    let mut offset = 0;
    shapes
        .into_iter()
        .enumerate()
        .map(|(i, (n_in, n_out))| {
            let noisy = arch.noisy && !(has_trunk && i == 0);
            let kind = if noisy { LayerKind::Noisy } else { LayerKind::Dense };
            let w = offset;
            let b = w + n_in * n_out;
            let (sigma_w, sigma_b) = if noisy {
                (b + n_out, b + n_out + n_in * n_out)
            } else {
                (0, 0)
            };
            let spec = LayerSpec {
                kind,
                n_in,
                n_out,
                w,
                b,
                sigma_w,
                sigma_b,
            };
            offset += spec.n_params();
            spec
        })
        .collect()
}

/// Rescale `grads` so their global L2 norm is at most `max_norm`. Returns the original norm.
pub fn clip_global_norm(grads: &mut [f64], max_norm: f64) -> f64 {
    let norm = grads.iter().map(|g| g * g).sum::<f64>().sqrt();
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        grads.iter_mut().for_each(|g| *g *= s);
    }
    norm
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
