use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::activation::ActivationKind;
use crate::config::{EpochOrder, InputSourceSpec, TrainConfig};
use crate::error::{Error, Result};
use crate::network::NetworkParams;
use crate::rng::{rng_from, stream, SimRng};

/// IDX magic for unsigned-byte data of rank 3 (an image stack).
const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;

/// Training inputs for [`super::run`]. Randomness (Gaussian draws, epoch
/// shuffles) comes from streams derived from the run's seed.
#[derive(Debug, Clone, PartialEq)]
pub enum InputSource {
    GaussianStream,
    /// Row-major inputs with labels fixed at creation.
    FixedSet {
        inputs: Vec<f64>,
        labels: Vec<f64>,
        order: EpochOrder,
    },
    /// Row-major standardised images, labelled afresh by the teacher.
    IdxImages {
        images: Vec<f64>,
        dim: usize,
        order: EpochOrder,
    },
}

impl InputSource {
    /// `samples` Gaussian inputs labelled once by `teacher` with noise `sigma`.
    pub fn fixed_set(
        teacher: &NetworkParams,
        act: ActivationKind,
        sigma: f64,
        samples: usize,
        order: EpochOrder,
        rng: &mut SimRng,
    ) -> Result<Self> {
        if samples == 0 {
            return Err(Error::InvalidArgument(
                "a fixed training set needs at least one sample".into(),
            ));
        }
        let n = teacher.input_dim();
        let mut inputs = vec![0.0; samples * n];
        let mut labels = Vec::with_capacity(samples);
        for x in inputs.chunks_exact_mut(n) {
            for xi in x.iter_mut() {
                *xi = rng.sample(StandardNormal);
            }
            let noise: f64 = rng.sample(StandardNormal);
            labels.push(teacher.forward_unchecked(x, act) + sigma * noise);
        }
        Ok(InputSource::FixedSet {
            inputs,
            labels,
            order,
        })
    }

    /// Input dimension, if fixed by the data.
    /// The source described by `cfg.input_source`. Fixed sets are drawn from
    /// the dataset stream of `cfg.seed`.
    pub fn for_config(cfg: &TrainConfig, teacher: &NetworkParams) -> Result<Self> {
        match &cfg.input_source {
            InputSourceSpec::GaussianStream => Ok(InputSource::GaussianStream),
            InputSourceSpec::FixedSet {
                samples_per_dim,
                order,
            } => {
                let mut rng = rng_from(cfg.seed, stream::DATASET);
                let samples = samples_per_dim * cfg.input_dim;
                Self::fixed_set(
                    teacher,
                    cfg.activation,
                    cfg.sigma,
                    samples,
                    *order,
                    &mut rng,
                )
            }
            InputSourceSpec::IdxFile { path, order } => load_idx(path, *order),
        }
    }

    pub fn input_dim(&self) -> Option<usize> {
        match self {
            InputSource::GaussianStream => None,
            InputSource::FixedSet { inputs, labels, .. } => {
                Some(inputs.len() / labels.len().max(1))
            }
            InputSource::IdxImages { dim, .. } => Some(*dim),
        }
    }

    /// Number of stored samples, if finite.
    pub fn len(&self) -> Option<usize> {
        match self {
            InputSource::GaussianStream => None,
            InputSource::FixedSet { labels, .. } => Some(labels.len()),
            InputSource::IdxImages { images, dim, .. } => Some(images.len() / dim),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == Some(0)
    }
}

/// Iteration state over an [`InputSource`].
pub(crate) struct Feeder<'a> {
    source: &'a InputSource,
    rng: SimRng,
    perm: Vec<usize>,
    cursor: usize,
}

impl<'a> Feeder<'a> {
    pub(crate) fn new(source: &'a InputSource, rng: SimRng) -> Self {
        let perm = (0..source.len().unwrap_or(0)).collect();
        let mut feeder = Self {
            source,
            rng,
            perm,
            cursor: 0,
        };
        feeder.start_epoch();
        feeder
    }

    fn start_epoch(&mut self) {
        self.cursor = 0;
        let order = match self.source {
            InputSource::FixedSet { order, .. } | InputSource::IdxImages { order, .. } => *order,
            InputSource::GaussianStream => return,
        };
        if order == EpochOrder::Shuffled {
            self.perm.shuffle(&mut self.rng);
        }
    }

    fn next_index(&mut self) -> usize {
        if self.cursor == self.perm.len() {
            self.start_epoch();
        }
        let i = self.perm[self.cursor];
        self.cursor += 1;
        i
    }

    /// Fills `x` with the next input; returns its stored label, if any.
    #[inline]
    pub(crate) fn next_into(&mut self, x: &mut [f64]) -> Option<f64> {
        match self.source {
            InputSource::GaussianStream => {
                for xi in x.iter_mut() {
                    *xi = self.rng.sample(StandardNormal);
                }
                None
            }
            InputSource::FixedSet { inputs, labels, .. } => {
                let i = self.next_index();
                let n = x.len();
                x.copy_from_slice(&inputs[i * n..(i + 1) * n]);
                Some(labels[i])
            }
            InputSource::IdxImages { images, dim, .. } => {
                let i = self.next_index();
                x.copy_from_slice(&images[i * dim..(i + 1) * dim]);
                None
            }
        }
    }
}

/// Reads an IDX image file and standardises it (see [`parse_idx_images`]).
pub fn load_idx(path: impl AsRef<Path>, order: EpochOrder) -> Result<InputSource> {
    let bytes = fs::read(path)?;
    let (_, dim, images) = parse_idx_images(&bytes)?;
    Ok(InputSource::IdxImages { images, dim, order })
}

/// Parses a big-endian IDX image stack (magic `0x00000803`, then three `u32`
/// dimensions, then unsigned bytes) into `(count, pixels per image, data)`.
///
/// The data are standardised with a single global mean and standard deviation
/// over all pixels of all images.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<f64>)> {
    let word = |i: usize| -> Result<u32> {
        bytes
            .get(4 * i..4 * i + 4)
            .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
            .ok_or_else(|| Error::IdxFormat("header truncated".into()))
    };
    let magic = word(0)?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::IdxFormat(format!(
            "magic {magic:#010x} is not an unsigned-byte image stack ({IDX_IMAGE_MAGIC:#010x})"
        )));
    }
    let count = word(1)? as usize;
    let rows = word(2)? as usize;
    let cols = word(3)? as usize;
    let dim = rows * cols;
    if count == 0 || dim == 0 {
        return Err(Error::IdxFormat("empty image stack".into()));
    }
    let body = &bytes[16..];
    let expected = count * dim;
    if body.len() < expected {
        return Err(Error::IdxFormat(format!(
            "truncated data: expected {expected} bytes, found {}",
            body.len()
        )));
    }
    let raw = &body[..expected];
    let total = expected as f64;
    let mean = raw.iter().map(|&b| b as f64).sum::<f64>() / total;
    let var = raw.iter().map(|&b| (b as f64 - mean).powi(2)).sum::<f64>() / total;
    if var <= 0.0 {
        return Err(Error::IdxFormat(
            "all pixels are equal; cannot standardise".into(),
        ));
    }
    let inv_std = 1.0 / var.sqrt();
    let data = raw.iter().map(|&b| (b as f64 - mean) * inv_std).collect();
    Ok((count, dim, data))
}
