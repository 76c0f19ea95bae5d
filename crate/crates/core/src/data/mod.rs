//! Dataset types and preprocessing: pixel scaling to [-1,1], linear temporal
//! resampling to 32 frames, subject-independent splitting, directory loading
//! and the deterministic synthetic corpus.

mod io;
mod synthetic;

pub use io::{load_dataset, save_dataset};
pub use synthetic::make_synthetic_dataset;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::PathBuf;

use crate::rng::rng_for;
use crate::tensor::Tensor;

pub const FRAMES: usize = 32;
pub const SIZE: usize = 64;
pub const CHANNELS: usize = 3;
pub const NUM_CLASSES: usize = 6;

#[derive(Debug, thiserror::Error)]
pub enum DataError {
    #[error("dataset root {0} contains no records")]
    EmptyDataset(PathBuf),
    #[error("{path}: directory name is not one of the six expression classes ({names})")]
    UnknownClass { path: PathBuf, names: String },
    #[error("{path}: cannot decode frame: {source}")]
    BadFrame {
        path: PathBuf,
        source: image::ImageError,
    },
    #[error("{path}: a video needs at least 2 frames, found {found}")]
    TooFewFrames { path: PathBuf, found: usize },
    #[error("frame shape mismatch: expected {expected:?}, got {got:?}")]
    FrameShapeMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("pixel value {0} outside [0,255]")]
    PixelOutOfRange(f32),
    #[error("value {0} outside [-1,1]")]
    ValueOutOfRange(f32),
    #[error("expected shape {expected:?}, got {got:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("subject id must be non-empty")]
    EmptySubjectId,
    #[error("input image differs from frame 0 of the video")]
    FirstFrameMismatch,
    #[error("subject-independent split needs at least 2 subjects, found {0}")]
    SingleSubject(usize),
    #[error("split of {subjects} subjects at fraction {fraction} leaves the test set empty")]
    EmptyTestSplit { subjects: usize, fraction: f64 },
    #[error(
        "train fraction {got:.3} by subject count falls outside [0.75, 0.85] \
         ({train} of {subjects} subjects)"
    )]
    RatioOutOfBand {
        got: f64,
        train: usize,
        subjects: usize,
    },
    #[error("unknown expression label {got:?}; valid names: {names}")]
    UnknownLabel { got: String, names: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// The six basic expression classes. Class indices follow alphabetical order
/// of the names: anger=0, disgust=1, fear=2, happiness=3, sadness=4,
/// surprise=5.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expression {
    Anger,
    Disgust,
    Fear,
    Happiness,
    Sadness,
    Surprise,
}

impl Expression {
    pub const ALL: [Expression; NUM_CLASSES] = [
        Expression::Anger,
        Expression::Disgust,
        Expression::Fear,
        Expression::Happiness,
        Expression::Sadness,
        Expression::Surprise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Expression::Anger => "anger",
            Expression::Disgust => "disgust",
            Expression::Fear => "fear",
            Expression::Happiness => "happiness",
            Expression::Sadness => "sadness",
            Expression::Surprise => "surprise",
        }
    }

    pub fn index(self) -> usize {
        match self {
            Expression::Anger => 0,
            Expression::Disgust => 1,
            Expression::Fear => 2,
            Expression::Happiness => 3,
            Expression::Sadness => 4,
            Expression::Surprise => 5,
        }
    }

    pub fn from_index(i: usize) -> Option<Expression> {
        Expression::ALL.get(i).copied()
    }

    pub fn from_name(name: &str) -> Result<Expression, DataError> {
        Expression::ALL
            .iter()
            .find(|e| e.name() == name)
            .copied()
            .ok_or_else(|| DataError::UnknownLabel {
                got: name.to_string(),
                names: valid_names(),
            })
    }

    /// One-hot label vector; exactly one component is 1.
    pub fn one_hot(self) -> [f32; NUM_CLASSES] {
        let mut v = [0.0; NUM_CLASSES];
        v[self.index()] = 1.0;
        v
    }
}

pub fn valid_names() -> String {
    Expression::ALL
        .iter()
        .map(|e| e.name())
        .collect::<Vec<_>>()
        .join(", ")
}

impl std::fmt::Display for Expression {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// 64x64x3 image with every value in [-1,1].
#[derive(Clone, Debug, PartialEq)]
pub struct ImageTensor(Tensor<f32>);

impl ImageTensor {
    pub fn new(t: Tensor<f32>) -> Result<Self, DataError> {
        check_shape(&t, &[SIZE, SIZE, CHANNELS])?;
        check_unit_range(&t)?;
        Ok(ImageTensor(t))
    }

    pub fn tensor(&self) -> &Tensor<f32> {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor<f32> {
        self.0
    }
}

/// 32x64x64x3 video with every value in [-1,1].
#[derive(Clone, Debug, PartialEq)]
pub struct VideoTensor(Tensor<f32>);

impl VideoTensor {
    pub fn new(t: Tensor<f32>) -> Result<Self, DataError> {
        check_shape(&t, &[FRAMES, SIZE, SIZE, CHANNELS])?;
        check_unit_range(&t)?;
        Ok(VideoTensor(t))
    }

    pub fn tensor(&self) -> &Tensor<f32> {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor<f32> {
        self.0
    }

    /// Copies frame `t` out as an image.
    pub fn frame(&self, t: usize) -> ImageTensor {
        let stride = SIZE * SIZE * CHANNELS;
        let data = self.0.data()[t * stride..(t + 1) * stride].to_vec();
        ImageTensor(Tensor::from_vec(&[SIZE, SIZE, CHANNELS], data))
    }
}

fn check_shape(t: &Tensor<f32>, expected: &[usize]) -> Result<(), DataError> {
    if t.shape() != expected {
        return Err(DataError::ShapeMismatch {
            expected: expected.to_vec(),
            got: t.shape().to_vec(),
        });
    }
    Ok(())
}

fn check_unit_range(t: &Tensor<f32>) -> Result<(), DataError> {
    for &v in t.data() {
        if !(-1.0..=1.0).contains(&v) {
            return Err(DataError::ValueOutOfRange(v));
        }
    }
    Ok(())
}

/// One training triplet: neutral input image, target label, ground-truth
/// video. The input image is frame 0 of the video by convention.
#[derive(Clone, Debug)]
pub struct DatasetRecord {
    pub subject_id: String,
    pub input_image: ImageTensor,
    pub label: Expression,
    pub video: VideoTensor,
}

impl DatasetRecord {
    pub fn new(
        subject_id: String,
        input_image: ImageTensor,
        label: Expression,
        video: VideoTensor,
    ) -> Result<Self, DataError> {
        if subject_id.is_empty() {
            return Err(DataError::EmptySubjectId);
        }
        let first = video.frame(0);
        for (a, b) in first.tensor().data().iter().zip(input_image.tensor().data()) {
            if (a - b).abs() > 1e-6 {
                return Err(DataError::FirstFrameMismatch);
            }
        }
        Ok(DatasetRecord {
            subject_id,
            input_image,
            label,
            video,
        })
    }

    /// Builds the record with the input image taken from frame 0.
    pub fn from_video(
        subject_id: String,
        label: Expression,
        video: VideoTensor,
    ) -> Result<Self, DataError> {
        let input_image = video.frame(0);
        DatasetRecord::new(subject_id, input_image, label, video)
    }
}

/// Subject-disjoint train/test partition with a subject-count train share in
/// [0.75, 0.85]. Note that some subject counts (e.g. 7) admit no integer
/// split inside that band and are rejected.
#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub train: Vec<DatasetRecord>,
    pub test: Vec<DatasetRecord>,
}

/// Scales [0,255] pixel values to [-1,1] (`x / 127.5 - 1`).
pub fn scale_pixels(raw: &Tensor<f32>) -> Result<Tensor<f32>, DataError> {
    for &v in raw.data() {
        if !(0.0..=255.0).contains(&v) {
            return Err(DataError::PixelOutOfRange(v));
        }
    }
    Ok(raw.map(|v| v / 127.5 - 1.0))
}

/// Inverse of [`scale_pixels`].
pub fn unscale_pixels(scaled: &Tensor<f32>) -> Result<Tensor<f32>, DataError> {
    check_unit_range(scaled)?;
    Ok(scaled.map(|v| (v + 1.0) * 127.5))
}

/// Resamples a frame list to `target_len` frames by piecewise-linear
/// interpolation over normalized time. Frame `t` sits at source position
/// `t * (n-1) / (target_len-1)`; integer positions copy the source frame
/// bit-exactly, so the first and last frames are always preserved.
pub fn normalize_temporal(
    frames: &[Tensor<f32>],
    target_len: usize,
) -> Result<Tensor<f32>, DataError> {
    if frames.len() < 2 {
        return Err(DataError::TooFewFrames {
            path: PathBuf::new(),
            found: frames.len(),
        });
    }
    assert!(target_len >= 2, "target length must be at least 2");
    let shape = frames[0].shape().to_vec();
    for f in frames {
        if f.shape() != shape {
            return Err(DataError::FrameShapeMismatch {
                expected: shape.clone(),
                got: f.shape().to_vec(),
            });
        }
    }
    let frame_len = frames[0].numel();
    let mut out_shape = vec![target_len];
    out_shape.extend_from_slice(&shape);
    let mut out = Tensor::zeros(&out_shape);

    let den = (target_len - 1) as u64;
    let n1 = (frames.len() - 1) as u64;
    for t in 0..target_len {
        let num = t as u64 * n1;
        let i0 = (num / den) as usize;
        let rem = num % den;
        let dst = &mut out.data_mut()[t * frame_len..(t + 1) * frame_len];
        if rem == 0 {
            dst.copy_from_slice(frames[i0].data());
        } else {
            // f64 interpolation so rounding cannot escape [min, max].
            let w = rem as f64 / den as f64;
            let a = frames[i0].data();
            let b = frames[i0 + 1].data();
            for i in 0..frame_len {
                dst[i] = ((1.0 - w) * a[i] as f64 + w * b[i] as f64) as f32;
            }
        }
    }
    Ok(out)
}

/// Shuffles subjects with a seeded PRNG and sends the first
/// `ceil(train_fraction * n)` to the train side. Deterministic per seed.
pub fn split_subject_independent(
    records: Vec<DatasetRecord>,
    train_fraction: f64,
    seed: u64,
) -> Result<DatasetSplit, DataError> {
    let subjects: BTreeSet<&str> = records.iter().map(|r| r.subject_id.as_str()).collect();
    let n = subjects.len();
    if n < 2 {
        return Err(DataError::SingleSubject(n));
    }
    let mut order: Vec<String> = subjects.into_iter().map(String::from).collect();
    let mut rng = rng_for(seed, "subject-split", 0);
    order.shuffle(&mut rng);

    let n_train = ((train_fraction * n as f64) - 1e-9).ceil().max(0.0) as usize;
    if n_train >= n {
        return Err(DataError::EmptyTestSplit {
            subjects: n,
            fraction: train_fraction,
        });
    }
    let ratio = n_train as f64 / n as f64;
    if !(0.75..=0.85).contains(&ratio) {
        return Err(DataError::RatioOutOfBand {
            got: ratio,
            train: n_train,
            subjects: n,
        });
    }
    let train_set: BTreeSet<&str> = order[..n_train].iter().map(String::as_str).collect();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for r in records {
        if train_set.contains(r.subject_id.as_str()) {
            train.push(r);
        } else {
            test.push(r);
        }
    }
    Ok(DatasetSplit { train, test })
}
