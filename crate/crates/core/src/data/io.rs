//! Dataset directory IO.
//!
//! Layout: `<root>/<subject_id>/<class_name>/frame_%04d.png`, 8-bit RGB.
//! Loading resizes frames to 64x64, scales pixels to [-1,1] and resamples
//! every video to 32 frames. Videos load in parallel; the record order is
//! always the lexicographic directory order.

use std::fs;
use std::path::{Path, PathBuf};

use image::imageops::FilterType;
use image::RgbImage;
use rayon::prelude::*;

use super::{
    normalize_temporal, scale_pixels, unscale_pixels, DataError, DatasetRecord, Expression,
    VideoTensor, CHANNELS, FRAMES, SIZE,
};
use crate::tensor::Tensor;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn sorted_dirs(path: &Path) -> Result<Vec<PathBuf>, DataError> {
    let mut dirs: Vec<PathBuf> = fs::read_dir(path)
        .map_err(io_err(path))?
        .collect::<Result<Vec<_>, _>>()
        .map_err(io_err(path))?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();
    Ok(dirs)
}

fn load_frame(path: &Path) -> Result<Tensor<f32>, DataError> {
    let img = image::open(path).map_err(|source| DataError::BadFrame {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rgb = img.to_rgb8();
    if rgb.width() as usize != SIZE || rgb.height() as usize != SIZE {
        rgb = image::imageops::resize(&rgb, SIZE as u32, SIZE as u32, FilterType::Triangle);
    }
    let raw: Vec<f32> = rgb.into_raw().into_iter().map(f32::from).collect();
    scale_pixels(&Tensor::from_vec(&[SIZE, SIZE, CHANNELS], raw))
}

fn load_video_dir(subject_id: &str, class: Expression, dir: &Path) -> Result<DatasetRecord, DataError> {
    let mut frame_paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .collect::<Result<Vec<_>, _>>()
        .map_err(io_err(dir))?
        .into_iter()
        .map(|e| e.path())
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("png"))
        .collect();
    frame_paths.sort();
    if frame_paths.len() < 2 {
        return Err(DataError::TooFewFrames {
            path: dir.to_path_buf(),
            found: frame_paths.len(),
        });
    }
    let frames: Vec<Tensor<f32>> = frame_paths
        .iter()
        .map(|p| load_frame(p))
        .collect::<Result<_, _>>()?;
    let video = VideoTensor::new(normalize_temporal(&frames, FRAMES)?)?;
    DatasetRecord::from_video(subject_id.to_string(), class, video)
}

/// Loads every `<subject>/<class>` video directory under `root`.
///
/// Any directory at class level whose name is not one of the six expression
/// names is an error naming that path, as is any undecodable frame. A root
/// with no records at all is an error.
pub fn load_dataset(root: &Path) -> Result<Vec<DatasetRecord>, DataError> {
    let mut tasks: Vec<(String, Expression, PathBuf)> = Vec::new();
    for subject_dir in sorted_dirs(root)? {
        let subject_id = subject_dir
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default()
            .to_string();
        for class_dir in sorted_dirs(&subject_dir)? {
            let name = class_dir
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or_default();
            let class = Expression::from_name(name).map_err(|_| DataError::UnknownClass {
                path: class_dir.clone(),
                names: super::valid_names(),
            })?;
            tasks.push((subject_id.clone(), class, class_dir));
        }
    }
    if tasks.is_empty() {
        return Err(DataError::EmptyDataset(root.to_path_buf()));
    }
    tasks
        .par_iter()
        .map(|(subject, class, dir)| load_video_dir(subject, *class, dir))
        .collect()
}

/// Writes records to `root` in the standard layout (8-bit RGB PNG frames).
pub fn save_dataset(records: &[DatasetRecord], root: &Path) -> Result<(), DataError> {
    for r in records {
        let dir = root.join(&r.subject_id).join(r.label.name());
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        for t in 0..FRAMES {
            let frame = r.video.frame(t);
            let path = dir.join(format!("frame_{t:04}.png"));
            save_frame(frame.tensor(), &path)?;
        }
    }
    Ok(())
}

pub(crate) fn save_frame(frame: &Tensor<f32>, path: &Path) -> Result<(), DataError> {
    let raw = unscale_pixels(frame)?;
    let bytes: Vec<u8> = raw.data().iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect();
    let img = RgbImage::from_raw(SIZE as u32, SIZE as u32, bytes).expect("sized buffer");
    img.save(path).map_err(|source| DataError::BadFrame {
        path: path.to_path_buf(),
        source,
    })
}
