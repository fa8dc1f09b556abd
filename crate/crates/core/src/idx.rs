//! Reader and writer for the big-endian IDX image/label container.
//!
//! Images use magic 0x00000803 (unsigned bytes, 3 dimensions: count, rows,
//! cols) and labels 0x00000801 (unsigned bytes, 1 dimension). Pixels are
//! mapped to `[0, 1]` by dividing by 255; the writer quantises back with
//! round-to-nearest, so a load/save/load cycle is exact.

use std::path::Path;

use crate::data::{Dataset, SplitTag};
use crate::error::{Error, Result};
use crate::model::{Matrix, Targets};

const IMAGE_MAGIC: u32 = 2051;
const LABEL_MAGIC: u32 = 2049;

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn u32_be(&mut self, what: &str) -> Result<u32> {
        if self.pos + 4 > self.bytes.len() {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                message: format!("file ends inside {what}"),
            });
        }
        let v = u32::from_be_bytes(self.bytes[self.pos..self.pos + 4].try_into().unwrap());
        self.pos += 4;
        Ok(v)
    }

    fn payload(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        if self.pos + len > self.bytes.len() {
            return Err(Error::Truncated {
                path: self.path.to_path_buf(),
                message: format!(
                    "{what} needs {len} bytes but only {} remain",
                    self.bytes.len() - self.pos
                ),
            });
        }
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::FileFormat {
                path: self.path.to_path_buf(),
                message: format!("{} trailing bytes after payload", self.bytes.len() - self.pos),
            });
        }
        Ok(())
    }
}

/// Loads paired image and label files into one dataset. Pixels land in
/// `[0, 1]`; the class count is the highest label plus one.
pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let image_bytes = std::fs::read(images).map_err(|e| Error::io(images, e))?;
    let mut r = Reader {
        bytes: &image_bytes,
        pos: 0,
        path: images,
    };
    let magic = r.u32_be("the magic number")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::FileFormat {
            path: images.to_path_buf(),
            message: format!("magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}"),
        });
    }
    let count = r.u32_be("the example count")? as usize;
    let rows = r.u32_be("the row count")? as usize;
    let cols = r.u32_be("the column count")? as usize;
    let pixels = r.payload(count * rows * cols, "pixel data")?;
    r.finish()?;

    let label_bytes = std::fs::read(labels).map_err(|e| Error::io(labels, e))?;
    let mut r = Reader {
        bytes: &label_bytes,
        pos: 0,
        path: labels,
    };
    let magic = r.u32_be("the magic number")?;
    if magic != LABEL_MAGIC {
        return Err(Error::FileFormat {
            path: labels.to_path_buf(),
            message: format!("magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}"),
        });
    }
    let label_count = r.u32_be("the label count")? as usize;
    let label_data = r.payload(label_count, "label data")?;
    r.finish()?;

    if label_count != count {
        return Err(Error::FileFormat {
            path: labels.to_path_buf(),
            message: format!("{label_count} labels for {count} images"),
        });
    }
    if count == 0 {
        return Err(Error::EmptyDataset(format!(
            "{} holds zero examples",
            images.display()
        )));
    }

    let values: Vec<f64> = pixels.iter().map(|&b| b as f64 / 255.0).collect();
    let inputs = Matrix::from_vec(count, rows * cols, values)?;
    let labels_vec: Vec<u32> = label_data.iter().map(|&b| b as u32).collect();
    let classes = labels_vec.iter().max().copied().unwrap_or(0) as usize + 1;
    Dataset::new(
        inputs,
        Targets::Labels {
            labels: labels_vec,
            classes,
        },
        SplitTag::Train,
    )
}

/// Writes a dataset back out as an IDX image/label pair. Features are
/// quantised with `round(v * 255)` clamped to `[0, 255]`; the image file
/// records the flat feature width as its row dimension with one column.
pub fn save_idx(dataset: &Dataset, images: &Path, labels: &Path) -> Result<()> {
    let label_values = match &dataset.targets {
        Targets::Labels { labels, .. } => labels,
        Targets::Values(_) => {
            return Err(Error::InvalidArgument(
                "only label targets can be stored in an idx pair".into(),
            ))
        }
    };
    if let Some(&bad) = label_values.iter().find(|&&l| l > 255) {
        return Err(Error::InvalidArgument(format!(
            "label {bad} does not fit in one byte"
        )));
    }

    let n = dataset.len();
    let d = dataset.inputs.cols();
    let mut image_bytes = Vec::with_capacity(16 + n * d);
    image_bytes.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    image_bytes.extend_from_slice(&(n as u32).to_be_bytes());
    image_bytes.extend_from_slice(&(d as u32).to_be_bytes());
    image_bytes.extend_from_slice(&1u32.to_be_bytes());
    for &v in dataset.inputs.data() {
        image_bytes.push((v * 255.0).round().clamp(0.0, 255.0) as u8);
    }
    std::fs::write(images, image_bytes).map_err(|e| Error::io(images, e))?;

    let mut label_bytes = Vec::with_capacity(8 + n);
    label_bytes.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    label_bytes.extend_from_slice(&(n as u32).to_be_bytes());
    label_bytes.extend(label_values.iter().map(|&l| l as u8));
    std::fs::write(labels, label_bytes).map_err(|e| Error::io(labels, e))?;
    Ok(())
}
