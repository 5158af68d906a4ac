//! Dataset sources: synthetic generators, IDX files and numeric CSV.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::{matmul, Matrix};
use crate::rng::Rng;
use std::io::Read;
use std::path::Path;

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthKind {
    Xor,
    GaussianBlobs,
    RandomAutoencoder,
}

impl SynthKind {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "xor" => SynthKind::Xor,
            "gaussian-blobs" | "blobs" => SynthKind::GaussianBlobs,
            "random-autoencoder" | "autoencoder" => SynthKind::RandomAutoencoder,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            SynthKind::Xor => "xor",
            SynthKind::GaussianBlobs => "gaussian-blobs",
            SynthKind::RandomAutoencoder => "random-autoencoder",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub kind: SynthKind,
    pub n: usize,
    /// Input dimension (blobs, autoencoder).
    pub dim: usize,
    /// Number of blob classes.
    pub classes: usize,
    /// Latent dimension of the autoencoder data.
    pub latent: usize,
    /// Within-blob standard deviation; additive noise for the autoencoder
    /// data; jitter around the XOR corners beyond the first four samples.
    pub sigma: f64,
    /// Standard deviation of the blob centres.
    pub center_scale: f64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            kind: SynthKind::Xor,
            n: 4,
            dim: 2,
            classes: 2,
            latent: 4,
            sigma: 0.5,
            center_scale: 2.0,
        }
    }
}

const XOR: [([f64; 2], f64); 4] = [
    ([0.0, 0.0], 0.0),
    ([0.0, 1.0], 1.0),
    ([1.0, 0.0], 1.0),
    ([1.0, 1.0], 0.0),
];

pub fn synth_dataset(spec: &SynthSpec, seed: u64) -> Result<Dataset> {
    if spec.n == 0 {
        return Err(Error::Config("dataset size must be positive".into()));
    }
    let mut rng = Rng::new(seed);
    match spec.kind {
        SynthKind::Xor => {
            let mut x = Matrix::zeros(2, spec.n);
            let mut t = Matrix::zeros(1, spec.n);
            for j in 0..spec.n {
                let (p, y) = XOR[j % 4];
                let jitter = if j < 4 { 0.0 } else { spec.sigma };
                x.set(0, j, p[0] + jitter * rng.normal());
                x.set(1, j, p[1] + jitter * rng.normal());
                t.set(0, j, y);
            }
            Dataset::new(x, t)
        }
        SynthKind::GaussianBlobs => {
            if spec.classes < 2 || spec.dim == 0 {
                return Err(Error::Config(
                    "blobs need at least two classes and a positive dim".into(),
                ));
            }
            let centers = Matrix::random_normal(spec.dim, spec.classes, spec.center_scale, &mut rng);
            let mut x = Matrix::zeros(spec.dim, spec.n);
            let mut t = Matrix::zeros(spec.classes, spec.n);
            for j in 0..spec.n {
                let c = j % spec.classes;
                for i in 0..spec.dim {
                    x.set(i, j, centers.get(i, c) + spec.sigma * rng.normal());
                }
                t.set(c, j, 1.0);
            }
            Dataset::new(x, t)
        }
        SynthKind::RandomAutoencoder => {
            if spec.dim == 0 || spec.latent == 0 {
                return Err(Error::Config("autoencoder data needs positive dim and latent".into()));
            }
            let basis = Matrix::random_normal(spec.dim, spec.latent, (1.0 / spec.latent as f64).sqrt(), &mut rng);
            let z = Matrix::random_normal(spec.latent, spec.n, 1.0, &mut rng);
            let mut x = matmul(&basis, &z)?;
            for v in x.as_mut_slice() {
                *v += spec.sigma * rng.normal();
            }
            Dataset::new(x.clone(), x)
        }
    }
}

fn read_u32_be(bytes: &[u8], at: usize) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format("truncated IDX header".into()))
}

fn parse_idx(bytes: &[u8], expected: u32) -> Result<(Vec<usize>, &[u8])> {
    let magic = read_u32_be(bytes, 0)?;
    if magic != expected {
        return Err(Error::Format(format!(
            "IDX magic {magic:#010x}, expected {expected:#010x}"
        )));
    }
    let ndims = (magic & 0xff) as usize;
    let mut dims = Vec::with_capacity(ndims);
    for k in 0..ndims {
        dims.push(read_u32_be(bytes, 4 + 4 * k)? as usize);
    }
    let header = 4 + 4 * ndims;
    let count: usize = dims.iter().product();
    let body = &bytes[header..];
    if body.len() < count {
        return Err(Error::Format(format!(
            "IDX body has {} bytes, expected {count}",
            body.len()
        )));
    }
    if count == 0 {
        return Err(Error::Format("IDX file holds no items".into()));
    }
    Ok((dims, &body[..count]))
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    Ok(buf)
}

/// IDX image file (magic `0x00000803`), one column per image, pixels
/// scaled to `[0, 1]` in row-major order.
pub fn load_idx_images(path: &Path) -> Result<Matrix> {
    parse_idx_images(&read_all(path)?)
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<Matrix> {
    let (dims, body) = parse_idx(bytes, IDX_IMAGES_MAGIC)?;
    let n = dims[0];
    let pixels = dims[1] * dims[2];
    Ok(Matrix::from_fn(pixels, n, |p, j| body[j * pixels + p] as f64 / 255.0))
}

/// IDX label file (magic `0x00000801`).
pub fn load_idx_labels(path: &Path) -> Result<Vec<u8>> {
    parse_idx_labels(&read_all(path)?)
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let (_, body) = parse_idx(bytes, IDX_LABELS_MAGIC)?;
    Ok(body.to_vec())
}

/// One-hot encodes `labels` into `classes × n`.
pub fn one_hot(labels: &[u8], classes: usize) -> Result<Matrix> {
    if labels.is_empty() || classes == 0 {
        return Err(Error::InvalidArgument("one-hot needs labels and classes".into()));
    }
    let mut t = Matrix::zeros(classes, labels.len());
    for (j, &l) in labels.iter().enumerate() {
        if l as usize >= classes {
            return Err(Error::Format(format!("label {l} out of range for {classes} classes")));
        }
        t.set(l as usize, j, 1.0);
    }
    Ok(t)
}

/// Images and labels as a classification dataset with `max label + 1`
/// classes.
pub fn load_idx(images: &Path, labels: &Path) -> Result<Dataset> {
    let x = load_idx_images(images)?;
    let y = load_idx_labels(labels)?;
    if y.len() != x.cols() {
        return Err(Error::Format(format!("{} images but {} labels", x.cols(), y.len())));
    }
    let classes = *y.iter().max().unwrap_or(&0) as usize + 1;
    Dataset::new(x, one_hot(&y, classes.max(2))?)
}

/// Numeric CSV with one sample per row; the last `target_cols` columns are
/// targets. A first row that does not parse as numbers is taken as a
/// header.
pub fn load_csv(path: &Path, target_cols: usize) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if line == 0 => continue,
            Err(e) => return Err(Error::Format(format!("csv line {}: {e}", line + 1))),
        }
    }
    let width = rows
        .first()
        .map(|r| r.len())
        .ok_or_else(|| Error::Format("csv has no data rows".into()))?;
    if target_cols == 0 || target_cols >= width {
        return Err(Error::Config(format!(
            "csv has {width} columns, cannot take {target_cols} as targets"
        )));
    }
    if rows.iter().any(|r| r.len() != width) {
        return Err(Error::Format("csv rows have differing lengths".into()));
    }
    let n = rows.len();
    let f = width - target_cols;
    let x = Matrix::from_fn(f, n, |i, j| rows[j][i]);
    let t = Matrix::from_fn(target_cols, n, |i, j| rows[j][f + i]);
    Dataset::new(x, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn xor_canonical() {
        let d = synth_dataset(&SynthSpec::default(), 1).unwrap();
        assert_eq!(d.inputs.as_slice(), &[0.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 1.0]);
        assert_eq!(d.targets.as_slice(), &[0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn synth_is_seeded() {
        let spec = SynthSpec {
            kind: SynthKind::GaussianBlobs,
            n: 30,
            dim: 3,
            classes: 3,
            ..SynthSpec::default()
        };
        assert_eq!(synth_dataset(&spec, 4).unwrap(), synth_dataset(&spec, 4).unwrap());
        assert_ne!(synth_dataset(&spec, 4).unwrap(), synth_dataset(&spec, 5).unwrap());
    }

    fn idx_bytes(magic: u32, dims: &[u32], body: &[u8]) -> Vec<u8> {
        let mut v = magic.to_be_bytes().to_vec();
        for d in dims {
            v.extend(d.to_be_bytes());
        }
        v.extend(body);
        v
    }

    #[test]
    fn idx_errors() {
        assert!(parse_idx_images(&[]).is_err());
        let labels = idx_bytes(IDX_LABELS_MAGIC, &[2], &[1, 0]);
        assert!(matches!(parse_idx_images(&labels), Err(Error::Format(_))));
        assert_eq!(parse_idx_labels(&labels).unwrap(), vec![1, 0]);
        let short = idx_bytes(IDX_IMAGES_MAGIC, &[1, 2, 2], &[0, 1, 2]);
        assert!(parse_idx_images(&short).is_err());
    }
}
