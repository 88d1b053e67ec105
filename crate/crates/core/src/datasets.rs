//! Image sources: the IDX format used by MNIST, a procedural handwritten-digit
//! generator with the same layout, and uniform random images.

use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corrupt::derive_seed;
use crate::error::{Error, Result};
use crate::memory::MemoryStore;
use crate::vector::Shape;

pub const MNIST_SIDE: usize = 28;

/// Images with integer class labels.
#[derive(Debug, Clone)]
pub struct LabeledImages {
    pub images: MemoryStore,
    pub labels: Vec<u8>,
}

impl LabeledImages {
    /// First `n` items.
    pub fn truncated(&self, n: usize) -> Result<Self> {
        Ok(Self {
            images: self.images.truncated(n)?,
            labels: self.labels[..n.min(self.labels.len())].to_vec(),
        })
    }
}

fn parse_idx(bytes: &[u8], expected_rank: u8) -> Result<(Vec<usize>, &[u8])> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: 4,
            found: bytes.len(),
        });
    }
    if bytes[0] != 0 || bytes[1] != 0 {
        return Err(Error::BadMagic {
            expected: [0, 0, 0x08, expected_rank],
            found: bytes[..4].try_into().expect("four bytes"),
        });
    }
    if bytes[2] != 0x08 {
        return Err(Error::Unsupported {
            what: "IDX element type",
            value: bytes[2].into(),
        });
    }
    if bytes[3] != expected_rank {
        return Err(Error::Unsupported {
            what: "IDX rank",
            value: bytes[3].into(),
        });
    }
    let header = 4 + 4 * expected_rank as usize;
    if bytes.len() < header {
        return Err(Error::Truncated {
            expected: header,
            found: bytes.len(),
        });
    }
    let dims: Vec<usize> = bytes[4..header]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes(c.try_into().expect("four bytes")) as usize)
        .collect();
    let count = dims
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or(Error::DimensionOverflow)?;
    let expected = header + count;
    match bytes.len().cmp(&expected) {
        std::cmp::Ordering::Less => Err(Error::Truncated {
            expected,
            found: bytes.len(),
        }),
        std::cmp::Ordering::Greater => Err(Error::TrailingBytes(bytes.len() - expected)),
        std::cmp::Ordering::Equal => Ok((dims, &bytes[header..])),
    }
}

/// Decodes an IDX3 image file into a store of `1 × H × W` images scaled to
/// `[0, 1]`.
pub fn decode_idx_images(bytes: &[u8]) -> Result<MemoryStore> {
    let (dims, data) = parse_idx(bytes, 3)?;
    if dims[0] == 0 {
        return Err(Error::Empty("IDX file holds no images"));
    }
    let shape = Shape::new(1, dims[1], dims[2])?;
    let values = data.iter().map(|&b| b as f64 / 255.0).collect();
    MemoryStore::from_flat(shape.len(), dims[0], values)?.with_shape(shape)
}

pub fn decode_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    Ok(parse_idx(bytes, 1)?.1.to_vec())
}

/// Loads `{split}-images-idx3-ubyte` and `{split}-labels-idx1-ubyte` from
/// `dir`, where `split` is `train` or `t10k`.
pub fn load_mnist(dir: impl AsRef<Path>, split: &str) -> Result<LabeledImages> {
    let dir = dir.as_ref();
    let images = decode_idx_images(&fs::read(dir.join(format!("{split}-images-idx3-ubyte")))?)?;
    let labels = decode_idx_labels(&fs::read(dir.join(format!("{split}-labels-idx1-ubyte")))?)?;
    if labels.len() != images.len() {
        return Err(Error::DimensionMismatch {
            expected: images.len(),
            actual: labels.len(),
        });
    }
    Ok(LabeledImages { images, labels })
}

fn ellipse(cx: f64, cy: f64, rx: f64, ry: f64, from: f64, to: f64, steps: usize) -> Vec<(f64, f64)> {
    (0..=steps)
        .map(|k| {
            let t = from + (to - from) * k as f64 / steps as f64;
            (cx + rx * t.cos(), cy + ry * t.sin())
        })
        .collect()
}

/// Polyline strokes for each digit in the unit square (y grows downward).
fn digit_strokes(digit: u8) -> Vec<Vec<(f64, f64)>> {
    match digit {
        0 => vec![ellipse(0.5, 0.5, 0.2, 0.32, 0.0, TAU, 16)],
        1 => vec![vec![(0.4, 0.27), (0.52, 0.15), (0.52, 0.85)]],
        2 => vec![vec![
            (0.3, 0.3),
            (0.4, 0.18),
            (0.6, 0.18),
            (0.7, 0.3),
            (0.65, 0.45),
            (0.3, 0.85),
            (0.72, 0.85),
        ]],
        3 => vec![vec![
            (0.3, 0.2),
            (0.65, 0.2),
            (0.5, 0.47),
            (0.7, 0.62),
            (0.65, 0.8),
            (0.3, 0.83),
        ]],
        4 => vec![vec![(0.6, 0.85), (0.6, 0.15), (0.27, 0.6), (0.76, 0.6)]],
        5 => vec![vec![
            (0.7, 0.18),
            (0.36, 0.18),
            (0.33, 0.46),
            (0.6, 0.44),
            (0.71, 0.62),
            (0.6, 0.82),
            (0.3, 0.82),
        ]],
        6 => vec![vec![
            (0.66, 0.17),
            (0.42, 0.38),
            (0.32, 0.64),
            (0.44, 0.84),
            (0.63, 0.8),
            (0.69, 0.62),
            (0.5, 0.5),
            (0.34, 0.6),
        ]],
        7 => vec![vec![(0.28, 0.18), (0.72, 0.18), (0.44, 0.86)]],
        8 => vec![
            ellipse(0.5, 0.32, 0.16, 0.15, 0.0, TAU, 12),
            ellipse(0.5, 0.65, 0.19, 0.18, 0.0, TAU, 12),
        ],
        _ => vec![
            ellipse(0.5, 0.34, 0.17, 0.16, 0.0, TAU, 12),
            vec![(0.67, 0.34), (0.6, 0.86)],
        ],
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// Renders one digit with a random affine jitter, vertex wobble, and stroke
/// width into a `side × side` image in `[0, 1]`.
pub fn render_digit<R: Rng + ?Sized>(digit: u8, side: usize, rng: &mut R) -> Vec<f64> {
    let angle = rng.random_range(-0.3..0.3);
    let scale_x = rng.random_range(0.75..1.1);
    let scale_y = rng.random_range(0.8..1.1);
    let shear = rng.random_range(-0.3..0.3);
    let shift = (rng.random_range(-0.08..0.08), rng.random_range(-0.08..0.08));
    let width = rng.random_range(0.9..2.4);
    let peak = rng.random_range(0.75..1.0);
    let (sin, cos) = f64::sin_cos(angle);
    let s = side as f64;

    let strokes: Vec<Vec<(f64, f64)>> = digit_strokes(digit % 10)
        .into_iter()
        .map(|line| {
            line.into_iter()
                .map(|(x, y)| {
                    let x = x + rng.random_range(-0.04..0.04) - 0.5;
                    let y = y + rng.random_range(-0.04..0.04) - 0.5;
                    let x = (x + shear * y) * scale_x;
                    let y = y * scale_y;
                    let (x, y) = (cos * x - sin * y, sin * x + cos * y);
                    ((x + 0.5 + shift.0) * s, (y + 0.5 + shift.1) * s)
                })
                .collect()
        })
        .collect();

    let mut img = vec![0.0; side * side];
    for py in 0..side {
        for px in 0..side {
            let p = (px as f64 + 0.5, py as f64 + 0.5);
            let d = strokes
                .iter()
                .flat_map(|line| line.windows(2).map(|w| segment_distance(p, w[0], w[1])))
                .fold(f64::INFINITY, f64::min);
            img[py * side + px] = peak * (1.0 - (d - width / 2.0)).clamp(0.0, 1.0);
        }
    }
    img
}

/// `n` procedurally drawn 28×28 digits with labels cycling through 0–9.
/// Item `i` depends only on `(seed, i)`.
pub fn synthetic_digits(n: usize, seed: u64) -> Result<LabeledImages> {
    if n == 0 {
        return Err(Error::Empty("synthetic digit count"));
    }
    let shape = Shape::new(1, MNIST_SIDE, MNIST_SIDE)?;
    let mut data = Vec::with_capacity(n * shape.len());
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, i as u64));
        let digit = (i % 10) as u8;
        data.extend(render_digit(digit, MNIST_SIDE, &mut rng));
        labels.push(digit);
    }
    Ok(LabeledImages {
        images: MemoryStore::from_flat(shape.len(), n, data)?.with_shape(shape)?,
        labels,
    })
}

/// `n` images with i.i.d. U(0, 1) pixels.
pub fn random_images(n: usize, shape: Shape, seed: u64) -> Result<MemoryStore> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = (0..n * shape.len()).map(|_| rng.random::<f64>()).collect();
    MemoryStore::from_flat(shape.len(), n, data)?.with_shape(shape)
}
