//! Seeded image corruptions used to build retrieval queries and contrastive
//! views.
//!
//! Every corruption is a pure function of the input and a [`CorruptionSpec`];
//! the random stream is seeded from the spec alone, so the same input and spec
//! always produce the same bits. Batch callers derive per-item seeds with
//! [`derive_seed`].

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::vector::{DataVector, Shape};

pub const DEFAULT_ZOOM: f64 = 0.7;
pub const DEFAULT_FLIP_PROBABILITY: f64 = 0.2;
pub const DEFAULT_GAIN: (f64, f64) = (0.5, 1.5);
pub const DEFAULT_OFFSET: (f64, f64) = (-0.2, 0.2);

/// Mixes a base seed with an item index (SplitMix64 finaliser).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum QuarterTurn {
    Zero,
    /// π/2, counter-clockwise.
    Ccw,
    /// −π/2.
    Cw,
    /// π.
    Half,
}

impl QuarterTurn {
    pub const ALL: [QuarterTurn; 4] = [
        QuarterTurn::Zero,
        QuarterTurn::Ccw,
        QuarterTurn::Cw,
        QuarterTurn::Half,
    ];

    fn degrees(self) -> i32 {
        match self {
            QuarterTurn::Zero => 0,
            QuarterTurn::Ccw => 90,
            QuarterTurn::Cw => -90,
            QuarterTurn::Half => 180,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub enum MaskRegion {
    #[default]
    Bottom,
    Top,
    Left,
    Right,
}

impl MaskRegion {
    fn name(self) -> &'static str {
        match self {
            MaskRegion::Bottom => "bottom",
            MaskRegion::Top => "top",
            MaskRegion::Left => "left",
            MaskRegion::Right => "right",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CorruptionKind {
    /// Centered window of relative size `zoom`, rescaled bilinearly to full size.
    Crop { zoom: f64 },
    /// Replaces `fraction` of the rows (or columns) on one side with U(0,1) noise.
    Mask { fraction: f64, region: MaskRegion },
    /// Per-channel `clamp(a·x + b)` with `a` and `b` drawn from the ranges.
    Color {
        gain: (f64, f64),
        offset: (f64, f64),
        clamp: bool,
    },
    /// Exact rotation by a multiple of π/2; `None` draws the angle.
    Rotation { angle: Option<QuarterTurn> },
    /// Each pixel is set to 0 or 1 (even odds) with probability `p`.
    SaltPepper { p: f64 },
    /// Adds N(mean, variance) noise; `variance` is η, not the std.
    Gaussian { mean: f64, variance: f64, clamp: bool },
}

impl CorruptionKind {
    pub fn crop() -> Self {
        CorruptionKind::Crop { zoom: DEFAULT_ZOOM }
    }

    pub fn mask() -> Self {
        CorruptionKind::Mask {
            fraction: 0.5,
            region: MaskRegion::Bottom,
        }
    }

    pub fn color() -> Self {
        CorruptionKind::Color {
            gain: DEFAULT_GAIN,
            offset: DEFAULT_OFFSET,
            clamp: true,
        }
    }

    pub fn rotation() -> Self {
        CorruptionKind::Rotation { angle: None }
    }

    pub fn salt_pepper() -> Self {
        CorruptionKind::SaltPepper {
            p: DEFAULT_FLIP_PROBABILITY,
        }
    }

    pub fn gaussian(mean: f64, variance: f64) -> Self {
        CorruptionKind::Gaussian {
            mean,
            variance,
            clamp: true,
        }
    }

    /// The six corruption families with engine defaults (Gaussian at μ = 0.3, η = 0.1).
    pub fn standard_suite() -> Vec<Self> {
        vec![
            Self::crop(),
            Self::mask(),
            Self::color(),
            Self::rotation(),
            Self::salt_pepper(),
            Self::gaussian(0.3, 0.1),
        ]
    }

    pub fn name(&self) -> &'static str {
        match self {
            CorruptionKind::Crop { .. } => "crop",
            CorruptionKind::Mask { .. } => "mask",
            CorruptionKind::Color { .. } => "color",
            CorruptionKind::Rotation { .. } => "rotation",
            CorruptionKind::SaltPepper { .. } => "salt_pepper",
            CorruptionKind::Gaussian { .. } => "gaussian",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match *self {
            CorruptionKind::Crop { zoom } if !(zoom > 0.0 && zoom <= 1.0) => {
                bad(format!("crop zoom {zoom} outside (0, 1]"))
            }
            CorruptionKind::Mask { fraction, .. } if !(0.0..=1.0).contains(&fraction) => {
                bad(format!("mask fraction {fraction} outside [0, 1]"))
            }
            CorruptionKind::Color { gain, offset, .. }
                if !(gain.0 <= gain.1 && offset.0 <= offset.1)
                    || ![gain.0, gain.1, offset.0, offset.1].iter().all(|v| v.is_finite()) =>
            {
                bad(format!("color ranges {gain:?} / {offset:?} are not ordered"))
            }
            CorruptionKind::SaltPepper { p } if !(0.0..=1.0).contains(&p) => {
                bad(format!("salt and pepper probability {p} outside [0, 1]"))
            }
            CorruptionKind::Gaussian { mean, variance, .. }
                if !(variance >= 0.0 && variance.is_finite() && mean.is_finite()) =>
            {
                bad(format!("gaussian mean {mean}, variance {variance}"))
            }
            _ => Ok(()),
        }
    }

    pub fn with_seed(self, seed: u64) -> CorruptionSpec {
        CorruptionSpec { kind: self, seed }
    }
}

impl fmt::Display for CorruptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            CorruptionKind::Crop { zoom } => write!(f, "crop:zoom={zoom}"),
            CorruptionKind::Mask { fraction, region } => {
                write!(f, "mask:fraction={fraction},region={}", region.name())
            }
            CorruptionKind::Color { gain, offset, clamp } => write!(
                f,
                "color:gain={}..{},offset={}..{},clamp={clamp}",
                gain.0, gain.1, offset.0, offset.1
            ),
            CorruptionKind::Rotation { angle } => match angle {
                Some(a) => write!(f, "rotation:angle={}", a.degrees()),
                None => f.write_str("rotation:angle=random"),
            },
            CorruptionKind::SaltPepper { p } => write!(f, "salt_pepper:p={p}"),
            CorruptionKind::Gaussian {
                mean,
                variance,
                clamp,
            } => write!(f, "gaussian:mean={mean},variance={variance},clamp={clamp}"),
        }
    }
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("`{key}` expects a number, got `{v}`")))
}

fn parse_range(key: &str, v: &str) -> Result<(f64, f64)> {
    let (lo, hi) = v
        .split_once("..")
        .ok_or_else(|| Error::Parse(format!("`{key}` expects `lo..hi`, got `{v}`")))?;
    Ok((parse_f64(key, lo)?, parse_f64(key, hi)?))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    v.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("`{key}` expects true/false, got `{v}`")))
}

/// Parses `name[:key=value,...]`, returning the kind and an optional `seed`.
fn parse_entry(s: &str) -> Result<(CorruptionKind, Option<u64>)> {
    let s = s.trim();
    let (name, args) = match s.split_once(':') {
        Some((n, a)) => (n.trim(), a),
        None => (s, ""),
    };
    let mut kind = match name.to_ascii_lowercase().as_str() {
        "crop" => CorruptionKind::crop(),
        "mask" => CorruptionKind::mask(),
        "color" => CorruptionKind::color(),
        "rotation" => CorruptionKind::rotation(),
        "salt_pepper" | "sp" => CorruptionKind::salt_pepper(),
        "gaussian" | "gauss" => CorruptionKind::gaussian(0.0, 0.1),
        "none" => CorruptionKind::gaussian(0.0, 0.0),
        other => return Err(Error::Parse(format!("unknown corruption `{other}`"))),
    };
    let mut seed = None;
    for pair in args.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("expected key=value, got `{pair}`")))?;
        let key = key.trim();
        if key == "seed" {
            seed = Some(
                value
                    .trim()
                    .parse()
                    .map_err(|_| Error::Parse(format!("bad seed `{value}`")))?,
            );
            continue;
        }
        match (&mut kind, key) {
            (CorruptionKind::Crop { zoom }, "zoom") => *zoom = parse_f64(key, value)?,
            (CorruptionKind::Mask { fraction, .. }, "fraction") => *fraction = parse_f64(key, value)?,
            (CorruptionKind::Mask { region, .. }, "region") => {
                *region = match value.trim() {
                    "bottom" => MaskRegion::Bottom,
                    "top" => MaskRegion::Top,
                    "left" => MaskRegion::Left,
                    "right" => MaskRegion::Right,
                    other => return Err(Error::Parse(format!("unknown mask region `{other}`"))),
                }
            }
            (CorruptionKind::Color { gain, .. }, "gain") => *gain = parse_range(key, value)?,
            (CorruptionKind::Color { offset, .. }, "offset") => *offset = parse_range(key, value)?,
            (CorruptionKind::Color { clamp, .. }, "clamp")
            | (CorruptionKind::Gaussian { clamp, .. }, "clamp") => *clamp = parse_bool(key, value)?,
            (CorruptionKind::Rotation { angle }, "angle") => {
                *angle = match value.trim() {
                    "random" => None,
                    "0" => Some(QuarterTurn::Zero),
                    "90" => Some(QuarterTurn::Ccw),
                    "-90" | "270" => Some(QuarterTurn::Cw),
                    "180" => Some(QuarterTurn::Half),
                    other => {
                        return Err(Error::Parse(format!(
                            "rotation angle must be 0, 90, -90 or 180 degrees, got `{other}`"
                        )))
                    }
                }
            }
            (CorruptionKind::SaltPepper { p }, "p") => *p = parse_f64(key, value)?,
            (CorruptionKind::Gaussian { mean, .. }, "mean") => *mean = parse_f64(key, value)?,
            (CorruptionKind::Gaussian { variance, .. }, "variance") => *variance = parse_f64(key, value)?,
            (k, key) => {
                return Err(Error::Parse(format!(
                    "corruption `{}` has no parameter `{key}`",
                    k.name()
                )))
            }
        }
    }
    kind.validate()?;
    Ok((kind, seed))
}

impl FromStr for CorruptionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match parse_entry(s)? {
            (kind, None) => Ok(kind),
            (_, Some(_)) => Err(Error::Parse(
                "a seed belongs to a corruption spec, not a kind".into(),
            )),
        }
    }
}

/// One corruption kind together with the seed of its random stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorruptionSpec {
    pub kind: CorruptionKind,
    pub seed: u64,
}

impl fmt::Display for CorruptionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = self.kind.to_string();
        let sep = if kind.contains(':') { ',' } else { ':' };
        write!(f, "{kind}{sep}seed={}", self.seed)
    }
}

impl FromStr for CorruptionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, seed) = parse_entry(s)?;
        Ok(CorruptionSpec {
            kind,
            seed: seed.unwrap_or(0),
        })
    }
}

fn require_shape(x: &DataVector, name: &'static str) -> Result<Shape> {
    x.shape().ok_or(Error::MissingShape(name))
}

/// Applies one corruption.
pub fn corrupt(x: &DataVector, spec: &CorruptionSpec) -> Result<DataVector> {
    spec.kind.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let src = x.values();
    let out = match spec.kind {
        CorruptionKind::Crop { zoom } => crop(src, require_shape(x, "crop")?, zoom),
        CorruptionKind::Mask { fraction, region } => {
            let shape = require_shape(x, "mask")?;
            let mut out = src.to_vec();
            for (c, y, xx) in masked_pixels(shape, fraction, region) {
                out[shape.index(c, y, xx)] = rng.random::<f64>();
            }
            out
        }
        CorruptionKind::Color { gain, offset, clamp } => {
            let shape = require_shape(x, "color")?;
            let plane = shape.height * shape.width;
            let mut out = Vec::with_capacity(src.len());
            for channel in src.chunks_exact(plane) {
                let a = sample_range(&mut rng, gain);
                let b = sample_range(&mut rng, offset);
                out.extend(channel.iter().map(|&v| {
                    let y = a * v + b;
                    if clamp {
                        y.clamp(0.0, 1.0)
                    } else {
                        y
                    }
                }));
            }
            out
        }
        CorruptionKind::Rotation { angle } => {
            let shape = require_shape(x, "rotation")?;
            if shape.height != shape.width {
                return Err(Error::InvalidParameter(format!(
                    "rotation needs a square image, got {shape}"
                )));
            }
            let turn = angle.unwrap_or_else(|| QuarterTurn::ALL[rng.random_range(0..4)]);
            rotate(src, shape, turn)
        }
        CorruptionKind::SaltPepper { p } => {
            let mut out = src.to_vec();
            match x.shape() {
                Some(shape) => {
                    let plane = shape.height * shape.width;
                    for pix in 0..plane {
                        if let Some(v) = salt_or_pepper(&mut rng, p) {
                            for c in 0..shape.channels {
                                out[c * plane + pix] = v;
                            }
                        }
                    }
                }
                None => {
                    for o in out.iter_mut() {
                        if let Some(v) = salt_or_pepper(&mut rng, p) {
                            *o = v;
                        }
                    }
                }
            }
            out
        }
        CorruptionKind::Gaussian {
            mean,
            variance,
            clamp,
        } => {
            let std = variance.sqrt();
            src.iter()
                .map(|&v| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    let y = v + (mean + std * z);
                    if clamp {
                        y.clamp(0.0, 1.0)
                    } else {
                        y
                    }
                })
                .collect()
        }
    };
    Ok(x.replace_values(out))
}

fn sample_range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..hi)
    }
}

fn salt_or_pepper(rng: &mut ChaCha8Rng, p: f64) -> Option<f64> {
    if rng.random::<f64>() < p {
        Some(if rng.random_bool(0.5) { 1.0 } else { 0.0 })
    } else {
        None
    }
}

/// Pixel coordinates `(channel, row, column)` replaced by a mask.
pub fn masked_pixels(
    shape: Shape,
    fraction: f64,
    region: MaskRegion,
) -> impl Iterator<Item = (usize, usize, usize)> {
    let rows = ((shape.height as f64) * fraction).ceil() as usize;
    let cols = ((shape.width as f64) * fraction).ceil() as usize;
    let (ys, xs) = match region {
        MaskRegion::Bottom => (
            shape.height - rows.min(shape.height)..shape.height,
            0..shape.width,
        ),
        MaskRegion::Top => (0..rows.min(shape.height), 0..shape.width),
        MaskRegion::Left => (0..shape.height, 0..cols.min(shape.width)),
        MaskRegion::Right => (0..shape.height, shape.width - cols.min(shape.width)..shape.width),
    };
    (0..shape.channels).flat_map(move |c| {
        let xs = xs.clone();
        ys.clone().flat_map(move |y| xs.clone().map(move |x| (c, y, x)))
    })
}

fn crop(src: &[f64], shape: Shape, zoom: f64) -> Vec<f64> {
    let (h, w) = (shape.height, shape.width);
    // Half-pixel-centred sampling of the centred window; zoom = 1 lands on the
    // source grid exactly.
    let src_coord = |i: usize, n: usize| -> f64 {
        let window = zoom * n as f64;
        ((n as f64 - window) / 2.0 + (i as f64 + 0.5) * zoom - 0.5).clamp(0.0, (n - 1) as f64)
    };
    let mut out = vec![0.0; src.len()];
    for c in 0..shape.channels {
        for y in 0..h {
            let sy = src_coord(y, h);
            let y0 = sy.floor() as usize;
            let y1 = (y0 + 1).min(h - 1);
            let fy = sy - y0 as f64;
            for x in 0..w {
                let sx = src_coord(x, w);
                let x0 = sx.floor() as usize;
                let x1 = (x0 + 1).min(w - 1);
                let fx = sx - x0 as f64;
                let at = |yy, xx| src[shape.index(c, yy, xx)];
                let top = (1.0 - fx) * at(y0, x0) + fx * at(y0, x1);
                let bottom = (1.0 - fx) * at(y1, x0) + fx * at(y1, x1);
                out[shape.index(c, y, x)] = (1.0 - fy) * top + fy * bottom;
            }
        }
    }
    out
}

fn rotate(src: &[f64], shape: Shape, turn: QuarterTurn) -> Vec<f64> {
    let n = shape.height;
    let mut out = vec![0.0; src.len()];
    for c in 0..shape.channels {
        for y in 0..n {
            for x in 0..n {
                let (sy, sx) = match turn {
                    QuarterTurn::Zero => (y, x),
                    QuarterTurn::Ccw => (x, n - 1 - y),
                    QuarterTurn::Cw => (n - 1 - x, y),
                    QuarterTurn::Half => (n - 1 - y, n - 1 - x),
                };
                out[shape.index(c, y, x)] = src[shape.index(c, sy, sx)];
            }
        }
    }
    out
}

/// One entry of an augmentation pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Augment {
    Fixed(CorruptionKind),
    /// Gaussian noise with the mean drawn uniformly from `[low, high]`.
    GaussianMeans {
        low: f64,
        high: f64,
        variance: f64,
    },
}

/// Draws a random corruption per view for contrastive training.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentationPipeline {
    entries: Vec<Augment>,
}

impl AugmentationPipeline {
    pub fn new(entries: Vec<Augment>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("augmentation pipeline"));
        }
        for e in &entries {
            match e {
                Augment::Fixed(kind) => kind.validate()?,
                Augment::GaussianMeans { low, high, variance } => {
                    if !(low <= high) {
                        return Err(Error::InvalidParameter(format!(
                            "gaussian mean range {low}..{high}"
                        )));
                    }
                    CorruptionKind::gaussian(*low, *variance).validate()?;
                }
            }
        }
        Ok(Self { entries })
    }

    /// Crop, mask, colour, rotation, salt-and-pepper, and Gaussian noise with
    /// mean drawn from `[0, 0.5]` at variance 0.1.
    pub fn standard() -> Self {
        let mut entries: Vec<Augment> = CorruptionKind::standard_suite()
            .into_iter()
            .filter(|k| k.name() != "gaussian")
            .map(Augment::Fixed)
            .collect();
        entries.push(Augment::GaussianMeans {
            low: 0.0,
            high: 0.5,
            variance: 0.1,
        });
        Self { entries }
    }

    pub fn entries(&self) -> &[Augment] {
        &self.entries
    }

    /// Picks an entry uniformly and seeds it from `rng`.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> CorruptionSpec {
        let entry = self.entries[rng.random_range(0..self.entries.len())];
        let kind = match entry {
            Augment::Fixed(kind) => kind,
            Augment::GaussianMeans { low, high, variance } => CorruptionKind::gaussian(
                if low == high {
                    low
                } else {
                    rng.random_range(low..=high)
                },
                variance,
            ),
        };
        kind.with_seed(rng.next_u64())
    }
}
