//! Ground-truth objects, simulated diffraction and quality metrics.
//!
//! The broadband route here works from the object: every channel gets its
//! own padded far-field transform. It never touches the transfer operators,
//! so comparing it with `apply_poly` on the monochromatic pattern checks the
//! operator construction against the physics it is meant to model.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;

use crate::error::{param_err, shape_err, Error, Result};
use crate::grid::{centered_fft, crop_center, embed_center, pad_center, Domain, RealGrid};
use crate::retrieval::SupportMask;
use crate::spectrum::BoundSpectrum;

/// Largest padded side length accepted by [`simulate_poly_independent`].
pub const DEFAULT_MAX_PADDED: usize = 8192;

#[derive(Clone, Debug, PartialEq)]
pub enum Provenance {
    File(PathBuf),
    Disk { radius: usize },
    Digit { digit: u8, size: usize },
    Blobs { count: usize, size: usize, seed: u64 },
    TestCard { size: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Builtin {
    Disk { radius: usize },
    Digit { digit: u8, size: usize },
    Blobs { count: usize, size: usize, seed: u64 },
    TestCard { size: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub enum PhantomSource {
    File(PathBuf),
    Builtin(Builtin),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Phantom {
    object: RealGrid,
    embedded: RealGrid,
    provenance: Provenance,
}

impl Phantom {
    /// Centers `object` in a zero grid of `shape`; each side must be at
    /// least twice the object's.
    pub fn new(object: RealGrid, shape: (usize, usize), provenance: Provenance) -> Result<Self> {
        let (w, l) = object.shape();
        if shape.0 < 2 * w || shape.1 < 2 * l {
            return param_err(format!(
                "embedding a {w}x{l} object in {}x{} oversamples by less than 2",
                shape.0, shape.1
            ));
        }
        Self::new_unchecked(object, shape, provenance)
    }

    /// [`Phantom::new`] without the oversampling requirement.
    pub fn new_unchecked(object: RealGrid, shape: (usize, usize), provenance: Provenance) -> Result<Self> {
        if object.data().iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return param_err("phantom must be finite and nonnegative");
        }
        if shape.0 < object.width() || shape.1 < object.height() {
            return shape_err("embedding grid is smaller than the object");
        }
        let object = object.with_domain(Domain::Object);
        let embedded = embed_center(&object, shape)?.with_domain(Domain::Object);
        Ok(Self {
            object,
            embedded,
            provenance,
        })
    }

    pub fn object(&self) -> &RealGrid {
        &self.object
    }

    pub fn embedded(&self) -> &RealGrid {
        &self.embedded
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    /// `(W / w, L / l)`.
    pub fn oversampling(&self) -> (f64, f64) {
        (
            self.embedded.width() as f64 / self.object.width() as f64,
            self.embedded.height() as f64 / self.object.height() as f64,
        )
    }

    /// Nonzero pixels of the embedded object.
    pub fn support(&self) -> Result<SupportMask> {
        SupportMask::new(
            self.embedded.width(),
            self.embedded.height(),
            self.embedded.data().iter().map(|&v| v > 0.0).collect(),
            0,
        )
    }
}

/// Loads or renders a phantom, scales it to a peak of 1 and embeds it.
pub fn load_phantom(source: &PhantomSource, shape: (usize, usize)) -> Result<Phantom> {
    let (object, provenance) = match source {
        PhantomSource::File(path) => (read_pgm(path)?, Provenance::File(path.clone())),
        PhantomSource::Builtin(b) => {
            let g = match *b {
                Builtin::Disk { radius } => disk(radius)?,
                Builtin::Digit { digit, size } => digit_glyph(digit, size)?,
                Builtin::Blobs { count, size, seed } => blobs(count, size, seed)?,
                Builtin::TestCard { size } => test_card(size)?,
            };
            let p = match *b {
                Builtin::Disk { radius } => Provenance::Disk { radius },
                Builtin::Digit { digit, size } => Provenance::Digit { digit, size },
                Builtin::Blobs { count, size, seed } => Provenance::Blobs { count, size, seed },
                Builtin::TestCard { size } => Provenance::TestCard { size },
            };
            (g, p)
        }
    };
    let peak = object.max();
    if !(peak > 0.0) {
        return param_err("phantom image is zero everywhere");
    }
    Phantom::new(object.map(|&v| v / peak), shape, provenance)
}

/// Uniform disk of the given radius in a `(2r + 2)` square grid, centered
/// on the grid's DC pixel.
pub fn disk(radius: usize) -> Result<RealGrid> {
    if radius == 0 {
        return param_err("disk radius must be positive");
    }
    let n = 2 * radius + 2;
    let c = (n / 2) as f64;
    let r2 = (radius * radius) as f64;
    RealGrid::from_fn(n, n, |x, y| {
        let (dx, dy) = (x as f64 - c, y as f64 - c);
        if dx * dx + dy * dy <= r2 {
            1.0
        } else {
            0.0
        }
    })
}

const FONT: [[&str; 7]; 10] = [
    ["01110", "10001", "10011", "10101", "11001", "10001", "01110"],
    ["00100", "01100", "00100", "00100", "00100", "00100", "01110"],
    ["01110", "10001", "00001", "00010", "00100", "01000", "11111"],
    ["11110", "00001", "00001", "01110", "00001", "00001", "11110"],
    ["00010", "00110", "01010", "10010", "11111", "00010", "00010"],
    ["11111", "10000", "11110", "00001", "00001", "10001", "01110"],
    ["00110", "01000", "10000", "11110", "10001", "10001", "01110"],
    ["11111", "00001", "00010", "00100", "01000", "01000", "01000"],
    ["01110", "10001", "10001", "01110", "10001", "10001", "01110"],
    ["01110", "10001", "10001", "01111", "00001", "00010", "01100"],
];

/// Digit from a 5×7 bitmap font, bilinearly stretched to `size × size`
/// with a one-cell blank margin.
pub fn digit_glyph(digit: u8, size: usize) -> Result<RealGrid> {
    if digit > 9 {
        return param_err(format!("no glyph for digit {digit}"));
    }
    if size < 4 {
        return param_err(format!("glyph size must be at least 4, got {size}"));
    }
    let (gw, gh) = (7usize, 9usize);
    let mut cells = vec![0.0; gw * gh];
    for (row, bits) in FONT[digit as usize].iter().enumerate() {
        for (col, b) in bits.bytes().enumerate() {
            cells[(row + 1) * gw + col + 1] = (b == b'1') as u8 as f64;
        }
    }
    let sample = |v: f64, n: usize| {
        let i0 = (v.floor().max(0.0) as usize).min(n - 1);
        let i1 = (i0 + 1).min(n - 1);
        let f = (v - i0 as f64).clamp(0.0, 1.0);
        (i0, i1, f)
    };
    RealGrid::from_fn(size, size, |x, y| {
        let sy = (y as f64 + 0.5) / size as f64 * gh as f64 - 0.5;
        let sx = (x as f64 + 0.5) / size as f64 * gw as f64 - 0.5;
        let (y0, y1, fy) = sample(sy, gh);
        let (x0, x1, fx) = sample(sx, gw);
        cells[y0 * gw + x0] * (1.0 - fy) * (1.0 - fx)
            + cells[y1 * gw + x0] * fy * (1.0 - fx)
            + cells[y0 * gw + x1] * (1.0 - fy) * fx
            + cells[y1 * gw + x1] * fy * fx
    })
}

/// Sum of `count` random Gaussian blobs, cut off at the grid edge.
pub fn blobs(count: usize, size: usize, seed: u64) -> Result<RealGrid> {
    if count == 0 || size < 4 {
        return param_err("blobs need count >= 1 and size >= 4");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = size as f64;
    let spots: Vec<(f64, f64, f64, f64)> = (0..count)
        .map(|_| {
            (
                rng.random_range(0.25 * s..0.75 * s),
                rng.random_range(0.25 * s..0.75 * s),
                rng.random_range(0.05 * s..0.15 * s),
                rng.random_range(0.5..1.0),
            )
        })
        .collect();
    RealGrid::from_fn(size, size, |x, y| {
        spots
            .iter()
            .map(|&(cx, cy, sigma, a)| {
                let (dx, dy) = (x as f64 + 0.5 - cx, y as f64 + 0.5 - cy);
                a * (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp()
            })
            .sum()
    })
}

/// Portrait-like card: shaded oval with eyes, brows, nose and mouth.
pub fn test_card(size: usize) -> Result<RealGrid> {
    if size < 16 {
        return param_err(format!("test card size must be at least 16, got {size}"));
    }
    let s = size as f64;
    RealGrid::from_fn(size, size, |x, y| {
        let u = (x as f64 + 0.5) / s - 0.5;
        let v = (y as f64 + 0.5) / s - 0.5;
        let head = (u / 0.36).powi(2) + (v / 0.46).powi(2);
        if head > 1.0 {
            return 0.0;
        }
        let mut val = 0.55 + 0.35 * (1.0 - head) - 0.2 * v;
        if v < -0.25 {
            val += 0.25 * (0.5 + 0.5 * (40.0 * u).sin());
        }
        for ex in [-0.13, 0.13] {
            if ((u - ex) / 0.06).powi(2) + ((v + 0.08) / 0.035).powi(2) < 1.0 {
                val = 0.1;
            }
            if (u - ex).abs() < 0.08 && (v + 0.15).abs() < 0.012 {
                val = 0.2;
            }
        }
        if u.abs() < 0.02 && v > -0.04 && v < 0.1 {
            val -= 0.15;
        }
        if ((u / 0.14).powi(2) + ((v - 0.22) / 0.05).powi(2) - 1.0).abs() < 0.35 && v > 0.2 {
            val = 0.15;
        }
        val.clamp(0.0, 1.0)
    })
}

fn pgm_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(Error::Format("truncated PGM header".into()));
    }
    Ok(&bytes[start..*pos])
}

fn pgm_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = pgm_token(bytes, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::Format(format!("bad PGM {what}")))
}

/// Decodes a binary (P5) PGM with 8- or 16-bit samples.
pub fn decode_pgm(bytes: &[u8]) -> Result<RealGrid> {
    let mut pos = 0;
    if pgm_token(bytes, &mut pos)? != b"P5" {
        return Err(Error::Format("not a binary PGM (P5)".into()));
    }
    let w = pgm_number(bytes, &mut pos, "width")?;
    let h = pgm_number(bytes, &mut pos, "height")?;
    let maxval = pgm_number(bytes, &mut pos, "maxval")?;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("PGM maxval {maxval} out of range")));
    }
    pos += 1;
    let depth = if maxval < 256 { 1 } else { 2 };
    let need = w * h * depth;
    let payload = bytes.get(pos..).unwrap_or(&[]);
    if payload.len() < need {
        return Err(Error::Format(format!("PGM payload has {} bytes, expected {need}", payload.len())));
    }
    let data = if depth == 1 {
        payload[..need].iter().map(|&b| b as f64).collect()
    } else {
        payload[..need]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
            .collect()
    };
    RealGrid::from_vec(w, h, data)
}

pub fn read_pgm(path: &Path) -> Result<RealGrid> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode_pgm(&bytes)
}

/// Encodes `g` as a 16-bit P5 PGM, mapping `[0, max]` onto `[0, 65535]`.
pub fn encode_pgm16(g: &RealGrid) -> Vec<u8> {
    let peak = g.max();
    let scale = if peak > 0.0 { 65535.0 / peak } else { 0.0 };
    let mut out = format!("P5\n{} {}\n65535\n", g.width(), g.height()).into_bytes();
    for &v in g.data() {
        let q = (v * scale).round().clamp(0.0, 65535.0) as u16;
        out.extend_from_slice(&q.to_be_bytes());
    }
    out
}

/// Far-field intensity `|F(embedded)|²`.
pub fn simulate_mono(p: &Phantom) -> RealGrid {
    centered_fft(&p.embedded.to_complex())
        .abs()
        .map(|v| v * v)
        .with_domain(Domain::Pattern)
}

/// Broadband pattern built channel by channel from the object side.
pub fn simulate_poly_independent(p: &Phantom, spec: &BoundSpectrum) -> Result<RealGrid> {
    simulate_poly_independent_with_limit(p, spec, DEFAULT_MAX_PADDED)
}

pub fn simulate_poly_independent_with_limit(p: &Phantom, spec: &BoundSpectrum, max_padded: usize) -> Result<RealGrid> {
    let shape = p.embedded.shape();
    if spec.shape() != shape {
        return shape_err(format!(
            "spectrum bound to {}x{} but phantom grid is {}x{}",
            spec.shape().0,
            spec.shape().1,
            shape.0,
            shape.1
        ));
    }
    for ch in spec.channels() {
        let (bx, by) = ch.geometry.padded();
        if bx > max_padded || by > max_padded {
            return param_err(format!("channel grid {bx}x{by} exceeds the {max_padded} limit"));
        }
    }
    let parts: Vec<RealGrid> = spec
        .channels()
        .par_iter()
        .map(|ch| {
            let big = pad_center(&p.embedded, ch.geometry.padded())?;
            let far = centered_fft(&big.to_complex()).abs().map(|v| v * v);
            Ok(crop_center(&far, shape)?.scaled(ch.weight))
        })
        .collect::<Result<_>>()?;
    let mut out = RealGrid::zeros(shape.0, shape.1)?;
    for part in &parts {
        out.axpy(1.0, part)?;
    }
    Ok(out.with_domain(Domain::Pattern))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Region {
    Full,
    /// Central `(W / r) × (L / r)` block for the given maximum ratio.
    LowFrequency(f64),
}

/// Centered `(bw, bh)` block recoverable when the longest ratio is `r_max`.
pub fn low_frequency_block(shape: (usize, usize), r_max: f64) -> Result<(usize, usize)> {
    if !(r_max >= 1.0) {
        return param_err(format!("maximum ratio must be >= 1, got {r_max}"));
    }
    let bw = ((shape.0 as f64 / r_max).floor() as usize).max(1);
    let bh = ((shape.1 as f64 / r_max).floor() as usize).max(1);
    Ok((bw, bh))
}

fn region_values<'a>(g: &'a RealGrid, region: Region) -> Result<Box<dyn Iterator<Item = f64> + 'a>> {
    match region {
        Region::Full => Ok(Box::new(g.data().iter().copied())),
        Region::LowFrequency(r) => {
            let (bw, bh) = low_frequency_block(g.shape(), r)?;
            let (dx, dy) = g.dc();
            let (x0, y0) = (dx - bw / 2, dy - bh / 2);
            Ok(Box::new(
                (y0..y0 + bh).flat_map(move |y| (x0..x0 + bw).map(move |x| g[(x, y)])),
            ))
        }
    }
}

/// `‖x - ref‖ / ‖ref‖` over the region.
pub fn pattern_nrmse(x: &RealGrid, reference: &RealGrid, region: Region) -> Result<f64> {
    x.same_shape(reference, "pattern_nrmse")?;
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in region_values(x, region)?.zip(region_values(reference, region)?) {
        num += (a - b) * (a - b);
        den += b * b;
    }
    if den == 0.0 {
        return param_err("reference is zero over the region");
    }
    Ok((num / den).sqrt())
}

/// Fraction of `Σ g²` at radius `>= min_radius` pixels from DC.
pub fn radial_energy_fraction(g: &RealGrid, min_radius: f64) -> f64 {
    let (dx, dy) = g.dc();
    let (mut outer, mut total) = (0.0, 0.0);
    for y in 0..g.height() {
        for x in 0..g.width() {
            let v = g[(x, y)] * g[(x, y)];
            let (rx, ry) = (x as f64 - dx as f64, y as f64 - dy as f64);
            total += v;
            if (rx * rx + ry * ry).sqrt() >= min_radius {
                outer += v;
            }
        }
    }
    if total > 0.0 {
        outer / total
    } else {
        0.0
    }
}

/// `max |g(k) - g(-k)| / max |g|` over pixels whose mirror lies on the grid.
pub fn friedel_asymmetry(g: &RealGrid) -> f64 {
    let (w, h) = g.shape();
    let (dx, dy) = g.dc();
    let peak = g.data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for y in 0..h {
        for x in 0..w {
            let (mx, my) = (2 * dx as isize - x as isize, 2 * dy as isize - y as isize);
            if mx < 0 || my < 0 || mx >= w as isize || my >= h as isize {
                continue;
            }
            worst = worst.max((g[(x, y)] - g[(mx as usize, my as usize)]).abs());
        }
    }
    worst / peak
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum NoiseModel {
    /// Counting noise with the pattern scaled to this many photons in total.
    Poisson { photons: f64 },
    Gaussian { sigma: f64 },
}

/// Seeded noise; the result is returned in the input's units.
pub fn add_noise(b: &RealGrid, model: NoiseModel, seed: u64) -> Result<RealGrid> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match model {
        NoiseModel::Gaussian { sigma } => {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return param_err(format!("noise sigma must be >= 0, got {sigma}"));
            }
            if sigma == 0.0 {
                return Ok(b.clone());
            }
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidParameter(e.to_string()))?;
            Ok(b.map(|&v| v + normal.sample(&mut rng)))
        }
        NoiseModel::Poisson { photons } => {
            if !(photons > 0.0 && photons.is_finite()) {
                return param_err(format!("photon count must be positive, got {photons}"));
            }
            if b.min() < 0.0 {
                return param_err("Poisson noise needs a nonnegative pattern");
            }
            let total = b.sum();
            if total == 0.0 {
                return Ok(b.clone());
            }
            let scale = photons / total;
            let mut out = b.clone();
            for v in out.data_mut() {
                let mean = *v * scale;
                *v = if mean > 0.0 {
                    let dist = Poisson::new(mean).map_err(|e| Error::InvalidParameter(e.to_string()))?;
                    dist.sample(&mut rng) / scale
                } else {
                    0.0
                };
            }
            Ok(out)
        }
    }
}
