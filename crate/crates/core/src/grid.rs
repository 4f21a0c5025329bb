//! Two-dimensional grids with a DC-centered layout, centered DFTs and the
//! symmetric pad/crop primitives that the transfer operators are built from.
//!
//! Grids are stored row-major: `data[y * width + x]`. The zero-frequency
//! (or zero-lag) pixel sits at `(width / 2, height / 2)`.
//!
//! The forward transform is unnormalized and the inverse carries
//! `1 / (width * height)`, so `centered_ifft(centered_fft(g)) == g`.

use std::ops::{Index, IndexMut};
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{param_err, shape_err, Result};

/// What a grid represents. Carried through operations as metadata only.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum Domain {
    /// Reciprocal space: diffraction intensities or amplitudes.
    #[default]
    Pattern,
    /// Real-space object estimate.
    Object,
    /// Real-space autocorrelation (inverse transform of an intensity).
    Autocorrelation,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Grid2D<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
    domain: Domain,
}

pub type RealGrid = Grid2D<f64>;
pub type ComplexGrid = Grid2D<Complex64>;

fn check_shape(width: usize, height: usize) -> Result<()> {
    if width < 2 || height < 2 {
        return shape_err(format!("grid must be at least 2x2, got {width}x{height}"));
    }
    Ok(())
}

impl<T: Copy + Default> Grid2D<T> {
    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        check_shape(width, height)?;
        Ok(Self::zeros_unchecked(width, height))
    }

    pub(crate) fn zeros_unchecked(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![T::default(); width * height],
            domain: Domain::default(),
        }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        check_shape(width, height)?;
        if data.len() != width * height {
            return shape_err(format!(
                "data length {} does not match {width}x{height}",
                data.len()
            ));
        }
        Ok(Self {
            width,
            height,
            data,
            domain: Domain::default(),
        })
    }

    /// Builds a grid from `f(x, y)`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        check_shape(width, height)?;
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            data,
            domain: Domain::default(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// `(width, height)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn set_domain(&mut self, domain: Domain) {
        self.domain = domain;
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    /// Index of the DC pixel.
    pub fn dc(&self) -> (usize, usize) {
        (self.width / 2, self.height / 2)
    }

    /// Coordinates of pixel `(x, y)` relative to DC.
    pub fn centered_coords(&self, x: usize, y: usize) -> (isize, isize) {
        (
            x as isize - (self.width / 2) as isize,
            y as isize - (self.height / 2) as isize,
        )
    }

    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    pub fn map<U: Copy + Default>(&self, f: impl FnMut(&T) -> U) -> Grid2D<U> {
        Grid2D {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
            domain: self.domain,
        }
    }

    pub(crate) fn same_shape<U>(&self, other: &Grid2D<U>, what: &str) -> Result<()> {
        if self.shape() != (other.width, other.height) {
            return shape_err(format!(
                "{what}: {}x{} does not match {}x{}",
                self.width, self.height, other.width, other.height
            ));
        }
        Ok(())
    }
}

impl<T> Index<(usize, usize)> for Grid2D<T> {
    type Output = T;

    fn index(&self, (x, y): (usize, usize)) -> &T {
        &self.data[y * self.width + x]
    }
}

impl<T> IndexMut<(usize, usize)> for Grid2D<T> {
    fn index_mut(&mut self, (x, y): (usize, usize)) -> &mut T {
        &mut self.data[y * self.width + x]
    }
}

impl RealGrid {
    pub fn to_complex(&self) -> ComplexGrid {
        self.map(|&v| Complex64::new(v, 0.0))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn dot(&self, other: &RealGrid) -> Result<f64> {
        self.same_shape(other, "dot")?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scaled(&self, s: f64) -> RealGrid {
        self.map(|v| v * s)
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &RealGrid) -> Result<()> {
        self.same_shape(other, "axpy")?;
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
        Ok(())
    }

    /// Element-wise `self - other`.
    pub fn sub(&self, other: &RealGrid) -> Result<RealGrid> {
        self.same_shape(other, "sub")?;
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        Ok(out)
    }
}

impl ComplexGrid {
    pub fn re(&self) -> RealGrid {
        self.map(|c| c.re)
    }

    pub fn im(&self) -> RealGrid {
        self.map(|c| c.im)
    }

    pub fn abs(&self) -> RealGrid {
        self.map(|c| c.norm())
    }

    pub fn norm_sqr(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }
}

fn planner() -> &'static Mutex<FftPlanner<f64>> {
    static PLANNER: OnceLock<Mutex<FftPlanner<f64>>> = OnceLock::new();
    PLANNER.get_or_init(|| Mutex::new(FftPlanner::new()))
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    let mut planner = planner().lock().unwrap_or_else(|e| e.into_inner());
    if inverse {
        planner.plan_fft_inverse(len)
    } else {
        planner.plan_fft_forward(len)
    }
}

/// Raw (unshifted) index of centered coordinate `c` on a length-`n` axis.
#[inline]
fn wrap(c: isize, n: usize) -> usize {
    c.rem_euclid(n as isize) as usize
}

/// `crop(T_B(pad(g, B)), shape(g))` where `T_B` is the centered transform on
/// a `bx x by` grid. Only the rows and columns that survive the crop are
/// transformed. With `B == shape(g)` this is the plain centered transform.
fn padded_transform(g: &ComplexGrid, bx: usize, by: usize, inverse: bool) -> ComplexGrid {
    let (w, h) = g.shape();
    let cx = (w / 2) as isize;
    let cy = (h / 2) as isize;
    let xs: Vec<usize> = (0..w).map(|x| wrap(x as isize - cx, bx)).collect();
    let ys: Vec<usize> = (0..h).map(|y| wrap(y as isize - cy, by)).collect();

    let fx = plan(bx, inverse);
    let mut rows = vec![Complex64::default(); h * bx];
    for y in 0..h {
        let row = &mut rows[y * bx..(y + 1) * bx];
        for x in 0..w {
            row[xs[x]] = g.data[y * w + x];
        }
    }
    let mut scratch = vec![Complex64::default(); fx.get_inplace_scratch_len()];
    fx.process_with_scratch(&mut rows, &mut scratch);

    let fy = plan(by, inverse);
    let mut cols = vec![Complex64::default(); w * by];
    for y in 0..h {
        for x in 0..w {
            cols[x * by + ys[y]] = rows[y * bx + xs[x]];
        }
    }
    scratch.resize(fy.get_inplace_scratch_len(), Complex64::default());
    fy.process_with_scratch(&mut cols, &mut scratch);

    let scale = if inverse { 1.0 / (bx * by) as f64 } else { 1.0 };
    let mut out = ComplexGrid::zeros_unchecked(w, h);
    out.domain = g.domain;
    for y in 0..h {
        for x in 0..w {
            out.data[y * w + x] = cols[x * by + ys[y]] * scale;
        }
    }
    out
}

/// Unnormalized forward DFT with DC centered on input and output.
pub fn centered_fft(g: &ComplexGrid) -> ComplexGrid {
    let (w, h) = g.shape();
    padded_transform(g, w, h, false)
}

/// Inverse of [`centered_fft`], carrying the `1 / (W * L)` factor.
pub fn centered_ifft(g: &ComplexGrid) -> ComplexGrid {
    let (w, h) = g.shape();
    padded_transform(g, w, h, true)
}

fn check_padded(g: &ComplexGrid, target: (usize, usize)) -> Result<()> {
    let (w, h) = g.shape();
    let (bx, by) = target;
    if bx < w || by < h || (bx - w) % 2 != 0 || (by - h) % 2 != 0 {
        return shape_err(format!(
            "cannot pad {w}x{h} symmetrically to {bx}x{by}"
        ));
    }
    Ok(())
}

/// `crop_center(centered_fft(pad_center(g, target)), shape(g))`, computed
/// without materializing the padded spectrum.
pub fn padded_centered_fft(g: &ComplexGrid, target: (usize, usize)) -> Result<ComplexGrid> {
    check_padded(g, target)?;
    Ok(padded_transform(g, target.0, target.1, false))
}

/// `crop_center(centered_ifft(pad_center(g, target)), shape(g))`. The inverse
/// normalization is `1 / (target.0 * target.1)`.
pub fn padded_centered_ifft(g: &ComplexGrid, target: (usize, usize)) -> Result<ComplexGrid> {
    check_padded(g, target)?;
    Ok(padded_transform(g, target.0, target.1, true))
}

/// Zero-pads `g` to `target`, keeping its DC pixel on the target's DC pixel.
pub fn pad_center<T: Copy + Default>(g: &Grid2D<T>, target: (usize, usize)) -> Result<Grid2D<T>> {
    let (w, h) = g.shape();
    let (tw, th) = target;
    if tw < w || th < h {
        return shape_err(format!("pad target {tw}x{th} is smaller than {w}x{h}"));
    }
    if (tw - w) % 2 != 0 || (th - h) % 2 != 0 {
        return shape_err(format!(
            "pad from {w}x{h} to {tw}x{th} needs even differences"
        ));
    }
    let ox = (tw - w) / 2;
    let oy = (th - h) / 2;
    let mut out = Grid2D::<T>::zeros_unchecked(tw, th);
    out.domain = g.domain;
    for y in 0..h {
        out.data[(y + oy) * tw + ox..(y + oy) * tw + ox + w]
            .copy_from_slice(&g.data[y * w..(y + 1) * w]);
    }
    Ok(out)
}

/// Central `target` window of `g`; the DC pixel is preserved.
pub fn crop_center<T: Copy + Default>(g: &Grid2D<T>, target: (usize, usize)) -> Result<Grid2D<T>> {
    let (w, h) = g.shape();
    let (tw, th) = target;
    if tw > w || th > h {
        return shape_err(format!("crop target {tw}x{th} is larger than {w}x{h}"));
    }
    if (w - tw) % 2 != 0 || (h - th) % 2 != 0 {
        return shape_err(format!(
            "crop from {w}x{h} to {tw}x{th} needs even differences"
        ));
    }
    check_shape(tw, th)?;
    let ox = (w - tw) / 2;
    let oy = (h - th) / 2;
    let mut out = Grid2D::<T>::zeros_unchecked(tw, th);
    out.domain = g.domain;
    for y in 0..th {
        out.data[y * tw..(y + 1) * tw]
            .copy_from_slice(&g.data[(y + oy) * w + ox..(y + oy) * w + ox + tw]);
    }
    Ok(out)
}

/// Places `g` inside a zero grid of `target` size with its center on the
/// target's DC pixel. Unlike [`pad_center`] the size differences may be odd.
pub fn embed_center<T: Copy + Default>(g: &Grid2D<T>, target: (usize, usize)) -> Result<Grid2D<T>> {
    let (w, h) = g.shape();
    let (tw, th) = target;
    if tw < w || th < h {
        return param_err(format!("cannot embed {w}x{h} into {tw}x{th}"));
    }
    let ox = tw / 2 - w / 2;
    let oy = th / 2 - h / 2;
    let mut out = Grid2D::<T>::zeros(tw, th)?;
    out.domain = g.domain;
    for y in 0..h {
        out.data[(y + oy) * tw + ox..(y + oy) * tw + ox + w]
            .copy_from_slice(&g.data[y * w..(y + 1) * w]);
    }
    Ok(out)
}
