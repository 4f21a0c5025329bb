//! Wavelength-transfer operators.
//!
//! A pattern recorded at the reference wavelength is carried to a longer
//! wavelength by zero-padding its autocorrelation and cropping the finer
//! sampled pattern back to the detector window:
//!
//! ```text
//! A(x)  = Re CROP_W { FFT_B { PAD_B [ IFFT_W (x) ] } }
//! Aᵀ(z) = (B/W) Re FFT_W { CROP_W { IFFT_B [ PAD_B (z) ] } }
//! ```
//!
//! where `B/W` stands for the padded-to-base area ratio. The operators are
//! matrix-free; [`dense_matrix`] materializes the same map from its
//! exponential kernel for validation on small grids.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{param_err, shape_err, Result};
use crate::grid::{
    centered_fft, centered_ifft, crop_center, padded_centered_fft, padded_centered_ifft,
    ComplexGrid, RealGrid,
};

/// One wavelength channel on a fixed detector grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TransferGeometry {
    base: (usize, usize),
    ratio: f64,
    pad: (usize, usize),
}

impl TransferGeometry {
    /// Pads are `round((r - 1) * W / 2)` per side, so the padded grid is
    /// always a symmetric, even extension of the base grid.
    pub fn for_ratio(ratio: f64, base: (usize, usize)) -> Result<Self> {
        if !ratio.is_finite() || ratio < 1.0 {
            return param_err(format!(
                "wavelength ratio must be >= 1 (a pattern can only be carried to longer wavelengths), got {ratio}"
            ));
        }
        let (w, h) = base;
        if w < 2 || h < 2 {
            return shape_err(format!("base grid must be at least 2x2, got {w}x{h}"));
        }
        let px = ((ratio - 1.0) * w as f64 / 2.0).round() as usize;
        let py = ((ratio - 1.0) * h as f64 / 2.0).round() as usize;
        Ok(Self {
            base,
            ratio,
            pad: (px, py),
        })
    }

    pub fn base(&self) -> (usize, usize) {
        self.base
    }

    /// The ratio that was asked for.
    pub fn requested_ratio(&self) -> f64 {
        self.ratio
    }

    pub fn pad(&self) -> (usize, usize) {
        self.pad
    }

    pub fn padded(&self) -> (usize, usize) {
        (self.base.0 + 2 * self.pad.0, self.base.1 + 2 * self.pad.1)
    }

    /// Ratio actually realized by the integer padding, per axis.
    pub fn realized_ratio(&self) -> (f64, f64) {
        let (bx, by) = self.padded();
        (
            bx as f64 / self.base.0 as f64,
            by as f64 / self.base.1 as f64,
        )
    }

    /// `(Bx * By) / (W * L)`.
    pub fn area_ratio(&self) -> f64 {
        let (bx, by) = self.padded();
        (bx * by) as f64 / (self.base.0 * self.base.1) as f64
    }

    pub fn is_identity(&self) -> bool {
        self.pad == (0, 0)
    }

    fn check(&self, g: &RealGrid, what: &str) -> Result<()> {
        if g.shape() != self.base {
            return shape_err(format!(
                "{what}: grid is {}x{} but geometry expects {}x{}",
                g.width(),
                g.height(),
                self.base.0,
                self.base.1
            ));
        }
        Ok(())
    }
}

/// Convenience alias for [`TransferGeometry::for_ratio`].
pub fn geometry_for_ratio(ratio: f64, shape: (usize, usize)) -> Result<TransferGeometry> {
    TransferGeometry::for_ratio(ratio, shape)
}

/// The transfer operator before the real part is taken.
pub fn apply_transfer_complex(x: &RealGrid, geom: &TransferGeometry) -> Result<ComplexGrid> {
    geom.check(x, "apply_transfer")?;
    if geom.is_identity() {
        return Ok(x.to_complex());
    }
    let autocorr = centered_ifft(&x.to_complex());
    let mut out = padded_centered_fft(&autocorr, geom.padded())?;
    out.set_domain(x.domain());
    Ok(out)
}

/// Carries a reference-wavelength pattern to the channel described by `geom`.
pub fn apply_transfer(x: &RealGrid, geom: &TransferGeometry) -> Result<RealGrid> {
    Ok(apply_transfer_complex(x, geom)?.re())
}

/// Like [`apply_transfer`], also returning the 2-norm of the discarded
/// imaginary part.
pub fn apply_transfer_tracked(x: &RealGrid, geom: &TransferGeometry) -> Result<(RealGrid, f64)> {
    let c = apply_transfer_complex(x, geom)?;
    let residue = c.im().norm();
    Ok((c.re(), residue))
}

/// Exact transpose of [`apply_transfer`] under the Euclidean inner product.
pub fn apply_adjoint(z: &RealGrid, geom: &TransferGeometry) -> Result<RealGrid> {
    geom.check(z, "apply_adjoint")?;
    if geom.is_identity() {
        return Ok(z.clone());
    }
    let back = padded_centered_ifft(&z.to_complex(), geom.padded())?;
    let scale = geom.area_ratio();
    let mut out = centered_fft(&back).re();
    out.data_mut().iter_mut().for_each(|v| *v *= scale);
    out.set_domain(z.domain());
    Ok(out)
}

/// The full magnified pattern on the padded grid, before cropping:
/// `FFT_B { PAD_B [ IFFT_W (x) ] }`.
pub fn magnify_uncropped(x: &RealGrid, geom: &TransferGeometry) -> Result<ComplexGrid> {
    geom.check(x, "magnify_uncropped")?;
    let autocorr = centered_ifft(&x.to_complex());
    let padded = crate::grid::pad_center(&autocorr, geom.padded())?;
    Ok(centered_fft(&padded))
}

/// Which spatial-frequency range the dense kernel sums over.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SummationRange {
    /// `k` over the base window `[-W/2, W/2)`; reproduces the operator
    /// exactly because the padded autocorrelation vanishes elsewhere.
    #[default]
    Reduced,
    /// `k` over the full padded window `[-B/2, B/2)`.
    Full,
}

/// Largest `W * L` accepted by [`dense_matrix`].
pub const DENSE_MAX_PIXELS: usize = 4096;

/// Explicit `(W L) x (W L)` transfer matrix. Pixel index is `y * W + x`.
#[derive(Clone, Debug)]
pub struct DenseTransfer {
    shape: (usize, usize),
    entries: Vec<Complex64>,
}

impl DenseTransfer {
    /// Number of rows (and columns).
    pub fn dim(&self) -> usize {
        self.shape.0 * self.shape.1
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn entry(&self, m: usize, n: usize) -> Complex64 {
        self.entries[m * self.dim() + n]
    }

    /// Real part, row-major.
    pub fn real_entries(&self) -> Vec<f64> {
        self.entries.iter().map(|c| c.re).collect()
    }

    /// `Re(A) x`, matching [`apply_transfer`] for real input.
    pub fn apply(&self, x: &RealGrid) -> Result<RealGrid> {
        self.check(x)?;
        let n = self.dim();
        let xs = x.data();
        let out: Vec<f64> = (0..n)
            .map(|m| {
                self.entries[m * n..(m + 1) * n]
                    .iter()
                    .zip(xs)
                    .map(|(a, v)| a.re * v)
                    .sum()
            })
            .collect();
        RealGrid::from_vec(self.shape.0, self.shape.1, out)
    }

    /// `Re(A)ᵀ z`, matching [`apply_adjoint`].
    pub fn apply_transpose(&self, z: &RealGrid) -> Result<RealGrid> {
        self.check(z)?;
        let n = self.dim();
        let mut out = vec![0.0; n];
        for (m, zm) in z.data().iter().enumerate() {
            for (o, a) in out.iter_mut().zip(&self.entries[m * n..(m + 1) * n]) {
                *o += a.re * zm;
            }
        }
        RealGrid::from_vec(self.shape.0, self.shape.1, out)
    }

    fn check(&self, g: &RealGrid) -> Result<()> {
        if g.shape() != self.shape {
            return shape_err(format!(
                "dense matrix is for {}x{}, got {}x{}",
                self.shape.0,
                self.shape.1,
                g.width(),
                g.height()
            ));
        }
        Ok(())
    }
}

/// Builds the transfer matrix by direct summation of
/// `A_mn = 1/(W L) Σ_{k,l} exp{ j2π [ k (x_m/Bx - x_n/W) + l (y_m/By - y_n/L) ] }`
/// with coordinates measured from DC.
pub fn dense_matrix(geom: &TransferGeometry, range: SummationRange) -> Result<DenseTransfer> {
    let (w, h) = geom.base();
    let n = w * h;
    if n > DENSE_MAX_PIXELS {
        return param_err(format!(
            "dense transfer matrix limited to {DENSE_MAX_PIXELS} pixels, got {n}"
        ));
    }
    let (bx, by) = geom.padded();
    let (kw, kh) = match range {
        SummationRange::Reduced => (w, h),
        SummationRange::Full => (bx, by),
    };
    let ks: Vec<f64> = (0..kw).map(|k| k as f64 - (kw / 2) as f64).collect();
    let ls: Vec<f64> = (0..kh).map(|l| l as f64 - (kh / 2) as f64).collect();
    let coord = |i: usize| {
        (
            (i % w) as f64 - (w / 2) as f64,
            (i / w) as f64 - (h / 2) as f64,
        )
    };
    let norm = 1.0 / n as f64;
    let mut entries = vec![Complex64::default(); n * n];
    for m in 0..n {
        let (xm, ym) = coord(m);
        for nn in 0..n {
            let (xn, yn) = coord(nn);
            let u = xm / bx as f64 - xn / w as f64;
            let v = ym / by as f64 - yn / h as f64;
            let mut acc = Complex64::default();
            for &l in &ls {
                for &k in &ks {
                    acc += Complex64::from_polar(1.0, 2.0 * PI * (k * u + l * v));
                }
            }
            entries[m * n + nn] = acc * norm;
        }
    }
    Ok(DenseTransfer {
        shape: (w, h),
        entries,
    })
}

fn bilinear(x: &RealGrid, sx: f64, sy: f64) -> f64 {
    let (w, h) = x.shape();
    if sx < 0.0 || sy < 0.0 || sx > (w - 1) as f64 || sy > (h - 1) as f64 {
        return 0.0;
    }
    let x0 = sx.floor() as usize;
    let y0 = sy.floor() as usize;
    let fx = sx - x0 as f64;
    let fy = sy - y0 as f64;
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    x[(x0, y0)] * (1.0 - fx) * (1.0 - fy)
        + x[(x1, y0)] * fx * (1.0 - fy)
        + x[(x0, y1)] * (1.0 - fx) * fy
        + x[(x1, y1)] * fx * fy
}

/// Magnifies `x` about DC by `(rx, ry)` onto an `out` grid using bilinear
/// interpolation, zero outside the source extent.
fn magnify_bilinear(x: &RealGrid, (rx, ry): (f64, f64), out: (usize, usize)) -> Result<RealGrid> {
    let (cx, cy) = x.dc();
    let (ocx, ocy) = (out.0 / 2, out.1 / 2);
    let mut g = RealGrid::from_fn(out.0, out.1, |i, j| {
        let u = i as f64 - ocx as f64;
        let v = j as f64 - ocy as f64;
        bilinear(x, cx as f64 + u / rx, cy as f64 + v / ry)
    })?;
    g.set_domain(x.domain());
    Ok(g)
}

/// Interpolation baseline: magnify by `r` about DC and keep the detector window.
pub fn interpolation_transfer(x: &RealGrid, ratio: f64) -> Result<RealGrid> {
    if !ratio.is_finite() || ratio < 1.0 {
        return param_err(format!("wavelength ratio must be >= 1, got {ratio}"));
    }
    magnify_bilinear(x, (ratio, ratio), x.shape())
}

/// Interpolation baseline onto the full padded grid of `geom` (no crop).
pub fn interpolation_magnify(x: &RealGrid, geom: &TransferGeometry) -> Result<RealGrid> {
    geom.check(x, "interpolation_magnify")?;
    magnify_bilinear(x, geom.realized_ratio(), geom.padded())
}

/// Fraction of autocorrelation energy of `pattern` lying outside the central
/// `core` window.
pub fn autocorrelation_leakage(pattern: &ComplexGrid, core: (usize, usize)) -> Result<f64> {
    let auto = centered_ifft(pattern);
    let total = auto.norm_sqr();
    if total == 0.0 {
        return Ok(0.0);
    }
    let (w, h) = auto.shape();
    let (cw, ch) = core;
    if cw > w || ch > h || (w - cw) % 2 != 0 || (h - ch) % 2 != 0 {
        return shape_err(format!("core window {cw}x{ch} does not fit {w}x{h}"));
    }
    let inside = crop_center(&auto, core)?.norm_sqr();
    Ok(((total - inside) / total).max(0.0))
}
