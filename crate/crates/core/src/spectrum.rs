//! Illumination spectra and the polychromatic forward model
//! `b = Σ_i a_i A_i(x)`.

use rayon::prelude::*;

use crate::error::{param_err, Result};
use crate::grid::{centered_fft, centered_ifft, padded_centered_fft, padded_centered_ifft, ComplexGrid, RealGrid};
use crate::transfer::TransferGeometry;

/// One spectral line: wavelength relative to the reference, and its weight.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Channel {
    pub ratio: f64,
    pub weight: f64,
}

/// Ordered, validated list of channels. The first channel has ratio 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    channels: Vec<Channel>,
}

impl Spectrum {
    /// Validates and normalizes a channel list: channels are sorted by
    /// ratio, equal ratios are merged, and ratios are divided by the
    /// smallest so the spectrum is anchored at 1.
    pub fn new(mut channels: Vec<Channel>) -> Result<Self> {
        if channels.is_empty() {
            return param_err("spectrum needs at least one channel");
        }
        for c in &channels {
            if !c.ratio.is_finite() || c.ratio <= 0.0 {
                return param_err(format!("channel ratio must be positive and finite, got {}", c.ratio));
            }
            if !c.weight.is_finite() || c.weight < 0.0 {
                return param_err(format!("channel weight must be >= 0 and finite, got {}", c.weight));
            }
        }
        if !channels.iter().any(|c| c.weight > 0.0) {
            return param_err("spectrum needs at least one positive weight");
        }
        channels.sort_by(|a, b| a.ratio.total_cmp(&b.ratio));
        let mut merged: Vec<Channel> = Vec::with_capacity(channels.len());
        for c in channels {
            match merged.last_mut() {
                Some(last) if (c.ratio - last.ratio).abs() <= 1e-12 * last.ratio => {
                    last.weight += c.weight
                }
                _ => merged.push(c),
            }
        }
        let anchor = merged[0].ratio;
        for c in &mut merged {
            c.ratio /= anchor;
        }
        merged[0].ratio = 1.0;
        Ok(Self { channels: merged })
    }

    /// Spectrum from parallel ratio and weight tables.
    pub fn from_table(ratios: &[f64], weights: &[f64]) -> Result<Self> {
        if ratios.len() != weights.len() {
            return param_err(format!(
                "{} ratios but {} weights",
                ratios.len(),
                weights.len()
            ));
        }
        Self::new(
            ratios
                .iter()
                .zip(weights)
                .map(|(&ratio, &weight)| Channel { ratio, weight })
                .collect(),
        )
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn max_ratio(&self) -> f64 {
        self.channels.last().map_or(1.0, |c| c.ratio)
    }

    pub fn weight_sum(&self) -> f64 {
        self.channels.iter().map(|c| c.weight).sum()
    }

    /// Same channels with every weight multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.channels
                .iter()
                .map(|ch| Channel {
                    ratio: ch.ratio,
                    weight: ch.weight * c,
                })
                .collect(),
        )
    }

    /// Weights rescaled to sum to one.
    pub fn sum_normalized(&self) -> Self {
        let s = self.weight_sum();
        Self {
            channels: self
                .channels
                .iter()
                .map(|ch| Channel {
                    ratio: ch.ratio,
                    weight: ch.weight / s,
                })
                .collect(),
        }
    }

    /// Resolves every channel to a transfer geometry on `shape`. Channels
    /// that round to the same padding are merged by summing their weights;
    /// zero-weight channels are dropped.
    pub fn bind(&self, shape: (usize, usize)) -> Result<BoundSpectrum> {
        let mut channels: Vec<BoundChannel> = Vec::new();
        for c in &self.channels {
            let geometry = TransferGeometry::for_ratio(c.ratio, shape)?;
            if c.weight == 0.0 {
                continue;
            }
            match channels.last_mut() {
                Some(last) if last.geometry.pad() == geometry.pad() => {
                    last.weight += c.weight;
                    last.members += 1;
                }
                _ => channels.push(BoundChannel {
                    geometry,
                    weight: c.weight,
                    members: 1,
                }),
            }
        }
        Ok(BoundSpectrum {
            shape,
            channels,
            requested: self.channels.len(),
        })
    }
}

/// Harmonic comb: harmonic `q` has wavelength proportional to `1/q`, so its
/// ratio to the highest harmonic is `q_max / q`. Weights pair with orders
/// by position.
pub fn harmonics_spectrum(orders: &[u32], weights: &[f64]) -> Result<Spectrum> {
    if orders.len() != weights.len() {
        return param_err(format!(
            "{} harmonic orders but {} weights",
            orders.len(),
            weights.len()
        ));
    }
    if orders.contains(&0) {
        return param_err("harmonic orders must be positive");
    }
    let q_max = orders.iter().copied().max().ok_or_else(|| {
        crate::Error::InvalidParameter("spectrum needs at least one harmonic".into())
    })? as f64;
    Spectrum::new(
        orders
            .iter()
            .zip(weights)
            .map(|(&q, &weight)| Channel {
                ratio: q_max / q as f64,
                weight,
            })
            .collect(),
    )
}

fn continuous_lines(center: f64, bandwidth: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    if !(center.is_finite() && center > 0.0) {
        return param_err(format!("center wavelength must be positive, got {center}"));
    }
    if !(bandwidth > 0.0 && bandwidth < 2.0) {
        return param_err(format!("fractional bandwidth must be in (0, 2), got {bandwidth}"));
    }
    if points < 2 {
        return param_err(format!("continuous spectrum needs at least 2 points, got {points}"));
    }
    let lo = center * (1.0 - bandwidth / 2.0);
    let hi = center * (1.0 + bandwidth / 2.0);
    let fwhm = bandwidth * center;
    let ln2 = std::f64::consts::LN_2;
    let mut lines: Vec<(f64, f64)> = (0..points)
        .map(|j| {
            let lambda = lo + (hi - lo) * j as f64 / (points - 1) as f64;
            let d = (lambda - center) / fwhm;
            (lambda, (-4.0 * ln2 * d * d).exp())
        })
        .collect();
    let peak = lines.iter().map(|l| l.1).fold(0.0, f64::max);
    for l in &mut lines {
        l.1 /= peak;
    }
    Ok(lines)
}

/// `points` wavelengths spanning `center * (1 ± bandwidth / 2)` with a
/// Gaussian profile whose FWHM is `bandwidth * center`, normalized to peak 1.
/// Ratios are relative to the shortest wavelength of the span.
pub fn continuous_spectrum(center: f64, bandwidth: f64, points: usize) -> Result<Spectrum> {
    let lines = continuous_lines(center, bandwidth, points)?;
    let lo = lines[0].0;
    Spectrum::new(
        lines
            .into_iter()
            .map(|(lambda, weight)| Channel {
                ratio: lambda / lo,
                weight,
            })
            .collect(),
    )
}

/// Like [`continuous_spectrum`], but ratios are taken relative to an
/// explicit `reference` wavelength at or below the span. When the reference
/// lies below the span it is included as a zero-weight channel, so the
/// recovered pattern is the one at the reference wavelength.
pub fn continuous_spectrum_with_reference(
    center: f64,
    bandwidth: f64,
    points: usize,
    reference: f64,
) -> Result<Spectrum> {
    let lines = continuous_lines(center, bandwidth, points)?;
    let lo = lines[0].0;
    if !(reference > 0.0 && reference <= lo * (1.0 + 1e-12)) {
        return param_err(format!(
            "reference wavelength {reference} must be positive and not longer than {lo}"
        ));
    }
    let mut channels: Vec<Channel> = lines
        .into_iter()
        .map(|(lambda, weight)| Channel {
            ratio: lambda / reference,
            weight,
        })
        .collect();
    channels.push(Channel {
        ratio: 1.0,
        weight: 0.0,
    });
    Spectrum::new(channels)
}

/// A channel resolved to a geometry on a concrete grid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundChannel {
    pub geometry: TransferGeometry,
    pub weight: f64,
    /// Number of requested channels merged into this one.
    pub members: usize,
}

/// A spectrum bound to a grid shape.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundSpectrum {
    shape: (usize, usize),
    channels: Vec<BoundChannel>,
    requested: usize,
}

/// How each channel's transpose is weighted when forming the back-projection.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum AdjointScaling {
    /// The true adjoint of `apply_poly`.
    #[default]
    Exact,
    /// Each channel's adjoint divided by its padded-to-base area ratio, i.e.
    /// `FFT_W { CROP { IFFT_B [ PAD (z) ] } }` taken literally with the
    /// inverse transform carrying its own normalization.
    ChannelNormalized,
}

impl BoundSpectrum {
    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn channels(&self) -> &[BoundChannel] {
        &self.channels
    }

    /// Number of channels in the source spectrum before merging.
    pub fn requested_channels(&self) -> usize {
        self.requested
    }

    /// Largest realized ratio over both axes.
    pub fn max_realized_ratio(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| {
                let (rx, ry) = c.geometry.realized_ratio();
                rx.max(ry)
            })
            .fold(1.0, f64::max)
    }

    /// Smallest realized ratio among weighted channels.
    pub fn min_realized_ratio(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| {
                let (rx, ry) = c.geometry.realized_ratio();
                rx.min(ry)
            })
            .fold(f64::INFINITY, f64::min)
    }

    fn check(&self, g: &RealGrid, what: &str) -> Result<()> {
        if g.shape() != self.shape {
            return Err(crate::Error::Shape(format!(
                "{what}: grid is {}x{} but spectrum is bound to {}x{}",
                g.width(),
                g.height(),
                self.shape.0,
                self.shape.1
            )));
        }
        Ok(())
    }
}

/// Polychromatic forward model `Σ_i a_i A_i(x)`.
///
/// Channels are evaluated in parallel and summed in channel order, so the
/// result does not depend on the thread count.
pub fn apply_poly(x: &RealGrid, spec: &BoundSpectrum) -> Result<RealGrid> {
    spec.check(x, "apply_poly")?;
    let autocorr = centered_ifft(&x.to_complex());
    let parts: Vec<Option<ComplexGrid>> = spec
        .channels
        .par_iter()
        .map(|c| {
            if c.geometry.is_identity() {
                Ok(None)
            } else {
                padded_centered_fft(&autocorr, c.geometry.padded()).map(Some)
            }
        })
        .collect::<Result<_>>()?;
    let mut out = RealGrid::zeros_unchecked(spec.shape.0, spec.shape.1);
    out.set_domain(x.domain());
    for (c, part) in spec.channels.iter().zip(&parts) {
        match part {
            None => {
                for (o, v) in out.data_mut().iter_mut().zip(x.data()) {
                    *o += c.weight * v;
                }
            }
            Some(p) => {
                for (o, v) in out.data_mut().iter_mut().zip(p.data()) {
                    *o += c.weight * v.re;
                }
            }
        }
    }
    Ok(out)
}

/// Exact adjoint of [`apply_poly`].
pub fn apply_poly_adjoint(z: &RealGrid, spec: &BoundSpectrum) -> Result<RealGrid> {
    apply_poly_adjoint_scaled(z, spec, AdjointScaling::Exact)
}

/// Back-projection `Σ_i c_i A_iᵀ(z)` with per-channel factors chosen by `scaling`.
pub fn apply_poly_adjoint_scaled(
    z: &RealGrid,
    spec: &BoundSpectrum,
    scaling: AdjointScaling,
) -> Result<RealGrid> {
    spec.check(z, "apply_poly_adjoint")?;
    let zc = z.to_complex();
    let coefficient = |c: &BoundChannel| match scaling {
        AdjointScaling::Exact => c.weight * c.geometry.area_ratio(),
        AdjointScaling::ChannelNormalized => c.weight,
    };
    let parts: Vec<Option<ComplexGrid>> = spec
        .channels
        .par_iter()
        .map(|c| {
            if c.geometry.is_identity() {
                Ok(None)
            } else {
                padded_centered_ifft(&zc, c.geometry.padded()).map(Some)
            }
        })
        .collect::<Result<_>>()?;

    let (w, h) = spec.shape;
    let mut acc = ComplexGrid::zeros_unchecked(w, h);
    let mut any_padded = false;
    for (c, part) in spec.channels.iter().zip(&parts) {
        if let Some(p) = part {
            any_padded = true;
            let k = coefficient(c);
            for (a, v) in acc.data_mut().iter_mut().zip(p.data()) {
                *a += v * k;
            }
        }
    }
    let mut out = if any_padded {
        centered_fft(&acc).re()
    } else {
        RealGrid::zeros_unchecked(w, h)
    };
    for c in spec.channels.iter().filter(|c| c.geometry.is_identity()) {
        out.axpy(coefficient(c), z)?;
    }
    out.set_domain(z.domain());
    Ok(out)
}
