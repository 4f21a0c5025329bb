//! Phase retrieval from a monochromatic intensity pattern: hybrid
//! input-output (HIO) and relaxed averaged alternating reflections (RAAR),
//! with periodic shrink-wrap support refinement.
//!
//! The measured modulus constraint `P_M` replaces the Fourier modulus of the
//! iterate with `sqrt(pattern)` and keeps its phase. The object constraint
//! `P_S` zeroes everything outside the support and, for real objects, drops
//! the imaginary part and clips negatives inside it.

use std::io::Write;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{param_err, shape_err, Error, Result};
use crate::grid::{centered_fft, centered_ifft, ComplexGrid, Domain, Grid2D, RealGrid};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Algorithm {
    #[default]
    Hio,
    Raar,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShrinkWrap {
    /// Iterations between support updates. Zero disables shrink-wrap.
    pub interval: usize,
    pub sigma: f64,
    /// Factor applied to `sigma` after each update.
    pub decay: f64,
    pub min_sigma: f64,
    /// Fraction of the blurred maximum kept in the support.
    pub threshold: f64,
}

impl Default for ShrinkWrap {
    fn default() -> Self {
        Self {
            interval: 20,
            sigma: 3.0,
            decay: 0.98,
            min_sigma: 1.5,
            threshold: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RetrievalConfig {
    pub algorithm: Algorithm,
    pub beta: f64,
    pub iterations: usize,
    pub shrinkwrap: ShrinkWrap,
    /// Autocorrelation threshold for the initial support, as a fraction of its maximum.
    pub initial_threshold: f64,
    pub seed: u64,
    /// Drop the realness and positivity constraints.
    pub complex_object: bool,
    /// Clip negative values inside the support (real objects only).
    pub positivity: bool,
    /// Independent starts for [`reconstruct`]; start `k` uses seed `seed + k`.
    pub restarts: usize,
    /// Central block of the pattern that carries trusted moduli. Outside it
    /// the Fourier modulus is left free. `None` trusts the whole grid.
    pub measured_window: Option<(usize, usize)>,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Hio,
            beta: 0.9,
            iterations: 2000,
            shrinkwrap: ShrinkWrap::default(),
            initial_threshold: 0.04,
            seed: 0,
            complex_object: false,
            positivity: true,
            restarts: 8,
            measured_window: None,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return param_err(format!("beta must be in (0, 1), got {}", self.beta));
        }
        if self.iterations == 0 {
            return param_err("iterations must be at least 1");
        }
        if self.restarts == 0 {
            return param_err("restarts must be at least 1");
        }
        if !(self.initial_threshold > 0.0 && self.initial_threshold < 1.0) {
            return param_err(format!("initial threshold must be in (0, 1), got {}", self.initial_threshold));
        }
        let sw = &self.shrinkwrap;
        if !(sw.threshold > 0.0 && sw.threshold < 1.0) {
            return param_err(format!("shrink-wrap threshold must be in (0, 1), got {}", sw.threshold));
        }
        if !(sw.sigma > 0.0 && sw.min_sigma > 0.0 && sw.sigma.is_finite()) {
            return param_err("shrink-wrap sigma must be positive");
        }
        if !(sw.decay > 0.0 && sw.decay <= 1.0) {
            return param_err(format!("shrink-wrap decay must be in (0, 1], got {}", sw.decay));
        }
        Ok(())
    }
}

/// Boolean support on the object grid.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SupportMask {
    width: usize,
    height: usize,
    mask: Vec<bool>,
    updated_at: usize,
}

impl SupportMask {
    pub fn new(width: usize, height: usize, mask: Vec<bool>, updated_at: usize) -> Result<Self> {
        if mask.len() != width * height {
            return shape_err(format!("support of {} pixels for a {width}x{height} grid", mask.len()));
        }
        if !mask.iter().any(|&m| m) {
            return param_err("support is empty");
        }
        Ok(Self {
            width,
            height,
            mask,
            updated_at,
        })
    }

    /// Pixels strictly above `threshold * max(g)`.
    pub fn from_threshold(g: &RealGrid, threshold: f64, updated_at: usize) -> Result<Self> {
        let cut = threshold * g.max();
        Self::new(
            g.width(),
            g.height(),
            g.data().iter().map(|&v| v > cut).collect(),
            updated_at,
        )
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    pub fn area(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Iteration at which the mask was last replaced.
    pub fn updated_at(&self) -> usize {
        self.updated_at
    }

    /// Intersection over union.
    pub fn jaccard(&self, other: &SupportMask) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for (&a, &b) in self.mask.iter().zip(&other.mask) {
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }

    pub fn to_grid(&self) -> RealGrid {
        RealGrid::from_vec(self.width, self.height, self.mask.iter().map(|&m| m as u8 as f64).collect())
            .expect("support shape was validated")
            .with_domain(Domain::Object)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub fourier_error: f64,
    pub support_area: usize,
}

pub fn write_trace_csv<W: Write>(trace: &[TraceRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "iteration,fourier_error,support_area")?;
    for row in trace {
        writeln!(out, "{},{:e},{}", row.iteration, row.fourier_error, row.support_area)?;
    }
    Ok(())
}

/// State of a single retrieval run.
#[derive(Clone, Debug)]
pub struct RetrievalState {
    cfg: RetrievalConfig,
    amplitude: RealGrid,
    measured: Vec<bool>,
    object: ComplexGrid,
    support: SupportMask,
    sigma: f64,
    iteration: usize,
    trace: Vec<TraceRow>,
    clipped_fraction: f64,
}

fn window_mask(shape: (usize, usize), window: Option<(usize, usize)>) -> Result<Vec<bool>> {
    let (w, h) = shape;
    let Some((ww, wh)) = window else {
        return Ok(vec![true; w * h]);
    };
    if ww == 0 || wh == 0 || ww > w || wh > h {
        return shape_err(format!("measured window {ww}x{wh} does not fit a {w}x{h} pattern"));
    }
    let (x0, y0) = (w / 2 - ww / 2, h / 2 - wh / 2);
    Ok((0..h)
        .flat_map(|y| (0..w).map(move |x| x >= x0 && x < x0 + ww && y >= y0 && y < y0 + wh))
        .collect())
}

/// Clips negatives, returning the clipped energy fraction `Σ neg² / Σ v²`.
fn clip_pattern(pattern: &RealGrid) -> (RealGrid, f64) {
    let total = pattern.norm_sqr();
    let neg: f64 = pattern.data().iter().filter(|&&v| v < 0.0).map(|v| v * v).sum();
    let frac = if total > 0.0 { neg / total } else { 0.0 };
    (pattern.map(|&v| v.max(0.0)), frac)
}

/// Sets up amplitudes, a random-phase starting object and the
/// autocorrelation support.
pub fn init_retrieval(pattern: &RealGrid, cfg: &RetrievalConfig) -> Result<RetrievalState> {
    cfg.validate()?;
    if !pattern.is_finite() {
        return param_err("pattern contains non-finite values");
    }
    let (clipped, clipped_fraction) = clip_pattern(pattern);
    if clipped_fraction > 0.0 {
        log::warn!("clipped negative pattern values carrying {clipped_fraction:.3e} of the energy");
    }
    if clipped.max() <= 0.0 {
        return param_err("pattern is zero everywhere");
    }
    let (w, h) = pattern.shape();
    let measured = window_mask((w, h), cfg.measured_window)?;

    let masked = Grid2D::from_vec(
        w,
        h,
        clipped
            .data()
            .iter()
            .zip(&measured)
            .map(|(&v, &m)| Complex64::new(if m { v } else { 0.0 }, 0.0))
            .collect(),
    )?;
    let autocorrelation = centered_ifft(&masked).abs();
    let support = SupportMask::from_threshold(&autocorrelation, cfg.initial_threshold, 0)?;

    let amplitude = clipped.map(|&v| v.sqrt());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let start = Grid2D::from_vec(
        w,
        h,
        amplitude
            .data()
            .iter()
            .zip(&measured)
            .map(|(&a, &m)| {
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                if m {
                    Complex64::from_polar(a, phase)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect(),
    )?;
    let mut object = centered_ifft(&start);
    if !cfg.complex_object {
        object.data_mut().iter_mut().for_each(|v| v.im = 0.0);
    }
    object.set_domain(Domain::Object);

    Ok(RetrievalState {
        cfg: *cfg,
        amplitude,
        measured,
        object,
        support,
        sigma: cfg.shrinkwrap.sigma,
        iteration: 0,
        trace: Vec::new(),
        clipped_fraction,
    })
}

impl RetrievalState {
    pub fn config(&self) -> &RetrievalConfig {
        &self.cfg
    }

    pub fn amplitude(&self) -> &RealGrid {
        &self.amplitude
    }

    /// Raw iterate, including the feedback outside the support.
    pub fn iterate(&self) -> &ComplexGrid {
        &self.object
    }

    pub fn support(&self) -> &SupportMask {
        &self.support
    }

    pub fn set_support(&mut self, support: SupportMask) -> Result<()> {
        if support.shape() != self.object.shape() {
            return shape_err("support shape does not match the object");
        }
        self.support = support;
        Ok(())
    }

    /// Replaces the iterate; for real objects the imaginary part is dropped.
    pub fn set_iterate(&mut self, mut object: ComplexGrid) -> Result<()> {
        self.object.same_shape(&object, "set_iterate")?;
        if !self.cfg.complex_object {
            object.data_mut().iter_mut().for_each(|v| v.im = 0.0);
        }
        self.object = object.with_domain(Domain::Object);
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    /// Energy fraction of the pattern removed by clipping negatives.
    pub fn clipped_fraction(&self) -> f64 {
        self.clipped_fraction
    }

    /// `P_M`: measured modulus, current phase.
    pub fn fourier_projection(&self, g: &ComplexGrid) -> Result<ComplexGrid> {
        self.object.same_shape(g, "fourier_projection")?;
        let mut spec = centered_fft(g);
        for ((v, &a), &m) in spec.data_mut().iter_mut().zip(self.amplitude.data()).zip(&self.measured) {
            if !m {
                continue;
            }
            let r = v.norm();
            *v = if r > 0.0 { *v * (a / r) } else { Complex64::new(a, 0.0) };
        }
        let mut out = centered_ifft(&spec);
        if !self.cfg.complex_object {
            out.data_mut().iter_mut().for_each(|v| v.im = 0.0);
        }
        Ok(out.with_domain(Domain::Object))
    }

    fn admissible(&self, v: Complex64) -> bool {
        self.cfg.complex_object || !self.cfg.positivity || v.re >= 0.0
    }

    /// `P_S`: zero outside the support; realness and positivity inside.
    pub fn support_projection(&self, g: &ComplexGrid) -> Result<ComplexGrid> {
        self.object.same_shape(g, "support_projection")?;
        let zero = Complex64::new(0.0, 0.0);
        let data = g
            .data()
            .iter()
            .zip(self.support.mask())
            .map(|(&v, &inside)| {
                if !inside {
                    zero
                } else if self.cfg.complex_object {
                    v
                } else if self.cfg.positivity {
                    Complex64::new(v.re.max(0.0), 0.0)
                } else {
                    Complex64::new(v.re, 0.0)
                }
            })
            .collect();
        Ok(Grid2D::from_vec(g.width(), g.height(), data)?.with_domain(Domain::Object))
    }

    /// Current object estimate, `P_S` of the iterate.
    pub fn object(&self) -> ComplexGrid {
        self.support_projection(&self.object).expect("state shapes agree")
    }

    /// `‖ |FFT(P_S g)| - amplitude ‖ / ‖amplitude‖` over the measured region.
    pub fn fourier_error(&self) -> f64 {
        fourier_error_masked(&self.object(), &self.amplitude, &self.measured)
    }

    /// One HIO update: inside the support where the projected value is
    /// admissible keep it, elsewhere `g - β P_M g`.
    pub fn hio_iterate(&mut self) -> Result<()> {
        let gp = self.fourier_projection(&self.object)?;
        let beta = self.cfg.beta;
        let mask = self.support.mask();
        let next: Vec<Complex64> = self
            .object
            .data()
            .iter()
            .zip(gp.data())
            .zip(mask)
            .map(|((&g, &p), &inside)| {
                if inside && self.admissible(p) {
                    p
                } else {
                    g - p * beta
                }
            })
            .collect();
        self.object.data_mut().copy_from_slice(&next);
        self.iteration += 1;
        Ok(())
    }

    /// One RAAR update: `β/2 (R_S R_M + I) g + (1 - β) P_M g`.
    pub fn raar_iterate(&mut self) -> Result<()> {
        self.raar_with_beta(self.cfg.beta)
    }

    /// RAAR with an explicit relaxation, allowing the `β = 1` limit.
    pub fn raar_with_beta(&mut self, beta: f64) -> Result<()> {
        let pm = self.fourier_projection(&self.object)?;
        let mut rm = pm.clone();
        for (r, &g) in rm.data_mut().iter_mut().zip(self.object.data()) {
            *r = *r * 2.0 - g;
        }
        let ps_rm = self.support_projection(&rm)?;
        let next: Vec<Complex64> = self
            .object
            .data()
            .iter()
            .zip(pm.data())
            .zip(rm.data().iter().zip(ps_rm.data()))
            .map(|((&g, &p), (&r, &s))| {
                let rs_rm = s * 2.0 - r;
                (rs_rm + g) * (0.5 * beta) + p * (1.0 - beta)
            })
            .collect();
        self.object.data_mut().copy_from_slice(&next);
        self.iteration += 1;
        Ok(())
    }

    /// Re-estimates the support from the blurred magnitude of the iterate
    /// and decays the blur width.
    pub fn shrinkwrap(&mut self) -> Result<()> {
        let magnitude = self.object.abs();
        let sw = self.cfg.shrinkwrap;
        if magnitude.max() > 0.0 {
            let mut support = shrinkwrap_support(&magnitude, self.sigma, sw.threshold)?;
            support.updated_at = self.iteration;
            self.support = support;
        }
        self.sigma = (self.sigma * sw.decay).max(sw.min_sigma);
        Ok(())
    }

    /// One scheduled iteration: the configured update, shrink-wrap when due,
    /// and a trace row.
    pub fn step(&mut self) -> Result<()> {
        match self.cfg.algorithm {
            Algorithm::Hio => self.hio_iterate()?,
            Algorithm::Raar => self.raar_iterate()?,
        }
        let interval = self.cfg.shrinkwrap.interval;
        if interval > 0 && self.iteration.is_multiple_of(interval) {
            self.shrinkwrap()?;
        }
        let fourier_error = self.fourier_error();
        if !fourier_error.is_finite() {
            return Err(Error::Diverged {
                iteration: self.iteration,
                epsilon: fourier_error,
            });
        }
        self.trace.push(TraceRow {
            iteration: self.iteration,
            fourier_error,
            support_area: self.support.area(),
        });
        Ok(())
    }

    /// Runs the configured number of iterations.
    pub fn run(&mut self) -> Result<()> {
        for _ in 0..self.cfg.iterations {
            self.step()?;
        }
        Ok(())
    }
}

fn fourier_error_masked(object: &ComplexGrid, amplitude: &RealGrid, measured: &[bool]) -> f64 {
    let spec = centered_fft(object);
    let (mut num, mut den) = (0.0, 0.0);
    for ((v, &a), &m) in spec.data().iter().zip(amplitude.data()).zip(measured) {
        if m {
            let d = v.norm() - a;
            num += d * d;
            den += a * a;
        }
    }
    if den > 0.0 {
        (num / den).sqrt()
    } else {
        0.0
    }
}

/// `‖ |FFT(object)| - amplitude ‖ / ‖amplitude‖` over the whole grid.
pub fn fourier_error(object: &ComplexGrid, amplitude: &RealGrid) -> Result<f64> {
    object.same_shape(amplitude, "fourier_error")?;
    Ok(fourier_error_masked(object, amplitude, &vec![true; amplitude.len()]))
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as isize;
    let k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

/// Separable Gaussian blur with cyclic boundaries.
pub fn gaussian_blur(g: &RealGrid, sigma: f64) -> Result<RealGrid> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return param_err(format!("blur sigma must be positive, got {sigma}"));
    }
    let (w, h) = g.shape();
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let src = g.data();
    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            rows[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(i, &kv)| kv * src[y * w + (x as isize + i as isize - r).rem_euclid(w as isize) as usize])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(i, &kv)| kv * rows[(y as isize + i as isize - r).rem_euclid(h as isize) as usize * w + x])
                .sum();
        }
    }
    Ok(RealGrid::from_vec(w, h, out)?.with_domain(g.domain()))
}

/// Support from thresholding the blurred magnitude.
pub fn shrinkwrap_support(magnitude: &RealGrid, sigma: f64, threshold: f64) -> Result<SupportMask> {
    let blurred = gaussian_blur(magnitude, sigma)?;
    let cut = threshold * blurred.max();
    let mask: Vec<bool> = blurred.data().iter().map(|&v| v > cut).collect();
    if !mask.iter().any(|&m| m) {
        // A constant image sits exactly at every threshold below one.
        return SupportMask::new(magnitude.width(), magnitude.height(), vec![true; magnitude.len()], 0);
    }
    SupportMask::new(magnitude.width(), magnitude.height(), mask, 0)
}

/// Outcome of one start of [`reconstruct`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunSummary {
    pub seed: u64,
    pub final_error: f64,
    pub trace: Vec<TraceRow>,
}

#[derive(Clone, Debug)]
pub struct Reconstruction {
    /// Best object: real part for real objects, modulus for complex ones.
    pub object: RealGrid,
    pub complex_object: ComplexGrid,
    pub support: SupportMask,
    /// Index into `runs` of the selected start.
    pub best: usize,
    pub runs: Vec<RunSummary>,
    pub clipped_fraction: f64,
}

impl Reconstruction {
    pub fn best_run(&self) -> &RunSummary {
        &self.runs[self.best]
    }
}

/// Best-of-N retrieval. Starts run in parallel; the one with the lowest
/// final Fourier error wins, ties going to the lower seed.
pub fn reconstruct(pattern: &RealGrid, cfg: &RetrievalConfig) -> Result<Reconstruction> {
    cfg.validate()?;
    let states: Vec<RetrievalState> = (0..cfg.restarts as u64)
        .into_par_iter()
        .map(|k| {
            let run_cfg = RetrievalConfig {
                seed: cfg.seed.wrapping_add(k),
                ..*cfg
            };
            let mut state = init_retrieval(pattern, &run_cfg)?;
            state.run()?;
            Ok(state)
        })
        .collect::<Result<_>>()?;

    let runs: Vec<RunSummary> = states
        .iter()
        .map(|s| RunSummary {
            seed: s.cfg.seed,
            final_error: s.fourier_error(),
            trace: s.trace.clone(),
        })
        .collect();
    let best = runs
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.final_error.total_cmp(&b.1.final_error))
        .map(|(i, _)| i)
        .expect("at least one restart");
    let chosen = &states[best];
    let complex_object = chosen.object();
    let object = if cfg.complex_object {
        complex_object.abs()
    } else {
        complex_object.re()
    }
    .with_domain(Domain::Object);
    Ok(Reconstruction {
        object,
        complex_object,
        support: chosen.support.clone(),
        best,
        runs,
        clipped_fraction: chosen.clipped_fraction,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Registration {
    /// Normalized cross-correlation at the best alignment, in [-1, 1].
    pub score: f64,
    /// Cyclic shift `s` such that `obj(p) ≈ ref(p - s)`, in `[-W/2, W/2)`.
    pub shift: (isize, isize),
    /// Whether the point-reflected object matched better.
    pub twin: bool,
}

fn mean_removed(g: &RealGrid) -> (ComplexGrid, f64) {
    let mean = g.sum() / g.len() as f64;
    let c = g.map(|&v| Complex64::new(v - mean, 0.0));
    let n = c.norm_sqr().sqrt();
    (c, n)
}

fn best_correlation(a: &RealGrid, b_spec: &ComplexGrid, b_norm: f64) -> (f64, (isize, isize)) {
    let (ac, a_norm) = mean_removed(a);
    if a_norm == 0.0 || b_norm == 0.0 {
        return (0.0, (0, 0));
    }
    let mut prod = centered_fft(&ac);
    for (p, &q) in prod.data_mut().iter_mut().zip(b_spec.data()) {
        *p *= q.conj();
    }
    let corr = centered_ifft(&prod);
    let (w, h) = a.shape();
    let (mut best, mut at) = (f64::NEG_INFINITY, 0usize);
    for (i, v) in corr.data().iter().enumerate() {
        if v.re > best {
            best = v.re;
            at = i;
        }
    }
    let (dx, dy) = corr.dc();
    let wrap = |d: isize, n: usize| {
        let n = n as isize;
        (d + n / 2).rem_euclid(n) - n / 2
    };
    let shift = (
        wrap((at % w) as isize - dx as isize, w),
        wrap((at / w) as isize - dy as isize, h),
    );
    ((best / (a_norm * b_norm)).clamp(-1.0, 1.0), shift)
}

/// Point reflection about the DC pixel.
pub fn point_reflect(g: &RealGrid) -> RealGrid {
    let (w, h) = g.shape();
    let (dx, dy) = g.dc();
    RealGrid::from_fn(w, h, |x, y| g[((2 * dx + w - x) % w, (2 * dy + h - y) % h)])
        .expect("same shape")
        .with_domain(g.domain())
}

/// Mean-removed normalized cross-correlation maximized over cyclic shifts
/// of `obj` and of its point reflection.
pub fn register_and_compare(obj: &RealGrid, reference: &RealGrid) -> Result<Registration> {
    obj.same_shape(reference, "register_and_compare")?;
    let (bc, b_norm) = mean_removed(reference);
    let b_spec = centered_fft(&bc);
    let (direct, direct_shift) = best_correlation(obj, &b_spec, b_norm);
    let (twin, twin_shift) = best_correlation(&point_reflect(obj), &b_spec, b_norm);
    Ok(if twin > direct {
        Registration {
            score: twin,
            shift: twin_shift,
            twin: true,
        }
    } else {
        Registration {
            score: direct,
            shift: direct_shift,
            twin: false,
        }
    })
}

/// Cyclic translation: `out(p) = g(p - s)`.
pub fn translate<T: Copy + Default>(g: &Grid2D<T>, shift: (isize, isize)) -> Grid2D<T> {
    let (w, h) = g.shape();
    let mut out = g.clone();
    for y in 0..h {
        for x in 0..w {
            let sx = (x as isize - shift.0).rem_euclid(w as isize) as usize;
            let sy = (y as isize - shift.1).rem_euclid(h as isize) as usize;
            out[(x, y)] = g[(sx, sy)];
        }
    }
    out
}
