use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;

use bcdi_core::grid::{Domain, RealGrid};
use bcdi_core::io::{decode_pattern, encode_pattern};
use bcdi_core::retrieval::{reconstruct as run_retrieval, register_and_compare, write_trace_csv};
use bcdi_core::sim::{
    add_noise, load_phantom, pattern_nrmse, simulate_mono, simulate_poly_independent, Region,
};
use bcdi_core::solver::solve;
use bcdi_core::spectrum::BoundSpectrum;

use crate::config::{self, Loaded};
use crate::provenance::{FileRecord, Provenance, SpectrumTable};
use crate::render::{encode_png, levels};
use crate::{Args, CliError};

pub struct Context {
    pub command: &'static str,
    pub loaded: Loaded,
    pub out: PathBuf,
    pub seed: u64,
    inputs: std::cell::RefCell<Vec<FileRecord>>,
    outputs: std::cell::RefCell<Vec<FileRecord>>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl Context {
    pub fn new(command: &'static str, args: &Args) -> Result<Self, CliError> {
        let loaded = config::load(&args.config)?;
        let out = match &args.out {
            Some(o) => o.clone(),
            None => loaded.resolve(&loaded.config.paths.out),
        };
        let seed = args.seed.unwrap_or(loaded.config.seed);
        Ok(Self {
            command,
            loaded,
            out,
            seed,
            inputs: Default::default(),
            outputs: Default::default(),
        })
    }

    fn cfg(&self) -> &config::RunConfig {
        &self.loaded.config
    }

    /// `paths.<key>` if set, else `default` inside the output directory.
    fn path_or(&self, configured: &Option<PathBuf>, default: &str) -> PathBuf {
        match configured {
            Some(p) => self.loaded.resolve(p),
            None => self.out.join(default),
        }
    }

    fn read_grid(&self, path: &Path) -> Result<RealGrid, CliError> {
        let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
        let g = decode_pattern(&bytes).map_err(|e| io_err(path, e))?;
        self.inputs.borrow_mut().push(FileRecord::new(path, &bytes));
        Ok(g)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        self.write_to(&self.out.join(name), bytes)
    }

    fn write_to(&self, path: &Path, bytes: &[u8]) -> Result<PathBuf, CliError> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        }
        fs::write(path, bytes).map_err(|e| io_err(path, e))?;
        self.outputs.borrow_mut().push(FileRecord::new(path, bytes));
        info!("wrote {}", path.display());
        Ok(path.to_path_buf())
    }

    fn write_grid(&self, name: &str, g: &RealGrid) -> Result<PathBuf, CliError> {
        self.write(name, &encode_pattern(g))
    }

    fn finish(&self, summary: BTreeMap<String, toml::Value>, spectrum: Option<&BoundSpectrum>) -> Result<(), CliError> {
        let p = Provenance {
            command: self.command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config_path: self.loaded.path.clone(),
            config_sha256: crate::provenance::sha256_hex(self.loaded.text.as_bytes()),
            seed: self.seed,
            threads: rayon::current_num_threads(),
            out: self.out.clone(),
            config: self.loaded.text.clone(),
            summary,
            inputs: self.inputs.take(),
            outputs: self.outputs.take(),
            spectrum: spectrum.map(SpectrumTable::new),
        };
        let text = toml::to_string(&p).map_err(|e| CliError::Io(format!("provenance: {e}")))?;
        let path = self.out.join(format!("{}.provenance.toml", self.command));
        fs::create_dir_all(&self.out).map_err(|e| io_err(&self.out, e))?;
        fs::write(&path, text).map_err(|e| io_err(&path, e))
    }
}

fn float(v: f64) -> toml::Value {
    toml::Value::Float(v)
}

fn int(v: usize) -> toml::Value {
    toml::Value::Integer(v as i64)
}

pub fn simulate(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.cfg();
    let shape = cfg.phantom.shape();
    let phantom = load_phantom(&cfg.phantom.source(&ctx.loaded)?, shape)?;
    let spec = cfg.require_spectrum(&ctx.loaded, shape)?;
    let mono = simulate_mono(&phantom);
    let mut poly = simulate_poly_independent(&phantom, &spec)?;
    if let Some(model) = cfg.noise()? {
        poly = add_noise(&poly, model, ctx.seed)?;
    }

    ctx.write_grid("phantom.bcdi", &phantom.embedded().clone().with_domain(Domain::Object))?;
    ctx.write_grid("mono.bcdi", &mono)?;
    ctx.write_grid("poly.bcdi", &poly)?;

    let (ox, oy) = phantom.oversampling();
    let mut s = BTreeMap::new();
    s.insert("oversampling".into(), toml::Value::Array(vec![float(ox), float(oy)]));
    s.insert("requested_channels".into(), int(spec.requested_channels()));
    s.insert("realized_channels".into(), int(spec.channels().len()));
    println!(
        "simulated {}x{} pattern, {} of {} channels realized",
        shape.0,
        shape.1,
        spec.channels().len(),
        spec.requested_channels()
    );
    ctx.finish(s, Some(&spec))
}

pub fn mono(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.cfg();
    let input = ctx.path_or(&cfg.paths.input, "poly.bcdi");
    let b = ctx.read_grid(&input)?;
    let spec = cfg.require_spectrum(&ctx.loaded, b.shape())?;
    let solver = cfg.solver()?;
    let sol = solve(&b, &spec, &solver)?;

    ctx.write_grid("mono_recovered.bcdi", &sol.x.clone().with_domain(Domain::Pattern))?;
    let mut csv = Vec::new();
    sol.write_trace_csv(&mut csv).map_err(|e| CliError::Io(e.to_string()))?;
    ctx.write("solver_trace.csv", &csv)?;

    let mut s = BTreeMap::new();
    s.insert("iterations".into(), int(sol.iterations()));
    s.insert("converged".into(), toml::Value::Boolean(sol.converged));
    s.insert("final_epsilon".into(), float(sol.final_epsilon));
    s.insert("final_relative_residual".into(), float(sol.final_relative_residual()));
    println!(
        "{} iterations, relative residual {:e}",
        sol.iterations(),
        sol.final_relative_residual()
    );
    ctx.finish(s, Some(&spec))
}

pub fn reconstruct(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.cfg();
    let input = ctx.path_or(&cfg.paths.input, "mono_recovered.bcdi");
    let pattern = ctx.read_grid(&input)?;
    let spec = cfg.spectrum(&ctx.loaded, pattern.shape())?;
    let rcfg = cfg.retrieval(ctx.seed, pattern.shape(), spec.as_ref())?;
    let rec = run_retrieval(&pattern, &rcfg)?;

    ctx.write_grid("object.bcdi", &rec.object)?;
    ctx.write_grid("support.bcdi", &rec.support.to_grid().with_domain(Domain::Object))?;
    for (k, run) in rec.runs.iter().enumerate() {
        let mut csv = Vec::new();
        write_trace_csv(&run.trace, &mut csv).map_err(|e| CliError::Io(e.to_string()))?;
        ctx.write(&format!("retrieval_trace_{k}.csv"), &csv)?;
    }

    let best = rec.best_run();
    let mut s = BTreeMap::new();
    s.insert("best_start".into(), int(rec.best));
    s.insert("best_seed".into(), toml::Value::Integer(best.seed as i64));
    s.insert("best_fourier_error".into(), float(best.final_error));
    s.insert(
        "fourier_errors".into(),
        toml::Value::Array(rec.runs.iter().map(|r| float(r.final_error)).collect()),
    );
    s.insert("support_area".into(), int(rec.support.area()));
    s.insert("clipped_fraction".into(), float(rec.clipped_fraction));
    println!(
        "best of {} starts: seed {}, Fourier error {:e}",
        rec.runs.len(),
        best.seed,
        best.final_error
    );
    ctx.finish(s, spec.as_ref())
}

/// Row count and last relative residual of a solver trace CSV.
fn trace_summary(path: &Path) -> Result<(usize, Option<f64>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text.lines();
    if lines.next() != Some("iteration,epsilon,relative_residual") {
        return Err(io_err(path, "not a solver trace"));
    }
    let rows: Vec<&str> = lines.filter(|l| !l.is_empty()).collect();
    let last = match rows.last() {
        Some(l) => Some(
            l.rsplit(',')
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| io_err(path, format!("bad row {l:?}")))?,
        ),
        None => None,
    };
    Ok((rows.len(), last))
}

pub fn metrics(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.cfg();
    let input = ctx.path_or(&cfg.paths.input, "mono_recovered.bcdi");
    let reference = ctx.path_or(&cfg.paths.reference, "mono.bcdi");
    let x = ctx.read_grid(&input)?;
    let r = ctx.read_grid(&reference)?;
    let spec = cfg.spectrum(&ctx.loaded, r.shape())?;
    let r_max = cfg.metrics.r_max.or(spec.as_ref().map(|s| s.max_realized_ratio()));

    let mut rows: Vec<(String, f64)> = vec![("nrmse_full".into(), pattern_nrmse(&x, &r, Region::Full)?)];
    if let Some(r_max) = r_max {
        rows.push(("r_max".into(), r_max));
        rows.push(("nrmse_low_frequency".into(), pattern_nrmse(&x, &r, Region::LowFrequency(r_max))?));
    }
    let reg = register_and_compare(&x, &r)?;
    rows.push(("registration_score".into(), reg.score));
    rows.push(("registration_shift_x".into(), reg.shift.0 as f64));
    rows.push(("registration_shift_y".into(), reg.shift.1 as f64));
    rows.push(("registration_twin".into(), if reg.twin { 1.0 } else { 0.0 }));

    let trace = match &cfg.paths.trace {
        Some(p) => Some(ctx.loaded.resolve(p)),
        None => Some(ctx.out.join("solver_trace.csv")).filter(|p| p.exists()),
    };
    if let Some(path) = trace {
        let (n, last) = trace_summary(&path)?;
        rows.push(("solver_iterations".into(), n as f64));
        if let Some(v) = last {
            rows.push(("solver_final_relative_residual".into(), v));
        }
    }

    let mut csv = String::from("metric,value\n");
    for (k, v) in &rows {
        csv.push_str(&format!("{k},{v:e}\n"));
    }
    print!("{csv}");
    ctx.write("metrics.csv", csv.as_bytes())?;
    let summary = rows.into_iter().map(|(k, v)| (k, float(v))).collect();
    ctx.finish(summary, spec.as_ref())
}

pub fn render(ctx: &Context) -> Result<(), CliError> {
    let cfg = ctx.cfg();
    let opts = cfg.render()?;
    let input = ctx.path_or(&cfg.paths.input, "object.bcdi");
    let g = ctx.read_grid(&input)?;
    let (w, h, lv) = levels(&g, &opts)?;
    let png = encode_png(w, h, &lv)?;
    let output = match &cfg.paths.output {
        Some(p) => ctx.loaded.resolve(p),
        None => {
            let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("render");
            ctx.out.join(format!("{stem}.png"))
        }
    };
    let path = ctx.write_to(&output, &png)?;
    println!("rendered {}", path.display());
    let mut s = BTreeMap::new();
    s.insert("width".into(), int(w));
    s.insert("height".into(), int(h));
    ctx.finish(s, None)
}
