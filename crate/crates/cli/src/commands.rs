use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use molvox::chem::ChemTables;
use molvox::denoise::{read_checkpoint, write_checkpoint, Denoiser, GmmDenoiser, NoiseLevel};
use molvox::extract::extract_molecule;
use molvox::grid::{GridSpec, VoxelGrid};
use molvox::io::{read_grid, read_xyz, read_xyz_dir, write_grid, write_xyz_file};
use molvox::metrics::evaluate_molecules;
use molvox::sampler::walk_jump_sample;
use molvox::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::RunConfig;

/// A library error together with the exit code family it belongs to.
#[derive(Debug)]
pub struct CliError(pub Error);

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self.0 {
            Error::Config(_) | Error::InvalidArgument(_) | Error::UnknownChannel(_) => 2,
            Error::Io { .. } | Error::Parse { .. } | Error::Format { .. } | Error::Truncated { .. } | Error::Version { .. } => 3,
            Error::Divergence { .. } | Error::TrainingFailure { .. } => 4,
            Error::RefinementFailure { .. } => 5,
            _ => 1,
        }
    }

    pub fn category(&self) -> &'static str {
        match self.exit_code() {
            2 => "configuration",
            3 => "i/o",
            4 => "divergence",
            5 => "extraction",
            _ => "runtime",
        }
    }
}

type CmdResult = Result<(), CliError>;

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    seed: u64,
    inputs: Vec<String>,
    config: &'a RunConfig,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(io_err(path))
}

fn prepare_out(out: &Path, command: &'static str, cfg: &RunConfig, inputs: &[&Path]) -> Result<u64, Error> {
    let seed = cfg.seed()?;
    fs::create_dir_all(out).map_err(io_err(out))?;
    let manifest = Manifest {
        tool: "molvox",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
        config: cfg,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    write_text(&out.join("manifest.json"), &(text + "\n"))?;
    Ok(seed)
}

/// Expands directories into their files with the given extension, sorted.
fn expand_inputs(inputs: &[PathBuf], ext: &str) -> Result<Vec<PathBuf>, Error> {
    let mut files = Vec::new();
    for p in inputs {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = fs::read_dir(p)
                .map_err(io_err(p))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && f.extension().is_some_and(|x| x == ext))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    let mut stems = BTreeSet::new();
    for f in &files {
        if !stems.insert(stem(f)) {
            return Err(Error::Config(format!("two inputs share the output name {}", stem(f))));
        }
    }
    Ok(files)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn voxelize(cfg: &RunConfig, inputs: &[PathBuf], out: &Path) -> CmdResult {
    let voxelizer = cfg.grid.voxelizer()?;
    let files = expand_inputs(inputs, "xyz")?;
    let refs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
    prepare_out(out, "voxelize", cfg, &refs)?;
    for f in &files {
        let grid = voxelizer.voxelize(&read_xyz(f)?, cfg.grid.placement)?;
        write_grid(out.join(format!("{}.grid", stem(f))), &grid)?;
    }
    println!("wrote {} grids to {}", files.len(), out.display());
    Ok(())
}

pub fn train(cfg: &RunConfig, dataset: &Path, out: &Path) -> CmdResult {
    let voxelizer = cfg.grid.voxelizer()?;
    let sigma = NoiseLevel::new(cfg.train.sigma)?;
    cfg.train.hyper.validate()?;
    let molecules: Vec<_> = read_xyz_dir(dataset)?.into_iter().map(|(_, m)| m).collect();
    let seed = prepare_out(out, "train", cfg, &[dataset])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let outcome = molvox::denoise::train_denoiser(&molecules, &voxelizer, sigma, &cfg.train.hyper, &mut rng)?;
    write_checkpoint(out.join("denoiser.ckpt"), &outcome.params)?;
    let mut log = String::new();
    for r in &outcome.trace {
        log.push_str(&serde_json::to_string(r).expect("plain record"));
        log.push('\n');
    }
    write_text(&out.join("loss.jsonl"), &log)?;
    if let Some(last) = outcome.trace.last() {
        println!("trained {} steps, final batch loss {:.6}", outcome.trace.len(), last.loss);
    }
    Ok(())
}

pub fn sample(cfg: &RunConfig, out: &Path) -> CmdResult {
    let s = &cfg.sample;
    s.params.validate()?;
    if s.n_samples == 0 {
        return Err(Error::Config("n_samples must be at least 1".into()).into());
    }
    let (den, spec, source): (Box<dyn Denoiser>, GridSpec, PathBuf) = match (&s.checkpoint, &s.oracle) {
        (Some(path), None) => {
            let params = read_checkpoint(path)?;
            let arch = &params.arch;
            let spec = GridSpec::new(arch.length, cfg.grid.resolution, arch.channels, cfg.grid.atom_radius)?;
            (Box::new(params.ema_denoiser()), spec, path.clone())
        }
        (None, Some(oracle)) => {
            let spec = cfg.grid.spec()?;
            if oracle.components.dim() != spec.size() {
                return Err(Error::Config(format!(
                    "oracle dimension {} does not match the grid size {}",
                    oracle.components.dim(),
                    spec.size()
                ))
                .into());
            }
            let den = GmmDenoiser::new(oracle.components.clone(), NoiseLevel::new(oracle.sigma)?);
            (Box::new(den), spec, PathBuf::from("<oracle>"))
        }
        _ => return Err(Error::Config("set exactly one of sample.checkpoint and sample.oracle".into()).into()),
    };
    let seed = prepare_out(out, "sample", cfg, &[source.as_path()])?;
    let result = walk_jump_sample(&den, &s.params, s.n_samples, seed)?;
    for (i, sample) in result.samples.iter().enumerate() {
        write_grid(out.join(format!("sample_{i:04}.grid")), &VoxelGrid::from_unclamped(spec, &sample.x)?)?;
    }
    let mut log = Vec::new();
    result.write_jump_log(&mut log).expect("writing to memory");
    let log_path = out.join("jumps.jsonl");
    fs::write(&log_path, log).map_err(io_err(&log_path))?;
    let diag = serde_json::to_string_pretty(&result.diagnostics).expect("plain records");
    write_text(&out.join("diagnostics.json"), &(diag + "\n"))?;
    println!("wrote {} samples to {}", result.samples.len(), out.display());
    Ok(())
}

pub fn extract(cfg: &RunConfig, inputs: &[PathBuf], out: &Path) -> CmdResult {
    cfg.extract.validate()?;
    let files = expand_inputs(inputs, "grid")?;
    let refs: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
    prepare_out(out, "extract", cfg, &refs)?;
    for f in &files {
        let grid = read_grid(f)?;
        let voxelizer = cfg.grid.voxelizer_for(*grid.spec())?;
        let r = extract_molecule(&grid, &voxelizer, &cfg.extract)?;
        let comment = format!("from {} reconstruction_error={:.6e}", file_name(f), r.final_error);
        write_xyz_file(out.join(format!("{}.xyz", stem(f))), &r.molecule, &comment)?;
    }
    println!("extracted {} molecules to {}", files.len(), out.display());
    Ok(())
}

pub fn eval(cfg: &RunConfig, generated: &Path, reference: &Path, out: &Path) -> CmdResult {
    let tables = match &cfg.eval.tables {
        Some(p) => ChemTables::load(p)?,
        None => ChemTables::default(),
    };
    let gen: Vec<_> = read_xyz_dir(generated)?.into_iter().map(|(_, m)| m).collect();
    let reference_set: Vec<_> = read_xyz_dir(reference)?.into_iter().map(|(_, m)| m).collect();
    prepare_out(out, "eval", cfg, &[generated, reference])?;
    let report = evaluate_molecules(&gen, &reference_set, &tables)?;
    let json = report.to_json();
    write_text(&out.join("report.json"), &(json.clone() + "\n"))?;
    println!("{json}");
    Ok(())
}
