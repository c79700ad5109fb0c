//! Run manifests: what was run, on which inputs, and what came out.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Config, ConfigError};
use crate::run::{execute, input_files, CellEntry};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub kind: String,
    /// Resolved configuration, every default filled in.
    pub config: String,
    pub seeds: Vec<u64>,
    /// SHA-256 of the resolved configuration (output directory excluded) and every input file.
    pub input_hash: String,
    /// `ok`, `partial` or `failed`.
    pub status: String,
    pub error: Option<String>,
    pub cells: Vec<CellEntry>,
    /// SHA-256 of every written output except the manifest.
    pub outputs: BTreeMap<String, String>,
    pub wall_seconds: f64,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("{} is not a run manifest", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        if self.status == "ok" {
            0
        } else {
            2
        }
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

/// Hash of everything that determines the outputs.
pub fn input_hash(cfg: &Config) -> Result<String> {
    let mut snapshot = cfg.clone();
    snapshot.output.dir = None;
    let mut h = Sha256::new();
    h.update(b"config\n");
    h.update(snapshot.to_toml().as_bytes());
    for f in input_files(cfg) {
        let bytes = fs::read(&f).with_context(|| format!("cannot read input {f}"))?;
        h.update(format!("\nfile {f} {}\n", bytes.len()).as_bytes());
        h.update(&bytes);
    }
    Ok(hex(&h.finalize()))
}

/// A finished run.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
}

/// Runs a prepared configuration and writes its outputs and manifest under `out_dir`.
pub fn run_prepared(cfg: &Config, out_dir: &Path, jobs: Option<usize>) -> Result<RunResult> {
    let hash = input_hash(cfg)?;
    let start = std::time::Instant::now();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        pool = pool.num_threads(j);
    }
    let pool = pool.build().context("cannot start the worker pool")?;
    let result = pool.install(|| execute(cfg));
    fs::create_dir_all(out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let mut outputs = BTreeMap::new();
    let (status, error, cells) = match result {
        Ok(out) => {
            for (name, contents) in &out.files {
                let path = out_dir.join(name);
                fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
                outputs.insert(name.clone(), sha256_hex(contents.as_bytes()));
            }
            let status = if out.all_ok() { "ok" } else { "partial" };
            (status, None, out.cells)
        }
        Err(e) => ("failed", Some(format!("{e:#}")), Vec::new()),
    };
    let manifest = Manifest {
        version: 1,
        kind: cfg.kind.to_string(),
        config: cfg.to_toml(),
        seeds: cfg.schedule.seeds.clone().unwrap_or_default(),
        input_hash: hash,
        status: status.into(),
        error,
        cells,
        outputs,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    let path = out_dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    Ok(RunResult {
        out_dir: out_dir.to_path_buf(),
        manifest,
    })
}

/// Where a run reads its configuration from.
pub enum Source {
    Config(Config),
    Manifest(Manifest),
}

/// Reads a TOML configuration or a JSON manifest, judged by extension.
pub fn load_source(path: &Path) -> Result<Source, ConfigError> {
    if path.extension().is_some_and(|e| e == "json") {
        Manifest::load(path)
            .map(Source::Manifest)
            .map_err(|e| ConfigError(vec![format!("{e:#}")]))
    } else {
        Config::load(path).map(Source::Config)
    }
}

/// Prepares a configuration for a run: defaults, seed override and validation
/// for TOML files; hash verification for manifests (which ignore the override).
pub fn prepare_source(source: Source, seed_override: Option<u64>) -> Result<(Config, Option<Manifest>), ConfigError> {
    match source {
        Source::Config(mut cfg) => {
            cfg.prepare(seed_override)?;
            Ok((cfg, None))
        }
        Source::Manifest(m) => {
            let mut cfg = Config::parse(&m.config)?;
            cfg.prepare(None)?;
            let hash = input_hash(&cfg).map_err(|e| ConfigError(vec![format!("{e:#}")]))?;
            if hash != m.input_hash {
                return Err(ConfigError(vec![format!(
                    "input hash mismatch: manifest has {}, inputs hash to {hash}",
                    m.input_hash
                )]));
            }
            Ok((cfg, Some(m)))
        }
    }
}

/// Output files whose hash differs from, or is missing in, the original manifest.
pub fn compare_outputs(original: &Manifest, rerun: &Manifest) -> Vec<String> {
    let mut diffs = Vec::new();
    for (name, h) in &original.outputs {
        match rerun.outputs.get(name) {
            Some(h2) if h2 == h => {}
            Some(_) => diffs.push(format!("{name}: contents differ")),
            None => diffs.push(format!("{name}: not produced")),
        }
    }
    for name in rerun.outputs.keys() {
        if !original.outputs.contains_key(name) {
            diffs.push(format!("{name}: not in the original manifest"));
        }
    }
    diffs
}

/// Output directory: the flag if given, else the configured one.
pub fn output_dir(cfg: &Config, flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => PathBuf::from(cfg.output.dir.as_deref().unwrap_or("out")),
    }
}

/// Fails if a rerun did not reproduce the original outputs.
pub fn verify_rerun(original: &Manifest, rerun: &Manifest) -> Result<()> {
    let diffs = compare_outputs(original, rerun);
    if !diffs.is_empty() {
        bail!("rerun differs from the manifest:\n{}", diffs.join("\n"));
    }
    Ok(())
}
