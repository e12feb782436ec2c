//! End-to-end runs: build the model, run the requested stages, collect checks
//! into a deterministic summary and optionally write artifacts.

use std::path::PathBuf;
use std::sync::Arc;

use serde::Serialize;

use crate::checks::{self, CheckResult, Status};
use crate::config::{render_config, RunConfig};
use crate::error::{GwError, Result};
use crate::fock::{ExactOracle, OracleOptions};
use crate::freq::make_grid;
use crate::io::{export_tracks, sha256_hex, Artifacts, Manifest};
use crate::model::{build_lattice, solve_mean_field, LatticeModel};
use crate::screening::{build_screening, RpaModel};
use crate::solver::{ContractionBounds, GwProblem, SolverConfig, SolverReport};

/// What a run computes; mirrors the CLI subcommands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    MeanField,
    Oracle,
    Rpa,
    G0w0,
    Gw0,
    Check,
    All,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::MeanField => "mean-field",
            Stage::Oracle => "oracle",
            Stage::Rpa => "rpa",
            Stage::G0w0 => "g0w0",
            Stage::Gw0 => "gw0",
            Stage::Check => "check",
            Stage::All => "all",
        }
    }

    fn full(self) -> bool {
        matches!(self, Stage::Check | Stage::All)
    }

    pub fn runs_oracle(self) -> bool {
        self == Stage::Oracle || self.full()
    }

    pub fn runs_screening(self) -> bool {
        matches!(self, Stage::Rpa | Stage::G0w0 | Stage::Gw0) || self.full()
    }

    pub fn runs_self_energy(self) -> bool {
        matches!(self, Stage::G0w0 | Stage::Gw0) || self.full()
    }

    pub fn runs_solver(self) -> bool {
        self == Stage::Gw0 || self.full()
    }

    fn writes_artifacts(self) -> bool {
        self != Stage::Check
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOptions {
    pub stage: Stage,
    pub validate: bool,
    pub out: Option<PathBuf>,
}

impl PipelineOptions {
    pub fn new(stage: Stage) -> Self {
        PipelineOptions {
            stage,
            validate: false,
            out: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MeanFieldSummary {
    pub mu0: f64,
    pub gap: f64,
    pub homo: f64,
    pub lumo: f64,
    pub eps: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct OracleSummary {
    pub n: usize,
    pub energy: f64,
    pub e_minus: f64,
    pub e_plus: f64,
    pub mu: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunSummary {
    pub stage: Stage,
    pub model_hash: String,
    pub sites: usize,
    pub electrons: usize,
    pub seed: u64,
    pub grid_k: usize,
    pub grid_scale: f64,
    pub mean_field: MeanFieldSummary,
    pub oracle: Option<OracleSummary>,
    pub bounds: Option<ContractionBounds>,
    pub solver: Vec<SolverReport>,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

impl RunSummary {
    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| c.status == Status::Fail)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes") + "\n"
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub manifest: Option<Manifest>,
}

/// Hash of the assembled operators, so two runs on the same lattice compare
/// equal whatever the config spelling.
pub fn model_hash(model: &LatticeModel) -> String {
    let mut bytes = Vec::new();
    for m in [&model.h0, &model.h1, &model.coulomb] {
        bytes.extend((m.nrows() as u64).to_le_bytes());
        for x in m.iter() {
            bytes.extend(x.to_le_bytes());
        }
    }
    sha256_hex(&bytes)
}

pub fn run_pipeline(cfg: &RunConfig, opts: &PipelineOptions) -> Result<RunOutput> {
    cfg.validate()?;
    let stage = opts.stage;
    let seed = cfg.run.seed;
    let validate = opts.validate || cfg.checks.validate;
    let wants = |suite: &str| cfg.suite_enabled(suite);
    let mut checks: Vec<CheckResult> = Vec::new();
    let mut art = Artifacts::default();

    let model = cfg.model_config().and_then(|c| build_lattice(&c)).map_err(|e| e.at("model-builder"))?;
    let mf = solve_mean_field(&model, cfg.model.n).map_err(|e| e.at("model-builder"))?;
    let scale = cfg.grid.scale.unwrap_or(mf.gap);
    let grid = Arc::new(make_grid(cfg.grid.k, scale).map_err(|e| e.at("fourier-hilbert"))?);
    if wants("mean-field") {
        checks.extend(checks::mean_field(&mf));
    }
    art.matrices.push(("h1".into(), model.h1.clone()));
    art.matrices.push(("gamma0".into(), mf.gamma0.clone()));

    let mut oracle_summary = None;
    if stage.runs_oracle() {
        if cfg.oracle.enabled {
            let o = ExactOracle::new(
                &model,
                cfg.oracle_n(),
                &OracleOptions {
                    basis_cap: cfg.oracle.basis_cap,
                    seed,
                    ..Default::default()
                },
            )
            .map_err(|e| e.at("fock-oracle"))?;
            if wants("oracle") {
                checks.extend(checks::oracle(&model, &o, scale, seed));
            }
            if wants("sum-rules") {
                checks.extend(checks::johnson(&model, &o, mf.gap));
            }
            oracle_summary = Some(OracleSummary {
                n: o.ground.n,
                energy: o.energy(),
                e_minus: o.window.e_minus,
                e_plus: o.window.e_plus,
                mu: o.window.mu,
            });
            art.matrices.push(("gamma_exact".into(), o.ground.gamma.clone()));
            art.tracks.push(("g_exact".into(), o.green_track(grid.clone()).map_err(|e| e.at("fock-oracle"))?));
        } else {
            for suite in ["oracle", "sum-rules"] {
                if wants(suite) {
                    checks.push(CheckResult::skipped(suite, "oracle-checks", "oracle disabled"));
                }
            }
        }
    }

    let mut bounds = None;
    let mut reports = Vec::new();
    if stage.runs_screening() {
        let rpa = RpaModel::new(&model, &mf);
        let sc = build_screening(&rpa, grid.clone()).map_err(|e| e.at("rpa-screening"))?;
        if wants("kernel") {
            checks.extend(checks::kernel(seed));
        }
        if wants("hilbert") {
            checks.extend(checks::hilbert());
        }
        if wants("screening") {
            checks.extend(checks::screening(&sc));
        }
        if wants("sum-rules") {
            checks.extend(checks::p0_sum_rules(&model, &rpa));
        }
        if wants("convolution") {
            if validate {
                checks.extend(checks::convolution(&rpa, scale));
            } else {
                checks.push(CheckResult::skipped("convolution", "p0-closed-form", "needs --validate"));
            }
        }
        art.tracks.push(("p0".into(), sc.p0.clone()));
        art.tracks.push(("chi0".into(), sc.chi0.clone()));
        art.tracks.push(("w0c".into(), sc.w0c.clone()));

        if stage.runs_self_energy() {
            let p = GwProblem::new(&model, sc, seed).map_err(|e| e.at("self-energy"))?;
            if wants("g0w0") {
                checks.extend(checks::g0w0(&model, &p));
            }
            let (sigma, g1) = p.one_shot().map_err(|e| e.at("self-energy"))?;
            art.matrices.push(("kx".into(), p.kx.clone()));
            art.tracks.push(("sigma_c_g0w0".into(), sigma.sigma_c.clone()));
            art.tracks.push(("g_g0w0".into(), g1.track.clone()));
            bounds = Some(p.bounds);

            if stage.runs_solver() {
                for (i, &lambda) in cfg.solver.lambda.iter().enumerate() {
                    let mut sc = SolverConfig::new(grid.clone(), lambda);
                    sc.tol = cfg.solver.tol;
                    sc.max_iter = cfg.solver.max_iter;
                    sc.mixing = cfg.solver.mixing;
                    match p.picard(&sc) {
                        Ok((g, _, r)) => {
                            art.tracks.push((format!("g_gw0_{i}"), g.track));
                            reports.push(r);
                        }
                        Err(e) => checks.push(CheckResult::failed("solver", &format!("fixed-point[λ={lambda}]"), &e.at("gw0-solver"))),
                    }
                }
                if wants("solver") {
                    checks.extend(checks::solver(&p, &reports, cfg.solver.tol, seed));
                }
            }
        }
    }

    let passed = checks.iter().all(|c| c.status != Status::Fail);
    let summary = RunSummary {
        stage,
        model_hash: model_hash(&model),
        sites: model.m(),
        electrons: cfg.model.n,
        seed,
        grid_k: grid.len(),
        grid_scale: scale,
        mean_field: MeanFieldSummary {
            mu0: mf.mu0,
            gap: mf.gap,
            homo: mf.homo(),
            lumo: mf.lumo(),
            eps: mf.eps.to_vec(),
        },
        oracle: oracle_summary,
        bounds,
        solver: reports,
        checks,
        passed,
    };

    let out_dir = opts.out.clone().or_else(|| cfg.run.out.as_ref().map(PathBuf::from));
    let manifest = match out_dir {
        Some(dir) => {
            if !stage.writes_artifacts() {
                art = Artifacts::default();
            }
            art.texts.push(("config.toml".into(), render_config(cfg)?));
            art.texts.push(("summary.json".into(), summary.to_json()));
            Some(export_tracks(&art, &dir).map_err(|e| e.at("cli-io"))?)
        }
        None => None,
    };
    Ok(RunOutput { summary, manifest })
}

/// Stage name for a CLI subcommand.
pub fn parse_stage(name: &str) -> Result<Stage> {
    [
        Stage::MeanField,
        Stage::Oracle,
        Stage::Rpa,
        Stage::G0w0,
        Stage::Gw0,
        Stage::Check,
        Stage::All,
    ]
    .into_iter()
    .find(|s| s.name() == name)
    .ok_or_else(|| GwError::Input(format!("unknown stage '{name}'")))
}
