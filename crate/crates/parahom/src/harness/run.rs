//! Pipeline execution, artifacts and manifests.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, PipelineKind};
use crate::cell::{effective_operator_table, stretched_axis, uniform_axis};
use crate::error::{Error, Result};
use crate::expansion::{
    bootstrap_run, pucci_gamma_example, recession_experiment, theorem_rate, PucciReport, RateReport, RecessionSpec,
    TheoremSpec, Variant,
};
use crate::initial_layer::{solve_base_layer, LayerSetup};
use crate::interior::EffectiveMode;
use crate::operator::{check_assumptions, FullyNonlinearOp, SamplerConfig};
use crate::pde_core::{DecayFit, SlowGrid, TorusGrid};

/// Tolerances of the Pucci example checks.
pub const PUCCI_GAP_MIN: f64 = 1e-3;
pub const PUCCI_POSITIVE_TOL: f64 = 1e-3;
pub const PUCCI_KINK_TOL: f64 = 0.2;

/// Direct-solve cost of one ε row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub eps: f64,
    pub fine_nodes: usize,
    pub steps: usize,
    pub work: f64,
}

/// Outcome of [`validate`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub config: ExperimentConfig,
    pub cost: Vec<CostRow>,
    pub total_work: f64,
    pub warnings: Vec<String>,
}

/// Schema and consistency checks plus a dry-run cost estimate.
pub fn validate(cfg: &ExperimentConfig) -> Result<ValidationReport> {
    cfg.check()?;
    let op = cfg.build_operator()?;
    let g = &cfg.grids;
    let mut warnings = Vec::new();
    let mut cost = Vec::new();
    if matches!(cfg.pipeline.kind, PipelineKind::TheoremRate | PipelineKind::NonoscRate | PipelineKind::RecessionRate) {
        let fast = TorusGrid::for_ellipticity(op.n, g.ny, op.cap_lambda)?;
        if g.ny < 32 {
            warnings.push(format!("ε/Δx = {} is below 32; fast oscillations are under-resolved", g.ny));
        }
        for ei in cfg.eps_inv()? {
            let fine_nodes = (g.period * (ei * g.ny) as f64).round() as usize;
            let steps = (g.horizon / (fast.ds() / (ei * ei) as f64)).ceil() as usize;
            let work = fine_nodes as f64 * steps as f64;
            if work > cfg.pipeline.budget {
                warnings.push(format!("ε = 1/{ei}: work {work:.3e} exceeds the budget; the run will stop"));
            }
            cost.push(CostRow { eps: 1.0 / ei as f64, fine_nodes, steps, work });
        }
    }
    let total_work = cost.iter().map(|c| c.work).sum();
    Ok(ValidationReport { config: cfg.clone(), cost, total_work, warnings })
}

/// One output file with its checksum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseTime {
    pub phase: String,
    pub seconds: f64,
}

/// Record of a run; `config` alone reproduces it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub seed: u64,
    pub workers: usize,
    pub phases: Vec<PhaseTime>,
    pub artifacts: Vec<Artifact>,
    pub pass: bool,
    pub summary: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

struct Recorder {
    dir: PathBuf,
    phases: Vec<PhaseTime>,
    artifacts: Vec<Artifact>,
    summary: Vec<String>,
}

impl Recorder {
    fn write(&mut self, name: &str, body: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), body)?;
        self.artifacts.push(Artifact { path: name.into(), sha256: sha256_hex(body.as_bytes()), bytes: body.len() });
        Ok(())
    }

    fn phase<T>(&mut self, name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let t = Instant::now();
        let r = f();
        self.phases.push(PhaseTime { phase: name.into(), seconds: t.elapsed().as_secs_f64() });
        r
    }

    fn rates(&mut self, cfg: &ExperimentConfig, rep: &RateReport) -> Result<bool> {
        if cfg.output.csv {
            self.write("rates.csv", &rep.to_csv())?;
        }
        if cfg.output.json {
            self.write("rates.json", &rep.to_json()?)?;
        }
        if cfg.output.plot_data {
            self.write("rates_plot.dat", &rep.plot_data())?;
        }
        let full = rep.fit_full.as_ref().map_or("n/a".to_string(), |f| format!("{:.3}", f.slope));
        self.summary.push(format!(
            "{}: interior slope {:.3}, full slope {full}, target {} (margin {})",
            rep.label, rep.fit_interior.slope, rep.target, rep.margin
        ));
        Ok(rep.pass())
    }
}

/// Layer-only output: effective data and decay fits of the base stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerReport {
    pub x: Vec<f64>,
    pub gbreve: Vec<f64>,
    pub fits: Vec<Option<DecayFit>>,
    pub osc_history: Vec<Vec<(f64, f64)>>,
}

/// Coupling sources of the stage-1 layer per level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub linear: bool,
    pub levels: Vec<Vec<(f64, f64)>>,
}

impl PucciReport {
    pub fn pass(&self) -> bool {
        self.gamma_plus - self.gamma_minus > PUCCI_GAP_MIN
            && self.positive_error <= PUCCI_POSITIVE_TOL
            && self.kinks.iter().all(|k| k.relative_error <= PUCCI_KINK_TOL)
    }
}

/// Executes the configured pipeline, writing artifacts and `manifest.json`
/// into `out`.
pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunManifest> {
    cfg.check()?;
    std::fs::create_dir_all(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::config("workers", e.to_string()))?;
    let mut rec = Recorder { dir: out.to_path_buf(), phases: Vec::new(), artifacts: Vec::new(), summary: Vec::new() };
    rec.write("config.json", &cfg.to_json()?)?;
    let op = cfg.build_operator()?;
    let pass = pool.install(|| execute(cfg, &op, &mut rec))?;
    let manifest = RunManifest {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").into(),
        seed: cfg.seed,
        workers: cfg.workers,
        phases: rec.phases,
        artifacts: rec.artifacts,
        pass,
        summary: rec.summary,
    };
    std::fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

fn execute(cfg: &ExperimentConfig, op: &FullyNonlinearOp, rec: &mut Recorder) -> Result<bool> {
    let sampler = SamplerConfig { seed: cfg.seed, ..SamplerConfig::default() };
    let assumptions = rec.phase("assumptions", || Ok(check_assumptions(op, &sampler)))?;
    rec.write("assumptions.json", &serde_json::to_string_pretty(&assumptions)?)?;
    if !assumptions.all_pass() {
        rec.summary.push("operator assumption sampler reported a violation (see assumptions.json)".into());
    }
    let p = &cfg.pipeline;
    let g = cfg.data.g(cfg.grids.period);
    match p.kind {
        PipelineKind::TheoremRate | PipelineKind::NonoscRate => {
            let spec = TheoremSpec {
                m: p.m,
                d_max: cfg.d_max(),
                eps_inv: cfg.eps_inv()?,
                grids: cfg.grids.grids(),
                c_window: p.c_window,
                margin: p.margin,
                variant: if p.kind == PipelineKind::NonoscRate { Variant::NonOscillatory } else { Variant::Scaled },
                budget: p.budget,
            };
            let (rep, asm) = rec.phase("sweep", || theorem_rate(op, &g, &spec))?;
            if let Some(st) = asm.layer.stages.get(1) {
                let c = CouplingReport { linear: op.is_linear(), levels: st.coupling.clone() };
                rec.write("coupling.json", &serde_json::to_string_pretty(&c)?)?;
            }
            rec.rates(cfg, &rep)
        }
        PipelineKind::RecessionRate => {
            let spec = RecessionSpec {
                eps_inv: cfg.eps_inv()?,
                grids: cfg.grids.grids(),
                table_points: p.table.points,
                table_stretch: p.table.stretch,
                c_window: p.c_window,
                margin: p.margin,
                budget: p.budget,
            };
            let (rep, table) = rec.phase("sweep", || recession_experiment(op, &g, &spec))?;
            if cfg.output.json {
                rec.write("table.json", &table.to_json()?)?;
            }
            rec.rates(cfg, &rep)
        }
        PipelineKind::PucciExample => {
            let (lo, hi) = match cfg.operator.base {
                super::config::BaseOperator::PucciMinus { lo, hi, .. } => (lo, hi),
                _ => return Err(Error::config("operator.base", "pucci_example needs pucci_minus")),
            };
            let d = &cfg.data;
            let l = cfg.grids.period;
            let phi = |y: f64| d.phi.eval(0.0, [y, 0.0], 0.0);
            let pos = |x: f64| d.psi_positive.eval(x / l, [0.0; 2], 0.0);
            let sgn = |x: f64| d.psi_signed.eval(x / l, [0.0; 2], 0.0);
            let r = rec.phase("pucci", || pucci_gamma_example(lo, hi, &phi, &pos, &sgn, cfg.grids.ny, cfg.grids.nx))?;
            rec.write("pucci.json", &serde_json::to_string_pretty(&r)?)?;
            rec.summary.push(format!(
                "γ₊ = {:.6}, γ₋ = {:.6}, positive-profile error {:.2e}, {} kink(s)",
                r.gamma_plus,
                r.gamma_minus,
                r.positive_error,
                r.kinks.len()
            ));
            Ok(r.pass())
        }
        PipelineKind::CellTable => {
            let fast = TorusGrid::for_ellipticity(op.n, cfg.grids.ny, op.cap_lambda)?;
            let axis = if p.table.stretch > 0.0 {
                stretched_axis(p.table.pmax, p.table.points, p.table.stretch)
            } else {
                uniform_axis(p.table.pmax, p.table.points)
            };
            let axes = vec![axis; if op.n == 1 { 1 } else { 3 }];
            let dep = op.dependence();
            let slow = SlowGrid::new(cfg.grids.nx, op.period, cfg.grids.horizon)?;
            let xs = if dep.x { slow.xs() } else { vec![0.0] };
            let ts = if dep.t {
                (0..cfg.grids.nt).map(|j| j as f64 * cfg.grids.horizon / (cfg.grids.nt - 1) as f64).collect()
            } else {
                vec![0.0]
            };
            let mut table = rec.phase("table", || effective_operator_table(op, &fast, axes, xs, ts, &p.cell))?;
            let report = table.validate(1e-3, 1e-6, p.table.concavity_triples, cfg.seed);
            rec.write("table.json", &table.to_json()?)?;
            rec.summary.push(format!(
                "table slopes in [{:.4}, {:.4}], concavity violation {:.2e}, {} failed entries",
                report.min_slope,
                report.max_slope,
                report.max_concavity_violation,
                table.failures.len()
            ));
            Ok(table.failures.is_empty() && report.ellipticity_ok && report.concavity_ok)
        }
        PipelineKind::LayerOnly => {
            let slow = SlowGrid::new(cfg.grids.nx, op.period, cfg.grids.horizon)?;
            let setup = LayerSetup::new(op, cfg.grids.ny, slow.clone(), vec![0.0])?;
            let data = crate::expansion::sample_slow_fast(&g, &slow, cfg.grids.ny);
            let st = rec.phase("layer", || solve_base_layer(op, &setup, data))?;
            let r = LayerReport {
                x: slow.xs(),
                gbreve: st.gbreve[0][..slow.nx].to_vec(),
                fits: st.fits.clone(),
                osc_history: st.osc_history.clone(),
            };
            rec.write("layer.json", &serde_json::to_string_pretty(&r)?)?;
            let rate = r.fits.first().and_then(|f| f.as_ref()).map(|f| f.rate);
            rec.summary.push(format!("base layer converged; fitted decay rate {rate:?}"));
            Ok(true)
        }
    }
}

/// `bootstrap_run` with the configured grids; used by callers that only need
/// the assembly.
pub fn assemble(cfg: &ExperimentConfig) -> Result<crate::expansion::ExpansionAssembly> {
    let op = cfg.build_operator()?;
    let g = cfg.data.g(cfg.grids.period);
    bootstrap_run(&op, &g, cfg.pipeline.m, cfg.d_max(), &cfg.grids.grids(), EffectiveMode::Linearized)
}

/// Re-renders a rates CSV as plot data.
pub fn render_report(csv: &str) -> Result<String> {
    let (rows, _target) = RateReport::rows_from_csv(csv)?;
    let mut s = String::from("# log_eps log_err_full log_err_interior\n");
    for r in rows {
        s.push_str(&format!("{} {} {}\n", r.eps.ln(), r.err_full.ln(), r.err_interior.ln()));
    }
    Ok(s)
}
