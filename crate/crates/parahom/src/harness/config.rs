//! Declarative experiment documents.

use serde::{Deserialize, Serialize};

use crate::cell::CellConfig;
use crate::error::{Error, Result};
use crate::expansion::Grids;
use crate::operator::{Coef, FourierSeries, FullyNonlinearOp, SymField};

/// Operator family and its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseOperator {
    Heat {
        #[serde(default = "one")]
        n: usize,
    },
    /// `a(y) = 1/(2 + sin 2πy)` in one dimension.
    #[serde(rename = "harmonic_1d")]
    Harmonic1d,
    /// One-dimensional `a(y) p`.
    Linear { a: Coef },
    PucciMinus {
        #[serde(default = "one")]
        n: usize,
        lo: f64,
        hi: f64,
    },
    PucciPlus {
        #[serde(default = "one")]
        n: usize,
        lo: f64,
        hi: f64,
    },
    /// Smoothed minimum over one-dimensional members `a_i(y) p`.
    HjbMin {
        members: Vec<Coef>,
        #[serde(default)]
        mu: f64,
    },
}

fn one() -> usize {
    1
}

/// `F = F_* + b(y)[(μ² + |P|²)^{δ/2} − μ^δ]` around the base operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecessionConfig {
    pub delta: f64,
    pub b: Coef,
    #[serde(default = "unit")]
    pub mu: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub base: BaseOperator,
    #[serde(default)]
    pub recession: Option<RecessionConfig>,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig { base: BaseOperator::Harmonic1d, recession: None }
    }
}

/// One product term `X(x/L) · Y(y)` of the initial datum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataTerm {
    pub x: FourierSeries,
    pub y: FourierSeries,
}

/// Initial data and the profiles of the Pucci example.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub g: Vec<DataTerm>,
    pub phi: FourierSeries,
    pub psi_positive: FourierSeries,
    pub psi_signed: FourierSeries,
}

fn xmode(kx: i32, cos: f64, sin: f64) -> crate::operator::FourierMode {
    crate::operator::FourierMode { kx, ky: [0, 0], ks: 0, cos, sin }
}

impl Default for DataConfig {
    fn default() -> Self {
        let ymode = crate::operator::FourierMode::y;
        DataConfig {
            g: vec![DataTerm {
                x: FourierSeries::with_modes(0.0, vec![xmode(1, 1.0, 0.0)]),
                y: FourierSeries::with_modes(1.0, vec![ymode(1, 1.0, 0.0)]),
            }],
            phi: FourierSeries::with_modes(0.0, vec![ymode(1, 1.0, 0.0)]),
            psi_positive: FourierSeries::with_modes(1.5, vec![xmode(1, 1.0, 0.0)]),
            psi_signed: FourierSeries::with_modes(0.0, vec![xmode(1, 0.0, 1.0)]),
        }
    }
}

impl DataConfig {
    /// `g(x, y)` for slow period `period`.
    pub fn g(&self, period: f64) -> impl Fn(f64, f64) -> f64 + Sync + '_ {
        move |x, y| self.g.iter().map(|t| t.x.eval(x / period, [0.0; 2], 0.0) * t.y.eval(0.0, [y, 0.0], 0.0)).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridsConfig {
    pub ny: usize,
    pub nx: usize,
    pub nt: usize,
    pub n_fine: usize,
    pub period: f64,
    pub horizon: f64,
}

impl Default for GridsConfig {
    fn default() -> Self {
        let g = Grids::default();
        GridsConfig { ny: g.ny, nx: g.nx, nt: g.nt, n_fine: g.n_fine, period: 1.0, horizon: g.horizon }
    }
}

impl GridsConfig {
    pub fn grids(&self) -> Grids {
        Grids { ny: self.ny, nx: self.nx, nt: self.nt, n_fine: self.n_fine, horizon: self.horizon }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineKind {
    TheoremRate,
    NonoscRate,
    RecessionRate,
    PucciExample,
    CellTable,
    LayerOnly,
}

/// Matrix axis of a tabulated `F̄`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TableConfig {
    pub points: usize,
    pub pmax: f64,
    /// Stretching of the recession-rate axis; zero gives a uniform axis.
    pub stretch: f64,
    pub concavity_triples: usize,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig { points: 41, pmax: 4.0, stretch: 4.0, concavity_triples: 1000 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub kind: PipelineKind,
    pub m: usize,
    /// Bootstrap depth; materialized as `min(1, m/2)` when absent.
    pub d_max: Option<usize>,
    /// Strictly decreasing; every `1/ε` must be an integer.
    pub epsilons: Vec<f64>,
    pub c_window: f64,
    pub margin: f64,
    /// Node-count × steps limit for each direct solve.
    pub budget: f64,
    pub table: TableConfig,
    pub cell: CellConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            kind: PipelineKind::TheoremRate,
            m: 2,
            d_max: None,
            epsilons: vec![0.125, 0.0625, 0.03125],
            c_window: 2.0,
            margin: 0.3,
            budget: 2e10,
            table: TableConfig::default(),
            cell: CellConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: String,
    pub csv: bool,
    pub json: bool,
    pub plot_data: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { dir: "parahom-out".into(), csv: true, json: true, plot_data: true }
    }
}

/// A complete experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operator: OperatorConfig,
    pub data: DataConfig,
    pub grids: GridsConfig,
    pub pipeline: PipelineConfig,
    pub output: OutputConfig,
    pub seed: u64,
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            operator: OperatorConfig::default(),
            data: DataConfig::default(),
            grids: GridsConfig::default(),
            pipeline: PipelineConfig::default(),
            output: OutputConfig::default(),
            seed: 7,
            workers: 1,
        }
    }
}

impl ExperimentConfig {
    /// Parses, checks and materializes defaults; errors name the field path.
    pub fn from_json(s: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(s);
        let mut cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::new() } else { path }, e.into_inner().to_string())
        })?;
        cfg.materialize();
        cfg.check()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    fn materialize(&mut self) {
        if self.pipeline.d_max.is_none() {
            self.pipeline.d_max = Some(1.min(self.pipeline.m / 2));
        }
    }

    pub fn d_max(&self) -> usize {
        self.pipeline.d_max.unwrap_or(1.min(self.pipeline.m / 2))
    }

    /// `1/ε` for each entry of the ε list.
    pub fn eps_inv(&self) -> Result<Vec<usize>> {
        self.pipeline
            .epsilons
            .iter()
            .map(|&e| {
                let inv = 1.0 / e;
                if !(e > 0.0 && e <= 0.5) || (inv - inv.round()).abs() > 1e-9 {
                    Err(Error::config("pipeline.epsilons", format!("ε = {e} must be 1/k with k ≥ 2")))
                } else {
                    Ok(inv.round() as usize)
                }
            })
            .collect()
    }

    /// Structural checks that need no solves.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn check(&self) -> Result<()> {
        let p = &self.pipeline;
        let g = &self.grids;
        let needs_eps = matches!(p.kind, PipelineKind::TheoremRate | PipelineKind::NonoscRate | PipelineKind::RecessionRate);
        if needs_eps {
            if p.epsilons.len() < 3 {
                return Err(Error::config("pipeline.epsilons", "need at least three ε values"));
            }
            if p.epsilons.windows(2).any(|w| w[1] >= w[0]) {
                return Err(Error::config("pipeline.epsilons", "ε list must be strictly decreasing"));
            }
            self.eps_inv()?;
        }
        if matches!(p.kind, PipelineKind::TheoremRate | PipelineKind::NonoscRate) && p.m < 2 {
            return Err(Error::config("pipeline.m", "rate sweeps need m ≥ 2"));
        }
        if self.d_max() > p.m / 2 {
            return Err(Error::config("pipeline.d_max", format!("d_max ≤ m/2 = {}", p.m / 2)));
        }
        if p.c_window <= 0.0 || !p.c_window.is_finite() {
            return Err(Error::config("pipeline.c_window", "must be positive"));
        }
        if !(p.margin >= 0.0) {
            return Err(Error::config("pipeline.margin", "must be non-negative"));
        }
        if !(p.budget > 0.0) {
            return Err(Error::config("pipeline.budget", "must be positive"));
        }
        if p.table.points < 2 || !(p.table.pmax > 0.0) || p.table.stretch < 0.0 {
            return Err(Error::config("pipeline.table", "need points ≥ 2, pmax > 0, stretch ≥ 0"));
        }
        if g.ny < 4 || g.nx < 8 || g.nt < 6 || g.n_fine < g.nx {
            return Err(Error::config("grids", "need ny ≥ 4, nx ≥ 8, nt ≥ 6, n_fine ≥ nx"));
        }
        if !(g.period > 0.0) || !(g.horizon > 0.0) {
            return Err(Error::config("grids", "period and horizon must be positive"));
        }
        if self.workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if self.data.g.is_empty() {
            return Err(Error::config("data.g", "initial datum has no terms"));
        }
        if p.kind == PipelineKind::RecessionRate && self.operator.recession.is_none() {
            return Err(Error::config("operator.recession", "recession_rate needs a recession block"));
        }
        if p.kind == PipelineKind::PucciExample
            && !matches!(self.operator.base, BaseOperator::PucciMinus { n: 1, .. })
        {
            return Err(Error::config("operator.base", "pucci_example needs a one-dimensional pucci_minus base"));
        }
        self.build_operator()?;
        Ok(())
    }

    /// The configured operator with its recession partner and slow period.
    pub fn build_operator(&self) -> Result<FullyNonlinearOp> {
        let path = "operator.base";
        let wrap = |e: Error| match e {
            Error::OperatorDefinition(m) => Error::config(path, m),
            e => e,
        };
        let mut op = match &self.operator.base {
            BaseOperator::Heat { n } => {
                if !(1..=2).contains(n) {
                    return Err(Error::config("operator.base.n", "dimension must be 1 or 2"));
                }
                FullyNonlinearOp::heat(*n)
            }
            BaseOperator::Harmonic1d => FullyNonlinearOp::harmonic_1d(),
            BaseOperator::Linear { a } => FullyNonlinearOp::linear_tr(SymField::scalar(a.clone())).map_err(wrap)?,
            BaseOperator::PucciMinus { n, lo, hi } => pucci(*n, *lo, *hi, FullyNonlinearOp::pucci_minus)?,
            BaseOperator::PucciPlus { n, lo, hi } => pucci(*n, *lo, *hi, FullyNonlinearOp::pucci_plus)?,
            BaseOperator::HjbMin { members, mu } => {
                let fam = members.iter().cloned().map(SymField::scalar).collect();
                FullyNonlinearOp::hjb_min(fam, *mu).map_err(wrap)?
            }
        };
        if let Some(r) = &self.operator.recession {
            op = FullyNonlinearOp::recession_perturbed(op, r.b.clone(), r.delta, r.mu)
                .map_err(|e| match e {
                    Error::OperatorDefinition(m) => Error::config("operator.recession", m),
                    e => e,
                })?;
        }
        op.period = self.grids.period;
        if let Some(r) = op.recession.as_mut() {
            r.op.period = self.grids.period;
        }
        Ok(op)
    }
}

fn pucci(n: usize, lo: f64, hi: f64, make: fn(usize, f64, f64) -> Result<FullyNonlinearOp>) -> Result<FullyNonlinearOp> {
    if !(1..=2).contains(&n) {
        return Err(Error::config("operator.base.n", "dimension must be 1 or 2"));
    }
    if !(lo > 0.0 && lo <= hi) {
        return Err(Error::config("operator.base", format!("need 0 < lo ≤ hi, got lo = {lo}, hi = {hi}")));
    }
    make(n, lo, hi).map_err(|e| match e {
        Error::OperatorDefinition(m) => Error::config("operator.base", m),
        e => e,
    })
}
