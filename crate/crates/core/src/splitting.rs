//! Strang splitting of the pricing PIDE into diffusion and jump stages, and the
//! two-stage single-step experiment (closed-form diffusion, then one jump step).

use crate::diffusion::{bs_closed_form, boundary_values, CnStepper, DiffusionSpec};
use crate::error::{Error, Result};
use crate::gh::{build_gh_operator, gh_jump_step, GhOperatorSet};
use crate::grid::CompositeGrid;
use crate::matfun::{self, DenseMatrix};
use crate::meixner::{
    build_meixner_factors, meixner_step_interp, KappaInterp, MeixnerFactorSet, DEFAULT_TRUNCATION,
};
use crate::model::{JumpModel, ModelParams, Payoff};
use crate::nig::{build_nig_generator, nig_jump_step_pade, NigGenerator, PADE_MAX_ITER, PADE_TOL};
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitMode {
    Strang3,
    Experiment2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpMethod {
    Expm,
    Pade,
    Product,
    Interp,
}

impl JumpMethod {
    pub fn default_for(model: &JumpModel) -> Self {
        match model {
            JumpModel::Nig(_) | JumpModel::Gh(_) => JumpMethod::Expm,
            JumpModel::Meixner(_) => JumpMethod::Interp,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            JumpMethod::Expm => "expm",
            JumpMethod::Pade => "pade",
            JumpMethod::Product => "product",
            JumpMethod::Interp => "interp",
        }
    }
}

impl fmt::Display for JumpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for JumpMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "expm" => Ok(JumpMethod::Expm),
            "pade" => Ok(JumpMethod::Pade),
            "product" => Ok(JumpMethod::Product),
            "interp" => Ok(JumpMethod::Interp),
            other => Err(Error::Config(format!("unknown jump method '{other}' (expected expm, pade, product or interp)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpConfig {
    pub method: JumpMethod,
    /// Meixner truncation order.
    pub p: usize,
    pub interp: KappaInterp,
}

impl JumpConfig {
    pub fn default_for(model: &JumpModel) -> Self {
        JumpConfig { method: JumpMethod::default_for(model), p: DEFAULT_TRUNCATION, interp: KappaInterp::Quadratic }
    }
}

/// Uniform log-moneyness grid of `n` nodes over `width`, centred on the strike.
pub fn pricing_grid(n: usize, width: f64) -> Result<CompositeGrid> {
    if n < 3 {
        return Err(Error::Grid(format!("need at least 3 nodes, got {n}")));
    }
    CompositeGrid::uniform(n, width / (n - 1) as f64, 0.0)
}

/// Payoff sampled at the nodes, with S = K e^x.
pub fn payoff_on_grid(payoff: &Payoff, grid: &CompositeGrid) -> Vec<f64> {
    grid.nodes.iter().map(|x| payoff.value(payoff.strike * x.exp())).collect()
}

/// Value at `spot` by linear interpolation between the bracketing nodes.
pub fn price_at(grid: &CompositeGrid, values: &[f64], spot: f64, strike: f64) -> f64 {
    grid.interpolate(values, (spot / strike).ln())
}

/// One operator of the splitting, advancing a price vector from time-to-maturity
/// `tau` to `tau + dt`.
pub trait Stage {
    fn label(&self) -> &'static str;
    fn advance(&self, c: &[f64], tau: f64, dt: f64) -> Result<Vec<f64>>;
}

/// Crank–Nicolson diffusion stage. The factorisation for `dt` is built once;
/// other step lengths are factorised on demand.
pub struct CnStage {
    spec: DiffusionSpec,
    grid: CompositeGrid,
    payoff: Payoff,
    dt: f64,
    stepper: CnStepper,
}

impl CnStage {
    pub fn new(spec: DiffusionSpec, grid: CompositeGrid, payoff: Payoff, dt: f64) -> Result<Self> {
        let stepper = CnStepper::new(&spec, &grid, dt)?;
        Ok(CnStage { spec, grid, payoff, dt, stepper })
    }
}

impl Stage for CnStage {
    fn label(&self) -> &'static str {
        "diffusion"
    }

    fn advance(&self, c: &[f64], tau: f64, dt: f64) -> Result<Vec<f64>> {
        if dt == 0.0 {
            return Ok(c.to_vec());
        }
        let (l, r) = boundary_values(&self.spec, &self.payoff, &self.grid, tau + dt);
        if dt == self.dt {
            Ok(self.stepper.step(c, l, r))
        } else {
            Ok(CnStepper::new(&self.spec, &self.grid, dt)?.step(c, l, r))
        }
    }
}

/// Closed-form lognormal stage. Exact only when started from the payoff at
/// `tau = 0`, which is how the two-stage experiment uses it.
pub struct ClosedFormStage {
    pub spec: DiffusionSpec,
    pub grid: CompositeGrid,
    pub payoff: Payoff,
}

impl Stage for ClosedFormStage {
    fn label(&self) -> &'static str {
        "diffusion"
    }

    fn advance(&self, _c: &[f64], tau: f64, dt: f64) -> Result<Vec<f64>> {
        if tau != 0.0 {
            return Err(Error::domain("the closed-form diffusion stage only starts from the payoff at tau = 0"));
        }
        Ok(bs_closed_form(&self.spec, &self.payoff, &self.grid, dt))
    }
}

enum JumpOperator {
    /// `expm(Δτ J)` or the full Meixner product, applied as one dense matvec.
    Dense(DenseMatrix),
    Pade(NigGenerator),
    Gh(GhOperatorSet),
    Interp(MeixnerFactorSet, KappaInterp),
}

/// Jump stage prepared for one step length.
pub struct JumpStage {
    model: JumpModel,
    grid: CompositeGrid,
    cfg: JumpConfig,
    dt: f64,
    op: JumpOperator,
    /// Method actually used after any fallback.
    pub effective: JumpMethod,
}

fn product_operator(fs: &MeixnerFactorSet) -> Result<DenseMatrix> {
    matfun::check_dense_size(fs.len())?;
    let mut acc = matfun::scaled(&matfun::identity(fs.len()), fs.prefactor());
    for f in &fs.factors {
        acc = &matfun::powm(&f.to_dense(), -fs.kappa)? * &acc;
    }
    Ok(acc)
}

impl JumpStage {
    pub fn new(model: &JumpModel, grid: &CompositeGrid, dt: f64, cfg: JumpConfig) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::domain("jump step needs dt > 0"));
        }
        model.validate()?;
        let bad = || Error::domain(format!("method '{}' does not apply to the {} model", cfg.method, model.name()));
        let (op, effective) = match (model, cfg.method) {
            (JumpModel::Nig(p), JumpMethod::Expm) => {
                (JumpOperator::Dense(build_nig_generator(p, grid)?.propagator(dt)?), JumpMethod::Expm)
            }
            (JumpModel::Nig(p), JumpMethod::Pade) => (JumpOperator::Pade(build_nig_generator(p, grid)?), JumpMethod::Pade),
            (JumpModel::Gh(p), JumpMethod::Expm | JumpMethod::Product) => {
                (JumpOperator::Gh(build_gh_operator(p, grid, dt)?), cfg.method)
            }
            (JumpModel::Meixner(p), JumpMethod::Product) => {
                let fs = build_meixner_factors(p, grid, dt, cfg.p)?;
                (JumpOperator::Dense(product_operator(&fs)?), JumpMethod::Product)
            }
            (JumpModel::Meixner(p), JumpMethod::Interp) => {
                let fs = build_meixner_factors(p, grid, dt, cfg.p)?;
                if fs.kappa > 2.0 {
                    // the knots only reach κ = 2
                    (JumpOperator::Dense(product_operator(&fs)?), JumpMethod::Product)
                } else {
                    (JumpOperator::Interp(fs, cfg.interp), JumpMethod::Interp)
                }
            }
            _ => return Err(bad()),
        };
        Ok(JumpStage { model: *model, grid: grid.clone(), cfg, dt, op, effective })
    }

    pub fn step(&self, c: &[f64]) -> Result<Vec<f64>> {
        if c.len() != self.grid.len() {
            return Err(Error::Grid(format!("vector of length {} on a grid of {} nodes", c.len(), self.grid.len())));
        }
        match &self.op {
            JumpOperator::Dense(m) => Ok(matfun::matvec(m, c)),
            JumpOperator::Pade(g) => nig_jump_step_pade(g, c, self.dt, PADE_MAX_ITER, PADE_TOL),
            JumpOperator::Gh(ops) => gh_jump_step(ops, c),
            JumpOperator::Interp(fs, how) => meixner_step_interp(fs, c, *how),
        }
    }
}

impl Stage for JumpStage {
    fn label(&self) -> &'static str {
        "jump"
    }

    fn advance(&self, c: &[f64], _tau: f64, dt: f64) -> Result<Vec<f64>> {
        if dt == self.dt {
            self.step(c)
        } else {
            JumpStage::new(&self.model, &self.grid, dt, self.cfg)?.step(c)
        }
    }
}

pub struct SplitPlan {
    pub mode: SplitMode,
    pub steps: usize,
    pub dt: f64,
    pub diffusion: Box<dyn Stage>,
    pub jump: Box<dyn Stage>,
}

impl SplitPlan {
    /// Strang plan with Crank–Nicolson half steps over `[0, maturity]`.
    pub fn strang(model: &ModelParams, payoff: &Payoff, grid: &CompositeGrid, steps: usize, jump: JumpConfig) -> Result<Self> {
        model.market.validate()?;
        if steps == 0 {
            return Err(Error::domain("need at least one time step"));
        }
        let dt = model.market.maturity / steps as f64;
        let spec = DiffusionSpec::from_model(model)?;
        Ok(SplitPlan {
            mode: SplitMode::Strang3,
            steps,
            dt,
            diffusion: Box::new(CnStage::new(spec, grid.clone(), *payoff, 0.5 * dt)?),
            jump: Box::new(JumpStage::new(&model.jump, grid, dt, jump)?),
        })
    }

    /// Single step of length `Δτ = T`: closed-form diffusion, then the jump step.
    pub fn experiment(model: &ModelParams, payoff: &Payoff, grid: &CompositeGrid, jump: JumpConfig) -> Result<Self> {
        let m = &model.market;
        m.validate()?;
        if (m.dt - m.maturity).abs() > 1e-12 * m.maturity.max(1.0) {
            return Err(Error::domain(format!("the two-stage experiment needs dt = T, got dt = {} and T = {}", m.dt, m.maturity)));
        }
        let spec = DiffusionSpec::from_model(model)?;
        Ok(SplitPlan {
            mode: SplitMode::Experiment2,
            steps: 1,
            dt: m.dt,
            diffusion: Box::new(ClosedFormStage { spec, grid: grid.clone(), payoff: *payoff }),
            jump: Box::new(JumpStage::new(&model.jump, grid, m.dt, jump)?),
        })
    }

    /// Runs every step from the terminal values `c0`.
    pub fn run(&self, c0: &[f64]) -> Result<Vec<f64>> {
        match self.mode {
            SplitMode::Experiment2 => {
                let c = self.diffusion.advance(c0, 0.0, self.dt)?;
                self.jump.advance(&c, 0.0, self.dt)
            }
            SplitMode::Strang3 => {
                let mut c = c0.to_vec();
                for k in 0..self.steps {
                    c = strang_step(self, &c, k as f64 * self.dt)?;
                }
                Ok(c)
            }
        }
    }
}

/// `e^{Δτ/2 D} e^{Δτ J} e^{Δτ/2 D} c_in`, starting at time-to-maturity `tau`.
pub fn strang_step(plan: &SplitPlan, c_in: &[f64], tau: f64) -> Result<Vec<f64>> {
    let half = 0.5 * plan.dt;
    let c = plan.diffusion.advance(c_in, tau, half)?;
    let c = plan.jump.advance(&c, tau + half, plan.dt)?;
    plan.diffusion.advance(&c, tau + half, half)
}

/// Grid values after the two-stage single step.
pub fn experiment_two_step(model: &ModelParams, payoff: &Payoff, grid: &CompositeGrid, jump: JumpConfig) -> Result<Vec<f64>> {
    SplitPlan::experiment(model, payoff, grid, jump)?.run(&payoff_on_grid(payoff, grid))
}
