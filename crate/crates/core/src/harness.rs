//! Convergence studies over grid ladders, observed orders, timing regression and
//! the CSV report format.
//!
//! Study configs are flat `key = value` text, one pair per line, `#` starts a
//! comment. Keys:
//!
//! | key | values |
//! |-----|--------|
//! | `model` | `nig`, `gh`, `meixner` |
//! | `alpha`, `beta`, `delta`, `mu` | NIG and GH |
//! | `lambda` | GH only |
//! | `a`, `b`, `d`, `m` | Meixner |
//! | `spot`, `strike`, `rate`, `dividend`, `sigma`, `maturity` | market |
//! | `payoff` | `call`, `put`, `digital` |
//! | `width` | log-moneyness span of the grid |
//! | `ladder` | comma-separated node counts |
//! | `mode` | `experiment2` (single step, `steps = 1`) or `strang3` |
//! | `steps` | time steps |
//! | `method` | `expm`, `pade`, `product`, `interp` |
//! | `p` | Meixner truncation order |
//! | `interp` | `quadratic`, `cubic` |
//! | `reference` | `finest`, `cos` or a number |
//! | `cos_terms`, `cos_width` | COS settings |
//!
//! Missing keys take the defaults of [`StudyConfig::default_for`].

use crate::cos::{cos_price, CosConfig};
use crate::error::{Error, Result};
use crate::meixner::KappaInterp;
use crate::model::{GhParams, JumpModel, MarketParams, MeixnerParams, ModelParams, NigParams, Payoff, PayoffKind};
use crate::splitting::{payoff_on_grid, price_at, pricing_grid, JumpConfig, JumpMethod, JumpStage, SplitMode, SplitPlan};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

/// ln 1e6: the grid spans six decades of S/K.
pub const DEFAULT_WIDTH: f64 = 13.815510557964274;
pub const LADDER: [usize; 6] = [51, 101, 201, 401, 801, 1601];
pub const PRESETS: [&str; 6] = ["nig-neg-skew", "nig-pos-skew", "gh-lambda-m1", "gh-lambda-1", "meixner-product", "meixner-interp"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Reference {
    Finest,
    Cos,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub model: ModelParams,
    pub payoff: Payoff,
    pub width: f64,
    pub ladder: Vec<usize>,
    pub mode: SplitMode,
    pub steps: usize,
    pub jump: JumpConfig,
    pub reference: Reference,
    pub cos: CosConfig,
}

fn base_market() -> MarketParams {
    MarketParams { spot: 100.0, strike: 100.0, rate: 0.05, dividend: 0.0, sigma: 0.15, maturity: 0.01, dt: 0.01 }
}

impl StudyConfig {
    pub fn default_for(jump: JumpModel) -> Self {
        StudyConfig {
            model: ModelParams { market: base_market(), jump },
            payoff: Payoff::call(100.0),
            width: DEFAULT_WIDTH,
            ladder: LADDER.to_vec(),
            mode: SplitMode::Experiment2,
            steps: 1,
            jump: JumpConfig::default_for(&jump),
            reference: Reference::Finest,
            cos: CosConfig::default(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        let nig = |beta| JumpModel::Nig(NigParams { alpha: 10.0, beta, delta: 0.2, mu: 0.0 });
        let gh = |lambda| JumpModel::Gh(GhParams { lambda, alpha: 10.0, beta: -5.7, delta: 0.2, mu: 0.0 });
        let meixner = JumpModel::Meixner(MeixnerParams { a: 0.04, b: -0.32754, d: 52.0, m: 0.0 });
        Ok(match name {
            "nig-neg-skew" => Self::default_for(nig(-5.7)),
            "nig-pos-skew" => Self::default_for(nig(5.7)),
            "gh-lambda-m1" => Self::default_for(gh(-1.0)),
            "gh-lambda-1" => Self::default_for(gh(1.0)),
            "meixner-product" => {
                let mut c = Self::default_for(meixner);
                c.jump.method = JumpMethod::Product;
                c
            }
            "meixner-interp" => {
                let mut c = Self::default_for(meixner);
                c.ladder.push(3201);
                c
            }
            other => return Err(Error::Config(format!("unknown preset '{other}' (known: {})", PRESETS.join(", ")))),
        })
    }

    /// Reads `key = value` lines over the defaults for the named model.
    pub fn parse(text: &str) -> Result<Self> {
        let mut kv = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{raw}'", lineno + 1)))?;
            if kv.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key '{}'", lineno + 1, k.trim())));
            }
        }
        let model = kv.remove("model").ok_or_else(|| Error::Config("missing key 'model'".into()))?;
        let mut get = |key: &str, default: f64| -> Result<f64> {
            match kv.remove(key) {
                None => Ok(default),
                Some(v) => v.parse().map_err(|_| Error::Config(format!("key '{key}': '{v}' is not a number"))),
            }
        };
        let jump = match model.as_str() {
            "nig" => JumpModel::Nig(NigParams {
                alpha: get("alpha", 10.0)?,
                beta: get("beta", -5.7)?,
                delta: get("delta", 0.2)?,
                mu: get("mu", 0.0)?,
            }),
            "gh" => JumpModel::Gh(GhParams {
                lambda: get("lambda", -1.0)?,
                alpha: get("alpha", 10.0)?,
                beta: get("beta", -5.7)?,
                delta: get("delta", 0.2)?,
                mu: get("mu", 0.0)?,
            }),
            "meixner" => JumpModel::Meixner(MeixnerParams {
                a: get("a", 0.04)?,
                b: get("b", -0.32754)?,
                d: get("d", 52.0)?,
                m: get("m", 0.0)?,
            }),
            other => return Err(Error::Config(format!("unknown model '{other}' (expected nig, gh or meixner)"))),
        };
        let mut cfg = Self::default_for(jump);
        let mk = &mut cfg.model.market;
        mk.spot = get("spot", mk.spot)?;
        mk.strike = get("strike", mk.strike)?;
        mk.rate = get("rate", mk.rate)?;
        mk.dividend = get("dividend", mk.dividend)?;
        mk.sigma = get("sigma", mk.sigma)?;
        mk.maturity = get("maturity", mk.maturity)?;
        cfg.width = get("width", cfg.width)?;
        let cos_width = get("cos_width", cfg.cos.width_multiplier)?;
        cfg.cos.width_multiplier = cos_width;
        let count = |key: &str, v: &str| -> Result<usize> {
            v.trim().parse().map_err(|_| Error::Config(format!("key '{key}': '{v}' is not a count")))
        };
        if let Some(v) = kv.remove("steps") {
            cfg.steps = count("steps", &v)?;
        }
        if let Some(v) = kv.remove("p") {
            cfg.jump.p = count("p", &v)?;
        }
        if let Some(v) = kv.remove("cos_terms") {
            cfg.cos.terms = count("cos_terms", &v)?;
        }
        if let Some(v) = kv.remove("ladder") {
            cfg.ladder = v.split(',').map(|s| count("ladder", s)).collect::<Result<_>>()?;
        }
        if let Some(v) = kv.remove("method") {
            cfg.jump.method = v.parse()?;
        }
        if let Some(v) = kv.remove("interp") {
            cfg.jump.interp = match v.as_str() {
                "quadratic" => KappaInterp::Quadratic,
                "cubic" => KappaInterp::MonotoneCubic,
                _ => return Err(Error::Config(format!("key 'interp': expected quadratic or cubic, got '{v}'"))),
            };
        }
        if let Some(v) = kv.remove("mode") {
            cfg.mode = match v.as_str() {
                "experiment2" => SplitMode::Experiment2,
                "strang3" => SplitMode::Strang3,
                _ => return Err(Error::Config(format!("key 'mode': expected experiment2 or strang3, got '{v}'"))),
            };
        }
        if let Some(v) = kv.remove("payoff") {
            cfg.payoff.kind = match v.as_str() {
                "call" => PayoffKind::Call,
                "put" => PayoffKind::Put,
                "digital" => PayoffKind::Digital,
                _ => return Err(Error::Config(format!("key 'payoff': expected call, put or digital, got '{v}'"))),
            };
        }
        if let Some(v) = kv.remove("reference") {
            cfg.reference = match v.as_str() {
                "finest" => Reference::Finest,
                "cos" => Reference::Cos,
                num => Reference::Value(
                    num.parse().map_err(|_| Error::Config(format!("key 'reference': expected finest, cos or a number, got '{v}'")))?,
                ),
            };
        }
        if let Some(k) = kv.keys().next() {
            return Err(Error::Config(format!("unknown key '{k}' for model {model}")));
        }
        cfg.finish()
    }

    /// Derives dependent fields and checks the combination.
    pub fn finish(mut self) -> Result<Self> {
        self.payoff.strike = self.model.market.strike;
        if self.steps == 0 {
            return Err(Error::Config("steps must be >= 1".into()));
        }
        if self.mode == SplitMode::Experiment2 && self.steps != 1 {
            return Err(Error::Config("mode experiment2 takes a single step (steps = 1)".into()));
        }
        self.model.market.dt = self.model.market.maturity / self.steps as f64;
        if self.ladder.is_empty() || self.ladder.iter().any(|&n| n < 3) {
            return Err(Error::Config("ladder needs node counts >= 3".into()));
        }
        if !(self.width > 0.0) {
            return Err(Error::Config("width must be > 0".into()));
        }
        self.model.market.validate()?;
        self.model.jump.validate()?;
        self.cos.validate()?;
        Ok(self)
    }

    /// Canonical text form; `parse(to_text())` returns the same config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| writeln!(s, "{k} = {v}").unwrap();
        put("model", self.model.jump.name().to_string());
        match self.model.jump {
            JumpModel::Nig(p) => {
                put("alpha", p.alpha.to_string());
                put("beta", p.beta.to_string());
                put("delta", p.delta.to_string());
                put("mu", p.mu.to_string());
            }
            JumpModel::Gh(p) => {
                put("lambda", p.lambda.to_string());
                put("alpha", p.alpha.to_string());
                put("beta", p.beta.to_string());
                put("delta", p.delta.to_string());
                put("mu", p.mu.to_string());
            }
            JumpModel::Meixner(p) => {
                put("a", p.a.to_string());
                put("b", p.b.to_string());
                put("d", p.d.to_string());
                put("m", p.m.to_string());
            }
        }
        let m = &self.model.market;
        put("spot", m.spot.to_string());
        put("strike", m.strike.to_string());
        put("rate", m.rate.to_string());
        put("dividend", m.dividend.to_string());
        put("sigma", m.sigma.to_string());
        put("maturity", m.maturity.to_string());
        let kind = match self.payoff.kind {
            PayoffKind::Call => "call",
            PayoffKind::Put => "put",
            PayoffKind::Digital => "digital",
        };
        put("payoff", kind.into());
        put("width", self.width.to_string());
        put("ladder", self.ladder.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(","));
        let mode = match self.mode {
            SplitMode::Experiment2 => "experiment2",
            SplitMode::Strang3 => "strang3",
        };
        put("mode", mode.into());
        put("steps", self.steps.to_string());
        put("method", self.jump.method.to_string());
        put("p", self.jump.p.to_string());
        let interp = match self.jump.interp {
            KappaInterp::Quadratic => "quadratic",
            KappaInterp::MonotoneCubic => "cubic",
        };
        put("interp", interp.into());
        let reference = match self.reference {
            Reference::Finest => "finest".to_string(),
            Reference::Cos => "cos".to_string(),
            Reference::Value(v) => v.to_string(),
        };
        put("reference", reference);
        put("cos_terms", self.cos.terms.to_string());
        put("cos_width", self.cos.width_multiplier.to_string());
        s
    }

    pub fn label(&self) -> String {
        self.model.jump.name().to_string()
    }
}

/// Price at the spot on one grid, with the wall time of operator construction plus stepping.
pub fn price_on_grid(cfg: &StudyConfig, n: usize) -> Result<(f64, f64)> {
    let grid = pricing_grid(n, cfg.width)?;
    let start = Instant::now();
    let c0 = payoff_on_grid(&cfg.payoff, &grid);
    let plan = match cfg.mode {
        SplitMode::Experiment2 => SplitPlan::experiment(&cfg.model, &cfg.payoff, &grid, cfg.jump)?,
        SplitMode::Strang3 => SplitPlan::strang(&cfg.model, &cfg.payoff, &grid, cfg.steps, cfg.jump)?,
    };
    let values = plan.run(&c0)?;
    let ms = start.elapsed().as_secs_f64() * 1e3;
    Ok((price_at(&grid, &values, cfg.model.market.spot, cfg.model.market.strike), ms))
}

pub fn cos_reference(cfg: &StudyConfig) -> Result<f64> {
    cos_price(&cfg.model, &cfg.payoff, cfg.model.market.maturity, &cfg.cos)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub n: usize,
    pub h: f64,
    pub price: f64,
    /// `None` on the first row.
    pub beta: Option<f64>,
    pub time_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub config: StudyConfig,
    pub c_star: f64,
    pub c_star_source: String,
    pub rows: Vec<ReportRow>,
}

/// `β_i = log₂(|C_{i−1} − C*| / |C_i − C*|)` for rows 2 onwards; NaN where the
/// ratio is undefined.
pub fn observed_orders(prices: &[f64], c_star: f64) -> Vec<Option<f64>> {
    (0..prices.len())
        .map(|i| {
            if i == 0 {
                return None;
            }
            let num = (prices[i - 1] - c_star).abs();
            let den = (prices[i] - c_star).abs();
            let b = (num / den).log2();
            Some(if den == 0.0 || !b.is_finite() { f64::NAN } else { b })
        })
        .collect()
}

pub fn run_convergence(cfg: &StudyConfig) -> Result<ConvergenceReport> {
    let mut rows = Vec::with_capacity(cfg.ladder.len());
    for &n in &cfg.ladder {
        let h = cfg.width / (n - 1) as f64;
        let (price, ms) =
            price_on_grid(cfg, n).map_err(|e| e.in_run(format!("{} N={n} h={h}", cfg.label())))?;
        rows.push(ReportRow { n, h, price, beta: None, time_ms: ms });
    }
    let (c_star, source) = match cfg.reference {
        Reference::Finest => (rows.last().unwrap().price, "finest".to_string()),
        Reference::Cos => (cos_reference(cfg)?, "cos".to_string()),
        Reference::Value(v) => (v, "given".to_string()),
    };
    let prices: Vec<f64> = rows.iter().map(|r| r.price).collect();
    for (r, b) in rows.iter_mut().zip(observed_orders(&prices, c_star)) {
        r.beta = b;
    }
    Ok(ConvergenceReport { config: cfg.clone(), c_star, c_star_source: source, rows })
}

const CSV_HEADER: &str = "N,h,price,beta,time_ms";

impl ConvergenceReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("# levy-pide convergence report\n");
        for line in self.config.to_text().lines() {
            writeln!(s, "# {line}").unwrap();
        }
        writeln!(s, "# c_star = {}", self.c_star).unwrap();
        writeln!(s, "# c_star_source = {}", self.c_star_source).unwrap();
        writeln!(s, "{CSV_HEADER}").unwrap();
        for r in &self.rows {
            let beta = r.beta.map(|b| b.to_string()).unwrap_or_default();
            writeln!(s, "{},{},{},{},{}", r.n, r.h, r.price, beta, r.time_ms).unwrap();
        }
        s
    }

    pub fn from_csv(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::Config(format!("report: {msg}"));
        let mut config_text = String::new();
        let mut c_star = None;
        let mut source = None;
        let mut rows = Vec::new();
        let mut seen_header = false;
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                match rest.split_once('=').map(|(k, v)| (k.trim(), v.trim())) {
                    Some(("c_star", v)) => c_star = Some(v.parse::<f64>().map_err(|_| bad(format!("bad c_star '{v}'")))?),
                    Some(("c_star_source", v)) => source = Some(v.to_string()),
                    Some(_) => writeln!(config_text, "{rest}").unwrap(),
                    None => {}
                }
                continue;
            }
            if !seen_header {
                if line != CSV_HEADER {
                    return Err(bad(format!("expected header '{CSV_HEADER}', got '{line}'")));
                }
                seen_header = true;
                continue;
            }
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 5 {
                return Err(bad(format!("expected 5 fields, got '{line}'")));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number '{s}'")));
            rows.push(ReportRow {
                n: f[0].parse().map_err(|_| bad(format!("bad N '{}'", f[0])))?,
                h: num(f[1])?,
                price: num(f[2])?,
                beta: if f[3].is_empty() { None } else { Some(num(f[3])?) },
                time_ms: num(f[4])?,
            });
        }
        Ok(ConvergenceReport {
            config: StudyConfig::parse(&config_text)?,
            c_star: c_star.ok_or_else(|| bad("missing c_star".into()))?,
            c_star_source: source.ok_or_else(|| bad("missing c_star_source".into()))?,
            rows,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingFit {
    /// `log₂((t_{i+2} − t_{i+1}) / (t_{i+1} − t_i))`; 1 for cost linear in N under doubling.
    pub per_step: Vec<f64>,
    /// Least-squares slope of ln t against ln N.
    pub slope: f64,
    /// Timing estimates are noisy; callers report rather than assert them.
    pub advisory: bool,
}

pub fn timing_regression(ns: &[usize], times: &[f64]) -> Result<TimingFit> {
    if ns.len() != times.len() || ns.len() < 3 {
        return Err(Error::domain("timing regression needs at least 3 (N, t) pairs"));
    }
    let per_step = times
        .windows(3)
        .map(|t| {
            let r = ((t[2] - t[1]) / (t[1] - t[0])).log2();
            if r.is_finite() { r } else { f64::NAN }
        })
        .collect();
    let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = times.iter().map(|t| t.ln()).collect();
    let k = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / k, ys.iter().sum::<f64>() / k);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    Ok(TimingFit { per_step, slope: sxy / sxx, advisory: true })
}

/// Wall time in ms of building and applying one jump step, best of `repeats`.
pub fn bench_jump_step(cfg: &StudyConfig, n: usize, repeats: usize) -> Result<f64> {
    let grid = pricing_grid(n, cfg.width)?;
    let c0 = payoff_on_grid(&cfg.payoff, &grid);
    let mut best = f64::INFINITY;
    for _ in 0..repeats.max(1) {
        let start = Instant::now();
        let stage = JumpStage::new(&cfg.model.jump, &grid, cfg.model.market.dt, cfg.jump)?;
        std::hint::black_box(stage.step(&c0)?);
        best = best.min(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok(best)
}
