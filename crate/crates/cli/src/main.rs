use clap::{Args, Parser, Subcommand};
use levy_pide::harness::{
    bench_jump_step, cos_reference, price_on_grid, run_convergence, timing_regression, StudyConfig, PRESETS,
};
use levy_pide::splitting::JumpMethod;
use levy_pide::{Error, Result};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "levy-pide", version, about = "Operator-splitting option pricer for NIG, GH and Meixner jump models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Price on a single grid.
    Price(Common),
    /// Run the grid ladder and report observed orders.
    Converge(Common),
    /// Compare the splitting price on one grid against the COS reference.
    CompareCos(Common),
    /// Time the jump step across the ladder.
    Bench {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
    },
}

#[derive(Args)]
struct Common {
    /// Preset name or bare model name (nig, gh, meixner).
    #[arg(long, default_value = "nig-neg-skew")]
    model: String,
    /// Flat key = value study config; overrides --model.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Grid step; selects N = width/h + 1 (defaults to the finest ladder grid).
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    width: Option<f64>,
    /// Meixner truncation order.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, value_parser = ["expm", "pade", "product", "interp"])]
    method: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Common {
    fn study(&self) -> Result<StudyConfig> {
        let mut cfg = match &self.config {
            Some(path) => StudyConfig::parse(&std::fs::read_to_string(path)?)?,
            None if PRESETS.contains(&self.model.as_str()) => StudyConfig::preset(&self.model)?,
            None => StudyConfig::parse(&format!("model = {}", self.model))?,
        };
        if let Some(w) = self.width {
            cfg.width = w;
        }
        if let Some(p) = self.p {
            cfg.jump.p = p;
        }
        if let Some(m) = &self.method {
            cfg.jump.method = m.parse::<JumpMethod>()?;
        }
        if let Some(h) = self.h {
            if h.is_nan() || h <= 0.0 {
                return Err(Error::Config(format!("--h must be > 0, got {h}")));
            }
            cfg.ladder = vec![(cfg.width / h).round() as usize + 1];
        }
        cfg.finish()
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => Ok(std::fs::write(path, text)?),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Price(c) => {
            let cfg = c.study()?;
            let n = *cfg.ladder.last().unwrap();
            let (price, ms) = price_on_grid(&cfg, n)?;
            let h = cfg.width / (n - 1) as f64;
            c.emit(&format!("model,N,h,method,price,time_ms\n{},{n},{h},{},{price},{ms}\n", cfg.label(), cfg.jump.method))
        }
        Command::Converge(c) => {
            let report = run_convergence(&c.study()?)?;
            c.emit(&report.to_csv())
        }
        Command::CompareCos(c) => {
            let cfg = c.study()?;
            let n = *cfg.ladder.last().unwrap();
            let (price, _) = price_on_grid(&cfg, n)?;
            let cos = cos_reference(&cfg)?;
            let rel = (price - cos) / cos;
            c.emit(&format!("model,N,price,cos,rel_gap\n{},{n},{price},{cos},{rel}\n", cfg.label()))
        }
        Command::Bench { common, repeats } => {
            let cfg = common.study()?;
            let mut out = String::from("N,time_ms\n");
            let mut times = Vec::new();
            for &n in &cfg.ladder {
                let ms = bench_jump_step(&cfg, n, repeats)?;
                out.push_str(&format!("{n},{ms}\n"));
                times.push(ms);
            }
            if cfg.ladder.len() >= 3 {
                let fit = timing_regression(&cfg.ladder, &times)?;
                out.push_str(&format!("# log-log slope {:.3} (advisory)\n", fit.slope));
            }
            common.emit(&out)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("levy-pide: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
