use anyhow::Result;
use clap::Parser;
use kdv_backstep::{execute, Args, Invocation};

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or_else(|| "n/a".into(), |v| format!("{v:.6e}"))
}

fn main() -> Result<()> {
    let inv = Invocation::from_args(Args::parse())?;
    let report = execute(&inv)?;
    println!("steps          {}", report.steps);
    println!("rate u         {}", fmt_rate(report.fitted_rate_u));
    println!("rate uhat      {}", fmt_rate(report.fitted_rate_uhat));
    println!("rate err       {}", fmt_rate(report.fitted_rate_err));
    if let Some(c) = report.constants {
        println!(
            "alpha {:.6e}  kappa {:.6e}  beta {:.6e}  mu {:.6e}  (epsilon {:.6e})",
            c.alpha, c.kappa, c.beta, c.mu, c.epsilon
        );
        let bad = c.nonpositive();
        if !bad.is_empty() {
            eprintln!("warning: non-positive decay constants: {}", bad.join(", "));
        }
    }
    println!("picard residual     {:.3e}", report.picard_residual);
    println!("succession residual {:.3e}", report.succession_residual);
    println!("wrote {}", inv.outputs.report_path.display());
    Ok(())
}
