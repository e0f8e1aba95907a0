mod convergence;
mod cost_model;
mod plane;
mod spheres;

pub use convergence::{run_convergence, ConvergenceRow};
pub use cost_model::{cost_rows, kernel_rows, model_roofline_rows, CostRow, KernelRow, RooflineRow};
pub use plane::{plane_system, run_throughput_plane, throughput_pair, PlaneRow};
pub use spheres::{run_spheres, SpheresSummary};

use crate::config::{CommandKind, RunConfig};
use crate::output::{sibling, write_csv, write_json};
use crate::{verify, CliError};

/// Runs the configured command and writes its outputs.
pub fn execute(cfg: &RunConfig) -> Result<(), CliError> {
    match cfg.command {
        CommandKind::Convergence => {
            let rows = run_convergence(cfg)?;
            write_csv(&cfg.out, cfg, &rows)?;
        }
        CommandKind::ThroughputPlane => {
            let (rows, roofline) = run_throughput_plane(cfg)?;
            write_csv(&cfg.out, cfg, &rows)?;
            write_csv(&sibling(&cfg.out, "roofline"), cfg, &roofline)?;
        }
        CommandKind::Spheres => {
            let s = run_spheres(cfg)?;
            write_json(&cfg.out, cfg, serde_json::to_value(s).map_err(std::io::Error::other)?)?;
        }
        CommandKind::CostModel => {
            write_csv(&cfg.out, cfg, &cost_rows(cfg))?;
            write_csv(&sibling(&cfg.out, "kernels"), cfg, &kernel_rows(cfg.lanes)?)?;
            write_csv(&sibling(&cfg.out, "roofline"), cfg, &model_roofline_rows(cfg))?;
        }
        CommandKind::Verify => {
            let report = verify::run_all(cfg)?;
            for c in &report {
                println!("{}", c.line());
            }
            write_json(&cfg.out, cfg, serde_json::to_value(&report).map_err(std::io::Error::other)?)?;
            let failed: Vec<String> = report.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
            if !failed.is_empty() {
                return Err(CliError::Verification(failed.join(", ")));
            }
        }
    }
    Ok(())
}
