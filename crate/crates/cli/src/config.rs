//! Run configuration: JSON file, command-line overrides and the resolved
//! form that is written next to every result.

use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use cutfem_core::geometry::{sphere_grid, sphere_random};
use cutfem_core::OperatorConfig;
use cutfem_core::perf::{MachineParams, Padding};
use cutfem_core::{FeKind, LevelSet};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum CommandKind {
    Convergence,
    ThroughputPlane,
    Spheres,
    Verify,
    CostModel,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Convergence => "convergence",
            CommandKind::ThroughputPlane => "throughput-plane",
            CommandKind::Spheres => "spheres",
            CommandKind::Verify => "verify",
            CommandKind::CostModel => "cost-model",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Fe {
    Cg,
    Dg,
}

impl From<Fe> for FeKind {
    fn from(f: Fe) -> Self {
        match f {
            Fe::Cg => FeKind::Cg,
            Fe::Dg => FeKind::Dg,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PaddingChoice {
    PerDirection,
    Total,
}

impl From<PaddingChoice> for Padding {
    fn from(p: PaddingChoice) -> Self {
        match p {
            PaddingChoice::PerDirection => Padding::PerDirection,
            PaddingChoice::Total => Padding::Total,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometrySpec {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    Plane {
        normal: [f64; 3],
        offset: f64,
    },
    /// Minimum of the member level sets.
    Union {
        members: Vec<GeometrySpec>,
    },
    /// `n^3` spheres on a regular grid in `[lo, hi]^3`.
    SphereGrid {
        n: usize,
        #[serde(default)]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
    },
    /// `n` random spheres in `[lo, hi]^3`; without `seed` the run seed is used.
    SphereRandom {
        n: usize,
        #[serde(default)]
        seed: Option<u64>,
        #[serde(default)]
        lo: f64,
        #[serde(default = "one")]
        hi: f64,
        #[serde(default = "r_min")]
        r_min: f64,
        #[serde(default = "r_max")]
        r_max: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn r_min() -> f64 {
    0.03
}

fn r_max() -> f64 {
    0.08
}

impl GeometrySpec {
    pub fn level_set(&self, run_seed: u64) -> Result<LevelSet, CliError> {
        Ok(match self {
            GeometrySpec::Sphere { center, radius } => LevelSet::sphere(*center, *radius)?,
            GeometrySpec::Plane { normal, offset } => LevelSet::plane(*normal, *offset)?,
            GeometrySpec::Union { members } => {
                LevelSet::union(members.iter().map(|m| m.level_set(run_seed)).collect::<Result<_, _>>()?)?
            }
            GeometrySpec::SphereGrid { n, lo, hi } => sphere_grid(*n, *lo, *hi)?,
            GeometrySpec::SphereRandom { n, seed, lo, hi, r_min, r_max } => {
                sphere_random(*n, seed.unwrap_or(run_seed), *lo, *hi, *r_min, *r_max)?
            }
        })
    }
}

/// Cube `[lo, hi]^3` with `base_cells` per direction, refined uniformly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSpec {
    pub base_cells: usize,
    pub lo: f64,
    pub hi: f64,
    pub refinements: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSweep {
    /// Approximate number of active cells of every system in the sweep.
    pub target_cells: usize,
    pub cut_ratios: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineSpec {
    pub bandwidth_gbs: f64,
    pub peak_gflops: f64,
}

/// Configuration as read from JSON; every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RawConfig {
    pub command: Option<CommandKind>,
    pub geometry: Option<GeometrySpec>,
    pub mesh: Option<MeshSpec>,
    pub fe: Option<Fe>,
    pub degree: Option<usize>,
    pub tau_v: Option<f64>,
    pub tau_d: Option<f64>,
    pub gamma: Option<f64>,
    pub lanes: Option<usize>,
    pub threads: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub tolerance: Option<f64>,
    pub max_iterations: Option<usize>,
    pub min_seconds: Option<f64>,
    pub plane: Option<PlaneSweep>,
    /// Machine parameters, inline or as a path to a JSON file.
    pub machine: Option<MachineSpec>,
    pub machine_file: Option<PathBuf>,
    pub padding: Option<PaddingChoice>,
    pub max_degree: Option<usize>,
    /// Fault injection for `verify`: reverses the Nitsche symmetry term.
    pub flip_nitsche_symmetry: Option<bool>,
}

/// Fully resolved configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: CommandKind,
    pub geometry: GeometrySpec,
    pub mesh: MeshSpec,
    pub fe: Fe,
    pub degree: usize,
    pub tau_v: f64,
    pub tau_d: f64,
    pub gamma: f64,
    pub lanes: usize,
    pub threads: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub min_seconds: f64,
    pub plane: PlaneSweep,
    pub machine: MachineSpec,
    pub padding: PaddingChoice,
    pub max_degree: usize,
    pub flip_nitsche_symmetry: bool,
}

#[derive(Parser, Debug, Default)]
#[command(name = "cutfem", version, about = "Matrix-free cut finite element experiments")]
pub struct Args {
    /// JSON configuration file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub command: Option<CommandKind>,
    #[arg(long, value_enum)]
    pub fe: Option<Fe>,
    #[arg(long)]
    pub degree: Option<usize>,
    #[arg(long)]
    pub refinements: Option<usize>,
    #[arg(long)]
    pub lanes: Option<usize>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long = "tau-v")]
    pub tau_v: Option<f64>,
    #[arg(long = "tau-d")]
    pub tau_d: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl RawConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn apply_args(&mut self, a: &Args) {
        fn set<T: Clone>(dst: &mut Option<T>, src: &Option<T>) {
            if src.is_some() {
                dst.clone_from(src);
            }
        }
        set(&mut self.command, &a.command);
        set(&mut self.fe, &a.fe);
        set(&mut self.degree, &a.degree);
        set(&mut self.lanes, &a.lanes);
        set(&mut self.threads, &a.threads);
        set(&mut self.tau_v, &a.tau_v);
        set(&mut self.tau_d, &a.tau_d);
        set(&mut self.gamma, &a.gamma);
        set(&mut self.seed, &a.seed);
        set(&mut self.out, &a.out);
        if let Some(r) = a.refinements {
            let command = self.command.unwrap_or(CommandKind::Verify);
            self.mesh.get_or_insert_with(|| default_mesh(command)).refinements = r;
        }
    }

    /// Fills in the defaults of the selected command and validates.
    pub fn resolve(self) -> Result<RunConfig, CliError> {
        let command = self.command.ok_or_else(|| CliError::Config("no command given".into()))?;
        let degree = self.degree.unwrap_or(2);
        let pen = 5.0 * ((degree + 1) * (degree + 1)) as f64;
        let machine = match (self.machine, self.machine_file) {
            (Some(m), None) => m,
            (None, Some(path)) => {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            (None, None) => MachineSpec { bandwidth_gbs: 680.0, peak_gflops: 3196.0 },
            (Some(_), Some(_)) => return Err(CliError::Config("give either machine or machine_file".into())),
        };
        let cfg = RunConfig {
            command,
            geometry: self.geometry.unwrap_or_else(|| default_geometry(command)),
            mesh: self.mesh.unwrap_or_else(|| default_mesh(command)),
            fe: self.fe.unwrap_or(Fe::Cg),
            degree,
            tau_v: self.tau_v.unwrap_or(1.0),
            tau_d: self.tau_d.unwrap_or(pen),
            gamma: self.gamma.unwrap_or(pen),
            lanes: self.lanes.unwrap_or(8),
            threads: self.threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get())),
            seed: self.seed.unwrap_or(1),
            out: self.out.unwrap_or_else(|| default_out(command)),
            tolerance: self.tolerance.unwrap_or(1e-10),
            max_iterations: self.max_iterations.unwrap_or(100_000),
            min_seconds: self.min_seconds.unwrap_or(1.0),
            plane: self
                .plane
                .unwrap_or(PlaneSweep { target_cells: 1600, cut_ratios: vec![1.0, 0.5, 0.1, 0.01, 0.0] }),
            machine,
            padding: self.padding.unwrap_or(PaddingChoice::PerDirection),
            max_degree: self.max_degree.unwrap_or(7),
            flip_nitsche_symmetry: self.flip_nitsche_symmetry.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn default_geometry(command: CommandKind) -> GeometrySpec {
    match command {
        CommandKind::Spheres => GeometrySpec::SphereGrid { n: 10, lo: 0.0, hi: 1.0 },
        CommandKind::ThroughputPlane => GeometrySpec::Plane { normal: [0.0, 0.0, 1.0], offset: 0.0 },
        CommandKind::Verify => GeometrySpec::Sphere { center: [0.03, -0.02, 0.01], radius: 0.8 },
        _ => GeometrySpec::Sphere { center: [0.0; 3], radius: 1.0 },
    }
}

fn default_mesh(command: CommandKind) -> MeshSpec {
    match command {
        CommandKind::Spheres => MeshSpec { base_cells: 48, lo: 0.0, hi: 1.0, refinements: 0 },
        CommandKind::Verify => MeshSpec { base_cells: 6, lo: -1.0, hi: 1.0, refinements: 0 },
        _ => MeshSpec { base_cells: 12, lo: -1.035, hi: 1.035, refinements: 3 },
    }
}

fn default_out(command: CommandKind) -> PathBuf {
    let ext = match command {
        CommandKind::Spheres | CommandKind::Verify => "json",
        _ => "csv",
    };
    PathBuf::from("results").join(format!("{}.{ext}", command.name()))
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: &str| Err(CliError::Config(m.to_string()));
        if !(1..=7).contains(&self.degree) {
            return bad("degree must lie in 1..=7");
        }
        if self.mesh.base_cells == 0 || !(self.mesh.hi > self.mesh.lo) {
            return bad("mesh needs at least one cell and hi > lo");
        }
        if self.threads == 0 {
            return bad("threads must be at least 1");
        }
        if !(self.min_seconds >= 0.0) {
            return bad("min_seconds must be non-negative");
        }
        if self.plane.target_cells == 0 || self.plane.cut_ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return bad("plane sweep needs target_cells >= 1 and ratios in [0, 1]");
        }
        if !(1..=7).contains(&self.max_degree) {
            return bad("max_degree must lie in 1..=7");
        }
        MachineParams::new(self.machine.bandwidth_gbs, self.machine.peak_gflops)?;
        self.operator_config(self.degree).validate()?;
        cutfem_core::solver::SolverConfig {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            preconditioner: cutfem_core::solver::Preconditioner::Jacobi,
        }
        .validate()?;
        if self.command == CommandKind::Convergence {
            match self.geometry {
                GeometrySpec::Sphere { center, radius } => {
                    if center != [0.0; 3] {
                        return bad("convergence needs a sphere centered at the origin");
                    }
                    if !(radius > 0.0 && radius < self.mesh.hi.min(-self.mesh.lo)) {
                        return bad("the sphere must lie strictly inside the mesh box");
                    }
                }
                _ => return bad("convergence needs a sphere geometry"),
            }
        }
        Ok(())
    }

    /// Operator settings for degree `p`; penalties given explicitly in the
    /// configuration apply to every degree.
    pub fn operator_config(&self, p: usize) -> OperatorConfig {
        let mut c = OperatorConfig::new(self.fe.into(), p);
        if p == self.degree {
            c.tau_d = self.tau_d;
            c.gamma = self.gamma;
        }
        c.tau_v = self.tau_v;
        c.lanes = self.lanes;
        c.flip_nitsche_symmetry = self.flip_nitsche_symmetry;
        c
    }

    pub fn machine_params(&self) -> MachineParams {
        MachineParams { bandwidth_gbs: self.machine.bandwidth_gbs, peak_gflops: self.machine.peak_gflops }
    }

    pub fn level_set(&self) -> Result<LevelSet, CliError> {
        self.geometry.level_set(self.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(json: &str) -> RawConfig {
        serde_json::from_str(json).unwrap()
    }

    #[test]
    fn defaults_per_command() {
        let c = raw(r#"{"command": "convergence"}"#).resolve().unwrap();
        assert_eq!(c.mesh, MeshSpec { base_cells: 12, lo: -1.035, hi: 1.035, refinements: 3 });
        assert_eq!(c.tau_d, 45.0);
        assert!(c.threads >= 1);
        let c = raw(r#"{"command": "spheres"}"#).resolve().unwrap();
        assert_eq!(c.mesh.base_cells, 48);
        assert_eq!(c.geometry, GeometrySpec::SphereGrid { n: 10, lo: 0.0, hi: 1.0 });
    }

    #[test]
    fn flags_override_file() {
        let mut r = raw(r#"{"command": "convergence", "degree": 3, "fe": "dg"}"#);
        let a = Args::parse_from(["cutfem", "--degree", "1", "--refinements", "2", "--tau-v", "0.001"]);
        r.apply_args(&a);
        let c = r.resolve().unwrap();
        assert_eq!((c.degree, c.fe, c.mesh.refinements, c.tau_v), (1, Fe::Dg, 2, 0.001));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for json in [
            r#"{"command": "verify", "degree": 0}"#,
            r#"{"command": "verify", "lanes": 3}"#,
            r#"{"command": "verify", "tolerance": 2.0}"#,
            r#"{"command": "convergence", "geometry": {"type": "sphere", "center": [0,0,0], "radius": 1.2}}"#,
            r#"{"command": "convergence", "geometry": {"type": "plane", "normal": [0,0,1], "offset": 0}}"#,
            r#"{}"#,
        ] {
            assert!(matches!(raw(json).resolve(), Err(CliError::Config(_))), "{json}");
        }
        assert!(serde_json::from_str::<RawConfig>(r#"{"bogus": 1}"#).is_err());
        assert!(serde_json::from_str::<RawConfig>(r#"{"geometry": {"type": "sphere", "radius": 1}}"#).is_err());
    }

    #[test]
    fn geometry_forms() {
        let c = raw(
            r#"{"command": "spheres", "geometry": {"type": "union", "members": [
                {"type": "sphere", "center": [0.2, 0.5, 0.5], "radius": 0.2},
                {"type": "sphere_grid", "n": 2},
                {"type": "sphere_random", "n": 3, "seed": 7}]}}"#,
        )
        .resolve()
        .unwrap();
        assert_eq!(c.level_set().unwrap().member_count(), 12);
        let g = GeometrySpec::SphereRandom { n: 4, seed: None, lo: 0.0, hi: 1.0, r_min: 0.1, r_max: 0.2 };
        assert_eq!(g.level_set(3).unwrap(), g.level_set(3).unwrap());
        assert_ne!(g.level_set(3).unwrap(), g.level_set(4).unwrap());
    }

    #[test]
    fn resolved_config_round_trips() {
        let c = raw(r#"{"command": "cost-model", "padding": "total"}"#).resolve().unwrap();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
