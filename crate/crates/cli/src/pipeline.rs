//! Pipeline stages and the artifacts they write.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use koopman_lyap::collocation::{fill_distance, grid_centers};
use koopman_lyap::cpa::{build_triangulation, certify, estimate_b};
use koopman_lyap::{
    linearize, path_integral_phi, CollocationProblem, CollocationSolution, Eigenfunction, EigenfunctionSet,
    Linearization, LyapunovModel, Quantity, VectorField,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Linearize,
    Eigenfunctions,
    Lyapunov,
    Certify,
    OracleCheck,
    Run,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Linearize => "linearize",
            Stage::Eigenfunctions => "eigenfunctions",
            Stage::Lyapunov => "lyapunov",
            Stage::Certify => "certify",
            Stage::OracleCheck => "oracle-check",
            Stage::Run => "run",
        }
    }
}

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct CpaOutcome {
    pub vertices: usize,
    pub simplices: usize,
    pub b: Vec<Vec<f64>>,
    pub lc1_failures: usize,
    pub lc2_failures: usize,
    pub lc2_checks: usize,
    pub failure_radius: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleRow {
    pub eigenfunction: usize,
    pub point: Vec<f64>,
    pub phi_star: f64,
    pub path_integral: f64,
    pub abs_diff: f64,
}

/// Summary of one invocation, written to `manifest.json` next to the artifacts.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub eigenvalues: Vec<f64>,
    pub left_eigenvectors: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fill_distance: Option<f64>,
    pub condition_estimates: Vec<f64>,
    pub ridges: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cpa: Option<CpaOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle_max_abs_diff: Option<f64>,
    pub files: Vec<FileEntry>,
}

struct Output {
    dir: PathBuf,
}

impl Output {
    fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create output directory {}", dir.display()), e))?;
        Ok(Output { dir: dir.to_path_buf() })
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
        let path = self.path(name);
        let wrap = |e| CliError::io(format!("cannot write {}", path.display()), e);
        let file = fs::File::create(&path).map_err(wrap)?;
        let mut w = BufWriter::new(file);
        body(&mut w).map_err(wrap)?;
        w.flush().map_err(wrap)
    }

    fn write_text(&self, name: &str, text: &str) -> Result<(), CliError> {
        self.write(name, |w| w.write_all(text.as_bytes()))
    }

    /// Every regular file in the directory except the manifest, sorted by name.
    fn inventory(&self) -> Result<Vec<FileEntry>, CliError> {
        let wrap = |e| CliError::io(format!("cannot list {}", self.dir.display()), e);
        let mut entries = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(wrap)? {
            let entry = entry.map_err(wrap)?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name == MANIFEST_FILE || !entry.file_type().map_err(wrap)?.is_file() {
                continue;
            }
            let data = fs::read(entry.path()).map_err(|e| CliError::io(format!("cannot read {name}"), e))?;
            let digest = Sha256::digest(&data);
            let sha256 = digest.iter().fold(String::with_capacity(64), |mut s, b| {
                let _ = write!(s, "{b:02x}");
                s
            });
            entries.push(FileEntry { path: name, bytes: data.len() as u64, sha256 });
        }
        entries.sort_by(|a, b| a.path.cmp(&b.path));
        Ok(entries)
    }
}

fn alpha_file(i: usize) -> String {
    format!("alpha_{i}.csv")
}

fn join_numbers(values: &[f64], sep: &str) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(sep)
}

fn write_column(w: &mut dyn Write, values: &[f64]) -> std::io::Result<()> {
    for v in values {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

struct Context<'a> {
    config: &'a RunConfig,
    out: Output,
    field: VectorField,
    manifest: RunManifest,
}

/// Runs `stage` for `config`, writing artifacts into `config.output_dir`.
pub fn execute(stage: Stage, config: &RunConfig) -> Result<RunManifest, CliError> {
    config.validate()?;
    let out = Output::create(&config.output_dir)?;
    let field = config.field()?;
    let manifest = RunManifest {
        command: stage.name().to_string(),
        config: config.clone(),
        eigenvalues: vec![],
        left_eigenvectors: vec![],
        fill_distance: None,
        condition_estimates: vec![],
        ridges: vec![],
        cpa: None,
        oracle_max_abs_diff: None,
        files: vec![],
    };
    let mut ctx = Context { config, out, field, manifest };

    let lin = ctx.linearize()?;
    match stage {
        Stage::Linearize => {}
        Stage::Eigenfunctions => {
            ctx.eigenfunctions(&lin)?;
        }
        Stage::Lyapunov => {
            let set = ctx.eigenfunctions(&lin)?;
            ctx.lyapunov(set)?;
        }
        Stage::Certify => {
            let set = ctx.load_eigenfunctions(&lin)?;
            let model = LyapunovModel::from_set(set).map_err(|e| CliError::core("lyapunov", e))?;
            ctx.certify(&model)?;
        }
        Stage::OracleCheck => {
            let set = ctx.eigenfunctions(&lin)?;
            ctx.oracle(&lin, &set)?;
        }
        Stage::Run => {
            let set = ctx.eigenfunctions(&lin)?;
            if ctx.config.oracle.enabled {
                ctx.oracle(&lin, &set)?;
            }
            let model = ctx.lyapunov(set)?;
            ctx.certify(&model)?;
        }
    }

    ctx.manifest.files = ctx.out.inventory()?;
    let json = serde_json::to_string_pretty(&ctx.manifest).expect("manifest serializes");
    ctx.out.write_text(MANIFEST_FILE, &(json + "\n"))?;
    Ok(ctx.manifest)
}

impl Context<'_> {
    fn linearize(&mut self) -> Result<Linearization, CliError> {
        let lin = linearize(&self.field).map_err(|e| CliError::core("dynamics", e))?;
        let d = lin.dim();
        let mut text = String::from("jacobian\n");
        for i in 0..d {
            let row: Vec<f64> = (0..d).map(|j| lin.jacobian()[(i, j)]).collect();
            let _ = writeln!(text, "{}", join_numbers(&row, " "));
        }
        let _ = writeln!(text, "eigenvalues\n{}", join_numbers(lin.eigenvalues(), " "));
        let _ = writeln!(text, "left_eigenvectors");
        for w in lin.left_eigenvectors() {
            let _ = writeln!(text, "{}", join_numbers(w, " "));
        }
        self.out.write_text("linearization.txt", &text)?;
        println!("{text}");
        self.manifest.eigenvalues = lin.eigenvalues().to_vec();
        self.manifest.left_eigenvectors = lin.left_eigenvectors().to_vec();
        Ok(lin)
    }

    fn problems(&self, lin: &Linearization) -> Result<Vec<CollocationProblem>, CliError> {
        let domain = self.config.domain()?;
        let centers =
            grid_centers(&domain, self.config.collocation.grid_n).map_err(|e| CliError::core("collocation", e))?;
        (0..lin.dim())
            .map(|mode| {
                CollocationProblem::new(
                    self.config.kernel()?,
                    self.field.clone(),
                    lin.clone(),
                    mode,
                    centers.clone(),
                    self.config.regularization(),
                    domain.clone(),
                )
                .map_err(|e| CliError::core("collocation", e))
            })
            .collect()
    }

    fn record_fill_distance(&mut self, problem: &CollocationProblem) -> Result<f64, CliError> {
        let rho = fill_distance(problem.centers(), problem.domain(), self.config.collocation.fill_probe_resolution)
            .map_err(|e| CliError::core("collocation", e))?;
        self.manifest.fill_distance = Some(rho);
        Ok(rho)
    }

    fn eigenfunctions(&mut self, lin: &Linearization) -> Result<EigenfunctionSet, CliError> {
        let problems = self.problems(lin)?;
        let rho = self.record_fill_distance(&problems[0])?;
        self.out.write("centers.csv", |w| {
            for c in problems[0].centers() {
                writeln!(w, "{}", join_numbers(c, ","))?;
            }
            Ok(())
        })?;

        let mut items = Vec::new();
        let mut text = format!("centers = {}\nfill_distance = {rho}\n", problems[0].centers().len());
        for (i, problem) in problems.into_iter().enumerate() {
            let k = i + 1;
            if self.config.collocation.dump_system {
                let (a, _, _) = problem.assemble_system();
                self.out.write(&format!("gram_{k}.csv"), |w| {
                    for r in 0..a.nrows() {
                        let row: Vec<f64> = (0..a.ncols()).map(|c| a[(r, c)]).collect();
                        writeln!(w, "{}", join_numbers(&row, ","))?;
                    }
                    Ok(())
                })?;
            }
            let rhs = problem.rhs().to_vec();
            let solution = problem.solve().map_err(|e| CliError::core("collocation", e))?;
            self.out.write(&format!("rhs_{k}.csv"), |w| write_column(w, &rhs))?;
            self.out.write(&alpha_file(k), |w| write_column(w, solution.alpha()))?;
            let _ = writeln!(
                text,
                "eigenfunction {k}: lambda = {}, w = [{}], size = {}, ridge = {:e}, method = {:?}, condition_estimate = {:e}",
                solution.problem().lambda(),
                join_numbers(solution.problem().w(), ", "),
                solution.problem().size(),
                solution.eta(),
                solution.method(),
                solution.condition_estimate()
            );
            self.manifest.condition_estimates.push(solution.condition_estimate());
            self.manifest.ridges.push(solution.eta());
            items.push(Eigenfunction::new(solution));
        }
        self.out.write_text("eigenfunctions.txt", &text)?;
        print!("{text}");
        EigenfunctionSet::new(items).map_err(|e| CliError::core("koopman", e))
    }

    fn load_eigenfunctions(&mut self, lin: &Linearization) -> Result<EigenfunctionSet, CliError> {
        let problems = self.problems(lin)?;
        self.record_fill_distance(&problems[0])?;
        let mut items = Vec::new();
        for (i, problem) in problems.into_iter().enumerate() {
            let path = self.out.path(&alpha_file(i + 1));
            if !path.is_file() {
                return Err(CliError::missing(format!("missing artifact {}; run `lyapunov` first", path.display())));
            }
            let text = fs::read_to_string(&path).map_err(|e| CliError::io(format!("cannot read {}", path.display()), e))?;
            let alpha = text
                .lines()
                .enumerate()
                .map(|(n, line)| {
                    line.trim().parse::<f64>().map_err(|e| {
                        CliError::validation(format!("{} line {}: {e}", path.display(), n + 1))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?;
            let solution = CollocationSolution::from_coefficients(problem, alpha).map_err(|e| {
                CliError::validation(format!("{} does not match the configured problem: {e}", path.display()))
            })?;
            items.push(Eigenfunction::new(solution));
        }
        EigenfunctionSet::new(items).map_err(|e| CliError::core("koopman", e))
    }

    fn lyapunov(&mut self, set: EigenfunctionSet) -> Result<LyapunovModel, CliError> {
        let model = LyapunovModel::from_set(set).map_err(|e| CliError::core("lyapunov", e))?;
        let domain = self.config.test_domain()?;
        let resolution = self.config.test_grid.resolution;
        for (quantity, name) in [(Quantity::V, "V.csv"), (Quantity::Vdot, "Vdot.csv")] {
            let grid =
                model.grid_eval(&self.field, &domain, resolution, quantity).map_err(|e| CliError::core("lyapunov", e))?;
            self.out.write(name, |w| grid.write_csv(w))?;
        }
        let rho = self.manifest.fill_distance.unwrap_or(f64::NAN);
        let diagnostics = model.diagnostics(rho, &domain, resolution);
        let mut text = diagnostics.to_string();
        for (i, c) in self.manifest.condition_estimates.iter().enumerate() {
            let _ = writeln!(text, "condition_estimate_{} = {c:e}", i + 1);
        }
        self.out.write_text("diagnostics.txt", &text)?;
        print!("{text}");
        Ok(model)
    }

    fn certify(&mut self, model: &LyapunovModel) -> Result<(), CliError> {
        let domain = self.config.cpa_domain()?;
        let tri = build_triangulation(&domain, self.config.cpa.n).map_err(|e| CliError::core("cpa", e))?;
        let b = estimate_b(
            &self.field,
            &domain,
            self.config.cpa.probe_resolution,
            self.config.cpa.safety,
            self.config.b_override()?,
        )
        .map_err(|e| CliError::core("cpa", e))?;
        let values: Vec<f64> = {
            use rayon::prelude::*;
            tri.vertices().par_iter().map(|x| model.v_star(x)).collect()
        };
        let report = certify(&tri, &values, &self.field, &b).map_err(|e| CliError::core("cpa", e))?;
        let mut text = report.summary();
        for (r, row) in b.rows().iter().enumerate() {
            let _ = writeln!(text, "B[{}] = [{}]", r + 1, join_numbers(row, ", "));
        }
        self.out.write_text("cpa_summary.txt", &text)?;
        self.out.write("cpa_failures.csv", |w| report.write_failures_csv(w))?;
        print!("{text}");
        self.manifest.cpa = Some(CpaOutcome {
            vertices: tri.vertices().len(),
            simplices: tri.simplices().len(),
            b: b.rows().to_vec(),
            lc1_failures: report.lc1_failures(),
            lc2_failures: report.lc2_failures(),
            lc2_checks: report.lc2_checks(),
            failure_radius: report.failure_radius(),
        });
        Ok(())
    }

    fn oracle(&mut self, lin: &Linearization, set: &EigenfunctionSet) -> Result<(), CliError> {
        let oracle = &self.config.oracle;
        if oracle.sample_points.is_empty() {
            return Err(CliError::validation("invalid config field `oracle.sample_points`: no sample points given"));
        }
        let mut rows = Vec::new();
        let mut table = String::from("eigenfunction  lambda  max_abs_diff\n");
        for (i, ef) in set.items().iter().enumerate() {
            let lambda = lin.eigenvalues()[i];
            let w = &lin.left_eigenvectors()[i];
            let mut worst: f64 = 0.0;
            let mut skipped = None;
            for x in &oracle.sample_points {
                match path_integral_phi(&self.field, lin, lambda, w, x, oracle.t_max, oracle.dt) {
                    Ok(reference) => {
                        let phi = ef.evaluate_phi(x);
                        worst = worst.max((phi - reference).abs());
                        rows.push(OracleRow {
                            eigenfunction: i + 1,
                            point: x.clone(),
                            phi_star: phi,
                            path_integral: reference,
                            abs_diff: (phi - reference).abs(),
                        });
                    }
                    Err(e @ koopman_lyap::Error::PathIntegralDivergent { .. }) => {
                        skipped = Some(e.to_string());
                        break;
                    }
                    Err(e) => return Err(CliError::core("koopman", e)),
                }
            }
            match skipped {
                Some(reason) => {
                    let _ = writeln!(table, "{:>13}  {lambda}  skipped ({reason})", i + 1);
                }
                None => {
                    let _ = writeln!(table, "{:>13}  {lambda}  {worst:e}", i + 1);
                    let current = self.manifest.oracle_max_abs_diff.unwrap_or(0.0);
                    self.manifest.oracle_max_abs_diff = Some(current.max(worst));
                }
            }
        }
        self.out.write("oracle.csv", |w| {
            writeln!(w, "eigenfunction,x1,x2,phi_star,path_integral,abs_diff")?;
            for r in &rows {
                writeln!(w, "{},{},{},{},{},{}", r.eigenfunction, r.point[0], r.point[1], r.phi_star, r.path_integral, r.abs_diff)?;
            }
            Ok(())
        })?;
        self.out.write_text("oracle.txt", &table)?;
        print!("{table}");
        Ok(())
    }
}
