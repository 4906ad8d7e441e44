//! Command-line front end: build, simulate, verify and equilibrium.
//!
//! Log level is read from `DHSIM_LOG` (default `warn`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde_json::json;

use dhflow::analysis::compute_equilibrium;
use dhflow::scenario::{parse_scenario, read_scenario_file, write_trajectory_csv, ScenarioError};
use dhflow::verify::run_verification;
use dhflow::ReducedModel;

#[derive(Parser)]
#[command(name = "dhsim", version, about = "District heating flow and storage control simulator")]
struct Cli {
    /// Worker threads for commands given several scenarios.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print F, B, J_ch, J_pr and the topology report.
    Build {
        scenario: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Simulate and write the trajectory CSV. With several scenarios, `-o`
    /// names a directory receiving one `<stem>.csv` per scenario.
    Simulate {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Run the invariant suite; exits nonzero if any check fails.
    Verify {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Print the closed-loop equilibrium of the initial setpoints.
    Equilibrium {
        scenario: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("DHSIM_LOG", "warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Build { scenario, json } => build(&scenario, json),
        Command::Simulate { scenarios, output } => simulate(&scenarios, &output),
        Command::Verify { scenarios, json } => verify(&scenarios, json),
        Command::Equilibrium { scenario, json } => equilibrium(&scenario, json),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn matrix_rows<T: Copy + Into<f64>>(m: &nalgebra::DMatrix<T>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m[(r, c)].into()).collect()).collect()
}

fn build(path: &Path, as_json: bool) -> Result<ExitCode, ScenarioError> {
    let file = read_scenario_file(path)?;
    let graph = file.graph()?;
    let report = graph.validate_topology();
    if !report.passed() {
        if as_json {
            println!("{}", json!({ "topology": report }));
        } else {
            println!("topology: FAIL");
            for v in &report.violations {
                println!("  - {v}");
            }
        }
        return Ok(ExitCode::from(1));
    }
    let m = ReducedModel::build(graph)?;
    if as_json {
        let out = json!({
            "topology": report,
            "n_ch": m.n_ch(), "n_pr": m.n_pr(), "n_loops": m.n_loops(),
            "classification": m.classification,
            "f_columns": m.loops.columns,
            "f": matrix_rows(&m.loops.f.map(|v| v as f64)),
            "b": matrix_rows(&m.b),
            "j_ch": matrix_rows(&m.j_ch),
            "j_pr": m.j_pr.as_slice(),
            "theta_pr": m.theta().as_slice(),
        });
        println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    } else {
        println!("topology: pass");
        println!("n_ch = {}, n_pr = {}, loops a = {}", m.n_ch(), m.n_pr(), m.n_loops());
        println!("chord edges: {:?}", m.classification.chord_edges);
        println!("producer edges: {:?}", m.classification.producer_edges);
        println!("F columns (edge ids): {:?}", m.loops.columns);
        print!("F ={}", m.loops.f);
        print!("B ={}", m.b_int);
        print!("J_ch ={:.6e}", m.j_ch);
        println!("J_pr = {:.6e}", m.j_pr.transpose());
        println!("theta_pr = {:.6e}", m.theta().transpose());
    }
    Ok(ExitCode::SUCCESS)
}

fn simulate(paths: &[PathBuf], output: &Path) -> Result<ExitCode, ScenarioError> {
    let targets: Vec<(PathBuf, PathBuf)> = if paths.len() == 1 {
        vec![(paths[0].clone(), output.to_path_buf())]
    } else {
        std::fs::create_dir_all(output).map_err(|source| ScenarioError::Io { path: output.into(), source })?;
        paths
            .iter()
            .map(|p| {
                let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
                (p.clone(), output.join(format!("{stem}.csv")))
            })
            .collect()
    };
    let failures: Vec<String> = targets
        .par_iter()
        .filter_map(|(src, dst)| {
            let run = || -> Result<Option<String>, ScenarioError> {
                let sc = parse_scenario(src)?;
                match sc.run() {
                    Ok(traj) => {
                        write_trajectory_csv(&traj, dst)?;
                        log::info!("{} -> {} ({} samples)", src.display(), dst.display(), traj.samples.len());
                        Ok(None)
                    }
                    Err(abort) => {
                        if !abort.partial.samples.is_empty() {
                            write_trajectory_csv(&abort.partial, dst)?;
                        }
                        Ok(Some(format!("{}: {}", src.display(), abort.error)))
                    }
                }
            };
            match run() {
                Ok(r) => r,
                Err(e) => Some(format!("{}: {e}", src.display())),
            }
        })
        .collect();
    for f in &failures {
        eprintln!("error: {f}");
    }
    Ok(if failures.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn verify(paths: &[PathBuf], as_json: bool) -> Result<ExitCode, ScenarioError> {
    let results: Vec<Result<dhflow::verify::VerificationReport, String>> = paths
        .par_iter()
        .map(|p| parse_scenario(p).map(|sc| run_verification(&sc)).map_err(|e| format!("{}: {e}", p.display())))
        .collect();
    let mut ok = true;
    let mut reports = Vec::new();
    for r in results {
        match r {
            Ok(rep) => {
                ok &= rep.passed();
                if !as_json {
                    print!("{}", rep.to_text());
                }
                reports.push(rep);
            }
            Err(e) => {
                ok = false;
                eprintln!("error: {e}");
            }
        }
    }
    if as_json {
        let failures: Vec<_> = reports
            .iter()
            .flat_map(|r| r.failures().into_iter().map(move |c| json!({ "scenario": r.scenario, "check": c.name, "value": c.value, "tolerance": c.tolerance, "detail": c.detail })))
            .collect();
        let out = json!({ "passed": ok, "failures": failures, "reports": reports });
        println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn equilibrium(path: &Path, as_json: bool) -> Result<ExitCode, ScenarioError> {
    let sc = parse_scenario(path)?;
    let sp = &sc.setpoints;
    let eq = compute_equilibrium(&sc.model, &sp.q_ch_star, &sp.v_sh_star);
    let residual = dhflow::analysis::closed_loop_residual(&sc.closed_loop(), &eq.bundle(&sc.model), sp)?;
    if as_json {
        let out = json!({
            "q_ch": eq.q_ch.as_slice(), "x_ch": eq.x_ch.as_slice(), "q_pr": eq.q_pr.as_slice(),
            "v_sh": eq.v_sh.as_slice(), "x_a": eq.x_a.as_slice(), "x_b": eq.x_b.as_slice(),
            "in_operation": eq.in_operation, "rhs_residual": residual, "warnings": eq.warnings,
        });
        println!("{}", serde_json::to_string_pretty(&out).expect("json"));
    } else {
        println!("q_ch = {:.6e}", eq.q_ch.transpose());
        println!("x_ch = {:.6e}", eq.x_ch.transpose());
        println!("q_pr = {:.6e}", eq.q_pr.transpose());
        println!("V_sh = {:.6e}", eq.v_sh.transpose());
        println!("x_a  = {:.6e}", eq.x_a.transpose());
        println!("x_b  = {:.6e}", eq.x_b.transpose());
        println!("closed-loop RHS at equilibrium: {residual:.3e}");
        for w in &eq.warnings {
            println!("warning: {w}");
        }
    }
    Ok(ExitCode::SUCCESS)
}
