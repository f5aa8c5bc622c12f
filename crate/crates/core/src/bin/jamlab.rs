use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use jamlab::analysis::{estimate_speed, jamiton_accuracy};
use jamlab::collision::{
    band_candidates, batch_collide, choose_test_jamiton, run_collision, tau_sweep, write_csv,
    CollisionSettings,
};
use jamlab::io::{
    nearest_snapshot, read_trajectory, write_envelopes, write_model_fd, write_profile,
    write_trajectory, RunConfig, Snapshot,
};
use jamlab::jamiton::{envelopes, make_spec, sonic_data, JamitonSpec};
use jamlab::solver::{Control, GridState};
use jamlab::ModelParams;

#[derive(Parser)]
#[command(
    name = "jamlab",
    version,
    about = "Jamitons in the inhomogeneous ARZ traffic model"
)]
struct Cli {
    /// Model parameter file (TOML, keys named after the parameters).
    #[arg(long, global = true)]
    params: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fundamental-diagram tables of the model.
    Model {
        #[command(subcommand)]
        what: ModelCmd,
    },
    /// Exact jamiton construction.
    Jamiton {
        #[command(subcommand)]
        what: JamitonCmd,
    },
    /// Run a finite-volume simulation described by a run file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the jamiton line (m, s) from a trajectory snapshot.
    Estimate {
        #[arg(long = "in")]
        input: PathBuf,
        /// Snapshot time; the closest recorded snapshot is used.
        #[arg(long)]
        t: f64,
        /// Cells dropped on each side of every jump.
        #[arg(long, default_value_t = 2)]
        trim: usize,
    },
    /// Grid-refinement study of a single jamiton (L1 and (m, s) errors).
    AccuracyTable {
        #[arg(long, default_value = "accuracy.csv")]
        out: PathBuf,
        /// Comma-separated cell counts.
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "20,40,80,160,320,640,1280,2560"
        )]
        cells: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        taus: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "0.5,2")]
        times: Vec<f64>,
        /// Sonic density as a fraction of rho_max.
        #[arg(long, default_value_t = 0.433)]
        rho_s: f64,
        #[arg(long, default_value_t = 26.0)]
        v_minus: f64,
        #[arg(long, default_value_t = 0.5)]
        cfl: f64,
    },
    /// Collide one jamiton with the test jamiton.
    Collide {
        /// Sonic density of the colliding jamiton (fraction of rho_max).
        #[arg(long)]
        rho_s_other: f64,
        #[command(flatten)]
        test: TestArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Collide the test jamiton with evenly spaced compatible jamitons.
    BatchCollide {
        #[arg(long, default_value_t = 24)]
        candidates: usize,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Repeat the collision batch for several relaxation times.
    SweepTau {
        #[arg(long, value_delimiter = ',', default_value = "1,5,10")]
        taus: Vec<f64>,
        #[arg(long, default_value_t = 6)]
        candidates: usize,
        #[arg(long, default_value_t = default_workers())]
        workers: usize,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum ModelCmd {
    /// Equilibrium flow and the two comparison flows on [0, rho_max].
    Fd {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 401)]
        points: usize,
    },
}

#[derive(Subcommand)]
enum JamitonCmd {
    /// Sample one jamiton profile.
    Construct {
        /// Sonic density as a fraction of rho_max.
        #[arg(long)]
        rho_s: f64,
        #[arg(long)]
        v_minus: f64,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Maximal jamiton segments and the jamitonic envelopes.
    Fd {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        points: usize,
    },
}

#[derive(Args)]
struct TestArgs {
    /// Sonic density of the test jamiton (fraction of rho_max); chosen automatically if omitted.
    #[arg(long, requires = "v_minus")]
    rho_s_test: Option<f64>,
    /// Shock volume v_minus shared by both jamitons.
    #[arg(long)]
    v_minus: Option<f64>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 160)]
    cells: usize,
    #[arg(long, default_value_t = 0.5)]
    cfl: f64,
    /// Relaxation time; defaults to the parameter file value.
    #[arg(long)]
    tau: Option<f64>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
}

fn load_params(path: Option<&Path>) -> Result<ModelParams> {
    match path {
        Some(p) => {
            ModelParams::load(p).with_context(|| format!("loading parameters from {}", p.display()))
        }
        None => Ok(ModelParams::default()),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn settings(run: &RunArgs) -> CollisionSettings {
    CollisionSettings {
        n_cells: run.cells,
        cfl: run.cfl,
        ..CollisionSettings::default()
    }
}

fn test_spec(p: &ModelParams, args: Option<&TestArgs>) -> Result<JamitonSpec> {
    let (rho_s, v_minus) = match args {
        Some(TestArgs {
            rho_s_test: Some(r),
            v_minus: Some(v),
        }) => (r * p.rho_max, *v),
        Some(TestArgs {
            rho_s_test: None,
            v_minus: Some(v),
        }) => (choose_test_jamiton(p)?.rho_s, *v),
        _ => {
            let t = choose_test_jamiton(p)?;
            (t.rho_s, t.v_minus)
        }
    };
    Ok(make_spec(&sonic_data(rho_s, p)?, v_minus)?)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let base = load_params(cli.params.as_deref())?;
    match cli.command {
        Command::Model {
            what: ModelCmd::Fd { out, points },
        } => {
            let mut w = create(&out)?;
            write_model_fd(&mut w, &base, points)?;
            w.flush()?;
        }
        Command::Jamiton {
            what:
                JamitonCmd::Construct {
                    rho_s,
                    v_minus,
                    samples,
                    out,
                },
        } => {
            let spec = make_spec(&sonic_data(rho_s * base.rho_max, &base)?, v_minus)?;
            let prof = spec.integrate_profile(samples)?;
            let mut w = create(&out)?;
            write_profile(&mut w, &prof)?;
            w.flush()?;
            println!(
                "m = {:.6}  s = {:.6}  L = {:.6}  N = {:.6}  A = {:.6}",
                spec.sonic.m, spec.sonic.s, prof.length, prof.vehicles, prof.amplitude
            );
        }
        Command::Jamiton {
            what: JamitonCmd::Fd { out, points },
        } => {
            let env = envelopes(&base, points)?;
            let mut w = create(&out)?;
            write_envelopes(&mut w, &env)?;
            w.flush()?;
        }
        Command::Simulate { config, out } => {
            let cfg = RunConfig::load(&config)?;
            let mut sim = cfg.build(&base)?;
            let grid = sim.grid;
            let p = sim.params;
            let stride = cfg.snapshot_stride.max(1);
            let mut snaps: Vec<Snapshot> = Vec::new();
            let mut rec = |s: &GridState, step: u64, is_final: bool| {
                if (step.is_multiple_of(stride) || is_final)
                    && snaps.last().is_none_or(|l| l.t != s.t)
                {
                    snaps.push(Snapshot::from_state(s, &grid, &p));
                }
                Control::Continue
            };
            let n0 = sim.vehicle_count();
            sim.run(&mut [&mut rec])?;
            let mut w = create(&out)?;
            write_trajectory(&mut w, &snaps)?;
            w.flush()?;
            println!(
                "{} steps, {} snapshots, t = {}, vehicle drift = {:.3e}",
                sim.stats.steps,
                snaps.len(),
                sim.state.t,
                (sim.vehicle_count() - n0).abs() / n0
            );
        }
        Command::Estimate { input, t, trim } => {
            let f =
                File::open(&input).with_context(|| format!("cannot open {}", input.display()))?;
            let snaps = read_trajectory(BufReader::new(f))?;
            let snap = nearest_snapshot(&snaps, t).expect("non-empty");
            let est = estimate_speed(&snap.rho, &snap.u, &base, trim)?;
            println!("t = {}", snap.t);
            println!("s_est = {}", est.s_est);
            println!("m_est = {}", est.m_est);
            match est.rho_s_est {
                Some(r) => println!("rho_s_est = {} ({:.6} rho_max)", r, r / base.rho_max),
                None => println!("rho_s_est = none"),
            }
            println!("residual = {}", est.residual_rms);
        }
        Command::AccuracyTable {
            out,
            cells,
            taus,
            times,
            rho_s,
            v_minus,
            cfl,
        } => {
            let mut times = times;
            times.sort_by(f64::total_cmp);
            let mut w = create(&out)?;
            writeln!(w, "N,tau,t,eps_rho,eps_u,eps_s,eps_m,mass_drift")?;
            for &tau in &taus {
                let p = base.with_tau(tau);
                let spec = make_spec(&sonic_data(rho_s * p.rho_max, &p)?, v_minus)?;
                for &n in &cells {
                    for r in jamiton_accuracy(&spec, n, cfl, &times)? {
                        writeln!(
                            w,
                            "{},{},{},{},{},{},{},{}",
                            r.n_cells,
                            r.tau,
                            r.t,
                            r.eps_rho,
                            r.eps_u,
                            r.eps_s,
                            r.eps_m,
                            r.mass_drift
                        )?;
                        println!(
                            "N={:5} tau={:4} t={:4}  eps_rho={:.4}%  eps_u={:.4}%  eps_s={:.5}%  eps_m={:.5}%",
                            r.n_cells, r.tau, r.t, r.eps_rho, r.eps_u, r.eps_s, r.eps_m
                        );
                    }
                }
            }
            w.flush()?;
        }
        Command::Collide {
            rho_s_other,
            test,
            run,
            out,
        } => {
            let p = run.tau.map_or(base, |t| base.with_tau(t));
            let spec_t = test_spec(&p, Some(&test))?;
            let other = make_spec(&sonic_data(rho_s_other * p.rho_max, &p)?, spec_t.v_minus)?;
            let rec = run_collision(&spec_t, &other, &settings(&run))?;
            let mut w = create(&out)?;
            write_csv(&mut w, std::slice::from_ref(&rec))?;
            w.flush()?;
            println!("status = {}", rec.status);
            if rec.is_settled() {
                println!(
                    "s_out = {:.6}  m_out = {:.6}  L_out = {:.4}  A_out = {:.6}  rho_plus_out = {:.6}  t_settle = {:.3}",
                    rec.s_out, rec.m_out, rec.l_out, rec.a_out, rec.rho_plus_out, rec.t_settle
                );
            }
        }
        Command::BatchCollide {
            candidates,
            workers,
            run,
            out,
        } => {
            if candidates == 0 {
                bail!("--candidates must be positive");
            }
            let p = run.tau.map_or(base, |t| base.with_tau(t));
            let test = test_spec(&p, None)?;
            let cands = band_candidates(&test, candidates)?;
            let recs = batch_collide(&test, &cands, &settings(&run), workers)?;
            let mut w = create(&out)?;
            write_csv(&mut w, &recs)?;
            w.flush()?;
            let settled = recs.iter().filter(|r| r.is_settled()).count();
            println!("{} collisions, {} settled", recs.len(), settled);
        }
        Command::SweepTau {
            taus,
            candidates,
            workers,
            run,
            out,
        } => {
            if candidates == 0 {
                bail!("--candidates must be positive");
            }
            let test = test_spec(&base, None)?;
            let cands = band_candidates(&test, candidates)?;
            let groups = tau_sweep(&test, &cands, &taus, &settings(&run), workers)?;
            let all: Vec<_> = groups.into_iter().flat_map(|(_, r)| r).collect();
            let mut w = create(&out)?;
            write_csv(&mut w, &all)?;
            w.flush()?;
            println!("{} records over {} relaxation times", all.len(), taus.len());
        }
    }
    Ok(())
}
