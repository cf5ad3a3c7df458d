use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use latgauge_core::acceptance;
use latgauge_core::algebra::center_basis;
use latgauge_core::cache::KernelCache;
use latgauge_core::continuum::{
    d_log_check_with, g_scaling_check_with, kvec_convergence, ConvergenceSeries,
};
use latgauge_core::dynamics::{
    constraint_residual, energy, Leapfrog, PhaseSpaceState, SourceConfig,
};
use latgauge_core::fme::{embezzlement_null_test, sweep_tau, NullScope, ProtocolSpec};
use latgauge_core::gaussian::{
    coulomb_energy_shift, coulomb_momentum, ground_energy, point_charges,
};
use latgauge_core::matter::parse_sites;
use latgauge_core::{seeded_rng, GridSpec, KernelTable, Region, Site};

#[derive(Debug, Parser)]
#[command(
    name = "latgauge",
    version,
    about = "Lattice gauge toy model experiments"
)]
struct Cli {
    /// Seed for every randomized step.
    #[arg(long, global = true, default_value_t = 20_240_601)]
    seed: u64,
    /// Kernel cache directory (overrides LATGAUGE_CACHE).
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1.0)]
    a: f64,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Leapfrog evolution; writes `t,H,max_constraint_residual`.
    Dynamics {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        /// Static unit charges, `i,j;i,j`.
        #[arg(long)]
        charges: Option<String>,
        #[arg(long, value_enum, default_value_t = Init::Random)]
        init: Init,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Ground and Coulomb energies of static unit charges.
    Coulomb {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        charges: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Field-mediated entanglement protocol.
    Fme {
        #[command(flatten)]
        grid: GridArgs,
        /// Charge positions `i,j:i,j`.
        #[arg(long)]
        sites: String,
        #[arg(long)]
        row: Option<usize>,
        #[arg(long, default_value_t = 0.0)]
        tau: f64,
        /// `start:stop:step`, inclusive of stop.
        #[arg(long)]
        sweep_tau: Option<String>,
        #[arg(long)]
        null_test: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Center of the local algebra of a square region.
    Algebra {
        #[command(flatten)]
        grid: GridArgs,
        /// `i,j,M`: origin and side.
        #[arg(long)]
        region: String,
        #[arg(long)]
        dump: Option<PathBuf>,
    },
    /// Continuum convergence series.
    Continuum {
        #[arg(long, value_enum)]
        check: Check,
        #[arg(long, value_delimiter = ',', required = true)]
        n_list: Vec<usize>,
        /// `r1,r2;r1,r2` for d-log.
        #[arg(long, default_value = "1,2;2,4")]
        pairs: String,
        /// Separations for g-scaling.
        #[arg(long, value_delimiter = ',', default_value = "5,10")]
        r: Vec<usize>,
        /// Mode fraction for kvec.
        #[arg(long, default_value_t = 0.05)]
        fraction: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Runs every acceptance criterion and prints a PASS/FAIL table.
    Selftest,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Init {
    Vacuum,
    Random,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Check {
    DLog,
    GScaling,
    Kvec,
}

enum Failure {
    Usage(String),
    Compute(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Compute(e)
    }
}

impl From<latgauge_core::Error> for Failure {
    fn from(e: latgauge_core::Error) -> Self {
        Failure::Compute(e.into())
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Compute(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Outcome {
    let cache = match &cli.cache_dir {
        Some(dir) => KernelCache::new(dir),
        None => KernelCache::default_location(),
    };
    match cli.command {
        Command::Dynamics {
            grid,
            dt,
            steps,
            charges,
            init,
            out,
        } => dynamics(
            grid_spec(&grid)?,
            dt,
            steps,
            charges.as_deref(),
            init,
            cli.seed,
            out.as_deref(),
        ),
        Command::Coulomb { grid, charges, out } => {
            coulomb(grid_spec(&grid)?, &charges, &cache, out.as_deref())
        }
        Command::Fme {
            grid,
            sites,
            row,
            tau,
            sweep_tau,
            null_test,
            out,
        } => fme(
            grid_spec(&grid)?,
            &sites,
            row,
            tau,
            sweep_tau.as_deref(),
            null_test,
            &cache,
            out.as_deref(),
        ),
        Command::Algebra { grid, region, dump } => {
            algebra(grid_spec(&grid)?, &region, dump.as_deref())
        }
        Command::Continuum {
            check,
            n_list,
            pairs,
            r,
            fraction,
            out,
        } => continuum(check, &n_list, &pairs, &r, fraction, &cache, out.as_deref()),
        Command::Selftest => selftest(cli.seed),
    }
}

fn grid_spec(args: &GridArgs) -> Result<GridSpec, Failure> {
    GridSpec::new(args.n, args.a).map_err(|e| usage(e.to_string()))
}

fn emit(out: Option<&Path>, text: &str) -> Outcome {
    match out {
        Some(path) => fs::write(path, text)
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::Compute),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn sites_in_grid(text: &str, grid: &GridSpec) -> Result<Vec<Site>, Failure> {
    let sites = parse_sites(text).map_err(|e| usage(e.to_string()))?;
    if sites.is_empty() {
        return Err(usage("no sites given"));
    }
    if let Some(s) = sites.iter().find(|s| s.i >= grid.n() || s.j >= grid.n()) {
        return Err(usage(format!(
            "site {},{} lies outside an N = {} grid",
            s.i,
            s.j,
            grid.n()
        )));
    }
    Ok(sites)
}

fn dynamics(
    grid: GridSpec,
    dt: Option<f64>,
    steps: usize,
    charges: Option<&str>,
    init: Init,
    seed: u64,
    out: Option<&Path>,
) -> Outcome {
    let dt = dt.unwrap_or_else(|| latgauge_core::dynamics::default_dt(&grid));
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(usage(format!("--dt must be positive, got {dt}")));
    }
    let (source, p0) = match charges {
        Some(text) => {
            let sites = sites_in_grid(text, &grid)?;
            let list: Vec<_> = sites.iter().map(|s| (s.i, s.j, 1.0)).collect();
            let rho = point_charges(grid, &list)?;
            let kernels = KernelTable::build(grid)?;
            let p = coulomb_momentum(&rho, &kernels)?.p;
            (SourceConfig::static_charges(rho), Some(p))
        }
        None => (SourceConfig::vacuum(grid), None),
    };
    let mut state = match init {
        Init::Vacuum => PhaseSpaceState::vacuum(grid),
        Init::Random => PhaseSpaceState::random(grid, &mut seeded_rng(seed)),
    };
    if let Some(p) = p0 {
        state.p = &state.p + &p;
    }

    let mut csv = String::from("t,H,max_constraint_residual\n");
    let mut row = |s: &PhaseSpaceState| {
        let r = constraint_residual(s, &source).norm_inf();
        let _ = writeln!(csv, "{:?},{:?},{:?}", s.time, energy(s, &source), r);
    };
    row(&state);
    Leapfrog::new(&source, dt)?.run(&state, steps, |_, s| row(s))?;
    emit(out, &csv)
}

fn coulomb(grid: GridSpec, charges: &str, cache: &KernelCache, out: Option<&Path>) -> Outcome {
    let sites = sites_in_grid(charges, &grid)?;
    let list: Vec<_> = sites.iter().map(|s| (s.i, s.j, 1.0)).collect();
    let rho = point_charges(grid, &list)?;
    let kernels = cache.load_or_build(grid)?;
    let e_shift = coulomb_energy_shift(&rho, &kernels)?;
    let (pair_distance, d_of_d) = if let [s, t] = sites[..] {
        let n = grid.n() as isize;
        let image = |d: isize| {
            let d = d.rem_euclid(n);
            if d > n / 2 {
                d - n
            } else {
                d
            }
        };
        let di = image(t.i as isize - s.i as isize);
        let dj = image(t.j as isize - s.j as isize);
        let distance = grid.a() * ((di * di + dj * dj) as f64).sqrt();
        (json!(distance), json!(kernels.d(di, dj)))
    } else {
        (serde_json::Value::Null, serde_json::Value::Null)
    };
    let report = json!({
        "N": grid.n(),
        "a": grid.a(),
        "charges": sites.iter().map(|s| [s.i, s.j]).collect::<Vec<_>>(),
        "e0": ground_energy(&grid),
        "e_shift": e_shift,
        "pair_distance": pair_distance,
        "D_of_d": d_of_d,
    });
    emit(
        out,
        &(serde_json::to_string_pretty(&report).map_err(anyhow::Error::from)? + "\n"),
    )
}

fn parse_sweep(text: &str) -> Result<Vec<f64>, Failure> {
    let parts: Vec<f64> = text
        .split(':')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("--sweep-tau expects start:stop:step, got `{text}`")))?;
    let [start, stop, step] = parts[..] else {
        return Err(usage(format!(
            "--sweep-tau expects start:stop:step, got `{text}`"
        )));
    };
    if step.is_nan() || step <= 0.0 || stop < start || start < 0.0 {
        return Err(usage("--sweep-tau needs 0 <= start <= stop and step > 0"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|k| start + k as f64 * step).collect())
}

#[allow(clippy::too_many_arguments)]
fn fme(
    grid: GridSpec,
    sites: &str,
    row: Option<usize>,
    tau: f64,
    sweep: Option<&str>,
    null_test: bool,
    cache: &KernelCache,
    out: Option<&Path>,
) -> Outcome {
    let pair = sites.replace(':', ";");
    let parsed = sites_in_grid(&pair, &grid)?;
    let [site_a, site_b] = parsed[..] else {
        return Err(usage("--sites expects exactly two sites `i,j:i,j`"));
    };
    if let Some(r) = row {
        if site_a.i != r || site_b.i != r {
            return Err(usage(format!("both sites must lie on row {r}")));
        }
    }
    let spec =
        ProtocolSpec::around_sites(grid, site_a, site_b).map_err(|e| usage(e.to_string()))?;
    let kernels: Arc<KernelTable> = cache.load_or_build(grid)?;

    if null_test {
        let mut all = true;
        for scope in [NullScope::Both, NullScope::OnlyA, NullScope::OnlyB] {
            let r = embezzlement_null_test(&spec, &kernels, scope)?;
            println!(
                "null test {scope:?}: matter {} shift {:.1e} phase {:.1e} spins {} -> {}",
                r.matter_equal,
                r.max_shift_diff,
                r.max_phase_diff,
                r.spin_restored,
                if r.passed() { "PASS" } else { "FAIL" }
            );
            all &= r.passed();
        }
        return if all {
            Ok(())
        } else {
            Err(Failure::Compute(anyhow!("embezzlement null test failed")))
        };
    }

    let taus = match sweep {
        Some(text) => parse_sweep(text)?,
        None => {
            if !(tau >= 0.0 && tau.is_finite()) {
                return Err(usage(format!("--tau must be non-negative, got {tau}")));
            }
            vec![tau]
        }
    };
    let rows = sweep_tau(&spec, &kernels, &taus)?;
    let mut csv = String::from("tau,phi_LL,phi_LR,phi_RL,phi_RR,entropy\n");
    for r in rows {
        let _ = writeln!(
            csv,
            "{:?},{:?},{:?},{:?},{:?},{:?}",
            r.tau,
            r.phi[0] + 0.0,
            r.phi[1] + 0.0,
            r.phi[2] + 0.0,
            r.phi[3] + 0.0,
            r.entropy + 0.0
        );
    }
    emit(out, &csv)
}

fn algebra(grid: GridSpec, region: &str, dump: Option<&Path>) -> Outcome {
    let nums: Vec<usize> = region
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("--region expects i,j,M, got `{region}`")))?;
    let [i, j, m] = nums[..] else {
        return Err(usage(format!("--region expects i,j,M, got `{region}`")));
    };
    let region = Region::new(&grid, Site::new(i, j), m).map_err(|e| usage(e.to_string()))?;
    let center = center_basis(&region, &grid);
    let counts: Vec<String> = ["CROSS", "EDGE", "CORNER", "RESIDUAL"]
        .iter()
        .map(|k| format!("{k} {}", center.count(k)))
        .collect();
    println!("center dimension {} ({})", center.len(), counts.join(", "));
    match dump {
        Some(path) => {
            let text = serde_json::to_string_pretty(&center.to_json(&grid, &region))
                .map_err(anyhow::Error::from)?;
            emit(Some(path), &(text + "\n"))
        }
        None => emit(None, &center.to_text()),
    }
}

fn parse_pairs(text: &str) -> Result<Vec<(usize, usize)>, Failure> {
    let sites = parse_sites(text).map_err(|e| usage(e.to_string()))?;
    if sites.is_empty() {
        return Err(usage("--pairs is empty"));
    }
    Ok(sites.into_iter().map(|s| (s.i, s.j)).collect())
}

fn series_csv(series: &[ConvergenceSeries]) -> String {
    let mut csv = String::from("N");
    for s in series {
        csv.push(',');
        csv.push_str(&s.observable);
    }
    csv.push('\n');
    for (k, n) in series[0].n_values.iter().enumerate() {
        csv.push_str(&n.to_string());
        for s in series {
            let _ = write!(csv, ",{:?}", s.values[k]);
        }
        csv.push('\n');
    }
    csv
}

fn continuum(
    check: Check,
    n_list: &[usize],
    pairs: &str,
    rs: &[usize],
    fraction: f64,
    cache: &KernelCache,
    out: Option<&Path>,
) -> Outcome {
    if n_list.iter().any(|&n| n < 3) {
        return Err(usage("every N in --n-list must be at least 3"));
    }
    if n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(usage("--n-list must be strictly increasing"));
    }
    let build = |g: GridSpec| cache.load_or_build(g);
    let series = match check {
        Check::DLog => parse_pairs(pairs)?
            .into_iter()
            .map(|(r1, r2)| {
                if r1 == 0 || r1 >= r2 {
                    return Err(usage(format!("pair ({r1},{r2}) needs 1 <= r1 < r2")));
                }
                Ok(d_log_check_with(n_list, r1, r2, build)?)
            })
            .collect::<Result<Vec<_>, Failure>>()?,
        Check::GScaling => rs
            .iter()
            .map(|&r| {
                if r == 0 {
                    return Err(usage("--r values must be positive"));
                }
                Ok(g_scaling_check_with(n_list, r, build)?)
            })
            .collect::<Result<Vec<_>, Failure>>()?,
        Check::Kvec => {
            if !(fraction > 0.0 && fraction < 0.25) {
                return Err(usage("--fraction must lie in (0, 0.25)"));
            }
            vec![kvec_convergence(n_list, fraction)?]
        }
    };
    for s in &series {
        match s.fit {
            Some(f) => eprintln!(
                "{}: extrapolated {:.6} at order {:.2}",
                s.observable, f.estimate, f.rate
            ),
            None => eprintln!("{}: no extrapolation", s.observable),
        }
    }
    emit(out, &series_csv(&series))
}

fn selftest(seed: u64) -> Outcome {
    let reports = acceptance::run_all(seed);
    for r in &reports {
        println!("{r}");
    }
    let failed: Vec<usize> = reports.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    println!(
        "{} passed, {} failed",
        reports.len() - failed.len(),
        failed.len()
    );
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Compute(anyhow!("criteria {failed:?} failed")))
    }
}
