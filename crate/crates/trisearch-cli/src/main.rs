use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use trisearch::formation::Preset;
use trisearch::harness::export::{
    render_svg, write_map_csv, write_rows, write_stats_csv, write_svg, write_trajectory_csv,
};
use trisearch::harness::formation_run::run_formation;
use trisearch::harness::scenario::{Course, FormationSpec};
use trisearch::harness::{monte_carlo, run_episode, Scenario, SweepStats};
use trisearch::search::{Mission, PolicyChoice};
use trisearch::world::Point;

#[derive(Parser)]
#[command(name = "trisearch", version, about = "Multi-robot lattice search and formation simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one episode and write its trajectory, metrics, map and plot.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario's policy.
        #[arg(long)]
        policy: Option<PolicyChoice>,
    },
    /// Completion-time statistics per team size for one policy.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "1..15", value_parser = parse_teams)]
        teams: Teams,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long)]
        policy: PolicyChoice,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean completion time of all three policies side by side.
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "1,3,5,7,10", value_parser = parse_teams)]
        teams: Teams,
        #[arg(long, default_value_t = 20)]
        runs: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Formation run over an obstacle course.
    Formation {
        #[arg(long)]
        config: Preset,
        #[arg(long)]
        obstacles: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        robots: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 200.0)]
        t_end: f64,
        /// Robots pick their slots themselves.
        #[arg(long)]
        anonymous: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone)]
struct Teams(Vec<usize>);

/// `a..b` (inclusive) or a comma list.
fn parse_teams(s: &str) -> Result<Teams, String> {
    let bad = |e: std::num::ParseIntError| format!("bad team size in '{s}': {e}");
    let v: Vec<usize> = if let Some((a, b)) = s.split_once("..") {
        let (a, b) = (a.trim().parse().map_err(bad)?, b.trim().parse().map_err(bad)?);
        (a..=b).collect()
    } else {
        s.split(',').map(|x| x.trim().parse().map_err(bad)).collect::<Result<_, _>>()?
    };
    if v.is_empty() || v.contains(&0) {
        return Err(format!("team sizes must be positive: '{s}'"));
    }
    Ok(Teams(v))
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Run { scenario, seed, out, policy } => run(&scenario, seed, &out, policy),
        Cmd::Sweep { scenario, teams, runs, policy, seed, out } => sweep(&scenario, &teams.0, runs, policy, seed, out),
        Cmd::Compare { scenario, teams, runs, seed, out } => compare(&scenario, &teams.0, runs, seed, out),
        Cmd::Formation { config, obstacles, robots, seed, t_end, anonymous, out } => {
            formation(config, obstacles.as_deref(), robots, seed, t_end, anonymous, out)
        }
    }
}

fn run(path: &Path, seed: u64, out: &Path, policy: Option<PolicyChoice>) -> Result<()> {
    let mut s = Scenario::load(path)?;
    if let Some(p) = policy {
        s = s.with_policy(p);
    }
    let e = run_episode(&s, seed)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_trajectory_csv(&out.join("trajectory.csv"), &e.trajectory)?;
    write_map_csv(&out.join("map.csv"), &e.maps[0])?;
    let m = &e.metrics;
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    let mut rows: Vec<(String, String)> = vec![
        ("policy".into(), s.search.policy.to_string()),
        ("robots".into(), s.robots.count.to_string()),
        ("seed".into(), seed.to_string()),
        ("consensus_rounds".into(), m.consensus_rounds.to_string()),
        ("consensus_converged".into(), m.consensus_converged.to_string()),
        ("stage_one_time".into(), m.stage_one_time.to_string()),
        ("completion_ticks".into(), m.completion_ticks.map_or(String::new(), |t| t.to_string())),
        ("completion_time".into(), opt(m.completion_time)),
        ("visited_vertices".into(), m.visited_vertices.to_string()),
        ("region_vertices".into(), m.region_vertices.to_string()),
        ("revisits".into(), m.revisits.to_string()),
        ("conflicts".into(), m.conflicts.to_string()),
        ("deleted_vertices".into(), m.deleted_vertices.to_string()),
        ("targets_detected".into(), m.targets_detected.to_string()),
    ];
    for (i, (l, d)) in m.path_length.iter().zip(&m.decisions).enumerate() {
        rows.push((format!("path_length_{i}"), l.to_string()));
        rows.push((format!("decisions_{i}"), d.to_string()));
    }
    #[derive(serde::Serialize)]
    struct Kv<'a> {
        key: &'a str,
        value: &'a str,
    }
    let kv: Vec<Kv> = rows.iter().map(|(k, v)| Kv { key: k, value: v }).collect();
    write_rows(&out.join("metrics.csv"), &kv)?;
    let w = s.workspace()?;
    let verts: Vec<Point> = e.maps[0].iter().map(|(c, _)| e.maps[0].point(c)).collect();
    let targets = match &s.search.mission {
        Mission::Targets { targets } => targets.clone(),
        _ => Vec::new(),
    };
    write_svg(&out.join("plot.svg"), &render_svg(&w, &verts, &e.trajectory, &targets))?;
    match m.completion_time {
        Some(t) => println!("completed in {t:.1} s ({} vertices)", m.visited_vertices),
        None => println!("did not terminate ({} of {} vertices visited)", m.visited_vertices, m.region_vertices),
    }
    Ok(())
}

fn print_or_write(stats: &[SweepStats], out: Option<PathBuf>) -> Result<()> {
    match out {
        Some(p) => write_stats_csv(&p, stats)?,
        None => {
            println!("team_size,min,max,avg,std");
            for s in stats {
                println!("{},{},{},{},{}", s.team_size, s.min, s.max, s.avg, s.std);
            }
        }
    }
    Ok(())
}

fn sweep(
    path: &Path,
    teams: &[usize],
    runs: usize,
    policy: PolicyChoice,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<()> {
    if runs < 2 {
        bail!("--runs must be at least 2");
    }
    let s = Scenario::load(path)?.with_policy(policy);
    let sw = monte_carlo(&s, teams, runs, seed)?;
    for o in sw.non_terminated() {
        eprintln!("warning: team size {} run {} (seed {}) did not terminate", o.team_size, o.run, o.seed);
    }
    print_or_write(&sw.stats(), out)
}

fn compare(path: &Path, teams: &[usize], runs: usize, seed: u64, out: Option<PathBuf>) -> Result<()> {
    if runs < 2 {
        bail!("--runs must be at least 2");
    }
    let base = Scenario::load(path)?;
    let mut avg = Vec::new();
    for p in PolicyChoice::ALL {
        let sw = monte_carlo(&base.with_policy(p), teams, runs, seed)?;
        for o in sw.non_terminated() {
            eprintln!("warning: {p} team size {} run {} did not terminate", o.team_size, o.run);
        }
        avg.push(sw.stats());
    }
    #[derive(serde::Serialize)]
    struct Row {
        team_size: usize,
        random: f64,
        semirandom: f64,
        modified: f64,
    }
    let find = |k: usize, col: &[SweepStats]| col.iter().find(|s| s.team_size == k).map_or(f64::NAN, |s| s.avg);
    let rows: Vec<Row> = teams
        .iter()
        .map(|&k| Row {
            team_size: k,
            random: find(k, &avg[0]),
            semirandom: find(k, &avg[1]),
            modified: find(k, &avg[2]),
        })
        .collect();
    match out {
        Some(p) => write_rows(&p, &rows)?,
        None => {
            println!("team_size,random,semirandom,modified");
            for r in &rows {
                println!("{},{},{},{}", r.team_size, r.random, r.semirandom, r.modified);
            }
        }
    }
    Ok(())
}

fn formation(
    preset: Preset,
    obstacles: Option<&Path>,
    robots: usize,
    seed: u64,
    t_end: f64,
    anonymous: bool,
    out: Option<PathBuf>,
) -> Result<()> {
    let course = match obstacles {
        Some(p) => Course::load(p)?,
        None => Course::open(),
    };
    let spec = FormationSpec {
        preset,
        t_end,
        heading_spread: 0.1,
        anonymous: anonymous.then(Default::default),
        ..FormationSpec::default()
    };
    spec.configuration(robots).validate(&spec.limits)?;
    let e = run_formation(&spec, &course, robots, seed)?;
    let m = &e.metrics;
    println!("offset error {:.4} m, heading spread {:.4} rad", m.final_offset_error, m.final_heading_spread);
    println!("penetrations {}, boundary ticks {}", m.penetrations, m.boundary_ticks);
    if m.standoff_samples > 0 {
        println!(
            "standoff {:.3}..{:.3} m over {} samples ({} outside tolerance)",
            m.standoff_min, m.standoff_max, m.standoff_samples, m.standoff_violations
        );
    }
    println!("slots {:?}, reformed {}", m.assignment, m.reformed);
    if let Some(dir) = out {
        fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
        write_trajectory_csv(&dir.join("trajectory.csv"), &e.trajectory)?;
        let w = course.workspace.build()?;
        write_svg(&dir.join("plot.svg"), &render_svg(&w, &[], &e.trajectory, &[]))?;
    }
    Ok(())
}
