use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use dynchan::bench::{
    default_ranges, run_trials, summarize, summary_csv, sweep_csv, sweep_range, trial_csv, TrialRow,
};
use dynchan::config::Settings;
use dynchan::crowd::{feasible_intervals, CrowdSnapshot, Pedestrian};
use dynchan::datasets::{interpolate, load_raw, make_trials, synth_crowd, Homography, LoadOptions};
use dynchan::funnel::{path_length, sample_path};
use dynchan::geom::{triangulate, Vec2};
use dynchan::planner::{plan, with_virtual_corners, PlanKind};
use dynchan::sim::PlannerKind;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

const DATASETS: [&str; 5] = ["eth_hotel", "eth_univ", "ucy_univ", "ucy_zara01", "ucy_zara02"];

#[derive(Parser)]
#[command(name = "dynchan", version, about = "Crowd navigation with dynamic channels")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Base seed for crowds and sampling planners.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Flat key = value parameter file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (plan, synth, sweep-range) or directory (bench).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for trials.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Extra `key=value` overrides, applied after the config file.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Plan once on a crowd snapshot (`id,x,y,vx,vy` rows) and write JSON.
    Plan {
        /// Snapshot CSV; an optional header line starts with `id`.
        #[arg(long)]
        snapshot: PathBuf,
        /// Robot position as `x,y`.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        start: Vec2,
        /// Goal position as `x,y`.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        goal: Vec2,
    },
    /// Run trials for every planner and write trials.csv and summary.csv.
    Bench {
        /// Directory with `<name>.txt` trajectory files; the built-in dense
        /// synthetic fixture is used when omitted.
        #[arg(long)]
        datasets: Option<PathBuf>,
        /// Dataset names to look for in the directory.
        #[arg(long, value_delimiter = ',', default_values_t = DATASETS.map(String::from))]
        names: Vec<String>,
        /// Planners to run.
        #[arg(long, value_delimiter = ',', default_values_t = PlannerKind::ALL.map(|p| p.name().to_string()))]
        planners: Vec<String>,
        /// Project raw coordinates with `<name>.H` (9 numbers, row-major).
        #[arg(long)]
        project: bool,
        /// Write zero planning times so output is byte-reproducible.
        #[arg(long)]
        no_timing: bool,
    },
    /// Write the synthetic crowd as canonical CSV (`frame,ped_id,x,y`).
    Synth,
    /// Success, travel time, planning time and visible pedestrians per sensing range.
    SweepRange {
        /// Comma-separated ranges in meters; `inf` for unlimited.
        #[arg(long, value_delimiter = ',')]
        ranges: Option<Vec<String>>,
        /// Trials per range (default from the fixture).
        #[arg(long)]
        trials: Option<usize>,
        /// Write zero planning times.
        #[arg(long)]
        no_timing: bool,
    },
}

fn parse_point(s: &str) -> Result<Vec2, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let x: f64 = x.trim().parse().map_err(|e| format!("{e}"))?;
    let y: f64 = y.trim().parse().map_err(|e| format!("{e}"))?;
    Ok(Vec2::new(x, y))
}

fn settings(g: &Global) -> Result<Settings> {
    let mut s = Settings::default();
    s.fixture.crowd.seed = g.seed;
    if let Some(path) = &g.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        s.apply(&text).with_context(|| format!("in {}", path.display()))?;
    }
    for kv in &g.set {
        let (k, v) = kv.split_once('=').with_context(|| format!("expected KEY=VALUE, got {kv:?}"))?;
        s.set(k.trim(), v)?;
    }
    Ok(s)
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_snapshot(path: &Path) -> Result<CrowdSnapshot> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut peds = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || (i == 0 && line.starts_with("id")) {
            continue;
        }
        let f: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .with_context(|| format!("{}:{}: non-numeric field", path.display(), i + 1))?;
        if f.len() != 5 || f.iter().any(|x| !x.is_finite()) {
            bail!("{}:{}: expected id,x,y,vx,vy", path.display(), i + 1);
        }
        if f[0] < 0.0 {
            bail!("{}:{}: pedestrian ids must be non-negative", path.display(), i + 1);
        }
        peds.push(Pedestrian::new(f[0] as i64, Vec2::new(f[1], f[2]), Vec2::new(f[3], f[4])));
    }
    Ok(CrowdSnapshot::new(0.0, peds))
}

fn cmd_plan(g: &Global, snapshot: &Path, start: Vec2, goal: Vec2) -> Result<ExitCode> {
    let s = settings(g)?;
    let crowd = with_virtual_corners(&read_snapshot(snapshot)?, &[start, goal], s.sim.corner_margin);
    let cfg = &s.sim.planner;
    let p = plan(&crowd, start, goal, cfg);
    let mut gates = Vec::new();
    if let (Some(ch), Ok(mesh)) = (&p.channel, triangulate(&crowd.positions())) {
        for (k, &e) in ch.gates.iter().enumerate() {
            let edge = mesh.edge(e);
            let (a, b) = (&crowd.pedestrians[edge.a], &crowd.pedestrians[edge.b]);
            let iv = feasible_intervals(a, b, cfg.d_thresh(), cfg.horizon);
            gates.push(json!({
                "edge": e,
                "pedestrians": [a.id, b.id],
                "eta": ch.etas.get(k),
                "intervals": iv.intervals.iter().map(|&(lo, hi)| json!([lo, if hi.is_finite() { Some(hi) } else { None }])).collect::<Vec<_>>(),
            }));
        }
    }
    let kind = match p.kind {
        PlanKind::Channel => "channel",
        PlanKind::LocalClearance => "local-clearance",
        PlanKind::Straight => "straight",
    };
    let samples: Vec<[f64; 2]> = sample_path(&p.path, 0.1).iter().map(|q| [q.x, q.y]).collect();
    let doc = json!({
        "kind": kind,
        "channel": p.channel.as_ref().map(|c| json!({ "faces": c.faces, "gates": gates })),
        "length": path_length(&p.path),
        "elements": p.path.elements,
        "samples": samples,
    });
    write_output(g.out.as_deref(), &format!("{}\n", serde_json::to_string_pretty(&doc)?))?;
    Ok(if p.kind == PlanKind::LocalClearance { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn planners(names: &[String]) -> Result<Vec<PlannerKind>> {
    names
        .iter()
        .map(|n| PlannerKind::from_name(n).with_context(|| format!("unknown planner {n:?}")))
        .collect()
}

fn find_dataset(dir: &Path, name: &str) -> Option<PathBuf> {
    ["txt", "csv"].iter().map(|ext| dir.join(format!("{name}.{ext}"))).find(|p| p.is_file())
}

fn cmd_bench(
    g: &Global,
    datasets: Option<&Path>,
    names: &[String],
    planner_names: &[String],
    project: bool,
    no_timing: bool,
) -> Result<ExitCode> {
    let mut s = settings(g)?;
    if no_timing {
        s.sim.timing = false;
    }
    let kinds = planners(planner_names)?;
    let mut rows: Vec<TrialRow> = Vec::new();
    match datasets {
        None => {
            let scenarios = s.fixture.scenarios(s.sensing_range);
            rows = run_trials("dense-synthetic", &scenarios, &kinds, &s.sim, g.seed, g.jobs)?;
        }
        Some(dir) => {
            let mut found = 0;
            for name in names {
                let Some(path) = find_dataset(dir, name) else {
                    eprintln!("missing dataset {name} in {}", dir.display());
                    continue;
                };
                found += 1;
                let mut opts: LoadOptions = s.load.clone();
                if project {
                    let h = dir.join(format!("{name}.H"));
                    let text = std::fs::read_to_string(&h).with_context(|| format!("reading {}", h.display()))?;
                    opts.project = true;
                    opts.homography = Some(Homography::parse(&text)?);
                }
                let raw = load_raw(&path, &opts).with_context(|| format!("loading {}", path.display()))?;
                let ds = Arc::new(interpolate(&raw, s.interp_dt));
                let mut scenarios = make_trials(&ds, s.trial_interval);
                for sc in &mut scenarios {
                    sc.sensing_range = s.sensing_range;
                }
                eprintln!("{name}: {} trials", scenarios.len());
                rows.extend(run_trials(name, &scenarios, &kinds, &s.sim, g.seed, g.jobs)?);
            }
            if found == 0 {
                bail!("no datasets found in {}", dir.display());
            }
        }
    }
    let summary = summary_csv(&summarize(&rows));
    match &g.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            std::fs::write(dir.join("trials.csv"), trial_csv(&rows))?;
            std::fs::write(dir.join("summary.csv"), &summary)?;
        }
        None => print!("{summary}"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_synth(g: &Global) -> Result<ExitCode> {
    let s = settings(g)?;
    write_output(g.out.as_deref(), &synth_crowd(&s.fixture.crowd).to_csv())?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(g: &Global, ranges: Option<&[String]>, trials: Option<usize>, no_timing: bool) -> Result<ExitCode> {
    let mut s = settings(g)?;
    if no_timing {
        s.sim.timing = false;
    }
    if let Some(n) = trials {
        s.fixture.trials = n;
    }
    let ranges: Vec<Option<f64>> = match ranges {
        None => default_ranges(),
        Some(list) => list
            .iter()
            .map(|r| match r.trim() {
                "inf" | "none" => Ok(None),
                x => x.parse::<f64>().map(Some).with_context(|| format!("bad range {x:?}")),
            })
            .collect::<Result<_>>()?,
    };
    if ranges.iter().flatten().any(|&r| !(r > 0.0)) {
        bail!("ranges must be positive");
    }
    let rows = sweep_range(&s.fixture, &ranges, &s.sim, g.seed, g.jobs)?;
    write_output(g.out.as_deref(), &sweep_csv(&rows))?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match &cli.command {
        Command::Plan { snapshot, start, goal } => cmd_plan(g, snapshot, *start, *goal),
        Command::Bench { datasets, names, planners, project, no_timing } => {
            cmd_bench(g, datasets.as_deref(), names, planners, *project, *no_timing)
        }
        Command::Synth => cmd_synth(g),
        Command::SweepRange { ranges, trials, no_timing } => cmd_sweep(g, ranges.as_deref(), *trials, *no_timing),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
