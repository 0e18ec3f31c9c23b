//! Subcommand implementations. Each returns a summary of what it wrote.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lifenav_core::agent_sim::{check_success, Action};
use lifenav_core::compressor::{compress_frame, compression_ratio, token_count, NATIVE_TOKENS_PER_FRAME};
use lifenav_core::datagen::{
    episode_seed, filter_episodes, generate_goat_sequence, generate_ovon_episode, instruction_for, read_dataset, replay,
    write_dataset, Episode, EpisodeKind, GoatEpisode,
};
use lifenav_core::memory::{context_tokens_for, max_history};
use lifenav_core::metrics::{
    efficiency_report, fmt_ratio, reference_category_sr, spl, success_rate, EpisodeOutcome, RunStats, Table, Tokenization,
    REFERENCE_GOAT_VAL_UNSEEN_SR,
};
use lifenav_core::rng::derive_seed;
use lifenav_core::scene::{generate_scene, load_scene, Scene};
use log::info;
use rayon::prelude::*;

use crate::config::{sequence_seed, ExperimentConfig};
use crate::error::{CliError, Result, WithPath};
use crate::plot::render_svg;

pub const EPISODES_FILE: &str = "episodes.jsonl";
pub const DATASET_FILE: &str = "dataset.jsonl";
pub const GOAT_FILE: &str = "goat.jsonl";
pub const METRICS_FILE: &str = "metrics.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_GRID_FILE: &str = "sweep_grid.csv";
pub const EFFICIENCY_FILE: &str = "efficiency.csv";

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).at(path)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).at(path)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CliError::Validation(format!("cannot start {jobs} worker threads: {e}")))
}

fn scene_path(cfg: &ExperimentConfig, seed: u64) -> PathBuf {
    cfg.scenes_dir().join(format!("scene_{seed}.json"))
}

/// Write one scene file per scene seed.
pub fn cmd_gen_scenes(cfg: &ExperimentConfig, overwrite: bool) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let dir = cfg.scenes_dir();
    ensure_dir(&dir)?;
    let seeds: Vec<u64> = cfg.scene_seeds().collect();
    if !overwrite {
        if let Some(existing) = seeds.iter().map(|&s| scene_path(cfg, s)).find(|p| p.exists()) {
            return Err(CliError::Validation(format!("{} already exists; pass --overwrite to replace it", existing.display())));
        }
    }
    let scenes: Vec<Scene> = pool(cfg.jobs)?
        .install(|| seeds.par_iter().map(|&s| generate_scene(s, &cfg.scene)).collect::<std::result::Result<_, _>>())?;
    let mut written = Vec::with_capacity(scenes.len());
    for (seed, scene) in seeds.iter().zip(&scenes) {
        let path = scene_path(cfg, *seed);
        write_file(&path, &scene.to_json())?;
        written.push(path);
    }
    info!("wrote {} scenes to {}", written.len(), dir.display());
    Ok(written)
}

/// Load the scenes named by the config, in seed order.
pub fn load_scenes(cfg: &ExperimentConfig) -> Result<Vec<Scene>> {
    cfg.scene_seeds()
        .map(|s| {
            let path = scene_path(cfg, s);
            if !path.exists() {
                return Err(CliError::io(
                    &path,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "scene file missing; run gen-scenes first"),
                ));
            }
            load_scene(&path).at(&path)
        })
        .collect()
}

fn outcomes(episodes: &[Episode]) -> Vec<EpisodeOutcome> {
    episodes.iter().map(Episode::to_outcome).collect()
}

/// Overall and per-category SR and SPL, with published reference values where
/// they exist. Reference numbers are percentages and are display-only.
pub fn metrics_table(splits: &[(&str, &[Episode])]) -> Result<Table> {
    let mut table = Table::new(&["split", "category", "episodes", "sr", "spl", "reference_sr_percent"]);
    for &(name, episodes) in splits {
        if episodes.is_empty() {
            continue;
        }
        let all = outcomes(episodes);
        let goat = name == "goat";
        let reference = |v: Option<f64>| v.filter(|_| goat).map_or_else(|| "-".to_string(), |v| format!("{v:.1}"));
        table.push(vec![
            name.to_string(),
            "all".to_string(),
            all.len().to_string(),
            fmt_ratio(success_rate(&all)?),
            fmt_ratio(spl(&all)?),
            reference(Some(REFERENCE_GOAT_VAL_UNSEEN_SR)),
        ]);
        let mut by_cat: BTreeMap<&str, Vec<EpisodeOutcome>> = BTreeMap::new();
        for o in &all {
            by_cat.entry(o.category.as_str()).or_default().push(o.clone());
        }
        for (cat, group) in by_cat {
            table.push(vec![
                name.to_string(),
                cat.to_string(),
                group.len().to_string(),
                fmt_ratio(success_rate(&group)?),
                fmt_ratio(spl(&group)?),
                reference(reference_category_sr(cat)),
            ]);
        }
    }
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub episodes: Vec<Episode>,
    pub kept: usize,
    pub goat: Vec<GoatEpisode>,
    pub metrics: Table,
    pub files: Vec<PathBuf>,
}

fn run_goat(cfg: &ExperimentConfig, scenes: &[Scene], sequences: u64, memory_length: usize, n: usize) -> Result<Vec<GoatEpisode>> {
    let goat_cfg = cfg.goat_config(cfg.compression_for(n));
    let tasks: Vec<(usize, u64)> = (0..scenes.len()).flat_map(|i| (0..sequences).map(move |k| (i, k))).collect();
    let seqs = pool(cfg.jobs)?.install(|| {
        tasks
            .par_iter()
            .map(|&(i, k)| {
                let scene = &scenes[i];
                generate_goat_sequence(scene, sequence_seed(scene.scene_id(), k), cfg.goat.subtasks, memory_length, &goat_cfg)
            })
            .collect::<std::result::Result<Vec<_>, _>>()
    })?;
    Ok(seqs)
}

/// Generate single-goal episodes and lifelong sequences, then score them.
pub fn cmd_run(cfg: &ExperimentConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let scenes = load_scenes(cfg)?;
    ensure_dir(&cfg.out_dir)?;

    let tasks: Vec<(usize, u64)> = (0..scenes.len()).flat_map(|i| cfg.episode_seeds().map(move |j| (i, j))).collect();
    let mut episodes: Vec<Episode> = pool(cfg.jobs)?.install(|| {
        tasks
            .par_iter()
            .map(|&(i, j)| generate_ovon_episode(&scenes[i], episode_seed(scenes[i].scene_id(), j), &cfg.explorer))
            .collect::<std::result::Result<_, _>>()
    })?;
    episodes.sort_by(|a, b| (&a.scene_id, a.seed).cmp(&(&b.scene_id, b.seed)));
    let kept = filter_episodes(episodes.clone(), cfg.run.min_steps);

    let goat = run_goat(cfg, &scenes, cfg.run.goat_sequences_per_scene, cfg.goat.memory_length, cfg.explorer.compression.num_blocks)?;
    let goat_eps: Vec<Episode> = goat.iter().flat_map(|g| g.subtasks.iter().cloned()).collect();

    let metrics = metrics_table(&[("ovon", &episodes), ("goat", &goat_eps)])?;
    let files = vec![
        cfg.out_dir.join(EPISODES_FILE),
        cfg.out_dir.join(DATASET_FILE),
        cfg.out_dir.join(GOAT_FILE),
        cfg.out_dir.join(METRICS_FILE),
    ];
    write_dataset(&episodes, &files[0]).at(&files[0])?;
    write_dataset(&kept, &files[1]).at(&files[1])?;
    write_dataset(&goat_eps, &files[2]).at(&files[2])?;
    write_file(&files[3], &metrics.to_csv())?;
    info!("{} episodes, {} kept, {} lifelong sequences", episodes.len(), kept.len(), goat.len());
    Ok(RunSummary { kept: kept.len(), episodes, goat, metrics, files })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub num_blocks: usize,
    pub r_spatial: u64,
    pub tokens_per_frame: usize,
    pub r_native: f64,
    pub memory_length: usize,
    pub max_history: u64,
    pub context_tokens: u64,
    pub feasible: bool,
    pub success_rate: Option<f64>,
    pub spl: Option<f64>,
    pub wall_clock_s_per_sequence: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub cells: Vec<SweepCell>,
    pub table: Table,
    pub grid: Table,
    pub efficiency: Table,
    pub files: Vec<PathBuf>,
}

fn dash_or<T>(v: Option<T>, f: impl Fn(T) -> String) -> String {
    v.map_or_else(|| "-".to_string(), f)
}

/// Compression depth by memory length grid of lifelong runs under the
/// token budget. Cells whose full memory would overflow the budget are not
/// run and render as "-".
pub fn cmd_sweep(cfg: &ExperimentConfig, plots: bool) -> Result<SweepReport> {
    cfg.validate()?;
    let scenes = load_scenes(cfg)?;
    ensure_dir(&cfg.out_dir)?;
    let pose = cfg.explorer.pose_text_tokens as u64;
    let overhead = cfg.fixed_overhead();

    let mut cells = Vec::new();
    for &n in &cfg.sweep.compression_blocks {
        let comp = cfg.compression_for(n);
        let tpf = token_count(&comp)?;
        let produced = compress_frame(derive_seed(cfg.seed, &[n as u64]), &comp)?.len();
        if produced != tpf {
            return Err(CliError::Validation(format!("N={n}: pipeline produced {produced} tokens, formula says {tpf}")));
        }
        let (r_spatial, r_native) = compression_ratio(&comp)?;
        let max_hist = max_history(cfg.memory.budget_tokens, tpf as u64, pose, overhead);
        for &l in &cfg.sweep.memory_lengths {
            cells.push(SweepCell {
                num_blocks: n,
                r_spatial,
                tokens_per_frame: tpf,
                r_native,
                memory_length: l,
                max_history: max_hist,
                context_tokens: context_tokens_for(l as u64, tpf as u64, pose, overhead),
                feasible: l as u64 <= max_hist,
                success_rate: None,
                spl: None,
                wall_clock_s_per_sequence: None,
            });
        }
    }

    let mut plot_files = Vec::new();
    for cell in cells.iter_mut().filter(|c| c.feasible) {
        let start = Instant::now();
        let seqs = run_goat(cfg, &scenes, cfg.sweep.sequences_per_scene, cell.memory_length, cell.num_blocks)?;
        let elapsed = start.elapsed().as_secs_f64();
        let outs: Vec<EpisodeOutcome> = seqs.iter().flat_map(GoatEpisode::outcomes).collect();
        cell.success_rate = Some(success_rate(&outs)?);
        cell.spl = Some(spl(&outs)?);
        if cfg.record_timing {
            cell.wall_clock_s_per_sequence = Some(elapsed / seqs.len() as f64);
        }
        if plots || cfg.sweep.plots {
            if let (Some(seq), Some(scene)) = (seqs.first(), scenes.first()) {
                let dir = cfg.out_dir.join("plots");
                ensure_dir(&dir)?;
                let path = dir.join(format!("sweep_N{}_L{}.svg", cell.num_blocks, cell.memory_length));
                write_file(&path, &render_svg(scene, &seq.subtasks, &cfg.explorer.actions))?;
                plot_files.push(path);
            }
        }
    }

    let mut table = Table::new(&[
        "N",
        "r_spatial",
        "tokens_per_frame",
        "r_native",
        "memory_length",
        "max_history",
        "feasible",
        "sr",
        "spl",
        "context_tokens",
        "attention_cost_proxy",
        "wall_clock_s_per_sequence",
    ]);
    for c in &cells {
        let ctx = c.feasible.then_some(c.context_tokens);
        table.push(vec![
            c.num_blocks.to_string(),
            c.r_spatial.to_string(),
            c.tokens_per_frame.to_string(),
            fmt_ratio(c.r_native),
            c.memory_length.to_string(),
            c.max_history.to_string(),
            if c.feasible { "yes" } else { "no" }.to_string(),
            dash_or(c.success_rate, fmt_ratio),
            dash_or(c.spl, fmt_ratio),
            dash_or(ctx, |v| v.to_string()),
            dash_or(ctx, |v| (u128::from(v) * u128::from(v)).to_string()),
            dash_or(c.wall_clock_s_per_sequence, |v| format!("{v:.3}")),
        ]);
    }

    let mut header = vec!["compression_rate".to_string()];
    header.extend(cfg.sweep.memory_lengths.iter().map(|l| l.to_string()));
    let mut grid = Table { header, rows: vec![] };
    for &n in &cfg.sweep.compression_blocks {
        let row_cells: Vec<&SweepCell> = cells.iter().filter(|c| c.num_blocks == n).collect();
        let mut row = vec![row_cells[0].r_spatial.to_string()];
        row.extend(row_cells.iter().map(|c| dash_or(c.success_rate, fmt_ratio)));
        grid.push(row);
    }

    let efficiency = efficiency_table(cfg, &cells);
    let files = vec![cfg.out_dir.join(SWEEP_FILE), cfg.out_dir.join(SWEEP_GRID_FILE), cfg.out_dir.join(EFFICIENCY_FILE)];
    write_file(&files[0], &table.to_csv())?;
    write_file(&files[1], &grid.to_csv())?;
    write_file(&files[2], &efficiency.to_csv())?;
    let files = files.into_iter().chain(plot_files).collect();
    Ok(SweepReport { cells, table, grid, efficiency, files })
}

/// An uncompressed baseline at the shortest memory length followed by the
/// configured compression at every swept length. The simulated agent's
/// perception does not depend on tokenization, so the baseline reuses the
/// outcomes of the compressed run with the same memory length.
fn efficiency_table(cfg: &ExperimentConfig, cells: &[SweepCell]) -> Table {
    let n = cfg.explorer.compression.num_blocks;
    let pose = cfg.explorer.pose_text_tokens;
    let overhead = cfg.fixed_overhead() as usize;
    let nominal: Vec<&SweepCell> = cells.iter().filter(|c| c.num_blocks == n && c.feasible).collect();
    let mut stats = Vec::new();
    if let Some(&shortest) = cfg.sweep.memory_lengths.iter().min() {
        let same = nominal.iter().find(|c| c.memory_length == shortest);
        stats.push(RunStats {
            frames: shortest,
            tokenization: Tokenization::Native,
            tokens_per_frame: NATIVE_TOKENS_PER_FRAME,
            pose_text_tokens: pose,
            fixed_overhead: overhead,
            success_rate: same.and_then(|c| c.success_rate),
            spl: same.and_then(|c| c.spl),
            wall_clock_s_per_episode: None,
        });
    }
    for c in nominal {
        stats.push(RunStats {
            frames: c.memory_length,
            tokenization: Tokenization::Blocks(n),
            tokens_per_frame: c.tokens_per_frame,
            pose_text_tokens: pose,
            fixed_overhead: overhead,
            success_rate: c.success_rate,
            spl: c.spl,
            wall_clock_s_per_episode: c.wall_clock_s_per_sequence.map(|t| t / cfg.goat.subtasks as f64),
        });
    }
    efficiency_report(&stats)
}

fn find_scene(cfg: &ExperimentConfig, scene_id: &str, explicit: Option<&Path>) -> Result<Scene> {
    let path = explicit.map_or_else(|| cfg.scenes_dir().join(format!("{scene_id}.json")), Path::to_path_buf);
    let scene = load_scene(&path).at(&path)?;
    if scene.scene_id() != scene_id {
        return Err(CliError::Validation(format!("{} holds {}, episode needs {scene_id}", path.display(), scene.scene_id())));
    }
    Ok(scene)
}

/// Draw the episode on line `index` of a dataset. A lifelong subtask pulls
/// in every subtask of its sequence.
pub fn cmd_plot(cfg: &ExperimentConfig, dataset: &Path, index: usize, scene: Option<&Path>, out: &Path) -> Result<()> {
    let episodes = read_dataset(dataset).at(dataset)?;
    let chosen = episodes
        .get(index)
        .ok_or_else(|| CliError::Validation(format!("{} has {} episodes, no index {index}", dataset.display(), episodes.len())))?;
    let selected: Vec<Episode> = match chosen.kind {
        EpisodeKind::Ovon => vec![chosen.clone()],
        EpisodeKind::Goat => episodes
            .iter()
            .filter(|e| e.kind == EpisodeKind::Goat && e.scene_id == chosen.scene_id && e.seed == chosen.seed && e.memory_length == chosen.memory_length)
            .cloned()
            .collect(),
    };
    let scene = find_scene(cfg, &chosen.scene_id, scene)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_file(out, &render_svg(&scene, &selected, &cfg.explorer.actions))
}

#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    pub episodes: usize,
    pub problems: Vec<String>,
}

/// Check the config and, when given, replay every episode of a dataset.
pub fn cmd_validate(cfg: &ExperimentConfig, dataset: Option<&Path>) -> Result<ValidationReport> {
    cfg.validate()?;
    let mut report = ValidationReport::default();
    let Some(dataset) = dataset else { return Ok(report) };
    let episodes = read_dataset(dataset).at(dataset)?;
    let mut scenes: BTreeMap<String, Scene> = BTreeMap::new();
    for (line, ep) in episodes.iter().enumerate() {
        if !scenes.contains_key(&ep.scene_id) {
            scenes.insert(ep.scene_id.clone(), find_scene(cfg, &ep.scene_id, None)?);
        }
        let scene = &scenes[&ep.scene_id];
        let mut problem = |m: String| report.problems.push(format!("line {}: {m}", line + 1));
        let poses = replay(scene, &ep.start_pose, &ep.actions, &cfg.explorer.actions);
        if poses.last().copied().unwrap_or(ep.start_pose) != ep.final_pose {
            problem("replayed final pose differs from the recorded one".into());
        }
        if ep.outcome.success && !check_success(&ep.final_pose, ep.target.x, ep.target.y) {
            problem("successful episode ends outside the success radius".into());
        }
        if ep.outcome.steps != ep.actions.len() {
            problem(format!("{} steps recorded for {} actions", ep.outcome.steps, ep.actions.len()));
        }
        if ep.instruction != instruction_for(&ep.target.category) {
            problem(format!("unexpected instruction {:?}", ep.instruction));
        }
        if ep.subgoals.windows(2).any(|w| w[0].step > w[1].step) || ep.subgoals.iter().any(|s| s.step > ep.actions.len()) {
            problem("subgoal steps out of order".into());
        }
        let moves = ep.actions.iter().filter(|&&a| a != Action::Stop).count();
        if ep.frames.len() != moves && ep.frames.len() != moves + 1 {
            problem(format!("{} frames for {moves} non-stop actions", ep.frames.len()));
        }
    }
    report.episodes = episodes.len();
    if !report.problems.is_empty() {
        let shown: Vec<&str> = report.problems.iter().take(5).map(String::as_str).collect();
        return Err(CliError::Validation(format!(
            "{} problems in {}: {}",
            report.problems.len(),
            dataset.display(),
            shown.join("; ")
        )));
    }
    Ok(report)
}
