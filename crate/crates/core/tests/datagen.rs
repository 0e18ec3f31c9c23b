use lifenav_core::agent_sim::{check_success, observe, step, Action};
use lifenav_core::datagen::{
    episode_seed, generate_goat_sequence, generate_ovon_episode, read_dataset, write_dataset, Episode, ExplorerConfig,
    GoatConfig, TargetPolicy,
};
use lifenav_core::frontier::{extract_frontiers, ExplorationMap};
use lifenav_core::metrics::spl;
use lifenav_core::scene::{generate_scene, Scene, SceneParams};

/// Rebuild the exploration map action by action and check every subgoal
/// against the frontiers present at its step.
fn verify_subgoals(scene: &Scene, map: &mut ExplorationMap, ep: &Episode, cfg: &ExplorerConfig, fresh: bool) {
    let mut pose = ep.start_pose;
    if fresh {
        map.update_explored(scene, &observe(scene, &pose, cfg.fov_degrees, cfg.range_m));
    }
    let mut subgoals = ep.subgoals.iter().peekable();
    for (i, &action) in ep.actions.iter().enumerate() {
        while let Some(sg) = subgoals.next_if(|sg| sg.step == i) {
            let reps: Vec<_> = extract_frontiers(map).iter().map(|f| (f.representative.row, f.representative.col)).collect();
            assert!(reps.contains(&(sg.row, sg.col)), "{} seed {}: subgoal {sg:?} not a frontier", ep.scene_id, ep.seed);
        }
        pose = step(scene, &pose, action, &cfg.actions);
        if action != Action::Stop {
            map.update_explored(scene, &observe(scene, &pose, cfg.fov_degrees, cfg.range_m));
        }
    }
    for sg in subgoals {
        assert_eq!(sg.step, ep.actions.len());
        let reps: Vec<_> = extract_frontiers(map).iter().map(|f| (f.representative.row, f.representative.col)).collect();
        assert!(reps.contains(&(sg.row, sg.col)));
    }
    assert_eq!(pose, ep.final_pose, "replay diverged");
    if ep.outcome.success {
        assert!(check_success(&pose, ep.target.x, ep.target.y));
        assert_eq!(ep.actions.last(), Some(&Action::Stop));
    }
}

#[test]
fn ovon_episodes_replay_and_subgoals_verify() {
    let cfg = ExplorerConfig::default();
    let mut with_subgoals = 0;
    for s in 0..20 {
        let scene = generate_scene(1000 + s, &SceneParams::default()).unwrap();
        for e in 0..3 {
            let ep = generate_ovon_episode(&scene, episode_seed(scene.scene_id(), e), &cfg).unwrap();
            let mut map = ExplorationMap::for_scene(&scene);
            verify_subgoals(&scene, &mut map, &ep, &cfg, true);
            assert_eq!(ep.frames.len(), ep.actions.iter().filter(|&&a| a != Action::Stop).count() + 1);
            assert!(ep.outcome.shortest_length > 0.0);
            with_subgoals += usize::from(!ep.subgoals.is_empty());
        }
    }
    assert!(with_subgoals > 0);
}

#[test]
fn goat_subtasks_replay_on_the_shared_map() {
    let cfg = GoatConfig::default();
    for s in 0..10 {
        let scene = generate_scene(2000 + s, &SceneParams::default()).unwrap();
        let g = generate_goat_sequence(&scene, s, 4, 200, &cfg).unwrap();
        let mut map = ExplorationMap::for_scene(&scene);
        for (k, ep) in g.subtasks.iter().enumerate() {
            verify_subgoals(&scene, &mut map, ep, &cfg.explorer, k == 0);
            assert_eq!(ep.memory_length, Some(200));
        }
        for pair in g.subtasks.windows(2) {
            assert_eq!(pair[0].final_pose, pair[1].start_pose);
        }
    }
}

#[test]
fn unseen_target_forces_exploration() {
    let scene = generate_scene(3, &SceneParams::default()).unwrap();
    let cats = scene.categories();
    let mut checked = 0;
    for seed in 0..40 {
        let probe = generate_goat_sequence(&scene, seed, 2, 500, &GoatConfig::default()).unwrap();
        let seen: Vec<&String> = probe.subtasks[0].frames.iter().flat_map(|f| f.categories.iter()).collect();
        let Some(unseen) = cats.iter().find(|c| !seen.contains(c)) else { continue };
        let targets = vec![probe.subtasks[0].target.category.clone(), unseen.clone()];
        let g = generate_goat_sequence(&scene, seed, 2, 500, &GoatConfig { targets: Some(targets), ..GoatConfig::default() }).unwrap();
        assert!(!g.subtasks[1].recalled);
        assert!(!g.subtasks[1].subgoals.is_empty() || g.subtasks[1].frames.first().is_some_and(|f| f.categories.contains(unseen)));
        checked += 1;
    }
    assert!(checked > 0);
}

#[test]
fn memory_beats_memoryless_on_revisits() {
    let mut mem_outcomes = vec![];
    let mut blind_outcomes = vec![];
    for s in 0..50u64 {
        let scene = generate_scene(5000 + s, &SceneParams::default()).unwrap();
        let cfg = GoatConfig { target_policy: TargetPolicy::Revisit, ..GoatConfig::default() };
        let found = (0..20u64).find_map(|seed| {
            let g = generate_goat_sequence(&scene, seed, 2, 500, &cfg).unwrap();
            let target = &g.subtasks[1].target.category;
            let seen = g.subtasks[0].frames.iter().any(|f| f.categories.contains(target));
            seen.then_some((seed, g))
        });
        let (seed, g) = found.expect("a revisit sequence exists");
        let second = &g.subtasks[1];
        assert!(second.recalled, "scene {s}: memory agent did not recall");
        assert!(second.subgoals.is_empty(), "scene {s}: memory agent explored");
        let blind_cfg = GoatConfig { use_memory: false, targets: Some(g.targets()), ..cfg.clone() };
        let blind = generate_goat_sequence(&scene, seed, 2, 500, &blind_cfg).unwrap();
        assert_eq!(blind.subtasks[0], g.subtasks[0], "first subtasks must be identical");
        mem_outcomes.push(second.to_outcome());
        blind_outcomes.push(blind.subtasks[1].to_outcome());
    }
    let (m, b) = (spl(&mem_outcomes).unwrap(), spl(&blind_outcomes).unwrap());
    assert!(m > b, "memory SPL {m} vs memoryless {b}");
}

#[test]
fn dataset_file_round_trip_is_sorted() {
    let scene = generate_scene(9, &SceneParams::default()).unwrap();
    let cfg = ExplorerConfig::default();
    let mut eps: Vec<Episode> = (0..4).map(|e| generate_ovon_episode(&scene, episode_seed(scene.scene_id(), e), &cfg).unwrap()).collect();
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.jsonl"), dir.path().join("b.jsonl"));
    write_dataset(&eps, &a).unwrap();
    eps.reverse();
    write_dataset(&eps, &b).unwrap();
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let back = read_dataset(&a).unwrap();
    eps.sort_by_key(|e| e.seed);
    assert_eq!(back, eps);
}
