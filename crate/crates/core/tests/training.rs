use popart::config::{Mode, RunConfig, Variant};
use popart::checkpoint::Checkpoint;
use popart::experiment::{compute_references, evaluate_checkpoint, make_agent_config, aggregate};
use popart::runtime::{assigned_task, initial_state, run_training, Learner, NoObserver, StepMetrics};
use popart::taskworld::{Suite, TaskSpec};

fn small(frames: u64) -> RunConfig {
    RunConfig {
        frames,
        hidden: 16,
        mode: Mode::Synchronous,
        ..RunConfig::default()
    }
}

#[test]
fn round_robin_covers_every_task() {
    let tasks: Vec<usize> = (0..12).map(|id| assigned_task(id, 6)).collect();
    assert_eq!(tasks, [0, 1, 2, 3, 4, 5, 0, 1, 2, 3, 4, 5]);
}

#[test]
fn zero_budget_returns_initial_state() {
    let suite = Suite::scale6();
    let cfg = small(0);
    let agent = make_agent_config(Variant::PopArt);
    let out = run_training(&cfg, &suite, agent, None, &mut NoObserver).unwrap();
    assert_eq!(out.learner.steps(), 0);
    assert_eq!(out.learner.state.params, initial_state(&cfg, &suite, &agent).params);
}

#[test]
fn batches_visit_all_tasks_in_sync_mode() {
    let suite = Suite::scale6();
    let cfg = RunConfig {
        batch_size: 6,
        ..small(6 * 20 * 10)
    };
    let mut seen = vec![0usize; suite.len()];
    let mut observer = |m: &StepMetrics, _: &Learner| {
        assert_eq!(m.staleness, 0.0);
        for (t, sigma) in m.sigma.iter().enumerate() {
            if *sigma != 1.0 {
                seen[t] += 1;
            }
        }
        Ok(())
    };
    let out = run_training(&cfg, &suite, make_agent_config(Variant::PopArt), None, &mut observer).unwrap();
    assert_eq!(out.learner.frames(), 1200);
    assert!(seen.iter().all(|&k| k > 0), "{seen:?}");
}

#[test]
fn frozen_statistics_never_move() {
    let suite = Suite::scale6();
    let out = run_training(&small(4000), &suite, make_agent_config(Variant::MultiHead), None, &mut NoObserver).unwrap();
    for s in out.learner.state.stats.iter() {
        assert_eq!((s.mu, s.nu), (0.0, 1.0));
    }
    let out = run_training(&small(4000), &suite, make_agent_config(Variant::Baseline), None, &mut NoObserver).unwrap();
    assert_eq!(out.learner.params().arch().heads, 1);
}

#[test]
fn free_running_accounts_for_every_rollout() {
    let suite = Suite::scale6();
    for actors in [1, 3, 12] {
        let cfg = RunConfig {
            mode: Mode::FreeRunning,
            actors,
            queue_capacity: 2,
            ..small(8000)
        };
        let out = run_training(&cfg, &suite, make_agent_config(Variant::PopArt), None, &mut NoObserver).unwrap();
        let a = out.accounting;
        assert_eq!(a.enqueued, a.consumed + a.discarded, "{a:?}");
        assert!(out.learner.frames() >= 8000);
    }
}

#[test]
fn resuming_from_a_checkpoint_continues_training() {
    let dir = tempfile::tempdir().unwrap();
    let suite = Suite::new("two", vec![TaskSpec::chain(0, 4, 1.0), TaskSpec::chain(1, 4, 10.0)]).unwrap();
    let cfg = RunConfig {
        suite: "two".into(),
        ..small(2000)
    };
    let agent = make_agent_config(Variant::PopArt);
    let first = run_training(&cfg, &suite, agent, None, &mut NoObserver).unwrap();
    let ckpt = Checkpoint {
        variant: Variant::PopArt,
        suite: "two".into(),
        steps: first.learner.steps(),
        frames: first.learner.frames(),
        state: first.learner.state,
    };
    let path = dir.path().join("a.ckpt");
    ckpt.write(&path).unwrap();
    let restored = Checkpoint::read(&path).unwrap();
    assert_eq!(restored.state.params, ckpt.state.params);
    let second = run_training(&cfg, &suite, agent, Some(restored.state), &mut NoObserver).unwrap();
    assert!(second.learner.steps() > 0);
    assert_ne!(second.learner.state.params, ckpt.state.params);
}

#[test]
fn mismatched_state_is_rejected() {
    let scale6 = Suite::scale6();
    let pbt2 = Suite::pbt2();
    let agent = make_agent_config(Variant::PopArt);
    let state = initial_state(&small(0), &pbt2, &agent);
    assert!(run_training(&small(100), &scale6, agent, Some(state), &mut NoObserver).is_err());
}

#[test]
fn initial_policy_scores_like_random() {
    let suite = Suite::scale6();
    let agent = make_agent_config(Variant::PopArt);
    let ckpt = Checkpoint {
        variant: Variant::PopArt,
        suite: suite.name.clone(),
        steps: 0,
        frames: 0,
        state: initial_state(&small(0), &suite, &agent),
    };
    let refs = compute_references(&suite, 4000, 0).unwrap();
    let records = evaluate_checkpoint(&ckpt, &suite, &refs, 4000, 5).unwrap();
    let agg = aggregate(&records).unwrap();
    assert!(agg.median_normalized.abs() < 0.05, "{records:?}");
}
