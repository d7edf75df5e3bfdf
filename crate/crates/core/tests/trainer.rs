use pia3c::env::{generate_board, Action, BoardConfig};
use pia3c::mcts::{search, SearchConfig};
use pia3c::network::{NetParams, NetShape};
use pia3c::seeding;
use pia3c::trainer::{collect_segment, train, StopCondition, TrainerConfig, WorkerKind, LEARNER};

fn config(workers: usize, demos: usize, stop: StopCondition) -> TrainerConfig {
    TrainerConfig {
        board: BoardConfig::new(6),
        num_workers: workers,
        num_demonstrators: demos,
        t_max: 8,
        search: SearchConfig { rollout_budget: 12, ..SearchConfig::default() },
        stop,
        record_wall_clock: false,
        ..TrainerConfig::default()
    }
}

#[test]
fn demonstrator_executes_the_search_output() {
    let c = config(2, 1, StopCondition { max_updates: Some(1), ..StopCondition::default() });
    let params = NetParams::init(NetShape::new(6), 3);
    let start = generate_board(17, &c.board).unwrap();

    let mut state = start.clone();
    let mut rng = seeding::rng(99);
    let seg = collect_segment(&c, WorkerKind::Demonstrator, &params, &mut state, &mut rng).unwrap();
    let planner = seg.traj.planner_actions.clone().expect("demonstrator segment carries planner actions");
    assert_eq!(planner, seg.traj.actions());

    // replay the same rng stream: the static opponent draws nothing
    let mut check = start;
    let mut rng = seeding::rng(99);
    for step in &seg.traj.steps {
        let a = search(&check, LEARNER, &c.search, Some(&params), &mut rng).unwrap().action;
        assert_eq!(a, step.action);
        check.advance([a, Action::Stop]).unwrap();
    }
    assert_eq!(check, state);
}

#[test]
fn model_free_segments_never_carry_imitation() {
    let c = config(1, 0, StopCondition { max_updates: Some(1), ..StopCondition::default() });
    let params = NetParams::init(NetShape::new(6), 3);
    let mut state = generate_board(5, &c.board).unwrap();
    let seg = collect_segment(&c, WorkerKind::ModelFree, &params, &mut state, &mut seeding::rng(1)).unwrap();
    assert!(seg.traj.planner_actions.is_none());
    assert!(seg.traj.len() >= 1 && seg.traj.len() <= c.t_max);
    assert_eq!(seg.traj.terminal, seg.outcome.is_some());
}

#[test]
fn without_demonstrators_every_record_is_model_free() {
    let c = config(3, 0, StopCondition { max_model_free_episodes: Some(20), ..StopCondition::default() });
    let mut records = Vec::new();
    let s = train(&c, NetParams::init(NetShape::new(6), 0), |r, _| records.push(r.clone())).unwrap();
    assert_eq!(records.len(), 20);
    assert_eq!(s.demonstrator_episodes, 0);
    for r in &records {
        assert_eq!(r.worker_kind, WorkerKind::ModelFree);
        assert!(r.loss.imitation.is_none());
    }
    let mut order: Vec<u64> = records.iter().map(|r| r.model_free_episode.unwrap()).collect();
    order.sort_unstable();
    assert_eq!(order, (1..=20).collect::<Vec<_>>());
}

#[test]
fn demonstrator_episodes_report_imitation_loss() {
    let c = config(2, 1, StopCondition { max_updates: Some(400), ..StopCondition::default() });
    let mut demo = Vec::new();
    train(&c, NetParams::init(NetShape::new(6), 0), |r, _| {
        if r.worker_kind == WorkerKind::Demonstrator {
            demo.push(r.clone());
        }
    })
    .unwrap();
    assert!(!demo.is_empty(), "no demonstrator episode finished");
    assert!(demo.iter().all(|r| r.loss.imitation.is_some() && r.model_free_episode.is_none()));
}

#[test]
fn jittered_workers_account_for_every_update() {
    let c = TrainerConfig {
        t_max: 2,
        jitter_us: 300,
        ..config(8, 1, StopCondition { max_updates: Some(600), ..StopCondition::default() })
    };
    let s = train(&c, NetParams::init(NetShape::new(6), 1), |_, _| {}).unwrap();
    assert_eq!(s.counts.version, 600);
    assert_eq!(s.counts.submitted, s.counts.version + s.counts.skipped + s.counts.refused);
    assert_eq!(s.counts.skipped, 0);
    assert!(s.params.all_finite());
}
