use embal_core::agents::{Action, Agent, EpisodeContext, ExplorerKind, Observation};
use embal_core::harness::*;
use embal_core::rng::Rng;
use embal_core::world::{generate_world, GenParams, GridWorld, MovementAction};

fn world(seed: u64) -> GridWorld {
    generate_world(seed, &GenParams::default()).unwrap()
}

fn run(world: &GridWorld, kind: ExplorerKind, regime: Regime) -> EpisodeOutcome {
    let cfg = EpisodeConfig::new(world.seed, 1, regime);
    let spec = AgentSpec::baseline(kind);
    let ctx = EpisodeContext {
        world,
        start: sample_start(world, 1),
        radius: cfg.radius,
    };
    let mut agent = spec.build(&ctx).unwrap();
    run_episode_detailed(world, &cfg, &spec.name(), agent.as_mut(), None).unwrap()
}

/// Replays a fixed action script, then rotates in place.
struct Scripted(Vec<Action>);

impl Agent for Scripted {
    fn act(&mut self, obs: &Observation<'_>, _rng: &mut Rng) -> Action {
        self.0
            .get(obs.step_index)
            .copied()
            .unwrap_or(Action::Move(MovementAction::RotateLeft))
    }
}

#[test]
fn rotate_never_leaves_the_start_cell() {
    let w = world(30_001);
    let out = run(&w, ExplorerKind::Rotate, Regime::Steps(96));
    let start = out.record.start.position();
    assert!(out.record.steps.iter().all(|s| s.pose.position() == start));
}

#[test]
fn budget_regime_stops_at_the_budget() {
    let w = world(30_002);
    let out = run(&w, ExplorerKind::Bounce, Regime::Budget(100));
    assert_eq!(out.record.n_annotate, 100);
    assert_eq!(out.record.steps.last().unwrap().action, Action::Annotate);
    assert!(out.record.n_steps < out.record.config.safety_cap);
}

#[test]
fn episodes_replay_bit_identically() {
    let w = world(30_003);
    for kind in [ExplorerKind::Random, ExplorerKind::Frontier] {
        let a = run(&w, kind, Regime::Steps(80)).record;
        let b = run(&w, kind, Regime::Steps(80)).record;
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }
}

#[test]
fn return_is_the_sum_of_logged_parts_and_telescopes() {
    let w = world(30_004);
    let r = run(&w, ExplorerKind::Bounce, Regime::Steps(128)).record;
    let mut total = 0.0;
    for s in &r.steps {
        total += s.reward.total();
    }
    assert_eq!(total, r.total_return);

    let eps = r.config.reward.eps_ann;
    let perception: f64 = r.steps.iter().map(|s| s.reward.perception).sum();
    let terminal = r.steps.last().unwrap().reward.terminal;
    assert!((perception + eps * r.n_annotate as f64 - terminal).abs() < 1e-9);
    assert!((terminal - (r.final_reward_miou - r.initial_reward_miou)).abs() < 1e-15);
    for s in &r.steps {
        if !matches!(s.action, Action::Move(_)) {
            assert_eq!(s.reward.exploration, 0.0);
        }
    }
}

#[test]
fn reference_views_never_enter_the_training_pool() {
    let w = world(30_005);
    let out = run(&w, ExplorerKind::Frontier, Regime::Steps(128));
    for lv in out.trainset.views() {
        for rv in &out.reference.views {
            assert!(lv.view.pose != rv.pose || lv.view.features != rv.features);
        }
    }
    assert!(out.trainset.len() > 1);
}

#[test]
fn curve_is_monotone_and_logs_each_perception_action_once() {
    let w = world(30_006);
    let r = run(&w, ExplorerKind::SpaceFiller, Regime::Steps(160)).record;
    assert_eq!(r.curve[0].step, 0);
    for pair in r.curve.windows(2) {
        assert!(pair[0].step < pair[1].step);
        assert!(pair[0].n_annotate <= pair[1].n_annotate);
        assert!(pair[0].n_collect <= pair[1].n_collect);
    }
    let perception_steps: Vec<usize> = r
        .steps
        .iter()
        .filter(|s| s.action.is_perception())
        .map(|s| s.step + 1)
        .collect();
    let logged: Vec<usize> = r
        .curve
        .windows(2)
        .filter(|p| p[1].n_annotate + p[1].n_collect > p[0].n_annotate + p[0].n_collect)
        .map(|p| p[1].step)
        .collect();
    assert_eq!(perception_steps, logged);
    let last = r.curve.last().unwrap();
    assert_eq!(
        (last.n_annotate, last.n_collect),
        (r.n_annotate, r.n_collect)
    );
}

#[test]
fn collect_without_known_labels_becomes_annotate() {
    let w = world(30_007);
    // Twelve 15 degree turns face away from everything the initial view labelled.
    let cfg = EpisodeConfig::new(w.seed, 2, Regime::Steps(14));
    let mut agent = Scripted(
        std::iter::repeat_n(Action::Move(MovementAction::RotateLeft), 12)
            .chain([Action::Collect, Action::Collect])
            .collect(),
    );
    let r = run_episode(&w, &cfg, "scripted", &mut agent, None).unwrap();
    assert_eq!(r.steps[11].unknown_fraction, 1.0);
    assert_eq!(r.steps[12].action, Action::Annotate);
    assert!(r.steps[12].collect_converted);
    assert_eq!(r.steps[13].action, Action::Collect);
    assert!(!r.steps[13].collect_converted);
    assert_eq!((r.n_annotate, r.n_collect), (1, 1));
}

#[test]
fn records_round_trip_through_versioned_json() {
    let w = world(30_008);
    let r = run(&w, ExplorerKind::Bounce, Regime::Steps(48)).record;
    let text = r.to_json().unwrap();
    assert_eq!(EpisodeRecord::from_json(&text).unwrap(), r);
    let mut v: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["version"], RECORD_VERSION);
    v["version"] = (RECORD_VERSION + 1).into();
    assert!(EpisodeRecord::from_json(&v.to_string()).is_err());
}

#[test]
fn all_agents_share_start_and_reference_views() {
    let w = world(30_009);
    let a = run(&w, ExplorerKind::Random, Regime::Steps(16)).record;
    let b = run(&w, ExplorerKind::SpaceFiller, Regime::Steps(16)).record;
    assert_eq!(a.start, b.start);
    assert_eq!(a.reference_poses, b.reference_poses);
    assert_eq!(a.reward_classes, b.reward_classes);
    assert_eq!(a.curve[0], b.curve[0]);
}
