//! Property tests over random boards and random play.

use std::collections::HashSet;

use proptest::prelude::*;

use pia3c::env::replay::Replay;
use pia3c::env::{generate_board, Action, BoardConfig, CellKind, GameState, BOMB_LIFE, FLAME_LIFE};
use pia3c::features::{encode, CH_ABILITY, CH_AGENT, CH_FLAME_LIFE, NUM_CHANNELS};
use pia3c::loss::{compute_advantages, entropy, planner_imitation_loss, Step, Trajectory};
use pia3c::network::softmax;
use pia3c::features::FeatureTensor;

fn board(size: usize, seed: u64) -> GameState {
    generate_board(seed, &BoardConfig::new(size)).expect("board")
}

fn actions() -> impl Strategy<Value = Vec<(usize, usize)>> {
    prop::collection::vec((0..6usize, 0..6usize), 1..250)
}

fn step_invariants(before: &GameState, after: &GameState, rewards: [f32; 2], terminal: bool) -> Result<(), TestCaseError> {
    prop_assert_eq!(before.count_kind(CellKind::Rigid), after.count_kind(CellKind::Rigid));
    prop_assert!(after.count_kind(CellKind::Wood) <= before.count_kind(CellKind::Wood));
    prop_assert!(after.timestep() <= after.max_steps());
    let cells: HashSet<_> = after.bombs().iter().map(|b| b.pos).collect();
    prop_assert_eq!(cells.len(), after.bombs().len(), "two bombs share a cell");
    for b in after.bombs() {
        if b.fuse < BOMB_LIFE {
            prop_assert!(
                before.bombs().iter().any(|p| p.owner == b.owner && p.fuse == b.fuse + 1),
                "bomb with fuse {} has no predecessor",
                b.fuse
            );
        }
    }
    prop_assert!(after.flames().all(|f| f.life >= 1 && f.life <= FLAME_LIFE));
    let [a, b] = after.agents();
    if a.alive && b.alive {
        prop_assert_ne!(a.pos, b.pos);
    }
    if !terminal {
        prop_assert_eq!(rewards, [0.0, 0.0]);
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_play_keeps_invariants(seed in any::<u64>(), size in 6usize..=10, acts in actions()) {
        let mut s = board(size, seed);
        let mut total = 0.0;
        for (a, b) in acts {
            if s.is_terminal() {
                break;
            }
            let before = s.clone();
            let info = s.advance([Action::ALL[a], Action::ALL[b]]).unwrap();
            step_invariants(&before, &s, info.rewards, info.terminal)?;
            total += info.rewards[0] + info.rewards[1];
        }
        if s.is_terminal() {
            prop_assert!(total == 0.0 || total == -2.0, "episode reward sum {}", total);
        } else {
            prop_assert_eq!(total, 0.0);
        }
    }

    #[test]
    fn replays_rebuild_identical_traces(seed in any::<u64>(), acts in actions()) {
        let cfg = BoardConfig::new(8);
        let mut s = generate_board(seed, &cfg).unwrap();
        let mut replay = Replay::new(cfg, seed);
        let mut trace = vec![s.clone()];
        for (a, b) in acts {
            if s.is_terminal() {
                break;
            }
            let pair = [Action::ALL[a], Action::ALL[b]];
            s.advance(pair).unwrap();
            replay.push(pair);
            trace.push(s.clone());
        }
        let parsed = Replay::parse(&replay.to_text()).unwrap();
        prop_assert_eq!(parsed.states().unwrap(), trace);
    }

    #[test]
    fn swapping_observer_permutes_agent_planes(seed in any::<u64>(), acts in actions()) {
        let mut s = board(8, seed);
        for (a, b) in acts.into_iter().take(40) {
            if s.is_terminal() {
                break;
            }
            s.advance([Action::ALL[a], Action::ALL[b]]).unwrap();
        }
        let (x, y) = (encode(&s, 0), encode(&s, 1));
        let swapped = |c: usize| match c {
            c if c == CH_AGENT => CH_AGENT + 1,
            c if c == CH_AGENT + 1 => CH_AGENT,
            c if (CH_ABILITY..CH_ABILITY + 3).contains(&c) => c + 3,
            c if (CH_ABILITY + 3..CH_ABILITY + 6).contains(&c) => c - 3,
            c => c,
        };
        for c in 0..NUM_CHANNELS {
            prop_assert_eq!(x.plane(c), y.plane(swapped(c)), "channel {}", c);
        }
    }

    #[test]
    fn feature_values_stay_in_range(seed in any::<u64>(), acts in actions()) {
        let mut s = board(8, seed);
        for (a, b) in acts {
            if s.is_terminal() {
                break;
            }
            s.advance([Action::ALL[a], Action::ALL[b]]).unwrap();
            let t = encode(&s, 0);
            prop_assert!(t.as_slice().iter().all(|v| (0.0..=1.0).contains(v)));
            for c in [0, 1, 2, 3, 6, 8, 9, 10, 11, 12, 13, 14, 15] {
                prop_assert!(t.plane(c).iter().all(|&v| v == 0.0 || v == 1.0), "channel {} not binary", c);
            }
            prop_assert!(t.plane(CH_FLAME_LIFE).iter().all(|&v| v == 0.0 || v == 0.5 || v == 1.0));
        }
    }

    #[test]
    fn policy_losses_are_bounded(logits in prop::array::uniform6(-20.0f64..20.0), planner in prop::collection::vec(0..6usize, 1..8)) {
        let p = softmax(&logits);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let h = entropy(&p);
        prop_assert!(h >= -1e-12 && h <= 6f64.ln() + 1e-12);
        let acts: Vec<Action> = planner.iter().map(|&i| Action::ALL[i]).collect();
        let (l, _) = planner_imitation_loss(&acts, &vec![p; acts.len()]);
        prop_assert!(l >= 0.0 && l <= -(1e-10f64).ln() + 1e-9);
    }

    #[test]
    fn perfect_values_give_zero_advantage(rewards in prop::collection::vec(-1.0f32..1.0, 1..20), bootstrap in -1.0f32..1.0, terminal: bool) {
        // values equal to the discounted returns leave nothing to learn
        let gamma = 0.999;
        let mut ret = if terminal { 0.0 } else { bootstrap as f64 };
        let mut values = vec![0.0f64; rewards.len()];
        for t in (0..rewards.len()).rev() {
            ret = rewards[t] as f64 + gamma * ret;
            values[t] = ret;
        }
        let steps = rewards.iter().zip(&values).map(|(&r, &v)| Step {
            features: FeatureTensor::zeros(6),
            action: Action::Stop,
            reward: r,
            value: v as f32,
            policy: [1.0 / 6.0; 6],
        }).collect();
        let traj = Trajectory { steps, bootstrap, terminal, planner_actions: None };
        for a in compute_advantages(&traj, gamma) {
            prop_assert!(a.abs() < 1e-5, "advantage {}", a);
        }
    }
}
