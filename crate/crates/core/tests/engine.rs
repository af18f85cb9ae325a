//! Structural properties of the episode pipeline, checked on logs from real
//! simulations and on runs with hand-rigged networks.

use std::collections::HashSet;

use ipdsim::agents::{Ability, AgentBrain, AgentId, RepSources};
use ipdsim::game::{Action, PunishDecision, RewardScheme};
use ipdsim::metrics::episode_metrics;
use ipdsim::sim::{assign_punishers, pair_agents, EpisodeLog, MechanismConfig, Mode, Pairing, PunishmentKind, Simulation};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const ALL_MODES: [Mode; 7] = [Mode::Dp, Mode::DpS, Mode::Tpp, Mode::TppS, Mode::Tppdp, Mode::TppdpS, Mode::None];

fn short(mode: Mode, episodes: u64, seed: u64) -> MechanismConfig {
    let mut cfg = MechanismConfig::new(mode);
    cfg.episodes = episodes;
    cfg.seed = seed;
    cfg
}

fn logs(cfg: MechanismConfig) -> Vec<EpisodeLog> {
    let mut sim = Simulation::new(cfg).unwrap();
    let mut out = Vec::new();
    while !sim.is_finished() {
        out.push(sim.run_episode().unwrap());
    }
    out
}

#[test]
fn no_self_pairing_in_100k_pairings() {
    for mode in [Mode::Tpp, Mode::TppS] {
        let cfg = short(mode, 1000, 3);
        let sim = Simulation::new(cfg.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let reps = vec![0; cfg.population_size];
        let mut count = 0;
        // episode 0 keeps the select models maximally exploratory
        while count < 100_000 {
            for p in pair_agents(&cfg, sim.brains(), &reps, 0, &mut rng).unwrap() {
                assert_ne!(p.selector, p.partner);
                count += 1;
            }
        }
    }
}

#[test]
fn random_pairing_is_uniform_over_others() {
    let cfg = short(Mode::None, 10, 0);
    let sim = Simulation::new(cfg.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut counts = [[0usize; 5]; 5];
    for _ in 0..20_000 {
        for p in pair_agents(&cfg, sim.brains(), &[0; 5], 0, &mut rng).unwrap() {
            counts[p.selector.0][p.partner.0] += 1;
        }
    }
    for (i, row) in counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if i == j {
                assert_eq!(c, 0);
            } else {
                // expectation 5000, sd ~61
                assert!((4700..5300).contains(&c), "{i}->{j}: {c}");
            }
        }
    }
}

#[test]
fn third_party_punishers_stay_outside_the_pair() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in [4, 5, 9] {
        for _ in 0..5000 {
            let p = Pairing {
                selector: AgentId(0),
                partner: AgentId(n - 1),
            };
            let a = assign_punishers(Mode::Tpp, n, p, &mut rng).unwrap();
            assert_eq!(a.len(), 2);
            assert_ne!(a[0].punisher, a[1].punisher);
            for x in &a {
                assert!(!p.contains(x.punisher));
                assert_eq!(x.kind, PunishmentKind::ThirdParty);
            }
            let targets: HashSet<_> = a.iter().map(|x| x.target).collect();
            assert_eq!(targets.len(), 2);
        }
    }
    let p = Pairing {
        selector: AgentId(0),
        partner: AgentId(1),
    };
    assert!(assign_punishers(Mode::Tpp, 3, p, &mut rng).is_err());
    let dp = assign_punishers(Mode::Dp, 5, p, &mut rng).unwrap();
    assert_eq!(dp.len(), 2);
    assert_eq!((dp[0].punisher, dp[0].target), (AgentId(1), AgentId(0)));
    assert_eq!((dp[1].punisher, dp[1].target), (AgentId(0), AgentId(1)));
}

#[test]
fn opportunity_counts_and_assignment_roles_in_full_runs() {
    for mode in ALL_MODES {
        for log in logs(short(mode, 30, 11)) {
            assert_eq!(log.pairings.len(), 5);
            assert_eq!(log.rounds.len(), 5 * 10);
            for k in 0..5 {
                let rounds: Vec<usize> = log.rounds.iter().filter(|r| r.pairing_index == k).map(|r| r.round).collect();
                assert_eq!(rounds, (0..10).collect::<Vec<_>>());
            }
            for r in &log.rounds {
                let expected = match mode {
                    Mode::Dp | Mode::DpS | Mode::Tpp | Mode::TppS => 2,
                    Mode::Tppdp | Mode::TppdpS => 4,
                    Mode::None => 0,
                };
                assert_eq!(r.punishments.len(), expected, "{mode}");
                for ev in &r.punishments {
                    let a = ev.assignment;
                    assert!(r.pairing.contains(a.target));
                    match a.kind {
                        PunishmentKind::Direct => {
                            assert!(mode.has_direct());
                            assert!(r.pairing.contains(a.punisher) && a.punisher != a.target);
                        }
                        PunishmentKind::ThirdParty => {
                            assert!(mode.has_third_party());
                            assert!(!r.pairing.contains(a.punisher));
                        }
                    }
                    let target_action = if a.target == r.pairing.selector { r.actions.0 } else { r.actions.1 };
                    assert_eq!(ev.target_action, target_action);
                }
            }
        }
    }
}

/// Reward and reputation totals recomputed from the round logs alone.
fn replay_totals(log: &EpisodeLog, scheme: RewardScheme, sources: RepSources) -> (i64, Vec<i64>) {
    let rules = scheme.rules();
    let mut reward = 0;
    let mut rep = vec![0i64; log.population_size()];
    for r in &log.rounds {
        let pay = |a: Action, b: Action| match (a, b) {
            (Action::Cooperate, Action::Cooperate) => 3,
            (Action::Cooperate, Action::Defect) => 0,
            (Action::Defect, Action::Cooperate) => 4,
            (Action::Defect, Action::Defect) => 1,
        };
        reward += pay(r.actions.0, r.actions.1) + pay(r.actions.1, r.actions.0);
        if matches!(sources, RepSources::PlayOnly | RepSources::Both) {
            let d = |a: Action| if a == Action::Cooperate { 1 } else { -1 };
            rep[r.pairing.selector.0] += d(r.actions.0);
            rep[r.pairing.partner.0] += d(r.actions.1);
        }
        for ev in &r.punishments {
            if ev.decision == PunishDecision::Punish {
                let just = ev.target_action == Action::Defect;
                reward += -rules.punisher_cost - rules.punished_penalty + if just { rules.just_bonus } else { 0 };
                if matches!(sources, RepSources::PunishOnly | RepSources::Both) {
                    rep[ev.assignment.punisher.0] += if just { 2 } else { -3 };
                }
            }
        }
    }
    (reward, rep)
}

#[test]
fn accounting_identities_hold_every_episode() {
    for mode in ALL_MODES {
        for (scheme, sources) in [
            (RewardScheme::Scheme2, RepSources::Both),
            (RewardScheme::Scheme1, RepSources::PlayOnly),
            (RewardScheme::Scheme2, RepSources::PunishOnly),
        ] {
            let mut cfg = short(mode, 40, 2);
            cfg.scheme = scheme;
            cfg.encoding.rep_sources = sources;
            let mut prev: Option<EpisodeLog> = None;
            let mut prev_societal_rep = 0.0;
            for log in logs(cfg) {
                let m = episode_metrics(&log, prev.as_ref(), mode);
                let (reward, rep_deltas) = replay_totals(&log, scheme, sources);
                assert_eq!(m.societal_reward, reward as f64);
                assert_eq!(log.logged_reward_total(), reward);
                assert_eq!(log.agent_rep_deltas, rep_deltas);
                let delta: i64 = rep_deltas.iter().sum();
                assert_eq!(m.societal_reputation, prev_societal_rep + delta as f64);
                for i in 0..log.population_size() {
                    assert_eq!(log.reputations_end[i], log.reputations_start[i] + rep_deltas[i]);
                }
                prev_societal_rep = m.societal_reputation;
                prev = Some(log);
            }
        }
    }
}

#[test]
fn none_mode_never_punishes() {
    let mut sim = Simulation::new(short(Mode::None, 20, 4)).unwrap();
    let logs: Vec<_> = (0..20).map(|_| sim.run_episode().unwrap()).collect();
    assert!(logs.iter().all(|l| l.punishment_events().next().is_none()));
    for b in sim.brains() {
        assert!(b.model(Ability::Punish).is_none());
        assert!(b.model(Ability::Select).is_none());
        assert_eq!(b.model(Ability::Play).unwrap().buffer().len() % 10, 0);
    }
}

fn zero_with_bias(brain: &mut AgentBrain, ability: Ability, bias: &[f64]) {
    let net = brain.model_mut(ability).unwrap().online_mut();
    let n = net.num_params();
    let p = net.params_mut();
    p.iter_mut().for_each(|x| *x = 0.0);
    p[n - bias.len()..].copy_from_slice(bias);
}

/// Greedy agents that never train during the test.
fn frozen(mode: Mode, n: usize) -> MechanismConfig {
    let mut cfg = short(mode, 5, 0);
    cfg.population_size = n;
    for m in [&mut cfg.models.select, &mut cfg.models.play, &mut cfg.models.punish] {
        m.eps_max = 0.0;
        m.eps_min = 0.0;
        m.trainer.batch_size = 1 << 30;
    }
    cfg
}

#[test]
fn rigged_cooperators_earn_six_per_pairing_round() {
    let mut sim = Simulation::new(frozen(Mode::Tppdp, 5)).unwrap();
    for b in sim.brains_mut() {
        zero_with_bias(b, Ability::Play, &[1.0, 0.0]);
        zero_with_bias(b, Ability::Punish, &[1.0, 0.0]);
    }
    let log = sim.run_episode().unwrap();
    assert!(log.rounds.iter().all(|r| r.actions == (Action::Cooperate, Action::Cooperate)));
    assert!(log.punishment_events().all(|e| e.decision == PunishDecision::NoPunish));
    assert_eq!(log.societal_reward(), 5 * 10 * 6);
    assert!(log.punishment_events().all(|e| e.deltas.punisher_reward == 0 && e.deltas.punished_reward == 0));
}

#[test]
fn rigged_defector_punished_by_its_partner() {
    let mut sim = Simulation::new(frozen(Mode::Dp, 2)).unwrap();
    let brains = sim.brains_mut();
    zero_with_bias(&mut brains[0], Ability::Play, &[0.0, 1.0]);
    zero_with_bias(&mut brains[0], Ability::Punish, &[1.0, 0.0]);
    zero_with_bias(&mut brains[1], Ability::Play, &[1.0, 0.0]);
    zero_with_bias(&mut brains[1], Ability::Punish, &[0.0, 1.0]);
    let log = sim.run_episode().unwrap();
    // two pairings, ten rounds each; in every one the defector nets 4 - 3
    // and the cooperator 0 - 10 + 12
    assert_eq!(log.agent_rewards, vec![20 * 1, 20 * 2]);
    for r in &log.rounds {
        let punishes: Vec<_> = r.punishments.iter().filter(|e| e.punished()).collect();
        assert_eq!(punishes.len(), 1);
        assert_eq!(punishes[0].assignment.punisher, AgentId(1));
        assert_eq!(punishes[0].deltas.punisher_reward, 2);
        assert_eq!(punishes[0].deltas.punished_reward, -3);
    }
    // +2 per just punishment, -1 per defection for agent 0, +1 per cooperation
    assert_eq!(log.reputations_end, vec![-20, 20 + 2 * 20]);

    // the defector's play transitions carry the penalty, the punisher's
    // punish transitions only its own net delta
    let play = sim.brains()[0].model(Ability::Play).unwrap().buffer();
    assert!(play.iter().all(|t| t.reward == 1.0 && t.action == 1));
    let punish = sim.brains()[1].model(Ability::Punish).unwrap().buffer();
    assert_eq!(punish.len(), 20);
    assert!(punish.iter().all(|t| t.reward == 2.0 && t.action == 1));
    assert_eq!(punish.iter().filter(|t| t.is_terminal()).count(), 1);
}

#[test]
fn one_favourite_is_chosen_by_every_other_selector() {
    let mut sim = Simulation::new(frozen(Mode::DpS, 5)).unwrap();
    for b in sim.brains_mut() {
        zero_with_bias(b, Ability::Select, &[0.0, 1.0, 5.0, 2.0, 0.5]);
    }
    let log = sim.run_episode().unwrap();
    let partners: Vec<usize> = log.pairings.iter().map(|p| p.partner.0).collect();
    assert_eq!(partners, vec![2, 2, 3, 2, 2]);
}

#[test]
fn selection_transitions_carry_the_selectors_episode_reward() {
    let mut sim = Simulation::new(short(Mode::TppdpS, 3, 6)).unwrap();
    for _ in 0..3 {
        let log = sim.run_episode().unwrap();
        for p in &log.pairings {
            let buf = sim.brains()[p.selector.0].model(Ability::Select).unwrap().buffer();
            let last = buf.iter().last().unwrap();
            assert_eq!(last.action, p.partner.0);
            assert_eq!(last.reward, log.agent_rewards[p.selector.0] as f64);
            assert!(!last.is_terminal());
        }
    }
    for b in sim.brains() {
        // one selection transition per episode, never more
        assert_eq!(b.model(Ability::Select).unwrap().buffer().len(), 3);
    }
}

#[test]
fn play_transitions_end_each_pairing_with_a_terminal() {
    let mut sim = Simulation::new(short(Mode::Dp, 4, 1)).unwrap();
    let mut pairings_per_agent = [0usize; 5];
    for _ in 0..4 {
        let log = sim.run_episode().unwrap();
        for p in &log.pairings {
            pairings_per_agent[p.selector.0] += 1;
            pairings_per_agent[p.partner.0] += 1;
        }
    }
    for (i, b) in sim.brains().iter().enumerate() {
        let buf = b.model(Ability::Play).unwrap().buffer();
        assert_eq!(buf.len(), 10 * pairings_per_agent[i]);
        assert_eq!(buf.iter().filter(|t| t.is_terminal()).count(), pairings_per_agent[i]);
    }
}

#[test]
fn first_episode_select_state_is_zero() {
    let cfg = short(Mode::TppS, 2, 0);
    let sim = Simulation::new(cfg.clone()).unwrap();
    assert!(sim.reputations().iter().all(|&r| r == 0));
    let s = cfg.encoding.encode_select_state(sim.reputations(), 0);
    assert_eq!(s, vec![0.0; 5]);
}
