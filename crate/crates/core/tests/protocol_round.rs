use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pic_core::envelope::{Envelope, KeyEntropy, KeyRng};
use pic_core::geometry::sample_uniform;
use pic_core::protocol::{
    post_message_receive, post_message_send, run_round, server_setup, user_prepare, user_retrieve, Bulletin,
    BulletinEntry, MessageBoard, RoundOptions, UserState,
};
use pic_core::tasks::{build_task, Submission, TaskId, TaskOptions, TaskOutput};
use pic_core::{DomainSpec, Error, LocalRandomizer, Mechanism};

fn users(sizes: &[usize], seed: u64) -> Vec<UserState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let region = DomainSpec::unit_cube(2).region();
    sizes
        .iter()
        .enumerate()
        .flat_map(|(g, &n)| std::iter::repeat_n(g, n))
        .map(|g| UserState::new(g, sample_uniform(&region, &mut rng)))
        .collect()
}

fn randomizer(mechanism: Mechanism) -> LocalRandomizer {
    LocalRandomizer::build(mechanism, DomainSpec::unit_cube(2), 3.0).unwrap()
}

#[test]
fn matching_round_matches_direct_computation() {
    let mut rng = KeyRng::new(KeyEntropy::Deterministic(1));
    let r = randomizer(Mechanism::SquareWave);
    let (params, keys) = server_setup(&["workers", "tasks"], &[r.clone(), r.clone()], TaskId::MaxMatching, &mut rng).unwrap();
    let opts = TaskOptions { tau: Some(0.6), clip: Some(1.0), ..TaskOptions::default() };
    let task = build_task(TaskId::MaxMatching, &opts).unwrap();
    let mut people = users(&[12, 9], 1);
    let mut envelopes = vec![Vec::new(), Vec::new()];
    for u in people.iter_mut() {
        envelopes[u.group_index].push(user_prepare(u, &params, &mut rng).unwrap());
    }
    let (bulletin, transcript) =
        run_round(&envelopes, &params, &keys, task.as_ref(), &[], RoundOptions::default(), &mut rng).unwrap();
    assert!(transcript.view.is_none());

    // the same task on the unshuffled submissions gives each user the same output
    let direct_groups: Vec<Vec<Submission>> = (0..2)
        .map(|g| {
            people
                .iter()
                .filter(|u| u.group_index == g)
                .map(|u| {
                    let raw = u.submitted.clone().unwrap();
                    Submission {
                        public_key: u.public_key().unwrap().as_bytes().to_vec(),
                        estimate: r.debias(&raw).unwrap(),
                        raw,
                    }
                })
                .collect()
        })
        .collect();
    let direct = task.compute(&direct_groups).unwrap();
    let mut idx = [0usize; 2];
    for u in people.iter_mut() {
        let g = u.group_index;
        let got = user_retrieve(&bulletin, u).unwrap();
        assert_eq!(got, direct[g][idx[g]]);
        idx[g] += 1;
        if let TaskOutput::Partners(list) = got {
            assert!(list.len() <= 1);
        }
    }
}

#[test]
fn bulletin_export_round_trips_entries() {
    let mut rng = KeyRng::new(KeyEntropy::Deterministic(2));
    let (params, keys) = server_setup(&["all"], &[randomizer(Mechanism::Laplace)], TaskId::Identity, &mut rng).unwrap();
    let task = build_task(TaskId::Identity, &TaskOptions::default()).unwrap();
    let mut people = users(&[5], 2);
    let envs: Vec<Envelope> = people.iter_mut().map(|u| user_prepare(u, &params, &mut rng).unwrap()).collect();
    let (bulletin, _) = run_round(&[envs], &params, &keys, task.as_ref(), &[], RoundOptions::default(), &mut rng).unwrap();
    assert_eq!(bulletin.entry_count(), 5);
    for e in &bulletin.groups[0] {
        assert_eq!(&BulletinEntry::from_bytes(&e.to_bytes().unwrap()).unwrap(), e);
    }
    assert!(!bulletin.export().unwrap().is_empty());
    // a user from another round finds nothing
    let mut stranger = users(&[1], 9).remove(0);
    assert!(matches!(user_retrieve(&bulletin, &mut stranger), Err(Error::Delivery)));
    assert!(matches!(user_retrieve(&Bulletin::default(), &mut people[0]), Err(Error::Delivery)));
}

#[test]
fn corrupted_envelope_aborts_round() {
    let mut rng = KeyRng::new(KeyEntropy::Deterministic(3));
    let (params, keys) = server_setup(&["all"], &[randomizer(Mechanism::Minkowski)], TaskId::Identity, &mut rng).unwrap();
    let task = build_task(TaskId::Identity, &TaskOptions::default()).unwrap();
    let mut people = users(&[6], 3);
    let mut envs: Vec<Envelope> = people.iter_mut().map(|u| user_prepare(u, &params, &mut rng).unwrap()).collect();
    envs[2].ciphertext[40] ^= 1;
    envs[4].ciphertext.truncate(10);
    let err = run_round(&[envs], &params, &keys, task.as_ref(), &[], RoundOptions::default(), &mut rng).unwrap_err();
    assert!(matches!(err, Error::RoundAborted { failures: 2 }), "{err:?}");
}

#[test]
fn leakage_only_for_corrupted() {
    let mut rng = KeyRng::new(KeyEntropy::Deterministic(4));
    let (params, keys) = server_setup(&["all"], &[randomizer(Mechanism::Staircase)], TaskId::Identity, &mut rng).unwrap();
    let task = build_task(TaskId::Identity, &TaskOptions::default()).unwrap();
    let mut people = users(&[10], 4);
    let envs: Vec<Envelope> = people.iter_mut().map(|u| user_prepare(u, &params, &mut rng).unwrap()).collect();
    let bad: BTreeSet<usize> = [1, 7].into();
    let (_, t) = run_round(&[envs], &params, &keys, task.as_ref(), &[bad], RoundOptions { retain_view: true }, &mut rng)
        .unwrap();
    let view = t.view.unwrap();
    assert_eq!(view.leakage[0].iter().map(|p| p.0).collect::<Vec<_>>(), vec![1, 7]);
    for &(orig, pos) in &view.leakage[0] {
        assert_eq!(view.lists[0][pos].public_key, people[orig].public_key().unwrap().as_bytes());
    }
    assert_eq!(t.counters[0].corrupted, 2);
}

#[test]
fn post_computation_messages() {
    let mut rng = KeyRng::new(KeyEntropy::Deterministic(5));
    let (params, _) = server_setup(&["all"], &[randomizer(Mechanism::Minkowski)], TaskId::Identity, &mut rng).unwrap();
    let mut people = users(&[3], 5);
    for u in people.iter_mut() {
        user_prepare(u, &params, &mut rng).unwrap();
    }
    let mut board = MessageBoard::default();
    let to = people[1].public_key().unwrap().as_bytes().to_vec();
    post_message_send(&people[0], &to, b"meet at the north gate", &mut board, &mut rng).unwrap();
    let inbox = post_message_receive(&board, &people[1]).unwrap();
    assert_eq!(inbox.messages.len(), 1);
    assert_eq!(inbox.messages[0].1, b"meet at the north gate");
    assert!(post_message_receive(&board, &people[2]).unwrap().messages.is_empty());
}
