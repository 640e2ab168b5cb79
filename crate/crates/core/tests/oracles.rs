//! Server handlers and the explorer checked against independent, naive
//! reimplementations over exhaustive small input spaces.

use std::collections::{HashMap, HashSet, VecDeque};

use raft_xplore::checker::{explore, export_lts, ExploreOptions};
use raft_xplore::network::Rpc;
use raft_xplore::server::{
    self, handle_append_entries_response, handle_request_vote_request, PeerIndex,
};
use raft_xplore::{
    enabled_transitions, initial_state, Config, GlobalState, InjectedBug, Limits, Log,
    NetworkModel, Role, ServerId, Term,
};

fn all_logs(max_len: usize, max_term: u8) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<Vec<u8>> = vec![Vec::new()];
    for _ in 0..max_len {
        let next: Vec<Vec<u8>> = frontier
            .iter()
            .flat_map(|l| {
                (1..=max_term).map(move |t| {
                    let mut l = l.clone();
                    l.push(t);
                    l
                })
            })
            .collect();
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

#[test]
fn vote_grant_matches_lexicographic_comparison() {
    let cfg = Config::new(3, 3, 1).unwrap();
    let me = ServerId(2);
    let candidate = ServerId(1);
    let mut cases = 0;
    for log in all_logs(3, 2) {
        for voted in [ServerId::NIL, candidate, ServerId(3)] {
            let mut s = server::init_server(me, &cfg).unwrap();
            s.log = Log::from_terms(&log);
            s.current_term = Term(2);
            s.voted_for = voted;
            let mine = (log.last().copied().unwrap_or(0), log.len());
            for cand_term in 0..=3u8 {
                for cand_index in 0..=4u8 {
                    cases += 1;
                    let up_to_date = (cand_term, cand_index as usize) >= mine;
                    let free = voted == ServerId::NIL || voted == candidate;
                    let expected = up_to_date && free;
                    let step =
                        handle_request_vote_request(&s, candidate, Term(cand_term), cand_index);
                    assert_eq!(
                        step.outbound[0].payload.rpc,
                        Rpc::RequestVoteResponse {
                            vote_granted: expected
                        },
                        "log {log:?} voted {voted:?} candidate ({cand_term}, {cand_index})"
                    );
                    assert_eq!(step.outbound[0].to, candidate);
                    let expected_vote = if expected { candidate } else { voted };
                    assert_eq!(step.next.voted_for, expected_vote);
                    assert_eq!(step.next.log, s.log);
                }
            }
        }
    }
    assert_eq!(cases, 15 * 3 * 4 * 5);
}

/// Highest index a majority holds, found by sorting, then the highest index
/// at or below it whose entry is from the current term.
fn naive_commit(
    log: &[u8],
    term: u8,
    commit: u8,
    leader_len: usize,
    peers: &[u8],
    quorum: usize,
) -> u8 {
    let mut held: Vec<usize> = peers.iter().map(|&m| m as usize).collect();
    held.push(leader_len);
    held.sort_unstable_by(|a, b| b.cmp(a));
    let replicated = held[quorum - 1];
    (commit as usize + 1..=replicated)
        .rev()
        .find(|&n| log[n - 1] == term)
        .map_or(commit, |n| n as u8)
}

fn commit_rule_cases(servers: u32, bug: InjectedBug) -> usize {
    let cfg = Config::new(servers, 2, 3).unwrap().with_bug(bug);
    let leader = ServerId(1);
    let peers: Vec<ServerId> = cfg.server_ids().filter(|&j| j != leader).collect();
    let mut cases = 0;
    for log in all_logs(3, 2) {
        let len = log.len() as u8;
        for term in log.last().copied().unwrap_or(1).max(1)..=2 {
            for commit in 0..=len {
                // every pre-step match map over the peers
                let combos = (len as usize + 1).pow(peers.len() as u32);
                for code in 0..combos {
                    let mut before = vec![0u8; servers as usize];
                    let mut c = code;
                    for p in &peers {
                        before[p.slot()] = (c % (len as usize + 1)) as u8;
                        c /= len as usize + 1;
                    }
                    for their_match in 0..=len {
                        cases += 1;
                        let mut s = server::init_server(leader, &cfg).unwrap();
                        s.role = Role::Leader;
                        s.current_term = Term(term);
                        s.log = Log::from_terms(&log);
                        s.commit_index = commit;
                        s.match_index = PeerIndex::from_slice(&before);
                        let from = peers[0];
                        let step =
                            handle_append_entries_response(&s, from, true, their_match, &cfg);

                        let mut after = before.clone();
                        after[from.slot()] = their_match;
                        let view = if bug == InjectedBug::AdvanceCommitMatchIndexTypo {
                            &before
                        } else {
                            &after
                        };
                        let peer_view: Vec<u8> = peers.iter().map(|p| view[p.slot()]).collect();
                        let expected =
                            naive_commit(&log, term, commit, log.len(), &peer_view, cfg.quorum());
                        assert_eq!(
                            step.next.commit_index, expected,
                            "log {log:?} term {term} commit {commit} match {before:?} -> {after:?}"
                        );
                        assert_eq!(&step.next.match_index[..], &after[..]);
                        assert_eq!(step.next.next_index[from.slot()], their_match + 1);
                        assert!(step.outbound.is_empty());
                    }
                }
            }
        }
    }
    cases
}

#[test]
fn commit_advance_matches_sorted_quorum() {
    assert!(commit_rule_cases(3, InjectedBug::None) > 1000);
    assert!(commit_rule_cases(4, InjectedBug::None) > 1000);
    assert!(commit_rule_cases(5, InjectedBug::None) > 1000);
}

#[test]
fn typo_variant_uses_the_previous_match_map() {
    assert!(commit_rule_cases(3, InjectedBug::AdvanceCommitMatchIndexTypo) > 1000);
}

#[test]
fn only_current_term_entries_commit_by_counting() {
    // Entry 1 is from term 1 and fully replicated, but the leader is in term 2
    // and has no entry of its own yet: nothing commits.
    let cfg = Config::new(3, 2, 1).unwrap();
    let mut s = server::init_server(ServerId(1), &cfg).unwrap();
    s.role = Role::Leader;
    s.current_term = Term(2);
    s.log = Log::from_terms(&[1]);
    let step = handle_append_entries_response(&s, ServerId(2), true, 1, &cfg);
    assert_eq!(step.next.commit_index, 0);
    // Once a term-2 entry is replicated on a majority, both commit.
    s.log = Log::from_terms(&[1, 2]);
    let step = handle_append_entries_response(&s, ServerId(2), true, 2, &cfg);
    assert_eq!(step.next.commit_index, 2);
}

/// Reachable states, edges and terminal states of `cfg`, by a plain BFS over
/// structural states.
fn naive_explore(cfg: &Config) -> (usize, usize, usize, HashMap<GlobalState, usize>) {
    let init = initial_state(cfg);
    let mut dist = HashMap::from([(init.clone(), 0usize)]);
    let mut queue = VecDeque::from([init]);
    let (mut edges, mut terminal) = (0, 0);
    while let Some(g) = queue.pop_front() {
        let d = dist[&g];
        let ts = enabled_transitions(&g, cfg).unwrap();
        if ts.is_empty() {
            terminal += 1;
        }
        for t in ts {
            edges += 1;
            if !dist.contains_key(&t.target) {
                dist.insert(t.target.clone(), d + 1);
                queue.push_back(t.target);
            }
        }
    }
    (dist.len(), edges, terminal, dist)
}

fn small_configs() -> Vec<Config> {
    vec![
        Config::new(1, 1, 0)
            .unwrap()
            .with_network(NetworkModel::Reliable),
        Config::new(1, 2, 2).unwrap(),
        Config::new(2, 1, 0).unwrap(),
        Config::new(2, 1, 1)
            .unwrap()
            .with_network(NetworkModel::Reliable),
        Config::new(2, 2, 0)
            .unwrap()
            .with_network(NetworkModel::Reliable),
        Config::new(2, 2, 0)
            .unwrap()
            .with_network(NetworkModel::Reliable)
            .with_bug(InjectedBug::CandidateNoStepdown),
        Config::new(3, 1, 0)
            .unwrap()
            .with_network(NetworkModel::Reliable),
    ]
}

#[test]
fn explorer_counts_match_naive_bfs() {
    for cfg in small_configs() {
        let (states, edges, terminal, _) = naive_explore(&cfg);
        let e = explore(&cfg, &ExploreOptions::default()).unwrap();
        let r = &e.report;
        assert_eq!(
            (
                r.states_explored as usize,
                r.transitions as usize,
                r.terminal_states as usize
            ),
            (states, edges, terminal),
            "{cfg:?}"
        );
        assert!(!r.truncated);
    }
}

#[test]
fn counterexample_paths_are_shortest() {
    for cfg in small_configs() {
        let (_, _, _, dist) = naive_explore(&cfg);
        let e = explore(&cfg, &ExploreOptions::default()).unwrap();
        let mut seen = HashSet::new();
        for idx in 0..e.report.states_explored as u32 {
            let g = e.state(idx);
            let path = e.path_to(idx).unwrap();
            assert_eq!(path.len(), dist[&g], "{cfg:?} state {idx}");
            assert!(seen.insert(g));
        }
        assert_eq!(seen.len(), dist.len());
        assert_eq!(
            e.report.depth as usize,
            dist.values().copied().max().unwrap()
        );
    }
}

#[test]
fn lts_export_matches_exploration() {
    for cfg in small_configs() {
        let (states, edges, _, _) = naive_explore(&cfg);
        let dot = export_lts(&cfg, Limits::default()).unwrap();
        let header = dot.lines().nth(1).unwrap();
        assert_eq!(
            header,
            format!("// states={states} transitions={edges} truncated=false")
        );
        assert_eq!(dot.lines().filter(|l| l.contains(" -> ")).count(), edges);
        let nodes = dot
            .lines()
            .filter(|l| {
                !l.contains("->")
                    && l.trim_start()
                        .chars()
                        .next()
                        .is_some_and(|c| c.is_ascii_digit())
            })
            .count();
        assert_eq!(nodes, states);
        assert!(dot.lines().any(|l| l == "  0 [shape=doublecircle];"));
    }
}
