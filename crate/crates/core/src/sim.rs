//! Event-driven simulation of a linear pipeline with depth-1 buffers.
//!
//! Validation oracle for the analytic makespan formula: each stage processes
//! one item for its service time, a single-slot buffer sits between adjacent
//! stages, and a stage that cannot deposit its finished item blocks until the
//! downstream slot frees. Under these semantics the batch makespan equals
//! `sum(T) + (B - 1) * max(T)` exactly, which the analytic model relies on.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StageState {
    Idle,
    /// Processing; the wrapped value is the completion cycle.
    Busy(u64),
    /// Finished an item but the downstream buffer slot is occupied.
    Blocked,
}

/// Runs the pipeline on `batch` items and returns the cycle the last item
/// leaves the final stage. Items enter stage 0 whenever it is free.
pub fn simulate_stage_pipeline(service: &[u64], batch: u64) -> u64 {
    if service.is_empty() || batch == 0 {
        return 0;
    }
    let n = service.len();
    let mut state = vec![StageState::Idle; n];
    // buffer[i] sits between stage i and stage i+1
    let mut buffer = vec![false; n.saturating_sub(1)];
    let mut remaining_inputs = batch;
    let mut completed: u64 = 0;
    let mut makespan: u64 = 0;
    // (completion cycle, stage) min-heap; ties resolve downstream-first in settle()
    let mut events: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();

    let start = |stage: usize,
                 now: u64,
                 state: &mut Vec<StageState>,
                 events: &mut BinaryHeap<Reverse<(u64, usize)>>| {
        let done = now + service[stage];
        state[stage] = StageState::Busy(done);
        events.push(Reverse((done, stage)));
    };

    // settle all hand-offs and starts possible at cycle `now`, downstream first
    // so a consumed buffer slot can be refilled in the same cycle
    let settle = |now: u64,
                  state: &mut Vec<StageState>,
                  buffer: &mut Vec<bool>,
                  remaining_inputs: &mut u64,
                  completed: &mut u64,
                  makespan: &mut u64,
                  events: &mut BinaryHeap<Reverse<(u64, usize)>>| {
        loop {
            let mut changed = false;
            for stage in (0..n).rev() {
                if state[stage] == StageState::Blocked {
                    if stage == n - 1 {
                        // sink is always free
                        *completed += 1;
                        *makespan = now;
                        state[stage] = StageState::Idle;
                        changed = true;
                    } else if !buffer[stage] {
                        buffer[stage] = true;
                        state[stage] = StageState::Idle;
                        changed = true;
                    }
                }
                if state[stage] == StageState::Idle {
                    let has_input = if stage == 0 {
                        *remaining_inputs > 0
                    } else {
                        buffer[stage - 1]
                    };
                    if has_input {
                        if stage == 0 {
                            *remaining_inputs -= 1;
                        } else {
                            buffer[stage - 1] = false;
                        }
                        start(stage, now, state, events);
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
    };

    settle(
        0,
        &mut state,
        &mut buffer,
        &mut remaining_inputs,
        &mut completed,
        &mut makespan,
        &mut events,
    );

    while completed < batch {
        let Reverse((now, _)) = events
            .pop()
            .expect("pipeline cannot starve before finishing");
        // mark every stage whose service completes at `now` as holding its item
        for stage_state in state.iter_mut() {
            if *stage_state == StageState::Busy(now) {
                *stage_state = StageState::Blocked;
            }
        }
        settle(
            now,
            &mut state,
            &mut buffer,
            &mut remaining_inputs,
            &mut completed,
            &mut makespan,
            &mut events,
        );
    }
    makespan
}

/// The closed-form makespan the simulation must agree with.
pub fn analytic_makespan(service: &[u64], batch: u64) -> u64 {
    if service.is_empty() || batch == 0 {
        return 0;
    }
    let fill: u64 = service.iter().sum();
    let bottleneck: u64 = service.iter().copied().max().unwrap();
    fill + (batch - 1) * bottleneck
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_stage_examples() {
        assert_eq!(simulate_stage_pipeline(&[64, 16], 1), 80);
        assert_eq!(simulate_stage_pipeline(&[64, 16], 10), 656);
    }

    #[test]
    fn single_stage_serializes() {
        for b in [1u64, 2, 7, 100] {
            assert_eq!(simulate_stage_pipeline(&[576], b), 576 * b);
        }
    }

    #[test]
    fn empty_cases() {
        assert_eq!(simulate_stage_pipeline(&[], 5), 0);
        assert_eq!(simulate_stage_pipeline(&[3, 4], 0), 0);
    }

    #[test]
    fn blocking_shapes_agree_with_formula() {
        let cases: [&[u64]; 7] = [
            &[1, 100, 1, 100],
            &[100, 1, 100],
            &[1, 3, 1],
            &[3, 1, 1],
            &[5, 1, 5],
            &[2, 1, 3, 1, 2],
            &[4, 4],
        ];
        for service in cases {
            for b in 1..=12 {
                assert_eq!(
                    simulate_stage_pipeline(service, b),
                    analytic_makespan(service, b),
                    "service={service:?} batch={b}"
                );
            }
        }
    }

    #[test]
    fn equal_stages_reach_initiation_interval_one_per_t() {
        assert_eq!(simulate_stage_pipeline(&[7, 7, 7], 5), 21 + 4 * 7);
    }
}
