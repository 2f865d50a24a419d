//! Virtual-time model of a chain of stages joined by bounded FIFOs.
//!
//! Each stage handles its outputs in order: pop the inputs the output
//! needs (waiting for them to be pushed upstream), compute for `latency`,
//! then push (waiting for a free slot downstream). A FIFO of depth `D` has
//! room for output `j` once the consumer has popped item `j - D`. A pop at
//! time `t` frees its slot for a push at the same `t`.
//!
//! Times are integer nanoseconds, so results are exact and repeatable.

/// Inputs a stage must have popped before producing output `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Output `j` needs input `j`.
    OneToOne,
    /// 3x3 neighborhood over a raster of `width`-wide rows: output `j` in
    /// row `y` needs everything through the end of row `y + 1`.
    Rows3 { width: u64 },
}

impl Window {
    /// Index of the last input output `j` needs.
    fn need(self, j: u64, items: u64) -> u64 {
        match self {
            Window::OneToOne => j,
            Window::Rows3 { width } => ((j / width + 2) * width - 1).min(items - 1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimStage {
    pub latency_ns: u64,
    pub window: Window,
}

impl SimStage {
    pub fn new(latency_ns: u64) -> Self {
        Self {
            latency_ns,
            window: Window::OneToOne,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SimStats {
    pub items: u64,
    pub busy_ns: u64,
    pub blocked_push_ns: u64,
    pub blocked_pop_ns: u64,
    /// Time of the stage's last push, or of its last completion for the
    /// sink. Stages start at 0.
    pub end_ns: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Gather,
    Emit,
}

struct Cursor {
    t: u64,
    next: u64,
    phase: Phase,
    stats: SimStats,
}

/// Runs `items` items through `stages` joined by FIFOs of `depth` slots.
pub fn simulate(stages: &[SimStage], items: u64, depth: usize) -> Vec<SimStats> {
    assert!(depth >= 1, "queue depth must be at least 1");
    let n = stages.len();
    let depth = depth as u64;
    // push[k][j]: time stage k pushed output j; pop[k][i]: time stage k
    // popped input i
    let mut push: Vec<Vec<u64>> = vec![Vec::with_capacity(items as usize); n];
    let mut pop: Vec<Vec<u64>> = vec![Vec::with_capacity(items as usize); n];
    let mut cur: Vec<Cursor> = (0..n)
        .map(|_| Cursor {
            t: 0,
            next: 0,
            phase: Phase::Gather,
            stats: SimStats::default(),
        })
        .collect();

    loop {
        let mut progressed = false;
        let mut done = true;
        for k in 0..n {
            let st = stages[k];
            loop {
                let c = &mut cur[k];
                if c.next == items {
                    break;
                }
                if c.phase == Phase::Gather {
                    if k > 0 {
                        let need = st.window.need(c.next, items);
                        let mut stalled = false;
                        while (pop[k].len() as u64) <= need {
                            let i = pop[k].len();
                            let Some(&arrival) = push[k - 1].get(i) else {
                                stalled = true;
                                break;
                            };
                            if arrival > c.t {
                                c.stats.blocked_pop_ns += arrival - c.t;
                                c.t = arrival;
                            }
                            pop[k].push(c.t);
                            progressed = true;
                        }
                        if stalled {
                            break;
                        }
                    }
                    c.t += st.latency_ns;
                    c.stats.busy_ns += st.latency_ns;
                    c.phase = Phase::Emit;
                    progressed = true;
                }
                if k + 1 < n {
                    let j = c.next;
                    if j >= depth {
                        let Some(&freed) = pop[k + 1].get((j - depth) as usize) else {
                            break;
                        };
                        if freed > c.t {
                            c.stats.blocked_push_ns += freed - c.t;
                            c.t = freed;
                        }
                    }
                    push[k].push(c.t);
                }
                c.next += 1;
                c.stats.items += 1;
                c.stats.end_ns = c.t;
                c.phase = Phase::Gather;
                progressed = true;
            }
            done &= cur[k].next == items;
        }
        if done {
            break;
        }
        assert!(progressed, "virtual pipeline made no progress");
    }
    cur.into_iter().map(|c| c.stats).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Tick-by-tick oracle for one-to-one chains. Within a tick, stages
    /// are revisited until nothing changes, so a slot freed or an item
    /// delivered at `t` is usable at `t`.
    fn tick_oracle(lat: &[u64], items: u64, depth: usize) -> Vec<SimStats> {
        #[derive(Clone, Copy, PartialEq)]
        enum S {
            WaitIn,
            Busy(u64),
            WaitOut,
            Done,
        }
        let n = lat.len();
        let mut queue = vec![0usize; n];
        let mut state = vec![S::WaitIn; n];
        let mut produced = vec![0u64; n];
        let mut stats = vec![SimStats::default(); n];
        let mut t = 0u64;
        loop {
            loop {
                let mut changed = false;
                for k in 0..n {
                    match state[k] {
                        S::WaitIn if produced[k] == items => {
                            state[k] = S::Done;
                            changed = true;
                        }
                        S::WaitIn if k == 0 || queue[k - 1] > 0 => {
                            if k > 0 {
                                queue[k - 1] -= 1;
                            }
                            state[k] = if lat[k] == 0 { S::WaitOut } else { S::Busy(lat[k]) };
                            stats[k].busy_ns += lat[k];
                            changed = true;
                        }
                        S::WaitOut if k + 1 == n || queue[k] < depth => {
                            if k + 1 < n {
                                queue[k] += 1;
                            }
                            produced[k] += 1;
                            stats[k].items += 1;
                            stats[k].end_ns = t;
                            state[k] = S::WaitIn;
                            changed = true;
                        }
                        _ => {}
                    }
                }
                if !changed {
                    break;
                }
            }
            if state.iter().all(|s| *s == S::Done) {
                break;
            }
            for k in 0..n {
                match state[k] {
                    S::WaitIn => stats[k].blocked_pop_ns += 1,
                    S::WaitOut => stats[k].blocked_push_ns += 1,
                    S::Busy(1) => state[k] = S::WaitOut,
                    S::Busy(r) => state[k] = S::Busy(r - 1),
                    S::Done => {}
                }
            }
            t += 1;
        }
        stats
    }

    fn chain(lat: &[u64]) -> Vec<SimStage> {
        lat.iter().map(|&l| SimStage::new(l)).collect()
    }

    #[test]
    fn slow_consumer_backs_up_producer() {
        let s = simulate(&chain(&[1000, 10_000]), 1000, 8);
        // the producer's last push waits for the consumer to pop item 991
        assert_eq!(s[0].end_ns, 1000 + 991 * 10_000);
        assert_eq!(s[0].blocked_push_ns, s[0].end_ns - 1_000_000);
        assert_eq!(s[0].busy_ns, 1_000_000);
        assert_eq!(s[1].end_ns, 1000 + 1000 * 10_000);
        assert_eq!(s[1].blocked_pop_ns, 1000);
        let frac = s[0].blocked_push_ns as f64 / s[0].end_ns as f64;
        assert!((frac - 0.8991).abs() < 1e-4, "{frac}");
    }

    #[test]
    fn balanced_chain_never_blocks_after_fill() {
        let s = simulate(&chain(&[5, 5, 5]), 100, 2);
        assert_eq!(s[2].end_ns, 15 + 99 * 5);
        assert_eq!(s[0].blocked_push_ns, 0);
        assert_eq!(s[2].blocked_pop_ns, 10);
    }

    #[test]
    fn row_window_waits_for_next_row() {
        let stages = [
            SimStage::new(1),
            SimStage {
                latency_ns: 1,
                window: Window::Rows3 { width: 4 },
            },
        ];
        let s = simulate(&stages, 16, 64);
        // first output needs 8 inputs, pushed at t = 1..=8
        assert_eq!(s[1].blocked_pop_ns, 8);
        assert_eq!(s[1].end_ns, 8 + 16);
    }

    #[test]
    fn matches_tick_oracle_on_fixed_case() {
        let lat = [3, 1, 7, 2];
        assert_eq!(simulate(&chain(&lat), 50, 3), tick_oracle(&lat, 50, 3));
    }

    proptest! {
        #[test]
        fn matches_tick_oracle(
            lat in proptest::collection::vec(1u64..12, 1..5),
            items in 1u64..40,
            depth in 1usize..6,
        ) {
            prop_assert_eq!(simulate(&chain(&lat), items, depth), tick_oracle(&lat, items, depth));
        }

        #[test]
        fn makespan_is_fill_plus_bottleneck_with_deep_queues(
            lat in proptest::collection::vec(1u64..50, 1..6),
            items in 1u64..200,
        ) {
            let s = simulate(&chain(&lat), items, items as usize);
            let fill: u64 = lat.iter().sum();
            let slowest = *lat.iter().max().unwrap();
            prop_assert!(s.last().unwrap().end_ns <= fill + (items - 1) * slowest);
            prop_assert!(s.last().unwrap().end_ns >= slowest * items);
        }

        #[test]
        fn time_is_conserved(
            lat in proptest::collection::vec(1u64..20, 1..5),
            items in 1u64..60,
            depth in 1usize..8,
        ) {
            for st in simulate(&chain(&lat), items, depth) {
                prop_assert_eq!(st.items, items);
                prop_assert_eq!(st.busy_ns + st.blocked_pop_ns + st.blocked_push_ns, st.end_ns);
            }
        }
    }
}
