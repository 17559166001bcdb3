//! Victim selection: the order in which a thief probes other queues.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::VictimStrategy;

/// Result of one selection round over an occupancy view.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VictimChoice {
    Found { queue: usize, probes: usize },
    NoVictim { probes: usize },
}

impl VictimChoice {
    pub fn probes(&self) -> usize {
        match *self {
            VictimChoice::Found { probes, .. } | VictimChoice::NoVictim { probes } => probes,
        }
    }

    pub fn queue(&self) -> Option<usize> {
        match *self {
            VictimChoice::Found { queue, .. } => Some(queue),
            VictimChoice::NoVictim { .. } => None,
        }
    }
}

/// Non-home queues in round-robin order starting after `home`.
fn ring(home: usize, queues: usize) -> impl Iterator<Item = usize> {
    (1..queues).map(move |k| (home + k) % queues)
}

/// Full probe order for one selection round. Every non-home queue appears
/// exactly once, so an all-empty answer is reliable.
pub fn probe_order<R: rand::Rng + ?Sized>(
    strategy: VictimStrategy,
    home: usize,
    queue_groups: &[usize],
    rng: &mut R,
) -> Vec<usize> {
    let q = queue_groups.len();
    let home_group = queue_groups.get(home).copied().unwrap_or(0);
    let same = |v: &usize| queue_groups[*v] == home_group;
    match strategy {
        VictimStrategy::Seq => ring(home, q).collect(),
        VictimStrategy::SeqPri => {
            let mut order: Vec<usize> = ring(home, q).filter(same).collect();
            order.extend(ring(home, q).filter(|v| !same(v)));
            order
        }
        VictimStrategy::Rnd => {
            let mut order: Vec<usize> = ring(home, q).collect();
            order.shuffle(rng);
            order
        }
        VictimStrategy::RndPri => {
            let mut local: Vec<usize> = ring(home, q).filter(same).collect();
            let mut remote: Vec<usize> = ring(home, q).filter(|v| !same(v)).collect();
            local.shuffle(rng);
            remote.shuffle(rng);
            local.extend(remote);
            local
        }
    }
}

/// First queue in the strategy's probe order with `occupancy > 0`.
pub fn select_victim<R: rand::Rng + ?Sized>(
    strategy: VictimStrategy,
    home: usize,
    queue_groups: &[usize],
    occupancy: &[usize],
    rng: &mut R,
) -> VictimChoice {
    let order = probe_order(strategy, home, queue_groups, rng);
    first_occupied(&order, occupancy)
}

fn first_occupied(order: &[usize], occupancy: &[usize]) -> VictimChoice {
    match order.iter().position(|&v| occupancy[v] > 0) {
        Some(i) => VictimChoice::Found { queue: order[i], probes: i + 1 },
        None => VictimChoice::NoVictim { probes: order.len() },
    }
}

/// Victim selector owned by one thief.
#[derive(Debug, Clone)]
pub struct VictimSelector {
    strategy: VictimStrategy,
    home: usize,
    queue_groups: Vec<usize>,
    /// Fixed order for the sequential strategies.
    fixed: Option<Vec<usize>>,
    rng: ChaCha8Rng,
}

impl VictimSelector {
    /// The random stream is derived from `(seed, thief)` so runs replay exactly.
    pub fn new(strategy: VictimStrategy, home: usize, queue_groups: &[usize], seed: u64, thief: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(thief as u64);
        let fixed = match strategy {
            VictimStrategy::Seq | VictimStrategy::SeqPri => {
                Some(probe_order(strategy, home, queue_groups, &mut rng))
            }
            VictimStrategy::Rnd | VictimStrategy::RndPri => None,
        };
        Self { strategy, home, queue_groups: queue_groups.to_vec(), fixed, rng }
    }

    pub fn home(&self) -> usize {
        self.home
    }

    pub fn select(&mut self, occupancy: &[usize]) -> VictimChoice {
        match &self.fixed {
            Some(order) => first_occupied(order, occupancy),
            None => {
                let order = probe_order(self.strategy, self.home, &self.queue_groups, &mut self.rng);
                first_occupied(&order, occupancy)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn seq_probes_next_index_first() {
        let groups = vec![0; 8];
        let occ = vec![1; 8];
        let c = select_victim(VictimStrategy::Seq, 5, &groups, &occ, &mut rng());
        assert_eq!(c, VictimChoice::Found { queue: 6, probes: 1 });
        assert_eq!(probe_order(VictimStrategy::Seq, 5, &groups, &mut rng()), vec![6, 7, 0, 1, 2, 3, 4]);
    }

    #[test]
    fn seqpri_exhausts_own_group_first() {
        let groups = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let mut occ = vec![1; 8];
        occ[6] = 0;
        occ[7] = 0;
        let c = select_victim(VictimStrategy::SeqPri, 5, &groups, &occ, &mut rng());
        assert_eq!(c, VictimChoice::Found { queue: 4, probes: 3 });
        assert_eq!(probe_order(VictimStrategy::SeqPri, 5, &groups, &mut rng()), vec![6, 7, 4, 0, 1, 2, 3]);
    }

    #[test]
    fn rnd_single_candidate() {
        let c = select_victim(VictimStrategy::Rnd, 0, &[0, 0], &[0, 3], &mut rng());
        assert_eq!(c.queue(), Some(1));
    }

    #[test]
    fn no_victim_after_full_coverage() {
        for s in VictimStrategy::ALL {
            let c = select_victim(*s, 2, &[0, 0, 1, 1], &[0; 4], &mut rng());
            assert_eq!(c, VictimChoice::NoVictim { probes: 3 }, "{s}");
        }
    }

    #[test]
    fn random_orders_are_permutations_with_priority() {
        let groups = vec![0, 0, 0, 1, 1, 1];
        let mut r = rng();
        for _ in 0..50 {
            let mut o = probe_order(VictimStrategy::RndPri, 1, &groups, &mut r);
            assert!(o[..2].iter().all(|&v| groups[v] == 0));
            o.sort_unstable();
            assert_eq!(o, vec![0, 2, 3, 4, 5]);
            let mut o = probe_order(VictimStrategy::Rnd, 1, &groups, &mut r);
            o.sort_unstable();
            assert_eq!(o, vec![0, 2, 3, 4, 5]);
        }
    }

    #[test]
    fn single_group_priority_degenerates() {
        let groups = vec![0; 5];
        for home in 0..5 {
            assert_eq!(
                probe_order(VictimStrategy::SeqPri, home, &groups, &mut rng()),
                probe_order(VictimStrategy::Seq, home, &groups, &mut rng())
            );
        }
    }

    #[test]
    fn selector_streams_are_reproducible() {
        let groups = vec![0; 16];
        let occ = vec![1; 16];
        let picks = |thief| {
            let mut s = VictimSelector::new(VictimStrategy::Rnd, thief, &groups, 42, thief);
            (0..10).map(|_| s.select(&occ).queue().unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(picks(3), picks(3));
        assert_ne!(picks(3), picks(4));
    }
}
