//! The peeling decoder: balls are thrown into boxes by several independent hashes, and
//! any ball alone in a box is read off and removed from every throw.
//!
//! Rounds are synchronous: the boxes that are private at the start of a round are
//! processed during it, and boxes that become private while it runs wait for the next.

use std::collections::{HashSet, VecDeque};
use std::hash::Hash;

use num_bigint::BigInt;
use num_traits::Zero;
use rand::seq::SliceRandom;

use crate::cyclic::CyclicPoly;
use crate::error::{Error, Result};
use crate::rng::SeedRng;

/// Box index of every ball in every throw.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ThrowAssignment {
    boxes_per_throw: Vec<usize>,
    // boxes[i][j]: box of ball j in throw i
    boxes: Vec<Vec<usize>>,
}

impl ThrowAssignment {
    pub fn new(boxes_per_throw: Vec<usize>, boxes: Vec<Vec<usize>>) -> Result<Self> {
        if boxes_per_throw.len() != boxes.len() || boxes.is_empty() {
            return Err(Error::Precondition(
                "need one box count per throw and at least one throw".into(),
            ));
        }
        let t = boxes[0].len();
        for (i, (row, &r)) in boxes.iter().zip(&boxes_per_throw).enumerate() {
            if row.len() != t {
                return Err(Error::LengthMismatch {
                    left: t,
                    right: row.len(),
                });
            }
            if let Some(&slot) = row.iter().find(|&&b| b >= r) {
                return Err(Error::SlotOutOfRange { slot, len: r });
            }
            if r == 0 && t > 0 {
                return Err(Error::Precondition(format!("throw {i} has no boxes")));
            }
        }
        Ok(ThrowAssignment {
            boxes_per_throw,
            boxes,
        })
    }

    pub fn throws(&self) -> usize {
        self.boxes.len()
    }

    pub fn balls(&self) -> usize {
        self.boxes[0].len()
    }

    pub fn boxes_in(&self, throw: usize) -> usize {
        self.boxes_per_throw[throw]
    }

    pub fn box_of(&self, throw: usize, ball: usize) -> usize {
        self.boxes[throw][ball]
    }

    pub fn throw_row(&self, throw: usize) -> &[usize] {
        &self.boxes[throw]
    }

    /// The same balls with one more throw appended.
    pub fn with_throw(&self, boxes: usize, row: Vec<usize>) -> Result<Self> {
        let mut counts = self.boxes_per_throw.clone();
        let mut rows = self.boxes.clone();
        counts.push(boxes);
        rows.push(row);
        ThrowAssignment::new(counts, rows)
    }

    /// `sum over boxes of occupancy^2` for one throw.
    pub fn squared_occupancy(&self, throw: usize) -> u64 {
        let mut occ = vec![0u64; self.boxes_per_throw[throw]];
        for &b in &self.boxes[throw] {
            occ[b] += 1;
        }
        occ.iter().map(|k| k * k).sum()
    }
}

/// Per-round removal counts; `remaining` is measured after the round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundStat {
    pub round: u32,
    pub removed: usize,
    pub remaining: usize,
}

pub fn trace_csv(trace: &[RoundStat]) -> String {
    let mut out = String::from("round,removed,remaining\n");
    for s in trace {
        out.push_str(&format!("{},{},{}\n", s.round, s.removed, s.remaining));
    }
    out
}

/// A ball read off a private box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Removal {
    pub ball: usize,
    pub round: u32,
    pub values: Vec<BigInt>,
}

#[derive(Debug, Clone)]
pub struct KnownSupportOutcome {
    /// Per ball, its value in every channel, if it was recovered.
    pub values: Vec<Option<Vec<BigInt>>>,
    pub leftover: Vec<usize>,
    pub rounds: u32,
    pub ops: u64,
    pub trace: Vec<RoundStat>,
    /// Channel contents after all removals; all zero on a won game with consistent input.
    pub residual: Vec<Vec<CyclicPoly>>,
}

impl KnownSupportOutcome {
    pub fn won(&self) -> bool {
        self.leftover.is_empty()
    }
}

/// Known-support game, advanced one round at a time.
pub struct KnownSupportGame<'a> {
    assignment: &'a ThrowAssignment,
    channels: Vec<Vec<CyclicPoly>>,
    occupancy: Vec<Vec<u32>>,
    // xor of resident ball ids; names the resident when occupancy is 1
    resident_xor: Vec<Vec<usize>>,
    remaining: usize,
    values: Vec<Option<Vec<BigInt>>>,
    current: Vec<(usize, usize)>,
    next: Vec<(usize, usize)>,
    round: u32,
    ops: u64,
    trace: Vec<RoundStat>,
    shuffle: Option<SeedRng>,
}

impl<'a> KnownSupportGame<'a> {
    /// `channels[i]` holds the channel accumulators of throw `i`; it may be empty when
    /// only the ball dynamics matter.
    pub fn new(assignment: &'a ThrowAssignment, channels: Vec<Vec<CyclicPoly>>) -> Result<Self> {
        if channels.len() != assignment.throws() {
            return Err(Error::LengthMismatch {
                left: assignment.throws(),
                right: channels.len(),
            });
        }
        let width = channels[0].len();
        for (i, chans) in channels.iter().enumerate() {
            if chans.len() != width {
                return Err(Error::LengthMismatch {
                    left: width,
                    right: chans.len(),
                });
            }
            for c in chans {
                if c.len() != assignment.boxes_in(i) {
                    return Err(Error::LengthMismatch {
                        left: assignment.boxes_in(i),
                        right: c.len(),
                    });
                }
            }
        }
        let t = assignment.balls();
        let mut occupancy = Vec::with_capacity(assignment.throws());
        let mut resident_xor = Vec::with_capacity(assignment.throws());
        let mut current = Vec::new();
        for i in 0..assignment.throws() {
            let mut occ = vec![0u32; assignment.boxes_in(i)];
            let mut xor = vec![0usize; assignment.boxes_in(i)];
            for (j, &b) in assignment.throw_row(i).iter().enumerate() {
                occ[b] += 1;
                xor[b] ^= j;
            }
            current.extend(
                occ.iter()
                    .enumerate()
                    .filter(|(_, &k)| k == 1)
                    .map(|(b, _)| (i, b)),
            );
            occupancy.push(occ);
            resident_xor.push(xor);
        }
        let ops = assignment.throws() as u64 * t as u64
            + (0..assignment.throws())
                .map(|i| assignment.boxes_in(i) as u64)
                .sum::<u64>();
        Ok(KnownSupportGame {
            assignment,
            channels,
            occupancy,
            resident_xor,
            remaining: t,
            values: vec![None; t],
            current,
            next: Vec::new(),
            round: 0,
            ops,
            trace: Vec::new(),
            shuffle: None,
        })
    }

    /// Process each round's private boxes in a random order.
    pub fn shuffled(mut self, rng: SeedRng) -> Self {
        self.shuffle = Some(rng);
        self
    }

    pub fn remaining(&self) -> usize {
        self.remaining
    }

    pub fn is_remaining(&self, ball: usize) -> bool {
        self.values[ball].is_none()
    }

    pub fn occupancy(&self, throw: usize) -> &[u32] {
        &self.occupancy[throw]
    }

    pub fn channels(&self) -> &[Vec<CyclicPoly>] {
        &self.channels
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn ops(&self) -> u64 {
        self.ops
    }

    /// True when no private box is pending.
    pub fn is_stuck(&self) -> bool {
        self.current.is_empty() && self.next.is_empty()
    }

    /// Runs one synchronous round, calling `on_removal` after every removal.
    /// Returns the number of balls removed.
    pub fn run_round_observed(&mut self, on_removal: &mut dyn FnMut(&Removal, &Self)) -> usize {
        if self.current.is_empty() {
            std::mem::swap(&mut self.current, &mut self.next);
        }
        if self.current.is_empty() {
            return 0;
        }
        self.round += 1;
        let mut batch = std::mem::take(&mut self.current);
        if let Some(rng) = self.shuffle.as_mut() {
            batch.shuffle(rng);
        }
        let mut removed = 0;
        for (i, b) in batch {
            self.ops += 1;
            if self.occupancy[i][b] != 1 {
                continue;
            }
            let ball = self.resident_xor[i][b];
            let values: Vec<BigInt> = self.channels[i].iter().map(|c| c.get(b).clone()).collect();
            self.remove(ball, &values);
            removed += 1;
            let removal = Removal {
                ball,
                round: self.round,
                values: values.clone(),
            };
            self.values[ball] = Some(values);
            on_removal(&removal, self);
        }
        self.remaining -= removed;
        std::mem::swap(&mut self.current, &mut self.next);
        self.trace.push(RoundStat {
            round: self.round,
            removed,
            remaining: self.remaining,
        });
        removed
    }

    pub fn run_round(&mut self) -> usize {
        self.run_round_observed(&mut |_, _| {})
    }

    fn remove(&mut self, ball: usize, values: &[BigInt]) {
        for i in 0..self.assignment.throws() {
            let b = self.assignment.box_of(i, ball);
            self.ops += 1;
            for (c, v) in self.channels[i].iter_mut().zip(values) {
                if !v.is_zero() {
                    c.sub_monomial(v, b)
                        .expect("box index validated at construction");
                }
            }
            self.occupancy[i][b] -= 1;
            self.resident_xor[i][b] ^= ball;
            if self.occupancy[i][b] == 1 {
                self.next.push((i, b));
            }
        }
    }

    pub fn finish(mut self) -> KnownSupportOutcome {
        while !self.is_stuck() {
            self.run_round();
        }
        let leftover = (0..self.assignment.balls())
            .filter(|&j| self.values[j].is_none())
            .collect();
        KnownSupportOutcome {
            values: self.values,
            leftover,
            rounds: self.round,
            ops: self.ops,
            trace: self.trace,
            residual: self.channels,
        }
    }
}

/// Plays the game to the end; a nonempty `leftover` means some balls never became private.
pub fn play_known_support(
    assignment: &ThrowAssignment,
    channels: Vec<Vec<CyclicPoly>>,
) -> Result<KnownSupportOutcome> {
    Ok(KnownSupportGame::new(assignment, channels)?.finish())
}

/// Names the ball that is supposedly alone in a box, and says where that ball lands in
/// every throw.
pub trait Identify {
    type Key: Clone + Eq + Hash;

    /// `payload` holds the box's value in every channel. `None` when the contents do not
    /// look like a single ball.
    fn identify(&mut self, throw: usize, slot: usize, payload: &[BigInt]) -> Option<Self::Key>;

    /// Called at the start of every round with the payloads about to be examined, so
    /// that per-box work can be batched. Boxes may still change before `identify` sees
    /// them.
    fn prepare(&mut self, _payloads: &[Vec<BigInt>]) {}

    fn slot_of(&self, key: &Self::Key, throw: usize) -> usize;
}

#[derive(Debug, Clone)]
pub struct DiscoveryOutcome<K> {
    /// Identified balls with their value in every channel, in discovery order.
    pub terms: Vec<(K, Vec<BigInt>)>,
    /// Nonzero `(throw, slot)` pairs left when no more progress was possible.
    pub unresolved: Vec<(usize, usize)>,
    pub rounds: u32,
    pub ops: u64,
    pub trace: Vec<RoundStat>,
}

/// Peels boxes whose contents identify a single ball, without knowing the balls in advance.
///
/// `channels[i]` holds the channel accumulators of throw `i`. At most `max_terms` balls are
/// accepted; beyond that the identifier is producing nonsense and the game stops.
pub fn play_discovery<I: Identify>(
    channels: Vec<Vec<CyclicPoly>>,
    identifier: &mut I,
    max_terms: usize,
) -> Result<DiscoveryOutcome<I::Key>> {
    let mut channels = channels;
    if channels.is_empty() || channels[0].is_empty() {
        return Err(Error::Precondition(
            "discovery needs at least one channel".into(),
        ));
    }
    let width = channels[0].len();
    for chans in &channels {
        if chans.len() != width {
            return Err(Error::LengthMismatch {
                left: width,
                right: chans.len(),
            });
        }
        let r = chans[0].len();
        if let Some(c) = chans.iter().find(|c| c.len() != r) {
            return Err(Error::LengthMismatch {
                left: r,
                right: c.len(),
            });
        }
    }
    let nonzero = |chans: &[CyclicPoly], s: usize| chans.iter().any(|c| !c.get(s).is_zero());

    let mut queue: VecDeque<(usize, usize, u32)> = VecDeque::new();
    for (i, chans) in channels.iter().enumerate() {
        for s in 0..chans[0].len() {
            if nonzero(chans, s) {
                queue.push_back((i, s, 1));
            }
        }
    }
    let mut ops = queue.len() as u64;
    let mut seen: HashSet<I::Key> = HashSet::new();
    let mut terms = Vec::new();
    let mut trace: Vec<RoundStat> = Vec::new();
    let mut rounds = 0u32;

    // round in which each box last changed; a box that changed during the current round
    // is already queued for the next one, so it is only examined there
    let mut touched: Vec<Vec<u32>> = channels.iter().map(|c| vec![0; c[0].len()]).collect();
    let mut prepared = 0u32;
    while let Some((i, s, round)) = queue.pop_front() {
        ops += 1;
        if round != prepared {
            // every queued entry belongs to this round now
            let batch: Vec<Vec<BigInt>> = std::iter::once((i, s))
                .chain(queue.iter().map(|&(i2, s2, _)| (i2, s2)))
                .filter(|&(i2, s2)| nonzero(&channels[i2], s2))
                .map(|(i2, s2)| channels[i2].iter().map(|c| c.get(s2).clone()).collect())
                .collect();
            identifier.prepare(&batch);
            prepared = round;
        }
        if touched[i][s] == round || !nonzero(&channels[i], s) {
            continue;
        }
        let payload: Vec<BigInt> = channels[i].iter().map(|c| c.get(s).clone()).collect();
        let Some(key) = identifier.identify(i, s, &payload) else {
            continue;
        };
        if identifier.slot_of(&key, i) != s || seen.contains(&key) {
            continue;
        }
        if terms.len() >= max_terms {
            break;
        }
        for (i2, chans) in channels.iter_mut().enumerate() {
            let s2 = identifier.slot_of(&key, i2);
            if s2 >= chans[0].len() {
                return Err(Error::SlotOutOfRange {
                    slot: s2,
                    len: chans[0].len(),
                });
            }
            ops += 1;
            for (c, v) in chans.iter_mut().zip(&payload) {
                c.sub_monomial(v, s2)?;
            }
            touched[i2][s2] = round;
            if i2 != i {
                queue.push_back((i2, s2, round + 1));
            }
        }
        // A box whose only resident was just read off may also have held others.
        queue.push_back((i, s, round + 1));
        seen.insert(key.clone());
        terms.push((key, payload));
        rounds = rounds.max(round);
        while trace.len() < round as usize {
            trace.push(RoundStat {
                round: trace.len() as u32 + 1,
                removed: 0,
                remaining: 0,
            });
        }
        trace[round as usize - 1].removed += 1;
    }
    let unresolved: Vec<(usize, usize)> = channels
        .iter()
        .enumerate()
        .flat_map(|(i, chans)| {
            (0..chans[0].len())
                .filter(move |&s| nonzero(chans, s))
                .map(move |s| (i, s))
        })
        .collect();
    let left = unresolved.len();
    for st in trace.iter_mut() {
        st.remaining = left;
    }
    Ok(DiscoveryOutcome {
        terms,
        unresolved,
        rounds,
        ops,
        trace,
    })
}
