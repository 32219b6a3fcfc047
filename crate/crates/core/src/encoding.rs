//! Genome representations and the neighbourhood moves acting on them.
//!
//! Both genomes have one gene per event. In a [`HardIndividual`] the genes
//! form a permutation of the event indices and give the order in which the
//! greedy decoder places events. In a [`SoftIndividual`] gene `i` is the flat
//! room-period index of event `i`; values are pairwise distinct.

use thiserror::Error;

use crate::evaluation::{Stage, Timetable};
use crate::instance::Instance;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodingError {
    #[error("genome has {found} genes, instance has {expected} events")]
    LengthMismatch { expected: usize, found: usize },
    #[error("genes are not a permutation of 0..{0}")]
    NotPermutation(usize),
    #[error("allele {allele} outside 0..{count}")]
    AlleleOutOfRange { allele: usize, count: usize },
    #[error("allele {0} is used by more than one event")]
    DuplicateAllele(usize),
    #[error("position {position} outside genome of length {len}")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("event {0} is unassigned")]
    Unassigned(usize),
    #[error("{events} events cannot occupy {slots} distinct room-period pairs")]
    NotEnoughSlots { events: usize, slots: usize },
}

/// Neighbourhood function used by mutation and crossover.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MoveMode {
    Simple,
    Chain,
}

impl MoveMode {
    pub fn toggled(self) -> Self {
        match self {
            MoveMode::Simple => MoveMode::Chain,
            MoveMode::Chain => MoveMode::Simple,
        }
    }
}

/// Scheduling-order genome of the hard stage.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct HardIndividual {
    genes: Vec<usize>,
}

impl HardIndividual {
    pub fn new(genes: Vec<usize>) -> Result<Self, EncodingError> {
        let n = genes.len();
        let mut seen = vec![false; n];
        for &g in &genes {
            if g >= n || std::mem::replace(&mut seen[g], true) {
                return Err(EncodingError::NotPermutation(n));
            }
        }
        Ok(Self { genes })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            genes: (0..n).collect(),
        }
    }

    pub fn genes(&self) -> &[usize] {
        &self.genes
    }
}

/// Room-period genome of the soft stage.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SoftIndividual {
    genes: Vec<usize>,
}

impl SoftIndividual {
    pub fn new(instance: &Instance, genes: Vec<usize>) -> Result<Self, EncodingError> {
        check_soft_genes(instance, &genes)?;
        Ok(Self { genes })
    }

    /// Encodes a fully assigned timetable.
    pub fn from_timetable(
        instance: &Instance,
        timetable: &Timetable,
    ) -> Result<Self, EncodingError> {
        let genes = timetable
            .slots()
            .iter()
            .enumerate()
            .map(|(e, s)| s.ok_or(EncodingError::Unassigned(e)))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(instance, genes)
    }

    /// Encodes a possibly partial timetable, placing every unassigned event
    /// in the lowest free room-period index.
    pub fn completing(instance: &Instance, timetable: &Timetable) -> Result<Self, EncodingError> {
        let slots = instance.num_room_period_pairs();
        if timetable.len() > slots {
            return Err(EncodingError::NotEnoughSlots {
                events: timetable.len(),
                slots,
            });
        }
        let mut used = vec![false; slots];
        for s in timetable.slots().iter().flatten() {
            if *s < slots {
                used[*s] = true;
            }
        }
        let mut next_free = 0;
        let genes = timetable
            .slots()
            .iter()
            .map(|s| match s {
                Some(s) => *s,
                None => {
                    while used[next_free] {
                        next_free += 1;
                    }
                    used[next_free] = true;
                    next_free
                }
            })
            .collect();
        Self::new(instance, genes)
    }

    pub fn genes(&self) -> &[usize] {
        &self.genes
    }
}

fn check_soft_genes(instance: &Instance, genes: &[usize]) -> Result<(), EncodingError> {
    if genes.len() != instance.num_events() {
        return Err(EncodingError::LengthMismatch {
            expected: instance.num_events(),
            found: genes.len(),
        });
    }
    let count = instance.num_room_period_pairs();
    let mut seen = vec![false; count];
    for &g in genes {
        if g >= count {
            return Err(EncodingError::AlleleOutOfRange { allele: g, count });
        }
        if std::mem::replace(&mut seen[g], true) {
            return Err(EncodingError::DuplicateAllele(g));
        }
    }
    Ok(())
}

/// Places each event of the soft genome in the room-period its gene names.
pub fn decode_soft(
    instance: &Instance,
    individual: &SoftIndividual,
) -> Result<Timetable, EncodingError> {
    check_soft_genes(instance, &individual.genes)?;
    Ok(Timetable::from_indices(&individual.genes))
}

/// Greedy decoder of the hard genome.
///
/// Events are placed in the order the gene values list them. Each event takes
/// the free room-period pair that adds no hard violation and minimises
/// `(students over capacity, room capacity, flat index)`. Events with no such
/// pair stay unassigned.
pub fn decode_hard(
    instance: &Instance,
    individual: &HardIndividual,
) -> Result<Timetable, EncodingError> {
    let n = instance.num_events();
    if individual.genes.len() != n {
        return Err(EncodingError::LengthMismatch {
            expected: n,
            found: individual.genes.len(),
        });
    }
    let ppw = instance.periods_per_week();
    let rooms = instance.rooms();
    let mut occupied = vec![false; instance.num_room_period_pairs()];
    let mut period_courses: Vec<Vec<usize>> = vec![Vec::new(); ppw];
    let mut timetable = Timetable::unassigned(n);

    for &event in &individual.genes {
        let course = instance.event_course(event);
        let students = instance.courses()[course].students;
        let mut best: Option<(usize, usize, usize)> = None;
        for (period, placed) in period_courses.iter().enumerate() {
            if instance.is_unavailable(course, period)
                || placed
                    .iter()
                    .any(|&other| instance.courses_conflict(course, other))
            {
                continue;
            }
            for (r, room) in rooms.iter().enumerate() {
                let flat = r * ppw + period;
                if occupied[flat] {
                    continue;
                }
                let key = (students.saturating_sub(room.capacity), room.capacity, flat);
                if best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
        }
        if let Some((_, _, flat)) = best {
            occupied[flat] = true;
            period_courses[flat % ppw].push(course);
            timetable.set(event, Some(flat));
        }
    }
    Ok(timetable)
}

/// Sets `genes[position]` to `new_allele`, swapping with the gene that
/// already holds that value if there is one.
pub fn simple_move(
    genes: &mut [usize],
    position: usize,
    new_allele: usize,
    allele_count: usize,
) -> Result<(), EncodingError> {
    if position >= genes.len() {
        return Err(EncodingError::PositionOutOfRange {
            position,
            len: genes.len(),
        });
    }
    if new_allele >= allele_count {
        return Err(EncodingError::AlleleOutOfRange {
            allele: new_allele,
            count: allele_count,
        });
    }
    match genes.iter().position(|&g| g == new_allele) {
        Some(other) => genes.swap(position, other),
        None => genes[position] = new_allele,
    }
    Ok(())
}

/// What a [`chain_move`] did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ChainOutcome {
    /// No clash at the target; the gene was set (or swapped, within a period).
    Simple,
    /// Clashing events moved between the two periods.
    Chain {
        to_old_period: Vec<usize>,
        to_new_period: Vec<usize>,
    },
    /// Some relocated event found no free room; a simple move was applied.
    Degraded,
}

/// Kempe-style move of event `position` to room-period `new_allele`.
///
/// When the target clashes (occupied room, or a course sharing a curriculum,
/// teacher or identity with the moved event in the target period), the
/// clashing events of the target period move to the event's old period and
/// the events of the old period clashing with those move to the target
/// period. Relocated events take the lowest free room of their destination.
pub fn chain_move(
    instance: &Instance,
    individual: &mut SoftIndividual,
    position: usize,
    new_allele: usize,
) -> Result<ChainOutcome, EncodingError> {
    let count = instance.num_room_period_pairs();
    let genes = &mut individual.genes;
    if position >= genes.len() {
        return Err(EncodingError::PositionOutOfRange {
            position,
            len: genes.len(),
        });
    }
    if new_allele >= count {
        return Err(EncodingError::AlleleOutOfRange {
            allele: new_allele,
            count,
        });
    }
    let old_allele = genes[position];
    if old_allele == new_allele {
        return Ok(ChainOutcome::Simple);
    }
    let target_period = instance.period_of_index(new_allele);
    let old_period = instance.period_of_index(old_allele);
    let course = instance.event_course(position);
    let in_period = |genes: &[usize], period: usize| {
        (0..genes.len())
            .filter(move |&e| e != position && instance.period_of_index(genes[e]) == period)
            .collect::<Vec<_>>()
    };

    let targets = in_period(genes, target_period);
    let to_old_period: Vec<usize> = targets
        .into_iter()
        .filter(|&e| {
            genes[e] == new_allele || instance.courses_conflict(course, instance.event_course(e))
        })
        .collect();
    if to_old_period.is_empty() {
        genes[position] = new_allele;
        return Ok(ChainOutcome::Simple);
    }
    if target_period == old_period {
        simple_move(genes, position, new_allele, count)?;
        return Ok(ChainOutcome::Simple);
    }
    let to_new_period: Vec<usize> = in_period(genes, old_period)
        .into_iter()
        .filter(|&g| {
            let cg = instance.event_course(g);
            to_old_period
                .iter()
                .any(|&f| instance.courses_conflict(instance.event_course(f), cg))
        })
        .collect();

    let mut owner: Vec<Option<usize>> = vec![None; count];
    for (e, &g) in genes.iter().enumerate() {
        owner[g] = Some(e);
    }
    let mut next = genes.clone();
    for &e in std::iter::once(&position)
        .chain(&to_old_period)
        .chain(&to_new_period)
    {
        owner[genes[e]] = None;
    }
    owner[new_allele] = Some(position);
    next[position] = new_allele;

    let ppw = instance.periods_per_week();
    let rooms = instance.rooms().len();
    let mut place = |events: &[usize], period: usize, next: &mut Vec<usize>| -> bool {
        for &e in events {
            match (0..rooms)
                .map(|r| r * ppw + period)
                .find(|&s| owner[s].is_none())
            {
                Some(slot) => {
                    owner[slot] = Some(e);
                    next[e] = slot;
                }
                None => return false,
            }
        }
        true
    };
    if !place(&to_old_period, old_period, &mut next)
        || !place(&to_new_period, target_period, &mut next)
    {
        simple_move(genes, position, new_allele, count)?;
        return Ok(ChainOutcome::Degraded);
    }
    *genes = next;
    Ok(ChainOutcome::Chain {
        to_old_period,
        to_new_period,
    })
}

/// Common interface of the two genomes, as used by the genetic algorithm.
pub trait Genome: Clone + Send + Sync {
    const STAGE: Stage;

    fn genes(&self) -> &[usize];

    /// Number of possible allele values.
    fn allele_count(instance: &Instance) -> usize;

    /// Decodes a genome known to be valid for `instance`.
    fn decode(&self, instance: &Instance) -> Timetable;

    /// Moves gene `position` to `allele`. Hard genomes ignore `mode` and
    /// always use the simple move.
    fn apply_move(
        &mut self,
        instance: &Instance,
        position: usize,
        allele: usize,
        mode: MoveMode,
    ) -> Result<(), EncodingError>;
}

impl Genome for HardIndividual {
    const STAGE: Stage = Stage::Hard;

    fn genes(&self) -> &[usize] {
        &self.genes
    }

    fn allele_count(instance: &Instance) -> usize {
        instance.num_events()
    }

    fn decode(&self, instance: &Instance) -> Timetable {
        decode_hard(instance, self).expect("hard genome matches instance")
    }

    fn apply_move(
        &mut self,
        instance: &Instance,
        position: usize,
        allele: usize,
        _mode: MoveMode,
    ) -> Result<(), EncodingError> {
        simple_move(&mut self.genes, position, allele, instance.num_events())
    }
}

impl Genome for SoftIndividual {
    const STAGE: Stage = Stage::Soft;

    fn genes(&self) -> &[usize] {
        &self.genes
    }

    fn allele_count(instance: &Instance) -> usize {
        instance.num_room_period_pairs()
    }

    fn decode(&self, _instance: &Instance) -> Timetable {
        Timetable::from_indices(&self.genes)
    }

    fn apply_move(
        &mut self,
        instance: &Instance,
        position: usize,
        allele: usize,
        mode: MoveMode,
    ) -> Result<(), EncodingError> {
        match mode {
            MoveMode::Simple => simple_move(
                &mut self.genes,
                position,
                allele,
                instance.num_room_period_pairs(),
            ),
            MoveMode::Chain => chain_move(instance, self, position, allele).map(|_| ()),
        }
    }
}
