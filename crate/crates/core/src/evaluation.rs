//! Constraint evaluation.
//!
//! Hard constraints are counted per violation, soft constraints as weighted
//! penalty points:
//!
//! | code | rule | unit |
//! |------|------|------|
//! | HC1 | lectures of one course in distinct periods | clashing pair, plus 1 per unassigned lecture |
//! | HC2 | one lecture per room and period | clashing pair |
//! | HC3 | courses of a curriculum in distinct periods | clashing pair |
//! | HC4 | courses of a teacher in distinct periods | clashing pair |
//! | HC5 | no lecture in an unavailable period | lecture |
//! | SC1 | room capacity | 1 per student over capacity |
//! | SC2 | minimum working days | 5 per missing day |
//! | SC3 | curriculum compactness | 2 per isolated lecture |
//! | SC4 | room stability | 1 per extra room used by a course |

use std::fmt;

use thiserror::Error;

use crate::instance::{Instance, RoomPeriod};

/// Weight applied to each hard violation in the soft stage.
pub const HARD_WEIGHT: u64 = 1000;

const MIN_DAYS_WEIGHT: u64 = 5;
const ISOLATED_WEIGHT: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    Hard,
    Soft,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Hard => "HARD",
            Stage::Soft => "SOFT",
        })
    }
}

/// Feasibility category of an evaluated solution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Feasible,
    NonFeasible,
}

impl Label {
    pub fn token(self) -> &'static str {
        match self {
            Label::Feasible => "F",
            Label::NonFeasible => "NF",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        match token {
            "F" => Some(Label::Feasible),
            "NF" => Some(Label::NonFeasible),
            _ => None,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvaluationError {
    #[error("timetable has {found} events, instance has {expected}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("event {0} is unassigned")]
    Unassigned(usize),
    #[error("event {event} assigned to room-period {index}, instance has {len}")]
    SlotOutOfRange {
        event: usize,
        index: usize,
        len: usize,
    },
}

/// Assignment of every event to a flat room-period index, or to nothing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Timetable {
    slots: Vec<Option<usize>>,
}

impl Timetable {
    pub fn new(slots: Vec<Option<usize>>) -> Self {
        Self { slots }
    }

    pub fn unassigned(num_events: usize) -> Self {
        Self {
            slots: vec![None; num_events],
        }
    }

    /// A fully assigned timetable from flat room-period indices.
    pub fn from_indices(indices: &[usize]) -> Self {
        Self {
            slots: indices.iter().copied().map(Some).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn slot(&self, event: usize) -> Option<usize> {
        self.slots[event]
    }

    pub fn slots(&self) -> &[Option<usize>] {
        &self.slots
    }

    pub fn set(&mut self, event: usize, slot: Option<usize>) {
        self.slots[event] = slot;
    }

    pub fn is_complete(&self) -> bool {
        self.slots.iter().all(Option::is_some)
    }

    pub fn room_period(&self, instance: &Instance, event: usize) -> Option<RoomPeriod> {
        self.slots[event].and_then(|i| instance.room_period_of_index(i).ok())
    }

    /// ITC-2007 solution text: `<course> <room> <day> <period>` per assigned
    /// lecture, in event order.
    pub fn to_solution_text(&self, instance: &Instance) -> String {
        let mut out = String::new();
        for event in 0..self.slots.len() {
            if let Some(rp) = self.room_period(instance, event) {
                let course = &instance.courses()[instance.event_course(event)];
                let room = &instance.rooms()[rp.room];
                out.push_str(&format!(
                    "{} {} {} {}\n",
                    course.id, room.id, rp.day, rp.period_in_day
                ));
            }
        }
        out
    }

    fn check(&self, instance: &Instance) -> Result<(), EvaluationError> {
        if self.slots.len() != instance.num_events() {
            return Err(EvaluationError::LengthMismatch {
                expected: instance.num_events(),
                found: self.slots.len(),
            });
        }
        let len = instance.num_room_period_pairs();
        for (event, slot) in self.slots.iter().enumerate() {
            if let Some(index) = *slot {
                if index >= len {
                    return Err(EvaluationError::SlotOutOfRange { event, index, len });
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ViolationReport {
    pub hc1: u64,
    pub hc2: u64,
    pub hc3: u64,
    pub hc4: u64,
    pub hc5: u64,
    pub sc1: u64,
    pub sc2: u64,
    pub sc3: u64,
    pub sc4: u64,
}

impl ViolationReport {
    pub fn hard_total(&self) -> u64 {
        self.hc1 + self.hc2 + self.hc3 + self.hc4 + self.hc5
    }

    pub fn soft_total(&self) -> u64 {
        self.sc1 + self.sc2 + self.sc3 + self.sc4
    }

    pub fn fitness(&self, stage: Stage) -> u64 {
        match stage {
            Stage::Hard => self.hard_total(),
            Stage::Soft => HARD_WEIGHT * self.hard_total() + self.soft_total(),
        }
    }

    pub fn label(&self) -> Label {
        if self.hard_total() == 0 {
            Label::Feasible
        } else {
            Label::NonFeasible
        }
    }
}

/// Counts HC1-HC5. The soft fields of the returned report are zero.
pub fn hard_violations(
    instance: &Instance,
    timetable: &Timetable,
) -> Result<ViolationReport, EvaluationError> {
    timetable.check(instance)?;
    let mut report = ViolationReport::default();
    let mut by_period: Vec<Vec<usize>> = vec![Vec::new(); instance.periods_per_week()];
    let mut room_load = vec![0u64; instance.num_room_period_pairs()];

    for (event, slot) in timetable.slots.iter().enumerate() {
        let Some(index) = *slot else {
            report.hc1 += 1;
            continue;
        };
        let period = instance.period_of_index(index);
        let course = instance.event_course(event);
        if instance.is_unavailable(course, period) {
            report.hc5 += 1;
        }
        report.hc2 += room_load[index];
        room_load[index] += 1;
        by_period[period].push(course);
    }

    for courses in &by_period {
        for (i, &a) in courses.iter().enumerate() {
            for &b in &courses[i + 1..] {
                if a == b {
                    report.hc1 += 1;
                    continue;
                }
                if instance.shares_curriculum(a, b) {
                    report.hc3 += 1;
                }
                if instance.same_teacher(a, b) {
                    report.hc4 += 1;
                }
            }
        }
    }
    Ok(report)
}

/// Computes SC1-SC4 on a fully assigned timetable. The hard fields of the
/// returned report are zero.
pub fn soft_penalty(
    instance: &Instance,
    timetable: &Timetable,
) -> Result<ViolationReport, EvaluationError> {
    timetable.check(instance)?;
    if let Some(event) = timetable.slots.iter().position(Option::is_none) {
        return Err(EvaluationError::Unassigned(event));
    }
    let slot = |e: usize| timetable.slots[e].unwrap_or_default();
    let ppd = instance.periods_per_day();
    let ppw = instance.periods_per_week();
    let mut report = ViolationReport::default();

    for (c, course) in instance.courses().iter().enumerate() {
        let mut days = vec![false; instance.days_in_week()];
        let mut rooms = vec![false; instance.rooms().len()];
        for e in instance.course_events(c) {
            let index = slot(e);
            let room = instance.room_of_index(index);
            let capacity = instance.rooms()[room].capacity;
            report.sc1 += course.students.saturating_sub(capacity) as u64;
            days[instance.period_of_index(index) / ppd] = true;
            rooms[room] = true;
        }
        let used_days = days.iter().filter(|&&d| d).count();
        report.sc2 += MIN_DAYS_WEIGHT * course.min_working_days.saturating_sub(used_days) as u64;
        let used_rooms = rooms.iter().filter(|&&r| r).count();
        report.sc4 += used_rooms.saturating_sub(1) as u64;
    }

    let mut load = vec![0u32; ppw];
    for q in 0..instance.curricula().len() {
        load.iter_mut().for_each(|l| *l = 0);
        let members = instance.curriculum_courses(q);
        for &c in members {
            for e in instance.course_events(c) {
                load[instance.period_of_index(slot(e))] += 1;
            }
        }
        for &c in members {
            for e in instance.course_events(c) {
                let p = instance.period_of_index(slot(e));
                let t = p % ppd;
                let before = t > 0 && load[p - 1] > 0;
                let after = t + 1 < ppd && load[p + 1] > 0;
                if !before && !after {
                    report.sc3 += ISOLATED_WEIGHT;
                }
            }
        }
    }
    Ok(report)
}

/// Full report. Soft components are only computed on complete timetables and
/// are zero otherwise.
pub fn evaluate(
    instance: &Instance,
    timetable: &Timetable,
) -> Result<ViolationReport, EvaluationError> {
    let hard = hard_violations(instance, timetable)?;
    if !timetable.is_complete() {
        return Ok(hard);
    }
    let soft = soft_penalty(instance, timetable)?;
    Ok(ViolationReport {
        sc1: soft.sc1,
        sc2: soft.sc2,
        sc3: soft.sc3,
        sc4: soft.sc4,
        ..hard
    })
}

/// Stage-dependent fitness; lower is better. The soft stage requires a
/// complete timetable.
pub fn fitness(
    instance: &Instance,
    timetable: &Timetable,
    stage: Stage,
) -> Result<u64, EvaluationError> {
    match stage {
        Stage::Hard => Ok(hard_violations(instance, timetable)?.hard_total()),
        Stage::Soft => {
            let hard = hard_violations(instance, timetable)?;
            let soft = soft_penalty(instance, timetable)?;
            Ok(HARD_WEIGHT * hard.hard_total() + soft.soft_total())
        }
    }
}

pub fn is_feasible(instance: &Instance, timetable: &Timetable) -> Result<Label, EvaluationError> {
    Ok(hard_violations(instance, timetable)?.label())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Course, Curriculum, Room};

    const TOY: &str = include_str!("../tests/fixtures/toy.ctt");

    fn toy() -> Instance {
        Instance::parse(TOY).unwrap()
    }

    fn single_course(
        students: usize,
        capacity: usize,
        lectures: usize,
        min_days: usize,
    ) -> Instance {
        Instance::new(
            "one",
            vec![Course {
                id: "c".into(),
                teacher: "t".into(),
                lectures_per_week: lectures,
                min_working_days: min_days,
                students,
            }],
            vec![
                Room {
                    id: "small".into(),
                    capacity,
                },
                Room {
                    id: "big".into(),
                    capacity: 500,
                },
            ],
            vec![],
            vec![],
            2,
            2,
        )
        .unwrap()
    }

    #[test]
    fn room_clash_between_different_courses() {
        let inst = toy();
        // C1#0 and C2#0 both in R1 period 0; the others spread out.
        let tt = Timetable::from_indices(&[0, 1, 0, 2]);
        let r = hard_violations(&inst, &tt).unwrap();
        assert_eq!((r.hc1, r.hc2, r.hc3, r.hc4, r.hc5), (0, 1, 0, 0, 0));
    }

    #[test]
    fn reference_schedule_is_feasible() {
        let inst = toy();
        let tt = Timetable::from_indices(&[7, 0, 3, 1]);
        let r = hard_violations(&inst, &tt).unwrap();
        assert_eq!(r.hard_total(), 0);
        assert_eq!(is_feasible(&inst, &tt).unwrap(), Label::Feasible);
    }

    #[test]
    fn empty_instance_has_no_violations() {
        let inst = Instance::new("empty", vec![], vec![], vec![], vec![], 1, 1).unwrap();
        let r = evaluate(&inst, &Timetable::unassigned(0)).unwrap();
        assert_eq!(r, ViolationReport::default());
    }

    #[test]
    fn unassigned_lectures_count_as_hc1() {
        let inst = toy();
        let tt = Timetable::unassigned(4);
        let r = hard_violations(&inst, &tt).unwrap();
        assert_eq!(r.hc1, 4);
        assert_eq!(is_feasible(&inst, &tt).unwrap(), Label::NonFeasible);
        assert_eq!(
            soft_penalty(&inst, &tt),
            Err(EvaluationError::Unassigned(0))
        );
    }

    #[test]
    fn same_room_same_period_is_infeasible() {
        let inst = toy();
        let tt = Timetable::from_indices(&[0, 1, 2, 2]);
        assert_eq!(is_feasible(&inst, &tt).unwrap(), Label::NonFeasible);
    }

    #[test]
    fn length_mismatch() {
        let inst = toy();
        assert_eq!(
            hard_violations(&inst, &Timetable::from_indices(&[0, 1])),
            Err(EvaluationError::LengthMismatch {
                expected: 4,
                found: 2
            })
        );
    }

    #[test]
    fn over_capacity_students() {
        let inst = single_course(30, 25, 1, 1);
        let r = soft_penalty(&inst, &Timetable::from_indices(&[0])).unwrap();
        assert_eq!(r.sc1, 5);
    }

    #[test]
    fn missing_working_day() {
        let inst = single_course(10, 25, 2, 2);
        // both lectures on day 0 (periods 0 and 1 of R1)
        let r = soft_penalty(&inst, &Timetable::from_indices(&[0, 1])).unwrap();
        assert_eq!(r.sc2, 5);
        let r = soft_penalty(&inst, &Timetable::from_indices(&[0, 2])).unwrap();
        assert_eq!(r.sc2, 0);
    }

    #[test]
    fn room_stability() {
        let inst = single_course(10, 25, 2, 1);
        let same = soft_penalty(&inst, &Timetable::from_indices(&[0, 2])).unwrap();
        assert_eq!(same.sc4, 0);
        let split = soft_penalty(&inst, &Timetable::from_indices(&[0, 6])).unwrap();
        assert_eq!(split.sc4, 1);
    }

    #[test]
    fn isolated_curriculum_lectures() {
        let text = TOY
            .replace("Curricula: 0", "Curricula: 1")
            .replace("CURRICULA:\n", "CURRICULA:\nQ1 2 C1 C2\n");
        let inst = Instance::parse(&text).unwrap();
        // day 0: C1#0 p0, C2#0 p1 adjacent; day 1: C1#1 p0 (pw 2), C2#1 p1 (pw 3) adjacent
        let r = soft_penalty(&inst, &Timetable::from_indices(&[0, 2, 1, 3])).unwrap();
        assert_eq!(r.sc3, 0);
        // C2#1 moved to R2 on day 0, leaving C1#1 alone on day 1
        let r = soft_penalty(&inst, &Timetable::from_indices(&[0, 2, 1, 4])).unwrap();
        assert_eq!(r.sc3, 2);
    }

    #[test]
    fn fitness_weights() {
        let inst = toy();
        let tt = Timetable::from_indices(&[7, 0, 3, 1]);
        let r = evaluate(&inst, &tt).unwrap();
        assert_eq!(fitness(&inst, &tt, Stage::Soft).unwrap(), r.soft_total());
        assert_eq!(fitness(&inst, &tt, Stage::Hard).unwrap(), 0);

        let r = ViolationReport {
            hc2: 1,
            sc1: 7,
            ..Default::default()
        };
        assert_eq!(r.fitness(Stage::Soft), 1007);
        let r = ViolationReport {
            hc1: 1,
            hc3: 2,
            ..Default::default()
        };
        assert_eq!(r.fitness(Stage::Hard), 3);
    }

    #[test]
    fn curriculum_and_teacher_clashes() {
        let inst = Instance::new(
            "clash",
            vec![
                Course {
                    id: "a".into(),
                    teacher: "t1".into(),
                    lectures_per_week: 1,
                    min_working_days: 1,
                    students: 1,
                },
                Course {
                    id: "b".into(),
                    teacher: "t1".into(),
                    lectures_per_week: 1,
                    min_working_days: 1,
                    students: 1,
                },
            ],
            vec![
                Room {
                    id: "r1".into(),
                    capacity: 10,
                },
                Room {
                    id: "r2".into(),
                    capacity: 10,
                },
            ],
            vec![Curriculum {
                id: "q".into(),
                course_ids: vec!["a".into(), "b".into()],
            }],
            vec![],
            1,
            2,
        )
        .unwrap();
        // same period, different rooms
        let r = hard_violations(&inst, &Timetable::from_indices(&[0, 2])).unwrap();
        assert_eq!((r.hc1, r.hc2, r.hc3, r.hc4), (0, 0, 1, 1));
    }

    #[test]
    fn solution_text() {
        let inst = toy();
        let tt = Timetable::from_indices(&[7, 0, 3, 1]);
        assert_eq!(
            tt.to_solution_text(&inst),
            "C1 R2 1 1\nC1 R1 0 0\nC2 R1 1 1\nC2 R1 0 1\n"
        );
    }
}
