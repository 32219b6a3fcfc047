//! Curriculum-based course timetabling instances.
//!
//! An [`Instance`] is parsed from the ITC-2007 `.ctt` text format and is
//! immutable afterwards. Besides the raw records it carries a few derived
//! tables (event list, course conflict matrix, unavailability grid) so the
//! evaluator and the genome decoders never have to look ids up by name.
//!
//! Events are the weekly lectures. They are numbered course by course in file
//! order, then by lecture index, so a file with courses `C1` and `C2` of two
//! lectures each yields the events `C1#0, C1#1, C2#0, C2#1`.
//!
//! Room-period pairs are numbered room-major:
//! `flat = room * periods_per_week + day * periods_per_day + period_in_day`.

use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Course {
    pub id: String,
    pub teacher: String,
    pub lectures_per_week: usize,
    pub min_working_days: usize,
    pub students: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Room {
    pub id: String,
    pub capacity: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Curriculum {
    pub id: String,
    pub course_ids: Vec<String>,
}

/// A period in which a course may not be scheduled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Unavailability {
    pub course_id: String,
    pub day: usize,
    pub period: usize,
}

/// One room at one slot of the weekly grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RoomPeriod {
    pub room: usize,
    pub day: usize,
    pub period_in_day: usize,
    pub period_in_week: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("{0}")]
    Syntax(String),
    #[error("{section} declares {declared} entries but {found} were given")]
    CountMismatch {
        section: &'static str,
        declared: usize,
        found: usize,
    },
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("unknown course `{0}`")]
    UnknownCourse(String),
    #[error("course `{course}` appears twice in curriculum `{curriculum}`")]
    DuplicateCurriculumMember { curriculum: String, course: String },
    #[error("day {day}, period {period} is outside the {days}x{periods_per_day} grid")]
    OutOfGrid {
        day: usize,
        period: usize,
        days: usize,
        periods_per_day: usize,
    },
    #[error("invalid course `{id}`: {reason}")]
    InvalidCourse { id: String, reason: String },
    #[error("days and periods per day must be positive")]
    EmptyGrid,
}

/// An [`InstanceError`] tied to the line of the `.ctt` text that caused it.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: InstanceError,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("room-period index {index} out of range (instance has {len} pairs)")]
pub struct IndexOutOfRange {
    pub index: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    name: String,
    courses: Vec<Course>,
    rooms: Vec<Room>,
    curricula: Vec<Curriculum>,
    unavailabilities: Vec<Unavailability>,
    days_in_week: usize,
    periods_per_day: usize,

    event_course: Vec<usize>,
    course_first_event: Vec<usize>,
    course_curricula: Vec<Vec<usize>>,
    curriculum_courses: Vec<Vec<usize>>,
    // course x course
    shares_curriculum: Vec<bool>,
    same_teacher: Vec<bool>,
    // course x period_in_week
    unavailable: Vec<bool>,
}

impl Instance {
    /// Validates the records and builds the derived tables.
    pub fn new(
        name: impl Into<String>,
        courses: Vec<Course>,
        rooms: Vec<Room>,
        curricula: Vec<Curriculum>,
        unavailabilities: Vec<Unavailability>,
        days_in_week: usize,
        periods_per_day: usize,
    ) -> Result<Self, InstanceError> {
        if days_in_week == 0 || periods_per_day == 0 {
            return Err(InstanceError::EmptyGrid);
        }
        let mut course_index = HashMap::with_capacity(courses.len());
        for (i, course) in courses.iter().enumerate() {
            validate_course(course, days_in_week)?;
            if course_index.insert(course.id.as_str(), i).is_some() {
                return Err(InstanceError::DuplicateId {
                    kind: "course",
                    id: course.id.clone(),
                });
            }
        }
        let mut seen = HashSet::new();
        for room in &rooms {
            if !seen.insert(room.id.as_str()) {
                return Err(InstanceError::DuplicateId {
                    kind: "room",
                    id: room.id.clone(),
                });
            }
        }
        let mut seen = HashSet::new();
        let mut curriculum_courses = Vec::with_capacity(curricula.len());
        for curriculum in &curricula {
            if !seen.insert(curriculum.id.as_str()) {
                return Err(InstanceError::DuplicateId {
                    kind: "curriculum",
                    id: curriculum.id.clone(),
                });
            }
            curriculum_courses.push(resolve_curriculum(curriculum, &course_index)?);
        }

        let n_courses = courses.len();
        let periods_per_week = days_in_week * periods_per_day;
        let mut unavailable = vec![false; n_courses * periods_per_week];
        for u in &unavailabilities {
            let c = *course_index
                .get(u.course_id.as_str())
                .ok_or_else(|| InstanceError::UnknownCourse(u.course_id.clone()))?;
            check_grid(u.day, u.period, days_in_week, periods_per_day)?;
            unavailable[c * periods_per_week + u.day * periods_per_day + u.period] = true;
        }

        let mut course_curricula = vec![Vec::new(); n_courses];
        for (q, members) in curriculum_courses.iter().enumerate() {
            for &c in members {
                course_curricula[c].push(q);
            }
        }
        let mut shares_curriculum = vec![false; n_courses * n_courses];
        for members in &curriculum_courses {
            for &a in members {
                for &b in members {
                    if a != b {
                        shares_curriculum[a * n_courses + b] = true;
                    }
                }
            }
        }
        let mut same_teacher = vec![false; n_courses * n_courses];
        for a in 0..n_courses {
            for b in 0..n_courses {
                if a != b && courses[a].teacher == courses[b].teacher {
                    same_teacher[a * n_courses + b] = true;
                }
            }
        }

        let mut event_course = Vec::new();
        let mut course_first_event = Vec::with_capacity(n_courses);
        for (c, course) in courses.iter().enumerate() {
            course_first_event.push(event_course.len());
            event_course.extend(std::iter::repeat_n(c, course.lectures_per_week));
        }

        Ok(Self {
            name: name.into(),
            courses,
            rooms,
            curricula,
            unavailabilities,
            days_in_week,
            periods_per_day,
            event_course,
            course_first_event,
            course_curricula,
            curriculum_courses,
            shares_curriculum,
            same_teacher,
            unavailable,
        })
    }

    /// Parses the ITC-2007 curriculum-based `.ctt` format.
    pub fn parse(text: &str) -> Result<Self, ParseError> {
        Parser::new(text).parse()
    }

    /// Renders the instance back to `.ctt` text.
    pub fn to_ctt(&self) -> String {
        self.to_string()
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn courses(&self) -> &[Course] {
        &self.courses
    }

    pub fn rooms(&self) -> &[Room] {
        &self.rooms
    }

    pub fn curricula(&self) -> &[Curriculum] {
        &self.curricula
    }

    pub fn unavailabilities(&self) -> &[Unavailability] {
        &self.unavailabilities
    }

    pub fn days_in_week(&self) -> usize {
        self.days_in_week
    }

    pub fn periods_per_day(&self) -> usize {
        self.periods_per_day
    }

    pub fn periods_per_week(&self) -> usize {
        self.days_in_week * self.periods_per_day
    }

    /// Total weekly lectures over all courses; the length of both genomes.
    pub fn num_events(&self) -> usize {
        self.event_course.len()
    }

    pub fn num_room_period_pairs(&self) -> usize {
        self.rooms.len() * self.periods_per_week()
    }

    /// Index of the course that owns `event`.
    pub fn event_course(&self, event: usize) -> usize {
        self.event_course[event]
    }

    /// Events belonging to `course`, as a contiguous range.
    pub fn course_events(&self, course: usize) -> std::ops::Range<usize> {
        let start = self.course_first_event[course];
        start..start + self.courses[course].lectures_per_week
    }

    /// Curriculum indices `course` is a member of.
    pub fn course_curricula(&self, course: usize) -> &[usize] {
        &self.course_curricula[course]
    }

    /// Course indices of curriculum `curriculum`, in file order.
    pub fn curriculum_courses(&self, curriculum: usize) -> &[usize] {
        &self.curriculum_courses[curriculum]
    }

    /// True when two distinct courses are members of a common curriculum.
    pub fn shares_curriculum(&self, a: usize, b: usize) -> bool {
        self.shares_curriculum[a * self.courses.len() + b]
    }

    /// True when two distinct courses are taught by the same teacher.
    pub fn same_teacher(&self, a: usize, b: usize) -> bool {
        self.same_teacher[a * self.courses.len() + b]
    }

    /// True when lectures of `a` and `b` may not share a period: same course,
    /// common curriculum, or common teacher.
    pub fn courses_conflict(&self, a: usize, b: usize) -> bool {
        a == b || self.shares_curriculum(a, b) || self.same_teacher(a, b)
    }

    pub fn is_unavailable(&self, course: usize, period_in_week: usize) -> bool {
        self.unavailable[course * self.periods_per_week() + period_in_week]
    }

    pub fn room_period_of_index(&self, flat_index: usize) -> Result<RoomPeriod, IndexOutOfRange> {
        let len = self.num_room_period_pairs();
        if flat_index >= len {
            return Err(IndexOutOfRange {
                index: flat_index,
                len,
            });
        }
        let ppw = self.periods_per_week();
        let period_in_week = flat_index % ppw;
        Ok(RoomPeriod {
            room: flat_index / ppw,
            day: period_in_week / self.periods_per_day,
            period_in_day: period_in_week % self.periods_per_day,
            period_in_week,
        })
    }

    pub fn flat_index(&self, rp: &RoomPeriod) -> usize {
        rp.room * self.periods_per_week() + rp.period_in_week
    }

    /// Period-in-week of a flat room-period index.
    pub fn period_of_index(&self, flat_index: usize) -> usize {
        flat_index % self.periods_per_week()
    }

    pub fn room_of_index(&self, flat_index: usize) -> usize {
        flat_index / self.periods_per_week()
    }
}

fn validate_course(course: &Course, days: usize) -> Result<(), InstanceError> {
    let invalid = |reason: &str| InstanceError::InvalidCourse {
        id: course.id.clone(),
        reason: reason.to_owned(),
    };
    if course.lectures_per_week == 0 {
        return Err(invalid("must have at least one lecture"));
    }
    if course.min_working_days == 0 {
        return Err(invalid("minimum working days must be positive"));
    }
    if course.min_working_days > days {
        return Err(invalid("minimum working days exceed the days in the week"));
    }
    Ok(())
}

fn resolve_curriculum(
    curriculum: &Curriculum,
    course_index: &HashMap<&str, usize>,
) -> Result<Vec<usize>, InstanceError> {
    let mut members = Vec::with_capacity(curriculum.course_ids.len());
    for id in &curriculum.course_ids {
        let c = *course_index
            .get(id.as_str())
            .ok_or_else(|| InstanceError::UnknownCourse(id.clone()))?;
        if members.contains(&c) {
            return Err(InstanceError::DuplicateCurriculumMember {
                curriculum: curriculum.id.clone(),
                course: id.clone(),
            });
        }
        members.push(c);
    }
    Ok(members)
}

fn check_grid(
    day: usize,
    period: usize,
    days: usize,
    periods_per_day: usize,
) -> Result<(), InstanceError> {
    if day >= days || period >= periods_per_day {
        return Err(InstanceError::OutOfGrid {
            day,
            period,
            days,
            periods_per_day,
        });
    }
    Ok(())
}

impl fmt::Display for Instance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Name: {}", self.name)?;
        writeln!(f, "Courses: {}", self.courses.len())?;
        writeln!(f, "Rooms: {}", self.rooms.len())?;
        writeln!(f, "Days: {}", self.days_in_week)?;
        writeln!(f, "Periods_per_day: {}", self.periods_per_day)?;
        writeln!(f, "Curricula: {}", self.curricula.len())?;
        writeln!(f, "Constraints: {}", self.unavailabilities.len())?;
        writeln!(f)?;
        writeln!(f, "COURSES:")?;
        for c in &self.courses {
            writeln!(
                f,
                "{} {} {} {} {}",
                c.id, c.teacher, c.lectures_per_week, c.min_working_days, c.students
            )?;
        }
        writeln!(f)?;
        writeln!(f, "ROOMS:")?;
        for r in &self.rooms {
            writeln!(f, "{}\t{}", r.id, r.capacity)?;
        }
        writeln!(f)?;
        writeln!(f, "CURRICULA:")?;
        for q in &self.curricula {
            write!(f, "{}  {}", q.id, q.course_ids.len())?;
            for id in &q.course_ids {
                write!(f, " {id}")?;
            }
            writeln!(f)?;
        }
        writeln!(f)?;
        writeln!(f, "UNAVAILABILITY_CONSTRAINTS:")?;
        for u in &self.unavailabilities {
            writeln!(f, "{} {} {}", u.course_id, u.day, u.period)?;
        }
        writeln!(f)?;
        writeln!(f, "END.")
    }
}

struct Parser<'a> {
    lines: Vec<(usize, Vec<&'a str>)>,
    pos: usize,
    eof_line: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        let mut last = 0;
        let lines = text
            .lines()
            .enumerate()
            .inspect(|(i, _)| last = i + 1)
            .map(|(i, l)| (i + 1, l.split_whitespace().collect::<Vec<_>>()))
            .filter(|(_, tokens)| !tokens.is_empty())
            .collect();
        Self {
            lines,
            pos: 0,
            eof_line: last + 1,
        }
    }

    fn current_line(&self) -> usize {
        self.lines.get(self.pos).map_or(self.eof_line, |(l, _)| *l)
    }

    fn err(line: usize, kind: InstanceError) -> ParseError {
        ParseError { line, kind }
    }

    fn syntax(line: usize, msg: impl Into<String>) -> ParseError {
        Self::err(line, InstanceError::Syntax(msg.into()))
    }

    fn next_line(&mut self, what: &str) -> Result<(usize, Vec<&'a str>), ParseError> {
        match self.lines.get(self.pos) {
            Some(l) => {
                self.pos += 1;
                Ok(l.clone())
            }
            None => Err(Self::syntax(
                self.eof_line,
                format!("unexpected end of input, expected {what}"),
            )),
        }
    }

    fn header(&mut self, key: &str) -> Result<(usize, &'a str), ParseError> {
        let (line, tokens) = self.next_line(&format!("`{key}` header"))?;
        match tokens.as_slice() {
            [k, v] if *k == key => Ok((line, v)),
            _ => Err(Self::syntax(line, format!("expected `{key} <value>`"))),
        }
    }

    fn header_count(&mut self, key: &str) -> Result<usize, ParseError> {
        let (line, v) = self.header(key)?;
        parse_usize(v, line)
    }

    fn expect_section(&mut self, name: &str) -> Result<usize, ParseError> {
        let (line, tokens) = self.next_line(&format!("`{name}` section"))?;
        if tokens.as_slice() != [name] {
            return Err(Self::syntax(line, format!("expected `{name}`")));
        }
        Ok(line)
    }

    /// Collects record lines up to the next `SECTION:` or `END.` marker.
    fn section_records(
        &mut self,
        name: &'static str,
        declared: usize,
    ) -> Result<Vec<(usize, Vec<&'a str>)>, ParseError> {
        let header_line = self.expect_section(name)?;
        let mut records = Vec::new();
        while let Some((_, tokens)) = self.lines.get(self.pos) {
            if tokens.len() == 1 && (tokens[0].ends_with(':') || tokens[0] == "END.") {
                break;
            }
            records.push(self.lines[self.pos].clone());
            self.pos += 1;
        }
        if records.len() != declared {
            return Err(Self::err(
                header_line,
                InstanceError::CountMismatch {
                    section: name,
                    declared,
                    found: records.len(),
                },
            ));
        }
        Ok(records)
    }

    fn parse(mut self) -> Result<Instance, ParseError> {
        let (_, name) = self.header("Name:")?;
        let n_courses = self.header_count("Courses:")?;
        let n_rooms = self.header_count("Rooms:")?;
        let days_line = self.current_line();
        let days = self.header_count("Days:")?;
        let ppd = self.header_count("Periods_per_day:")?;
        if days == 0 || ppd == 0 {
            return Err(Self::err(days_line, InstanceError::EmptyGrid));
        }
        let n_curricula = self.header_count("Curricula:")?;
        let n_constraints = self.header_count("Constraints:")?;

        let mut course_index: HashMap<&str, usize> = HashMap::new();
        let mut courses = Vec::with_capacity(n_courses);
        for (line, tokens) in self.section_records("COURSES:", n_courses)? {
            let [id, teacher, lectures, min_days, students] = tokens.as_slice() else {
                return Err(Self::syntax(
                    line,
                    "expected `<id> <teacher> <lectures> <min_working_days> <students>`",
                ));
            };
            let course = Course {
                id: (*id).to_owned(),
                teacher: (*teacher).to_owned(),
                lectures_per_week: parse_usize(lectures, line)?,
                min_working_days: parse_usize(min_days, line)?,
                students: parse_usize(students, line)?,
            };
            validate_course(&course, days).map_err(|e| Self::err(line, e))?;
            if course_index.insert(id, courses.len()).is_some() {
                return Err(Self::err(
                    line,
                    InstanceError::DuplicateId {
                        kind: "course",
                        id: (*id).to_owned(),
                    },
                ));
            }
            courses.push(course);
        }

        let mut room_ids = HashSet::new();
        let mut rooms = Vec::with_capacity(n_rooms);
        for (line, tokens) in self.section_records("ROOMS:", n_rooms)? {
            let [id, capacity] = tokens.as_slice() else {
                return Err(Self::syntax(line, "expected `<id> <capacity>`"));
            };
            if !room_ids.insert(*id) {
                return Err(Self::err(
                    line,
                    InstanceError::DuplicateId {
                        kind: "room",
                        id: (*id).to_owned(),
                    },
                ));
            }
            rooms.push(Room {
                id: (*id).to_owned(),
                capacity: parse_usize(capacity, line)?,
            });
        }

        let mut curriculum_ids = HashSet::new();
        let mut curricula = Vec::with_capacity(n_curricula);
        for (line, tokens) in self.section_records("CURRICULA:", n_curricula)? {
            let [id, count, members @ ..] = tokens.as_slice() else {
                return Err(Self::syntax(line, "expected `<id> <#courses> <course>...`"));
            };
            let count = parse_usize(count, line)?;
            if members.len() != count {
                return Err(Self::err(
                    line,
                    InstanceError::CountMismatch {
                        section: "curriculum",
                        declared: count,
                        found: members.len(),
                    },
                ));
            }
            if !curriculum_ids.insert(*id) {
                return Err(Self::err(
                    line,
                    InstanceError::DuplicateId {
                        kind: "curriculum",
                        id: (*id).to_owned(),
                    },
                ));
            }
            let curriculum = Curriculum {
                id: (*id).to_owned(),
                course_ids: members.iter().map(|s| (*s).to_owned()).collect(),
            };
            resolve_curriculum(&curriculum, &course_index).map_err(|e| Self::err(line, e))?;
            curricula.push(curriculum);
        }

        let mut unavailabilities = Vec::with_capacity(n_constraints);
        for (line, tokens) in self.section_records("UNAVAILABILITY_CONSTRAINTS:", n_constraints)? {
            let [course, day, period] = tokens.as_slice() else {
                return Err(Self::syntax(line, "expected `<course> <day> <period>`"));
            };
            if !course_index.contains_key(course) {
                return Err(Self::err(
                    line,
                    InstanceError::UnknownCourse((*course).to_owned()),
                ));
            }
            let day = parse_usize(day, line)?;
            let period = parse_usize(period, line)?;
            check_grid(day, period, days, ppd).map_err(|e| Self::err(line, e))?;
            unavailabilities.push(Unavailability {
                course_id: (*course).to_owned(),
                day,
                period,
            });
        }

        let (line, tokens) = self.next_line("`END.`")?;
        if tokens.as_slice() != ["END."] {
            return Err(Self::syntax(line, "expected `END.`"));
        }
        if let Some((line, _)) = self.lines.get(self.pos) {
            return Err(Self::syntax(*line, "unexpected content after `END.`"));
        }

        let end_line = line;
        Instance::new(name, courses, rooms, curricula, unavailabilities, days, ppd)
            .map_err(|e| Self::err(end_line, e))
    }
}

fn parse_usize(token: &str, line: usize) -> Result<usize, ParseError> {
    token.parse().map_err(|_| ParseError {
        line,
        kind: InstanceError::Syntax(format!("expected a non-negative integer, found `{token}`")),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const TOY: &str = include_str!("../tests/fixtures/toy.ctt");

    fn course(id: &str, lectures: usize) -> Course {
        Course {
            id: id.into(),
            teacher: format!("t_{id}"),
            lectures_per_week: lectures,
            min_working_days: 1,
            students: 10,
        }
    }

    fn grid(rooms: usize, days: usize, periods: usize, lectures: &[usize]) -> Instance {
        let courses = lectures
            .iter()
            .enumerate()
            .map(|(i, &l)| course(&format!("c{i}"), l))
            .collect();
        let rooms = (0..rooms)
            .map(|i| Room {
                id: format!("r{i}"),
                capacity: 30,
            })
            .collect();
        Instance::new("grid", courses, rooms, vec![], vec![], days, periods).unwrap()
    }

    #[test]
    fn toy_dimensions() {
        let inst = Instance::parse(TOY).unwrap();
        assert_eq!(inst.name(), "Toy");
        assert_eq!(inst.days_in_week(), 2);
        assert_eq!(inst.periods_per_day(), 2);
        assert_eq!(inst.num_events(), 4);
        assert_eq!(inst.num_room_period_pairs(), 8);
        assert_eq!(
            (0..4).map(|e| inst.event_course(e)).collect::<Vec<_>>(),
            vec![0, 0, 1, 1]
        );
    }

    #[test]
    fn event_and_pair_counts() {
        assert_eq!(grid(1, 1, 1, &[1]).num_events(), 1);
        assert_eq!(grid(1, 1, 1, &[3, 1, 2]).num_events(), 6);
        assert_eq!(grid(1, 1, 1, &[1]).num_room_period_pairs(), 1);
        assert_eq!(grid(3, 5, 6, &[1]).num_room_period_pairs(), 90);
    }

    #[test]
    fn event_list_follows_cumulative_lecture_counts() {
        let inst = grid(1, 2, 2, &[3, 1, 2]);
        let owners: Vec<_> = (0..6).map(|e| inst.event_course(e)).collect();
        assert_eq!(owners, vec![0, 0, 0, 1, 2, 2]);
        assert_eq!(inst.course_events(2), 4..6);
    }

    #[test]
    fn toy_room_periods() {
        let inst = Instance::parse(TOY).unwrap();
        let rp = inst.room_period_of_index(7).unwrap();
        assert_eq!(
            rp,
            RoomPeriod {
                room: 1,
                day: 1,
                period_in_day: 1,
                period_in_week: 3
            }
        );
        let rp = inst.room_period_of_index(0).unwrap();
        assert_eq!((rp.room, rp.day, rp.period_in_day), (0, 0, 0));
        let rp = inst.room_period_of_index(3).unwrap();
        assert_eq!(
            (rp.room, rp.day, rp.period_in_day, rp.period_in_week),
            (0, 1, 1, 3)
        );
        assert_eq!(
            inst.room_period_of_index(8),
            Err(IndexOutOfRange { index: 8, len: 8 })
        );
    }

    #[test]
    fn empty_text_fails_on_line_one() {
        let err = Instance::parse("").unwrap_err();
        assert_eq!(err.line, 1);
        assert!(matches!(err.kind, InstanceError::Syntax(_)));
    }

    #[test]
    fn count_mismatch_is_reported() {
        let text = TOY.replace("Courses: 2", "Courses: 3");
        let err = Instance::parse(&text).unwrap_err();
        assert_eq!(err.line, 9);
        assert_eq!(
            err.kind,
            InstanceError::CountMismatch {
                section: "COURSES:",
                declared: 3,
                found: 2
            }
        );
    }

    #[test]
    fn dangling_and_out_of_grid_references() {
        let text = TOY
            .replace("Curricula: 0", "Curricula: 1")
            .replace("CURRICULA:\n", "CURRICULA:\nQ1 2 C1 C9\n");
        let err = Instance::parse(&text).unwrap_err();
        assert_eq!(err.line, 18);
        assert_eq!(err.kind, InstanceError::UnknownCourse("C9".into()));

        let text = TOY.replace("Constraints: 0", "Constraints: 1").replace(
            "UNAVAILABILITY_CONSTRAINTS:\n",
            "UNAVAILABILITY_CONSTRAINTS:\nC1 0 2\n",
        );
        let err = Instance::parse(&text).unwrap_err();
        assert!(matches!(
            err.kind,
            InstanceError::OutOfGrid { period: 2, .. }
        ));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = TOY.replace("R2 20", "R1 20");
        let err = Instance::parse(&text).unwrap_err();
        assert_eq!(err.line, 15);
        assert!(matches!(
            err.kind,
            InstanceError::DuplicateId { kind: "room", .. }
        ));
    }

    #[test]
    fn ids_are_case_sensitive() {
        let text = TOY
            .replace("Curricula: 0", "Curricula: 1")
            .replace("CURRICULA:\n", "CURRICULA:\nQ1 2 c1 C2\n");
        assert!(Instance::parse(&text).is_err());
    }

    #[test]
    fn conflict_tables() {
        let text = TOY
            .replace("Curricula: 0", "Curricula: 1")
            .replace("CURRICULA:\n", "CURRICULA:\nQ1 2 C1 C2\n")
            .replace("Constraints: 0", "Constraints: 1")
            .replace(
                "UNAVAILABILITY_CONSTRAINTS:\n",
                "UNAVAILABILITY_CONSTRAINTS:\nC2 1 0\n",
            );
        let inst = Instance::parse(&text).unwrap();
        assert!(inst.shares_curriculum(0, 1));
        assert!(!inst.same_teacher(0, 1));
        assert!(inst.courses_conflict(0, 0));
        assert!(inst.is_unavailable(1, 2));
        assert!(!inst.is_unavailable(0, 2));
        assert_eq!(inst.course_curricula(1), &[0]);
    }

    #[test]
    fn serialize_round_trip() {
        let inst = Instance::parse(TOY).unwrap();
        assert_eq!(Instance::parse(&inst.to_ctt()).unwrap(), inst);
    }

    proptest::proptest! {
        #[test]
        fn flat_index_round_trip(rooms in 1usize..5, days in 1usize..6, periods in 1usize..7, seed in 0usize..1000) {
            let inst = grid(rooms, days, periods, &[1]);
            let i = seed % inst.num_room_period_pairs();
            let rp = inst.room_period_of_index(i).unwrap();
            proptest::prop_assert_eq!(inst.flat_index(&rp), i);
            proptest::prop_assert_eq!(rp.period_in_week, rp.day * periods + rp.period_in_day);
        }
    }
}
