//! Perpetual-calendar skill: resolves absolute or relative date references
//! against the request time and reports the weekday.

use std::fmt;
use std::sync::LazyLock;

use chrono::Datelike;
use regex::Regex;
use thiserror::Error;

use crate::text::contains_cjk;
use crate::types::SpatiotemporalState;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CalendarError {
    #[error("cannot resolve a date from {0:?}")]
    UnresolvableDate(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CivilDate {
    pub year: i32,
    pub month: u32,
    pub day: u32,
}

pub fn is_leap(year: i32) -> bool {
    (year % 4 == 0 && year % 100 != 0) || year % 400 == 0
}

pub fn days_in_month(year: i32, month: u32) -> u32 {
    match month {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if is_leap(year) => 29,
        2 => 28,
        _ => 0,
    }
}

impl CivilDate {
    pub fn new(year: i32, month: u32, day: u32) -> Option<Self> {
        (day >= 1 && day <= days_in_month(year, month)).then_some(CivilDate { year, month, day })
    }

    /// Days since 1970-01-01 in the proleptic Gregorian calendar.
    pub fn to_days(self) -> i64 {
        let y = i64::from(self.year) - i64::from(self.month <= 2);
        let era = y.div_euclid(400);
        let yoe = y - era * 400;
        let m = i64::from(self.month);
        let doy = (153 * (if m > 2 { m - 3 } else { m + 9 }) + 2) / 5 + i64::from(self.day) - 1;
        let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
        era * 146_097 + doe - 719_468
    }

    pub fn from_days(days: i64) -> Self {
        let z = days + 719_468;
        let era = z.div_euclid(146_097);
        let doe = z - era * 146_097;
        let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
        let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
        let mp = (5 * doy + 2) / 153;
        let day = (doy - (153 * mp + 2) / 5 + 1) as u32;
        let month = if mp < 10 { mp + 3 } else { mp - 9 } as u32;
        let year = (yoe + era * 400 + i64::from(month <= 2)) as i32;
        CivilDate { year, month, day }
    }

    pub fn add_days(self, n: i64) -> Self {
        CivilDate::from_days(self.to_days() + n)
    }

    pub fn weekday(self) -> Weekday {
        // 1970-01-01 was a Thursday
        Weekday::from_monday_index((self.to_days() + 3).rem_euclid(7) as u8)
    }
}

impl fmt::Display for CivilDate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-{:02}", self.year, self.month, self.day)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Weekday {
    Monday,
    Tuesday,
    Wednesday,
    Thursday,
    Friday,
    Saturday,
    Sunday,
}

impl Weekday {
    pub fn from_monday_index(i: u8) -> Self {
        use Weekday::*;
        [Monday, Tuesday, Wednesday, Thursday, Friday, Saturday, Sunday][usize::from(i % 7)]
    }

    pub fn monday_index(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        ["Monday", "Tuesday", "Wednesday", "Thursday", "Friday", "Saturday", "Sunday"][self as usize]
    }

    pub fn name_zh(self) -> &'static str {
        ["星期一", "星期二", "星期三", "星期四", "星期五", "星期六", "星期日"][self as usize]
    }
}

static ABSOLUTE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(\d{4})\s*[-./年]\s*(\d{1,2})\s*[-./月]\s*(\d{1,2})").expect("date regex"));

/// Relative references, most specific first.
const RELATIVE: &[(&str, Relative)] = &[
    ("day after tomorrow", Relative::Offset(2)),
    ("后天", Relative::Offset(2)),
    ("tomorrow", Relative::Offset(1)),
    ("明天", Relative::Offset(1)),
    ("明日", Relative::Offset(1)),
    ("yesterday", Relative::Offset(-1)),
    ("昨天", Relative::Offset(-1)),
    ("today", Relative::Offset(0)),
    ("今天", Relative::Offset(0)),
    ("今日", Relative::Offset(0)),
    ("weekend", Relative::Weekend),
    ("周末", Relative::Weekend),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Relative {
    Offset(i64),
    Weekend,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedDate {
    pub date: CivilDate,
    /// The relative word that produced the date, if any.
    pub relative: Option<&'static str>,
}

/// Finds the first temporal word (relative reference) in `text`.
pub fn temporal_word(text: &str) -> Option<&'static str> {
    let lower = text.to_lowercase();
    RELATIVE.iter().map(|(w, _)| *w).find(|w| lower.contains(w))
}

pub fn resolve_date(query: &str, today: CivilDate) -> Result<ResolvedDate, CalendarError> {
    if let Some(c) = ABSOLUTE.captures(query) {
        let num = |i: usize| c[i].parse::<i64>().unwrap_or(-1);
        let (y, m, d) = (num(1), num(2), num(3));
        return CivilDate::new(y as i32, m as u32, d as u32)
            .map(|date| ResolvedDate { date, relative: None })
            .ok_or_else(|| CalendarError::UnresolvableDate(query.to_string()));
    }
    let lower = query.to_lowercase();
    for (word, rel) in RELATIVE {
        if lower.contains(word) {
            let date = match rel {
                Relative::Offset(n) => today.add_days(*n),
                Relative::Weekend => {
                    // Saturday of the weekend we are in, or of the next one
                    let wd = i64::from(today.weekday().monday_index());
                    today.add_days(5 - wd)
                }
            };
            return Ok(ResolvedDate { date, relative: Some(word) });
        }
    }
    Err(CalendarError::UnresolvableDate(query.to_string()))
}

pub fn today_of(state: &SpatiotemporalState) -> CivilDate {
    let d = state.local_date();
    CivilDate { year: d.year(), month: d.month(), day: d.day() }
}

pub fn calendar_answer(query: &str, state: &SpatiotemporalState) -> Result<String, CalendarError> {
    let resolved = resolve_date(query, today_of(state))?;
    let (date, wd) = (resolved.date, resolved.date.weekday());
    let zh = contains_cjk(query);
    Ok(match (resolved.relative, zh) {
        (None, false) => format!("{date} is a {}.", wd.name()),
        (None, true) => format!("{date}是{}。", wd.name_zh()),
        (Some("weekend"), false) => {
            format!("The weekend starts {}, {date}.", wd.name())
        }
        (Some(word), false) => format!("{} is {}, {date}.", capitalize(word), wd.name()),
        (Some(word), true) => format!("{word}是{date}，{}。", wd.name_zh()),
    })
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    c.next().map_or_else(String::new, |f| f.to_uppercase().chain(c).collect())
}
