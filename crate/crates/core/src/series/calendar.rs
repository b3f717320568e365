//! A 365-day ("no leap") calendar.
//!
//! Every series in the toolkit is indexed on this calendar: February 29 does
//! not exist, so day-of-year arithmetic is exact modular arithmetic and a
//! year always holds 365 elements.

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};

pub const DAYS_PER_YEAR: usize = 365;

pub fn is_leap_day(date: NaiveDate) -> bool {
    date.month() == 2 && date.day() == 29
}

/// Day of year in 1..=365, ignoring February 29.
pub fn day_of_year(date: NaiveDate) -> Result<u32> {
    if is_leap_day(date) {
        return Err(Error::InvalidArgument(format!(
            "{date} does not exist on the 365-day calendar"
        )));
    }
    let ordinal = date.ordinal();
    let leap = NaiveDate::from_ymd_opt(date.year(), 2, 29).is_some();
    Ok(if leap && ordinal > 60 {
        ordinal - 1
    } else {
        ordinal
    })
}

/// Inverse of [`day_of_year`].
pub fn from_day_of_year(year: i32, doy: u32) -> Result<NaiveDate> {
    if !(1..=DAYS_PER_YEAR as u32).contains(&doy) {
        return Err(Error::InvalidArgument(format!(
            "day of year {doy} out of range"
        )));
    }
    let leap = NaiveDate::from_ymd_opt(year, 2, 29).is_some();
    let ordinal = if leap && doy >= 60 { doy + 1 } else { doy };
    NaiveDate::from_yo_opt(year, ordinal)
        .ok_or_else(|| Error::InvalidArgument(format!("year {year} out of range")))
}

/// `date` advanced by `days` on the 365-day calendar.
pub fn add_days(date: NaiveDate, days: usize) -> Result<NaiveDate> {
    let doy = day_of_year(date)? as usize - 1 + days;
    let year = date.year() + (doy / DAYS_PER_YEAR) as i32;
    from_day_of_year(year, (doy % DAYS_PER_YEAR) as u32 + 1)
}

/// Circular distance between two days of year.
pub fn doy_distance(a: u32, b: u32) -> u32 {
    let d = a.abs_diff(b);
    d.min(DAYS_PER_YEAR as u32 - d)
}
