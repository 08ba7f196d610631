//! JSON file formats for instances and schedules.
//!
//! Instance: `{"jobs":[{"p":2,"r":0,"d":5,"w":1}, ...]}`.
//! Schedule: `{"starts":[{"job":0,"start":3}, ...]}`.
//! Unknown fields, negative numbers and non-integers are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, Job, Schedule, Time, Weight};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    pub jobs: Vec<Job>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartEntry {
    pub job: usize,
    pub start: Time,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleFile {
    pub starts: Vec<StartEntry>,
}

/// An instance as loaded from a file, with zero-length jobs split off.
///
/// A job with `p = 0` is early exactly when `r <= d` (it runs at its
/// release date and takes no time), so it never interacts with the others.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Normalized {
    /// Positive-length jobs; `None` if every job had `p = 0`.
    pub instance: Option<Instance>,
    /// For each job of `instance`, its index in the file.
    pub original_index: Vec<usize>,
    /// Zero-length jobs as `(file index, release date, early?)`.
    pub zero_length: Vec<(usize, Time, bool)>,
    /// Weight of the zero-length jobs that are early.
    pub offset: Weight,
    pub file_len: usize,
}

impl Normalized {
    /// Lifts a schedule of the normalized instance back to file indices,
    /// starting each zero-length job at its release date.
    pub fn lift_schedule(&self, sched: &Schedule) -> Schedule {
        let mut out = Schedule::new();
        for (j, s) in sched.iter() {
            out.set(self.original_index[j], s);
        }
        for &(j, r, _) in &self.zero_length {
            out.set(j, r);
        }
        out
    }
}

pub fn parse_instance(text: &str) -> Result<InstanceFile> {
    Ok(serde_json::from_str(text)?)
}

pub fn normalize(file: &InstanceFile) -> Result<Normalized> {
    if file.jobs.is_empty() {
        return Err(Error::InvalidInstance("an instance needs at least one job".into()));
    }
    let mut jobs = Vec::new();
    let mut original_index = Vec::new();
    let mut zero_length = Vec::new();
    let mut offset = 0;
    for (i, job) in file.jobs.iter().enumerate() {
        if job.p == 0 {
            let early = job.r <= job.d;
            if early {
                offset += job.w;
            }
            zero_length.push((i, job.r, early));
        } else {
            jobs.push(*job);
            original_index.push(i);
        }
    }
    let instance = if jobs.is_empty() { None } else { Some(Instance::new(jobs)?) };
    Ok(Normalized { instance, original_index, zero_length, offset, file_len: file.jobs.len() })
}

/// Parses an instance file that must not contain zero-length jobs.
pub fn read_instance(text: &str) -> Result<Instance> {
    Instance::new(parse_instance(text)?.jobs)
}

pub fn instance_to_json(inst: &Instance) -> String {
    let file = InstanceFile { jobs: inst.jobs().to_vec() };
    serde_json::to_string_pretty(&file).expect("instances always serialize")
}

pub fn parse_schedule(text: &str) -> Result<Schedule> {
    let file: ScheduleFile = serde_json::from_str(text)?;
    let mut sched = Schedule::new();
    for entry in file.starts {
        if sched.start(entry.job).is_some() {
            return Err(Error::Parse(format!("job {} has more than one start time", entry.job)));
        }
        sched.set(entry.job, entry.start);
    }
    Ok(sched)
}

pub fn schedule_to_json(sched: &Schedule) -> String {
    let file = ScheduleFile { starts: sched.iter().map(|(job, start)| StartEntry { job, start }).collect() };
    serde_json::to_string_pretty(&file).expect("schedules always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_instance() {
        let inst = read_instance(r#"{"jobs":[{"p":2,"r":0,"d":5,"w":1}]}"#).unwrap();
        assert_eq!(inst.jobs(), &[Job::new(2, 0, 5, 1)]);
    }

    #[test]
    fn rejects_unknown_fields_and_non_integers() {
        assert!(parse_instance(r#"{"jobs":[{"p":2,"r":0,"d":5,"w":1,"x":3}]}"#).is_err());
        assert!(parse_instance(r#"{"jobs":[],"extra":1}"#).is_err());
        assert!(parse_instance(r#"{"jobs":[{"p":2.5,"r":0,"d":5,"w":1}]}"#).is_err());
        assert!(parse_instance(r#"{"jobs":[{"p":-2,"r":0,"d":5,"w":1}]}"#).is_err());
        assert!(parse_schedule(r#"{"starts":[{"job":0,"start":1.0}]}"#).is_err());
        assert!(parse_schedule(r#"{"starts":[{"job":0,"start":1,"end":3}]}"#).is_err());
    }

    #[test]
    fn rejects_duplicate_start() {
        assert!(parse_schedule(r#"{"starts":[{"job":0,"start":1},{"job":0,"start":2}]}"#).is_err());
    }

    #[test]
    fn normalizes_zero_length_jobs() {
        let file = parse_instance(
            r#"{"jobs":[{"p":0,"r":1,"d":3,"w":4},{"p":2,"r":0,"d":5,"w":1},{"p":0,"r":4,"d":3,"w":9}]}"#,
        )
        .unwrap();
        let n = normalize(&file).unwrap();
        assert_eq!(n.offset, 4);
        assert_eq!(n.original_index, vec![1]);
        assert_eq!(n.instance.as_ref().unwrap().n(), 1);
        let lifted = n.lift_schedule(&Schedule::from_starts([0]));
        assert_eq!(
            lifted,
            [(0, 1), (1, 0), (2, 4)].into_iter().fold(Schedule::new(), |mut s, (j, t)| {
                s.set(j, t);
                s
            })
        );
    }

    #[test]
    fn schedule_json_round_trip() {
        let s = Schedule::from_starts([3, 0, 7]);
        assert_eq!(parse_schedule(&schedule_to_json(&s)).unwrap(), s);
    }
}
