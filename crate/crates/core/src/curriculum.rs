//! CDF normalization of raw difficulty and the competence schedule.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::difficulty::{DifficultyMethod, RawScores};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Empirical CDF of each value: the fraction of values at or below it.
/// Tied values share the same (upper) rank.
pub fn cdf_normalize<T: Scalar>(raw: &[T]) -> Result<Vec<T>> {
    if raw.is_empty() {
        return Err(Error::config("cannot normalize an empty score list"));
    }
    if let Some(id) = raw.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { id });
    }
    let n = raw.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| raw[a].partial_cmp(&raw[b]).expect("finite"));
    let total = T::from_count(n);
    let mut eps = vec![T::zero(); n];
    let mut start = 0;
    while start < n {
        let value = raw[order[start]];
        let mut end = start + 1;
        while end < n && raw[order[end]] == value {
            end += 1;
        }
        let e = T::from_count(end) / total;
        for &id in &order[start..end] {
            eps[id] = e;
        }
        start = end;
    }
    Ok(eps)
}

/// Maps a training step to a competence value.
pub trait CompetenceSchedule<T> {
    fn competence(&self, step: usize) -> T;
}

/// `min(1, lambda0 + t * increment)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearSchedule<T> {
    pub lambda0: T,
    pub increment: T,
}

impl<T: Scalar> LinearSchedule<T> {
    pub fn new(lambda0: T, increment: T) -> Result<Self> {
        if !(lambda0 > T::zero() && lambda0 <= T::one()) {
            return Err(Error::config(format!("lambda0 must lie in (0, 1], got {lambda0}")));
        }
        if !(increment >= T::zero() && increment.is_finite()) {
            return Err(Error::config(format!(
                "lambda increment must be finite and non-negative, got {increment}"
            )));
        }
        Ok(LinearSchedule { lambda0, increment })
    }

    /// First step at which competence reaches 1, or `None` if it never does.
    pub fn steps_to_full(&self) -> Option<u64> {
        full_competence_step(self.lambda0.as_f64(), self.increment.as_f64())
    }
}

impl<T: Scalar> CompetenceSchedule<T> for LinearSchedule<T> {
    fn competence(&self, step: usize) -> T {
        (self.lambda0 + T::from_count(step) * self.increment).min(T::one())
    }
}

/// Smallest `t` with `lambda0 + t * increment >= 1` under f64 arithmetic.
pub fn full_competence_step(lambda0: f64, increment: f64) -> Option<u64> {
    if lambda0 >= 1.0 {
        return Some(0);
    }
    if increment.is_nan() || increment <= 0.0 {
        return None;
    }
    let reaches = |t: u64| lambda0 + t as f64 * increment >= 1.0;
    let mut t = ((1.0 - lambda0) / increment).ceil().max(0.0) as u64;
    while t > 0 && reaches(t - 1) {
        t -= 1;
    }
    while !reaches(t) {
        t += 1;
    }
    Some(t)
}

/// Difficulty-sorted corpus view plus the competence schedule.
#[derive(Debug, Clone)]
pub struct CurriculumState<T> {
    method: DifficultyMethod,
    raw: Vec<T>,
    eps: Vec<T>,
    order: Vec<usize>,
    sorted_eps: Vec<T>,
    schedule: LinearSchedule<T>,
    step: usize,
}

impl<T: Scalar> CurriculumState<T> {
    pub fn new(raw: RawScores<T>, schedule: LinearSchedule<T>) -> Result<Self> {
        let eps = cdf_normalize(&raw.values)?;
        let mut order: Vec<usize> = (0..eps.len()).collect();
        // Stable sort keeps tied samples in id order.
        order.sort_by(|&a, &b| eps[a].partial_cmp(&eps[b]).expect("finite"));
        let sorted_eps = order.iter().map(|&i| eps[i]).collect();
        Ok(CurriculumState {
            method: raw.method,
            raw: raw.values,
            eps,
            order,
            sorted_eps,
            schedule,
            step: 0,
        })
    }

    pub fn method(&self) -> DifficultyMethod {
        self.method
    }

    pub fn raw(&self) -> &[T] {
        &self.raw
    }

    /// Normalized difficulty indexed by sample id.
    pub fn eps(&self) -> &[T] {
        &self.eps
    }

    /// Sample ids sorted by ascending difficulty.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    pub fn schedule(&self) -> &LinearSchedule<T> {
        &self.schedule
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn competence(&self, step: usize) -> T {
        self.schedule.competence(step)
    }

    /// Competence at the current step.
    pub fn current_competence(&self) -> T {
        self.competence(self.step)
    }

    /// Moves to the next training step.
    pub fn advance(&mut self) {
        self.step += 1;
    }

    /// Number of samples with `eps <= lambda`.
    pub fn eligible_count(&self, lambda: T) -> usize {
        self.sorted_eps.partition_point(|&e| e <= lambda)
    }

    /// Like [`eligible_count`](Self::eligible_count), but falls back to the
    /// easiest tie class when nothing is eligible. The flag reports the fallback.
    pub fn eligible_prefix(&self, lambda: T) -> (usize, bool) {
        match self.eligible_count(lambda) {
            0 if !self.is_empty() => (self.eligible_count(self.sorted_eps[0]), true),
            n => (n, false),
        }
    }

    /// Writes the curriculum file: a header line then `id<TAB>raw<TAB>eps`
    /// rows in id order.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "#method={} lambda0={} increment={}",
            self.method, self.schedule.lambda0, self.schedule.increment
        )?;
        for (id, (raw, eps)) in self.raw.iter().zip(&self.eps).enumerate() {
            writeln!(out, "{id}\t{raw}\t{eps}")?;
        }
        Ok(())
    }
}

/// A parsed curriculum file.
#[derive(Debug, Clone, PartialEq)]
pub struct CurriculumFile<T> {
    pub method: String,
    pub lambda0: T,
    pub increment: T,
    pub raw: Vec<T>,
    pub eps: Vec<T>,
}

impl<T: Scalar> CurriculumFile<T> {
    pub fn parse<R: BufRead>(reader: R, origin: &Path) -> Result<Self> {
        let schema = |line: usize, message: String| Error::Schema {
            file: origin.to_path_buf(),
            line,
            message,
        };
        let mut lines = reader.lines();
        let header = match lines.next() {
            Some(l) => l.map_err(|e| Error::io(origin, e))?,
            None => return Err(schema(1, "empty curriculum file".into())),
        };
        let header = header
            .strip_prefix('#')
            .ok_or_else(|| schema(1, "missing `#method=...` header".into()))?;
        let (mut method, mut lambda0, mut increment) = (None, None, None);
        for field in header.split_whitespace() {
            let (key, value) = field
                .split_once('=')
                .ok_or_else(|| schema(1, format!("malformed header field `{field}`")))?;
            let num = || {
                value
                    .parse::<T>()
                    .map_err(|_| schema(1, format!("bad number `{value}` for {key}")))
            };
            match key {
                "method" => method = Some(value.to_string()),
                "lambda0" => lambda0 = Some(num()?),
                "increment" => increment = Some(num()?),
                other => return Err(schema(1, format!("unknown header field `{other}`"))),
            }
        }
        let (Some(method), Some(lambda0), Some(increment)) = (method, lambda0, increment) else {
            return Err(schema(1, "header needs method, lambda0 and increment".into()));
        };
        let (mut raw, mut eps) = (Vec::new(), Vec::new());
        for (i, line) in lines.enumerate() {
            let lineno = i + 2;
            let line = line.map_err(|e| Error::io(origin, e))?;
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 3 {
                return Err(schema(lineno, format!("expected 3 columns, got {}", cols.len())));
            }
            if cols[0].parse::<usize>().ok() != Some(raw.len()) {
                return Err(schema(lineno, format!("expected id {}, got `{}`", raw.len(), cols[0])));
            }
            let parse = |s: &str| s.parse::<T>().map_err(|_| schema(lineno, format!("bad number `{s}`")));
            raw.push(parse(cols[1])?);
            eps.push(parse(cols[2])?);
        }
        Ok(CurriculumFile {
            method,
            lambda0,
            increment,
            raw,
            eps,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(std::io::BufReader::new(file), path)
    }
}
